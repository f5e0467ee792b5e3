use std::path::PathBuf;

use causal_fields::cca::CcaError;
use causal_fields::field_theory::FieldError;
use causal_fields::io::{load_order, CcaConfigJson, IoError, LoadedOrder};
use causal_fields::order::{DiamondLattice, OrderError, Window};
use causal_fields::process::ProcessError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Cca(#[from] CcaError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Process(#[from] ProcessError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

/// What a command produced: text for stdout or a file, plus whether any law
/// was violated.
pub struct Output {
    pub text: String,
    pub path: Option<PathBuf>,
    pub violations: bool,
}

impl Output {
    pub fn new(text: String, path: Option<PathBuf>) -> Self {
        Output {
            text,
            path,
            violations: false,
        }
    }

    pub fn json(value: &serde_json::Value, path: Option<PathBuf>) -> Result<Self, CliError> {
        Ok(Output::new(serde_json::to_string_pretty(value)? + "\n", path))
    }

    pub fn emit(&self) -> Result<(), CliError> {
        match &self.path {
            Some(p) => write_file(p, &self.text),
            None => {
                print!("{}", self.text);
                Ok(())
            }
        }
    }
}

pub fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.clone(),
        source,
    })
}

pub fn write_file(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::File {
        path: path.clone(),
        source,
    })
}

pub fn read_order(path: &PathBuf) -> Result<LoadedOrder, CliError> {
    Ok(load_order(&read_file(path)?)?)
}

pub fn read_cca(path: &PathBuf) -> Result<CcaConfigJson, CliError> {
    Ok(serde_json::from_str(&read_file(path)?)?)
}

/// Parses "a..b" (inclusive).
pub fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a range a..b, got {s:?}"))?;
    let a: i64 = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
    let b: i64 = b.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
    if a > b {
        return Err(format!("empty range {s:?}"));
    }
    Ok((a, b))
}

/// Comma-separated list, with whitespace trimmed. Lattice events contain
/// commas themselves, so events are separated by ';' when any is present.
pub fn split_events(s: &str) -> Vec<String> {
    let sep = if s.contains(';') { ';' } else { ',' };
    s.split(sep).map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()
}

#[derive(Debug, Clone, clap::Args)]
pub struct WindowArgs {
    /// Time range of the lattice window, as a..b.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub t: Option<(i64, i64)>,
    /// Spatial range of the lattice window in every direction, as a..b. On a
    /// ring the whole ring is used when omitted.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub x: Option<(i64, i64)>,
}

impl WindowArgs {
    pub fn window(&self, lattice: &DiamondLattice) -> Option<Window> {
        let t = self.t?;
        Some(match (self.x, lattice.period()) {
            (Some(x), _) => Window::cube(t, x, lattice.dim()),
            (None, Some(_)) => Window::new(t, vec![]),
            (None, None) => return None,
        })
    }

    pub fn window_or(&self, lattice: &DiamondLattice, t: (i64, i64), x: (i64, i64)) -> Window {
        let t = self.t.unwrap_or(t);
        match (self.x, lattice.period()) {
            (Some(x), _) => Window::cube(t, x, lattice.dim()),
            (None, Some(_)) => Window::new(t, vec![]),
            (None, None) => Window::cube(t, x, lattice.dim()),
        }
    }

    pub fn require(&self, lattice: &DiamondLattice) -> Result<Window, CliError> {
        self.window(lattice)
            .ok_or_else(|| CliError::usage("this query on the lattice needs a window (--t and --x)"))
    }
}
