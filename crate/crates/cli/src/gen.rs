use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde_json::{json, Value};

use causal_fields::io::{honeycomb, marginals_csv, materialise_window, order_from_json, order_to_json, to_dot, LoadedOrder, OrderJson};
use causal_fields::order::{DiamondLattice, Window};

use crate::common::{parse_range, read_file, read_order, CliError, Output, WindowArgs};

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum GenKind {
    /// A window of the diamond lattice as an explicit order.
    Diamond {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        t: (i64, i64),
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        x: (i64, i64),
    },
    /// A brick-wall honeycomb window with its collapse onto the diamond lattice.
    Honeycomb {
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        t: (i64, i64),
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true, default_value = "-3..3")]
        x: (i64, i64),
    },
    /// Validate an order file and write it back in canonical form.
    File {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

pub fn gen(args: GenArgs) -> Result<Output, CliError> {
    let value = match args.kind {
        GenKind::Diamond { d, t, x } => {
            let lattice = DiamondLattice::new(d)?;
            serde_json::to_value(order_to_json(&materialise_window(&lattice, &Window::cube(t, x, d))?))?
        }
        GenKind::Honeycomb { t, x } => {
            let h = honeycomb(t, x)?;
            let map: Vec<(String, String)> = h
                .order
                .ids()
                .map(|e| (h.order.name(e).to_string(), h.diamond.name(h.collapse.apply(e)).to_string()))
                .collect();
            let mut v = serde_json::to_value(order_to_json(&h.order))?;
            v["collapse"] = json!({ "codomain": order_to_json(&h.diamond), "map": map });
            v
        }
        GenKind::File { input } => {
            let j: OrderJson = serde_json::from_str(&read_file(&input)?)?;
            serde_json::to_value(order_to_json(&order_from_json(&j)?))?
        }
    };
    Output::json(&value, args.out)
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(subcommand)]
    format: ExportFormat,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ExportFormat {
    /// Hasse diagram of an order (lattices need a window).
    Dot {
        #[arg(long)]
        order: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Single-site marginals of a run dump, one row per step and site.
    Csv {
        #[arg(long)]
        run: PathBuf,
    },
}

pub fn export(args: ExportArgs) -> Result<Output, CliError> {
    let text = match args.format {
        ExportFormat::Dot { order, window } => match read_order(&order)? {
            LoadedOrder::Finite(o) => to_dot(&o),
            LoadedOrder::Lattice(l) => to_dot(&materialise_window(&l, &window.require(&l)?)?),
        },
        ExportFormat::Csv { run } => {
            let dump: Value = serde_json::from_str(&read_file(&run)?)?;
            marginals_csv(&marginal_rows(&dump)?)
        }
    };
    Ok(Output::new(text, args.out))
}

/// (time, site, probability) rows of the evolved steps of a run dump.
pub fn marginal_rows(dump: &Value) -> Result<Vec<(i64, i64, f64)>, CliError> {
    let bad = || CliError::usage("not a run dump: expected steps[].marginals[].{site, probability}");
    let mut rows = Vec::new();
    for step in dump["steps"].as_array().ok_or_else(bad)? {
        let t = step["t"].as_i64().ok_or_else(bad)?;
        for m in step["marginals"].as_array().ok_or_else(bad)? {
            rows.push((t, m["site"].as_i64().ok_or_else(bad)?, m["probability"].as_f64().ok_or_else(bad)?));
        }
    }
    Ok(rows)
}
