use std::path::PathBuf;

use clap::{Args, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use causal_fields::cca::{DiracWalk, LatticeSlice};
use causal_fields::field_theory::FieldTheory;
use causal_fields::io::{marginals_csv, state_from_json};
use causal_fields::order::{CausalOrder, Window};
use causal_fields::process::{Backend, ProcObject, ProcState};

use crate::common::{read_cca, read_file, write_file, CliError, Output};
use crate::gen::marginal_rows;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mover {
    Left,
    Right,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Automaton configuration (JSON).
    #[arg(long)]
    cca: PathBuf,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Ring size; overrides the configuration. Defaults to 64 for the Dirac
    /// walk and 8 otherwise.
    #[arg(long)]
    period: Option<i64>,
    /// Mass, overriding the Dirac configuration.
    #[arg(long, allow_hyphen_values = true)]
    m: Option<f64>,
    /// Mesh, overriding the Dirac configuration.
    #[arg(long)]
    eps: Option<f64>,
    /// Starting site of the Dirac particle (even).
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    site: i64,
    #[arg(long, value_enum, default_value_t = Mover::Left)]
    mover: Mover,
    /// Initial state on the t = 0 leaf, in the format the run output uses.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Also write single-site marginals as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: RunArgs) -> Result<Output, CliError> {
    let mut config = read_cca(&args.cca)?;
    let dump = if let Some(dirac) = config.dirac.clone() {
        if args.init.is_some() {
            return Err(CliError::usage("--init is not supported for the Dirac walk; use --site and --mover"));
        }
        let period = args.period.or(config.period).unwrap_or(64);
        walk(&args, period, args.m.unwrap_or(dirac.m), args.eps.unwrap_or(dirac.eps))?
    } else {
        if args.m.is_some() || args.eps.is_some() {
            return Err(CliError::usage("--m and --eps need a Dirac configuration"));
        }
        config.period = Some(args.period.or(config.period).unwrap_or(8));
        density(&args, &config.build()?)?
    };
    if let Some(path) = &args.csv {
        write_file(path, &marginals_csv(&marginal_rows(&dump)?))?;
    }
    Output::json(&dump, args.out)
}

fn amplitudes(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn walk_record(w: &DiracWalk) -> Value {
    let marginals: Vec<Value> = w
        .density()
        .iter()
        .enumerate()
        .map(|(x, p)| json!({"site": x, "probability": p}))
        .collect();
    json!({
        "t": w.time(),
        "state": {"left": amplitudes(w.left()), "right": amplitudes(w.right())},
        "marginals": marginals,
    })
}

fn walk(args: &RunArgs, period: i64, m: f64, eps: f64) -> Result<Value, CliError> {
    if period <= 0 {
        return Err(CliError::usage(format!("period must be positive, got {period}")));
    }
    let site = args.site.rem_euclid(period);
    if site % 2 != 0 {
        return Err(CliError::usage("the walk starts on even sites"));
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mover = args.mover;
    let mut w = DiracWalk::new(period as usize, m, eps, |x| match (x == site, mover) {
        (false, _) => (zero, zero),
        (true, Mover::Left) => (one, zero),
        (true, Mover::Right) => (zero, one),
    })?;
    let initial = walk_record(&w);
    let n0 = w.norm();
    let mut drift: f64 = 0.0;
    let mut steps = Vec::with_capacity(args.steps);
    for _ in 0..args.steps {
        w.step();
        drift = drift.max((w.norm() / n0 - 1.0).abs());
        steps.push(walk_record(&w));
    }
    Ok(json!({
        "mode": "dirac-walk",
        "period": period,
        "m": m,
        "eps": eps,
        "initial": initial,
        "steps": steps,
        "norm_drift": drift,
    }))
}

/// Probability that each site's cell block is not all zero.
fn site_marginals(state: &ProcState, sites: usize) -> Vec<f64> {
    let factors = state.object().factors();
    let per_site = if sites == 0 { 0 } else { factors.len() / sites };
    let mut out = vec![0.0; sites];
    for (i, p) in state.diagonal().iter().enumerate() {
        let mut rest = i;
        let mut digits = vec![0; factors.len()];
        for (k, f) in factors.iter().enumerate().rev() {
            digits[k] = rest % f;
            rest /= f;
        }
        for (s, m) in out.iter_mut().enumerate() {
            if digits[s * per_site..(s + 1) * per_site].iter().any(|&d| d != 0) {
                *m += p;
            }
        }
    }
    out
}

fn density_record<O: CausalOrder<Event = causal_fields::LatticePoint>>(
    o: &O,
    t: i64,
    leaf: &LatticeSlice,
    state: &ProcState,
) -> Value {
    let marginals: Vec<Value> = leaf
        .iter()
        .zip(site_marginals(state, leaf.len()))
        .map(|(e, p)| json!({"site": e.x[0], "probability": p}))
        .collect();
    json!({
        "t": t,
        "slice": leaf.iter().map(|e| o.label(e)).collect::<Vec<_>>(),
        "state": state.to_json(),
        "marginals": marginals,
    })
}

fn ground(object: ProcObject) -> Result<ProcState, CliError> {
    let n = object.dim();
    Ok(match object.backend() {
        Backend::Quantum => {
            let mut psi = vec![Complex64::new(0.0, 0.0); n];
            psi[0] = Complex64::new(1.0, 0.0);
            ProcState::pure(object, &psi)?
        }
        Backend::Classical => {
            let mut p = vec![0.0; n];
            p[0] = 1.0;
            ProcState::probabilities(object, p)?
        }
    })
}

fn density(args: &RunArgs, cca: &causal_fields::cca::Cca) -> Result<Value, CliError> {
    if cca.lattice().dim() != 1 {
        return Err(CliError::usage("runs on rings need d = 1"));
    }
    let leaf = |t: i64| cca.category().layer_slice(t, &Window::new((t, t), vec![]));
    let first = leaf(0);
    let object = cca.object(&first)?;
    let mut state = match &args.init {
        Some(path) => state_from_json(&serde_json::from_str(&read_file(path)?)?, &object)?,
        None => ground(object)?,
    };
    let o = cca.lattice();
    let initial = density_record(o, 0, &first, &state);
    let mut drift: f64 = (state.trace() - 1.0).abs();
    let mut steps = Vec::with_capacity(args.steps);
    let mut current = first;
    for t in 1..=args.steps as i64 {
        let next = leaf(t);
        state = cca.morphism(&current, &next)?.apply(&state)?;
        drift = drift.max((state.trace() - 1.0).abs());
        steps.push(density_record(o, t, &next, &state));
        current = next;
    }
    Ok(json!({
        "mode": "density",
        "period": o.period(),
        "initial": initial,
        "steps": steps,
        "norm_drift": drift,
    }))
}
