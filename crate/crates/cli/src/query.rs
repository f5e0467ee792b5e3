use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use causal_fields::io::{parse_events, LoadedOrder};
use causal_fields::order::{causal_paths, diamond, future, future_domain, past, past_domain, CausalOrder, Window};
use causal_fields::slices::{enumerate_slices, is_cauchy, maximal_slices, Slice};

use crate::common::{read_order, split_events, CliError, Output, WindowArgs};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum What {
    Future,
    Past,
    Dplus,
    Dminus,
    Diamond,
    Paths,
    Slices,
    Cauchy,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    what: What,
    #[arg(long)]
    order: std::path::PathBuf,
    /// Event set, comma separated (';' separated for lattice events).
    #[arg(long, allow_hyphen_values = true)]
    events: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    from: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<String>,
    /// Only maximal slices.
    #[arg(long)]
    maximal: bool,
    #[command(flatten)]
    window: WindowArgs,
}

pub fn query(args: QueryArgs) -> Result<Output, CliError> {
    let value = match read_order(&args.order)? {
        LoadedOrder::Finite(o) => answer(&o, &args, None)?,
        LoadedOrder::Lattice(l) => {
            let w = args.window.window(&l);
            answer(&l, &args, w.as_ref())?
        }
    };
    Output::json(&value, None)
}

fn labels<O: CausalOrder>(o: &O, events: impl IntoIterator<Item = O::Event>) -> Vec<String> {
    events.into_iter().map(|e| o.label(&e)).collect()
}

fn answer<O: CausalOrder>(o: &O, args: &QueryArgs, window: Option<&Window>) -> Result<Value, CliError> {
    let set = || -> Result<_, CliError> {
        let names = args.events.as_deref().ok_or_else(|| CliError::usage("--events is required"))?;
        Ok(parse_events(o, &split_events(names))?)
    };
    let endpoint = |s: &Option<String>, flag: &str| -> Result<O::Event, CliError> {
        let name = s.as_deref().ok_or_else(|| CliError::usage(format!("--{flag} is required")))?;
        Ok(o.parse_event(name)?)
    };
    Ok(match args.what {
        What::Future => json!(labels(o, future(o, &set()?, window)?)),
        What::Past => json!(labels(o, past(o, &set()?, window)?)),
        What::Dplus => json!(labels(o, future_domain(o, &set()?, window)?)),
        What::Dminus => json!(labels(o, past_domain(o, &set()?, window)?)),
        What::Diamond => {
            let (x, y) = (endpoint(&args.from, "from")?, endpoint(&args.to, "to")?);
            json!(labels(o, diamond(o, &x, &y)?))
        }
        What::Paths => {
            let (x, y) = (endpoint(&args.from, "from")?, endpoint(&args.to, "to")?);
            let paths: Vec<Vec<String>> = causal_paths(o, &x, &y)?.map(|p| labels(o, p)).collect();
            json!(paths)
        }
        What::Slices => {
            let it = if args.maximal {
                maximal_slices(o, window)?
            } else {
                enumerate_slices(o, window)?
            };
            let mut all: Vec<Vec<String>> = it.map(|s| labels(o, s.into_set())).collect();
            all.sort();
            json!(all)
        }
        What::Cauchy => {
            let s = Slice::new(o, set()?).map_err(|e| CliError::usage(e.to_string()))?;
            json!({ "events": labels(o, s.as_set().iter().cloned()), "cauchy": is_cauchy(o, &s, window)? })
        }
    })
}
