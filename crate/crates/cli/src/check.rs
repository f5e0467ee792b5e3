use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use causal_fields::cca::{
    build_reversal, check_invariance, check_symmetry_action, words_up_to, Cca, CcaCategory, CcaError, Comparison,
    LatticeSlice, LatticeTranslations, SymmetryAction,
};
use causal_fields::field_theory::{
    check_environment, check_functoriality, check_monoidality, check_reversal, composable_triples, leads_to_pairs,
    sample_zigzag_pairs, separated_quadruples, FieldError, FieldTheory,
};
use causal_fields::io::{foliation_from_json, FoliationJson, LoadedOrder};
use causal_fields::order::{CausalOrder, DiamondLattice};
use causal_fields::process::ProcMorphism;
use causal_fields::slices::{enumerate_slices, validate_foliation, validate_slice_category, AllSlices, ValidationOptions};
use causal_fields::{Report, VALIDITY_TOL};

use crate::common::{read_cca, read_file, read_order, CliError, Output, WindowArgs};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    Functoriality,
    Monoidality,
    Nosignalling,
    Reversal,
    Symmetry,
    Invariance,
    Foliation,
    Category,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    target: Target,
    /// Automaton configuration (JSON).
    #[arg(long)]
    cca: Option<PathBuf>,
    /// Order file (JSON), for foliation, category and symmetry checks.
    #[arg(long)]
    order: Option<PathBuf>,
    /// Leaves as a JSON list of event lists, or a file holding one.
    #[arg(long)]
    leaves: Option<String>,
    /// Number of sampled instances.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = VALIDITY_TOL)]
    tol: f64,
    /// Largest number of sites per sampled slice.
    #[arg(long, default_value_t = 2)]
    max_sites: usize,
    /// Longest group word for symmetry and invariance checks.
    #[arg(long, default_value_t = 3)]
    word_length: usize,
    #[command(flatten)]
    window: WindowArgs,
}

const DEFAULT_T: (i64, i64) = (0, 2);
const DEFAULT_X: (i64, i64) = (-3, 3);

pub fn check(args: CheckArgs) -> Result<Output, CliError> {
    let report = match args.target {
        Target::Functoriality => {
            let (cca, objs) = automaton(&args)?;
            let triples = sample(composable_triples(cca.category(), &objs), &args);
            check_functoriality(&cca, &triples, args.tol)
        }
        Target::Monoidality => {
            let (cca, objs) = automaton(&args)?;
            let quads = separated_quadruples(cca.category(), &objs, args.samples, args.seed);
            check_monoidality(&cca, &quads, args.tol)
        }
        Target::Nosignalling => {
            let (cca, objs) = automaton(&args)?;
            let quads = separated_quadruples(cca.category(), &objs, args.samples, args.seed);
            let mut pairs: Vec<(LatticeSlice, LatticeSlice)> = quads
                .iter()
                .flat_map(|q| [(q.sigma.clone(), q.sigma_to.clone()), (q.gamma.clone(), q.gamma_to.clone())])
                .collect();
            let mut separated: Vec<(LatticeSlice, LatticeSlice)> = quads
                .iter()
                .flat_map(|q| [(q.sigma.clone(), q.gamma.clone()), (q.sigma_to.clone(), q.gamma_to.clone())])
                .collect();
            for v in [&mut pairs, &mut separated] {
                v.sort();
                v.dedup();
            }
            check_environment(&cca, &pairs, &separated, args.tol)
        }
        Target::Reversal => {
            let (cca, objs) = automaton(&args)?;
            match build_reversal(&cca) {
                Ok(rev) => {
                    let pairs = sample_zigzag_pairs(cca.category(), rev.category(), &objs, args.samples, 2, args.seed);
                    check_reversal(&cca, &rev, &pairs, args.tol)
                }
                Err(CcaError::NotInvertible(why)) => {
                    let mut r = Report::new("reversal");
                    r.check(false, || json!({"condition": "invertible scattering", "error": why}));
                    r
                }
                Err(e) => return Err(e.into()),
            }
        }
        Target::Symmetry => {
            let lattice = lattice_of(&args)?;
            let window = args.window.window_or(&lattice, DEFAULT_T, DEFAULT_X);
            let act = LatticeTranslations::new(lattice.clone());
            let cat = CcaCategory::new(lattice.clone());
            let events = lattice.events(Some(&window))?;
            let objs = cat.objects_in(&window, args.max_sites);
            let words = words_up_to(act.generator_count(), args.word_length);
            check_symmetry_action(&act, &cat, &words, &events, &objs, None)
        }
        Target::Invariance => {
            let (cca, objs) = automaton(&args)?;
            let act = LatticeTranslations::new(cca.lattice().clone());
            let pairs = sample(leads_to_pairs(cca.category(), &objs), &args);
            let words = words_up_to(act.generator_count(), args.word_length);
            if cca.lattice().period().is_some() {
                // on a ring translated slices are stored in a different
                // order, so α reindexes the blocks
                let alpha = |g: usize, inv: bool, s: &LatticeSlice| -> Result<ProcMorphism, FieldError> {
                    Ok(cca.reindexing(s, |e| act.act(g, inv, e))?)
                };
                check_invariance(&cca, &act, &alpha, &words, &pairs, Comparison::Tolerance(args.tol))
            } else {
                let alpha = |_: usize, _: bool, s: &LatticeSlice| -> Result<ProcMorphism, FieldError> {
                    Ok(ProcMorphism::identity(&cca.object(s)?))
                };
                check_invariance(&cca, &act, &alpha, &words, &pairs, Comparison::Exact)
            }
        }
        Target::Foliation => {
            let raw = args.leaves.as_deref().ok_or_else(|| CliError::usage("--leaves is required"))?;
            let text = if raw.trim_start().starts_with('[') {
                raw.to_string()
            } else {
                read_file(&PathBuf::from(raw))?
            };
            let leaves: Vec<Vec<String>> = serde_json::from_str(&text)?;
            let spec = FoliationJson { leaves };
            match order_of(&args)? {
                LoadedOrder::Finite(o) => validate_foliation(&o, &foliation_from_json(&o, &spec)?, None),
                LoadedOrder::Lattice(l) => {
                    let w = args.window.window(&l);
                    validate_foliation(&l, &foliation_from_json(&l, &spec)?, w.as_ref())
                }
            }
        }
        Target::Category => {
            let opts = ValidationOptions {
                seed: args.seed,
                ..ValidationOptions::default()
            };
            if args.cca.is_some() {
                let (cca, objs) = automaton(&args)?;
                validate_slice_category(cca.category(), &objs, &opts)
            } else {
                match order_of(&args)? {
                    LoadedOrder::Finite(o) => {
                        let objs: Vec<_> = enumerate_slices(&o, None)?.collect();
                        validate_slice_category(&AllSlices::new(o), &objs, &opts)
                    }
                    LoadedOrder::Lattice(l) => {
                        let w = args.window.window_or(&l, DEFAULT_T, DEFAULT_X);
                        let objs: Vec<_> = enumerate_slices(&l, Some(&w))?.collect();
                        validate_slice_category(&AllSlices::windowed(l, w), &objs, &opts)
                    }
                }
            }
        }
    };
    let mut out = Output::json(&serde_json::to_value(&report)?, None)?;
    out.violations = !report.passed();
    Ok(out)
}

fn automaton(args: &CheckArgs) -> Result<(Cca, Vec<LatticeSlice>), CliError> {
    let path = args.cca.as_ref().ok_or_else(|| CliError::usage("--cca is required for this check"))?;
    let cca = read_cca(path)?.build()?;
    let window = args.window.window_or(cca.lattice(), DEFAULT_T, DEFAULT_X);
    let objs = cca.category().objects_in(&window, args.max_sites);
    Ok((cca, objs))
}

fn order_of(args: &CheckArgs) -> Result<LoadedOrder, CliError> {
    let path = args.order.as_ref().ok_or_else(|| CliError::usage("--order is required for this check"))?;
    read_order(path)
}

fn lattice_of(args: &CheckArgs) -> Result<DiamondLattice, CliError> {
    if let Some(path) = &args.cca {
        return Ok(read_cca(path)?.lattice()?);
    }
    match order_of(args)? {
        LoadedOrder::Lattice(l) => Ok(l),
        LoadedOrder::Finite(_) => Err(CliError::usage("translations act on lattice orders only")),
    }
}

/// At most `--samples` items, chosen with `--seed`.
fn sample<T: Clone>(mut items: Vec<T>, args: &CheckArgs) -> Vec<T> {
    if items.len() > args.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        items = items.choose_multiple(&mut rng, args.samples).cloned().collect();
    }
    items
}
