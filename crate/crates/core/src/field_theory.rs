//! Causal field theories: monoidal functors Ψ from a category of slices to
//! the process category, with checkers for their laws, state families over
//! regions, global states and causal reversals.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::order::{CausalOrder, OrderError};
use crate::process::{Backend, ProcMorphism, ProcObject, ProcState, ProcessError};
use crate::report::Report;
use crate::slices::{restrict_to_region, CategoryRegion, Ev, Slice, SliceCategory, SliceError};
use crate::VALIDITY_TOL;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("slice is not an object of the category")]
    NotInCategory,
    #[error("no slice morphism between the given slices")]
    NotLeadsTo,
    #[error("slices of the region cannot be enumerated")]
    NonEnumerableRegion,
    #[error("state on {0} is not determined by the given data")]
    NotDetermined(String),
    #[error("region is not contained in the larger region")]
    NotASubregion,
    #[error("slice is not a leaf of the foliation")]
    NotCauchy,
    #[error("not a causal reversal: {0}")]
    NotAReversal(String),
    #[error("scattering map is not invertible: {0}")]
    NotInvertible(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Order(#[from] OrderError),
}

pub type SliceOf<F> = Slice<Ev<<F as FieldTheory>::Category>>;

/// A monoidal functor Ψ: C → D. `morphism(Σ, Γ)` is Ψ(Σ ↠ Γ).
pub trait FieldTheory: Send + Sync {
    type Category: SliceCategory;

    fn category(&self) -> &Self::Category;

    fn backend(&self) -> Backend;

    fn object(&self, s: &SliceOf<Self>) -> Result<ProcObject, FieldError>;

    fn morphism(&self, source: &SliceOf<Self>, target: &SliceOf<Self>) -> Result<ProcMorphism, FieldError>;

    /// The structure isomorphism Ψ(Σ) ⊗ Ψ(Γ) → Ψ(Σ ⊗ Γ). The default is the
    /// identity, valid when both sides are the same object.
    fn tensor_iso(&self, a: &SliceOf<Self>, b: &SliceOf<Self>) -> Result<ProcMorphism, FieldError> {
        let lhs = self.object(a)?.tensor(&self.object(b)?)?;
        let prod = self.object(&self.category().tensor(a, b)?)?;
        if lhs != prod {
            return Err(FieldError::BadConfig("Ψ(Σ⊗Γ) differs from Ψ(Σ)⊗Ψ(Γ)".into()));
        }
        Ok(ProcMorphism::identity(&lhs))
    }
}

impl<F: FieldTheory> FieldTheory for &F {
    type Category = F::Category;

    fn category(&self) -> &F::Category {
        (**self).category()
    }
    fn backend(&self) -> Backend {
        (**self).backend()
    }
    fn object(&self, s: &SliceOf<F>) -> Result<ProcObject, FieldError> {
        (**self).object(s)
    }
    fn morphism(&self, a: &SliceOf<F>, b: &SliceOf<F>) -> Result<ProcMorphism, FieldError> {
        (**self).morphism(a, b)
    }
    fn tensor_iso(&self, a: &SliceOf<F>, b: &SliceOf<F>) -> Result<ProcMorphism, FieldError> {
        (**self).tensor_iso(a, b)
    }
}

type ObjectFn<E> = Box<dyn Fn(&Slice<E>) -> Result<ProcObject, FieldError> + Send + Sync>;
type MorphismFn<E> = Box<dyn Fn(&Slice<E>, &Slice<E>) -> Result<ProcMorphism, FieldError> + Send + Sync>;

/// A field theory given by two user-supplied assignments. The morphism
/// assignment is only consulted on genuine slice morphisms, and its output
/// is checked against the object assignment.
pub struct AssignedTheory<C: SliceCategory> {
    category: C,
    backend: Backend,
    object_fn: ObjectFn<Ev<C>>,
    morphism_fn: MorphismFn<Ev<C>>,
    /// Whether distinct slices must be sent to distinct objects. Off by
    /// default; when on, run [`check_injectivity`] alongside the functor laws.
    pub injective_on_objects: bool,
}

impl<C: SliceCategory> AssignedTheory<C> {
    pub fn new(
        category: C,
        backend: Backend,
        object_fn: impl Fn(&Slice<Ev<C>>) -> Result<ProcObject, FieldError> + Send + Sync + 'static,
        morphism_fn: impl Fn(&Slice<Ev<C>>, &Slice<Ev<C>>) -> Result<ProcMorphism, FieldError> + Send + Sync + 'static,
    ) -> Self {
        AssignedTheory {
            category,
            backend,
            object_fn: Box::new(object_fn),
            morphism_fn: Box::new(morphism_fn),
            injective_on_objects: false,
        }
    }
}

impl<C: SliceCategory> FieldTheory for AssignedTheory<C> {
    type Category = C;

    fn category(&self) -> &C {
        &self.category
    }

    fn backend(&self) -> Backend {
        self.backend
    }

    fn object(&self, s: &Slice<Ev<C>>) -> Result<ProcObject, FieldError> {
        if !self.category.contains(s) {
            return Err(FieldError::NotInCategory);
        }
        let obj = (self.object_fn)(s)?;
        if obj.backend() != self.backend {
            return Err(ProcessError::BackendMismatch.into());
        }
        Ok(obj)
    }

    fn morphism(&self, a: &Slice<Ev<C>>, b: &Slice<Ev<C>>) -> Result<ProcMorphism, FieldError> {
        let (da, db) = (self.object(a)?, self.object(b)?);
        if !self.category.leads_to(a, b) {
            return Err(FieldError::NotLeadsTo);
        }
        let m = (self.morphism_fn)(a, b)?;
        if m.dom() != &da || m.cod() != &db {
            return Err(FieldError::BadConfig("assigned morphism has the wrong type".into()));
        }
        Ok(m)
    }
}

/// Event labels of a slice, for report witnesses.
pub fn slice_labels<O: CausalOrder>(o: &O, s: &Slice<O::Event>) -> Vec<String> {
    s.iter().map(|e| o.label(e)).collect()
}

fn deviation_of(r: Result<f64, FieldError>) -> (f64, Option<String>) {
    match r {
        Ok(d) => (d, None),
        Err(e) => (f64::NAN, Some(e.to_string())),
    }
}

/// Evaluates `f` on every item in parallel and records the results in order.
fn sweep<T: Sync>(
    report: &mut Report,
    items: &[T],
    tol: f64,
    f: impl Fn(&T) -> (Result<f64, FieldError>, Value) + Sync,
) {
    let results: Vec<(f64, Option<String>, Value)> = items
        .par_iter()
        .map(|it| {
            let (r, w) = f(it);
            let (d, err) = deviation_of(r);
            (d, err, w)
        })
        .collect();
    for (d, err, mut w) in results {
        if let Some(e) = err {
            w["error"] = json!(e);
        }
        report.record(d, tol, || w);
    }
}

/// Ψ(id) = id on every slice occurring in the triples, and
/// Ψ(Γ↠Δ) ∘ Ψ(Σ↠Γ) = Ψ(Σ↠Δ) on every triple.
pub fn check_functoriality<F: FieldTheory>(
    psi: &F,
    triples: &[(SliceOf<F>, SliceOf<F>, SliceOf<F>)],
    tol: f64,
) -> Report {
    let o = psi.category().order();
    let mut report = Report::new("functoriality");
    let mut slices: Vec<SliceOf<F>> = triples
        .iter()
        .flat_map(|(a, b, c)| [a.clone(), b.clone(), c.clone()])
        .collect();
    slices.sort();
    slices.dedup();
    sweep(&mut report, &slices, tol, |s| {
        let dev = (|| {
            let obj = psi.object(s)?;
            Ok(psi.morphism(s, s)?.deviation(&ProcMorphism::identity(&obj))?)
        })();
        (dev, json!({"law": "identity", "slice": slice_labels(o, s)}))
    });
    sweep(&mut report, triples, tol, |(a, b, c)| {
        let dev = (|| {
            let composite = psi.morphism(a, b)?.then(&psi.morphism(b, c)?)?;
            Ok(composite.deviation(&psi.morphism(a, c)?)?)
        })();
        let w = json!({
            "law": "composition",
            "sigma": slice_labels(o, a),
            "gamma": slice_labels(o, b),
            "delta": slice_labels(o, c),
        });
        (dev, w)
    });
    report
}

/// Ψ(Σ) ≠ Ψ(Γ) for distinct sampled slices; only meaningful when the theory
/// asks for injectivity on objects.
pub fn check_injectivity<F: FieldTheory>(psi: &F, slices: &[SliceOf<F>]) -> Report {
    let o = psi.category().order();
    let mut report = Report::new("injective-on-objects");
    let objs: Vec<Option<ProcObject>> = slices.iter().map(|s| psi.object(s).ok()).collect();
    for i in 0..slices.len() {
        for j in i + 1..slices.len() {
            if slices[i] == slices[j] {
                continue;
            }
            let distinct = objs[i].is_some() && objs[i] != objs[j];
            report.check(distinct, || {
                json!({"a": slice_labels(o, &slices[i]), "b": slice_labels(o, &slices[j])})
            });
        }
    }
    report
}

/// A sampled instance of the monoidality law: (Σ ↠ Σ′) and (Γ ↠ Γ′) with
/// Σ⊗Γ and Σ′⊗Γ′ defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quadruple<E: Ord> {
    pub sigma: Slice<E>,
    pub sigma_to: Slice<E>,
    pub gamma: Slice<E>,
    pub gamma_to: Slice<E>,
}

/// The object equation Ψ(Σ⊗Γ) ≅ Ψ(Σ)⊗Ψ(Γ) via the structure isomorphism,
/// and Ψ((Σ⊗Γ)↠(Σ′⊗Γ′)) ∘ φ = φ′ ∘ (Ψ(Σ↠Σ′) ⊗ Ψ(Γ↠Γ′)).
pub fn check_monoidality<F: FieldTheory>(psi: &F, quads: &[Quadruple<Ev<F::Category>>], tol: f64) -> Report {
    let c = psi.category();
    let o = c.order();
    let mut report = Report::new("monoidality");
    sweep(&mut report, quads, tol, |q| {
        let dev = (|| {
            let src = c.tensor(&q.sigma, &q.gamma)?;
            let tgt = c.tensor(&q.sigma_to, &q.gamma_to)?;
            let phi = psi.tensor_iso(&q.sigma, &q.gamma)?;
            let phi_to = psi.tensor_iso(&q.sigma_to, &q.gamma_to)?;
            if phi.cod() != &psi.object(&src)? || phi_to.cod() != &psi.object(&tgt)? {
                return Err(FieldError::BadConfig("structure isomorphism has the wrong codomain".into()));
            }
            let lhs = phi.then(&psi.morphism(&src, &tgt)?)?;
            let pair = psi.morphism(&q.sigma, &q.sigma_to)?.tensor(&psi.morphism(&q.gamma, &q.gamma_to)?)?;
            let rhs = pair.then(&phi_to)?;
            Ok(lhs.deviation(&rhs)?)
        })();
        let w = json!({
            "sigma": slice_labels(o, &q.sigma),
            "sigma_to": slice_labels(o, &q.sigma_to),
            "gamma": slice_labels(o, &q.gamma),
            "gamma_to": slice_labels(o, &q.gamma_to),
        });
        (dev, w)
    });
    report
}

/// The effect ⊤_Σ := Ψ(Σ ↠ ∅).
pub fn discard_family<F: FieldTheory>(psi: &F, s: &SliceOf<F>) -> Result<ProcMorphism, FieldError> {
    psi.morphism(s, &Slice::empty())
}

/// The environment equations: ⊤_∅ = 1, ⊤_Γ ∘ Ψ(Σ↠Γ) = ⊤_Σ on `pairs`, and
/// ⊤_{Σ⊗Γ} ∘ φ = ⊤_Σ ⊗ ⊤_Γ on `separated`.
pub fn check_environment<F: FieldTheory>(
    psi: &F,
    pairs: &[(SliceOf<F>, SliceOf<F>)],
    separated: &[(SliceOf<F>, SliceOf<F>)],
    tol: f64,
) -> Report {
    let c = psi.category();
    let o = c.order();
    let mut report = Report::new("environment");
    let unit = (|| {
        let top = discard_family(psi, &Slice::empty())?;
        Ok(top.deviation(&ProcMorphism::identity(&ProcObject::unit(psi.backend())))?)
    })();
    let (d, err) = deviation_of(unit);
    report.record(d, tol, || json!({"law": "unit", "error": err}));
    sweep(&mut report, pairs, tol, |(a, b)| {
        let dev = (|| {
            let lhs = psi.morphism(a, b)?.then(&discard_family(psi, b)?)?;
            Ok(lhs.deviation(&discard_family(psi, a)?)?)
        })();
        (dev, json!({"law": "no-signalling", "sigma": slice_labels(o, a), "gamma": slice_labels(o, b)}))
    });
    sweep(&mut report, separated, tol, |(a, b)| {
        let dev = (|| {
            let prod = c.tensor(a, b)?;
            let lhs = psi.tensor_iso(a, b)?.then(&discard_family(psi, &prod)?)?;
            let rhs = discard_family(psi, a)?.tensor(&discard_family(psi, b)?)?;
            Ok(lhs.deviation(&rhs)?)
        })();
        (dev, json!({"law": "monoidal discard", "sigma": slice_labels(o, a), "gamma": slice_labels(o, b)}))
    });
    report
}

/// All pairs (Σ, Γ) of the given objects with Σ ↠ Γ.
pub fn leads_to_pairs<C: SliceCategory>(c: &C, objects: &[Slice<Ev<C>>]) -> Vec<(Slice<Ev<C>>, Slice<Ev<C>>)> {
    let rows: Vec<Vec<usize>> = objects
        .par_iter()
        .map(|a| (0..objects.len()).filter(|&j| c.leads_to(a, &objects[j])).collect())
        .collect();
    rows.iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&j| (objects[i].clone(), objects[j].clone())))
        .collect()
}

/// All composable triples Σ ↠ Γ ↠ Δ among the given objects.
#[allow(clippy::type_complexity)]
pub fn composable_triples<C: SliceCategory>(
    c: &C,
    objects: &[Slice<Ev<C>>],
) -> Vec<(Slice<Ev<C>>, Slice<Ev<C>>, Slice<Ev<C>>)> {
    let succ: Vec<Vec<usize>> = objects
        .par_iter()
        .map(|a| (0..objects.len()).filter(|&j| c.leads_to(a, &objects[j])).collect())
        .collect();
    let mut out = Vec::new();
    for i in 0..objects.len() {
        for &j in &succ[i] {
            for &k in &succ[j] {
                out.push((objects[i].clone(), objects[j].clone(), objects[k].clone()));
            }
        }
    }
    out
}

/// Up to `count` pairs (Σ, Γ) whose product is defined, sampled with a seed.
pub fn separated_pairs<C: SliceCategory>(
    c: &C,
    objects: &[Slice<Ev<C>>],
    count: usize,
    seed: u64,
) -> Vec<(Slice<Ev<C>>, Slice<Ev<C>>)> {
    let mut all: Vec<(Slice<Ev<C>>, Slice<Ev<C>>)> = Vec::new();
    for a in objects {
        for b in objects {
            if c.product_defined(a, b) {
                all.push((a.clone(), b.clone()));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if all.len() > count {
        all = all.choose_multiple(&mut rng, count).cloned().collect();
    }
    all
}

/// Up to `count` monoidality instances, sampled with a seed. Pairs involving
/// the empty slice are kept rarer than the others so that most samples
/// exercise two non-trivial factors.
pub fn separated_quadruples<C: SliceCategory>(
    c: &C,
    objects: &[Slice<Ev<C>>],
    count: usize,
    seed: u64,
) -> Vec<Quadruple<Ev<C>>> {
    let pairs = leads_to_pairs(c, objects);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if pairs.is_empty() {
        return out;
    }
    let mut attempts = 0usize;
    while out.len() < count && attempts < count * 2000 {
        attempts += 1;
        let (s, s2) = &pairs[rng.gen_range(0..pairs.len())];
        let (g, g2) = &pairs[rng.gen_range(0..pairs.len())];
        let trivial = s.is_empty() || g.is_empty();
        if trivial && rng.gen_bool(0.9) {
            continue;
        }
        if c.product_defined(s, g) && c.product_defined(s2, g2) {
            out.push(Quadruple {
                sigma: s.clone(),
                sigma_to: s2.clone(),
                gamma: g.clone(),
                gamma_to: g2.clone(),
            });
        }
    }
    out
}

/// A family of states on the slices of C|_R.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFamily<E: Ord> {
    pub region: CategoryRegion<E>,
    pub states: BTreeMap<Slice<E>, ProcState>,
}

/// The slices of C|_R.
pub fn region_slices<F: FieldTheory>(
    psi: &F,
    region: &CategoryRegion<Ev<F::Category>>,
) -> Result<Vec<SliceOf<F>>, FieldError> {
    restrict_to_region(psi.category(), region.clone())
        .objects()
        .ok_or(FieldError::NonEnumerableRegion)
}

/// ρ_Δ := Ψ(Σ ↠ Δ)(ρ_Σ) for every slice Δ of C|_R. Every such Δ must lie in
/// the future domain of Σ.
pub fn push_forward<F: FieldTheory>(
    psi: &F,
    region: &CategoryRegion<Ev<F::Category>>,
    sigma: &SliceOf<F>,
    rho: &ProcState,
) -> Result<StateFamily<Ev<F::Category>>, FieldError> {
    let c = psi.category();
    let slices = region_slices(psi, region)?;
    let states: Result<Vec<(SliceOf<F>, ProcState)>, FieldError> = slices
        .par_iter()
        .map(|d| {
            if !c.leads_to(sigma, d) {
                return Err(FieldError::NotDetermined(slice_labels(c.order(), d).join(" ")));
            }
            Ok((d.clone(), psi.morphism(sigma, d)?.apply(rho)?))
        })
        .collect();
    Ok(StateFamily {
        region: region.clone(),
        states: states?.into_iter().collect(),
    })
}

/// Checks Ψ(Δ ↠ Δ′)(ρ_Δ) = ρ_Δ′ for every pair of slices of C|_R, and that
/// every slice carries a state.
pub fn stability_report<F: FieldTheory>(
    psi: &F,
    family: &StateFamily<Ev<F::Category>>,
    tol: f64,
) -> Result<Report, FieldError> {
    let c = psi.category();
    let o = c.order();
    let slices = region_slices(psi, &family.region)?;
    let mut report = Report::new("stable-family");
    for s in &slices {
        report.check(family.states.contains_key(s), || json!({"missing": slice_labels(o, s)}));
    }
    let pairs: Vec<(SliceOf<F>, SliceOf<F>)> = leads_to_pairs(c, &slices);
    sweep(&mut report, &pairs, tol, |(a, b)| {
        let dev = (|| {
            let (ra, rb) = match (family.states.get(a), family.states.get(b)) {
                (Some(ra), Some(rb)) => (ra, rb),
                _ => return Err(FieldError::NotDetermined(slice_labels(o, a).join(" "))),
            };
            Ok(psi.morphism(a, b)?.apply(ra)?.distance(rb)?)
        })();
        (dev, json!({"from": slice_labels(o, a), "to": slice_labels(o, b)}))
    });
    Ok(report)
}

/// Whether the family is stable under the action of Ψ.
pub fn is_stable_family<F: FieldTheory>(
    psi: &F,
    family: &StateFamily<Ev<F::Category>>,
) -> Result<bool, FieldError> {
    Ok(stability_report(psi, family, VALIDITY_TOL)?.passed())
}

/// The presheaf restriction along R′ ⊆ R: keeps the states of the slices of C|_{R′}.
pub fn restrict_states<F: FieldTheory>(
    psi: &F,
    family: &StateFamily<Ev<F::Category>>,
    sub: &CategoryRegion<Ev<F::Category>>,
) -> Result<StateFamily<Ev<F::Category>>, FieldError> {
    if !family.region.contains_region(sub) {
        return Err(FieldError::NotASubregion);
    }
    let o = psi.category().order();
    let states = region_slices(psi, sub)?
        .into_iter()
        .map(|s| match family.states.get(&s) {
            Some(r) => Ok((s, r.clone())),
            None => Err(FieldError::NotDetermined(slice_labels(o, &s).join(" "))),
        })
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    Ok(StateFamily {
        region: sub.clone(),
        states,
    })
}

/// A global state of a foliation category: one state per leaf. States on
/// sub-slices and on regions are obtained by restriction.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState<E: Ord> {
    pub leaves: Vec<Slice<E>>,
    pub states: Vec<ProcState>,
}

impl<E: Ord + Clone> GlobalState<E> {
    /// ρ_Δ = Ψ(L ↠ Δ)(ρ_L) for the leaf L containing Δ.
    pub fn state_on<F>(&self, psi: &F, s: &Slice<E>) -> Result<ProcState, FieldError>
    where
        F: FieldTheory,
        F::Category: SliceCategory,
        <F::Category as SliceCategory>::Order: CausalOrder<Event = E>,
    {
        let i = self
            .leaves
            .iter()
            .position(|l| s.is_subset(l))
            .ok_or_else(|| FieldError::NotDetermined(slice_labels(psi.category().order(), s).join(" ")))?;
        Ok(psi.morphism(&self.leaves[i], s)?.apply(&self.states[i])?)
    }

    /// The state family this global state induces on a region.
    pub fn family<F>(&self, psi: &F, region: &CategoryRegion<E>) -> Result<StateFamily<E>, FieldError>
    where
        F: FieldTheory,
        <F::Category as SliceCategory>::Order: CausalOrder<Event = E>,
    {
        let states = region_slices(psi, region)?
            .into_iter()
            .map(|s| Ok((s.clone(), self.state_on(psi, &s)?)))
            .collect::<Result<BTreeMap<_, _>, FieldError>>()?;
        Ok(StateFamily {
            region: region.clone(),
            states,
        })
    }

    /// JSON dump: one entry per leaf with its index, events and state.
    pub fn to_json(&self, label: impl Fn(&E) -> String) -> Value {
        let leaves: Vec<Value> = self
            .leaves
            .iter()
            .zip(&self.states)
            .enumerate()
            .map(|(i, (l, s))| {
                json!({
                    "leaf": i,
                    "events": l.iter().map(&label).collect::<Vec<_>>(),
                    "state": s.to_json(),
                })
            })
            .collect();
        json!({ "leaves": leaves })
    }
}

/// The global state determined by its value on one leaf: forward leaves are
/// reached with Ψ, earlier ones with the reversal Φ.
pub fn global_state_from_cauchy<F, G>(
    psi: &F,
    phi: &G,
    leaves: &[SliceOf<F>],
    sigma: &SliceOf<F>,
    rho: &ProcState,
) -> Result<GlobalState<Ev<F::Category>>, FieldError>
where
    F: FieldTheory,
    G: FieldTheory,
    G::Category: SliceCategory<Order = <F::Category as SliceCategory>::Order>,
{
    if !leaves.contains(sigma) {
        return Err(FieldError::NotCauchy);
    }
    if (rho.trace() - 1.0).abs() > VALIDITY_TOL {
        return Err(ProcessError::InvalidState("state is not normalised".into()).into());
    }
    let c = psi.category();
    let rev = phi.category();
    let states: Result<Vec<ProcState>, FieldError> = leaves
        .par_iter()
        .map(|leaf| {
            if psi.object(leaf)? != phi.object(leaf)? {
                return Err(FieldError::NotAReversal("objects differ".into()));
            }
            if c.leads_to(sigma, leaf) {
                Ok(psi.morphism(sigma, leaf)?.apply(rho)?)
            } else if rev.leads_to(sigma, leaf) {
                Ok(phi.morphism(sigma, leaf)?.apply(rho)?)
            } else {
                Err(FieldError::NotCauchy)
            }
        })
        .collect();
    Ok(GlobalState {
        leaves: leaves.to_vec(),
        states: states?,
    })
}

/// A chain Σ = Δ₀ ↠ Δ₁ ↠^rev Δ₂ ↠ … ↠ Δₙ = Γ; arrows alternate, starting
/// and ending with a forward arrow (so the length is even).
pub type Zigzag<E> = Vec<Slice<E>>;

/// Composite of a zigzag: Ψ on forward arrows, Φ on reversed ones.
pub fn zigzag_composite<F, G>(psi: &F, phi: &G, chain: &[SliceOf<F>]) -> Result<ProcMorphism, FieldError>
where
    F: FieldTheory,
    G: FieldTheory,
    G::Category: SliceCategory<Order = <F::Category as SliceCategory>::Order>,
{
    if chain.len() < 2 || chain.len() % 2 != 0 {
        return Err(FieldError::BadConfig("zigzag must start and end with a forward arrow".into()));
    }
    let mut acc = ProcMorphism::identity(&psi.object(&chain[0])?);
    for (i, w) in chain.windows(2).enumerate() {
        let step = if i % 2 == 0 {
            psi.morphism(&w[0], &w[1])?
        } else {
            phi.morphism(&w[0], &w[1])?
        };
        acc = acc.then(&step)?;
    }
    Ok(acc)
}

/// Φ agrees with Ψ on objects, and every sampled pair of zigzags with the
/// same endpoints has equal composites.
pub fn check_reversal<F, G>(psi: &F, phi: &G, pairs: &[(Zigzag<Ev<F::Category>>, Zigzag<Ev<F::Category>>)], tol: f64) -> Report
where
    F: FieldTheory,
    G: FieldTheory,
    G::Category: SliceCategory<Order = <F::Category as SliceCategory>::Order>,
{
    let o = psi.category().order();
    let mut report = Report::new("reversal");
    let mut slices: Vec<SliceOf<F>> = pairs.iter().flat_map(|(a, b)| a.iter().chain(b).cloned()).collect();
    slices.sort();
    slices.dedup();
    for s in &slices {
        let agree = matches!((psi.object(s), phi.object(s)), (Ok(a), Ok(b)) if a == b);
        report.check(agree, || json!({"condition": 1, "slice": slice_labels(o, s)}));
    }
    let chain_labels = |c: &[SliceOf<F>]| -> Vec<Vec<String>> { c.iter().map(|s| slice_labels(o, s)).collect() };
    sweep(&mut report, pairs, tol, |(a, b)| {
        let dev = (|| {
            let fa = zigzag_composite(psi, phi, a)?;
            let fb = zigzag_composite(psi, phi, b)?;
            Ok(fa.deviation(&fb)?)
        })();
        (dev, json!({"condition": 2, "left": chain_labels(a), "right": chain_labels(b)}))
    });
    report
}

/// Samples `count` pairs of zigzags with common endpoints Σ ↠ Γ, each with at
/// most `max_zigzag` reversed arrows. Zero reversed arrows is the direct
/// morphism.
#[allow(clippy::type_complexity)]
pub fn sample_zigzag_pairs<C, R>(
    c: &C,
    rev: &R,
    objects: &[Slice<Ev<C>>],
    count: usize,
    max_zigzag: usize,
    seed: u64,
) -> Vec<(Zigzag<Ev<C>>, Zigzag<Ev<C>>)>
where
    C: SliceCategory,
    R: SliceCategory<Order = C::Order>,
{
    let n = objects.len();
    let fwd: Vec<Vec<usize>> = objects
        .par_iter()
        .map(|a| (0..n).filter(|&j| c.leads_to(a, &objects[j])).collect())
        .collect();
    let bwd: Vec<Vec<usize>> = objects
        .par_iter()
        .map(|a| (0..n).filter(|&j| rev.leads_to(a, &objects[j])).collect())
        .collect();
    let ends: Vec<(usize, usize)> = fwd
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if ends.is_empty() {
        return out;
    }
    let build = |rng: &mut ChaCha8Rng, s: usize, g: usize, r: usize| -> Option<Vec<usize>> {
        let mut chain = vec![s];
        let mut cur = s;
        for _ in 0..r {
            let d = *fwd[cur].choose(rng)?;
            let back: Vec<usize> = bwd[d].iter().copied().filter(|&e| fwd[e].contains(&g)).collect();
            let e = *back.choose(rng)?;
            chain.push(d);
            chain.push(e);
            cur = e;
        }
        chain.push(g);
        Some(chain)
    };
    let mut attempts = 0;
    while out.len() < count && attempts < count * 100 {
        attempts += 1;
        let (s, g) = ends[rng.gen_range(0..ends.len())];
        let (ra, rb) = (rng.gen_range(0..=max_zigzag), rng.gen_range(0..=max_zigzag));
        if let (Some(a), Some(b)) = (build(&mut rng, s, g, ra), build(&mut rng, s, g, rb)) {
            let to_slices = |v: Vec<usize>| v.into_iter().map(|i| objects[i].clone()).collect();
            out.push((to_slices(a), to_slices(b)));
        }
    }
    out
}
