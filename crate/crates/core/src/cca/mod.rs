//! The partitioned causal cellular automaton on the diamond lattice.
//!
//! Every event carries one copy of H per direction δ ∈ N = {±1}^d; the factor
//! (δ, x) at time t holds the component arriving at x from (t−1, x+δ). The
//! object of Σ_{t,X} is H^⊗(N×X), laid out with events in lexicographic order
//! and, inside each event, δ in lexicographic sign order: factor index
//! `x_index · 2^d + δ_index`.

mod dirac;
mod symmetry;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use thiserror::Error;

use crate::field_theory::{FieldError, FieldTheory};
use crate::order::{iterated_neighbourhood, neighbourhood, Coord};
use crate::order::{CausalOrder, DiamondLattice, LatticePoint, OrderError, Window};
use crate::process::{Backend, ProcMorphism, ProcObject, ProcessError, Step};
use crate::slices::{Slice, SliceCategory};
use crate::VALIDITY_TOL;

pub use dirac::{dirac_cca, dirac_scattering, swap_gate, DiracWalk};
pub use symmetry::{
    act_slice, act_word, check_invariance, check_symmetry_action, words_up_to, Comparison, LatticeTranslations,
    PermutationGroup, SymmetryAction, Word,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CcaError {
    #[error("not a constant-time lattice slice: {0}")]
    NotALatticeSlice(String),
    #[error("target slice lies {0} steps before the source")]
    NegativeTimeGap(i64),
    #[error("no slice morphism {0}")]
    InvalidMorphism(String),
    #[error("restriction target is not a subset of the source")]
    NotSubset,
    #[error("source is not the exact predecessor set of the target")]
    WrongPredecessorSet,
    #[error("scattering map is not invertible: {0}")]
    NotInvertible(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Order(#[from] OrderError),
}

impl From<CcaError> for FieldError {
    fn from(e: CcaError) -> Self {
        match e {
            CcaError::InvalidMorphism(_) | CcaError::NegativeTimeGap(_) => FieldError::NotLeadsTo,
            CcaError::NotALatticeSlice(_) => FieldError::NotInCategory,
            CcaError::NotInvertible(s) => FieldError::NotInvertible(s),
            CcaError::Process(p) => FieldError::Process(p),
            CcaError::Order(o) => FieldError::Order(o),
            other => FieldError::BadConfig(other.to_string()),
        }
    }
}

pub type LatticeSlice = Slice<LatticePoint>;

fn describe(s: &LatticeSlice) -> String {
    format!("{{{}}}", s.iter().map(|p| p.to_string()).join(" "))
}

/// The common time of a slice's events; `None` for the empty slice.
pub fn slice_time(s: &LatticeSlice) -> Result<Option<i64>, CcaError> {
    let mut times = s.iter().map(|p| p.t).dedup();
    let t = times.next();
    if times.next().is_some() {
        return Err(CcaError::NotALatticeSlice(describe(s)));
    }
    Ok(t)
}

/// Σ_{t,X} as a slice, checking parity and wrapping coordinates.
pub fn lattice_slice(lattice: &DiamondLattice, t: i64, xs: &[Vec<i64>]) -> Result<LatticeSlice, CcaError> {
    let pts = xs.iter().map(|x| lattice.point(t, x)).collect::<Result<BTreeSet<_>, _>>()?;
    Ok(Slice::from_set_unchecked(pts))
}

/// ∪_{y∈Y} (y + N^(k)), placed `dt` time steps from Y.
fn cone(lattice: &DiamondLattice, ys: &LatticeSlice, k: u32, dt: i64) -> BTreeSet<LatticePoint> {
    let offsets = iterated_neighbourhood(k, lattice.dim());
    ys.iter()
        .flat_map(|y| offsets.iter().map(move |o| lattice.shift(y, dt, o)))
        .collect()
}

fn direction(lattice: &DiamondLattice) -> i64 {
    if lattice.is_reversed() {
        -1
    } else {
        1
    }
}

/// Σ_{t,X} ↠ Σ_{t+k,Y} iff ∪_{y∈Y}(y + N^(k)) ⊆ X. On a reversed lattice
/// time runs the other way.
pub fn lattice_slice_leq(lattice: &DiamondLattice, a: &LatticeSlice, b: &LatticeSlice) -> Result<bool, CcaError> {
    let tb = match slice_time(b)? {
        None => return Ok(true),
        Some(t) => t,
    };
    let ta = match slice_time(a)? {
        None => return Ok(false),
        Some(t) => t,
    };
    let dir = direction(lattice);
    let k = (tb - ta) * dir;
    if k < 0 {
        return Err(CcaError::NegativeTimeGap(k));
    }
    let needed = cone(lattice, b, k as u32, ta - tb);
    Ok(needed.is_subset(a.as_set()))
}

/// The category of finite constant-time slices of the diamond lattice, with
/// slice ordering given in closed form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcaCategory {
    lattice: DiamondLattice,
}

impl CcaCategory {
    pub fn new(lattice: DiamondLattice) -> Self {
        CcaCategory { lattice }
    }

    pub fn lattice(&self) -> &DiamondLattice {
        &self.lattice
    }

    /// The same category over the reversed lattice.
    pub fn reversed(&self) -> Self {
        CcaCategory {
            lattice: self.lattice.reverse(),
        }
    }

    /// The part of the leaf Σ_t inside the window (the whole leaf on a ring
    /// when the window has no spatial ranges).
    pub fn layer_slice(&self, t: i64, window: &Window) -> LatticeSlice {
        Slice::from_set_unchecked(self.lattice.layer(t, window).into_iter().collect())
    }

    /// ∅ and every Σ_{t,X} with X inside the window and |X| ≤ `max_sites`.
    pub fn objects_in(&self, window: &Window, max_sites: usize) -> Vec<LatticeSlice> {
        let mut out = vec![Slice::empty()];
        for t in window.t.0..=window.t.1 {
            let layer = self.lattice.layer(t, window);
            for k in 1..=max_sites.min(layer.len()) {
                for c in layer.iter().cloned().combinations(k) {
                    out.push(Slice::from_set_unchecked(c.into_iter().collect()));
                }
            }
        }
        out
    }
}

/// Most events per time layer for which `objects_within` enumerates subsets.
const MAX_LAYER_ENUMERATION: usize = 16;

impl SliceCategory for CcaCategory {
    type Order = DiamondLattice;

    fn order(&self) -> &DiamondLattice {
        &self.lattice
    }

    fn contains(&self, s: &LatticeSlice) -> bool {
        s.iter().all(|p| self.lattice.contains(p)) && slice_time(s).is_ok()
    }

    fn product_defined(&self, a: &LatticeSlice, b: &LatticeSlice) -> bool {
        if !self.contains(a) || !self.contains(b) || a.iter().any(|p| b.contains(p)) {
            return false;
        }
        match (slice_time(a), slice_time(b)) {
            (Ok(Some(ta)), Ok(Some(tb))) => ta == tb,
            _ => true,
        }
    }

    fn leads_to(&self, a: &LatticeSlice, b: &LatticeSlice) -> bool {
        self.contains(a) && self.contains(b) && lattice_slice_leq(&self.lattice, a, b).unwrap_or(false)
    }

    fn objects_within(&self, events: &BTreeSet<LatticePoint>) -> Option<Vec<LatticeSlice>> {
        let mut out = vec![Slice::empty()];
        let by_time = events
            .iter()
            .filter(|p| self.lattice.contains(p))
            .cloned()
            .into_group_map_by(|p| p.t);
        for (_, layer) in by_time.into_iter().sorted_by_key(|(t, _)| *t) {
            if layer.len() > MAX_LAYER_ENUMERATION {
                return None;
            }
            for k in 1..=layer.len() {
                for c in layer.iter().cloned().combinations(k) {
                    out.push(Slice::from_set_unchecked(c.into_iter().collect()));
                }
            }
        }
        Some(out)
    }

    fn covering_witness(&self, x: &LatticePoint, y: &LatticePoint) -> Option<(LatticeSlice, LatticeSlice)> {
        if !self.lattice.leq(x, y) {
            return None;
        }
        let k = (y.t - x.t).unsigned_abs() as u32;
        let target = Slice::from_set_unchecked(BTreeSet::from([y.clone()]));
        let source = Slice::from_set_unchecked(cone(&self.lattice, &target, k, x.t - y.t));
        Some((source, target))
    }
}

/// One factor of a slice morphism: a restriction at fixed time, or a single
/// time step from the exact predecessor set of the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Elementary {
    Restrict { from: LatticeSlice, to: LatticeSlice },
    Step { from: LatticeSlice, to: LatticeSlice },
}

/// Splits Σ_{t,X₀} ↠ Σ_{t+k,X_k} into a restriction X₀ → Y₀ followed by k one-step
/// evolutions Y_{i−1} → Y_i, where Y_{i−1} = ∪_{x∈Y_i}(x + N) is the exact
/// predecessor set. An empty target is a single restriction to ∅.
pub fn factorize_morphism(
    category: &CcaCategory,
    a: &LatticeSlice,
    b: &LatticeSlice,
) -> Result<Vec<Elementary>, CcaError> {
    let invalid = || CcaError::InvalidMorphism(format!("{} ↠ {}", describe(a), describe(b)));
    if !category.contains(a) || !category.contains(b) {
        return Err(invalid());
    }
    let lattice = category.lattice();
    let (ta, tb) = match (slice_time(a)?, slice_time(b)?) {
        (_, None) => {
            return Ok(vec![Elementary::Restrict {
                from: a.clone(),
                to: Slice::empty(),
            }])
        }
        (None, Some(_)) => return Err(invalid()),
        (Some(ta), Some(tb)) => (ta, tb),
    };
    let dir = direction(lattice);
    let k = (tb - ta) * dir;
    if k < 0 {
        return Err(invalid());
    }
    let mut chain = vec![b.clone()];
    for _ in 0..k {
        let last = chain.last().expect("chain starts non-empty");
        chain.push(Slice::from_set_unchecked(cone(lattice, last, 1, -dir)));
    }
    chain.reverse();
    if !chain[0].is_subset(a) {
        return Err(invalid());
    }
    let mut out = vec![Elementary::Restrict {
        from: a.clone(),
        to: chain[0].clone(),
    }];
    for w in chain.windows(2) {
        out.push(Elementary::Step {
            from: w[0].clone(),
            to: w[1].clone(),
        });
    }
    Ok(out)
}

type ScatteringFn = Arc<dyn Fn(&LatticePoint) -> Result<ProcMorphism, CcaError> + Send + Sync>;

/// The scattering map: one U for every event, or an event-dependent family.
#[derive(Clone)]
pub enum Scattering {
    Homogeneous(ProcMorphism),
    PerEvent(ScatteringFn),
}

impl fmt::Debug for Scattering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scattering::Homogeneous(u) => f.debug_tuple("Homogeneous").field(u).finish(),
            Scattering::PerEvent(_) => f.write_str("PerEvent(..)"),
        }
    }
}

impl Scattering {
    pub fn at(&self, e: &LatticePoint) -> Result<ProcMorphism, CcaError> {
        match self {
            Scattering::Homogeneous(u) => Ok(u.clone()),
            Scattering::PerEvent(f) => f(e),
        }
    }
}

/// Configuration of a partitioned CCA: dimension d, cell dimension dim H,
/// scattering morphism U on H^⊗N and optionally its inverse.
#[derive(Debug, Clone)]
pub struct CcaConfig {
    pub d: usize,
    pub cell_dim: usize,
    pub scattering: ProcMorphism,
    pub inverse: Option<ProcMorphism>,
}

/// Shared layout and kernels of the forward automaton and its reversal.
#[derive(Debug, Clone)]
struct Layout {
    lattice: DiamondLattice,
    backend: Backend,
    cell_dim: usize,
    directions: Vec<Coord>,
}

impl Layout {
    fn n(&self) -> usize {
        self.directions.len()
    }

    fn object(&self, s: &LatticeSlice) -> ProcObject {
        ProcObject::uniform(self.backend, self.cell_dim, self.n() * s.len()).expect("cell dimension is positive")
    }

    fn local_object(&self) -> ProcObject {
        ProcObject::uniform(self.backend, self.cell_dim, self.n()).expect("cell dimension is positive")
    }

    fn restriction(&self, x: &LatticeSlice, y: &LatticeSlice) -> Result<ProcMorphism, CcaError> {
        if !y.is_subset(x) {
            return Err(CcaError::NotSubset);
        }
        let n = self.n();
        let which: Vec<usize> = x
            .iter()
            .enumerate()
            .filter(|(_, e)| !y.contains(e))
            .flat_map(|(i, _)| i * n..(i + 1) * n)
            .collect();
        Ok(ProcMorphism::discard(&self.object(x), &which)?)
    }

    /// Applies the map chosen per event to every event's block of factors.
    fn local_layer(
        &self,
        s: &LatticeSlice,
        map: impl Fn(&LatticePoint) -> Result<ProcMorphism, CcaError>,
    ) -> Result<ProcMorphism, CcaError> {
        let obj = self.object(s);
        let local = self.local_object();
        let mut acc = ProcMorphism::identity(&obj);
        for (i, e) in s.iter().enumerate() {
            let u = map(e)?;
            if u.dom() != &local || u.cod() != &local {
                return Err(CcaError::BadConfig("scattering map must be an endomorphism of H^⊗N".into()));
            }
            acc = acc.then(&u.embedded(&obj, i * self.n())?)?;
        }
        Ok(acc)
    }

    /// Routes factors between adjacent time layers, `dt` = ±1 apart: the
    /// factor (δ, y) goes to (δ, y − dt·δ) when that event is in `to` and is
    /// discarded otherwise.
    fn route(&self, from: &LatticeSlice, to: &LatticeSlice, dt: i64) -> Result<ProcMorphism, CcaError> {
        let n = self.n();
        let dom = self.object(from);
        let from_events: Vec<&LatticePoint> = from.iter().collect();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for (i, y) in from_events.iter().enumerate() {
            for (j, delta) in self.directions.iter().enumerate() {
                let back: Coord = delta.iter().map(|c| -dt * c).collect();
                if to.contains(&self.lattice.shift(y, dt, &back)) {
                    kept.push(i * n + j);
                } else {
                    dropped.push(i * n + j);
                }
            }
        }
        let discard = ProcMorphism::discard(&dom, &dropped)?;
        let mut perm = Vec::with_capacity(to.len() * n);
        for x in to.iter() {
            for (j, delta) in self.directions.iter().enumerate() {
                let fwd: Coord = delta.iter().map(|c| dt * c).collect();
                let src = self.lattice.shift(x, -dt, &fwd);
                let i = from_events
                    .binary_search(&&src)
                    .map_err(|_| CcaError::WrongPredecessorSet)?;
                let pos = kept.binary_search(&(i * n + j)).map_err(|_| CcaError::WrongPredecessorSet)?;
                perm.push(pos);
            }
        }
        if perm.len() != kept.len() {
            return Err(CcaError::WrongPredecessorSet);
        }
        Ok(discard.then(&ProcMorphism::permutation(discard.cod(), &perm)?)?)
    }

    /// Checks that `from` is the exact cone of `to` one step away, and returns
    /// the signed time step.
    fn check_step(&self, from: &LatticeSlice, to: &LatticeSlice, dir: i64) -> Result<i64, CcaError> {
        match (slice_time(from)?, slice_time(to)?) {
            (None, None) => Ok(dir),
            (Some(tf), Some(tt)) if tt - tf == dir => {
                if cone(&self.lattice, to, 1, -dir) == *from.as_set() {
                    Ok(dir)
                } else {
                    Err(CcaError::WrongPredecessorSet)
                }
            }
            _ => Err(CcaError::WrongPredecessorSet),
        }
    }
}

/// The partitioned CCA as a field theory on [`CcaCategory`].
#[derive(Debug, Clone)]
pub struct Cca {
    category: CcaCategory,
    layout: Layout,
    scattering: Scattering,
    inverse: Option<ProcMorphism>,
}

fn validate_local(u: &ProcMorphism, local: &ProcObject) -> Result<(), CcaError> {
    if u.dom() != local || u.cod() != local {
        return Err(CcaError::BadConfig("scattering map must be an endomorphism of H^⊗N".into()));
    }
    if u.steps().iter().any(|s| matches!(s, Step::Discard { .. })) {
        return Err(CcaError::BadConfig("scattering map must not discard factors".into()));
    }
    Ok(())
}

/// Builds the automaton on a forward lattice (infinite or a ring).
pub fn build_cca(lattice: DiamondLattice, config: CcaConfig) -> Result<Cca, CcaError> {
    let mut cca = Cca::site_dependent(
        lattice,
        config.cell_dim,
        config.scattering.backend(),
        Scattering::Homogeneous(config.scattering.clone()),
    )?;
    if cca.layout.lattice.dim() != config.d {
        return Err(CcaError::BadConfig(format!(
            "configuration has d = {}, lattice has d = {}",
            config.d,
            cca.layout.lattice.dim()
        )));
    }
    let local = cca.layout.local_object();
    validate_local(&config.scattering, &local)?;
    let defect = config.scattering.normalisation_defect();
    if !(defect <= VALIDITY_TOL) {
        return Err(CcaError::BadConfig(format!("scattering map is not normalised (defect {defect:e})")));
    }
    if let Some(inv) = config.inverse {
        validate_local(&inv, &local)?;
        let dev = config.scattering.then(&inv)?.deviation(&ProcMorphism::identity(&local))?;
        if !(dev <= VALIDITY_TOL) {
            return Err(CcaError::NotInvertible(format!("U⁻¹U differs from the identity by {dev:e}")));
        }
        cca.inverse = Some(inv);
    }
    Ok(cca)
}

impl Cca {
    /// An automaton whose scattering map may depend on the event. Used to
    /// exhibit inhomogeneous counterexamples; normalisation is the caller's
    /// responsibility.
    pub fn site_dependent(
        lattice: DiamondLattice,
        cell_dim: usize,
        backend: Backend,
        scattering: Scattering,
    ) -> Result<Self, CcaError> {
        if lattice.is_reversed() {
            return Err(CcaError::BadConfig("the automaton runs on the forward lattice".into()));
        }
        if cell_dim == 0 {
            return Err(CcaError::BadConfig("cell dimension must be positive".into()));
        }
        let directions = neighbourhood(lattice.dim());
        Ok(Cca {
            category: CcaCategory::new(lattice.clone()),
            layout: Layout {
                lattice,
                backend,
                cell_dim,
                directions,
            },
            scattering,
            inverse: None,
        })
    }

    pub fn lattice(&self) -> &DiamondLattice {
        &self.layout.lattice
    }

    pub fn cell_dim(&self) -> usize {
        self.layout.cell_dim
    }

    pub fn scattering(&self) -> &Scattering {
        &self.scattering
    }

    /// H^⊗N, the object at a single event.
    pub fn local_object(&self) -> ProcObject {
        self.layout.local_object()
    }

    /// Identities on Y, discards on X∖Y.
    pub fn restriction_kernel(&self, x: &LatticeSlice, y: &LatticeSlice) -> Result<ProcMorphism, CcaError> {
        if !y.is_empty() && slice_time(x)? != slice_time(y)? {
            return Err(CcaError::NotSubset);
        }
        self.layout.restriction(x, y)
    }

    /// U at every event of Y, then each factor (δ, y) is kept as factor
    /// (δ, y−δ) of Σ_{t+1,X} when y−δ ∈ X and discarded otherwise.
    pub fn one_step_kernel(&self, y: &LatticeSlice, x: &LatticeSlice) -> Result<ProcMorphism, CcaError> {
        let dt = self.layout.check_step(y, x, 1)?;
        let scatter = self.layout.local_layer(y, |e| self.scattering.at(e))?;
        Ok(scatter.then(&self.layout.route(y, x, dt)?)?)
    }

    fn kernel(&self, step: &Elementary) -> Result<ProcMorphism, CcaError> {
        match step {
            Elementary::Restrict { from, to } => self.restriction_kernel(from, to),
            Elementary::Step { from, to } => self.one_step_kernel(from, to),
        }
    }

    /// Ψ(Σ) ⊗ Ψ(Γ) → Ψ(Σ⊗Γ): reorders event blocks into lexicographic order.
    pub fn tensor_permutation(&self, a: &LatticeSlice, b: &LatticeSlice) -> Result<ProcMorphism, CcaError> {
        reorder(&self.layout, a, b)
    }

    /// Reindexes Ψ(Σ) → Ψ(g(Σ)) along an event bijection g, moving each
    /// event's block to the position of its image.
    pub fn reindexing(
        &self,
        s: &LatticeSlice,
        g: impl Fn(&LatticePoint) -> LatticePoint,
    ) -> Result<ProcMorphism, CcaError> {
        let images: Vec<LatticePoint> = s.iter().map(&g).collect();
        let target: BTreeSet<LatticePoint> = images.iter().cloned().collect();
        if target.len() != images.len() {
            return Err(CcaError::BadConfig("event map is not injective".into()));
        }
        let n = self.layout.n();
        let perm: Vec<usize> = target
            .iter()
            .flat_map(|e| {
                let i = images.iter().position(|p| p == e).expect("image of some event");
                (0..n).map(move |j| i * n + j)
            })
            .collect();
        Ok(ProcMorphism::permutation(&self.layout.object(s), &perm)?)
    }
}

fn reorder(layout: &Layout, a: &LatticeSlice, b: &LatticeSlice) -> Result<ProcMorphism, CcaError> {
    if a.iter().any(|e| b.contains(e)) {
        return Err(CcaError::BadConfig("tensor factors overlap".into()));
    }
    let concat: Vec<&LatticePoint> = a.iter().chain(b.iter()).collect();
    let n = layout.n();
    let perm: Vec<usize> = concat
        .iter()
        .copied()
        .sorted()
        .flat_map(|e| {
            let i = concat.iter().position(|p| *p == e).expect("event of the product");
            (0..n).map(move |j| i * n + j)
        })
        .collect();
    let obj = layout.object(a).tensor(&layout.object(b))?;
    Ok(ProcMorphism::permutation(&obj, &perm)?)
}

impl FieldTheory for Cca {
    type Category = CcaCategory;

    fn category(&self) -> &CcaCategory {
        &self.category
    }

    fn backend(&self) -> Backend {
        self.layout.backend
    }

    fn object(&self, s: &LatticeSlice) -> Result<ProcObject, FieldError> {
        if !self.category.contains(s) {
            return Err(FieldError::NotInCategory);
        }
        Ok(self.layout.object(s))
    }

    fn morphism(&self, a: &LatticeSlice, b: &LatticeSlice) -> Result<ProcMorphism, FieldError> {
        if !self.category.contains(a) || !self.category.contains(b) {
            return Err(FieldError::NotInCategory);
        }
        let mut acc = ProcMorphism::identity(&self.layout.object(a));
        for step in factorize_morphism(&self.category, a, b)? {
            acc = acc.then(&self.kernel(&step)?)?;
        }
        Ok(acc)
    }

    fn tensor_iso(&self, a: &LatticeSlice, b: &LatticeSlice) -> Result<ProcMorphism, FieldError> {
        Ok(reorder(&self.layout, a, b)?)
    }
}

fn invert_matrix(flat: &[num_complex::Complex64]) -> Vec<num_complex::Complex64> {
    let n = (flat.len() as f64).sqrt().round() as usize;
    (0..n)
        .flat_map(|i| (0..n).map(move |j| flat[j * n + i].conj()))
        .collect()
}

/// Inverse of an invertible kernel program: unitaries, rank-one Kraus maps,
/// permutation-matrix stochastic maps and factor permutations, in reverse
/// order. Anything else is reported as not invertible.
pub fn invert_program(u: &ProcMorphism) -> Result<ProcMorphism, CcaError> {
    let mut steps = Vec::new();
    for s in u.steps().iter().rev() {
        steps.push(match s {
            Step::Unitary { at, matrix } => Step::Unitary {
                at: at.clone(),
                matrix: Arc::new(invert_matrix(matrix)),
            },
            Step::Kraus { at, ops } if ops.len() == 1 => Step::Kraus {
                at: at.clone(),
                ops: Arc::new(vec![invert_matrix(&ops[0])]),
            },
            Step::Kraus { ops, .. } => {
                return Err(CcaError::NotInvertible(format!("channel has {} Kraus operators", ops.len())))
            }
            Step::Stochastic { at, matrix } => {
                let n = (matrix.len() as f64).sqrt().round() as usize;
                let is_perm = matrix.iter().all(|&p| p == 0.0 || p == 1.0)
                    && (0..n).all(|j| (0..n).filter(|&i| matrix[i * n + j] == 1.0).count() == 1)
                    && (0..n).all(|i| (0..n).filter(|&j| matrix[i * n + j] == 1.0).count() == 1);
                if !is_perm {
                    return Err(CcaError::NotInvertible("stochastic map is not a permutation".into()));
                }
                Step::Stochastic {
                    at: at.clone(),
                    matrix: Arc::new((0..n).flat_map(|i| (0..n).map(move |j| matrix[j * n + i])).collect()),
                }
            }
            Step::Discard { .. } => return Err(CcaError::NotInvertible("program discards factors".into())),
            Step::Permute { offset, perm } => {
                let mut inv = vec![0; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inv[p] = i;
                }
                Step::Permute {
                    offset: *offset,
                    perm: inv,
                }
            }
        });
    }
    let inv = ProcMorphism::from_steps(u.cod().clone(), steps)?;
    let dev = u.then(&inv)?.deviation(&ProcMorphism::identity(u.dom()))?;
    if !(dev <= VALIDITY_TOL) {
        return Err(CcaError::NotInvertible(format!("U⁻¹U differs from the identity by {dev:e}")));
    }
    Ok(inv)
}

/// The U⁻¹ construction on the reversed category: each backward step routes
/// (δ, x) to (δ, x+δ), discarding factors that leave the target, then applies
/// U⁻¹ at every target event.
#[derive(Debug, Clone)]
pub struct CcaReversal {
    category: CcaCategory,
    layout: Layout,
    inverse: Scattering,
}

/// The reversal of a CCA, using its configured inverse or inverting U.
pub fn build_reversal(cca: &Cca) -> Result<CcaReversal, CcaError> {
    let inverse = match (&cca.inverse, &cca.scattering) {
        (Some(inv), _) => Scattering::Homogeneous(inv.clone()),
        (None, Scattering::Homogeneous(u)) => Scattering::Homogeneous(invert_program(u)?),
        (None, Scattering::PerEvent(f)) => {
            let f = f.clone();
            Scattering::PerEvent(Arc::new(move |e: &LatticePoint| invert_program(&f(e)?)))
        }
    };
    Ok(CcaReversal::with_candidate_inverse(cca, inverse))
}

impl CcaReversal {
    /// The same construction with an arbitrary candidate inverse, unchecked.
    /// A wrong candidate yields a field theory that fails the reversal laws.
    pub fn with_candidate_inverse(cca: &Cca, inverse: Scattering) -> Self {
        CcaReversal {
            category: cca.category.reversed(),
            layout: cca.layout.clone(),
            inverse,
        }
    }

    /// Σ_{t,X} ↠^rev Σ_{t−1,W} with X the exact cone of W.
    pub fn reverse_step_kernel(&self, x: &LatticeSlice, w: &LatticeSlice) -> Result<ProcMorphism, CcaError> {
        let dt = self.layout.check_step(x, w, -1)?;
        let routed = self.layout.route(x, w, dt)?;
        Ok(routed.then(&self.layout.local_layer(w, |e| self.inverse.at(e))?)?)
    }
}

impl FieldTheory for CcaReversal {
    type Category = CcaCategory;

    fn category(&self) -> &CcaCategory {
        &self.category
    }

    fn backend(&self) -> Backend {
        self.layout.backend
    }

    fn object(&self, s: &LatticeSlice) -> Result<ProcObject, FieldError> {
        if !self.category.contains(s) {
            return Err(FieldError::NotInCategory);
        }
        Ok(self.layout.object(s))
    }

    fn morphism(&self, a: &LatticeSlice, b: &LatticeSlice) -> Result<ProcMorphism, FieldError> {
        if !self.category.contains(a) || !self.category.contains(b) {
            return Err(FieldError::NotInCategory);
        }
        let mut acc = ProcMorphism::identity(&self.layout.object(a));
        for step in factorize_morphism(&self.category, a, b)? {
            let k = match &step {
                Elementary::Restrict { from, to } => self.layout.restriction(from, to)?,
                Elementary::Step { from, to } => self.reverse_step_kernel(from, to)?,
            };
            acc = acc.then(&k)?;
        }
        Ok(acc)
    }

    fn tensor_iso(&self, a: &LatticeSlice, b: &LatticeSlice) -> Result<ProcMorphism, FieldError> {
        Ok(reorder(&self.layout, a, b)?)
    }
}

#[cfg(test)]
mod tests;
