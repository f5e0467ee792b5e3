//! Slices (finite antichains), categories of slices, Cauchy slices and foliations.

mod category;

use std::collections::{BTreeSet, HashSet};

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::order::{future_domain_below, CausalOrder, OrderError, Window};
use crate::report::Report;

pub use category::{
    foliation_category, restrict_to_region, reverse_category, validate_slice_category,
    AllSlices, CategoryRegion, Ev, ExplicitCategory, FoliationCategory, Restricted,
    ReversedCategory, SliceCategory, ValidationOptions,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SliceError {
    #[error("events are not pairwise space-like: {0}")]
    NotAnAntichain(String),
    #[error("slices are not space-like separated")]
    NotSeparated,
    #[error("slice or product is not in the category")]
    NotInCategory,
    #[error("target does not lie in the future domain of the source")]
    NotLeadsTo,
    #[error("region is not generated by bounded regions of the category")]
    NotARegionOfC,
    #[error("reversed category fails the slice-category conditions ({} violations)", .0.violations.len())]
    NotReversible(Report),
    #[error("family is not a foliation ({} violations)", .0.violations.len())]
    InvalidFoliation(Report),
    #[error(transparent)]
    Order(#[from] OrderError),
}

/// A finite antichain, stored as a sorted set of events.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slice<E: Ord>(BTreeSet<E>);

impl<E: Ord + Clone> Slice<E> {
    /// Checks the antichain condition.
    pub fn new<O: CausalOrder<Event = E>>(o: &O, events: BTreeSet<E>) -> Result<Self, SliceError> {
        for e in &events {
            if !o.contains(e) {
                return Err(OrderError::UnknownEvent(format!("{}", o.label(e))).into());
            }
        }
        if !is_slice(o, &events) {
            let labels: Vec<String> = events.iter().map(|e| o.label(e)).collect();
            return Err(SliceError::NotAnAntichain(labels.join(" ")));
        }
        Ok(Slice(events))
    }

    pub fn empty() -> Self {
        Slice(BTreeSet::new())
    }

    /// Wraps a set already known to be an antichain.
    pub fn from_set_unchecked(events: BTreeSet<E>) -> Self {
        Slice(events)
    }

    pub fn iter(&self) -> impl Iterator<Item = &E> {
        self.0.iter()
    }

    pub fn contains(&self, e: &E) -> bool {
        self.0.contains(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_set(&self) -> &BTreeSet<E> {
        &self.0
    }

    pub fn into_set(self) -> BTreeSet<E> {
        self.0
    }

    pub fn is_subset(&self, other: &Slice<E>) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Plain set union; callers check separation.
    pub fn union(&self, other: &Slice<E>) -> Slice<E> {
        Slice(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersect(&self, set: &BTreeSet<E>) -> Slice<E> {
        Slice(self.0.intersection(set).cloned().collect())
    }

    pub fn map<F: Ord, G: FnMut(&E) -> F>(&self, f: G) -> Slice<F> {
        Slice(self.0.iter().map(f).collect())
    }
}

/// A slice morphism Σ ↠ Γ.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SliceMorphism<E: Ord> {
    pub source: Slice<E>,
    pub target: Slice<E>,
}

impl<E: Ord + Clone> SliceMorphism<E> {
    pub fn new<O: CausalOrder<Event = E>>(
        o: &O,
        source: Slice<E>,
        target: Slice<E>,
    ) -> Result<Self, SliceError> {
        if !slice_leads_to(o, &source, &target)? {
            return Err(SliceError::NotLeadsTo);
        }
        Ok(SliceMorphism { source, target })
    }

    pub fn identity(s: Slice<E>) -> Self {
        SliceMorphism {
            source: s.clone(),
            target: s,
        }
    }
}

/// No two distinct members are causally related.
pub fn is_slice<O: CausalOrder>(o: &O, a: &BTreeSet<O::Event>) -> bool {
    let v: Vec<&O::Event> = a.iter().collect();
    (0..v.len()).all(|i| (i + 1..v.len()).all(|j| !o.comparable(v[i], v[j])))
}

/// A ∩ (↑B ∪ ↓B) = ∅.
pub fn space_like_separated<O: CausalOrder>(
    o: &O,
    a: &BTreeSet<O::Event>,
    b: &BTreeSet<O::Event>,
) -> bool {
    a.iter().all(|x| b.iter().all(|y| !o.comparable(x, y)))
}

/// Σ ↠ Γ, i.e. Γ ⊆ D⁺(Σ).
pub fn slice_leads_to<O: CausalOrder>(
    o: &O,
    sigma: &Slice<O::Event>,
    gamma: &Slice<O::Event>,
) -> Result<bool, OrderError> {
    if gamma.is_subset(sigma) {
        return Ok(true);
    }
    let d = future_domain_below(o, sigma.as_set(), gamma.as_set())?;
    Ok(gamma.iter().all(|g| d.contains(g)))
}

/// Depth-first antichain enumeration over a fixed list of events. Each
/// antichain is produced once, as extensions only use later indices.
pub struct Antichains<E> {
    events: Vec<E>,
    incomparable: Vec<FixedBitSet>,
    stack: Vec<(Vec<usize>, FixedBitSet)>,
    maximal_only: bool,
}

impl<E: Clone + Ord> Iterator for Antichains<E> {
    type Item = Slice<E>;

    fn next(&mut self) -> Option<Slice<E>> {
        while let Some((current, candidates)) = self.stack.pop() {
            for j in candidates.ones().collect::<Vec<_>>().into_iter().rev() {
                let mut next = candidates.clone();
                next.intersect_with(&self.incomparable[j]);
                next.set_range(..j + 1, false);
                let mut grown = current.clone();
                grown.push(j);
                self.stack.push((grown, next));
            }
            if self.maximal_only {
                let n = self.events.len();
                let mut common = FixedBitSet::with_capacity(n);
                common.insert_range(..);
                for &i in &current {
                    common.intersect_with(&self.incomparable[i]);
                }
                if !common.is_clear() {
                    continue;
                }
            }
            return Some(Slice(current.iter().map(|&i| self.events[i].clone()).collect()));
        }
        None
    }
}

/// Antichains among the given events of `o`.
pub fn antichains_of<O: CausalOrder>(o: &O, events: Vec<O::Event>, maximal_only: bool) -> Antichains<O::Event> {
    let mut events = events;
    events.sort();
    events.dedup();
    let n = events.len();
    let incomparable = (0..n)
        .map(|i| {
            let mut row = FixedBitSet::with_capacity(n);
            for j in 0..n {
                if i != j && !o.comparable(&events[i], &events[j]) {
                    row.insert(j);
                }
            }
            row
        })
        .collect();
    let mut all = FixedBitSet::with_capacity(n);
    all.insert_range(..);
    Antichains {
        events,
        incomparable,
        stack: vec![(Vec::new(), all)],
        maximal_only,
    }
}

/// Every slice of a finite order (or of a lattice window), each exactly once.
pub fn enumerate_slices<O: CausalOrder>(
    o: &O,
    window: Option<&Window>,
) -> Result<Antichains<O::Event>, OrderError> {
    Ok(antichains_of(o, o.events(window)?, false))
}

/// Every maximal slice of a finite order or lattice window.
pub fn maximal_slices<O: CausalOrder>(
    o: &O,
    window: Option<&Window>,
) -> Result<Antichains<O::Event>, OrderError> {
    Ok(antichains_of(o, o.events(window)?, true))
}

/// Every inextendible chain meets Σ. Implemented as: no Hasse path from an
/// initial event to a terminal event avoids Σ. On lattices the chains are
/// those crossing the window's time band inside its box.
pub fn is_cauchy<O: CausalOrder>(
    o: &O,
    sigma: &Slice<O::Event>,
    window: Option<&Window>,
) -> Result<bool, OrderError> {
    let events = o.events(window)?;
    if sigma.iter().any(|e| !o.in_window(e, window)) {
        return Err(OrderError::UnboundedQuery);
    }
    if events.is_empty() {
        return Ok(true);
    }
    let mut seen: HashSet<O::Event> = HashSet::new();
    let mut stack: Vec<O::Event> = events
        .iter()
        .filter(|e| o.is_initial(e, window) && !sigma.contains(e))
        .cloned()
        .collect();
    while let Some(x) = stack.pop() {
        if !seen.insert(x.clone()) {
            continue;
        }
        if o.is_terminal(&x, window) {
            return Ok(false);
        }
        for s in o.successors(&x) {
            if o.in_window(&s, window) && !sigma.contains(&s) && !seen.contains(&s) {
                stack.push(s);
            }
        }
    }
    Ok(true)
}

/// An indexed family of slices intended to be a foliation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Foliation<E: Ord> {
    pub leaves: Vec<Slice<E>>,
}

/// Checks the foliation conditions: (1) total order under ↠, (2) covering,
/// (3) pairwise disjoint, plus Cauchy-ness of every leaf.
pub fn validate_foliation<O: CausalOrder>(
    o: &O,
    f: &Foliation<O::Event>,
    window: Option<&Window>,
) -> Report {
    let labels = |s: &Slice<O::Event>| -> Vec<String> { s.iter().map(|e| o.label(e)).collect() };
    let mut report = Report::new("foliation");
    let leaves = &f.leaves;
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            let (a, b) = (&leaves[i], &leaves[j]);
            let ordered = slice_leads_to(o, a, b).unwrap_or(false) || slice_leads_to(o, b, a).unwrap_or(false);
            report.check(ordered, || {
                serde_json::json!({"condition": 1, "leaves": [i, j]})
            });
            let disjoint = a.as_set().is_disjoint(b.as_set());
            report.check(disjoint, || {
                serde_json::json!({"condition": 3, "leaves": [i, j], "overlap": labels(&a.intersect(b.as_set()))})
            });
        }
    }
    match o.events(window) {
        Ok(events) => {
            for e in events {
                let covered = leaves.iter().any(|l| l.contains(&e));
                report.check(covered, || serde_json::json!({"condition": 2, "uncovered": o.label(&e)}));
            }
        }
        Err(err) => report.check(false, || serde_json::json!({"condition": 2, "error": err.to_string()})),
    }
    for (i, l) in leaves.iter().enumerate() {
        let cauchy = is_cauchy(o, l, window);
        report.check(matches!(cauchy, Ok(true)), || {
            serde_json::json!({"condition": "cauchy", "leaf": i, "events": labels(l)})
        });
    }
    report
}
