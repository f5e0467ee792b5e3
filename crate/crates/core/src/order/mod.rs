//! Causal orders: posets of events.
//!
//! Two concrete orders implement [`CausalOrder`]: [`FiniteOrder`], an explicit
//! DAG with its reachability closure stored as bitsets, and [`DiamondLattice`],
//! the implicit (1+d)-dimensional diamond lattice. All constructions in this
//! module are generic over the trait.

mod finite;
mod lattice;
mod morphism;

use std::collections::{BTreeSet, HashSet};
use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

pub use finite::{EventId, FiniteOrder};
pub use lattice::{iterated_neighbourhood, neighbourhood, Coord, DiamondLattice, LatticePoint};
pub use morphism::{OrderMorphism, Pullback};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("duplicate event `{0}`")]
    DuplicateEvent(String),
    #[error("hasse edges contain a cycle through `{0}`")]
    CycleDetected(String),
    #[error("query on an infinite order needs a bounded window")]
    UnboundedQuery,
    #[error("invalid lattice event `{0}`")]
    InvalidEvent(String),
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("morphism is not valid: {0}")]
    InvalidMorphism(String),
}

/// A bounded window of the diamond lattice: inclusive time range and an
/// inclusive coordinate box (one range per spatial dimension).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub t: (i64, i64),
    pub x: Vec<(i64, i64)>,
}

impl Window {
    pub fn new(t: (i64, i64), x: Vec<(i64, i64)>) -> Self {
        Window { t, x }
    }

    /// The same spatial range in every one of `d` dimensions.
    pub fn cube(t: (i64, i64), x: (i64, i64), d: usize) -> Self {
        Window { t, x: vec![x; d] }
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.t >= self.t.0
            && p.t <= self.t.1
            && p.x.len() == self.x.len()
            && p.x.iter().zip(&self.x).all(|(c, (lo, hi))| c >= lo && c <= hi)
    }
}

/// A partially ordered set of events.
///
/// `predecessors` and `successors` return the Hasse neighbours (immediate
/// relations). For infinite orders `events` requires a window.
pub trait CausalOrder: Clone + Send + Sync {
    type Event: Clone + Eq + Ord + Hash + Debug + Send + Sync;

    fn contains(&self, e: &Self::Event) -> bool;

    fn leq(&self, x: &Self::Event, y: &Self::Event) -> bool;

    fn lt(&self, x: &Self::Event, y: &Self::Event) -> bool {
        x != y && self.leq(x, y)
    }

    fn comparable(&self, x: &Self::Event, y: &Self::Event) -> bool {
        self.leq(x, y) || self.leq(y, x)
    }

    fn predecessors(&self, e: &Self::Event) -> Vec<Self::Event>;

    fn successors(&self, e: &Self::Event) -> Vec<Self::Event>;

    /// Enumerates events, restricted to `window` for infinite orders.
    fn events(&self, window: Option<&Window>) -> Result<Vec<Self::Event>, OrderError>;

    /// Whether domains of dependence of finite sets are finite, so that they
    /// can be computed without a window.
    fn finite_domains(&self) -> bool;

    /// The same events with the order transposed.
    fn reverse(&self) -> Self;

    fn label(&self, e: &Self::Event) -> String;

    fn parse_event(&self, s: &str) -> Result<Self::Event, OrderError>;

    fn in_window(&self, _e: &Self::Event, _window: Option<&Window>) -> bool {
        true
    }

    /// Where inextendible chains start: minimal events, or for infinite
    /// orders the bottom boundary of the window.
    fn is_initial(&self, e: &Self::Event, _window: Option<&Window>) -> bool {
        self.predecessors(e).is_empty()
    }

    /// Where inextendible chains end: maximal events, or the window's top boundary.
    fn is_terminal(&self, e: &Self::Event, _window: Option<&Window>) -> bool {
        self.successors(e).is_empty()
    }
}

pub type EventSet<E> = BTreeSet<E>;

fn check_all<O: CausalOrder>(o: &O, a: &BTreeSet<O::Event>) -> Result<(), OrderError> {
    for e in a {
        if !o.contains(e) {
            return Err(OrderError::UnknownEvent(format!("{e:?}")));
        }
    }
    Ok(())
}

/// Checked `x ≤ y`.
pub fn leq<O: CausalOrder>(o: &O, x: &O::Event, y: &O::Event) -> Result<bool, OrderError> {
    for e in [x, y] {
        if !o.contains(e) {
            return Err(OrderError::UnknownEvent(format!("{e:?}")));
        }
    }
    Ok(o.leq(x, y))
}

/// ↑A, restricted to `window` for infinite orders.
pub fn future<O: CausalOrder>(
    o: &O,
    a: &BTreeSet<O::Event>,
    window: Option<&Window>,
) -> Result<BTreeSet<O::Event>, OrderError> {
    check_all(o, a)?;
    if a.is_empty() {
        return Ok(BTreeSet::new());
    }
    Ok(o
        .events(window)?
        .into_iter()
        .filter(|y| a.iter().any(|x| o.leq(x, y)))
        .collect())
}

/// ↓A, restricted to `window` for infinite orders.
pub fn past<O: CausalOrder>(
    o: &O,
    a: &BTreeSet<O::Event>,
    window: Option<&Window>,
) -> Result<BTreeSet<O::Event>, OrderError> {
    check_all(o, a)?;
    if a.is_empty() {
        return Ok(BTreeSet::new());
    }
    Ok(o
        .events(window)?
        .into_iter()
        .filter(|y| a.iter().any(|x| o.leq(y, x)))
        .collect())
}

/// Least fixpoint of: x ∈ D iff x ∈ A, or x has immediate predecessors and
/// all of them are in D. `forward = false` swaps the roles of predecessors
/// and successors, giving D⁻.
fn domain<O: CausalOrder>(
    o: &O,
    a: &BTreeSet<O::Event>,
    window: Option<&Window>,
    forward: bool,
) -> Result<BTreeSet<O::Event>, OrderError> {
    check_all(o, a)?;
    if window.is_none() && !o.finite_domains() {
        return Err(OrderError::UnboundedQuery);
    }
    Ok(domain_where(o, a, forward, |x| o.in_window(x, window)))
}

/// The domain computation restricted to events accepted by `keep`. Exact for
/// every kept event whose whole past (future, for D⁻) down to A is kept.
fn domain_where<O: CausalOrder>(
    o: &O,
    a: &BTreeSet<O::Event>,
    forward: bool,
    keep: impl Fn(&O::Event) -> bool,
) -> BTreeSet<O::Event> {
    let below = |e: &O::Event| if forward { o.predecessors(e) } else { o.successors(e) };
    let above = |e: &O::Event| if forward { o.successors(e) } else { o.predecessors(e) };
    let mut member: HashSet<O::Event> = a.iter().cloned().collect();
    let mut queue: Vec<O::Event> = a.iter().flat_map(&above).collect();
    while let Some(x) = queue.pop() {
        if member.contains(&x) || !keep(&x) {
            continue;
        }
        let preds = below(&x);
        if !preds.is_empty() && preds.iter().all(|p| member.contains(p)) {
            queue.extend(above(&x));
            member.insert(x);
        }
    }
    member.into_iter().collect()
}

/// The future domain of dependence D⁺(A).
pub fn future_domain<O: CausalOrder>(
    o: &O,
    a: &BTreeSet<O::Event>,
    window: Option<&Window>,
) -> Result<BTreeSet<O::Event>, OrderError> {
    domain(o, a, window, true)
}

/// D⁺(A) ∩ ↓B. Always finite when A and B are, so it needs no window.
pub fn future_domain_below<O: CausalOrder>(
    o: &O,
    a: &BTreeSet<O::Event>,
    b: &BTreeSet<O::Event>,
) -> Result<BTreeSet<O::Event>, OrderError> {
    check_all(o, a)?;
    check_all(o, b)?;
    let below = |x: &O::Event| b.iter().any(|y| o.leq(x, y));
    Ok(domain_where(o, a, true, below)
        .into_iter()
        .filter(|x| b.iter().any(|y| o.leq(x, y)))
        .collect())
}

/// The past domain of dependence D⁻(A).
pub fn past_domain<O: CausalOrder>(
    o: &O,
    a: &BTreeSet<O::Event>,
    window: Option<&Window>,
) -> Result<BTreeSet<O::Event>, OrderError> {
    domain(o, a, window, false)
}

/// A maximal chain between two events, listed bottom to top.
pub type CausalPath<E> = Vec<E>;

/// Depth-first enumeration of the maximal chains from `x` to `y`.
pub struct Paths<'a, O: CausalOrder> {
    order: &'a O,
    target: O::Event,
    path: Vec<O::Event>,
    pending: Vec<Vec<O::Event>>,
}

impl<O: CausalOrder> Iterator for Paths<'_, O> {
    type Item = CausalPath<O::Event>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let top = self.pending.last_mut()?;
            match top.pop() {
                None => {
                    self.pending.pop();
                    self.path.pop();
                }
                Some(next) => {
                    self.path.push(next.clone());
                    if next == self.target {
                        let found = self.path.clone();
                        self.path.pop();
                        return Some(found);
                    }
                    let target = &self.target;
                    let order = self.order;
                    let mut succ: Vec<_> = order
                        .successors(&next)
                        .into_iter()
                        .filter(|z| order.leq(z, target))
                        .collect();
                    succ.sort();
                    succ.reverse();
                    self.pending.push(succ);
                }
            }
        }
    }
}

/// All maximal chains γ with min γ = x and max γ = y.
pub fn causal_paths<'a, O: CausalOrder>(
    o: &'a O,
    x: &O::Event,
    y: &O::Event,
) -> Result<Paths<'a, O>, OrderError> {
    let related = leq(o, x, y)?;
    let pending = if related { vec![vec![x.clone()]] } else { Vec::new() };
    Ok(Paths {
        order: o,
        target: y.clone(),
        path: Vec::new(),
        pending,
    })
}

/// Events reachable upward from `start` while staying below some element of `tops`.
fn upward_between<O: CausalOrder>(
    o: &O,
    start: &BTreeSet<O::Event>,
    tops: &BTreeSet<O::Event>,
) -> BTreeSet<O::Event> {
    let below_top = |z: &O::Event| tops.iter().any(|y| o.leq(z, y));
    let mut seen: BTreeSet<O::Event> = BTreeSet::new();
    let mut stack: Vec<O::Event> = start.iter().filter(|z| below_top(z)).cloned().collect();
    while let Some(z) = stack.pop() {
        if !seen.insert(z.clone()) {
            continue;
        }
        for s in o.successors(&z) {
            if !seen.contains(&s) && below_top(&s) {
                stack.push(s);
            }
        }
    }
    seen
}

/// The causal diamond ◇_{x,y} = {z : x ≤ z ≤ y}.
pub fn diamond<O: CausalOrder>(
    o: &O,
    x: &O::Event,
    y: &O::Event,
) -> Result<BTreeSet<O::Event>, OrderError> {
    leq(o, x, y)?;
    Ok(upward_between(
        o,
        &BTreeSet::from([x.clone()]),
        &BTreeSet::from([y.clone()]),
    ))
}

/// Whether `s` is convex. It suffices to test immediate successors of members:
/// a missing event between two members lies on a Hasse path between them, and
/// the first non-member on that path is a successor of a member.
pub fn is_region<O: CausalOrder>(o: &O, s: &BTreeSet<O::Event>) -> bool {
    s.iter().all(|x| {
        o.successors(x)
            .into_iter()
            .all(|z| s.contains(&z) || !s.iter().any(|y| o.leq(&z, y)))
    })
}

/// ◇_{Σ,Γ} = ↑Σ ∩ ↓Γ, the union of the diamonds between members.
pub fn region_between<O: CausalOrder>(
    o: &O,
    sigma: &BTreeSet<O::Event>,
    gamma: &BTreeSet<O::Event>,
) -> Result<BTreeSet<O::Event>, OrderError> {
    check_all(o, sigma)?;
    check_all(o, gamma)?;
    Ok(upward_between(o, sigma, gamma))
}

/// Minimal elements of a finite set under the order.
pub fn minimal_of<O: CausalOrder>(o: &O, s: &BTreeSet<O::Event>) -> BTreeSet<O::Event> {
    s.iter()
        .filter(|x| !s.iter().any(|y| o.lt(y, x)))
        .cloned()
        .collect()
}

/// Maximal elements of a finite set under the order.
pub fn maximal_of<O: CausalOrder>(o: &O, s: &BTreeSet<O::Event>) -> BTreeSet<O::Event> {
    s.iter()
        .filter(|x| !s.iter().any(|y| o.lt(x, y)))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests;
