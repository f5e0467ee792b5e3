use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::{CausalOrder, OrderError, Window};

/// Index of an event in a [`FiniteOrder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventId(pub u32);

impl EventId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug)]
struct Inner {
    names: Vec<String>,
    index: HashMap<String, EventId>,
    /// `up[x]` holds every y with x ≤ y.
    up: Vec<FixedBitSet>,
    /// `down[y]` holds every x with x ≤ y.
    down: Vec<FixedBitSet>,
    covers: Vec<Vec<EventId>>,
    covered_by: Vec<Vec<EventId>>,
}

/// An explicit finite causal order with its full reachability closure.
///
/// Cloning is cheap; the closure is shared.
#[derive(Debug, Clone)]
pub struct FiniteOrder {
    inner: Arc<Inner>,
    reversed: bool,
}

impl PartialEq for FiniteOrder {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self.names() == other.names()
            && (0..self.len()).all(|i| {
                let x = EventId(i as u32);
                self.up_set(x) == other.up_set(x)
            })
    }
}

impl Eq for FiniteOrder {}

impl FiniteOrder {
    /// Builds the order whose ≤ is the reflexive-transitive closure of `edges`.
    pub fn build_explicit<S: AsRef<str>>(
        events: &[S],
        edges: &[(S, S)],
    ) -> Result<Self, OrderError> {
        let names: Vec<String> = events.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), EventId(i as u32)).is_some() {
                return Err(OrderError::DuplicateEvent(n.clone()));
            }
        }
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| OrderError::UnknownEvent(s.to_string()))
        };
        let mut pairs = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            pairs.push((lookup(a.as_ref())?, lookup(b.as_ref())?));
        }
        Self::from_edges(names, &pairs)
    }

    /// Builds from named events and edges given as indices.
    pub fn from_edges(names: Vec<String>, edges: &[(EventId, EventId)]) -> Result<Self, OrderError> {
        let n = names.len();
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut indeg = vec![0usize; n];
        for &(a, b) in edges {
            if a == b {
                return Err(OrderError::CycleDetected(names[a.index()].clone()));
            }
            out[a.index()].push(b.index());
            indeg[b.index()] += 1;
        }
        let mut topo = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        while let Some(v) = ready.pop() {
            topo.push(v);
            for &w in &out[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(w);
                }
            }
        }
        if topo.len() < n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
            return Err(OrderError::CycleDetected(names[stuck].clone()));
        }
        let mut up = vec![FixedBitSet::with_capacity(n); n];
        for &v in topo.iter().rev() {
            let mut row = FixedBitSet::with_capacity(n);
            row.insert(v);
            for &w in &out[v] {
                row.union_with(&up[w]);
            }
            up[v] = row;
        }
        Ok(Self::from_closure(names, up))
    }

    /// Builds from a closure that is already reflexive, transitive and antisymmetric.
    fn from_closure(names: Vec<String>, up: Vec<FixedBitSet>) -> Self {
        let n = names.len();
        let mut down = vec![FixedBitSet::with_capacity(n); n];
        for (x, row) in up.iter().enumerate() {
            for y in row.ones() {
                down[y].insert(x);
            }
        }
        let mut covers = vec![Vec::new(); n];
        let mut covered_by = vec![Vec::new(); n];
        for x in 0..n {
            let mut strict = up[x].clone();
            strict.set(x, false);
            let mut reach_via = FixedBitSet::with_capacity(n);
            for z in strict.ones() {
                let mut s = up[z].clone();
                s.set(z, false);
                reach_via.union_with(&s);
            }
            strict.difference_with(&reach_via);
            for y in strict.ones() {
                covers[x].push(EventId(y as u32));
                covered_by[y].push(EventId(x as u32));
            }
        }
        let index = names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), EventId(i as u32)))
            .collect();
        FiniteOrder {
            inner: Arc::new(Inner {
                names,
                index,
                up,
                down,
                covers,
                covered_by,
            }),
            reversed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.inner.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.inner.names
    }

    pub fn name(&self, e: EventId) -> &str {
        &self.inner.names[e.index()]
    }

    pub fn id(&self, name: &str) -> Result<EventId, OrderError> {
        self.inner
            .index
            .get(name)
            .copied()
            .ok_or_else(|| OrderError::UnknownEvent(name.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = EventId> {
        (0..self.len() as u32).map(EventId)
    }

    pub fn set_of<S: AsRef<str>>(&self, names: &[S]) -> Result<BTreeSet<EventId>, OrderError> {
        names.iter().map(|s| self.id(s.as_ref())).collect()
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// Bitset of all y with x ≤ y in this (possibly reversed) order.
    pub fn up_set(&self, x: EventId) -> &FixedBitSet {
        if self.reversed {
            &self.inner.down[x.index()]
        } else {
            &self.inner.up[x.index()]
        }
    }

    /// Bitset of all y with y ≤ x.
    pub fn down_set(&self, x: EventId) -> &FixedBitSet {
        if self.reversed {
            &self.inner.up[x.index()]
        } else {
            &self.inner.down[x.index()]
        }
    }

    /// Hasse edges (x, y) with y covering x.
    pub fn hasse_edges(&self) -> Vec<(EventId, EventId)> {
        self.ids()
            .flat_map(|x| self.successors(&x).into_iter().map(move |y| (x, y)))
            .collect()
    }

    pub fn minimal(&self) -> Vec<EventId> {
        self.ids().filter(|x| self.predecessors(x).is_empty()).collect()
    }

    pub fn maximal(&self) -> Vec<EventId> {
        self.ids().filter(|x| self.successors(x).is_empty()).collect()
    }

    /// A linear extension: every event appears after all events below it.
    pub fn linear_extension(&self) -> Vec<EventId> {
        let mut ids: Vec<EventId> = self.ids().collect();
        ids.sort_by_key(|&x| (self.down_set(x).count_ones(..), x));
        ids
    }

    /// The induced suborder on `events`, listed in the given order, with its
    /// events numbered in that order.
    pub fn suborder(&self, events: &[EventId]) -> FiniteOrder {
        let k = events.len();
        let names = events.iter().map(|&e| self.name(e).to_string()).collect();
        let up = events
            .iter()
            .map(|&x| {
                let mut row = FixedBitSet::with_capacity(k);
                for (j, &y) in events.iter().enumerate() {
                    if self.leq(&x, &y) {
                        row.insert(j);
                    }
                }
                row
            })
            .collect();
        FiniteOrder::from_closure(names, up)
    }

    pub fn to_bitset(&self, s: &BTreeSet<EventId>) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(self.len());
        for e in s {
            b.insert(e.index());
        }
        b
    }

    pub fn from_bitset(b: &FixedBitSet) -> BTreeSet<EventId> {
        b.ones().map(|i| EventId(i as u32)).collect()
    }
}

impl CausalOrder for FiniteOrder {
    type Event = EventId;

    fn contains(&self, e: &EventId) -> bool {
        e.index() < self.len()
    }

    fn leq(&self, x: &EventId, y: &EventId) -> bool {
        self.up_set(*x).contains(y.index())
    }

    fn predecessors(&self, e: &EventId) -> Vec<EventId> {
        if self.reversed {
            self.inner.covers[e.index()].clone()
        } else {
            self.inner.covered_by[e.index()].clone()
        }
    }

    fn successors(&self, e: &EventId) -> Vec<EventId> {
        if self.reversed {
            self.inner.covered_by[e.index()].clone()
        } else {
            self.inner.covers[e.index()].clone()
        }
    }

    fn events(&self, _window: Option<&Window>) -> Result<Vec<EventId>, OrderError> {
        Ok(self.ids().collect())
    }

    fn finite_domains(&self) -> bool {
        true
    }

    fn reverse(&self) -> Self {
        FiniteOrder {
            inner: Arc::clone(&self.inner),
            reversed: !self.reversed,
        }
    }

    fn label(&self, e: &EventId) -> String {
        self.name(*e).to_string()
    }

    fn parse_event(&self, s: &str) -> Result<EventId, OrderError> {
        self.id(s)
    }
}
