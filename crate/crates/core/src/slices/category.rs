use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{
    antichains_of, is_slice, slice_leads_to, space_like_separated, validate_foliation, Foliation,
    Slice, SliceError,
};
use crate::order::{is_region, region_between, CausalOrder, Window};
use crate::report::Report;

pub type Ev<C> = <<C as SliceCategory>::Order as CausalOrder>::Event;

/// A category of slices: a set of slices of one order, closed under a partial
/// tensor product given by `product_defined`, with morphisms Σ ↠ Γ.
pub trait SliceCategory: Send + Sync {
    type Order: CausalOrder;

    fn order(&self) -> &Self::Order;

    fn contains(&self, s: &Slice<Ev<Self>>) -> bool;

    /// Whether Σ ⊗ Γ is defined. The default accepts separated members whose
    /// union is again a member.
    fn product_defined(&self, a: &Slice<Ev<Self>>, b: &Slice<Ev<Self>>) -> bool {
        self.contains(a)
            && self.contains(b)
            && space_like_separated(self.order(), a.as_set(), b.as_set())
            && self.contains(&a.union(b))
    }

    fn leads_to(&self, a: &Slice<Ev<Self>>, b: &Slice<Ev<Self>>) -> bool {
        slice_leads_to(self.order(), a, b).unwrap_or(false)
    }

    /// All members contained in a finite event set, when enumerable.
    fn objects_within(&self, _events: &BTreeSet<Ev<Self>>) -> Option<Vec<Slice<Ev<Self>>>> {
        None
    }

    /// All members, when the category is finite.
    fn objects(&self) -> Option<Vec<Slice<Ev<Self>>>> {
        None
    }

    /// Slices Σ ∋ x and Γ ∋ y with Σ ↠ Γ, when they can be built directly.
    fn covering_witness(
        &self,
        _x: &Ev<Self>,
        _y: &Ev<Self>,
    ) -> Option<(Slice<Ev<Self>>, Slice<Ev<Self>>)> {
        None
    }

    /// Σ ⊗ Γ.
    fn tensor(&self, a: &Slice<Ev<Self>>, b: &Slice<Ev<Self>>) -> Result<Slice<Ev<Self>>, SliceError> {
        if !space_like_separated(self.order(), a.as_set(), b.as_set()) {
            return Err(SliceError::NotSeparated);
        }
        if !self.product_defined(a, b) {
            return Err(SliceError::NotInCategory);
        }
        Ok(a.union(b))
    }

    /// (Σ ↠ Σ′) ⊗ (Γ ↠ Γ′) = (Σ⊗Γ) ↠ (Σ′⊗Γ′).
    #[allow(clippy::type_complexity)]
    fn morphism_product(
        &self,
        m1: (&Slice<Ev<Self>>, &Slice<Ev<Self>>),
        m2: (&Slice<Ev<Self>>, &Slice<Ev<Self>>),
    ) -> Result<(Slice<Ev<Self>>, Slice<Ev<Self>>), SliceError> {
        if !self.leads_to(m1.0, m1.1) || !self.leads_to(m2.0, m2.1) {
            return Err(SliceError::NotLeadsTo);
        }
        Ok((self.tensor(m1.0, m2.0)?, self.tensor(m1.1, m2.1)?))
    }
}

impl<C: SliceCategory> SliceCategory for &C {
    type Order = C::Order;

    fn order(&self) -> &C::Order {
        (**self).order()
    }
    fn contains(&self, s: &Slice<Ev<C>>) -> bool {
        (**self).contains(s)
    }
    fn product_defined(&self, a: &Slice<Ev<C>>, b: &Slice<Ev<C>>) -> bool {
        (**self).product_defined(a, b)
    }
    fn leads_to(&self, a: &Slice<Ev<C>>, b: &Slice<Ev<C>>) -> bool {
        (**self).leads_to(a, b)
    }
    fn objects_within(&self, events: &BTreeSet<Ev<C>>) -> Option<Vec<Slice<Ev<C>>>> {
        (**self).objects_within(events)
    }
    fn objects(&self) -> Option<Vec<Slice<Ev<C>>>> {
        (**self).objects()
    }
    fn covering_witness(&self, x: &Ev<C>, y: &Ev<C>) -> Option<(Slice<Ev<C>>, Slice<Ev<C>>)> {
        (**self).covering_witness(x, y)
    }
}

/// Slice(Ω): every slice of the order.
#[derive(Debug, Clone)]
pub struct AllSlices<O> {
    order: O,
    window: Option<Window>,
}

impl<O: CausalOrder> AllSlices<O> {
    pub fn new(order: O) -> Self {
        AllSlices { order, window: None }
    }

    /// Slice(Ω) of an infinite order, enumerated within a window.
    pub fn windowed(order: O, window: Window) -> Self {
        AllSlices {
            order,
            window: Some(window),
        }
    }
}

impl<O: CausalOrder> SliceCategory for AllSlices<O> {
    type Order = O;

    fn order(&self) -> &O {
        &self.order
    }

    fn contains(&self, s: &Slice<O::Event>) -> bool {
        s.iter().all(|e| self.order.contains(e)) && is_slice(&self.order, s.as_set())
    }

    fn objects_within(&self, events: &BTreeSet<O::Event>) -> Option<Vec<Slice<O::Event>>> {
        Some(antichains_of(&self.order, events.iter().cloned().collect(), false).collect())
    }

    fn objects(&self) -> Option<Vec<Slice<O::Event>>> {
        let events = self.order.events(self.window.as_ref()).ok()?;
        Some(antichains_of(&self.order, events, false).collect())
    }

    fn covering_witness(&self, x: &O::Event, y: &O::Event) -> Option<(Slice<O::Event>, Slice<O::Event>)> {
        // Singletons suffice when y ∈ D⁺({x}); otherwise the validator searches.
        let sx = Slice::from_set_unchecked(BTreeSet::from([x.clone()]));
        let sy = Slice::from_set_unchecked(BTreeSet::from([y.clone()]));
        self.leads_to(&sx, &sy).then_some((sx, sy))
    }
}

/// A category given by an explicit finite set of slices.
#[derive(Debug, Clone)]
pub struct ExplicitCategory<O: CausalOrder> {
    order: O,
    members: BTreeSet<Slice<O::Event>>,
}

impl<O: CausalOrder> ExplicitCategory<O> {
    pub fn new(order: O, members: impl IntoIterator<Item = Slice<O::Event>>) -> Self {
        ExplicitCategory {
            order,
            members: members.into_iter().collect(),
        }
    }
}

impl<O: CausalOrder> SliceCategory for ExplicitCategory<O> {
    type Order = O;

    fn order(&self) -> &O {
        &self.order
    }

    fn contains(&self, s: &Slice<O::Event>) -> bool {
        self.members.contains(s)
    }

    fn objects_within(&self, events: &BTreeSet<O::Event>) -> Option<Vec<Slice<O::Event>>> {
        Some(
            self.members
                .iter()
                .filter(|s| s.as_set().is_subset(events))
                .cloned()
                .collect(),
        )
    }

    fn objects(&self) -> Option<Vec<Slice<O::Event>>> {
        Some(self.members.iter().cloned().collect())
    }
}

/// The category generated by the subsets of the leaves of a foliation.
/// Products are defined only inside one common leaf.
#[derive(Debug, Clone)]
pub struct FoliationCategory<O: CausalOrder> {
    order: O,
    leaves: Vec<Slice<O::Event>>,
}

impl<O: CausalOrder> FoliationCategory<O> {
    pub fn leaves(&self) -> &[Slice<O::Event>] {
        &self.leaves
    }

    /// Index of the leaf containing a non-empty slice.
    pub fn leaf_of(&self, s: &Slice<O::Event>) -> Option<usize> {
        self.leaves.iter().position(|l| s.is_subset(l))
    }
}

/// Validates the foliation, then builds its category.
pub fn foliation_category<O: CausalOrder>(
    order: O,
    f: &Foliation<O::Event>,
    window: Option<&Window>,
) -> Result<FoliationCategory<O>, SliceError> {
    let report = validate_foliation(&order, f, window);
    if !report.passed() {
        return Err(SliceError::InvalidFoliation(report));
    }
    Ok(FoliationCategory {
        order,
        leaves: f.leaves.clone(),
    })
}

fn subsets<E: Ord + Clone>(set: &[E]) -> impl Iterator<Item = BTreeSet<E>> + '_ {
    (0u64..(1u64 << set.len())).map(move |mask| {
        set.iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, e)| e.clone())
            .collect()
    })
}

impl<O: CausalOrder> SliceCategory for FoliationCategory<O> {
    type Order = O;

    fn order(&self) -> &O {
        &self.order
    }

    fn contains(&self, s: &Slice<O::Event>) -> bool {
        s.is_empty() || self.leaf_of(s).is_some()
    }

    fn product_defined(&self, a: &Slice<O::Event>, b: &Slice<O::Event>) -> bool {
        a.as_set().is_disjoint(b.as_set())
            && (a.is_empty() && self.contains(b)
                || b.is_empty() && self.contains(a)
                || self.leaves.iter().any(|l| a.is_subset(l) && b.is_subset(l)))
    }

    fn objects_within(&self, events: &BTreeSet<O::Event>) -> Option<Vec<Slice<O::Event>>> {
        let mut out: BTreeSet<Slice<O::Event>> = BTreeSet::from([Slice::empty()]);
        for l in &self.leaves {
            let part: Vec<O::Event> = l.iter().filter(|e| events.contains(e)).cloned().collect();
            if part.len() > 20 {
                return None;
            }
            out.extend(subsets(&part).map(Slice::from_set_unchecked));
        }
        Some(out.into_iter().collect())
    }

    fn objects(&self) -> Option<Vec<Slice<O::Event>>> {
        let all: BTreeSet<O::Event> = self.leaves.iter().flat_map(|l| l.iter().cloned()).collect();
        self.objects_within(&all)
    }

    fn covering_witness(&self, x: &O::Event, y: &O::Event) -> Option<(Slice<O::Event>, Slice<O::Event>)> {
        let lx = self.leaves.iter().find(|l| l.contains(x))?;
        let ly = self.leaves.iter().find(|l| l.contains(y))?;
        self.leads_to(lx, ly).then(|| (lx.clone(), ly.clone()))
    }
}

/// A region of a category, given by generating bounded regions ◇_{Σ,Γ}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryRegion<E: Ord> {
    generators: Vec<(Slice<E>, Slice<E>)>,
    events: BTreeSet<E>,
}

impl<E: Ord + Clone> CategoryRegion<E> {
    /// The union of the generating regions. Fails if a generator is not in the
    /// category or the union is not convex.
    pub fn new<C: SliceCategory>(c: &C, generators: Vec<(Slice<E>, Slice<E>)>) -> Result<Self, SliceError>
    where
        C::Order: CausalOrder<Event = E>,
    {
        let mut events = BTreeSet::new();
        for (s, g) in &generators {
            if !c.contains(s) || !c.contains(g) {
                return Err(SliceError::NotARegionOfC);
            }
            events.extend(region_between(c.order(), s.as_set(), g.as_set())?);
        }
        if !is_region(c.order(), &events) {
            return Err(SliceError::NotARegionOfC);
        }
        Ok(CategoryRegion { generators, events })
    }

    /// Recovers generators for a raw event set from the category's members
    /// inside it. Fails unless the set is exactly a union of such regions.
    pub fn from_events<C: SliceCategory>(c: &C, events: &BTreeSet<E>) -> Result<Self, SliceError>
    where
        C::Order: CausalOrder<Event = E>,
    {
        let inside = c.objects_within(events).ok_or(SliceError::NotARegionOfC)?;
        let mut generators = Vec::new();
        let mut covered = BTreeSet::new();
        for s in &inside {
            for g in &inside {
                if s.is_empty() || g.is_empty() {
                    continue;
                }
                let r = region_between(c.order(), s.as_set(), g.as_set())?;
                if !r.is_empty() && r.is_subset(events) && !r.is_subset(&covered) {
                    covered.extend(r);
                    generators.push((s.clone(), g.clone()));
                }
            }
        }
        if &covered != events {
            return Err(SliceError::NotARegionOfC);
        }
        Self::new(c, generators)
    }

    pub fn events(&self) -> &BTreeSet<E> {
        &self.events
    }

    pub fn generators(&self) -> &[(Slice<E>, Slice<E>)] {
        &self.generators
    }

    pub fn contains_region(&self, other: &CategoryRegion<E>) -> bool {
        other.events.is_subset(&self.events)
    }
}

/// C restricted to a region: members of C contained in the region.
#[derive(Debug, Clone)]
pub struct Restricted<C: SliceCategory> {
    parent: C,
    region: CategoryRegion<Ev<C>>,
}

pub fn restrict_to_region<C: SliceCategory>(parent: C, region: CategoryRegion<Ev<C>>) -> Restricted<C> {
    Restricted { parent, region }
}

impl<C: SliceCategory> Restricted<C> {
    pub fn region(&self) -> &CategoryRegion<Ev<C>> {
        &self.region
    }

    pub fn parent(&self) -> &C {
        &self.parent
    }
}

impl<C: SliceCategory> SliceCategory for Restricted<C> {
    type Order = C::Order;

    fn order(&self) -> &C::Order {
        self.parent.order()
    }

    fn contains(&self, s: &Slice<Ev<C>>) -> bool {
        s.as_set().is_subset(self.region.events()) && self.parent.contains(s)
    }

    fn product_defined(&self, a: &Slice<Ev<C>>, b: &Slice<Ev<C>>) -> bool {
        self.contains(a) && self.contains(b) && self.parent.product_defined(a, b)
    }

    fn leads_to(&self, a: &Slice<Ev<C>>, b: &Slice<Ev<C>>) -> bool {
        self.parent.leads_to(a, b)
    }

    fn objects_within(&self, events: &BTreeSet<Ev<C>>) -> Option<Vec<Slice<Ev<C>>>> {
        let inner: BTreeSet<Ev<C>> = events.intersection(self.region.events()).cloned().collect();
        self.parent.objects_within(&inner)
    }

    fn objects(&self) -> Option<Vec<Slice<Ev<C>>>> {
        self.parent.objects_within(self.region.events())
    }

    fn covering_witness(&self, x: &Ev<C>, y: &Ev<C>) -> Option<(Slice<Ev<C>>, Slice<Ev<C>>)> {
        let (s, g) = self.parent.covering_witness(x, y)?;
        (self.contains(&s) && self.contains(&g)).then_some((s, g))
    }
}

/// The same objects as C over the reversed order.
#[derive(Debug, Clone)]
pub struct ReversedCategory<C: SliceCategory> {
    inner: C,
    order: C::Order,
}

impl<C: SliceCategory> ReversedCategory<C> {
    pub fn inner(&self) -> &C {
        &self.inner
    }

    /// Builds without validating the slice-category conditions.
    pub fn unchecked(inner: C) -> Self {
        let order = inner.order().reverse();
        ReversedCategory { inner, order }
    }
}

impl<C: SliceCategory> SliceCategory for ReversedCategory<C> {
    type Order = C::Order;

    fn order(&self) -> &C::Order {
        &self.order
    }

    fn contains(&self, s: &Slice<Ev<C>>) -> bool {
        self.inner.contains(s)
    }

    fn product_defined(&self, a: &Slice<Ev<C>>, b: &Slice<Ev<C>>) -> bool {
        self.inner.product_defined(a, b)
    }

    fn objects_within(&self, events: &BTreeSet<Ev<C>>) -> Option<Vec<Slice<Ev<C>>>> {
        self.inner.objects_within(events)
    }

    fn objects(&self) -> Option<Vec<Slice<Ev<C>>>> {
        self.inner.objects()
    }
}

/// Builds C^rev and, when C is finite, checks the slice-category conditions on it.
pub fn reverse_category<C: SliceCategory>(c: C) -> Result<ReversedCategory<C>, SliceError> {
    let rev = ReversedCategory::unchecked(c);
    if let Some(objects) = rev.objects() {
        let report = validate_slice_category(&rev, &objects, &ValidationOptions::default());
        if !report.passed() {
            return Err(SliceError::NotReversible(report));
        }
    }
    Ok(rev)
}

/// Sampling limits for [`validate_slice_category`].
#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub max_pairs: usize,
    pub max_triples: usize,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            max_pairs: 20_000,
            max_triples: 20_000,
            seed: 0,
        }
    }
}

fn sample_indices(n: usize, k: usize, max: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let total = (n as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if total <= max as u128 {
        let mut out = vec![Vec::new()];
        for _ in 0..k {
            out = out
                .into_iter()
                .flat_map(|p: Vec<usize>| {
                    (0..n).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        out
    } else {
        let idx: Vec<usize> = (0..n).collect();
        (0..max)
            .map(|_| (0..k).map(|_| *idx.choose(rng).expect("non-empty")).collect())
            .collect()
    }
}

/// Checks the three slice-category conditions on the given members:
/// (1) every related pair x ≤ y is covered by members Σ ∋ x ↠ Γ ∋ y;
/// (2) Δ ∩ ◇_{Σ,Γ} is a member; (3) ∅ is a member and defined products are
/// separated members.
pub fn validate_slice_category<C: SliceCategory>(
    c: &C,
    objects: &[Slice<Ev<C>>],
    opts: &ValidationOptions,
) -> Report {
    let o = c.order();
    let label = |s: &Slice<Ev<C>>| -> Vec<String> { s.iter().map(|e| o.label(e)).collect() };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = Report::new("slice-category");

    let events: Vec<Ev<C>> = objects
        .iter()
        .flat_map(|s| s.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let related: Vec<(usize, usize)> = (0..events.len())
        .flat_map(|i| (0..events.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| o.leq(&events[i], &events[j]))
        .collect();
    let pairs: Vec<(usize, usize)> = if related.len() > opts.max_pairs {
        related.choose_multiple(&mut rng, opts.max_pairs).copied().collect()
    } else {
        related
    };
    for (i, j) in pairs {
        let (x, y) = (&events[i], &events[j]);
        let witnessed = c.covering_witness(x, y).is_some_and(|(s, g)| c.contains(&s) && c.contains(&g) && s.contains(x) && g.contains(y) && c.leads_to(&s, &g))
            || objects.iter().filter(|s| s.contains(x)).any(|s| {
                objects.iter().any(|g| g.contains(y) && c.leads_to(s, g))
            });
        report.check(witnessed, || json!({"condition": 1, "x": o.label(x), "y": o.label(y)}));
    }

    let members: HashSet<&Slice<Ev<C>>> = objects.iter().collect();
    let in_c = |s: &Slice<Ev<C>>| members.contains(s) || c.contains(s);
    for t in sample_indices(objects.len(), 3, opts.max_triples, &mut rng) {
        let (s, g, d) = (&objects[t[0]], &objects[t[1]], &objects[t[2]]);
        let ok = match region_between(o, s.as_set(), g.as_set()) {
            Ok(r) => in_c(&d.intersect(&r)),
            Err(_) => false,
        };
        report.check(ok, || json!({"condition": 2, "sigma": label(s), "gamma": label(g), "delta": label(d)}));
    }

    report.check(c.contains(&Slice::empty()), || json!({"condition": 3, "missing": "empty slice"}));
    for p in sample_indices(objects.len(), 2, opts.max_pairs, &mut rng) {
        let (a, b) = (&objects[p[0]], &objects[p[1]]);
        if c.product_defined(a, b) {
            let ok = space_like_separated(o, a.as_set(), b.as_set()) && in_c(&a.union(b));
            report.check(ok, || json!({"condition": 3, "a": label(a), "b": label(b)}));
        }
        if a.is_empty() {
            report.check(c.product_defined(b, a), || json!({"condition": 3, "unit": label(b)}));
        }
    }
    report
}
