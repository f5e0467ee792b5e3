//! Group actions on causal orders by automorphisms, and invariance of field
//! theories under them.

use rayon::prelude::*;
use serde_json::json;

use crate::field_theory::{slice_labels, FieldError, FieldTheory, SliceOf};
use crate::order::{neighbourhood, CausalOrder, Coord, DiamondLattice, EventId, FiniteOrder, LatticePoint, OrderError};
use crate::process::ProcMorphism;
use crate::report::Report;
use crate::slices::{Slice, SliceCategory};

/// A group element as a word in the generators: `(generator, inverse)`
/// letters, applied right to left.
pub type Word = Vec<(usize, bool)>;

/// An action of a finitely generated group on the events of an order.
pub trait SymmetryAction: Send + Sync {
    type Order: CausalOrder;

    fn order(&self) -> &Self::Order;

    fn generator_count(&self) -> usize;

    fn act(&self, generator: usize, inverse: bool, e: &<Self::Order as CausalOrder>::Event)
        -> <Self::Order as CausalOrder>::Event;

    /// Whether two generators commute as group elements.
    fn commute(&self, _a: usize, _b: usize) -> bool {
        false
    }

    fn generator_label(&self, g: usize) -> String {
        format!("g{g}")
    }
}

type EvOf<A> = <<A as SymmetryAction>::Order as CausalOrder>::Event;

pub fn act_word<A: SymmetryAction>(action: &A, word: &[(usize, bool)], e: &EvOf<A>) -> EvOf<A> {
    word.iter().rev().fold(e.clone(), |acc, &(g, inv)| action.act(g, inv, &acc))
}

pub fn act_slice<A: SymmetryAction>(action: &A, word: &[(usize, bool)], s: &Slice<EvOf<A>>) -> Slice<EvOf<A>> {
    s.map(|e| act_word(action, word, e))
}

/// Every word of length ≤ `max_len` over the generators and their inverses,
/// including the empty word.
pub fn words_up_to(generators: usize, max_len: usize) -> Vec<Word> {
    let letters: Vec<(usize, bool)> = (0..generators).flat_map(|g| [(g, false), (g, true)]).collect();
    let mut out = vec![Word::new()];
    let mut frontier = vec![Word::new()];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|w| {
                letters.iter().map(move |l| {
                    let mut v = w.clone();
                    v.push(*l);
                    v
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

fn word_label<A: SymmetryAction>(action: &A, w: &[(usize, bool)]) -> String {
    if w.is_empty() {
        return "e".into();
    }
    w.iter()
        .map(|&(g, inv)| format!("{}{}", action.generator_label(g), if inv { "⁻¹" } else { "" }))
        .collect::<Vec<_>>()
        .join("·")
}

/// Lattice translations τ_δ(t, x) = (t+1, x−δ), one generator per δ ∈ N.
#[derive(Debug, Clone)]
pub struct LatticeTranslations {
    lattice: DiamondLattice,
    directions: Vec<Coord>,
}

impl LatticeTranslations {
    pub fn new(lattice: DiamondLattice) -> Self {
        let directions = neighbourhood(lattice.dim());
        LatticeTranslations { lattice, directions }
    }

    pub fn directions(&self) -> &[Coord] {
        &self.directions
    }
}

impl SymmetryAction for LatticeTranslations {
    type Order = DiamondLattice;

    fn order(&self) -> &DiamondLattice {
        &self.lattice
    }

    fn generator_count(&self) -> usize {
        self.directions.len()
    }

    fn act(&self, g: usize, inverse: bool, e: &LatticePoint) -> LatticePoint {
        let delta = &self.directions[g];
        if inverse {
            self.lattice.shift(e, -1, delta)
        } else {
            let neg: Coord = delta.iter().map(|c| -c).collect();
            self.lattice.shift(e, 1, &neg)
        }
    }

    fn commute(&self, _a: usize, _b: usize) -> bool {
        true
    }

    fn generator_label(&self, g: usize) -> String {
        let signs: String = self.directions[g].iter().map(|&c| if c < 0 { '-' } else { '+' }).collect();
        format!("τ{signs}")
    }
}

/// A group generated by explicit permutations of a finite order's events.
#[derive(Debug, Clone)]
pub struct PermutationGroup {
    order: FiniteOrder,
    perms: Vec<Vec<usize>>,
    inverses: Vec<Vec<usize>>,
}

impl PermutationGroup {
    /// `perms[g][i]` is the index of the image of event i under generator g.
    pub fn new(order: FiniteOrder, perms: Vec<Vec<usize>>) -> Result<Self, OrderError> {
        let n = order.len();
        let mut inverses = Vec::with_capacity(perms.len());
        for p in &perms {
            let mut inv = vec![usize::MAX; n];
            if p.len() != n {
                return Err(OrderError::BadParams(format!("permutation of length {} on {n} events", p.len())));
            }
            for (i, &q) in p.iter().enumerate() {
                if q >= n || inv[q] != usize::MAX {
                    return Err(OrderError::BadParams("generator is not a bijection".into()));
                }
                inv[q] = i;
            }
            inverses.push(inv);
        }
        Ok(PermutationGroup { order, perms, inverses })
    }
}

impl SymmetryAction for PermutationGroup {
    type Order = FiniteOrder;

    fn order(&self) -> &FiniteOrder {
        &self.order
    }

    fn generator_count(&self) -> usize {
        self.perms.len()
    }

    fn act(&self, g: usize, inverse: bool, e: &EventId) -> EventId {
        let table = if inverse { &self.inverses[g] } else { &self.perms[g] };
        EventId(table[e.index()] as u32)
    }
}

/// Checks that every word acts by order automorphisms on the sampled events,
/// and on the sampled slices preserves membership (1), ↠ (2) and ⊗ (3). With
/// `leaves` given, also checks that consecutive leaves are related by a
/// generator or its inverse (transitivity on the foliation).
pub fn check_symmetry_action<A, C>(
    action: &A,
    c: &C,
    words: &[Word],
    events: &[EvOf<A>],
    objects: &[Slice<EvOf<A>>],
    leaves: Option<&[Slice<EvOf<A>>]>,
) -> Report
where
    A: SymmetryAction,
    C: SliceCategory<Order = A::Order>,
{
    let o = action.order();
    let mut report = Report::new("symmetry");
    for w in words {
        let wl = word_label(action, w);
        let images: Vec<EvOf<A>> = events.iter().map(|e| act_word(action, w, e)).collect();
        for (e, ge) in events.iter().zip(&images) {
            report.check(o.contains(ge), || {
                json!({"condition": "automorphism", "word": wl, "event": o.label(e)})
            });
        }
        for (i, x) in events.iter().enumerate() {
            for (j, y) in events.iter().enumerate() {
                let ok = o.leq(x, y) == o.leq(&images[i], &images[j]);
                report.check(ok, || {
                    json!({"condition": "automorphism", "word": wl, "x": o.label(x), "y": o.label(y)})
                });
            }
        }
        let moved: Vec<Slice<EvOf<A>>> = objects.iter().map(|s| act_slice(action, w, s)).collect();
        for (s, gs) in objects.iter().zip(&moved) {
            report.check(c.contains(gs), || {
                json!({"condition": 1, "word": wl, "slice": slice_labels(o, s)})
            });
        }
        let n = objects.len();
        let results: Vec<(usize, usize, Option<bool>, Option<bool>)> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let (a, b) = (&objects[i], &objects[j]);
                let lead = c.leads_to(a, b).then(|| c.leads_to(&moved[i], &moved[j]));
                let prod = c.product_defined(a, b).then(|| {
                    c.product_defined(&moved[i], &moved[j])
                        && act_slice(action, w, &a.union(b)) == moved[i].union(&moved[j])
                });
                (i, j, lead, prod)
            })
            .collect();
        for (i, j, lead, prod) in results {
            let (a, b) = (&objects[i], &objects[j]);
            if let Some(ok) = lead {
                report.check(ok, || {
                    json!({"condition": 2, "word": wl, "sigma": slice_labels(o, a), "gamma": slice_labels(o, b)})
                });
            }
            if let Some(ok) = prod {
                report.check(ok, || {
                    json!({"condition": 3, "word": wl, "sigma": slice_labels(o, a), "gamma": slice_labels(o, b)})
                });
            }
        }
    }
    if let Some(leaves) = leaves {
        for (i, pair) in leaves.windows(2).enumerate() {
            let reached = (0..action.generator_count())
                .flat_map(|g| [(g, false), (g, true)])
                .any(|letter| act_slice(action, &[letter], &pair[0]) == pair[1]);
            report.check(reached, || json!({"condition": "transitivity", "leaf": i}));
        }
    }
    report
}

/// How naturality squares are compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Comparison {
    /// The two kernel programs must be identical.
    Exact,
    /// Basis-sweep comparison within the tolerance.
    Tolerance(f64),
}

/// The natural isomorphism α for one generator letter at a slice:
/// Ψ(Σ) → Ψ(g(Σ)).
pub type Alpha<'a, E> = dyn Fn(usize, bool, &Slice<E>) -> Result<ProcMorphism, FieldError> + Sync + 'a;

/// α extended to a word by the cocycle rule α_{h·g} = (α_h g) ∘ α_g.
fn alpha_word<A: SymmetryAction>(
    action: &A,
    alpha: &Alpha<'_, EvOf<A>>,
    word: &[(usize, bool)],
    s: &Slice<EvOf<A>>,
    start: ProcMorphism,
) -> Result<ProcMorphism, FieldError> {
    let mut acc = start;
    let mut cur = s.clone();
    for &(g, inv) in word.iter().rev() {
        acc = acc.then(&alpha(g, inv, &cur)?)?;
        cur = act_slice(action, &[(g, inv)], &cur);
    }
    Ok(acc)
}

fn compare(a: &ProcMorphism, b: &ProcMorphism, mode: Comparison) -> Result<(f64, f64), FieldError> {
    Ok(match mode {
        Comparison::Exact => {
            let same = a.dom() == b.dom() && a.cod() == b.cod() && a.steps() == b.steps();
            (if same { 0.0 } else { 1.0 }, 0.5)
        }
        Comparison::Tolerance(tol) => (a.deviation(b)?, tol),
    })
}

/// Naturality α_g(Γ) ∘ Ψ(Σ↠Γ) = Ψ(gΣ↠gΓ) ∘ α_g(Σ) for every word and
/// sampled pair, and the cocycle consistency α_{ab} = α_{ba} for commuting
/// generators and α_{g g⁻¹} = id on every sampled slice.
pub fn check_invariance<F, A>(
    psi: &F,
    action: &A,
    alpha: &Alpha<'_, EvOf<A>>,
    words: &[Word],
    pairs: &[(SliceOf<F>, SliceOf<F>)],
    mode: Comparison,
) -> Report
where
    F: FieldTheory,
    A: SymmetryAction<Order = <F::Category as SliceCategory>::Order>,
{
    let o = action.order();
    let mut report = Report::new("invariance");
    let jobs: Vec<(&Word, &(SliceOf<F>, SliceOf<F>))> = words.iter().flat_map(|w| pairs.iter().map(move |p| (w, p))).collect();
    let results: Vec<(Result<(f64, f64), FieldError>, serde_json::Value)> = jobs
        .par_iter()
        .map(|(w, (a, b))| {
            let r = (|| {
                let lhs = alpha_word(action, alpha, w, b, psi.morphism(a, b)?)?;
                let (ga, gb) = (act_slice(action, w, a), act_slice(action, w, b));
                let rhs = alpha_word(action, alpha, w, a, ProcMorphism::identity(&psi.object(a)?))?
                    .then(&psi.morphism(&ga, &gb)?)?;
                compare(&lhs, &rhs, mode)
            })();
            let wl = word_label(action, w);
            (r, json!({"law": "naturality", "word": wl, "sigma": slice_labels(o, a), "gamma": slice_labels(o, b)}))
        })
        .collect();
    for (r, mut w) in results {
        match r {
            Ok((d, tol)) => report.record(d, tol, || w),
            Err(e) => {
                w["error"] = json!(e.to_string());
                report.record(f64::NAN, 0.0, || w);
            }
        }
    }
    let mut slices: Vec<SliceOf<F>> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    slices.sort();
    slices.dedup();
    let gens = action.generator_count();
    for s in &slices {
        let id = match psi.object(s) {
            Ok(obj) => ProcMorphism::identity(&obj),
            Err(_) => continue,
        };
        for g in 0..gens {
            for inv in [false, true] {
                let r = alpha_word(action, alpha, &[(g, !inv), (g, inv)], s, id.clone())
                    .and_then(|m| compare(&m, &id, mode));
                let (d, tol) = r.unwrap_or((f64::NAN, 0.0));
                report.record(d, tol, || {
                    json!({"law": "cocycle", "word": word_label(action, &[(g, !inv), (g, inv)]), "slice": slice_labels(o, s)})
                });
            }
            for h in g + 1..gens {
                if !action.commute(g, h) {
                    continue;
                }
                let r = (|| {
                    let ab = alpha_word(action, alpha, &[(g, false), (h, false)], s, id.clone())?;
                    let ba = alpha_word(action, alpha, &[(h, false), (g, false)], s, id.clone())?;
                    compare(&ab, &ba, mode)
                })();
                let (d, tol) = r.unwrap_or((f64::NAN, 0.0));
                report.record(d, tol, || {
                    json!({"law": "cocycle", "generators": [action.generator_label(g), action.generator_label(h)], "slice": slice_labels(o, s)})
                });
            }
        }
    }
    report
}
