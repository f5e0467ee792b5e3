//! JSON interchange formats, the honeycomb generator, and DOT/CSV writers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cca::{build_cca, dirac_scattering, swap_gate, Cca, CcaConfig, CcaError};
use crate::order::{CausalOrder, DiamondLattice, EventId, FiniteOrder, OrderError, OrderMorphism, Window};
use crate::process::{Backend, CMatrix, ProcMorphism, ProcObject, ProcState, ProcessError, RMatrix};
use crate::slices::{Foliation, Slice, SliceError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Cca(#[from] CcaError),
}

/// `{ "events": [..], "hasse": [[a, b], ..] }`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderJson {
    pub events: Vec<String>,
    pub hasse: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeJson {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<i64>,
}

/// Either an explicit order or `{ "lattice": { "d": .., "period": .. } }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderSpec {
    Lattice { lattice: LatticeJson },
    Explicit(OrderJson),
}

/// A loaded causal order.
#[derive(Debug, Clone)]
pub enum LoadedOrder {
    Finite(FiniteOrder),
    Lattice(DiamondLattice),
}

pub fn order_to_json(o: &FiniteOrder) -> OrderJson {
    OrderJson {
        events: o.names().to_vec(),
        hasse: o
            .hasse_edges()
            .into_iter()
            .map(|(a, b)| (o.name(a).to_string(), o.name(b).to_string()))
            .collect(),
    }
}

pub fn order_from_json(j: &OrderJson) -> Result<FiniteOrder, IoError> {
    let events: Vec<&str> = j.events.iter().map(String::as_str).collect();
    let edges: Vec<(&str, &str)> = j.hasse.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    Ok(FiniteOrder::build_explicit(&events, &edges)?)
}

pub fn load_order(text: &str) -> Result<LoadedOrder, IoError> {
    match serde_json::from_str::<OrderSpec>(text)? {
        OrderSpec::Explicit(j) => Ok(LoadedOrder::Finite(order_from_json(&j)?)),
        OrderSpec::Lattice { lattice } => Ok(LoadedOrder::Lattice(lattice_from_json(lattice)?)),
    }
}

pub fn lattice_from_json(l: LatticeJson) -> Result<DiamondLattice, IoError> {
    Ok(match l.period {
        Some(p) => DiamondLattice::periodic(l.d, p)?,
        None => DiamondLattice::new(l.d)?,
    })
}

/// The lattice events inside a window as an explicit order, named "t,x1,…,xd".
pub fn materialise_window(lattice: &DiamondLattice, window: &Window) -> Result<FiniteOrder, IoError> {
    let events = lattice.events(Some(window))?;
    let names: Vec<String> = events.iter().map(|e| lattice.label(e)).collect();
    let index: BTreeMap<_, _> = events.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
    let mut edges = Vec::new();
    for (i, e) in events.iter().enumerate() {
        for s in lattice.successors(e) {
            if let Some(&j) = index.get(&s) {
                edges.push((EventId(i as u32), EventId(j as u32)));
            }
        }
    }
    Ok(FiniteOrder::from_edges(names, &edges)?)
}

/// A brick-wall honeycomb over a d = 1 window together with its 2-to-1
/// collapse onto the diamond window.
#[derive(Debug, Clone)]
pub struct Honeycomb {
    pub order: FiniteOrder,
    pub diamond: FiniteOrder,
    pub collapse: OrderMorphism,
}

/// Each diamond event (t, x) splits into a vertex "t,x,in" receiving the two
/// edges from the past and a vertex "t,x,out" emitting the two edges to the
/// future, joined by a vertical edge. Every vertex has degree at most three
/// and the faces are hexagons. The collapse sends both halves to (t, x).
pub fn honeycomb(t: (i64, i64), x: (i64, i64)) -> Result<Honeycomb, IoError> {
    let lattice = DiamondLattice::new(1)?;
    let window = Window::cube(t, x, 1);
    let diamond = materialise_window(&lattice, &window)?;
    let mut names = Vec::with_capacity(2 * diamond.len());
    for n in diamond.names() {
        names.push(format!("{n},in"));
        names.push(format!("{n},out"));
    }
    let mut edges = Vec::new();
    for e in diamond.ids() {
        let i = e.index() as u32;
        edges.push((EventId(2 * i), EventId(2 * i + 1)));
    }
    for (a, b) in diamond.hasse_edges() {
        edges.push((EventId(2 * a.index() as u32 + 1), EventId(2 * b.index() as u32)));
    }
    let order = FiniteOrder::from_edges(names, &edges)?;
    let map = (0..order.len()).map(|i| EventId((i / 2) as u32)).collect();
    let collapse = OrderMorphism::new(order.clone(), diamond.clone(), map)?;
    Ok(Honeycomb {
        order,
        diamond,
        collapse,
    })
}

/// `{ "events": [..] }`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceJson {
    pub events: Vec<String>,
}

/// `{ "leaves": [[..], ..] }`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoliationJson {
    pub leaves: Vec<Vec<String>>,
}

pub fn parse_events<O: CausalOrder, S: AsRef<str>>(o: &O, names: &[S]) -> Result<BTreeSet<O::Event>, IoError> {
    names.iter().map(|n| Ok(o.parse_event(n.as_ref())?)).collect()
}

pub fn slice_from_json<O: CausalOrder>(o: &O, j: &SliceJson) -> Result<Slice<O::Event>, IoError> {
    Ok(Slice::new(o, parse_events(o, &j.events)?)?)
}

pub fn slice_to_json<O: CausalOrder>(o: &O, s: &Slice<O::Event>) -> SliceJson {
    SliceJson {
        events: s.iter().map(|e| o.label(e)).collect(),
    }
}

pub fn foliation_from_json<O: CausalOrder>(o: &O, j: &FoliationJson) -> Result<Foliation<O::Event>, IoError> {
    let leaves = j
        .leaves
        .iter()
        .map(|l| Ok(Slice::from_set_unchecked(parse_events(o, l)?)))
        .collect::<Result<Vec<_>, IoError>>()?;
    Ok(Foliation { leaves })
}

/// Row-major complex entries `[[re, im], ..]` with a declared shape. A bare
/// list of rows of pairs is accepted too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixJson {
    Flat { shape: (usize, usize), data: Vec<[f64; 2]> },
    Rows(Vec<Vec<[f64; 2]>>),
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let (r, c) = m.shape();
        MatrixJson::Flat {
            shape: (r, c),
            data: (0..r)
                .flat_map(|i| (0..c).map(move |j| (i, j)))
                .map(|ij| [m[ij].re, m[ij].im])
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix, IoError> {
        let (r, c, data): (usize, usize, Vec<[f64; 2]>) = match self {
            MatrixJson::Flat { shape, data } => (shape.0, shape.1, data.clone()),
            MatrixJson::Rows(rows) => {
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err(IoError::Invalid("ragged matrix rows".into()));
                }
                (rows.len(), c, rows.concat())
            }
        };
        if data.len() != r * c {
            return Err(IoError::Invalid(format!("{} entries for shape {r}x{c}", data.len())));
        }
        Ok(CMatrix::from_row_iterator(
            r,
            c,
            data.iter().map(|[re, im]| Complex64::new(*re, *im)),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracJson {
    pub m: f64,
    pub eps: f64,
}

/// `{ "d", "cell_dim", "U", "U_inv"?, "backend" }`. Instead of `U` one may
/// give `kraus` (a list of matrices) or `dirac` ({ m, eps }). `period` makes
/// the lattice a ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaConfigJson {
    pub d: usize,
    pub cell_dim: usize,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<MatrixJson>,
    #[serde(rename = "U_inv", default, skip_serializing_if = "Option::is_none")]
    pub u_inv: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirac: Option<DiracJson>,
    pub backend: Backend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<i64>,
}

impl CcaConfigJson {
    pub fn lattice(&self) -> Result<DiamondLattice, IoError> {
        lattice_from_json(LatticeJson {
            d: self.d,
            period: self.period,
        })
    }

    /// The scattering map on the local object and its optional inverse.
    pub fn scattering(&self) -> Result<(ProcMorphism, Option<ProcMorphism>), IoError> {
        let n = 1usize << self.d;
        let local = ProcObject::uniform(self.backend, self.cell_dim, n)?;
        let at: Vec<usize> = (0..n).collect();
        let channel = |m: &CMatrix| -> Result<ProcMorphism, IoError> {
            Ok(match self.backend {
                Backend::Quantum => ProcMorphism::unitary_channel(&local, &at, m)?,
                Backend::Classical => ProcMorphism::stochastic(&local, &at, &real_part(m)?)?,
            })
        };
        let sources = [self.u.is_some(), self.kraus.is_some(), self.dirac.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(IoError::Invalid("give exactly one of U, kraus, dirac".into()));
        }
        if let Some(dj) = &self.dirac {
            if self.d != 1 || self.cell_dim != 2 || self.backend != Backend::Quantum {
                return Err(IoError::Invalid("the Dirac map needs d = 1, cell_dim = 2, quantum".into()));
            }
            if !(dj.eps > 0.0) {
                return Err(IoError::Invalid("mesh ε must be positive".into()));
            }
            let u = swap_gate() * dirac_scattering(dj.m, dj.eps);
            return Ok((channel(&u)?, Some(channel(&u.adjoint())?)));
        }
        let forward = match (&self.u, &self.kraus) {
            (Some(u), _) => channel(&u.to_matrix()?)?,
            (_, Some(ops)) => {
                if self.backend != Backend::Quantum {
                    return Err(IoError::Invalid("Kraus operators need the quantum backend".into()));
                }
                let ops = ops.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>, _>>()?;
                ProcMorphism::kraus_channel(&local, &at, &ops)?
            }
            _ => unreachable!("exactly one source was checked above"),
        };
        let inverse = self.u_inv.as_ref().map(|m| channel(&m.to_matrix()?)).transpose()?;
        Ok((forward, inverse))
    }

    pub fn build(&self) -> Result<Cca, IoError> {
        let (scattering, inverse) = self.scattering()?;
        Ok(build_cca(
            self.lattice()?,
            CcaConfig {
                d: self.d,
                cell_dim: self.cell_dim,
                scattering,
                inverse,
            },
        )?)
    }
}

fn real_part(m: &CMatrix) -> Result<RMatrix, IoError> {
    if m.iter().any(|z| z.im != 0.0) {
        return Err(IoError::Invalid("classical matrices must be real".into()));
    }
    Ok(m.map(|z| z.re))
}

/// Hasse diagram in DOT. Events of equal height share a rank.
pub fn to_dot(o: &FiniteOrder) -> String {
    let mut height = vec![0usize; o.len()];
    let edges = o.hasse_edges();
    for e in o.linear_extension() {
        for &(a, b) in edges.iter().filter(|(_, b)| *b == e) {
            height[b.index()] = height[b.index()].max(height[a.index()] + 1);
        }
    }
    let mut ranks: BTreeMap<usize, Vec<EventId>> = BTreeMap::new();
    for e in o.ids() {
        ranks.entry(height[e.index()]).or_default().push(e);
    }
    let mut out = String::from("digraph causal_order {\n  rankdir=BT;\n");
    for e in o.ids() {
        let _ = writeln!(out, "  {:?};", o.name(e));
    }
    for group in ranks.values() {
        let names: Vec<String> = group.iter().map(|e| format!("{:?}", o.name(*e))).collect();
        let _ = writeln!(out, "  {{ rank=same; {} }}", names.join("; "));
    }
    for (a, b) in edges {
        let _ = writeln!(out, "  {:?} -> {:?};", o.name(a), o.name(b));
    }
    out.push_str("}\n");
    out
}

/// One row per (time, site, probability) triple under the header
/// `time,site,probability`.
pub fn marginals_csv(rows: &[(i64, i64, f64)]) -> String {
    let mut out = String::from("time,site,probability\n");
    for (t, x, p) in rows {
        let _ = writeln!(out, "{t},{x},{p}");
    }
    out
}

/// Reads a state dump in the format written by [`ProcState::to_json`]. The
/// declared factors must match `object`.
pub fn state_from_json(value: &serde_json::Value, object: &ProcObject) -> Result<ProcState, IoError> {
    #[derive(Deserialize)]
    struct Dump {
        backend: Backend,
        factors: Vec<usize>,
        data: serde_json::Value,
    }
    let dump: Dump = serde_json::from_value(value.clone())?;
    if dump.backend != object.backend() || dump.factors != object.factors() {
        return Err(IoError::Invalid(format!(
            "state has factors {:?}, the slice needs {:?}",
            dump.factors,
            object.factors()
        )));
    }
    Ok(match dump.backend {
        Backend::Quantum => {
            let data: Vec<[f64; 2]> = serde_json::from_value(dump.data)?;
            let n = object.dim();
            if data.len() != n * n {
                return Err(IoError::Invalid(format!("{} entries for a {n}x{n} density matrix", data.len())));
            }
            let rho = CMatrix::from_row_iterator(n, n, data.iter().map(|[re, im]| Complex64::new(*re, *im)));
            ProcState::density(object.clone(), &rho)?
        }
        Backend::Classical => ProcState::probabilities(object.clone(), serde_json::from_value(dump.data)?)?,
    })
}
