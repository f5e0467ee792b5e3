use std::fmt;

use smallvec::SmallVec;

use super::{CausalOrder, OrderError, Window};

pub type Coord = SmallVec<[i64; 4]>;

/// An event (t, x) of the diamond lattice. Ordered by time, then
/// lexicographically by coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticePoint {
    pub t: i64,
    pub x: Coord,
}

impl LatticePoint {
    pub fn new(t: i64, x: &[i64]) -> Self {
        LatticePoint {
            t,
            x: x.iter().copied().collect(),
        }
    }

    pub fn has_valid_parity(&self) -> bool {
        self.x.iter().all(|c| (c - self.t).rem_euclid(2) == 0)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.t)?;
        for c in &self.x {
            write!(f, ",{c}")?;
        }
        Ok(())
    }
}

/// N = {±1}^d in lexicographic sign order (−1 before +1).
pub fn neighbourhood(d: usize) -> Vec<Coord> {
    let mut out: Vec<Coord> = vec![Coord::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                [-1i64, 1].into_iter().map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// N^(k): the d-fold product of {−k, −k+2, …, k}. N^(0) = {0}^d.
pub fn iterated_neighbourhood(k: u32, d: usize) -> Vec<Coord> {
    let k = k as i64;
    let line: Vec<i64> = (0..=k).map(|j| -k + 2 * j).collect();
    let mut out: Vec<Coord> = vec![Coord::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                line.iter().map(move |&s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// The (1+d)-dimensional diamond lattice: events (t, x) with x_i ≡ t mod 2,
/// immediate successors (t+1, x+δ) for δ ∈ {±1}^d.
///
/// With `period = Some(p)` the spatial coordinates live on a ring (torus) of
/// circumference p, stored reduced to [0, p).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiamondLattice {
    d: usize,
    period: Option<i64>,
    reversed: bool,
}

impl DiamondLattice {
    pub fn new(d: usize) -> Result<Self, OrderError> {
        if d == 0 {
            return Err(OrderError::BadParams("lattice dimension must be at least 1".into()));
        }
        Ok(DiamondLattice {
            d,
            period: None,
            reversed: false,
        })
    }

    /// A lattice whose spatial coordinates wrap with the given even period (≥ 4).
    pub fn periodic(d: usize, period: i64) -> Result<Self, OrderError> {
        let mut l = Self::new(d)?;
        if period < 4 || period % 2 != 0 {
            return Err(OrderError::BadParams(format!(
                "period must be even and at least 4, got {period}"
            )));
        }
        l.period = Some(period);
        Ok(l)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn period(&self) -> Option<i64> {
        self.period
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    fn wrap(&self, c: i64) -> i64 {
        match self.period {
            Some(p) => c.rem_euclid(p),
            None => c,
        }
    }

    /// Checked constructor for an event of this lattice.
    pub fn point(&self, t: i64, x: &[i64]) -> Result<LatticePoint, OrderError> {
        let p = LatticePoint {
            t,
            x: x.iter().map(|&c| self.wrap(c)).collect(),
        };
        if x.len() != self.d || !p.has_valid_parity() {
            return Err(OrderError::InvalidEvent(format!("{t},{x:?}")));
        }
        Ok(p)
    }

    /// Translates coordinates by `delta` (wrapping on a ring).
    pub fn shift(&self, p: &LatticePoint, dt: i64, delta: &[i64]) -> LatticePoint {
        LatticePoint {
            t: p.t + dt,
            x: p.x.iter().zip(delta).map(|(c, s)| self.wrap(c + s)).collect(),
        }
    }

    /// Spatial distance along one axis (shortest way round on a ring).
    fn axis_dist(&self, a: i64, b: i64) -> i64 {
        let raw = (a - b).abs();
        match self.period {
            Some(p) => {
                let r = raw.rem_euclid(p);
                r.min(p - r)
            }
            None => raw,
        }
    }

    /// Forward-time relation, ignoring reversal.
    fn forward_leq(&self, x: &LatticePoint, y: &LatticePoint) -> bool {
        let k = y.t - x.t;
        k >= 0
            && x.x.iter().zip(&y.x).all(|(a, b)| self.axis_dist(*a, *b) <= k)
    }

    fn step(&self, e: &LatticePoint, dt: i64) -> Vec<LatticePoint> {
        let mut out: Vec<LatticePoint> = neighbourhood(self.d)
            .iter()
            .map(|delta| self.shift(e, dt, delta))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// All events of one time layer inside the window box.
    pub fn layer(&self, t: i64, window: &Window) -> Vec<LatticePoint> {
        let mut coords: Vec<Coord> = vec![Coord::new()];
        for axis in 0..self.d {
            let (lo, hi) = match self.period {
                Some(p) if window.x.get(axis).is_none() => (0, p - 1),
                _ => window.x[axis],
            };
            coords = coords
                .into_iter()
                .flat_map(|p| {
                    (lo..=hi)
                        .filter(|c| (c - t).rem_euclid(2) == 0)
                        .map(move |c| {
                            let mut q = p.clone();
                            q.push(c);
                            q
                        })
                })
                .collect();
        }
        let mut out: Vec<LatticePoint> = coords
            .into_iter()
            .map(|x| LatticePoint {
                t,
                x: x.into_iter().map(|c| self.wrap(c)).collect(),
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

impl CausalOrder for DiamondLattice {
    type Event = LatticePoint;

    fn contains(&self, e: &LatticePoint) -> bool {
        e.x.len() == self.d
            && e.has_valid_parity()
            && self.period.map_or(true, |p| e.x.iter().all(|&c| (0..p).contains(&c)))
    }

    fn leq(&self, x: &LatticePoint, y: &LatticePoint) -> bool {
        if self.reversed {
            self.forward_leq(y, x)
        } else {
            self.forward_leq(x, y)
        }
    }

    fn predecessors(&self, e: &LatticePoint) -> Vec<LatticePoint> {
        self.step(e, if self.reversed { 1 } else { -1 })
    }

    fn successors(&self, e: &LatticePoint) -> Vec<LatticePoint> {
        self.step(e, if self.reversed { -1 } else { 1 })
    }

    fn events(&self, window: Option<&Window>) -> Result<Vec<LatticePoint>, OrderError> {
        let w = window.ok_or(OrderError::UnboundedQuery)?;
        if self.period.is_none() && w.x.len() != self.d {
            return Err(OrderError::BadParams(format!(
                "window has {} spatial ranges, lattice has dimension {}",
                w.x.len(),
                self.d
            )));
        }
        Ok((w.t.0..=w.t.1).flat_map(|t| self.layer(t, w)).collect())
    }

    fn finite_domains(&self) -> bool {
        self.period.is_none()
    }

    fn reverse(&self) -> Self {
        DiamondLattice {
            reversed: !self.reversed,
            ..self.clone()
        }
    }

    fn label(&self, e: &LatticePoint) -> String {
        e.to_string()
    }

    fn parse_event(&self, s: &str) -> Result<LatticePoint, OrderError> {
        let parts: Result<Vec<i64>, _> = s.split(',').map(|p| p.trim().parse::<i64>()).collect();
        let parts = parts.map_err(|_| OrderError::InvalidEvent(s.to_string()))?;
        if parts.len() != self.d + 1 {
            return Err(OrderError::InvalidEvent(s.to_string()));
        }
        self.point(parts[0], &parts[1..])
    }

    fn is_initial(&self, e: &LatticePoint, window: Option<&Window>) -> bool {
        window.is_some_and(|w| e.t == if self.reversed { w.t.1 } else { w.t.0 })
    }

    fn is_terminal(&self, e: &LatticePoint, window: Option<&Window>) -> bool {
        window.is_some_and(|w| e.t == if self.reversed { w.t.0 } else { w.t.1 })
    }

    fn in_window(&self, e: &LatticePoint, window: Option<&Window>) -> bool {
        match window {
            None => true,
            Some(w) if self.period.is_some() && w.x.is_empty() => e.t >= w.t.0 && e.t <= w.t.1,
            Some(w) => w.contains(e),
        }
    }
}
