//! The Dirac scattering map at finite mesh ε and a single-particle fast path.

use num_complex::Complex64;

use super::{build_cca, Cca, CcaConfig, CcaError};
use crate::order::DiamondLattice;
use crate::process::{Backend, CMatrix, ProcMorphism, ProcObject};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// U = 1 ⊕ σ_X exp(−imε σ_X) ⊕ 1 in the basis (−−, −+, +−, ++).
pub fn dirac_scattering(m: f64, eps: f64) -> CMatrix {
    let (s, c) = (m * eps).sin_cos();
    let mut u = CMatrix::zeros(4, 4);
    u[(0, 0)] = Complex64::new(1.0, 0.0);
    u[(3, 3)] = Complex64::new(1.0, 0.0);
    u[(1, 1)] = -I * s;
    u[(1, 2)] = Complex64::new(c, 0.0);
    u[(2, 1)] = Complex64::new(c, 0.0);
    u[(2, 2)] = -I * s;
    u
}

/// The two-qubit swap, 1 ⊕ σ_X ⊕ 1.
pub fn swap_gate() -> CMatrix {
    dirac_scattering(0.0, 1.0)
}

/// The d = 1 qubit automaton with scattering map SWAP · U_Dirac.
///
/// The swap undoes the exchange of the two incoming directions performed by
/// the σ_X block, so that under the routing convention a massless
/// excitation keeps moving in its direction (m = 0 gives pure transport).
pub fn dirac_cca(lattice: DiamondLattice, m: f64, eps: f64) -> Result<Cca, CcaError> {
    if !(eps > 0.0) {
        return Err(CcaError::BadConfig("mesh ε must be positive".into()));
    }
    let local = ProcObject::uniform(Backend::Quantum, 2, 2)?;
    let u = swap_gate() * dirac_scattering(m, eps);
    let scattering = ProcMorphism::unitary_channel(&local, &[0, 1], &u)?;
    let inverse = ProcMorphism::unitary_channel(&local, &[0, 1], &u.adjoint())?;
    build_cca(
        lattice,
        CcaConfig {
            d: 1,
            cell_dim: 2,
            scattering,
            inverse: Some(inverse),
        },
    )
}

/// The one-excitation sector of the Dirac automaton on a ring of `period`
/// sites, as two amplitude arrays indexed by site: `left[x]` is the factor
/// with direction label +1 (arriving from x+1, moving left), `right[x]` the
/// one with label −1. At time t only sites with x ≡ t (mod 2) are occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracWalk {
    period: usize,
    mass: f64,
    eps: f64,
    time: i64,
    left: Vec<Complex64>,
    right: Vec<Complex64>,
}

impl DiracWalk {
    /// Starts at t = 0 with amplitudes `init(x) = (left, right)` on the even sites.
    pub fn new(
        period: usize,
        mass: f64,
        eps: f64,
        init: impl Fn(i64) -> (Complex64, Complex64),
    ) -> Result<Self, CcaError> {
        if period < 4 || period % 2 != 0 {
            return Err(CcaError::BadConfig(format!("period must be even and at least 4, got {period}")));
        }
        if !(eps > 0.0) {
            return Err(CcaError::BadConfig("mesh ε must be positive".into()));
        }
        let mut left = vec![Complex64::new(0.0, 0.0); period];
        let mut right = left.clone();
        for x in (0..period).step_by(2) {
            let (l, r) = init(x as i64);
            left[x] = l;
            right[x] = r;
        }
        Ok(DiracWalk {
            period,
            mass,
            eps,
            time: 0,
            left,
            right,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn time(&self) -> i64 {
        self.time
    }

    pub fn left(&self) -> &[Complex64] {
        &self.left
    }

    pub fn right(&self) -> &[Complex64] {
        &self.right
    }

    /// One automaton step: scatter at every occupied site, then move the left
    /// component to x−1 and the right component to x+1.
    pub fn step(&mut self) {
        let p = self.period;
        let (s, c) = (self.mass * self.eps).sin_cos();
        let zero = Complex64::new(0.0, 0.0);
        let mut left = vec![zero; p];
        let mut right = vec![zero; p];
        let parity = self.time.rem_euclid(2) as usize;
        for y in (parity..p).step_by(2) {
            let (l, r) = (self.left[y], self.right[y]);
            left[(y + p - 1) % p] = c * l - I * s * r;
            right[(y + 1) % p] = -I * s * l + c * r;
        }
        self.left = left;
        self.right = right;
        self.time += 1;
    }

    pub fn run(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Occupation probability |L(x)|² + |R(x)|² per site.
    pub fn density(&self) -> Vec<f64> {
        self.left
            .iter()
            .zip(&self.right)
            .map(|(l, r)| l.norm_sqr() + r.norm_sqr())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.density().iter().sum()
    }
}
