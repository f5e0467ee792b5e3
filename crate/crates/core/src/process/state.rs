use num_complex::Complex64;
use serde_json::json;

use super::{Backend, CMatrix, ProcObject, ProcessError};
use crate::VALIDITY_TOL;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum StateData {
    /// Row-major density operator.
    Density(Vec<Complex64>),
    Probabilities(Vec<f64>),
}

/// A state (or, unnormalised, a positive element) of an object.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcState {
    pub(crate) object: ProcObject,
    pub(crate) data: StateData,
}

impl ProcState {
    /// A density operator. Checks shape, Hermiticity and positivity.
    pub fn density(object: ProcObject, rho: &CMatrix) -> Result<Self, ProcessError> {
        if object.backend() != Backend::Quantum {
            return Err(ProcessError::BackendMismatch);
        }
        let n = object.dim();
        if rho.shape() != (n, n) {
            return Err(ProcessError::ShapeMismatch(format!("expected {n}×{n} density matrix")));
        }
        let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > VALIDITY_TOL {
            return Err(ProcessError::InvalidState("density matrix is not Hermitian".into()));
        }
        let h = (rho + rho.adjoint()).scale(0.5);
        let min = h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if n > 0 && min < -VALIDITY_TOL {
            return Err(ProcessError::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(ProcState {
            object,
            data: StateData::Density((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| rho[(i, j)]).collect()),
        })
    }

    /// |ψ⟩⟨ψ|.
    pub fn pure(object: ProcObject, psi: &[Complex64]) -> Result<Self, ProcessError> {
        if object.backend() != Backend::Quantum {
            return Err(ProcessError::BackendMismatch);
        }
        if psi.len() != object.dim() {
            return Err(ProcessError::ShapeMismatch(format!("expected vector of length {}", object.dim())));
        }
        let data = psi.iter().flat_map(|a| psi.iter().map(move |b| a * b.conj())).collect();
        Ok(ProcState {
            object,
            data: StateData::Density(data),
        })
    }

    pub fn probabilities(object: ProcObject, p: Vec<f64>) -> Result<Self, ProcessError> {
        if object.backend() != Backend::Classical {
            return Err(ProcessError::BackendMismatch);
        }
        if p.len() != object.dim() {
            return Err(ProcessError::ShapeMismatch(format!("expected {} probabilities", object.dim())));
        }
        if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(ProcessError::InvalidState("negative probability".into()));
        }
        Ok(ProcState {
            object,
            data: StateData::Probabilities(p),
        })
    }

    /// The normalised state of the unit object.
    pub fn unit(backend: Backend) -> Self {
        let object = ProcObject::unit(backend);
        let data = match backend {
            Backend::Quantum => StateData::Density(vec![Complex64::new(1.0, 0.0)]),
            Backend::Classical => StateData::Probabilities(vec![1.0]),
        };
        ProcState { object, data }
    }

    pub fn object(&self) -> &ProcObject {
        &self.object
    }

    /// Trace (quantum) or total mass (classical).
    pub fn trace(&self) -> f64 {
        match &self.data {
            StateData::Density(rho) => {
                let n = self.object.dim();
                (0..n).map(|i| rho[i * n + i].re).sum()
            }
            StateData::Probabilities(p) => p.iter().sum(),
        }
    }

    /// Diagonal of the density matrix, or the probability vector.
    pub fn diagonal(&self) -> Vec<f64> {
        match &self.data {
            StateData::Density(rho) => {
                let n = self.object.dim();
                (0..n).map(|i| rho[i * n + i].re).collect()
            }
            StateData::Probabilities(p) => p.clone(),
        }
    }

    pub fn density_matrix(&self) -> Option<CMatrix> {
        match &self.data {
            StateData::Density(rho) => {
                let n = self.object.dim();
                Some(CMatrix::from_row_slice(n, n, rho))
            }
            StateData::Probabilities(_) => None,
        }
    }

    pub fn probability_vector(&self) -> Option<&[f64]> {
        match &self.data {
            StateData::Probabilities(p) => Some(p),
            StateData::Density(_) => None,
        }
    }

    pub fn tensor(&self, other: &ProcState) -> Result<ProcState, ProcessError> {
        let object = self.object.tensor(&other.object)?;
        let data = match (&self.data, &other.data) {
            (StateData::Probabilities(a), StateData::Probabilities(b)) => {
                StateData::Probabilities(a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect())
            }
            (StateData::Density(a), StateData::Density(b)) => {
                let (na, nb) = (self.object.dim(), other.object.dim());
                let n = na * nb;
                let mut out = vec![Complex64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = a[(i / nb) * na + j / nb] * b[(i % nb) * nb + j % nb];
                    }
                }
                StateData::Density(out)
            }
            _ => return Err(ProcessError::BackendMismatch),
        };
        Ok(ProcState { object, data })
    }

    /// Entrywise max-norm distance.
    pub fn distance(&self, other: &ProcState) -> Result<f64, ProcessError> {
        if self.object != other.object {
            return Err(ProcessError::ShapeMismatch("states live on different objects".into()));
        }
        Ok(match (&self.data, &other.data) {
            (StateData::Density(a), StateData::Density(b)) => {
                a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
            }
            (StateData::Probabilities(a), StateData::Probabilities(b)) => {
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            }
            _ => return Err(ProcessError::BackendMismatch),
        })
    }

    /// A copy with one entry changed, for building counterexamples.
    pub fn perturbed(&self, index: usize, by: f64) -> ProcState {
        let mut s = self.clone();
        match &mut s.data {
            StateData::Density(rho) => rho[index].re += by,
            StateData::Probabilities(p) => p[index] += by,
        }
        s
    }

    /// JSON dump: factor shape plus data (density as [re, im] pairs).
    pub fn to_json(&self) -> serde_json::Value {
        match &self.data {
            StateData::Density(rho) => json!({
                "backend": "quantum",
                "factors": self.object.factors(),
                "shape": [self.object.dim(), self.object.dim()],
                "data": rho.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            }),
            StateData::Probabilities(p) => json!({
                "backend": "classical",
                "factors": self.object.factors(),
                "shape": [self.object.dim()],
                "data": p,
            }),
        }
    }
}
