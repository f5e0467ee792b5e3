//! The field category: finite-dimensional quantum channels and classical
//! stochastic maps, with discarding.
//!
//! Morphisms are kernel programs: ordered lists of elementary steps acting on
//! the tensor factors of the current object. They are evaluated lazily on
//! states, never expanded into dense superoperators.

mod eval;
mod state;
pub mod tensor;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::VALIDITY_TOL;

pub use eval::{choi_matrix, is_completely_positive};
pub use state::ProcState;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error("backends differ")]
    BackendMismatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("factor index {0} out of range")]
    BadFactorIndex(usize),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("matrix entries must be non-negative")]
    NotStochastic,
    #[error("invalid state: {0}")]
    InvalidState(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Quantum,
    Classical,
}

/// A tensor product of atomic factors. The unit object has no factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProcObject {
    backend: Backend,
    factors: Vec<usize>,
}

impl ProcObject {
    pub fn new(backend: Backend, factors: Vec<usize>) -> Result<Self, ProcessError> {
        if factors.contains(&0) {
            return Err(ProcessError::ShapeMismatch("factor dimension 0".into()));
        }
        Ok(ProcObject { backend, factors })
    }

    pub fn unit(backend: Backend) -> Self {
        ProcObject {
            backend,
            factors: Vec::new(),
        }
    }

    /// `n` copies of a factor of dimension `dim`.
    pub fn uniform(backend: Backend, dim: usize, n: usize) -> Result<Self, ProcessError> {
        Self::new(backend, vec![dim; n])
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().product()
    }

    pub fn is_unit(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn tensor(&self, other: &ProcObject) -> Result<ProcObject, ProcessError> {
        if self.backend != other.backend {
            return Err(ProcessError::BackendMismatch);
        }
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        Ok(ProcObject {
            backend: self.backend,
            factors,
        })
    }
}

/// One elementary step of a kernel program. Positions refer to the factor
/// list current at that point of the program; matrices are row-major over
/// the listed factors, the first listed being most significant.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Unitary { at: Vec<usize>, matrix: Arc<Vec<Complex64>> },
    Kraus { at: Vec<usize>, ops: Arc<Vec<Vec<Complex64>>> },
    Stochastic { at: Vec<usize>, matrix: Arc<Vec<f64>> },
    Discard { at: Vec<usize> },
    /// Output factor `offset + i` is input factor `offset + perm[i]`.
    Permute { offset: usize, perm: Vec<usize> },
}

impl Step {
    fn shifted(&self, by: usize) -> Step {
        let sh = |at: &Vec<usize>| at.iter().map(|a| a + by).collect();
        match self {
            Step::Unitary { at, matrix } => Step::Unitary { at: sh(at), matrix: matrix.clone() },
            Step::Kraus { at, ops } => Step::Kraus { at: sh(at), ops: ops.clone() },
            Step::Stochastic { at, matrix } => Step::Stochastic { at: sh(at), matrix: matrix.clone() },
            Step::Discard { at } => Step::Discard { at: sh(at) },
            Step::Permute { offset, perm } => Step::Permute { offset: offset + by, perm: perm.clone() },
        }
    }

    /// Factor dimensions after this step, validating positions and shapes.
    fn output_shape(&self, backend: Backend, dims: &[usize]) -> Result<Vec<usize>, ProcessError> {
        let check_at = |at: &[usize]| -> Result<usize, ProcessError> {
            let mut seen = std::collections::BTreeSet::new();
            for &a in at {
                if a >= dims.len() || !seen.insert(a) {
                    return Err(ProcessError::BadFactorIndex(a));
                }
            }
            Ok(at.iter().map(|&a| dims[a]).product())
        };
        match self {
            Step::Unitary { at, matrix } => {
                if backend != Backend::Quantum {
                    return Err(ProcessError::BackendMismatch);
                }
                let d = check_at(at)?;
                if matrix.len() != d * d {
                    return Err(ProcessError::ShapeMismatch(format!("unitary is not {d}×{d}")));
                }
                Ok(dims.to_vec())
            }
            Step::Kraus { at, ops } => {
                if backend != Backend::Quantum {
                    return Err(ProcessError::BackendMismatch);
                }
                let d = check_at(at)?;
                if ops.is_empty() || ops.iter().any(|k| k.len() != d * d) {
                    return Err(ProcessError::ShapeMismatch(format!("kraus operators are not {d}×{d}")));
                }
                Ok(dims.to_vec())
            }
            Step::Stochastic { at, matrix } => {
                if backend != Backend::Classical {
                    return Err(ProcessError::BackendMismatch);
                }
                let d = check_at(at)?;
                if matrix.len() != d * d {
                    return Err(ProcessError::ShapeMismatch(format!("stochastic matrix is not {d}×{d}")));
                }
                Ok(dims.to_vec())
            }
            Step::Discard { at } => {
                check_at(at)?;
                Ok(dims
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !at.contains(i))
                    .map(|(_, &d)| d)
                    .collect())
            }
            Step::Permute { offset, perm } => {
                if offset + perm.len() > dims.len() {
                    return Err(ProcessError::BadFactorIndex(offset + perm.len()));
                }
                let mut sorted = perm.clone();
                sorted.sort_unstable();
                if sorted != (0..perm.len()).collect::<Vec<_>>() {
                    return Err(ProcessError::ShapeMismatch("not a permutation".into()));
                }
                let mut out = dims.to_vec();
                for (i, &p) in perm.iter().enumerate() {
                    out[offset + i] = dims[offset + p];
                }
                Ok(out)
            }
        }
    }
}

/// A morphism of the field category as a kernel program.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcMorphism {
    dom: ProcObject,
    cod: ProcObject,
    steps: Vec<Step>,
}

fn to_row_major(m: &CMatrix) -> Vec<Complex64> {
    let (r, c) = m.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect()
}

/// ‖U†U − I‖ in max-norm.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    let g = u.adjoint() * u - CMatrix::identity(n, n);
    g.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl ProcMorphism {
    /// Builds a program from raw steps, validating each step's shape.
    pub fn from_steps(dom: ProcObject, steps: Vec<Step>) -> Result<Self, ProcessError> {
        let mut dims = dom.factors.clone();
        for s in &steps {
            dims = s.output_shape(dom.backend, &dims)?;
        }
        Ok(ProcMorphism {
            cod: ProcObject {
                backend: dom.backend,
                factors: dims,
            },
            dom,
            steps,
        })
    }

    pub fn identity(obj: &ProcObject) -> Self {
        ProcMorphism {
            dom: obj.clone(),
            cod: obj.clone(),
            steps: Vec::new(),
        }
    }

    /// ρ ↦ UρU† on the chosen factors.
    pub fn unitary_channel(obj: &ProcObject, at: &[usize], u: &CMatrix) -> Result<Self, ProcessError> {
        let defect = unitarity_defect(u);
        if !(defect <= VALIDITY_TOL) {
            return Err(ProcessError::NotUnitary(defect));
        }
        Self::from_steps(
            obj.clone(),
            vec![Step::Unitary {
                at: at.to_vec(),
                matrix: Arc::new(to_row_major(u)),
            }],
        )
    }

    /// ρ ↦ Σ_k K_k ρ K_k† on the chosen factors. Normalisation is not
    /// required here; see [`ProcMorphism::is_normalised`].
    pub fn kraus_channel(obj: &ProcObject, at: &[usize], ops: &[CMatrix]) -> Result<Self, ProcessError> {
        Self::from_steps(
            obj.clone(),
            vec![Step::Kraus {
                at: at.to_vec(),
                ops: Arc::new(ops.iter().map(to_row_major).collect()),
            }],
        )
    }

    /// A column-stochastic (or sub-stochastic) map on the chosen factors:
    /// `m[(i, j)]` is the probability of output i given input j.
    pub fn stochastic(obj: &ProcObject, at: &[usize], m: &RMatrix) -> Result<Self, ProcessError> {
        if m.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(ProcessError::NotStochastic);
        }
        let (r, c) = m.shape();
        let data = (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect();
        Self::from_steps(
            obj.clone(),
            vec![Step::Stochastic {
                at: at.to_vec(),
                matrix: Arc::new(data),
            }],
        )
    }

    /// Partial trace (quantum) or marginal (classical) over the chosen factors.
    pub fn discard(obj: &ProcObject, which: &[usize]) -> Result<Self, ProcessError> {
        if which.is_empty() {
            return Ok(Self::identity(obj));
        }
        Self::from_steps(obj.clone(), vec![Step::Discard { at: which.to_vec() }])
    }

    /// ⊤: discards every factor.
    pub fn discard_all(obj: &ProcObject) -> Self {
        let all: Vec<usize> = (0..obj.factors.len()).collect();
        Self::discard(obj, &all).expect("all factor indices are valid")
    }

    /// Output factor i is input factor `perm[i]`.
    pub fn permutation(obj: &ProcObject, perm: &[usize]) -> Result<Self, ProcessError> {
        if perm.len() != obj.factors.len() {
            return Err(ProcessError::ShapeMismatch("permutation length".into()));
        }
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(Self::identity(obj));
        }
        Self::from_steps(obj.clone(), vec![Step::Permute { offset: 0, perm: perm.to_vec() }])
    }

    pub fn dom(&self) -> &ProcObject {
        &self.dom
    }

    pub fn cod(&self) -> &ProcObject {
        &self.cod
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn backend(&self) -> Backend {
        self.dom.backend
    }

    /// `self` followed by `next`, i.e. `next ∘ self`.
    pub fn then(&self, next: &ProcMorphism) -> Result<ProcMorphism, ProcessError> {
        if self.cod != next.dom {
            return Err(ProcessError::ShapeMismatch(format!(
                "codomain {:?} does not match domain {:?}",
                self.cod.factors, next.dom.factors
            )));
        }
        let mut steps = self.steps.clone();
        steps.extend(next.steps.iter().cloned());
        Ok(ProcMorphism {
            dom: self.dom.clone(),
            cod: next.cod.clone(),
            steps,
        })
    }

    /// `g ∘ f`.
    pub fn compose(g: &ProcMorphism, f: &ProcMorphism) -> Result<ProcMorphism, ProcessError> {
        f.then(g)
    }

    /// f ⊗ g: f acts on the leading factors, g on the trailing ones.
    pub fn tensor(&self, g: &ProcMorphism) -> Result<ProcMorphism, ProcessError> {
        let dom = self.dom.tensor(&g.dom)?;
        let cod = self.cod.tensor(&g.cod)?;
        let shift = self.cod.factors.len();
        let mut steps = self.steps.clone();
        steps.extend(g.steps.iter().map(|s| s.shifted(shift)));
        Ok(ProcMorphism { dom, cod, steps })
    }

    /// The same program applied to factors `offset..` of a larger object,
    /// leaving the others untouched. The program must not discard.
    pub fn embedded(&self, obj: &ProcObject, offset: usize) -> Result<ProcMorphism, ProcessError> {
        if self.dom != self.cod {
            return Err(ProcessError::ShapeMismatch("only endomorphisms can be embedded".into()));
        }
        let n = self.dom.factors.len();
        if offset + n > obj.factors.len() || obj.factors[offset..offset + n] != self.dom.factors[..] {
            return Err(ProcessError::ShapeMismatch("embedding does not fit".into()));
        }
        if self.steps.iter().any(|s| matches!(s, Step::Discard { .. })) {
            return Err(ProcessError::ShapeMismatch("embedded program discards".into()));
        }
        Self::from_steps(obj.clone(), self.steps.iter().map(|s| s.shifted(offset)).collect())
    }
}
