use num_complex::Complex64;
use rayon::prelude::*;

use super::state::StateData;
use super::tensor::{apply_on_axes, marginal, partial_trace, permute_axes};
use super::{Backend, CMatrix, ProcMorphism, ProcState, ProcessError, Step};
use crate::VALIDITY_TOL;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn conj(m: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|z| z.conj()).collect()
}

/// Full axis permutation that reorders `offset..offset+perm.len()`.
fn full_perm(n: usize, offset: usize, perm: &[usize]) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for (i, &q) in perm.iter().enumerate() {
        p[offset + i] = offset + q;
    }
    p
}

fn doubled(dims: &[usize]) -> Vec<usize> {
    dims.iter().chain(dims).copied().collect()
}

fn shift(at: &[usize], by: usize) -> Vec<usize> {
    at.iter().map(|a| a + by).collect()
}

/// Evaluates a quantum program on a row-major operator (not necessarily positive).
fn run_operator(steps: &[Step], dims: &[usize], rho: Vec<Complex64>) -> Vec<Complex64> {
    let mut dims = dims.to_vec();
    let mut rho = rho;
    for step in steps {
        let n = dims.len();
        let d2 = doubled(&dims);
        match step {
            Step::Unitary { at, matrix } => {
                let left = apply_on_axes(&rho, &d2, at, matrix);
                rho = apply_on_axes(&left, &d2, &shift(at, n), &conj(matrix));
            }
            Step::Kraus { at, ops } => {
                let mut acc = vec![ZERO; rho.len()];
                for k in ops.iter() {
                    let left = apply_on_axes(&rho, &d2, at, k);
                    let both = apply_on_axes(&left, &d2, &shift(at, n), &conj(k));
                    for (a, b) in acc.iter_mut().zip(both) {
                        *a += b;
                    }
                }
                rho = acc;
            }
            Step::Discard { at } => {
                rho = partial_trace(&rho, &dims, at);
                dims = dims
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !at.contains(i))
                    .map(|(_, &d)| d)
                    .collect();
            }
            Step::Permute { offset, perm } => {
                let p = full_perm(n, *offset, perm);
                let p2: Vec<usize> = p.iter().copied().chain(p.iter().map(|x| x + n)).collect();
                rho = permute_axes(&rho, &d2, &p2);
                dims = p.iter().map(|&i| dims[i]).collect();
            }
            Step::Stochastic { .. } => unreachable!("validated at construction"),
        }
    }
    rho
}

fn run_classical(steps: &[Step], dims: &[usize], p: Vec<f64>) -> Vec<f64> {
    let mut dims = dims.to_vec();
    let mut p = p;
    for step in steps {
        match step {
            Step::Stochastic { at, matrix } => p = apply_on_axes(&p, &dims, at, matrix),
            Step::Discard { at } => {
                p = marginal(&p, &dims, at);
                dims = dims
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !at.contains(i))
                    .map(|(_, &d)| d)
                    .collect();
            }
            Step::Permute { offset, perm } => {
                let full = full_perm(dims.len(), *offset, perm);
                p = permute_axes(&p, &dims, &full);
                dims = full.iter().map(|&i| dims[i]).collect();
            }
            Step::Unitary { .. } | Step::Kraus { .. } => unreachable!("validated at construction"),
        }
    }
    p
}

/// Stinespring-style evaluation on a pure input: returns the output as an
/// out×env matrix A, so that the channel maps |ψ⟩⟨ψ′| to A A′†.
fn purify(steps: &[Step], dims: &[usize], psi: Vec<Complex64>) -> (Vec<Complex64>, usize, usize) {
    let mut vis = dims.to_vec();
    let mut env: Vec<usize> = Vec::new();
    let mut v = psi;
    for step in steps {
        let all: Vec<usize> = vis.iter().chain(&env).copied().collect();
        match step {
            Step::Unitary { at, matrix } => v = apply_on_axes(&v, &all, at, matrix),
            Step::Kraus { at, ops } => {
                let k = ops.len();
                if k == 1 {
                    v = apply_on_axes(&v, &all, at, &ops[0]);
                } else {
                    let parts: Vec<Vec<Complex64>> =
                        ops.iter().map(|op| apply_on_axes(&v, &all, at, op)).collect();
                    let mut out = vec![ZERO; v.len() * k];
                    for (j, part) in parts.iter().enumerate() {
                        for (i, z) in part.iter().enumerate() {
                            out[i * k + j] = *z;
                        }
                    }
                    v = out;
                    env.push(k);
                }
            }
            Step::Discard { at } => {
                let kept: Vec<usize> = (0..vis.len()).filter(|i| !at.contains(i)).collect();
                let order: Vec<usize> = kept
                    .iter()
                    .copied()
                    .chain(at.iter().copied())
                    .chain(vis.len()..all.len())
                    .collect();
                v = permute_axes(&v, &all, &order);
                let moved: Vec<usize> = at.iter().map(|&i| vis[i]).collect();
                vis = kept.iter().map(|&i| vis[i]).collect();
                env = moved.into_iter().chain(env).collect();
            }
            Step::Permute { offset, perm } => {
                let p = full_perm(all.len(), *offset, perm);
                v = permute_axes(&v, &all, &p);
                vis = p[..vis.len()].iter().map(|&i| all[i]).collect();
            }
            Step::Stochastic { .. } => unreachable!("validated at construction"),
        }
    }
    let out: usize = vis.iter().product();
    let e: usize = env.iter().product();
    (v, out, e)
}

impl ProcMorphism {
    /// Evaluates the program on a state.
    pub fn apply(&self, state: &ProcState) -> Result<ProcState, ProcessError> {
        if state.object != self.dom {
            return Err(ProcessError::ShapeMismatch(format!(
                "state on {:?} given to morphism from {:?}",
                state.object.factors(),
                self.dom.factors()
            )));
        }
        let data = match &state.data {
            StateData::Density(rho) => {
                StateData::Density(run_operator(&self.steps, self.dom.factors(), rho.clone()))
            }
            StateData::Probabilities(p) => {
                StateData::Probabilities(run_classical(&self.steps, self.dom.factors(), p.clone()))
            }
        };
        Ok(ProcState {
            object: self.cod.clone(),
            data,
        })
    }

    /// Evaluates a quantum program on an arbitrary operator of the domain.
    pub fn apply_to_operator(&self, op: &CMatrix) -> Result<CMatrix, ProcessError> {
        if self.backend() != Backend::Quantum {
            return Err(ProcessError::BackendMismatch);
        }
        let n = self.dom.dim();
        if op.shape() != (n, n) {
            return Err(ProcessError::ShapeMismatch(format!("expected {n}×{n} operator")));
        }
        let flat: Vec<Complex64> = (0..n).flat_map(|i| (0..n).map(move |j| op[(i, j)])).collect();
        let out = run_operator(&self.steps, self.dom.factors(), flat);
        let m = self.cod.dim();
        Ok(CMatrix::from_row_slice(m, m, &out))
    }

    /// Images of the basis vectors: purified matrices (quantum) or columns (classical).
    fn basis_images(&self) -> Vec<CMatrix> {
        let n = self.dom.dim();
        (0..n)
            .into_par_iter()
            .map(|i| match self.backend() {
                Backend::Quantum => {
                    let mut e = vec![ZERO; n];
                    e[i] = ONE;
                    let (v, out, env) = purify(&self.steps, self.dom.factors(), e);
                    CMatrix::from_row_slice(out, env, &v)
                }
                Backend::Classical => {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    let p = run_classical(&self.steps, self.dom.factors(), e);
                    CMatrix::from_iterator(p.len(), 1, p.into_iter().map(|x| Complex64::new(x, 0.0)))
                }
            })
            .collect()
    }

    /// Max-norm distance between the two maps, swept over a basis of inputs:
    /// all |i⟩⟨j| (quantum) or all point distributions (classical).
    pub fn deviation(&self, other: &ProcMorphism) -> Result<f64, ProcessError> {
        if self.dom != other.dom || self.cod != other.cod {
            return Err(ProcessError::ShapeMismatch("morphisms have different types".into()));
        }
        if self.steps == other.steps {
            return Ok(0.0);
        }
        let a = self.basis_images();
        let b = other.basis_images();
        let max_abs = |m: &CMatrix| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok(match self.backend() {
            Backend::Classical => a
                .iter()
                .zip(&b)
                .map(|(x, y)| max_abs(&(x - y)))
                .fold(0.0, f64::max),
            Backend::Quantum => (0..a.len())
                .into_par_iter()
                .map(|i| {
                    (i..a.len())
                        .map(|j| {
                            let fa = &a[i] * a[j].adjoint();
                            let fb = &b[i] * b[j].adjoint();
                            max_abs(&(fa - fb))
                        })
                        .fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max),
        })
    }

    /// Basis-sweep equality within `tol`.
    pub fn equals(&self, other: &ProcMorphism, tol: f64) -> Result<bool, ProcessError> {
        Ok(self.deviation(other)? <= tol)
    }

    /// Largest deviation of ⊤∘f from ⊤ over the input basis.
    pub fn normalisation_defect(&self) -> f64 {
        let imgs = self.basis_images();
        match self.backend() {
            Backend::Classical => imgs
                .iter()
                .map(|c| (c.iter().map(|z| z.re).sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max),
            Backend::Quantum => {
                let mut worst: f64 = 0.0;
                for i in 0..imgs.len() {
                    for j in i..imgs.len() {
                        let tr: Complex64 = imgs[i]
                            .iter()
                            .zip(imgs[j].iter())
                            .map(|(x, y)| x * y.conj())
                            .sum();
                        let want = if i == j { ONE } else { ZERO };
                        worst = worst.max((tr - want).norm());
                    }
                }
                worst
            }
        }
    }

    /// ⊤_cod ∘ f = ⊤_dom within the validity tolerance.
    pub fn is_normalised(&self) -> bool {
        self.normalisation_defect() <= VALIDITY_TOL
    }
}

/// J = Σ_ij |i⟩⟨j| ⊗ f(|i⟩⟨j|).
pub fn choi_matrix(f: &ProcMorphism) -> Result<CMatrix, ProcessError> {
    let n = f.dom().dim();
    let m = f.cod().dim();
    let mut j = CMatrix::zeros(n * m, n * m);
    for a in 0..n {
        for b in 0..n {
            let mut e = CMatrix::zeros(n, n);
            e[(a, b)] = ONE;
            let img = f.apply_to_operator(&e)?;
            j.view_mut((a * m, b * m), (m, m)).copy_from(&img);
        }
    }
    Ok(j)
}

/// Choi positivity, for cross-validation on small systems (total dimension ≤ 8).
pub fn is_completely_positive(f: &ProcMorphism, tol: f64) -> Result<bool, ProcessError> {
    if f.dom().dim() * f.cod().dim() > 64 {
        return Err(ProcessError::ShapeMismatch("Choi check limited to total dimension 8".into()));
    }
    let j = choi_matrix(f)?;
    let h = (&j + j.adjoint()).scale(0.5);
    Ok(h.symmetric_eigenvalues().iter().all(|&l| l >= -tol))
}
