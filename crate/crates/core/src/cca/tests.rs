use std::collections::BTreeSet;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::field_theory::{
    check_environment, check_functoriality, check_monoidality, check_reversal, composable_triples,
    global_state_from_cauchy, is_stable_family, leads_to_pairs, push_forward, sample_zigzag_pairs,
    separated_pairs, separated_quadruples,
};
use crate::order::{future_domain, EventId, FiniteOrder};
use crate::process::{CMatrix, ProcState};
use crate::slices::{AllSlices, CategoryRegion};
use crate::{ORACLE_TOL, VALIDITY_TOL};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn line() -> DiamondLattice {
    DiamondLattice::new(1).unwrap()
}

fn sl(t: i64, xs: &[i64]) -> LatticeSlice {
    let xs: Vec<Vec<i64>> = xs.iter().map(|&x| vec![x]).collect();
    lattice_slice(&line(), t, &xs).unwrap()
}

fn ring_slice(l: &DiamondLattice, t: i64, xs: &[i64]) -> LatticeSlice {
    let xs: Vec<Vec<i64>> = xs.iter().map(|&x| vec![x]).collect();
    lattice_slice(l, t, &xs).unwrap()
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    m.qr().q()
}

fn random_density(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Reduced density matrix of `n` qubits on the listed qubits, in the listed
/// order (qubit 0 most significant).
fn reduce(rho: &CMatrix, n: usize, keep: &[usize]) -> CMatrix {
    let env: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let compose = |kept_bits: usize, env_bits: usize| -> usize {
        let mut idx = 0;
        for (i, &q) in keep.iter().enumerate() {
            let bit = (kept_bits >> (keep.len() - 1 - i)) & 1;
            idx |= bit << (n - 1 - q);
        }
        for (i, &q) in env.iter().enumerate() {
            let bit = (env_bits >> (env.len() - 1 - i)) & 1;
            idx |= bit << (n - 1 - q);
        }
        idx
    };
    let k = 1 << keep.len();
    CMatrix::from_fn(k, k, |i, j| (0..1usize << env.len()).map(|e| rho[(compose(i, e), compose(j, e))]).sum())
}

fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn qubit_cca(u: &CMatrix) -> Cca {
    let local = ProcObject::uniform(Backend::Quantum, 2, 2).unwrap();
    let scattering = ProcMorphism::unitary_channel(&local, &[0, 1], u).unwrap();
    build_cca(
        line(),
        CcaConfig {
            d: 1,
            cell_dim: 2,
            scattering,
            inverse: None,
        },
    )
    .unwrap()
}

fn seeded_cca(seed: u64) -> Cca {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    qubit_cca(&random_unitary(4, &mut rng))
}

#[test]
fn lattice_slice_leq_examples() {
    let l = line();
    assert!(lattice_slice_leq(&l, &sl(0, &[0, 2]), &sl(1, &[1])).unwrap());
    assert!(!lattice_slice_leq(&l, &sl(0, &[0]), &sl(1, &[1])).unwrap());
    assert!(lattice_slice_leq(&l, &sl(0, &[0, 2, 4]), &sl(0, &[2, 4])).unwrap());
    assert!(!lattice_slice_leq(&l, &sl(0, &[0, 2]), &sl(0, &[4])).unwrap());
    assert!(lattice_slice_leq(&l, &sl(0, &[-2, 0, 2]), &sl(2, &[0])).unwrap());
    assert!(!lattice_slice_leq(&l, &sl(0, &[-2, 0]), &sl(2, &[0])).unwrap());
    assert!(lattice_slice_leq(&l, &sl(3, &[1]), &Slice::empty()).unwrap());
    assert!(!lattice_slice_leq(&l, &Slice::empty(), &sl(3, &[1])).unwrap());
    assert_eq!(
        lattice_slice_leq(&l, &sl(1, &[1]), &sl(0, &[0, 2])),
        Err(CcaError::NegativeTimeGap(-1))
    );
    let mixed = Slice::from_set_unchecked(BTreeSet::from([LatticePoint::new(0, &[0]), LatticePoint::new(1, &[1])]));
    assert!(matches!(lattice_slice_leq(&l, &mixed, &sl(2, &[0])), Err(CcaError::NotALatticeSlice(_))));
}

#[test]
fn reversed_category_runs_backwards() {
    let c = CcaCategory::new(line()).reversed();
    assert!(c.leads_to(&sl(1, &[-1, 1]), &sl(0, &[0])));
    assert!(!c.leads_to(&sl(0, &[-2, 0, 2]), &sl(1, &[1])));
    assert_eq!(
        lattice_slice_leq(c.lattice(), &sl(0, &[0]), &sl(1, &[-1, 1])),
        Err(CcaError::NegativeTimeGap(-1))
    );
}

#[test]
fn category_membership_and_products() {
    let c = CcaCategory::new(line());
    assert!(c.contains(&sl(2, &[0, 4])));
    assert!(c.contains(&Slice::empty()));
    let mixed = Slice::from_set_unchecked(BTreeSet::from([LatticePoint::new(0, &[0]), LatticePoint::new(1, &[3])]));
    assert!(!c.contains(&mixed));
    assert!(c.product_defined(&sl(0, &[0]), &sl(0, &[2])));
    assert!(!c.product_defined(&sl(0, &[0]), &sl(0, &[0, 2])));
    assert!(!c.product_defined(&sl(0, &[0]), &sl(1, &[5])));
    assert!(c.product_defined(&sl(0, &[0]), &Slice::empty()));
    let w = Window::cube((0, 1), (-2, 2), 1);
    let objs = c.objects_in(&w, 2);
    // ∅, t=0: {-2,0,2} -> 3 + 3, t=1: {-1,1} -> 2 + 1
    assert_eq!(objs.len(), 1 + 6 + 3);
    let witness = c.covering_witness(&LatticePoint::new(0, &[0]), &LatticePoint::new(2, &[2])).unwrap();
    assert_eq!(witness, (sl(0, &[0, 2, 4]), sl(2, &[2])));
    assert!(c.leads_to(&witness.0, &witness.1));
    assert!(c.covering_witness(&LatticePoint::new(0, &[0]), &LatticePoint::new(1, &[3])).is_none());
}

#[test]
fn cca_category_is_a_category_of_slices() {
    let c = CcaCategory::new(line());
    let w = Window::cube((0, 2), (-3, 3), 1);
    let objs = c.objects_in(&w, 4);
    let report = crate::slices::validate_slice_category(&c, &objs, &crate::slices::ValidationOptions::default());
    assert!(report.passed(), "{:?}", report.violations.first());
}

#[test]
fn factorization_examples() {
    let c = CcaCategory::new(line());
    let f = factorize_morphism(&c, &sl(0, &[0, 2]), &sl(0, &[2])).unwrap();
    assert_eq!(
        f,
        vec![Elementary::Restrict {
            from: sl(0, &[0, 2]),
            to: sl(0, &[2])
        }]
    );
    let f = factorize_morphism(&c, &sl(0, &[0, 2]), &sl(1, &[1])).unwrap();
    assert_eq!(
        f,
        vec![
            Elementary::Restrict {
                from: sl(0, &[0, 2]),
                to: sl(0, &[0, 2])
            },
            Elementary::Step {
                from: sl(0, &[0, 2]),
                to: sl(1, &[1])
            },
        ]
    );
    let f = factorize_morphism(&c, &sl(0, &[-2, 0, 2, 4]), &sl(1, &[1])).unwrap();
    assert_eq!(
        f[0],
        Elementary::Restrict {
            from: sl(0, &[-2, 0, 2, 4]),
            to: sl(0, &[0, 2])
        }
    );
    let f = factorize_morphism(&c, &sl(0, &[-2, 0, 2, 4]), &sl(2, &[0, 2])).unwrap();
    assert_eq!(f.len(), 3);
    assert_eq!(
        f[1],
        Elementary::Step {
            from: sl(0, &[-2, 0, 2, 4]),
            to: sl(1, &[-1, 1, 3])
        }
    );
    let f = factorize_morphism(&c, &sl(0, &[0, 2]), &Slice::empty()).unwrap();
    assert_eq!(f.len(), 1);
    assert!(matches!(
        factorize_morphism(&c, &sl(0, &[0]), &sl(1, &[1])),
        Err(CcaError::InvalidMorphism(_))
    ));
}

#[test]
fn restriction_kernel_examples() {
    let cca = seeded_cca(1);
    let x = sl(0, &[0, 2]);
    let id = cca.restriction_kernel(&x, &x).unwrap();
    assert_eq!(id, ProcMorphism::identity(&cca.object(&x).unwrap()));
    let top = cca.restriction_kernel(&x, &Slice::empty()).unwrap();
    assert_eq!(top.deviation(&ProcMorphism::discard_all(&cca.object(&x).unwrap())).unwrap(), 0.0);
    assert_eq!(cca.restriction_kernel(&x, &sl(0, &[4])), Err(CcaError::NotSubset));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rho = random_density(16, &mut rng);
    let r = cca.restriction_kernel(&x, &sl(0, &[0])).unwrap();
    let out = r
        .apply(&ProcState::density(cca.object(&x).unwrap(), &rho).unwrap())
        .unwrap()
        .density_matrix()
        .unwrap();
    assert!(max_diff(&out, &reduce(&rho, 4, &[0, 1])) < ORACLE_TOL);
}

#[test]
fn one_step_routing_with_identity_scattering() {
    let cca = qubit_cca(&CMatrix::identity(4, 4));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let singles: Vec<CMatrix> = (0..4).map(|_| random_density(2, &mut rng)).collect();
    let rho = singles[0].kronecker(&singles[1]).kronecker(&singles[2]).kronecker(&singles[3]);
    let y = sl(0, &[0, 2]);
    let k = cca.one_step_kernel(&y, &sl(1, &[1])).unwrap();
    let out = k
        .apply(&ProcState::density(cca.object(&y).unwrap(), &rho).unwrap())
        .unwrap()
        .density_matrix()
        .unwrap();
    // (δ=−1, y=0) and (δ=+1, y=2) are kept, in that order.
    assert!(max_diff(&out, &singles[0].kronecker(&singles[3])) < ORACLE_TOL);
}

#[test]
fn one_step_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = random_unitary(4, &mut rng);
    let cca = qubit_cca(&u);
    let y = sl(0, &[0, 2, 4]);
    let x = sl(1, &[1, 3]);
    let rho = random_density(64, &mut rng);
    let uu = u.kronecker(&u).kronecker(&u);
    let evolved = &uu * &rho * uu.adjoint();
    // x=1 receives (−,0)=q0 and (+,2)=q3; x=3 receives (−,2)=q2 and (+,4)=q5.
    let want = reduce(&evolved, 6, &[0, 3, 2, 5]);
    let got = cca
        .one_step_kernel(&y, &x)
        .unwrap()
        .apply(&ProcState::density(cca.object(&y).unwrap(), &rho).unwrap())
        .unwrap()
        .density_matrix()
        .unwrap();
    assert!(max_diff(&got, &want) < ORACLE_TOL);
}

#[test]
fn one_step_preconditions_and_normalisation() {
    let cca = seeded_cca(5);
    assert_eq!(
        cca.one_step_kernel(&sl(0, &[0, 2, 4]), &sl(1, &[1])),
        Err(CcaError::WrongPredecessorSet)
    );
    assert_eq!(
        cca.one_step_kernel(&sl(0, &[0, 2]), &sl(2, &[2])),
        Err(CcaError::WrongPredecessorSet)
    );
    let y = sl(0, &[0, 2]);
    let k = cca.one_step_kernel(&y, &sl(1, &[1])).unwrap();
    let lhs = k.then(&ProcMorphism::discard_all(k.cod())).unwrap();
    let rhs = ProcMorphism::discard_all(&cca.object(&y).unwrap());
    assert!(lhs.deviation(&rhs).unwrap() <= VALIDITY_TOL);
}

#[test]
fn object_assignment() {
    let cca = seeded_cca(2);
    assert!(cca.object(&Slice::empty()).unwrap().is_unit());
    assert_eq!(cca.object(&sl(0, &[0, 2])).unwrap().dim(), 16);
    let s = sl(0, &[0, 2]);
    let top = cca.morphism(&s, &Slice::empty()).unwrap();
    assert_eq!(top.deviation(&ProcMorphism::discard_all(&cca.object(&s).unwrap())).unwrap(), 0.0);
    assert_eq!(cca.morphism(&sl(0, &[0]), &sl(1, &[1])), Err(FieldError::NotLeadsTo));
}

#[test]
fn build_rejects_bad_configs() {
    let local = ProcObject::uniform(Backend::Quantum, 2, 2).unwrap();
    let scaled = ProcMorphism::kraus_channel(&local, &[0, 1], &[CMatrix::identity(4, 4) * c(0.5, 0.0)]).unwrap();
    let cfg = CcaConfig {
        d: 1,
        cell_dim: 2,
        scattering: scaled,
        inverse: None,
    };
    assert!(matches!(build_cca(line(), cfg), Err(CcaError::BadConfig(_))));
    let wrong = ProcMorphism::identity(&ProcObject::uniform(Backend::Quantum, 2, 3).unwrap());
    let cfg = CcaConfig {
        d: 1,
        cell_dim: 2,
        scattering: wrong,
        inverse: None,
    };
    assert!(build_cca(line(), cfg).is_err());
    let id = ProcMorphism::identity(&local);
    let x = ProcMorphism::unitary_channel(&local, &[0], &swap_gate().view((1, 1), (2, 2)).into_owned()).unwrap();
    let cfg = CcaConfig {
        d: 1,
        cell_dim: 2,
        scattering: id.clone(),
        inverse: Some(x),
    };
    assert!(matches!(build_cca(line(), cfg), Err(CcaError::NotInvertible(_))));
    let cfg = CcaConfig {
        d: 2,
        cell_dim: 2,
        scattering: id,
        inverse: None,
    };
    assert!(build_cca(line(), cfg).is_err());
}

#[test]
fn functoriality_example_and_window() {
    let cca = seeded_cca(4);
    let direct = cca.morphism(&sl(0, &[0, 2]), &Slice::empty()).unwrap();
    let via = cca
        .morphism(&sl(0, &[0, 2]), &sl(1, &[1]))
        .unwrap()
        .then(&cca.morphism(&sl(1, &[1]), &Slice::empty()).unwrap())
        .unwrap();
    assert!(via.deviation(&direct).unwrap() <= VALIDITY_TOL);

    let objs = cca.category().objects_in(&Window::cube((0, 2), (-2, 2), 1), 3);
    let triples = composable_triples(cca.category(), &objs);
    let report = check_functoriality(&cca, &triples, VALIDITY_TOL);
    assert!(report.passed(), "{:?}", report.violations.first());
    assert!(report.samples > 50);
}

#[test]
fn monoidality_and_environment() {
    let cca = seeded_cca(8);
    let objs = cca.category().objects_in(&Window::cube((0, 2), (-3, 3), 1), 2);
    let quads = separated_quadruples(cca.category(), &objs, 40, 1);
    assert_eq!(quads.len(), 40);
    let report = check_monoidality(&cca, &quads, VALIDITY_TOL);
    assert!(report.passed(), "{:?}", report.violations.first());

    let pairs = leads_to_pairs(cca.category(), &objs);
    let sep = separated_pairs(cca.category(), &objs, 40, 2);
    let report = check_environment(&cca, &pairs, &sep, VALIDITY_TOL);
    assert!(report.passed(), "{:?}", report.violations.first());
}

#[test]
fn tensor_iso_permutes_event_blocks() {
    let cca = seeded_cca(9);
    let (a, b) = (sl(0, &[2]), sl(0, &[0]));
    let iso = cca.tensor_iso(&a, &b).unwrap();
    assert_eq!(iso.dom().dim(), 16);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (ra, rb) = (random_density(4, &mut rng), random_density(4, &mut rng));
    let input = ProcState::density(iso.dom().clone(), &ra.kronecker(&rb)).unwrap();
    let out = iso.apply(&input).unwrap().density_matrix().unwrap();
    assert!(max_diff(&out, &rb.kronecker(&ra)) < ORACLE_TOL);
    assert_eq!(
        cca.tensor_iso(&b, &a).unwrap(),
        ProcMorphism::identity(&cca.object(&sl(0, &[0, 2])).unwrap())
    );
    assert!(cca.tensor_iso(&a, &a).is_err());
}

#[test]
fn reversal_of_unitary_automaton() {
    let cca = seeded_cca(12);
    let rev = build_reversal(&cca).unwrap();
    let sigma = sl(0, &[-2, 0, 2, 4]);
    let delta = sl(1, &[-1, 1, 3]);
    let back = sl(0, &[0, 2]);
    assert!(rev.category().leads_to(&delta, &back));
    let round = cca
        .morphism(&sigma, &delta)
        .unwrap()
        .then(&rev.morphism(&delta, &back).unwrap())
        .unwrap();
    let direct = cca.morphism(&sigma, &back).unwrap();
    assert!(round.deviation(&direct).unwrap() <= VALIDITY_TOL);

    let objs = cca.category().objects_in(&Window::cube((0, 3), (-3, 3), 1), 3);
    let pairs = sample_zigzag_pairs(cca.category(), rev.category(), &objs, 30, 2, 5);
    assert_eq!(pairs.len(), 30);
    assert!(pairs.iter().any(|(a, b)| a.len() > 2 || b.len() > 2));
    let report = check_reversal(&cca, &rev, &pairs, VALIDITY_TOL);
    assert!(report.passed(), "{:?}", report.violations.first());
}

#[test]
fn lossy_scattering_has_no_reversal() {
    let local = ProcObject::uniform(Backend::Quantum, 2, 2).unwrap();
    let gamma: f64 = 0.3;
    let k0 = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c((1.0 - gamma).sqrt(), 0.)]);
    let k1 = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(gamma.sqrt(), 0.), c(0., 0.), c(0., 0.)]);
    let damp = ProcMorphism::kraus_channel(&local, &[0], &[k0, k1]).unwrap();
    let cca = build_cca(
        line(),
        CcaConfig {
            d: 1,
            cell_dim: 2,
            scattering: damp,
            inverse: None,
        },
    )
    .unwrap();
    assert!(matches!(build_reversal(&cca), Err(CcaError::NotInvertible(_))));

    let fake = CcaReversal::with_candidate_inverse(&cca, Scattering::Homogeneous(ProcMorphism::identity(&local)));
    let there_and_back = vec![sl(0, &[-2, 0, 2]), sl(1, &[-1, 1]), sl(0, &[0]), sl(0, &[0])];
    let direct = vec![sl(0, &[-2, 0, 2]), sl(0, &[0])];
    let report = check_reversal(&cca, &fake, &[(there_and_back, direct)], VALIDITY_TOL);
    assert!(!report.passed());
    assert!(report.max_deviation() > 1e-3);
}

#[test]
fn invert_program_cases() {
    let local = ProcObject::uniform(Backend::Quantum, 2, 2).unwrap();
    let swap = ProcMorphism::unitary_channel(&local, &[0, 1], &swap_gate()).unwrap();
    let inv = invert_program(&swap).unwrap();
    match &inv.steps()[0] {
        Step::Unitary { matrix, .. } => {
            let m = CMatrix::from_row_slice(4, 4, matrix);
            assert!(max_diff(&m, &swap_gate()) == 0.0);
        }
        other => panic!("unexpected step {other:?}"),
    }
    let perm = ProcMorphism::permutation(&ProcObject::new(Backend::Quantum, vec![2, 3, 4]).unwrap(), &[2, 0, 1])
        .unwrap();
    let pinv = invert_program(&perm).unwrap();
    assert_eq!(perm.then(&pinv).unwrap().deviation(&ProcMorphism::identity(perm.dom())).unwrap(), 0.0);
    let cl = ProcObject::uniform(Backend::Classical, 2, 1).unwrap();
    let flip = ProcMorphism::stochastic(&cl, &[0], &crate::process::RMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.]))
        .unwrap();
    assert!(invert_program(&flip).is_ok());
    let mix = ProcMorphism::stochastic(&cl, &[0], &crate::process::RMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]))
        .unwrap();
    assert!(matches!(invert_program(&mix), Err(CcaError::NotInvertible(_))));
    assert!(matches!(
        invert_program(&ProcMorphism::discard_all(&local)),
        Err(CcaError::NotInvertible(_))
    ));
}

#[test]
fn classical_automaton_is_functorial() {
    let local = ProcObject::uniform(Backend::Classical, 2, 2).unwrap();
    // a noisy swap of the two incoming bits
    let mut m = crate::process::RMatrix::zeros(4, 4);
    for j in 0..4 {
        let swapped = ((j & 1) << 1) | (j >> 1);
        m[(swapped, j)] += 0.75;
        m[(j, j)] += 0.25;
    }
    let scattering = ProcMorphism::stochastic(&local, &[0, 1], &m).unwrap();
    let cca = build_cca(
        line(),
        CcaConfig {
            d: 1,
            cell_dim: 2,
            scattering,
            inverse: None,
        },
    )
    .unwrap();
    let objs = cca.category().objects_in(&Window::cube((0, 2), (-2, 2), 1), 3);
    let triples = composable_triples(cca.category(), &objs);
    assert!(check_functoriality(&cca, &triples, VALIDITY_TOL).passed());
    assert!(matches!(build_reversal(&cca), Err(CcaError::NotInvertible(_))));
}

fn point_mass(object: ProcObject, index: usize) -> ProcState {
    let mut p = vec![0.0; object.dim()];
    p[index] = 1.0;
    ProcState::probabilities(object, p).unwrap()
}

fn support(state: &ProcState) -> usize {
    let p = state.probability_vector().unwrap();
    let i = p.iter().position(|&v| v > 0.5).unwrap();
    assert!((p[i] - 1.0).abs() < ORACLE_TOL);
    i
}

/// Bit of factor `f` (of `n`) in a configuration index, factor 0 most significant.
fn bit(config: usize, n: usize, f: usize) -> usize {
    (config >> (n - 1 - f)) & 1
}

#[test]
fn two_dimensional_routing_of_a_reversible_rule() {
    let l = DiamondLattice::new(2).unwrap();
    let local = ProcObject::uniform(Backend::Classical, 2, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut perm: Vec<usize> = (0..16).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
    let mut m = crate::process::RMatrix::zeros(16, 16);
    for (j, &i) in perm.iter().enumerate() {
        m[(i, j)] = 1.0;
    }
    let rule = ProcMorphism::stochastic(&local, &[0, 1, 2, 3], &m).unwrap();
    let cca = build_cca(
        l.clone(),
        CcaConfig {
            d: 2,
            cell_dim: 2,
            scattering: rule,
            inverse: None,
        },
    )
    .unwrap();
    let dirs = [[-1, -1], [-1, 1], [1, -1], [1, 1]];

    // forward: x = (1,1) takes factor δ from U applied at y = x + δ
    let preds = lattice_slice(&l, 0, &[vec![0, 0], vec![0, 2], vec![2, 0], vec![2, 2]]).unwrap();
    let target = lattice_slice(&l, 1, &[vec![1, 1]]).unwrap();
    let k = cca.one_step_kernel(&preds, &target).unwrap();
    assert_eq!(k.dom().factors().len(), 16);
    let block: Vec<Vec<i64>> = preds.iter().map(|p| p.x.to_vec()).collect();
    for _ in 0..20 {
        let config: usize = rng.gen_range(0..1 << 16);
        let out = support(&k.apply(&point_mass(k.dom().clone(), config)).unwrap());
        for (f, d) in dirs.iter().enumerate() {
            let y = vec![1 + d[0], 1 + d[1]];
            let b = block.iter().position(|x| *x == y).unwrap();
            let local_in = (config >> (4 * (3 - b))) & 15;
            assert_eq!(bit(out, 4, f), bit(perm[local_in], 4, f));
        }
    }

    // backward: (0,0) collects factor δ from w = −δ, then applies U⁻¹
    let rev = build_reversal(&cca).unwrap();
    let wide = lattice_slice(&l, 1, &[vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]).unwrap();
    let centre = lattice_slice(&l, 0, &[vec![0, 0]]).unwrap();
    let back = rev.morphism(&wide, &centre).unwrap();
    let wblock: Vec<Vec<i64>> = wide.iter().map(|p| p.x.to_vec()).collect();
    for _ in 0..20 {
        let config: usize = rng.gen_range(0..1 << 16);
        let out = support(&back.apply(&point_mass(back.dom().clone(), config)).unwrap());
        let scattered = perm[out];
        for (f, d) in dirs.iter().enumerate() {
            let w = vec![-d[0], -d[1]];
            let b = wblock.iter().position(|x| *x == w).unwrap();
            assert_eq!(bit(scattered, 4, f), bit(config, 16, 4 * b + f));
        }
    }
}

#[test]
fn dirac_scattering_matrix() {
    let (m, eps) = (0.7, 0.3);
    let u = dirac_scattering(m, eps);
    let (s, co) = (m * eps).sin_cos();
    assert_eq!(u[(0, 0)], c(1., 0.));
    assert_eq!(u[(3, 3)], c(1., 0.));
    assert!((u[(1, 1)] - c(0., -s)).norm() < ORACLE_TOL);
    assert!((u[(1, 2)] - c(co, 0.)).norm() < ORACLE_TOL);
    assert!((u[(2, 1)] - c(co, 0.)).norm() < ORACLE_TOL);
    assert!((u[(2, 2)] - c(0., -s)).norm() < ORACLE_TOL);
    assert_eq!(u[(0, 1)], c(0., 0.));
    // middle block = σ_X exp(−imε σ_X), from the σ_X eigenbasis
    let sx = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
    let plus = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0.5, 0.), c(0.5, 0.), c(0.5, 0.)]);
    let minus = CMatrix::identity(2, 2) - &plus;
    let phase = c(0., -m * eps).exp();
    let expm = plus * phase + minus * phase.conj();
    let block = &sx * expm;
    assert!(max_diff(&u.view((1, 1), (2, 2)).into_owned(), &block) < ORACLE_TOL);
    for (m, eps) in [(0.0, 0.1), (1.0, 0.05), (3.0, 0.9), (-2.0, 1.7)] {
        let u = dirac_scattering(m, eps);
        assert!(max_diff(&(u.adjoint() * &u), &CMatrix::identity(4, 4)) < ORACLE_TOL);
    }
    assert_eq!(dirac_scattering(0.0, 0.4), swap_gate());
}

#[test]
fn massless_dirac_automaton_is_pure_transport() {
    let l = DiamondLattice::periodic(1, 4).unwrap();
    let cca = dirac_cca(l.clone(), 0.0, 0.1).unwrap();
    match cca.scattering() {
        Scattering::Homogeneous(u) => {
            assert_eq!(u.deviation(&ProcMorphism::identity(&cca.local_object())).unwrap(), 0.0)
        }
        _ => panic!("homogeneous"),
    }
    let rev = build_reversal(&cca).unwrap();
    let leaf0 = ring_slice(&l, 0, &[0, 2]);
    let leaf1 = ring_slice(&l, 1, &[1, 3]);
    let fwd = cca.morphism(&leaf0, &leaf1).unwrap();
    let bwd = rev.morphism(&leaf1, &leaf0).unwrap();
    let round = fwd.then(&bwd).unwrap();
    assert!(round.deviation(&ProcMorphism::identity(fwd.dom())).unwrap() <= VALIDITY_TOL);
}

/// Single excitation in factor `index` of `n` qubits, as an amplitude vector.
fn one_hot(n: usize, index: usize, amp: Complex64, psi: &mut [Complex64]) {
    psi[1 << (n - 1 - index)] += amp;
}

#[test]
fn fast_path_matches_full_automaton() {
    let period = 6usize;
    let l = DiamondLattice::periodic(1, period as i64).unwrap();
    let (m, eps) = (1.3, 0.4);
    let cca = dirac_cca(l.clone(), m, eps).unwrap();
    let amps: Vec<(Complex64, Complex64)> = vec![(c(0.3, 0.1), c(-0.2, 0.4)), (c(0.5, 0.0), c(0.1, -0.3)), (c(0.0, 0.2), c(0.45, 0.3))];
    let norm: f64 = amps.iter().map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum::<f64>().sqrt();
    let amps: Vec<(Complex64, Complex64)> = amps.iter().map(|(a, b)| (a / norm, b / norm)).collect();
    let mut walk = DiracWalk::new(period, m, eps, |x| amps[(x / 2) as usize]).unwrap();

    let leaf = |t: i64| CcaCategory::new(l.clone()).layer_slice(t, &Window::new((t, t), vec![]));
    let n = 2 * period / 2;
    let mut psi = vec![c(0., 0.); 1 << n];
    for (i, (a, b)) in amps.iter().enumerate() {
        // factors of site i: (δ=−1 → right mover, δ=+1 → left mover)
        one_hot(n, 2 * i, *b, &mut psi);
        one_hot(n, 2 * i + 1, *a, &mut psi);
    }
    let mut state = ProcState::pure(cca.object(&leaf(0)).unwrap(), &psi).unwrap();
    for t in 0..5 {
        state = cca.morphism(&leaf(t), &leaf(t + 1)).unwrap().apply(&state).unwrap();
        walk.step();
        let rho = state.density_matrix().unwrap();
        let next = leaf(t + 1);
        for (i, p) in next.iter().enumerate() {
            let x = p.x[0] as usize;
            let occ_right = reduce(&rho, n, &[2 * i])[(1, 1)].re;
            let occ_left = reduce(&rho, n, &[2 * i + 1])[(1, 1)].re;
            assert!((occ_left - walk.left()[x].norm_sqr()).abs() < ORACLE_TOL);
            assert!((occ_right - walk.right()[x].norm_sqr()).abs() < ORACLE_TOL);
        }
    }
}

#[test]
fn dirac_walk_conserves_norm_and_transports_when_massless() {
    let mut walk = DiracWalk::new(32, 0.8, 0.05, |x| (c((x as f64 * 0.3).cos(), 0.0), c(0.0, (x as f64).sin()))).unwrap();
    let n0 = walk.norm();
    walk.run(50);
    assert!((walk.norm() - n0).abs() < 1e-12 * n0.max(1.0));
    assert_eq!(walk.time(), 50);

    let mut left = DiracWalk::new(16, 0.0, 0.1, |x| (c(if x == 4 { 1.0 } else { 0.0 }, 0.0), c(0.0, 0.0))).unwrap();
    let d0 = left.density();
    left.run(3);
    let d3 = left.density();
    for x in 0..16 {
        assert_eq!(d3[(x + 16 - 3) % 16], d0[x]);
    }
    assert!(DiracWalk::new(5, 0.0, 0.1, |_| (c(0., 0.), c(0., 0.))).is_err());
    assert!(dirac_cca(line(), 1.0, 0.0).is_err());
}

#[test]
fn global_state_from_middle_leaf_agrees() {
    let l = DiamondLattice::periodic(1, 4).unwrap();
    let cca = dirac_cca(l.clone(), 0.9, 0.35).unwrap();
    let rev = build_reversal(&cca).unwrap();
    let cat = CcaCategory::new(l.clone());
    let leaves: Vec<LatticeSlice> = (0..4).map(|t| cat.layer_slice(t, &Window::new((t, t), vec![]))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let rho0 = ProcState::density(cca.object(&leaves[0]).unwrap(), &random_density(16, &mut rng)).unwrap();
    let from_start = global_state_from_cauchy(&cca, &rev, &leaves, &leaves[0], &rho0).unwrap();
    for (i, leaf) in leaves.iter().enumerate() {
        let direct = cca.morphism(&leaves[0], leaf).unwrap().apply(&rho0).unwrap();
        assert!(direct.distance(&from_start.states[i]).unwrap() < VALIDITY_TOL);
    }
    let mid = from_start.states[2].clone();
    let from_mid = global_state_from_cauchy(&cca, &rev, &leaves, &leaves[2], &mid).unwrap();
    for i in 0..4 {
        assert!(from_mid.states[i].distance(&from_start.states[i]).unwrap() < VALIDITY_TOL);
    }
    // round trip: evolving a recovered backward leaf forward gives the data back
    let back = &from_mid.states[0];
    let again = cca.morphism(&leaves[0], &leaves[2]).unwrap().apply(back).unwrap();
    assert!(again.distance(&mid).unwrap() < VALIDITY_TOL);

    let sub = ring_slice(&l, 3, &[1]);
    let on_sub = from_mid.state_on(&cca, &sub).unwrap();
    assert_eq!(on_sub.object().dim(), 4);
    assert!(matches!(
        global_state_from_cauchy(&cca, &rev, &leaves, &sub, &on_sub),
        Err(FieldError::NotCauchy)
    ));
}

#[test]
fn push_forward_family_is_stable() {
    let cca = seeded_cca(40);
    let sigma = sl(0, &[-2, 0, 2, 4]);
    let gamma = sl(2, &[2]);
    let region = CategoryRegion::new(cca.category(), vec![(sigma.clone(), gamma)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let rho = ProcState::density(cca.object(&sigma).unwrap(), &random_density(256, &mut rng)).unwrap();
    let family = push_forward(&cca, &region, &sigma, &rho).unwrap();
    assert!(family.states.len() > 10);
    assert!(is_stable_family(&cca, &family).unwrap());
    let mut broken = family.clone();
    let key = sl(1, &[1]);
    let st = broken.states[&key].perturbed(0, 1e-3);
    broken.states.insert(key, st);
    assert!(!is_stable_family(&cca, &broken).unwrap());
}

#[test]
fn translations_act_by_symmetries() {
    let l = line();
    let act = LatticeTranslations::new(l.clone());
    let cat = CcaCategory::new(l.clone());
    let w = Window::cube((0, 2), (-3, 3), 1);
    let events = l.events(Some(&w)).unwrap();
    let objs = cat.objects_in(&w, 2);
    let words = words_up_to(act.generator_count(), 2);
    let report = check_symmetry_action(&act, &cat, &words, &events, &objs, None);
    assert!(report.passed(), "{:?}", report.violations.first());
    assert_eq!(act_word(&act, &[(0, false)], &LatticePoint::new(0, &[0])), LatticePoint::new(1, &[1]));
    assert_eq!(act_word(&act, &[(1, false)], &LatticePoint::new(0, &[0])), LatticePoint::new(1, &[-1]));

    let ring = DiamondLattice::periodic(1, 6).unwrap();
    let ract = LatticeTranslations::new(ring.clone());
    let rcat = CcaCategory::new(ring.clone());
    let leaves: Vec<LatticeSlice> = (0..4).map(|t| rcat.layer_slice(t, &Window::new((t, t), vec![]))).collect();
    let report = check_symmetry_action(&ract, &rcat, &[vec![]], &[], &leaves, Some(&leaves));
    assert!(report.passed());
    let identity_only = check_symmetry_action(&act, &cat, &[vec![]], &events, &objs, None);
    assert!(identity_only.passed());
}

#[test]
fn reflection_of_a_fork_breaks_slice_ordering() {
    let fork = FiniteOrder::build_explicit(&["a", "b", "c"], &[("a", "b"), ("a", "c")]).unwrap();
    let swap_ab = PermutationGroup::new(fork.clone(), vec![vec![1, 0, 2]]).unwrap();
    let cat = AllSlices::new(fork.clone());
    let objs = cat.objects().unwrap();
    let events: Vec<EventId> = fork.ids().collect();
    let report = check_symmetry_action(&swap_ab, &cat, &[vec![(0, false)]], &events, &objs, None);
    assert!(report.violations.iter().any(|v| v.witness["condition"] == 2));
    let swap_bc = PermutationGroup::new(fork.clone(), vec![vec![0, 2, 1]]).unwrap();
    let words = words_up_to(1, 3);
    assert!(check_symmetry_action(&swap_bc, &cat, &words, &events, &objs, None).passed());
    assert!(PermutationGroup::new(fork, vec![vec![0, 0, 1]]).is_err());
}

fn identity_alpha(cca: &Cca) -> impl Fn(usize, bool, &LatticeSlice) -> Result<ProcMorphism, FieldError> + Sync + '_ {
    move |_, _, s| Ok(ProcMorphism::identity(&cca.object(s)?))
}

#[test]
fn homogeneous_automaton_is_translation_invariant() {
    let cca = seeded_cca(50);
    let act = LatticeTranslations::new(line());
    let objs = cca.category().objects_in(&Window::cube((0, 2), (-2, 2), 1), 2);
    let pairs = leads_to_pairs(cca.category(), &objs);
    let words = words_up_to(2, 2);
    let alpha = identity_alpha(&cca);
    let report = check_invariance(&cca, &act, &alpha, &words, &pairs, Comparison::Exact);
    assert!(report.passed(), "{:?}", report.violations.first());

    let ring = DiamondLattice::periodic(1, 6).unwrap();
    let rcca = dirac_cca(ring.clone(), 0.7, 0.2).unwrap();
    let ract = LatticeTranslations::new(ring.clone());
    let alpha = |g: usize, inv: bool, s: &LatticeSlice| -> Result<ProcMorphism, FieldError> {
        Ok(rcca.reindexing(s, |e| ract.act(g, inv, e))?)
    };
    let robjs = rcca.category().objects_in(&Window::new((0, 1), vec![]), 2);
    let rpairs = leads_to_pairs(rcca.category(), &robjs);
    let report = check_invariance(&rcca, &ract, &alpha, &words_up_to(2, 1), &rpairs, Comparison::Tolerance(VALIDITY_TOL));
    assert!(report.passed(), "{:?}", report.violations.first());
}

#[test]
fn site_dependent_scattering_breaks_invariance() {
    let local = ProcObject::uniform(Backend::Quantum, 2, 2).unwrap();
    let field = Scattering::PerEvent(Arc::new(move |e: &LatticePoint| {
        let m = 0.5 + 0.25 * e.x[0] as f64;
        Ok(ProcMorphism::unitary_channel(&local, &[0, 1], &dirac_scattering(m, 0.5))?)
    }));
    let cca = Cca::site_dependent(line(), 2, Backend::Quantum, field).unwrap();
    let act = LatticeTranslations::new(line());
    let objs = cca.category().objects_in(&Window::cube((0, 1), (-2, 2), 1), 2);
    let pairs = leads_to_pairs(cca.category(), &objs);
    let alpha = identity_alpha(&cca);
    let report = check_invariance(&cca, &act, &alpha, &words_up_to(2, 1), &pairs, Comparison::Tolerance(VALIDITY_TOL));
    assert!(!report.passed());
    let rev = build_reversal(&cca).unwrap();
    let sigma = sl(0, &[-2, 0, 2, 4]);
    let delta = sl(1, &[-1, 1, 3]);
    let round = cca
        .morphism(&sigma, &delta)
        .unwrap()
        .then(&rev.morphism(&delta, &sl(0, &[0, 2])).unwrap())
        .unwrap();
    assert!(round.deviation(&cca.morphism(&sigma, &sl(0, &[0, 2])).unwrap()).unwrap() <= VALIDITY_TOL);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slice_leq_matches_windowed_domain(
        xmask in 0u32..32,
        ymask in 0u32..32,
        k in 0i64..4,
    ) {
        let l = line();
        let xs: Vec<i64> = (0..5).filter(|i| xmask >> i & 1 == 1).map(|i| 2 * i - 4).collect();
        let ys: Vec<i64> = (0..5).filter(|i| ymask >> i & 1 == 1).map(|i| 2 * i - 4 + (k % 2)).collect();
        let a = sl(0, &xs);
        let b = sl(k, &ys);
        let w = Window::cube((0, k), (-4 - k, 4 + k), 1);
        let dom = future_domain(&l, a.as_set(), Some(&w)).unwrap();
        prop_assert_eq!(lattice_slice_leq(&l, &a, &b).unwrap(), b.as_set().is_subset(&dom));
    }

    #[test]
    fn ring_slice_leq_matches_domain(
        xmask in 0u32..64,
        ymask in 0u32..64,
        k in 0i64..4,
    ) {
        let l = DiamondLattice::periodic(1, 12).unwrap();
        let xs: Vec<i64> = (0..6).filter(|i| xmask >> i & 1 == 1).map(|i| 2 * i).collect();
        let ys: Vec<i64> = (0..6).filter(|i| ymask >> i & 1 == 1).map(|i| 2 * i + (k % 2)).collect();
        let a = ring_slice(&l, 0, &xs);
        let b = ring_slice(&l, k, &ys);
        let dom = crate::order::future_domain_below(&l, a.as_set(), b.as_set()).unwrap();
        prop_assert_eq!(lattice_slice_leq(&l, &a, &b).unwrap(), b.as_set().is_subset(&dom));
    }

    #[test]
    fn factorizations_compose_to_the_direct_kernel(seed in 0u64..1000, mask in 1u32..32, k in 0i64..3) {
        let cca = seeded_cca(seed);
        let xs: Vec<i64> = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| 2 * i - 4).collect();
        let a = sl(0, &xs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reachable: Vec<LatticeSlice> = cca
            .category()
            .objects_in(&Window::cube((k, k), (-5, 7), 1), 2)
            .into_iter()
            .filter(|b| cca.category().leads_to(&a, b))
            .collect();
        let b = &reachable[rng.gen_range(0..reachable.len())];
        let direct = cca.morphism(&a, b).unwrap();
        // alternative: go through the widest intermediate slice one step at a time
        let mut cur = a.clone();
        let mut acc = ProcMorphism::identity(&cca.object(&a).unwrap());
        for t in 1..=k {
            let next = cca.category().layer_slice(t, &Window::cube((t, t), (-5, 7), 1));
            let next: LatticeSlice = Slice::from_set_unchecked(
                next.iter().filter(|p| cca.category().leads_to(&cur, &Slice::from_set_unchecked(BTreeSet::from([(*p).clone()])))).cloned().collect(),
            );
            acc = acc.then(&cca.morphism(&cur, &next).unwrap()).unwrap();
            cur = next;
        }
        acc = acc.then(&cca.morphism(&cur, b).unwrap()).unwrap();
        prop_assert!(acc.deviation(&direct).unwrap() <= VALIDITY_TOL);
    }

    #[test]
    fn discarding_commutes_with_evolution(seed in 0u64..1000, mask in 1u32..16) {
        let cca = seeded_cca(seed);
        let xs: Vec<i64> = (0..4).filter(|i| mask >> i & 1 == 1).map(|i| 2 * i - 4).collect();
        let a = sl(0, &xs);
        let objs = cca.category().objects_in(&Window::cube((1, 2), (-4, 4), 1), 2);
        for b in objs.iter().filter(|b| cca.category().leads_to(&a, b)) {
            let lhs = cca.morphism(&a, b).unwrap().then(&ProcMorphism::discard_all(&cca.object(b).unwrap())).unwrap();
            let rhs = ProcMorphism::discard_all(&cca.object(&a).unwrap());
            prop_assert!(lhs.deviation(&rhs).unwrap() <= VALIDITY_TOL);
        }
    }

    #[test]
    fn dirac_walk_is_unitary(m in -3.0f64..3.0, eps in 0.01f64..1.0, steps in 0usize..40) {
        let mut walk = DiracWalk::new(20, m, eps, |x| (c((x as f64).cos(), 0.3), c(0.1, (x as f64 * 0.7).sin()))).unwrap();
        let n0 = walk.norm();
        walk.run(steps);
        prop_assert!((walk.norm() - n0).abs() < 1e-12 * n0);
    }
}
