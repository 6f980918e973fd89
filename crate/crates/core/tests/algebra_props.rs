use proptest::prelude::*;

use selftest_core::linalg::{self, c64, CMat};
use selftest_core::random::{self, haar_unitary, random_density, random_state};
use selftest_core::state::{
    consistency, joint_observable, naimark_dilate, povm_distance, Measurement, DEFAULT_KERNEL_TOL,
};
use selftest_core::{pauli_apply, pauli_dense, pauli_multiply, BitString, PauliWord, Sign};

fn word(n: usize) -> impl Strategy<Value = PauliWord> {
    (0..1u64 << n, 0..1u64 << n, any::<bool>()).prop_map(move |(x, z, neg)| {
        PauliWord::new(BitString::from_value(n, x), BitString::from_value(n, z), Sign::from_negative(neg)).unwrap()
    })
}

fn word_pair() -> impl Strategy<Value = (PauliWord, PauliWord)> {
    (1..=3usize).prop_flat_map(|n| (word(n), word(n)))
}

fn word_triple() -> impl Strategy<Value = (PauliWord, PauliWord, PauliWord)> {
    (1..=3usize).prop_flat_map(|n| (word(n), word(n), word(n)))
}

/// Random POVM from positive parts normalized by S^{-1/2}.
fn random_povm(dim: usize, outcomes: usize, seed: u64) -> Measurement {
    let mut rng = random::rng(seed, 0);
    let parts: Vec<CMat> = (0..outcomes)
        .map(|_| {
            let g = random::ginibre(dim, dim, &mut rng);
            linalg::mul(&g, &linalg::dagger(&g))
        })
        .collect();
    let s = parts.iter().skip(1).fold(parts[0].clone(), |acc, p| linalg::add(&acc, p));
    let inv = linalg::hermitian_map(&s, |x| 1.0 / x.sqrt()).unwrap();
    let elements = parts.iter().map(|p| linalg::hermitize(&linalg::mul3(&inv, p, &inv))).collect();
    Measurement::povm(elements).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_is_a_homomorphism((p, q) in word_pair()) {
        let lhs = pauli_dense(&pauli_multiply(&p, &q).unwrap()).unwrap();
        let rhs = linalg::mul(&pauli_dense(&p).unwrap(), &pauli_dense(&q).unwrap());
        prop_assert_eq!(linalg::max_abs_diff(&lhs, &rhs), 0.0);
    }

    #[test]
    fn multiplication_is_associative((p, q, r) in word_triple()) {
        let left = pauli_multiply(&pauli_multiply(&p, &q).unwrap(), &r).unwrap();
        let right = pauli_multiply(&p, &pauli_multiply(&q, &r).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn square_is_signed_identity(p in (1..=3usize).prop_flat_map(word)) {
        let sq = pauli_multiply(&p, &p).unwrap();
        let expected = PauliWord::identity(p.n()).with_sign(Sign::from_negative(p.x().dot(&p.z())));
        prop_assert_eq!(sq, expected);
    }

    #[test]
    fn apply_matches_dense(p in (1..=3usize).prop_flat_map(word), seed in any::<u64>(), extra in 0..2usize) {
        let total = p.n() + extra;
        let psi = random_state(total, &mut random::rng(seed, 0));
        let qubits: Vec<usize> = (extra..total).rev().collect();
        let fast = pauli_apply(&p, &psi, &qubits).unwrap();
        let slow = linalg::apply_local(&pauli_dense(&p).unwrap(), &qubits, total, psi.amplitudes()).unwrap();
        for (a, b) in fast.amplitudes().iter().zip(&slow) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn text_form_round_trips(p in (1..=4usize).prop_flat_map(word)) {
        let back: PauliWord = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn random_states_are_normalized(qubits in 1..6usize, seed in any::<u64>()) {
        let psi = random_state(qubits, &mut random::rng(seed, 0));
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn distance_and_consistency_of_roots(seed in any::<u64>(), outcomes in 2..4usize) {
        let rho = random_density(2, &mut random::rng(seed, 1));
        let m = random_povm(4, outcomes, seed);
        let n = random_povm(4, outcomes, seed ^ 0x5555);
        let roots = |x: &Measurement| {
            Measurement::new_unchecked(
                x.labels().to_vec(),
                x.elements().iter().map(|e| linalg::psd_sqrt(e, 1e-12).unwrap()).collect(),
                x.kind(),
            )
            .unwrap()
        };
        let d = povm_distance(&rho, &m, &n).unwrap();
        let c = consistency(&rho, &roots(&m), &roots(&n)).unwrap();
        prop_assert!((d * d + 2.0 * c - 2.0).abs() < 1e-10);
    }

    #[test]
    fn cauchy_schwarz_transfer(seed in any::<u64>()) {
        let mut rng = random::rng(seed, 2);
        let rho = random_density(2, &mut rng);
        let m = random_povm(4, 3, seed);
        let n = random_povm(4, 3, seed.wrapping_add(1));
        let cs: Vec<CMat> = (0..3).map(|_| random::ginibre(4, 4, &mut rng)).collect();
        let k = cs.iter().fold(linalg::zeros(4, 4), |acc, c| linalg::add(&acc, &linalg::mul(c, &linalg::dagger(c))));
        let k = linalg::eigvalsh(&k).unwrap().into_iter().fold(0.0f64, f64::max);
        let side = |x: &Measurement| -> c64 {
            cs.iter()
                .zip(x.elements())
                .map(|(c, e)| rho.expectation(&linalg::mul(c, &linalg::psd_sqrt(e, 1e-12).unwrap())).unwrap())
                .sum()
        };
        let gap = (side(&m) - side(&n)).norm();
        prop_assert!(gap <= k.sqrt() * povm_distance(&rho, &m, &n).unwrap() + 1e-10);
    }

    #[test]
    fn naimark_preserves_statistics(seed in any::<u64>(), outcomes in 2..5usize) {
        let rho = random_density(2, &mut random::rng(seed, 3));
        let m = random_povm(4, outcomes, seed);
        let (proj, big) = naimark_dilate(&m, &rho).unwrap();
        prop_assert!(proj.idempotence_defect() < 1e-9);
        for (e, p) in m.elements().iter().zip(proj.elements()) {
            let want = rho.expectation(e).unwrap().re;
            let got = big.expectation(p).unwrap().re;
            prop_assert!((want - got).abs() < 1e-10);
        }
    }

    #[test]
    fn joint_observable_is_an_observable(seed in any::<u64>()) {
        let mut rng = random::rng(seed, 4);
        let rho = random_density(2, &mut rng);
        let a = random::random_observable(4, &mut rng);
        let u = haar_unitary(4, &mut rng);
        let b = linalg::mul3(&u, &a, &linalg::dagger(&u));
        let c = joint_observable(&rho, &a, &b, DEFAULT_KERNEL_TOL).unwrap();
        let c = c.matrix();
        prop_assert!(linalg::hermitian_defect(c) < 1e-12);
        prop_assert!(linalg::max_abs_diff(&linalg::mul(c, c), &linalg::identity(4)) < 1e-9);
    }
}

#[test]
fn dense_homomorphism_exhaustive_small() {
    for n in 1..=2usize {
        let all: Vec<PauliWord> = (0..1u64 << n)
            .flat_map(|x| (0..1u64 << n).map(move |z| (x, z)))
            .map(|(x, z)| PauliWord::new(BitString::from_value(n, x), BitString::from_value(n, z), Sign::Plus).unwrap())
            .collect();
        for p in &all {
            for q in &all {
                let lhs = pauli_dense(&pauli_multiply(p, q).unwrap()).unwrap();
                let rhs = linalg::mul(&pauli_dense(p).unwrap(), &pauli_dense(q).unwrap());
                assert_eq!(linalg::max_abs_diff(&lhs, &rhs), 0.0);
                for r in &all {
                    assert_eq!(
                        pauli_multiply(&pauli_multiply(p, q).unwrap(), r).unwrap(),
                        pauli_multiply(p, &pauli_multiply(q, r).unwrap()).unwrap()
                    );
                }
            }
        }
    }
}
