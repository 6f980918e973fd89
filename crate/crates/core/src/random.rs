//! Seeded random states, unitaries and observables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, c64, CMat};
use crate::state::{DensityMatrix, StateVector};

/// Generator for stream `stream` of master seed `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn gaussian(rng: &mut impl Rng) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    let mut m = linalg::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

/// Haar-random pure state.
pub fn random_state(qubits: usize, rng: &mut impl Rng) -> StateVector {
    let amps = (0..1usize << qubits).map(|_| gaussian(rng)).collect();
    StateVector::normalized(qubits, amps).expect("nonzero Gaussian vector")
}

/// G G† / Tr(G G†) for a square Ginibre matrix G.
pub fn random_density(qubits: usize, rng: &mut impl Rng) -> DensityMatrix {
    let d = 1usize << qubits;
    let g = ginibre(d, d, rng);
    let m = linalg::mul(&g, &linalg::dagger(&g));
    let t = linalg::trace(&m).re;
    let m = linalg::hermitize(&linalg::scale(&m, c64::new(1.0 / t, 0.0)));
    DensityMatrix::new(qubits, m).expect("Ginibre density is valid")
}

/// Haar-random unitary by Gram–Schmidt on a Ginibre matrix.
pub fn haar_unitary(dim: usize, rng: &mut impl Rng) -> CMat {
    let mut u = ginibre(dim, dim, rng);
    for j in 0..dim {
        for k in 0..j {
            let proj: c64 = (0..dim).map(|i| u[(i, k)].conj() * u[(i, j)]).sum();
            for i in 0..dim {
                let v = u[(i, k)];
                u[(i, j)] -= proj * v;
            }
        }
        let nrm = (0..dim).map(|i| u[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..dim {
            u[(i, j)] /= nrm;
        }
    }
    u
}

/// Random Hermitian matrix with Gaussian entries, operator scale O(1).
pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> CMat {
    let g = ginibre(dim, dim, rng);
    let h = linalg::hermitize(&g);
    linalg::scale(&h, c64::new(1.0 / (dim as f64).sqrt(), 0.0))
}

/// exp(iεH) for a random Hermitian H.
pub fn near_identity_unitary(dim: usize, eps: f64, rng: &mut impl Rng) -> CMat {
    let h = random_hermitian(dim, rng);
    let (vals, v) = linalg::eigh(&h).expect("Hermitian eigensolve");
    let mut vd = v.clone();
    for (j, &x) in vals.iter().enumerate() {
        let ph = c64::new(0.0, eps * x).exp();
        for z in vd.col_as_slice_mut(j) {
            *z *= ph;
        }
    }
    linalg::mul(&vd, &linalg::dagger(&v))
}

/// U diag(±1) U† with Haar U and a random sign pattern.
pub fn random_observable(dim: usize, rng: &mut impl Rng) -> CMat {
    let u = haar_unitary(dim, rng);
    let mut d = linalg::zeros(dim, dim);
    for i in 0..dim {
        d[(i, i)] = if rng.gen::<bool>() { linalg::ONE } else { -linalg::ONE };
    }
    linalg::hermitize(&linalg::mul3(&u, &d, &linalg::dagger(&u)))
}
