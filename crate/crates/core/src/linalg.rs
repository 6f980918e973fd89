//! Dense complex linear algebra on top of `faer`.
//!
//! Qubit ordering is big-endian throughout: qubit 0 is the most significant
//! bit of a basis index, and `kron(a, b)` places `a` on the leading qubits.

use std::sync::Once;

use faer::{Mat, Side};

use crate::error::{Error, Result};

pub use faer::c64;

pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

static SEQUENTIAL: Once = Once::new();

/// Pins faer to sequential kernels so that floating-point results do not
/// depend on the size of the thread pool.
pub fn init() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real(x: f64) -> c64 {
    c64::new(x, 0.0)
}

pub fn mul(a: &CMat, b: &CMat) -> CMat {
    init();
    a * b
}

pub fn mul3(a: &CMat, b: &CMat, c: &CMat) -> CMat {
    mul(&mul(a, b), c)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    a + b
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    a - b
}

pub fn scale(a: &CMat, s: c64) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kron(b)
}

pub fn kron_all(ms: &[&CMat]) -> CMat {
    let mut acc = identity(1);
    for m in ms {
        acc = kron(&acc, m);
    }
    acc
}

pub fn trace(a: &CMat) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// Tr(AB) without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> c64 {
    let mut acc = ZERO;
    for j in 0..b.ncols() {
        let bj = b.col_as_slice(j);
        for (k, &bkj) in bj.iter().enumerate() {
            acc += a[(j, k)] * bkj;
        }
    }
    acc
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for z in a.col_as_slice(j) {
            m = m.max(z.norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for (x, y) in a.col_as_slice(j).iter().zip(b.col_as_slice(j)) {
            m = m.max((x - y).norm());
        }
    }
    m
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for z in a.col_as_slice(j) {
            s += z.norm_sqr();
        }
    }
    s.sqrt()
}

pub fn is_square(a: &CMat) -> bool {
    a.nrows() == a.ncols()
}

pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// (A + A†)/2.
pub fn hermitize(a: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    init();
    if !is_square(a) {
        return Err(Error::Dimension(format!("eigh of {}x{} matrix", a.nrows(), a.ncols())));
    }
    let h = hermitize(a);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("Hermitian eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals: Vec<f64> = (0..a.nrows()).map(|i| s[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn eigvalsh(a: &CMat) -> Result<Vec<f64>> {
    Ok(eigh(a)?.0)
}

/// U f(Λ) U† for Hermitian `a`.
pub fn hermitian_map(a: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let (vals, u) = eigh(a)?;
    let mut uf = u.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for z in uf.col_as_slice_mut(j) {
            *z *= fv;
        }
    }
    Ok(mul(&uf, &dagger(&u)))
}

/// Principal square root of a numerically PSD matrix; eigenvalues above
/// `-clamp` are treated as zero before the root is taken.
pub fn psd_sqrt(a: &CMat, clamp: f64) -> Result<CMat> {
    let (vals, _) = eigh(a)?;
    if let Some(&v) = vals.first() {
        if v < -clamp {
            return Err(Error::Numeric(format!("matrix not PSD: eigenvalue {v:e}")));
        }
    }
    hermitian_map(a, |x| x.max(0.0).sqrt())
}

pub fn mat_vec(a: &CMat, v: &[c64]) -> Vec<c64> {
    assert_eq!(a.ncols(), v.len());
    let mut out = vec![ZERO; a.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == ZERO {
            continue;
        }
        for (o, &aij) in out.iter_mut().zip(a.col_as_slice(j)) {
            *o += aij * vj;
        }
    }
    out
}

pub fn inner(u: &[c64], v: &[c64]) -> c64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Index layout for acting on a subset of the qubits of a register.
#[derive(Clone, Debug)]
pub struct LocalLayout {
    /// Full-index offset of each local basis state.
    pub offsets: Vec<usize>,
    /// Full-index base of each assignment of the remaining qubits.
    pub bases: Vec<usize>,
}

impl LocalLayout {
    pub fn new(qubits: &[usize], total: usize) -> Result<Self> {
        check_qubits(qubits, total)?;
        let k = qubits.len();
        let shift = |q: usize| total - 1 - q;
        let offsets = (0..1usize << k)
            .map(|l| {
                (0..k)
                    .filter(|&j| (l >> (k - 1 - j)) & 1 == 1)
                    .map(|j| 1usize << shift(qubits[j]))
                    .sum()
            })
            .collect();
        let rest: Vec<usize> = (0..total).filter(|q| !qubits.contains(q)).collect();
        let r = rest.len();
        let bases = (0..1usize << r)
            .map(|o| {
                (0..r)
                    .filter(|&j| (o >> (r - 1 - j)) & 1 == 1)
                    .map(|j| 1usize << shift(rest[j]))
                    .sum()
            })
            .collect();
        Ok(Self { offsets, bases })
    }
}

pub fn check_qubits(qubits: &[usize], total: usize) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= total {
            return Err(Error::Dimension(format!("qubit index {q} out of range for {total} qubits")));
        }
        if qubits[..i].contains(&q) {
            return Err(Error::Dimension(format!("duplicate qubit index {q}")));
        }
    }
    Ok(())
}

/// Applies `op` (acting on `qubits`, first listed qubit most significant) to a
/// state vector over `total` qubits.
pub fn apply_local(op: &CMat, qubits: &[usize], total: usize, state: &[c64]) -> Result<Vec<c64>> {
    let layout = LocalLayout::new(qubits, total)?;
    apply_with_layout(op, &layout, state)
}

pub fn apply_with_layout(op: &CMat, layout: &LocalLayout, state: &[c64]) -> Result<Vec<c64>> {
    let d = layout.offsets.len();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::Dimension(format!("operator {}x{} on {d}-dim subsystem", op.nrows(), op.ncols())));
    }
    if d * layout.bases.len() != state.len() {
        return Err(Error::Dimension(format!("state length {} vs layout {}", state.len(), d * layout.bases.len())));
    }
    let mut out = vec![ZERO; state.len()];
    let mut x = vec![ZERO; d];
    for &base in &layout.bases {
        for (l, xl) in x.iter_mut().enumerate() {
            *xl = state[base + layout.offsets[l]];
        }
        for (j, &xj) in x.iter().enumerate() {
            if xj == ZERO {
                continue;
            }
            for (i, &oij) in op.col_as_slice(j).iter().enumerate() {
                out[base + layout.offsets[i]] += oij * xj;
            }
        }
    }
    Ok(out)
}

/// Dense matrix of `op` on `qubits`, identity elsewhere.
pub fn embed(op: &CMat, qubits: &[usize], total: usize) -> Result<CMat> {
    let layout = LocalLayout::new(qubits, total)?;
    let d = layout.offsets.len();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::Dimension("operator does not match subsystem".into()));
    }
    let dim = 1usize << total;
    let mut out = zeros(dim, dim);
    for &base in &layout.bases {
        for j in 0..d {
            for i in 0..d {
                let v = op[(i, j)];
                if v != ZERO {
                    out[(base + layout.offsets[i], base + layout.offsets[j])] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Reduced density matrix of a pure state on `keep`.
pub fn reduced_pure(state: &[c64], keep: &[usize], total: usize) -> Result<CMat> {
    let layout = LocalLayout::new(keep, total)?;
    let d = layout.offsets.len();
    let e = layout.bases.len();
    let m = CMat::from_fn(d, e, |i, j| state[layout.bases[j] + layout.offsets[i]]);
    Ok(mul(&m, &dagger(&m)))
}

/// Completes an isometry into a unitary. Columns of `v` are placed at
/// `positions`; the remaining columns are an orthonormal basis of the
/// orthogonal complement.
pub fn complete_unitary(v: &CMat, positions: &[usize]) -> Result<CMat> {
    init();
    let n = v.nrows();
    let k = v.ncols();
    if positions.len() != k || k > n {
        return Err(Error::Dimension("isometry completion layout".into()));
    }
    let mut aug = zeros(n, k + n);
    for j in 0..k {
        for i in 0..n {
            aug[(i, j)] = v[(i, j)];
        }
    }
    for i in 0..n {
        aug[(i, k + i)] = ONE;
    }
    let q = aug.qr().compute_Q();
    let mut u = zeros(n, n);
    let mut free = (0..n).filter(|c| !positions.contains(c));
    for j in 0..k {
        for i in 0..n {
            u[(i, positions[j])] = v[(i, j)];
        }
    }
    for j in k..n {
        let c = free.next().expect("column count");
        for i in 0..n {
            u[(i, c)] = q[(i, j)];
        }
    }
    Ok(u)
}

/// Unitarity defect max|U†U − I|.
pub fn unitary_defect(u: &CMat) -> f64 {
    max_abs_diff(&mul(&dagger(u), u), &identity(u.nrows()))
}
