//! Exact states, measurements, state-dependent distances, Naimark dilation
//! and the joint-observable construction.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, pre_err, Error, Result};
use crate::linalg::{self, c64, CMat, LocalLayout, ONE, ZERO};
use crate::pauli::PauliWord;

/// Tolerance for invariants checked when objects are constructed.
pub const TOL_CONSTRUCTION: f64 = 1e-9;
/// Tolerance for equality assertions on derived quantities.
pub const TOL_EQUALITY: f64 = 1e-10;
/// Tolerance for comparisons against independent oracles.
pub const TOL_ORACLE: f64 = 1e-12;
/// Default band around zero treated as the kernel in `joint_observable`.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-9;
/// Eigenvalues above `-PSD_CLAMP` are rounded to zero before square roots.
pub const PSD_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<c64>,
}

impl StateVector {
    pub fn new(qubits: usize, amps: Vec<c64>) -> Result<Self> {
        if amps.len() != 1usize << qubits {
            return dim_err(format!("{} amplitudes for {qubits} qubits", amps.len()));
        }
        let nrm = linalg::norm_sqr(&amps).sqrt();
        if (nrm - 1.0).abs() > TOL_EQUALITY {
            return Err(Error::Numeric(format!("state norm {nrm} differs from 1")));
        }
        Ok(Self { qubits, amps })
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(qubits: usize, mut amps: Vec<c64>) -> Result<Self> {
        if amps.len() != 1usize << qubits {
            return dim_err(format!("{} amplitudes for {qubits} qubits", amps.len()));
        }
        let nrm = linalg::norm_sqr(&amps).sqrt();
        if nrm < 1e-300 {
            return Err(Error::Numeric("cannot normalize the zero vector".into()));
        }
        for z in &mut amps {
            *z /= nrm;
        }
        Ok(Self { qubits, amps })
    }

    pub(crate) fn from_raw(qubits: usize, amps: Vec<c64>) -> Self {
        debug_assert_eq!(amps.len(), 1usize << qubits);
        Self { qubits, amps }
    }

    pub fn basis(qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1usize << qubits];
        amps[index] = ONE;
        Self { qubits, amps }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        linalg::norm_sqr(&self.amps).sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> c64 {
        linalg::inner(&self.amps, &other.amps)
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for &a in &self.amps {
            for &b in &other.amps {
                amps.push(a * b);
            }
        }
        Self { qubits: self.qubits + other.qubits, amps }
    }

    /// Relabels qubits: qubit `order[i]` of `self` becomes qubit `i` of the result.
    pub fn permuted(&self, order: &[usize]) -> Result<StateVector> {
        if order.len() != self.qubits {
            return dim_err("permutation length differs from qubit count");
        }
        linalg::check_qubits(order, self.qubits)?;
        let k = self.qubits;
        let mut amps = vec![ZERO; self.dim()];
        for (idx, a) in amps.iter_mut().enumerate() {
            let mut src = 0usize;
            for (i, &q) in order.iter().enumerate() {
                if (idx >> (k - 1 - i)) & 1 == 1 {
                    src |= 1 << (k - 1 - q);
                }
            }
            *a = self.amps[src];
        }
        Ok(Self { qubits: k, amps })
    }

    /// `op` applied to `qubits`; the result need not be normalized.
    pub fn apply(&self, op: &CMat, qubits: &[usize]) -> Result<Vec<c64>> {
        linalg::apply_local(op, qubits, self.qubits, &self.amps)
    }

    /// ⟨ψ|op|ψ⟩ with `op` acting on `qubits`.
    pub fn expectation(&self, op: &CMat, qubits: &[usize]) -> Result<c64> {
        Ok(linalg::inner(&self.amps, &self.apply(op, qubits)?))
    }

    pub fn pauli_expectation(&self, p: &PauliWord, qubits: &[usize]) -> Result<c64> {
        Ok(linalg::inner(&self.amps, &p.apply_amplitudes(&self.amps, qubits, self.qubits)?))
    }

    pub fn density(&self) -> DensityMatrix {
        let d = self.dim();
        let mat = CMat::from_fn(d, d, |i, j| self.amps[i] * self.amps[j].conj());
        DensityMatrix { qubits: self.qubits, mat }
    }

    /// Reduced density matrix on `keep`, in the listed order.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let mat = linalg::reduced_pure(&self.amps, keep, self.qubits)?;
        Ok(DensityMatrix { qubits: keep.len(), mat })
    }

    pub fn to_json(&self) -> String {
        let j = StateJson { qubits: self.qubits, amplitudes: self.amps.iter().map(|z| [z.re, z.im]).collect() };
        serde_json::to_string(&j).expect("serializing state")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: StateJson = serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        Self::new(j.qubits, j.amplitudes.into_iter().map(|[re, im]| c64::new(re, im)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    qubits: usize,
    amplitudes: Vec<[f64; 2]>,
}

/// Row-major JSON form of a complex matrix.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_mat(m: &CMat) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_mat(&self) -> Result<CMat> {
        if self.data.len() != self.rows * self.cols {
            return dim_err("matrix JSON data length");
        }
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            c64::new(re, im)
        }))
    }
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    qubits: usize,
    mat: CMat,
}

impl DensityMatrix {
    pub fn new(qubits: usize, mat: CMat) -> Result<Self> {
        let d = 1usize << qubits;
        if mat.nrows() != d || mat.ncols() != d {
            return dim_err(format!("{}x{} matrix for {qubits} qubits", mat.nrows(), mat.ncols()));
        }
        if linalg::hermitian_defect(&mat) > TOL_EQUALITY {
            return Err(Error::Numeric("density matrix not Hermitian".into()));
        }
        let tr = linalg::trace(&mat);
        if (tr.re - 1.0).abs() > TOL_EQUALITY || tr.im.abs() > TOL_EQUALITY {
            return Err(Error::Numeric(format!("density matrix trace {tr}")));
        }
        let min = linalg::eigvalsh(&mat)?.first().copied().unwrap_or(0.0);
        if min < -TOL_EQUALITY {
            return Err(Error::Numeric(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(Self { qubits, mat })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.density()
    }

    pub fn maximally_mixed(qubits: usize) -> Self {
        let d = 1usize << qubits;
        Self { qubits, mat: linalg::scale(&linalg::identity(d), c64::new(1.0 / d as f64, 0.0)) }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self { qubits: self.qubits + other.qubits, mat: linalg::kron(&self.mat, &other.mat) }
    }

    /// ρ ⊗ |0…0⟩⟨0…0| on `anc` trailing qubits.
    pub fn with_ancilla(&self, anc: usize) -> DensityMatrix {
        let mut zero = linalg::zeros(1 << anc, 1 << anc);
        zero[(0, 0)] = ONE;
        Self { qubits: self.qubits + anc, mat: linalg::kron(&self.mat, &zero) }
    }

    /// Tr(op·ρ).
    pub fn expectation(&self, op: &CMat) -> Result<c64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return dim_err("operator and state dimensions differ");
        }
        Ok(linalg::trace_product(op, &self.mat))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MatrixJson::from_mat(&self.mat)).expect("serializing matrix")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementKind {
    Povm,
    Projective,
}

/// Outcome `i` carries label `labels[i]`. For observables label 0 is the
/// +1 outcome and label 1 the −1 outcome.
#[derive(Clone, Debug)]
pub struct Measurement {
    labels: Vec<u32>,
    elements: Vec<CMat>,
    kind: MeasurementKind,
}

impl Measurement {
    pub fn new(labels: Vec<u32>, elements: Vec<CMat>, kind: MeasurementKind) -> Result<Self> {
        let m = Self::new_unchecked(labels, elements, kind)?;
        m.validate(TOL_CONSTRUCTION)?;
        Ok(m)
    }

    /// Checks shapes only; used for measurements that are correct by construction.
    pub fn new_unchecked(labels: Vec<u32>, elements: Vec<CMat>, kind: MeasurementKind) -> Result<Self> {
        if labels.len() != elements.len() || elements.is_empty() {
            return dim_err("measurement needs one element per label");
        }
        let d = elements[0].nrows();
        if elements.iter().any(|e| e.nrows() != d || e.ncols() != d) {
            return dim_err("measurement elements have different shapes");
        }
        Ok(Self { labels, elements, kind })
    }

    pub fn projective(elements: Vec<CMat>) -> Result<Self> {
        let labels = (0..elements.len() as u32).collect();
        Self::new(labels, elements, MeasurementKind::Projective)
    }

    pub fn povm(elements: Vec<CMat>) -> Result<Self> {
        let labels = (0..elements.len() as u32).collect();
        Self::new(labels, elements, MeasurementKind::Povm)
    }

    /// Joint measurement of commuting observables: bit j of the outcome index,
    /// `(index >> j) & 1`, is 1 when observable j reads −1.
    pub fn from_commuting(obs: &[CMat]) -> Result<Self> {
        if obs.is_empty() {
            return pre_err("no observables given");
        }
        let d = obs[0].nrows();
        let k = obs.len();
        let id = linalg::identity(d);
        let halves: Vec<[CMat; 2]> = obs
            .iter()
            .map(|o| {
                let p = linalg::scale(&linalg::add(&id, o), c64::new(0.5, 0.0));
                let m = linalg::scale(&linalg::sub(&id, o), c64::new(0.5, 0.0));
                [p, m]
            })
            .collect();
        let elements = (0..1usize << k)
            .map(|alpha| {
                let mut acc = halves[0][alpha & 1].clone();
                for (j, h) in halves.iter().enumerate().skip(1) {
                    acc = linalg::mul(&acc, &h[(alpha >> j) & 1]);
                }
                acc
            })
            .collect();
        Self::new_unchecked((0..1u32 << k).collect(), elements, MeasurementKind::Projective)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CMat {
        &self.elements[i]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn kind(&self) -> MeasurementKind {
        self.kind
    }

    pub fn completeness_defect(&self) -> f64 {
        let mut sum = linalg::zeros(self.dim(), self.dim());
        for e in &self.elements {
            sum = linalg::add(&sum, e);
        }
        linalg::max_abs_diff(&sum, &linalg::identity(self.dim()))
    }

    pub fn idempotence_defect(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| linalg::max_abs_diff(&linalg::mul(e, e), e))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        for (i, e) in self.elements.iter().enumerate() {
            if linalg::hermitian_defect(e) > tol {
                return Err(Error::Numeric(format!("element {i} not Hermitian")));
            }
            if let Some(&min) = linalg::eigvalsh(e)?.first() {
                if min < -tol {
                    return Err(Error::Numeric(format!("element {i} has eigenvalue {min:e}")));
                }
            }
        }
        let c = self.completeness_defect();
        if c > tol {
            return Err(Error::Numeric(format!("elements sum to identity only within {c:e}")));
        }
        if self.kind == MeasurementKind::Projective {
            let p = self.idempotence_defect();
            if p > tol {
                return Err(Error::Numeric(format!("projective elements idempotent only within {p:e}")));
            }
        }
        Ok(())
    }

    /// Σ_i signs[i]·M_i.
    pub fn signed_sum(&self, signs: &[f64]) -> CMat {
        let d = self.dim();
        let mut acc = linalg::zeros(d, d);
        for (e, &s) in self.elements.iter().zip(signs) {
            if s != 0.0 {
                acc = linalg::add(&acc, &linalg::scale(e, c64::new(s, 0.0)));
            }
        }
        acc
    }

    /// Coarse-grains outcomes: new outcome `group(i)` collects element `i`.
    pub fn coarse_grain(&self, outcomes: usize, group: impl Fn(usize) -> usize) -> Result<Measurement> {
        let d = self.dim();
        let mut acc = vec![linalg::zeros(d, d); outcomes];
        for (i, e) in self.elements.iter().enumerate() {
            let g = group(i);
            if g >= outcomes {
                return dim_err("coarse-graining target out of range");
            }
            acc[g] = linalg::add(&acc[g], e);
        }
        Measurement::new_unchecked((0..outcomes as u32).collect(), acc, self.kind)
    }

    /// Conjugates every element: M ↦ U M U†.
    pub fn conjugated(&self, u: &CMat) -> Result<Measurement> {
        if u.nrows() != self.dim() {
            return dim_err("conjugating unitary has wrong dimension");
        }
        let ud = linalg::dagger(u);
        let elements = self.elements.iter().map(|e| linalg::mul3(u, e, &ud)).collect();
        Measurement::new_unchecked(self.labels.clone(), elements, self.kind)
    }
}

#[derive(Clone, Debug)]
pub struct Observable {
    mat: CMat,
}

impl Observable {
    pub fn new(mat: CMat) -> Result<Self> {
        if !linalg::is_square(&mat) {
            return dim_err("observable must be square");
        }
        if linalg::hermitian_defect(&mat) > TOL_CONSTRUCTION {
            return Err(Error::Numeric("observable not Hermitian".into()));
        }
        let sq = linalg::mul(&mat, &mat);
        let defect = linalg::max_abs_diff(&sq, &linalg::identity(mat.nrows()));
        if defect > TOL_CONSTRUCTION {
            return Err(Error::Numeric(format!("observable squares to identity only within {defect:e}")));
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_raw(mat: CMat) -> Self {
        Self { mat }
    }

    pub fn from_pauli(p: &PauliWord) -> Result<Self> {
        if !p.is_hermitian() {
            return pre_err(format!("{p} is not Hermitian"));
        }
        Ok(Self { mat: crate::pauli::pauli_dense(p)? })
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn to_measurement(&self) -> Measurement {
        Measurement::from_commuting(std::slice::from_ref(&self.mat)).expect("single observable")
    }
}

/// |EPR⟩^{⊗n}; pair i spans qubits (i, n+i).
pub fn epr_state(n: usize) -> Result<StateVector> {
    if n == 0 {
        return pre_err("epr_state needs n ≥ 1");
    }
    if 2 * n > 30 {
        return Err(Error::Resource(format!("EPR state on {} qubits", 2 * n)));
    }
    let d = 1usize << n;
    let amp = c64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut amps = vec![ZERO; d * d];
    for x in 0..d {
        amps[(x << n) | x] = amp;
    }
    Ok(StateVector { qubits: 2 * n, amps })
}

fn check_op(rho: &DensityMatrix, m: &CMat) -> Result<()> {
    if m.nrows() != rho.dim() || m.ncols() != rho.dim() {
        return dim_err(format!("operator {}x{} against state of dimension {}", m.nrows(), m.ncols(), rho.dim()));
    }
    Ok(())
}

/// Tr((S−T)†(S−T)ρ) for arbitrary operators.
pub fn operator_distance_sq(rho: &DensityMatrix, s: &CMat, t: &CMat) -> Result<f64> {
    check_op(rho, s)?;
    check_op(rho, t)?;
    let delta = linalg::sub(s, t);
    let drho = linalg::mul(&delta, rho.matrix());
    let v = linalg::trace_product(&linalg::dagger(&delta), &drho).re;
    Ok(v.max(0.0))
}

/// Whether `m` is Hermitian and squares to the identity within `tol`.
pub fn is_observable(m: &CMat, tol: f64) -> bool {
    linalg::is_square(m)
        && linalg::hermitian_defect(m) <= tol
        && linalg::max_abs_diff(&linalg::mul(m, m), &linalg::identity(m.nrows())) <= tol
}

/// Squared state-dependent distance. Two observables are compared as the
/// binary measurements they define, D² = ½Tr(ρ(A−B)²); any other pair uses
/// D² = Tr((S−T)†(S−T)ρ).
pub fn state_distance_sq(rho: &DensityMatrix, s: &CMat, t: &CMat) -> Result<f64> {
    let d = operator_distance_sq(rho, s, t)?;
    if is_observable(s, TOL_CONSTRUCTION) && is_observable(t, TOL_CONSTRUCTION) {
        Ok(0.5 * d)
    } else {
        Ok(d)
    }
}

/// D_ρ(S, T); see `state_distance_sq` for the observable convention.
pub fn state_distance(rho: &DensityMatrix, s: &CMat, t: &CMat) -> Result<f64> {
    Ok(state_distance_sq(rho, s, t)?.sqrt())
}

fn check_pair(rho: &DensityMatrix, m: &Measurement, n: &Measurement) -> Result<()> {
    if m.labels() != n.labels() {
        return dim_err("measurements have different outcome labels");
    }
    if m.dim() != rho.dim() || n.dim() != rho.dim() {
        return dim_err("measurement and state dimensions differ");
    }
    Ok(())
}

/// sqrt(Σ_a D_ρ(√M^a, √N^a)²).
pub fn povm_distance(rho: &DensityMatrix, m: &Measurement, n: &Measurement) -> Result<f64> {
    check_pair(rho, m, n)?;
    let mut total = 0.0;
    for (ma, na) in m.elements().iter().zip(n.elements()) {
        let sm = linalg::psd_sqrt(ma, PSD_CLAMP)?;
        let sn = linalg::psd_sqrt(na, PSD_CLAMP)?;
        total += operator_distance_sq(rho, &sm, &sn)?;
    }
    Ok(total.sqrt())
}

/// Re Σ_a Tr(M^a N^a ρ).
pub fn consistency(rho: &DensityMatrix, m: &Measurement, n: &Measurement) -> Result<f64> {
    check_pair(rho, m, n)?;
    let mut total = 0.0;
    for (ma, na) in m.elements().iter().zip(n.elements()) {
        total += linalg::trace_product(ma, &linalg::mul(na, rho.matrix())).re;
    }
    Ok(total)
}

/// Isometric dilation V|ψ⟩ = Σ_i √M_i|ψ⟩ ⊗ |i⟩ completed to a unitary U.
#[derive(Clone, Debug)]
pub struct NaimarkDilation {
    unitary: CMat,
    system_dim: usize,
    anc_qubits: usize,
    outcomes: usize,
}

impl NaimarkDilation {
    pub fn new(m: &Measurement) -> Result<Self> {
        let c = m.completeness_defect();
        if c > TOL_CONSTRUCTION {
            return Err(Error::Numeric(format!("POVM completeness violated by {c:e}")));
        }
        let k = m.len();
        let anc_qubits = k.next_power_of_two().trailing_zeros() as usize;
        let big_d = 1usize << anc_qubits;
        let d = m.dim();
        let roots: Vec<CMat> = m.elements().iter().map(|e| linalg::psd_sqrt(e, 1e-9)).collect::<Result<_>>()?;
        let v = CMat::from_fn(d * big_d, d, |row, col| {
            let (r, i) = (row / big_d, row % big_d);
            if i < k {
                roots[i][(r, col)]
            } else {
                ZERO
            }
        });
        let positions: Vec<usize> = (0..d).map(|c| c * big_d).collect();
        let unitary = linalg::complete_unitary(&v, &positions)?;
        Ok(Self { unitary, system_dim: d, anc_qubits, outcomes: k })
    }

    pub fn unitary(&self) -> &CMat {
        &self.unitary
    }

    pub fn anc_qubits(&self) -> usize {
        self.anc_qubits
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    /// Rows of U whose ancilla index is `u`.
    fn block(&self, u: usize) -> CMat {
        let big_d = 1usize << self.anc_qubits;
        let n = self.unitary.ncols();
        CMat::from_fn(self.system_dim, n, |r, c| self.unitary[(r * big_d + u, c)])
    }

    /// U†(I ⊗ Σ_u w_u |u⟩⟨u|)U over all 2^anc ancilla values.
    pub fn weighted(&self, weights: &[f64]) -> CMat {
        let n = self.unitary.ncols();
        let mut acc = linalg::zeros(n, n);
        for (u, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                let b = self.block(u);
                acc = linalg::add(&acc, &linalg::scale(&linalg::mul(&linalg::dagger(&b), &b), c64::new(w, 0.0)));
            }
        }
        acc
    }

    /// Projective measurement with the original outcome count; padding
    /// ancilla values are merged into the last outcome.
    pub fn measurement(&self) -> Result<Measurement> {
        let big_d = 1usize << self.anc_qubits;
        let elements = (0..self.outcomes)
            .map(|i| {
                let w: Vec<f64> = (0..big_d)
                    .map(|u| if u == i || (i + 1 == self.outcomes && u > i) { 1.0 } else { 0.0 })
                    .collect();
                self.weighted(&w)
            })
            .collect();
        Measurement::new_unchecked((0..self.outcomes as u32).collect(), elements, MeasurementKind::Projective)
    }
}

/// Projective simulation of `m` on system ⊗ ancilla, with the ancilla
/// (trailing qubits) starting in |0…0⟩.
pub fn naimark_dilate(m: &Measurement, rho: &DensityMatrix) -> Result<(Measurement, DensityMatrix)> {
    if m.dim() != rho.dim() {
        return dim_err("measurement and state dimensions differ");
    }
    let dil = NaimarkDilation::new(m)?;
    let mut proj = dil.measurement()?;
    proj.labels = m.labels().to_vec();
    Ok((proj, rho.with_ancilla(dil.anc_qubits())))
}

/// C = (AB+BA)/|AB+BA|, with eigenvalues of magnitude at most `kernel_tol`
/// mapped to +1.
pub fn joint_observable(rho: &DensityMatrix, a: &CMat, b: &CMat, kernel_tol: f64) -> Result<Observable> {
    check_op(rho, a)?;
    check_op(rho, b)?;
    joint_observable_matrix(a, b, kernel_tol).map(Observable::from_raw)
}

pub(crate) fn joint_observable_matrix(a: &CMat, b: &CMat, kernel_tol: f64) -> Result<CMat> {
    if a.nrows() != b.nrows() {
        return dim_err("joint_observable operands differ in dimension");
    }
    let s = linalg::add(&linalg::mul(a, b), &linalg::mul(b, a));
    linalg::hermitian_map(&s, |x| if x.abs() <= kernel_tol || x > 0.0 { 1.0 } else { -1.0 })
}

/// Partial trace keeping `keep` (in the listed order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let layout = LocalLayout::new(keep, rho.qubits())?;
    let d = layout.offsets.len();
    let m = rho.matrix();
    let out = CMat::from_fn(d, d, |i, j| {
        layout.bases.iter().map(|&b| m[(b + layout.offsets[i], b + layout.offsets[j])]).sum()
    });
    Ok(DensityMatrix { qubits: keep.len(), mat: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epr_rejects_zero() {
        assert!(epr_state(0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let psi = epr_state(1).unwrap();
        let back = StateVector::from_json(&psi.to_json()).unwrap();
        assert!((psi.inner(&back).re - 1.0).abs() < 1e-15);
        let m = MatrixJson::from_mat(psi.density().matrix());
        assert!(linalg::max_abs_diff(&m.to_mat().unwrap(), psi.density().matrix()) == 0.0);
    }

    #[test]
    fn permuted_moves_qubits() {
        let psi = StateVector::basis(3, 0b100);
        assert_eq!(psi.permuted(&[1, 2, 0]).unwrap().amplitudes()[0b001], ONE);
    }
}
