//! Pauli words σ_X(a)σ_Z(b) over I, σ_X, σ_Z with a ±1 sign.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{dim_err, pre_err, Error, Result};
use crate::linalg::{self, c64, CMat, ZERO};
use crate::state::StateVector;

/// Largest qubit count for which dense 2^n × 2^n matrices are formed.
pub const DEFAULT_DENSE_LIMIT: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_negative(neg: bool) -> Self {
        if neg {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn is_negative(self) -> bool {
        self == Sign::Minus
    }

    pub fn value(self) -> f64 {
        if self.is_negative() {
            -1.0
        } else {
            1.0
        }
    }

    pub fn flip(self) -> Self {
        Self::from_negative(!self.is_negative())
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_negative(self.is_negative() != rhs.is_negative())
    }
}

/// The signed ordered product sign·σ_X(a)·σ_Z(b).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliWord {
    x: BitString,
    z: BitString,
    sign: Sign,
}

impl PauliWord {
    pub fn new(x: BitString, z: BitString, sign: Sign) -> Result<Self> {
        if x.len() != z.len() {
            return dim_err(format!("X-part has {} bits, Z-part has {}", x.len(), z.len()));
        }
        Ok(Self { x, z, sign })
    }

    pub fn identity(n: usize) -> Self {
        Self { x: BitString::zeros(n), z: BitString::zeros(n), sign: Sign::Plus }
    }

    pub fn x_type(a: BitString) -> Self {
        Self { x: a, z: BitString::zeros(a.len()), sign: Sign::Plus }
    }

    pub fn z_type(b: BitString) -> Self {
        Self { x: BitString::zeros(b.len()), z: b, sign: Sign::Plus }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> BitString {
        self.x
    }

    pub fn z(&self) -> BitString {
        self.z
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn negated(&self) -> Self {
        Self { sign: self.sign.flip(), ..*self }
    }

    pub fn with_sign(&self, sign: Sign) -> Self {
        Self { sign, ..*self }
    }

    /// The word squares to (−1)^{a·b}·I; it is Hermitian exactly when a·b = 0.
    pub fn square_sign(&self) -> Sign {
        Sign::from_negative(self.x.dot(&self.z))
    }

    pub fn is_hermitian(&self) -> bool {
        !self.x.dot(&self.z)
    }

    pub fn commutes_with(&self, other: &PauliWord) -> bool {
        self.x.dot(&other.z) == self.z.dot(&other.x)
    }

    /// Applies the word to raw amplitudes, acting on `qubits` of a `total`-qubit register.
    pub fn apply_amplitudes(&self, amps: &[c64], qubits: &[usize], total: usize) -> Result<Vec<c64>> {
        if qubits.len() != self.n() {
            return dim_err(format!("word on {} qubits applied to {} indices", self.n(), qubits.len()));
        }
        linalg::check_qubits(qubits, total)?;
        if amps.len() != 1usize << total {
            return dim_err("amplitude vector length does not match qubit count");
        }
        let (mut xm, mut zm) = (0usize, 0usize);
        for (i, &q) in qubits.iter().enumerate() {
            let bit = 1usize << (total - 1 - q);
            if self.x.bit(i) {
                xm |= bit;
            }
            if self.z.bit(i) {
                zm |= bit;
            }
        }
        let s = self.sign.value();
        let mut out = vec![ZERO; amps.len()];
        for (idx, &v) in amps.iter().enumerate() {
            let phase = if (idx & zm).count_ones() & 1 == 1 { -s } else { s };
            out[idx ^ xm] = v * phase;
        }
        Ok(out)
    }
}

pub fn pauli_multiply(p: &PauliWord, q: &PauliWord) -> Result<PauliWord> {
    if p.n() != q.n() {
        return dim_err(format!("multiplying words on {} and {} qubits", p.n(), q.n()));
    }
    let sign = p.sign * q.sign * Sign::from_negative(q.x.dot(&p.z));
    Ok(PauliWord { x: p.x + q.x, z: p.z + q.z, sign })
}

impl Mul for PauliWord {
    type Output = PauliWord;
    fn mul(self, rhs: PauliWord) -> PauliWord {
        pauli_multiply(&self, &rhs).expect("word lengths differ")
    }
}

/// Applies `p` to the qubits `qubit_subset` of `psi` without forming a matrix.
pub fn pauli_apply(p: &PauliWord, psi: &StateVector, qubit_subset: &[usize]) -> Result<StateVector> {
    let out = p.apply_amplitudes(psi.amplitudes(), qubit_subset, psi.qubits())?;
    Ok(StateVector::from_raw(psi.qubits(), out))
}

pub fn pauli_dense(p: &PauliWord) -> Result<CMat> {
    pauli_dense_with_limit(p, DEFAULT_DENSE_LIMIT)
}

pub fn pauli_dense_with_limit(p: &PauliWord, limit: usize) -> Result<CMat> {
    let n = p.n();
    if n > limit {
        return Err(Error::Resource(format!("dense Pauli on {n} qubits exceeds limit {limit}")));
    }
    let dim = 1usize << n;
    let (xm, zm) = (p.x.value() as usize, p.z.value() as usize);
    let s = p.sign.value();
    let mut m = linalg::zeros(dim, dim);
    for col in 0..dim {
        let phase = if (col & zm).count_ones() & 1 == 1 { -s } else { s };
        m[(col ^ xm, col)] = c64::new(phase, 0.0);
    }
    Ok(m)
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign.is_negative() { '-' } else { '+' };
        write!(f, "{s}X:{};Z:{}", self.x, self.z)
    }
}

impl FromStr for PauliWord {
    type Err = Error;
    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        let (sign, rest) = match t.as_bytes().first() {
            Some(b'+') => (Sign::Plus, &t[1..]),
            Some(b'-') => (Sign::Minus, &t[1..]),
            _ => (Sign::Plus, t),
        };
        let (xs, zs) = rest
            .split_once(';')
            .ok_or_else(|| Error::Validation(format!("expected X:<bits>;Z:<bits>, got {text:?}")))?;
        let x = xs
            .strip_prefix("X:")
            .ok_or_else(|| Error::Validation(format!("missing X: prefix in {text:?}")))?
            .parse()?;
        let z = zs
            .strip_prefix("Z:")
            .ok_or_else(|| Error::Validation(format!("missing Z: prefix in {text:?}")))?
            .parse()?;
        PauliWord::new(x, z, sign)
    }
}

impl Serialize for PauliWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Symplectic vector (x | z) of an unsigned word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Sym {
    x: BitString,
    z: BitString,
}

impl Sym {
    fn form(&self, o: &Sym) -> bool {
        self.x.dot(&o.z) ^ self.z.dot(&o.x)
    }

    fn quadratic(&self) -> bool {
        self.x.dot(&self.z)
    }

    fn add(&self, o: &Sym) -> Sym {
        Sym { x: self.x + o.x, z: self.z + o.z }
    }

    fn word(&self) -> PauliWord {
        PauliWord { x: self.x, z: self.z, sign: Sign::Plus }
    }

    fn from_index(n: usize, v: u64) -> Sym {
        let mask = (1u64 << n) - 1;
        Sym { x: BitString::from_value(n, v >> n), z: BitString::from_value(n, v & mask) }
    }
}

/// Real orthogonal Clifford W with W σ_X(a) W† = I⊗σ_X and W σ_Z(b) W† = I⊗σ_Z
/// on the last qubit.
///
/// (σ_X(a), σ_Z(b)) is extended to a symplectic basis of Z_2^{2n} by a
/// lexicographic-first search over vectors (x | z) restricted to words with
/// x·z = 0, so every basis word is a real symmetric Pauli and W is real.
pub fn conjugating_clifford(a: &BitString, b: &BitString) -> Result<CMat> {
    let n = a.len();
    if b.len() != n {
        return dim_err("conjugating_clifford: a and b have different lengths");
    }
    if n == 0 || !a.dot(b) {
        return pre_err(format!("conjugating_clifford requires a·b = 1, got a={a}, b={b}"));
    }
    if n > DEFAULT_DENSE_LIMIT {
        return Err(Error::Resource(format!("Clifford on {n} qubits exceeds dense limit")));
    }
    let last = (Sym { x: *a, z: BitString::zeros(n) }, Sym { x: BitString::zeros(n), z: *b });
    let mut pairs: Vec<(Sym, Sym)> = Vec::with_capacity(n);
    let in_complement = |v: &Sym, chosen: &[(Sym, Sym)]| {
        !v.form(&last.0) && !v.form(&last.1) && chosen.iter().all(|(g, h)| !v.form(g) && !v.form(h))
    };
    let total = 1u64 << (2 * n);
    while pairs.len() + 1 < n {
        let g = (1..total)
            .map(|v| Sym::from_index(n, v))
            .find(|v| !v.quadratic() && in_complement(v, &pairs))
            .ok_or_else(|| Error::Numeric("symplectic completion failed".into()))?;
        let mut h = (1..total)
            .map(|v| Sym::from_index(n, v))
            .find(|v| v.form(&g) && in_complement(v, &pairs))
            .ok_or_else(|| Error::Numeric("symplectic completion failed".into()))?;
        if h.quadratic() {
            h = h.add(&g);
        }
        pairs.push((g, h));
    }
    pairs.push(last);

    let dim = 1usize << n;
    let all: Vec<usize> = (0..n).collect();
    // joint +1 eigenvector of the Z-like images
    let mut v0 = None;
    for start in 0..dim {
        let mut v = vec![ZERO; dim];
        v[start] = linalg::ONE;
        for (_, h) in &pairs {
            let hv = h.word().apply_amplitudes(&v, &all, n)?;
            for (vi, hi) in v.iter_mut().zip(hv) {
                *vi = (*vi + hi) * 0.5;
            }
        }
        let nrm = linalg::norm_sqr(&v).sqrt();
        if nrm > 1e-8 {
            let first = v.iter().find(|z| z.norm() > 1e-12).copied().unwrap_or(linalg::ONE);
            let phase = first.conj() / first.norm();
            v0 = Some(v.into_iter().map(|z| z * phase / nrm).collect::<Vec<_>>());
            break;
        }
    }
    let v0 = v0.ok_or_else(|| Error::Numeric("no joint eigenvector found".into()))?;
    let mut wdag = linalg::zeros(dim, dim);
    for col in 0..dim {
        let mut v = v0.clone();
        for (i, (g, _)) in pairs.iter().enumerate() {
            if (col >> (n - 1 - i)) & 1 == 1 {
                v = g.word().apply_amplitudes(&v, &all, n)?;
            }
        }
        for (r, z) in v.into_iter().enumerate() {
            wdag[(r, col)] = c64::new(z.re, 0.0);
        }
    }
    Ok(linalg::dagger(&wdag))
}
