//! CSS codes: the Steane code, encoding into share-major layouts and the
//! complementary queries used to split one logical player into many.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::game::{Basis, Query, Slot};
use crate::linalg::ZERO;
use crate::pauli::PauliWord;
use crate::state::StateVector;

/// Largest physical register `encode` builds.
pub const ENCODE_QUBIT_LIMIT: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CssCode {
    pub r: usize,
    pub x_stabilizers: Vec<BitString>,
    pub z_stabilizers: Vec<BitString>,
    pub logical_x: BitString,
    pub logical_z: BitString,
}

pub fn steane_code() -> CssCode {
    let rows: Vec<BitString> = ["0001111", "0110011", "1010101"].iter().map(|s| s.parse().unwrap()).collect();
    CssCode {
        r: 7,
        x_stabilizers: rows.clone(),
        z_stabilizers: rows,
        logical_x: BitString::ones(7),
        logical_z: BitString::ones(7),
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CodeReport {
    pub failures: Vec<String>,
    /// Positions with no X-stabilizer whose Z twin is also a stabilizer.
    pub uncovered: Vec<usize>,
}

impl CodeReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.uncovered.is_empty()
    }
}

/// All products of the given generators, in generator-subset order, without
/// duplicates (the identity included).
pub fn group_elements(gens: &[BitString], r: usize) -> Vec<BitString> {
    let mut out: Vec<BitString> = Vec::new();
    for mask in 0..1usize << gens.len() {
        let mut acc = BitString::zeros(r);
        for (k, g) in gens.iter().enumerate() {
            if (mask >> k) & 1 == 1 {
                acc = acc + *g;
            }
        }
        if !out.contains(&acc) {
            out.push(acc);
        }
    }
    out
}

impl CssCode {
    pub fn from_json(text: &str) -> Result<Self> {
        let code: CssCode = serde_json::from_str(text).map_err(|e| Error::Validation(format!("code description: {e}")))?;
        code.check_lengths()?;
        Ok(code)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("code serializes")
    }

    fn check_lengths(&self) -> Result<()> {
        let all = self.x_stabilizers.iter().chain(&self.z_stabilizers).chain([&self.logical_x, &self.logical_z]);
        for s in all {
            if s.len() != self.r {
                return Err(Error::Validation(format!("string {s} does not have length {}", self.r)));
            }
        }
        Ok(())
    }

    pub fn stabilizer_group(&self, basis: Basis) -> Vec<BitString> {
        match basis {
            Basis::X => group_elements(&self.x_stabilizers, self.r),
            Basis::Z => group_elements(&self.z_stabilizers, self.r),
        }
    }

    /// Stabilizer-group elements of type `basis` with a 1 at `position`.
    pub fn stabilizers_through(&self, basis: Basis, position: usize) -> Vec<BitString> {
        self.stabilizer_group(basis).into_iter().filter(|s| s.bit(position)).collect()
    }

    pub fn logical(&self, basis: Basis) -> BitString {
        match basis {
            Basis::X => self.logical_x,
            Basis::Z => self.logical_z,
        }
    }

    /// Generator words on r qubits: X-type first, then Z-type.
    pub fn generators(&self) -> Vec<PauliWord> {
        self.x_stabilizers
            .iter()
            .map(|s| PauliWord::x_type(*s))
            .chain(self.z_stabilizers.iter().map(|s| PauliWord::z_type(*s)))
            .collect()
    }
}

pub fn verify_code(code: &CssCode) -> CodeReport {
    let mut rep = CodeReport::default();
    if let Err(e) = code.check_lengths() {
        rep.failures.push(e.to_string());
        return rep;
    }
    for (i, sx) in code.x_stabilizers.iter().enumerate() {
        for (j, sz) in code.z_stabilizers.iter().enumerate() {
            if sx.dot(sz) {
                rep.failures.push(format!("X-stabilizer {i} anticommutes with Z-stabilizer {j}"));
            }
        }
    }
    if !code.logical_x.dot(&code.logical_z) {
        rep.failures.push("logical X commutes with logical Z".into());
    }
    for (i, sz) in code.z_stabilizers.iter().enumerate() {
        if code.logical_x.dot(sz) {
            rep.failures.push(format!("logical X anticommutes with Z-stabilizer {i}"));
        }
    }
    for (i, sx) in code.x_stabilizers.iter().enumerate() {
        if code.logical_z.dot(sx) {
            rep.failures.push(format!("logical Z anticommutes with X-stabilizer {i}"));
        }
    }
    let zgroup = code.stabilizer_group(Basis::Z);
    for (name, l) in [("X", code.logical_x), ("Z", code.logical_z)] {
        if code.stabilizer_group(Basis::X).contains(&l) || zgroup.contains(&l) {
            rep.failures.push(format!("logical {name} lies in the stabilizer group"));
        }
    }
    let xgroup = code.stabilizer_group(Basis::X);
    for pos in 0..code.r {
        if !xgroup.iter().any(|s| s.bit(pos) && zgroup.contains(s)) {
            rep.uncovered.push(pos);
        }
    }
    rep
}

/// Amplitudes of |0_L⟩ and |1_L⟩ as sparse (index, amplitude) lists over r
/// qubits. |0_L⟩ is the normalized projection of |0…0⟩ onto the X-stabilizer
/// group orbit; |1_L⟩ = X_L|0_L⟩.
fn codewords(code: &CssCode) -> [Vec<(u64, f64)>; 2] {
    let orbit = code.stabilizer_group(Basis::X);
    let amp = 1.0 / (orbit.len() as f64).sqrt();
    let zero: Vec<(u64, f64)> = orbit.iter().map(|s| (s.value(), amp)).collect();
    let mut one: Vec<(u64, f64)> = orbit.iter().map(|s| ((*s + code.logical_x).value(), amp)).collect();
    one.sort_by_key(|e| e.0);
    let mut zero = zero;
    zero.sort_by_key(|e| e.0);
    [zero, one]
}

/// Encodes each of the n logical qubits of `psi`. Player j holds qubits
/// j·n .. j·n+n−1; logical qubit i's share at player j is qubit j·n+i.
pub fn encode(code: &CssCode, psi: &StateVector) -> Result<StateVector> {
    let n = psi.qubits();
    let total = code.r * n;
    if total > ENCODE_QUBIT_LIMIT {
        return Err(Error::Resource(format!("encoding needs {total} qubits, limit {ENCODE_QUBIT_LIMIT}")));
    }
    let report = verify_code(code);
    if !report.passed() {
        return Err(Error::Validation(format!("invalid code: {:?} uncovered {:?}", report.failures, report.uncovered)));
    }
    let words = codewords(code);
    let r = code.r;
    // Scatter an r-bit codeword index of logical qubit i to its physical positions.
    let scatter = |i: usize, k: u64| -> usize {
        let mut idx = 0usize;
        for j in 0..r {
            if (k >> (r - 1 - j)) & 1 == 1 {
                idx |= 1 << (total - 1 - (j * n + i));
            }
        }
        idx
    };
    let mut out = vec![ZERO; 1usize << total];
    for (x, &c) in psi.amplitudes().iter().enumerate() {
        if c == ZERO {
            continue;
        }
        let mut partial: Vec<(usize, f64)> = vec![(0, 1.0)];
        for i in 0..n {
            let bit = (x >> (n - 1 - i)) & 1;
            let mut next = Vec::with_capacity(partial.len() * words[bit].len());
            for &(idx, a) in &partial {
                for &(k, w) in &words[bit] {
                    next.push((idx | scatter(i, k), a * w));
                }
            }
            partial = next;
        }
        for (idx, a) in partial {
            out[idx] += c * a;
        }
    }
    StateVector::new(total, out)
}

/// Qubits of the encoded register forming logical qubit `i`, in player order.
pub fn logical_block(code: &CssCode, n: usize, i: usize) -> Vec<usize> {
    (0..code.r).map(|j| j * n + i).collect()
}

/// The r-qubit word `s` of type `basis`, as a word on block `i` of an
/// encoded register.
pub fn block_word(basis: Basis, s: BitString) -> PauliWord {
    match basis {
        Basis::X => PauliWord::x_type(s),
        Basis::Z => PauliWord::z_type(s),
    }
}

/// Applies the transversal logical operator σ_W on logical qubit `i`.
pub fn apply_logical(code: &CssCode, basis: Basis, i: usize, state: &StateVector) -> Result<StateVector> {
    let n = state.qubits() / code.r;
    let w = block_word(basis, code.logical(basis));
    let amps = w.apply_amplitudes(state.amplitudes(), &logical_block(code, n, i), state.qubits())?;
    StateVector::new(state.qubits(), amps)
}

/// Queries for all r players when the special player receives `query`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplementaryQuery {
    pub special: usize,
    pub stabilizer: BitString,
    pub per_player: Vec<Slot>,
    /// Composite players whose answers are multiplied together.
    pub combine: Vec<usize>,
}

/// Every complementary query for `query` sent to `special`, one per
/// stabilizer through the special position, each equally likely.
pub fn complementary_queries(code: &CssCode, query: &Query, special: usize) -> Result<Vec<ComplementaryQuery>> {
    let (basis, n) = match query {
        Query::Basis { basis, first, .. } => (*basis, first.len()),
        q => return Err(Error::UnsupportedQuery(format!("no complementary query for {q}"))),
    };
    if special >= code.r {
        return Err(Error::Precondition(format!("special player {special} outside 0..{}", code.r)));
    }
    let options = code.stabilizers_through(basis, special);
    if options.is_empty() {
        return Err(Error::Validation(format!("no {} stabilizer covers position {special}", basis.label())));
    }
    Ok(options
        .into_iter()
        .map(|s| {
            let per_player = (0..code.r)
                .map(|j| if s.bit(j) { Slot::Ask(query.clone()) } else { Slot::Fresh { basis, n } })
                .collect();
            let combine = s.support().into_iter().filter(|&j| j != special).collect();
            ComplementaryQuery { special, stabilizer: s, per_player, combine }
        })
        .collect())
}

/// A complementary query with the stabilizer drawn uniformly by `rng`.
pub fn complementary_query(code: &CssCode, query: &Query, special: usize, rng: &mut impl Rng) -> Result<ComplementaryQuery> {
    let mut all = complementary_queries(code, query, special)?;
    let k = rng.gen_range(0..all.len());
    Ok(all.swap_remove(k))
}

/// Encoded |0_L⟩ on one block.
pub fn encoded_zero(code: &CssCode) -> Result<StateVector> {
    encode(code, &StateVector::basis(1, 0))
}
