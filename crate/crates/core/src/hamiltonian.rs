//! XZ-Hamiltonians and the r-player Hamiltonian self-test: the lifted
//! braiding test, the energy test, the energy consistency test, value
//! bounds, gap amplification and the QMA parameter map.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::acgame::AnticommutationGame;
use crate::bits::BitString;
use crate::braiding::{braiding_tuples, honest_share_measurement};
use crate::code::{complementary_queries, encode, CssCode};
use crate::error::{Error, Result};
use crate::game::{Basis, BitRef, Check, NonlocalGame, Query, QuestionTuple, Slot, Strategy};
use crate::linalg::{self, c64, CMat};
use crate::linearity::slot_of;
use crate::pauli::{pauli_dense, PauliWord, Sign, DEFAULT_DENSE_LIMIT};
use crate::state::{Measurement, StateVector};

pub const SUBTESTS: [&str; 3] = ["braiding", "energy", "energy-consistency"];

/// Largest a·n for which `Amplified::dense` builds H′.
pub const AMPLIFY_DENSE_LIMIT: usize = 12;

/// Largest physical register (r shares of n + m − 1 logical qubits) the honest
/// strategy is simulated on. 21 qubits (n = 2, Magic Square) takes about half an hour.
pub const SIMULATION_QUBIT_LIMIT: usize = 18;

/// One term α·σ_X(a)σ_Z(b).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XZTerm {
    pub alpha: f64,
    pub a: BitString,
    pub b: BitString,
}

impl XZTerm {
    pub fn word(&self) -> PauliWord {
        PauliWord::new(self.a, self.b, Sign::Plus).expect("lengths checked on construction")
    }
}

/// H = (1/m) Σ_ℓ α_ℓ σ_X(a_ℓ)σ_Z(b_ℓ) with a_ℓ ∧ b_ℓ = 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XZHamiltonian {
    n: usize,
    terms: Vec<XZTerm>,
}

impl XZHamiltonian {
    pub fn new(n: usize, terms: Vec<XZTerm>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("Hamiltonian on zero qubits".into()));
        }
        if terms.is_empty() {
            return Err(Error::Validation("Hamiltonian has no terms".into()));
        }
        for (l, t) in terms.iter().enumerate() {
            if t.a.len() != n || t.b.len() != n {
                return Err(Error::Validation(format!("term {l}: strings must have length {n}")));
            }
            if !t.alpha.is_finite() || t.alpha.abs() > 1.0 {
                return Err(Error::Validation(format!("term {l}: |alpha| = {} exceeds 1", t.alpha.abs())));
            }
            if !(t.a & t.b).is_zero() {
                return Err(Error::Validation(format!("term {l}: X and Z supports overlap ({} ∧ {})", t.a, t.b)));
            }
        }
        Ok(Self { n, terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[XZTerm] {
        &self.terms
    }

    /// (1/m) Σ |α_ℓ|.
    pub fn mean_abs_alpha(&self) -> f64 {
        self.terms.iter().map(|t| t.alpha.abs()).sum::<f64>() / self.m() as f64
    }

    pub fn dense(&self) -> Result<CMat> {
        if self.n > DEFAULT_DENSE_LIMIT {
            return Err(Error::Resource(format!("dense Hamiltonian limited to {DEFAULT_DENSE_LIMIT} qubits")));
        }
        let d = 1usize << self.n;
        let mut h = linalg::zeros(d, d);
        let inv = 1.0 / self.m() as f64;
        for t in &self.terms {
            h = linalg::add(&h, &linalg::scale(&pauli_dense(&t.word())?, c64::new(t.alpha * inv, 0.0)));
        }
        Ok(h)
    }

    /// ⟨ψ|H|ψ⟩.
    pub fn energy(&self, psi: &StateVector) -> Result<f64> {
        check_logical(self, psi)?;
        let all: Vec<usize> = (0..self.n).collect();
        let mut e = 0.0;
        for t in &self.terms {
            e += t.alpha * psi.pauli_expectation(&t.word(), &all)?.re;
        }
        Ok(e / self.m() as f64)
    }
}

impl fmt::Display for XZHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{} X:{} Z:{}", t.alpha, t.a, t.b)?;
        }
        Ok(())
    }
}

impl FromStr for XZHamiltonian {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        parse_hamiltonian(text)
    }
}

/// Parses one term per line, `<alpha> X:<bits> Z:<bits>`; `#` starts a
/// comment and blank lines are skipped.
pub fn parse_hamiltonian(text: &str) -> Result<XZHamiltonian> {
    let mut terms = Vec::new();
    let mut n = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line, msg };
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(perr(format!("expected `<alpha> X:<bits> Z:<bits>`, got {} fields", fields.len())));
        }
        let alpha: f64 = fields[0].parse().map_err(|_| perr(format!("bad coefficient `{}`", fields[0])))?;
        let field = |s: &str, tag: &str| -> Result<BitString> {
            let bits = s.strip_prefix(tag).ok_or_else(|| perr(format!("expected `{tag}<bits>`, got `{s}`")))?;
            bits.parse().map_err(|e| perr(format!("{e}")))
        };
        let a = field(fields[1], "X:")?;
        let b = field(fields[2], "Z:")?;
        if a.len() != b.len() {
            return Err(perr("X and Z strings differ in length".into()));
        }
        match n {
            None => n = Some(a.len()),
            Some(k) if k != a.len() => return Err(perr(format!("term on {} qubits, earlier terms on {k}", a.len()))),
            _ => {}
        }
        terms.push(XZTerm { alpha, a, b });
    }
    let n = n.ok_or_else(|| Error::Validation("Hamiltonian has no terms".into()))?;
    XZHamiltonian::new(n, terms)
}

pub fn serialize_hamiltonian(h: &XZHamiltonian) -> String {
    h.to_string()
}

pub fn min_eigenvalue(h: &XZHamiltonian) -> Result<f64> {
    Ok(linalg::eigvalsh(&h.dense()?)?[0])
}

/// Lowest eigenvector of the dense Hamiltonian, phased so that its first
/// non-negligible amplitude is real and positive.
pub fn ground_state(h: &XZHamiltonian) -> Result<(f64, StateVector)> {
    let (vals, u) = linalg::eigh(&h.dense()?)?;
    let mut v: Vec<c64> = u.col_as_slice(0).to_vec();
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12).copied() {
        let phase = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
    Ok((vals[0], StateVector::normalized(h.n, v)?))
}

fn check_logical(h: &XZHamiltonian, psi: &StateVector) -> Result<()> {
    if psi.qubits() != h.n {
        return Err(Error::Dimension(format!("state on {} qubits for a {}-qubit Hamiltonian", psi.qubits(), h.n)));
    }
    Ok(())
}

/// Acceptance probability of the energy test when every player measures its
/// shares of σ_X(a_ℓ) and σ_Z(b_ℓ) on an encoding of ψ:
/// (1/m) Σ_ℓ [1 − (|α_ℓ| + α_ℓ⟨ψ|σ_X(a_ℓ)σ_Z(b_ℓ)|ψ⟩)/2].
pub fn energy_test_value(h: &XZHamiltonian, psi: &StateVector) -> Result<f64> {
    check_logical(h, psi)?;
    let all: Vec<usize> = (0..h.n).collect();
    let mut acc = 0.0;
    for t in &h.terms {
        let e = psi.pauli_expectation(&t.word(), &all)?.re;
        acc += 1.0 - (t.alpha.abs() + t.alpha * e) / 2.0;
    }
    Ok(acc / h.m() as f64)
}

/// The verifier's energy-test value next to two alternative closed forms,
/// 1 − (1/2m)Σ(|α|+α⟨H_ℓ⟩)/2 and 1 − (⟨H⟩/4 + Σ|α|/2m). Neither agrees with
/// the verifier value in general.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct EnergyForms {
    pub verifier: f64,
    pub half_weight_form: f64,
    pub quarter_energy_form: f64,
}

pub fn energy_forms(h: &XZHamiltonian, psi: &StateVector) -> Result<EnergyForms> {
    let verifier = energy_test_value(h, psi)?;
    let all: Vec<usize> = (0..h.n).collect();
    let m = h.m() as f64;
    let mut s = 0.0;
    for t in &h.terms {
        s += (t.alpha.abs() + t.alpha * psi.pauli_expectation(&t.word(), &all)?.re) / 2.0;
    }
    let half_weight_form = 1.0 - s / (2.0 * m);
    let quarter_energy_form = 1.0 - (h.energy(psi)? / 4.0 + h.mean_abs_alpha() / 2.0);
    Ok(EnergyForms { verifier, half_weight_form, quarter_energy_form })
}

/// The bound 1 − (p/8)(λ_min + (2/m)Σ|α_ℓ|), returned twice: as the lower
/// bound on the optimal value and as the upper bound without its η slack.
pub fn optimal_value_bounds(h: &XZHamiltonian, p: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    let lambda = min_eigenvalue(h)?;
    let v = 1.0 - p / 8.0 * (lambda + 2.0 * h.mean_abs_alpha());
    Ok((v, v))
}

/// Honest value predicted by the verifier procedure when the braiding
/// component is passed with probability `braiding_value`:
/// (1−p)·braiding + (p/2)·energy + p/2.
pub fn honest_value_formula(h: &XZHamiltonian, p: f64, braiding_value: f64) -> Result<f64> {
    check_p(p)?;
    let (_, g) = ground_state(h)?;
    Ok((1.0 - p) * braiding_value + p / 2.0 * energy_test_value(h, &g)? + p / 2.0)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Precondition(format!("p = {p} outside (0, 1)")));
    }
    Ok(())
}

/// Composite-player queries for a G-query sent to Bob: one option per
/// stabilizer string that lies in both the X and Z groups and covers the
/// special position. Members get the query, everybody else a fresh X-query.
fn g_options(code: &CssCode, query: &Query, special: usize, n: usize) -> Result<Vec<(Vec<Slot>, Vec<usize>)>> {
    let zs = code.stabilizer_group(Basis::Z);
    let options: Vec<BitString> =
        code.stabilizers_through(Basis::X, special).into_iter().filter(|s| zs.contains(s)).collect();
    if options.is_empty() {
        return Err(Error::Validation(format!("no stabilizer of both types covers position {special}")));
    }
    Ok(options
        .into_iter()
        .map(|s| {
            let slots = (0..code.r)
                .map(|j| if s.bit(j) { Slot::Ask(query.clone()) } else { Slot::Fresh { basis: Basis::X, n } })
                .collect();
            let combine = s.support().into_iter().filter(|&j| j != special).collect();
            (slots, combine)
        })
        .collect())
}

fn composite_options(code: &CssCode, query: &Query, special: usize, n: usize) -> Result<Vec<(Vec<Slot>, Vec<usize>)>> {
    match query {
        Query::Basis { .. } => Ok(complementary_queries(code, query, special)?
            .into_iter()
            .map(|c| (c.per_player, c.combine))
            .collect()),
        Query::Lifted { .. } => g_options(code, query, special, n),
        q => Err(Error::UnsupportedQuery(format!("no composite query for {q}"))),
    }
}

/// Lifts a two-player tuple (player 0 = Alice, player 1 = Bob) to r players
/// with `special` as Alice, averaging over the composite options.
fn lift_tuple(t: &QuestionTuple, code: &CssCode, special: usize, n: usize, subtest: usize) -> Result<Vec<QuestionTuple>> {
    let (Slot::Ask(qa), Slot::Ask(qb)) = (&t.slots[0], &t.slots[1]) else {
        return Err(Error::Precondition("lifted tuples must ask both players".into()));
    };
    let options = composite_options(code, qb, special, n)?;
    let w = t.weight / (options.len() as f64 * code.r as f64);
    options
        .into_iter()
        .map(|(mut slots, combine)| {
            slots[special] = Slot::Ask(qa.clone());
            let check = t.check.expand(|b| {
                if b.player == 0 {
                    vec![BitRef::new(special, b.bit)]
                } else {
                    combine.iter().map(|&k| BitRef::new(k, b.bit)).collect()
                }
            })?;
            Ok(QuestionTuple { weight: w, slots, check, subtest })
        })
        .collect()
}

fn lifted_braiding_tuples(n: usize, acg: &AnticommutationGame, code: &CssCode, weight: f64) -> Result<Vec<QuestionTuple>> {
    let base = braiding_tuples(n, acg, weight, &[0])?;
    let mut out = Vec::new();
    for special in 0..code.r {
        for t in &base {
            out.extend(lift_tuple(t, code, special, n, 0)?);
        }
    }
    Ok(out)
}

/// Accept with probability 1 when the product of all answers has the sign
/// opposite to α, and 1 − |α| when it has the same sign.
fn energy_check(r: usize, alpha: f64) -> Result<Check> {
    let bits: Vec<BitRef> = (0..r).flat_map(|j| [BitRef::new(j, 0), BitRef::new(j, 1)]).collect();
    let agree_plus = if alpha > 0.0 { 1.0 - alpha.abs() } else { 1.0 };
    let agree_minus = if alpha < 0.0 { 1.0 - alpha.abs() } else { 1.0 };
    Check::from_fn(bits, |v| {
        let negative = v.iter().fold(false, |a, &b| a ^ b);
        if negative {
            agree_minus
        } else {
            agree_plus
        }
    })
}

fn energy_tuples(h: &XZHamiltonian, code: &CssCode, weight: f64) -> Result<Vec<QuestionTuple>> {
    let w = weight / h.m() as f64;
    h.terms
        .iter()
        .map(|t| {
            Ok(QuestionTuple {
                weight: w,
                slots: vec![Slot::Ask(Query::Xz { a: t.a, b: t.b }); code.r],
                check: energy_check(code.r, t.alpha)?,
                subtest: 1,
            })
        })
        .collect()
}

fn energy_consistency_tuples(h: &XZHamiltonian, code: &CssCode, weight: f64) -> Result<Vec<QuestionTuple>> {
    let n = h.n;
    let all: Vec<BitString> = BitString::all(n).collect();
    let cn = all.len() as f64;
    let mut base = Vec::new();
    let wl = weight / h.m() as f64 / 2.0;
    for t in &h.terms {
        for basis in [Basis::X, Basis::Z] {
            let shift = if basis == Basis::X { t.a } else { t.b };
            let special_bit = if basis == Basis::X { 0 } else { 1 };
            for &c in &all {
                let qb = Query::basis(basis, c, c + shift);
                let check = Check::parity(vec![BitRef::new(0, special_bit), BitRef::new(1, 0), BitRef::new(1, 1)], false)?;
                base.push(QuestionTuple {
                    weight: wl * 0.5 / cn,
                    slots: vec![Slot::Ask(Query::Xz { a: t.a, b: t.b }), Slot::Ask(qb.clone())],
                    check,
                    subtest: 2,
                });
                for &d in &all {
                    for (target, first) in [(c, c), (c + shift, c + shift)] {
                        let qa = Query::basis(basis, first, d);
                        let check = Check::parity(
                            vec![BitRef::new(0, slot_of(&qa, target, false)), BitRef::new(1, slot_of(&qb, target, target != c))],
                            false,
                        )?;
                        base.push(QuestionTuple {
                            weight: wl * 0.25 / (cn * cn),
                            slots: vec![Slot::Ask(qa), Slot::Ask(qb.clone())],
                            check,
                            subtest: 2,
                        });
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for special in 0..code.r {
        for t in &base {
            out.extend(lift_tuple(t, code, special, n, 2)?);
        }
    }
    Ok(out)
}

/// The r-player Hamiltonian self-test with r = code.r.
pub fn hamiltonian_game(h: &XZHamiltonian, p: f64, acg: &AnticommutationGame, code: &CssCode) -> Result<NonlocalGame> {
    check_p(p)?;
    let mut tuples = lifted_braiding_tuples(h.n, acg, code, 1.0 - p)?;
    tuples.extend(energy_tuples(h, code, p / 2.0)?);
    tuples.extend(energy_consistency_tuples(h, code, p / 2.0)?);
    NonlocalGame::new(
        format!("hamiltonian-{}-{}", acg.kind.name(), h.n),
        code.r,
        tuples,
        SUBTESTS.iter().map(|s| s.to_string()).collect(),
    )
}

/// Only the component `subtest` of the Hamiltonian self-test, with total
/// weight 1.
pub fn hamiltonian_component(h: &XZHamiltonian, acg: &AnticommutationGame, code: &CssCode, subtest: usize) -> Result<NonlocalGame> {
    let tuples = match subtest {
        0 => lifted_braiding_tuples(h.n, acg, code, 1.0)?,
        1 => energy_tuples(h, code, 1.0)?,
        2 => energy_consistency_tuples(h, code, 1.0)?,
        k => return Err(Error::Precondition(format!("no subtest {k}"))),
    };
    NonlocalGame::new(format!("{}-{}", SUBTESTS[subtest], h.n), code.r, tuples, SUBTESTS.iter().map(|s| s.to_string()).collect())
}

/// Every player holds its share of an encoding of ψ ⊗ |0…0⟩, the zeros
/// being the m−1 ancilla qubits of the anticommutation game, and answers
/// each query with the honest braiding measurement on its share.
#[derive(Clone, Debug)]
pub struct HonestHamiltonianStrategy {
    n: usize,
    acg: AnticommutationGame,
    state: StateVector,
    registers: Vec<Vec<usize>>,
}

impl HonestHamiltonianStrategy {
    pub fn with_logical_state(psi: &StateVector, code: &CssCode, acg: &AnticommutationGame) -> Result<Self> {
        let n = psi.qubits();
        let anc = acg.epr_pairs - 1;
        let l = n + anc;
        if code.r * l > SIMULATION_QUBIT_LIMIT {
            return Err(Error::Resource(format!(
                "honest strategy needs {} qubits, limit {SIMULATION_QUBIT_LIMIT}",
                code.r * l
            )));
        }
        let logical = psi.tensor(&StateVector::basis(anc, 0));
        let state = encode(code, &logical)?;
        let registers = (0..code.r).map(|j| (j * l..(j + 1) * l).collect()).collect();
        Ok(Self { n, acg: acg.clone(), state, registers })
    }
}

pub fn honest_hamiltonian_strategy(h: &XZHamiltonian, code: &CssCode, acg: &AnticommutationGame) -> Result<HonestHamiltonianStrategy> {
    let (_, g) = ground_state(h)?;
    HonestHamiltonianStrategy::with_logical_state(&g, code, acg)
}

impl Strategy for HonestHamiltonianStrategy {
    fn players(&self) -> usize {
        self.registers.len()
    }
    fn state(&self) -> &StateVector {
        &self.state
    }
    fn register(&self, p: usize) -> &[usize] {
        &self.registers[p]
    }
    fn measurement(&self, _p: usize, q: &Query) -> Result<Measurement> {
        honest_share_measurement(self.n, &self.acg, q)
    }
}

/// H′ = I^{⊗a} − (I − (H − a^{−1}I))^{⊗a}, kept symbolic.
#[derive(Clone, Debug, Serialize)]
pub struct Amplified {
    pub base: XZHamiltonian,
    pub copies: usize,
    /// (1/q − 1/p)^{−1} before rounding.
    pub copies_exact: f64,
    pub shift: f64,
}

impl Amplified {
    /// λ ↦ 1 − (1 − (λ − 1/a))^a.
    pub fn eigenvalue_map(&self, lambda: f64) -> f64 {
        1.0 - (1.0 - (lambda - self.shift)).powi(self.copies as i32)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalue_map(min_eigenvalue(&self.base)?))
    }

    /// Every eigenvalue of H′: 1 − Π_k (1 − λ_{i_k} + 1/a) over all a-tuples
    /// of eigenvalues of H, sorted ascending.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let vals = linalg::eigvalsh(&self.base.dense()?)?;
        let mu: Vec<f64> = vals.iter().map(|l| 1.0 - l + self.shift).collect();
        let mut prods = vec![1.0];
        for _ in 0..self.copies {
            prods = prods.iter().flat_map(|p| mu.iter().map(move |m| p * m)).collect();
        }
        let mut out: Vec<f64> = prods.into_iter().map(|p| 1.0 - p).collect();
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    pub fn dense(&self) -> Result<CMat> {
        let qubits = self.copies * self.base.n;
        if qubits > AMPLIFY_DENSE_LIMIT {
            return Err(Error::Resource(format!("H′ on {qubits} qubits exceeds {AMPLIFY_DENSE_LIMIT}")));
        }
        let d = 1usize << self.base.n;
        let id = linalg::identity(d);
        let inner = linalg::sub(&linalg::scale(&id, c64::new(1.0 + self.shift, 0.0)), &self.base.dense()?);
        let mut prod = linalg::identity(1);
        for _ in 0..self.copies {
            prod = linalg::kron(&prod, &inner);
        }
        Ok(linalg::sub(&linalg::identity(1usize << qubits), &prod))
    }
}

/// Gap amplification with a = round((1/q − 1/p)^{−1}), at least 1.
pub fn amplify(h: &XZHamiltonian, p_poly: f64, q_poly: f64) -> Result<Amplified> {
    if !(q_poly > 0.0 && p_poly > q_poly) {
        return Err(Error::Precondition(format!("amplify needs p > q > 0, got p = {p_poly}, q = {q_poly}")));
    }
    let copies_exact = 1.0 / (1.0 / q_poly - 1.0 / p_poly);
    let copies = copies_exact.round().max(1.0) as usize;
    Ok(Amplified { base: h.clone(), copies, copies_exact, shift: 1.0 / copies as f64 })
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct QmaParameters {
    pub p_prime: f64,
    pub eta0: f64,
    /// 1 − p′ + p′p, equal to ½ + 2η₀.
    pub completeness: f64,
    /// 1 − p′ + p′q, equal to ½ + η₀.
    pub soundness: f64,
}

/// p′ = 1/(2(1+p−2q)) and η₀ = (p−q)/(2(1+p−2q)).
pub fn qma_parameters(p: f64, q: f64) -> Result<QmaParameters> {
    if !(0.0 < q && q < p && p < 1.0) {
        return Err(Error::Precondition(format!("need 0 < q < p < 1, got p = {p}, q = {q}")));
    }
    let den = 2.0 * (1.0 + p - 2.0 * q);
    let p_prime = 1.0 / den;
    let eta0 = (p - q) / den;
    Ok(QmaParameters { p_prime, eta0, completeness: 1.0 - p_prime + p_prime * p, soundness: 1.0 - p_prime + p_prime * q })
}
