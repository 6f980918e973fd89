//! The two-player Pauli braiding test: game, honest and perturbed
//! strategies, residual diagnostics, exact-Pauli extraction and the EPR
//! witness.

use rayon::prelude::*;
use serde::Serialize;

use crate::acgame::AnticommutationGame;
use crate::bits::BitString;
use crate::error::{dim_err, Error, Result};
use crate::game::{
    game_value_exact, pairwise_sum, Basis, BitRef, Check, NonlocalGame, Query, QuestionTuple, Role, Slot, Strategy,
};
use crate::linalg::{self, c64, CMat, ZERO};
use crate::linearity::{blr_round, slot_of, ObservableFamily};
use crate::pauli::{conjugating_clifford, pauli_dense, pauli_multiply, PauliWord, Sign};
use crate::random;
use crate::state::{epr_state, joint_observable_matrix, DensityMatrix, Measurement, StateVector, DEFAULT_KERNEL_TOL};

pub const SUBTESTS: [&str; 3] = ["linearity", "anticommutation", "consistency"];

/// Largest n for exact residual computation.
pub const RESIDUAL_LIMIT: usize = 4;
/// Largest n for the extraction.
pub const EXTRACTION_LIMIT: usize = 2;

/// Pairs (a, b) of n-bit strings with a·b = 1.
pub fn odd_pairs(n: usize) -> Vec<(BitString, BitString)> {
    let all: Vec<BitString> = BitString::all(n).collect();
    all.iter().flat_map(|a| all.iter().filter(move |b| a.dot(b)).map(move |b| (*a, *b))).collect()
}

/// Question tuples of the braiding test with Alice as `alice` and Bob as
/// `bob`, total weight `weight`.
pub(crate) fn braiding_tuples(
    n: usize,
    acg: &AnticommutationGame,
    weight: f64,
    alice_labels: &[usize],
) -> Result<Vec<QuestionTuple>> {
    if n == 0 {
        return Err(Error::Precondition("braiding test needs n ≥ 1".into()));
    }
    let third = weight / 3.0;
    let mut out = Vec::new();
    for basis in [Basis::X, Basis::Z] {
        out.extend(crate::linearity::linearity_tuples(n, third / 2.0, 0, alice_labels, &|s, t| Query::basis(basis, s, t))?);
    }
    let pairs = odd_pairs(n);
    let wp = 1.0 / (pairs.len() as f64 * alice_labels.len() as f64);
    for &alice in alice_labels {
        let bob = 1 - alice;
        let place = |qa: Query, qb: Query| {
            let mut slots = vec![Slot::Ask(qa), Slot::Ask(qb)];
            if alice == 1 {
                slots.swap(0, 1);
            }
            slots
        };
        for &(a, b) in &pairs {
            for (k, q) in acg.questions.iter().enumerate() {
                out.push(QuestionTuple {
                    weight: third * wp * q.weight,
                    slots: place(acg.lifted_query(Role::First, q.first, a, b), acg.lifted_query(Role::Second, q.second, a, b)),
                    check: acg.check(k, alice, bob)?,
                    subtest: 1,
                });
            }
            let marginal = acg.second_marginal();
            for basis in [Basis::X, Basis::Z] {
                let qa = Query::basis(basis, a, b);
                let w_branch = third * wp * 0.5 * 0.5;
                for (q, &mq) in marginal.iter().enumerate() {
                    if mq == 0.0 {
                        continue;
                    }
                    let qb = acg.lifted_query(Role::Second, q, a, b);
                    let check = match (basis, q) {
                        (Basis::X, q) if q == acg.q_x => f_check(BitRef::new(alice, slot_of(&qa, a, false)), bob, &acg.f_x)?,
                        (Basis::Z, q) if q == acg.q_z => f_check(BitRef::new(alice, slot_of(&qa, b, true)), bob, &acg.f_z)?,
                        _ => Check::always_accept(),
                    };
                    out.push(QuestionTuple { weight: w_branch * mq, slots: place(qa.clone(), qb), check, subtest: 2 });
                }
                let cs: Vec<BitString> = BitString::all(n).collect();
                for &c in &cs {
                    let qb = Query::basis(basis, a, c);
                    let check = Check::parity(
                        vec![BitRef::new(alice, slot_of(&qa, a, false)), BitRef::new(bob, slot_of(&qb, a, false))],
                        false,
                    )?;
                    out.push(QuestionTuple {
                        weight: w_branch / cs.len() as f64,
                        slots: place(qa.clone(), qb),
                        check,
                        subtest: 2,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Accept iff (−1)^{alice bit} = f(bob's outcome); Bob's answer has
/// log2(f.len()) bits.
fn f_check(alice: BitRef, bob: usize, f: &[f64]) -> Result<Check> {
    let bits = f.len().trailing_zeros() as usize;
    let mut refs = vec![alice];
    refs.extend((0..bits).map(|j| BitRef::new(bob, j as u8)));
    Check::from_fn(refs, |v| {
        let y: usize = v[1..].iter().enumerate().map(|(j, &b)| (b as usize) << j).sum();
        let sa = if v[0] { -1.0 } else { 1.0 };
        if sa == f[y] {
            1.0
        } else {
            0.0
        }
    })
}

/// The two-player Pauli braiding test on n-bit strings.
pub fn braiding_game(n: usize, acg: &AnticommutationGame) -> Result<NonlocalGame> {
    let tuples = braiding_tuples(n, acg, 1.0, &[0, 1])?;
    NonlocalGame::new(format!("braiding-{}-{n}", acg.kind.name()), 2, tuples, SUBTESTS.iter().map(|s| s.to_string()).collect())
}

/// Value of the honest strategy, 2/3 + ω_G/3.
pub fn omega_enc(acg: &AnticommutationGame) -> f64 {
    2.0 / 3.0 + acg.omega_g / 3.0
}

/// σ_W(s) on the first n of `total` qubits.
fn data_word(basis: Basis, s: BitString, total: usize) -> PauliWord {
    let pad = BitString::zeros(total - s.len());
    match basis {
        Basis::X => PauliWord::x_type(s.concat(&pad)),
        Basis::Z => PauliWord::z_type(s.concat(&pad)),
    }
}

/// Honest measurement of a share holding n data qubits followed by the
/// ac-game ancillas, for W-, G- and XZ-queries.
pub fn honest_share_measurement(n: usize, acg: &AnticommutationGame, query: &Query) -> Result<Measurement> {
    let anc = acg.epr_pairs - 1;
    let total = n + anc;
    match query {
        Query::Basis { basis, first, second } => {
            let p = data_word(*basis, *first, total);
            let q = data_word(*basis, *second, total);
            Measurement::from_commuting(&[pauli_dense(&p)?, pauli_dense(&q)?])
        }
        Query::Lifted { role, index, a, b, .. } => {
            let w = linalg::kron(&conjugating_clifford(a, b)?, &linalg::identity(1usize << anc));
            let wd = linalg::dagger(&w);
            let inner = acg.honest_measurement(*role, *index)?;
            let lead = linalg::identity(1usize << (n - 1));
            let elements = inner.elements().iter().map(|e| linalg::mul3(&wd, &linalg::kron(&lead, e), &w)).collect();
            Measurement::new_unchecked(inner.labels().to_vec(), elements, crate::state::MeasurementKind::Projective)
        }
        Query::Xz { a, b } => {
            let p = data_word(Basis::X, *a, total);
            let q = data_word(Basis::Z, *b, total);
            Measurement::from_commuting(&[pauli_dense(&p)?, pauli_dense(&q)?])
        }
        q => Err(Error::UnsupportedQuery(format!("{q} is not a braiding query"))),
    }
}

/// |EPR⟩^{⊗n} on the data registers and |EPR⟩^{⊗(m−1)} on the ancillas.
#[derive(Clone, Debug)]
pub struct HonestBraidingStrategy {
    n: usize,
    acg: AnticommutationGame,
    state: StateVector,
    registers: Vec<Vec<usize>>,
}

pub fn honest_braiding_strategy(n: usize, acg: &AnticommutationGame) -> Result<HonestBraidingStrategy> {
    let l = n + acg.epr_pairs - 1;
    if 2 * l > 24 {
        return Err(Error::Resource(format!("honest braiding strategy needs {} qubits", 2 * l)));
    }
    Ok(HonestBraidingStrategy {
        n,
        acg: acg.clone(),
        state: epr_state(l)?,
        registers: vec![(0..l).collect(), (l..2 * l).collect()],
    })
}

impl Strategy for HonestBraidingStrategy {
    fn players(&self) -> usize {
        2
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

/// 64-bit FNV-1a, used to derive per-query random streams.
fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Honest strategy mixed with a fixed random strategy through correlated
/// coins: each player holds one extra coin qubit, the coins are in
/// √(1−ε)|00⟩ + √ε|11⟩, coin 0 runs the honest strategy and coin 1 runs a
/// random shared state with every measurement conjugated by a Haar unitary
/// drawn per query. Every statistic is affine in ε.
#[derive(Clone, Debug)]
pub struct PerturbedBraidingStrategy {
    n: usize,
    acg: AnticommutationGame,
    seed: u64,
    epsilon: f64,
    state: StateVector,
    registers: Vec<Vec<usize>>,
}

pub fn perturbed_braiding_strategy(n: usize, acg: &AnticommutationGame, epsilon: f64, seed: u64) -> Result<PerturbedBraidingStrategy> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Precondition(format!("mixing level {epsilon} outside [0, 1]")));
    }
    let l = n + acg.epr_pairs - 1;
    if 2 * l + 2 > 24 {
        return Err(Error::Resource(format!("perturbed braiding strategy needs {} qubits", 2 * l + 2)));
    }
    let honest = epr_state(l)?;
    let bad = random::random_state(2 * l, &mut random::rng(seed, 1));
    let d = 1usize << l;
    let total = 2 * l + 2;
    let mut amps = vec![ZERO; 1usize << total];
    let (c0, c1) = ((1.0 - epsilon).sqrt(), epsilon.sqrt());
    for ia in 0..d {
        for ib in 0..d {
            let src = ia * d + ib;
            // layout: coin_A, A, coin_B, B
            let idx = |ca: usize, cb: usize| (((ca << l) | ia) << (l + 1)) | (cb << l) | ib;
            amps[idx(0, 0)] = honest.amplitudes()[src] * c0;
            amps[idx(1, 1)] = bad.amplitudes()[src] * c1;
        }
    }
    Ok(PerturbedBraidingStrategy {
        n,
        acg: acg.clone(),
        seed,
        epsilon,
        state: StateVector::new(total, amps)?,
        registers: vec![(0..l + 1).collect(), (l + 1..total).collect()],
    })
}

impl PerturbedBraidingStrategy {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Qubits of both players' data registers, first player first.
    pub fn data_qubits(&self) -> Vec<usize> {
        let l = self.registers[0].len();
        (1..1 + self.n).chain(l + 1..l + 1 + self.n).collect()
    }
}

/// |0⟩⟨0| ⊗ a + |1⟩⟨1| ⊗ b.
fn coin_block(a: &CMat, b: &CMat) -> CMat {
    let d = a.nrows();
    CMat::from_fn(2 * d, 2 * d, |i, j| match (i < d, j < d) {
        (true, true) => a[(i, j)],
        (false, false) => b[(i - d, j - d)],
        _ => ZERO,
    })
}

impl Strategy for PerturbedBraidingStrategy {
    fn players(&self) -> usize {
        2
    }
    fn state(&self) -> &StateVector {
        &self.state
    }
    fn register(&self, p: usize) -> &[usize] {
        &self.registers[p]
    }
    fn measurement(&self, _p: usize, q: &Query) -> Result<Measurement> {
        let honest = honest_share_measurement(self.n, &self.acg, q)?;
        let d = honest.dim();
        let u = random::haar_unitary(d, &mut random::rng(self.seed, 2u64.wrapping_add(fnv1a(&q.to_string()))));
        let ud = linalg::dagger(&u);
        let elements = honest.elements().iter().map(|e| coin_block(e, &linalg::mul3(&u, e, &ud))).collect();
        Measurement::new_unchecked(honest.labels().to_vec(), elements, crate::state::MeasurementKind::Projective)
    }
}

/// W^D(s) = 2^{−n} Σ_t (signed marginal of the answer to s in query (W, s, t))
/// on `player`'s register.
pub fn marginal_observable(strategy: &dyn Strategy, player: usize, basis: Basis, s: BitString) -> Result<CMat> {
    let n = s.len();
    let d = 1usize << strategy.register(player).len();
    let mut acc = linalg::zeros(d, d);
    for t in BitString::all(n) {
        let q = Query::basis(basis, s, t);
        let pos = slot_of(&q, s, false);
        let m = strategy.measurement(player, &q)?;
        if m.len() != 4 {
            return Err(Error::Validation(format!("query {q} answered with {} outcomes", m.len())));
        }
        let signs: Vec<f64> = (0..4).map(|k| if (k >> pos) & 1 == 1 { -1.0 } else { 1.0 }).collect();
        acc = linalg::add(&acc, &m.signed_sum(&signs));
    }
    Ok(linalg::scale(&acc, c64::new(1.0 / (1u64 << n) as f64, 0.0)))
}

/// The four residuals of the braiding analysis, per basis where they apply.
/// Consistency uses the observable convention D² = ½‖(S−T)ψ‖²; the others
/// compare operator products with D² = ‖(S−T)ψ‖².
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ResidualReport {
    pub consistency_x: f64,
    pub consistency_z: f64,
    pub linearity_x: f64,
    pub linearity_z: f64,
    pub anticommutation: f64,
    pub commutation: f64,
}

impl ResidualReport {
    pub fn entries(&self) -> [f64; 6] {
        [self.consistency_x, self.consistency_z, self.linearity_x, self.linearity_z, self.anticommutation, self.commutation]
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().cloned().fold(0.0, f64::max)
    }
}

struct Marginals {
    /// [basis][player][string]
    ops: [[Vec<CMat>; 2]; 2],
}

fn marginals(strategy: &dyn Strategy, n: usize) -> Result<Marginals> {
    let all: Vec<BitString> = BitString::all(n).collect();
    let build = |basis: Basis, player: usize| -> Result<Vec<CMat>> {
        all.par_iter().map(|s| marginal_observable(strategy, player, basis, *s)).collect()
    };
    Ok(Marginals { ops: [[build(Basis::X, 0)?, build(Basis::X, 1)?], [build(Basis::Z, 0)?, build(Basis::Z, 1)?]] })
}

fn apply(strategy: &dyn Strategy, player: usize, op: &CMat, v: &[c64]) -> Result<Vec<c64>> {
    linalg::apply_local(op, strategy.register(player), strategy.state().qubits(), v)
}

fn diff_norm_sqr(u: &[c64], v: &[c64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        pairwise_sum(v) / v.len() as f64
    }
}

/// Exact residuals of a strategy for the braiding test on n-bit strings.
pub fn residual_report(strategy: &dyn Strategy, n: usize) -> Result<ResidualReport> {
    if strategy.players() != 2 {
        return dim_err("residuals need a two-player strategy");
    }
    if n > RESIDUAL_LIMIT {
        return Err(Error::Resource(format!("exact residuals limited to n ≤ {RESIDUAL_LIMIT}")));
    }
    let m = marginals(strategy, n)?;
    let psi = strategy.state().amplitudes();
    let all: Vec<BitString> = BitString::all(n).collect();
    // W^A(s)ψ for each basis and string
    let mut on_a: Vec<Vec<Vec<c64>>> = Vec::new();
    for w in 0..2 {
        on_a.push(all.iter().map(|s| apply(strategy, 0, &m.ops[w][0][s.value() as usize], psi)).collect::<Result<_>>()?);
    }
    let mut consistency = [0.0; 2];
    let mut linearity = [0.0; 2];
    for w in 0..2 {
        let c: Vec<f64> = all
            .iter()
            .map(|s| {
                let vb = apply(strategy, 1, &m.ops[w][1][s.value() as usize], psi)?;
                Ok(0.5 * diff_norm_sqr(&on_a[w][s.value() as usize], &vb))
            })
            .collect::<Result<_>>()?;
        consistency[w] = mean(&c);
        let pairs: Vec<(BitString, BitString)> = all.iter().flat_map(|a| all.iter().map(move |b| (*a, *b))).collect();
        let l: Vec<f64> = pairs
            .par_iter()
            .map(|(a, b)| {
                let prod = apply(strategy, 0, &m.ops[w][0][a.value() as usize], &on_a[w][b.value() as usize])?;
                Ok(diff_norm_sqr(&prod, &on_a[w][(*a + *b).value() as usize]))
            })
            .collect::<Result<_>>()?;
        linearity[w] = mean(&l);
    }
    let mut anti = Vec::new();
    let mut comm = Vec::new();
    for a in &all {
        for b in &all {
            // X(a)Z(b)ψ and Z(b)X(a)ψ
            let xz = apply(strategy, 0, &m.ops[0][0][a.value() as usize], &on_a[1][b.value() as usize])?;
            let zx = apply(strategy, 0, &m.ops[1][0][b.value() as usize], &on_a[0][a.value() as usize])?;
            if a.dot(b) {
                let s: Vec<c64> = xz.iter().zip(&zx).map(|(p, q)| p + q).collect();
                anti.push(linalg::norm_sqr(&s));
            } else {
                comm.push(diff_norm_sqr(&xz, &zx));
            }
        }
    }
    Ok(ResidualReport {
        consistency_x: consistency[0],
        consistency_z: consistency[1],
        linearity_x: linearity[0],
        linearity_z: linearity[1],
        anticommutation: mean(&anti),
        commutation: mean(&comm),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractionDiagnostics {
    /// max over all pairs of |P(a,b)P(a',b') − (−1)^{a'·b}P(a+a',b+b')|.
    pub braiding_violation: f64,
    /// E_a D(P(a,0), X^A(a) ⊗ I)², observable convention.
    pub consistency_x: f64,
    /// E_b D(P(0,b), Z^A(b) ⊗ I)², observable convention.
    pub consistency_z: f64,
    /// E_{a,b} D(D(a,b), C(a,b))² from the rounding step.
    pub rounding_distance: f64,
    /// Linearity defect of C over Z_2^{2n}.
    pub joint_defect: f64,
}

/// Exactly braiding operators P^A(a,b) = D(a,b) ⊗ σ_X(a)σ_Z(b) for the first
/// player. D acts on [A, A', ancilla]; the Pauli part acts on A''.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub n: usize,
    /// D(a,b) indexed by the 2n-bit string a‖b.
    pub d_family: ObservableFamily,
    /// ψ ⊗ |EPR⟩^{⊗n}_{A'A''} ⊗ |0…0⟩_anc, qubits ordered as
    /// [ψ][A'][A''][anc].
    pub state: StateVector,
    /// Positions of A, A', A'' and the ancilla in `state`.
    pub a_qubits: Vec<usize>,
    pub a1_qubits: Vec<usize>,
    pub a2_qubits: Vec<usize>,
    pub anc_qubits: Vec<usize>,
    pub diagnostics: ExtractionDiagnostics,
}

impl Extraction {
    pub fn d(&self, a: BitString, b: BitString) -> &CMat {
        self.d_family.get(a.concat(&b))
    }

    /// Qubits on which D acts, in order.
    pub fn d_qubits(&self) -> Vec<usize> {
        self.a_qubits.iter().chain(&self.a1_qubits).chain(&self.anc_qubits).copied().collect()
    }

    /// P^A(a,b)|v⟩ for a vector on the extended state's qubits.
    pub fn apply_p(&self, a: BitString, b: BitString, v: &[c64]) -> Result<Vec<c64>> {
        let w = linalg::apply_local(self.d(a, b), &self.d_qubits(), self.state.qubits(), v)?;
        PauliWord::new(a, b, Sign::Plus)?.apply_amplitudes(&w, &self.a2_qubits, self.state.qubits())
    }
}

/// Runs the extraction on the first player of `strategy`.
pub fn extract_exact_paulis(strategy: &dyn Strategy, n: usize) -> Result<Extraction> {
    if n > EXTRACTION_LIMIT {
        return Err(Error::Resource(format!("extraction limited to n ≤ {EXTRACTION_LIMIT}")));
    }
    let m = marginals(strategy, n)?;
    let reg_a = strategy.register(0).to_vec();
    let ka = reg_a.len();
    let all: Vec<BitString> = BitString::all(n).collect();
    // X'(a) = X^A(a) ⊗ σ_X(a)_{A'}, Z'(b) = Z^A(b) ⊗ σ_Z(b)_{A'}
    let xp: Vec<CMat> = all.iter().map(|a| Ok(linalg::kron(&m.ops[0][0][a.value() as usize], &pauli_dense(&PauliWord::x_type(*a))?))).collect::<Result<_>>()?;
    let zp: Vec<CMat> = all.iter().map(|b| Ok(linalg::kron(&m.ops[1][0][b.value() as usize], &pauli_dense(&PauliWord::z_type(*b))?))).collect::<Result<_>>()?;
    let mut members = Vec::with_capacity(all.len() * all.len());
    for a in &all {
        for b in &all {
            members.push(joint_observable_matrix(&xp[a.value() as usize], &zp[b.value() as usize], DEFAULT_KERNEL_TOL)?);
        }
    }
    let c_family = ObservableFamily::new(2 * n, members)?;
    let rho_a = strategy.state().reduced(&reg_a)?;
    let rho_aa1 = rho_a.tensor(&DensityMatrix::maximally_mixed(n));
    let joint_defect = crate::linearity::linearity_defect(&c_family, &rho_aa1)?;
    let rounding = blr_round(&c_family, &rho_aa1)?;
    let anc = rounding.state.qubits() - ka - n;

    let psi = strategy.state();
    let extended = psi.tensor(&epr_state(n)?).tensor(&StateVector::basis(anc, 0));
    let q = psi.qubits();
    let a1: Vec<usize> = (q..q + n).collect();
    let a2: Vec<usize> = (q + n..q + 2 * n).collect();
    let ancq: Vec<usize> = (q + 2 * n..q + 2 * n + anc).collect();
    let ext = Extraction {
        n,
        d_family: rounding.family,
        state: extended,
        a_qubits: reg_a,
        a1_qubits: a1,
        a2_qubits: a2,
        anc_qubits: ancq,
        diagnostics: ExtractionDiagnostics {
            braiding_violation: 0.0,
            consistency_x: 0.0,
            consistency_z: 0.0,
            rounding_distance: rounding.avg_sq_distance,
            joint_defect,
        },
    };
    let braiding_violation = braiding_violation(&ext)?;
    let total = ext.state.qubits();
    let v = ext.state.amplitudes();
    let zero = BitString::zeros(n);
    let cons = |basis: usize| -> Result<f64> {
        let vals: Vec<f64> = all
            .iter()
            .map(|s| {
                let (a, b) = if basis == 0 { (*s, zero) } else { (zero, *s) };
                let pv = ext.apply_p(a, b, v)?;
                let wv = linalg::apply_local(&m.ops[basis][0][s.value() as usize], &ext.a_qubits, total, v)?;
                Ok(0.5 * diff_norm_sqr(&pv, &wv))
            })
            .collect::<Result<_>>()?;
        Ok(mean(&vals))
    };
    let consistency_x = cons(0)?;
    let consistency_z = cons(1)?;
    let mut ext = ext;
    ext.diagnostics.braiding_violation = braiding_violation;
    ext.diagnostics.consistency_x = consistency_x;
    ext.diagnostics.consistency_z = consistency_z;
    Ok(ext)
}

/// Checks P(a,b)P(a',b') = (−1)^{a'·b}P(a+a',b+b') for all pairs. The D
/// part is compared densely, the Pauli part through the multiplication law.
pub fn braiding_violation(ext: &Extraction) -> Result<f64> {
    let n = ext.n;
    let all: Vec<BitString> = BitString::all(n).collect();
    let mut quads = Vec::with_capacity(all.len().pow(4));
    for &a in &all {
        for &b in &all {
            for &c in &all {
                for &d in &all {
                    quads.push((a, b, c, d));
                }
            }
        }
    }
    let vals: Vec<f64> = quads
        .par_iter()
        .map(|&(a, b, a2, b2)| {
            let p = PauliWord::new(a, b, Sign::Plus)?;
            let q = PauliWord::new(a2, b2, Sign::Plus)?;
            let prod = pauli_multiply(&p, &q)?;
            let expected = PauliWord::new(a + a2, b + b2, Sign::from_negative(a2.dot(&b)))?;
            let sign_err = if prod == expected { 0.0 } else { 2.0 };
            let dd = linalg::mul(ext.d(a, b), ext.d(a2, b2));
            Ok(linalg::max_abs_diff(&dd, ext.d(a + a2, b + b2)).max(sign_err))
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct EprWitness {
    pub witness: f64,
    pub fidelity_bound: f64,
    pub fidelity_exact: f64,
}

/// 2^{−n} Σ_{P∈{X,Z}^n} Tr((σ_P ⊗ σ_P)ρ) and the exact overlap with
/// |EPR⟩^{⊗n}, for ρ on 2n qubits split as A|B.
pub fn epr_witness(rho: &DensityMatrix, n: usize) -> Result<EprWitness> {
    if rho.qubits() != 2 * n || n == 0 {
        return dim_err(format!("witness for n = {n} on a {}-qubit state", rho.qubits()));
    }
    let mut terms = Vec::with_capacity(1 << n);
    for mask in BitString::all(n) {
        // positions with a 1 in `mask` carry σ_Z, the others σ_X
        let x = mask.concat(&mask);
        let xs = BitString::ones(2 * n) + x;
        let p = PauliWord::new(xs, x, Sign::Plus)?;
        terms.push(rho.expectation(&pauli_dense(&p)?)?.re);
    }
    let witness = pairwise_sum(&terms) / terms.len() as f64;
    let epr = epr_state(n)?;
    let v = linalg::mat_vec(rho.matrix(), epr.amplitudes());
    let fidelity_exact = linalg::inner(epr.amplitudes(), &v).re;
    Ok(EprWitness { witness, fidelity_bound: witness, fidelity_exact })
}

/// One row of a perturbation sweep.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub game_value: f64,
    pub consistency_x: f64,
    pub consistency_z: f64,
    pub linearity_x: f64,
    pub linearity_z: f64,
    pub anticomm: f64,
    pub comm: f64,
    pub epr_fidelity: f64,
    pub epr_witness: f64,
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "epsilon",
    "game_value",
    "consistency_x",
    "consistency_z",
    "linearity_x",
    "linearity_z",
    "anticomm",
    "comm",
    "epr_fidelity",
    "epr_witness",
];

impl SweepRow {
    pub fn values(&self) -> [f64; 10] {
        [
            self.epsilon,
            self.game_value,
            self.consistency_x,
            self.consistency_z,
            self.linearity_x,
            self.linearity_z,
            self.anticomm,
            self.comm,
            self.epr_fidelity,
            self.epr_witness,
        ]
    }
}

/// Evaluates the perturbed strategy at one mixing level. The perturbation
/// (random state and unitaries) depends only on `seed`, so rows for
/// different ε belong to the same family.
pub fn sweep_point(game: &NonlocalGame, n: usize, acg: &AnticommutationGame, epsilon: f64, seed: u64) -> Result<SweepRow> {
    let s = perturbed_braiding_strategy(n, acg, epsilon, seed)?;
    let game_value = game_value_exact(game, &s)?;
    let r = residual_report(&s, n)?;
    let rho = s.state().reduced(&s.data_qubits())?;
    let w = epr_witness(&rho, n)?;
    Ok(SweepRow {
        epsilon,
        game_value,
        consistency_x: r.consistency_x,
        consistency_z: r.consistency_z,
        linearity_x: r.linearity_x,
        linearity_z: r.linearity_z,
        anticomm: r.anticommutation,
        comm: r.commutation,
        epr_fidelity: w.fidelity_exact,
        epr_witness: w.witness,
    })
}

pub fn sweep(n: usize, acg: &AnticommutationGame, epsilons: &[f64], seed: u64) -> Result<Vec<SweepRow>> {
    if epsilons.is_empty() {
        return Err(Error::Precondition("empty epsilon grid".into()));
    }
    let game = braiding_game(n, acg)?;
    epsilons.par_iter().map(|&e| sweep_point(&game, n, acg, e, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acgame::{chsh_game, magic_square_game};

    #[test]
    fn honest_values_match_omega_enc() {
        for (acg, _) in [chsh_game().unwrap(), magic_square_game().unwrap()] {
            let g = braiding_game(1, &acg).unwrap();
            let s = honest_braiding_strategy(1, &acg).unwrap();
            let v = game_value_exact(&g, &s).unwrap();
            assert!((v - omega_enc(&acg)).abs() < 1e-10, "{}: {v}", acg.kind.name());
        }
    }

    #[test]
    fn honest_residuals_vanish() {
        let (acg, _) = chsh_game().unwrap();
        let s = honest_braiding_strategy(2, &acg).unwrap();
        let r = residual_report(&s, 2).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
    }

    #[test]
    fn witness_examples() {
        let w = epr_witness(&DensityMatrix::from_pure(&epr_state(2).unwrap()), 2).unwrap();
        assert!((w.witness - 1.0).abs() < 1e-12 && (w.fidelity_exact - 1.0).abs() < 1e-12);
        let w = epr_witness(&DensityMatrix::maximally_mixed(2), 1).unwrap();
        assert!(w.witness.abs() < 1e-12 && (w.fidelity_exact - 0.25).abs() < 1e-12);
    }

    /// Honest strategy with every Z-query answered as the X-query on the
    /// same strings.
    struct ZAsX(HonestBraidingStrategy);

    impl Strategy for ZAsX {
        fn players(&self) -> usize {
            2
        }
        fn state(&self) -> &StateVector {
            self.0.state()
        }
        fn register(&self, p: usize) -> &[usize] {
            self.0.register(p)
        }
        fn measurement(&self, p: usize, q: &Query) -> Result<Measurement> {
            match q {
                Query::Basis { basis: Basis::Z, first, second } => {
                    self.0.measurement(p, &Query::Basis { basis: Basis::X, first: *first, second: *second })
                }
                q => self.0.measurement(p, q),
            }
        }
    }

    #[test]
    fn z_replaced_by_x_gives_anticommutation_four() {
        let (acg, _) = chsh_game().unwrap();
        for n in 1..=2 {
            let s = ZAsX(honest_braiding_strategy(n, &acg).unwrap());
            let r = residual_report(&s, n).unwrap();
            // X(a)X(b) + X(b)X(a) = 2X(a+b) on the state
            assert!((r.anticommutation - 4.0).abs() < 1e-10, "{r:?}");
            assert!(r.commutation < 1e-10 && r.linearity_z < 1e-10);
        }
    }

    #[test]
    fn marginals_are_player_symmetric() {
        for (acg, _) in [chsh_game().unwrap(), magic_square_game().unwrap()] {
            let g = braiding_game(1, &acg).unwrap();
            let (m0, m1) = (g.marginal_queries(0), g.marginal_queries(1));
            assert_eq!(m0.keys().collect::<Vec<_>>(), m1.keys().collect::<Vec<_>>());
            for (q, w) in &m0 {
                assert!((w - m1[q]).abs() < 1e-14, "{q}: {w} vs {}", m1[q]);
            }
        }
    }

    #[test]
    fn honest_extraction_is_exact() {
        for (acg, _) in [chsh_game().unwrap(), magic_square_game().unwrap()] {
            let s = honest_braiding_strategy(1, &acg).unwrap();
            let e = extract_exact_paulis(&s, 1).unwrap();
            let d = &e.diagnostics;
            assert!(d.braiding_violation < 1e-8, "{d:?}");
            assert!(d.consistency_x < 1e-8 && d.consistency_z < 1e-8, "{d:?}");
        }
    }

    #[test]
    fn perturbed_extraction_still_braids() {
        let (acg, _) = chsh_game().unwrap();
        let s = perturbed_braiding_strategy(1, &acg, 0.2, 5).unwrap();
        let e = extract_exact_paulis(&s, 1).unwrap();
        assert!(e.diagnostics.braiding_violation < 1e-8);
        assert!(e.diagnostics.consistency_x > 1e-6);
    }

    #[test]
    fn perturbed_at_zero_is_honest() {
        let (acg, _) = magic_square_game().unwrap();
        let g = braiding_game(1, &acg).unwrap();
        let row = sweep_point(&g, 1, &acg, 0.0, 3).unwrap();
        assert!((row.game_value - 1.0).abs() < 1e-10);
        assert!(row.values()[2..8].iter().all(|&v| v < 1e-10), "{row:?}");
        assert!((row.epr_fidelity - 1.0).abs() < 1e-10 && (row.epr_witness - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sweep_is_monotone_and_reproducible() {
        let (acg, _) = chsh_game().unwrap();
        let eps = [0.0, 0.1, 0.3, 0.6, 1.0];
        let rows = sweep(1, &acg, &eps, 11).unwrap();
        for w in rows.windows(2) {
            let (a, b) = (w[0].values(), w[1].values());
            assert!(b[1] <= a[1] + 1e-12, "game value rose: {a:?} -> {b:?}");
            for k in 2..8 {
                assert!(b[k] >= a[k] - 1e-12, "column {k} fell: {a:?} -> {b:?}");
            }
            assert!(b[8] <= a[8] + 1e-12);
        }
        assert_eq!(rows, sweep(1, &acg, &eps, 11).unwrap());
    }
}
