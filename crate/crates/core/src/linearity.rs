//! The two-player linearity test, the linearity defect of an observable
//! family and the exact rounding to a linear family.

use rand::Rng;
use rayon::prelude::*;

use crate::bits::BitString;
use crate::error::{dim_err, Error, Result};
use crate::game::{pairwise_sum, BitRef, Check, NonlocalGame, Query, QuestionTuple, Slot, Strategy};
use crate::linalg::{self, c64, CMat};
use crate::pauli::{pauli_dense, PauliWord};
use crate::state::{epr_state, DensityMatrix, Measurement, NaimarkDilation, StateVector, TOL_CONSTRUCTION};

/// Largest n for exact enumeration of the 4^n pairs in `linearity_defect`.
pub const EXACT_DEFECT_LIMIT: usize = 6;
/// Largest n for `blr_round`.
pub const ROUNDING_LIMIT: usize = 4;

/// Observables A(a) indexed by n-bit strings, on a common space.
#[derive(Clone, Debug)]
pub struct ObservableFamily {
    n: usize,
    members: Vec<CMat>,
}

impl ObservableFamily {
    /// `members[a.value()]` is A(a).
    pub fn new(n: usize, members: Vec<CMat>) -> Result<Self> {
        let fam = Self::new_unchecked(n, members)?;
        for (i, m) in fam.members.iter().enumerate() {
            let herm = linalg::hermitian_defect(m);
            let sq = linalg::max_abs_diff(&linalg::mul(m, m), &linalg::identity(m.nrows()));
            if herm > TOL_CONSTRUCTION || sq > TOL_CONSTRUCTION {
                return Err(Error::Numeric(format!("member {i} is not an observable (hermitian {herm:e}, square {sq:e})")));
            }
        }
        Ok(fam)
    }

    fn new_unchecked(n: usize, members: Vec<CMat>) -> Result<Self> {
        if members.len() != 1usize << n {
            return dim_err(format!("{} members for n = {n}", members.len()));
        }
        let d = members[0].nrows();
        if members.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return dim_err("family members differ in dimension");
        }
        Ok(Self { n, members })
    }

    pub fn from_fn(n: usize, f: impl Fn(BitString) -> CMat) -> Result<Self> {
        Self::new(n, BitString::all(n).map(f).collect())
    }

    /// σ_W(a) on n qubits for W given by `word`.
    pub fn pauli(n: usize, word: impl Fn(BitString) -> PauliWord) -> Result<Self> {
        Self::from_fn(n, |a| pauli_dense(&word(a)).expect("dense Pauli within limit"))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.members[0].nrows()
    }

    pub fn get(&self, a: BitString) -> &CMat {
        &self.members[a.value() as usize]
    }

    pub fn members(&self) -> &[CMat] {
        &self.members
    }

    /// Largest |A(a)A(b) − A(a+b)| over all pairs.
    pub fn linearity_violation(&self) -> f64 {
        let all: Vec<BitString> = BitString::all(self.n).collect();
        let mut worst = 0.0f64;
        for a in &all {
            for b in &all {
                let lhs = linalg::mul(self.get(*a), self.get(*b));
                worst = worst.max(linalg::max_abs_diff(&lhs, self.get(*a + *b)));
            }
        }
        worst
    }
}

fn check_dims(fam: &ObservableFamily, rho: &DensityMatrix) -> Result<()> {
    if fam.dim() != rho.dim() {
        return dim_err(format!("family of dimension {} against state of dimension {}", fam.dim(), rho.dim()));
    }
    Ok(())
}

fn triple(fam: &ObservableFamily, rho: &DensityMatrix, a: BitString, b: BitString) -> f64 {
    let left = linalg::mul(fam.get(a), fam.get(b));
    let right = linalg::mul(fam.get(a + b), rho.matrix());
    linalg::trace_product(&left, &right).re
}

/// E_{a,b} Re Tr(ρ A(a)A(b)A(a+b)), by enumeration.
pub fn triple_product(fam: &ObservableFamily, rho: &DensityMatrix) -> Result<f64> {
    check_dims(fam, rho)?;
    if fam.n > EXACT_DEFECT_LIMIT {
        return Err(Error::Resource(format!("exact defect limited to n ≤ {EXACT_DEFECT_LIMIT}")));
    }
    let all: Vec<BitString> = BitString::all(fam.n).collect();
    let pairs: Vec<(BitString, BitString)> = all.iter().flat_map(|a| all.iter().map(move |b| (*a, *b))).collect();
    let vals: Vec<f64> = pairs.par_iter().map(|(a, b)| triple(fam, rho, *a, *b)).collect();
    Ok(pairwise_sum(&vals) / vals.len() as f64)
}

/// δ = 1 − E_{a,b} Re Tr(ρ A(a)A(b)A(a+b)).
pub fn linearity_defect(fam: &ObservableFamily, rho: &DensityMatrix) -> Result<f64> {
    Ok(1.0 - triple_product(fam, rho)?)
}

/// Monte Carlo estimate of the defect and its standard error.
pub fn linearity_defect_sampled(fam: &ObservableFamily, rho: &DensityMatrix, samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_dims(fam, rho)?;
    if samples == 0 {
        return Err(Error::Precondition("samples must be positive".into()));
    }
    let mut rng = crate::random::rng(seed, 0);
    let top = 1u64 << fam.n;
    let draws: Vec<(BitString, BitString)> = (0..samples)
        .map(|_| (BitString::from_value(fam.n, rng.gen_range(0..top)), BitString::from_value(fam.n, rng.gen_range(0..top))))
        .collect();
    let vals: Vec<f64> = draws.par_iter().map(|(a, b)| 1.0 - triple(fam, rho, *a, *b)).collect();
    let mean = pairwise_sum(&vals) / samples as f64;
    let sq: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if samples > 1 { pairwise_sum(&sq) / (samples - 1) as f64 } else { 0.0 };
    Ok((mean, (var / samples as f64).sqrt()))
}

/// Fourier operators Â^u = E_a (−1)^{a·u} A(a), indexed by u.
pub fn fourier(fam: &ObservableFamily) -> Vec<CMat> {
    let all: Vec<BitString> = BitString::all(fam.n).collect();
    let inv = 1.0 / all.len() as f64;
    all.iter()
        .map(|u| {
            let mut acc = linalg::zeros(fam.dim(), fam.dim());
            for a in &all {
                let s = if a.dot(u) { -inv } else { inv };
                acc = linalg::add(&acc, &linalg::scale(fam.get(*a), c64::new(s, 0.0)));
            }
            acc
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Rounding {
    /// Exactly linear family on system ⊗ ancilla.
    pub family: ObservableFamily,
    /// ρ ⊗ |0…0⟩⟨0…0|.
    pub state: DensityMatrix,
    /// E_a D_{ρ'}(𝒜(a), A(a))² with D² = ½Tr(ρ'(𝒜(a) − A(a))²).
    pub avg_sq_distance: f64,
    /// max |Σ_u B^u − I|.
    pub parseval_defect: f64,
    /// Σ_u Re Tr_ρ((Â^u)³).
    pub fourier_cubes: f64,
}

/// Rounds a family to an exactly linear one through the Fourier POVM
/// B^u = (Â^u)² and its Naimark dilation.
pub fn blr_round(fam: &ObservableFamily, rho: &DensityMatrix) -> Result<Rounding> {
    check_dims(fam, rho)?;
    if fam.n > ROUNDING_LIMIT {
        return Err(Error::Resource(format!("rounding limited to n ≤ {ROUNDING_LIMIT}")));
    }
    let hats = fourier(fam);
    let povm: Vec<CMat> = hats.iter().map(|h| linalg::hermitize(&linalg::mul(h, h))).collect();
    let d = fam.dim();
    let mut total = linalg::zeros(d, d);
    for b in &povm {
        total = linalg::add(&total, b);
    }
    let parseval_defect = linalg::max_abs_diff(&total, &linalg::identity(d));
    let fourier_cubes = hats.iter().map(|h| linalg::trace_product(&linalg::mul(h, h), &linalg::mul(h, rho.matrix())).re).sum();
    let m = Measurement::povm(povm)?;
    let dil = NaimarkDilation::new(&m)?;
    let all: Vec<BitString> = BitString::all(fam.n).collect();
    let members: Vec<CMat> = all
        .iter()
        .map(|a| {
            let signs: Vec<f64> = all.iter().map(|u| if u.dot(a) { -1.0 } else { 1.0 }).collect();
            linalg::hermitize(&dil.weighted(&signs))
        })
        .collect();
    let family = ObservableFamily::new(fam.n, members)?;
    let state = rho.with_ancilla(dil.anc_qubits());
    let anc_id = linalg::identity(1usize << dil.anc_qubits());
    let dists: Vec<f64> = all
        .iter()
        .map(|a| {
            let lifted = linalg::kron(fam.get(*a), &anc_id);
            Ok(0.5 * crate::state::operator_distance_sq(&state, family.get(*a), &lifted)?)
        })
        .collect::<Result<_>>()?;
    let avg_sq_distance = pairwise_sum(&dists) / dists.len() as f64;
    Ok(Rounding { family, state, avg_sq_distance, parseval_defect, fourier_cubes })
}

/// Answer position of string `s` within pair query `q`; when both strings
/// are equal, `second` selects the later slot.
pub(crate) fn slot_of(q: &Query, s: BitString, second: bool) -> u8 {
    match q.pair() {
        Some((f, g)) if f == g => u8::from(second),
        _ => q.position_of(&s).expect("string belongs to the query"),
    }
}

/// Question tuples of the linearity test with queries built by `make`,
/// scaled by `weight`.
/// `alice_labels` lists the players that may be labelled Alice, each
/// equally likely.
pub(crate) fn linearity_tuples(
    n: usize,
    weight: f64,
    subtest: usize,
    alice_labels: &[usize],
    make: &dyn Fn(BitString, BitString) -> Query,
) -> Result<Vec<QuestionTuple>> {
    if 3 * n > 20 {
        return Err(Error::Resource(format!("8^{n} linearity questions exceed the enumeration limit")));
    }
    let all: Vec<BitString> = BitString::all(n).collect();
    let w = weight / (alice_labels.len() as f64 * 3.0 * (all.len() as f64).powi(3));
    let mut out = Vec::new();
    for &alice in alice_labels {
        let bob = 1 - alice;
        for &a in &all {
            for &b in &all {
                let qa = make(a, b);
                let ia = slot_of(&qa, a, false);
                let ib = slot_of(&qa, b, true);
                for choice in 0..3 {
                    let c = [a, b, a + b][choice];
                    for &cp in &all {
                        let qb = make(c, cp);
                        let ic = slot_of(&qb, c, false);
                        let mut bits = vec![BitRef::new(bob, ic)];
                        match choice {
                            0 => bits.push(BitRef::new(alice, ia)),
                            1 => bits.push(BitRef::new(alice, ib)),
                            _ => {
                                bits.push(BitRef::new(alice, ia));
                                bits.push(BitRef::new(alice, ib));
                            }
                        }
                        // Duplicate references (a = b in the product check) cancel in the XOR.
                        let check = if bits.len() == 3 && bits[1] == bits[2] {
                            Check::parity(vec![bits[0]], false)?
                        } else {
                            Check::parity(bits, false)?
                        };
                        let mut slots = vec![Slot::Ask(qa.clone()), Slot::Ask(qb.clone())];
                        if alice == 1 {
                            slots.swap(0, 1);
                        }
                        out.push(QuestionTuple { weight: w, slots, check, subtest });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The two-player linearity test on n-bit strings.
pub fn linearity_game(n: usize) -> Result<NonlocalGame> {
    if n == 0 {
        return Err(Error::Precondition("linearity game needs n ≥ 1".into()));
    }
    if 6 * n > 20 {
        return Err(Error::Resource(format!("linearity game with n = {n} exceeds the enumeration limit")));
    }
    let tuples = linearity_tuples(n, 1.0, 0, &[0, 1], &|s, t| Query::linear(s, t))?;
    NonlocalGame::new(format!("linearity-{n}"), 2, tuples, vec!["linearity".into()])
}

/// Joint measurement of two commuting observables, answer bit 0 for the first.
pub fn pair_measurement(p: &PauliWord, q: &PauliWord) -> Result<Measurement> {
    Measurement::from_commuting(&[pauli_dense(p)?, pauli_dense(q)?])
}

/// Both players share |EPR⟩^{⊗n} and answer (s, t) with σ_Z(s), σ_Z(t).
#[derive(Clone, Debug)]
pub struct HonestLinearityStrategy {
    state: StateVector,
    registers: Vec<Vec<usize>>,
}

impl HonestLinearityStrategy {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self { state: epr_state(n)?, registers: vec![(0..n).collect(), (n..2 * n).collect()] })
    }
}

impl Strategy for HonestLinearityStrategy {
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
        match q {
            Query::Linear { first, second } => pair_measurement(&PauliWord::z_type(*first), &PauliWord::z_type(*second)),
            q => Err(Error::UnsupportedQuery(format!("{q} is not a linearity query"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MarginalFamily {
    /// A(a) on the first player's register ⊗ one ancilla qubit.
    pub family: ObservableFamily,
    /// Reduced state of the first player ⊗ |0⟩⟨0|.
    pub state: DensityMatrix,
    /// E_{a,b} Re Tr_{ρ'}(A(a)A(b)A(a+b)).
    pub triple_product: f64,
}

/// Marginalizes the first player's linearity answers over the partner
/// string, dilates each marginal and returns the resulting observables.
pub fn marginalize_strategy(strategy: &dyn Strategy, n: usize) -> Result<MarginalFamily> {
    let all: Vec<BitString> = BitString::all(n).collect();
    let reg = strategy.register(0).to_vec();
    let rho = strategy.state().reduced(&reg)?;
    let d = 1usize << reg.len();
    let mut members = Vec::with_capacity(all.len());
    let mut anc = 0;
    for &a in &all {
        let mut plus = linalg::zeros(d, d);
        for &b in &all {
            let q = Query::linear(a, b);
            let m = strategy.measurement(0, &q)?;
            if m.len() != 4 {
                return Err(Error::Validation(format!("query {q} answered with {} outcomes", m.len())));
            }
            let pos = slot_of(&q, a, false);
            for (k, e) in m.elements().iter().enumerate() {
                if (k >> pos) & 1 == 0 {
                    plus = linalg::add(&plus, e);
                }
            }
        }
        plus = linalg::scale(&plus, c64::new(1.0 / all.len() as f64, 0.0));
        let minus = linalg::sub(&linalg::identity(d), &plus);
        let dil = NaimarkDilation::new(&Measurement::povm(vec![linalg::hermitize(&plus), linalg::hermitize(&minus)])?)?;
        anc = dil.anc_qubits();
        members.push(linalg::hermitize(&dil.weighted(&[1.0, -1.0])));
    }
    let family = ObservableFamily::new(n, members)?;
    let state = rho.with_ancilla(anc);
    let tp = triple_product(&family, &state)?;
    Ok(MarginalFamily { family, state, triple_product: tp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::game_value_exact;

    #[test]
    fn pauli_families_are_linear() {
        let fam = ObservableFamily::pauli(2, PauliWord::x_type).unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(linearity_defect(&fam, &rho).unwrap().abs() < 1e-12);
        assert!(fam.linearity_violation() < 1e-12);
    }

    #[test]
    fn honest_linearity_value_is_one() {
        for n in 1..=2 {
            let g = linearity_game(n).unwrap();
            let v = game_value_exact(&g, &HonestLinearityStrategy::new(n).unwrap()).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "n={n}: {v}");
        }
    }

    #[test]
    fn rounding_is_linear_and_close() {
        let mut rng = crate::random::rng(7, 0);
        for trial in 0..5 {
            let n = 1 + trial % 3;
            let base = ObservableFamily::pauli(n, PauliWord::z_type).unwrap();
            let members = base
                .members()
                .iter()
                .map(|m| {
                    let v = crate::random::near_identity_unitary(m.nrows(), 0.3, &mut rng);
                    linalg::hermitize(&linalg::mul3(&v, m, &linalg::dagger(&v)))
                })
                .collect();
            let fam = ObservableFamily::new(n, members).unwrap();
            let rho = crate::random::random_density(n, &mut rng);
            let delta = linearity_defect(&fam, &rho).unwrap();
            let r = blr_round(&fam, &rho).unwrap();
            assert!(r.family.linearity_violation() < 1e-9);
            assert!(r.parseval_defect < 1e-10);
            assert!(r.avg_sq_distance <= delta + 1e-8, "{} > {delta}", r.avg_sq_distance);
            assert!((r.fourier_cubes - (1.0 - delta)).abs() < 1e-10);
        }
    }

    #[test]
    fn tuple_count_matches_sampler_support() {
        assert_eq!(linearity_game(1).unwrap().question_count(), 2 * 4 * 3 * 2);
    }
}
