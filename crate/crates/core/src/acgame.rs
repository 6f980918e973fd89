//! The two shipped anticommutation games, CHSH and the Magic Square, with
//! their honest strategies and the completeness checks for them.

use std::sync::Arc;

use serde::Serialize;

use crate::bits::BitString;
use crate::error::{dim_err, Error, Result};
use crate::game::{game_value_exact, BitRef, Check, NonlocalGame, Query, QuestionTuple, Role, Slot, Strategy};
use crate::linalg::{self, c64, CMat};
use crate::pauli::{pauli_dense, PauliWord};
#[cfg(test)]
use crate::pauli::pauli_multiply;
use crate::state::{epr_state, Measurement, StateVector};

/// Real combination of Pauli words.
pub type PauliSum = Vec<(f64, PauliWord)>;

pub fn pauli_sum_dense(s: &PauliSum) -> Result<CMat> {
    let n = s.first().map(|(_, p)| p.n()).ok_or_else(|| Error::Precondition("empty Pauli sum".into()))?;
    let d = 1usize << n;
    let mut acc = linalg::zeros(d, d);
    for (c, p) in s {
        acc = linalg::add(&acc, &linalg::scale(&pauli_dense(p)?, c64::new(*c, 0.0)));
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AcKind {
    Chsh,
    MagicSquare,
}

impl AcKind {
    pub fn name(self) -> &'static str {
        match self {
            AcKind::Chsh => "chsh",
            AcKind::MagicSquare => "magic-square",
        }
    }
}

impl std::str::FromStr for AcKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chsh" => Ok(AcKind::Chsh),
            "magic-square" | "magic_square" => Ok(AcKind::MagicSquare),
            _ => Err(Error::Validation(format!("unknown anticommutation game {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AcQuestion {
    pub first: usize,
    pub second: usize,
    pub weight: f64,
    /// Acceptance table over the first player's bits followed by the second's.
    pub table: Arc<Vec<f64>>,
}

/// A two-player game whose honest strategy contains σ_X ⊗ I and σ_Z ⊗ I on
/// the second player's side.
#[derive(Clone, Debug)]
pub struct AnticommutationGame {
    pub kind: AcKind,
    pub game: NonlocalGame,
    pub questions: Vec<AcQuestion>,
    pub first_bits: usize,
    pub second_bits: usize,
    pub second_questions: usize,
    pub q_x: usize,
    pub q_z: usize,
    /// ±1 value of each second-player outcome index.
    pub f_x: Vec<f64>,
    pub f_z: Vec<f64>,
    pub omega_g: f64,
    /// EPR pairs used by the honest strategy.
    pub epr_pairs: usize,
    /// Honest commuting observables per question, indexed by role.
    pub honest_first: Vec<Vec<PauliSum>>,
    pub honest_second: Vec<Vec<PauliSum>>,
}

impl AnticommutationGame {
    pub fn bits(&self, role: Role) -> usize {
        match role {
            Role::First => self.first_bits,
            Role::Second => self.second_bits,
        }
    }

    pub fn honest_observables(&self, role: Role, index: usize) -> Result<&[PauliSum]> {
        let list = match role {
            Role::First => &self.honest_first,
            Role::Second => &self.honest_second,
        };
        list.get(index).map(|v| v.as_slice()).ok_or_else(|| Error::UnsupportedQuery(format!("no question {index}")))
    }

    /// Second-player question distribution.
    pub fn second_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.second_questions];
        for q in &self.questions {
            m[q.second] += q.weight;
        }
        m
    }

    pub fn query(&self, role: Role, index: usize) -> Query {
        Query::Game { role, index, bits: self.bits(role) as u8 }
    }

    pub fn lifted_query(&self, role: Role, index: usize, a: BitString, b: BitString) -> Query {
        Query::Lifted { role, index, bits: self.bits(role) as u8, a, b }
    }

    /// Check for question pair `k` with the first player's bits read from
    /// `first` and the second player's from `second`.
    pub fn check(&self, k: usize, first: usize, second: usize) -> Result<Check> {
        let mut bits: Vec<BitRef> = (0..self.first_bits).map(|j| BitRef::new(first, j as u8)).collect();
        bits.extend((0..self.second_bits).map(|j| BitRef::new(second, j as u8)));
        Check::new(bits, self.questions[k].table.as_ref().clone())
    }

    /// The dense honest measurement for `role`/`index` on `epr_pairs` qubits.
    pub fn honest_measurement(&self, role: Role, index: usize) -> Result<Measurement> {
        let obs = self
            .honest_observables(role, index)?
            .iter()
            .map(pauli_sum_dense)
            .collect::<Result<Vec<_>>>()?;
        Measurement::from_commuting(&obs)
    }

    fn build(mut self, name: &str) -> Result<Self> {
        let tuples = (0..self.questions.len())
            .map(|k| {
                let q = &self.questions[k];
                Ok(QuestionTuple {
                    weight: q.weight,
                    slots: vec![Slot::Ask(self.query(Role::First, q.first)), Slot::Ask(self.query(Role::Second, q.second))],
                    check: self.check(k, 0, 1)?,
                    subtest: 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.game = NonlocalGame::new(name, 2, tuples, vec![name.to_string()])?;
        Ok(self)
    }
}

fn word(s: &str) -> PauliWord {
    s.parse().expect("static Pauli word")
}

fn placeholder_game() -> NonlocalGame {
    NonlocalGame { name: String::new(), players: 2, tuples: Vec::new(), subtests: Vec::new() }
}

/// Honest strategy of an anticommutation game on |EPR⟩^{⊗m}; both players
/// measure the game's honest observables for the role named in the query.
#[derive(Clone, Debug)]
pub struct AcHonestStrategy {
    acg: AnticommutationGame,
    state: StateVector,
    registers: Vec<Vec<usize>>,
}

impl AcHonestStrategy {
    pub fn new(acg: &AnticommutationGame) -> Result<Self> {
        let m = acg.epr_pairs;
        Ok(Self {
            acg: acg.clone(),
            state: epr_state(m)?,
            registers: vec![(0..m).collect(), (m..2 * m).collect()],
        })
    }

    pub fn game(&self) -> &AnticommutationGame {
        &self.acg
    }
}

impl Strategy for AcHonestStrategy {
    fn players(&self) -> usize {
        2
    }

    fn state(&self) -> &StateVector {
        &self.state
    }

    fn register(&self, player: usize) -> &[usize] {
        &self.registers[player]
    }

    fn measurement(&self, _player: usize, query: &Query) -> Result<Measurement> {
        match query {
            Query::Game { role, index, .. } => self.acg.honest_measurement(*role, *index),
            q => Err(Error::UnsupportedQuery(format!("{q} is not a question of {}", self.acg.kind.name()))),
        }
    }
}

/// CHSH: questions s, t uniform; accept iff a·b = (−1)^{s∧t}. The second
/// player measures σ_Z (t = 0) and σ_X (t = 1); the first player measures
/// (σ_Z ± σ_X)/√2.
pub fn chsh_game() -> Result<(AnticommutationGame, AcHonestStrategy)> {
    let mut questions = Vec::new();
    for s in 0..2usize {
        for t in 0..2usize {
            let want = s & t;
            let table = (0..4usize).map(|y| if ((y & 1) ^ (y >> 1)) == want { 1.0 } else { 0.0 }).collect();
            questions.push(AcQuestion { first: s, second: t, weight: 0.25, table: Arc::new(table) });
        }
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let acg = AnticommutationGame {
        kind: AcKind::Chsh,
        game: placeholder_game(),
        questions,
        first_bits: 1,
        second_bits: 1,
        second_questions: 2,
        q_x: 1,
        q_z: 0,
        f_x: vec![1.0, -1.0],
        f_z: vec![1.0, -1.0],
        omega_g: (std::f64::consts::PI / 8.0).cos().powi(2),
        epr_pairs: 1,
        honest_first: vec![
            vec![vec![(r, word("+X:0;Z:1")), (r, word("+X:1;Z:0"))]],
            vec![vec![(r, word("+X:0;Z:1")), (-r, word("+X:1;Z:0"))]],
        ],
        honest_second: vec![vec![vec![(1.0, word("+X:0;Z:1"))]], vec![vec![(1.0, word("+X:1;Z:0"))]]],
    }
    .build("chsh")?;
    let honest = AcHonestStrategy::new(&acg)?;
    Ok((acg, honest))
}

/// Observable grid of the Mermin–Peres square, row-major.
pub fn magic_square_grid() -> [[PauliWord; 3]; 3] {
    [
        [word("+X:10;Z:00"), word("+X:01;Z:00"), word("+X:11;Z:00")],
        [word("+X:00;Z:01"), word("+X:00;Z:10"), word("+X:00;Z:11")],
        [word("+X:10;Z:01"), word("+X:01;Z:10"), word("-X:11;Z:11")],
    ]
}

/// Cells of line `l`: rows 0..3, then columns 3..6.
pub fn magic_square_line(l: usize) -> [(usize, usize); 3] {
    if l < 3 {
        [(l, 0), (l, 1), (l, 2)]
    } else {
        let c = l - 3;
        [(0, c), (1, c), (2, c)]
    }
}

/// Magic Square: the first player gets one of six lines and answers its
/// three entries; the second gets a cell of that line. Rows and the first two
/// columns multiply to +1, the last column to −1.
pub fn magic_square_game() -> Result<(AnticommutationGame, AcHonestStrategy)> {
    let grid = magic_square_grid();
    let mut questions = Vec::new();
    for l in 0..6 {
        let parity = usize::from(l == 5);
        for (j, &(r, c)) in magic_square_line(l).iter().enumerate() {
            let table = (0..16usize)
                .map(|y| {
                    let first = y & 7;
                    let second = y >> 3;
                    let ok = (first.count_ones() as usize & 1) == parity && ((first >> j) & 1) == second;
                    if ok {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            questions.push(AcQuestion { first: l, second: 3 * r + c, weight: 1.0 / 18.0, table: Arc::new(table) });
        }
    }
    let honest_first = (0..6)
        .map(|l| magic_square_line(l).iter().map(|&(r, c)| vec![(1.0, grid[r][c])]).collect())
        .collect();
    let honest_second = (0..9).map(|k| vec![vec![(1.0, grid[k / 3][k % 3])]]).collect();
    let acg = AnticommutationGame {
        kind: AcKind::MagicSquare,
        game: placeholder_game(),
        questions,
        first_bits: 3,
        second_bits: 1,
        second_questions: 9,
        q_x: 0,
        q_z: 4,
        f_x: vec![1.0, -1.0],
        f_z: vec![1.0, -1.0],
        omega_g: 1.0,
        epr_pairs: 2,
        honest_first,
        honest_second,
    }
    .build("magic-square")?;
    let honest = AcHonestStrategy::new(&acg)?;
    Ok((acg, honest))
}

pub fn ac_game(kind: AcKind) -> Result<(AnticommutationGame, AcHonestStrategy)> {
    match kind {
        AcKind::Chsh => chsh_game(),
        AcKind::MagicSquare => magic_square_game(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AcCompletenessReport {
    pub value: f64,
    pub omega_g: f64,
    pub value_ok: bool,
    pub marginal_x_residual: f64,
    pub marginal_z_residual: f64,
    /// Second-player questions whose projectors are not eigenspace
    /// projectors of a single Pauli tensor product.
    pub non_pauli_questions: Vec<usize>,
}

impl AcCompletenessReport {
    pub fn passed(&self) -> bool {
        self.value_ok && self.marginal_x_residual <= 1e-10 && self.marginal_z_residual <= 1e-10 && self.non_pauli_questions.is_empty()
    }
}

/// Coefficients Tr(P†A)/d of `a` on every unsigned word over {I, X, Z, XZ}.
fn pauli_support(a: &CMat, n: usize) -> Result<Vec<(PauliWord, f64)>> {
    let d = 1usize << n;
    let mut out = Vec::new();
    for x in BitString::all(n) {
        for z in BitString::all(n) {
            let p = PauliWord::new(x, z, crate::pauli::Sign::Plus)?;
            let c = linalg::trace_product(&linalg::dagger(&pauli_dense(&p)?), a) / d as f64;
            if c.norm() > 1e-10 {
                out.push((p, c.norm()));
            }
        }
    }
    Ok(out)
}

/// Checks the honest-strategy conditions of an anticommutation game.
pub fn verify_ac_completeness(acg: &AnticommutationGame, honest: &dyn Strategy) -> Result<AcCompletenessReport> {
    let value = game_value_exact(&acg.game, honest)?;
    let m = honest.register(1).len();
    let marginal = |q: usize, f: &[f64], target: &PauliWord| -> Result<f64> {
        let meas = honest.measurement(1, &acg.query(Role::Second, q))?;
        if f.len() != meas.len() {
            return dim_err("answer map does not cover the answer alphabet");
        }
        let lhs = meas.signed_sum(f);
        Ok(linalg::max_abs_diff(&lhs, &pauli_dense(target)?))
    };
    let first_qubit = |x: bool| -> Result<PauliWord> {
        let e = BitString::unit(m, 0);
        let z = BitString::zeros(m);
        if x {
            PauliWord::new(e, z, crate::pauli::Sign::Plus)
        } else {
            PauliWord::new(z, e, crate::pauli::Sign::Plus)
        }
    };
    let marginal_x_residual = marginal(acg.q_x, &acg.f_x, &first_qubit(true)?)?;
    let marginal_z_residual = marginal(acg.q_z, &acg.f_z, &first_qubit(false)?)?;
    let mut non_pauli_questions = Vec::new();
    for q in 0..acg.second_questions {
        let meas = honest.measurement(1, &acg.query(Role::Second, q))?;
        let mut ok = true;
        for e in meas.elements() {
            let support = pauli_support(e, m)?;
            let nontrivial: Vec<_> = support.iter().filter(|(p, _)| !(p.x().is_zero() && p.z().is_zero())).collect();
            if nontrivial.len() > 1 || nontrivial.iter().any(|(p, _)| !p.is_hermitian()) {
                ok = false;
            }
        }
        if !ok {
            non_pauli_questions.push(q);
        }
    }
    Ok(AcCompletenessReport {
        value,
        omega_g: acg.omega_g,
        value_ok: value >= acg.omega_g - 1e-9,
        marginal_x_residual,
        marginal_z_residual,
        non_pauli_questions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chsh_honest_value_is_tsirelson() {
        let (g, h) = chsh_game().unwrap();
        let v = game_value_exact(&g.game, &h).unwrap();
        assert!((v - g.omega_g).abs() < 1e-12, "{v}");
        assert!(verify_ac_completeness(&g, &h).unwrap().passed());
    }

    #[test]
    fn magic_square_honest_strategy_wins() {
        let (g, h) = magic_square_game().unwrap();
        let v = game_value_exact(&g.game, &h).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        let r = verify_ac_completeness(&g, &h).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn magic_square_grid_parities() {
        let grid = magic_square_grid();
        for l in 0..6 {
            let cells = magic_square_line(l);
            let mut p = PauliWord::identity(2);
            for (r, c) in cells {
                p = pauli_multiply(&p, &grid[r][c]).unwrap();
            }
            assert!(p.x().is_zero() && p.z().is_zero());
            assert_eq!(p.sign().is_negative(), l == 5, "line {l}");
        }
    }

    #[test]
    fn second_marginal_is_normalised() {
        for kind in [AcKind::Chsh, AcKind::MagicSquare] {
            let (g, _) = ac_game(kind).unwrap();
            let total: f64 = g.second_marginal().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
