//! Nonlocal games, strategies and exact or sampled value computation.
//!
//! Every answer is a bit vector: bit j of an outcome index (`(index >> j) & 1`)
//! is answer j, with 0 standing for +1 and 1 for −1. A verifier check reads a
//! list of answer bits and looks up an acceptance probability in a table
//! indexed by those bits (bit k of the index is the k-th referenced bit).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::state::{Measurement, StateVector};

/// Largest number of question tuples enumerated by `game_value_exact`.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub fn label(self) -> &'static str {
        match self {
            Basis::X => "X",
            Basis::Z => "Z",
        }
    }
}

/// Which side of a two-player anticommutation game a question belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    First,
    Second,
}

impl Role {
    fn digit(self) -> u8 {
        match self {
            Role::First => 1,
            Role::Second => 2,
        }
    }
}

/// A question sent to one player.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Query {
    /// Question `index` of an anticommutation game, answered with `bits` bits.
    Game { role: Role, index: usize, bits: u8 },
    /// Linearity-test pair, sorted.
    Linear { first: BitString, second: BitString },
    /// W-query of the braiding test, sorted.
    Basis { basis: Basis, first: BitString, second: BitString },
    /// Anticommutation-game question lifted by (a, b) with a·b = 1; not sorted.
    Lifted { role: Role, index: usize, bits: u8, a: BitString, b: BitString },
    /// Joint σ_X(a), σ_Z(b) measurement; not sorted.
    Xz { a: BitString, b: BitString },
}

impl Query {
    pub fn linear(s: BitString, t: BitString) -> Query {
        let (first, second) = if s <= t { (s, t) } else { (t, s) };
        Query::Linear { first, second }
    }

    pub fn basis(basis: Basis, s: BitString, t: BitString) -> Query {
        let (first, second) = if s <= t { (s, t) } else { (t, s) };
        Query::Basis { basis, first, second }
    }

    pub fn answer_bits(&self) -> usize {
        match self {
            Query::Game { bits, .. } | Query::Lifted { bits, .. } => *bits as usize,
            _ => 2,
        }
    }

    /// The two strings of a pair query.
    pub fn pair(&self) -> Option<(BitString, BitString)> {
        match self {
            Query::Linear { first, second } | Query::Basis { first, second, .. } => Some((*first, *second)),
            Query::Lifted { a, b, .. } | Query::Xz { a, b } => Some((*a, *b)),
            Query::Game { .. } => None,
        }
    }

    /// Answer bit associated with string `s` in a pair query (first match).
    pub fn position_of(&self, s: &BitString) -> Option<u8> {
        let (f, g) = self.pair()?;
        if f == *s {
            Some(0)
        } else if g == *s {
            Some(1)
        } else {
            None
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Game { role, index, bits } => write!(f, "G:{}:{index}:{bits}", role.digit()),
            Query::Linear { first, second } => write!(f, "L:{first},{second}"),
            Query::Basis { basis, first, second } => write!(f, "{}:{first},{second}", basis.label()),
            Query::Lifted { role, index, bits, a, b } => write!(f, "GL:{}:{index}:{bits}:{a},{b}", role.digit()),
            Query::Xz { a, b } => write!(f, "XZ:{a},{b}"),
        }
    }
}

impl FromStr for Query {
    type Err = Error;
    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("malformed query {text:?}"));
        let parts: Vec<&str> = text.trim().split(':').collect();
        let pair = |s: &str| -> Result<(BitString, BitString)> {
            let (x, y) = s.split_once(',').ok_or_else(bad)?;
            Ok((x.parse()?, y.parse()?))
        };
        let role = |s: &str| match s {
            "1" => Ok(Role::First),
            "2" => Ok(Role::Second),
            _ => Err(bad()),
        };
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["G", r, i, b] => Ok(Query::Game { role: role(r)?, index: num(i)?, bits: num(b)? as u8 }),
            ["L", p] => {
                let (s, t) = pair(p)?;
                Ok(Query::linear(s, t))
            }
            ["X", p] => {
                let (s, t) = pair(p)?;
                Ok(Query::basis(Basis::X, s, t))
            }
            ["Z", p] => {
                let (s, t) = pair(p)?;
                Ok(Query::basis(Basis::Z, s, t))
            }
            ["GL", r, i, b, p] => {
                let (a, bb) = pair(p)?;
                Ok(Query::Lifted { role: role(r)?, index: num(i)?, bits: num(b)? as u8, a, b: bb })
            }
            ["XZ", p] => {
                let (a, b) = pair(p)?;
                Ok(Query::Xz { a, b })
            }
            _ => Err(bad()),
        }
    }
}

/// What a player receives in one round.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Ask(Query),
    /// A uniformly random W-query on n-bit strings whose answer the verifier
    /// ignores. It is never measured: by no-signaling the remaining players'
    /// statistics do not depend on it.
    Fresh { basis: Basis, n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitRef {
    pub player: u16,
    pub bit: u8,
}

impl BitRef {
    pub fn new(player: usize, bit: u8) -> Self {
        Self { player: player as u16, bit }
    }
}

/// Verifier decision: acceptance probability looked up from the referenced bits.
#[derive(Clone, Debug)]
pub struct Check {
    pub bits: Vec<BitRef>,
    pub table: Arc<Vec<f64>>,
}

impl Check {
    pub fn new(bits: Vec<BitRef>, table: Vec<f64>) -> Result<Self> {
        if table.len() != 1usize << bits.len() {
            return dim_err(format!("check table has {} entries for {} bits", table.len(), bits.len()));
        }
        if table.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation("acceptance probabilities must lie in [0,1]".into()));
        }
        Ok(Self { bits, table: Arc::new(table) })
    }

    pub fn from_fn(bits: Vec<BitRef>, f: impl Fn(&[bool]) -> f64) -> Result<Self> {
        let k = bits.len();
        let table = (0..1usize << k)
            .map(|y| {
                let v: Vec<bool> = (0..k).map(|j| (y >> j) & 1 == 1).collect();
                f(&v)
            })
            .collect();
        Self::new(bits, table)
    }

    pub fn always_accept() -> Self {
        Self { bits: Vec::new(), table: Arc::new(vec![1.0]) }
    }

    /// Accept iff the XOR of the referenced bits equals `parity`.
    pub fn parity(bits: Vec<BitRef>, parity: bool) -> Result<Self> {
        Self::from_fn(bits, |v| if v.iter().fold(false, |a, &b| a ^ b) == parity { 1.0 } else { 0.0 })
    }

    /// Rewrites the check so that each referenced bit becomes the XOR of a
    /// group of physical bits given by `expand`.
    pub fn expand(&self, expand: impl Fn(BitRef) -> Vec<BitRef>) -> Result<Check> {
        let groups: Vec<Vec<BitRef>> = self.bits.iter().map(|&b| expand(b)).collect();
        let mut bits: Vec<BitRef> = Vec::new();
        for g in &groups {
            for b in g {
                if !bits.contains(b) {
                    bits.push(*b);
                }
            }
        }
        let idx: Vec<Vec<usize>> =
            groups.iter().map(|g| g.iter().map(|b| bits.iter().position(|x| x == b).unwrap()).collect()).collect();
        let table = self.table.clone();
        Check::from_fn(bits, move |v| {
            let y = idx
                .iter()
                .enumerate()
                .map(|(k, members)| (members.iter().fold(false, |a, &j| a ^ v[j]) as usize) << k)
                .sum::<usize>();
            table[y]
        })
    }

    /// Walsh–Hadamard coefficients: table(y) = Σ_S c_S (−1)^{|S∧y|}.
    fn walsh(&self) -> Vec<f64> {
        let mut c = self.table.as_ref().clone();
        let n = c.len();
        let mut h = 1;
        while h < n {
            for i in (0..n).step_by(2 * h) {
                for j in i..i + h {
                    let (x, y) = (c[j], c[j + h]);
                    c[j] = x + y;
                    c[j + h] = x - y;
                }
            }
            h *= 2;
        }
        let inv = 1.0 / n as f64;
        c.iter_mut().for_each(|v| *v *= inv);
        c
    }
}

#[derive(Clone, Debug)]
pub struct QuestionTuple {
    pub weight: f64,
    pub slots: Vec<Slot>,
    pub check: Check,
    pub subtest: usize,
}

#[derive(Clone, Debug)]
pub struct NonlocalGame {
    pub name: String,
    pub players: usize,
    pub tuples: Vec<QuestionTuple>,
    pub subtests: Vec<String>,
}

impl NonlocalGame {
    pub fn new(name: impl Into<String>, players: usize, tuples: Vec<QuestionTuple>, subtests: Vec<String>) -> Result<Self> {
        let g = Self { name: name.into(), players, tuples, subtests };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let mut total = 0.0;
        for (i, t) in self.tuples.iter().enumerate() {
            if t.weight < 0.0 {
                return Err(Error::Validation(format!("tuple {i} has negative weight")));
            }
            if t.slots.len() != self.players {
                return dim_err(format!("tuple {i} has {} slots for {} players", t.slots.len(), self.players));
            }
            if t.subtest >= self.subtests.len().max(1) {
                return Err(Error::Validation(format!("tuple {i} has unknown subtest")));
            }
            for b in &t.check.bits {
                let p = b.player as usize;
                match t.slots.get(p) {
                    Some(Slot::Ask(q)) if (b.bit as usize) < q.answer_bits() => {}
                    _ => return Err(Error::Validation(format!("tuple {i} checks an unanswered bit of player {p}"))),
                }
            }
        }
        let sums: Vec<f64> = self.tuples.iter().map(|t| t.weight).collect();
        total += pairwise_sum(&sums);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("question weights sum to {total}")));
        }
        Ok(())
    }

    pub fn question_count(&self) -> usize {
        self.tuples.len()
    }

    /// Marginal distribution of the queries received by `player`; fresh
    /// slots are expanded into their uniform distributions.
    pub fn marginal_queries(&self, player: usize) -> BTreeMap<Query, f64> {
        let mut out: BTreeMap<Query, f64> = BTreeMap::new();
        for t in &self.tuples {
            match &t.slots[player] {
                Slot::Ask(q) => *out.entry(q.clone()).or_default() += t.weight,
                Slot::Fresh { basis, n } => {
                    let w = t.weight / (1u64 << (2 * n)) as f64;
                    for c in BitString::all(*n) {
                        for d in BitString::all(*n) {
                            *out.entry(Query::basis(*basis, c, d)).or_default() += w;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn subtest_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.subtests.len().max(1)];
        for t in &self.tuples {
            w[t.subtest] += t.weight;
        }
        w
    }
}

/// Shared state plus per-player measurements on declared registers.
pub trait Strategy: Sync {
    fn players(&self) -> usize;
    fn state(&self) -> &StateVector;
    /// Qubits of the shared state held by `player`, most significant first.
    fn register(&self, player: usize) -> &[usize];
    /// Projective measurement on `register(player)` for `query`.
    fn measurement(&self, player: usize, query: &Query) -> Result<Measurement>;
}

pub fn validate_registers(s: &dyn Strategy) -> Result<()> {
    let mut seen = HashSet::new();
    for p in 0..s.players() {
        for &q in s.register(p) {
            if q >= s.state().qubits() || !seen.insert(q) {
                return Err(Error::Validation(format!("register of player {p} overlaps or is out of range")));
            }
        }
    }
    if seen.len() != s.state().qubits() {
        return Err(Error::Validation("registers do not cover the shared state".into()));
    }
    Ok(())
}

/// Pairwise summation with a fixed split, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

type MeasurementCache = HashMap<(usize, Query), Measurement>;

fn referenced(game: &NonlocalGame) -> Vec<(usize, Query)> {
    let mut set = HashSet::new();
    let mut out = Vec::new();
    for t in &game.tuples {
        for b in &t.check.bits {
            let p = b.player as usize;
            if let Slot::Ask(q) = &t.slots[p] {
                if set.insert((p, q.clone())) {
                    out.push((p, q.clone()));
                }
            }
        }
    }
    out
}

fn build_cache(game: &NonlocalGame, strategy: &dyn Strategy) -> Result<MeasurementCache> {
    if strategy.players() != game.players {
        return dim_err(format!("strategy for {} players, game for {}", strategy.players(), game.players));
    }
    let keys = referenced(game);
    let ms: Vec<Result<Measurement>> = keys.par_iter().map(|(p, q)| strategy.measurement(*p, q)).collect();
    let mut cache = HashMap::with_capacity(keys.len());
    for ((p, q), m) in keys.into_iter().zip(ms) {
        let m = m?;
        let need = 1usize << q.answer_bits();
        if m.len() != need {
            return Err(Error::Validation(format!("player {p} answers query {q} with {} outcomes, expected {need}", m.len())));
        }
        if m.dim() != 1usize << strategy.register(p).len() {
            return dim_err(format!("measurement of player {p} does not match its register"));
        }
        cache.insert((p, q), m);
    }
    Ok(cache)
}

/// Σ_α (−1)^{|mask ∧ α|} M^α.
fn parity_operator(m: &Measurement, mask: usize) -> CMat {
    let signs: Vec<f64> =
        (0..m.len()).map(|a| if (a & mask).count_ones() & 1 == 1 { -1.0 } else { 1.0 }).collect();
    m.signed_sum(&signs)
}

fn tuple_value(t: &QuestionTuple, strategy: &dyn Strategy, cache: &MeasurementCache) -> Result<f64> {
    if t.check.bits.is_empty() {
        return Ok(t.check.table[0]);
    }
    let coeffs = t.check.walsh();
    let psi = strategy.state();
    let mut ops: HashMap<(usize, usize), CMat> = HashMap::new();
    // Product vectors (Π O_p)ψ keyed by their factor list. Parity operators are
    // Hermitian, so ⟨ψ|O_first R|ψ⟩ = ⟨O_first ψ|R ψ⟩ and both sides are reused.
    let mut vecs: HashMap<Vec<(usize, usize)>, Vec<c64>> = HashMap::new();
    let mut total = 0.0;
    for (s, &c) in coeffs.iter().enumerate() {
        if c.abs() < 1e-15 {
            continue;
        }
        let mut masks: BTreeMap<usize, usize> = BTreeMap::new();
        for (k, b) in t.check.bits.iter().enumerate() {
            if (s >> k) & 1 == 1 {
                *masks.entry(b.player as usize).or_default() ^= 1 << b.bit;
            }
        }
        let factors: Vec<(usize, usize)> = masks.into_iter().filter(|&(_, m)| m != 0).collect();
        if factors.is_empty() {
            total += c;
            continue;
        }
        for key in [factors[..1].to_vec(), factors[1..].to_vec()] {
            if key.is_empty() || vecs.contains_key(&key) {
                continue;
            }
            let mut phi = psi.amplitudes().to_vec();
            for &(p, mask) in &key {
                let Slot::Ask(q) = &t.slots[p] else { unreachable!("validated") };
                let op = ops.entry((p, mask)).or_insert_with(|| parity_operator(&cache[&(p, q.clone())], mask));
                phi = linalg::apply_local(op, strategy.register(p), psi.qubits(), &phi)?;
            }
            vecs.insert(key, phi);
        }
        let left = &vecs[&factors[..1]];
        let right = if factors.len() == 1 { psi.amplitudes() } else { &vecs[&factors[1..]][..] };
        total += c * linalg::inner(left, right).re;
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct SubtestValue {
    pub name: String,
    pub weight: f64,
    /// Acceptance probability conditioned on this subtest being run.
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValueReport {
    pub game: String,
    pub players: usize,
    pub questions: usize,
    pub value: f64,
    pub subtests: Vec<SubtestValue>,
}

/// Exact acceptance probability of `strategy`, with per-subtest conditional values.
pub fn game_value_report(game: &NonlocalGame, strategy: &dyn Strategy) -> Result<ValueReport> {
    if game.tuples.len() > DEFAULT_ENUMERATION_LIMIT {
        return Err(Error::Resource(format!("{} question tuples exceed the enumeration limit", game.tuples.len())));
    }
    let cache = build_cache(game, strategy)?;
    let vals: Vec<Result<f64>> = game.tuples.par_iter().map(|t| tuple_value(t, strategy, &cache)).collect();
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let weighted: Vec<f64> = game.tuples.iter().zip(&vals).map(|(t, v)| t.weight * v).collect();
    let value = pairwise_sum(&weighted);
    let nsub = game.subtests.len().max(1);
    let mut per: Vec<Vec<f64>> = vec![Vec::new(); nsub];
    let mut wts: Vec<Vec<f64>> = vec![Vec::new(); nsub];
    for (t, w) in game.tuples.iter().zip(&weighted) {
        per[t.subtest].push(*w);
        wts[t.subtest].push(t.weight);
    }
    let subtests = (0..nsub)
        .map(|i| {
            let w = pairwise_sum(&wts[i]);
            SubtestValue {
                name: game.subtests.get(i).cloned().unwrap_or_else(|| "all".into()),
                weight: w,
                value: if w > 0.0 { pairwise_sum(&per[i]) / w } else { f64::NAN },
            }
        })
        .collect();
    Ok(ValueReport { game: game.name.clone(), players: game.players, questions: game.tuples.len(), value, subtests })
}

pub fn game_value_exact(game: &NonlocalGame, strategy: &dyn Strategy) -> Result<f64> {
    Ok(game_value_report(game, strategy)?.value)
}

/// Joint distribution of the answers of the players asked in `slots`; entry
/// index concatenates the players' outcome indices, earlier players in the
/// low bits.
pub fn answer_distribution(slots: &[Slot], strategy: &dyn Strategy) -> Result<Vec<f64>> {
    let psi = strategy.state();
    let mut branches: Vec<(usize, Vec<c64>)> = vec![(0, psi.amplitudes().to_vec())];
    let mut shift = 0;
    for (p, slot) in slots.iter().enumerate() {
        let Slot::Ask(q) = slot else { continue };
        let m = strategy.measurement(p, q)?;
        let mut next = Vec::with_capacity(branches.len() * m.len());
        for (idx, phi) in &branches {
            for (a, e) in m.elements().iter().enumerate() {
                let v = linalg::apply_local(e, strategy.register(p), psi.qubits(), phi)?;
                next.push((idx | (a << shift), v));
            }
        }
        shift += q.answer_bits();
        branches = next;
    }
    let mut dist = vec![0.0; 1usize << shift];
    for (idx, phi) in branches {
        dist[idx] += linalg::norm_sqr(&phi);
    }
    Ok(dist)
}

/// Monte Carlo estimate of the value and its standard error.
pub fn game_value_sampled(game: &NonlocalGame, strategy: &dyn Strategy, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::Precondition("at least one sample required".into()));
    }
    let mut cum = Vec::with_capacity(game.tuples.len());
    let mut acc = 0.0;
    for t in &game.tuples {
        acc += t.weight;
        cum.push(acc);
    }
    let cache = build_cache(game, strategy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = strategy.state();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let u: f64 = rng.gen::<f64>() * acc;
        let i = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        let t = &game.tuples[i];
        let mut players: Vec<usize> = t.check.bits.iter().map(|b| b.player as usize).collect();
        players.sort_unstable();
        players.dedup();
        let mut phi = psi.amplitudes().to_vec();
        let mut answers: HashMap<usize, usize> = HashMap::new();
        for p in players {
            let Slot::Ask(q) = &t.slots[p] else { unreachable!("validated") };
            let m = &cache[&(p, q.clone())];
            let branches: Vec<Vec<c64>> = m
                .elements()
                .iter()
                .map(|e| linalg::apply_local(e, strategy.register(p), psi.qubits(), &phi))
                .collect::<Result<_>>()?;
            let probs: Vec<f64> = branches.iter().map(|b| linalg::norm_sqr(b)).collect();
            let total: f64 = probs.iter().sum();
            let mut r = rng.gen::<f64>() * total;
            let mut pick = probs.len() - 1;
            for (a, &pa) in probs.iter().enumerate() {
                if r < pa {
                    pick = a;
                    break;
                }
                r -= pa;
            }
            let nrm = probs[pick].sqrt();
            phi = branches.into_iter().nth(pick).unwrap().into_iter().map(|z| z / nrm).collect();
            answers.insert(p, pick);
        }
        let y: usize = t
            .check
            .bits
            .iter()
            .enumerate()
            .map(|(k, b)| ((answers[&(b.player as usize)] >> b.bit) & 1) << k)
            .sum();
        let v = t.check.table[y];
        sum += v;
        sum_sq += v * v;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = if samples > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok((mean, (var / nf).sqrt()))
}

/// Strategy given by an explicit table of measurements.
#[derive(Clone, Debug)]
pub struct TableStrategy {
    state: StateVector,
    registers: Vec<Vec<usize>>,
    measurements: HashMap<(usize, Query), Measurement>,
}

impl TableStrategy {
    pub fn new(state: StateVector, registers: Vec<Vec<usize>>) -> Result<Self> {
        let s = Self { state, registers, measurements: HashMap::new() };
        validate_registers(&s)?;
        Ok(s)
    }

    pub fn insert(&mut self, player: usize, query: Query, m: Measurement) -> Result<()> {
        if player >= self.registers.len() {
            return dim_err(format!("no player {player}"));
        }
        if m.dim() != 1usize << self.registers[player].len() {
            return dim_err("measurement dimension does not match the register");
        }
        self.measurements.insert((player, query), m);
        Ok(())
    }

    /// Deterministic answer `answer` to `query`, on a register of any size.
    pub fn insert_deterministic(&mut self, player: usize, query: Query, answer: usize) -> Result<()> {
        let d = 1usize << self.registers[player].len();
        let k = 1usize << query.answer_bits();
        let elements =
            (0..k).map(|a| if a == answer { linalg::identity(d) } else { linalg::zeros(d, d) }).collect();
        let m = Measurement::new_unchecked((0..k as u32).collect(), elements, crate::state::MeasurementKind::Projective)?;
        self.insert(player, query, m)
    }

    /// Snapshot of `strategy` restricted to the queries `game` can ask.
    pub fn tabulate(game: &NonlocalGame, strategy: &dyn Strategy) -> Result<Self> {
        let cache = build_cache(game, strategy)?;
        let registers = (0..strategy.players()).map(|p| strategy.register(p).to_vec()).collect();
        let mut s = Self::new(strategy.state().clone(), registers)?;
        for ((p, q), m) in cache {
            s.insert(p, q, m)?;
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut entries: Vec<MeasurementEntry> = self
            .measurements
            .iter()
            .map(|((p, q), m)| MeasurementEntry {
                player: *p,
                query: q.to_string(),
                elements: m.elements().iter().map(crate::state::MatrixJson::from_mat).collect(),
            })
            .collect();
        entries.sort_by(|a, b| (a.player, &a.query).cmp(&(b.player, &b.query)));
        let j = StrategyJson {
            qubits: self.state.qubits(),
            amplitudes: self.state.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
            registers: self.registers.clone(),
            measurements: entries,
        };
        serde_json::to_string_pretty(&j).expect("serializing strategy")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: StrategyJson = serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        let state = StateVector::new(j.qubits, j.amplitudes.into_iter().map(|[re, im]| c64::new(re, im)).collect())?;
        let mut s = Self::new(state, j.registers)?;
        for e in j.measurements {
            let elements = e.elements.iter().map(|m| m.to_mat()).collect::<Result<Vec<_>>>()?;
            let m = Measurement::projective(elements)?;
            s.insert(e.player, e.query.parse()?, m)?;
        }
        Ok(s)
    }
}

#[derive(Serialize, Deserialize)]
struct MeasurementEntry {
    player: usize,
    query: String,
    elements: Vec<crate::state::MatrixJson>,
}

#[derive(Serialize, Deserialize)]
struct StrategyJson {
    qubits: usize,
    amplitudes: Vec<[f64; 2]>,
    registers: Vec<Vec<usize>>,
    measurements: Vec<MeasurementEntry>,
}

impl Strategy for TableStrategy {
    fn players(&self) -> usize {
        self.registers.len()
    }

    fn state(&self) -> &StateVector {
        &self.state
    }

    fn register(&self, player: usize) -> &[usize] {
        &self.registers[player]
    }

    fn measurement(&self, player: usize, query: &Query) -> Result<Measurement> {
        self.measurements
            .get(&(player, query.clone()))
            .cloned()
            .ok_or_else(|| Error::UnsupportedQuery(format!("player {player} has no measurement for {query}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_text_round_trip() {
        let s: BitString = "01".parse().unwrap();
        let t: BitString = "10".parse().unwrap();
        for q in [
            Query::Game { role: Role::Second, index: 4, bits: 1 },
            Query::linear(t, s),
            Query::basis(Basis::Z, t, s),
            Query::Lifted { role: Role::First, index: 2, bits: 3, a: t, b: s },
            Query::Xz { a: t, b: s },
        ] {
            assert_eq!(q.to_string().parse::<Query>().unwrap(), q);
        }
        assert_eq!(Query::linear(t, s).position_of(&s), Some(0));
    }

    #[test]
    fn walsh_inverts_table() {
        let c = Check::new(vec![BitRef::new(0, 0), BitRef::new(1, 0)], vec![0.25, 1.0, 0.0, 0.5]).unwrap();
        let w = c.walsh();
        for y in 0..4usize {
            let v: f64 = (0..4usize).map(|s| w[s] * if (s & y).count_ones() % 2 == 1 { -1.0 } else { 1.0 }).sum();
            assert!((v - c.table[y]).abs() < 1e-15);
        }
    }

    #[test]
    fn expand_xors_groups() {
        let c = Check::parity(vec![BitRef::new(0, 0), BitRef::new(1, 0)], false).unwrap();
        let e = c
            .expand(|b| if b.player == 1 { vec![BitRef::new(1, 0), BitRef::new(2, 0)] } else { vec![b] })
            .unwrap();
        assert_eq!(e.bits.len(), 3);
        for y in 0..8usize {
            let parity = y.count_ones() % 2 == 0;
            assert_eq!(e.table[y], if parity { 1.0 } else { 0.0 });
        }
    }
}
