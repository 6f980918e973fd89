//! `selftest`: game values, perturbation sweeps and the Hamiltonian
//! self-test from the command line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use selftest_core::acgame::{ac_game, AcHonestStrategy, AcKind, AnticommutationGame};
use selftest_core::braiding::{self, SweepRow};
use selftest_core::code::{steane_code, CssCode};
use selftest_core::game::{game_value_report, game_value_sampled, NonlocalGame, Strategy, TableStrategy, ValueReport};
use selftest_core::hamiltonian::{self as ham, XZHamiltonian};
use selftest_core::linearity::{linearity_game, HonestLinearityStrategy};
use selftest_core::Error;

#[derive(Parser, Debug)]
#[command(name = "selftest", version, about = "Exact simulation of Pauli self-testing games")]
struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Value of a game under a strategy.
    Value(ValueArgs),
    /// Residuals, game value and EPR witness across a perturbation grid.
    Sweep(SweepArgs),
    /// The Hamiltonian self-test on a Hamiltonian file.
    Hamiltonian(HamiltonianArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum GameName {
    Linearity,
    Chsh,
    MagicSquare,
    Braiding,
    Hamiltonian,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AcName {
    Chsh,
    #[value(alias = "magic_square")]
    #[serde(alias = "magic-square")]
    MagicSquare,
}

impl AcName {
    fn kind(self) -> AcKind {
        match self {
            AcName::Chsh => AcKind::Chsh,
            AcName::MagicSquare => AcKind::MagicSquare,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Sampled,
}

#[derive(Args, Debug)]
struct Output {
    /// Write the result as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the result as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValueArgs {
    #[arg(long, value_enum)]
    game: GameName,
    /// honest, perturbed:<eps> or file:<path>
    #[arg(long, default_value = "honest")]
    strategy: String,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, value_enum, default_value = "magic-square")]
    ac: AcName,
    /// Probability of the energy tests (hamiltonian game).
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Hamiltonian file (hamiltonian game).
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sweep descriptor JSON {n, ac_game, epsilons, seed}; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    ac: Option<AcName>,
    /// Comma-separated mixing levels in [0, 1].
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also run the exact-Pauli extraction at every point (n ≤ 2).
    #[arg(long)]
    extract: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct HamiltonianArgs {
    /// Hamiltonian file: one `<alpha> X:<bits> Z:<bits>` term per line.
    file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "magic-square")]
    ac: AcName,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Apply gap amplification with polynomial thresholds p > q first.
    #[arg(long, num_args = 2, value_names = ["P", "Q"])]
    amplify: Option<Vec<f64>>,
    /// Print the QMA parameter map for constants p > q.
    #[arg(long = "qma-params", num_args = 2, value_names = ["P", "Q"])]
    qma_params: Option<Vec<f64>>,
    /// Report λ_min, the bound and the closed-form honest value without simulating the game.
    #[arg(long)]
    no_simulate: bool,
    #[command(flatten)]
    out: Output,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Resource(_) => 3,
            Error::Numeric(_) => 4,
            _ => 2,
        };
        Self { code, msg: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::config(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure { code: 3, msg: format!("{}: {e}", path.display()) })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 4, msg: e.to_string() })?;
    write(path, &(text + "\n"))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure { code: 4, msg: e.to_string() })?;
    }
    let bytes = w.into_inner().map_err(|e| Failure { code: 4, msg: e.to_string() })?;
    write(path, &String::from_utf8_lossy(&bytes))
}

enum StrategySpec {
    Honest,
    Perturbed(f64),
    File(PathBuf),
}

fn parse_strategy(s: &str) -> CliResult<StrategySpec> {
    if s == "honest" {
        return Ok(StrategySpec::Honest);
    }
    if let Some(e) = s.strip_prefix("perturbed:") {
        let eps: f64 = e.parse().map_err(|_| Failure::config(format!("bad mixing level `{e}`")))?;
        if !(0.0..=1.0).contains(&eps) {
            return Err(Failure::config(format!("mixing level {eps} outside [0, 1]")));
        }
        return Ok(StrategySpec::Perturbed(eps));
    }
    if let Some(p) = s.strip_prefix("file:") {
        return Ok(StrategySpec::File(PathBuf::from(p)));
    }
    Err(Failure::config(format!("unknown strategy `{s}`; use honest, perturbed:<eps> or file:<path>")))
}

fn load_hamiltonian(path: &Path) -> CliResult<XZHamiltonian> {
    Ok(ham::parse_hamiltonian(&read(path)?)?)
}

fn acg(name: AcName) -> CliResult<(AnticommutationGame, AcHonestStrategy)> {
    Ok(ac_game(name.kind())?)
}

#[derive(Serialize)]
struct ValueOutput {
    game: String,
    strategy: String,
    mode: &'static str,
    value: f64,
    /// Standard error in sampled mode.
    std_error: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
    report: Option<ValueReport>,
}

fn cmd_value(a: &ValueArgs) -> CliResult<String> {
    if a.mode == Mode::Sampled && a.seed.is_none() {
        return Err(Failure::config("--seed is required in sampled mode"));
    }
    if a.n == 0 {
        return Err(Failure::config("--n must be at least 1"));
    }
    let spec = parse_strategy(&a.strategy)?;
    let (game, strategy): (NonlocalGame, Box<dyn Strategy>) = match (a.game, &spec) {
        (_, StrategySpec::File(path)) => {
            let s = TableStrategy::from_json(&read(path)?)?;
            (build_game(a)?, Box::new(s))
        }
        (GameName::Linearity, StrategySpec::Honest) => (linearity_game(a.n)?, Box::new(HonestLinearityStrategy::new(a.n)?)),
        (GameName::Chsh | GameName::MagicSquare, StrategySpec::Honest) => {
            let (g, s) = acg(if a.game == GameName::Chsh { AcName::Chsh } else { AcName::MagicSquare })?;
            (g.game, Box::new(s))
        }
        (GameName::Braiding, StrategySpec::Honest) => {
            let (g, _) = acg(a.ac)?;
            (braiding::braiding_game(a.n, &g)?, Box::new(braiding::honest_braiding_strategy(a.n, &g)?))
        }
        (GameName::Braiding, StrategySpec::Perturbed(eps)) => {
            let (g, _) = acg(a.ac)?;
            let s = braiding::perturbed_braiding_strategy(a.n, &g, *eps, a.seed.unwrap_or(0))?;
            (braiding::braiding_game(a.n, &g)?, Box::new(s))
        }
        (GameName::Hamiltonian, StrategySpec::Honest) => {
            let h = load_hamiltonian(a.hamiltonian.as_deref().ok_or_else(|| Failure::config("--hamiltonian is required"))?)?;
            let (g, _) = acg(a.ac)?;
            let code = steane_code();
            (ham::hamiltonian_game(&h, a.p, &g, &code)?, Box::new(ham::honest_hamiltonian_strategy(&h, &code, &g)?))
        }
        (_, StrategySpec::Perturbed(_)) => {
            return Err(Failure::config("perturbed strategies are available for the braiding game only"));
        }
    };
    let out = match a.mode {
        Mode::Exact => {
            let r = game_value_report(&game, strategy.as_ref())?;
            ValueOutput {
                game: game.name.clone(),
                strategy: a.strategy.clone(),
                mode: "exact",
                value: r.value,
                std_error: None,
                samples: None,
                seed: a.seed,
                report: Some(r),
            }
        }
        Mode::Sampled => {
            let seed = a.seed.expect("checked above");
            let (v, se) = game_value_sampled(&game, strategy.as_ref(), a.samples, seed)?;
            ValueOutput {
                game: game.name.clone(),
                strategy: a.strategy.clone(),
                mode: "sampled",
                value: v,
                std_error: Some(se),
                samples: Some(a.samples),
                seed: Some(seed),
                report: None,
            }
        }
    };
    if let Some(p) = &a.out.json {
        write_json(p, &out)?;
    }
    if let Some(p) = &a.out.csv {
        #[derive(Serialize)]
        struct Row<'a> {
            game: &'a str,
            strategy: &'a str,
            mode: &'a str,
            value: f64,
            std_error: Option<f64>,
        }
        write_csv(p, &[Row { game: &out.game, strategy: &out.strategy, mode: out.mode, value: out.value, std_error: out.std_error }])?;
    }
    let mut text = String::new();
    let _ = writeln!(text, "game      {}", out.game);
    let _ = writeln!(text, "strategy  {}", out.strategy);
    let _ = writeln!(text, "mode      {}", out.mode);
    match out.std_error {
        Some(se) => {
            let _ = writeln!(text, "value     {:.6} ± {:.6} ({} samples, seed {})", out.value, se, a.samples, a.seed.unwrap_or(0));
        }
        None => {
            let _ = writeln!(text, "value     {:.6}", out.value);
        }
    }
    if let Some(r) = &out.report {
        if r.subtests.len() > 1 {
            for s in &r.subtests {
                let _ = writeln!(text, "  {:<20} weight {:.6}  value {:.6}", s.name, s.weight, s.value);
            }
        }
    }
    Ok(text)
}

/// The game named by the flags, for file strategies.
fn build_game(a: &ValueArgs) -> CliResult<NonlocalGame> {
    Ok(match a.game {
        GameName::Linearity => linearity_game(a.n)?,
        GameName::Chsh => acg(AcName::Chsh)?.0.game,
        GameName::MagicSquare => acg(AcName::MagicSquare)?.0.game,
        GameName::Braiding => braiding::braiding_game(a.n, &acg(a.ac)?.0)?,
        GameName::Hamiltonian => {
            let h = load_hamiltonian(a.hamiltonian.as_deref().ok_or_else(|| Failure::config("--hamiltonian is required"))?)?;
            ham::hamiltonian_game(&h, a.p, &acg(a.ac)?.0, &steane_code())?
        }
    })
}

#[derive(Deserialize, Serialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct SweepDescriptor {
    n: Option<usize>,
    ac_game: Option<AcName>,
    epsilons: Option<Vec<f64>>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct SweepOutput {
    n: usize,
    ac_game: AcName,
    seed: u64,
    rows: Vec<SweepRow>,
    extraction: Option<Vec<braiding::ExtractionDiagnostics>>,
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<String> {
    let d: SweepDescriptor = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?,
        None => SweepDescriptor::default(),
    };
    let n = a.n.or(d.n).unwrap_or(1);
    let ac = a.ac.or(d.ac_game).unwrap_or(AcName::Chsh);
    let eps = a.epsilons.clone().or(d.epsilons).unwrap_or_else(|| vec![0.0, 0.05, 0.1, 0.2, 0.4]);
    let seed = a.seed.or(d.seed).unwrap_or(0);
    if eps.is_empty() {
        return Err(Failure::config("empty epsilon grid"));
    }
    if let Some(e) = eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Failure::config(format!("mixing level {e} outside [0, 1]")));
    }
    if n == 0 {
        return Err(Failure::config("--n must be at least 1"));
    }
    let (g, _) = acg(ac)?;
    let rows = braiding::sweep(n, &g, &eps, seed)?;
    let extraction = if a.extract {
        let mut diags = Vec::new();
        for &e in &eps {
            let s = braiding::perturbed_braiding_strategy(n, &g, e, seed)?;
            diags.push(braiding::extract_exact_paulis(&s, n)?.diagnostics);
        }
        Some(diags)
    } else {
        None
    };
    if let Some(p) = &a.out.csv {
        write_csv(p, &rows)?;
    }
    let out = SweepOutput { n, ac_game: ac, seed, rows, extraction };
    if let Some(p) = &a.out.json {
        write_json(p, &out)?;
    }
    let mut text = String::new();
    let _ = writeln!(text, "{}", braiding::SWEEP_COLUMNS.join(","));
    for r in &out.rows {
        let vals: Vec<String> = r.values().iter().map(|v| format!("{v:.9}")).collect();
        let _ = writeln!(text, "{}", vals.join(","));
    }
    if let Some(ds) = &out.extraction {
        let _ = writeln!(text, "epsilon,braiding_violation,consistency_x,consistency_z,rounding_distance");
        for (e, d) in eps.iter().zip(ds) {
            let _ = writeln!(
                text,
                "{e:.9},{:.3e},{:.9},{:.9},{:.9}",
                d.braiding_violation, d.consistency_x, d.consistency_z, d.rounding_distance
            );
        }
    }
    Ok(text)
}

#[derive(Serialize)]
struct HamiltonianRow {
    n: usize,
    m: usize,
    lambda_min: f64,
    p: f64,
    predicted_value: f64,
    honest_value: Option<f64>,
    lower_bound: f64,
    braiding_value: Option<f64>,
    energy_value: Option<f64>,
    consistency_value: Option<f64>,
}

#[derive(Serialize)]
struct HamiltonianOutput {
    report: Option<HamiltonianRow>,
    amplified: Option<AmplifiedOutput>,
    qma: Option<ham::QmaParameters>,
}

#[derive(Serialize)]
struct AmplifiedOutput {
    copies: usize,
    copies_exact: f64,
    shift: f64,
    lambda_min: f64,
    lambda_min_amplified: f64,
}

fn pair(v: &[f64]) -> (f64, f64) {
    (v[0], v[1])
}

fn cmd_hamiltonian(a: &HamiltonianArgs) -> CliResult<String> {
    let mut text = String::new();
    let mut out = HamiltonianOutput { report: None, amplified: None, qma: None };
    if let Some(q) = &a.qma_params {
        let (p, q) = pair(q);
        let r = ham::qma_parameters(p, q)?;
        let _ = writeln!(text, "p'        {:.6}", r.p_prime);
        let _ = writeln!(text, "eta0      {:.6}", r.eta0);
        let _ = writeln!(text, "p_c       {:.6}  (1/2 + 2 eta0 = {:.6})", r.completeness, 0.5 + 2.0 * r.eta0);
        let _ = writeln!(text, "p_s       {:.6}  (1/2 + eta0 = {:.6})", r.soundness, 0.5 + r.eta0);
        out.qma = Some(r);
    }
    match &a.file {
        None if a.qma_params.is_none() => return Err(Failure::config("a Hamiltonian file or --qma-params is required")),
        None => {}
        Some(path) => {
            let h = load_hamiltonian(path)?;
            if let Some(v) = &a.amplify {
                let (p, q) = pair(v);
                let amp = ham::amplify(&h, p, q)?;
                let lambda = ham::min_eigenvalue(&h)?;
                let _ = writeln!(
                    text,
                    "amplify   a = {} (exact {:.6}), shift 1/a = {:.6}, lambda' = {:.9}",
                    amp.copies,
                    amp.copies_exact,
                    amp.shift,
                    amp.eigenvalue_map(lambda)
                );
                out.amplified = Some(AmplifiedOutput {
                    copies: amp.copies,
                    copies_exact: amp.copies_exact,
                    shift: amp.shift,
                    lambda_min: lambda,
                    lambda_min_amplified: amp.eigenvalue_map(lambda),
                });
            }
            let lambda = ham::min_eigenvalue(&h)?;
            let (lower, _) = ham::optimal_value_bounds(&h, a.p)?;
            let (g, _) = acg(a.ac)?;
            let omega_braid = braiding::omega_enc(&g);
            let mut row = HamiltonianRow {
                n: h.n(),
                m: h.m(),
                lambda_min: lambda,
                p: a.p,
                predicted_value: ham::honest_value_formula(&h, a.p, omega_braid)?,
                honest_value: None,
                lower_bound: lower,
                braiding_value: None,
                energy_value: None,
                consistency_value: None,
            };
            let code: CssCode = steane_code();
            let mut skipped = None;
            if !a.no_simulate {
                match ham::honest_hamiltonian_strategy(&h, &code, &g) {
                    Ok(s) => {
                        let game = ham::hamiltonian_game(&h, a.p, &g, &code)?;
                        let r = game_value_report(&game, &s)?;
                        row.honest_value = Some(r.value);
                        row.braiding_value = Some(r.subtests[0].value);
                        row.energy_value = Some(r.subtests[1].value);
                        row.consistency_value = Some(r.subtests[2].value);
                    }
                    Err(Error::Resource(msg)) => skipped = Some(msg),
                    Err(e) => return Err(e.into()),
                }
            }
            let _ = writeln!(text, "n         {}", row.n);
            let _ = writeln!(text, "m         {}", row.m);
            let _ = writeln!(text, "lambda_min {:.9}", row.lambda_min);
            let _ = writeln!(text, "p         {}", row.p);
            let _ = writeln!(text, "lower     {:.9}", row.lower_bound);
            let _ = writeln!(text, "predicted {:.9}", row.predicted_value);
            if let Some(msg) = skipped {
                let _ = writeln!(text, "simulate  skipped: {msg}");
            }
            if let Some(v) = row.honest_value {
                let _ = writeln!(text, "honest    {:.9}", v);
                let _ = writeln!(
                    text,
                    "  braiding {:.9}  energy {:.9}  consistency {:.9}",
                    row.braiding_value.unwrap_or(f64::NAN),
                    row.energy_value.unwrap_or(f64::NAN),
                    row.consistency_value.unwrap_or(f64::NAN)
                );
            }
            let v = row.honest_value.unwrap_or(row.predicted_value);
            if v < lower - 1e-6 {
                let why = if omega_braid < 1.0 - 1e-12 {
                    format!("the bound assumes a perfect ac-game; braiding value is {omega_braid:.6}")
                } else if lambda > 0.0 {
                    "lambda_min > 0".to_string()
                } else {
                    "unexpected".to_string()
                };
                let _ = writeln!(text, "note      honest value below the bound ({why})");
            }
            if let Some(p) = &a.out.csv {
                write_csv(p, std::slice::from_ref(&row))?;
            }
            out.report = Some(row);
        }
    }
    if let Some(p) = &a.out.json {
        write_json(p, &out)?;
    }
    Ok(text)
}

fn run(cli: &Cli) -> CliResult<String> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure { code: 3, msg: e.to_string() })?;
    }
    match &cli.command {
        Command::Value(a) => cmd_value(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Hamiltonian(a) => cmd_hamiltonian(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
