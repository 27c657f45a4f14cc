use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use starembed::adversary::{hotspot_generate, rand_lb_generate, uniform_generate, Probability, RandLbParams};
use starembed::experiment::{self, Workload};
use starembed::io::{write_results, ResultsRow, SequenceFile};
use starembed::offline::label_string;
use starembed::oracle::{brute_force_opt_with_budget, DEFAULT_BUDGET};
use starembed::{block_decompose, opt_star, Error, PolicyKind, RequestSequence};

#[derive(Parser)]
#[command(
    name = "starembed",
    version,
    about = "Online embedding on star hosts: generate, solve, simulate, experiment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a request sequence as JSON.
    Generate(GenerateArgs),
    /// Exact offline optimum with its canonical phases, labels and blocks.
    Opt(OptArgs),
    /// Run one policy on a sequence file and print a results row.
    Simulate(SimulateArgs),
    /// Batch experiments writing results CSV.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Uniform,
    Hotspot,
    RandLb,
}

#[derive(Clone, Copy, ValueEnum)]
enum SurveyDist {
    Uniform,
    Hotspot,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    dist: Dist,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Number of requests (uniform, hotspot).
    #[arg(long)]
    len: Option<usize>,
    /// Number of request pairs (rand-lb).
    #[arg(long)]
    pairs: Option<usize>,
    /// Pattern-1 probability for rand-lb; decimal or fraction.
    #[arg(long, default_value = "2/3")]
    p: Probability,
    #[arg(long, default_value_t = 0.5)]
    hot_fraction: f64,
    /// Keep the initial center out of the first rand-lb pair.
    #[arg(long)]
    exclude_initial_center: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long)]
    input: PathBuf,
    /// Cross-check against exhaustive search.
    #[arg(long)]
    oracle: bool,
    /// Node budget for the exhaustive search.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    policy: PolicyKind,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo runs; randomized policies only.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Write the full JSON trace of one run here.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RandLbArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value = "2/3")]
    p: Probability,
    #[arg(long, default_value_t = 300)]
    pairs: usize,
    #[arg(long, default_value_t = 100)]
    sequences: usize,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    exclude_initial_center: bool,
}

impl RandLbArgs {
    fn params(&self) -> RandLbParams {
        RandLbParams {
            n: self.n,
            p: self.p.clone(),
            pairs: self.pairs,
            seed: self.seed,
            exclude_initial_center: self.exclude_initial_center,
            ..RandLbParams::default()
        }
    }
}

#[derive(Args)]
struct Output {
    /// Exit nonzero when any row reports a violation.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Adaptive three-node adversary against one policy.
    DetAdversary {
        #[arg(long, default_value = "det-pt")]
        policy: PolicyKind,
        #[arg(long, default_value_t = 1000)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Randomized PivotTracking on sampled two-pattern sequences.
    RandLbRatio {
        #[command(flatten)]
        gen: RandLbArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Every listed policy on the same two-pattern sequences, with aggregates.
    Yao {
        #[command(flatten)]
        gen: RandLbArgs,
        /// Policies to compare (default: all).
        #[arg(long, value_delimiter = ',')]
        policy: Vec<PolicyKind>,
        /// Extra pattern-1 probabilities to sweep.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<Probability>,
        #[command(flatten)]
        output: Output,
    },
    /// Ratio survey on uniform or hotspot workloads.
    Survey {
        #[arg(long, value_enum, default_value = "uniform")]
        dist: SurveyDist,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        len: usize,
        #[arg(long, default_value_t = 100)]
        sequences: usize,
        #[arg(long, default_value_t = 0.5)]
        hot_fraction: f64,
        #[arg(long, value_delimiter = ',')]
        policy: Vec<PolicyKind>,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

enum Failure {
    Core(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => e.exit_code() as u8,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Io(m) => m.clone(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn io_fail(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match out {
        Some(path) => fs::write(path, bytes).map_err(io_fail(path)),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn read_sequence(path: &Path) -> Result<RequestSequence, Failure> {
    let text = fs::read_to_string(path).map_err(io_fail(path))?;
    Ok(SequenceFile::parse(&text)?.to_sequence()?)
}

fn emit_rows(rows: &[ResultsRow], output: &Output) -> CmdResult {
    let mut buf = Vec::new();
    write_results(&mut buf, rows)?;
    emit(output.out.as_deref(), &buf)?;
    check_rows(rows, output.verify)
}

fn check_rows(rows: &[ResultsRow], verify: bool) -> CmdResult {
    let bad: usize = rows.iter().map(|r| r.violations).sum();
    if verify && bad > 0 {
        return Err(Error::Invariant(format!("{bad} violation(s) across {} row(s)", rows.len())).into());
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> CmdResult {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| Error::InvalidParam(format!("--{flag} is required")));
    let file = match a.dist {
        Dist::Uniform => {
            let len = need(a.len, "len")?;
            SequenceFile::from_sequence(&uniform_generate(a.n, len, a.seed)?)
                .with_meta("generator", "uniform")
                .with_meta("seed", a.seed)
        }
        Dist::Hotspot => {
            let len = need(a.len, "len")?;
            SequenceFile::from_sequence(&hotspot_generate(a.n, len, a.hot_fraction, a.seed)?)
                .with_meta("generator", "hotspot")
                .with_meta("hot_fraction", a.hot_fraction)
                .with_meta("seed", a.seed)
        }
        Dist::RandLb => {
            let params = RandLbParams {
                n: a.n,
                p: a.p,
                pairs: need(a.pairs, "pairs")?,
                seed: a.seed,
                exclude_initial_center: a.exclude_initial_center,
                ..RandLbParams::default()
            };
            let gen = rand_lb_generate(&params)?;
            let to_value = |v: serde_json::Result<Value>| v.expect("plain data serializes");
            SequenceFile::from_sequence(&gen.seq)
                .with_meta("generator", "rand-lb")
                .with_meta("params", to_value(serde_json::to_value(&params)))
                .with_meta("seed", a.seed)
                .with_meta("pivots", gen.pivots.iter().map(|p| p.0).collect::<Vec<_>>())
                .with_meta("patterns", to_value(serde_json::to_value(&gen.patterns)))
                .with_meta("off_cost", gen.off_cost)
        }
    };
    emit(a.out.as_deref(), file.to_json().as_bytes())
}

fn cmd_opt(a: OptArgs) -> CmdResult {
    let seq = read_sequence(&a.input)?;
    let sol = opt_star(&seq)?;
    let blocks = block_decompose(&sol.labels);
    let mut report = json!({
        "cost": sol.total_cost,
        "trajectory": sol.trajectory.iter().map(|c| c.0).collect::<Vec<_>>(),
        "phases": sol.phases,
        "labels": label_string(&sol.labels),
        "blocks": blocks.compact(),
        "decomposition": blocks,
    });
    if a.oracle {
        let oracle = brute_force_opt_with_budget(&seq, 1, a.budget)?;
        report["oracle"] = json!({
            "min_cost": oracle.min_cost,
            "optimum_count": oracle.optimum_count,
            "lexmin_reversed_phases": oracle.lexmin_reversed_phases,
        });
        if oracle.min_cost != sol.total_cost || oracle.lexmin_reversed_phases != sol.reversed_phase_lengths() {
            emit(None, format!("{report:#}\n").as_bytes())?;
            return Err(Error::Invariant("oracle disagrees with the dynamic program".into()).into());
        }
    }
    emit(None, format!("{report:#}\n").as_bytes())
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    if a.runs == 0 {
        return Err(Error::InvalidParam("--runs must be positive".into()).into());
    }
    if a.runs > 1 && !a.policy.is_randomized() {
        return Err(Error::InvalidParam(format!("--runs > 1 needs a randomized policy, got {}", a.policy)).into());
    }
    let seq = read_sequence(&a.input)?;
    let seq_id = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let eval = experiment::evaluate(a.policy, &seq, &seq_id, a.seed, a.runs, None)?;
    if let Some(path) = &a.trace_out {
        let dump = json!({ "trace": eval.trace, "report": eval.report });
        fs::write(path, format!("{dump:#}\n")).map_err(io_fail(path))?;
    }
    let rows = [eval.row];
    emit_rows(
        &rows,
        &Output {
            verify: a.verify,
            out: a.out,
        },
    )
}

fn policies_or_all(list: Vec<PolicyKind>) -> Vec<PolicyKind> {
    if list.is_empty() {
        PolicyKind::ALL.to_vec()
    } else {
        list
    }
}

fn cmd_experiment(cmd: ExperimentCmd) -> CmdResult {
    match cmd {
        ExperimentCmd::DetAdversary {
            policy,
            len,
            seed,
            output,
        } => {
            let (row, _) = experiment::det_adversary(policy, len, seed)?;
            emit_rows(&[row], &output)
        }
        ExperimentCmd::RandLbRatio { gen, output } => emit_rows(
            &experiment::rand_lb_ratio(&gen.params(), gen.sequences, gen.runs)?,
            &output,
        ),
        ExperimentCmd::Yao {
            gen,
            policy,
            sweep,
            output,
        } => {
            let rows = experiment::yao(&policies_or_all(policy), &gen.params(), gen.sequences, gen.runs, &sweep)?;
            emit_rows(&rows, &output)
        }
        ExperimentCmd::Survey {
            dist,
            n,
            len,
            sequences,
            hot_fraction,
            policy,
            runs,
            seed,
            output,
        } => {
            let workload = match dist {
                SurveyDist::Uniform => Workload::Uniform,
                SurveyDist::Hotspot => Workload::Hotspot { hot_fraction },
            };
            let rows = experiment::survey(workload, n, len, sequences, &policies_or_all(policy), seed, runs)?;
            emit_rows(&rows, &output)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Opt(a) => cmd_opt(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(c) => cmd_experiment(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
