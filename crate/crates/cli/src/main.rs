use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use miqcqp::bnc::{branch_and_cut, BncConfig, BncStatus, Branching};
use miqcqp::cutloop::{tighten, CutLoopConfig, Strategy, TightenReport};
use miqcqp::instances::{gen_ils, gen_random_graph, maxcut_to_qcqp, parse_graph, parse_problem, render_graph, render_problem};
use miqcqp::oracle::{brute_force, IntBox};
use miqcqp::rounding::{ils_round, maxcut_round};
use miqcqp::{Error, QcqpProblem, SdpStatus, SymMatrix};

const EXIT_IO: u8 = 1;
const EXIT_SOLVER: u8 = 3;
const EXIT_NODE_LIMIT: u8 = 4;
const EXIT_BOX: u8 = 5;

#[derive(Parser)]
#[command(name = "miqcqp", version, about = "SDP bounds and branch-and-cut for integer QCQPs")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "MIQCQP_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for branch-and-cut nodes and rounding samples.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Ils,
    Maxcut,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchRule {
    Dual,
    Frac,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance: ILS as a JSON problem, max-cut as a graph file.
    Gen {
        family: Family,
        #[arg(long)]
        n: usize,
        /// Edge probability for max-cut graphs.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tighten the SDP relaxation with lattice cuts and report every round.
    Bound {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "combined", value_parser = parse_strategy)]
        strategy: Strategy,
        #[arg(long, default_value_t = 10)]
        max_rounds: usize,
        #[arg(long)]
        cuts_per_round: Option<usize>,
        /// Start from the cuts x_i(x_i − 1) ≥ 0 on every integer variable.
        #[arg(long)]
        baseline_k1_fixed: bool,
        /// Rounding samples for the upper bound.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a human-readable table to stdout.
        #[arg(long)]
        pretty: bool,
    },
    /// Solve globally by branch-and-cut.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        max_nodes: usize,
        #[arg(long, value_enum, default_value_t = BranchRule::Dual)]
        branching: BranchRule,
        /// Optional symmetric integer box |x_i| ≤ R.
        #[arg(long = "box")]
        radius: Option<i64>,
        #[arg(long)]
        pretty: bool,
    },
    /// Exhaustive minimum over the integer box |x_i| ≤ R.
    Oracle {
        #[arg(long = "in")]
        input: PathBuf,
        /// Box radius; defaults to the 0-1 cube for graph input.
        #[arg(long = "box")]
        radius: Option<i64>,
        #[arg(long)]
        pretty: bool,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BoxTooLarge { .. } => EXIT_BOX,
            _ => EXIT_IO,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: EXIT_IO, msg: e.to_string() }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure { code: EXIT_IO, msg: e.to_string() }
    }
}

type CliResult = Result<(), Failure>;

/// An input file: a JSON problem, or a max-cut graph in minimization form.
struct Input {
    name: String,
    problem: QcqpProblem,
    graph: Option<SymMatrix>,
}

fn read_input(path: &Path) -> Result<Input, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure { code: EXIT_IO, msg: format!("{}: {e}", path.display()) })?;
    let origin = path.display().to_string();
    let name = path.file_stem().map_or(origin.clone(), |s| s.to_string_lossy().into_owned());
    if text.trim_start().starts_with('{') {
        Ok(Input { name, problem: parse_problem(&text, &origin)?, graph: None })
    } else {
        let w = parse_graph(&text, &origin)?;
        Ok(Input { name, problem: maxcut_to_qcqp(&w)?, graph: Some(w) })
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T, pretty: bool) -> String {
    let s = if pretty { serde_json::to_string_pretty(value) } else { serde_json::to_string(value) };
    s.expect("serializable") + "\n"
}

fn gen(cli: &Cli, family: Family, n: usize, density: f64, out: Option<&Path>) -> CliResult {
    let text = match family {
        Family::Ils => render_problem(&gen_ils(n, cli.seed)?),
        Family::Maxcut => render_graph(&gen_random_graph(n, density, cli.seed)?)?,
    };
    emit(out, &text)
}

#[derive(Serialize)]
struct Row<'a> {
    instance: &'a str,
    n: usize,
    strategy: &'a str,
    round: usize,
    f_sdp: f64,
    certified_bound: Option<f64>,
    cuts_total: usize,
    upper_bound: Option<f64>,
    gap_ratio_alpha: Option<f64>,
    wall_ms: f64,
    status: &'a str,
}

/// Rounded feasible value in minimization form.
fn upper_bound(input: &Input, report: &TightenReport, samples: usize, seed: u64) -> Option<f64> {
    if !report.status().has_solution() || samples == 0 {
        return None;
    }
    let r = match &input.graph {
        Some(w) => maxcut_round(&report.solution, w, samples, seed, true).map(|r| -r.value),
        None if input.problem.is_pure_integer() => ils_round(&report.solution, &input.problem, samples, seed).map(|r| r.value),
        None => return None,
    };
    r.ok()
}

fn rows<'a>(input: &'a Input, strategy: &'a str, report: &'a TightenReport, up: Option<f64>) -> Vec<Row<'a>> {
    let f1 = report.initial_f_sdp();
    report
        .rounds
        .iter()
        .map(|r| Row {
            instance: &input.name,
            n: input.problem.n(),
            strategy,
            round: r.round,
            f_sdp: r.f_sdp,
            certified_bound: r.certified_bound,
            cuts_total: r.cuts_total,
            upper_bound: up,
            gap_ratio_alpha: up.filter(|u| *u > f1).map(|u| (u - r.f_sdp) / (u - f1)),
            wall_ms: r.wall_ms,
            status: r.status.as_str(),
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.6}"))
}

fn pretty_table(rows: &[Row]) -> String {
    let mut s = format!(
        "{:<12} {:>4} {:<10} {:>5} {:>14} {:>14} {:>6} {:>14} {:>8} {:>10} {}\n",
        "instance", "n", "strategy", "round", "f_sdp", "certified", "cuts", "upper", "alpha", "ms", "status"
    );
    for r in rows {
        s += &format!(
            "{:<12} {:>4} {:<10} {:>5} {:>14.6} {:>14} {:>6} {:>14} {:>8} {:>10.1} {}\n",
            r.instance,
            r.n,
            r.strategy,
            r.round,
            r.f_sdp,
            fmt_opt(r.certified_bound),
            r.cuts_total,
            fmt_opt(r.upper_bound),
            r.gap_ratio_alpha.map_or("-".into(), |a| format!("{a:.4}")),
            r.wall_ms,
            r.status
        );
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn bound(
    cli: &Cli,
    path: &Path,
    strategy: Strategy,
    max_rounds: usize,
    cuts_per_round: Option<usize>,
    baseline_k1_fixed: bool,
    samples: usize,
    out: Option<&Path>,
    pretty: bool,
) -> CliResult {
    let input = read_input(path)?;
    let config = CutLoopConfig { strategy, max_rounds, cuts_per_round, baseline_k1_fixed, seed: cli.seed, ..CutLoopConfig::default() };
    let report = tighten(&input.problem, &config)?;
    let up = upper_bound(&input, &report, samples, cli.seed);
    let rows = rows(&input, strategy.as_str(), &report, up);

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let csv_text = String::from_utf8(w.into_inner().map_err(|e| Failure { code: EXIT_IO, msg: e.to_string() })?)
        .expect("csv output is UTF-8");
    if pretty {
        print!("{}", pretty_table(&rows));
        if let Some(p) = out {
            fs::write(p, &csv_text)?;
        }
    } else {
        emit(out, &csv_text)?;
    }
    if report.status() != SdpStatus::Optimal {
        return Err(Failure { code: EXIT_SOLVER, msg: format!("solver stopped with status {}", report.status().as_str()) });
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    instance: &'a str,
    status: BncStatus,
    f_star: Option<f64>,
    x_star: Option<&'a [i64]>,
    /// Maximum cut weight for graph input.
    cut_value: Option<f64>,
    lower_bound: f64,
    root_bound: f64,
    nodes: usize,
    max_depth: usize,
}

fn solve(cli: &Cli, path: &Path, max_nodes: usize, branching: BranchRule, radius: Option<i64>, pretty: bool) -> CliResult {
    let input = read_input(path)?;
    let n = input.problem.n();
    let config = BncConfig {
        max_nodes,
        branching: match branching {
            BranchRule::Dual => Branching::DualCut,
            BranchRule::Frac => Branching::MostFractional,
        },
        seed: cli.seed,
        threads: cli.threads,
        bounds: radius.map(|r| IntBox::symmetric(n, r)),
        ..BncConfig::default()
    };
    let res = branch_and_cut(&input.problem, &config)?;
    for line in &res.log {
        eprintln!("{line}");
    }
    let f_star = res.f_star.is_finite().then_some(res.f_star);
    let out = SolveOutput {
        instance: &input.name,
        status: res.status,
        f_star,
        x_star: res.x_star.as_deref(),
        cut_value: input.graph.as_ref().and(f_star).map(|f| -f),
        lower_bound: res.lower_bound,
        root_bound: res.root_bound,
        nodes: res.nodes,
        max_depth: res.max_depth,
    };
    print!("{}", to_json(&out, pretty));
    if res.status == BncStatus::NodeLimit {
        return Err(Failure { code: EXIT_NODE_LIMIT, msg: format!("node limit {max_nodes} reached") });
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleOutput<'a> {
    instance: &'a str,
    f_star: Option<f64>,
    argmins: Vec<Vec<i64>>,
    points: u64,
}

fn oracle(path: &Path, radius: Option<i64>, pretty: bool) -> CliResult {
    let input = read_input(path)?;
    let n = input.problem.n();
    let bx = match (radius, &input.graph) {
        (Some(r), _) => IntBox::symmetric(n, r),
        (None, Some(_)) => IntBox::new(vec![0; n], vec![1; n])?,
        (None, None) => return Err(Failure { code: 2, msg: "--box is required for JSON problems".into() }),
    };
    let res = brute_force(&input.problem, &bx)?;
    let out = OracleOutput {
        instance: &input.name,
        f_star: res.f_star.is_finite().then_some(res.f_star),
        argmins: res.argmins,
        points: res.points,
    };
    print!("{}", to_json(&out, pretty));
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Gen { family, n, density, out } => gen(cli, *family, *n, *density, out.as_deref()),
        Command::Bound { input, strategy, max_rounds, cuts_per_round, baseline_k1_fixed, samples, out, pretty } => bound(
            cli,
            input,
            *strategy,
            *max_rounds,
            *cuts_per_round,
            *baseline_k1_fixed,
            *samples,
            out.as_deref(),
            *pretty,
        ),
        Command::Solve { input, max_nodes, branching, radius, pretty } => {
            solve(cli, input, *max_nodes, *branching, *radius, *pretty)
        }
        Command::Oracle { input, radius, pretty } => oracle(input, *radius, *pretty),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_IO);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
