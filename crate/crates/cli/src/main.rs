mod check;
mod output;

use std::io::{self, Write};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use freetensor_core::arith::parse_rational;
use freetensor_core::clt::convergence_table;
use freetensor_core::limit_law::{
    mu_q_cumulant, mu_q_cumulant_additive, mu_q_moment_direct, mu_q_moment_fast,
};
use freetensor_core::partitions::{pairing_census, DEFAULT_PAIR_CAP};
use freetensor_core::rmt_sim::{empirical_moments, Centering, SimConfig, WignerScale, DEFAULT_MAX_DIM, GENERATOR};
use freetensor_core::tensor_trace::{tau_closed_form, tau_oracle, tau_reduce_traced};
use freetensor_core::{CumulantSpec, Error, PairPartition, QParam, Rational, TensorParams};

use crate::check::Level;
use crate::output::{Cell, Format, Kind, Report};

const EXIT_USAGE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(name = "freetensor", version, about = "Exact limit law and traces for tensor products of free variables")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads; defaults to all cores for simulate, counts and check, 1 otherwise.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Moments of mu_q by the pairing sum and by the cumulant recursion.
    Moments(LawArgs),
    /// Free cumulants of mu_q by pairing counts and by R-transform additivity.
    Cumulants(LawArgs),
    /// Mixed tensor trace of a pair partition.
    Tau(TauArgs),
    /// Exact finite-n moments of the normalized sum against the limit.
    Converge(ConvergeArgs),
    /// Monte Carlo moments of the random-matrix model.
    Simulate(SimulateArgs),
    /// Connected and bipartite-connected pairing counts.
    Counts(CountsArgs),
    /// Run the invariant suite; exits 4 on any failure.
    Check(CheckArgs),
}

fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

#[derive(Args)]
#[command(group(ArgGroup::new("law").required(true).args(["q", "lambda"])))]
struct LawArgs {
    /// Interpolation parameter in [0, 1].
    #[arg(long, value_parser = rational_arg, conflicts_with_all = ["lambda", "sigma2"])]
    q: Option<Rational>,
    /// Mean of a; q is derived together with --sigma2.
    #[arg(long, value_parser = rational_arg, requires = "sigma2")]
    lambda: Option<Rational>,
    /// Variance of a.
    #[arg(long, value_parser = rational_arg, requires = "lambda")]
    sigma2: Option<Rational>,
    #[arg(long, default_value_t = 8)]
    max_order: usize,
}

impl LawArgs {
    fn q(&self) -> Result<QParam, Error> {
        match (&self.q, &self.lambda, &self.sigma2) {
            (Some(q), _, _) => QParam::new(q.clone()),
            (None, Some(l), Some(s)) => Ok(QParam::from_params(&TensorParams::new(l.clone(), s.clone())?)),
            _ => unreachable!("clap enforces the argument group"),
        }
    }
}

#[derive(Args)]
struct TauArgs {
    /// Pair partition such as "1,3|2,4".
    #[arg(long)]
    pairing: String,
    /// Mean of a (defaults to kappa_1 of --cumulants, else 1).
    #[arg(long, value_parser = rational_arg)]
    lambda: Option<Rational>,
    /// Variance of a (defaults to kappa_2 of --cumulants, else 1).
    #[arg(long, value_parser = rational_arg)]
    sigma2: Option<Rational>,
    /// Free cumulants kappa_1,kappa_2,... of a; higher ones are taken as zero.
    /// Enables the brute-force oracle.
    #[arg(long, value_parser = rational_arg, value_delimiter = ',')]
    cumulants: Option<Vec<Rational>>,
    /// Include the reduction steps in JSON output.
    #[arg(long)]
    steps: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long, default_value_t = 4)]
    pmax: usize,
    /// Comma-separated numbers of summands.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
    n_list: Vec<u64>,
    /// Free cumulants kappa_1,kappa_2,... of a; higher ones are taken as zero.
    #[arg(long, value_parser = rational_arg, value_delimiter = ',', required = true)]
    cumulants: Vec<Rational>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CenteringArg {
    Exact,
    Limit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    /// Off-diagonal variance 1/(d+1): unit second moment at every d.
    UnitVariance,
    /// Off-diagonal variance 1/d.
    Standard,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 50)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    pmax: usize,
    #[arg(long, value_enum, default_value_t = CenteringArg::Exact)]
    centering: CenteringArg,
    /// Normalization of the Wigner samples.
    #[arg(long, value_enum, default_value_t = ScaleArg::UnitVariance)]
    scale: ScaleArg,
    /// Largest accepted matrix dimension d.
    #[arg(long, default_value_t = DEFAULT_MAX_DIM)]
    max_dim: usize,
}

#[derive(Args)]
struct CountsArgs {
    #[arg(long, default_value_t = 8)]
    max: usize,
    /// Enumeration cap on the ground-set size.
    #[arg(long, default_value_t = DEFAULT_PAIR_CAP)]
    cap: usize,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_enum, default_value_t = Level::Quick)]
    level: Level,
}

enum Failure {
    Core(Error),
    Usage(String),
    Invariant(Box<Report>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn command_echo() -> String {
    let args: Vec<String> = std::env::args().skip(1).collect();
    format!("freetensor {}", args.join(" "))
}

fn law_report(columns: Vec<(&'static str, Kind)>, args: &LawArgs, q: &QParam) -> Report {
    let mut report = Report::new(command_echo(), columns);
    if let (Some(l), Some(s)) = (&args.lambda, &args.sigma2) {
        report.param("lambda", Cell::Exact(l.clone()));
        report.param("sigma2", Cell::Exact(s.clone()));
    }
    report.param("q", Cell::Exact(q.value().clone()));
    report.param("max_order", Cell::Int(args.max_order as u64));
    report
}

fn cmd_moments(args: &LawArgs) -> Result<Report, Failure> {
    let q = args.q()?;
    let columns = vec![
        ("order", Kind::Int),
        ("q", Kind::Exact),
        ("direct", Kind::Exact),
        ("fast", Kind::Exact),
        ("agree", Kind::Bool),
    ];
    let mut report = law_report(columns, args, &q);
    for order in (2..=args.max_order).step_by(2) {
        let direct = mu_q_moment_direct(order, &q)?;
        let fast = mu_q_moment_fast(order, &q)?;
        let agree = direct == fast;
        report.push(vec![
            Cell::Int(order as u64),
            Cell::Exact(q.value().clone()),
            Cell::Exact(direct),
            Cell::Exact(fast),
            Cell::Bool(agree),
        ]);
    }
    Ok(report)
}

fn cmd_cumulants(args: &LawArgs) -> Result<Report, Failure> {
    let q = args.q()?;
    let columns = vec![
        ("order", Kind::Int),
        ("q", Kind::Exact),
        ("counting", Kind::Exact),
        ("additive", Kind::Exact),
        ("agree", Kind::Bool),
    ];
    let mut report = law_report(columns, args, &q);
    for n in 1..=args.max_order {
        let counting = mu_q_cumulant(n, &q)?;
        let additive = mu_q_cumulant_additive(n, &q)?;
        let agree = counting == additive;
        report.push(vec![
            Cell::Int(n as u64),
            Cell::Exact(q.value().clone()),
            Cell::Exact(counting),
            Cell::Exact(additive),
            Cell::Bool(agree),
        ]);
    }
    Ok(report)
}

fn cmd_tau(args: &TauArgs) -> Result<Report, Failure> {
    let pairing: PairPartition = args.pairing.parse()?;
    let spec = match &args.cumulants {
        Some(k) => Some(CumulantSpec::with_zero_tail(k.clone())?),
        None => None,
    };
    let default = |given: &Option<Rational>, from_spec: Option<&Rational>, name: &str| -> Result<Rational, Failure> {
        match (given, from_spec) {
            (Some(g), Some(s)) if g != s => Err(Failure::Usage(format!("--{name} disagrees with --cumulants"))),
            (Some(g), _) => Ok(g.clone()),
            (None, Some(s)) => Ok(s.clone()),
            (None, None) => Ok(Rational::from_integer(1.into())),
        }
    };
    let lambda = default(&args.lambda, spec.as_ref().map(|s| s.lambda()), "lambda")?;
    let sigma2 = default(&args.sigma2, spec.as_ref().map(|s| s.sigma2()), "sigma2")?;
    let params = TensorParams::new(lambda.clone(), sigma2.clone())?;

    let closed = tau_closed_form(&pairing, &params);
    let (reduced, steps) = tau_reduce_traced(&pairing, &params);
    let oracle = match &spec {
        Some(s) => Some(tau_oracle(pairing.as_partition(), s)?),
        None => None,
    };
    let exact = |v: &freetensor_core::TraceValue| Cell::Surd(v.surd().clone());

    let mut columns = vec![
        ("pairing", Kind::Text),
        ("q", Kind::Exact),
        ("closed_form", Kind::Surd),
        ("reduced", Kind::Surd),
    ];
    if oracle.is_some() {
        columns.push(("oracle", Kind::Surd));
    }
    columns.push(("agree", Kind::Bool));
    let mut report = Report::new(command_echo(), columns);
    report.param("lambda", Cell::Exact(lambda));
    report.param("sigma2", Cell::Exact(sigma2));
    report.param("q", Cell::Exact(params.q()));
    report.param("delta2", Cell::Exact(params.delta2()));

    let agree = closed == reduced && oracle.as_ref().is_none_or(|o| *o == closed);
    let mut row = vec![
        Cell::Text(pairing.to_string()),
        Cell::Exact(params.q()),
        exact(&closed),
        exact(&reduced),
    ];
    if let Some(o) = &oracle {
        row.push(exact(o));
    }
    row.push(Cell::Bool(agree));
    report.push(row);
    if args.steps {
        report.extra = Some(("reduction_steps", serde_json::to_value(&steps).expect("steps serialize")));
    }
    Ok(report)
}

fn cmd_converge(args: &ConvergeArgs) -> Result<Report, Failure> {
    let spec = CumulantSpec::with_zero_tail(args.cumulants.clone())?;
    let params = TensorParams::from_spec(&spec)?;
    let rows = convergence_table(args.pmax, &args.n_list, &spec)?;
    let columns = vec![
        ("p", Kind::Int),
        ("n", Kind::Int),
        ("value", Kind::Surd),
        ("limit", Kind::Exact),
        ("gap", Kind::Surd),
        ("n_times_gap", Kind::Surd),
    ];
    let mut report = Report::new(command_echo(), columns);
    report.param("pmax", Cell::Int(args.pmax as u64));
    report.param(
        "cumulants",
        Cell::Text(args.cumulants.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")),
    );
    report.param("q", Cell::Exact(params.q()));
    for r in rows {
        let gap = r.gap.clone().ok_or_else(|| Failure::Usage("gap is not representable".into()))?;
        let n_gap = freetensor_core::Surd::new(
            gap.coeff() * Rational::from_integer(r.n.into()),
            gap.radicand().clone(),
        );
        report.push(vec![
            Cell::Int(r.p as u64),
            Cell::Int(r.n),
            Cell::Surd(r.value),
            Cell::Exact(r.limit),
            Cell::Surd(gap),
            Cell::Surd(n_gap),
        ]);
    }
    Ok(report)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Report, Failure> {
    let centering = match args.centering {
        CenteringArg::Exact => Centering::Exact,
        CenteringArg::Limit => Centering::Limit,
    };
    let scale = match args.scale {
        ScaleArg::UnitVariance => WignerScale::UnitVariance,
        ScaleArg::Standard => WignerScale::Standard,
    };
    let config = SimConfig {
        d: args.d,
        n: args.n,
        lambda: args.lambda,
        sigma: args.sigma,
        trials: args.trials,
        seed: args.seed,
        pmax: args.pmax,
        centering,
        scale,
        max_dim: args.max_dim,
    };
    config.validate()?;
    let result = empirical_moments(&config)?;
    let columns = vec![
        ("p", Kind::Int),
        ("empirical_mean", Kind::Float),
        ("std_error", Kind::Float),
        ("reference", Kind::Float),
        ("z_score", Kind::Float),
        ("reference_exact", Kind::Exact),
    ];
    let mut report = Report::new(command_echo(), columns);
    report.param("d", Cell::Int(args.d as u64));
    report.param("n", Cell::Int(args.n as u64));
    report.param("lambda", Cell::Float(Some(args.lambda)));
    report.param("sigma", Cell::Float(Some(args.sigma)));
    report.param("trials", Cell::Int(args.trials as u64));
    report.param("seed", Cell::Int(args.seed));
    report.param("centering", Cell::Text(format!("{centering:?}").to_lowercase()));
    report.param("scale", Cell::Text(args.scale.to_possible_value().expect("not skipped").get_name().to_string()));
    report.param("q", Cell::Exact(parse_rational(&result.q)?));
    report.param("generator", Cell::Text(GENERATOR.into()));
    for e in result.estimates {
        report.push(vec![
            Cell::Int(e.p as u64),
            Cell::Float(Some(e.empirical_mean)),
            Cell::Float(Some(e.std_error)),
            Cell::Float(Some(e.reference)),
            Cell::Float(e.z_score),
            Cell::Exact(parse_rational(&e.reference_exact)?),
        ]);
    }
    Ok(report)
}

fn cmd_counts(args: &CountsArgs) -> Result<Report, Failure> {
    let columns = vec![
        ("p", Kind::Int),
        ("pairings", Kind::Int),
        ("noncrossing", Kind::Int),
        ("connected", Kind::Int),
        ("bipartite_connected", Kind::Int),
    ];
    let mut report = Report::new(command_echo(), columns);
    report.param("max", Cell::Int(args.max as u64));
    report.param("cap", Cell::Int(args.cap as u64));
    for p in (2..=args.max).step_by(2) {
        let c = pairing_census(p, args.cap)?;
        report.push(vec![
            Cell::Int(p as u64),
            Cell::Int(c.total),
            Cell::Int(c.noncrossing),
            Cell::Int(c.connected),
            Cell::Int(c.bipartite_connected),
        ]);
    }
    Ok(report)
}

fn cmd_check(args: &CheckArgs) -> Result<Report, Failure> {
    let columns = vec![("check", Kind::Text), ("passed", Kind::Bool), ("detail", Kind::Text)];
    let mut report = Report::new(command_echo(), columns);
    report.param("level", Cell::Text(format!("{:?}", args.level).to_lowercase()));
    let mut failed = false;
    for outcome in check::run(args.level) {
        let (passed, detail) = match outcome.result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        failed |= !passed;
        report.push(vec![Cell::Text(outcome.name.into()), Cell::Bool(passed), Cell::Text(detail)]);
    }
    if failed {
        Err(Failure::Invariant(Box::new(report)))
    } else {
        Ok(report)
    }
}

fn configure_threads(cli: &Cli) {
    let parallel_by_default = matches!(
        cli.command,
        Command::Simulate(_) | Command::Counts(_) | Command::Check(_)
    );
    let threads = match cli.threads {
        Some(t) => t,
        None if parallel_by_default => 0,
        None => 1,
    };
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(&cli);
    let outcome = match &cli.command {
        Command::Moments(a) => cmd_moments(a),
        Command::Cumulants(a) => cmd_cumulants(a),
        Command::Tau(a) => cmd_tau(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Counts(a) => cmd_counts(a),
        Command::Check(a) => cmd_check(a),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let (report, code) = match outcome {
        Ok(report) => (Some(report), 0),
        Err(Failure::Invariant(report)) => (Some(*report), EXIT_INVARIANT),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            (None, EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            let code = if matches!(e, Error::Size { .. }) { EXIT_CAP } else { EXIT_USAGE };
            (None, code)
        }
    };
    if let Some(report) = report {
        if let Err(e) = report.write(cli.format, &mut out).and_then(|_| out.flush()) {
            if e.kind() != io::ErrorKind::BrokenPipe {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
    }
    ExitCode::from(code)
}
