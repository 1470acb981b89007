use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlz_core::anomdiff::{charfun_w, sample_w, TimeGrid};
use mlz_core::flights::{msd_model1, FlightModel, SimParams, StateSampler};
use mlz_core::kinetics::{para_markov_transition, phillips_fractional_power, GeneratorMatrix};
use mlz_core::lorentz::{simulate_lorentz_model1, simulate_lorentz_model2, LorentzParams};
use mlz_core::pointproc::{finite_dim_pmf, sample_ml, Region};
use mlz_core::specfun::{lamperti_sample, mittag_leffler};
use mlz_core::{FracOrder, QuadratureSpec};
use mlz_harness::criteria::run_criterion;
use mlz_harness::exec::{map_batches, with_threads};
use mlz_harness::laws::run_law_suite;
use mlz_harness::output::{fmt_f64, samples_csv, sidecar_json, write_experiment};
use mlz_harness::{run_bg_experiment, run_diffusive_experiment, ExperimentConfig, ExperimentKind, HarnessError};
use nalgebra::DMatrix;

#[derive(Parser)]
#[command(name = "mlz", version = mlz_harness::output::VERSION, about = "Mittag-Leffler flights, Lorentz gases and fractional kinetics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Global {
    /// Master seed of all random streams (default 1; overrides the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Mittag-Leffler function and Lamperti samples.
    Specfun {
        #[command(subcommand)]
        cmd: SpecfunCmd,
    },
    /// Mittag-Leffler point process.
    Pointproc {
        #[command(subcommand)]
        cmd: PointprocCmd,
    },
    /// Lorentz gas trajectories, one CSV row per trajectory at time t.
    Lorentz(LorentzArgs),
    /// Random flights.
    Flight {
        #[command(subcommand)]
        cmd: FlightCmd,
    },
    /// Mittag-Leffler anomalous diffusion.
    Anomdiff {
        #[command(subcommand)]
        cmd: AnomdiffCmd,
    },
    /// Fractional powers and para-Markov transition matrices.
    Kinetics {
        #[command(subcommand)]
        cmd: KineticsCmd,
    },
    /// Run the experiment described by --config.
    Experiment,
    /// Run an acceptance criterion or a law suite and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum SpecfunCmd {
    /// M_nu(x) for x <= 0.
    Ml {
        #[arg(long)]
        nu: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
    },
    /// Lamperti samples.
    Lamperti {
        #[arg(long)]
        nu: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum PointprocCmd {
    /// One Mittag-Leffler point configuration in a ball.
    Sample {
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// Joint count pmf for disjoint sets of the given volumes.
    Pmf {
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, value_delimiter = ',')]
        volumes: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        counts: Vec<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Markov,
    Model1,
    Model2,
}

#[derive(Args)]
struct LorentzArgs {
    #[arg(long, value_enum, default_value = "model1")]
    model: ModelArg,
    #[arg(long)]
    nu: f64,
    #[arg(long)]
    radius: f64,
    /// Collision rate; rho = lambda / (c pi R^2).
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 100)]
    n: usize,
}

#[derive(Subcommand)]
enum FlightCmd {
    /// Flight states at time t, one CSV row per flight.
    Run {
        #[arg(long, value_enum, default_value = "model1")]
        model: ModelArg,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Model-1 mean squared displacement.
    Msd {
        #[arg(long)]
        nu: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum AnomdiffCmd {
    /// Samples of W on a time grid, one CSV row per sample.
    Sample {
        #[arg(long)]
        nu: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
        times: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// One-time characteristic function.
    Charfun {
        #[arg(long)]
        nu: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
}

#[derive(Subcommand)]
enum KineticsCmd {
    /// -(-G)^nu for a generator given as rows "a,b;c,d".
    FractionalPower {
        #[arg(long)]
        nu: f64,
        #[arg(long, allow_hyphen_values = true)]
        generator: String,
    },
    /// Para-Markov transition matrix P(t).
    Transition {
        #[arg(long)]
        nu: f64,
        #[arg(long, allow_hyphen_values = true)]
        generator: String,
        #[arg(long)]
        t: f64,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Acceptance criterion 1..=13.
    #[arg(long, conflicts_with = "suite")]
    criterion: Option<u32>,
    /// Law suite id, or "all".
    #[arg(long)]
    suite: Option<String>,
}

type Res<T> = Result<T, HarnessError>;

fn order(nu: f64) -> Res<FracOrder> {
    Ok(FracOrder::new(nu)?)
}

fn parse_generator(s: &str) -> Res<GeneratorMatrix> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| r.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Config(format!("generator: {e}")))?;
    let m = rows.len();
    if rows.iter().any(|r| r.len() != m) {
        return Err(HarnessError::Config("generator must be square".into()));
    }
    Ok(GeneratorMatrix::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))?)
}

fn matrix_csv(a: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| fmt_f64(a[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn emit(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        // a closed pipe (`mlz ... | head`) is not an error
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

fn flight_model(m: ModelArg) -> FlightModel {
    match m {
        ModelArg::Markov => FlightModel::Markov,
        ModelArg::Model1 => FlightModel::Model1,
        ModelArg::Model2 => FlightModel::Model2,
    }
}

fn run_experiment(g: &Global) -> Res<String> {
    let Some(path) = &g.config else {
        return Err(HarnessError::Config("experiment needs --config".into()));
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if cfg.kind == ExperimentKind::LawCheck {
        let report = run_law_suite(cfg.suite.as_deref().unwrap_or_default())?;
        let text = sidecar_json(&cfg, &report)?;
        return Ok(text);
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    let summary = if cfg.kind.is_bg() { run_bg_experiment(&cfg)? } else { run_diffusive_experiment(&cfg)? };
    let target = g.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("experiment.csv"));
    if target.with_extension("json") == *path || target == *path {
        return Err(HarnessError::Config(format!("output {} would overwrite the config", target.display())));
    }
    let (csv, side) = write_experiment(&target, &cfg, &summary)?;
    Ok(format!("wrote {} and {}\n", csv.display(), side.display()))
}

fn run(cli: Cli) -> Res<()> {
    let g = &cli.global;
    let seed = g.seed.unwrap_or(1);
    let out = g.out.as_deref();
    match cli.verb {
        Verb::Specfun { cmd: SpecfunCmd::Ml { nu, x } } => {
            emit(out, &format!("{}\n", fmt_f64(mittag_leffler(order(nu)?, x)?)))
        }
        Verb::Specfun { cmd: SpecfunCmd::Lamperti { nu, n } } => {
            let o = order(nu)?;
            let v = map_batches(seed, 0, 0, n, 10_000, |rng| Ok(lamperti_sample(o, rng).value))?;
            emit(out, &samples_csv(&["l"], &v))
        }
        Verb::Pointproc { cmd: PointprocCmd::Sample { nu, rho, radius } } => {
            let ball = Region::ball([0.0; 3], radius)?;
            let mut rng = mlz_core::streams::stream(seed, 0);
            let cfg = sample_ml(rho, order(nu)?, &ball, &mut rng)?;
            emit(out, &samples_csv(&["x", "y", "z"], &cfg.points.concat()))
        }
        Verb::Pointproc { cmd: PointprocCmd::Pmf { nu, rho, volumes, counts } } => {
            emit(out, &format!("{}\n", fmt_f64(finite_dim_pmf(order(nu)?, rho, &volumes, &counts)?)))
        }
        Verb::Lorentz(a) => {
            let o = order(a.nu)?;
            let rho = a.lambda / (a.c * std::f64::consts::PI * a.radius * a.radius);
            let p = LorentzParams::new(o, rho, a.radius, a.c, a.t)?;
            let rows = map_batches(seed, 0, 0, a.n, 100, |rng| {
                let (x0, v0) = ([0.0; 3], [0.0, 0.0, 1.0]);
                let traj = match a.model {
                    ModelArg::Model2 => simulate_lorentz_model2(x0, v0, &p, rng)?,
                    _ => simulate_lorentz_model1(x0, v0, &p, rng)?,
                };
                let x = traj.final_position();
                let v = traj.final_direction();
                Ok([
                    x[0],
                    x[1],
                    x[2],
                    v[0],
                    v[1],
                    v[2],
                    traj.n_collisions() as f64,
                    f64::from(u8::from(traj.has_recollision())),
                    traj.mixture_draw,
                ])
            })?;
            let cols = ["x", "y", "z", "vx", "vy", "vz", "collisions", "recollision", "l"];
            emit(out, &samples_csv(&cols, &rows.concat()))
        }
        Verb::Flight { cmd: FlightCmd::Run { model, nu, lambda, c, d, t, n } } => {
            let params = SimParams::new(order(nu)?, lambda, c, d, t)?;
            let sampler = StateSampler::new(flight_model(model), params);
            let x0 = vec![0.0; d];
            let mut v0 = vec![0.0; d];
            v0[d - 1] = 1.0;
            let rows = map_batches(seed, 0, 0, n, 1000, |rng| {
                let s = sampler.sample(&x0, &v0, &[t], rng)?;
                let mut row = s.positions;
                row.extend(s.directions);
                row.push(s.n_events as f64);
                Ok(row)
            })?;
            let mut cols: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
            cols.extend((0..d).map(|k| format!("v{k}")));
            cols.push("events".into());
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            emit(out, &samples_csv(&cols, &rows.concat()))
        }
        Verb::Flight { cmd: FlightCmd::Msd { nu, lambda, c, t } } => {
            let o = order(nu)?;
            let mut vals = Vec::new();
            for &ti in &t {
                vals.push(ti);
                vals.push(msd_model1(o, lambda, c, ti)?);
            }
            emit(out, &samples_csv(&["t", "msd"], &vals))
        }
        Verb::Anomdiff { cmd: AnomdiffCmd::Sample { nu, times, d, n } } => {
            let o = order(nu)?;
            let grid = TimeGrid::new(times.clone())?;
            let rows = map_batches(seed, 0, 0, n, 10_000, |rng| Ok(sample_w(o, &grid, d, rng).positions))?;
            let cols: Vec<String> =
                times.iter().enumerate().flat_map(|(h, _)| (0..d).map(move |k| format!("w{h}_{k}"))).collect();
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            emit(out, &samples_csv(&cols, &rows.concat()))
        }
        Verb::Anomdiff { cmd: AnomdiffCmd::Charfun { nu, u, t } } => {
            emit(out, &format!("{}\n", fmt_f64(charfun_w(order(nu)?, &u, t)?)))
        }
        Verb::Kinetics { cmd: KineticsCmd::FractionalPower { nu, generator } } => {
            let a = phillips_fractional_power(&parse_generator(&generator)?, order(nu)?, &QuadratureSpec::default())?;
            emit(out, &matrix_csv(&a))
        }
        Verb::Kinetics { cmd: KineticsCmd::Transition { nu, generator, t } } => {
            let p = para_markov_transition(&parse_generator(&generator)?, order(nu)?, t, &QuadratureSpec::default())?;
            emit(out, &matrix_csv(&p))
        }
        Verb::Experiment => {
            let msg = run_experiment(g)?;
            eprint!("{msg}");
            Ok(())
        }
        Verb::Verify(v) => {
            let text = match (v.criterion, v.suite) {
                (Some(id), _) => {
                    let r = run_criterion(id, seed)?;
                    eprintln!("{}", r.line());
                    serde_json::to_string_pretty(&r)?
                }
                (None, Some(s)) => serde_json::to_string_pretty(&run_law_suite(&s)?)?,
                (None, None) => serde_json::to_string_pretty(&run_law_suite("all")?)?,
            };
            emit(out, &(text + "\n"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.global.threads;
    match with_threads(threads, || run(cli)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
