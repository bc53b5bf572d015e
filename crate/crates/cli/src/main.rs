use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toxflow::calib::{estimate_b_proxy, estimate_sigma, estimate_theta_daily, load_flow_csv, write_theta_cdf, Calibration};
use toxflow::config::load_config;
use toxflow::control::DEFAULT_TOL;
use toxflow::sim::{build_agents, simulate_outcomes, simulate_path, write_outcomes_csv, PnlMode, SimOptions};
use toxflow::{solve_riccati, AgentKind, CoefFn, CoefficientTable, Error, LedgerForm, McSummary, ModelSpec, Scenario, TimeGrid};

/// Optimal internalization of toxic client flow: coefficient tables,
/// Monte Carlo backtests and flow calibration.
#[derive(Parser)]
#[command(name = "toxflow", version)]
struct Cli {
    /// Worker threads for Monte Carlo (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Preset parameter set: reversion, momentum or short_signal.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Key-value model file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Time steps on [0, T].
    #[arg(long, default_value_t = TimeGrid::DEFAULT_STEPS)]
    steps: usize,
    /// Override the true feedback coefficient b with a constant.
    #[arg(long, allow_hyphen_values = true)]
    true_b: Option<f64>,
    /// Elimination algebra: consistent or as_published.
    #[arg(long, default_value = "consistent")]
    ledger: String,
}

impl ModelArgs {
    fn load(&self) -> Result<(ModelSpec, TimeGrid, LedgerForm), Error> {
        let mut spec = match (&self.scenario, &self.config) {
            (_, Some(path)) => load_config(path)?,
            (Some(name), None) => ModelSpec::preset(name.parse::<Scenario>()?),
            (None, None) => ModelSpec::preset(Scenario::Reversion),
        };
        if let Some(b) = self.true_b {
            spec = spec.with_b(CoefFn::Constant(b));
        }
        spec.validate()?;
        if self.steps < 2 {
            return Err(Error::Invalid("--steps must be at least 2".into()));
        }
        let grid = TimeGrid::for_spec(&spec, self.steps)?;
        Ok((spec, grid, self.ledger.parse()?))
    }
}

#[derive(Args)]
struct SimArgs {
    /// Comma-separated agents: partial, full, naive[:b], notrade.
    #[arg(long, default_value = "partial,full", value_delimiter = ',')]
    agents: Vec<String>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Inflow charged in the P&L: uncontrolled (z0) or realized.
    #[arg(long, default_value = "uncontrolled")]
    pnl_mode: String,
}

impl SimArgs {
    fn parse(&self) -> Result<(Vec<AgentKind>, SimOptions), Error> {
        let kinds = self.agents.iter().map(|s| s.parse()).collect::<Result<Vec<AgentKind>, _>>()?;
        if kinds.is_empty() {
            return Err(Error::Invalid("no agents given".into()));
        }
        Ok((kinds, SimOptions { pnl_mode: self.pnl_mode.parse::<PnlMode>()?, perturbation: None }))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Feedback gains, assumption report and filter covariance.
    Coeffs {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Filter covariance and innovation loadings.
    Riccati {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// One path per agent, written node by node.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Path index within the seed's stream family.
        #[arg(long, default_value_t = 0)]
        path: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Monte Carlo summary per agent under common random numbers.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 2000)]
        paths: usize,
        /// Write P&L histograms per agent.
        #[arg(long)]
        histograms: bool,
        /// Write per-path terminal scalars per agent.
        #[arg(long)]
        outcomes: bool,
        /// Write the first N trajectories per agent.
        #[arg(long, default_value_t = 0)]
        trajectories: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Volatility, daily drift and feedback proxy from a flow CSV.
    Calibrate {
        /// CSV with header timestamp,dt,dz[,q].
        #[arg(long)]
        flow: PathBuf,
        /// Also estimate the feedback proxy (needs the q column).
        #[arg(long)]
        b_proxy: bool,
        /// Merge this many consecutive bins before estimating.
        #[arg(long, default_value_t = 1)]
        rebin: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Validate a model and print its assumption report.
    Check {
        #[command(flatten)]
        model: ModelArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: invalid --workers {n}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

fn out_dir(dir: &Path) -> Result<&Path, Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Data { path: dir.display().to_string(), message: e.to_string() })?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Coeffs { model, out } => {
            let (spec, grid, form) = model.load()?;
            let out = out_dir(&out)?;
            solve_riccati(&spec, &grid)?.write_csv(&out.join("riccati.csv"))?;
            let table = match CoefficientTable::build_unchecked(&spec, &grid, form, DEFAULT_TOL) {
                Ok(t) => t,
                Err(Error::Assumption { quantity, value, t }) => {
                    let report = serde_json::json!({
                        "form": form,
                        "tol": DEFAULT_TOL,
                        "pass": false,
                        "violation": { "name": quantity, "value": value, "t": t },
                    });
                    write_json(&out.join("assumptions.json"), &report)?;
                    return Err(Error::Assumption { quantity, value, t });
                }
                Err(e) => return Err(e),
            };
            table.report.write_json(&out.join("assumptions.json"))?;
            table.write_gains_csv(&out.join("gains.csv"))?;
            for d in table.report.diagnostics.iter().filter(|d| !d.pass) {
                eprintln!("assumption violated: {} = {:e} at t = {}", d.name, d.infimum, d.argmin_t);
            }
            Ok(if table.report.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Riccati { model, out } => {
            let (spec, grid, _) = model.load()?;
            let ric = solve_riccati(&spec, &grid)?;
            ric.write_csv(&out_dir(&out)?.join("riccati.csv"))?;
            println!("min eigenvalue {:e}, residual {:e}", ric.min_eigenvalue(), ric.residual(&spec));
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { model, sim, path, out } => {
            let (spec, grid, form) = model.load()?;
            let (kinds, opts) = sim.parse()?;
            let out = out_dir(&out)?;
            for agent in build_agents(&spec, &kinds, &grid, form)? {
                let traj = simulate_path(&spec, &agent, sim.seed, path, &opts)?;
                let name = file_stem(&agent.kind);
                traj.write_csv(&out.join(format!("trajectory_{name}.csv")))?;
                traj.write_flow_csv(&out.join(format!("flow_{name}.csv")))?;
                println!("{}: {}", agent.kind, serde_json::to_string(&traj.outcome)?);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Mc { model, sim, paths, histograms, outcomes, trajectories, out } => {
            let (spec, grid, form) = model.load()?;
            let (kinds, opts) = sim.parse()?;
            if paths < 2 {
                return Err(Error::Invalid("--paths must be at least 2".into()));
            }
            let out = out_dir(&out)?;
            let mut summaries = Vec::new();
            for agent in build_agents(&spec, &kinds, &grid, form)? {
                let name = file_stem(&agent.kind);
                let res = simulate_outcomes(&spec, &agent, paths, sim.seed, &opts)?;
                let summary = McSummary::from_outcomes(&agent.kind.to_string(), sim.seed, &res);
                if histograms {
                    summary.write_histograms(out, &name)?;
                }
                if outcomes {
                    write_outcomes_csv(&out.join(format!("outcomes_{name}.csv")), &res)?;
                }
                for i in 0..trajectories.min(paths as u64) {
                    simulate_path(&spec, &agent, sim.seed, i, &opts)?
                        .write_csv(&out.join(format!("trajectory_{name}_{i}.csv")))?;
                }
                println!("{:<12} cost {:+.4} ± {:.4}", summary.agent, summary.cost.mean, summary.cost.se);
                summaries.push(summary);
            }
            write_json(&out.join("mc_summary.json"), &summaries)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Calibrate { flow, b_proxy, rebin, out } => {
            let mut series = load_flow_csv(&flow)?;
            if rebin > 1 {
                series = series.rebin(rebin)?;
            }
            let data_err = |e: Error| match e {
                Error::Invalid(message) => Error::Data { path: flow.display().to_string(), message },
                other => other,
            };
            let theta_daily = estimate_theta_daily(&series).map_err(data_err)?;
            let cal = Calibration {
                sigma_hat: estimate_sigma(&series).map_err(data_err)?,
                b_proxy: if b_proxy { Some(estimate_b_proxy(&series).map_err(data_err)?) } else { None },
                theta_daily,
            };
            let out = out_dir(&out)?;
            cal.write_json(&out.join("calibration.json"))?;
            write_theta_cdf(&out.join("theta_cdf.csv"), &cal.theta_daily)?;
            println!("sigma_hat {:.6} over {} days", cal.sigma_hat, cal.theta_daily.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { model } => {
            let (spec, grid, form) = model.load()?;
            let ric = solve_riccati(&spec, &grid)?;
            let table = CoefficientTable::build_unchecked(&spec, &grid, form, DEFAULT_TOL)?;
            println!("{}", serde_json::to_string_pretty(&table.report)?);
            println!("riccati: min eigenvalue {:e}, residual {:e}", ric.min_eigenvalue(), ric.residual(&spec));
            table.report.require()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn file_stem(kind: &AgentKind) -> String {
    kind.to_string().replace(':', "_")
}
