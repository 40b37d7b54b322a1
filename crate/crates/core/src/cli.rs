//! Command-line front end. Each verb loads the campaign file, applies one
//! campaign operation and writes the file back.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 usage error,
//! 3 invalid input or invariant violation, 4 unknown id or round,
//! 5 campaign not in a state that allows the operation.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::acquisition::Strategy;
use crate::campaign::{CampaignConfig, CampaignState, Measurement, SuggestOptions, Target};
use crate::design_space::{ParameterSpace, ProcessCondition};
use crate::error::{Error, Result};
use crate::hitl::ConversionLabel;
use crate::oracle_sim::{run_benchmark, Arm, BenchmarkConfig, SyntheticLab};
use crate::reports;

pub const CAMPAIGN_ENV: &str = "HITL_MOBO_CAMPAIGN";

#[derive(Debug, Parser)]
#[command(
    name = "hitl-mobo",
    version,
    about = "Human-in-the-loop multi-objective Bayesian optimization campaigns"
)]
pub struct Cli {
    /// Campaign file.
    #[arg(long, global = true, env = CAMPAIGN_ENV, default_value = "campaign.json")]
    pub campaign: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Ehvi,
    ParetoUcb,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Ehvi => Strategy::EhviGreedy,
            StrategyArg::ParetoUcb => Strategy::ParetoUcb,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    Dispersion,
    Leakage,
    Conversion,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Dispersion => Target::Dispersion,
            TargetArg::Leakage => Target::Leakage,
            TargetArg::Conversion => Target::Conversion,
        }
    }
}

#[derive(Debug, Args)]
pub struct JsonFlag {
    /// Machine-readable output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a campaign file with an initial Latin hypercube round.
    Init {
        /// JSON array of five {name, min, max, step, unit} entries.
        #[arg(long)]
        space: Option<PathBuf>,
        /// JSON campaign configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        n_init: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long)]
        q: Option<usize>,
        /// Disable the conversion-score feasibility weight.
        #[arg(long)]
        no_hitl: bool,
        /// Start with no rounds (for ingesting existing data).
        #[arg(long)]
        empty: bool,
        /// Overwrite an existing campaign file.
        #[arg(long)]
        force: bool,
    },
    /// Add observations from a dataset CSV.
    Ingest { csv: Vec<PathBuf> },
    /// Fit the models and open a new round of suggestions.
    Suggest {
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long, conflicts_with = "no_hitl")]
        hitl: bool,
        #[arg(long)]
        no_hitl: bool,
        /// Round tag (defaults to the round index).
        #[arg(long)]
        label: Option<String>,
        /// Suggest even though the latest round is still open.
        #[arg(long)]
        concurrent: bool,
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Record a conversion score: unconverted, partially_converted,
    /// converted, partially_burned, burned, or a numeric score.
    Score {
        id: String,
        #[arg(allow_hyphen_values = true)]
        label: String,
    },
    /// Record measurements as mean±std (or mean+-std), or --unmeasurable.
    Record {
        id: String,
        #[arg(allow_hyphen_values = true, required_unless_present = "unmeasurable")]
        dispersion: Option<String>,
        #[arg(allow_hyphen_values = true, required_unless_present = "unmeasurable")]
        leakage: Option<String>,
        #[arg(long, conflicts_with_all = ["dispersion", "leakage"])]
        unmeasurable: bool,
    },
    /// Rounds and pending work.
    Status {
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Measured points, measured front and model front.
    Pareto {
        #[arg(long)]
        csv: bool,
        /// Skip fitting the model front.
        #[arg(long)]
        measured_only: bool,
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Dominated hypervolume after each round.
    Hypervolume {
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Compare a round's measurements with the model that suggested it.
    Converged {
        #[arg(long)]
        round: Option<usize>,
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Shapley attributions of a fitted model over its training set.
    Shap {
        #[arg(long, value_enum, default_value = "dispersion")]
        target: TargetArg,
        /// Per-(instance, feature) CSV output file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Raw and constrained UCB over a two-parameter sweep.
    AcqMap {
        /// Swept parameters as indices or names, e.g. `0,1`.
        #[arg(long, default_value = "0,1")]
        pair: String,
        /// Values of the other three parameters in ascending order.
        #[arg(long, allow_hyphen_values = true)]
        fixed: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Run a synthetic lab: complete the latest round, or probe one condition.
    Simulate {
        /// Lab JSON; the built-in default lab when omitted.
        lab: Option<PathBuf>,
        /// Probe a single condition (five comma-separated values) instead.
        #[arg(long)]
        condition: Option<String>,
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Yield benchmark on a synthetic lab.
    Benchmark {
        #[arg(long)]
        lab: Option<PathBuf>,
        /// Run both arms (with and without the feasibility model).
        #[arg(long)]
        ab: bool,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        rounds: usize,
        #[arg(long, default_value_t = 5)]
        q: usize,
        #[arg(long, value_enum, default_value = "pareto-ucb")]
        strategy: StrategyArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API for the campaign.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write figure data as CSV files into a directory.
    Export {
        #[arg(long, default_value = "export")]
        dir: PathBuf,
    },
}

/// Exit code for a campaign error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_)
        | Error::Range { .. }
        | Error::Parameter(_)
        | Error::Parse { .. }
        | Error::Invariant(_)
        | Error::Json(_)
        | Error::Csv(_) => 3,
        Error::NotFound(_) => 4,
        Error::State(_)
        | Error::Conflict(_)
        | Error::InsufficientData(_)
        | Error::Exhausted
        | Error::Version { .. } => 5,
        Error::Numerical(_) | Error::Fitting(_) | Error::Io(_) => 1,
    }
}

/// Parses `argv` and runs the command, printing diagnostics to stderr.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(path: &Path) -> Result<CampaignState> {
    if !path.exists() {
        return Err(Error::NotFound(format!(
            "campaign file {} does not exist (run `hitl-mobo init` or set {CAMPAIGN_ENV})",
            path.display()
        )));
    }
    CampaignState::load(path)
}

fn emit_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_or_print(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_condition(text: &str) -> Result<ProcessCondition> {
    Ok(ProcessCondition(reports::parse_reals::<5>(text)?))
}

fn load_lab(path: Option<&Path>) -> Result<SyntheticLab> {
    match path {
        Some(p) => SyntheticLab::from_json(&std::fs::read_to_string(p)?),
        None => Ok(SyntheticLab::default()),
    }
}

/// Runs a parsed command, writing normal output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let path = cli.campaign.as_path();
    match &cli.command {
        Command::Init {
            space,
            config,
            n_init,
            seed,
            strategy,
            q,
            no_hitl,
            empty,
            force,
        } => {
            if path.exists() && !force {
                return Err(Error::Conflict(format!(
                    "{} already exists (use --force to overwrite)",
                    path.display()
                )));
            }
            let space = match space {
                Some(p) => serde_json::from_str::<ParameterSpace>(&std::fs::read_to_string(p)?)?,
                None => ParameterSpace::photonic_curing(),
            };
            let mut cfg = match config {
                Some(p) => serde_json::from_str::<CampaignConfig>(&std::fs::read_to_string(p)?)?,
                None => CampaignConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            if let Some(s) = strategy {
                cfg.strategy = (*s).into();
            }
            if let Some(q) = q {
                cfg.q = *q;
            }
            if *no_hitl {
                cfg.hitl = false;
            }
            let state = if *empty {
                CampaignState::new(space, cfg)?
            } else {
                CampaignState::start(space, cfg, *n_init)?
            };
            state.save(path)?;
            writeln!(
                out,
                "created {} with {} pending conditions",
                path.display(),
                state.observations().len()
            )?;
        }
        Command::Ingest { csv } => {
            let mut state = load(path)?;
            let mut total = 0;
            for file in csv {
                total += state.ingest_path(file)?;
            }
            state.save(path)?;
            writeln!(
                out,
                "ingested {total} observations ({} functional in campaign)",
                state.functional().count()
            )?;
        }
        Command::Suggest {
            strategy,
            q,
            hitl,
            no_hitl,
            label,
            concurrent,
            json,
        } => {
            let mut state = load(path)?;
            let options = SuggestOptions {
                strategy: strategy.map(Into::into),
                hitl: if *hitl {
                    Some(true)
                } else if *no_hitl {
                    Some(false)
                } else {
                    None
                },
                q: *q,
                label: label.clone(),
                concurrent: *concurrent,
            };
            let record = state.suggest_round(&options)?.clone();
            state.save(path)?;
            if json.json {
                emit_json(out, &record)?;
            } else {
                writeln!(
                    out,
                    "round {} ({}) {:?}, feasibility model {}",
                    record.index,
                    record.label,
                    record.strategy,
                    if record.hitl_enabled { "on" } else { "off" }
                )?;
                for p in &record.predictions {
                    let o = state.observation(&p.id)?;
                    write!(
                        out,
                        "  {:>5}  {}  dispersion {:.3} ± {:.3}  leakage {:.3} ± {:.3}",
                        p.id, o.condition, p.dispersion[0], p.dispersion[1], p.leakage[0], p.leakage[1]
                    )?;
                    match p.p_constraint {
                        Some(v) => writeln!(out, "  p {v:.3}")?,
                        None => writeln!(out)?,
                    }
                }
            }
        }
        Command::Score { id, label } => {
            let mut state = load(path)?;
            let label: ConversionLabel = label.parse()?;
            state.set_score(id, label)?;
            state.save(path)?;
            writeln!(out, "{id}: {label}")?;
        }
        Command::Record {
            id,
            dispersion,
            leakage,
            unmeasurable,
        } => {
            let mut state = load(path)?;
            if *unmeasurable {
                state.mark_unmeasurable(id)?;
                writeln!(out, "{id}: unmeasurable")?;
            } else {
                let d: Measurement = dispersion.as_deref().unwrap_or_default().parse()?;
                let l: Measurement = leakage.as_deref().unwrap_or_default().parse()?;
                state.set_objectives(id, d, l)?;
                writeln!(out, "{id}: dispersion {d}, leakage {l}")?;
            }
            state.save(path)?;
        }
        Command::Status { json } => {
            let state = load(path)?;
            let status = state.status();
            if json.json {
                emit_json(out, &status)?;
            } else {
                writeln!(
                    out,
                    "{} observations, {} scored, {} functional",
                    status.observations, status.scored, status.functional
                )?;
                for r in &status.rounds {
                    writeln!(
                        out,
                        "  round {:>2} {:<4} {:<12} hitl {:<3} {:>2} suggested {:>2} functional  {:?}",
                        r.index,
                        r.label,
                        format!("{:?}", r.strategy),
                        if r.hitl_enabled { "on" } else { "off" },
                        r.suggested,
                        r.functional,
                        r.status
                    )?;
                }
                writeln!(out, "{} pending scores", status.pending_scores.len())?;
                writeln!(out, "{} pending measurements", status.pending_objectives.len())?;
            }
        }
        Command::Pareto {
            csv,
            measured_only,
            json,
        } => {
            let state = load(path)?;
            let models = if *measured_only {
                None
            } else {
                state.current_models().ok()
            };
            let view = reports::pareto_view(&state, models.as_ref())?;
            if json.json {
                emit_json(out, &view)?;
            } else if *csv {
                out.write_all(reports::pareto_csv(&view).as_bytes())?;
            } else {
                writeln!(
                    out,
                    "measured Pareto front ({} of {} functional):",
                    view.measured_front.len(),
                    view.measured.len()
                )?;
                for m in &view.measured_front {
                    writeln!(
                        out,
                        "  {:>5}  dispersion {:.3} ± {:.3}  leakage {:.3} ± {:.3}",
                        m.id, m.point.f1, m.std[0], m.point.f2, m.std[1]
                    )?;
                }
                if !view.model_front.is_empty() {
                    writeln!(out, "model front: {} points", view.model_front.len())?;
                }
            }
        }
        Command::Hypervolume { json } => {
            let state = load(path)?;
            let h = state.hypervolume_history();
            if json.json {
                emit_json(out, &h)?;
            } else {
                for e in &h {
                    writeln!(
                        out,
                        "round {:>2} ({:<3})  {:.6}  ({} functional)",
                        e.round, e.label, e.hypervolume, e.functional
                    )?;
                }
            }
        }
        Command::Converged { round, json } => {
            let state = load(path)?;
            let round = match round {
                Some(r) => *r,
                None => state
                    .rounds()
                    .iter()
                    .rev()
                    .find(|r| state.model_snapshots().iter().any(|s| s.round == r.index))
                    .map(|r| r.index)
                    .ok_or_else(|| Error::State("no suggested round to check".into()))?,
            };
            let report = state.check_convergence(round)?;
            if json.json {
                emit_json(out, &report)?;
            } else {
                for c in &report.checks {
                    writeln!(
                        out,
                        "  {:>5} {:<10} measured {:.3}  predicted {:.3} ± {:.3}  {}",
                        c.id,
                        c.target.as_str(),
                        c.measured,
                        c.predicted_mean,
                        c.predicted_std,
                        if c.within { "within" } else { "outside" }
                    )?;
                }
                writeln!(
                    out,
                    "round {round}: {}",
                    if report.converged { "converged" } else { "not converged" }
                )?;
            }
        }
        Command::Shap {
            target,
            out: file,
            json,
        } => {
            let state = load(path)?;
            let models = state.current_models()?;
            let (summary, ids) = reports::shap_report(&state, &models, (*target).into())?;
            if let Some(f) = file {
                std::fs::write(f, summary.to_csv(Some(&ids)))?;
            }
            if json.json {
                emit_json(out, &summary)?;
            } else {
                for name in &summary.ranking {
                    let f = summary.features.iter().find(|f| &f.name == name).unwrap();
                    writeln!(
                        out,
                        "  {:<16} mean|φ| {:.4}  spearman {}",
                        f.name,
                        f.mean_abs_phi,
                        f.spearman.map_or("n/a".into(), |s| format!("{s:+.3}"))
                    )?;
                }
            }
        }
        Command::AcqMap {
            pair,
            fixed,
            out: file,
            json,
        } => {
            let state = load(path)?;
            let models = state.current_models()?;
            let pair = reports::parse_pair(&state, pair)?;
            let fixed = fixed.as_deref().map(reports::parse_reals::<3>).transpose()?;
            let map = reports::acq_map(&state, &models, pair, fixed)?;
            if json.json {
                emit_json(out, &map)?;
            } else {
                write_or_print(out, file.as_deref(), &map.to_csv())?;
            }
        }
        Command::Simulate { lab, condition, json } => {
            let lab = load_lab(lab.as_deref())?;
            if let Some(c) = condition {
                let result = lab.simulate_condition(&parse_condition(c)?)?;
                if json.json {
                    emit_json(out, &result)?;
                } else {
                    writeln!(out, "dose {:.4}  {}", result.dose, result.label)?;
                    if let (Some(d), Some(l)) = (result.dispersion, result.leakage) {
                        writeln!(out, "dispersion {d}  leakage {l}")?;
                    }
                }
            } else {
                let mut state = load(path)?;
                lab.complete_latest_round(&mut state)?;
                state.save(path)?;
                let r = state.latest_round().unwrap();
                writeln!(out, "round {} completed: {:?}", r.index, r.status)?;
            }
        }
        Command::Benchmark {
            lab,
            ab,
            seeds,
            seed,
            rounds,
            q,
            strategy,
            out: file,
        } => {
            let lab = load_lab(lab.as_deref())?;
            let config = BenchmarkConfig {
                rounds: *rounds,
                q: *q,
                strategy: (*strategy).into(),
                seed: *seed,
                ..BenchmarkConfig::default()
            };
            let arms: &[Arm] = if *ab { &[Arm::Hitl, Arm::Baseline] } else { &[Arm::Hitl] };
            let report = run_benchmark(&lab, &config, arms, *seeds)?;
            write_or_print(out, file.as_deref(), &report.to_csv())?;
            for (arm, y) in &report.mean_yield {
                eprintln!(
                    "{}: mean post-initial yield {:.3} over {} seeds",
                    arm.as_str(),
                    y,
                    seeds
                );
            }
        }
        Command::Serve { port, host } => {
            let state = load(path)?;
            crate::server_api::serve_blocking(state, Some(path.to_path_buf()), host, *port)?;
        }
        Command::Export { dir } => {
            let state = load(path)?;
            std::fs::create_dir_all(dir)?;
            let write = |name: &str, text: String| std::fs::write(dir.join(name), text);
            write("observations.csv", reports::observations_csv(&state))?;
            write("hypervolume.csv", reports::hypervolume_csv(&state))?;
            let models = state.current_models().ok();
            let view = reports::pareto_view(&state, models.as_ref())?;
            write("pareto.csv", reports::pareto_csv(&view))?;
            let mut written = vec!["observations.csv", "hypervolume.csv", "pareto.csv"];
            if let Some(m) = &models {
                for (t, name) in [
                    (Target::Dispersion, "shap_dispersion.csv"),
                    (Target::Leakage, "shap_leakage.csv"),
                ] {
                    let (s, ids) = reports::shap_report(&state, m, t)?;
                    write(name, s.to_csv(Some(&ids)))?;
                    written.push(name);
                }
                write("acq_map.csv", reports::acq_map(&state, m, (0, 1), None)?.to_csv())?;
                written.push("acq_map.csv");
                if m.conversion.is_some() {
                    write(
                        "constraint_map.csv",
                        reports::constraint_map(&state, m, (0, 1), None)?.to_csv(),
                    )?;
                    written.push("constraint_map.csv");
                }
            }
            writeln!(out, "wrote {} to {}", written.join(", "), dir.display())?;
        }
    }
    Ok(())
}
