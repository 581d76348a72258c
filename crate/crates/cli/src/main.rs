use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grl_core::analysis::{
    bootstrap_ci, compare_instincts, form_probability_trace, run_baseline, transfer_matrix, write_curves_csv,
    write_trace_csv, write_transfer_csv, BaselineContext, BaselineKind, CurveSummary, TransferSettings,
    INSTINCT_INTERVAL,
};
use grl_core::harness::{
    export_metrics, latest_checkpoint, list_checkpoints, load_run_checkpoints, read_events, replay_verify,
    run_evolution, Checkpoint, PpoLearner, RunConfig, RunControl, CHECKPOINT_DIR, CONFIG_FILE,
};
use grl_core::terrain::ObstacleKind;
use grl_core::{GrlError, Result};

#[derive(Parser, Debug)]
#[command(
    name = "grl",
    version,
    about = "Evolve inheritable network fragments across generations of PPO agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run (or resume) the generational loop
    Evolve(EvolveArgs),
    /// Train fresh agents on one obstacle and write mean reward curves
    Baseline(BaselineArgs),
    /// Probe newborns carrying pool genes against random newborns
    Instinct(InstinctArgs),
    /// Estimate the 8x8 knowledge-transfer matrix
    TransferMatrix(TransferArgs),
    /// Write form probabilities of every checkpoint of a run
    Trace(RunArgs),
    /// Recompute pool scores from the event log and compare with checkpoints
    ReplayVerify(ReplayArgs),
    /// Write CSV metrics of a run
    Export(RunArgs),
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// TOML configuration file
    #[arg(short, long, env = "GRL_CONFIG")]
    config: Option<PathBuf>,
    /// Built-in profile used when no config file is given
    #[arg(long, default_value = "desk")]
    profile: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<u32>,
    #[arg(long)]
    population: Option<usize>,
    /// Episodes per lifetime
    #[arg(long)]
    lifetime: Option<u32>,
    #[arg(long)]
    hidden_width: Option<usize>,
    /// Layers per learngene
    #[arg(long)]
    n_l: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    t_end: Option<u32>,
    /// Training threads (0 = all cores)
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::profile(&self.profile)?,
        };
        let e = &mut c.evolution;
        if let Some(v) = self.seed {
            e.master_seed = v;
        }
        if let Some(v) = self.generations {
            e.generations = v;
        }
        if let Some(v) = self.population {
            e.population = v;
        }
        if let Some(v) = self.lifetime {
            e.lifetime = v;
        }
        if let Some(v) = self.n_l {
            e.n_l = v;
        }
        if let Some(v) = self.eta {
            e.eta = v;
        }
        if let Some(v) = self.beta {
            e.beta = v;
        }
        if let Some(v) = self.hidden_width {
            c.hidden_width = v;
        }
        if let Some(v) = self.t_end {
            c.env.t_end = v;
        }
        if let Some(v) = self.workers {
            c.run.workers = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Run directory (defaults to the config's output_dir, then runs/default)
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Continue from the newest checkpoint in the run directory
    #[arg(long)]
    resume: bool,
    /// Stop after this many completed generations
    #[arg(long)]
    until: Option<u32>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// scratch, learngene or pretrain_<i>
    #[arg(long, default_value = "scratch")]
    kind: String,
    #[arg(long, default_value = "step")]
    task: String,
    #[arg(long, default_value_t = 80)]
    episodes: u32,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Evolution run whose final pool supplies learngenes
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(short, long, default_value = "baseline.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InstinctArgs {
    /// Evolution run whose final pool supplies learngenes
    #[arg(long)]
    run: PathBuf,
    /// Obstacle to probe on; training obstacles are cycled when omitted
    #[arg(long)]
    task: Option<String>,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = INSTINCT_INTERVAL)]
    interval: u32,
    #[arg(short, long, default_value = "instinct.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TransferArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 40)]
    episodes: u32,
    #[arg(long, default_value_t = 3)]
    agents: u64,
    #[arg(long, default_value_t = 5)]
    eval_instances: u64,
    #[arg(short, long, default_value = "transfer_matrix.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Run directory
    #[arg(long)]
    run: PathBuf,
    /// Output file, where applicable
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    run: PathBuf,
    /// Verify only this checkpoint instead of all of them
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Evolve(a) => evolve(a),
        Command::Baseline(a) => baseline(a),
        Command::Instinct(a) => instinct(a),
        Command::TransferMatrix(a) => transfer(a),
        Command::Trace(a) => trace(a),
        Command::ReplayVerify(a) => replay(a),
        Command::Export(a) => {
            for p in export_metrics(&a.run)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn run_config(run: &Path) -> Result<RunConfig> {
    RunConfig::load(&run.join(CONFIG_FILE))
}

fn final_checkpoint(run: &Path) -> Result<Checkpoint> {
    let config = run_config(run)?;
    latest_checkpoint(run, Some(&config.hash()))?
        .ok_or_else(|| GrlError::MissingCheckpoint(format!("no checkpoints under {}", run.display())))
}

fn evolve(a: EvolveArgs) -> Result<()> {
    let config = a.config.resolve()?;
    let dir = a
        .out
        .or_else(|| config.run.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs/default"));
    let learner = PpoLearner::from_config(&config);
    let control = RunControl {
        resume: a.resume,
        until: a.until,
    };
    let outcome = run_evolution(&config, &learner, Some(&dir), control)?;
    for r in &outcome.records {
        let best = r.agents.iter().map(|x| x.raw_fitness).fold(f64::NEG_INFINITY, f64::max);
        let top = r
            .form_probability
            .iter()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(f, p)| format!("{f} {p:.3}"))
            .unwrap_or_default();
        println!(
            "generation {:>4}  best fitness {best:>9.2}  top form {top}",
            r.generation
        );
    }
    println!("completed {} generations in {}", outcome.completed, dir.display());
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let kind: BaselineKind = a.kind.parse()?;
    let task: ObstacleKind = a.task.parse()?;
    let (config, ckpt) = match &a.run {
        Some(run) => (run_config(run)?, Some(final_checkpoint(run)?)),
        None => (a.config.resolve()?, None),
    };
    let ctx = BaselineContext {
        config: &config,
        pool: ckpt.as_ref().map(|c| &c.bank.pool),
    };
    let curves = (0..a.seeds)
        .map(|s| {
            run_baseline(kind, task, a.episodes, s, &ctx).map(|r| r.curve.iter().map(|e| e.reward).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = CurveSummary::summarize(&format!("{kind}/{}", task.name()), &curves, 1000, 0)?;
    write_curves_csv(&a.out, &rows)?;
    println!("wrote {} rows to {}", rows.len(), a.out.display());
    Ok(())
}

fn instinct(a: InstinctArgs) -> Result<()> {
    let config = run_config(&a.run)?;
    let ckpt = final_checkpoint(&a.run)?;
    let task = a.task.as_deref().map(str::parse::<ObstacleKind>).transpose()?;
    let cmp = compare_instincts(&config, &ckpt.bank.pool, task, a.seeds, a.interval)?;
    let mut csv = String::from("seed,task,group,step,x\n");
    for (i, (l, r)) in cmp.learngene.iter().zip(&cmp.random).enumerate() {
        for (group, rep) in [("learngene", l), ("random", r)] {
            for (step, x) in &rep.samples {
                csv.push_str(&format!("{i},{},{group},{step},{x}\n", cmp.tasks[i].name()));
            }
        }
    }
    std::fs::write(&a.out, csv).map_err(|e| GrlError::InvalidArgument(format!("{}: {e}", a.out.display())))?;
    for (group, reps) in [("learngene", &cmp.learngene), ("random", &cmp.random)] {
        let dist: Vec<f64> = reps.iter().map(|r| r.forward_distance).collect();
        let cost: Vec<f64> = reps.iter().map(|r| r.control_cost).collect();
        let d = bootstrap_ci(&dist, 0.95, 1000, 0)?;
        let c = bootstrap_ci(&cost, 0.95, 1000, 0)?;
        println!(
            "{group:>9}: distance {:.3} [{:.3}, {:.3}]  control cost {:.3} [{:.3}, {:.3}]",
            d.mean, d.low, d.high, c.mean, c.low, c.high
        );
    }
    Ok(())
}

fn transfer(a: TransferArgs) -> Result<()> {
    let config = a.config.resolve()?;
    let settings = TransferSettings {
        episodes: a.episodes,
        seeds: a.agents,
        eval_instances: a.eval_instances,
        master_seed: config.evolution.master_seed,
    };
    let m = transfer_matrix(&config, &settings)?;
    write_transfer_csv(&a.out, &m)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn trace(a: RunArgs) -> Result<()> {
    let checkpoints = load_run_checkpoints(&a.run)?;
    let trace = form_probability_trace(&checkpoints)?;
    let out = a.out.unwrap_or_else(|| a.run.join("form_probability.csv"));
    write_trace_csv(&out, &trace)?;
    println!("wrote {} generations to {}", trace.generations.len(), out.display());
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let config = run_config(&a.run)?;
    let events = read_events(&a.run)?;
    let paths: Vec<PathBuf> = match a.checkpoint {
        Some(p) => vec![p],
        None => list_checkpoints(&a.run.join(CHECKPOINT_DIR))?
            .into_iter()
            .map(|(_, p)| p)
            .collect(),
    };
    if paths.is_empty() {
        return Err(GrlError::MissingCheckpoint(format!(
            "no checkpoints under {}",
            a.run.display()
        )));
    }
    let mut failed = Vec::new();
    for p in &paths {
        let ckpt = Checkpoint::load(p, Some(&config.hash()))?;
        let report = replay_verify(&ckpt, &events, &config);
        print!("{report}");
        if !report.passed() {
            failed.push((ckpt.generation, report.offending_genes()));
        }
    }
    if failed.is_empty() {
        return Ok(());
    }
    let detail = serde_json::to_string(&failed)?;
    Err(GrlError::CheckpointCorrupt {
        path: a.run,
        reason: format!("score replay mismatch (generation, genes): {detail}"),
    })
}
