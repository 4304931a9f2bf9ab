//! Command-line surface for the pipeline. Each subcommand runs the stages
//! up to its own, skipping any already completed in the output directory.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use bugsynth_core::coverage::Strategy;
use bugsynth_core::groundtruth::Schedule;
use bugsynth_core::pipeline::{
    stderr_progress, ExtractMode, Granularity, Pipeline, PipelineError, ProgressEvent, RunConfig, Stage,
};
use bugsynth_core::sandbox::ExecutorKind;

#[derive(Debug, Parser)]
#[command(name = "bugsynth", version, about = "Synthesize verified bug variants and repair data from tested repositories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse each snapshot into components.
    Index(Common),
    /// Run the baseline suite and build coverage graphs (cached).
    Coverage(Common),
    /// Synthesize and classify variants.
    Mutate(Common),
    /// Extract fixes for retained variants.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = snake::<ExtractMode>)]
        mode: Option<ExtractMode>,
    },
    /// Verify fixes and write the dataset, statistics and manifest.
    Assemble(Common),
    /// Every stage, resuming where a previous run stopped.
    Run(Common),
}

/// Flags override the matching fields of the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Disable data-parallel execution.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long, value_parser = snake::<Strategy>)]
    pub strategy: Option<Strategy>,
    /// Comma-separated: function, class.
    #[arg(long, value_delimiter = ',', value_parser = snake::<Granularity>)]
    pub granularity: Vec<Granularity>,
    /// Provider calls per snapshot.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Accepted trajectories kept per variant.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Rollout schedule as `temperature:rounds` pairs, e.g. `0:1,1:2`.
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<Schedule>,
    /// Run adapters in containers with this image (runtime from
    /// `--container-runtime`).
    #[arg(long)]
    pub container_image: Option<String>,
    #[arg(long, default_value = "docker")]
    pub container_runtime: String,
    #[arg(long)]
    pub max_concurrent: Option<usize>,
    /// Suppress progress events on stderr.
    #[arg(long)]
    pub quiet: bool,
}

fn snake<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

pub fn parse_schedule(s: &str) -> Result<Schedule, String> {
    let mut out = Vec::new();
    for pair in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (t, n) = pair.split_once(':').ok_or_else(|| format!("expected temperature:rounds, got {pair:?}"))?;
        let t: f64 = t.trim().parse().map_err(|e| format!("{t:?}: {e}"))?;
        let n: usize = n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?;
        out.push((t, n));
    }
    Ok(Schedule(out))
}

impl Common {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(o) = &self.output_dir {
            cfg.output_dir = Some(std::path::absolute(o).unwrap_or_else(|_| o.clone()));
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if self.sequential {
            cfg.parallel = false;
        }
        if let Some(s) = self.strategy {
            cfg.selection.strategy = s;
        }
        if !self.granularity.is_empty() {
            cfg.selection.granularity = self.granularity.clone();
        }
        if let Some(b) = self.budget {
            cfg.mutate.budget = b;
        }
        if let Some(t) = self.temperature {
            cfg.mutate.temperature = t;
        }
        if let Some(c) = self.cap {
            cfg.extract.cap = c;
        }
        if let Some(s) = &self.schedule {
            cfg.extract.schedule = s.clone();
        }
        if let Some(image) = &self.container_image {
            cfg.executor.kind = ExecutorKind::Container { runtime: self.container_runtime.clone(), image: image.clone() };
        }
        if let Some(m) = self.max_concurrent {
            cfg.executor.max_concurrent = m;
        }
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Index(c) | Command::Coverage(c) | Command::Mutate(c) | Command::Assemble(c) | Command::Run(c) => c,
            Command::Extract { common, .. } => common,
        }
    }

    fn last_stage(&self) -> Stage {
        match self {
            Command::Index(_) => Stage::Index,
            Command::Coverage(_) => Stage::Coverage,
            Command::Mutate(_) => Stage::Mutate,
            Command::Extract { .. } => Stage::Extract,
            Command::Assemble(_) | Command::Run(_) => Stage::Assemble,
        }
    }
}

/// Load the config, apply flag overrides and run. Progress goes to stderr,
/// the run summary to stdout.
pub fn execute(cli: &Cli) -> Result<bugsynth_core::pipeline::RunSummary, PipelineError> {
    let common = cli.command.common();
    let mut cfg = RunConfig::load(&common.config)?;
    common.apply(&mut cfg);
    if let Command::Extract { mode: Some(m), .. } = &cli.command {
        cfg.extract.mode = *m;
    }
    let mut pipeline = Pipeline::new(cfg)?;
    if common.quiet {
        pipeline = pipeline.with_progress(Arc::new(|_: &ProgressEvent| {}));
    } else {
        pipeline = pipeline.with_progress(stderr_progress());
    }
    pipeline.run_until(cli.command.last_stage())
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    match execute(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
