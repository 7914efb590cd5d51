use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mutscope_core::bench::{generate_bench, BenchBundle, BenchSpec};
use mutscope_core::config::ProjectConfig;
use mutscope_core::pipeline::{run_pipeline, Stage};
use mutscope_core::report::{association_report, render_summary};
use mutscope_core::sampler::Strategy;
use mutscope_core::{DistanceMetric, Error};

#[derive(Parser)]
#[command(name = "mutscope", version, about = "Mutation analysis with sampling, test prioritization and coverage-based classification")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate mutants.
    Mutate(StageArgs),
    /// Build every mutant and hash the executables.
    Compile(StageArgs),
    /// Drop trivially equivalent and duplicate mutants.
    Dedup(StageArgs),
    /// Select the mutants to test.
    Sample(StageArgs),
    /// Execute tests on the sampled mutants.
    Run(StageArgs),
    /// Classify live mutants and compute the mutation score.
    Analyze(StageArgs),
    /// Run all stages and print the summary.
    Report(ReportArgs),
    /// Alias of `report`.
    Pipeline(ReportArgs),
    /// Write a synthetic bench bundle.
    BenchGen(BenchGenArgs),
    /// Pairwise association of replicated kill outcomes in a bench bundle.
    Assoc(AssocArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Project configuration file (TOML).
    #[arg(short, long, default_value = "mutscope.toml")]
    config: PathBuf,
    /// Rerun stages even when their inputs are unchanged.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workspace: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    metric: Option<DistanceMetric>,
    #[arg(long)]
    t_e: Option<f64>,
    #[arg(long)]
    t_d: Option<f64>,
    #[arg(long)]
    t_ci: Option<f64>,
    /// Score without duplicate mutants.
    #[arg(long)]
    discard_duplicates: bool,
    /// Run covering tests in original order instead of prioritizing.
    #[arg(long)]
    no_prioritize: bool,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Print the JSON report instead of the summary table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchGenArgs {
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
    /// `default` or `high-coverage`.
    #[arg(long, default_value = "default")]
    preset: String,
    #[arg(long)]
    mutants: Option<usize>,
    #[arg(long)]
    tests: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    true_ms: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AssocArgs {
    /// Bench bundle with replicates.
    #[arg(short, long)]
    bundle: PathBuf,
    #[arg(long, default_value_t = 60)]
    max_mutants: usize,
    #[arg(long, default_value_t = 20)]
    group_size: usize,
}

fn load(a: &StageArgs) -> Result<ProjectConfig, Error> {
    let mut cfg = ProjectConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = &a.workspace {
        cfg.workspace = w.clone();
    }
    if let Some(s) = a.strategy {
        cfg.sampling.strategy = s;
    }
    if let Some(t) = a.t_ci {
        cfg.sampling.t_ci = t;
    }
    let an = &mut cfg.analysis;
    if let Some(m) = a.metric {
        an.metric = m;
    }
    if let Some(t) = a.t_e {
        an.t_e = t;
    }
    if let Some(t) = a.t_d {
        an.t_d = t;
    }
    if let Some(j) = a.jobs {
        an.jobs = j;
    }
    an.discard_duplicates |= a.discard_duplicates;
    an.prioritize &= !a.no_prioritize;
    cfg.validate()?;
    Ok(cfg)
}

fn stage(a: &StageArgs, until: Stage) -> Result<(), Error> {
    let cfg = load(a)?;
    let out = run_pipeline(&cfg, until, a.force)?;
    for s in &out.reused {
        eprintln!("{s}: up to date");
    }
    for s in &out.executed {
        eprintln!("{s}: done");
    }
    println!("{}", cfg.workspace.join(until.dir_name()).display());
    Ok(())
}

fn report(a: &ReportArgs) -> Result<(), Error> {
    let cfg = load(&a.stage)?;
    let out = run_pipeline(&cfg, Stage::Report, a.stage.force)?;
    let r = out.report.expect("report stage ran");
    if a.json {
        print!("{}", r.to_json()?);
    } else {
        print!("{}", render_summary(&r));
    }
    Ok(())
}

fn bench_gen(a: &BenchGenArgs) -> Result<(), Error> {
    let mut spec = BenchSpec::preset(&a.preset).ok_or_else(|| Error::Config(format!("unknown preset `{}`", a.preset)))?;
    if let Some(v) = a.mutants {
        spec.mutants = v;
    }
    if let Some(v) = a.tests {
        spec.tests = v;
    }
    if let Some(v) = a.clusters {
        spec.clusters = v;
    }
    if let Some(v) = a.true_ms {
        spec.true_ms = v;
    }
    if let Some(v) = a.replicates {
        spec.replicates = v;
    }
    if let Some(v) = a.r2 {
        spec.r2 = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    spec.validate().map_err(|e| Error::Config(e.to_string()))?;
    let bundle = generate_bench(&spec)?;
    bundle.write(&a.out)?;
    println!(
        "{}: {} mutants, {} killable, empirical score {:.4}",
        a.out.display(),
        bundle.mutants.len(),
        spec.killable(),
        bundle.empirical_ms()
    );
    Ok(())
}

fn assoc(a: &AssocArgs) -> Result<(), Error> {
    let bundle = BenchBundle::read(&a.bundle)?;
    if bundle.replicates.is_empty() {
        return Err(Error::Config(format!("{} has no replicates", a.bundle.display())));
    }
    let r = association_report(&bundle.replicates, a.max_mutants, a.group_size)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Mutate(a) => stage(a, Stage::Mutate),
        Command::Compile(a) => stage(a, Stage::Compile),
        Command::Dedup(a) => stage(a, Stage::Dedup),
        Command::Sample(a) => stage(a, Stage::Sample),
        Command::Run(a) => stage(a, Stage::Run),
        Command::Analyze(a) => stage(a, Stage::Analyze),
        Command::Report(a) | Command::Pipeline(a) => report(a),
        Command::BenchGen(a) => bench_gen(a),
        Command::Assoc(a) => assoc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
