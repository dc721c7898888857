//! `mmclust` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmclust::eval::BenchmarkGrid;
use mmclust::io::{load_dataset, write_labels, write_sparse_counts, DatasetManifest};
use mmclust::{
    ari, cluster, run_benchmark, Criterion, GenerationMethod, InitConfig, InitStrategy, MmError,
    PipelineConfig, Separation, SynthSpec,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mmclust", version, about = "Multinomial mixture clustering of count data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset from a random multinomial mixture.
    Generate(GenerateArgs),
    /// Cluster a dataset and select the number of clusters.
    Fit(FitArgs),
    /// Run a benchmark grid from a JSON configuration.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    /// Symmetric Dirichlet concentration; defaults to 0.1 for ws and 1.0 for nws.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value = "ws")]
    separation: Separation,
    /// Minimum pairwise sKLD separating ws from nws models.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for data.txt, labels.txt and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Sparse (`N D NNZ`) or dense (`N D`) counts file.
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth labels, one per line; enables ARI reporting.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = mmclust::pipeline::DEFAULT_K_MAX)]
    kmax: usize,
    #[arg(long, default_value_t = mmclust::pipeline::DEFAULT_K_MIN)]
    kmin: usize,
    #[arg(long, default_value = "sm-em")]
    init: InitStrategy,
    #[arg(long = "gen", default_value = "em-hac")]
    generation: GenerationMethod,
    #[arg(long, default_value = "bic")]
    select: Criterion,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also add the multinomial coefficient to reported log-likelihoods.
    #[arg(long)]
    with_coefficient: bool,
    /// Output directory for selection.json, assignments.txt and curve.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// JSON benchmark grid.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for report.json and report.csv.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Fit(args) => fit(args),
        Command::Benchmark(args) => benchmark(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &MmError) -> u8 {
    match e.category() {
        "config" => 3,
        "data" => 4,
        "parse" => 5,
        "io" => 6,
        "model" => 7,
        "generation" => 8,
        _ => 1,
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> mmclust::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| MmError::File { path, source })
}

fn create_dir(dir: &Path) -> mmclust::Result<()> {
    fs::create_dir_all(dir).map_err(|source| MmError::File {
        path: dir.to_path_buf(),
        source,
    })
}

fn generate(args: GenerateArgs) -> mmclust::Result<()> {
    let mut spec = SynthSpec::new(args.k, args.d, args.n, args.separation, args.seed);
    spec.dirichlet_alpha = args.alpha;
    spec.threshold = args.threshold;
    let synth = mmclust::synth::generate(&spec)?;
    create_dir(&args.out)?;
    write(&args.out, "data.txt", &write_sparse_counts(&synth.dataset))?;
    let labels = synth.dataset.labels().expect("generated data is labeled");
    write(&args.out, "labels.txt", &write_labels(labels))?;
    let manifest = DatasetManifest::for_synthetic("synthetic", &synth);
    write(
        &args.out,
        "manifest.json",
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )?;
    println!(
        "wrote N={} D={} K={} ({} nonzeros, min sKLD {:.4}) to {}",
        manifest.n,
        manifest.d,
        args.k,
        manifest.nnz,
        synth.generating.min_skld,
        args.out.display()
    );
    Ok(())
}

fn fit(args: FitArgs) -> mmclust::Result<()> {
    let mut config = PipelineConfig {
        init: InitConfig::new(args.init, args.seed),
        generation: args.generation,
        criterion: args.select,
        k_min: args.kmin,
        k_max: args.kmax,
        ..Default::default()
    }
    .with_seed(args.seed);
    config.em.include_coefficient = args.with_coefficient;
    config.validate(None)?;

    let data = load_dataset(&args.data, args.labels.as_ref())?;
    let outcome = cluster(&data, &config)?;
    let selected = outcome.selected();
    let score = data
        .labels()
        .map(|l| ari(l, &outcome.assignments))
        .transpose()?;

    let summary = json!({
        "selected_k": outcome.selection.k,
        "criterion": config.criterion,
        "generation": config.generation,
        "init": config.init.strategy,
        "seed": args.seed,
        "k_min": config.k_min,
        "k_max": config.k_max,
        "n": data.n(),
        "d": data.dim(),
        "log_likelihood": selected.log_likelihood,
        "converged": selected.converged,
        "weights": selected.model.weights(),
        "ari": score,
        "curve": outcome.selection.curve.points,
        "version": mmclust::VERSION,
    });
    create_dir(&args.out)?;
    write(
        &args.out,
        "selection.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    write(&args.out, "assignments.txt", &write_labels(&outcome.assignments))?;
    write(&args.out, "curve.csv", &outcome.selection.curve.to_csv())?;

    print!(
        "selected K={} by {} over {} candidates ({:.2}s)",
        outcome.selection.k,
        config.criterion,
        config.generation,
        outcome.candidates.total_elapsed
    );
    match score {
        Some(s) => println!(", ARI={s:.4}"),
        None => println!(),
    }
    Ok(())
}

/// Resolves relative dataset paths against the directory holding the grid file.
fn rebase_paths(grid: &mut BenchmarkGrid, base: &Path) {
    for entry in &mut grid.datasets {
        for p in [&mut entry.path, &mut entry.labels].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

fn benchmark(args: BenchmarkArgs) -> mmclust::Result<()> {
    let text = fs::read_to_string(&args.config).map_err(|source| MmError::File {
        path: args.config.clone(),
        source,
    })?;
    let mut grid = BenchmarkGrid::from_json(&text)?;
    if let Some(dir) = args.config.parent() {
        rebase_paths(&mut grid, dir);
    }
    let report = run_benchmark(&grid, args.repeats, args.seed)?;
    create_dir(&args.out)?;
    write(
        &args.out,
        "report.json",
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    write(&args.out, "report.csv", &report.to_csv())?;

    for m in &report.methods {
        let s = &m.summary;
        println!(
            "{:32} runs={:3} ARI={} std={} time={:.3}s correct-K={}",
            m.method.label(),
            s.runs,
            fmt_opt(s.mean_ari),
            fmt_opt(s.std_ari),
            s.mean_time,
            fmt_opt(s.correct_k_rate)
        );
    }
    if !report.failures.is_empty() {
        eprintln!("{} runs failed; see report.json", report.failures.len());
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}
