use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use deltaml::harness::{self, ExperimentFile, TrendMargins, VerdictStatus};
use deltaml::learners::{self, LearnerKind, MovingFrame, TreeParams};
use deltaml::netsim::{self, ComputeCosts};
use deltaml::streams::{self, CirclesConfig};
use deltaml::transpiler;

#[derive(Parser)]
#[command(name = "deltaml", version, about = "Edge/cloud online learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    Circles,
    RandomTree,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario matrix and write results.csv plus per-seed step logs.
    Run {
        /// TOML experiment file.
        config: PathBuf,
        /// Replace every scenario's seeds with SEED, SEED+1, ...
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Medium profiles (TOML); the shipped defaults otherwise.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Emit C source and a size report for a serialized decision tree.
    Transpile {
        model: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Feasibility of every pattern and medium per application class.
    Recommend {
        /// results.csv from `run`, used for message sizes and measured latency.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        app_classes: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Evaluate the qualitative trends on a results table and write verdicts.json.
    CheckTrends {
        results: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Exit with status 2 when any claim fails.
        #[arg(long)]
        strict: bool,
    },
    /// Write a synthetic stream as CSV.
    Generate {
        #[arg(long, value_enum, default_value = "circles")]
        dataset: Dataset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3500)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on the newest points of a stream CSV and serialize it.
    Fit {
        stream: PathBuf,
        #[arg(long, default_value = "decision_tree")]
        learner: LearnerKind,
        #[arg(long, default_value_t = 150)]
        frame: usize,
        #[arg(long, default_value_t = learners::tree::DEFAULT_MAX_DEPTH)]
        max_depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_profiles(path: Option<&Path>) -> Result<Vec<netsim::MediumProfile>> {
    match path {
        None => Ok(netsim::default_profiles()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(netsim::parse_profiles(&text)?)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(config: &Path, seed: Option<u64>, out_dir: &Path, profiles: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut scenarios = ExperimentFile::parse(&text)?.scenarios();
    if let Some(base) = seed {
        for s in &mut scenarios {
            s.seeds = (base..base + s.seeds.len() as u64).collect();
        }
    }
    let profiles = load_profiles(profiles)?;
    let results = harness::run_matrix(&scenarios, &profiles);
    harness::write_outputs(out_dir, &results)?;
    let failed = results.iter().filter(|r| !r.row.is_ok()).count();
    println!(
        "{} scenarios ({} failed) -> {}",
        results.len(),
        failed,
        out_dir.join("results.csv").display()
    );
    for (i, r) in results.iter().enumerate().filter(|(_, r)| !r.row.is_ok()) {
        eprintln!("{}: {}", harness::scenario_stem(i, &r.scenario), r.row.error.as_deref().unwrap_or(""));
    }
    Ok(())
}

fn transpile(model_path: &Path, out_dir: &Path) -> Result<()> {
    let bytes = fs::read(model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let model = learners::deserialize(&bytes)?;
    let program = transpiler::lower_tree(&model)?;
    let source = transpiler::emit_c(&program);
    let report = transpiler::report_sizes(&model, &program, &source);
    let stem = model_path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    fs::create_dir_all(out_dir)?;
    let c_path = out_dir.join(format!("{stem}.c"));
    fs::write(&c_path, &source.text)?;
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(out_dir.join(format!("{stem}.sizes.json")), format!("{json}\n"))?;
    println!("{} ({} nodes): {json}", c_path.display(), program.nodes().len());
    Ok(())
}

fn recommend(
    results: Option<&Path>,
    profiles: Option<&Path>,
    app_classes: Option<&Path>,
    out_dir: &Path,
) -> Result<()> {
    let rows = match results {
        Some(p) => harness::read_results_csv(File::open(p).with_context(|| format!("opening {}", p.display()))?)?,
        None => Vec::new(),
    };
    let profiles = load_profiles(profiles)?;
    let apps = match app_classes {
        Some(p) => netsim::parse_app_classes(&fs::read_to_string(p)?)?,
        None => netsim::default_app_classes(),
    };
    let table = harness::emit_recommendation_table(&rows, &apps, &profiles, &ComputeCosts::default());
    let path = out_dir.join("recommendations.csv");
    harness::write_recommendation_csv(&table, create(&path)?)?;
    for r in table.iter().filter(|r| r.feasible) {
        println!("{} {} {} {:.1} ms", r.app_class, r.pattern, r.medium, r.latency_ms);
    }
    println!("-> {}", path.display());
    Ok(())
}

fn check_trends(results: &Path, out_dir: &Path, strict: bool) -> Result<()> {
    let rows = harness::read_results_csv(File::open(results).with_context(|| format!("opening {}", results.display()))?)?;
    let report = harness::trend_checks(&rows, &TrendMargins::default());
    let json = serde_json::to_string_pretty(&report)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("verdicts.json"), format!("{json}\n"))?;
    for v in &report.verdicts {
        println!("{:<15} {:?}: {}", v.id, v.status, v.detail);
    }
    if strict && report.verdicts.iter().any(|v| v.status == VerdictStatus::Fail) {
        std::process::exit(2);
    }
    Ok(())
}

fn generate(dataset: Dataset, seed: u64, n: usize, out: &Path) -> Result<()> {
    let points = match dataset {
        Dataset::Circles => streams::generate_circles(
            &CirclesConfig {
                seed,
                ..CirclesConfig::default()
            },
            n,
        )?,
        Dataset::RandomTree => {
            let cfg = harness::ScenarioConfig::default().random_tree_for(seed);
            streams::generate_random_tree_stream(&cfg, n)?
        }
    };
    streams::write_stream_csv(&points, create(out)?)?;
    println!("{} points -> {}", points.len(), out.display());
    Ok(())
}

fn fit(stream: &Path, learner: LearnerKind, frame: usize, max_depth: usize, out: &Path) -> Result<()> {
    if frame == 0 {
        bail!("--frame must be at least 1");
    }
    let points = streams::read_stream_csv(File::open(stream).with_context(|| format!("opening {}", stream.display()))?)?;
    let frame = MovingFrame::from_points(frame, points);
    let model = learners::fit_with(learner, &TreeParams { max_depth }, &frame)?;
    let bytes = model.serialize();
    fs::write(out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    println!("{learner} on {} points, {} bytes -> {}", frame.len(), bytes.len(), out.display());
    if let Some(tree) = model.as_tree() {
        print!("{}", tree.dump());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out_dir,
            profiles,
        } => run(&config, seed, &out_dir, profiles.as_deref()),
        Command::Transpile { model, out_dir } => transpile(&model, &out_dir),
        Command::Recommend {
            results,
            profiles,
            app_classes,
            out_dir,
        } => recommend(results.as_deref(), profiles.as_deref(), app_classes.as_deref(), &out_dir),
        Command::CheckTrends {
            results,
            out_dir,
            strict,
        } => check_trends(&results, &out_dir, strict),
        Command::Generate { dataset, seed, n, out } => generate(dataset, seed, n, &out),
        Command::Fit {
            stream,
            learner,
            frame,
            max_depth,
            out,
        } => fit(&stream, learner, frame, max_depth, &out),
    }
}
