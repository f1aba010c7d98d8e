mod config;
mod plot;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use tagnarx::data::{load_csv, write_csv, SyntheticSpec};
use tagnarx::evolution::{run, IterationStats};
use tagnarx::objectives::score;
use tagnarx::report::{write_history_csv, write_pareto_csv, FrontReport, ModelReport};
use tagnarx::{Dataset64, Grammar, NarxModel64, ParetoFront64};

use config::RunConfig;
use plot::{Chart, Series, Style};

#[derive(Parser, Debug)]
#[command(name = "tagnarx", version, about = "Polynomial NARX identification with tree adjoining grammars")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory
    #[arg(long, global = true, env = "TAGNARX_OUT_DIR", default_value = "tagnarx-out")]
    out: PathBuf,

    /// Override the random seed of the config or spec
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for model evaluation
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the identification loop described by a JSON config
    Identify { config: PathBuf },
    /// Score a fitted model on a CSV file
    Evaluate {
        /// A model report, or a pareto.json together with --id
        model: PathBuf,
        data: PathBuf,
        /// Front member to evaluate when MODEL is a pareto.json
        #[arg(long)]
        id: Option<u64>,
        #[arg(long, default_value = "u")]
        input: String,
        #[arg(long, default_value = "y")]
        output: String,
    },
    /// Check a grammar file for structural errors
    ValidateGrammar { grammar: PathBuf },
    /// Write synthetic records as CSV files
    Synthesize { spec: PathBuf },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Identify { config } => identify(&cli, config),
        Command::Evaluate { model, data, id, input, output } => evaluate(model, data, *id, input, output),
        Command::ValidateGrammar { grammar } => validate_grammar(grammar),
        Command::Synthesize { spec } => synthesize(&cli, spec),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    library_version: &'static str,
    seed: u64,
    threads: Option<usize>,
    /// The config file as given.
    config: Value,
    /// The config after command-line overrides and path resolution.
    effective: &'a RunConfig,
    auxiliary_trees: Vec<String>,
    records: Vec<RecordInfo>,
    iterations_run: usize,
    evaluations: usize,
    front_size: usize,
}

#[derive(Serialize)]
struct RecordInfo {
    name: String,
    samples: usize,
}

fn identify(cli: &Cli, path: &Path) -> Result<()> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = RunConfig::parse(&text, base).with_context(|| format!("in {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.gp.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.gp.threads = cli.threads;
    }
    cfg.gp.validate()?;
    let grammar = cfg.grammar()?;
    let records = cfg.records()?;
    let split = cfg.split(&records)?;

    let iterations = cfg.gp.iterations;
    let result = run(&cfg.gp, &grammar, &split.estimation, &split.validation, |r| {
        eprintln!(
            "iteration {}/{}: front {}, min rms prediction {:.6e}, min rms simulation {:.6e}, {} models fitted",
            r.iteration + 1,
            iterations,
            r.front_size,
            r.stats.min_rms_prediction,
            r.stats.min_rms_simulation,
            r.evaluations
        );
    })?;

    let out = &cli.out;
    fs::create_dir_all(out.join("plots")).with_context(|| format!("creating {}", out.display()))?;
    write_pareto_csv(&result.front, create(&out.join("pareto.csv"))?)?;
    write_json(&out.join("pareto.json"), &FrontReport::new(&result.front)?)?;
    write_history_csv(&result.history, create(&out.join("history.csv"))?)?;
    write_plots(&out.join("plots"), &result.history, &result.front)?;
    if !split.test.is_empty() {
        write_test_scores(&out.join("test_scores.csv"), &result.front, &split.test)?;
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        library_version: tagnarx::VERSION,
        seed: cfg.gp.seed,
        threads: cfg.gp.threads,
        config: serde_json::from_str(&text)?,
        effective: &cfg,
        auxiliary_trees: grammar.auxiliary_trees.iter().map(|t| t.id.to_string()).collect(),
        records: records.iter().map(|d| RecordInfo { name: d.name.clone(), samples: d.len() }).collect(),
        iterations_run: result.history.len(),
        evaluations: result.evaluations,
        front_size: result.front.len(),
    };
    write_json(&out.join("run_manifest.json"), &manifest)?;

    println!("complexity  rms_prediction  rms_simulation  model");
    for (c, ind) in result.front.best_by_complexity() {
        let f = ind.fitness.expect("front members are evaluated");
        let model = ind.model.as_ref().map(ToString::to_string).unwrap_or_default();
        println!("{c:>10}  {:>14.6e}  {:>14.6e}  {model}", f.rms_prediction, f.rms_simulation);
    }
    println!("results written to {}", out.display());
    Ok(())
}

fn write_plots(dir: &Path, history: &[IterationStats<f64>], front: &ParetoFront64) -> Result<()> {
    let it = |f: fn(&IterationStats<f64>) -> f64| history.iter().map(move |s| (s.iteration as f64, f(s)));
    let evolution = Chart {
        title: "Fitness over iterations",
        x_label: "iteration",
        y_label: "RMS error",
        series: vec![
            Series::new("min prediction", Style::Line, it(|s| s.min_rms_prediction)),
            Series::new("mean prediction", Style::Dashed, it(|s| s.mean_rms_prediction)),
            Series::new("min simulation", Style::Line, it(|s| s.min_rms_simulation)),
            Series::new("mean simulation", Style::Dashed, it(|s| s.mean_rms_simulation)),
        ],
    };
    fs::write(dir.join("fitness_evolution.svg"), evolution.render())?;

    let members: Vec<_> = front.members().iter().filter_map(|i| i.fitness).collect();
    for (file, title, label, pick) in [
        (
            "pareto_sim_vs_complexity.svg",
            "Pareto front: simulation error",
            "RMS simulation error",
            (|f| f.rms_simulation) as fn(&tagnarx::FitnessVector64) -> f64,
        ),
        (
            "pareto_pred_vs_complexity.svg",
            "Pareto front: prediction error",
            "RMS prediction error",
            |f| f.rms_prediction,
        ),
    ] {
        let chart = Chart {
            title,
            x_label: "complexity (parameters)",
            y_label: label,
            series: vec![Series::new("front", Style::Markers, members.iter().map(|f| (f.complexity as f64, pick(f))))],
        };
        fs::write(dir.join(file), chart.render())?;
    }
    Ok(())
}

fn write_test_scores(path: &Path, front: &ParetoFront64, test: &[Dataset64]) -> Result<()> {
    let mut w = create(path)?;
    use std::io::Write;
    writeln!(w, "id,complexity,rms_prediction,rms_simulation")?;
    let mut members: Vec<_> = front.members().iter().collect();
    members.sort_by_key(|i| (i.fitness.map(|f| f.complexity), i.id));
    for ind in members {
        let (Some(m), Some(f)) = (&ind.model, ind.fitness) else { continue };
        let s = score(m, test)?;
        writeln!(w, "{},{},{},{}", ind.id, f.complexity, s.rms_prediction, s.rms_simulation)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluationOutput {
    model: String,
    samples: usize,
    rms_prediction: Option<f64>,
    rms_simulation: Option<f64>,
    diverged: bool,
}

fn load_model(path: &Path, id: Option<u64>) -> Result<NarxModel64> {
    let value: Value = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let report: ModelReport = if value.get("members").is_some() {
        let front: FrontReport = serde_json::from_value(value)?;
        let Some(id) = id else { bail!("{} is a front report; pick a member with --id", path.display()) };
        front.members.into_iter().find(|m| m.id == id).with_context(|| format!("no member with id {id}"))?.report
    } else {
        serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?
    };
    Ok(report.to_model()?)
}

fn evaluate(model: &Path, data: &Path, id: Option<u64>, input: &str, output: &str) -> Result<()> {
    let m = load_model(model, id)?;
    let d: Dataset64 = load_csv(data, (input, output)).with_context(|| format!("loading {}", data.display()))?;
    let s = score(&m, std::slice::from_ref(&d))?;
    let finite = |x: f64| x.is_finite().then_some(x);
    let out = EvaluationOutput {
        model: m.to_string(),
        samples: d.len(),
        rms_prediction: finite(s.rms_prediction),
        rms_simulation: finite(s.rms_simulation),
        diverged: s.diverged,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn validate_grammar(path: &Path) -> Result<()> {
    let g = Grammar::from_json(&read(path)?).with_context(|| format!("loading grammar {}", path.display()))?;
    let violations = g.validate();
    if violations.is_empty() {
        println!(
            "ok: {} initial and {} auxiliary trees",
            g.initial_trees.len(),
            g.auxiliary_trees.len()
        );
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    bail!("{} violation(s) in {}", violations.len(), path.display())
}

/// Offset between the input and noise seeds derived from `--seed`.
const NOISE_SEED_OFFSET: u64 = 1 << 32;

fn synthesize(cli: &Cli, path: &Path) -> Result<()> {
    let mut spec: SyntheticSpec =
        serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(seed) = cli.seed {
        spec.input.seed = seed;
        spec.noise_seed = seed.wrapping_add(NOISE_SEED_OFFSET);
    }
    let records: Vec<Dataset64> = spec.generate()?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    for d in &records {
        let file = cli.out.join(format!("{}.csv", d.name));
        write_csv(d, &file)?;
        println!("{}", file.display());
    }
    Ok(())
}
