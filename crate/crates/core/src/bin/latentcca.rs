use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use latentcca::checks::{lemma2_check, pcca_check};
use latentcca::eval::{load_dataset, run_eval, EvalConfig, EvalReport, EvalRun};
use latentcca::grader::{grade_texts, CosineMode, GraderConfig};
use latentcca::text::{embeddings_for_dim, PreprocessConfig};
use latentcca::{fit_cca, CcaConfig, Components, DataMatrix, Error, Ridge};

#[derive(Parser)]
#[command(
    name = "latentcca",
    version,
    about = "CCA toolkit and CCA-based short answer grader"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grade desired/student answer pairs from a CSV file.
    Grade(GradeArgs),
    /// Grade a dataset and report Pearson r against the gold average.
    Eval(EvalArgs),
    /// Canonical correlation analysis on numeric CSV files.
    #[command(subcommand)]
    Cca(CcaCommand),
    /// Randomized numerical self-checks.
    #[command(subcommand)]
    Check(CheckCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum CosineArg {
    Centered,
    Uncentered,
}

#[derive(Args)]
struct ScoringArgs {
    /// Embedding dimension. A `{dim}` placeholder in the embeddings path is
    /// replaced by it; otherwise vectors are truncated to this many coordinates.
    #[arg(long)]
    dim: Option<usize>,
    /// Absolute ridge added to each covariance diagonal (default: 1e-8 * trace/dim).
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long, value_enum, default_value = "uncentered")]
    cosine: CosineArg,
}

#[derive(Args)]
struct GradeArgs {
    #[arg(long)]
    embeddings: String,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    embeddings: String,
    #[arg(long)]
    dataset: PathBuf,
    /// Also report Pearson r per question.
    #[arg(long)]
    per_question: bool,
    /// Comma-separated embedding dimensions to evaluate in addition.
    #[arg(long, value_delimiter = ',')]
    sweep_dims: Vec<usize>,
    /// Write per-record grades to this CSV file.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Subcommand)]
enum CcaCommand {
    /// Fit CCA between two sample matrices (rows = samples).
    Fit {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        components: Option<usize>,
        /// Model JSON destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Predictive equivalence of canonical variates on a random two-view spec.
    Lemma2 {
        #[arg(long, default_value_t = 2)]
        latent_dim: usize,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Latent-variable estimates: covariance reconstruction and likelihood optimality.
    Pcca {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

const PCCA_INSTANCES: usize = 20;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Grade(args) => grade(args),
        Command::Eval(args) => eval(args),
        Command::Cca(CcaCommand::Fit {
            x,
            y,
            components,
            out,
        }) => cca_fit(&x, &y, components, out.as_deref()),
        Command::Check(CheckCommand::Lemma2 {
            latent_dim,
            m,
            n,
            samples,
            seed,
        }) => {
            let r = lemma2_check(latent_dim, m, n, samples, seed)?;
            println!("latent_dim={latent_dim}");
            println!("samples={samples}");
            println!("seed={seed}");
            println!("population_deviation={:e}", r.population_deviation);
            if let Some(t) = r.truncated_deviation {
                println!("truncated_deviation={t:e}");
            }
            println!("empirical_gap={:e}", r.empirical_gap);
            Ok(())
        }
        Command::Check(CheckCommand::Pcca { seed, trials }) => {
            let r = pcca_check(seed, PCCA_INSTANCES, trials)?;
            println!("instances={}", r.instances);
            println!("max_reconstruction_error={:e}", r.max_reconstruction_error);
            println!("trials={}", r.trials);
            println!("nll_successes={}", r.successes);
            println!("nll_success_fraction={}", r.success_fraction());
            Ok(())
        }
    }
}

fn grader_config(args: &ScoringArgs) -> GraderConfig {
    let mut cca = CcaConfig::default();
    if let Some(r) = args.ridge {
        cca.ridge = Ridge::Absolute(r);
    }
    GraderConfig {
        cca,
        cosine: match args.cosine {
            CosineArg::Centered => CosineMode::Centered,
            CosineArg::Uncentered => CosineMode::Uncentered,
        },
    }
}

struct Pair {
    id: String,
    desired: String,
    student: String,
}

fn read_pairs(path: &Path) -> Result<Vec<Pair>, Error> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let (id, desired, student) = (col("id")?, col("desired_answer")?, col("student_answer")?);
    let mut pairs = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let get = |k: usize| {
            row.get(k)
                .map(str::to_owned)
                .ok_or_else(|| Error::MalformedRow {
                    row: i + 2,
                    reason: format!("only {} fields", row.len()),
                })
        };
        pairs.push(Pair {
            id: get(id)?,
            desired: get(desired)?,
            student: get(student)?,
        });
    }
    Ok(pairs)
}

fn grade(args: GradeArgs) -> Result<(), Error> {
    let table = embeddings_for_dim(&args.embeddings, args.scoring.dim)?;
    let pairs = read_pairs(&args.pairs)?;
    let pre = PreprocessConfig::default();
    let config = grader_config(&args.scoring);
    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record(["id", "grade", "mean_cosine", "dim_used", "flags"])?;
    for p in &pairs {
        let g = grade_texts(&p.desired, &p.student, &table, &pre, &config);
        w.write_record([
            p.id.clone(),
            g.grade.to_string(),
            g.mean_cosine.to_string(),
            g.dim_used.to_string(),
            g.flags_label(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Error> {
    let records = load_dataset(&args.dataset)?;
    let run = EvalRun {
        embeddings: &args.embeddings,
        dim: args.scoring.dim,
        sweep_dims: &args.sweep_dims,
        per_question: args.per_question,
        config: EvalConfig {
            preprocess: PreprocessConfig::default(),
            grader: grader_config(&args.scoring),
        },
    };
    let out = run_eval(&records, &run)?;
    io::stdout().write_all(out.text.as_bytes())?;
    if let Some(path) = &args.dump {
        dump(path, &records, &out.report)?;
    }
    Ok(())
}

fn dump(
    path: &Path,
    records: &[latentcca::AnswerRecord],
    report: &EvalReport,
) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "gold", "grade", "mean_cosine", "dim_used", "flags"])?;
    for (r, g) in records.iter().zip(&report.grades) {
        w.write_record([
            r.record_id.clone(),
            r.grade_avg.to_string(),
            g.grade.to_string(),
            g.mean_cosine.to_string(),
            g.dim_used.to_string(),
            g.flags_label(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric CSV, one sample per row; a non-numeric first row is a header.
fn read_numeric_csv(path: &Path) -> Result<DataMatrix, Error> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    reason: "non-numeric field".into(),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "{} has no numeric rows",
            path.display()
        )));
    }
    DataMatrix::from_rows(&rows)
}

fn cca_fit(x: &Path, y: &Path, components: Option<usize>, out: Option<&Path>) -> Result<(), Error> {
    let a = read_numeric_csv(x)?;
    let b = read_numeric_csv(y)?;
    let mut config = CcaConfig::default();
    if let Some(k) = components {
        config.n_components = Components::Fixed(k);
    }
    let model = fit_cca(&a, &b, &config)?;
    let json = model.to_json();
    match out {
        Some(path) => fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}
