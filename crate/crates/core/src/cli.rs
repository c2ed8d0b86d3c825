//! Command-line front end. Every subcommand writes its results into `--out` and reports
//! failures as one `error: stage=<stage> <reason>` line on stderr.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::circuit::{read_pc, write_pc};
use crate::comprehensibility::{emit_query, incomprehensibility, read_cnf, Dialect, DEFAULT_CLAUSE_BUDGET, CNF_HEADER};
use crate::data::{binarize, Database, ExampleSet, Schema};
use crate::error::{Error, Result};
use crate::learner::{learn_mixture, MixtureConfig};
use crate::metrics::score;
use crate::pruning::{prune, Method, PruneParams};
use crate::putput::{
    elbow_threshold, elbow_threshold_log, likelihood_profile, profile_values, run_pipeline, PutputConfig,
    ThresholdRule, SCHEMA_FILE,
};

#[derive(Debug, Parser)]
#[command(name = "putput", version, about = "Extract readable queries from probabilistic circuits")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the schema sidecar and the one-hot matrix of a CSV.
    Binarize {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a mixture circuit from the positive examples.
    Learn {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        positives: PathBuf,
        #[command(flatten)]
        mixture: MixtureArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick a likelihood threshold and dump the likelihood profile.
    Elbow {
        #[arg(long)]
        circuit: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        /// Scan log-likelihoods, with epsilon in nats.
        #[arg(long)]
        log_space: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prune sum edges of a circuit.
    Prune {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        fraction: Option<f64>,
        /// Examples whose flows rank the edges (flows method).
        #[arg(long)]
        flow_set: Option<PathBuf>,
        /// Database for flow sets and scoring.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Score the pruned circuit against this example set.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline: learn, threshold, prune in two steps, extract the theory.
    Putput {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        positives: PathBuf,
        #[command(flatten)]
        mixture: MixtureArgs,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long)]
        log_space: bool,
        /// Use this probability threshold instead of the elbow.
        #[arg(long, conflicts_with_all = ["epsilon", "log_space"])]
        threshold: Option<f64>,
        #[arg(long, value_parser = parse_method, default_value = "flows")]
        method: Method,
        /// Keep a step-2 removal only when f1 strictly improves.
        #[arg(long)]
        strict: bool,
        /// Allow step-2 removals that make the theory harder to read.
        #[arg(long)]
        no_guard: bool,
        #[arg(long, default_value_t = DEFAULT_CLAUSE_BUDGET)]
        clause_budget: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a circuit or CNF against a target set.
    Score {
        /// A `putput-pc` circuit or a `putput-cnf` theory.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Incomprehensibility of a CNF theory.
    Incomp {
        cnf: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a CNF theory as a query.
    Emit {
        cnf: PathBuf,
        #[arg(long, value_parser = parse_dialect, default_value = "human")]
        dialect: Dialect,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Database CSV with a header row.
    #[arg(long)]
    pub csv: PathBuf,
    /// Schema sidecar; inferred from the CSV when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MixtureArgs {
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 50)]
    pub em_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub smooth: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl From<&MixtureArgs> for MixtureConfig {
    fn from(a: &MixtureArgs) -> Self {
        MixtureConfig {
            k: a.k,
            iterations: a.em_iters,
            smoothing: a.smooth,
            seed: a.seed,
        }
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_dialect(s: &str) -> std::result::Result<Dialect, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failed command: the stage it failed in, the error, and the exit code.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub error: Error,
    pub code: i32,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let msg = self.error.root_cause().to_string().replace('\n', " ");
        write!(f, "error: stage={} {}", self.stage, msg)
    }
}

impl Failure {
    fn new(stage: &'static str, error: Error) -> Self {
        let stage = error.stage().unwrap_or(stage);
        let code = match error.root_cause() {
            Error::Arena(_) => 1,
            _ => 2,
        };
        Failure { stage, error, code }
    }

    /// Failures while writing results are ours, not the caller's.
    fn output(error: Error) -> Self {
        Failure {
            stage: "write",
            error,
            code: 1,
        }
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, Failure>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, Failure> {
        self.map_err(|e| Failure::new(stage, e))
    }
}

/// Runs one parsed command line. Returns the lines to print on stdout.
pub fn run(cli: &Cli) -> std::result::Result<String, Failure> {
    match &cli.command {
        Command::Binarize { data, out } => {
            let db = load(data)?;
            let schema = db.schema();
            let mut w = csv::Writer::from_writer(Vec::new());
            let header: Vec<String> = (0..schema.num_bool_vars()).map(|b| schema.bool_name(b)).collect();
            w.write_record(&header).map_err(|e| Failure::output(e.into()))?;
            for e in db.examples() {
                let bits = binarize(e, schema).stage("binarize")?;
                w.write_record(bits.iter().map(|&b| if b { "1" } else { "0" }))
                    .map_err(|e| Failure::output(e.into()))?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Failure::output(Error::Data(format!("csv writer: {}", e))))?;
            let matrix = String::from_utf8(bytes).expect("csv output of utf-8 input is utf-8");
            write_files(
                out,
                &[(SCHEMA_FILE, schema_text(schema)?), ("binarized.csv", matrix)],
            )?;
            Ok(format!("examples: {}\nboolean_variables: {}\n", db.len(), schema.num_bool_vars()))
        }
        Command::Learn {
            data,
            positives,
            mixture,
            out,
        } => {
            let db = load(data)?;
            let pos = db.read_example_set(positives).stage("load")?;
            if pos.is_empty() {
                return Err(Failure::new("load", Error::Data("no positive examples".into())));
            }
            let pc = learn_mixture(&db.subset(&pos), db.schema(), &MixtureConfig::from(mixture)).stage("learn")?;
            write_files(out, &[("model.pc", write_pc(&pc)), (SCHEMA_FILE, schema_text(db.schema())?)])?;
            Ok(format!("nodes: {}\nedges: {}\n", pc.len(), pc.num_edges()))
        }
        Command::Elbow {
            circuit,
            data,
            epsilon,
            log_space,
            out,
        } => {
            let pc = read_pc(circuit).stage("load")?;
            let db = load(data)?;
            let values = profile_values(&pc, &db, *log_space).stage("elbow")?;
            let mut profile = String::from("x\tf\n");
            for (x, f) in likelihood_profile(&values) {
                writeln!(profile, "{}\t{}", x, f).unwrap();
            }
            let picked = if *log_space {
                elbow_threshold_log(&pc, &db, *epsilon)
            } else {
                elbow_threshold(&pc, &db, *epsilon).map(f64::ln)
            };
            // The profile is written even without an elbow so a threshold can be picked by hand.
            let log_t = match picked {
                Ok(t) => t,
                Err(e) => {
                    write_files(out, &[("profile.tsv", profile)])?;
                    return Err(Failure::new("elbow", e));
                }
            };
            let target = crate::data::compute_target_log(&pc, &db, log_t).stage("target")?;
            let summary = format!(
                "threshold: {}\nlog_threshold: {}\ntarget: {}\nexamples: {}\n",
                log_t.exp(),
                log_t,
                target.len(),
                db.len()
            );
            write_files(
                out,
                &[
                    ("elbow.txt", summary.clone()),
                    ("profile.tsv", profile),
                    ("target.txt", target.to_index_text()),
                ],
            )?;
            Ok(summary)
        }
        Command::Prune {
            circuit,
            method,
            alpha,
            fraction,
            flow_set,
            csv,
            schema,
            target,
            out,
        } => {
            let value = match method {
                Method::Threshold => alpha.ok_or_else(|| usage("--alpha is required for the threshold method"))?,
                _ => fraction.ok_or_else(|| usage("--fraction is required for rank-based methods"))?,
            };
            let params = PruneParams::new(*method, value).stage("args")?;
            let pc = read_pc(circuit).stage("load")?;
            let db = match csv {
                Some(c) => Some(load(&DataArgs {
                    csv: c.clone(),
                    schema: schema.clone(),
                })?),
                None => None,
            };
            let needs_db = |what: &str| usage(&format!("{} requires --csv", what));
            let flow_rows: Option<Vec<Vec<bool>>> = match (method, flow_set) {
                (Method::Flows, Some(path)) => {
                    let db = db.as_ref().ok_or_else(|| needs_db("--flow-set"))?;
                    let set = db.read_example_set(path).stage("load")?;
                    let rows = db.rows();
                    Some(set.iter().map(|i| rows[i].clone()).collect())
                }
                (Method::Flows, None) => return Err(usage("--flow-set is required for the flows method")),
                _ => None,
            };
            let pruned = prune(&pc, &params, flow_rows.as_deref()).stage("prune")?;
            let mut files = vec![("pruned.pc", write_pc(&pruned))];
            let mut summary = format!("nodes: {} -> {}\n", pc.len(), pruned.len());
            if let Some(t) = target {
                let db = db.as_ref().ok_or_else(|| needs_db("--target"))?;
                let t = db.read_example_set(t).stage("load")?;
                let covered = ExampleSet::from_bits(pruned.support(&db.columns()).stage("score")?);
                let report = score(&covered, &t, db.len()).stage("score")?.to_string();
                summary.push_str(&report);
                files.push(("report.txt", report));
            }
            write_files(out, &files)?;
            Ok(summary)
        }
        Command::Putput {
            data,
            positives,
            mixture,
            epsilon,
            log_space,
            threshold,
            method,
            strict,
            no_guard,
            clause_budget,
            out,
        } => {
            let db = load(data)?;
            let pos = db.read_example_set(positives).stage("load")?;
            let rule = match (threshold, log_space) {
                (Some(t), _) if *t > 0.0 && *t <= 1.0 => ThresholdRule::Fixed { log_t: t.ln() },
                (Some(t), _) => return Err(usage(&format!("--threshold must be in (0, 1], got {}", t))),
                (None, true) => ThresholdRule::LogElbow { epsilon: *epsilon },
                (None, false) => ThresholdRule::Elbow { epsilon: *epsilon },
            };
            let cfg = PutputConfig {
                mixture: mixture.into(),
                threshold: rule,
                method: *method,
                strict: *strict,
                guard: !*no_guard,
                clause_budget: *clause_budget,
            };
            let result = run_pipeline(&db, &pos, &cfg).stage("putput")?;
            result.write_dir(out, &db).map_err(Failure::output)?;
            Ok(result.report(&db))
        }
        Command::Score {
            model,
            data,
            target,
            out,
        } => {
            let db = load(data)?;
            let t = db.read_example_set(target).stage("load")?;
            let text = std::fs::read_to_string(model)
                .map_err(|e| Error::io(model, e))
                .stage("load")?;
            let predicted = if text.lines().next().map(str::trim) == Some(CNF_HEADER) {
                let (cnf, schema) = read_cnf(model).stage("load")?;
                if &schema != db.schema() {
                    return Err(Failure::new(
                        "load",
                        Error::SchemaMismatch("the theory's schema differs from the database schema".into()),
                    ));
                }
                cnf.models(&db)
            } else {
                let pc = read_pc(model).stage("load")?;
                ExampleSet::from_bits(pc.support(&db.columns()).stage("score")?)
            };
            let report = score(&predicted, &t, db.len()).stage("score")?.to_string();
            write_files(out, &[("report.txt", report.clone())])?;
            Ok(report)
        }
        Command::Incomp { cnf, out } => {
            let (cnf, _) = read_cnf(cnf).stage("load")?;
            let line = format!("incomprehensibility: {}\nclauses: {}\n", incomprehensibility(&cnf), cnf.len());
            write_files(out, &[("incomprehensibility.txt", line.clone())])?;
            Ok(line)
        }
        Command::Emit { cnf, dialect, out } => {
            let (cnf, schema) = read_cnf(cnf).stage("load")?;
            let query = format!("{}\n", emit_query(&cnf, &schema, *dialect));
            let name = match dialect {
                Dialect::Human => "query.txt",
                Dialect::SqlWhere => "query.sql",
            };
            write_files(out, &[(name, query.clone())])?;
            Ok(query)
        }
    }
}

fn usage(msg: &str) -> Failure {
    Failure::new("args", Error::Param(msg.to_string()))
}

fn load(data: &DataArgs) -> std::result::Result<Database, Failure> {
    let schema = data.schema.as_deref().map(Schema::read).transpose().stage("load")?;
    let (db, report) = Database::load_csv(&data.csv, schema).stage("load")?;
    if report.duplicates > 0 {
        log::warn!("{}: {} duplicate rows dropped", data.csv.display(), report.duplicates);
    }
    Ok(db)
}

fn schema_text(schema: &Schema) -> std::result::Result<String, Failure> {
    schema.to_text().stage("write")
}

fn write_files(dir: &Path, files: &[(&str, String)]) -> std::result::Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(dir, e))
        .map_err(Failure::output)?;
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| Error::io(&path, e))
            .map_err(Failure::output)?;
    }
    Ok(())
}

/// Parses `args`, configures logging and the thread pool, runs the command, and returns
/// the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: stage=args --threads must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {}", e);
        }
    }
    match run(&cli) {
        Ok(text) => {
            print!("{}", text);
            0
        }
        Err(f) => {
            eprintln!("{}", f);
            f.code
        }
    }
}
