//! The `forestview` command line: train, compare, cluster and export.
//!
//! Every command goes through the same session and payload code as the HTTP
//! service, so `export` writes the bytes the service would return.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use forestview_core::interchange::export_forest;
use forestview_core::TrainParams;
use forestview_service::payload::{self, render};
use forestview_service::{CsvOptions, Engine, Session, Store};

pub mod report;

#[derive(Parser)]
#[command(name = "forestview", version, about = "Cluster and summarize the trees of a random forest")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Number of trees.
    #[arg(long, env = "FORESTVIEW_TREES", default_value_t = 100)]
    trees: usize,
    /// Maximum tree depth; unlimited when omitted.
    #[arg(long, env = "FORESTVIEW_MAX_DEPTH")]
    max_depth: Option<usize>,
    #[arg(long, env = "FORESTVIEW_SEED", default_value_t = 0)]
    seed: u64,
    /// Fraction of rows held out for testing, stratified by class.
    #[arg(long, env = "FORESTVIEW_TEST_FRACTION", default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long, default_value_t = 2)]
    min_samples_split: usize,
    /// Features tried per split; ceil(sqrt(F)) when omitted.
    #[arg(long)]
    features_per_split: Option<usize>,
    /// Train every tree on all training rows instead of a bootstrap sample.
    #[arg(long)]
    no_bootstrap: bool,
}

impl TrainArgs {
    fn params(&self) -> TrainParams {
        TrainParams {
            n_trees: self.trees,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            features_per_split: self.features_per_split,
            bootstrap: !self.no_bootstrap,
            seed: self.seed,
            test_fraction: self.test_fraction,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest on a CSV file (or `builtin:glass`, `builtin:penguin`)
    /// and write the forest document.
    Train {
        csv: String,
        /// Label column; the last column by default.
        #[arg(long)]
        label: Option<String>,
        /// Columns to treat as categorical even if numeric.
        #[arg(long, value_delimiter = ',')]
        categorical: Vec<String>,
        /// Dataset name recorded in the document.
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        train: TrainArgs,
        /// Output file; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the tree distance matrix as a tab-separated table.
    Distances {
        forest: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print cluster labels, medoids and the cluster-count curve.
    Cluster {
        forest: PathBuf,
        /// Minimum cluster size; the curve's elbow when omitted.
        #[arg(long)]
        min_size: Option<usize>,
    },
    /// Write every view payload for a forest into a directory.
    Export {
        forest: PathBuf,
        #[arg(long)]
        min_size: Option<usize>,
        /// Filter clause `FEATURE:lo..hi` or `cell:TRUE->PRED`; repeatable.
        #[arg(long = "filter", value_name = "SPEC")]
        filters: Vec<String>,
        #[arg(short, long, default_value = "export")]
        out_dir: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "FORESTVIEW_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Where sessions are persisted; in memory only when omitted.
        #[arg(long, env = "FORESTVIEW_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
}

fn write_out(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(path) => fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|()| out.flush()).context("cannot write to standard output")
        }
    }
}

/// Loads a forest document the same way the service's upload endpoint does.
fn load(path: &Path) -> Result<Session> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Session::from_interchange("cli".into(), &bytes).with_context(|| format!("in {}", path.display()))
}

fn train(csv: &str, label: Option<String>, categorical: Vec<String>, name: Option<String>, args: &TrainArgs) -> Result<Vec<u8>> {
    let params = args.params();
    let session = if let Some(builtin) = csv.strip_prefix("builtin:") {
        if label.is_some() || !categorical.is_empty() {
            bail!("--label and --categorical do not apply to built-in datasets");
        }
        Session::from_builtin("cli".into(), builtin, &params)?
    } else {
        let bytes = fs::read(csv).with_context(|| format!("cannot read {csv}"))?;
        let opts = CsvOptions {
            name: name.or_else(|| Path::new(csv).file_stem().map(|s| s.to_string_lossy().into_owned())),
            label,
            categorical,
        };
        Session::from_csv("cli".into(), &bytes, &opts, &params).with_context(|| format!("in {csv}"))?
    };
    Ok(export_forest(session.forest(), session.dataset(), true)?)
}

fn export(forest: &Path, min_size: Option<usize>, filters: &[String], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let s = load(forest)?;
    let filter = payload::parse_filter(&s, filters.iter().map(String::as_str))?;
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut files = vec![
        ("overview.json".to_string(), render(&payload::overview(&s)?)?),
        ("projection.json".to_string(), render(&payload::projection(&s, min_size)?)?),
    ];
    let set = payload::clusters(&s, min_size, &filter)?;
    files.push(("clusters.json".to_string(), render(&set)?));
    for c in 0..set.clusters.len() {
        files.push((format!("cluster-{c}.json"), render(&payload::cluster(&s, min_size, c, &filter)?)?));
        files.push((format!("trees-{c}.json"), render(&payload::trees(&s, min_size, c)?)?));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

fn serve(addr: SocketAddr, data_dir: Option<PathBuf>, params: TrainParams) -> Result<()> {
    params.validate()?;
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    if let Some(dir) = &data_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let engine = Arc::new(Engine::new(data_dir.map(Store::new), params));
    let rt = tokio::runtime::Runtime::new().context("cannot start runtime")?;
    rt.block_on(forestview_service::serve(engine, addr))
        .with_context(|| format!("cannot serve on {addr}"))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            csv,
            label,
            categorical,
            name,
            train: args,
            output,
        } => write_out(output.as_deref(), &train(&csv, label, categorical, name, &args)?),
        Command::Distances { forest, output } => {
            let s = load(&forest)?;
            write_out(output.as_deref(), s.matrix().to_table().as_bytes())
        }
        Command::Cluster { forest, min_size } => {
            let s = load(&forest)?;
            let m = s.resolve_min_size(min_size)?;
            let text = report::cluster_report(&*s.clustering(m)?, s.curve()?);
            write_out(None, text.as_bytes())
        }
        Command::Export {
            forest,
            min_size,
            filters,
            out_dir,
        } => {
            for path in export(&forest, min_size, &filters, &out_dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Serve { addr, data_dir, train } => serve(addr, data_dir, train.params()),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}
