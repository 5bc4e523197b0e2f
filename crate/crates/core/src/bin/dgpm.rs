use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dgpm::config::TrainConfig;
use dgpm::edgepool::discover_motifs;
use dgpm::eval::{classify_cv, ClassifyOptions, DEFAULT_C_GRID};
use dgpm::graph::{induced_subgraph, Dataset, FeatureOptions, Subgraph};
use dgpm::motifs::{motif_dot, pattern_key, PatternTable};
use dgpm::plot::line_chart_svg;
use dgpm::train::{
    embed, probe_csv, read_embeddings_csv, scaling_probe, train, write_embeddings_csv, write_metrics_csv,
    DgpmModel, INFERENCE_MERGE,
};
use dgpm::tensor::ParamStore;
use dgpm::wwl::{pairwise_kernel_matrix, WwlCache};
use dgpm::{Error, Result};

#[derive(Parser)]
#[command(name = "dgpm", version, about = "Dual-level graph pretraining with motif discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// TU dataset directory (e.g. data/MUTAG) or JSON file.
    #[arg(long)]
    data: PathBuf,
    /// One-hot width cap for degree features of unlabeled graphs.
    #[arg(long, default_value_t = 64)]
    degree_cap: usize,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let ds = Dataset::load(
            &self.data,
            FeatureOptions {
                degree_cap: self.degree_cap,
                ..FeatureOptions::default()
            },
        )?;
        log::info!(
            "{}: {} graphs, {} classes, {:.1} nodes on average",
            ds.name,
            ds.len(),
            ds.num_classes,
            ds.mean_node_count()
        );
        Ok(ds)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain on a dataset and write a checkpoint plus a metrics CSV.
    Pretrain {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Metrics CSV path (default: <out>.metrics.csv).
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Config overrides, `key=value`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Write dual-level graph embeddings as CSV.
    Embed {
        #[arg(long)]
        ckpt: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated linear classification of an embedding CSV.
    Classify {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated C values.
        #[arg(long, value_delimiter = ',')]
        c_grid: Option<Vec<f64>>,
        /// Optional per-fold CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export discovered motifs (DOT + CSV) and a pattern frequency table.
    Motifs {
        #[arg(long)]
        ckpt: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// File with one reference pattern key per line; reports coverage.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// WWL similarity matrix between whole graphs.
    Kernel {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long = "H", default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Only the first N graphs.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time one training step on random graphs of the given sizes.
    Probe {
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pretrain, embed and classify for each value of one config key.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// SVG line chart of a CSV: first column on x, the others as series.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        title: String,
    },
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::from_file(p)?,
        None => TrainConfig::default(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pretrain {
            config,
            data,
            out,
            metrics,
            overrides,
        } => {
            let mut cfg = load_config(config.as_deref(), &overrides)?;
            cfg.degree_cap = data.degree_cap;
            let ds = data.load()?;
            let result = train(&ds, &cfg, Some(&out))?;
            let metrics = metrics.unwrap_or_else(|| with_suffix(&out, ".metrics.csv"));
            write_metrics_csv(&metrics, &result.metrics)?;
            println!("checkpoint: {}", out.display());
            println!("metrics:    {}", metrics.display());
        }
        Command::Embed { ckpt, data, out } => {
            let store = ParamStore::load(&ckpt)?;
            let ds = data.load()?;
            let e = embed(&ds, &store)?;
            write_embeddings_csv(&out, &e)?;
            println!("{} embeddings of width {} -> {}", e.len(), e[0].vector.len(), out.display());
        }
        Command::Classify {
            embeddings,
            folds,
            runs,
            seed,
            c_grid,
            out,
        } => {
            let e = read_embeddings_csv(&embeddings)?;
            let opts = ClassifyOptions {
                folds,
                runs,
                seed,
                c_grid: c_grid.unwrap_or_else(|| DEFAULT_C_GRID.to_vec()),
                ..ClassifyOptions::default()
            };
            let report = classify_cv(&e, &opts)?;
            println!("{report}");
            if let Some(out) = out {
                let mut csv = String::from("run,fold,accuracy,c\n");
                for (r, (accs, cs)) in report.fold_accuracies.iter().zip(&report.selected_c).enumerate() {
                    for (f, (a, c)) in accs.iter().zip(cs).enumerate() {
                        writeln!(csv, "{},{},{a},{c}", r + 1, f + 1).unwrap();
                    }
                }
                fs::write(&out, csv)?;
            }
        }
        Command::Motifs {
            ckpt,
            data,
            out,
            reference,
        } => {
            let store = ParamStore::load(&ckpt)?;
            let model = DgpmModel::from_store(&store)?;
            let ds = data.load()?;
            fs::create_dir_all(&out)?;
            let mut dot = String::new();
            let mut summary = String::from("graph_id,motif_id,size,edges,connected,pattern\n");
            let mut table = PatternTable::default();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for (gid, g) in ds.graphs.iter().enumerate() {
                let x = g
                    .node_features()
                    .ok_or_else(|| Error::State("graph has no node features".into()))?;
                let (ms, _) = discover_motifs(&store, g, gid, x, &model.pools, INFERENCE_MERGE, &mut rng)?;
                for (mid, m) in ms.motifs.iter().enumerate() {
                    let s = &m.subgraph;
                    let key = pattern_key(s);
                    dot.push_str(&motif_dot(gid, mid, s));
                    writeln!(
                        summary,
                        "{gid},{mid},{},{},{},{key}",
                        s.len(),
                        s.induced_edges().len(),
                        dgpm::graph::is_connected(s)
                    )
                    .unwrap();
                    table.add(&key, s, gid);
                }
            }
            fs::write(out.join("motifs.dot"), dot)?;
            fs::write(out.join("motifs.csv"), summary)?;
            fs::write(out.join("patterns.csv"), table.to_csv())?;
            println!("{} motifs, {} distinct patterns -> {}", table.total(), table.len(), out.display());
            if let Some(reference) = reference {
                let text = fs::read_to_string(&reference)?;
                let keys: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
                let cov = table.coverage(&keys);
                println!("coverage of {} reference patterns: {:.2} %", keys.len(), 100.0 * cov);
                fs::write(out.join("coverage.txt"), format!("{cov}\n"))?;
            }
        }
        Command::Kernel {
            data,
            depth,
            lambda,
            limit,
            out,
        } => {
            let ds = data.load()?;
            let n = limit.unwrap_or(ds.len()).min(ds.len());
            let subs: Vec<Subgraph> = ds.graphs[..n]
                .iter()
                .map(|g| induced_subgraph(g, &(0..g.node_count()).collect::<Vec<_>>()))
                .collect::<Result<_>>()?;
            let k = pairwise_kernel_matrix(&subs, depth, lambda, Some(&WwlCache::new()))?;
            let mut csv = String::from("key");
            for (i, s) in subs.iter().enumerate() {
                write!(csv, ",g{i}:{}", s.key()).unwrap();
            }
            csv.push('\n');
            for (i, row) in k.iter().enumerate() {
                write!(csv, "g{i}:{}", subs[i].key()).unwrap();
                for v in row {
                    write!(csv, ",{v:.16e}").unwrap();
                }
                csv.push('\n');
            }
            fs::write(&out, csv)?;
            println!("{n}x{n} kernel matrix -> {}", out.display());
        }
        Command::Probe { sizes, config, out } => {
            let cfg = load_config(config.as_deref(), &[])?;
            let csv = probe_csv(&scaling_probe(&sizes, &cfg)?);
            match out {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Sweep {
            config,
            data,
            key,
            values,
            folds,
            runs,
            out,
        } => {
            let base = load_config(config.as_deref(), &[])?;
            let ds = data.load()?;
            let mut csv = format!("{key},mean,std\n");
            for v in &values {
                let mut cfg = base.clone();
                cfg.set(&key, v)?;
                cfg.validate()?;
                let trained = train(&ds, &cfg, None)?;
                let e = embed(&ds, &trained.store)?;
                let report = classify_cv(
                    &e,
                    &ClassifyOptions {
                        folds,
                        runs,
                        seed: cfg.seed,
                        ..ClassifyOptions::default()
                    },
                )?;
                println!("{key}={v}: {report}");
                writeln!(csv, "{v},{},{}", report.mean, report.std).unwrap();
            }
            fs::write(&out, csv)?;
        }
        Command::Plot { csv, out, title } => {
            let text = fs::read_to_string(&csv)?;
            let svg = line_chart_svg(&text, &title).map_err(|m| Error::Config(format!("{}: {m}", csv.display())))?;
            fs::write(&out, svg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
