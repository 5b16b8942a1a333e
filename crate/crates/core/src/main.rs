use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use atbrg::data::{self, Dataset};
use atbrg::kg::{ItemId, KnowledgeGraph};
use atbrg::metrics;
use atbrg::subgraph::{self, ExtractParams};
use atbrg::synth::{self, SynthSpec};
use atbrg::train::{self, Preset, TrainConfig, Trained};
use atbrg::validate;
use atbrg::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "atbrg", version, about = "Knowledge-aware CTR prediction with target-behavior relational graphs")]
struct Cli {
    /// Seed overriding the one in the spec or config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration (cfg.json for training, spec.json for synth).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        /// Generator spec (falls back to --config, then to defaults).
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Check every file of a dataset directory.
    Validate { dir: PathBuf },
    /// Build the relational subgraph of one sample.
    Extract {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        target: ItemId,
        /// Comma-separated behavior item ids, most recent first.
        #[arg(long, default_value = "")]
        behaviors: String,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 32)]
        fanout: usize,
    },
    /// Train on train.tsv and score test.tsv.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Report the AUC of a checkpoint.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
    },
    /// Train and compare a grid of variants.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Preset::Components)]
        preset: Preset,
    },
    /// CTR by subgraph node count.
    Analyze {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = 32)]
        fanout: usize,
        #[arg(long, value_enum, default_value_t = Split::All)]
        split: Split,
        /// Buckets with fewer samples are left out of the correlation.
        #[arg(long, default_value_t = 1)]
        min_support: usize,
        #[arg(long)]
        dedupe_target: bool,
    },
    /// Score a samples file with a checkpoint.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Interactions TSV to score (defaults to the test split).
        #[arg(long)]
        samples: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// KG directory (defaults to <data>/kg).
    #[arg(long)]
    kg: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let kg = self.kg.clone().unwrap_or_else(|| self.data.join(data::KG_DIR));
        Dataset::load_with_kg(&self.data, kg)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    dedupe_target: bool,
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Split {
    Train,
    Test,
    All,
}

impl Split {
    fn pick(self, ds: &Dataset) -> Vec<data::Sample> {
        match self {
            Split::Train => ds.train.clone(),
            Split::Test => ds.test.clone(),
            Split::All => ds.train.iter().chain(&ds.test).cloned().collect(),
        }
    }
}

fn train_config(cli: &Cli, run: &RunArgs) -> Result<TrainConfig> {
    let mut cfg = match &cli.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.model.seed = seed;
    }
    if let Some(e) = run.epochs {
        cfg.epochs = e;
    }
    if let Some(r) = run.repeats {
        cfg.repeats = r;
    }
    cfg.dedupe_target |= run.dedupe_target;
    cfg.desk_scale |= run.desk_scale;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Process outcome: `Ok(false)` means the command ran but found problems.
fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Synth { spec } => {
            let mut s = match spec.as_ref().or(cli.config.as_ref()) {
                Some(path) => SynthSpec::load(path)?,
                None => SynthSpec::default(),
            };
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            let out = out_dir(cli, "data");
            let generated = synth::generate(&s)?;
            generated.write(&out, &s)?;
            let ds = &generated.dataset;
            println!(
                "wrote {}: {} entities, {} triples, {} train / {} test samples",
                out.display(),
                ds.kg.num_entities(),
                ds.kg.forward_triples().len(),
                ds.train.len(),
                ds.test.len()
            );
        }
        Command::Validate { dir } => {
            let report = validate::validate_dir(dir);
            if let Some(out) = &cli.out {
                write_json(out, &report)?;
            }
            print!("{}", report.to_text());
            println!("{} violation(s)", report.violations.len());
            return Ok(report.is_ok());
        }
        Command::Extract {
            kg,
            target,
            behaviors,
            depth,
            fanout,
        } => {
            let kg = KnowledgeGraph::load_dir(kg)?;
            let behaviors: Vec<ItemId> = atbrg::tsv::split_list(behaviors)
                .map(|b| {
                    b.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad behavior id {b:?}")))
                })
                .collect::<Result<_>>()?;
            let sub = subgraph::build(&kg, *target, &behaviors, ExtractParams::new(*depth, *fanout))?;
            match &cli.out {
                Some(path) => {
                    write_json(path, &sub)?;
                    println!("node_count {}", sub.node_count);
                }
                None => println!("{}", serde_json::to_string_pretty(&sub)?),
            }
        }
        Command::Train { data, run } => {
            let cfg = train_config(cli, run)?;
            let ds = data.load()?;
            let (trained, report) = train::fit(&ds, &cfg)?;
            let out = out_dir(cli, "run");
            trained.save(out.join("ckpt.json"))?;
            write_json(&out.join("report.json"), &report)?;
            write_json(
                &out.join("timing.json"),
                &serde_json::json!({ "wall_time_secs": report.wall_time_secs }),
            )?;
            for (e, loss) in report.epoch_loss.iter().enumerate() {
                println!("epoch {}  loss {loss:.6}", e + 1);
            }
            println!("test AUC {:.6}", report.test_auc);
            if report.repeat_aucs.len() > 1 {
                println!("mean test AUC over {} runs {:.6}", report.repeat_aucs.len(), report.mean_test_auc);
            }
        }
        Command::Eval { data, checkpoint, split } => {
            let ds = data.load()?;
            let trained = Trained::load(checkpoint)?;
            let samples = split.pick(&ds);
            let auc = trained.evaluate(&ds, &samples, &mut trained.new_cache())?;
            if let Some(out) = &cli.out {
                write_json(out, &serde_json::json!({ "auc": auc, "samples": samples.len() }))?;
            }
            println!("AUC {auc:.6}");
        }
        Command::Ablate { data, run, preset } => {
            let cfg = train_config(cli, run)?;
            let ds = data.load()?;
            let table = train::run_ablation(&train::preset_grid(*preset, &cfg), &ds)?;
            let out = out_dir(cli, "ablation");
            write_json(&out.join("ablation.json"), &table)?;
            write_text(&out.join("ablation.txt"), &table.to_text())?;
            print!("{}", table.to_text());
        }
        Command::Analyze {
            data,
            depth,
            fanout,
            split,
            min_support,
            dedupe_target,
        } => {
            let ds = data.load()?;
            let samples = split.pick(&ds);
            let analysis = train::analyze(
                &ds.kg,
                &samples,
                ExtractParams::new(*depth, *fanout),
                *dedupe_target,
                *min_support,
            )?;
            let out = out_dir(cli, "analysis");
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            write_text(&out.join("node_count.tsv"), &analysis.to_tsv())?;
            write_text(&out.join("node_count.dat"), &analysis.to_gnuplot())?;
            write_json(&out.join("analysis.json"), &analysis)?;
            print!("{}", analysis.to_tsv());
            match analysis.spearman {
                Some(rho) => println!("spearman {rho:.4}"),
                None => println!("spearman undefined"),
            }
        }
        Command::Predict {
            data,
            checkpoint,
            samples,
        } => {
            let ds = data.load()?;
            let trained = Trained::load(checkpoint)?;
            let samples = match samples {
                Some(path) => data::read_samples(path)?,
                None => ds.test.clone(),
            };
            let scores = trained.predict(&ds, &samples, &mut trained.new_cache())?;
            let text: String = scores.iter().map(|s| format!("{s}\n")).collect();
            match &cli.out {
                Some(path) => write_text(path, &text)?,
                None => print!("{text}"),
            }
            let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
            if let Ok(auc) = metrics::auc(&scores, &labels) {
                eprintln!("AUC {auc:.6}");
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
