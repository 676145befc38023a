use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tring_core::{RankVector, Shape};

use crate::error::{CliError, CliResult};
use crate::experiment::{balanced_ranks, distinct_count, ExperimentConfig, SweepParam};
use crate::files::{write_cores, write_labels, write_tensor, write_atomic};
use crate::ingest::ingest_images;
use crate::manifest::{execute, load_inputs, rerun, Manifest, Task};
use crate::synth::{blobs, exact_tr, BlobSpec};

#[derive(Debug, Parser)]
#[command(name = "tring", version, about = "Nonnegative tensor ring decomposition experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit cores and write them with a per-sweep convergence log.
    Fit(RunArgs),
    /// Cluster samples by k-means on the fitted features; reports AC and NMI.
    Cluster(RunArgs),
    /// k-NN classification after labelling a prefix of each class.
    Classify {
        #[command(flatten)]
        run: RunArgs,
        /// Labelled fraction of each class.
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.4])]
        fractions: Vec<f64>,
        /// Neighbour counts.
        #[arg(long = "k", value_delimiter = ',', default_values_t = [1, 3, 5])]
        ks: Vec<usize>,
    },
    /// Repeat clustering over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Grid values; defaults to five values typical for the parameter.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Render the basis image of every feature into one montage.
    Basis {
        #[command(flatten)]
        run: RunArgs,
        /// Montage grid as ROWSxCOLS.
        #[arg(long, value_parser = parse_layout)]
        layout: Option<(usize, usize)>,
    },
    /// Repeat the run recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Stack a directory of class folders of PGM/PPM images into a tensor.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Tensor reconstructed from random nonnegative cores; the cores are
    /// written next to it under `truth/`.
    Exact {
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Labelled image-like tensor with one Gaussian blob per class.
    Blobs {
        #[arg(long, default_value_t = 6)]
        height: usize,
        #[arg(long, default_value_t = 6)]
        width: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Options shared by the experiment commands. Unset values take the
/// defaults of [`ExperimentConfig`].
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Data tensor (TEN1 file); samples lie along the last mode.
    #[arg(long)]
    pub data: PathBuf,
    /// One integer label per sample.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Ring ranks r1,...,rd.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    /// Feature count r_d * r_1 used to pick ranks when --ranks is absent;
    /// defaults to the number of classes.
    #[arg(long)]
    pub features: Option<usize>,
    /// Graph regularization weight [default: 0.1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Nearest neighbours per sample [default: 5].
    #[arg(long)]
    pub p: Option<usize>,
    /// Inner iterations per core update [default: 100].
    #[arg(long = "tmax")]
    pub t_max: Option<usize>,
    /// Relative objective change that ends the fit [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
    /// [default: 500]
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// k-means restarts [default: 200].
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Repetitions of cluster / classify / sweep [default: 10].
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, default_value = "tring-out")]
    pub out: PathBuf,
}

fn parse_layout(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0);
    match (parse(r), parse(c)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(format!("expected positive ROWSxCOLS, got {s:?}")),
    }
}

impl RunArgs {
    fn config(&self, order: usize, labels: Option<&[usize]>) -> CliResult<ExperimentConfig> {
        let d = ExperimentConfig::default();
        let ranks = match (&self.ranks, self.features, labels) {
            (Some(r), _, _) => r.clone(),
            (None, Some(f), _) => balanced_ranks(order, f)?,
            (None, None, Some(l)) => balanced_ranks(order, distinct_count(l))?,
            (None, None, None) => {
                return Err(CliError::Validation(
                    "give --ranks, --features, or --labels to choose ranks".into(),
                ))
            }
        };
        Ok(ExperimentConfig {
            ranks,
            beta: self.beta.unwrap_or(d.beta),
            p: self.p.unwrap_or(d.p),
            t_max: self.t_max.unwrap_or(d.t_max),
            tol: self.tol.unwrap_or(d.tol),
            max_sweeps: self.max_sweeps.unwrap_or(d.max_sweeps),
            seed: self.seed.unwrap_or(d.seed),
            kmeans_restarts: self.restarts.unwrap_or(d.kmeans_restarts),
            runs: self.runs.unwrap_or(d.runs),
        })
    }

    fn execute(&self, task: Task) -> CliResult<String> {
        let inputs = load_inputs(&self.data, self.labels.as_deref())?;
        let labels = inputs.labels.as_ref().map(|(l, _)| l.as_slice());
        let cfg = self.config(inputs.data.order(), labels)?;
        let (_, summary) = execute(&task, &cfg, &inputs, &self.out)?;
        Ok(summary)
    }
}

fn create_dir(path: &std::path::Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Runs a parsed command line and returns the text to print.
pub fn dispatch(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Fit(run) => run.execute(Task::Fit),
        Command::Cluster(run) => run.execute(Task::Cluster),
        Command::Classify { run, fractions, ks } => run.execute(Task::Classify { fractions, ks }),
        Command::Sweep { run, param, values } => {
            let values = values.unwrap_or_else(|| param.default_grid());
            run.execute(Task::Sweep { param, values })
        }
        Command::Basis { run, layout } => run.execute(Task::Basis { layout }),
        Command::Rerun { manifest, out } => {
            let (_, summary) = rerun(&Manifest::load(&manifest)?, &out)?;
            Ok(summary)
        }
        Command::Synth(SynthCommand::Exact {
            shape,
            ranks,
            seed,
            out,
        }) => {
            let shape = Shape::new(shape)?;
            let ranks = RankVector::new(ranks)?;
            if ranks.len() != shape.order() {
                return Err(CliError::Validation(format!(
                    "{} ranks for shape {shape}",
                    ranks.len()
                )));
            }
            let (x, cores) = exact_tr(&shape, &ranks, seed)?;
            create_dir(&out.join("truth"))?;
            write_tensor(&out.join("data.ten"), &x)?;
            write_cores(&out.join("truth"), &cores)?;
            Ok(format!("wrote {shape} tensor to {}\n", out.join("data.ten").display()))
        }
        Command::Synth(SynthCommand::Blobs {
            height,
            width,
            channels,
            classes,
            per_class,
            noise,
            seed,
            out,
        }) => {
            let spec = BlobSpec {
                height,
                width,
                channels,
                classes,
                per_class,
                noise,
                seed,
            };
            let (x, labels) = blobs(&spec)?;
            create_dir(&out)?;
            write_tensor(&out.join("data.ten"), &x)?;
            write_labels(&out.join("labels.txt"), &labels)?;
            Ok(format!("wrote {} blob tensor to {}\n", x.shape(), out.display()))
        }
        Command::Ingest {
            dir,
            height,
            width,
            out,
        } => {
            let corpus = ingest_images(&dir, height, width)?;
            create_dir(&out)?;
            write_tensor(&out.join("data.ten"), &corpus.data)?;
            write_labels(&out.join("labels.txt"), &corpus.labels)?;
            let classes: String = corpus.classes.iter().map(|c| format!("{c}\n")).collect();
            write_atomic(&out.join("classes.txt"), classes.as_bytes())?;
            Ok(format!(
                "ingested {} images in {} classes as {}\n",
                corpus.labels.len(),
                corpus.classes.len(),
                corpus.data.shape()
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_parsing() {
        assert_eq!(parse_layout("2x3"), Ok((2, 3)));
        assert_eq!(parse_layout("4X1"), Ok((4, 1)));
        assert!(parse_layout("0x3").is_err());
        assert!(parse_layout("23").is_err());
    }

    #[test]
    fn grammar_parses() {
        let cli = Cli::try_parse_from([
            "tring", "cluster", "--data", "x.ten", "--labels", "l.txt", "--ranks", "1,2,2,3",
            "--beta", "0.2", "--p", "4", "--tmax", "50", "--tol", "1e-5", "--max-sweeps", "9",
            "--seed", "3", "--restarts", "7", "--out", "o",
        ])
        .unwrap();
        let Command::Cluster(run) = cli.command else {
            panic!("expected cluster");
        };
        let cfg = run.config(4, None).unwrap();
        assert_eq!(cfg.ranks, vec![1, 2, 2, 3]);
        assert_eq!((cfg.beta, cfg.p, cfg.t_max, cfg.tol), (0.2, 4, 50, 1e-5));
        assert_eq!((cfg.max_sweeps, cfg.seed, cfg.kmeans_restarts), (9, 3, 7));

        let cli = Cli::try_parse_from(["tring", "sweep", "--data", "x", "--param", "tmax"]).unwrap();
        assert!(matches!(cli.command, Command::Sweep { param: SweepParam::TMax, values: None, .. }));
        assert!(Cli::try_parse_from(["tring", "fit"]).is_err());
    }

    #[test]
    fn ranks_fall_back_to_features_then_classes() {
        let cli = Cli::try_parse_from(["tring", "fit", "--data", "x", "--features", "6"]).unwrap();
        let Command::Fit(run) = cli.command else { panic!() };
        assert_eq!(run.config(3, None).unwrap().ranks, vec![2, 2, 3]);

        let cli = Cli::try_parse_from(["tring", "fit", "--data", "x"]).unwrap();
        let Command::Fit(run) = cli.command else { panic!() };
        assert_eq!(run.config(4, Some(&[0, 1, 2, 0])).unwrap().ranks, vec![1, 2, 2, 3]);
        assert!(run.config(4, None).is_err());
    }
}
