//! Experiment drivers behind the `fit`, `cluster`, `classify`, `sweep` and
//! `basis` commands. Each `*_scores` function computes results in memory;
//! the `cmd_*` wrappers also write their CSV or image artifacts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tring_core::apg::features;
use tring_core::eval::{accuracy, kmeans, knn_classify, nmi, per_class_prefix_split};
use tring_core::graph::sample_graph;
use tring_core::ring::{core_fold2, reconstruct, relative_error};
use tring_core::{
    fit, DenseTensor, FitReport, GraphConfig, Matrix, NeighborGraph, RankVector, SolverConfig,
    TrCores,
};

use crate::error::{CliError, CliResult};
use crate::files::{write_atomic, write_cores};
use crate::pnm::{montage, to_bytes_min_max, write_pnm, Image};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ranks: Vec<usize>,
    pub beta: f64,
    /// Neighbours per sample in the graph.
    pub p: usize,
    pub t_max: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    pub kmeans_restarts: usize,
    /// Repetitions for cluster, classify and sweep; run `r` fits with seed
    /// `seed + r`.
    pub runs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            ranks: Vec::new(),
            beta: 0.1,
            p: 5,
            t_max: 100,
            tol: 1e-6,
            max_sweeps: 500,
            seed: 0,
            kmeans_restarts: 200,
            runs: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn solver(&self, run: usize) -> SolverConfig {
        SolverConfig {
            t_max: self.t_max,
            max_sweeps: self.max_sweeps,
            tol: self.tol,
            beta: self.beta,
            seed: self.seed.wrapping_add(run as u64),
        }
    }

    /// Checks the configuration against the data it will run on.
    pub fn validate(&self, x: &DenseTensor) -> CliResult<RankVector> {
        if self.ranks.len() != x.order() {
            return Err(CliError::Validation(format!(
                "{} ranks given for data of order {} (shape {})",
                self.ranks.len(),
                x.order(),
                x.shape()
            )));
        }
        self.solver(0).validate()?;
        if self.runs == 0 || self.kmeans_restarts == 0 {
            return Err(CliError::Validation(
                "runs and k-means restarts must be at least 1".into(),
            ));
        }
        let samples = x.dims()[x.order() - 1];
        if self.beta > 0.0 && !(1..samples).contains(&self.p) {
            return Err(CliError::Validation(format!(
                "p = {} neighbours needs 1 <= p < {samples} samples",
                self.p
            )));
        }
        Ok(RankVector::new(self.ranks.clone())?)
    }
}

/// Ranks with `r_d · r_1 = features` split as the most balanced factor pair
/// (`r_1 ≤ r_d`), and 2 for every other rank.
pub fn balanced_ranks(order: usize, features: usize) -> CliResult<Vec<usize>> {
    if order < 2 || features == 0 {
        return Err(CliError::Validation(format!(
            "cannot derive ranks for order {order} with {features} features"
        )));
    }
    let small = (1..=features)
        .take_while(|a| a * a <= features)
        .filter(|a| features % a == 0)
        .last()
        .unwrap_or(1);
    let mut ranks = vec![2; order];
    ranks[0] = small;
    ranks[order - 1] = features / small;
    Ok(ranks)
}

pub fn distinct_count(labels: &[usize]) -> usize {
    labels.iter().collect::<BTreeSet<_>>().len()
}

fn check_labels(x: &DenseTensor, labels: &[usize]) -> CliResult<()> {
    let samples = x.dims()[x.order() - 1];
    if labels.len() != samples {
        return Err(CliError::Validation(format!(
            "{} labels for {samples} samples along the last mode",
            labels.len()
        )));
    }
    Ok(())
}

/// Validated data, ranks and (when `beta > 0`) the sample graph, shared by
/// every run of an experiment.
pub struct Prepared<'a> {
    pub x: &'a DenseTensor,
    pub cfg: ExperimentConfig,
    pub ranks: RankVector,
    pub graph: Option<NeighborGraph>,
}

pub fn prepare<'a>(x: &'a DenseTensor, cfg: &ExperimentConfig) -> CliResult<Prepared<'a>> {
    let ranks = cfg.validate(x)?;
    let graph = if cfg.beta > 0.0 {
        Some(sample_graph(x, GraphConfig { p: cfg.p })?)
    } else {
        None
    };
    Ok(Prepared {
        x,
        cfg: cfg.clone(),
        ranks,
        graph,
    })
}

impl Prepared<'_> {
    pub fn fit_run(&self, run: usize) -> CliResult<(TrCores, FitReport)> {
        Ok(fit(
            self.x,
            &self.ranks,
            &self.cfg.solver(run),
            self.graph.as_ref(),
        )?)
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub cores: TrCores,
    pub report: FitReport,
    pub relative_error: f64,
}

pub fn fit_report_csv(report: &FitReport) -> String {
    let mut csv = String::from("sweep,objective,rel_change,seconds\n");
    for (k, ((obj, rel), secs)) in report
        .objective_per_sweep
        .iter()
        .zip(&report.rel_change_per_sweep)
        .zip(&report.elapsed_per_sweep)
        .enumerate()
    {
        writeln!(csv, "{},{obj:e},{rel:e},{secs:.6}", k + 1).unwrap();
    }
    csv
}

/// Fits once with the configured seed and writes `core_<n>.ten` and
/// `fit_report.csv` into `out`.
pub fn cmd_fit(x: &DenseTensor, cfg: &ExperimentConfig, out: &Path) -> CliResult<(FitOutcome, Vec<PathBuf>)> {
    let (cores, report) = prepare(x, cfg)?.fit_run(0)?;
    let relative_error = relative_error(x, &cores)?;
    let mut written = write_cores(out, &cores)?;
    let csv_path = out.join("fit_report.csv");
    write_atomic(&csv_path, fit_report_csv(&report).as_bytes())?;
    written.push(csv_path);
    Ok((
        FitOutcome {
            cores,
            report,
            relative_error,
        },
        written,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    /// `(ac, nmi)` per run.
    pub runs: Vec<(f64, f64)>,
    pub ac: Summary,
    pub nmi: Summary,
}

/// Fit, k-means on the sample features with `k` = number of classes, and
/// AC / NMI against `labels`, repeated `cfg.runs` times.
pub fn cluster_scores(x: &DenseTensor, labels: &[usize], cfg: &ExperimentConfig) -> CliResult<ClusterOutcome> {
    check_labels(x, labels)?;
    let prep = prepare(x, cfg)?;
    let k = distinct_count(labels);
    let runs = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let (cores, _) = prep.fit_run(run)?;
            let clusters = kmeans(
                &features(&cores),
                k,
                cfg.kmeans_restarts,
                cfg.seed.wrapping_add(run as u64),
            )?;
            Ok((accuracy(&clusters.labels, labels)?, nmi(&clusters.labels, labels)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let ac: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let nm: Vec<f64> = runs.iter().map(|r| r.1).collect();
    Ok(ClusterOutcome {
        ac: Summary::of(&ac),
        nmi: Summary::of(&nm),
        runs,
    })
}

pub fn cluster_csv(outcome: &ClusterOutcome) -> String {
    let mut csv = String::from("run,ac,nmi\n");
    for (run, (ac, nmi)) in outcome.runs.iter().enumerate() {
        writeln!(csv, "{run},{ac:.6},{nmi:.6}").unwrap();
    }
    writeln!(csv, "mean,{:.6},{:.6}", outcome.ac.mean, outcome.nmi.mean).unwrap();
    writeln!(csv, "std,{:.6},{:.6}", outcome.ac.std, outcome.nmi.std).unwrap();
    csv
}

pub fn cmd_cluster(
    x: &DenseTensor,
    labels: &[usize],
    cfg: &ExperimentConfig,
    out: &Path,
) -> CliResult<(ClusterOutcome, Vec<PathBuf>)> {
    let outcome = cluster_scores(x, labels, cfg)?;
    let path = out.join("cluster.csv");
    write_atomic(&path, cluster_csv(&outcome).as_bytes())?;
    Ok((outcome, vec![path]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyRow {
    pub fraction: f64,
    pub k: usize,
    pub accuracy: Summary,
}

/// k-NN accuracy on the samples left after labelling the first `fraction`
/// of each class, for every fraction and `k`, averaged over `cfg.runs` fits.
pub fn classify_scores(
    x: &DenseTensor,
    labels: &[usize],
    cfg: &ExperimentConfig,
    fractions: &[f64],
    ks: &[usize],
) -> CliResult<Vec<ClassifyRow>> {
    check_labels(x, labels)?;
    if fractions.is_empty() || ks.is_empty() {
        return Err(CliError::Validation("need at least one fraction and one k".into()));
    }
    let splits = fractions
        .iter()
        .map(|&f| {
            let split = per_class_prefix_split(labels, f)?;
            if split.test.is_empty() {
                return Err(CliError::Validation(format!("fraction {f} leaves no test samples")));
            }
            if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > split.train.len()) {
                return Err(CliError::Validation(format!(
                    "k = {k} with {} labelled samples at fraction {f}",
                    split.train.len()
                )));
            }
            Ok(split)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let prep = prepare(x, cfg)?;

    // per run: accuracies in (fraction, k) order
    let per_run = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let (cores, _) = prep.fit_run(run)?;
            let feats = features(&cores);
            let mut accs = Vec::new();
            for split in &splits {
                let pick = |idx: &[usize]| Matrix::from_fn(idx.len(), feats.cols(), |r, c| feats[(idx[r], c)]);
                let train_labels: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
                let (train, test) = (pick(&split.train), pick(&split.test));
                for &k in ks {
                    let predicted = knn_classify(&train, &train_labels, &test, k)?;
                    let hits = predicted
                        .iter()
                        .zip(&split.test)
                        .filter(|(p, &i)| **p == labels[i])
                        .count();
                    accs.push(hits as f64 / split.test.len() as f64);
                }
            }
            Ok(accs)
        })
        .collect::<CliResult<Vec<Vec<f64>>>>()?;

    let mut rows = Vec::new();
    for (fi, &fraction) in fractions.iter().enumerate() {
        for (ki, &k) in ks.iter().enumerate() {
            let col = fi * ks.len() + ki;
            let values: Vec<f64> = per_run.iter().map(|accs| accs[col]).collect();
            rows.push(ClassifyRow {
                fraction,
                k,
                accuracy: Summary::of(&values),
            });
        }
    }
    Ok(rows)
}

pub fn classify_csv(rows: &[ClassifyRow]) -> String {
    let mut csv = String::from("fraction,k,acc_mean,acc_std\n");
    for r in rows {
        writeln!(csv, "{},{},{:.6},{:.6}", r.fraction, r.k, r.accuracy.mean, r.accuracy.std).unwrap();
    }
    csv
}

pub fn cmd_classify(
    x: &DenseTensor,
    labels: &[usize],
    cfg: &ExperimentConfig,
    fractions: &[f64],
    ks: &[usize],
    out: &Path,
) -> CliResult<(Vec<ClassifyRow>, Vec<PathBuf>)> {
    let rows = classify_scores(x, labels, cfg, fractions, ks)?;
    let path = out.join("classify.csv");
    write_atomic(&path, classify_csv(&rows).as_bytes())?;
    Ok((rows, vec![path]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    #[value(name = "tmax")]
    TMax,
    P,
    Beta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::TMax => "t_max",
            SweepParam::P => "p",
            SweepParam::Beta => "beta",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepParam::TMax => vec![60.0, 80.0, 100.0, 120.0, 140.0],
            SweepParam::P => vec![3.0, 4.0, 5.0, 6.0, 7.0],
            SweepParam::Beta => vec![0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }

    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> CliResult<ExperimentConfig> {
        let whole = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(CliError::Validation(format!(
                    "{} must be a positive integer, got {value}",
                    self.name()
                )))
            }
        };
        let mut cfg = cfg.clone();
        match self {
            SweepParam::TMax => cfg.t_max = whole()?,
            SweepParam::P => cfg.p = whole()?,
            SweepParam::Beta => cfg.beta = value,
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: ClusterOutcome,
    pub seconds: f64,
}

pub fn sweep_scores(
    x: &DenseTensor,
    labels: &[usize],
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> CliResult<Vec<SweepRow>> {
    let configs = values
        .iter()
        .map(|&v| param.apply(cfg, v))
        .collect::<CliResult<Vec<_>>>()?;
    values
        .iter()
        .zip(&configs)
        .map(|(&value, cfg)| {
            let start = Instant::now();
            let outcome = cluster_scores(x, labels, cfg)?;
            Ok(SweepRow {
                value,
                outcome,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

pub fn sweep_csv(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut csv = String::from("param,value,ac_mean,ac_std,nmi_mean,nmi_std,seconds\n");
    for r in rows {
        writeln!(
            csv,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.3}",
            param.name(),
            r.value,
            r.outcome.ac.mean,
            r.outcome.ac.std,
            r.outcome.nmi.mean,
            r.outcome.nmi.std,
            r.seconds
        )
        .unwrap();
    }
    csv
}

pub fn cmd_sweep(
    x: &DenseTensor,
    labels: &[usize],
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    out: &Path,
) -> CliResult<(Vec<SweepRow>, Vec<PathBuf>)> {
    let rows = sweep_scores(x, labels, cfg, param, values)?;
    let path = out.join("sweep.csv");
    write_atomic(&path, sweep_csv(param, &rows).as_bytes())?;
    Ok((rows, vec![path]))
}

/// Image geometry `(height, width, channels)` of the non-sample modes.
pub fn image_geometry(dims: &[usize]) -> CliResult<(usize, usize, usize)> {
    match dims {
        [h, w, _] => Ok((*h, *w, 1)),
        [h, w, 3, _] => Ok((*h, *w, 3)),
        _ => Err(CliError::Validation(format!(
            "basis images need height x width [x 3] x samples data, got {dims:?}"
        ))),
    }
}

/// One basis tensor per feature `f`: the ring contracted with the feature
/// core replaced by the indicator of column `f` (a single-sample core).
pub fn basis_tensors(cores: &TrCores) -> CliResult<Vec<DenseTensor>> {
    let d = cores.order();
    let ranks = cores.ranks();
    let (r_last, r_first) = (ranks.left(d - 1), ranks.right(d - 1));
    let count = r_last * r_first;
    (0..count)
        .map(|f| {
            let unit = Matrix::from_fn(1, count, |_, c| if c == f { 1.0 } else { 0.0 });
            let mut parts = cores.cores().to_vec();
            parts[d - 1] = core_fold2(&unit, r_last, 1, r_first)?;
            Ok(reconstruct(&TrCores::new(parts)?)?)
        })
        .collect()
}

/// Min-max normalized basis images tiled `rows × cols`; defaults to the
/// smallest near-square grid holding all of them.
pub fn render_basis(cores: &TrCores, layout: Option<(usize, usize)>) -> CliResult<Image> {
    let (h, w, ch) = image_geometry(cores.shape().dims())?;
    let bases = basis_tensors(cores)?;
    let (rows, cols) = layout.unwrap_or_else(|| {
        let cols = (bases.len() as f64).sqrt().ceil() as usize;
        (bases.len().div_ceil(cols), cols)
    });
    if rows * cols < bases.len() {
        return Err(CliError::Validation(format!(
            "layout {rows}x{cols} holds fewer than the {} basis images",
            bases.len()
        )));
    }
    // tensor data is (y, x[, c]) row-major, i.e. already pixel interleaved
    let tiles: Vec<Image> = bases
        .iter()
        .map(|b| Image::new(w, h, ch, to_bytes_min_max(b.data())))
        .collect();
    montage(&tiles, rows, cols).map_err(CliError::Validation)
}

pub fn cmd_basis(
    x: &DenseTensor,
    cfg: &ExperimentConfig,
    layout: Option<(usize, usize)>,
    out: &Path,
) -> CliResult<(Image, Vec<PathBuf>)> {
    image_geometry(x.dims())?;
    let (cores, _) = prepare(x, cfg)?.fit_run(0)?;
    let image = render_basis(&cores, layout)?;
    let path = out.join(if image.channels == 1 { "basis.pgm" } else { "basis.ppm" });
    write_pnm(&path, &image)?;
    Ok((image, vec![path]))
}
