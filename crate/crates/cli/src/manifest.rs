//! Run manifests: everything needed to repeat a command bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tring_core::DenseTensor;

use crate::error::{CliError, CliResult};
use crate::experiment::{
    cmd_basis, cmd_classify, cmd_cluster, cmd_fit, ExperimentConfig, SweepParam,
};
use crate::files::{decode_tensor, parse_labels, read_bytes, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Task {
    Fit,
    Cluster,
    Classify { fractions: Vec<f64>, ks: Vec<usize> },
    Sweep { param: SweepParam, values: Vec<f64> },
    Basis { layout: Option<(usize, usize)> },
}

impl Task {
    pub fn needs_labels(&self) -> bool {
        !matches!(self, Task::Fit | Task::Basis { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub task: Task,
    pub config: ExperimentConfig,
    pub data: InputRecord,
    pub labels: Option<InputRecord>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Inputs of a run, with the digests of the bytes actually read.
pub struct Inputs {
    pub data: DenseTensor,
    pub data_record: InputRecord,
    pub labels: Option<(Vec<usize>, InputRecord)>,
}

pub fn load_inputs(data: &Path, labels: Option<&Path>) -> CliResult<Inputs> {
    let bytes = read_bytes(data)?;
    let tensor = decode_tensor(&bytes).map_err(|msg| CliError::format(data, msg))?;
    let data_record = InputRecord {
        path: data.to_path_buf(),
        sha256: sha256_hex(&bytes),
    };
    let labels = labels
        .map(|path| -> CliResult<_> {
            let bytes = read_bytes(path)?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| CliError::format(path, "labels are not UTF-8 text"))?;
            let parsed = parse_labels(&text).map_err(|msg| CliError::format(path, msg))?;
            Ok((
                parsed,
                InputRecord {
                    path: path.to_path_buf(),
                    sha256: sha256_hex(&bytes),
                },
            ))
        })
        .transpose()?;
    Ok(Inputs {
        data: tensor,
        data_record,
        labels,
    })
}

/// Runs `task`, writes its artifacts and `manifest.json` into `out`, and
/// returns the manifest with a short human-readable summary.
pub fn execute(
    task: &Task,
    cfg: &ExperimentConfig,
    inputs: &Inputs,
    out: &Path,
) -> CliResult<(Manifest, String)> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let x = &inputs.data;
    let labels = match (&inputs.labels, task.needs_labels()) {
        (Some((l, _)), _) => Some(l.as_slice()),
        (None, true) => {
            return Err(CliError::Validation("this command needs --labels".into()));
        }
        (None, false) => None,
    };
    let mut summary = String::new();
    let outputs = match task {
        Task::Fit => {
            let (fit, paths) = cmd_fit(x, cfg, out)?;
            writeln!(
                summary,
                "sweeps {} ({}), objective {:e}, relative error {:e}",
                fit.report.sweeps_run,
                fit.report.terminated_by.as_str(),
                fit.report.final_objective(),
                fit.relative_error
            )
            .unwrap();
            paths
        }
        Task::Cluster => {
            let (res, paths) = cmd_cluster(x, labels.unwrap(), cfg, out)?;
            writeln!(
                summary,
                "AC {:.4} ± {:.4}, NMI {:.4} ± {:.4} over {} runs",
                res.ac.mean,
                res.ac.std,
                res.nmi.mean,
                res.nmi.std,
                res.runs.len()
            )
            .unwrap();
            paths
        }
        Task::Classify { fractions, ks } => {
            let (rows, paths) = cmd_classify(x, labels.unwrap(), cfg, fractions, ks, out)?;
            for r in rows {
                writeln!(
                    summary,
                    "fraction {} k {}: accuracy {:.4} ± {:.4}",
                    r.fraction, r.k, r.accuracy.mean, r.accuracy.std
                )
                .unwrap();
            }
            paths
        }
        Task::Sweep { param, values } => {
            let (rows, paths) =
                crate::experiment::cmd_sweep(x, labels.unwrap(), cfg, *param, values, out)?;
            for r in rows {
                writeln!(
                    summary,
                    "{} = {}: AC {:.4}, NMI {:.4}",
                    param.name(),
                    r.value,
                    r.outcome.ac.mean,
                    r.outcome.nmi.mean
                )
                .unwrap();
            }
            paths
        }
        Task::Basis { layout } => {
            let (img, paths) = cmd_basis(x, cfg, *layout, out)?;
            writeln!(summary, "montage {}x{} pixels", img.width, img.height).unwrap();
            paths
        }
    };

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        task: task.clone(),
        config: cfg.clone(),
        data: inputs.data_record.clone(),
        labels: inputs.labels.as_ref().map(|(_, r)| r.clone()),
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&out.join(MANIFEST_FILE), json.as_bytes())?;
    Ok((manifest, summary))
}

/// Repeats the run a manifest describes, after checking that its inputs
/// still have the recorded digests.
pub fn rerun(manifest: &Manifest, out: &Path) -> CliResult<(Manifest, String)> {
    let inputs = load_inputs(
        &manifest.data.path,
        manifest.labels.as_ref().map(|r| r.path.as_path()),
    )?;
    let check = |recorded: &InputRecord, actual: &InputRecord| {
        if recorded.sha256 != actual.sha256 {
            return Err(CliError::Validation(format!(
                "{} changed since the manifest was written",
                recorded.path.display()
            )));
        }
        Ok(())
    };
    check(&manifest.data, &inputs.data_record)?;
    if let (Some(rec), Some((_, actual))) = (&manifest.labels, &inputs.labels) {
        check(rec, actual)?;
    }
    execute(&manifest.task, &manifest.config, &inputs, out)
}
