use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::{build_mask, defurnish, BlendMode, MaskSource, PipelineConfig};
use crate::backend::{open_backend, Backend, MockBackend, MockMode, OracleTargets};
use crate::context::forward_context;
use crate::error::{Error, Result};
use crate::image::EquirectPanorama;
use crate::metrics::evaluate;
use crate::synthgen::{read_manifest, GeneratedCase, ManifestRecord};

/// A way of producing a defurnished image for an evaluation case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalMethod {
    /// The ground truth itself (upper bound).
    Oracle,
    /// The furnished input, untouched (lower bound).
    Identity,
    /// Full pipeline with a backend that returns the ground truth at
    /// working scale; isolates resampling and blending losses.
    OraclePipeline,
    /// Full pipeline against a backend spec (`mock:<mode>` or a URL).
    Pipeline(String),
    /// Like `Pipeline` but with hard mask replacement instead of blending.
    Naive(String),
}

impl EvalMethod {
    pub fn label(&self) -> String {
        match self {
            EvalMethod::Oracle => "oracle".into(),
            EvalMethod::Identity => "identity".into(),
            EvalMethod::OraclePipeline => "oracle-pipeline".into(),
            EvalMethod::Pipeline(s) => format!("pipeline:{s}"),
            EvalMethod::Naive(s) => format!("naive:{s}"),
        }
    }
}

/// Parses the labels produced by [`EvalMethod::label`].
impl FromStr for EvalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(EvalMethod::Oracle),
            "identity" => Ok(EvalMethod::Identity),
            "oracle-pipeline" => Ok(EvalMethod::OraclePipeline),
            _ => match s.split_once(':') {
                Some(("pipeline", spec)) if !spec.is_empty() => Ok(EvalMethod::Pipeline(spec.into())),
                Some(("naive", spec)) if !spec.is_empty() => Ok(EvalMethod::Naive(spec.into())),
                _ => Err(Error::param(format!(
                    "unknown eval method `{s}` (oracle, identity, oracle-pipeline, pipeline:<backend>, naive:<backend>)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub method: String,
    pub case_id: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub masked_psnr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalFailure {
    pub case_id: String,
    pub method: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub failures: Vec<EvalFailure>,
}

impl EvalReport {
    /// `method,case_id,psnr_db,ssim,masked_psnr_db` with fixed precision.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(["method", "case_id", "psnr_db", "ssim", "masked_psnr_db"])
            .map_err(csv_err)?;
        for r in &self.rows {
            let masked = r.masked_psnr_db.map(|v| format!("{v:.4}")).unwrap_or_default();
            w.write_record([
                r.method.as_str(),
                r.case_id.as_str(),
                &format!("{:.4}", r.psnr_db),
                &format!("{:.6}", r.ssim),
                &masked,
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Mean of a column over one method's rows.
    pub fn mean(&self, method: &str, f: impl Fn(&EvalRow) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter(|r| r.method == method).filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

enum Runner {
    Fixed(EvalMethod),
    Backend {
        backend: Box<dyn Backend>,
        mode: BlendMode,
    },
    Oracle(MockBackend, OracleTargets),
}

fn method_result(
    runner: &Runner,
    record: &ManifestRecord,
    case: &GeneratedCase,
    config: &PipelineConfig,
) -> Result<EquirectPanorama> {
    let mut cfg = config.clone();
    cfg.inpaint.request_id = Some(record.case_id.clone());
    let source = MaskSource::Mask(&case.mask);
    match runner {
        Runner::Fixed(EvalMethod::Oracle) => Ok(case.target.clone()),
        Runner::Fixed(_) => Ok(case.input.clone()),
        Runner::Backend { backend, mode, .. } => {
            cfg.blend_mode = *mode;
            Ok(defurnish(&case.input, source, &cfg, backend.as_ref())?.image)
        }
        Runner::Oracle(backend, targets) => {
            let mask = build_mask(&case.target, source, &cfg)?;
            let working = forward_context(&case.target, &mask, &cfg.context)?;
            targets.register(&record.case_id, working.image)?;
            Ok(defurnish(&case.input, source, &cfg, backend)?.image)
        }
    }
}

/// Scores every method on every case of a synthgen manifest.
///
/// Cases whose files cannot be read, and method failures, are recorded in
/// [`EvalReport::failures`]; the suite carries on.
pub fn run_eval_suite(
    manifest: &Path,
    methods: &[EvalMethod],
    config: &PipelineConfig,
) -> Result<EvalReport> {
    let records = read_manifest(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut runners = Vec::with_capacity(methods.len());
    for m in methods {
        runners.push(match m {
            EvalMethod::Oracle | EvalMethod::Identity => Runner::Fixed(m.clone()),
            EvalMethod::OraclePipeline => {
                let targets = OracleTargets::memory();
                Runner::Oracle(MockBackend::new(MockMode::Oracle(targets.clone())), targets)
            }
            EvalMethod::Pipeline(spec) | EvalMethod::Naive(spec) => Runner::Backend {
                backend: open_backend(spec, &config.backend)?,
                mode: if matches!(m, EvalMethod::Naive(_)) {
                    BlendMode::Naive
                } else {
                    BlendMode::Custom
                },
            },
        });
    }

    let mut report = EvalReport::default();
    for record in &records {
        let case = match GeneratedCase::load(record, dir) {
            Ok(c) => c,
            Err(e) => {
                log::error!("case {}: {e}", record.case_id);
                report.failures.push(EvalFailure {
                    case_id: record.case_id.clone(),
                    method: None,
                    message: e.to_string(),
                });
                continue;
            }
        };
        for (method, runner) in methods.iter().zip(&runners) {
            let label = method.label();
            let scored = method_result(runner, record, &case, config)
                .and_then(|out| evaluate(&out, &case.target, Some(&case.mask)));
            match scored {
                Ok(q) => report.rows.push(EvalRow {
                    method: label,
                    case_id: record.case_id.clone(),
                    psnr_db: q.psnr_db,
                    ssim: q.ssim,
                    masked_psnr_db: q.masked_psnr_db,
                }),
                Err(e) => {
                    log::error!("case {} method {label}: {e}", record.case_id);
                    report.failures.push(EvalFailure {
                        case_id: record.case_id.clone(),
                        method: Some(label),
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(report)
}
