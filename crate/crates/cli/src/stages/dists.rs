//! Human and model distributions per text, pooled and per temperature.

use std::collections::BTreeMap;

use emodist::corpus::Vad;
use emodist::dist::{entropy, human_distribution, llm_distribution};
use emodist::sampler::store::{categorical_samples, failure_stats, latest_records, read_store, vad_samples};
use emodist::sampler::{FailureReason, StoreRecord};
use emodist::{AgreementTier, CategoricalDistribution};
use serde::{Deserialize, Serialize};

use super::ingest::{self, CoreText, ExternalRow};
use super::Ctx;
use crate::config::{BackendKind, ModelConfig};
use crate::{PipelineError, Stage};

pub(crate) const HUMAN: &str = "dists/human.jsonl";
pub(crate) const FAILURES: &str = "dists/failures.csv";
pub(crate) const COVERAGE: &str = "dists/coverage.csv";

pub(crate) fn model_path(name: &str) -> String {
    format!("dists/models/{name}.jsonl")
}

pub(crate) fn vad_path(name: &str) -> String {
    format!("dists/vad/{name}.jsonl")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct HumanRow {
    pub text_id: String,
    pub tier: AgreementTier,
    pub probs: Vec<f64>,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ModelRow {
    pub text_id: String,
    /// `None` for the distribution pooled over every temperature.
    pub temperature: Option<f64>,
    /// Usable samples behind the row; absent for external distributions.
    pub n_samples: Option<usize>,
    pub probs: Vec<f64>,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct VadRow {
    pub text_id: String,
    pub tier: AgreementTier,
    pub human: Vad,
    pub model: Vad,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct FailureRow {
    pub model: String,
    pub task: String,
    /// A failure reason, or `any`.
    pub reason: String,
    pub count: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CoverageRow {
    pub model: String,
    pub task: String,
    pub texts: usize,
    pub with_samples: usize,
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let core: Vec<CoreText> = ctx.ws.read_jsonl(ingest::CATEGORICAL, Stage::Ingest)?;
    let mut human = Vec::with_capacity(core.len());
    for c in &core {
        let ann = c.record.categorical().ok_or_else(|| {
            PipelineError::Artifact(format!("{}: {} is not categorical", ingest::CATEGORICAL, c.record.text_id))
        })?;
        let d = human_distribution(ann, &ctx.space).map_err(|e| PipelineError::stage(Stage::Dists, e))?;
        human.push(HumanRow { text_id: c.record.text_id.clone(), tier: c.tier, entropy: entropy(&d), probs: d.into() });
    }
    ctx.ws.write_jsonl(HUMAN, &human)?;

    let vad_core: Option<Vec<CoreText>> = match ctx.config.corpus.vad {
        Some(_) => Some(ctx.ws.read_jsonl(ingest::VAD, Stage::Ingest)?),
        None => None,
    };

    let mut failures = Vec::new();
    let mut coverage = Vec::new();
    let temperatures = ctx.config.sampler.temperatures.clone();
    for model in &ctx.config.models {
        let records = read_model_store(ctx, model, false)?;
        let samples = categorical_samples(&records, &model.name, &ctx.space);
        let mut rows = Vec::new();
        for h in &human {
            let Some(s) = samples.get(&h.text_id) else { continue };
            rows.push(model_row(&h.text_id, None, s.len(), llm_distribution(s, &ctx.space, None)));
            for &t in &temperatures {
                let n = s.iter().filter(|(st, _)| st.to_bits() == t.to_bits()).count();
                if n > 0 {
                    rows.push(model_row(&h.text_id, Some(t), n, llm_distribution(s, &ctx.space, Some(&[t]))));
                }
            }
        }
        let with_samples = rows.iter().filter(|r| r.temperature.is_none()).count();
        if with_samples < human.len() {
            log::warn!("{}: {} of {} texts have no usable sample", model.name, human.len() - with_samples, human.len());
        }
        coverage.push(CoverageRow { model: model.name.clone(), task: "categorical".into(), texts: human.len(), with_samples });
        failures.extend(failure_rows(&model.name, "categorical", &records));
        ctx.ws.write_jsonl(&model_path(&model.name), &rows)?;

        if let Some(vad_core) = &vad_core {
            if model.backend == BackendKind::Store && model.vad_store.is_none() {
                continue;
            }
            let records = read_model_store(ctx, model, true)?;
            let samples = vad_samples(&records, &model.name);
            let mut rows = Vec::new();
            for c in vad_core {
                let (Some(s), Some(h)) = (samples.get(&c.record.text_id), c.record.vad().and_then(|a| a.mean())) else {
                    continue;
                };
                rows.push(VadRow {
                    text_id: c.record.text_id.clone(),
                    tier: c.tier,
                    human: h,
                    model: mean_vad(s.iter().map(|(_, v)| *v)),
                    n_samples: s.len(),
                });
            }
            coverage.push(CoverageRow { model: model.name.clone(), task: "vad".into(), texts: vad_core.len(), with_samples: rows.len() });
            failures.extend(failure_rows(&model.name, "vad", &records));
            ctx.ws.write_jsonl(&vad_path(&model.name), &rows)?;
        }
    }

    for ext in &ctx.config.external {
        let ext_rows: Vec<ExternalRow> = ctx.ws.read_jsonl(&ingest::external_path(&ext.name), Stage::Ingest)?;
        let by_id: BTreeMap<&str, &ExternalRow> = ext_rows.iter().map(|r| (r.text_id.as_str(), r)).collect();
        let mut rows = Vec::new();
        for h in &human {
            if let Some(r) = by_id.get(h.text_id.as_str()) {
                let d = CategoricalDistribution::new(r.probs.clone()).map_err(|e| PipelineError::stage(Stage::Dists, e))?;
                rows.push(ModelRow { text_id: h.text_id.clone(), temperature: None, n_samples: None, entropy: entropy(&d), probs: d.into() });
            }
        }
        coverage.push(CoverageRow { model: ext.name.clone(), task: "categorical".into(), texts: human.len(), with_samples: rows.len() });
        ctx.ws.write_jsonl(&model_path(&ext.name), &rows)?;
    }

    ctx.ws.write_csv(FAILURES, &failures)?;
    ctx.ws.write_csv(COVERAGE, &coverage)?;
    Ok(())
}

fn model_row(
    text_id: &str,
    temperature: Option<f64>,
    n: usize,
    d: Result<CategoricalDistribution, emodist::dist::DistError>,
) -> ModelRow {
    let d = d.expect("non-empty sample set");
    ModelRow { text_id: text_id.to_string(), temperature, n_samples: Some(n), entropy: entropy(&d), probs: d.into() }
}

fn mean_vad(vs: impl Iterator<Item = Vad>) -> Vad {
    let (mut sum, mut n) = ([0.0; 3], 0.0);
    for v in vs {
        for (s, x) in sum.iter_mut().zip(v.dims()) {
            *s += x;
        }
        n += 1.0;
    }
    Vad::from_dims(sum.map(|s| s / n))
}

/// Latest record per tuple from the model's store. Stores the sample stage
/// writes are reported missing against that stage.
fn read_model_store(ctx: &mut Ctx, model: &ModelConfig, vad: bool) -> Result<Vec<StoreRecord>, PipelineError> {
    let path = if vad { ctx.config.vad_store(model) } else { ctx.config.categorical_store(model) };
    let bytes = if path.starts_with(ctx.ws.root()) {
        let key = ctx.ws.key(&path);
        ctx.ws.read(&key, Stage::Sample)?
    } else if path.is_file() || model.backend == BackendKind::Store {
        ctx.ws.read_input(&path)?
    } else {
        return Err(PipelineError::MissingArtifact { path: path.display().to_string(), stage: Stage::Sample });
    };
    let records = read_store(bytes.as_slice()).map_err(|e| PipelineError::stage(Stage::Dists, format!("{}: {e}", path.display())))?;
    Ok(latest_records(records))
}

fn failure_rows(model: &str, task: &str, records: &[StoreRecord]) -> Vec<FailureRow> {
    let stats = failure_stats(records).remove(model).unwrap_or_default();
    let rate = |count: usize| if stats.total == 0 { 0.0 } else { count as f64 / stats.total as f64 };
    let any: usize = stats.failures.values().sum();
    let mut rows = vec![FailureRow { model: model.into(), task: task.into(), reason: "any".into(), count: any, rate: rate(any) }];
    for reason in FailureReason::ALL {
        let count = stats.failures.get(&reason).copied().unwrap_or(0);
        rows.push(FailureRow { model: model.into(), task: task.into(), reason: reason.as_str().into(), count, rate: rate(count) });
    }
    rows
}
