//! Cross-validated post-hoc calibration, plus models fit on every text.

use std::collections::BTreeMap;

use emodist::calibrate::{crossval, CalibrationModel, CalibrationPair, StoredModel};
use emodist::{AgreementTier, CategoricalDistribution};
use serde::{Deserialize, Serialize};

use super::dists::{self, HumanRow, ModelRow};
use super::Ctx;
use crate::{PipelineError, Stage};

pub(crate) const SUMMARY: &str = "calibrate/summary.csv";
pub(crate) const FOLDS: &str = "calibrate/folds.csv";
pub(crate) const PER_TEXT: &str = "calibrate/per_text.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SummaryRow {
    pub model: String,
    pub method: String,
    pub k: usize,
    pub n: usize,
    pub mean_jsd_before: f64,
    pub mean_jsd_after: f64,
    pub relative_change: f64,
    pub fraction_improved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct FoldRow {
    pub model: String,
    pub method: String,
    pub fold: usize,
    pub n: usize,
    pub mean_jsd_before: f64,
    pub mean_jsd_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TextRow {
    pub model: String,
    pub method: String,
    pub text_id: String,
    pub tier: AgreementTier,
    pub fold: usize,
    pub jsd_before: f64,
    pub jsd_after: f64,
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let human: Vec<HumanRow> = ctx.ws.read_jsonl(dists::HUMAN, Stage::Dists)?;
    let methods = ctx.config.calibration.methods()?;
    let k = ctx.config.calibration.k;
    let seed = ctx.ws.stage_seed(Stage::Calibrate);
    let err = |e| PipelineError::stage(Stage::Calibrate, e);
    let dist = |p: &[f64]| CategoricalDistribution::new(p.to_vec()).map_err(|e| PipelineError::Artifact(e.to_string()));

    let mut summary = Vec::new();
    let mut folds = Vec::new();
    let mut per_text = Vec::new();
    for name in ctx.config.calibration_models() {
        let rows: Vec<ModelRow> = ctx.ws.read_jsonl(&dists::model_path(&name), Stage::Dists)?;
        let pooled: BTreeMap<&str, &ModelRow> =
            rows.iter().filter(|r| r.temperature.is_none()).map(|r| (r.text_id.as_str(), r)).collect();
        let mut pairs = Vec::new();
        for h in &human {
            if let Some(m) = pooled.get(h.text_id.as_str()) {
                pairs.push(CalibrationPair {
                    text_id: h.text_id.clone(),
                    tier: h.tier,
                    model: dist(&m.probs)?,
                    human: dist(&h.probs)?,
                });
            }
        }
        let train: Vec<_> = pairs.iter().map(|p| (p.model.clone(), p.human.clone())).collect();
        for &method in &methods {
            let report = crossval(&pairs, method, k, seed).map_err(|e| PipelineError::stage(Stage::Calibrate, format!("{name}: {e}")))?;
            let m = method.as_str().to_string();
            summary.push(SummaryRow {
                model: name.clone(),
                method: m.clone(),
                k,
                n: report.per_text.len(),
                mean_jsd_before: report.mean_jsd_before,
                mean_jsd_after: report.mean_jsd_after,
                relative_change: report.relative_change(),
                fraction_improved: report.fraction_improved,
            });
            folds.extend(report.folds.iter().map(|f| FoldRow {
                model: name.clone(),
                method: m.clone(),
                fold: f.fold,
                n: f.n,
                mean_jsd_before: f.mean_jsd_before,
                mean_jsd_after: f.mean_jsd_after,
            }));
            per_text.extend(report.per_text.iter().map(|t| TextRow {
                model: name.clone(),
                method: m.clone(),
                text_id: t.text_id.clone(),
                tier: t.tier,
                fold: t.fold,
                jsd_before: t.jsd_before,
                jsd_after: t.jsd_after,
            }));
            let fitted = CalibrationModel::fit(method, &train).map_err(err)?;
            let stored = StoredModel::new(fitted, &ctx.space);
            let mut json = stored.to_json().into_bytes();
            json.push(b'\n');
            ctx.ws.write(&format!("calibrate/models/{name}.{m}.json"), &json)?;
        }
    }
    ctx.ws.write_csv(SUMMARY, &summary)?;
    ctx.ws.write_csv(FOLDS, &folds)?;
    ctx.ws.write_csv(PER_TEXT, &per_text)?;
    Ok(())
}
