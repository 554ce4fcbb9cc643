//! Divergences, entropy correspondence, tier and category breakdowns.

use std::collections::BTreeMap;

use emodist::metrics::{
    jsd, kld, per_category_profile, rank_correlation, tier_breakdown, vad_evaluate, Correlation, MetricsError,
    DEFAULT_KLD_EPSILON,
};
use emodist::stats::{mean, median, sample_sd};
use emodist::{AgreementTier, CategoricalDistribution};
use serde::{Deserialize, Serialize};

use super::dists::{self, HumanRow, ModelRow, VadRow};
use super::Ctx;
use crate::config::BackendKind;
use crate::{PipelineError, Stage};

pub(crate) const PER_TEXT: &str = "evaluate/per_text.csv";
pub(crate) const AGGREGATE: &str = "evaluate/aggregate.csv";
pub(crate) const PER_TEMPERATURE: &str = "evaluate/per_temperature.csv";
pub(crate) const TIERS: &str = "evaluate/tiers.csv";
pub(crate) const PER_CATEGORY: &str = "evaluate/per_category.csv";
pub(crate) const VAD: &str = "evaluate/vad.csv";
pub(crate) const VAD_TIERS: &str = "evaluate/vad_tiers.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct PerTextRow {
    pub model: String,
    pub text_id: String,
    pub tier: AgreementTier,
    pub jsd: f64,
    pub kld: f64,
    pub wasserstein: f64,
    pub human_entropy: f64,
    pub model_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct AggregateRow {
    pub model: String,
    pub n: usize,
    pub jsd_mean: f64,
    pub jsd_sd: f64,
    pub jsd_median: f64,
    pub kld_mean: f64,
    pub wasserstein_mean: f64,
    pub entropy_rho: Option<f64>,
    pub entropy_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TemperatureRow {
    pub model: String,
    pub temperature: f64,
    pub n: usize,
    pub jsd_mean: f64,
    pub entropy_rho: Option<f64>,
    pub entropy_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TierRow {
    pub model: String,
    pub tier: AgreementTier,
    pub n: usize,
    pub jsd_mean: f64,
    pub jsd_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CategoryRow {
    pub model: String,
    pub category: String,
    pub human_rate: f64,
    pub model_rate: f64,
    pub delta: f64,
    pub rho: Option<f64>,
    pub rho_p: Option<f64>,
    pub n_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct VadSummaryRow {
    pub model: String,
    pub n: usize,
    pub mae: f64,
    pub v_mae: f64,
    pub a_mae: f64,
    pub d_mae: f64,
    pub v_r: Option<f64>,
    pub a_r: Option<f64>,
    pub d_r: Option<f64>,
    pub v_rho: Option<f64>,
    pub a_rho: Option<f64>,
    pub d_rho: Option<f64>,
    pub v_model_sd: f64,
    pub a_model_sd: f64,
    pub d_model_sd: f64,
    pub v_human_sd: f64,
    pub a_human_sd: f64,
    pub d_human_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct VadTierRow {
    pub model: String,
    pub tier: AgreementTier,
    pub n: usize,
    pub mae_mean: f64,
    pub mae_sd: f64,
}

fn correlation(xs: &[f64], ys: &[f64]) -> Result<Option<Correlation>, PipelineError> {
    match rank_correlation(xs, ys) {
        Ok(c) => Ok(Some(c)),
        Err(MetricsError::Constant | MetricsError::TooFew { .. }) => Ok(None),
        Err(e) => Err(PipelineError::stage(Stage::Evaluate, e)),
    }
}

fn dist(probs: &[f64]) -> Result<CategoricalDistribution, PipelineError> {
    CategoricalDistribution::new(probs.to_vec()).map_err(|e| PipelineError::Artifact(e.to_string()))
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let human: Vec<HumanRow> = ctx.ws.read_jsonl(dists::HUMAN, Stage::Dists)?;
    let mut per_text = Vec::new();
    let mut aggregate = Vec::new();
    let mut per_temperature = Vec::new();
    let mut tiers = Vec::new();
    let mut per_category = Vec::new();

    for name in ctx.config.all_model_names() {
        let rows: Vec<ModelRow> = ctx.ws.read_jsonl(&dists::model_path(&name), Stage::Dists)?;
        let mut pooled: BTreeMap<&str, &ModelRow> = BTreeMap::new();
        let mut by_temp: BTreeMap<u64, BTreeMap<&str, &ModelRow>> = BTreeMap::new();
        for r in &rows {
            match r.temperature {
                None => {
                    pooled.insert(&r.text_id, r);
                }
                Some(t) => {
                    by_temp.entry(t.to_bits()).or_default().insert(&r.text_id, r);
                }
            }
        }
        let mut hs = Vec::new();
        let mut ms = Vec::new();
        let mut text_rows = Vec::new();
        for h in &human {
            let Some(m) = pooled.get(h.text_id.as_str()) else { continue };
            let (hd, md) = (dist(&h.probs)?, dist(&m.probs)?);
            let err = |e: MetricsError| PipelineError::stage(Stage::Evaluate, e);
            text_rows.push(PerTextRow {
                model: name.clone(),
                text_id: h.text_id.clone(),
                tier: h.tier,
                jsd: jsd(&hd, &md).map_err(err)?,
                kld: kld(&hd, &md, DEFAULT_KLD_EPSILON).map_err(err)?,
                wasserstein: emodist::metrics::wasserstein01(&hd, &md).map_err(err)?,
                human_entropy: h.entropy,
                model_entropy: m.entropy,
            });
            hs.push(hd);
            ms.push(md);
        }
        if text_rows.is_empty() {
            log::warn!("{name}: no texts to evaluate");
            continue;
        }
        let jsds: Vec<f64> = text_rows.iter().map(|r| r.jsd).collect();
        let he: Vec<f64> = text_rows.iter().map(|r| r.human_entropy).collect();
        let me: Vec<f64> = text_rows.iter().map(|r| r.model_entropy).collect();
        let ent = correlation(&he, &me)?;
        aggregate.push(AggregateRow {
            model: name.clone(),
            n: jsds.len(),
            jsd_mean: mean(&jsds),
            jsd_sd: sample_sd(&jsds),
            jsd_median: median(&jsds),
            kld_mean: mean(&text_rows.iter().map(|r| r.kld).collect::<Vec<_>>()),
            wasserstein_mean: mean(&text_rows.iter().map(|r| r.wasserstein).collect::<Vec<_>>()),
            entropy_rho: ent.map(|c| c.rho),
            entropy_p: ent.map(|c| c.p_value),
        });

        let tier_of: Vec<AgreementTier> = text_rows.iter().map(|r| r.tier).collect();
        let breakdown = tier_breakdown(&jsds, &tier_of).map_err(|e| PipelineError::stage(Stage::Evaluate, e))?;
        for (tier, s) in breakdown {
            tiers.push(TierRow { model: name.clone(), tier, n: s.n, jsd_mean: s.mean, jsd_sd: s.sd });
        }

        let profile = per_category_profile(&hs, &ms).map_err(|e| PipelineError::stage(Stage::Evaluate, e))?;
        for (k, c) in profile.categories.iter().enumerate() {
            let human_rate = mean(&hs.iter().map(|d| d.get(k)).collect::<Vec<_>>());
            per_category.push(CategoryRow {
                model: name.clone(),
                category: ctx.space.name(k).unwrap_or("?").to_string(),
                human_rate,
                model_rate: human_rate + c.delta,
                delta: c.delta,
                rho: c.rho.map(|r| r.rho),
                rho_p: c.rho.map(|r| r.p_value),
                n_positive: c.n_positive,
            });
        }

        for &t in &ctx.config.sampler.temperatures {
            let Some(at) = by_temp.get(&t.to_bits()) else { continue };
            let mut js = Vec::new();
            let (mut he, mut me) = (Vec::new(), Vec::new());
            for h in &human {
                let Some(m) = at.get(h.text_id.as_str()) else { continue };
                js.push(jsd(&dist(&h.probs)?, &dist(&m.probs)?).map_err(|e| PipelineError::stage(Stage::Evaluate, e))?);
                he.push(h.entropy);
                me.push(m.entropy);
            }
            let ent = correlation(&he, &me)?;
            per_temperature.push(TemperatureRow {
                model: name.clone(),
                temperature: t,
                n: js.len(),
                jsd_mean: mean(&js),
                entropy_rho: ent.map(|c| c.rho),
                entropy_p: ent.map(|c| c.p_value),
            });
        }
        per_text.extend(text_rows);
    }

    ctx.ws.write_csv(PER_TEXT, &per_text)?;
    ctx.ws.write_csv(AGGREGATE, &aggregate)?;
    ctx.ws.write_csv(PER_TEMPERATURE, &per_temperature)?;
    ctx.ws.write_csv(TIERS, &tiers)?;
    ctx.ws.write_csv(PER_CATEGORY, &per_category)?;

    if ctx.config.corpus.vad.is_some() {
        evaluate_vad(ctx)?;
    }
    Ok(())
}

fn evaluate_vad(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let mut summary = Vec::new();
    let mut tiers = Vec::new();
    let models: Vec<_> = ctx
        .config
        .models
        .iter()
        .filter(|m| !(m.backend == BackendKind::Store && m.vad_store.is_none()))
        .map(|m| m.name.clone())
        .collect();
    for name in models {
        let rows: Vec<VadRow> = ctx.ws.read_jsonl(&dists::vad_path(&name), Stage::Dists)?;
        let human: Vec<_> = rows.iter().map(|r| r.human).collect();
        let model: Vec<_> = rows.iter().map(|r| r.model).collect();
        let eval = match vad_evaluate(&human, &model) {
            Ok(e) => e,
            Err(MetricsError::TooFew { .. }) => {
                log::warn!("{name}: fewer than three VAD texts; skipped");
                continue;
            }
            Err(e) => return Err(PipelineError::stage(Stage::Evaluate, e)),
        };
        let [v, a, d] = [eval.v, eval.a, eval.d];
        summary.push(VadSummaryRow {
            model: name.clone(),
            n: rows.len(),
            mae: eval.overall_mae(),
            v_mae: v.mae,
            a_mae: a.mae,
            d_mae: d.mae,
            v_r: v.pearson_r,
            a_r: a.pearson_r,
            d_r: d.pearson_r,
            v_rho: v.spearman_rho,
            a_rho: a.spearman_rho,
            d_rho: d.spearman_rho,
            v_model_sd: v.model_sd,
            a_model_sd: a.model_sd,
            d_model_sd: d.model_sd,
            v_human_sd: v.human_sd,
            a_human_sd: a.human_sd,
            d_human_sd: d.human_sd,
        });
        let maes: Vec<f64> = rows
            .iter()
            .map(|r| r.human.dims().iter().zip(r.model.dims()).map(|(h, m)| (h - m).abs()).sum::<f64>() / 3.0)
            .collect();
        let tier_of: Vec<AgreementTier> = rows.iter().map(|r| r.tier).collect();
        let breakdown = tier_breakdown(&maes, &tier_of).map_err(|e| PipelineError::stage(Stage::Evaluate, e))?;
        for (tier, s) in breakdown {
            tiers.push(VadTierRow { model: name.clone(), tier, n: s.n, mae_mean: s.mean, mae_sd: s.sd });
        }
    }
    ctx.ws.write_csv(VAD, &summary)?;
    ctx.ws.write_csv(VAD_TIERS, &tiers)?;
    Ok(())
}
