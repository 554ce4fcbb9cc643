//! Significance tests and confidence intervals over per-text JSD.

use std::collections::BTreeMap;

use emodist::seed::SeedHasher;
use emodist::stats::{bootstrap_ci, effect_sizes, kruskal_wallis_dunn, mann_whitney, wilcoxon_signed_rank, Statistic, StatsError};
use emodist::AgreementTier;
use serde::{Deserialize, Serialize};

use super::calibrate::{self, TextRow};
use super::evaluate::{self, PerTextRow};
use super::Ctx;
use crate::{PipelineError, Stage};

pub(crate) const BOOTSTRAP: &str = "stats/bootstrap.csv";
pub(crate) const TIER_TESTS: &str = "stats/tier_tests.csv";
pub(crate) const DUNN: &str = "stats/dunn.csv";
pub(crate) const MODEL_PAIRS: &str = "stats/model_pairs.csv";
pub(crate) const GROUPS: &str = "stats/groups.csv";
pub(crate) const CALIBRATION_TESTS: &str = "stats/calibration_tests.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct BootstrapRow {
    pub model: String,
    pub statistic: String,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TierTestRow {
    pub model: String,
    pub h: f64,
    pub p_value: f64,
    pub p_floored: bool,
    pub n_full_agreement: usize,
    pub n_partial: usize,
    pub n_full_disagreement: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct DunnRow {
    pub model: String,
    pub tier_a: AgreementTier,
    pub tier_b: AgreementTier,
    pub z: f64,
    pub p_bonferroni: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct PairRow {
    pub a: String,
    pub b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub u: f64,
    pub p_value: f64,
    pub p_floored: bool,
    pub cliffs_delta: f64,
    pub cohens_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CalibrationTestRow {
    pub model: String,
    pub method: String,
    pub n_nonzero: usize,
    pub w_plus: f64,
    pub p_value: f64,
    pub p_floored: bool,
    pub effect_r: Option<f64>,
    pub fraction_improved: f64,
}

fn skip_degenerate<T>(what: &str, r: Result<T, StatsError>) -> Result<Option<T>, PipelineError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (StatsError::TooFew { .. } | StatsError::EmptyGroup(_) | StatsError::TooFewGroups)) => {
            log::warn!("{what}: {e}; skipped");
            Ok(None)
        }
        Err(e) => Err(PipelineError::stage(Stage::Stats, format!("{what}: {e}"))),
    }
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let per_text: Vec<PerTextRow> = ctx.ws.read_csv(evaluate::PER_TEXT, Stage::Evaluate)?;
    let calibrated: Vec<TextRow> = ctx.ws.read_csv(calibrate::PER_TEXT, Stage::Calibrate)?;
    let seed = ctx.ws.stage_seed(Stage::Stats);
    let cfg = &ctx.config.stats;

    let names = ctx.config.all_model_names();
    let mut by_model: BTreeMap<&str, Vec<&PerTextRow>> = BTreeMap::new();
    for r in &per_text {
        by_model.entry(r.model.as_str()).or_default().push(r);
    }
    let jsd_of = |name: &str| -> Vec<f64> { by_model.get(name).map(|v| v.iter().map(|r| r.jsd).collect()).unwrap_or_default() };

    let mut bootstrap = Vec::new();
    let mut tier_tests = Vec::new();
    let mut dunn = Vec::new();
    for name in &names {
        let jsds = jsd_of(name);
        let model_seed = SeedHasher::new(seed, name).finish();
        if let Some(ci) = skip_degenerate(name, bootstrap_ci(&jsds, &Statistic::Mean, cfg.bootstrap_iterations, cfg.level, model_seed))? {
            bootstrap.push(BootstrapRow {
                model: name.clone(),
                statistic: "mean_jsd".into(),
                point: ci.point,
                lower: ci.lower,
                upper: ci.upper,
                level: ci.level,
                iterations: ci.iterations,
                seed: ci.seed,
            });
        }

        let rows = by_model.get(name.as_str()).cloned().unwrap_or_default();
        let present: Vec<AgreementTier> =
            AgreementTier::CATEGORICAL.into_iter().filter(|t| rows.iter().any(|r| r.tier == *t)).collect();
        let groups: Vec<Vec<f64>> =
            present.iter().map(|t| rows.iter().filter(|r| r.tier == *t).map(|r| r.jsd).collect()).collect();
        let Some(kw) = skip_degenerate(name, kruskal_wallis_dunn(&groups))? else { continue };
        let count = |t: AgreementTier| rows.iter().filter(|r| r.tier == t).count();
        tier_tests.push(TierTestRow {
            model: name.clone(),
            h: kw.test.statistic,
            p_value: kw.test.p_value,
            p_floored: kw.test.p_floored,
            n_full_agreement: count(AgreementTier::FullAgreement),
            n_partial: count(AgreementTier::Partial),
            n_full_disagreement: count(AgreementTier::FullDisagreement),
        });
        for i in 0..present.len() {
            for j in i + 1..present.len() {
                dunn.push(DunnRow {
                    model: name.clone(),
                    tier_a: present[i],
                    tier_b: present[j],
                    z: kw.pairwise_z[i][j],
                    p_bonferroni: kw.pairwise_p[i][j],
                });
            }
        }
    }

    let mut pairs = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            if let Some(row) = compare(&names[i], &names[j], &jsd_of(&names[i]), &jsd_of(&names[j]))? {
                pairs.push(row);
            }
        }
    }

    let mut grouped: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for m in &ctx.config.models {
        if let Some(g) = &m.group {
            grouped.entry(g.as_str()).or_default().extend(jsd_of(&m.name));
        }
    }
    let group_names: Vec<&str> = grouped.keys().copied().collect();
    let mut groups = Vec::new();
    for i in 0..group_names.len() {
        for j in i + 1..group_names.len() {
            let (a, b) = (group_names[i], group_names[j]);
            if let Some(row) = compare(a, b, &grouped[a], &grouped[b])? {
                groups.push(row);
            }
        }
    }

    let mut by_method: BTreeMap<(&str, &str), Vec<&TextRow>> = BTreeMap::new();
    for r in &calibrated {
        by_method.entry((r.model.as_str(), r.method.as_str())).or_default().push(r);
    }
    let mut calibration_tests = Vec::new();
    for ((model, method), rows) in by_method {
        if method == "none" {
            continue;
        }
        let before: Vec<f64> = rows.iter().map(|r| r.jsd_before).collect();
        let after: Vec<f64> = rows.iter().map(|r| r.jsd_after).collect();
        let improved = rows.iter().filter(|r| r.jsd_after < r.jsd_before).count() as f64 / rows.len() as f64;
        let what = format!("{model} {method}");
        let Some(t) = skip_degenerate(&what, wilcoxon_signed_rank(&before, &after))? else { continue };
        calibration_tests.push(CalibrationTestRow {
            model: model.to_string(),
            method: method.to_string(),
            n_nonzero: t.n.first().copied().unwrap_or(0),
            w_plus: t.statistic,
            p_value: t.p_value,
            p_floored: t.p_floored,
            effect_r: t.effect_size,
            fraction_improved: improved,
        });
    }

    ctx.ws.write_csv(BOOTSTRAP, &bootstrap)?;
    ctx.ws.write_csv(TIER_TESTS, &tier_tests)?;
    ctx.ws.write_csv(DUNN, &dunn)?;
    ctx.ws.write_csv(MODEL_PAIRS, &pairs)?;
    ctx.ws.write_csv(GROUPS, &groups)?;
    ctx.ws.write_csv(CALIBRATION_TESTS, &calibration_tests)?;
    Ok(())
}

fn compare(a: &str, b: &str, xa: &[f64], xb: &[f64]) -> Result<Option<PairRow>, PipelineError> {
    let what = format!("{a} vs {b}");
    let Some(mw) = skip_degenerate(&what, mann_whitney(xa, xb))? else { return Ok(None) };
    let Some(es) = skip_degenerate(&what, effect_sizes(xa, xb))? else { return Ok(None) };
    Ok(Some(PairRow {
        a: a.to_string(),
        b: b.to_string(),
        n_a: xa.len(),
        n_b: xb.len(),
        u: mw.statistic,
        p_value: mw.p_value,
        p_floored: mw.p_floored,
        cliffs_delta: es.cliffs_delta,
        cohens_d: es.cohens_d,
    }))
}
