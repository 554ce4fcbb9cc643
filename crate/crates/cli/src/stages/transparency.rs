//! Lexical transparency scores and how well they predict per-category ρ.

use std::collections::{BTreeMap, BTreeSet};

use emodist::transparency::{raw_scores, transparency_table, EmbeddingTable, Lexicon, RawScore, TransparencyTable};
use emodist::TextRecord;
use serde::{Deserialize, Serialize};

use super::evaluate::{self, CategoryRow};
use super::ingest::{self, CoreText};
use super::Ctx;
use crate::{PipelineError, Stage};

pub(crate) const SCORES: &str = "transparency/scores.csv";
pub(crate) const PREDICTIVITY: &str = "transparency/predictivity.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ScoreRow {
    pub category: String,
    pub n_positive: usize,
    pub embedding_sim: f64,
    pub lexicon_cov: f64,
    pub embedding_norm: f64,
    pub lexicon_norm: f64,
    pub combined: f64,
    pub mean_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct PredictivityRow {
    /// `all`, or `restricted` once exclusions apply.
    pub analysis: String,
    pub score: String,
    pub r_s: f64,
    pub p_value: f64,
    pub n: usize,
    /// Semicolon-separated excluded categories.
    pub excluded: String,
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let Some(cfg) = ctx.config.transparency.clone() else {
        log::info!("no [transparency] section; nothing to do");
        return Ok(());
    };
    let records: Vec<TextRecord> = ctx
        .ws
        .read_jsonl::<CoreText>(ingest::CATEGORICAL, Stage::Ingest)?
        .into_iter()
        .map(|c| c.record)
        .collect();
    let categories: Vec<CategoryRow> = ctx.ws.read_csv(evaluate::PER_CATEGORY, Stage::Evaluate)?;
    let err = |e| PipelineError::stage(Stage::Transparency, e);
    let bytes = ctx.ws.read_input(&cfg.embeddings)?;
    let table = EmbeddingTable::read(bytes.as_slice(), &ctx.space).map_err(err)?;
    let bytes = ctx.ws.read_input(&cfg.lexicon)?;
    let lexicon = Lexicon::read(bytes.as_slice(), &ctx.space).map_err(err)?;

    // ρ averaged over the sampled models; external baselines are left out
    let sampled: BTreeSet<String> = ctx.config.models.iter().map(|m| m.name.clone()).collect();
    let mut rhos: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in &categories {
        if sampled.is_empty() || sampled.contains(&row.model) {
            if let Some(r) = row.rho {
                rhos.entry(row.category.clone()).or_default().push(r);
            }
        }
    }
    let mean_rho: BTreeMap<String, f64> =
        rhos.into_iter().map(|(c, v)| (c, v.iter().sum::<f64>() / v.len() as f64)).collect();

    let raw: Vec<RawScore> = raw_scores(&records, &ctx.space, &table, &lexicon)
        .map_err(err)?
        .into_iter()
        .filter(|r| {
            let keep = mean_rho.contains_key(&r.category);
            if !keep {
                log::warn!("{}: per-category ρ undefined for every model; left out", r.category);
            }
            keep
        })
        .collect();

    let main = transparency_table(&raw, &mean_rho, &BTreeSet::new()).map_err(err)?;
    let n_positive: BTreeMap<&str, usize> = raw.iter().map(|r| (r.category.as_str(), r.n_positive)).collect();
    let scores: Vec<ScoreRow> = main
        .categories
        .iter()
        .map(|c| ScoreRow {
            category: c.category.clone(),
            n_positive: n_positive[c.category.as_str()],
            embedding_sim: c.embedding_sim,
            lexicon_cov: c.lexicon_cov,
            embedding_norm: c.embedding_norm,
            lexicon_norm: c.lexicon_norm,
            combined: c.combined,
            mean_rho: c.mean_rho,
        })
        .collect();
    let mut predictivity = predictivity_rows("all", &main);

    let mut exclusions = cfg.exclude.clone();
    if let Some(min) = cfg.min_positive {
        exclusions.extend(raw.iter().filter(|r| r.n_positive < min).map(|r| r.category.clone()));
    }
    if !exclusions.is_empty() {
        let restricted = transparency_table(&raw, &mean_rho, &exclusions).map_err(err)?;
        predictivity.extend(predictivity_rows("restricted", &restricted));
    }

    ctx.ws.write_csv(SCORES, &scores)?;
    ctx.ws.write_csv(PREDICTIVITY, &predictivity)?;
    Ok(())
}

fn predictivity_rows(analysis: &str, table: &TransparencyTable) -> Vec<PredictivityRow> {
    let excluded = table.excluded.join(";");
    table
        .predictivity
        .rows()
        .iter()
        .map(|(score, c)| PredictivityRow {
            analysis: analysis.to_string(),
            score: score.to_string(),
            r_s: c.rho,
            p_value: c.p_value,
            n: c.n,
            excluded: excluded.clone(),
        })
        .collect()
}
