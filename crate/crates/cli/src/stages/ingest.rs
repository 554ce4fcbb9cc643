//! Load corpora, assign tiers, draw the stratified core sets and bring in
//! external distributions.

use std::collections::{BTreeMap, HashSet};

use emodist::corpus::{
    read_categorical_corpus, read_vad_corpus, stratified_sample, LoadedCorpus,
};
use emodist::{AgreementTier, TextRecord};
use serde::{Deserialize, Serialize};

use super::Ctx;
use crate::external::{ingest_external_distributions, ExternalRowError};
use crate::{PipelineError, Stage};

pub(crate) const CATEGORICAL: &str = "ingest/categorical.jsonl";
pub(crate) const VAD: &str = "ingest/vad.jsonl";
pub(crate) const REJECTIONS: &str = "ingest/rejections.csv";
pub(crate) const SUMMARY: &str = "ingest/summary.csv";

pub(crate) fn external_path(name: &str) -> String {
    format!("ingest/external/{name}.jsonl")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CoreText {
    pub tier: AgreementTier,
    #[serde(flatten)]
    pub record: TextRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ExternalRow {
    pub text_id: String,
    pub probs: Vec<f64>,
}

#[derive(Serialize)]
struct RejectionRow<'a> {
    source: &'a str,
    line: u64,
    text_id: &'a str,
    reason: String,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    source: &'a str,
    tier: &'a str,
    available: usize,
    selected: usize,
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let corpus_cfg = &ctx.config.corpus;
    let mut rejections = Vec::new();
    let mut summary = Vec::new();

    let bytes = ctx.ws.read_input(&corpus_cfg.categorical)?;
    let loaded = read_categorical_corpus(bytes.as_slice(), &ctx.space).map_err(|e| PipelineError::stage(Stage::Ingest, e))?;
    let corpus_ids: HashSet<String> = loaded.records.iter().map(|r| r.text_id.clone()).collect();
    let core = select(
        "categorical",
        loaded,
        |r| r.tier().ok(),
        corpus_cfg.tiers.as_ref(),
        ctx.ws.stage_seed(Stage::Ingest),
        &mut rejections,
        &mut summary,
    )?;
    let core_ids: HashSet<String> = core.iter().map(|c| c.record.text_id.clone()).collect();
    ctx.ws.write_jsonl(CATEGORICAL, &core)?;

    if let Some(path) = &corpus_cfg.vad {
        let bytes = ctx.ws.read_input(path)?;
        let loaded = read_vad_corpus(bytes.as_slice()).map_err(|e| PipelineError::stage(Stage::Ingest, e))?;
        let core = select(
            "vad",
            loaded,
            |r| r.tier().ok(),
            corpus_cfg.vad_tiers.as_ref(),
            emodist::seed::SeedHasher::new(ctx.ws.stage_seed(Stage::Ingest), "vad").finish(),
            &mut rejections,
            &mut summary,
        )?;
        ctx.ws.write_jsonl(VAD, &core)?;
    }

    for ext in &ctx.config.external {
        let bytes = ctx.ws.read_input(&ext.path)?;
        let parsed = ingest_external_distributions(bytes.as_slice(), &ctx.space)
            .map_err(|e| PipelineError::stage(Stage::Ingest, format!("{}: {e}", ext.name)))?;
        for r in &parsed.rejected {
            rejections.push((ext.name.clone(), r.line, r.text_id.clone(), r.error.to_string()));
        }
        let mut rows = Vec::new();
        for (text_id, dist) in parsed.rows {
            if core_ids.contains(&text_id) {
                rows.push(ExternalRow { text_id, probs: dist.probs().to_vec() });
            } else if !corpus_ids.contains(&text_id) {
                // texts outside the core set are expected after stratification
                rejections.push((ext.name.clone(), 0, text_id, ExternalRowError::UnknownTextId.to_string()));
            }
        }
        let missing = core_ids.len() - rows.len();
        if missing > 0 {
            log::warn!("{}: {missing} core texts have no external distribution", ext.name);
        }
        rows.sort_by(|a, b| a.text_id.cmp(&b.text_id));
        summary.push((ext.name.clone(), "all".to_string(), core_ids.len(), rows.len()));
        ctx.ws.write_jsonl(&external_path(&ext.name), &rows)?;
    }

    let rows: Vec<RejectionRow> = rejections
        .iter()
        .map(|(source, line, text_id, reason)| RejectionRow { source, line: *line, text_id, reason: reason.clone() })
        .collect();
    ctx.ws.write_csv(REJECTIONS, &rows)?;
    let rows: Vec<SummaryRow> = summary
        .iter()
        .map(|(source, tier, available, selected)| SummaryRow { source, tier, available: *available, selected: *selected })
        .collect();
    ctx.ws.write_csv(SUMMARY, &rows)?;
    Ok(())
}

type Rejection = (String, u64, String, String);

/// Tier every record, drop the untierable ones and stratify if asked.
/// Output is sorted by text_id.
fn select(
    source: &str,
    loaded: LoadedCorpus,
    tier_of: impl Fn(&TextRecord) -> Option<AgreementTier>,
    counts: Option<&BTreeMap<AgreementTier, usize>>,
    seed: u64,
    rejections: &mut Vec<Rejection>,
    summary: &mut Vec<(String, String, usize, usize)>,
) -> Result<Vec<CoreText>, PipelineError> {
    for r in &loaded.rejected {
        rejections.push((source.to_string(), r.line, r.text_id.clone().unwrap_or_default(), r.error.to_string()));
    }
    let mut tiered = Vec::new();
    let mut available: BTreeMap<AgreementTier, usize> = BTreeMap::new();
    for record in loaded.records {
        match tier_of(&record) {
            Some(tier) => {
                *available.entry(tier).or_default() += 1;
                tiered.push(CoreText { tier, record });
            }
            None => rejections.push((source.to_string(), 0, record.text_id.clone(), "untierable".to_string())),
        }
    }
    let mut core = match counts {
        None => tiered,
        Some(counts) => {
            let records: Vec<TextRecord> = tiered.iter().map(|c| c.record.clone()).collect();
            let tiers: BTreeMap<String, AgreementTier> =
                tiered.iter().map(|c| (c.record.text_id.clone(), c.tier)).collect();
            stratified_sample(&records, counts, seed)
                .map_err(|e| PipelineError::stage(Stage::Ingest, format!("{source}: {e}")))?
                .into_iter()
                .map(|record| CoreText { tier: tiers[&record.text_id], record })
                .collect()
        }
    };
    core.sort_by(|a, b| a.record.text_id.cmp(&b.record.text_id));
    let mut selected: BTreeMap<AgreementTier, usize> = BTreeMap::new();
    for c in &core {
        *selected.entry(c.tier).or_default() += 1;
    }
    for (tier, n) in &available {
        summary.push((source.to_string(), tier.as_str().to_string(), *n, selected.get(tier).copied().unwrap_or(0)));
    }
    Ok(core)
}
