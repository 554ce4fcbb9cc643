//! Markdown summary of every stage's tables, plus a calibration pivot CSV.
//! The summary ends with the SHA-256 of each artifact it was built from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::calibrate::{self, SummaryRow};
use super::dists::{self, FailureRow};
use super::evaluate::{self, AggregateRow, TemperatureRow, TierRow, VadSummaryRow};
use super::stats::{self, BootstrapRow, CalibrationTestRow, PairRow, TierTestRow};
use super::transparency::{self, PredictivityRow};
use super::Ctx;
use crate::{PipelineError, Stage};

pub(crate) const SUMMARY: &str = "report/summary.md";
pub(crate) const CALIBRATION_TABLE: &str = "report/calibration_table.csv";

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

fn opt3(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), f3)
}

fn pval(p: f64, floored: bool) -> String {
    if floored {
        format!("< {:.0e}", emodist::stats::P_FLOOR)
    } else if p < 1e-3 {
        format!("{p:.1e}")
    } else {
        format!("{p:.3}")
    }
}

fn table(out: &mut String, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", header.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let mut md = String::from("# emodist report\n\n");
    let _ = writeln!(md, "Root seed {}; config hash `{}`.\n", ctx.config.seed, ctx.config.hash());

    let aggregate: Vec<AggregateRow> = ctx.ws.read_csv(evaluate::AGGREGATE, Stage::Evaluate)?;
    md.push_str("## Aggregate JSD\n\n");
    table(
        &mut md,
        &["model", "n", "JSD mean", "JSD sd", "JSD median", "KLD mean", "W1 mean"],
        aggregate.iter().map(|r| {
            vec![r.model.clone(), r.n.to_string(), f3(r.jsd_mean), f3(r.jsd_sd), f3(r.jsd_median), f3(r.kld_mean), f3(r.wasserstein_mean)]
        }),
    );

    let temps: Vec<TemperatureRow> = ctx.ws.read_csv(evaluate::PER_TEMPERATURE, Stage::Evaluate)?;
    md.push_str("## Per temperature\n\n");
    table(
        &mut md,
        &["model", "τ", "n", "JSD mean", "entropy ρ"],
        temps.iter().map(|r| vec![r.model.clone(), format!("{:.1}", r.temperature), r.n.to_string(), f3(r.jsd_mean), opt3(r.entropy_rho)]),
    );

    md.push_str("## Entropy correspondence\n\n");
    table(
        &mut md,
        &["model", "Spearman ρ", "p"],
        aggregate
            .iter()
            .map(|r| vec![r.model.clone(), opt3(r.entropy_rho), r.entropy_p.map_or("n/a".into(), |p| pval(p, false))]),
    );

    let tiers: Vec<TierRow> = ctx.ws.read_csv(evaluate::TIERS, Stage::Evaluate)?;
    let tier_tests: Vec<TierTestRow> = ctx.ws.read_csv(stats::TIER_TESTS, Stage::Stats)?;
    let kw: BTreeMap<&str, &TierTestRow> = tier_tests.iter().map(|r| (r.model.as_str(), r)).collect();
    md.push_str("## JSD by agreement tier\n\n");
    let mut tier_rows: BTreeMap<&str, BTreeMap<String, String>> = BTreeMap::new();
    for r in &tiers {
        tier_rows.entry(r.model.as_str()).or_default().insert(r.tier.as_str().to_string(), format!("{} (n={})", f3(r.jsd_mean), r.n));
    }
    table(
        &mut md,
        &["model", "full agreement", "partial", "full disagreement", "Kruskal–Wallis H", "p"],
        aggregate.iter().map(|a| {
            let t = tier_rows.get(a.model.as_str());
            let cell = |k: &str| t.and_then(|m| m.get(k)).cloned().unwrap_or_else(|| "n/a".into());
            let test = kw.get(a.model.as_str());
            vec![
                a.model.clone(),
                cell("full_agreement"),
                cell("partial"),
                cell("full_disagreement"),
                test.map_or("n/a".into(), |t| f3(t.h)),
                test.map_or("n/a".into(), |t| pval(t.p_value, t.p_floored)),
            ]
        }),
    );

    if ctx.config.transparency.is_some() {
        let rows: Vec<PredictivityRow> = ctx.ws.read_csv(transparency::PREDICTIVITY, Stage::Transparency)?;
        md.push_str("## Lexical transparency vs per-category ρ\n\n");
        table(
            &mut md,
            &["analysis", "score", "r_s", "p", "n", "excluded"],
            rows.iter().map(|r| {
                vec![r.analysis.clone(), r.score.clone(), f3(r.r_s), pval(r.p_value, false), r.n.to_string(), r.excluded.replace(';', ", ")]
            }),
        );
    }

    let cal: Vec<SummaryRow> = ctx.ws.read_csv(calibrate::SUMMARY, Stage::Calibrate)?;
    let models: Vec<String> = {
        let mut seen = BTreeSet::new();
        cal.iter().filter(|r| seen.insert(r.model.clone())).map(|r| r.model.clone()).collect()
    };
    let methods: Vec<String> = {
        let mut seen = BTreeSet::new();
        cal.iter().filter(|r| seen.insert(r.method.clone())).map(|r| r.method.clone()).collect()
    };
    let lookup: BTreeMap<(&str, &str), &SummaryRow> = cal.iter().map(|r| ((r.method.as_str(), r.model.as_str()), r)).collect();
    let k = cal.first().map_or(ctx.config.calibration.k, |r| r.k);
    let _ = writeln!(md, "## Mean JSD after calibration ({k}-fold CV)\n");
    let mut header = vec!["method"];
    header.extend(models.iter().map(String::as_str));
    let mut pivot = Vec::new();
    let mut md_rows = Vec::new();
    for method in &methods {
        let mut cells = vec![method.clone()];
        for model in &models {
            let r = lookup.get(&(method.as_str(), model.as_str()));
            cells.push(r.map_or("n/a".into(), |r| f3(r.mean_jsd_after)));
            if let Some(r) = r {
                pivot.push(PivotRow { method: method.clone(), model: model.clone(), mean_jsd: r.mean_jsd_after, relative_change: r.relative_change });
            }
        }
        md_rows.push(cells);
    }
    let mut best = vec!["best ΔJSD".to_string()];
    for model in &models {
        let change = methods
            .iter()
            .filter(|m| m.as_str() != "none")
            .filter_map(|m| lookup.get(&(m.as_str(), model.as_str())).map(|r| r.relative_change))
            .fold(f64::INFINITY, f64::min);
        best.push(if change < 0.0 { format!("{:.1}%", 100.0 * change) } else { "none".into() });
    }
    md_rows.push(best);
    table(&mut md, &header, md_rows);

    let tests: Vec<CalibrationTestRow> = ctx.ws.read_csv(stats::CALIBRATION_TESTS, Stage::Stats)?;
    md.push_str("### Paired Wilcoxon signed-rank tests (after vs before)\n\n");
    table(
        &mut md,
        &["model", "method", "W+", "p", "r", "improved"],
        tests.iter().map(|t| {
            vec![t.model.clone(), t.method.clone(), format!("{:.1}", t.w_plus), pval(t.p_value, t.p_floored), opt3(t.effect_r), format!("{:.1}%", 100.0 * t.fraction_improved)]
        }),
    );

    if ctx.config.corpus.vad.is_some() {
        let vad: Vec<VadSummaryRow> = ctx.ws.read_csv(evaluate::VAD, Stage::Evaluate)?;
        md.push_str("## VAD summary\n\n");
        table(
            &mut md,
            &["model", "MAE", "V r", "A r", "D r", "model sd (V/A/D)", "human sd (V/A/D)"],
            vad.iter().map(|r| {
                vec![
                    r.model.clone(),
                    f3(r.mae),
                    opt3(r.v_r),
                    opt3(r.a_r),
                    opt3(r.d_r),
                    format!("{:.2}/{:.2}/{:.2}", r.v_model_sd, r.a_model_sd, r.d_model_sd),
                    format!("{:.2}/{:.2}/{:.2}", r.v_human_sd, r.a_human_sd, r.d_human_sd),
                ]
            }),
        );
    }

    let boot: Vec<BootstrapRow> = ctx.ws.read_csv(stats::BOOTSTRAP, Stage::Stats)?;
    md.push_str("## Bootstrap CIs for mean JSD\n\n");
    table(
        &mut md,
        &["model", "mean", "lower", "upper", "level"],
        boot.iter().map(|b| vec![b.model.clone(), f3(b.point), f3(b.lower), f3(b.upper), format!("{:.2}", b.level)]),
    );

    let pairs: Vec<PairRow> = ctx.ws.read_csv(stats::MODEL_PAIRS, Stage::Stats)?;
    let groups: Vec<PairRow> = ctx.ws.read_csv(stats::GROUPS, Stage::Stats)?;
    md.push_str("## Per-text JSD comparisons (Mann–Whitney)\n\n");
    table(
        &mut md,
        &["a", "b", "U", "p", "Cliff's δ", "Cohen's d"],
        pairs.iter().chain(&groups).map(|p| {
            vec![p.a.clone(), p.b.clone(), format!("{:.1}", p.u), pval(p.p_value, p.p_floored), f3(p.cliffs_delta), opt3(p.cohens_d)]
        }),
    );

    let failures: Vec<FailureRow> = ctx.ws.read_csv(dists::FAILURES, Stage::Dists)?;
    md.push_str("## Response failures\n\n");
    table(
        &mut md,
        &["model", "task", "failures", "rate"],
        failures
            .iter()
            .filter(|f| f.reason == "any")
            .map(|f| vec![f.model.clone(), f.task.clone(), f.count.to_string(), format!("{:.4}", f.rate)]),
    );

    md.push_str("## Provenance\n\n");
    table(
        &mut md,
        &["input", "sha256"],
        ctx.ws.inputs().into_iter().map(|(k, v)| vec![format!("`{k}`"), format!("`{v}`")]),
    );

    ctx.ws.write(SUMMARY, md.as_bytes())?;
    ctx.ws.write_csv(CALIBRATION_TABLE, &pivot)?;
    Ok(())
}

#[derive(Serialize)]
struct PivotRow {
    method: String,
    model: String,
    mean_jsd: f64,
    relative_change: f64,
}
