//! Post-hoc calibration of model distributions toward human distributions.
//!
//! Three families are supported:
//!
//! - temperature scaling of pseudo-logits `z_k = ln(q_k + 1e-10)`,
//!   `q̂_k ∝ exp(z_k / T)`, with `T` chosen to minimise mean JSD on training data;
//! - bias correction, subtracting the mean per-category over-prediction,
//!   clipping at zero and renormalising;
//! - per-category isotonic maps from model rate to human rate, fitted with
//!   pool-adjacent-violators and applied by linear interpolation between
//!   block knots, followed by renormalisation.
//!
//! [`crossval`] evaluates any of them under tier-stratified k-fold
//! cross-validation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AgreementTier;
use crate::dist::CategoricalDistribution;
use crate::labels::LabelSpace;
use crate::metrics::jsd;
use crate::seed::SeedHasher;

/// Additive smoothing before taking pseudo-logits.
pub const LOGIT_EPSILON: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("training set is empty")]
    EmptyTrain,
    #[error("distributions have mismatched lengths")]
    LengthMismatch,
    #[error("tier {tier} has {found} texts, fewer than the {k} folds")]
    InsufficientTexts {
        tier: AgreementTier,
        found: usize,
        k: usize,
    },
    #[error("fold count must be at least 2, got {0}")]
    FoldCount(usize),
    #[error("label-space fingerprint mismatch: model {model}, data {data}")]
    Fingerprint { model: String, data: String },
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("model expects {expected} categories, distribution has {found}")]
    Categories { expected: usize, found: usize },
}

/// Weighted L2-optimal non-decreasing fit of `ys` (pool adjacent violators).
///
/// Each output value is the weighted mean of the block of inputs it was
/// pooled with.
pub fn pava(ys: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(ys.len(), weights.len(), "pava: ys and weights differ in length");
    // blocks as (weighted sum, total weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(ys.len());
    for (&y, &w) in ys.iter().zip(weights) {
        debug_assert!(w > 0.0, "pava weights must be positive");
        blocks.push((y * w, w, 1));
        while blocks.len() > 1 {
            let (s1, w1, _) = blocks[blocks.len() - 1];
            let (s0, w0, _) = blocks[blocks.len() - 2];
            if s0 / w0 <= s1 / w1 {
                break;
            }
            let last = blocks.pop().expect("len > 1");
            let prev = blocks.last_mut().expect("len > 0");
            prev.0 += last.0;
            prev.1 += last.1;
            prev.2 += last.2;
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (s, w, c) in blocks {
        out.extend(std::iter::repeat_n(s / w, c));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureModel {
    #[serde(rename = "T")]
    pub t: f64,
}

impl TemperatureModel {
    pub fn new(t: f64) -> Result<Self, CalibrationError> {
        if !(t.is_finite() && t > 0.0) {
            return Err(CalibrationError::Temperature(t));
        }
        Ok(Self { t })
    }
}

/// Search space for [`fit_temperature`]: a log-spaced grid followed by
/// golden-section refinement inside the best grid bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub refine_iterations: usize,
}

impl Default for TemperatureGrid {
    fn default() -> Self {
        Self {
            min: 0.05,
            max: 20.0,
            points: 64,
            refine_iterations: 60,
        }
    }
}

impl TemperatureGrid {
    pub fn values(&self) -> Vec<f64> {
        let (lo, hi) = (self.min.ln(), self.max.ln());
        let n = self.points.max(2);
        (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

pub fn apply_temperature(q: &CategoricalDistribution, model: &TemperatureModel) -> CategoricalDistribution {
    let scaled: Vec<f64> = q
        .probs()
        .iter()
        .map(|&p| (p + LOGIT_EPSILON).ln() / model.t)
        .collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scaled.iter().map(|z| (z - max).exp()).collect();
    CategoricalDistribution::from_weights(weights).expect("max entry contributes exp(0) = 1")
}

fn mean_jsd_at(train: &[(CategoricalDistribution, CategoricalDistribution)], t: f64) -> f64 {
    let model = TemperatureModel { t };
    let total: f64 = train
        .iter()
        .map(|(q, p)| jsd(&apply_temperature(q, &model), p).expect("lengths checked"))
        .sum();
    total / train.len() as f64
}

fn check_pairs(train: &[(CategoricalDistribution, CategoricalDistribution)]) -> Result<usize, CalibrationError> {
    let first = train.first().ok_or(CalibrationError::EmptyTrain)?;
    let k = first.0.len();
    if train.iter().any(|(q, p)| q.len() != k || p.len() != k) {
        return Err(CalibrationError::LengthMismatch);
    }
    Ok(k)
}

/// Fit `T` on `(model q, human p)` pairs by minimising mean JSD.
pub fn fit_temperature(
    train: &[(CategoricalDistribution, CategoricalDistribution)],
    grid: &TemperatureGrid,
) -> Result<TemperatureModel, CalibrationError> {
    check_pairs(train)?;
    let values = grid.values();
    let losses: Vec<f64> = values.iter().map(|&t| mean_jsd_at(train, t)).collect();
    let best = losses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    // golden-section in log T over the neighbouring grid points
    let mut a = values[best.saturating_sub(1)].ln();
    let mut b = values[(best + 1).min(values.len() - 1)].ln();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |x: f64| mean_jsd_at(train, x.exp());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..grid.refine_iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let (refined, refined_loss) = if fc <= fd { (c.exp(), fc) } else { (d.exp(), fd) };
    let t = if refined_loss <= losses[best] { refined } else { values[best] };
    TemperatureModel::new(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasModel {
    pub b: Vec<f64>,
}

/// `b_k = mean(q_k) − mean(p_k)` over the training pairs.
pub fn fit_bias(
    train: &[(CategoricalDistribution, CategoricalDistribution)],
) -> Result<BiasModel, CalibrationError> {
    let k = check_pairs(train)?;
    let mut b = vec![0.0; k];
    for (q, p) in train {
        for (bk, (qk, pk)) in b.iter_mut().zip(q.probs().iter().zip(p.probs())) {
            *bk += qk - pk;
        }
    }
    let n = train.len() as f64;
    b.iter_mut().for_each(|x| *x /= n);
    Ok(BiasModel { b })
}

/// `max(q_k − b_k, 0)` renormalised; uniform when everything clips.
pub fn apply_bias(q: &CategoricalDistribution, model: &BiasModel) -> CategoricalDistribution {
    let weights = q
        .probs()
        .iter()
        .zip(&model.b)
        .map(|(qk, bk)| (qk - bk).max(0.0))
        .collect();
    CategoricalDistribution::from_weights_or_uniform(weights)
}

/// One knot of a piecewise-linear monotone map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicModel {
    /// Per category; `None` means identity (fewer than two distinct rates).
    pub maps: Vec<Option<Vec<Knot>>>,
}

/// Fit one monotone map from `xs` (model rates) to `ys` (human rates).
/// Returns `None` when fewer than two distinct `x` values exist.
pub fn fit_monotone_map(xs: &[f64], ys: &[f64]) -> Option<Vec<Knot>> {
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    // merge identical x: summed weight, mean y
    let mut ux: Vec<f64> = Vec::new();
    let mut uy: Vec<f64> = Vec::new();
    let mut uw: Vec<f64> = Vec::new();
    for (x, y) in pts {
        match ux.last() {
            Some(&last) if last == x => {
                let i = ux.len() - 1;
                uy[i] += y;
                uw[i] += 1.0;
            }
            _ => {
                ux.push(x);
                uy.push(y);
                uw.push(1.0);
            }
        }
    }
    if ux.len() < 2 {
        return None;
    }
    for (y, w) in uy.iter_mut().zip(&uw) {
        *y /= w;
    }
    let fitted = pava(&uy, &uw);
    let mut knots = Vec::new();
    let mut i = 0;
    while i < ux.len() {
        let mut j = i;
        while j + 1 < ux.len() && fitted[j + 1] == fitted[i] {
            j += 1;
        }
        let y = fitted[i].clamp(0.0, 1.0);
        knots.push(Knot { x: ux[i], y });
        if j > i {
            knots.push(Knot { x: ux[j], y });
        }
        i = j + 1;
    }
    Some(knots)
}

/// Piecewise-linear interpolation through `knots`, clamped to the end values.
pub fn interpolate(knots: &[Knot], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.x {
        return first.y;
    }
    if x >= last.x {
        return last.y;
    }
    let hi = knots.partition_point(|k| k.x < x);
    let (a, b) = (knots[hi - 1], knots[hi]);
    if b.x == x {
        return b.y;
    }
    a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x)
}

pub fn fit_isotonic(
    train: &[(CategoricalDistribution, CategoricalDistribution)],
) -> Result<IsotonicModel, CalibrationError> {
    let k = check_pairs(train)?;
    let maps = (0..k)
        .map(|c| {
            let xs: Vec<f64> = train.iter().map(|(q, _)| q.get(c)).collect();
            let ys: Vec<f64> = train.iter().map(|(_, p)| p.get(c)).collect();
            fit_monotone_map(&xs, &ys)
        })
        .collect();
    Ok(IsotonicModel { maps })
}

/// Per-category mapped rates before renormalisation.
pub fn isotonic_rates(q: &CategoricalDistribution, model: &IsotonicModel) -> Vec<f64> {
    q.probs()
        .iter()
        .zip(&model.maps)
        .map(|(&x, map)| match map {
            Some(knots) => interpolate(knots, x),
            None => x,
        })
        .collect()
}

pub fn apply_isotonic(q: &CategoricalDistribution, model: &IsotonicModel) -> CategoricalDistribution {
    CategoricalDistribution::from_weights_or_uniform(isotonic_rates(q, model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    None,
    Temperature,
    Bias,
    Isotonic,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::Temperature, Method::Bias, Method::Isotonic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Temperature => "temperature",
            Method::Bias => "bias",
            Method::Isotonic => "isotonic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// A fitted calibration map of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CalibrationModel {
    None,
    Temperature(TemperatureModel),
    Bias(BiasModel),
    Isotonic(IsotonicModel),
}

impl CalibrationModel {
    pub fn fit(
        method: Method,
        train: &[(CategoricalDistribution, CategoricalDistribution)],
    ) -> Result<Self, CalibrationError> {
        check_pairs(train)?;
        Ok(match method {
            Method::None => CalibrationModel::None,
            Method::Temperature => {
                CalibrationModel::Temperature(fit_temperature(train, &TemperatureGrid::default())?)
            }
            Method::Bias => CalibrationModel::Bias(fit_bias(train)?),
            Method::Isotonic => CalibrationModel::Isotonic(fit_isotonic(train)?),
        })
    }

    pub fn method(&self) -> Method {
        match self {
            CalibrationModel::None => Method::None,
            CalibrationModel::Temperature(_) => Method::Temperature,
            CalibrationModel::Bias(_) => Method::Bias,
            CalibrationModel::Isotonic(_) => Method::Isotonic,
        }
    }

    pub fn apply(&self, q: &CategoricalDistribution) -> CategoricalDistribution {
        match self {
            CalibrationModel::None => q.clone(),
            CalibrationModel::Temperature(m) => apply_temperature(q, m),
            CalibrationModel::Bias(m) => apply_bias(q, m),
            CalibrationModel::Isotonic(m) => apply_isotonic(q, m),
        }
    }

    fn categories(&self) -> Option<usize> {
        match self {
            CalibrationModel::Bias(m) => Some(m.b.len()),
            CalibrationModel::Isotonic(m) => Some(m.maps.len()),
            _ => None,
        }
    }
}

/// Serialised form of a calibration model, bound to a label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub label_fingerprint: String,
    #[serde(flatten)]
    pub model: CalibrationModel,
}

impl StoredModel {
    pub fn new(model: CalibrationModel, space: &LabelSpace) -> Self {
        Self {
            label_fingerprint: space.fingerprint(),
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Apply after checking the label-space fingerprint and category count.
    pub fn apply(
        &self,
        q: &CategoricalDistribution,
        space: &LabelSpace,
    ) -> Result<CategoricalDistribution, CalibrationError> {
        let data = space.fingerprint();
        if data != self.label_fingerprint {
            return Err(CalibrationError::Fingerprint {
                model: self.label_fingerprint.clone(),
                data,
            });
        }
        if let Some(expected) = self.model.categories() {
            if expected != q.len() {
                return Err(CalibrationError::Categories { expected, found: q.len() });
            }
        }
        Ok(self.model.apply(q))
    }
}

/// One text entering cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPair {
    pub text_id: String,
    pub tier: AgreementTier,
    pub model: CategoricalDistribution,
    pub human: CategoricalDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

/// Within each tier, sort by text id, shuffle with the seed and deal
/// round-robin, so fold sizes differ by at most one per tier.
pub fn assign_folds(pairs: &[CalibrationPair], k: usize, seed: u64) -> Result<FoldSplit, CalibrationError> {
    if k < 2 {
        return Err(CalibrationError::FoldCount(k));
    }
    let mut by_tier: BTreeMap<AgreementTier, Vec<&str>> = BTreeMap::new();
    for p in pairs {
        by_tier.entry(p.tier).or_default().push(&p.text_id);
    }
    let mut assignments = BTreeMap::new();
    for (tier, mut ids) in by_tier {
        if ids.len() < k {
            return Err(CalibrationError::InsufficientTexts { tier, found: ids.len(), k });
        }
        ids.sort_unstable();
        let mut rng = SeedHasher::new(seed, "folds").str(tier.as_str()).rng();
        ids.shuffle(&mut rng);
        for (i, id) in ids.into_iter().enumerate() {
            assignments.insert(id.to_string(), i % k);
        }
    }
    Ok(FoldSplit { k, seed, assignments })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n: usize,
    pub mean_jsd_before: f64,
    pub mean_jsd_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextOutcome {
    pub text_id: String,
    pub tier: AgreementTier,
    pub fold: usize,
    pub jsd_before: f64,
    pub jsd_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// In input order.
    pub per_text: Vec<TextOutcome>,
    pub mean_jsd_before: f64,
    pub mean_jsd_after: f64,
    /// Share of texts whose JSD strictly decreased.
    pub fraction_improved: f64,
}

impl CrossValReport {
    pub fn before(&self) -> Vec<f64> {
        self.per_text.iter().map(|t| t.jsd_before).collect()
    }

    pub fn after(&self) -> Vec<f64> {
        self.per_text.iter().map(|t| t.jsd_after).collect()
    }

    pub fn relative_change(&self) -> f64 {
        (self.mean_jsd_after - self.mean_jsd_before) / self.mean_jsd_before
    }
}

/// Fit on k − 1 folds, apply to the held-out fold, pool per-text JSDs.
pub fn crossval(
    pairs: &[CalibrationPair],
    method: Method,
    k: usize,
    seed: u64,
) -> Result<CrossValReport, CalibrationError> {
    if pairs.is_empty() {
        return Err(CalibrationError::EmptyTrain);
    }
    let split = assign_folds(pairs, k, seed)?;
    let fold_of: Vec<usize> = pairs.iter().map(|p| split.assignments[&p.text_id]).collect();
    let mut after = vec![f64::NAN; pairs.len()];
    for fold in 0..k {
        let train: Vec<(CategoricalDistribution, CategoricalDistribution)> = pairs
            .iter()
            .zip(&fold_of)
            .filter(|(_, &f)| f != fold)
            .map(|(p, _)| (p.model.clone(), p.human.clone()))
            .collect();
        let model = CalibrationModel::fit(method, &train)?;
        for (i, p) in pairs.iter().enumerate() {
            if fold_of[i] == fold {
                let calibrated = model.apply(&p.model);
                after[i] = jsd(&calibrated, &p.human).map_err(|_| CalibrationError::LengthMismatch)?;
            }
        }
    }
    let mut per_text = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        per_text.push(TextOutcome {
            text_id: p.text_id.clone(),
            tier: p.tier,
            fold: fold_of[i],
            jsd_before: jsd(&p.model, &p.human).map_err(|_| CalibrationError::LengthMismatch)?,
            jsd_after: after[i],
        });
    }
    let folds = (0..k)
        .map(|fold| {
            let members: Vec<&TextOutcome> = per_text.iter().filter(|t| t.fold == fold).collect();
            let n = members.len();
            FoldResult {
                fold,
                n,
                mean_jsd_before: members.iter().map(|t| t.jsd_before).sum::<f64>() / n as f64,
                mean_jsd_after: members.iter().map(|t| t.jsd_after).sum::<f64>() / n as f64,
            }
        })
        .collect();
    let n = per_text.len() as f64;
    let mean_jsd_before = per_text.iter().map(|t| t.jsd_before).sum::<f64>() / n;
    let mean_jsd_after = per_text.iter().map(|t| t.jsd_after).sum::<f64>() / n;
    let improved = per_text.iter().filter(|t| t.jsd_after < t.jsd_before).count();
    Ok(CrossValReport {
        method,
        k,
        seed,
        folds,
        per_text,
        mean_jsd_before,
        mean_jsd_after,
        fraction_improved: improved as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[f64]) -> CategoricalDistribution {
        CategoricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pava_examples() {
        assert_eq!(pava(&[1.0, 2.0, 2.0, 5.0], &[1.0; 4]), vec![1.0, 2.0, 2.0, 5.0]);
        assert_eq!(pava(&[3.0, 1.0], &[1.0, 1.0]), vec![2.0, 2.0]);
        assert_eq!(pava(&[1.0, 3.0, 2.0], &[1.0; 3]), vec![1.0, 2.5, 2.5]);
        // weighted: (3·1 + 1·3) / 4
        assert_eq!(pava(&[3.0, 1.0], &[1.0, 3.0]), vec![1.5, 1.5]);
        assert_eq!(pava(&[], &[]), Vec::<f64>::new());
    }

    #[test]
    fn temperature_identity_and_limit() {
        let q = d(&[0.7, 0.2, 0.1]);
        let same = apply_temperature(&q, &TemperatureModel::new(1.0).unwrap());
        for (a, b) in same.probs().iter().zip(q.probs()) {
            assert!((a - b).abs() <= 1e-8);
        }
        let flat = apply_temperature(&q, &TemperatureModel::new(1e6).unwrap());
        for p in flat.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-6);
        }
        let spread = apply_temperature(&CategoricalDistribution::point_mass(4, 2), &TemperatureModel::new(2.0).unwrap());
        assert_eq!(spread.argmax(), 2);
        assert!(spread.get(0) > 0.0);
        assert!(TemperatureModel::new(0.0).is_err());
    }

    #[test]
    fn temperature_fit_on_identical_pairs() {
        let train: Vec<_> = [[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.1, 0.1, 0.8]]
            .iter()
            .map(|v| (d(v), d(v)))
            .collect();
        let grid = TemperatureGrid::default();
        let fit = fit_temperature(&train, &grid).unwrap();
        let loss = mean_jsd_at(&train, fit.t);
        for t in grid.values() {
            assert!(loss <= mean_jsd_at(&train, t));
        }
        assert!((fit.t - 1.0).abs() < 1e-3);
    }

    #[test]
    fn temperature_fit_rejects_empty() {
        assert_eq!(
            fit_temperature(&[], &TemperatureGrid::default()),
            Err(CalibrationError::EmptyTrain)
        );
    }

    #[test]
    fn bias_fit_and_apply() {
        let zero = BiasModel { b: vec![0.0; 3] };
        let q = d(&[0.5, 0.3, 0.2]);
        assert_eq!(apply_bias(&q, &zero), q);
        let train: Vec<_> = (0..5)
            .map(|i| {
                let base = 0.1 + 0.02 * i as f64;
                (d(&[base + 0.1, 0.5 - base, 0.4]), d(&[base, 0.6 - base, 0.4]))
            })
            .collect();
        let m = fit_bias(&train).unwrap();
        assert!((m.b[0] - 0.1).abs() < 1e-12);
        assert!((m.b[1] + 0.1).abs() < 1e-12);
        // everything clips → uniform
        let clip = apply_bias(&d(&[0.5, 0.5]), &BiasModel { b: vec![0.6, 0.6] });
        assert_eq!(clip, CategoricalDistribution::uniform(2));
    }

    #[test]
    fn isotonic_identity_and_clamp() {
        let train: Vec<_> = [[0.6, 0.4], [0.3, 0.7], [0.1, 0.9]]
            .iter()
            .map(|v| (d(v), d(v)))
            .collect();
        let m = fit_isotonic(&train).unwrap();
        for (q, _) in &train {
            let out = apply_isotonic(q, &m);
            for (a, b) in out.probs().iter().zip(q.probs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let knots = m.maps[0].as_ref().unwrap();
        assert_eq!(interpolate(knots, 0.0), knots[0].y);
        assert_eq!(interpolate(knots, 0.99), knots.last().unwrap().y);
    }

    #[test]
    fn isotonic_degenerate_category_is_identity() {
        let train = vec![(d(&[0.5, 0.5]), d(&[0.2, 0.8])), (d(&[0.5, 0.5]), d(&[0.4, 0.6]))];
        let m = fit_isotonic(&train).unwrap();
        assert!(m.maps.iter().all(Option::is_none));
        let q = d(&[0.3, 0.7]);
        assert_eq!(apply_isotonic(&q, &m), q);
    }

    #[test]
    fn knots_strictly_increasing_and_monotone() {
        let xs = [0.1, 0.1, 0.2, 0.3, 0.3, 0.5, 0.7, 0.9];
        let ys = [0.4, 0.2, 0.1, 0.5, 0.3, 0.2, 0.8, 0.6];
        let knots = fit_monotone_map(&xs, &ys).unwrap();
        for w in knots.windows(2) {
            assert!(w[0].x < w[1].x);
            assert!(w[0].y <= w[1].y);
        }
    }

    #[test]
    fn stored_model_checks_fingerprint() {
        let space = LabelSpace::new(["a", "b"]).unwrap();
        let other = LabelSpace::new(["b", "a"]).unwrap();
        let stored = StoredModel::new(CalibrationModel::Bias(BiasModel { b: vec![0.1, -0.1] }), &space);
        let json = stored.to_json();
        assert!(json.contains("\"method\": \"bias\""));
        let back = StoredModel::from_json(&json).unwrap();
        assert_eq!(back, stored);
        let q = d(&[0.5, 0.5]);
        assert!(back.apply(&q, &space).is_ok());
        assert!(matches!(
            back.apply(&q, &other),
            Err(CalibrationError::Fingerprint { .. })
        ));
        let t = StoredModel::new(CalibrationModel::Temperature(TemperatureModel { t: 0.5 }), &space);
        assert!(t.to_json().contains("\"T\": 0.5"));
    }

    fn pairs(n_per_tier: usize) -> Vec<CalibrationPair> {
        let mut out = Vec::new();
        for (ti, tier) in AgreementTier::CATEGORICAL.iter().enumerate() {
            for i in 0..n_per_tier {
                let a = 0.05 + 0.9 * ((i * 7 + ti * 3) % 17) as f64 / 17.0;
                out.push(CalibrationPair {
                    text_id: format!("{ti}-{i}"),
                    tier: *tier,
                    model: d(&[a, 1.0 - a]),
                    human: d(&[0.5 * a + 0.25, 0.75 - 0.5 * a]),
                });
            }
        }
        out
    }

    #[test]
    fn folds_partition_within_tiers() {
        let ps = pairs(12);
        let split = assign_folds(&ps, 5, 3).unwrap();
        for tier in AgreementTier::CATEGORICAL {
            let mut counts = [0usize; 5];
            for p in ps.iter().filter(|p| p.tier == tier) {
                counts[split.assignments[&p.text_id]] += 1;
            }
            let (min, max) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(max - min <= 1, "{counts:?}");
        }
        assert!(matches!(
            assign_folds(&pairs(3), 5, 0),
            Err(CalibrationError::InsufficientTexts { found: 3, .. })
        ));
        assert_eq!(assign_folds(&ps, 1, 0), Err(CalibrationError::FoldCount(1)));
    }

    #[test]
    fn crossval_none_is_identity() {
        let ps = pairs(10);
        let r = crossval(&ps, Method::None, 5, 1).unwrap();
        assert_eq!(r.mean_jsd_after, r.mean_jsd_before);
        assert_eq!(r.fraction_improved, 0.0);
        assert_eq!(r.per_text.len(), ps.len());
    }

    #[test]
    fn crossval_methods_improve_linear_shrinkage() {
        let ps = pairs(20);
        for m in [Method::Temperature, Method::Bias, Method::Isotonic] {
            let r = crossval(&ps, m, 5, 1).unwrap();
            assert!(r.mean_jsd_after < r.mean_jsd_before, "{m:?}");
        }
    }
}
