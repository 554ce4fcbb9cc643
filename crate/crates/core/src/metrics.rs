//! Divergences, rank correlation, per-category profiles, tier breakdowns and
//! VAD evaluation.
//!
//! The Wasserstein distance here uses the 0–1 ground cost between unordered
//! categories (moving mass between any two distinct categories costs 1). Under
//! that cost W1 equals total variation, `½ Σ |p_k − q_k|`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AgreementTier, Vad};
use crate::dist::CategoricalDistribution;
use crate::special::student_t_two_sided;
use crate::stats::{average_ranks, mean, sample_sd};

pub const DEFAULT_KLD_EPSILON: f64 = 1e-10;

/// Spearman p-values are exact (full permutation) up to this many points.
pub const SPEARMAN_EXACT_MAX: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {required} observations, got {found}")]
    TooFew { required: usize, found: usize },
    #[error("correlation undefined: input is constant")]
    Constant,
    #[error("epsilon must be positive")]
    Epsilon,
}

fn same_len(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<(), MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::LengthMismatch(p.len(), q.len()));
    }
    Ok(())
}

/// Jensen–Shannon divergence in bits, in `[0, 1]`.
pub fn jsd(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64, MetricsError> {
    same_len(p, q)?;
    let total: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            let term = |x: f64| if x > 0.0 { x * (x / m).log2() } else { 0.0 };
            term(a) + term(b)
        })
        .sum();
    Ok((0.5 * total).clamp(0.0, 1.0))
}

/// `KL(p ‖ q')` in bits where `q' = (q + ε) / Σ(q + ε)`.
pub fn kld(
    p: &CategoricalDistribution,
    q: &CategoricalDistribution,
    epsilon: f64,
) -> Result<f64, MetricsError> {
    same_len(p, q)?;
    if !(epsilon > 0.0) {
        return Err(MetricsError::Epsilon);
    }
    let z: f64 = q.probs().iter().map(|&x| x + epsilon).sum();
    let total: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / ((b + epsilon) / z)).log2())
        .sum();
    Ok(total.max(0.0))
}

/// W1 under the 0–1 ground metric, i.e. total variation distance.
pub fn wasserstein01(
    p: &CategoricalDistribution,
    q: &CategoricalDistribution,
) -> Result<f64, MetricsError> {
    same_len(p, q)?;
    let l1: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

/// Pearson correlation, `None` when either side is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricsError::TooFew { required: 2, found: xs.len() });
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Spearman's ρ with mid-ranks for ties.
///
/// The two-sided p-value comes from full permutation enumeration for
/// `n ≤ SPEARMAN_EXACT_MAX` and from the Student-t approximation with
/// `n − 2` degrees of freedom above that.
pub fn rank_correlation(xs: &[f64], ys: &[f64]) -> Result<Correlation, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(MetricsError::TooFew { required: 3, found: n });
    }
    let (rx, _) = average_ranks(xs);
    let (ry, _) = average_ranks(ys);
    let rho = pearson(&rx, &ry)?.ok_or(MetricsError::Constant)?;
    let p_value = if n <= SPEARMAN_EXACT_MAX {
        spearman_exact_p(&rx, &ry)
    } else if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        student_t_two_sided(rho * (df / (1.0 - rho * rho)).sqrt(), df)
    };
    Ok(Correlation { rho, p_value, n })
}

/// Fraction of permutations of `ry` whose |Σ(rx − r̄)(ry_π − r̄)| is at least
/// the observed one. Walks permutations with Heap's algorithm, updating the
/// cross-product sum in O(1) per swap.
fn spearman_exact_p(rx: &[f64], ry: &[f64]) -> f64 {
    let n = rx.len();
    let mx = mean(rx);
    let cx: Vec<f64> = rx.iter().map(|x| x - mx).collect();
    let mut y = ry.to_vec();
    let mut s: f64 = cx.iter().zip(&y).map(|(a, b)| a * b).sum();
    let observed = s.abs() - 1e-9;
    let mut extreme = u64::from(s.abs() >= observed);
    let mut total = 1u64;
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            s += (cx[j] - cx[i]) * (y[i] - y[j]);
            y.swap(i, j);
            if s.abs() >= observed {
                extreme += 1;
            }
            total += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    extreme as f64 / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProfile {
    /// Mean model rate minus mean human rate.
    pub delta: f64,
    /// Spearman correlation of per-text rates; `None` when either side is constant.
    pub rho: Option<Correlation>,
    /// Number of texts whose human rate is positive.
    pub n_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCategoryProfile {
    pub categories: Vec<CategoryProfile>,
}

impl PerCategoryProfile {
    pub fn mean_abs_delta(&self) -> f64 {
        mean(&self.categories.iter().map(|c| c.delta.abs()).collect::<Vec<_>>())
    }

    /// Mean of the defined per-category ρ values.
    pub fn mean_rho(&self) -> Option<f64> {
        let defined: Vec<f64> = self
            .categories
            .iter()
            .filter_map(|c| c.rho.map(|r| r.rho))
            .collect();
        (!defined.is_empty()).then(|| mean(&defined))
    }
}

pub fn per_category_profile(
    human: &[CategoricalDistribution],
    model: &[CategoricalDistribution],
) -> Result<PerCategoryProfile, MetricsError> {
    if human.len() != model.len() {
        return Err(MetricsError::LengthMismatch(human.len(), model.len()));
    }
    if human.is_empty() {
        return Err(MetricsError::TooFew { required: 1, found: 0 });
    }
    let k = human[0].len();
    for (h, m) in human.iter().zip(model) {
        if h.len() != k {
            return Err(MetricsError::LengthMismatch(k, h.len()));
        }
        same_len(h, m)?;
    }
    let categories = (0..k)
        .map(|c| {
            let hs: Vec<f64> = human.iter().map(|d| d.get(c)).collect();
            let ms: Vec<f64> = model.iter().map(|d| d.get(c)).collect();
            let rho = match rank_correlation(&hs, &ms) {
                Ok(r) => Some(r),
                Err(MetricsError::Constant | MetricsError::TooFew { .. }) => None,
                Err(e) => unreachable!("lengths already checked: {e}"),
            };
            CategoryProfile {
                delta: mean(&ms) - mean(&hs),
                rho,
                n_positive: hs.iter().filter(|&&x| x > 0.0).count(),
            }
        })
        .collect();
    Ok(PerCategoryProfile { categories })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// False for single-element tiers, whose SD is reported as 0.
    pub sd_defined: bool,
}

impl TierStats {
    pub const EMPTY: TierStats = TierStats { n: 0, mean: 0.0, sd: 0.0, sd_defined: false };
}

/// Per-tier mean, sample SD and count. Tiers with no values are absent from
/// the map; [`tier_stats`] returns [`TierStats::EMPTY`] for them.
pub fn tier_breakdown(
    values: &[f64],
    tiers: &[AgreementTier],
) -> Result<BTreeMap<AgreementTier, TierStats>, MetricsError> {
    if values.len() != tiers.len() {
        return Err(MetricsError::LengthMismatch(values.len(), tiers.len()));
    }
    let mut grouped: BTreeMap<AgreementTier, Vec<f64>> = BTreeMap::new();
    for (&v, &t) in values.iter().zip(tiers) {
        grouped.entry(t).or_default().push(v);
    }
    Ok(grouped
        .into_iter()
        .map(|(t, vs)| {
            let stats = TierStats {
                n: vs.len(),
                mean: mean(&vs),
                sd: sample_sd(&vs),
                sd_defined: vs.len() > 1,
            };
            (t, stats)
        })
        .collect())
}

pub fn tier_stats(breakdown: &BTreeMap<AgreementTier, TierStats>, tier: AgreementTier) -> TierStats {
    breakdown.get(&tier).copied().unwrap_or(TierStats::EMPTY)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionEvaluation {
    pub mae: f64,
    pub pearson_r: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub model_sd: f64,
    pub human_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadEvaluation {
    pub v: DimensionEvaluation,
    pub a: DimensionEvaluation,
    pub d: DimensionEvaluation,
}

impl VadEvaluation {
    pub fn dims(&self) -> [(&'static str, &DimensionEvaluation); 3] {
        [("V", &self.v), ("A", &self.a), ("D", &self.d)]
    }

    pub fn overall_mae(&self) -> f64 {
        (self.v.mae + self.a.mae + self.d.mae) / 3.0
    }
}

/// Compare per-text mean VAD ratings of humans and a model.
pub fn vad_evaluate(human: &[Vad], model: &[Vad]) -> Result<VadEvaluation, MetricsError> {
    if human.len() != model.len() {
        return Err(MetricsError::LengthMismatch(human.len(), model.len()));
    }
    if human.len() < 3 {
        return Err(MetricsError::TooFew { required: 3, found: human.len() });
    }
    let dim = |k: usize| -> Result<DimensionEvaluation, MetricsError> {
        let hs: Vec<f64> = human.iter().map(|v| v.dims()[k]).collect();
        let ms: Vec<f64> = model.iter().map(|v| v.dims()[k]).collect();
        let mae = mean(&hs.iter().zip(&ms).map(|(h, m)| (h - m).abs()).collect::<Vec<_>>());
        let spearman_rho = match rank_correlation(&hs, &ms) {
            Ok(c) => Some(c.rho),
            Err(MetricsError::Constant) => None,
            Err(e) => return Err(e),
        };
        Ok(DimensionEvaluation {
            mae,
            pearson_r: pearson(&hs, &ms)?,
            spearman_rho,
            model_sd: sample_sd(&ms),
            human_sd: sample_sd(&hs),
        })
    };
    Ok(VadEvaluation { v: dim(0)?, a: dim(1)?, d: dim(2)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[f64]) -> CategoricalDistribution {
        CategoricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn jsd_reference_cases() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[1.0, 0.0]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        assert_eq!(jsd(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap(), 1.0);
        // hand evaluation: m = [0.75, 0.25]
        // ½[0.5 log2(0.5/0.75) + 0.5 log2(0.5/0.25)] + ½[1 · log2(1/0.75)]
        let hand = 0.5 * (0.5 * (0.5f64 / 0.75).log2() + 0.5 * 2f64.log2()) + 0.5 * (1.0f64 / 0.75).log2();
        let v = jsd(&p, &q).unwrap();
        assert!((v - hand).abs() < 1e-15);
        assert!((v - 0.3113).abs() < 1e-4);
        assert!(jsd(&p, &d(&[1.0])).is_err());
    }

    #[test]
    fn kld_cases() {
        let p = d(&[0.9, 0.1]);
        let q = d(&[0.5, 0.5]);
        assert!(kld(&p, &p, 1e-10).unwrap() <= 1e-6);
        let pq = kld(&p, &q, 1e-10).unwrap();
        let qp = kld(&q, &p, 1e-10).unwrap();
        let direct_pq = 0.9 * (0.9f64 / 0.5).log2() + 0.1 * (0.1f64 / 0.5).log2();
        let direct_qp = 0.5 * (0.5f64 / 0.9).log2() + 0.5 * (0.5f64 / 0.1).log2();
        assert!((pq - direct_pq).abs() < 1e-8);
        assert!((qp - direct_qp).abs() < 1e-8);
        assert!((pq - qp).abs() > 0.1);
        assert_eq!(kld(&p, &q, 0.0), Err(MetricsError::Epsilon));
    }

    #[test]
    fn kld_point_mass_against_zero_entry() {
        let eps = 1e-10;
        let p = CategoricalDistribution::point_mass(28, 0);
        let q = CategoricalDistribution::point_mass(28, 1);
        let value = kld(&p, &q, eps).unwrap();
        // q'_0 = ε / (1 + 28ε)
        let direct = ((1.0 + 28.0 * eps) / eps).log2();
        assert!((value - direct).abs() < 1e-9);
        assert!(value.is_finite() && value > 30.0);
    }

    #[test]
    fn wasserstein_cases() {
        let p = d(&[0.5, 0.5]);
        assert_eq!(wasserstein01(&p, &p).unwrap(), 0.0);
        assert_eq!(wasserstein01(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(wasserstein01(&p, &d(&[1.0, 0.0])).unwrap(), 0.5);
    }

    #[test]
    fn spearman_monotone_and_ties() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = rank_correlation(&xs, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap();
        assert!((up.rho - 1.0).abs() < 1e-12);
        let down = rank_correlation(&xs, &[5.0, 3.0, 1.0, 0.0, -9.0]).unwrap();
        assert!((down.rho + 1.0).abs() < 1e-12);
        // explicit rank table: rx = [1, 2.5, 2.5, 4], ry = [1, 3, 2, 4]
        // centered rx = [-1.5, 0, 0, 1.5], ry = [-1.5, 0.5, -0.5, 1.5]
        // Σxy = 4.5, Σxx = 4.5, Σyy = 5 → ρ = 4.5 / sqrt(22.5)
        let tied = rank_correlation(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((tied.rho - 4.5 / 22.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            rank_correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MetricsError::Constant)
        );
    }

    #[test]
    fn spearman_exact_p_small() {
        // perfect order over 4 points: 2 of 24 permutations reach |ρ| = 1
        let c = rank_correlation(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((c.p_value - 2.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_t_approximation_large_n() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 0.7).sin() + x * 0.05).collect();
        let c = rank_correlation(&xs, &ys).unwrap();
        let df = 48.0;
        let t = c.rho * (df / (1.0 - c.rho * c.rho)).sqrt();
        assert!((c.p_value - student_t_two_sided(t, df)).abs() < 1e-15);
    }

    #[test]
    fn profile_identity_and_sign() {
        let human: Vec<_> = (0..10)
            .map(|i| {
                let a = 0.1 + 0.05 * i as f64;
                d(&[a, 0.6 - a * 0.5, 0.4 - a * 0.5])
            })
            .collect();
        let same = per_category_profile(&human, &human).unwrap();
        for c in &same.categories {
            assert!(c.delta.abs() < 1e-15);
            assert!((c.rho.unwrap().rho - 1.0).abs() < 1e-12);
        }
        let shifted: Vec<_> = human
            .iter()
            .map(|h| d(&[h.get(0) + 0.1, h.get(1) - 0.1, h.get(2)]))
            .collect();
        let prof = per_category_profile(&human, &shifted).unwrap();
        assert!((prof.categories[0].delta - 0.1).abs() < 1e-12);
        assert!(prof.categories[1].delta < 0.0);
        let sum: f64 = prof.categories.iter().map(|c| c.delta).sum();
        assert!(sum.abs() < 1e-9);
        assert!(per_category_profile(&[], &[]).is_err());
    }

    #[test]
    fn profile_flags_constant_category() {
        let human = vec![d(&[1.0, 0.0]), d(&[0.5, 0.5]), d(&[0.2, 0.8])];
        let model = vec![d(&[0.5, 0.5]); 3];
        let prof = per_category_profile(&human, &model).unwrap();
        assert!(prof.categories.iter().all(|c| c.rho.is_none()));
        assert_eq!(prof.categories[1].n_positive, 2);
    }

    #[test]
    fn tier_breakdown_cases() {
        use AgreementTier::*;
        let b = tier_breakdown(&[0.4; 4], &[FullAgreement, Partial, Partial, FullDisagreement]).unwrap();
        assert_eq!(b[&Partial], TierStats { n: 2, mean: 0.4, sd: 0.0, sd_defined: true });
        assert!(!b[&FullAgreement].sd_defined);
        assert_eq!(tier_stats(&b, High), TierStats::EMPTY);
    }

    #[test]
    fn vad_cases() {
        let human = vec![Vad::new(2.0, 3.0, 3.5), Vad::new(4.0, 2.0, 3.0), Vad::new(3.0, 4.0, 2.0)];
        let same = vad_evaluate(&human, &human).unwrap();
        for (_, e) in same.dims() {
            assert_eq!(e.mae, 0.0);
            assert!((e.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        }
        let mid = vec![Vad::new(3.0, 3.0, 3.0); 3];
        let e = vad_evaluate(&human, &mid).unwrap();
        assert_eq!(e.v.model_sd, 0.0);
        assert_eq!(e.v.pearson_r, None);
        assert_eq!(e.v.spearman_rho, None);
        // V column: h = [2, 4, 3], m = [3, 3, 3] → MAE (1 + 1 + 0) / 3
        assert!((e.v.mae - 2.0 / 3.0).abs() < 1e-15);
        // h = [2, 4, 2, 4], m = all 3 → MAE 1
        let h2: Vec<Vad> = [2.0, 4.0, 2.0, 4.0].iter().map(|&v| Vad::new(v, 3.0, 3.0)).collect();
        let m2 = vec![Vad::new(3.0, 3.0, 3.0); 4];
        assert_eq!(vad_evaluate(&h2, &m2).unwrap().v.mae, 1.0);
    }
}
