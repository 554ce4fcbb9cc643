//! Nonparametric tests, effect sizes and bootstrap confidence intervals.
//!
//! All tests are two-sided. Normal-approximation p-values below [`P_FLOOR`]
//! are reported as the floor with [`TestResult::p_floored`] set, since the
//! tail approximations lose meaning far below that.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::SeedHasher;
use crate::special::{chi_square_sf, normal_two_sided};

pub const P_FLOOR: f64 = 1e-300;

/// Largest per-side size for which Mann–Whitney uses exact enumeration.
pub const MANN_WHITNEY_EXACT_MAX: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {required} values, got {found}")]
    TooFew { required: usize, found: usize },
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two groups")]
    TooFewGroups,
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("confidence level must be in (0, 1), got {0}")]
    Level(f64),
    #[error("bootstrap needs at least one iteration")]
    NoIterations,
    #[error("statistic undefined on the full sample")]
    UndefinedStatistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub effect_size: Option<f64>,
    /// Sample size of each group (or the number of non-zero pairs).
    pub n: Vec<usize>,
    #[serde(default)]
    pub p_floored: bool,
}

impl TestResult {
    fn new(statistic: f64, p: f64, effect_size: Option<f64>, n: Vec<usize>) -> Self {
        let p = if p.is_nan() { 1.0 } else { p.clamp(0.0, 1.0) };
        let p_floored = p < P_FLOOR;
        Self {
            statistic,
            p_value: p.max(P_FLOOR),
            effect_size,
            n,
            p_floored,
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the n − 1 denominator; 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Average (mid) ranks starting at 1, plus the size of every tie group.
pub fn average_ranks(xs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum()
}

/// Reducers accepted by [`bootstrap_ci`].
pub enum Statistic<'a> {
    Mean,
    Median,
    Custom(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

impl Statistic<'_> {
    fn apply(&self, xs: &[f64]) -> f64 {
        match self {
            Statistic::Mean => mean(xs),
            Statistic::Median => median(xs),
            Statistic::Custom(f) => f(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCI {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub level: f64,
    pub seed: u64,
}

pub const DEFAULT_BOOTSTRAP_ITERATIONS: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Percentile bootstrap CI of `statistic` over `values`.
pub fn bootstrap_ci(
    values: &[f64],
    statistic: &Statistic<'_>,
    iterations: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapCI, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFew { required: 2, found: values.len() });
    }
    let mut buf = vec![0.0; values.len()];
    bootstrap_indices_ci(
        values.len(),
        |idx| {
            for (b, &i) in buf.iter_mut().zip(idx) {
                *b = values[i];
            }
            Some(statistic.apply(&buf))
        },
        iterations,
        level,
        seed,
    )
}

/// Percentile bootstrap over resampled index vectors, for paired or
/// multi-column statistics. The statistic may return `None` on degenerate
/// resamples; those are skipped and excluded from `iterations`.
///
/// Iteration `i` draws from an RNG seeded by `(seed, i)`, so results do not
/// depend on evaluation order.
pub fn bootstrap_indices_ci<F>(
    n: usize,
    mut statistic: F,
    iterations: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapCI, StatsError>
where
    F: FnMut(&[usize]) -> Option<f64>,
{
    use rand::Rng;

    if n < 2 {
        return Err(StatsError::TooFew { required: 2, found: n });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Level(level));
    }
    if iterations == 0 {
        return Err(StatsError::NoIterations);
    }
    let full: Vec<usize> = (0..n).collect();
    let point = statistic(&full).ok_or(StatsError::UndefinedStatistic)?;
    let mut idx = vec![0usize; n];
    let mut stats = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let mut rng = SeedHasher::new(seed, "bootstrap").u64(it as u64).rng();
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        if let Some(s) = statistic(&idx) {
            if s.is_finite() {
                stats.push(s);
            }
        }
    }
    if stats.is_empty() {
        return Err(StatsError::UndefinedStatistic);
    }
    stats.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let lower = quantile_sorted(&stats, alpha / 2.0).min(point);
    let upper = quantile_sorted(&stats, 1.0 - alpha / 2.0).max(point);
    Ok(BootstrapCI {
        point,
        lower,
        upper,
        iterations: stats.len(),
        level,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub test: TestResult,
    /// Dunn z statistics, `z[i][j]` for the mean-rank difference of i minus j.
    pub pairwise_z: Vec<Vec<f64>>,
    /// Bonferroni-adjusted two-sided Dunn p-values; diagonal is 1.
    pub pairwise_p: Vec<Vec<f64>>,
}

/// Kruskal–Wallis H with tie correction and Dunn's post-hoc z-tests
/// (Bonferroni-adjusted).
pub fn kruskal_wallis_dunn(groups: &[Vec<f64>]) -> Result<KruskalWallis, StatsError> {
    let g = groups.len();
    if g < 2 {
        return Err(StatsError::TooFewGroups);
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(StatsError::EmptyGroup(i));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n_total = pooled.len();
    if n_total < 5 {
        return Err(StatsError::TooFew { required: 5, found: n_total });
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let nf = n_total as f64;
    let (ranks, ties) = average_ranks(&pooled);
    let correction = 1.0 - tie_sum(&ties) / (nf.powi(3) - nf);
    let mut mean_ranks = Vec::with_capacity(g);
    let mut offset = 0;
    for &n in &sizes {
        mean_ranks.push(ranks[offset..offset + n].iter().sum::<f64>() / n as f64);
        offset += n;
    }
    let identity = vec![vec![1.0; g]; g];
    if correction <= 0.0 {
        // every value identical
        return Ok(KruskalWallis {
            test: TestResult::new(0.0, 1.0, None, sizes),
            pairwise_z: vec![vec![0.0; g]; g],
            pairwise_p: identity,
        });
    }
    let center = (nf + 1.0) / 2.0;
    let h_raw = 12.0 / (nf * (nf + 1.0))
        * sizes
            .iter()
            .zip(&mean_ranks)
            .map(|(&n, &r)| n as f64 * (r - center).powi(2))
            .sum::<f64>();
    let h = h_raw / correction;
    let p = chi_square_sf(h, (g - 1) as f64);

    let pairs = (g * (g - 1) / 2) as f64;
    let variance_unit = nf * (nf + 1.0) / 12.0 - tie_sum(&ties) / (12.0 * (nf - 1.0));
    let mut pairwise_z = vec![vec![0.0; g]; g];
    let mut pairwise_p = identity;
    for i in 0..g {
        for j in 0..g {
            if i == j {
                continue;
            }
            let se = (variance_unit * (1.0 / sizes[i] as f64 + 1.0 / sizes[j] as f64)).sqrt();
            let z = (mean_ranks[i] - mean_ranks[j]) / se;
            pairwise_z[i][j] = z;
            pairwise_p[i][j] = bonferroni(normal_two_sided(z), pairs);
        }
    }
    Ok(KruskalWallis {
        test: TestResult::new(h, p, None, sizes),
        pairwise_z,
        pairwise_p,
    })
}

pub fn bonferroni(p: f64, comparisons: f64) -> f64 {
    (p * comparisons).min(1.0)
}

/// Mann–Whitney U for `a` versus `b`. The statistic is U of `a`, the count of
/// pairs with `a_i > b_j` plus half the ties. Exact enumeration is used when
/// both sides have at most [`MANN_WHITNEY_EXACT_MAX`] values.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() <= MANN_WHITNEY_EXACT_MAX && b.len() <= MANN_WHITNEY_EXACT_MAX {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

fn u_statistic(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>, Vec<usize>), StatsError> {
    if a.is_empty() {
        return Err(StatsError::TooFew { required: 1, found: 0 });
    }
    if b.is_empty() {
        return Err(StatsError::TooFew { required: 1, found: 0 });
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = average_ranks(&pooled);
    let na = a.len() as f64;
    let rank_sum: f64 = ranks[..a.len()].iter().sum();
    Ok((rank_sum - na * (na + 1.0) / 2.0, ranks, ties))
}

/// Permutation p-value over every split of the pooled mid-ranks.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let (u, ranks, _) = u_statistic(a, b)?;
    let na = a.len();
    let n = ranks.len();
    let center = (na * b.len()) as f64 / 2.0;
    let observed = (u - center).abs();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let mut extreme = 0u64;
    let mut total = 0u64;
    for_each_combination(n, na, |combo| {
        let r: f64 = combo.iter().map(|&i| ranks[i]).sum();
        if (r - offset - center).abs() >= observed - 1e-9 {
            extreme += 1;
        }
        total += 1;
    });
    Ok(TestResult::new(
        u,
        extreme as f64 / total as f64,
        None,
        vec![a.len(), b.len()],
    ))
}

/// Normal approximation with tie-corrected variance and continuity correction.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let (u, _, ties) = u_statistic(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let center = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - tie_sum(&ties) / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let dev = ((u - center).abs() - 0.5).max(0.0);
        normal_two_sided(dev / var.sqrt())
    };
    Ok(TestResult::new(u, p, None, vec![a.len(), b.len()]))
}

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut combo: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        f(&combo);
        // advance to next lexicographic combination
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if combo[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// Wilcoxon signed-rank test on `after − before`.
///
/// Zero differences are dropped. The statistic is W⁺, the rank sum of
/// positive differences; the p-value uses the tie-corrected normal
/// approximation and the effect size is `r = |Z| / √N` over the N non-zero
/// pairs.
pub fn wilcoxon_signed_rank(before: &[f64], after: &[f64]) -> Result<TestResult, StatsError> {
    if before.len() != after.len() {
        return Err(StatsError::LengthMismatch(before.len(), after.len()));
    }
    let diffs: Vec<f64> = before
        .iter()
        .zip(after)
        .map(|(b, a)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(TestResult::new(0.0, 1.0, Some(0.0), vec![0]));
    }
    if diffs.len() < 5 {
        return Err(StatsError::TooFew { required: 5, found: diffs.len() });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let n = diffs.len() as f64;
    let center = n * (n + 1.0) / 4.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_sum(&ties) / 48.0;
    let z = (w_plus - center) / var.sqrt();
    let r = z.abs() / n.sqrt();
    Ok(TestResult::new(
        w_plus,
        normal_two_sided(z),
        Some(r),
        vec![diffs.len()],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizes {
    /// `None` when the pooled SD is zero.
    pub cohens_d: Option<f64>,
    pub cliffs_delta: f64,
}

/// Cohen's d with n − 1 pooling and Cliff's δ by exact pair counting.
pub fn effect_sizes(a: &[f64], b: &[f64]) -> Result<EffectSizes, StatsError> {
    for side in [a, b] {
        if side.len() < 2 {
            return Err(StatsError::TooFew { required: 2, found: side.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (sample_sd(a), sample_sd(b));
    let pooled = (((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / (na + nb - 2.0)).sqrt();
    let diff = mean(a) - mean(b);
    let cohens_d = if pooled > 0.0 {
        Some(diff / pooled)
    } else if diff == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Ok(EffectSizes {
        cohens_d,
        cliffs_delta: cliffs_delta(a, b),
    })
}

/// `(#{a_i > b_j} − #{a_i < b_j}) / (|a| |b|)`.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> f64 {
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut balance: i64 = 0;
    for &x in a {
        let below = sorted.partition_point(|&y| y < x) as i64;
        let not_above = sorted.partition_point(|&y| y <= x) as i64;
        let above = sorted.len() as i64 - not_above;
        balance += below - above;
    }
    balance as f64 / (a.len() * b.len()) as f64
}
