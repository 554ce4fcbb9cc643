//! Library results checked against independent reference computations.

mod common;

use common::{cliffs_pairs, kw_permutation_p, mw_subset_p, pava_oracle, random_dist};
use emodist::calibrate::{
    apply_bias, apply_temperature, fit_bias, fit_monotone_map, fit_temperature, interpolate, pava,
    TemperatureGrid, TemperatureModel,
};
use emodist::metrics::{jsd, kld, rank_correlation, wasserstein01};
use emodist::special;
use emodist::stats::{self, Statistic};
use emodist::CategoricalDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn special_functions_match_statrs() {
    for i in 0..200 {
        let x = -6.0 + 12.0 * i as f64 / 199.0;
        let reference = statrs::function::erf::erfc(x);
        assert!((special::erfc(x) - reference).abs() <= 1.2e-7 * reference.max(1e-300) + 1e-15, "erfc({x})");
    }
    for &x in &[0.1, 0.5, 1.5, 3.3, 10.0, 57.2, 170.0] {
        assert!((special::ln_gamma(x) - statrs::function::gamma::ln_gamma(x)).abs() < 1e-10 * x.max(1.0));
    }
    for df in [1.0, 2.0, 3.0, 5.0, 10.0, 27.0] {
        let chi = ChiSquared::new(df).unwrap();
        let t = StudentsT::new(0.0, 1.0, df).unwrap();
        for &x in &[0.01, 0.5, 1.0, 2.5, 7.0, 15.0, 40.0] {
            assert!((special::chi_square_sf(x, df) - chi.sf(x)).abs() < 1e-10, "chi2 {x} {df}");
            let two = 2.0 * t.sf(x);
            assert!((special::student_t_two_sided(x, df) - two).abs() < 1e-10, "t {x} {df}");
        }
    }
}

#[test]
fn jsd_against_component_formula() {
    let mut r = rng(1);
    for _ in 0..200 {
        let p = random_dist(&mut r, 6);
        let q = random_dist(&mut r, 6);
        let m: Vec<f64> = p.probs().iter().zip(q.probs()).map(|(a, b)| (a + b) / 2.0).collect();
        let half_kl = |x: &[f64]| -> f64 {
            x.iter()
                .zip(&m)
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, b)| a * (a / b).log2())
                .sum::<f64>()
        };
        let expected = 0.5 * half_kl(p.probs()) + 0.5 * half_kl(q.probs());
        assert!((jsd(&p, &q).unwrap() - expected).abs() < 1e-12);
        let tv = 0.5 * p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!((wasserstein01(&p, &q).unwrap() - tv).abs() < 1e-12);
        // second argument smoothed and renormalised
        let eps = 1e-10;
        let qs: Vec<f64> = q.probs().iter().map(|x| (x + eps) / (1.0 + 6.0 * eps)).collect();
        let expected_kl: f64 = p
            .probs()
            .iter()
            .zip(&qs)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| a * (a / b).log2())
            .sum();
        assert!((kld(&p, &q, eps).unwrap() - expected_kl).abs() < 1e-9);
    }
}

#[test]
fn pava_matches_exhaustive_weighted() {
    let mut r = rng(2);
    for _ in 0..2_000 {
        let n = r.random_range(1..=8);
        let ys: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let ws: Vec<f64> = (0..n).map(|_| r.random_range(0.1..4.0)).collect();
        let got = pava(&ys, &ws);
        let want = pava_oracle(&ys, &ws);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{ys:?} {ws:?}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn four_point_isotonic_fit_matches_oracle() {
    let mut r = rng(3);
    for _ in 0..500 {
        let mut xs: Vec<f64> = (0..4).map(|_| r.random_range(0.0..1.0)).collect();
        xs.sort_by(f64::total_cmp);
        let ys: Vec<f64> = (0..4).map(|_| r.random_range(0.0..1.0)).collect();
        let knots = fit_monotone_map(&xs, &ys).unwrap();
        let want = pava_oracle(&ys, &[1.0; 4]);
        for (x, w) in xs.iter().zip(&want) {
            assert!((interpolate(&knots, *x) - w).abs() < 1e-9);
        }
    }
}

#[test]
fn temperature_recovers_squaring() {
    // p ∝ q², so the exact optimum is T = 1/2 up to the logit smoothing
    let mut r = rng(4);
    let train: Vec<(CategoricalDistribution, CategoricalDistribution)> = (0..60)
        .map(|_| {
            let w: Vec<f64> = (0..28).map(|_| r.random_range(0.01..1.0)).collect();
            let q = CategoricalDistribution::from_weights(w).unwrap();
            let p = CategoricalDistribution::from_weights(q.probs().iter().map(|x| x * x).collect()).unwrap();
            (q, p)
        })
        .collect();
    let fit = fit_temperature(&train, &TemperatureGrid::default()).unwrap();
    let loss = |t: f64| -> f64 {
        let m = TemperatureModel::new(t).unwrap();
        train.iter().map(|(q, p)| jsd(&apply_temperature(q, &m), p).unwrap()).sum::<f64>() / train.len() as f64
    };
    // dense oracle grid over [0.05, 20]
    let (mut best_t, mut best) = (0.0, f64::INFINITY);
    for i in 0..20_000 {
        let t = (0.05f64.ln() + (20f64.ln() - 0.05f64.ln()) * i as f64 / 19_999.0).exp();
        let l = loss(t);
        if l < best {
            best = l;
            best_t = t;
        }
    }
    let spacing = (20f64 / 0.05).ln() / 63.0;
    assert!((fit.t.ln() - 0.5f64.ln()).abs() < spacing, "T = {}", fit.t);
    assert!((fit.t - best_t).abs() < 1e-3, "{} vs dense {}", fit.t, best_t);
    assert!(loss(fit.t) <= best + 1e-12);
}

#[test]
fn bias_without_clipping_zeroes_mean_delta() {
    let mut r = rng(5);
    let k = 8;
    let b: Vec<f64> = (0..k).map(|i| if i % 2 == 0 { 0.02 } else { -0.02 }).collect();
    let train: Vec<(CategoricalDistribution, CategoricalDistribution)> = (0..300)
        .map(|_| {
            let w: Vec<f64> = (0..k).map(|_| r.random_range(1.0..2.0)).collect();
            let p = CategoricalDistribution::from_weights(w).unwrap();
            let q = CategoricalDistribution::new(p.probs().iter().zip(&b).map(|(x, y)| x + y).collect()).unwrap();
            (q, p)
        })
        .collect();
    let model = fit_bias(&train).unwrap();
    for (est, want) in model.b.iter().zip(&b) {
        assert!((est - want).abs() < 1e-12);
    }
    for c in 0..k {
        let corrected: f64 = train.iter().map(|(q, _)| apply_bias(q, &model).get(c)).sum::<f64>();
        let human: f64 = train.iter().map(|(_, p)| p.get(c)).sum::<f64>();
        assert!(((corrected - human) / train.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn mann_whitney_exact_matches_subset_enumeration() {
    assert_eq!(mw_subset_p(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 0.1);
    let mut r = rng(6);
    for _ in 0..200 {
        let na = r.random_range(1..=6);
        let nb = r.random_range(1..=6);
        let a: Vec<f64> = (0..na).map(|_| r.random_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..nb).map(|_| r.random_range(0..6) as f64).collect();
        let got = stats::mann_whitney_exact(&a, &b).unwrap().p_value;
        assert!((got - mw_subset_p(&a, &b)).abs() < 1e-12, "{a:?} {b:?}");
    }
}

#[test]
fn kruskal_h_matches_textbook_formula() {
    let mut r = rng(7);
    for _ in 0..100 {
        let groups: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..r.random_range(2..6)).map(|_| r.random_range(0..8) as f64).collect())
            .collect();
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
        if pooled.iter().all(|&x| x == pooled[0]) {
            continue;
        }
        let kw = stats::kruskal_wallis_dunn(&groups).unwrap();
        assert!((kw.test.statistic - common::kw_h(&pooled, &sizes)).abs() < 1e-9);
    }
}

#[test]
fn kruskal_clear_separation_vs_permutation() {
    let groups = vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0], vec![9.0, 10.0, 11.0, 12.0]];
    let exact = kw_permutation_p(&groups);
    assert!((exact - 6.0 / 34_650.0).abs() < 1e-15);
    let p = stats::kruskal_wallis_dunn(&groups).unwrap().test.p_value;
    assert!((p - exact).abs() < 0.02);
}

#[test]
fn cliffs_delta_matches_pair_counting() {
    let mut r = rng(8);
    for _ in 0..100 {
        let a: Vec<f64> = (0..r.random_range(1..15)).map(|_| r.random_range(0..10) as f64).collect();
        let b: Vec<f64> = (0..r.random_range(1..15)).map(|_| r.random_range(0..10) as f64).collect();
        assert!((stats::cliffs_delta(&a, &b) - cliffs_pairs(&a, &b)).abs() < 1e-15);
    }
}

#[test]
fn cohens_d_direct() {
    let a = [2.0, 4.0, 4.0, 5.0];
    let b = [1.0, 2.0, 3.0];
    // means 3.75 and 2; sample variances 1.5833 and 1
    let pooled = ((3.0 * (19.0 / 12.0) + 2.0 * 1.0) / 5.0f64).sqrt();
    let d = stats::effect_sizes(&a, &b).unwrap().cohens_d.unwrap();
    assert!((d - 1.75 / pooled).abs() < 1e-12);
}

/// Spearman ρ permutation p by brute force over every ordering.
fn spearman_brute(xs: &[f64], ys: &[f64]) -> f64 {
    fn perms(items: &mut Vec<f64>, k: usize, out: &mut Vec<Vec<f64>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            perms(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let observed = rank_correlation(xs, ys).unwrap().rho.abs();
    let mut all = Vec::new();
    perms(&mut ys.to_vec(), 0, &mut all);
    let hits = all
        .iter()
        .filter(|p| match rank_correlation(xs, p) {
            Ok(c) => c.rho.abs() >= observed - 1e-9,
            Err(_) => false,
        })
        .count();
    hits as f64 / all.len() as f64
}

#[test]
fn spearman_exact_p_matches_brute_force() {
    let mut r = rng(9);
    for _ in 0..30 {
        let n = r.random_range(4..=7);
        let xs: Vec<f64> = (0..n).map(|_| r.random_range(0..5) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| r.random_range(0..5) as f64).collect();
        let Ok(c) = rank_correlation(&xs, &ys) else { continue };
        assert!((c.p_value - spearman_brute(&xs, &ys)).abs() < 1e-12, "{xs:?} {ys:?}");
    }
}

#[test]
fn wilcoxon_statistic_direct() {
    let before = [0.50, 0.40, 0.62, 0.33, 0.41, 0.70, 0.55];
    let after = [0.45, 0.41, 0.50, 0.30, 0.41, 0.52, 0.56];
    // non-zero diffs: -.05 +.01 -.12 -.03 -.18 +.01 → |d| ranks 4, 1.5, 5, 3, 6, 1.5
    let res = stats::wilcoxon_signed_rank(&before, &after).unwrap();
    assert!((res.statistic - 3.0).abs() < 1e-12);
    assert_eq!(res.n, vec![6]);
}

#[test]
fn bootstrap_mean_matches_manual_resampling() {
    let xs: Vec<f64> = (0..30).map(|i| (i as f64).sqrt()).collect();
    let ci = stats::bootstrap_ci(&xs, &Statistic::Mean, 400, 0.9, 11).unwrap();
    assert!((ci.point - common::mean(&xs)).abs() < 1e-12);
    let manual = stats::bootstrap_indices_ci(
        xs.len(),
        |idx| Some(idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64),
        400,
        0.9,
        11,
    )
    .unwrap();
    assert!((ci.lower - manual.lower).abs() < 1e-12 && (ci.upper - manual.upper).abs() < 1e-12);
}
