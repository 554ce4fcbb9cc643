use std::collections::{BTreeMap, BTreeSet};

use emodist::calibrate::{
    apply_bias, apply_isotonic, apply_temperature, assign_folds, crossval, fit_isotonic, fit_monotone_map,
    isotonic_rates, pava, BiasModel, CalibrationPair, Method, TemperatureModel,
};
use emodist::corpus::{
    classify_agreement_categorical, stratified_sample, Annotations, CategoricalAnnotations,
};
use emodist::dist::{entropy, human_distribution, llm_distribution};
use emodist::metrics::{jsd, per_category_profile, rank_correlation, wasserstein01};
use emodist::sampler::store::{read_store, write_store, StoreRecord, StoredParsed};
use emodist::sampler::{parse_bytes, ParsedResponse, Task};
use emodist::stats::{self, Statistic};
use emodist::transparency::{embedding_similarity, transparency_table, EmbeddingKind, EmbeddingTable, RawScore};
use emodist::{AgreementTier, CategoricalDistribution, LabelSpace, SampleSelection, TextRecord, Vad};
use proptest::prelude::*;

fn dist(k: usize) -> impl Strategy<Value = CategoricalDistribution> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0..1.0f64], k).prop_filter_map("all zero", |w| {
        CategoricalDistribution::from_weights(w).ok()
    })
}

fn dist_pair(k: usize) -> impl Strategy<Value = (CategoricalDistribution, CategoricalDistribution)> {
    (dist(k), dist(k))
}

proptest! {
    #[test]
    fn jsd_symmetric_bounded((p, q) in dist_pair(28)) {
        let a = jsd(&p, &q).unwrap();
        prop_assert_eq!(a, jsd(&q, &p).unwrap());
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&a));
        prop_assert!(jsd(&p, &p).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn sqrt_jsd_and_w1_triangle(p in dist(10), q in dist(10), r in dist(10)) {
        let d = |a: &CategoricalDistribution, b: &CategoricalDistribution| jsd(a, b).unwrap().max(0.0).sqrt();
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-9);
        let w = |a: &CategoricalDistribution, b: &CategoricalDistribution| wasserstein01(a, b).unwrap();
        prop_assert_eq!(w(&p, &q), w(&q, &p));
        prop_assert!(w(&p, &r) <= w(&p, &q) + w(&q, &r) + 1e-12);
    }

    #[test]
    fn entropy_below_uniform(p in dist(28)) {
        prop_assert!(entropy(&p) <= 28f64.log2() + 1e-12);
        prop_assert!(entropy(&p) >= 0.0);
    }

    #[test]
    fn spearman_monotone_invariance(xs in prop::collection::vec(-10.0..10.0f64, 3..30), seed in any::<u64>()) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| (x * 0.3 + ((i as u64 ^ seed) % 7) as f64).sin()).collect();
        let base = rank_correlation(&xs, &ys);
        let tx: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
        let ty: Vec<f64> = ys.iter().map(|y| y.exp()).collect();
        match (base, rank_correlation(&tx, &ty)) {
            (Ok(a), Ok(b)) => prop_assert!((a.rho - b.rho).abs() < 1e-12),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "definedness changed"),
        }
    }

    #[test]
    fn profile_deltas_sum_to_zero(pairs in prop::collection::vec(dist_pair(6), 3..20)) {
        let (h, m): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let prof = per_category_profile(&h, &m).unwrap();
        let total: f64 = prof.categories.iter().map(|c| c.delta).sum();
        prop_assert!(total.abs() <= 1e-9);
    }

    #[test]
    fn pava_properties(ys in prop::collection::vec(-5.0..5.0f64, 1..40), seed in any::<u64>()) {
        let ws: Vec<f64> = (0..ys.len()).map(|i| 0.5 + ((seed >> (i % 60)) & 3) as f64).collect();
        let fit = pava(&ys, &ws);
        prop_assert!(fit.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let mass = |v: &[f64]| v.iter().zip(&ws).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((mass(&fit) - mass(&ys)).abs() < 1e-9);
        let sorted = ys.windows(2).all(|w| w[0] <= w[1]);
        prop_assert_eq!(sorted, fit == ys);
        prop_assert!(pava(&fit, &ws).iter().zip(&fit).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn temperature_keeps_argmax(q in dist(28), log_t in -3.0..3.0f64) {
        let out = apply_temperature(&q, &TemperatureModel::new(log_t.exp()).unwrap());
        let top = q.probs()[q.argmax()];
        // ties at the top may resolve to any of the tied entries
        prop_assert_eq!(q.probs()[out.argmax()], top);
        prop_assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bias_always_valid(q in dist(8), b in prop::collection::vec(-1.0..1.0f64, 8)) {
        let out = apply_bias(&q, &BiasModel { b });
        prop_assert!(out.probs().iter().all(|&x| x >= 0.0));
        prop_assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn isotonic_valid_and_monotone(train in prop::collection::vec(dist_pair(5), 2..30), q in dist(5)) {
        let model = fit_isotonic(&train).unwrap();
        for knots in model.maps.iter().flatten() {
            prop_assert!(knots.windows(2).all(|w| w[0].x < w[1].x && w[0].y <= w[1].y));
            prop_assert!(knots.iter().all(|k| (0.0..=1.0).contains(&k.x) && (0.0..=1.0).contains(&k.y)));
        }
        let out = apply_isotonic(&q, &model);
        prop_assert!(out.probs().iter().all(|&x| x >= 0.0));
        prop_assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn isotonic_map_not_worse_on_train(xs in prop::collection::vec(0.0..1.0f64, 2..40), seed in any::<u64>()) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| (x + (((seed >> (i % 60)) & 7) as f64 - 3.5) / 20.0).clamp(0.0, 1.0)).collect();
        if let Some(knots) = fit_monotone_map(&xs, &ys) {
            let fitted: f64 = xs.iter().zip(&ys).map(|(x, y)| (emodist::calibrate::interpolate(&knots, *x) - y).powi(2)).sum();
            let identity: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!(fitted <= identity + 1e-12);
        }
    }

    #[test]
    fn cliffs_antisymmetric(a in prop::collection::vec(0..20i32, 1..30), b in prop::collection::vec(0..20i32, 1..30)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let d = stats::cliffs_delta(&a, &b);
        prop_assert_eq!(d, -stats::cliffs_delta(&b, &a));
        prop_assert!(d.abs() <= 1.0);
    }

    #[test]
    fn rank_tests_monotone_invariant(a in prop::collection::vec(-5.0..5.0f64, 2..15), b in prop::collection::vec(-5.0..5.0f64, 2..15)) {
        let f = |x: &f64| x.powi(3) + x;
        let (ta, tb): (Vec<f64>, Vec<f64>) = (a.iter().map(f).collect(), b.iter().map(f).collect());
        let mw = stats::mann_whitney(&a, &b).unwrap();
        let mwt = stats::mann_whitney(&ta, &tb).unwrap();
        prop_assert!((mw.p_value - mwt.p_value).abs() < 1e-12);
        prop_assert_eq!(stats::cliffs_delta(&a, &b), stats::cliffs_delta(&ta, &tb));
        let groups = vec![a.clone(), b.clone(), a.iter().map(|x| x * 0.5).collect::<Vec<_>>()];
        let tgroups: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(f).collect()).collect();
        let kw = stats::kruskal_wallis_dunn(&groups).unwrap();
        prop_assert!((kw.test.statistic - stats::kruskal_wallis_dunn(&tgroups).unwrap().test.statistic).abs() < 1e-9);
    }

    #[test]
    fn parse_total(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let space = LabelSpace::goemotions();
        let _ = parse_bytes(&bytes, Task::Categorical, &space);
        let _ = parse_bytes(&bytes, Task::Vad, &space);
    }

    #[test]
    fn embedding_similarity_order_and_scale(
        vecs in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 4), 1..8),
        label in prop::collection::vec(0.1..1.0f64, 4),
        scale in 0.01..100.0f64,
    ) {
        let mut base = EmbeddingTable::new(4);
        let mut scaled = EmbeddingTable::new(4);
        base.insert(EmbeddingKind::Label, "joy", label.clone()).unwrap();
        scaled.insert(EmbeddingKind::Label, "joy", label).unwrap();
        let mut ids = Vec::new();
        for (i, v) in vecs.iter().enumerate() {
            if v.iter().all(|&x| x == 0.0) {
                continue;
            }
            base.insert(EmbeddingKind::Text, format!("t{i}"), v.clone()).unwrap();
            scaled.insert(EmbeddingKind::Text, format!("t{i}"), v.iter().map(|x| x * scale).collect()).unwrap();
            ids.push(format!("t{i}"));
        }
        prop_assume!(!ids.is_empty());
        if let Ok(s) = embedding_similarity("joy", &ids, &base) {
            let mut rev = ids.clone();
            rev.reverse();
            prop_assert!((s - embedding_similarity("joy", &rev, &base).unwrap()).abs() < 1e-9);
            prop_assert!((s - embedding_similarity("joy", &ids, &scaled).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn transparency_affine_invariance(
        emb in prop::collection::vec(-1.0..1.0f64, 5..28),
        a in 0.1..10.0f64,
        c in -5.0..5.0f64,
    ) {
        let raw: Vec<RawScore> = emb.iter().enumerate().map(|(i, &e)| RawScore {
            category: format!("c{i:02}"),
            n_positive: 1,
            embedding_sim: e,
            lexicon_cov: ((i * i + 1) % 11) as f64 / 10.0,
        }).collect();
        prop_assume!(emb.iter().any(|&e| e != emb[0]));
        let rho: BTreeMap<String, f64> = raw.iter().enumerate().map(|(i, r)| (r.category.clone(), (i as f64).sin())).collect();
        let none = BTreeSet::new();
        let base = transparency_table(&raw, &rho, &none).unwrap();
        let moved: Vec<RawScore> = raw.iter().map(|r| RawScore { embedding_sim: a * r.embedding_sim + c, ..r.clone() }).collect();
        let other = transparency_table(&moved, &rho, &none).unwrap();
        for (x, y) in base.categories.iter().zip(&other.categories) {
            prop_assert!((x.combined - y.combined).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&x.combined));
        }
        let mins = base.categories.iter().map(|c| c.embedding_norm).fold(f64::INFINITY, f64::min);
        let maxs = base.categories.iter().map(|c| c.embedding_norm).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!((mins, maxs), (0.0, 1.0));
    }
}

fn label_sets(space: usize) -> impl Strategy<Value = Vec<BTreeSet<usize>>> {
    prop::collection::vec(prop::collection::btree_set(0..space, 1..4), 2..6)
}

proptest! {
    #[test]
    fn tier_and_distribution_ignore_annotator_order(sets in label_sets(6), rot in 0usize..6) {
        let space = LabelSpace::new(["a", "b", "c", "d", "e", "f"]).unwrap();
        let make = |ids: Vec<String>| CategoricalAnnotations {
            per_annotator: ids.into_iter().zip(sets.iter().cloned()).collect(),
        };
        let n = sets.len();
        let plain = make((0..n).map(|i| format!("a{i}")).collect());
        let renamed = make((0..n).map(|i| format!("z{}", (i + rot) % n)).collect());
        prop_assert_eq!(classify_agreement_categorical(&plain).unwrap(), classify_agreement_categorical(&renamed).unwrap());
        prop_assert_eq!(human_distribution(&plain, &space).unwrap(), human_distribution(&renamed, &space).unwrap());
    }

    #[test]
    fn merged_samples_mix_by_count(
        a in prop::collection::vec(prop::collection::btree_set(0..5usize, 1..3), 1..20),
        b in prop::collection::vec(prop::collection::btree_set(0..5usize, 1..3), 1..20),
    ) {
        let space = LabelSpace::new(["a", "b", "c", "d", "e"]).unwrap();
        let wrap = |v: &[BTreeSet<usize>]| -> Vec<(f64, SampleSelection)> {
            v.iter().map(|s| (0.7, SampleSelection { labels: s.clone() })).collect()
        };
        let (sa, sb) = (wrap(&a), wrap(&b));
        let mut both = sa.clone();
        both.extend(sb.iter().cloned());
        let da = llm_distribution(&sa, &space, None).unwrap();
        let db = llm_distribution(&sb, &space, None).unwrap();
        let d = llm_distribution(&both, &space, None).unwrap();
        let (ca, cb) = (a.iter().map(BTreeSet::len).sum::<usize>() as f64, b.iter().map(BTreeSet::len).sum::<usize>() as f64);
        for k in 0..5 {
            let mix = (ca * da.get(k) + cb * db.get(k)) / (ca + cb);
            prop_assert!((d.get(k) - mix).abs() < 1e-12);
        }
        let mut reversed = both.clone();
        reversed.reverse();
        prop_assert_eq!(llm_distribution(&reversed, &space, None).unwrap(), d);
    }

    #[test]
    fn stratified_sample_ignores_input_order(n in 12usize..40, seed in any::<u64>(), rot in 0usize..40) {
        let records: Vec<TextRecord> = (0..n).map(|i| {
            let sets: Vec<BTreeSet<usize>> = match i % 3 {
                0 => vec![BTreeSet::from([0]), BTreeSet::from([0])],
                1 => vec![BTreeSet::from([0]), BTreeSet::from([0, 1])],
                _ => vec![BTreeSet::from([0]), BTreeSet::from([1])],
            };
            TextRecord {
                text_id: format!("t{i:03}"),
                text: String::new(),
                annotations: Annotations::Categorical(CategoricalAnnotations {
                    per_annotator: sets.into_iter().enumerate().map(|(j, s)| (format!("a{j}"), s)).collect(),
                }),
            }
        }).collect();
        let counts: BTreeMap<AgreementTier, usize> = AgreementTier::CATEGORICAL.iter().map(|&t| (t, 3)).collect();
        let mut rotated = records.clone();
        rotated.rotate_left(rot % n);
        let a = stratified_sample(&records, &counts, seed).unwrap();
        let b = stratified_sample(&rotated, &counts, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn two_annotator_tiers_partition_all_pairs() {
    let subsets: Vec<BTreeSet<usize>> = (1u32..16).map(|m| (0..4).filter(|i| m & (1 << i) != 0).collect()).collect();
    for x in &subsets {
        for y in &subsets {
            let ann = CategoricalAnnotations {
                per_annotator: [("a".to_string(), x.clone()), ("b".to_string(), y.clone())].into(),
            };
            let tier = classify_agreement_categorical(&ann).unwrap();
            let expected = if x == y {
                AgreementTier::FullAgreement
            } else if x.is_disjoint(y) {
                AgreementTier::FullDisagreement
            } else {
                AgreementTier::Partial
            };
            assert_eq!(tier, expected);
        }
    }
}

#[test]
fn mann_whitney_paths_agree_at_boundary() {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let a: Vec<f64> = (0..8).map(|_| r.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..9).map(|_| r.random_range(0.0..1.0) + 0.2).collect();
        let exact = stats::mann_whitney_exact(&a, &b).unwrap().p_value;
        let normal = stats::mann_whitney_normal(&a, &b).unwrap().p_value;
        assert!((exact - normal).abs() < 0.02, "{exact} vs {normal}");
    }
}

#[test]
fn bootstrap_width_scales_inverse_sqrt() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(23);
    let sizes = [50usize, 100, 200, 400, 800, 1600];
    let mut pts = Vec::new();
    for &n in &sizes {
        let mut widths = 0.0;
        for rep in 0..8 {
            let xs: Vec<f64> = (0..n).map(|_| normal.sample(&mut r)).collect();
            let ci = stats::bootstrap_ci(&xs, &Statistic::Mean, 400, 0.95, rep).unwrap();
            widths += ci.upper - ci.lower;
        }
        pts.push(((n as f64).ln(), (widths / 8.0).ln()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    assert!((-0.6..=-0.4).contains(&slope), "slope {slope}");
}

fn cv_pairs(n_per_tier: usize) -> Vec<CalibrationPair> {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut out = Vec::new();
    for tier in AgreementTier::CATEGORICAL {
        for i in 0..n_per_tier {
            let h: Vec<f64> = (0..6).map(|_| r.random_range(0.0..1.0)).collect();
            let m: Vec<f64> = h.iter().map(|x| (x + r.random_range(0.0..0.5)).powi(2)).collect();
            out.push(CalibrationPair {
                text_id: format!("{}-{i}", tier.as_str()),
                tier,
                model: CategoricalDistribution::from_weights(m).unwrap(),
                human: CategoricalDistribution::from_weights(h).unwrap(),
            });
        }
    }
    out
}

#[test]
fn crossval_deterministic_and_folds_balanced() {
    let pairs = cv_pairs(23);
    for method in Method::ALL {
        let a = crossval(&pairs, method, 5, 42).unwrap();
        let b = crossval(&pairs, method, 5, 42).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.folds.iter().zip(&b.folds) {
            assert_eq!(x.mean_jsd_after.to_bits(), y.mean_jsd_after.to_bits());
        }
    }
    let split = assign_folds(&pairs, 5, 42).unwrap();
    assert_eq!(split.assignments.len(), pairs.len());
}

#[test]
fn isotonic_on_train_does_not_increase_error() {
    let pairs = cv_pairs(20);
    let train: Vec<_> = pairs.iter().map(|p| (p.model.clone(), p.human.clone())).collect();
    let model = fit_isotonic(&train).unwrap();
    for k in 0..6 {
        let mapped: f64 = train.iter().map(|(q, p)| (isotonic_rates(q, &model)[k] - p.get(k)).powi(2)).sum();
        let identity: f64 = train.iter().map(|(q, p)| (q.get(k) - p.get(k)).powi(2)).sum();
        assert!(mapped <= identity + 1e-12);
    }
}

#[test]
fn store_round_trip_preserves_parsed() {
    let space = LabelSpace::goemotions();
    let parsed = [
        ParsedResponse::Labels(SampleSelection::new([0, 17])),
        ParsedResponse::Labels(SampleSelection::new([27])),
        ParsedResponse::Vad(Vad::new(3.2, 2.5, 3.8)),
        ParsedResponse::Vad(Vad::new(1.0 / 3.0 + 1.0, 4.999_999_999, 2.0)),
        ParsedResponse::Failure(emodist::sampler::FailureReason::NotJson),
    ];
    let records: Vec<StoreRecord> = parsed
        .iter()
        .enumerate()
        .map(|(i, p)| StoreRecord {
            text_id: format!("t{i}"),
            model: "m".into(),
            temperature: [0.0, 0.3, 0.7, 1.0][i % 4],
            sample_index: i as u32,
            raw: Some(format!("raw \"{i}\"\n")),
            parsed: StoredParsed::from_parsed(p, &space),
            error: None,
            timestamp: Some(1_700_000_000 + i as u64),
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    write_store(&path, &records).unwrap();
    let back = read_store(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, records);
    let reparsed: Vec<ParsedResponse> = back.iter().map(|r| r.parsed.to_parsed(&space)).collect();
    assert_eq!(reparsed, parsed);
}
