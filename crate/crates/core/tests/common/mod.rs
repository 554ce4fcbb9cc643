#![allow(dead_code)]

use emodist::CategoricalDistribution;
use rand::Rng;

/// Random point of the simplex with occasional exact zeros.
pub fn random_dist(rng: &mut impl Rng, k: usize) -> CategoricalDistribution {
    let mut w: Vec<f64> = (0..k)
        .map(|_| if rng.random::<f64>() < 0.15 { 0.0 } else { -rng.random::<f64>().max(1e-300).ln() })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..k)] = 1.0;
    }
    CategoricalDistribution::from_weights(w).unwrap()
}

/// Isotonic regression by brute force: try every split of the sequence into
/// contiguous blocks, keep those whose block means are non-decreasing, and
/// return the fit with the smallest weighted squared error.
pub fn pava_oracle(ys: &[f64], ws: &[f64]) -> Vec<f64> {
    let n = ys.len();
    if n == 0 {
        return Vec::new();
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fit = vec![0.0; n];
        let mut start = 0;
        let mut prev = f64::NEG_INFINITY;
        let mut ok = true;
        for end in 0..n {
            let cut = end == n - 1 || mask & (1 << end) != 0;
            if !cut {
                continue;
            }
            let w: f64 = ws[start..=end].iter().sum();
            let m: f64 = (start..=end).map(|i| ys[i] * ws[i]).sum::<f64>() / w;
            if m < prev - 1e-12 {
                ok = false;
                break;
            }
            prev = m;
            fit[start..=end].iter_mut().for_each(|f| *f = m);
            start = end + 1;
        }
        if !ok {
            continue;
        }
        let sse: f64 = (0..n).map(|i| ws[i] * (ys[i] - fit[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-15) {
            best = Some((sse, fit));
        }
    }
    best.expect("the single-block split is always monotone").1
}

/// Kruskal–Wallis H without tie correction shortcuts: mid-ranks, then the
/// textbook formula divided by the tie factor.
pub fn kw_h(values: &[f64], sizes: &[usize]) -> f64 {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let mut sum = 0.0;
    let mut off = 0;
    for &s in sizes {
        let r: f64 = ranks[off..off + s].iter().sum();
        sum += r * r / s as f64;
        off += s;
    }
    let h = 12.0 / (nf * (nf + 1.0)) * sum - 3.0 * (nf + 1.0);
    h / (1.0 - ties / (nf * nf * nf - nf))
}

/// Exact permutation p-value of H: the share of all distinct assignments of
/// the pooled values to groups of the given sizes with H at least observed.
pub fn kw_permutation_p(groups: &[Vec<f64>]) -> f64 {
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let observed = kw_h(&pooled, &sizes);
    let n = pooled.len();
    let mut labels = vec![0usize; n];
    let mut counts = vec![0usize; sizes.len()];
    let (mut hits, mut total) = (0u64, 0u64);
    fn rec(
        pos: usize,
        labels: &mut [usize],
        counts: &mut [usize],
        sizes: &[usize],
        pooled: &[f64],
        observed: f64,
        hits: &mut u64,
        total: &mut u64,
    ) {
        if pos == labels.len() {
            let mut arranged = Vec::with_capacity(pooled.len());
            for g in 0..sizes.len() {
                arranged.extend((0..pooled.len()).filter(|&i| labels[i] == g).map(|i| pooled[i]));
            }
            *total += 1;
            if kw_h(&arranged, sizes) >= observed - 1e-9 {
                *hits += 1;
            }
            return;
        }
        for g in 0..sizes.len() {
            if counts[g] < sizes[g] {
                counts[g] += 1;
                labels[pos] = g;
                rec(pos + 1, labels, counts, sizes, pooled, observed, hits, total);
                counts[g] -= 1;
            }
        }
    }
    rec(0, &mut labels, &mut counts, &sizes, &pooled, observed, &mut hits, &mut total);
    hits as f64 / total as f64
}

/// Cliff's δ by looking at every pair.
pub fn cliffs_pairs(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0i64;
    for x in a {
        for y in b {
            s += (x > y) as i64 - (x < y) as i64;
        }
    }
    s as f64 / (a.len() * b.len()) as f64
}

/// Two-sided exact Mann–Whitney p by enumerating every subset of the
/// pooled sample as the first group, on raw values rather than ranks.
pub fn mw_subset_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let na = a.len();
    let u = |first: &[f64], second: &[f64]| -> f64 {
        let mut u = 0.0;
        for x in first {
            for y in second {
                u += if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
            }
        }
        u
    };
    let center = (na * b.len()) as f64 / 2.0;
    let observed = (u(a, b) - center).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let first: Vec<f64> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pooled[i]).collect();
        let second: Vec<f64> = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| pooled[i]).collect();
        total += 1;
        if (u(&first, &second) - center).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
