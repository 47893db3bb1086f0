//! Scalar metrics over score vectors and latent codes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve from rank statistics; ties count one half.
///
/// `positive[i]` marks sample `i` as abnormal. Errors when either class is
/// empty, since the curve is undefined.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::dim(format!("{} scores vs {} labels", scores.len(), positive.len())));
    }
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::config("AUC undefined: scores cover a single class"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let p = n_pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

/// Linear-interpolation quantile of already sorted values; NaN when empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Distribution summary of a per-sample loss vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub mean: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl LossSummary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            mean: mean(values),
            q50: quantile_sorted(&v, 0.5),
            q90: quantile_sorted(&v, 0.9),
            q99: quantile_sorted(&v, 0.99),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

/// Confusion counts with "abnormal" as the positive class and
/// `score > threshold` as the positive prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn at(scores: &[f64], positive: &[bool], threshold: f64) -> Self {
        let mut c = Confusion {
            true_positive: 0,
            false_positive: 0,
            true_negative: 0,
            false_negative: 0,
        };
        for (&s, &p) in scores.iter().zip(positive) {
            match (s > threshold, p) {
                (true, true) => c.true_positive += 1,
                (true, false) => c.false_positive += 1,
                (false, false) => c.true_negative += 1,
                (false, true) => c.false_negative += 1,
            }
        }
        c
    }
}

/// Leading principal components of `rows`, found by power iteration with
/// deflation on the sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(rows: &[Vec<f64>], n_components: usize) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() < 2 || d == 0 {
            return Err(Error::dim("PCA needs at least two nonempty rows"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut cov = vec![0.0; d * d];
        for r in rows {
            for i in 0..d {
                let ci = r[i] - mean[i];
                for j in 0..d {
                    cov[i * d + j] += ci * (r[j] - mean[j]) / (n - 1.0);
                }
            }
        }
        let mut components = Vec::new();
        let mut variances = Vec::new();
        for c in 0..n_components.min(d) {
            let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * ((i + c) % 7) as f64).collect();
            normalize(&mut v);
            let mut lambda = 0.0;
            for _ in 0..1000 {
                let mut w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| cov[i * d + j] * v[j]).sum()).collect();
                let norm = normalize(&mut w);
                let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
                v = w;
                lambda = norm;
                if norm == 0.0 || delta < 1e-12 {
                    break;
                }
            }
            // Sign convention: the largest-magnitude entry is positive.
            let big = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            if big < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] -= lambda * v[i] * v[j];
                }
            }
            components.push(v);
            variances.push(lambda);
        }
        Ok(Self {
            mean,
            components,
            variances,
        })
    }

    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(row).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect()
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Mean silhouette coefficient under Euclidean distance; `None` with fewer
/// than two clusters.
pub fn silhouette(rows: &[Vec<f64>], labels: &[i64]) -> Option<f64> {
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 || rows.len() != labels.len() {
        return None;
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut total = 0.0;
    for (i, ri) in rows.iter().enumerate() {
        let mut sums = vec![0.0; classes.len()];
        let mut counts = vec![0usize; classes.len()];
        for (j, rj) in rows.iter().enumerate() {
            if i != j {
                let c = classes.binary_search(&labels[j]).expect("label listed");
                sums[c] += dist(ri, rj);
                counts[c] += 1;
            }
        }
        let own = classes.binary_search(&labels[i]).expect("label listed");
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..classes.len())
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some(total / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if positive[i] && !positive[j] {
                    pairs += 1.0;
                    wins += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_edge_cases() {
        assert_eq!(auc(&[1.0; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.2, 0.9, 0.8], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.1, 0.2], &[false, false, true, true]).unwrap(), 0.0);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise(
            data in prop::collection::vec((0u8..20, any::<bool>()), 2..200)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s) / 7.0).collect();
            let positive: Vec<bool> = data.iter().map(|(_, p)| *p).collect();
            prop_assume!(positive.iter().any(|p| *p) && positive.iter().any(|p| !*p));
            let fast = auc(&scores, &positive).unwrap();
            prop_assert!((fast - pairwise_auc(&scores, &positive)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&fast));
        }

        #[test]
        fn summary_is_monotone(values in prop::collection::vec(0.0f64..10.0, 1..100)) {
            let s = LossSummary::of(&values);
            prop_assert!(s.q50 <= s.q90 && s.q90 <= s.q99 && s.q99 <= s.max);
            prop_assert_eq!(s.max, values.iter().copied().fold(f64::MIN, f64::max));
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.95), 4.8);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn confusion_counts() {
        let c = Confusion::at(&[0.1, 0.5, 0.7, 0.2], &[false, true, false, true], 0.3);
        assert_eq!(
            (c.true_positive, c.false_positive, c.true_negative, c.false_negative),
            (1, 1, 1, 1)
        );
    }

    #[test]
    fn pca_recovers_dominant_axis() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = i as f64 - 25.0;
                vec![3.0 * t, 0.1 * ((i * 7) % 5) as f64, -t]
            })
            .collect();
        let pca = Pca::fit(&rows, 2).unwrap();
        let c = &pca.components[0];
        let expected = [3.0 / 10f64.sqrt(), 0.0, -1.0 / 10f64.sqrt()];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-3, "{c:?}");
        }
        assert!(pca.variances[0] > pca.variances[1]);
        let dot: f64 = pca.components[0].iter().zip(&pca.components[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-6);
    }

    #[test]
    fn silhouette_separated_clusters() {
        let rows = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
        let s = silhouette(&rows, &[0, 0, 1, 1]).unwrap();
        assert!(s > 0.95);
        assert!(silhouette(&rows, &[0, 0, 0, 0]).is_none());
    }
}
