//! Cluster ensembles built from randomized k-means runs, and their weighted
//! co-association similarity `H = Σ_l ω_l H_l` in exact low-rank form.
//!
//! With `Z_l` the n×K_l one-hot assignment matrix of partition `l`,
//! `H = R Rᵀ` where `R = [√ω_1 Z_1 … √ω_r Z_r]`. `R` has `m = Σ_l K_l`
//! columns and exactly `r` nonzeros per row, so it is stored sparse whenever
//! the clusterings are fine enough. The degree of point `i` in `H` is
//! `Σ_l ω_l N_l(i)`, with `N_l(i)` the size of its cluster in partition `l`.

use ndarray::{Array1, ArrayView2};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::check_finite;
use crate::linalg::{DiagonalMatrix, LowRankFactor};
use crate::par;
use crate::seed::{derive_seed, rng_from_seed};

/// Tolerance on `Σ ω_l = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A hard clustering of n points into `k` clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
    cluster_sizes: Vec<usize>,
    /// Mean squared distance from each point to its cluster mean.
    mean_sq_error: f64,
}

impl Partition {
    /// Builds a partition from labels. Every label must be `< k`.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        Self::with_error(labels, k, f64::NAN)
    }

    fn with_error(labels: Vec<usize>, k: usize, mean_sq_error: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("partition needs k >= 1".into()));
        }
        let mut cluster_sizes = vec![0; k];
        for (i, &c) in labels.iter().enumerate() {
            if c >= k {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has cluster id {c} >= k = {k}"
                )));
            }
            cluster_sizes[c] += 1;
        }
        Ok(Self {
            labels,
            k,
            cluster_sizes,
            mean_sq_error,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    /// Size of the cluster containing point `i`.
    pub fn cluster_size_of(&self, i: usize) -> usize {
        self.cluster_sizes[self.labels[i]]
    }

    /// Within-cluster sum of squares divided by n; NaN when the partition was
    /// not produced by [`kmeans`].
    pub fn mean_sq_error(&self) -> f64 {
        self.mean_sq_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KSchedule {
    /// Every run uses `k` clusters.
    Constant { k: usize },
    /// Run `l` (0-based) uses `base + l` clusters.
    Incrementing { base: usize },
}

impl KSchedule {
    pub fn k_for_run(&self, run: usize) -> usize {
        match *self {
            KSchedule::Constant { k } => k,
            KSchedule::Incrementing { base } => base + run,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Uniform,
    /// Weights proportional to a cluster-validity score; see
    /// [`validity_scores`].
    ValidityIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub runs: usize,
    pub k_schedule: KSchedule,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub weight_mode: WeightMode,
}

fn default_max_iters() -> usize {
    100
}

impl EnsembleConfig {
    pub fn uniform(runs: usize, k_schedule: KSchedule, seed: u64) -> Self {
        Self {
            runs,
            k_schedule,
            max_iters: default_max_iters(),
            seed,
            weight_mode: WeightMode::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one run".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("k-means max_iters must be >= 1".into()));
        }
        if let Some(l) = (0..self.runs).find(|&l| self.k_schedule.k_for_run(l) == 0) {
            return Err(Error::InvalidParameter(format!("run {l} would use k = 0")));
        }
        Ok(())
    }

    /// Total column count `m = Σ_l K_l` of the resulting factor.
    pub fn rank_bound(&self) -> usize {
        (0..self.runs).map(|l| self.k_schedule.k_for_run(l)).sum()
    }
}

/// Weighted set of partitions of the same n points.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionEnsemble {
    partitions: Vec<Partition>,
    weights: Vec<f64>,
}

impl PartitionEnsemble {
    pub fn new(partitions: Vec<Partition>, weights: Vec<f64>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(Error::InvalidParameter("ensemble needs at least one partition".into()));
        }
        if partitions.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} partitions but {} weights",
                partitions.len(),
                weights.len()
            )));
        }
        let n = partitions[0].n();
        if partitions.iter().any(|p| p.n() != n) {
            return Err(Error::DimensionMismatch(
                "partitions cover different point counts".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("ensemble weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "ensemble weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { partitions, weights })
    }

    /// Equal weights `1/r`.
    pub fn uniform(partitions: Vec<Partition>) -> Result<Self> {
        let r = partitions.len().max(1);
        let weights = vec![1.0 / r as f64; partitions.len()];
        Self::new(partitions, weights)
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.partitions[0].n()
    }

    pub fn rank(&self) -> usize {
        self.partitions.iter().map(Partition::k).sum()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(d).enumerate() {
        let dist = sq_dist(point, centroid);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

/// Lloyd's k-means.
///
/// Centroids start at `k` distinct points drawn uniformly at random. Each
/// iteration assigns points to the nearest centroid, stops at an assignment
/// fixpoint, and otherwise recomputes centroids as cluster means. A cluster
/// that empties is re-seeded at the point farthest from its current centroid,
/// so the cluster count stays `k`. Fully determined by `seed`.
pub fn kmeans(x: ArrayView2<f64>, k: usize, max_iters: usize, seed: u64) -> Result<Partition> {
    let n = x.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k-means needs k >= 1".into()));
    }
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("k-means max_iters must be >= 1".into()));
    }
    check_finite(x)?;
    let x = x.as_standard_layout();
    let d = x.ncols();
    let data = x.as_slice().expect("standard layout");
    let point = |i: usize| &data[i * d..(i + 1) * d];

    let mut rng = rng_from_seed(seed);
    let mut centroids: Vec<f64> = sample(&mut rng, n, k)
        .into_iter()
        .flat_map(|i| point(i).to_vec())
        .collect();

    let mut labels: Vec<usize> = Vec::new();
    for _ in 0..max_iters {
        let assigned = par::map_range(n, |i| nearest(point(i), &centroids, d));
        let new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        let mut dists: Vec<f64> = assigned.into_iter().map(|a| a.1).collect();
        if new_labels == labels {
            break;
        }
        labels = new_labels;

        let (sums, counts) = par::fold_range(
            n,
            || (vec![0.0; k * d], vec![0usize; k]),
            |(mut sums, mut counts), i| {
                let c = labels[i];
                counts[c] += 1;
                for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(point(i)) {
                    *s += v;
                }
                (sums, counts)
            },
            |(mut s1, mut c1), (s2, c2)| {
                s1.iter_mut().zip(s2).for_each(|(a, b)| *a += b);
                c1.iter_mut().zip(c2).for_each(|(a, b)| *a += b);
                (s1, c1)
            },
        );
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids[c * d..(c + 1) * d].iter_mut().zip(&sums[c * d..]) {
                    *dst = s * inv;
                }
            }
        }
        for c in (0..k).filter(|&c| counts[c] == 0) {
            // Farthest point from its own centroid; lowest index on ties.
            let (far, _) = dists
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
            centroids[c * d..(c + 1) * d].copy_from_slice(point(far));
            dists[far] = f64::NEG_INFINITY;
        }
    }

    let mut means = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in means[c * d..(c + 1) * d].iter_mut().zip(point(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            means[c * d..(c + 1) * d].iter_mut().for_each(|v| *v /= counts[c] as f64);
        }
    }
    let wcss: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(point(i), &means[c * d..(c + 1) * d]))
        .sum();
    Partition::with_error(labels, k, wcss / n as f64)
}

/// Scales `scores` to sum to one. Scores must be non-negative with a positive
/// total.
pub fn normalize_weights(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter("weight scores must be finite and >= 0".into()));
    }
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("weight scores sum to zero".into()));
    }
    Ok(scores.iter().map(|s| s / total).collect())
}

/// Validity score per partition: the negated mean within-cluster sum of
/// squares, min-max scaled into `[1, 2]` so every run keeps positive weight.
/// All-equal errors give all-equal scores.
pub fn validity_scores(partitions: &[Partition]) -> Vec<f64> {
    let raw: Vec<f64> = partitions.iter().map(|p| -p.mean_sq_error()).collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    raw.iter()
        .map(|v| if span > 0.0 { 1.0 + (v - lo) / span } else { 1.0 })
        .collect()
}

/// Runs `config.runs` independent k-means clusterings (in parallel when
/// enabled) and weights them.
pub fn build_ensemble(x: ArrayView2<f64>, config: &EnsembleConfig) -> Result<PartitionEnsemble> {
    config.validate()?;
    let runs = par::map_range(config.runs, |l| {
        kmeans(
            x,
            config.k_schedule.k_for_run(l),
            config.max_iters,
            derive_seed(config.seed, l as u64),
        )
    });
    let partitions = runs.into_iter().collect::<Result<Vec<_>>>()?;
    match config.weight_mode {
        WeightMode::Uniform => PartitionEnsemble::uniform(partitions),
        WeightMode::ValidityIndex => {
            let weights = normalize_weights(&validity_scores(&partitions))?;
            PartitionEnsemble::new(partitions, weights)
        }
    }
}

/// The factor `R` with `R Rᵀ = Σ_l ω_l H_l`.
pub fn coassociation_factor(ensemble: &PartitionEnsemble) -> LowRankFactor {
    let scales: Vec<f64> = ensemble.weights().iter().map(|w| w.sqrt()).collect();
    let offsets: Vec<usize> = ensemble
        .partitions()
        .iter()
        .scan(0, |acc, p| {
            let o = *acc;
            *acc += p.k();
            Some(o)
        })
        .collect();
    let rows = par::map_range(ensemble.n(), |i| {
        ensemble
            .partitions()
            .iter()
            .zip(&offsets)
            .zip(&scales)
            .filter(|(_, s)| **s > 0.0)
            .map(|((p, o), s)| (o + p.labels()[i], *s))
            .collect::<Vec<_>>()
    });
    LowRankFactor::from_rows(ensemble.rank(), rows).expect("columns bounded by the ensemble rank")
}

/// Degree diagonal `D'_ii = Σ_l ω_l N_l(i)` of the co-association matrix,
/// from cluster sizes alone.
pub fn coassociation_degree(ensemble: &PartitionEnsemble) -> DiagonalMatrix {
    let values = par::map_range(ensemble.n(), |i| {
        ensemble
            .partitions()
            .iter()
            .zip(ensemble.weights())
            .map(|(p, w)| w * p.cluster_size_of(i) as f64)
            .sum()
    });
    DiagonalMatrix::new(Array1::from(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::degree_diagonal;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn two_blobs(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let comp: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let x = Array2::from_shape_fn((n, 8), |(i, _)| 10.0 * comp[i] as f64 + noise.sample(&mut rng));
        (x, comp)
    }

    fn explicit_coassociation(e: &PartitionEnsemble) -> Array2<f64> {
        let n = e.n();
        let mut h = Array2::zeros((n, n));
        for (p, w) in e.partitions().iter().zip(e.weights()) {
            for i in 0..n {
                for j in 0..n {
                    if p.labels()[i] == p.labels()[j] {
                        h[[i, j]] += w;
                    }
                }
            }
        }
        h
    }

    #[test]
    fn single_cluster() {
        let (x, _) = two_blobs(30, 1);
        let p = kmeans(x.view(), 1, 10, 3).unwrap();
        assert!(p.labels().iter().all(|&c| c == 0));
        assert_eq!(p.cluster_sizes(), &[30]);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let (x, _) = two_blobs(12, 2);
        let p = kmeans(x.view(), 12, 10, 5).unwrap();
        let mut seen = p.labels().to_vec();
        seen.sort_unstable();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
        assert!(p.cluster_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn separated_blobs_are_recovered() {
        for seed in 0..20 {
            let (x, comp) = two_blobs(400, 100 + seed);
            let p = kmeans(x.view(), 2, 100, seed).unwrap();
            let agree = p.labels().iter().zip(&comp).filter(|(a, b)| a == b).count();
            let agree = agree.max(400 - agree);
            assert!(agree as f64 >= 0.99 * 400.0, "seed {seed}: {agree}/400");
        }
    }

    #[test]
    fn kmeans_is_deterministic() {
        let (x, _) = two_blobs(200, 9);
        let a = kmeans(x.view(), 5, 50, 77).unwrap();
        let b = kmeans(x.view(), 5, 50, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cluster_sizes().iter().sum::<usize>(), 200);
    }

    #[test]
    fn kmeans_errors() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(kmeans(x.view(), 3, 10, 0), Err(Error::KExceedsN { k: 3, n: 2 })));
        assert!(kmeans(x.view(), 0, 10, 0).is_err());
        assert!(kmeans(x.view(), 1, 0, 0).is_err());
    }

    #[test]
    fn duplicate_points_keep_k_clusters() {
        // Five copies of one point and one outlier; k = 3 forces an empty cluster.
        let x = array![[0.0], [0.0], [0.0], [0.0], [0.0], [9.0]];
        let p = kmeans(x.view(), 3, 20, 1).unwrap();
        assert_eq!(p.k(), 3);
        assert_eq!(p.cluster_sizes().iter().sum::<usize>(), 6);
    }

    #[test]
    fn ensemble_weights() {
        let (x, _) = two_blobs(60, 4);
        let e = build_ensemble(x.view(), &EnsembleConfig::uniform(1, KSchedule::Constant { k: 2 }, 1)).unwrap();
        assert_eq!(e.weights(), &[1.0]);
        let e = build_ensemble(x.view(), &EnsembleConfig::uniform(10, KSchedule::Constant { k: 2 }, 1)).unwrap();
        assert!(e.weights().iter().all(|&w| w == 0.1));
        assert_eq!(e.rank(), 20);

        assert_eq!(normalize_weights(&[1.0, 1.0, 2.0]).unwrap(), vec![0.25, 0.25, 0.5]);
        assert!(normalize_weights(&[0.0, 0.0]).is_err());

        let cfg = EnsembleConfig {
            weight_mode: WeightMode::ValidityIndex,
            ..EnsembleConfig::uniform(4, KSchedule::Incrementing { base: 2 }, 3)
        };
        let e = build_ensemble(x.view(), &cfg).unwrap();
        assert!((e.weights().iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOL);
        assert!(e.weights().iter().all(|&w| w > 0.0));
        let ks: Vec<usize> = e.partitions().iter().map(Partition::k).collect();
        assert_eq!(ks, vec![2, 3, 4, 5]);
    }

    #[test]
    fn validity_scores_favor_tighter_clusterings() {
        let tight = Partition::with_error(vec![0, 1], 2, 1.0).unwrap();
        let loose = Partition::with_error(vec![0, 0], 2, 3.0).unwrap();
        assert_eq!(validity_scores(&[tight.clone(), loose]), vec![2.0, 1.0]);
        assert_eq!(validity_scores(&[tight.clone(), tight]), vec![1.0, 1.0]);
    }

    #[test]
    fn three_point_example() {
        let p1 = Partition::new(vec![0, 0, 1], 2).unwrap();
        let p2 = Partition::new(vec![0, 1, 1], 2).unwrap();
        let e = PartitionEnsemble::new(vec![p1, p2], vec![0.5, 0.5]).unwrap();
        let r = coassociation_factor(&e).to_dense();
        let h = r.dot(&r.t());
        let want = array![[1.0, 0.5, 0.0], [0.5, 1.0, 0.5], [0.0, 0.5, 1.0]];
        assert!(h.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(coassociation_degree(&e).values(), &array![1.5, 2.0, 1.5]);
    }

    #[test]
    fn all_in_one_cluster() {
        let e = PartitionEnsemble::uniform(vec![Partition::new(vec![0; 4], 1).unwrap()]).unwrap();
        let r = coassociation_factor(&e).to_dense();
        assert_eq!(r.dot(&r.t()), Array2::<f64>::ones((4, 4)));
        assert_eq!(coassociation_degree(&e).values(), &array![4.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn random_ensemble_matches_explicit_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let parts: Vec<Partition> = (0..6)
            .map(|_| {
                let k = rng.random_range(1..7);
                Partition::new((0..50).map(|_| rng.random_range(0..k)).collect(), k).unwrap()
            })
            .collect();
        let w = normalize_weights(&(0..6).map(|_| rng.random_range(0.1..1.0)).collect::<Vec<_>>()).unwrap();
        let e = PartitionEnsemble::new(parts, w).unwrap();
        let want = explicit_coassociation(&e);
        let factor = coassociation_factor(&e);
        assert_eq!(factor.ncols(), e.rank());
        let r = factor.to_dense();
        let got = r.dot(&r.t());
        assert!(got.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() <= 1e-12));

        let deg = coassociation_degree(&e);
        let via_factor = degree_diagonal(&factor);
        for i in 0..50 {
            assert!((deg.values()[i] - want.row(i).sum()).abs() <= 1e-12);
            assert!((deg.values()[i] - via_factor.values()[i]).abs() <= 1e-10);
            assert!((got[[i, i]] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn factor_rows_have_one_entry_per_partition() {
        let (x, _) = two_blobs(300, 8);
        let cfg = EnsembleConfig::uniform(5, KSchedule::Incrementing { base: 20 }, 4);
        let e = build_ensemble(x.view(), &cfg).unwrap();
        let f = coassociation_factor(&e);
        assert_eq!(f.ncols(), cfg.rank_bound());
        assert!(f.is_sparse());
        assert_eq!(f.nnz(), 300 * 5);
        assert!(f.to_dense().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn ensemble_rejects_bad_weights() {
        let p = Partition::new(vec![0, 0], 1).unwrap();
        assert!(PartitionEnsemble::new(vec![p.clone()], vec![0.5]).is_err());
        assert!(PartitionEnsemble::new(vec![p.clone(), p.clone()], vec![1.5, -0.5]).is_err());
        assert!(PartitionEnsemble::new(vec![], vec![]).is_err());
        let q = Partition::new(vec![0, 0, 0], 1).unwrap();
        assert!(PartitionEnsemble::new(vec![p, q], vec![0.5, 0.5]).is_err());
    }
}
