//! Synthetic two-component mixtures, train/test splits and weak-label
//! corruption.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::WeakLabel;
use crate::seed::{derive_seed, rng_from_seed};

/// Two Gaussian blobs in `d` dimensions with targets `1 + ε` and `2 + ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureSpec {
    pub d: usize,
    /// Mean of component 0, length `d`.
    pub m1: Vec<f64>,
    /// Mean of component 1, length `d`.
    pub m2: Vec<f64>,
    pub sigma_x: f64,
    pub sigma_eps: f64,
    /// Uniform(0, 1) columns appended after the `d` informative ones.
    pub noise_features: usize,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self::with_dim(8, 2.0, 0.1, 0)
    }
}

impl MixtureSpec {
    /// Means `0·1` and `10·1` in `d` dimensions.
    pub fn with_dim(d: usize, sigma_x: f64, sigma_eps: f64, noise_features: usize) -> Self {
        Self {
            d,
            m1: vec![0.0; d],
            m2: vec![10.0; d],
            sigma_x,
            sigma_eps,
            noise_features,
        }
    }

    /// Example 1a: `σ_X = 2`, no noise features.
    pub fn example_1a(sigma_eps: f64) -> Self {
        Self::with_dim(8, 2.0, sigma_eps, 0)
    }

    /// Example 1b: `σ_X = 3`, two uniform noise features.
    pub fn example_1b(sigma_eps: f64) -> Self {
        Self::with_dim(8, 3.0, sigma_eps, 2)
    }

    pub fn n_features(&self) -> usize {
        self.d + self.noise_features
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParameter("mixture dimension d must be >= 1".into()));
        }
        if self.m1.len() != self.d || self.m2.len() != self.d {
            return Err(Error::InvalidParameter(format!(
                "component means must have length d = {}, got {} and {}",
                self.d,
                self.m1.len(),
                self.m2.len()
            )));
        }
        if self.m1.iter().chain(&self.m2).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("component means must be finite".into()));
        }
        if !(self.sigma_x > 0.0 && self.sigma_x.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_x must be > 0, got {}", self.sigma_x)));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_eps must be >= 0, got {}",
                self.sigma_eps
            )));
        }
        Ok(())
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub x: Array2<f64>,
    pub y_true: Array1<f64>,
    /// 0 or 1.
    pub component: Vec<usize>,
}

pub fn generate(spec: &MixtureSpec, n: usize, seed: u64) -> Result<Mixture> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::TooFewPoints(format!("mixture needs n >= 2, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let eps = Normal::new(0.0, spec.sigma_eps).expect("validated sigma_eps");
    let p = spec.n_features();
    let mut x = Array2::zeros((n, p));
    let mut y_true = Array1::zeros(n);
    let mut component = Vec::with_capacity(n);
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let c = usize::from(rng.random_bool(0.5));
        let mean = if c == 0 { &spec.m1 } else { &spec.m2 };
        for (k, m) in mean.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            row[k] = m + spec.sigma_x * z;
        }
        for k in spec.d..p {
            row[k] = rng.random::<f64>();
        }
        y_true[i] = 1.0 + c as f64 + eps.sample(&mut rng);
        component.push(c);
    }
    Ok(Mixture { x, y_true, component })
}

/// How the observed mean of a weak label is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakMean {
    /// `a_i ~ N(y_i, s_i²)`.
    #[default]
    Sampled,
    /// `a_i = y_i`; the uncertainty lives in `s_i` only.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub labeled_fraction: f64,
    pub weak_fraction: f64,
    /// Weak-label spread multiplier: `s_i = delta · σ_Y`.
    pub delta: f64,
    pub weak_mean: WeakMean,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 2.0 / 3.0,
            labeled_fraction: 0.10,
            weak_fraction: 0.20,
            delta: 0.1,
            weak_mean: WeakMean::Sampled,
        }
    }
}

impl SplitSpec {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train_fraction", self.train_fraction),
            ("labeled_fraction", self.labeled_fraction),
            ("weak_fraction", self.weak_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.labeled_fraction + self.weak_fraction > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "labeled_fraction + weak_fraction = {} exceeds 1",
                self.labeled_fraction + self.weak_fraction
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Labeled,
    Weak,
    Unlabeled,
    Test,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Labeled => "labeled",
            Role::Weak => "weak",
            Role::Unlabeled => "unlabeled",
            Role::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "labeled" => Some(Role::Labeled),
            "weak" => Some(Role::Weak),
            "unlabeled" => Some(Role::Unlabeled),
            "test" => Some(Role::Test),
            _ => None,
        }
    }
}

/// Label roles and the corresponding weak labels for every point.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub labels: Vec<WeakLabel>,
    pub roles: Vec<Role>,
    /// Standard deviation of `y_true` over the labeled and weak points.
    pub sigma_y: f64,
}

impl Split {
    pub fn mask(&self, role: Role) -> Vec<bool> {
        self.roles.iter().map(|&r| r == role).collect()
    }

    pub fn test_mask(&self) -> Vec<bool> {
        self.mask(Role::Test)
    }

    pub fn count(&self, role: Role) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }
}

fn round_count(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64).round() as usize).min(total)
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Fills in labels from roles: exact labels for labeled points, `N(a, δσ_Y)`
/// for weak ones. `noise` holds one standard normal draw per point so that the
/// same draws are reused across `delta` values.
pub(crate) fn corrupt(
    y_true: &[f64],
    roles: Vec<Role>,
    delta: f64,
    weak_mean: WeakMean,
    noise: &[f64],
) -> Split {
    let observed = y_true
        .iter()
        .zip(&roles)
        .filter(|(_, r)| matches!(r, Role::Labeled | Role::Weak))
        .map(|(y, _)| *y);
    let sigma_y = sample_std(observed);
    let s = delta * sigma_y;
    let labels = roles
        .iter()
        .enumerate()
        .map(|(i, role)| match role {
            Role::Labeled => WeakLabel::labeled(y_true[i]),
            Role::Weak => {
                let a = match weak_mean {
                    WeakMean::Sampled => y_true[i] + s * noise[i],
                    WeakMean::Exact => y_true[i],
                };
                WeakLabel::weak(a, s)
            }
            Role::Unlabeled | Role::Test => WeakLabel::unlabeled(),
        })
        .collect();
    Split {
        labels,
        roles,
        sigma_y,
    }
}

pub(crate) fn standard_normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Number of training points: `round(train_fraction · n)`, kept inside
/// `[1, n - 1]` so both parts are non-empty.
pub(crate) fn train_size(train_fraction: f64, n: usize) -> usize {
    round_count(train_fraction, n).clamp(1, n - 1)
}

/// Train/test split, per-component stratified labeled selection and weak
/// corruption. Fractions of labeled and weak points are relative to the
/// training part.
pub fn split_and_corrupt(
    y_true: &[f64],
    component: &[usize],
    split: &SplitSpec,
    seed: u64,
) -> Result<Split> {
    split.validate()?;
    let n = y_true.len();
    if component.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} targets, {} component ids",
            component.len()
        )));
    }
    if n < 2 {
        return Err(Error::TooFewPoints(format!("split needs n >= 2, got {n}")));
    }
    let n_train = train_size(split.train_fraction, n);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(derive_seed(seed, 0)));
    let (train, test) = perm.split_at(n_train);

    let mut roles = vec![Role::Unlabeled; n];
    for &i in test {
        roles[i] = Role::Test;
    }

    let n_components = component.iter().max().map_or(0, |m| m + 1);
    let mut by_component: Vec<Vec<usize>> = vec![Vec::new(); n_components];
    for &i in train {
        by_component[component[i]].push(i);
    }
    if split.labeled_fraction > 0.0 {
        let present: Vec<bool> = (0..n_components).map(|c| component.contains(&c)).collect();
        if let Some(c) = (0..n_components).find(|&c| present[c] && by_component[c].is_empty()) {
            return Err(Error::TooFewPoints(format!(
                "component {c} has no training points to label"
            )));
        }
    }
    // Training members of each component are already in random order.
    for members in &by_component {
        let k = round_count(split.labeled_fraction, members.len());
        for &i in &members[..k] {
            roles[i] = Role::Labeled;
        }
    }

    let mut rest: Vec<usize> = train.iter().copied().filter(|&i| roles[i] == Role::Unlabeled).collect();
    rest.shuffle(&mut rng_from_seed(derive_seed(seed, 1)));
    let n_weak = round_count(split.weak_fraction, n_train).min(rest.len());
    for &i in &rest[..n_weak] {
        roles[i] = Role::Weak;
    }

    let noise = standard_normals(n, derive_seed(seed, 2));
    Ok(corrupt(y_true, roles, split.delta, split.weak_mean, &noise))
}

/// Features, ground truth and label roles for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y_true: Array1<f64>,
    pub split: Split,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y_true.len()
    }
}

/// Generates a mixture and splits it, with independent seed streams for the
/// two steps.
pub fn synthetic_dataset(mixture: &MixtureSpec, split: &SplitSpec, n: usize, seed: u64) -> Result<Dataset> {
    let m = generate(mixture, n, derive_seed(seed, 0))?;
    let y = m.y_true.as_slice().expect("contiguous");
    let s = split_and_corrupt(y, &m.component, split, derive_seed(seed, 1))?;
    Ok(Dataset {
        x: m.x,
        y_true: m.y_true,
        split: s,
    })
}
