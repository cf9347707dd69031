//! Synthetic generators. Every generator is a pure function of its seed.
//!
//! Per-row randomness comes from its own stream, so the same seed produces
//! the same latent parameters (row means, weights) at every dimension `d`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{gen_simple_song, Matrix, SimpleSong, SongConfig};
use crate::error::{Error, Result};
use crate::rng::stream;

const PARAM_STREAM: u64 = 0;
const QUERY_STREAM: u64 = 1;
const ROW_STREAM_BASE: u64 = 16;

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn check_shape(n: usize, d: usize) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::config(format!(
            "shape must be positive, got {n}x{d}"
        )));
    }
    Ok(())
}

/// Atoms of the `NORMAL_CUSTOM` family: row `i` has a latent mean
/// `theta_i ~ N(0, 1)` and entries `N(theta_i, 1)`.
pub fn gen_normal_custom(n: usize, d: usize, seed: u64) -> Result<Matrix> {
    check_shape(n, d)?;
    let mut params = stream(seed, PARAM_STREAM);
    let thetas: Vec<f64> = (0..n).map(|_| normal(&mut params)).collect();
    let mut data = Vec::with_capacity(n * d);
    for (i, theta) in thetas.iter().enumerate() {
        let mut rng = stream(seed, ROW_STREAM_BASE + i as u64);
        data.extend((0..d).map(|_| theta + normal(&mut rng)));
    }
    Matrix::new(n, d, data)
}

/// `NORMAL_CUSTOM` query and atoms; the query is drawn the same way as an
/// atom, with its own latent mean.
pub fn normal_custom_instance(n: usize, d: usize, seed: u64) -> Result<(Vec<f64>, Matrix)> {
    let atoms = gen_normal_custom(n, d, seed)?;
    let mut rng = stream(seed, QUERY_STREAM);
    let theta = normal(&mut rng);
    let q = (0..d).map(|_| theta + normal(&mut rng)).collect();
    Ok((q, atoms))
}

/// `CORRELATED_NORMAL_CUSTOM`: query entries `N(theta, 1)`, atom `i` is
/// `w_i * q` plus `N(0, noise_std^2)` noise with `w_i ~ N(0, 1)`.
pub fn correlated_normal_custom(
    n: usize,
    d: usize,
    seed: u64,
    noise_std: f64,
) -> Result<(Vec<f64>, Matrix, Vec<f64>)> {
    check_shape(n, d)?;
    let mut qrng = stream(seed, QUERY_STREAM);
    let theta = normal(&mut qrng);
    let q: Vec<f64> = (0..d).map(|_| theta + normal(&mut qrng)).collect();
    let mut params = stream(seed, PARAM_STREAM);
    let weights: Vec<f64> = (0..n).map(|_| normal(&mut params)).collect();
    let mut data = Vec::with_capacity(n * d);
    for (i, w) in weights.iter().enumerate() {
        let mut rng = stream(seed, ROW_STREAM_BASE + i as u64);
        data.extend(q.iter().map(|qj| w * qj + noise_std * normal(&mut rng)));
    }
    Ok((q, Matrix::new(n, d, data)?, weights))
}

/// `SymmetricNormal`: query and atoms all i.i.d. standard normal.
pub fn symmetric_normal(n: usize, d: usize, seed: u64) -> Result<(Vec<f64>, Matrix)> {
    check_shape(n, d)?;
    let mut qrng = stream(seed, QUERY_STREAM);
    let q = (0..d).map(|_| normal(&mut qrng)).collect();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let mut rng = stream(seed, ROW_STREAM_BASE + i as u64);
        data.extend((0..d).map(|_| normal(&mut rng)));
    }
    Ok((q, Matrix::new(n, d, data)?))
}

/// Isotropic unit-variance blobs whose centers sit on a grid with spacing
/// 10. Points are dealt to blobs round-robin; returns points and blob ids.
pub fn gaussian_blobs(n: usize, k: usize, dim: usize, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    check_shape(n, dim)?;
    if k == 0 {
        return Err(Error::config("blob count must be positive"));
    }
    let per_axis = (1..)
        .find(|s: &usize| s.checked_pow(dim as u32).is_none_or(|p| p >= k))
        .unwrap_or(k);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mut rest = c;
            (0..dim)
                .map(|_| {
                    let coord = rest % per_axis;
                    rest /= per_axis;
                    10.0 * coord as f64
                })
                .collect()
        })
        .collect();
    let mut rng = stream(seed, PARAM_STREAM);
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        labels.push(c);
        data.extend(centers[c].iter().map(|m| m + normal(&mut rng)));
    }
    Ok((Matrix::new(n, dim, data)?, labels))
}

/// Random linear model: features `U[0, 1]`, target `x . coef + N(0, noise^2)`.
pub fn linear_regression(
    n: usize,
    coef: &[f64],
    noise_std: f64,
    seed: u64,
) -> Result<(Matrix, Vec<f64>)> {
    let m = coef.len();
    check_shape(n, m)?;
    let mut rng = stream(seed, PARAM_STREAM);
    let mut data = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = data.len();
        data.extend((0..m).map(|_| rng.random::<f64>()));
        let row = &data[start..];
        let signal: f64 = row.iter().zip(coef).map(|(x, c)| x * c).sum();
        y.push(signal + noise_std * normal(&mut rng));
    }
    Ok((Matrix::new(n, m, data)?, y))
}

/// Binary labels driven by a step on feature 0: features `U[0, 1]`,
/// label `1[x_0 >= cut]`, each label flipped with probability `flip`.
pub fn step_classification(
    n: usize,
    m: usize,
    cut: f64,
    flip: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    check_shape(n, m)?;
    let mut rng = stream(seed, PARAM_STREAM);
    let mut data = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = data.len();
        data.extend((0..m).map(|_| rng.random::<f64>()));
        let mut label = usize::from(data[start] >= cut);
        if rng.random::<f64>() < flip {
            label = 1 - label;
        }
        y.push(label);
    }
    Ok((Matrix::new(n, m, data)?, y))
}

/// Classification with a few informative features: each class gets a
/// centroid on the vertices of a hypercube of side `2 * class_sep` in the
/// informative subspace; the remaining features are standard normal noise.
/// Informative features occupy the first `n_informative` columns.
pub fn informative_classification(
    n: usize,
    m: usize,
    n_informative: usize,
    n_classes: usize,
    class_sep: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    check_shape(n, m)?;
    if n_informative == 0 || n_informative > m || n_classes < 2 {
        return Err(Error::config(
            "need 1 <= n_informative <= m and n_classes >= 2",
        ));
    }
    if n_informative < 64 && (1usize << n_informative) < n_classes {
        return Err(Error::config(
            "too few informative features for the class count",
        ));
    }
    let mut rng = stream(seed, PARAM_STREAM);
    let centroids: Vec<Vec<f64>> = (0..n_classes)
        .map(|c| {
            (0..n_informative)
                .map(|b| {
                    if (c >> b) & 1 == 1 {
                        class_sep
                    } else {
                        -class_sep
                    }
                })
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % n_classes;
        y.push(c);
        for j in 0..m {
            let base = if j < n_informative {
                centroids[c][j]
            } else {
                0.0
            };
            data.push(base + normal(&mut rng));
        }
    }
    Ok((Matrix::new(n, m, data)?, y))
}

/// Classification with unequally informative features: `2^s` classes for
/// `s = seps.len()`, class `c` centered at `+-seps[j]` on feature `j` by bit
/// `j` of `c`, remaining features standard normal noise. Distinct
/// separations give each node a clearly best feature.
pub fn separated_classification(
    n: usize,
    m: usize,
    seps: &[f64],
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    check_shape(n, m)?;
    if seps.is_empty() || seps.len() > m || seps.len() > 16 {
        return Err(Error::config("need 1 <= seps.len() <= min(m, 16)"));
    }
    let n_classes = 1usize << seps.len();
    let mut rng = stream(seed, PARAM_STREAM);
    let mut data = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % n_classes;
        y.push(c);
        for j in 0..m {
            let base = match seps.get(j) {
                Some(s) if (c >> j) & 1 == 1 => *s,
                Some(s) => -s,
                None => 0.0,
            };
            data.push(base + normal(&mut rng));
        }
    }
    Ok((Matrix::new(n, m, data)?, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    NormalCustom,
    CorrelatedNormalCustom,
    SymmetricNormal,
    GaussianBlobs,
    SimpleSong,
    StepClassification,
    SeparatedClassification,
    LinearRegression,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 8] = [
        Self::NormalCustom,
        Self::CorrelatedNormalCustom,
        Self::SymmetricNormal,
        Self::GaussianBlobs,
        Self::SimpleSong,
        Self::StepClassification,
        Self::SeparatedClassification,
        Self::LinearRegression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::NormalCustom => "normal_custom",
            Self::CorrelatedNormalCustom => "correlated_normal_custom",
            Self::SymmetricNormal => "symmetric_normal",
            Self::GaussianBlobs => "gaussian_blobs",
            Self::SimpleSong => "simple_song",
            Self::StepClassification => "step_classification",
            Self::SeparatedClassification => "separated_classification",
            Self::LinearRegression => "linear_regression",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::Unknown {
                kind: "generator",
                name: s.to_owned(),
            })
    }
}

/// Separations used by the `separated_classification` kind.
pub const DEFAULT_SEPARATIONS: [f64; 3] = [4.0, 3.0, 2.5];

/// Coefficients `1, 3, 5, 7, 9` on the first five features (fewer if `m < 5`),
/// zero elsewhere.
pub fn sparse_coefficients(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| if j < 5 { 1.0 + 2.0 * j as f64 } else { 0.0 })
        .collect()
}

/// A generator addressed by name. For `gaussian_blobs` `d` is the point
/// dimension and `k` the blob count; for `simple_song` `n` is the number of
/// A/B repetitions `t`; for the tabular kinds `d` is the feature count.
/// `step_classification` cuts feature 0 at 0.5 with 10% label noise;
/// `separated_classification` uses [`DEFAULT_SEPARATIONS`];
/// `linear_regression` uses [`sparse_coefficients`] with unit noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub d: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    pub seed: u64,
}

fn default_k() -> usize {
    3
}

#[derive(Debug, Clone)]
pub enum GeneratedData {
    Mips { query: Vec<f64>, atoms: Matrix },
    Points { points: Matrix, labels: Vec<usize> },
    Song(SimpleSong),
    Regression { x: Matrix, y: Vec<f64> },
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<GeneratedData> {
        Ok(match self.kind {
            GeneratorKind::NormalCustom => {
                let (query, atoms) = normal_custom_instance(self.n, self.d, self.seed)?;
                GeneratedData::Mips { query, atoms }
            }
            GeneratorKind::CorrelatedNormalCustom => {
                let (query, atoms, _) = correlated_normal_custom(self.n, self.d, self.seed, 1.0)?;
                GeneratedData::Mips { query, atoms }
            }
            GeneratorKind::SymmetricNormal => {
                let (query, atoms) = symmetric_normal(self.n, self.d, self.seed)?;
                GeneratedData::Mips { query, atoms }
            }
            GeneratorKind::GaussianBlobs => {
                let (points, labels) = gaussian_blobs(self.n, self.k, self.d, self.seed)?;
                GeneratedData::Points { points, labels }
            }
            GeneratorKind::SimpleSong => {
                GeneratedData::Song(gen_simple_song(self.n, &SongConfig::reduced())?)
            }
            GeneratorKind::StepClassification => {
                let (points, labels) = step_classification(self.n, self.d, 0.5, 0.1, self.seed)?;
                GeneratedData::Points { points, labels }
            }
            GeneratorKind::SeparatedClassification => {
                let s = &DEFAULT_SEPARATIONS[..DEFAULT_SEPARATIONS.len().min(self.d)];
                let (points, labels) = separated_classification(self.n, self.d, s, self.seed)?;
                GeneratedData::Points { points, labels }
            }
            GeneratorKind::LinearRegression => {
                let coef = sparse_coefficients(self.d);
                let (x, y) = linear_regression(self.n, &coef, 1.0, self.seed)?;
                GeneratedData::Regression { x, y }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        assert_eq!(
            gen_normal_custom(5, 7, 3).unwrap(),
            gen_normal_custom(5, 7, 3).unwrap()
        );
        assert_ne!(
            gen_normal_custom(5, 7, 3).unwrap(),
            gen_normal_custom(5, 7, 4).unwrap()
        );
        assert_eq!(
            symmetric_normal(3, 4, 1).unwrap(),
            symmetric_normal(3, 4, 1).unwrap()
        );
        let a = correlated_normal_custom(3, 4, 9, 1.0).unwrap();
        let b = correlated_normal_custom(3, 4, 9, 1.0).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn latent_means_do_not_depend_on_dimension() {
        let small = gen_normal_custom(4, 10, 5).unwrap();
        let large = gen_normal_custom(4, 20, 5).unwrap();
        for i in 0..4 {
            assert_eq!(small.row(i), &large.row(i)[..10]);
        }
    }

    #[test]
    fn zero_noise_atoms_are_scaled_queries() {
        let (q, atoms, w) = correlated_normal_custom(6, 50, 2, 0.0).unwrap();
        for i in 0..6 {
            for j in 0..50 {
                assert_eq!(atoms.get(i, j), w[i] * q[j]);
            }
        }
    }

    #[test]
    fn blobs_are_balanced_and_separated() {
        let (pts, labels) = gaussian_blobs(60, 3, 2, 1).unwrap();
        assert_eq!(pts.rows(), 60);
        for c in 0..3 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 20);
        }
    }

    #[test]
    fn rejects_empty_shapes() {
        assert!(gen_normal_custom(0, 3, 1).is_err());
        assert!(symmetric_normal(3, 0, 1).is_err());
        assert!("nope".parse::<GeneratorKind>().is_err());
        assert_eq!(
            "NORMAL_CUSTOM".parse::<GeneratorKind>().unwrap(),
            GeneratorKind::NormalCustom
        );
    }
}
