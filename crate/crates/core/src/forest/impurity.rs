//! Impurity metrics, the weighted split objective and its delta-method
//! confidence radius.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before differentiating.
pub const PROB_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impurity {
    Gini,
    Entropy,
    Mse,
}

impl std::str::FromStr for Impurity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(Self::Gini),
            "entropy" => Ok(Self::Entropy),
            "mse" => Ok(Self::Mse),
            _ => Err(Error::Unknown {
                kind: "impurity",
                name: s.to_owned(),
            }),
        }
    }
}

impl Impurity {
    pub fn is_classification(self) -> bool {
        !matches!(self, Impurity::Mse)
    }
}

/// Count and raw power sums of regression targets. The third and fourth
/// powers only feed the confidence radius.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: f64,
    pub sum: f64,
    pub sumsq: f64,
    pub sum3: f64,
    pub sum4: f64,
}

impl Moments {
    pub fn push(&mut self, y: f64) {
        let y2 = y * y;
        self.n += 1.0;
        self.sum += y;
        self.sumsq += y2;
        self.sum3 += y2 * y;
        self.sum4 += y2 * y2;
    }

    pub fn add(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
        self.sum3 += other.sum3;
        self.sum4 += other.sum4;
    }

    pub fn of(ys: &[f64]) -> Self {
        let mut m = Self::default();
        ys.iter().for_each(|&y| m.push(y));
        m
    }

    pub fn minus(&self, other: &Moments) -> Moments {
        Moments {
            n: self.n - other.n,
            sum: self.sum - other.sum,
            sumsq: self.sumsq - other.sumsq,
            sum3: self.sum3 - other.sum3,
            sum4: self.sum4 - other.sum4,
        }
    }
}

/// Label summary of a set of points.
#[derive(Debug, Clone, Copy)]
pub enum Summary<'a> {
    Counts(&'a [f64]),
    Moments(Moments),
}

impl Summary<'_> {
    pub fn total(&self) -> f64 {
        match self {
            Summary::Counts(c) => c.iter().sum(),
            Summary::Moments(m) => m.n,
        }
    }
}

pub(crate) fn class_impurity_unchecked(metric: Impurity, counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    match metric {
        Impurity::Gini => {
            1.0 - counts
                .iter()
                .map(|c| (c / total) * (c / total))
                .sum::<f64>()
        }
        Impurity::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|c| (c / total) * (c / total).log2())
            .sum::<f64>(),
        Impurity::Mse => unreachable!("mse on class counts"),
    }
}

pub(crate) fn mse_unchecked(m: &Moments) -> f64 {
    let mean = m.sum / m.n;
    (m.sumsq / m.n - mean * mean).max(0.0)
}

/// Gini `1 - sum p_k^2`, entropy `-sum p_k log2 p_k`, or mean squared
/// deviation.
pub fn impurity(metric: Impurity, summary: Summary<'_>) -> Result<f64> {
    if !(summary.total() > 0.0) {
        return Err(Error::EmptyInput("impurity of an empty summary"));
    }
    match (metric, summary) {
        (Impurity::Mse, Summary::Moments(m)) => Ok(mse_unchecked(&m)),
        (Impurity::Gini | Impurity::Entropy, Summary::Counts(c)) => {
            Ok(class_impurity_unchecked(metric, c))
        }
        _ => Err(Error::config(format!(
            "{metric:?} does not apply to this target type"
        ))),
    }
}

/// Weighted child impurity `n_L/n I(L) + n_R/n I(R)`. An empty side gets
/// weight zero, so the result is the whole node's impurity.
pub fn split_objective(metric: Impurity, left: Summary<'_>, right: Summary<'_>) -> Result<f64> {
    let (nl, nr) = (left.total(), right.total());
    let n = nl + nr;
    if !(n > 0.0) {
        return Err(Error::EmptyInput("split of an empty node"));
    }
    let mut mu = 0.0;
    if nl > 0.0 {
        mu += nl / n * impurity(metric, left)?;
    }
    if nr > 0.0 {
        mu += nr / n * impurity(metric, right)?;
    }
    Ok(mu)
}

/// Two-sided Gaussian quantile `z` with `P(|Z| > z) = delta_step`.
pub fn z_value(delta_step: f64) -> f64 {
    if !(delta_step > 0.0) {
        return f64::INFINITY;
    }
    if delta_step >= 1.0 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(1.0 - delta_step / 2.0)
}

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Gradient of the weighted objective with respect to the `2K` cell
/// probabilities `(theta_L, theta_R)`, evaluated at clamped cells.
pub fn objective_gradient(metric: Impurity, theta_l: &[f64], theta_r: &[f64]) -> Vec<f64> {
    let mut grad = Vec::with_capacity(theta_l.len() * 2);
    for side in [theta_l, theta_r] {
        let cells: Vec<f64> = side.iter().map(|&p| clamp(p)).collect();
        let ps: f64 = cells.iter().sum();
        match metric {
            Impurity::Gini => {
                let sq = cells.iter().map(|c| c * c).sum::<f64>() / (ps * ps);
                grad.extend(cells.iter().map(|c| 1.0 - 2.0 * c / ps + sq));
            }
            Impurity::Entropy => grad.extend(cells.iter().map(|c| -(c / ps).log2())),
            Impurity::Mse => unreachable!("mse gradient is over moments"),
        }
    }
    grad
}

/// Per-sample variance `g' Sigma g` of the multinomial plug-in objective,
/// with `Sigma = diag(theta) - theta theta'`.
pub fn delta_method_variance(metric: Impurity, theta_l: &[f64], theta_r: &[f64]) -> f64 {
    let g = objective_gradient(metric, theta_l, theta_r);
    let theta = theta_l.iter().chain(theta_r).map(|&p| clamp(p));
    let (mut e2, mut e1) = (0.0, 0.0);
    for (t, gi) in theta.zip(&g) {
        e2 += t * gi * gi;
        e1 += t * gi;
    }
    (e2 - e1 * e1).max(0.0)
}

/// Confidence radius for a classification split objective estimated from
/// `n_sampled` points with cell proportions `theta_l`, `theta_r`.
pub fn split_ci(
    metric: Impurity,
    theta_l: &[f64],
    theta_r: &[f64],
    n_sampled: u64,
    delta_step: f64,
) -> f64 {
    if n_sampled == 0 {
        return f64::INFINITY;
    }
    z_value(delta_step)
        * (delta_method_variance(metric, theta_l, theta_r) / n_sampled as f64).sqrt()
}

/// Asymptotic variance of one sample's contribution to the weighted MSE
/// objective. A point on side `s` with mean `m_s` contributes
/// `(y - m_s)^2`, so the variance is `sum_s w_s E_s[(y - m_s)^4]` minus the
/// squared objective, with `w_s` the side's share.
pub fn regression_variance(left: &Moments, right: &Moments) -> f64 {
    let n = left.n + right.n;
    if !(n > 0.0) {
        return 0.0;
    }
    let (mut e2, mut e1) = (0.0, 0.0);
    for side in [left, right] {
        if !(side.n > 0.0) {
            continue;
        }
        let w = side.n / n;
        let m = side.sum / side.n;
        let (r1, r2, r3, r4) = (
            m,
            side.sumsq / side.n,
            side.sum3 / side.n,
            side.sum4 / side.n,
        );
        let m2 = m * m;
        let c2 = (r2 - m2).max(0.0);
        let c4 = (r4 - 4.0 * m * r3 + 6.0 * m2 * r2 - 4.0 * m2 * m * r1 + m2 * m2).max(0.0);
        e2 += w * c4;
        e1 += w * c2;
    }
    (e2 - e1 * e1).max(0.0)
}

pub fn regression_split_ci(
    left: &Moments,
    right: &Moments,
    n_sampled: u64,
    delta_step: f64,
) -> f64 {
    if n_sampled == 0 {
        return f64::INFINITY;
    }
    z_value(delta_step) * (regression_variance(left, right) / n_sampled as f64).sqrt()
}
