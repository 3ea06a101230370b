//! Entropy, entropy power and Fisher information of Gaussian mixtures.
//!
//! Plain Gaussians always go through closed forms. Mixtures go through
//! plug-in Monte-Carlo: draw from the law itself and average an exact
//! per-point statistic (`−ln f`, `‖∇ln f‖²`, ...). Functionals of the same
//! law are estimated from the same draws, and [`Moments`] keeps the joint
//! covariance of those averages so that error bars of derived quantities
//! (gaps, ratios, powers) come out of a delta-method propagation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::mixture::{GaussianComponent, GaussianMixture, SampleSet};

/// Smallest sample count accepted by the Monte-Carlo estimators.
pub const MIN_MC_SAMPLES: usize = 1000;

pub const DEFAULT_SAMPLES: usize = 100_000;

const JACKKNIFE_FOLDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    PlugInMc,
    Knn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub method: Method,
}

impl ScalarEstimate {
    pub fn closed_form(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            n_samples: 0,
            method: Method::ClosedForm,
        }
    }

    /// Mean and standard error of per-sample values.
    pub fn from_values(values: &[f64]) -> Self {
        let m = Moments::from_rows(1, values);
        m.estimate(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub samples: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
        }
    }
}

/// Sample means of several per-point statistics and the covariance of those
/// means.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    means: Vec<f64>,
    /// Row-major `k × k` covariance of the means.
    cov: Vec<f64>,
    n_samples: usize,
    method: Method,
}

impl Moments {
    pub fn exact(values: Vec<f64>) -> Self {
        let k = values.len();
        Self {
            means: values,
            cov: vec![0.0; k * k],
            n_samples: 0,
            method: Method::ClosedForm,
        }
    }

    /// `rows` holds `m` consecutive records of `k` statistics.
    pub fn from_rows(k: usize, rows: &[f64]) -> Self {
        assert!(k > 0 && rows.len().is_multiple_of(k) && !rows.is_empty());
        let m = rows.len() / k;
        let mut means = vec![0.0; k];
        for r in rows.chunks_exact(k) {
            for (acc, v) in means.iter_mut().zip(r) {
                *acc += v;
            }
        }
        means.iter_mut().for_each(|v| *v /= m as f64);
        let mut cov = vec![0.0; k * k];
        if m > 1 {
            let mut centred = vec![0.0; k];
            for r in rows.chunks_exact(k) {
                for i in 0..k {
                    centred[i] = r[i] - means[i];
                }
                for i in 0..k {
                    for j in i..k {
                        cov[i * k + j] += centred[i] * centred[j];
                    }
                }
            }
            let denom = ((m - 1) * m) as f64;
            for i in 0..k {
                for j in i..k {
                    cov[i * k + j] /= denom;
                    cov[j * k + i] = cov[i * k + j];
                }
            }
        }
        Self {
            means,
            cov,
            n_samples: m,
            method: Method::PlugInMc,
        }
    }

    /// Independent groups side by side (block-diagonal covariance).
    pub fn join(parts: &[Moments]) -> Self {
        let k: usize = parts.iter().map(Moments::len).sum();
        let mut means = Vec::with_capacity(k);
        let mut cov = vec![0.0; k * k];
        let mut offset = 0;
        for p in parts {
            let pk = p.len();
            means.extend_from_slice(&p.means);
            for i in 0..pk {
                for j in 0..pk {
                    cov[(offset + i) * k + offset + j] = p.cov[i * pk + j];
                }
            }
            offset += pk;
        }
        let method = if parts.iter().all(|p| p.method == Method::ClosedForm) {
            Method::ClosedForm
        } else {
            Method::PlugInMc
        };
        Self {
            means,
            cov,
            n_samples: parts.iter().map(|p| p.n_samples).max().unwrap_or(0),
            method,
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.means[i]
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.len() + j]
    }

    pub fn std_error(&self, i: usize) -> f64 {
        self.covariance(i, i).max(0.0).sqrt()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn is_exact(&self) -> bool {
        self.cov.iter().all(|c| *c == 0.0)
    }

    pub fn estimate(&self, i: usize) -> ScalarEstimate {
        ScalarEstimate {
            value: self.means[i],
            std_error: self.std_error(i),
            n_samples: self.n_samples,
            method: self.method,
        }
    }

    /// `f(means)` and its delta-method standard error, with the gradient
    /// taken by central differences.
    pub fn propagate<F: Fn(&[f64]) -> f64>(&self, f: F) -> (f64, f64) {
        let value = f(&self.means);
        let k = self.len();
        let active: Vec<usize> = (0..k).filter(|&i| self.covariance(i, i) > 0.0).collect();
        if active.is_empty() {
            return (value, 0.0);
        }
        let mut point = self.means.clone();
        let mut grad = vec![0.0; k];
        for &i in &active {
            let h = 1e-6 * self.means[i].abs().max(self.std_error(i)).max(1e-3);
            point[i] = self.means[i] + h;
            let up = f(&point);
            point[i] = self.means[i] - h;
            let dn = f(&point);
            point[i] = self.means[i];
            grad[i] = (up - dn) / (2.0 * h);
        }
        let mut var = 0.0;
        for &i in &active {
            for &j in &active {
                var += grad[i] * self.covariance(i, j) * grad[j];
            }
        }
        (value, var.max(0.0).sqrt())
    }
}

pub(crate) fn require_samples(m: usize) -> Result<()> {
    if m < MIN_MC_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "Monte-Carlo estimates need at least {MIN_MC_SAMPLES} samples, got {m}"
        )));
    }
    Ok(())
}

/// `½ (n ln(2πe) + ln det Σ)`.
pub fn gaussian_entropy(g: &GaussianComponent) -> ScalarEstimate {
    ScalarEstimate::closed_form(gaussian_entropy_value(g.dim(), g.cov().log_det()))
}

fn gaussian_entropy_value(n: usize, log_det: f64) -> f64 {
    0.5 * (n as f64 * (2.0 * PI * std::f64::consts::E).ln() + log_det)
}

/// `exp(2h/n)`, error propagated by the delta method.
pub fn entropy_power(h: &ScalarEstimate, n: usize) -> ScalarEstimate {
    let value = (2.0 * h.value / n as f64).exp();
    ScalarEstimate {
        value,
        std_error: value * (2.0 / n as f64) * h.std_error,
        n_samples: h.n_samples,
        method: h.method,
    }
}

/// `tr Σ⁻¹`.
pub fn gaussian_fisher(g: &GaussianComponent) -> ScalarEstimate {
    ScalarEstimate::closed_form(g.cov().inverse().trace())
}

/// Draws `m` points and records `k` statistics per point.
pub fn mc_moments<R, F>(gm: &GaussianMixture, m: usize, rng: &mut R, k: usize, mut stat: F) -> Moments
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &mut [f64]),
{
    let samples = gm.sample(rng, m);
    moments_over(&samples, k, &mut stat)
}

/// Records `k` statistics for each point of `samples`.
pub fn moments_over<F>(samples: &SampleSet, k: usize, mut stat: F) -> Moments
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut rows = vec![0.0; samples.len() * k];
    for (x, out) in samples.rows().zip(rows.chunks_exact_mut(k)) {
        stat(x, out);
    }
    Moments::from_rows(k, &rows)
}

/// `h(X)` as a one-statistic group: exact for a Gaussian, `−ln f` averaged
/// otherwise.
pub fn entropy_moments<R: Rng + ?Sized>(gm: &GaussianMixture, m: usize, rng: &mut R) -> Result<Moments> {
    if let Some(g) = gm.as_gaussian() {
        return Ok(Moments::exact(vec![gaussian_entropy(g).value]));
    }
    require_samples(m)?;
    let mut ev = gm.evaluator();
    Ok(mc_moments(gm, m, rng, 1, |x, out| out[0] = -ev.log_density(x)))
}

/// Plug-in estimate of `h(X) = E[−ln f(X)]`.
pub fn mc_entropy<R: Rng + ?Sized>(gm: &GaussianMixture, m: usize, rng: &mut R) -> Result<ScalarEstimate> {
    require_samples(m)?;
    let mut ev = gm.evaluator();
    Ok(mc_moments(gm, m, rng, 1, |x, out| out[0] = -ev.log_density(x)).estimate(0))
}

fn complement(dim: usize, target: &[usize]) -> Result<Vec<usize>> {
    let mut is_target = vec![false; dim];
    for &i in target {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
        if std::mem::replace(&mut is_target[i], true) {
            return Err(Error::InvalidArgument(format!("index {i} repeated")));
        }
    }
    if target.is_empty() || target.len() == dim {
        return Err(Error::InvalidArgument(
            "target coordinates must be a nonempty proper subset".into(),
        ));
    }
    Ok((0..dim).filter(|&i| !is_target[i]).collect())
}

/// `h(X_I | X_{Iᶜ}) = h(X) − h(X_{Iᶜ})` as a one-statistic group, paired on
/// the same draws.
pub fn conditional_entropy_moments<R: Rng + ?Sized>(
    gm: &GaussianMixture,
    target: &[usize],
    m: usize,
    rng: &mut R,
) -> Result<Moments> {
    let rest = complement(gm.dim(), target)?;
    let rest_law = gm.marginal(&rest)?;
    if let (Some(g), Some(r)) = (gm.as_gaussian(), rest_law.as_gaussian()) {
        let joint = gaussian_entropy(g).value;
        let marginal = gaussian_entropy(r).value;
        return Ok(Moments::exact(vec![joint - marginal]));
    }
    require_samples(m)?;
    let mut ev = gm.evaluator();
    let mut ev_rest = rest_law.evaluator();
    let mut buf = vec![0.0; rest.len()];
    Ok(mc_moments(gm, m, rng, 1, |x, out| {
        for (b, &i) in buf.iter_mut().zip(&rest) {
            *b = x[i];
        }
        out[0] = -ev.log_density(x) + ev_rest.log_density(&buf);
    }))
}

pub fn conditional_entropy<R: Rng + ?Sized>(
    gm: &GaussianMixture,
    target: &[usize],
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<ScalarEstimate> {
    Ok(conditional_entropy_moments(gm, target, cfg.samples, rng)?.estimate(0))
}

/// `h(X_n | X^{n−1})`.
pub fn conditional_entropy_last<R: Rng + ?Sized>(
    gm: &GaussianMixture,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<ScalarEstimate> {
    let n = gm.dim();
    if n < 2 {
        return Err(Error::InvalidDimension("conditional entropy needs dimension >= 2".into()));
    }
    conditional_entropy(gm, &[n - 1], cfg, rng)
}

/// `I(X)` as a one-statistic group.
pub fn fisher_moments<R: Rng + ?Sized>(gm: &GaussianMixture, m: usize, rng: &mut R) -> Result<Moments> {
    if let Some(g) = gm.as_gaussian() {
        return Ok(Moments::exact(vec![gaussian_fisher(g).value]));
    }
    require_samples(m)?;
    let mut ev = gm.evaluator();
    let mut s = vec![0.0; gm.dim()];
    Ok(mc_moments(gm, m, rng, 1, |x, out| {
        ev.score_into(x, &mut s);
        out[0] = s.iter().map(|v| v * v).sum();
    }))
}

/// Plug-in `E‖∇ ln f‖²`.
pub fn mc_fisher<R: Rng + ?Sized>(gm: &GaussianMixture, m: usize, rng: &mut R) -> Result<ScalarEstimate> {
    require_samples(m)?;
    let mut ev = gm.evaluator();
    let mut s = vec![0.0; gm.dim()];
    Ok(mc_moments(gm, m, rng, 1, |x, out| {
        ev.score_into(x, &mut s);
        out[0] = s.iter().map(|v| v * v).sum();
    })
    .estimate(0))
}

pub(crate) fn check_unit(u: &[f64], dim: usize) -> Result<()> {
    if u.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: u.len(),
        });
    }
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= 1e-12) {
        return Err(Error::NotUnitVector(norm));
    }
    Ok(())
}

/// `I_{P^u}(X) = E⟨∇ ln f, u⟩²` as a one-statistic group.
pub fn projective_fisher_moments<R: Rng + ?Sized>(
    gm: &GaussianMixture,
    u: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<Moments> {
    check_unit(u, gm.dim())?;
    if let Some(g) = gm.as_gaussian() {
        return Ok(Moments::exact(vec![g.cov().inverse_quadratic_form(u)]));
    }
    require_samples(m)?;
    let mut ev = gm.evaluator();
    let mut s = vec![0.0; gm.dim()];
    Ok(mc_moments(gm, m, rng, 1, |x, out| {
        ev.score_into(x, &mut s);
        let p: f64 = s.iter().zip(u).map(|(a, b)| a * b).sum();
        out[0] = p * p;
    }))
}

/// Closed form `uᵀΣ⁻¹u` for a Gaussian, plug-in Monte-Carlo otherwise.
pub fn projective_fisher<R: Rng + ?Sized>(
    gm: &GaussianMixture,
    u: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<ScalarEstimate> {
    Ok(projective_fisher_moments(gm, u, m, rng)?.estimate(0))
}

/// Entries `J_ij = E[∂_i ln f ∂_j ln f]` for `i ≤ j`, row by row; exact
/// `Σ⁻¹` for a Gaussian.
pub fn fisher_matrix_moments<R: Rng + ?Sized>(gm: &GaussianMixture, m: usize, rng: &mut R) -> Result<Moments> {
    let n = gm.dim();
    if let Some(g) = gm.as_gaussian() {
        let inv = g.cov().inverse();
        let mut v = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                v.push(inv[(i, j)]);
            }
        }
        return Ok(Moments::exact(v));
    }
    require_samples(m)?;
    let mut ev = gm.evaluator();
    let mut s = vec![0.0; n];
    Ok(mc_moments(gm, m, rng, n * (n + 1) / 2, |x, out| {
        ev.score_into(x, &mut s);
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                out[idx] = s[i] * s[j];
                idx += 1;
            }
        }
    }))
}

/// Unpacks the upper triangle produced by [`fisher_matrix_moments`].
pub fn unpack_symmetric(n: usize, upper: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; n * n];
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            full[i * n + j] = upper[idx];
            full[j * n + i] = upper[idx];
            idx += 1;
        }
    }
    full
}

/// `E_{X^{n−1}}[ I(law of X_n | X^{n−1}) ]`: the outer average runs over
/// prefixes drawn from the law, the inner Fisher information of each 1-D
/// conditional slice is exact for a single Gaussian slice and a
/// `m_inner`-point plug-in average otherwise.
pub fn conditional_fisher_last<R: Rng + ?Sized>(
    gm: &GaussianMixture,
    m_outer: usize,
    m_inner: usize,
    rng: &mut R,
) -> Result<ScalarEstimate> {
    if gm.dim() < 2 {
        return Err(Error::InvalidDimension("conditional Fisher information needs dimension >= 2".into()));
    }
    if m_outer < 2 || m_inner < 1 {
        return Err(Error::InvalidArgument("need m_outer >= 2 and m_inner >= 1".into()));
    }
    let conditioner = gm.last_coordinate_conditioner()?;
    let n = gm.dim();
    let outer = gm.sample(rng, m_outer);
    let mut values = Vec::with_capacity(m_outer);
    for x in outer.rows() {
        let slice = conditioner.slice(&x[..n - 1])?;
        let v = match slice.as_gaussian() {
            Some(g) => 1.0 / g.cov().get(0, 0),
            None => {
                let mut ev = slice.evaluator();
                let mut s = [0.0];
                let inner = slice.sample(rng, m_inner);
                inner
                    .rows()
                    .map(|y| {
                        ev.score_into(y, &mut s);
                        s[0] * s[0]
                    })
                    .sum::<f64>()
                    / m_inner as f64
            }
        };
        values.push(v);
    }
    Ok(ScalarEstimate::from_values(&values))
}

/// Uniform direction on the unit sphere of `ℝⁿ`.
pub fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Kozachenko–Leonenko estimate from `k`-th nearest-neighbour distances,
/// with a delete-one-fold jackknife standard error over 10 folds.
pub fn knn_entropy(samples: &SampleSet, k: usize) -> Result<ScalarEstimate> {
    let m = samples.len();
    if k == 0 || m <= k {
        return Err(Error::InvalidArgument(format!("need m > k >= 1 (m = {m}, k = {k})")));
    }
    let fold_size = m.div_ceil(JACKKNIFE_FOLDS);
    if m - fold_size <= k {
        return Err(Error::InvalidArgument(format!(
            "{m} samples are too few for a {JACKKNIFE_FOLDS}-fold jackknife with k = {k}"
        )));
    }
    let dim = samples.dim();
    let value = kozachenko_leonenko(samples.as_flat(), dim, k);
    let folds: Vec<f64> = (0..JACKKNIFE_FOLDS)
        .map(|f| {
            let kept: Vec<f64> = samples
                .rows()
                .enumerate()
                .filter(|(i, _)| i % JACKKNIFE_FOLDS != f)
                .flat_map(|(_, r)| r.iter().copied())
                .collect();
            kozachenko_leonenko(&kept, dim, k)
        })
        .collect();
    let g = JACKKNIFE_FOLDS as f64;
    let mean = folds.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * folds.iter().map(|t| (t - mean).powi(2)).sum::<f64>();
    Ok(ScalarEstimate {
        value,
        std_error: var.sqrt(),
        n_samples: m,
        method: Method::Knn,
    })
}

fn kozachenko_leonenko(points: &[f64], dim: usize, k: usize) -> f64 {
    let m = points.len() / dim;
    let mut d2 = kth_neighbor_sq_distances(points, dim, k);
    let zeros = d2.iter().filter(|d| **d == 0.0).count();
    if zeros > 0 {
        let scale = points.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor = 1e-12 * (1.0 + scale);
        log::warn!("{zeros} points have a zero k-NN distance (duplicates); flooring at {floor:e}");
        d2.iter_mut().filter(|d| **d == 0.0).for_each(|d| *d = floor * floor);
    }
    let n = dim as f64;
    let log_unit_ball = 0.5 * n * PI.ln() - ln_gamma(0.5 * n + 1.0);
    let mean_log_dist = d2.iter().map(|d| 0.5 * d.ln()).sum::<f64>() / m as f64;
    digamma(m as f64) - digamma(k as f64) + log_unit_ball + n * mean_log_dist
}

/// Squared Euclidean distance from each point to its `k`-th nearest
/// neighbour, by a sweep over points sorted on the first coordinate.
fn kth_neighbor_sq_distances(points: &[f64], dim: usize, k: usize) -> Vec<f64> {
    let m = points.len() / dim;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| points[a * dim].total_cmp(&points[b * dim]));
    let sorted: Vec<f64> = order
        .iter()
        .flat_map(|&i| points[i * dim..(i + 1) * dim].iter().copied())
        .collect();
    let mut out = vec![0.0; m];
    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    for p in 0..m {
        best.clear();
        let x = &sorted[p * dim..(p + 1) * dim];
        let visit = |q: usize, best: &mut Vec<f64>| -> bool {
            let y = &sorted[q * dim..(q + 1) * dim];
            let dx = x[0] - y[0];
            if best.len() == k && dx * dx >= best[k - 1] {
                return false;
            }
            let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() < k || d < best[k - 1] {
                let pos = best.partition_point(|v| *v <= d);
                best.insert(pos, d);
                best.truncate(k);
            }
            true
        };
        for q in (0..p).rev() {
            if !visit(q, &mut best) {
                break;
            }
        }
        for q in (p + 1)..m {
            if !visit(q, &mut best) {
                break;
            }
        }
        out[order[p]] = best[k - 1];
    }
    out
}
