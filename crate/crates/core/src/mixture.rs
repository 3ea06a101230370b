//! Finite Gaussian mixtures.
//!
//! Mixtures are the general-density family of this crate: independent sums,
//! scalar and invertible linear maps, marginals and conditionals of a
//! mixture are again mixtures, and both `ln f` and `∇ ln f` are available in
//! closed form. Objects are immutable once built; every component caches its
//! Cholesky factor and normalising constant.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SpdMatrix;

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GaussianComponent {
    mean: Vec<f64>,
    cov: SpdMatrix,
    /// Row-major lower Cholesky factor of `cov`.
    factor: Vec<f64>,
    log_norm: f64,
}

impl PartialEq for GaussianComponent {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, cov: SpdMatrix) -> Result<Self> {
        let n = cov.dim();
        if mean.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mean.len(),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("mean has non-finite entries".into()));
        }
        let lower = cov.cholesky_factor();
        let mut factor = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..=r {
                factor[r * n + c] = lower[(r, c)];
            }
        }
        let log_norm = -0.5 * (n as f64 * (2.0 * PI).ln() + cov.log_det());
        Ok(Self {
            mean,
            cov,
            factor,
            log_norm,
        })
    }

    pub fn standard(n: usize) -> Self {
        Self::new(vec![0.0; n], SpdMatrix::identity(n)).expect("standard normal is valid")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    /// `out = L⁻¹ (x − μ)`.
    #[inline]
    fn whiten(&self, x: &[f64], out: &mut [f64]) {
        let n = self.mean.len();
        for i in 0..n {
            let row = &self.factor[i * n..i * n + i + 1];
            let mut s = x[i] - self.mean[i];
            for j in 0..i {
                s -= row[j] * out[j];
            }
            out[i] = s / row[i];
        }
    }

    /// `out = L⁻ᵀ w`, so that `L⁻ᵀ L⁻¹ (x − μ) = Σ⁻¹ (x − μ)`.
    #[inline]
    #[allow(clippy::needless_range_loop)]
    fn unwhiten_transpose(&self, w: &[f64], out: &mut [f64]) {
        let n = self.mean.len();
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in (i + 1)..n {
                s -= self.factor[j * n + i] * out[j];
            }
            out[i] = s / self.factor[i * n + i];
        }
    }

    #[inline]
    fn log_density_with(&self, x: &[f64], white: &mut [f64]) -> f64 {
        self.whiten(x, white);
        let q: f64 = white.iter().map(|w| w * w).sum();
        self.log_norm - 0.5 * q
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        let mut white = vec![0.0; self.dim()];
        Ok(self.log_density_with(x, &mut white))
    }

    #[allow(clippy::needless_range_loop)]
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        let n = self.mean.len();
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let row = &self.factor[i * n..i * n + i + 1];
            out[i] = self.mean[i] + row.iter().zip(z.iter()).map(|(l, zj)| l * zj).sum::<f64>();
        }
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        let dim = components[0].dim();
        for c in &components {
            check_len(dim, c.dim())?;
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            dim,
            weights,
            log_weights,
            components,
        })
    }

    pub fn gaussian(mean: Vec<f64>, cov: SpdMatrix) -> Result<Self> {
        Self::new(vec![1.0], vec![GaussianComponent::new(mean, cov)?])
    }

    pub fn standard(n: usize) -> Self {
        Self::new(vec![1.0], vec![GaussianComponent::standard(n)]).expect("valid")
    }

    /// Centred Gaussian with covariance `cov`.
    pub fn centered(cov: SpdMatrix) -> Self {
        let n = cov.dim();
        Self::gaussian(vec![0.0; n], cov).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// The single component when the law is a plain Gaussian.
    pub fn as_gaussian(&self) -> Option<&GaussianComponent> {
        match self.components.as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator::new(self)
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim, x.len())?;
        Ok(self.evaluator().log_density(x))
    }

    /// `∇ ln f(x)`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        self.evaluator().score_into(x, &mut out);
        Ok(out)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> SampleSet {
        let n = self.dim;
        let mut data = vec![0.0; m * n];
        let mut z = vec![0.0; n];
        let cumulative: Vec<f64> = self
            .weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        for row in data.chunks_exact_mut(n) {
            let idx = if cumulative.len() == 1 {
                0
            } else {
                let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                cumulative.partition_point(|c| *c <= u).min(cumulative.len() - 1)
            };
            self.components[idx].sample_into(rng, &mut z, row);
        }
        SampleSet { dim: n, data }
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        check_len(self.dim, other.dim)?;
        let mut weights = Vec::with_capacity(self.num_components() * other.num_components());
        let mut components = Vec::with_capacity(weights.capacity());
        for (wa, a) in self.weights.iter().zip(&self.components) {
            for (wb, b) in other.weights.iter().zip(&other.components) {
                let mean = a.mean.iter().zip(&b.mean).map(|(x, y)| x + y).collect();
                components.push(GaussianComponent::new(mean, a.cov.add(&b.cov)?)?);
                weights.push(wa * wb);
            }
        }
        Self::new(weights, components)
    }

    /// Law of `s·X`.
    pub fn scale(&self, s: f64) -> Result<Self> {
        if s == 0.0 || !s.is_finite() {
            return Err(Error::DegenerateLaw(format!("scaling by {s}")));
        }
        if s == 1.0 {
            return Ok(self.clone());
        }
        let components = self
            .components
            .iter()
            .map(|c| {
                GaussianComponent::new(c.mean.iter().map(|m| m * s).collect(), c.cov.scaled(s * s)?)
            })
            .collect::<Result<_>>()?;
        Self::new(self.weights.clone(), components)
    }

    /// Law of the coordinates `keep` (0-based, in the given order).
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("marginal over an empty index set".into()));
        }
        let mut seen = vec![false; self.dim];
        for &i in keep {
            if i >= self.dim {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    dim: self.dim,
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("index {i} repeated")));
            }
        }
        let components = self
            .components
            .iter()
            .map(|c| {
                GaussianComponent::new(keep.iter().map(|&i| c.mean[i]).collect(), c.cov.submatrix(keep)?)
            })
            .collect::<Result<_>>()?;
        Self::new(self.weights.clone(), components)
    }

    /// Law of the first `dim − 1` coordinates.
    pub fn prefix_marginal(&self) -> Result<Self> {
        if self.dim < 2 {
            return Err(Error::InvalidDimension("prefix marginal needs dimension >= 2".into()));
        }
        self.marginal(&(0..self.dim - 1).collect::<Vec<_>>())
    }

    /// Law of `A X` for invertible square `A`.
    pub fn linear_map(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: if a.nrows() != self.dim { a.nrows() } else { a.ncols() },
            });
        }
        let sv = a.clone().singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if !(hi.is_finite() && lo > 1e-12 * hi) {
            return Err(Error::SingularMap);
        }
        let components = self
            .components
            .iter()
            .map(|c| {
                let mean = a * nalgebra::DVector::from_column_slice(&c.mean);
                let mut cov = a * c.cov.as_matrix() * a.transpose();
                let n = self.dim;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                        cov[(i, j)] = avg;
                        cov[(j, i)] = avg;
                    }
                }
                GaussianComponent::new(mean.iter().copied().collect(), SpdMatrix::new(cov)?)
            })
            .collect::<Result<_>>()?;
        Self::new(self.weights.clone(), components)
    }

    /// Convolution with `N(0, t·I)`.
    pub fn add_isotropic_noise(&self, t: f64) -> Result<Self> {
        if t == 0.0 {
            return Ok(self.clone());
        }
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("noise variance {t} must be positive")));
        }
        let noise = SpdMatrix::diagonal(&vec![t; self.dim])?;
        self.convolve(&Self::centered(noise))
    }

    /// Law of `a·X + b·Y` for independent `X ~ self`, `Y ~ other`; a zero
    /// coefficient drops its term.
    pub fn scaled_sum(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        check_len(self.dim, other.dim)?;
        match (a == 0.0, b == 0.0) {
            (true, true) => Err(Error::DegenerateLaw("both coefficients are zero".into())),
            (false, true) => self.scale(a),
            (true, false) => other.scale(b),
            (false, false) => self.scale(a)?.convolve(&other.scale(b)?),
        }
    }

    pub fn last_coordinate_conditioner(&self) -> Result<LastCoordinateConditioner> {
        LastCoordinateConditioner::new(self)
    }

    /// Exact law of the last coordinate given the first `dim − 1`.
    pub fn conditional_slice(&self, prefix: &[f64]) -> Result<Self> {
        self.last_coordinate_conditioner()?.slice(prefix)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureRepr {
    /// optional on input, checked against the components when present
    #[serde(default)]
    dim: Option<usize>,
    weights: Vec<f64>,
    components: Vec<ComponentRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentRepr {
    mean: Vec<f64>,
    cov: SpdMatrix,
}

impl TryFrom<MixtureRepr> for GaussianMixture {
    type Error = Error;

    fn try_from(repr: MixtureRepr) -> Result<Self> {
        let components = repr
            .components
            .into_iter()
            .map(|c| GaussianComponent::new(c.mean, c.cov))
            .collect::<Result<Vec<_>>>()?;
        let gm = Self::new(repr.weights, components)?;
        if let Some(dim) = repr.dim {
            check_len(dim, gm.dim)?;
        }
        Ok(gm)
    }
}

impl From<GaussianMixture> for MixtureRepr {
    fn from(gm: GaussianMixture) -> Self {
        Self {
            dim: Some(gm.dim),
            weights: gm.weights,
            components: gm
                .components
                .into_iter()
                .map(|c| ComponentRepr {
                    mean: c.mean,
                    cov: c.cov,
                })
                .collect(),
        }
    }
}

/// Scratch buffers for repeated density and score evaluation.
pub struct Evaluator<'a> {
    gm: &'a GaussianMixture,
    white: Vec<f64>,
    terms: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(gm: &'a GaussianMixture) -> Self {
        let (n, k) = (gm.dim, gm.num_components());
        Self {
            gm,
            white: vec![0.0; n * k],
            terms: vec![0.0; k],
            tmp: vec![0.0; n],
        }
    }

    /// Fills per-component log terms; returns their log-sum-exp.
    #[inline]
    fn fill_terms(&mut self, x: &[f64]) -> f64 {
        let n = self.gm.dim;
        let mut max = f64::NEG_INFINITY;
        for (k, c) in self.gm.components.iter().enumerate() {
            let t = self.gm.log_weights[k] + c.log_density_with(x, &mut self.white[k * n..(k + 1) * n]);
            self.terms[k] = t;
            max = max.max(t);
        }
        if self.terms.len() == 1 {
            return max;
        }
        max + self.terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    /// `ln f(x)`; `x` must have the mixture's dimension.
    #[inline]
    pub fn log_density(&mut self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.gm.dim);
        self.fill_terms(x)
    }

    /// Writes `∇ ln f(x)` into `out` and returns `ln f(x)`.
    #[inline]
    pub fn score_into(&mut self, x: &[f64], out: &mut [f64]) -> f64 {
        let n = self.gm.dim;
        debug_assert_eq!(x.len(), n);
        let lse = self.fill_terms(x);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, c) in self.gm.components.iter().enumerate() {
            let r = (self.terms[k] - lse).exp();
            if r == 0.0 {
                continue;
            }
            c.unwhiten_transpose(&self.white[k * n..(k + 1) * n], &mut self.tmp);
            for (o, p) in out.iter_mut().zip(&self.tmp) {
                *o -= r * p;
            }
        }
        lse
    }
}

/// Points stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            check_len(dim, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }
}

/// Precomputed per-component regressions of the last coordinate on the
/// others, for fast repeated slicing.
#[derive(Clone, Debug)]
pub struct LastCoordinateConditioner {
    log_weights: Vec<f64>,
    parts: Vec<SlicePart>,
}

#[derive(Clone, Debug)]
struct SlicePart {
    head: GaussianComponent,
    beta: Vec<f64>,
    mean_last: f64,
    variance: f64,
}

impl LastCoordinateConditioner {
    fn new(gm: &GaussianMixture) -> Result<Self> {
        let n = gm.dim;
        if n < 2 {
            return Err(Error::InvalidDimension("conditioning needs dimension >= 2".into()));
        }
        let head_idx: Vec<usize> = (0..n - 1).collect();
        let parts = gm
            .components
            .iter()
            .map(|c| {
                let head_cov = c.cov.submatrix(&head_idx)?;
                let v = DMatrix::from_fn(n - 1, 1, |r, _| c.cov.get(r, n - 1));
                let beta_m = head_cov.solve(&v);
                let beta: Vec<f64> = beta_m.iter().copied().collect();
                let explained: f64 = beta.iter().zip(v.iter()).map(|(b, v)| b * v).sum();
                let variance = crate::matrix::schur_complement_last(&c.cov)?;
                debug_assert!((c.cov.get(n - 1, n - 1) - explained - variance).abs() < 1e-8 * variance.max(1.0));
                Ok(SlicePart {
                    head: GaussianComponent::new(c.mean[..n - 1].to_vec(), head_cov)?,
                    beta,
                    mean_last: c.mean[n - 1],
                    variance,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            log_weights: gm.log_weights.clone(),
            parts,
        })
    }

    pub fn prefix_dim(&self) -> usize {
        self.parts[0].head.dim()
    }

    pub fn slice(&self, prefix: &[f64]) -> Result<GaussianMixture> {
        check_len(self.prefix_dim(), prefix.len())?;
        let mut white = vec![0.0; prefix.len()];
        let terms: Vec<f64> = self
            .parts
            .iter()
            .zip(&self.log_weights)
            .map(|(p, lw)| lw + p.head.log_density_with(prefix, &mut white))
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = terms.iter().map(|t| (t - max).exp()).collect();
        let mut weights = Vec::new();
        let mut components = Vec::new();
        for (p, w) in self.parts.iter().zip(&raw) {
            if *w == 0.0 {
                continue;
            }
            let shift: f64 = p
                .beta
                .iter()
                .zip(prefix.iter().zip(&p.head.mean))
                .map(|(b, (x, m))| b * (x - m))
                .sum();
            weights.push(*w);
            components.push(GaussianComponent::new(
                vec![p.mean_last + shift],
                SpdMatrix::diagonal(&[p.variance])?,
            )?);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        GaussianMixture::new(weights, components)
    }
}

/// Conditioning label `Z` over a finite set, with per-label laws of `X` and
/// `Y` that are conditionally independent given `Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TripleRepr", into = "TripleRepr")]
pub struct MarkovTriple {
    probs: Vec<f64>,
    x_given_z: Vec<GaussianMixture>,
    y_given_z: Vec<GaussianMixture>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TripleRepr {
    probs: Vec<f64>,
    x_given_z: Vec<GaussianMixture>,
    y_given_z: Vec<GaussianMixture>,
}

impl MarkovTriple {
    pub fn new(
        probs: Vec<f64>,
        x_given_z: Vec<GaussianMixture>,
        y_given_z: Vec<GaussianMixture>,
    ) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("label set is empty".into()));
        }
        check_len(probs.len(), x_given_z.len())?;
        check_len(probs.len(), y_given_z.len())?;
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidArgument("label probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "label probabilities sum to {total}, not 1"
            )));
        }
        let dim = x_given_z[0].dim();
        for gm in x_given_z.iter().chain(&y_given_z) {
            check_len(dim, gm.dim())?;
        }
        Ok(Self {
            probs,
            x_given_z,
            y_given_z,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_given_z[0].dim()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn x_given_z(&self) -> &[GaussianMixture] {
        &self.x_given_z
    }

    pub fn y_given_z(&self) -> &[GaussianMixture] {
        &self.y_given_z
    }

    /// Per-label law of `X + Y`.
    pub fn sum_given_z(&self) -> Result<Vec<GaussianMixture>> {
        self.x_given_z
            .iter()
            .zip(&self.y_given_z)
            .map(|(x, y)| x.convolve(y))
            .collect()
    }
}

impl TryFrom<TripleRepr> for MarkovTriple {
    type Error = Error;

    fn try_from(r: TripleRepr) -> Result<Self> {
        Self::new(r.probs, r.x_given_z, r.y_given_z)
    }
}

impl From<MarkovTriple> for TripleRepr {
    fn from(t: MarkovTriple) -> Self {
        Self {
            probs: t.probs,
            x_given_z: t.x_given_z,
            y_given_z: t.y_given_z,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cov2(a: f64, b: f64, c: f64) -> SpdMatrix {
        SpdMatrix::from_row_slice(2, &[a, b, b, c]).unwrap()
    }

    fn symmetric_pair() -> GaussianMixture {
        let c = SpdMatrix::identity(1);
        GaussianMixture::new(
            vec![0.5, 0.5],
            vec![
                GaussianComponent::new(vec![-1.5], c.clone()).unwrap(),
                GaussianComponent::new(vec![1.5], c).unwrap(),
            ],
        )
        .unwrap()
    }

    fn demo_mixture() -> GaussianMixture {
        GaussianMixture::new(
            vec![0.3, 0.7],
            vec![
                GaussianComponent::new(vec![1.0, -0.5], cov2(2.0, 0.4, 1.0)).unwrap(),
                GaussianComponent::new(vec![-1.0, 0.8], cov2(0.5, -0.2, 1.5)).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn standard_normal_density_at_origin() {
        let gm = GaussianMixture::standard(1);
        assert_relative_eq!(gm.log_density(&[0.0]).unwrap(), -0.5 * (2.0 * PI).ln(), epsilon = 1e-15);
    }

    #[test]
    fn symmetric_mixture_at_symmetry_point() {
        let gm = symmetric_pair();
        let single = GaussianComponent::new(vec![1.5], SpdMatrix::identity(1)).unwrap();
        let each = single.log_density(&[0.0]).unwrap();
        assert_relative_eq!(gm.log_density(&[0.0]).unwrap(), each, epsilon = 1e-14);
        assert_eq!(gm.score(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn gaussian_score() {
        let gm = GaussianMixture::standard(1);
        assert_relative_eq!(gm.score(&[2.0]).unwrap()[0], -2.0);
        let g = GaussianMixture::centered(cov2(2.0, 1.0, 2.0));
        assert_eq!(g.score(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        // −Σ⁻¹x with Σ⁻¹ = [[2,−1],[−1,2]]/3
        let s = g.score(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(s[0], -2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(s[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let gm = demo_mixture();
        assert!(matches!(gm.log_density(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(gm.score(&[0.0, 0.0, 0.0]).is_err());
        assert!(gm.convolve(&GaussianMixture::standard(3)).is_err());
        assert!(gm.marginal(&[]).is_err());
        assert!(gm.marginal(&[0, 0]).is_err());
        assert!(gm.marginal(&[2]).is_err());
        assert!(gm.conditional_slice(&[0.0, 1.0]).is_err());
        assert!(matches!(gm.scale(0.0), Err(Error::DegenerateLaw(_))));
    }

    #[test]
    fn construction_validates() {
        let c = GaussianComponent::standard(1);
        assert!(GaussianMixture::new(vec![], vec![]).is_err());
        assert!(GaussianMixture::new(vec![0.5], vec![c.clone()]).is_err());
        assert!(GaussianMixture::new(vec![1.5, -0.5], vec![c.clone(), c.clone()]).is_err());
        assert!(GaussianMixture::new(vec![0.5, 0.5], vec![c, GaussianComponent::standard(2)]).is_err());
        assert!(GaussianComponent::new(vec![0.0], SpdMatrix::identity(2)).is_err());
    }

    #[test]
    fn log_density_is_finite_far_away() {
        let gm = demo_mixture();
        for r in [1e3, 1e5, 1e6] {
            let v = gm.log_density(&[r, -r]).unwrap();
            assert!(v.is_finite() && v < 0.0, "r={r} v={v}");
            let s = gm.score(&[r, -r]).unwrap();
            assert!(s.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn score_matches_finite_differences() {
        let gm = demo_mixture();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for x in gm.sample(&mut rng, 100).rows() {
            let s = gm.score(x).unwrap();
            for i in 0..2 {
                let h = 1e-5 * (1.0 + x[i].abs());
                let mut up = x.to_vec();
                let mut dn = x.to_vec();
                up[i] += h;
                dn[i] -= h;
                let fd = (gm.log_density(&up).unwrap() - gm.log_density(&dn).unwrap()) / (2.0 * h);
                worst = worst.max((fd - s[i]).abs());
            }
        }
        assert!(worst <= 1e-5, "worst deviation {worst}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let gm = demo_mixture();
        let a = gm.sample(&mut ChaCha8Rng::seed_from_u64(4), 50);
        let b = gm.sample(&mut ChaCha8Rng::seed_from_u64(4), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mean_of_standard_normal() {
        let gm = GaussianMixture::standard(2);
        let s = gm.sample(&mut ChaCha8Rng::seed_from_u64(10), 100_000);
        for i in 0..2 {
            let mean: f64 = s.rows().map(|r| r[i]).sum::<f64>() / s.len() as f64;
            assert!(mean.abs() < 0.02, "coord {i} mean {mean}");
        }
    }

    #[test]
    fn component_frequencies_match_weights() {
        // widely separated components: the sign of the draw identifies the component
        let c = SpdMatrix::diagonal(&[0.01]).unwrap();
        let gm = GaussianMixture::new(
            vec![0.2, 0.8],
            vec![
                GaussianComponent::new(vec![-5.0], c.clone()).unwrap(),
                GaussianComponent::new(vec![5.0], c).unwrap(),
            ],
        )
        .unwrap();
        let m = 20_000;
        let s = gm.sample(&mut ChaCha8Rng::seed_from_u64(2), m);
        let left = s.rows().filter(|r| r[0] < 0.0).count() as f64 / m as f64;
        let se = (0.2f64 * 0.8 / m as f64).sqrt();
        assert!((left - 0.2).abs() <= 3.0 * se, "frequency {left}");
    }

    #[test]
    fn convolution() {
        let n01 = GaussianMixture::standard(1);
        let sum = n01.convolve(&n01).unwrap();
        assert_eq!(sum, GaussianMixture::centered(SpdMatrix::diagonal(&[2.0]).unwrap()));

        let two = symmetric_pair();
        let three = GaussianMixture::new(
            vec![0.2, 0.3, 0.5],
            vec![
                GaussianComponent::new(vec![0.0], SpdMatrix::identity(1)).unwrap(),
                GaussianComponent::new(vec![4.0], SpdMatrix::identity(1)).unwrap(),
                GaussianComponent::new(vec![-2.0], SpdMatrix::identity(1)).unwrap(),
            ],
        )
        .unwrap();
        let six = two.convolve(&three).unwrap();
        assert_eq!(six.num_components(), 6);
        assert_relative_eq!(six.weights()[1], 0.5 * 0.3);
        let mean = |g: &GaussianMixture| -> f64 {
            g.weights().iter().zip(g.components()).map(|(w, c)| w * c.mean()[0]).sum()
        };
        assert_relative_eq!(mean(&six), mean(&two) + mean(&three), epsilon = 1e-14);
    }

    #[test]
    fn scaling() {
        let gm = demo_mixture();
        assert_eq!(gm.scale(1.0).unwrap(), gm);
        let quarter = GaussianMixture::standard(1).scale(0.5).unwrap();
        assert_eq!(quarter, GaussianMixture::centered(SpdMatrix::diagonal(&[0.25]).unwrap()));
    }

    #[test]
    fn marginals() {
        let gm = demo_mixture();
        assert_eq!(gm.marginal(&[0, 1]).unwrap(), gm);
        let g = GaussianMixture::centered(cov2(2.0, 1.0, 2.0));
        assert_eq!(g.marginal(&[0]).unwrap(), GaussianMixture::centered(SpdMatrix::diagonal(&[2.0]).unwrap()));

        let other = GaussianMixture::centered(cov2(1.0, 0.3, 0.7));
        let lhs = gm.convolve(&other).unwrap().marginal(&[1]).unwrap();
        let rhs = gm.marginal(&[1]).unwrap().convolve(&other.marginal(&[1]).unwrap()).unwrap();
        assert_eq!(lhs.weights(), rhs.weights());
        for (a, b) in lhs.components().iter().zip(rhs.components()) {
            assert_relative_eq!(a.mean()[0], b.mean()[0], epsilon = 1e-15);
            assert_relative_eq!(a.cov().get(0, 0), b.cov().get(0, 0), epsilon = 1e-15);
        }
    }

    #[test]
    fn marginal_commutes_with_scaling() {
        let gm = demo_mixture();
        let a = gm.scale(-1.7).unwrap().marginal(&[1]).unwrap();
        let b = gm.marginal(&[1]).unwrap().scale(-1.7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_maps() {
        let gm = demo_mixture();
        assert_eq!(gm.linear_map(&DMatrix::identity(2, 2)).unwrap(), gm);
        let t2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        let mapped = GaussianMixture::standard(2).linear_map(&t2).unwrap();
        assert_eq!(mapped, GaussianMixture::centered(SpdMatrix::diagonal(&[1.0, 0.25]).unwrap()));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(gm.linear_map(&singular), Err(Error::SingularMap)));
        assert!(gm.linear_map(&DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn conditional_slice_examples() {
        let id = GaussianMixture::standard(3);
        assert_eq!(id.conditional_slice(&[0.7, -2.0]).unwrap(), GaussianMixture::standard(1));

        let g = GaussianMixture::centered(cov2(2.0, 1.0, 2.0));
        let s = g.conditional_slice(&[2.0]).unwrap();
        let c = s.as_gaussian().unwrap();
        assert_relative_eq!(c.mean()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(c.cov().get(0, 0), 1.5, epsilon = 1e-15);

        let s = demo_mixture().conditional_slice(&[0.3]).unwrap();
        assert_relative_eq!(s.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn slice_reconstructs_joint_density() {
        let gm = demo_mixture().convolve(&GaussianMixture::centered(cov2(0.3, 0.1, 0.2))).unwrap();
        let head = gm.prefix_marginal().unwrap();
        let conditioner = gm.last_coordinate_conditioner().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for x in gm.sample(&mut rng, 200).rows() {
            let joint = gm.log_density(x).unwrap().exp();
            let slice = conditioner.slice(&x[..1]).unwrap();
            let product = head.log_density(&x[..1]).unwrap().exp() * slice.log_density(&x[1..]).unwrap().exp();
            assert_relative_eq!(joint, product, max_relative = 1e-10);
        }
    }

    #[test]
    fn json_schema() {
        let gm = GaussianMixture::centered(cov2(2.0, 1.0, 2.0));
        let json = serde_json::to_string(&gm).unwrap();
        assert_eq!(
            json,
            r#"{"dim":2,"weights":[1.0],"components":[{"mean":[0.0,0.0],"cov":[[2.0,1.0],[1.0,2.0]]}]}"#
        );
        let back: GaussianMixture = serde_json::from_str(&json).unwrap();
        assert_eq!(back, gm);
        let wrong_dim = r#"{"dim":3,"weights":[1.0],"components":[{"mean":[0.0,0.0],"cov":[[2.0,1.0],[1.0,2.0]]}]}"#;
        assert!(serde_json::from_str::<GaussianMixture>(wrong_dim).is_err());
        let extra = r#"{"dim":1,"weights":[1.0],"components":[{"mean":[0.0],"cov":[[1.0]]}],"x":1}"#;
        assert!(serde_json::from_str::<GaussianMixture>(extra).is_err());
    }

    #[test]
    fn markov_triple_validation() {
        let x = GaussianMixture::standard(2);
        let ok = MarkovTriple::new(vec![0.4, 0.6], vec![x.clone(), x.clone()], vec![x.clone(), x.clone()]);
        assert!(ok.is_ok());
        assert_eq!(ok.unwrap().sum_given_z().unwrap().len(), 2);
        assert!(MarkovTriple::new(vec![0.4, 0.4], vec![x.clone(), x.clone()], vec![x.clone(), x.clone()]).is_err());
        assert!(MarkovTriple::new(vec![1.0], vec![x.clone()], vec![GaussianMixture::standard(3)]).is_err());
        assert!(MarkovTriple::new(vec![1.0], vec![x.clone()], vec![]).is_err());
    }
}
