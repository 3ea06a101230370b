//! Gap checkers for the entropic and Fisher-information inequalities.
//!
//! Every checker evaluates both sides of one inequality (or identity) on a
//! concrete instance and returns an [`InequalityReport`]. A checker sets up a
//! small plan of per-law functionals; Gaussian laws are evaluated in closed
//! form, everything else by seeded Monte-Carlo. The standard error of the gap
//! comes from a delta-method propagation over the joint means, so sides that
//! share draws are correctly correlated.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    self, conditional_entropy_moments, entropy_moments, fisher_matrix_moments, fisher_moments, gaussian_entropy,
    gaussian_fisher, mc_moments, projective_fisher_moments, random_direction, unpack_symmetric, Moments,
};
use crate::matrix::{self, SpdMatrix};
use crate::mixture::{GaussianMixture, MarkovTriple};
use crate::rng::{stream_rng, StreamRng};
use crate::TWO_PI_E;

/// Relative width of the standard error above which a verdict is withheld.
pub const INCONCLUSIVE_FRACTION: f64 = 0.1;

/// Number of points in the λ grid of the Bonnesen equality check.
pub const BONNESEN_GRID: usize = 21;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub samples: usize,
    pub seed: u64,
    pub z: f64,
    /// Tolerance below zero tolerated before a gap counts as violated,
    /// relative to `max(|lhs|, |rhs|)`.
    pub abs_tol: f64,
    /// Equality band, relative to `max(|lhs|, |rhs|)`.
    pub eq_tol: f64,
    pub instance_id: String,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            samples: estimators::DEFAULT_SAMPLES,
            seed: 42,
            z: 3.0,
            abs_tol: 1e-9,
            eq_tol: 1e-10,
            instance_id: "0".into(),
        }
    }
}

impl CheckConfig {
    pub fn with_instance(&self, id: impl Into<String>) -> Self {
        Self {
            instance_id: id.into(),
            ..self.clone()
        }
    }

    pub fn with_samples(&self, samples: usize) -> Self {
        Self {
            samples,
            ..self.clone()
        }
    }

    /// Stream for `role` inside check `check` on this instance.
    pub fn rng(&self, check: &str, role: &str) -> StreamRng {
        stream_rng(self.seed, &[check, &self.instance_id, role])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z > 0.0 && self.z.is_finite()) {
            return Err(Error::Config(format!("z = {} must be positive", self.z)));
        }
        if !(self.abs_tol >= 0.0 && self.eq_tol >= 0.0) {
            return Err(Error::Config("tolerances must be nonnegative".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    EqualityConsistent,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::EqualityConsistent => "equality_consistent",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub check_name: String,
    pub instance_id: String,
    pub dim: usize,
    pub lambda: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub stderr: f64,
    pub verdict: Verdict,
    pub seed: u64,
    pub wall_ms: f64,
}

fn scale_of(lhs: f64, rhs: f64) -> f64 {
    let s = lhs.abs().max(rhs.abs());
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Verdict for an inequality `lhs ≥ rhs`. `slack` widens the equality band
/// (for instance by a discretisation error).
pub fn classify(lhs: f64, rhs: f64, stderr: f64, slack: f64, cfg: &CheckConfig) -> Verdict {
    let gap = lhs - rhs;
    if !(gap.is_finite() && stderr.is_finite()) {
        return Verdict::Inconclusive;
    }
    let scale = scale_of(lhs, rhs);
    let noise = cfg.z * stderr;
    if gap < -(cfg.abs_tol * scale + noise) {
        return Verdict::Violated;
    }
    if stderr > INCONCLUSIVE_FRACTION * lhs.abs().max(rhs.abs()) {
        return Verdict::Inconclusive;
    }
    if gap.abs() <= cfg.eq_tol * scale + slack + noise {
        return Verdict::EqualityConsistent;
    }
    Verdict::Holds
}

/// Verdict for an identity `lhs = rhs`: any mismatch outside the band is a
/// violation.
pub fn classify_identity(lhs: f64, rhs: f64, stderr: f64, slack: f64, cfg: &CheckConfig) -> Verdict {
    let gap = lhs - rhs;
    if !(gap.is_finite() && stderr.is_finite()) {
        return Verdict::Inconclusive;
    }
    let scale = scale_of(lhs, rhs);
    let band = cfg.eq_tol.max(cfg.abs_tol) * scale + slack + cfg.z * stderr;
    if gap.abs() <= band {
        return Verdict::EqualityConsistent;
    }
    if stderr > INCONCLUSIVE_FRACTION * lhs.abs().max(rhs.abs()) {
        return Verdict::Inconclusive;
    }
    Verdict::Violated
}

struct Timer {
    start: Instant,
}

impl Timer {
    fn start() -> Self {
        Self { start: Instant::now() }
    }

    fn report(
        self,
        name: &str,
        cfg: &CheckConfig,
        dim: usize,
        lambda: Option<f64>,
        sides: Sides,
        verdict: Verdict,
    ) -> InequalityReport {
        InequalityReport {
            check_name: name.to_string(),
            instance_id: cfg.instance_id.clone(),
            dim,
            lambda,
            lhs: sides.lhs,
            rhs: sides.rhs,
            gap: sides.lhs - sides.rhs,
            stderr: sides.stderr,
            verdict,
            seed: cfg.seed,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Sides {
    lhs: f64,
    rhs: f64,
    stderr: f64,
}

fn sides<L, R>(mom: &Moments, lhs: L, rhs: R) -> Sides
where
    L: Fn(&[f64]) -> f64,
    R: Fn(&[f64]) -> f64,
{
    let v = mom.means();
    let (_, stderr) = mom.propagate(|x| lhs(x) - rhs(x));
    Sides {
        lhs: lhs(v),
        rhs: rhs(v),
        stderr,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Functional {
    Entropy,
    Conditional(Vec<usize>),
    Fisher,
    Projective(Vec<f64>),
    /// Paired `[h(X), h(Xⁿ⁻¹)]`.
    EntropyPrefix,
    /// Paired `[I(X), h(X), h(Xⁿ⁻¹)]`.
    FisherEntropyPrefix,
    FisherMatrix,
}

/// The laws and functionals one check needs. Requesting the same functional
/// of the same law twice returns the same variables.
struct Plan<'a> {
    check: &'a str,
    cfg: &'a CheckConfig,
    groups: Vec<(Functional, GaussianMixture, Moments)>,
}

impl<'a> Plan<'a> {
    fn new(check: &'a str, cfg: &'a CheckConfig) -> Self {
        Self {
            check,
            cfg,
            groups: Vec::new(),
        }
    }

    /// Index of the first variable of `f(law)` in [`Plan::moments`].
    fn add(&mut self, f: Functional, law: &GaussianMixture) -> Result<usize> {
        let mut offset = 0;
        for (g, l, m) in &self.groups {
            if *g == f && l == law {
                return Ok(offset);
            }
            offset += m.len();
        }
        let role = format!("law{}", self.groups.len());
        let mut rng = self.cfg.rng(self.check, &role);
        let m = self.cfg.samples;
        let mom = match &f {
            Functional::Entropy => entropy_moments(law, m, &mut rng)?,
            Functional::Conditional(target) => conditional_entropy_moments(law, target, m, &mut rng)?,
            Functional::Fisher => fisher_moments(law, m, &mut rng)?,
            Functional::Projective(u) => projective_fisher_moments(law, u, m, &mut rng)?,
            Functional::EntropyPrefix => entropy_prefix_moments(law, false, m, &mut rng)?,
            Functional::FisherEntropyPrefix => entropy_prefix_moments(law, true, m, &mut rng)?,
            Functional::FisherMatrix => fisher_matrix_moments(law, m, &mut rng)?,
        };
        self.groups.push((f, law.clone(), mom));
        Ok(offset)
    }

    fn moments(&self) -> Moments {
        let parts: Vec<Moments> = self.groups.iter().map(|(_, _, m)| m.clone()).collect();
        Moments::join(&parts)
    }
}

fn entropy_prefix_moments<R: Rng + ?Sized>(
    gm: &GaussianMixture,
    with_fisher: bool,
    m: usize,
    rng: &mut R,
) -> Result<Moments> {
    let n = require_dim2(gm)?;
    let prefix = gm.prefix_marginal()?;
    if let (Some(g), Some(p)) = (gm.as_gaussian(), prefix.as_gaussian()) {
        let mut v = Vec::with_capacity(3);
        if with_fisher {
            v.push(gaussian_fisher(g).value);
        }
        v.push(gaussian_entropy(g).value);
        v.push(gaussian_entropy(p).value);
        return Ok(Moments::exact(v));
    }
    estimators::require_samples(m)?;
    let mut ev = gm.evaluator();
    let mut ev_prefix = prefix.evaluator();
    let mut s = vec![0.0; n];
    let k = if with_fisher { 3 } else { 2 };
    Ok(mc_moments(gm, m, rng, k, |x, out| {
        if with_fisher {
            let lse = ev.score_into(x, &mut s);
            out[0] = s.iter().map(|v| v * v).sum();
            out[1] = -lse;
        } else {
            out[0] = -ev.log_density(x);
        }
        out[k - 1] = -ev_prefix.log_density(&x[..n - 1]);
    }))
}

fn require_dim2(gm: &GaussianMixture) -> Result<usize> {
    if gm.dim() < 2 {
        return Err(Error::InvalidDimension(format!(
            "this check needs dimension >= 2, got {}",
            gm.dim()
        )));
    }
    Ok(gm.dim())
}

fn same_dim(x: &GaussianMixture, y: &GaussianMixture) -> Result<usize> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(x.dim())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// Law of `√(1−λ)·X + √λ·Y`.
pub fn interpolate(x: &GaussianMixture, y: &GaussianMixture, lambda: f64) -> Result<GaussianMixture> {
    check_lambda(lambda)?;
    x.scaled_sum((1.0 - lambda).sqrt(), y, lambda.sqrt())
}

/// `N(X+Y) ≥ N(X) + N(Y)`.
pub fn check_epi(x: &GaussianMixture, y: &GaussianMixture, cfg: &CheckConfig) -> Result<InequalityReport> {
    const NAME: &str = "epi";
    let timer = Timer::start();
    let n = same_dim(x, y)?;
    let sum = x.convolve(y)?;
    let mut plan = Plan::new(NAME, cfg);
    let s = plan.add(Functional::Entropy, &sum)?;
    let a = plan.add(Functional::Entropy, x)?;
    let b = plan.add(Functional::Entropy, y)?;
    let p = 2.0 / n as f64;
    let sd = sides(
        &plan.moments(),
        |v| (p * v[s]).exp(),
        |v| (p * v[a]).exp() + (p * v[b]).exp(),
    );
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(NAME, cfg, n, None, sd, verdict))
}

/// `N(X+Y | Z) ≥ N(X | Z) + N(Y | Z)` with `N(·|Z) = exp((2/n) Σ_z p_z h(·|Z=z))`.
pub fn check_conditional_epi(t: &MarkovTriple, cfg: &CheckConfig) -> Result<InequalityReport> {
    const NAME: &str = "conditional_epi";
    let timer = Timer::start();
    let n = t.dim();
    let sums = t.sum_given_z()?;
    let mut plan = Plan::new(NAME, cfg);
    let mut idx = Vec::with_capacity(t.probs().len());
    for ((s, x), y) in sums.iter().zip(t.x_given_z()).zip(t.y_given_z()) {
        idx.push((
            plan.add(Functional::Entropy, s)?,
            plan.add(Functional::Entropy, x)?,
            plan.add(Functional::Entropy, y)?,
        ));
    }
    let probs = t.probs().to_vec();
    let p = 2.0 / n as f64;
    let power = |v: &[f64], pick: fn(&(usize, usize, usize)) -> usize| {
        (p * probs.iter().zip(&idx).map(|(w, i)| w * v[pick(i)]).sum::<f64>()).exp()
    };
    let sd = sides(
        &plan.moments(),
        |v| power(v, |i| i.0),
        |v| power(v, |i| i.1) + power(v, |i| i.2),
    );
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(NAME, cfg, n, None, sd, verdict))
}

/// `e^{2h(W_n|Wⁿ⁻¹)} ≥ e^{2h(X_n|Xⁿ⁻¹)} + e^{2h(Y_n|Yⁿ⁻¹)}` with `W = X + Y`.
pub fn check_entropic_bergstrom(
    x: &GaussianMixture,
    y: &GaussianMixture,
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    const NAME: &str = "entropic_bergstrom";
    let timer = Timer::start();
    let n = same_dim(x, y)?;
    require_dim2(x)?;
    let last = Functional::Conditional(vec![n - 1]);
    let mut plan = Plan::new(NAME, cfg);
    let s = plan.add(last.clone(), &x.convolve(y)?)?;
    let a = plan.add(last.clone(), x)?;
    let b = plan.add(last, y)?;
    let sd = sides(
        &plan.moments(),
        |v| (2.0 * v[s]).exp(),
        |v| (2.0 * v[a]).exp() + (2.0 * v[b]).exp(),
    );
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(NAME, cfg, n, None, sd, verdict))
}

/// Conditional form on `I` with `k = |I|`:
/// `e^{(2/k)h(W_I|W_{Iᶜ})} ≥ (1−λ)e^{(2/k)h(X_I|X_{Iᶜ})} + λe^{(2/k)h(Y_I|Y_{Iᶜ})}`
/// for `W = √(1−λ)X + √λY`.
fn interpolated_conditional(
    name: &str,
    x: &GaussianMixture,
    y: &GaussianMixture,
    target: &[usize],
    lambda: f64,
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    let timer = Timer::start();
    let n = same_dim(x, y)?;
    require_dim2(x)?;
    let w = interpolate(x, y, lambda)?;
    let f = Functional::Conditional(target.to_vec());
    let mut plan = Plan::new(name, cfg);
    let s = plan.add(f.clone(), &w)?;
    let a = plan.add(f.clone(), x)?;
    let b = plan.add(f, y)?;
    let p = 2.0 / target.len() as f64;
    let sd = sides(
        &plan.moments(),
        |v| (p * v[s]).exp(),
        |v| (1.0 - lambda) * (p * v[a]).exp() + lambda * (p * v[b]).exp(),
    );
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(name, cfg, n, Some(lambda), sd, verdict))
}

pub fn check_conditional_form(
    x: &GaussianMixture,
    y: &GaussianMixture,
    lambda: f64,
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    require_dim2(x)?;
    interpolated_conditional("conditional_form", x, y, &[x.dim() - 1], lambda, cfg)
}

/// Entropic Ky Fan form on the coordinate subset `subset` (0-based).
pub fn check_entropic_kyfan(
    x: &GaussianMixture,
    y: &GaussianMixture,
    subset: &[usize],
    lambda: f64,
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    interpolated_conditional("entropic_kyfan", x, y, subset, lambda, cfg)
}

/// `R(√λX + √(1−λ)Y) ≥ λR(X) + (1−λ)R(Y)` with
/// `R(X) = N(X)ⁿ / N_{n−1}(Xⁿ⁻¹)ⁿ⁻¹ = e^{2h(X_n|Xⁿ⁻¹)}`.
pub fn check_lambda_form(
    x: &GaussianMixture,
    y: &GaussianMixture,
    lambda: f64,
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    const NAME: &str = "lambda_form";
    let timer = Timer::start();
    let n = same_dim(x, y)?;
    require_dim2(x)?;
    check_lambda(lambda)?;
    let w = x.scaled_sum(lambda.sqrt(), y, (1.0 - lambda).sqrt())?;
    let f = Functional::EntropyPrefix;
    let mut plan = Plan::new(NAME, cfg);
    let s = plan.add(f.clone(), &w)?;
    let a = plan.add(f.clone(), x)?;
    let b = plan.add(f, y)?;
    let ratio = |v: &[f64], i: usize| (2.0 * (v[i] - v[i + 1])).exp();
    let sd = sides(
        &plan.moments(),
        |v| ratio(v, s),
        |v| lambda * ratio(v, a) + (1.0 - lambda) * ratio(v, b),
    );
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(NAME, cfg, n, Some(lambda), sd, verdict))
}

/// `e^{2h(√(1−λ)X+√λY)} ≥ (1−λ)e^{2h(X)} + λe^{2h(Y)}`, valid when
/// `h(Xⁿ⁻¹) = h(Yⁿ⁻¹)`.
pub fn check_entropic_bonnesen(
    x: &GaussianMixture,
    y: &GaussianMixture,
    lambda: f64,
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    const NAME: &str = "entropic_bonnesen";
    let timer = Timer::start();
    let n = same_dim(x, y)?;
    require_dim2(x)?;
    check_lambda(lambda)?;
    check_matched_prefix(x, y, cfg)?;
    let w = interpolate(x, y, lambda)?;
    let mut plan = Plan::new(NAME, cfg);
    let s = plan.add(Functional::Entropy, &w)?;
    let a = plan.add(Functional::Entropy, x)?;
    let b = plan.add(Functional::Entropy, y)?;
    let sd = sides(
        &plan.moments(),
        |v| (2.0 * v[s]).exp(),
        |v| (1.0 - lambda) * (2.0 * v[a]).exp() + lambda * (2.0 * v[b]).exp(),
    );
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(NAME, cfg, n, Some(lambda), sd, verdict))
}

fn check_matched_prefix(x: &GaussianMixture, y: &GaussianMixture, cfg: &CheckConfig) -> Result<()> {
    let px = x.prefix_marginal()?;
    let py = y.prefix_marginal()?;
    if px == py {
        return Ok(());
    }
    let hx = entropy_moments(&px, cfg.samples, &mut cfg.rng("entropic_bonnesen", "prefix_x"))?;
    let hy = entropy_moments(&py, cfg.samples, &mut cfg.rng("entropic_bonnesen", "prefix_y"))?;
    let diff = hx.mean(0) - hy.mean(0);
    let se = hx.std_error(0).hypot(hy.std_error(0));
    let allowed = cfg.eq_tol * hx.mean(0).abs().max(hy.mean(0).abs()).max(1.0) + cfg.z * se;
    if diff.abs() > allowed {
        return Err(Error::Precondition(format!(
            "h(X^(n-1)) = {} and h(Y^(n-1)) = {} differ by {:e}, more than the allowed {:e}",
            hx.mean(0),
            hy.mean(0),
            diff.abs(),
            allowed
        )));
    }
    Ok(())
}

/// Closed-form Bonnesen check of a Gaussian pair on the uniform λ grid with
/// [`BONNESEN_GRID`] points.
pub fn bonnesen_grid(a: &SpdMatrix, b: &SpdMatrix, cfg: &CheckConfig) -> Result<Vec<InequalityReport>> {
    let x = GaussianMixture::centered(a.clone());
    let y = GaussianMixture::centered(b.clone());
    (0..BONNESEN_GRID)
        .map(|j| {
            let lambda = j as f64 / (BONNESEN_GRID - 1) as f64;
            let mut r = check_entropic_bonnesen(&x, &y, lambda, cfg)?;
            r.check_name = "equality_case_bonnesen".into();
            Ok(r)
        })
        .collect()
}

/// Draws a pair from the Bonnesen equality family and summarises its grid:
/// the reported point is the one with the largest relative gap, and the
/// verdict is `equality_consistent` only if every grid point is.
pub fn check_equality_case_bonnesen(n: usize, cfg: &CheckConfig) -> Result<InequalityReport> {
    let mut rng = cfg.rng("equality_case_bonnesen", "pair");
    let (a, b) = matrix::make_bonnesen_equality_pair(n, &mut rng)?;
    Ok(summarize_grid(bonnesen_grid(&a, &b, cfg)?))
}

pub fn summarize_grid(grid: Vec<InequalityReport>) -> InequalityReport {
    let verdict = if grid.iter().all(|r| r.verdict == Verdict::EqualityConsistent) {
        Verdict::EqualityConsistent
    } else if grid.iter().any(|r| r.verdict == Verdict::Violated) {
        Verdict::Violated
    } else if grid.iter().any(|r| r.verdict == Verdict::Holds) {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    };
    let wall: f64 = grid.iter().map(|r| r.wall_ms).sum();
    let mut worst = grid
        .into_iter()
        .max_by(|p, q| {
            let rel = |r: &InequalityReport| r.gap.abs() / scale_of(r.lhs, r.rhs);
            rel(p).total_cmp(&rel(q))
        })
        .expect("grid is nonempty");
    worst.verdict = verdict;
    worst.wall_ms = wall;
    worst
}

/// `I(X)N(X) ≥ 2πe((N(Xⁿ⁻¹)/N(X))ⁿ⁻¹ + (n−1)N(X)/N(Xⁿ⁻¹))`, with
/// `N(Xⁿ⁻¹)` the entropy power in dimension `n−1`.
pub fn check_isoperimetric_sharp(x: &GaussianMixture, cfg: &CheckConfig) -> Result<InequalityReport> {
    const NAME: &str = "isoperimetric_sharp";
    let timer = Timer::start();
    let n = require_dim2(x)?;
    let mut plan = Plan::new(NAME, cfg);
    plan.add(Functional::FisherEntropyPrefix, x)?;
    let nf = n as f64;
    let powers = move |v: &[f64]| ((2.0 * v[1] / nf).exp(), (2.0 * v[2] / (nf - 1.0)).exp());
    let sd = sides(
        &plan.moments(),
        |v| v[0] * powers(v).0,
        |v| {
            let (full, prefix) = powers(v);
            TWO_PI_E * ((prefix / full).powf(nf - 1.0) + (nf - 1.0) * full / prefix)
        },
    );
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(NAME, cfg, n, None, sd, verdict))
}

/// The sharpened bound above dominates the classical `2πe·n`.
pub fn check_isoperimetric_dominance(x: &GaussianMixture, cfg: &CheckConfig) -> Result<InequalityReport> {
    const NAME: &str = "isoperimetric_dominance";
    let timer = Timer::start();
    let n = require_dim2(x)?;
    let mut plan = Plan::new(NAME, cfg);
    plan.add(Functional::EntropyPrefix, x)?;
    let nf = n as f64;
    let sd = sides(
        &plan.moments(),
        |v| {
            let a = (2.0 * v[1] / (nf - 1.0) - 2.0 * v[0] / nf).exp();
            TWO_PI_E * (a.powf(nf - 1.0) + (nf - 1.0) / a)
        },
        |_| TWO_PI_E * nf,
    );
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(NAME, cfg, n, None, sd, verdict))
}

/// `d/dt h(X+√t Z) = ½ I(X+√t Z)` by a central difference in `t`.
///
/// Mixtures use common random numbers: the three smoothed laws are sampled
/// as `x + √s·w` from one set of `(x, w)` pairs.
pub fn check_de_bruijn(x: &GaussianMixture, t: f64, dt: f64, cfg: &CheckConfig) -> Result<InequalityReport> {
    const NAME: &str = "de_bruijn";
    let timer = Timer::start();
    if !(dt > 0.0 && t - dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and t - dt > 0 (t = {t}, dt = {dt})")));
    }
    let n = x.dim();
    let up = x.add_isotropic_noise(t + dt)?;
    let down = x.add_isotropic_noise(t - dt)?;
    let mid = x.add_isotropic_noise(t)?;
    let mom = match (up.as_gaussian(), down.as_gaussian(), mid.as_gaussian()) {
        (Some(u), Some(d), Some(c)) => Moments::exact(vec![
            (gaussian_entropy(u).value - gaussian_entropy(d).value) / (2.0 * dt),
            0.5 * gaussian_fisher(c).value,
        ]),
        _ => {
            estimators::require_samples(cfg.samples)?;
            let mut rng = cfg.rng(NAME, "base");
            let base = x.sample(&mut rng, cfg.samples);
            let mut noise_rng = cfg.rng(NAME, "noise");
            let (mut eu, mut ed, mut ec) = (up.evaluator(), down.evaluator(), mid.evaluator());
            let (su, sd, sc) = ((t + dt).sqrt(), (t - dt).sqrt(), t.sqrt());
            let mut w = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut score = vec![0.0; n];
            estimators::moments_over(&base, 2, |xb, out| {
                for wi in w.iter_mut() {
                    *wi = noise_rng.sample(StandardNormal);
                }
                let at = |s: f64, y: &mut [f64]| {
                    for ((yi, xi), wi) in y.iter_mut().zip(xb).zip(&w) {
                        *yi = xi + s * wi;
                    }
                };
                at(su, &mut y);
                let hu = -eu.log_density(&y);
                at(sd, &mut y);
                let hd = -ed.log_density(&y);
                at(sc, &mut y);
                ec.score_into(&y, &mut score);
                out[0] = (hu - hd) / (2.0 * dt);
                out[1] = 0.5 * score.iter().map(|v| v * v).sum::<f64>();
            })
        }
    };
    let sd = sides(&mom, |v| v[0], |v| v[1]);
    // central-difference truncation, bounded by dt²/(3t²)·rhs for Gaussians
    let slack = dt * dt / (t * t) * sd.rhs.abs();
    let verdict = classify_identity(sd.lhs, sd.rhs, sd.stderr, slack, cfg);
    Ok(timer.report(NAME, cfg, n, None, sd, verdict))
}

/// `I(X+Y)⁻¹ ≥ I(X)⁻¹ + I(Y)⁻¹`.
pub fn check_blachman_stam(x: &GaussianMixture, y: &GaussianMixture, cfg: &CheckConfig) -> Result<InequalityReport> {
    reciprocal_fisher("blachman_stam", x, y, Functional::Fisher, cfg)
}

/// `I_{P^u}(X+Y)⁻¹ ≥ I_{P^u}(X)⁻¹ + I_{P^u}(Y)⁻¹` for a unit vector `u`.
pub fn check_projective_fisher(
    x: &GaussianMixture,
    y: &GaussianMixture,
    u: &[f64],
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    estimators::check_unit(u, x.dim())?;
    reciprocal_fisher("projective_fisher", x, y, Functional::Projective(u.to_vec()), cfg)
}

fn reciprocal_fisher(
    name: &str,
    x: &GaussianMixture,
    y: &GaussianMixture,
    f: Functional,
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    let timer = Timer::start();
    let n = same_dim(x, y)?;
    let mut plan = Plan::new(name, cfg);
    let s = plan.add(f.clone(), &x.convolve(y)?)?;
    let a = plan.add(f.clone(), x)?;
    let b = plan.add(f, y)?;
    let sd = sides(&plan.moments(), |v| 1.0 / v[s], |v| 1.0 / v[a] + 1.0 / v[b]);
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(name, cfg, n, None, sd, verdict))
}

/// `Tₘ = diag(1, …, 1, 1/m)`.
pub fn tm_operator(n: usize, m: f64) -> DMatrix<f64> {
    let mut t = DMatrix::identity(n, n);
    t[(n - 1, n - 1)] = 1.0 / m;
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmPoint {
    pub m: f64,
    pub value: f64,
    pub std_error: f64,
}

/// Variables `[I(TₘX)/m² for each m…, I_{Pₙ}(X)]`, all from one set of base
/// draws pushed through `Tₘ`.
fn tm_moments(x: &GaussianMixture, m_values: &[f64], cfg: &CheckConfig) -> Result<Moments> {
    let n = require_dim2(x)?;
    if m_values.is_empty() || m_values.iter().any(|m| !(*m >= 1.0)) {
        return Err(Error::InvalidArgument("m values must be >= 1".into()));
    }
    if m_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("m values must be strictly increasing".into()));
    }
    let laws: Vec<GaussianMixture> = m_values
        .iter()
        .map(|&m| x.linear_map(&tm_operator(n, m)))
        .collect::<Result<_>>()?;
    let k = m_values.len();
    if let Some(g) = x.as_gaussian() {
        let mut v: Vec<f64> = laws
            .iter()
            .zip(m_values)
            .map(|(l, m)| gaussian_fisher(l.as_gaussian().expect("image of a Gaussian")).value / (m * m))
            .collect();
        let mut e = vec![0.0; n];
        e[n - 1] = 1.0;
        v.push(g.cov().inverse_quadratic_form(&e));
        return Ok(Moments::exact(v));
    }
    estimators::require_samples(cfg.samples)?;
    let mut rng = cfg.rng("tm_limit", "base");
    let mut evs: Vec<_> = laws.iter().map(|l| l.evaluator()).collect();
    let mut ev = x.evaluator();
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    Ok(mc_moments(x, cfg.samples, &mut rng, k + 1, |xb, out| {
        for (j, (e, m)) in evs.iter_mut().zip(m_values).enumerate() {
            y.copy_from_slice(xb);
            y[n - 1] /= m;
            e.score_into(&y, &mut s);
            out[j] = s.iter().map(|v| v * v).sum::<f64>() / (m * m);
        }
        ev.score_into(xb, &mut s);
        out[k] = s[n - 1] * s[n - 1];
    }))
}

/// The sequence `I(TₘX)/m²` with standard errors.
pub fn tm_sequence(x: &GaussianMixture, m_values: &[f64], cfg: &CheckConfig) -> Result<Vec<TmPoint>> {
    let mom = tm_moments(x, m_values, cfg)?;
    Ok(m_values
        .iter()
        .enumerate()
        .map(|(j, &m)| TmPoint {
            m,
            value: mom.mean(j),
            std_error: mom.std_error(j),
        })
        .collect())
}

/// `I(TₘX)/m² → I_{Pₙ}(X)`. The reported point is the largest `m`; its
/// deviation must sit inside the envelope `C/m²` fitted on the smaller
/// values. A sequence that is not decreasing is reported inconclusive.
pub fn check_tm_limit(x: &GaussianMixture, m_values: &[f64], cfg: &CheckConfig) -> Result<InequalityReport> {
    const NAME: &str = "tm_limit";
    let timer = Timer::start();
    let mom = tm_moments(x, m_values, cfg)?;
    let k = m_values.len();
    let limit = mom.mean(k);
    let envelope = (0..k - 1)
        .map(|j| (mom.mean(j) - limit).abs() * m_values[j] * m_values[j])
        .fold(0.0, f64::max);
    let last = k - 1;
    let sd = sides(&mom, |v| v[last], |v| v[k]);
    let monotone = (1..k).all(|j| mom.mean(j) <= mom.mean(j - 1) * (1.0 + 1e-12));
    let slack = envelope * (1.0 + 1e-6) / (m_values[last] * m_values[last]);
    let verdict = if monotone {
        classify_identity(sd.lhs, sd.rhs, sd.stderr, slack, cfg)
    } else {
        Verdict::Inconclusive
    };
    Ok(timer.report(NAME, cfg, x.dim(), None, sd, verdict))
}

/// `∫⟨u,v⟩² dσ(u) = ‖v‖²/n` by averaging over `m` uniform directions.
pub fn check_sphere_identity(v: &[f64], m: usize, cfg: &CheckConfig) -> Result<InequalityReport> {
    const NAME: &str = "sphere_identity";
    let timer = Timer::start();
    let n = v.len();
    let norm2: f64 = v.iter().map(|a| a * a).sum();
    if n == 0 || !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::InvalidArgument("v must be a nonzero finite vector".into()));
    }
    if m < 2 {
        return Err(Error::InvalidArgument("need at least 2 directions".into()));
    }
    let mut rng = cfg.rng(NAME, "directions");
    let values: Vec<f64> = (0..m)
        .map(|_| {
            let u = random_direction(n, &mut rng);
            let p: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            p * p
        })
        .collect();
    let est = estimators::ScalarEstimate::from_values(&values);
    let sd = Sides {
        lhs: est.value,
        rhs: norm2 / n as f64,
        stderr: est.std_error,
    };
    let verdict = classify_identity(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(NAME, cfg, n, None, sd, verdict))
}

/// Pieces of the Blachman–Stam recovery through projective Fisher
/// information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StamRecovery {
    /// `n · avg_u uᵀ J_X u` and `tr J_X`, with the combined standard error.
    pub sphere_average: f64,
    pub trace: f64,
    pub sphere_stderr: f64,
    /// `n · avg_u (I_u(X)⁻¹ + I_u(Y)⁻¹)⁻¹`.
    pub directional_harmonic: f64,
    /// `n · avg_u I_u(X+Y)`.
    pub directional_sum: f64,
    /// `(I(X)⁻¹ + I(Y)⁻¹)⁻¹` from the same direction averages.
    pub harmonic_of_averages: f64,
}

/// Checks `I = n∫I_{P^u}dσ` for `X` and the chain
/// `n∫I_u(X+Y) ≤ n∫(I_u(X)⁻¹+I_u(Y)⁻¹)⁻¹ ≤ ((n∫I_u(X))⁻¹+(n∫I_u(Y))⁻¹)⁻¹`.
/// The report carries the first link; a failure of the sphere identity or
/// of the second link turns the verdict into `violated`.
pub fn check_stam_recovery(
    x: &GaussianMixture,
    y: &GaussianMixture,
    m_dirs: usize,
    cfg: &CheckConfig,
) -> Result<(InequalityReport, StamRecovery)> {
    const NAME: &str = "stam_recovery";
    let timer = Timer::start();
    let n = same_dim(x, y)?;
    if m_dirs < 2 {
        return Err(Error::InvalidArgument("need at least 2 directions".into()));
    }
    let mut plan = Plan::new(NAME, cfg);
    let s = plan.add(Functional::FisherMatrix, &x.convolve(y)?)?;
    let a = plan.add(Functional::FisherMatrix, x)?;
    let b = plan.add(Functional::FisherMatrix, y)?;
    let mom = plan.moments();
    let tri = n * (n + 1) / 2;
    let mut rng = cfg.rng(NAME, "directions");
    let dirs: Vec<Vec<f64>> = (0..m_dirs).map(|_| random_direction(n, &mut rng)).collect();
    let nf = n as f64;
    let quad = |v: &[f64], at: usize, u: &[f64]| {
        let j = unpack_symmetric(n, &v[at..at + tri]);
        let mut q = 0.0;
        for r in 0..n {
            for c in 0..n {
                q += u[r] * j[r * n + c] * u[c];
            }
        }
        q
    };
    let avg = |v: &[f64], at: usize| nf * dirs.iter().map(|u| quad(v, at, u)).sum::<f64>() / m_dirs as f64;
    let harmonic = |p: f64, q: f64| 1.0 / (1.0 / p + 1.0 / q);
    let directional = |v: &[f64]| {
        nf * dirs
            .iter()
            .map(|u| harmonic(quad(v, a, u), quad(v, b, u)))
            .sum::<f64>()
            / m_dirs as f64
    };
    let trace = |v: &[f64], at: usize| {
        let j = unpack_symmetric(n, &v[at..at + tri]);
        (0..n).map(|i| j[i * n + i]).sum::<f64>()
    };

    let v = mom.means();
    let (_, se_matrix) = mom.propagate(|w| avg(w, a) - trace(w, a));
    let per_dir: Vec<f64> = dirs.iter().map(|u| nf * quad(v, a, u)).collect();
    let se_dirs = estimators::ScalarEstimate::from_values(&per_dir).std_error;
    let parts = StamRecovery {
        sphere_average: avg(v, a),
        trace: trace(v, a),
        sphere_stderr: se_matrix.hypot(se_dirs),
        directional_harmonic: directional(v),
        directional_sum: avg(v, s),
        harmonic_of_averages: harmonic(avg(v, a), avg(v, b)),
    };

    let sd = sides(&mom, directional, |w| avg(w, s));
    let mut verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    let sphere = classify_identity(parts.sphere_average, parts.trace, parts.sphere_stderr, 0.0, cfg);
    let second = classify(parts.harmonic_of_averages, parts.directional_harmonic, 0.0, 0.0, cfg);
    if sphere == Verdict::Violated || second == Verdict::Violated {
        verdict = Verdict::Violated;
    }
    Ok((timer.report(NAME, cfg, n, None, sd, verdict), parts))
}

/// Convexity step showing that the entropic Bergström inequality is
/// stronger than the EPI: with `μ = N(Xⁿ⁻¹)/(N(Xⁿ⁻¹)+N(Yⁿ⁻¹))`,
/// `μ(N(X)/μ)ⁿ + (1−μ)(N(Y)/(1−μ))ⁿ ≥ (N(X)+N(Y))ⁿ`.
pub fn check_bergstrom_implies_epi(
    x: &GaussianMixture,
    y: &GaussianMixture,
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    const NAME: &str = "bergstrom_implies_epi";
    let timer = Timer::start();
    let n = same_dim(x, y)?;
    require_dim2(x)?;
    let mut plan = Plan::new(NAME, cfg);
    let a = plan.add(Functional::EntropyPrefix, x)?;
    let b = plan.add(Functional::EntropyPrefix, y)?;
    let nf = n as f64;
    let powers = move |v: &[f64], i: usize| ((2.0 * v[i] / nf).exp(), (2.0 * v[i + 1] / (nf - 1.0)).exp());
    let sd = sides(
        &plan.moments(),
        |v| {
            let ((nx, px), (ny, py)) = (powers(v, a), powers(v, b));
            let mu = px / (px + py);
            mu * (nx / mu).powf(nf) + (1.0 - mu) * (ny / (1.0 - mu)).powf(nf)
        },
        |v| (powers(v, a).0 + powers(v, b).0).powf(nf),
    );
    let verdict = classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg);
    Ok(timer.report(NAME, cfg, n, None, sd, verdict))
}

fn matrix_report(
    name: &str,
    timer: Timer,
    dim: usize,
    lambda: Option<f64>,
    (lhs, rhs): (f64, f64),
    cfg: &CheckConfig,
) -> InequalityReport {
    let sd = Sides { lhs, rhs, stderr: 0.0 };
    let verdict = classify(lhs, rhs, 0.0, 0.0, cfg);
    timer.report(name, cfg, dim, lambda, sd, verdict)
}

/// `det(A+B)/det(A_i+B_i) ≥ det(A)/det(A_i) + det(B)/det(B_i)`.
pub fn check_bergstrom(a: &SpdMatrix, b: &SpdMatrix, i: usize, cfg: &CheckConfig) -> Result<InequalityReport> {
    let timer = Timer::start();
    let s = matrix::bergstrom_sides(a, b, i)?;
    Ok(matrix_report("bergstrom", timer, a.dim(), None, s, cfg))
}

/// Ky Fan: `(det(A+B)/det((A+B)_{n−k}))^{1/k}` superadditive.
pub fn check_kyfan(a: &SpdMatrix, b: &SpdMatrix, k: usize, cfg: &CheckConfig) -> Result<InequalityReport> {
    let timer = Timer::start();
    let s = matrix::kyfan_sides(a, b, k)?;
    Ok(matrix_report("kyfan", timer, a.dim(), None, s, cfg))
}

/// `det(λA + (1−λ)B) ≥ λ det A + (1−λ) det B` when `det(A_i) = det(B_i)`.
pub fn check_bonnesen_linear(
    a: &SpdMatrix,
    b: &SpdMatrix,
    lambda: f64,
    i: usize,
    cfg: &CheckConfig,
) -> Result<InequalityReport> {
    let timer = Timer::start();
    let s = matrix::bonnesen_linear_sides(a, b, lambda, i)?;
    Ok(matrix_report("bonnesen_linear", timer, a.dim(), Some(lambda), s, cfg))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MidpointCheck {
    pub value: f64,
    pub chord: f64,
    pub gap: f64,
    pub stderr: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub dim: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `f(λ_{j−1}) − 2f(λ_j) + f(λ_{j+1})` for interior `j`.
    pub second_differences: Vec<f64>,
    pub second_difference_std_errors: Vec<f64>,
    /// Interior grid indices whose second difference is positive beyond
    /// noise, i.e. where concavity fails.
    pub non_concave: Vec<usize>,
    pub midpoint: MidpointCheck,
}

/// Evaluates `f(λ) = R(√λX + √(1−λ)Y)` on a uniform grid of `grid` points
/// plus `λ = ½`. Exploratory: nothing here is a pass/fail criterion.
pub fn lambda_concavity_scan(
    x: &GaussianMixture,
    y: &GaussianMixture,
    grid: usize,
    cfg: &CheckConfig,
) -> Result<ScanReport> {
    const NAME: &str = "lambda_scan";
    let n = same_dim(x, y)?;
    require_dim2(x)?;
    if grid < 5 {
        return Err(Error::InvalidArgument(format!("grid must have at least 5 points, got {grid}")));
    }
    let mut lambdas: Vec<f64> = (0..grid).map(|j| j as f64 / (grid - 1) as f64).collect();
    lambdas.push(0.5);
    let laws: Vec<GaussianMixture> = lambdas
        .iter()
        .map(|&l| x.scaled_sum(l.sqrt(), y, (1.0 - l).sqrt()))
        .collect::<Result<_>>()?;
    let mom = if x.as_gaussian().is_some() && y.as_gaussian().is_some() {
        let mut rng = cfg.rng(NAME, "unused");
        let v = laws
            .iter()
            .map(|w| Ok(conditional_entropy_moments(w, &[n - 1], 0, &mut rng)?.mean(0)))
            .collect::<Result<Vec<f64>>>()?;
        Moments::exact(v)
    } else {
        estimators::require_samples(cfg.samples)?;
        let xs = x.sample(&mut cfg.rng(NAME, "x"), cfg.samples);
        let ys = y.sample(&mut cfg.rng(NAME, "y"), cfg.samples);
        let prefixes: Vec<GaussianMixture> = laws.iter().map(|w| w.prefix_marginal()).collect::<Result<_>>()?;
        let mut evs: Vec<_> = laws.iter().map(|w| w.evaluator()).collect();
        let mut evp: Vec<_> = prefixes.iter().map(|w| w.evaluator()).collect();
        let coef: Vec<(f64, f64)> = lambdas.iter().map(|l| (l.sqrt(), (1.0 - l).sqrt())).collect();
        let k = lambdas.len();
        let mut rows = vec![0.0; cfg.samples * k];
        let mut w = vec![0.0; n];
        for ((xr, yr), out) in xs.rows().zip(ys.rows()).zip(rows.chunks_exact_mut(k)) {
            for j in 0..k {
                let (a, b) = coef[j];
                for i in 0..n {
                    w[i] = a * xr[i] + b * yr[i];
                }
                out[j] = -evs[j].log_density(&w) + evp[j].log_density(&w[..n - 1]);
            }
        }
        Moments::from_rows(k, &rows)
    };
    let f = |v: &[f64], j: usize| (2.0 * v[j]).exp();
    let values: Vec<f64> = (0..grid).map(|j| f(mom.means(), j)).collect();
    let std_errors: Vec<f64> = (0..grid).map(|j| mom.propagate(|v| f(v, j)).1).collect();
    let mut second_differences = Vec::with_capacity(grid - 2);
    let mut second_se = Vec::with_capacity(grid - 2);
    let mut non_concave = Vec::new();
    for j in 1..grid - 1 {
        let (d, se) = mom.propagate(|v| f(v, j - 1) - 2.0 * f(v, j) + f(v, j + 1));
        let scale = values[j - 1].abs().max(values[j].abs()).max(values[j + 1].abs());
        if d > cfg.abs_tol * scale + cfg.z * se {
            non_concave.push(j);
        }
        second_differences.push(d);
        second_se.push(se);
    }
    let mid = grid;
    let sd = sides(&mom, |v| f(v, mid), |v| 0.5 * f(v, 0) + 0.5 * f(v, grid - 1));
    lambdas.pop();
    Ok(ScanReport {
        dim: n,
        seed: cfg.seed,
        lambdas,
        values,
        std_errors,
        second_differences,
        second_difference_std_errors: second_se,
        non_concave,
        midpoint: MidpointCheck {
            value: sd.lhs,
            chord: sd.rhs,
            gap: sd.lhs - sd.rhs,
            stderr: sd.stderr,
            verdict: classify(sd.lhs, sd.rhs, sd.stderr, 0.0, cfg),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::GaussianComponent;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m2(a: f64, b: f64, c: f64) -> SpdMatrix {
        SpdMatrix::from_row_slice(2, &[a, b, b, c]).unwrap()
    }

    fn gauss(m: SpdMatrix) -> GaussianMixture {
        GaussianMixture::centered(m)
    }

    fn worked_pair() -> (SpdMatrix, SpdMatrix) {
        (m2(2.0, 1.0, 2.0), m2(3.0, -1.0, 2.0))
    }

    fn bimodal(shift: f64) -> GaussianMixture {
        GaussianMixture::new(
            vec![0.35, 0.65],
            vec![
                GaussianComponent::new(vec![-1.0 + shift, 0.4], m2(0.8, 0.2, 0.6)).unwrap(),
                GaussianComponent::new(vec![1.1, -0.3 * shift], m2(0.5, -0.1, 0.9)).unwrap(),
            ],
        )
        .unwrap()
    }

    fn cfg() -> CheckConfig {
        CheckConfig {
            samples: 20_000,
            ..CheckConfig::default()
        }
    }

    #[test]
    fn verdict_classification() {
        let c = CheckConfig::default();
        assert_eq!(classify(2.0, 1.0, 0.0, 0.0, &c), Verdict::Holds);
        assert_eq!(classify(1.0, 1.0, 0.0, 0.0, &c), Verdict::EqualityConsistent);
        assert_eq!(classify(1.0, 1.0 + 1e-11, 0.0, 0.0, &c), Verdict::EqualityConsistent);
        assert_eq!(classify(1.0, 1.1, 0.0, 0.0, &c), Verdict::Violated);
        assert_eq!(classify(1.0, 1.1, 0.05, 0.0, &c), Verdict::EqualityConsistent);
        assert_eq!(classify(2.0, 1.0, 0.5, 0.0, &c), Verdict::Inconclusive);
        assert_eq!(classify(f64::NAN, 1.0, 0.0, 0.0, &c), Verdict::Inconclusive);
        assert_eq!(classify_identity(1.2, 1.0, 0.0, 0.0, &c), Verdict::Violated);
        assert_eq!(classify_identity(1.0, 1.0, 0.0, 0.0, &c), Verdict::EqualityConsistent);
        assert_eq!(serde_json::to_string(&Verdict::EqualityConsistent).unwrap(), "\"equality_consistent\"");
    }

    #[test]
    fn report_fields() {
        let c = CheckConfig::default().with_instance("abc");
        let r = check_epi(&GaussianMixture::standard(2), &GaussianMixture::standard(2), &c).unwrap();
        assert_eq!(r.check_name, "epi");
        assert_eq!(r.instance_id, "abc");
        assert_eq!(r.seed, 42);
        assert_eq!(r.gap, r.lhs - r.rhs);
        assert!(r.wall_ms >= 0.0);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["verdict"], "equality_consistent");
        assert!(json["lambda"].is_null());
    }

    #[test]
    fn epi_examples() {
        let c = CheckConfig::default();
        let r = check_epi(&GaussianMixture::standard(3), &GaussianMixture::standard(3), &c).unwrap();
        assert_relative_eq!(r.lhs, 2.0 * TWO_PI_E, max_relative = 1e-14);
        assert_eq!(r.verdict, Verdict::EqualityConsistent);
        assert_eq!(r.stderr, 0.0);

        let r = check_epi(&GaussianMixture::standard(2), &gauss(m2(2.0, 1.0, 2.0)), &c).unwrap();
        assert_relative_eq!(r.lhs, TWO_PI_E * 8f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(r.rhs, TWO_PI_E * (1.0 + 3f64.sqrt()), max_relative = 1e-14);
        assert_eq!(r.verdict, Verdict::Holds);

        let r = check_epi(&bimodal(0.0), &bimodal(0.5), &cfg()).unwrap();
        assert!(matches!(r.verdict, Verdict::Holds | Verdict::EqualityConsistent));
        assert!(r.stderr > 0.0);
        assert!(check_epi(&GaussianMixture::standard(2), &GaussianMixture::standard(3), &c).is_err());
    }

    #[test]
    fn conditional_epi_examples() {
        let c = CheckConfig::default();
        let x = gauss(m2(2.0, 1.0, 2.0));
        let y = GaussianMixture::standard(2);
        let t = MarkovTriple::new(vec![1.0], vec![x.clone()], vec![y.clone()]).unwrap();
        let a = check_conditional_epi(&t, &c).unwrap();
        let b = check_epi(&x, &y, &c).unwrap();
        assert_relative_eq!(a.gap, b.gap, max_relative = 1e-12);

        let covs = [m2(2.0, 1.0, 2.0), m2(1.0, 0.0, 3.0), m2(0.5, -0.2, 0.7)];
        let xs: Vec<_> = covs.iter().map(|s| gauss(s.clone())).collect();
        let ys: Vec<_> = covs.iter().map(|s| gauss(s.scaled(2.5).unwrap())).collect();
        let t = MarkovTriple::new(vec![0.2, 0.5, 0.3], xs, ys).unwrap();
        let r = check_conditional_epi(&t, &c).unwrap();
        assert_eq!(r.verdict, Verdict::EqualityConsistent, "{r:?}");
    }

    #[test]
    fn entropic_bergstrom_examples() {
        let c = CheckConfig::default();
        let (a, b) = worked_pair();
        let r = check_entropic_bergstrom(&gauss(a.clone()), &gauss(b.clone()), &c).unwrap();
        assert_relative_eq!(r.gap, TWO_PI_E * 5.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(r.gap, TWO_PI_E * matrix::kyfan_gap(&a, &b, 1).unwrap(), max_relative = 1e-12);
        assert_eq!(r.verdict, Verdict::Holds);

        let d1 = gauss(SpdMatrix::diagonal(&[1.0, 2.0, 3.0]).unwrap());
        let d2 = gauss(SpdMatrix::diagonal(&[0.5, 4.0, 1.5]).unwrap());
        assert_eq!(check_entropic_bergstrom(&d1, &d2, &c).unwrap().verdict, Verdict::EqualityConsistent);
        assert!(check_entropic_bergstrom(&GaussianMixture::standard(1), &GaussianMixture::standard(1), &c).is_err());

        let r = check_entropic_bergstrom(&bimodal(0.0), &bimodal(1.0), &cfg()).unwrap();
        assert_ne!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn conditional_form_and_equivalence() {
        let c = CheckConfig::default();
        let (a, b) = worked_pair();
        let (x, y) = (gauss(a.clone()), gauss(b.clone()));
        let r0 = check_conditional_form(&x, &y, 0.0, &c).unwrap();
        assert_eq!(r0.verdict, Verdict::EqualityConsistent);
        assert_relative_eq!(r0.lhs, TWO_PI_E * 1.5, max_relative = 1e-12);

        let half = check_conditional_form(&x, &y, 0.5, &c).unwrap();
        let mean = a.combine(0.5, &b, 0.5).unwrap();
        let expect = TWO_PI_E
            * (matrix::schur_complement_last(&mean).unwrap()
                - 0.5 * matrix::schur_complement_last(&a).unwrap()
                - 0.5 * matrix::schur_complement_last(&b).unwrap());
        assert_relative_eq!(half.gap, expect, max_relative = 1e-12);
        let full = check_entropic_bergstrom(&x, &y, &c).unwrap();
        assert_relative_eq!(half.gap, 0.5 * full.gap, max_relative = 1e-12);

        // the same relation on a mixture pair, within noise
        let cm = cfg();
        let (p, q) = (bimodal(0.0), bimodal(0.8));
        let half = check_conditional_form(&p, &q, 0.5, &cm).unwrap();
        let full = check_entropic_bergstrom(&p, &q, &cm).unwrap();
        let se = half.stderr.hypot(0.5 * full.stderr);
        assert!((half.gap - 0.5 * full.gap).abs() <= 3.0 * se, "{half:?} {full:?}");
    }

    #[test]
    fn lambda_form_examples() {
        let c = CheckConfig::default();
        let (a, b) = worked_pair();
        let (x, y) = (gauss(a.clone()), gauss(b.clone()));
        assert_eq!(check_lambda_form(&x, &y, 1.0, &c).unwrap().verdict, Verdict::EqualityConsistent);
        let half = check_lambda_form(&x, &y, 0.5, &c).unwrap();
        assert_relative_eq!(half.gap, TWO_PI_E * 5.0 / 12.0, max_relative = 1e-12);
        assert!(check_lambda_form(&x, &y, 1.5, &c).is_err());
        let r = check_lambda_form(&bimodal(0.0), &bimodal(0.3), 0.3, &cfg()).unwrap();
        assert_ne!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn entropic_kyfan_examples() {
        let c = CheckConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = matrix::random_spd(3, &mut rng, 1e2);
        let b = matrix::random_spd(3, &mut rng, 1e2);
        let (x, y) = (gauss(a.clone()), gauss(b.clone()));
        let k1 = check_entropic_kyfan(&x, &y, &[2], 0.4, &c).unwrap();
        let cf = check_conditional_form(&x, &y, 0.4, &c).unwrap();
        assert_relative_eq!(k1.gap, cf.gap, max_relative = 1e-12);

        let r = check_entropic_kyfan(&x, &y, &[1, 2], 0.5, &c).unwrap();
        assert_relative_eq!(r.gap, 0.5 * TWO_PI_E * matrix::kyfan_gap(&a, &b, 2).unwrap(), max_relative = 1e-10);
        assert_eq!(r.verdict, Verdict::Holds);
        for l in [0.0, 1.0] {
            assert_eq!(check_entropic_kyfan(&x, &y, &[0, 2], l, &c).unwrap().verdict, Verdict::EqualityConsistent);
        }
        assert!(check_entropic_kyfan(&x, &y, &[], 0.5, &c).is_err());
        assert!(check_entropic_kyfan(&x, &y, &[0, 1, 2], 0.5, &c).is_err());
        assert!(check_entropic_kyfan(&x, &y, &[3], 0.5, &c).is_err());
    }

    #[test]
    fn entropic_bonnesen_examples() {
        let c = CheckConfig::default();
        let x = GaussianMixture::standard(2);
        let y = gauss(SpdMatrix::diagonal(&[1.0, 4.0]).unwrap());
        let r = check_entropic_bonnesen(&x, &y, 0.5, &c).unwrap();
        assert_relative_eq!(r.lhs, TWO_PI_E * TWO_PI_E * 2.5, max_relative = 1e-12);
        assert_relative_eq!(r.rhs, TWO_PI_E * TWO_PI_E * 2.5, max_relative = 1e-12);
        assert_eq!(r.verdict, Verdict::EqualityConsistent);

        let g = gauss(m2(2.0, 0.3, 0.7));
        for l in [0.0, 0.3, 1.0] {
            assert_eq!(check_entropic_bonnesen(&g, &g, l, &c).unwrap().verdict, Verdict::EqualityConsistent);
        }
        // independent copies of a non-Gaussian law: equality only at the endpoints
        let p = bimodal(0.2);
        for l in [0.0, 1.0] {
            assert_eq!(check_entropic_bonnesen(&p, &p, l, &cfg()).unwrap().verdict, Verdict::EqualityConsistent);
        }
        assert_eq!(check_entropic_bonnesen(&p, &p, 0.5, &cfg()).unwrap().verdict, Verdict::Holds);
        let z = gauss(SpdMatrix::diagonal(&[2.0, 1.0]).unwrap());
        match check_entropic_bonnesen(&x, &z, 0.5, &c) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("differ")),
            other => panic!("expected precondition error, got {other:?}"),
        }
    }

    #[test]
    fn bonnesen_equality_grid() {
        for n in 2..=5 {
            let c = CheckConfig::default().with_instance(n.to_string());
            let r = check_equality_case_bonnesen(n, &c).unwrap();
            assert_eq!(r.verdict, Verdict::EqualityConsistent, "{r:?}");
            assert!(r.gap.abs() <= 1e-10 * r.lhs.abs().max(r.rhs.abs()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (a, b) = matrix::make_bonnesen_equality_pair(3, &mut rng).unwrap();
        let grid = bonnesen_grid(&a, &b, &CheckConfig::default()).unwrap();
        assert_eq!(grid.len(), BONNESEN_GRID);
        assert!(grid[0].gap.abs() <= 1e-9 * grid[0].lhs);
        let bp = matrix::perturb_last_column(&b, 0, 0.1).unwrap();
        let grid = bonnesen_grid(&a, &bp, &CheckConfig::default()).unwrap();
        assert_eq!(grid[10].lambda, Some(0.5));
        assert!(grid[10].gap > 0.0);
        assert_eq!(grid[10].verdict, Verdict::Holds);
        assert_eq!(summarize_grid(grid).verdict, Verdict::Holds);
    }

    #[test]
    fn isoperimetric_examples() {
        let c = CheckConfig::default();
        for n in 2..=4 {
            let r = check_isoperimetric_sharp(&GaussianMixture::standard(n), &c).unwrap();
            assert_relative_eq!(r.lhs, TWO_PI_E * n as f64, max_relative = 1e-12);
            assert_eq!(r.verdict, Verdict::EqualityConsistent);
            for s2 in [0.25, 4.0] {
                let mut d = vec![1.0; n];
                d[n - 1] = s2;
                let g = gauss(SpdMatrix::diagonal(&d).unwrap());
                let r = check_isoperimetric_sharp(&g, &c).unwrap();
                assert!(r.gap.abs() <= 1e-10 * r.lhs, "{r:?}");
                let dom = check_isoperimetric_dominance(&g, &c).unwrap();
                assert!(dom.gap > 0.0);
                assert_eq!(dom.verdict, Verdict::Holds);
            }
        }
        let dom = check_isoperimetric_dominance(&GaussianMixture::standard(3), &c).unwrap();
        assert_eq!(dom.verdict, Verdict::EqualityConsistent);
        let r = check_isoperimetric_sharp(&bimodal(0.0), &cfg()).unwrap();
        assert_ne!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn de_bruijn_examples() {
        let c = CheckConfig::default();
        let r = check_de_bruijn(&GaussianMixture::standard(1), 0.1, 1e-3, &c).unwrap();
        assert_relative_eq!(r.rhs, 0.5 / 1.1, max_relative = 1e-14);
        assert!((r.lhs - 1.0 / 2.2).abs() < 1e-6);
        assert_eq!(r.verdict, Verdict::EqualityConsistent);
        let r = check_de_bruijn(&gauss(m2(2.0, 1.0, 2.0)), 0.1, 1e-3, &c).unwrap();
        assert!(r.gap.abs() < 1e-6);
        let r = check_de_bruijn(&bimodal(0.0), 0.3, 1e-3, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::EqualityConsistent, "{r:?}");
        assert!(check_de_bruijn(&bimodal(0.0), 0.001, 0.01, &c).is_err());
    }

    #[test]
    fn fisher_reciprocal_examples() {
        let c = CheckConfig::default();
        let r = check_blachman_stam(&GaussianMixture::standard(3), &GaussianMixture::standard(3), &c).unwrap();
        assert_relative_eq!(r.lhs, 2.0 / 3.0, max_relative = 1e-14);
        assert_eq!(r.verdict, Verdict::EqualityConsistent);
        let one = GaussianMixture::standard(1);
        let four = gauss(SpdMatrix::diagonal(&[4.0]).unwrap());
        let r = check_blachman_stam(&one, &four, &c).unwrap();
        assert_relative_eq!(r.lhs, 5.0, max_relative = 1e-14);
        assert_eq!(r.verdict, Verdict::EqualityConsistent);

        let (a, b) = worked_pair();
        let r = check_projective_fisher(&gauss(a), &gauss(b), &[0.0, 1.0], &c).unwrap();
        assert_relative_eq!(r.lhs, 4.0, max_relative = 1e-14);
        assert_relative_eq!(r.rhs, 19.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(r.gap, 5.0 / 6.0, max_relative = 1e-12);
        let d1 = gauss(SpdMatrix::diagonal(&[1.0, 2.0]).unwrap());
        let d2 = gauss(SpdMatrix::diagonal(&[3.0, 0.5]).unwrap());
        assert_eq!(check_projective_fisher(&d1, &d2, &[0.0, 1.0], &c).unwrap().verdict, Verdict::EqualityConsistent);
        assert!(check_projective_fisher(&d1, &d2, &[1.0, 1.0], &c).is_err());

        let r = check_blachman_stam(&bimodal(0.0), &bimodal(0.5), &cfg()).unwrap();
        assert_ne!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn projective_fisher_rotation_invariance() {
        let c = CheckConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (a, b) = (matrix::random_spd(3, &mut rng, 1e2), matrix::random_spd(3, &mut rng, 1e2));
        let (x, y) = (gauss(a), gauss(b));
        let q = random_orthogonal(3, &mut rng);
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(3, 3)).norm() < 1e-12);
        let theta: Vec<f64> = q.row(2).iter().copied().collect();
        let direct = check_projective_fisher(&x, &y, &theta, &c).unwrap();
        let rotated =
            check_projective_fisher(&x.linear_map(&q).unwrap(), &y.linear_map(&q).unwrap(), &[0.0, 0.0, 1.0], &c).unwrap();
        assert!((direct.gap - rotated.gap).abs() <= 1e-9 * direct.lhs.abs().max(1.0));
    }

    #[test]
    fn tm_limit_examples() {
        let c = CheckConfig::default();
        let ms = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
        let seq = tm_sequence(&GaussianMixture::standard(3), &ms, &c).unwrap();
        for p in &seq {
            assert!((p.value - 1.0 - 2.0 / (p.m * p.m)).abs() < 1e-12);
        }
        let r = check_tm_limit(&GaussianMixture::standard(3), &ms, &c).unwrap();
        assert_eq!(r.verdict, Verdict::EqualityConsistent);
        assert!((r.gap - 2.0 / 4096.0).abs() < 1e-12);

        let r = check_tm_limit(&bimodal(0.0), &ms, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::EqualityConsistent, "{r:?}");
        let seq = tm_sequence(&bimodal(0.0), &ms, &cfg()).unwrap();
        assert!(seq.windows(2).all(|w| w[1].value < w[0].value));
        assert!(check_tm_limit(&bimodal(0.0), &[4.0, 2.0], &c).is_err());
    }

    #[test]
    fn sphere_identity_examples() {
        let c = CheckConfig::default();
        let r = check_sphere_identity(&[1.0, 0.0, 0.0], 100_000, &c).unwrap();
        assert_eq!(r.rhs, 1.0 / 3.0);
        assert_eq!(r.verdict, Verdict::EqualityConsistent);
        let s = 1.0 / 3f64.sqrt();
        let r2 = check_sphere_identity(&[s, s, s], 100_000, &c).unwrap();
        assert_relative_eq!(r2.rhs, 1.0 / 3.0, max_relative = 1e-12);
        assert_eq!(r2.verdict, Verdict::EqualityConsistent);
        let r = check_sphere_identity(&[0.0, 2.0], 100_000, &c).unwrap();
        assert_eq!(r.rhs, 2.0);
        assert!((r.lhs - 2.0).abs() < 0.02 * 2.0);
        assert!(check_sphere_identity(&[0.0, 0.0], 10, &c).is_err());
    }

    #[test]
    fn stam_recovery_examples() {
        let c = CheckConfig::default();
        let g = gauss(m2(2.0, 0.5, 1.0));
        let (r, parts) = check_stam_recovery(&g, &g, 4096, &c).unwrap();
        assert_eq!(r.verdict, Verdict::EqualityConsistent, "{r:?}");
        assert!((parts.sphere_average - parts.trace).abs() <= 3.0 * parts.sphere_stderr);
        assert!(parts.harmonic_of_averages >= parts.directional_harmonic - 1e-12);

        let (r, parts) = check_stam_recovery(&bimodal(0.0), &bimodal(0.6), 256, &cfg()).unwrap();
        assert_ne!(r.verdict, Verdict::Violated, "{r:?} {parts:?}");
    }

    #[test]
    fn bergstrom_implies_epi_examples() {
        let c = CheckConfig::default();
        let (a, b) = worked_pair();
        let r = check_bergstrom_implies_epi(&gauss(a), &gauss(b), &c).unwrap();
        assert!(r.gap >= -1e-9 * r.rhs);
        let r = check_bergstrom_implies_epi(&GaussianMixture::standard(3), &GaussianMixture::standard(3), &c).unwrap();
        assert_eq!(r.verdict, Verdict::EqualityConsistent);
    }

    #[test]
    fn concavity_scan_gaussian() {
        let (a, b) = worked_pair();
        let c = CheckConfig::default();
        let scan = lambda_concavity_scan(&gauss(a.clone()), &gauss(b.clone()), 11, &c).unwrap();
        assert_eq!(scan.lambdas.len(), 11);
        assert!(scan.non_concave.is_empty());
        assert!(scan.second_differences.iter().all(|d| *d <= 1e-9));
        assert_relative_eq!(scan.values[0], TWO_PI_E * 5.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(scan.values[10], TWO_PI_E * 1.5, max_relative = 1e-12);
        assert_ne!(scan.midpoint.verdict, Verdict::Violated);
        assert!(lambda_concavity_scan(&gauss(a), &gauss(b), 4, &c).is_err());
    }

    #[test]
    fn concavity_scan_mixture_is_reproducible() {
        let c = cfg();
        let s1 = lambda_concavity_scan(&bimodal(0.0), &bimodal(1.0), 7, &c).unwrap();
        let s2 = lambda_concavity_scan(&bimodal(0.0), &bimodal(1.0), 7, &c).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.std_errors.iter().all(|s| *s > 0.0));
        assert_ne!(s1.midpoint.verdict, Verdict::Violated);
    }
}
