//! Suite configuration, instance generation and reports.
//!
//! A suite runs every configured check on freshly generated instances. The
//! instance for `(check, dim, index)` and every random stream inside the
//! check are derived from the suite seed, so a report depends only on the
//! configuration and not on execution order.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::checks::{self, CheckConfig, InequalityReport, Verdict};
use crate::error::{Error, Result};
use crate::estimators::random_direction;
use crate::matrix::{self, SpdMatrix};
use crate::mixture::{GaussianComponent, GaussianMixture, MarkovTriple};
use crate::rng::{stream_id, stream_rng, StreamRng};

pub const REPORT_VERSION: u32 = 1;

/// Smallest mixture weight produced by the generators.
pub const MIN_WEIGHT: f64 = 0.05;

/// Condition-number cap for generated mixture covariances.
pub const MIXTURE_CONDITION_CAP: f64 = 1e2;

struct Registered {
    name: &'static str,
    min_dim: usize,
    dims: &'static [usize],
    uses_lambda: bool,
}

const fn reg(name: &'static str, min_dim: usize, dims: &'static [usize], uses_lambda: bool) -> Registered {
    Registered {
        name,
        min_dim,
        dims,
        uses_lambda,
    }
}

const REGISTRY: &[Registered] = &[
    reg("bergstrom", 2, &[2, 3, 4, 5, 6, 7, 8], false),
    reg("kyfan", 2, &[2, 3, 4, 5, 6, 7, 8], false),
    reg("bonnesen_linear", 2, &[2, 3, 4, 5], true),
    reg("epi", 1, &[1, 2, 3], false),
    reg("conditional_epi", 1, &[1, 2], false),
    reg("entropic_bergstrom", 2, &[2, 3, 4], false),
    reg("conditional_form", 2, &[2, 3], true),
    reg("lambda_form", 2, &[2, 3], true),
    reg("entropic_kyfan", 2, &[3], true),
    reg("entropic_bonnesen", 2, &[2, 3], true),
    reg("equality_case_bonnesen", 2, &[2, 3, 4, 5], false),
    reg("isoperimetric_sharp", 2, &[2, 3], false),
    reg("isoperimetric_dominance", 2, &[2, 3, 4], false),
    reg("de_bruijn", 1, &[1, 2], false),
    reg("blachman_stam", 1, &[1, 2, 3], false),
    reg("projective_fisher", 2, &[2, 3], false),
    reg("tm_limit", 2, &[2, 3], false),
    reg("sphere_identity", 1, &[2, 3, 5], false),
    reg("stam_recovery", 2, &[2, 3], false),
    reg("bergstrom_implies_epi", 2, &[2, 3], false),
];

/// Names accepted in a suite configuration.
pub fn check_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|r| r.name).collect()
}

fn lookup(name: &str) -> Result<&'static Registered> {
    REGISTRY.iter().find(|r| r.name == name).ok_or_else(|| {
        Error::Config(format!(
            "unknown check `{name}`; valid names: {}",
            check_names().join(", ")
        ))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown format `{other}` (expected json or csv)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    /// Size of the conditioned coordinate set for `entropic_kyfan`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_values: Option<Vec<f64>>,
    /// Largest number of mixture components per law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Smoothing time and step for `de_bruijn`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Direction count for `stam_recovery`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
}

impl CheckSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            dims: None,
            lambdas: None,
            subset_size: None,
            m_values: None,
            components: None,
            instances: None,
            samples: None,
            t: None,
            dt: None,
            directions: None,
        }
    }

    fn dims(&self) -> Vec<usize> {
        match &self.dims {
            Some(d) => d.clone(),
            None => lookup(&self.name).map(|r| r.dims.to_vec()).unwrap_or_default(),
        }
    }

    fn lambdas(&self) -> Vec<f64> {
        self.lambdas.clone().unwrap_or_else(|| vec![0.25, 0.5, 0.75])
    }

    fn components(&self) -> usize {
        self.components.unwrap_or(3)
    }

    fn m_values(&self) -> Vec<f64> {
        self.m_values
            .clone()
            .unwrap_or_else(|| vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub eq_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            eq_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// How the per-record `z` is adjusted for the number of records in a suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicity {
    /// Raise `z` so that the whole suite has the two-sided false-alarm
    /// level a single record has at `z`.
    #[default]
    Bonferroni,
    /// Use `z` for every record as given.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub checks: Vec<CheckSpec>,
    pub instances_per_check: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub z: f64,
    pub tolerances: Tolerances,
    pub multiplicity: Multiplicity,
    pub output: OutputSpec,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            checks: REGISTRY.iter().map(|r| CheckSpec::named(r.name)).collect(),
            instances_per_check: 20,
            mc_samples: 50_000,
            seed: 42,
            z: 3.0,
            tolerances: Tolerances::default(),
            multiplicity: Multiplicity::default(),
            output: OutputSpec::default(),
        }
    }
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Rejects unknown names and out-of-range parameters before anything runs.
    pub fn validate(&self) -> Result<()> {
        if self.checks.is_empty() {
            return Err(Error::Config("no checks configured".into()));
        }
        if self.instances_per_check == 0 || self.mc_samples == 0 {
            return Err(Error::Config("instances_per_check and mc_samples must be at least 1".into()));
        }
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(Error::Config(format!("z must be positive, got {}", self.z)));
        }
        self.check_config().validate()?;
        for spec in &self.checks {
            let r = lookup(&spec.name)?;
            let dims = spec.dims();
            if dims.is_empty() {
                return Err(Error::Config(format!("{}: dims is empty", spec.name)));
            }
            if let Some(&d) = dims.iter().find(|&&d| d < r.min_dim) {
                return Err(Error::Config(format!(
                    "{}: dimension {d} is below the minimum {}",
                    spec.name, r.min_dim
                )));
            }
            if spec.instances == Some(0) || spec.samples == Some(0) || spec.components == Some(0) {
                return Err(Error::Config(format!("{}: counts must be at least 1", spec.name)));
            }
            let lambdas = spec.lambdas();
            if r.uses_lambda && (lambdas.is_empty() || lambdas.iter().any(|l| !(0.0..=1.0).contains(l))) {
                return Err(Error::Config(format!("{}: lambdas must be a nonempty list in [0, 1]", spec.name)));
            }
            if let Some(k) = spec.subset_size {
                if let Some(&d) = dims.iter().find(|&&d| k == 0 || k >= d) {
                    return Err(Error::Config(format!(
                        "{}: subset_size {k} must lie in 1..{d}",
                        spec.name
                    )));
                }
            }
            let ms = spec.m_values();
            if ms.is_empty() || ms[0] < 1.0 || ms.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!(
                    "{}: m_values must be strictly increasing and >= 1",
                    spec.name
                )));
            }
            let (t, dt) = (spec.t.unwrap_or(DEFAULT_T), spec.dt.unwrap_or(DEFAULT_DT));
            if !(dt > 0.0 && t - dt > 0.0) {
                return Err(Error::Config(format!("{}: need dt > 0 and t > dt", spec.name)));
            }
            if spec.directions.is_some_and(|d| d < 2) {
                return Err(Error::Config(format!("{}: directions must be at least 2", spec.name)));
            }
        }
        Ok(())
    }

    /// Number of records the suite will produce.
    pub fn planned_records(&self) -> usize {
        self.checks
            .iter()
            .map(|spec| {
                let per = match lookup(&spec.name) {
                    Ok(r) if r.uses_lambda => spec.lambdas().len(),
                    Ok(r) if r.name == "projective_fisher" => 2,
                    _ => 1,
                };
                per * spec.instances.unwrap_or(self.instances_per_check)
            })
            .sum()
    }

    /// The `z` each record is judged with.
    pub fn effective_z(&self) -> f64 {
        match self.multiplicity {
            Multiplicity::Bonferroni => bonferroni_z(self.z, self.planned_records()),
            Multiplicity::None => self.z,
        }
    }

    fn check_config(&self) -> CheckConfig {
        CheckConfig {
            samples: self.mc_samples,
            seed: self.seed,
            z: self.effective_z(),
            abs_tol: self.tolerances.abs_tol,
            eq_tol: self.tolerances.eq_tol,
            instance_id: String::new(),
        }
    }
}

/// Per-test `z` that keeps the two-sided family-wise level of `z` over `n`
/// tests.
pub fn bonferroni_z(z: f64, n: usize) -> f64 {
    if n <= 1 {
        return z;
    }
    let normal = Normal::standard();
    -normal.inverse_cdf(normal.cdf(-z) / n as f64)
}

const DEFAULT_T: f64 = 0.5;
const DEFAULT_DT: f64 = 1e-3;
const DEFAULT_DIRECTIONS: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub holds: usize,
    pub equality: usize,
    pub violated: usize,
    pub inconclusive: usize,
}

impl Tally {
    fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Holds => self.holds += 1,
            Verdict::EqualityConsistent => self.equality += 1,
            Verdict::Violated => self.violated += 1,
            Verdict::Inconclusive => self.inconclusive += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.holds + self.equality + self.violated + self.inconclusive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub version: u32,
    pub seed: u64,
    pub records: Vec<InequalityReport>,
    pub summary: BTreeMap<String, Tally>,
}

impl SuiteReport {
    pub fn from_records(seed: u64, records: Vec<InequalityReport>) -> Self {
        let mut summary: BTreeMap<String, Tally> = BTreeMap::new();
        for r in &records {
            summary.entry(r.check_name.clone()).or_default().add(r.verdict);
        }
        Self {
            version: REPORT_VERSION,
            seed,
            records,
            summary,
        }
    }

    pub fn violations(&self) -> usize {
        self.summary.values().map(|t| t.violated).sum()
    }

    /// One line per check.
    pub fn summary_lines(&self) -> Vec<String> {
        self.summary
            .iter()
            .map(|(name, t)| {
                format!(
                    "{name}: holds={} equality={} inconclusive={} violated={}",
                    t.holds, t.equality, t.inconclusive, t.violated
                )
            })
            .collect()
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in &self.records {
                    w.serialize(CsvRow::from(r))?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
            }
        }
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        let text = self.render(format)?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    check_name: &'a str,
    instance_id: &'a str,
    dim: usize,
    lambda: Option<f64>,
    lhs: f64,
    rhs: f64,
    gap: f64,
    stderr: f64,
    verdict: &'static str,
    seed: u64,
    wall_ms: f64,
}

impl<'a> From<&'a InequalityReport> for CsvRow<'a> {
    fn from(r: &'a InequalityReport) -> Self {
        Self {
            check_name: &r.check_name,
            instance_id: &r.instance_id,
            dim: r.dim,
            lambda: r.lambda,
            lhs: r.lhs,
            rhs: r.rhs,
            gap: r.gap,
            stderr: r.stderr,
            verdict: r.verdict.as_str(),
            seed: r.seed,
            wall_ms: r.wall_ms,
        }
    }
}

/// Objects drawn for one check instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Instance {
    SpdPair { a: SpdMatrix, b: SpdMatrix, index: usize },
    MixturePair { x: GaussianMixture, y: GaussianMixture },
    MixturePairWithSubset { x: GaussianMixture, y: GaussianMixture, subset: Vec<usize> },
    MixturePairWithDirection { x: GaussianMixture, y: GaussianMixture, u: Vec<f64> },
    Mixture { x: GaussianMixture },
    Triple { triple: MarkovTriple },
    Vector { v: Vec<f64> },
    /// Parameters only; the check draws its own equality-family pair.
    Dimension { n: usize },
}

/// Weights at least [`MIN_WEIGHT`], summing to one.
fn random_weights<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.1).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - MIN_WEIGHT * k as f64;
    let mut w: Vec<f64> = raw.iter().map(|r| MIN_WEIGHT + free * r / total).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Covariance with condition number at most `cap` and average variance in
/// `[0.3, 1]`.
fn random_covariance<R: Rng + ?Sized>(n: usize, rng: &mut R, cap: f64) -> SpdMatrix {
    let m = matrix::random_spd(n, rng, cap);
    let level = 0.3 + 0.7 * rng.random::<f64>();
    m.scaled(level * n as f64 / m.trace()).expect("positive rescaling")
}

fn random_mean<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

/// Mixture of `k` Gaussians in dimension `n`.
pub fn random_mixture<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> GaussianMixture {
    let weights = random_weights(k, rng);
    let components = (0..k)
        .map(|_| {
            let mean = if k == 1 { vec![0.0; n] } else { random_mean(n, rng) };
            GaussianComponent::new(mean, random_covariance(n, rng, MIXTURE_CONDITION_CAP))
                .expect("valid component")
        })
        .collect();
    GaussianMixture::new(weights, components).expect("valid mixture")
}

/// Mixture with a component count drawn from `2..=max_k` (just 1 if
/// `max_k == 1`).
pub fn random_mixture_upto<R: Rng + ?Sized>(n: usize, max_k: usize, rng: &mut R) -> GaussianMixture {
    let k = if max_k <= 1 { 1 } else { rng.random_range(2..=max_k) };
    random_mixture(n, k, rng)
}

/// Appends a last coordinate to every component: `X_n = bᵀ(Xⁿ⁻¹ − μ) + μ_n
/// + noise`, so the `(n−1)`-marginal is exactly `prefix`.
pub fn extend_last<R: Rng + ?Sized>(prefix: &GaussianMixture, rng: &mut R) -> GaussianMixture {
    let p = prefix.dim();
    let n = p + 1;
    let components = prefix
        .components()
        .iter()
        .map(|c| {
            let s = c.cov().as_matrix();
            let b: Vec<f64> = (0..p).map(|_| 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            let sb: Vec<f64> = (0..p).map(|r| (0..p).map(|j| s[(r, j)] * b[j]).sum()).collect();
            let bsb: f64 = b.iter().zip(&sb).map(|(x, y)| x * y).sum();
            let noise = 0.3 + 0.7 * rng.random::<f64>();
            let mut full = vec![0.0; n * n];
            for r in 0..p {
                for j in 0..p {
                    full[r * n + j] = s[(r, j)];
                }
                full[r * n + p] = sb[r];
                full[p * n + r] = sb[r];
            }
            full[p * n + p] = bsb + noise;
            let mut mean = c.mean().to_vec();
            mean.push(rng.sample::<f64, _>(rand_distr::StandardNormal));
            GaussianComponent::new(mean, SpdMatrix::from_row_slice(n, &full).expect("SPD extension"))
                .expect("valid component")
        })
        .collect();
    GaussianMixture::new(prefix.weights().to_vec(), components).expect("valid mixture")
}

/// Two mixtures sharing their `(n−1)`-prefix mixture exactly.
pub fn shared_prefix_pair<R: Rng + ?Sized>(n: usize, max_k: usize, rng: &mut R) -> (GaussianMixture, GaussianMixture) {
    let prefix = random_mixture_upto(n - 1, max_k, rng);
    let x = extend_last(&prefix, rng);
    let y = extend_last(&prefix, rng);
    (x, y)
}

/// Triple with three labels and independent random conditionals.
pub fn random_triple<R: Rng + ?Sized>(n: usize, max_k: usize, rng: &mut R) -> MarkovTriple {
    let probs = random_weights(3, rng);
    let xs = (0..3).map(|_| random_mixture_upto(n, max_k, rng)).collect();
    let ys = (0..3).map(|_| random_mixture_upto(n, max_k, rng)).collect();
    MarkovTriple::new(probs, xs, ys).expect("valid triple")
}

/// Triple whose conditionals are Gaussians with `Cov(Y|z) = c·Cov(X|z)` for
/// one constant `c` shared by all labels.
pub fn proportional_triple<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MarkovTriple {
    let probs = random_weights(3, rng);
    let c = 0.25 + 3.75 * rng.random::<f64>();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..3 {
        let cov = random_covariance(n, rng, MIXTURE_CONDITION_CAP);
        xs.push(GaussianMixture::gaussian(random_mean(n, rng), cov.clone()).expect("valid"));
        ys.push(GaussianMixture::gaussian(random_mean(n, rng), cov.scaled(c).expect("positive")).expect("valid"));
    }
    MarkovTriple::new(probs, xs, ys).expect("valid triple")
}

/// Pair with `det(A_i) = det(B_i)`, obtained by rescaling `B`.
pub fn matched_minor_pair<R: Rng + ?Sized>(n: usize, i: usize, rng: &mut R) -> Result<(SpdMatrix, SpdMatrix)> {
    let a = matrix::random_spd(n, rng, matrix::DEFAULT_CONDITION_CAP);
    let b = matrix::random_spd(n, rng, matrix::DEFAULT_CONDITION_CAP);
    let da = matrix::delete_row_col(&a, i)?.log_det();
    let db = matrix::delete_row_col(&b, i)?.log_det();
    let b = b.scaled(((da - db) / (n - 1) as f64).exp())?;
    Ok((a, b))
}

fn instance_rng(seed: u64, check: &str, dim: usize, index: usize) -> StreamRng {
    stream_rng(seed, &[check, "instance", &dim.to_string(), &index.to_string()])
}

/// Identifier of instance `index` of `check` in dimension `dim`.
pub fn instance_id(seed: u64, check: &str, dim: usize, index: usize) -> String {
    stream_id(seed, &[check, &dim.to_string(), &index.to_string()])
}

/// Draws the objects check `spec.name` needs in dimension `dim`.
pub fn generate_instance(spec: &CheckSpec, dim: usize, index: usize, seed: u64) -> Result<Instance> {
    let r = lookup(&spec.name)?;
    if dim < r.min_dim {
        return Err(Error::InvalidDimension(format!("{} needs dimension >= {}", r.name, r.min_dim)));
    }
    let rng = &mut instance_rng(seed, r.name, dim, index);
    let k = spec.components();
    let pair = |rng: &mut StreamRng| (random_mixture_upto(dim, k, rng), random_mixture_upto(dim, k, rng));
    Ok(match r.name {
        "bergstrom" => {
            let a = matrix::random_spd(dim, rng, matrix::DEFAULT_CONDITION_CAP);
            let b = matrix::random_spd(dim, rng, matrix::DEFAULT_CONDITION_CAP);
            Instance::SpdPair { a, b, index: rng.random_range(0..dim) }
        }
        "kyfan" => {
            let a = matrix::random_spd(dim, rng, matrix::DEFAULT_CONDITION_CAP);
            let b = matrix::random_spd(dim, rng, matrix::DEFAULT_CONDITION_CAP);
            Instance::SpdPair { a, b, index: rng.random_range(1..dim) }
        }
        "bonnesen_linear" => {
            let i = rng.random_range(0..dim);
            let (a, b) = matched_minor_pair(dim, i, rng)?;
            Instance::SpdPair { a, b, index: i }
        }
        "entropic_kyfan" => {
            let (x, y) = pair(rng);
            let size = spec.subset_size.unwrap_or_else(|| rng.random_range(1..dim));
            let mut coords: Vec<usize> = (0..dim).collect();
            for j in 0..size {
                let pick = rng.random_range(j..dim);
                coords.swap(j, pick);
            }
            let mut subset = coords[..size].to_vec();
            subset.sort_unstable();
            Instance::MixturePairWithSubset { x, y, subset }
        }
        "entropic_bonnesen" => {
            let (x, y) = shared_prefix_pair(dim, k, rng);
            Instance::MixturePair { x, y }
        }
        "projective_fisher" => {
            let (x, y) = pair(rng);
            let u = random_direction(dim, rng);
            Instance::MixturePairWithDirection { x, y, u }
        }
        "conditional_epi" => {
            if index % 4 == 3 {
                Instance::Triple { triple: proportional_triple(dim, rng) }
            } else {
                Instance::Triple { triple: random_triple(dim, k.min(2), rng) }
            }
        }
        "isoperimetric_sharp" | "isoperimetric_dominance" | "de_bruijn" | "tm_limit" => Instance::Mixture {
            x: random_mixture_upto(dim, k, rng),
        },
        "sphere_identity" => Instance::Vector { v: random_mean(dim, rng) },
        "equality_case_bonnesen" => Instance::Dimension { n: dim },
        _ => {
            let (x, y) = pair(rng);
            Instance::MixturePair { x, y }
        }
    })
}

/// Runs one generated instance; checks with a λ list produce one record per λ.
pub fn run_instance(spec: &CheckSpec, inst: &Instance, cfg: &CheckConfig) -> Result<Vec<InequalityReport>> {
    let lambdas = spec.lambdas();
    let per_lambda = |f: &dyn Fn(f64) -> Result<InequalityReport>| lambdas.iter().map(|&l| f(l)).collect();
    let name = spec.name.as_str();
    match (name, inst) {
        ("bergstrom", Instance::SpdPair { a, b, index }) => Ok(vec![checks::check_bergstrom(a, b, *index, cfg)?]),
        ("kyfan", Instance::SpdPair { a, b, index }) => Ok(vec![checks::check_kyfan(a, b, *index, cfg)?]),
        ("bonnesen_linear", Instance::SpdPair { a, b, index }) => {
            per_lambda(&|l| checks::check_bonnesen_linear(a, b, l, *index, cfg))
        }
        ("epi", Instance::MixturePair { x, y }) => Ok(vec![checks::check_epi(x, y, cfg)?]),
        ("conditional_epi", Instance::Triple { triple }) => Ok(vec![checks::check_conditional_epi(triple, cfg)?]),
        ("entropic_bergstrom", Instance::MixturePair { x, y }) => {
            Ok(vec![checks::check_entropic_bergstrom(x, y, cfg)?])
        }
        ("conditional_form", Instance::MixturePair { x, y }) => {
            per_lambda(&|l| checks::check_conditional_form(x, y, l, cfg))
        }
        ("lambda_form", Instance::MixturePair { x, y }) => per_lambda(&|l| checks::check_lambda_form(x, y, l, cfg)),
        ("entropic_kyfan", Instance::MixturePairWithSubset { x, y, subset }) => {
            per_lambda(&|l| checks::check_entropic_kyfan(x, y, subset, l, cfg))
        }
        ("entropic_bonnesen", Instance::MixturePair { x, y }) => {
            per_lambda(&|l| checks::check_entropic_bonnesen(x, y, l, cfg))
        }
        ("equality_case_bonnesen", Instance::Dimension { n }) => {
            Ok(vec![checks::check_equality_case_bonnesen(*n, cfg)?])
        }
        ("isoperimetric_sharp", Instance::Mixture { x }) => Ok(vec![checks::check_isoperimetric_sharp(x, cfg)?]),
        ("isoperimetric_dominance", Instance::Mixture { x }) => {
            Ok(vec![checks::check_isoperimetric_dominance(x, cfg)?])
        }
        ("de_bruijn", Instance::Mixture { x }) => Ok(vec![checks::check_de_bruijn(
            x,
            spec.t.unwrap_or(DEFAULT_T),
            spec.dt.unwrap_or(DEFAULT_DT),
            cfg,
        )?]),
        ("blachman_stam", Instance::MixturePair { x, y }) => Ok(vec![checks::check_blachman_stam(x, y, cfg)?]),
        // the entropic Bergström gap of the same pair rides along so the two
        // inequalities can be compared instance by instance
        ("projective_fisher", Instance::MixturePairWithDirection { x, y, u }) => Ok(vec![
            checks::check_projective_fisher(x, y, u, cfg)?,
            checks::check_entropic_bergstrom(x, y, cfg)?,
        ]),
        ("tm_limit", Instance::Mixture { x }) => Ok(vec![checks::check_tm_limit(x, &spec.m_values(), cfg)?]),
        ("sphere_identity", Instance::Vector { v }) => Ok(vec![checks::check_sphere_identity(v, cfg.samples, cfg)?]),
        ("stam_recovery", Instance::MixturePair { x, y }) => Ok(vec![
            checks::check_stam_recovery(x, y, spec.directions.unwrap_or(DEFAULT_DIRECTIONS), cfg)?.0,
        ]),
        ("bergstrom_implies_epi", Instance::MixturePair { x, y }) => {
            Ok(vec![checks::check_bergstrom_implies_epi(x, y, cfg)?])
        }
        _ => Err(Error::InvalidArgument(format!("instance does not fit check `{name}`"))),
    }
}

/// Runs every configured check. Instance `j` of a check uses dimension
/// `dims[j % dims.len()]`. Records are ordered by check, then instance.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let base = cfg.check_config();
    let mut records = Vec::new();
    for spec in &cfg.checks {
        let dims = spec.dims();
        let count = spec.instances.unwrap_or(cfg.instances_per_check);
        let samples = spec.samples.unwrap_or(cfg.mc_samples);
        for index in 0..count {
            let dim = dims[index % dims.len()];
            let id = instance_id(cfg.seed, &spec.name, dim, index);
            log::debug!("{} instance {index} (dim {dim}, id {id})", spec.name);
            let inst = generate_instance(spec, dim, index, cfg.seed)?;
            let check_cfg = CheckConfig {
                samples,
                instance_id: id,
                ..base.clone()
            };
            records.extend(run_instance(spec, &inst, &check_cfg)?);
        }
    }
    Ok(SuiteReport::from_records(cfg.seed, records))
}
