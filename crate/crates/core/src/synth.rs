//! Ground-truth sample generation.
//!
//! All randomness flows through [`rng_for`], a ChaCha8 stream keyed by a 64-bit
//! seed, so a `(spec, n, seed)` triple always produces bit-identical data.

use std::fmt;

use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{max_eigenvalue, normal_cdf, normal_pdf};

pub type SeededRng = ChaCha8Rng;

pub fn rng_for(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovShape {
    /// N(mean, sigma² I).
    GaussianScaled,
    /// Uniform on the ball of radius sigma·sqrt(d+2), whose covariance is sigma² I.
    UniformBall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DistributionSpec {
    GaussianIdentity {
        mean: Vec<f64>,
    },
    BoundedCovariance {
        mean: Vec<f64>,
        sigma: f64,
        shape: CovShape,
    },
    /// One-dimensional: `base` with probability 1-p, `spike_location` with probability p.
    TwoPointMixture {
        base: f64,
        spike_location: f64,
        spike_prob: f64,
    },
    /// One-dimensional: N(mean, 1) with probability 1-p, `spike_location` with probability p.
    GaussianWithSpike {
        mean: f64,
        spike_location: f64,
        spike_prob: f64,
    },
}

impl DistributionSpec {
    pub fn point_mass(location: f64) -> Self {
        DistributionSpec::TwoPointMixture {
            base: location,
            spike_location: location,
            spike_prob: 0.0,
        }
    }

    pub fn standard_gaussian(d: usize) -> Self {
        DistributionSpec::GaussianIdentity { mean: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::GaussianIdentity { mean }
            | DistributionSpec::BoundedCovariance { mean, .. } => mean.len(),
            DistributionSpec::TwoPointMixture { .. } | DistributionSpec::GaussianWithSpike { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(invalid("distribution dimension must be at least 1"));
        }
        match self {
            DistributionSpec::GaussianIdentity { mean } => check_finite(mean),
            DistributionSpec::BoundedCovariance { mean, sigma, .. } => {
                check_finite(mean)?;
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid(format!("sigma must be positive, got {sigma}")));
                }
                Ok(())
            }
            DistributionSpec::TwoPointMixture {
                base,
                spike_location,
                spike_prob,
            }
            | DistributionSpec::GaussianWithSpike {
                mean: base,
                spike_location,
                spike_prob,
            } => {
                check_finite(&[*base, *spike_location])?;
                if !(0.0..=1.0).contains(spike_prob) {
                    return Err(invalid(format!("spike_prob must lie in [0,1], got {spike_prob}")));
                }
                Ok(())
            }
        }
    }

    pub fn population_mean(&self) -> Vec<f64> {
        match self {
            DistributionSpec::GaussianIdentity { mean }
            | DistributionSpec::BoundedCovariance { mean, .. } => mean.clone(),
            DistributionSpec::TwoPointMixture {
                base,
                spike_location,
                spike_prob,
            }
            | DistributionSpec::GaussianWithSpike {
                mean: base,
                spike_location,
                spike_prob,
            } => vec![(1.0 - spike_prob) * base + spike_prob * spike_location],
        }
    }

    /// Upper bound on the population covariance operator norm.
    pub fn covariance_bound(&self) -> f64 {
        match self {
            DistributionSpec::GaussianIdentity { .. } => 1.0,
            DistributionSpec::BoundedCovariance { sigma, .. } => sigma * sigma,
            _ => self.law_1d().map(|l| l.central_moment(2)).unwrap_or(f64::NAN),
        }
    }

    /// The one-dimensional law of this spec, for exact distances and moments.
    pub fn law_1d(&self) -> Result<Law1d> {
        self.validate()?;
        if self.dim() != 1 {
            return Err(Error::Unsupported(format!(
                "one-dimensional law requested for a {}-dimensional spec",
                self.dim()
            )));
        }
        let law = match self {
            DistributionSpec::GaussianIdentity { mean } => Law1d::gaussian(mean[0], 1.0),
            DistributionSpec::BoundedCovariance { mean, sigma, shape } => match shape {
                CovShape::GaussianScaled => Law1d::gaussian(mean[0], *sigma),
                CovShape::UniformBall => {
                    let r = sigma * 3f64.sqrt();
                    Law1d {
                        parts: vec![(1.0, Component::Uniform { lo: mean[0] - r, hi: mean[0] + r })],
                    }
                }
            },
            DistributionSpec::TwoPointMixture {
                base,
                spike_location,
                spike_prob,
            } => Law1d::with_spike(Component::Atom(*base), *spike_location, *spike_prob),
            DistributionSpec::GaussianWithSpike {
                mean,
                spike_location,
                spike_prob,
            } => Law1d::with_spike(Component::Gaussian { mean: *mean, sd: 1.0 }, *spike_location, *spike_prob),
        };
        Ok(law)
    }

    /// Draw one point into `out`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            DistributionSpec::GaussianIdentity { mean } => {
                for (o, m) in out.iter_mut().zip(mean) {
                    *o = m + rng.sample::<f64, _>(StandardNormal);
                }
            }
            DistributionSpec::BoundedCovariance { mean, sigma, shape } => match shape {
                CovShape::GaussianScaled => {
                    for (o, m) in out.iter_mut().zip(mean) {
                        *o = m + sigma * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                CovShape::UniformBall => {
                    let d = mean.len();
                    let radius = sigma * ((d + 2) as f64).sqrt();
                    let mut norm2 = 0.0;
                    for o in out.iter_mut() {
                        *o = rng.sample::<f64, _>(StandardNormal);
                        norm2 += *o * *o;
                    }
                    let u: f64 = rng.random();
                    let scale = radius * u.powf(1.0 / d as f64) / norm2.sqrt().max(f64::MIN_POSITIVE);
                    for (o, m) in out.iter_mut().zip(mean) {
                        *o = m + *o * scale;
                    }
                }
            },
            DistributionSpec::TwoPointMixture {
                base,
                spike_location,
                spike_prob,
            } => {
                let u: f64 = rng.random();
                out[0] = if u < *spike_prob { *spike_location } else { *base };
            }
            DistributionSpec::GaussianWithSpike {
                mean,
                spike_location,
                spike_prob,
            } => {
                let u: f64 = rng.random();
                let g: f64 = rng.sample(StandardNormal);
                out[0] = if u < *spike_prob { *spike_location } else { mean + g };
            }
        }
    }

    /// Parse `family[:key=value,...]`. Vector values separate entries with `;`.
    /// `d` supplies the dimension when no mean is given.
    ///
    /// Families: `gaussian` (mean), `boundedcov` (mean, sigma, shape=gaussian|ball),
    /// `twopoint` (base, spike, prob), `gspike` (mean, spike, prob).
    pub fn parse(text: &str, d: usize) -> Result<Self> {
        let (family, rest) = match text.split_once(':') {
            Some((f, r)) => (f.trim(), r.trim()),
            None => (text.trim(), ""),
        };
        let mut kv = std::collections::BTreeMap::new();
        for item in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match kv.get(key) {
                Some(v) => v.parse::<f64>().map_err(|e| Error::Parse(format!("{key}: {e}"))),
                None => default.ok_or_else(|| Error::Parse(format!("missing `{key}` for {family}"))),
            }
        };
        let vector = |key: &str| -> Result<Vec<f64>> {
            match kv.get(key) {
                Some(v) => {
                    let parsed = v
                        .split(';')
                        .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{key}: {e}"))))
                        .collect::<Result<Vec<_>>>()?;
                    if parsed.len() == 1 && d > 1 {
                        Ok(vec![parsed[0]; d])
                    } else {
                        Ok(parsed)
                    }
                }
                None => Ok(vec![0.0; d]),
            }
        };
        let spec = match family {
            "gaussian" => DistributionSpec::GaussianIdentity { mean: vector("mean")? },
            "boundedcov" => {
                let shape = match kv.get("shape").map(String::as_str).unwrap_or("gaussian") {
                    "gaussian" => CovShape::GaussianScaled,
                    "ball" => CovShape::UniformBall,
                    other => return Err(Error::Parse(format!("unknown shape `{other}`"))),
                };
                DistributionSpec::BoundedCovariance {
                    mean: vector("mean")?,
                    sigma: num("sigma", Some(1.0))?,
                    shape,
                }
            }
            "twopoint" => DistributionSpec::TwoPointMixture {
                base: num("base", Some(0.0))?,
                spike_location: num("spike", None)?,
                spike_prob: num("prob", None)?,
            },
            "gspike" => DistributionSpec::GaussianWithSpike {
                mean: num("mean", Some(0.0))?,
                spike_location: num("spike", None)?,
                spike_prob: num("prob", None)?,
            },
            other => return Err(Error::Parse(format!("unknown distribution family `{other}`"))),
        };
        if spec.dim() != d {
            return Err(Error::Dimension(format!(
                "spec `{text}` has dimension {} but d = {d}",
                spec.dim()
            )));
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        match self {
            DistributionSpec::GaussianIdentity { mean } => write!(f, "gaussian:mean={}", join(mean)),
            DistributionSpec::BoundedCovariance { mean, sigma, shape } => {
                let shape = match shape {
                    CovShape::GaussianScaled => "gaussian",
                    CovShape::UniformBall => "ball",
                };
                write!(f, "boundedcov:mean={},sigma={sigma},shape={shape}", join(mean))
            }
            DistributionSpec::TwoPointMixture {
                base,
                spike_location,
                spike_prob,
            } => write!(f, "twopoint:base={base},spike={spike_location},prob={spike_prob}"),
            DistributionSpec::GaussianWithSpike {
                mean,
                spike_location,
                spike_prob,
            } => write!(f, "gspike:mean={mean},spike={spike_location},prob={spike_prob}"),
        }
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid("distribution parameters must be finite"))
    }
}

/// Mixture component of a one-dimensional law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Atom(f64),
}

/// A finite mixture of Gaussians, uniforms and atoms on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct Law1d {
    pub parts: Vec<(f64, Component)>,
}

impl Law1d {
    pub fn gaussian(mean: f64, sd: f64) -> Self {
        Law1d {
            parts: vec![(1.0, Component::Gaussian { mean, sd })],
        }
    }

    fn with_spike(base: Component, spike: f64, p: f64) -> Self {
        let mut parts = Vec::with_capacity(2);
        if p < 1.0 {
            parts.push((1.0 - p, base));
        }
        if p > 0.0 {
            parts.push((p, Component::Atom(spike)));
        }
        let mut law = Law1d { parts };
        law.merge_atoms();
        law
    }

    fn merge_atoms(&mut self) {
        let mut merged: Vec<(f64, Component)> = Vec::new();
        for &(w, c) in &self.parts {
            if let Component::Atom(x) = c {
                if let Some(slot) = merged
                    .iter_mut()
                    .find(|(_, m)| matches!(m, Component::Atom(y) if *y == x))
                {
                    slot.0 += w;
                    continue;
                }
            }
            merged.push((w, c));
        }
        self.parts = merged;
    }

    /// Equal-weight mixture `(self + other) / 2`.
    pub fn midpoint(&self, other: &Law1d) -> Law1d {
        let mut parts: Vec<(f64, Component)> = self.parts.iter().map(|&(w, c)| (0.5 * w, c)).collect();
        parts.extend(other.parts.iter().map(|&(w, c)| (0.5 * w, c)));
        let mut law = Law1d { parts };
        law.merge_atoms();
        law
    }

    pub fn mean(&self) -> f64 {
        self.parts
            .iter()
            .map(|&(w, c)| {
                w * match c {
                    Component::Gaussian { mean, .. } => mean,
                    Component::Uniform { lo, hi } => 0.5 * (lo + hi),
                    Component::Atom(x) => x,
                }
            })
            .sum()
    }

    /// E[(X - E X)^k], exact for every component type.
    pub fn central_moment(&self, k: u32) -> f64 {
        let m = self.mean();
        self.parts
            .iter()
            .map(|&(w, c)| w * component_moment_about(c, m, k))
            .sum()
    }

    /// Atoms as (location, mass).
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.parts
            .iter()
            .filter_map(|&(w, c)| match c {
                Component::Atom(x) => Some((x, w)),
                _ => None,
            })
            .collect()
    }

    pub fn atom_mass(&self, x: f64) -> f64 {
        self.atoms().iter().filter(|(y, _)| *y == x).map(|(_, w)| w).sum()
    }

    pub fn continuous_mass(&self) -> f64 {
        self.parts
            .iter()
            .filter(|(_, c)| !matches!(c, Component::Atom(_)))
            .map(|(w, _)| w)
            .sum()
    }

    /// Density of the absolutely continuous part.
    pub fn density(&self, x: f64) -> f64 {
        self.parts
            .iter()
            .map(|&(w, c)| match c {
                Component::Gaussian { mean, sd } => w * normal_pdf((x - mean) / sd) / sd,
                Component::Uniform { lo, hi } => {
                    if x >= lo && x <= hi {
                        w / (hi - lo)
                    } else {
                        0.0
                    }
                }
                Component::Atom(_) => 0.0,
            })
            .sum()
    }

    /// CDF of the absolutely continuous part.
    pub fn continuous_cdf(&self, x: f64) -> f64 {
        self.parts
            .iter()
            .map(|&(w, c)| match c {
                Component::Gaussian { mean, sd } => w * normal_cdf((x - mean) / sd),
                Component::Uniform { lo, hi } => w * ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
                Component::Atom(_) => 0.0,
            })
            .sum()
    }

    /// Points where the continuous density can jump or concentrate.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        for &(_, c) in &self.parts {
            match c {
                Component::Gaussian { mean, .. } => pts.push(mean),
                Component::Uniform { lo, hi } => {
                    pts.push(lo);
                    pts.push(hi);
                }
                Component::Atom(_) => {}
            }
        }
        pts
    }

    /// Interval outside which the continuous part has negligible mass.
    pub fn support_window(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(_, c) in &self.parts {
            match c {
                Component::Gaussian { mean, sd } => {
                    lo = lo.min(mean - 40.0 * sd);
                    hi = hi.max(mean + 40.0 * sd);
                }
                Component::Uniform { lo: a, hi: b } => {
                    lo = lo.min(a);
                    hi = hi.max(b);
                }
                Component::Atom(_) => {}
            }
        }
        (lo < hi).then_some((lo, hi))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.parts.last().expect("non-empty law").1;
        for &(w, c) in &self.parts {
            acc += w;
            if u < acc {
                chosen = c;
                break;
            }
        }
        match chosen {
            Component::Gaussian { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            Component::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Component::Atom(x) => x,
        }
    }
}

fn double_factorial_odd(j: u32) -> f64 {
    // (j-1)!! for even j: E[Z^j] of a standard normal.
    let mut acc = 1.0;
    let mut t = j as i64 - 1;
    while t > 1 {
        acc *= t as f64;
        t -= 2;
    }
    acc
}

fn component_moment_about(c: Component, m: f64, k: u32) -> f64 {
    match c {
        Component::Atom(x) => (x - m).powi(k as i32),
        Component::Gaussian { mean, sd } => {
            let shift = mean - m;
            (0..=k)
                .filter(|j| j % 2 == 0)
                .map(|j| {
                    crate::numeric::binomial(k as usize, j as usize) as f64
                        * shift.powi((k - j) as i32)
                        * sd.powi(j as i32)
                        * double_factorial_odd(j)
                })
                .sum()
        }
        Component::Uniform { lo, hi } => {
            let a = lo - m;
            let b = hi - m;
            (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / ((k + 1) as f64 * (b - a))
        }
    }
}

/// Uncorrupted samples together with their population and empirical means.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub data: Array2<f64>,
    pub true_mean: Vec<f64>,
    pub empirical_mean: Vec<f64>,
    pub seed: u64,
    pub spec: Option<DistributionSpec>,
}

impl SampleSet {
    pub fn from_data(data: Array2<f64>, true_mean: Vec<f64>, seed: u64) -> Result<Self> {
        let (n, d) = data.dim();
        if n == 0 || d == 0 {
            return Err(invalid("sample set needs n >= 1 and d >= 1"));
        }
        if true_mean.len() != d {
            return Err(Error::Dimension(format!(
                "true mean has length {} but data has {d} columns",
                true_mean.len()
            )));
        }
        let empirical_mean = column_mean(&data);
        Ok(SampleSet {
            data,
            true_mean,
            empirical_mean,
            seed,
            spec: None,
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }
}

pub fn column_mean(data: &Array2<f64>) -> Vec<f64> {
    let n = data.nrows() as f64;
    data.sum_axis(Axis(0)).iter().map(|s| s / n).collect()
}

/// Draw `n` i.i.d. rows from `spec`.
pub fn sample(spec: &DistributionSpec, n: usize, seed: u64) -> Result<SampleSet> {
    spec.validate()?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let d = spec.dim();
    let mut rng = rng_for(seed);
    let mut data = Array2::<f64>::zeros((n, d));
    let mut buf = vec![0.0; d];
    for mut row in data.rows_mut() {
        spec.draw_into(&mut rng, &mut buf);
        row.iter_mut().zip(&buf).for_each(|(r, b)| *r = *b);
    }
    let mut set = SampleSet::from_data(data, spec.population_mean(), seed)?;
    set.spec = Some(spec.clone());
    Ok(set)
}

/// Covariance (1/n)·Σ(x - x̄)(x - x̄)ᵀ as a row-major d×d buffer.
pub fn empirical_covariance(data: &Array2<f64>) -> Vec<f64> {
    let (n, d) = data.dim();
    let mean = column_mean(data);
    let mut cov = vec![0.0; d * d];
    for row in data.rows() {
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[a * d + b] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a * d + b] /= n as f64;
            cov[b * d + a] = cov[a * d + b];
        }
    }
    cov
}

/// Largest eigenvalue of the empirical covariance.
pub fn empirical_covariance_opnorm(set: &SampleSet) -> Result<f64> {
    covariance_opnorm(&set.data)
}

pub fn covariance_opnorm(data: &Array2<f64>) -> Result<f64> {
    if data.nrows() < 2 {
        return Err(Error::InsufficientData("covariance needs at least two rows".into()));
    }
    let d = data.ncols();
    Ok(max_eigenvalue(d, &empirical_covariance(data)).max(0.0))
}
