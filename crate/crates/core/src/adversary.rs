//! Strong-contamination corruption of sample sets.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::certify::tv_distance;
use crate::error::{invalid, Error, Result};
use crate::numeric::corruption_count;
use crate::synth::{rng_for, sample, DistributionSpec, Law1d, SampleSet, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum AdversaryStrategy {
    ReplaceWithPoint { location: Vec<f64> },
    /// Replaced rows become fresh draws from `alt`.
    MixtureSimulation { alt: DistributionSpec },
    /// Replaced rows sit at `true_mean + √k·(2ε(1−2ε))^{−1/k}·e_coordinate`.
    ClusterAtScaledSpike { k: u32, coordinate: usize },
    Identity,
}

impl AdversaryStrategy {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            AdversaryStrategy::ReplaceWithPoint { location } => {
                if location.len() != d {
                    return Err(Error::Dimension(format!(
                        "replacement point has length {} but d = {d}",
                        location.len()
                    )));
                }
                if !location.iter().all(|x| x.is_finite()) {
                    return Err(invalid("replacement point must be finite"));
                }
            }
            AdversaryStrategy::MixtureSimulation { alt } => {
                alt.validate()?;
                if alt.dim() != d {
                    return Err(Error::Dimension(format!(
                        "alternative distribution has dimension {} but d = {d}",
                        alt.dim()
                    )));
                }
            }
            AdversaryStrategy::ClusterAtScaledSpike { k, coordinate } => {
                if *k < 2 || k % 2 != 0 {
                    return Err(invalid(format!("spike order k must be even and >= 2, got {k}")));
                }
                if *coordinate >= d {
                    return Err(invalid(format!("spike coordinate {coordinate} out of range for d = {d}")));
                }
            }
            AdversaryStrategy::Identity => {}
        }
        Ok(())
    }

    /// Parse `identity`, `point:<v>` (scalar broadcast or `a;b;...`),
    /// `spike:k=<int>[,coord=<int>]`, or `mixture:<distribution spec>`.
    pub fn parse(text: &str, d: usize) -> Result<Self> {
        let (name, rest) = match text.split_once(':') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (text.trim(), ""),
        };
        let strategy = match name {
            "identity" => AdversaryStrategy::Identity,
            "point" => {
                let values = rest
                    .trim_start_matches("loc=")
                    .split(';')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("point: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                let location = if values.len() == 1 { vec![values[0]; d] } else { values };
                AdversaryStrategy::ReplaceWithPoint { location }
            }
            "spike" => {
                let mut k = 2;
                let mut coordinate = 0;
                for item in rest.split(',').filter(|s| !s.trim().is_empty()) {
                    let (key, v) = item
                        .split_once('=')
                        .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
                    let v: usize = v.trim().parse().map_err(|e| Error::Parse(format!("{key}: {e}")))?;
                    match key.trim() {
                        "k" => k = v as u32,
                        "coord" => coordinate = v,
                        other => return Err(Error::Parse(format!("unknown spike key `{other}`"))),
                    }
                }
                AdversaryStrategy::ClusterAtScaledSpike { k, coordinate }
            }
            "mixture" => AdversaryStrategy::MixtureSimulation {
                alt: DistributionSpec::parse(rest, d)?,
            },
            other => return Err(Error::Parse(format!("unknown strategy `{other}`"))),
        };
        strategy.validate(d)?;
        Ok(strategy)
    }
}

impl fmt::Display for AdversaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryStrategy::Identity => write!(f, "identity"),
            AdversaryStrategy::ReplaceWithPoint { location } => {
                let parts: Vec<String> = location.iter().map(|x| x.to_string()).collect();
                write!(f, "point:{}", parts.join(";"))
            }
            AdversaryStrategy::ClusterAtScaledSpike { k, coordinate } => write!(f, "spike:k={k},coord={coordinate}"),
            AdversaryStrategy::MixtureSimulation { alt } => write!(f, "mixture:{alt}"),
        }
    }
}

/// Spike location √k·(2ε(1−2ε))^{−1/k} of the bounded-moment lower-bound pair.
pub fn scaled_spike(eps: f64, k: u32) -> f64 {
    (k as f64).sqrt() * (2.0 * eps * (1.0 - 2.0 * eps)).powf(-1.0 / k as f64)
}

/// Observed points, the ground-truth retention mask and the corruption level.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedSet {
    pub z: Array2<f64>,
    pub mask_wstar: Vec<bool>,
    pub epsilon: f64,
    pub origin: Arc<SampleSet>,
}

impl CorruptedSet {
    pub fn new(z: Array2<f64>, mask_wstar: Vec<bool>, epsilon: f64, origin: Arc<SampleSet>) -> Result<Self> {
        check_eps(epsilon)?;
        if z.dim() != origin.data.dim() || mask_wstar.len() != z.nrows() {
            return Err(Error::Dimension("observed matrix, mask and origin disagree in shape".into()));
        }
        for (i, &keep) in mask_wstar.iter().enumerate() {
            if keep && z.row(i) != origin.data.row(i) {
                return Err(invalid(format!("row {i} is marked retained but differs from the origin")));
            }
        }
        let retained = mask_wstar.iter().filter(|&&b| b).count();
        if (retained as f64) < (1.0 - epsilon) * z.nrows() as f64 - 1e-9 {
            return Err(invalid("retained fraction falls below 1 - eps"));
        }
        Ok(CorruptedSet {
            z,
            mask_wstar,
            epsilon,
            origin,
        })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn d(&self) -> usize {
        self.z.ncols()
    }

    /// Mean of the retained rows.
    pub fn retained_mean(&self) -> Vec<f64> {
        let d = self.d();
        let mut acc = vec![0.0; d];
        let mut count = 0usize;
        for (row, _) in self.z.rows().into_iter().zip(&self.mask_wstar).filter(|(_, &k)| k) {
            acc.iter_mut().zip(row.iter()).for_each(|(a, x)| *a += x);
            count += 1;
        }
        acc.iter().map(|a| a / count.max(1) as f64).collect()
    }

    pub fn num_corrupted(&self) -> usize {
        self.mask_wstar.iter().filter(|&&b| !b).count()
    }

    /// The same instance with every observed and original point shifted by `t`.
    pub fn translated(&self, t: &[f64]) -> CorruptedSet {
        let shift = |m: &Array2<f64>| {
            let mut out = m.clone();
            for mut row in out.rows_mut() {
                row.iter_mut().zip(t).for_each(|(x, s)| *x += s);
            }
            out
        };
        let add = |v: &[f64]| v.iter().zip(t).map(|(a, b)| a + b).collect::<Vec<_>>();
        let o = &self.origin;
        let origin = SampleSet {
            data: shift(&o.data),
            true_mean: add(&o.true_mean),
            empirical_mean: add(&o.empirical_mean),
            seed: o.seed,
            spec: None,
        };
        CorruptedSet {
            z: shift(&self.z),
            mask_wstar: self.mask_wstar.clone(),
            epsilon: self.epsilon,
            origin: Arc::new(origin),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eps) {
        return Err(invalid(format!("eps must lie in [0, 1/2), got {eps}")));
    }
    Ok(())
}

/// Replace exactly ⌊eps·n⌋ uniformly chosen rows according to `strategy`.
pub fn corrupt(
    s: impl Into<Arc<SampleSet>>,
    eps: f64,
    strategy: &AdversaryStrategy,
    seed: u64,
) -> Result<CorruptedSet> {
    let origin: Arc<SampleSet> = s.into();
    check_eps(eps)?;
    let (n, d) = origin.data.dim();
    strategy.validate(d)?;
    let m = match strategy {
        AdversaryStrategy::Identity => 0,
        _ => corruption_count(eps, n),
    };
    let mut rng = rng_for(seed);
    let chosen = index::sample(&mut rng, n, m).into_vec();
    let mut z = origin.data.clone();
    let mut mask = vec![true; n];
    let mut buf = vec![0.0; d];
    for &i in &chosen {
        mask[i] = false;
        match strategy {
            AdversaryStrategy::ReplaceWithPoint { location } => buf.copy_from_slice(location),
            AdversaryStrategy::MixtureSimulation { alt } => alt.draw_into(&mut rng, &mut buf),
            AdversaryStrategy::ClusterAtScaledSpike { k, coordinate } => {
                buf.copy_from_slice(&origin.true_mean);
                buf[*coordinate] += scaled_spike(eps, *k);
            }
            AdversaryStrategy::Identity => unreachable!("identity replaces no rows"),
        }
        z.row_mut(i).iter_mut().zip(&buf).for_each(|(a, b)| *a = *b);
    }
    // A replacement may coincide with the original value; the mask still records it.
    CorruptedSet::new_unchecked(z, mask, eps, origin)
}

impl CorruptedSet {
    fn new_unchecked(z: Array2<f64>, mask_wstar: Vec<bool>, epsilon: f64, origin: Arc<SampleSet>) -> Result<Self> {
        Ok(CorruptedSet {
            z,
            mask_wstar,
            epsilon,
            origin,
        })
    }
}

/// Ratio of densities (or atom masses) of `b` to `a` at a point drawn from `a`.
fn density_ratio(a: &Law1d, b: &Law1d, x: f64) -> f64 {
    let atom_a = a.atom_mass(x);
    if atom_a > 0.0 {
        return b.atom_mass(x) / atom_a;
    }
    let fa = a.density(x);
    if fa <= 0.0 {
        return f64::INFINITY;
    }
    b.density(x) / fa
}

/// Draw from the normalized positive part of (d2 − d1) by rejection from d2.
fn draw_excess(d1: &Law1d, d2: &Law1d, rng: &mut SeededRng) -> Result<f64> {
    for _ in 0..1_000_000 {
        let y = d2.sample(rng);
        let accept = (1.0 - density_ratio(d2, d1, y)).max(0.0);
        if rng.random::<f64>() < accept {
            return Ok(y);
        }
    }
    Err(Error::Unsupported("rejection sampler for the mixture excess did not accept".into()))
}

/// Sample from `d1` and replace ⌊eps·n⌋ rows so the observed set mimics
/// i.i.d. draws from ½(d1 + d2).
///
/// Rows are picked without replacement with weight ½·max(0, 1 − p2/p1),
/// the probability that the optimal coupling of d1 with the mixture moves
/// them. Each replacement comes from the excess (d2 − d1)₊ with probability
/// TV(d1, d2)/(2·eps) and from d1 otherwise, so exactly ⌊eps·n⌋ rows change.
pub fn mixture_tv_contamination(
    d1: &DistributionSpec,
    d2: &DistributionSpec,
    eps: f64,
    n: usize,
    seed: u64,
) -> Result<CorruptedSet> {
    check_eps(eps)?;
    let law1 = d1.law_1d()?;
    let law2 = d2.law_1d()?;
    let origin = Arc::new(sample(d1, n, seed)?);
    let m = corruption_count(eps, n);
    let mut rng = rng_for(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut z = origin.data.clone();
    let mut mask = vec![true; n];
    if m == 0 {
        return CorruptedSet::new(z, mask, eps, origin);
    }
    let tv = tv_distance(&law1, &law2)?.tv;
    let excess_prob = (tv / (2.0 * eps)).min(1.0);

    let weights: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - density_ratio(&law1, &law2, origin.data[[i, 0]])).max(0.0))
        .collect();
    let positive: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    let chosen: Vec<usize> = if positive.len() >= m {
        index::sample_weighted(&mut rng, positive.len(), |j| weights[positive[j]], m)
            .map_err(|e| Error::Unsupported(format!("weighted index sampling: {e}")))?
            .into_iter()
            .map(|j| positive[j])
            .collect()
    } else {
        let rest: Vec<usize> = (0..n).filter(|&i| weights[i] <= 0.0).collect();
        let extra = index::sample(&mut rng, rest.len(), m - positive.len());
        positive.iter().copied().chain(extra.into_iter().map(|j| rest[j])).collect()
    };
    for &i in &chosen {
        mask[i] = false;
        z[[i, 0]] = if rng.random::<f64>() < excess_prob {
            draw_excess(&law1, &law2, &mut rng)?
        } else {
            law1.sample(&mut rng)
        };
    }
    CorruptedSet::new_unchecked(z, mask, eps, origin)
}
