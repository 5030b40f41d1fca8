//! Mean estimators: SoS rounding, classical baselines, the 1-D Gaussian
//! projection estimator and sparse post-processing.

use std::time::Instant;

use ndarray::Array2;
use serde::Serialize;

use crate::adversary::CorruptedSet;
use crate::error::{invalid, Error, Result};
use crate::numeric::{lower_median, normal_cdf};
use crate::relax::{compile_with, BasisKind, MomentRelaxation, PolynomialSystem};
use crate::sdp::{self, PseudoExpectation, Residuals, SolveError, SolverOptions, TracePoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub estimate: Vec<f64>,
    /// ‖μ̂ − μ*‖ against the empirical mean of the uncorrupted sample.
    pub error: f64,
    pub residuals: Option<Residuals>,
    pub seconds: f64,
    pub notes: Vec<String>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn report(name: &str, z: &CorruptedSet, estimate: Vec<f64>, start: Instant) -> EstimateReport {
    EstimateReport {
        estimator: name.into(),
        error: distance(&estimate, &z.origin.empirical_mean),
        estimate,
        residuals: None,
        seconds: start.elapsed().as_secs_f64(),
        notes: Vec::new(),
    }
}

/// Options for [`sos_mean_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SosOptions {
    /// Multiplier on σ so the clean witness stays feasible under sampling noise.
    pub sigma_slack: f64,
    pub solver: SolverOptions,
    /// Minimize Ẽ‖μ − c‖² for this anchor instead of pure feasibility.
    pub anchor: Option<Vec<f64>>,
    pub basis: BasisKind,
    /// Fix wᵢ = 0 for points that no integral solution can select.
    pub screen: bool,
}

impl Default for SosOptions {
    fn default() -> Self {
        SosOptions {
            sigma_slack: 1.1,
            solver: SolverOptions::default(),
            anchor: None,
            basis: BasisKind::Full,
            screen: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SosOutcome {
    pub report: EstimateReport,
    pub pe: PseudoExpectation,
    pub trace: Vec<TracePoint>,
    /// The compiled relaxation, in the centered and scaled frame of `pe`.
    pub relaxation: MomentRelaxation,
}

/// Round a pseudo-expectation of the robust-mean system: μ̂ = Ẽ[μ].
pub fn sos_mean(z: &CorruptedSet, sigma: f64, k: u32, r: u32) -> std::result::Result<EstimateReport, SolveError> {
    sos_mean_with(z, sigma, k, r, &SosOptions::default()).map(|o| o.report)
}

/// [`sos_mean`] with explicit options, also returning the pseudo-expectation.
///
/// The system is built on (zᵢ − c)/s with c the coordinate median and
/// s = slack·σ, solved with unit σ, and the result is mapped back.
pub fn sos_mean_with(
    z: &CorruptedSet,
    sigma: f64,
    k: u32,
    r: u32,
    opts: &SosOptions,
) -> std::result::Result<SosOutcome, SolveError> {
    let start = Instant::now();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")).into());
    }
    if !(opts.sigma_slack >= 1.0) {
        return Err(invalid(format!("sigma slack must be at least 1, got {}", opts.sigma_slack)).into());
    }
    let center = coordinate_median_of(&z.z);
    let scale = opts.sigma_slack * sigma;
    let mut local = z.z.clone();
    for mut row in local.rows_mut() {
        row.iter_mut().zip(&center).for_each(|(x, c)| *x = (*x - c) / scale);
    }
    let total = local.nrows();
    let keep: Vec<usize> = if opts.screen {
        let radius = screening_radius(total, k);
        (0..total).filter(|&i| local.row(i).iter().all(|x| x.abs() <= radius)).collect()
    } else {
        (0..total).collect()
    };
    if keep.is_empty() {
        return Err(invalid("every point lies outside the screening radius").into());
    }
    let rows = local.select(ndarray::Axis(0), &keep);
    let mask: Vec<bool> = keep.iter().map(|&i| z.mask_wstar[i]).collect();
    let sys = PolynomialSystem::for_rows(&rows, total, z.epsilon, 1.0, k, Some(&mask))?;
    let rel = compile_with(&sys, r, opts.basis)?;
    let objective = match &opts.anchor {
        Some(c) => {
            if c.len() != z.d() {
                return Err(Error::Dimension(format!("anchor has length {} but d = {}", c.len(), z.d())).into());
            }
            let lc: Vec<f64> = c.iter().zip(&center).map(|(a, m)| (a - m) / scale).collect();
            Some(sdp::anchor_objective(&lc))
        }
        None => None,
    };
    let (pe, trace) = sdp::solve(&rel, objective.as_ref(), &opts.solver)?;
    let pe = pe.with_frame(center, scale);
    let mut rep = report("sos", z, pe.mean(), start);
    rep.residuals = Some(pe.residuals.clone());
    rep.notes.push(format!("effective sigma {} (slack {})", scale, opts.sigma_slack));
    if keep.len() < total {
        rep.notes.push(format!("screened out {} of {} points", total - keep.len(), total));
    }
    Ok(SosOutcome {
        report: rep,
        pe,
        trace,
        relaxation: rel,
    })
}

/// Distance from the coordinate median, in units of σ, beyond which a point
/// cannot belong to any integral feasible selection.
///
/// A selection S with |S| > n/2 straddles the median in each coordinate, and
/// its moment bound confines every member to within √n (k = 2) or 2n^¼ (k = 4)
/// of its own mean; doubling covers the median offset.
pub fn screening_radius(n: usize, k: u32) -> f64 {
    let n = n as f64;
    if k == 4 { 4.0 * n.powf(0.25) } else { 2.0 * n.sqrt() }
}

pub fn sample_mean(z: &CorruptedSet) -> EstimateReport {
    let start = Instant::now();
    report("mean", z, crate::synth::column_mean(&z.z), start)
}

fn coordinate_median_of(data: &Array2<f64>) -> Vec<f64> {
    data.columns()
        .into_iter()
        .map(|c| {
            let mut v = c.to_vec();
            lower_median(&mut v)
        })
        .collect()
}

/// Per-coordinate lower median.
pub fn coordinate_median(z: &CorruptedSet) -> EstimateReport {
    let start = Instant::now();
    report("median", z, coordinate_median_of(&z.z), start)
}

const ANCHOR_RADIUS: f64 = 1e-12;

/// Geometric median by Weiszfeld iteration.
///
/// Stops once the gradient norm of Σ‖zᵢ − μ‖ is at most tol·n. An iterate
/// within 1e−12 of a data point is tested with the subgradient condition and
/// either accepted or moved off along the steepest descent direction. The
/// data point nearest each iterate is also tested, since Weiszfeld approaches
/// an optimum at a data point only sublinearly.
pub fn geometric_median(z: &CorruptedSet, tol: f64) -> Result<EstimateReport> {
    let start = Instant::now();
    let est = geometric_median_of(&z.z, tol, 100_000)?;
    Ok(report("geomedian", z, est, start))
}

pub fn geometric_median_of(data: &Array2<f64>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let (n, d) = data.dim();
    if n == 0 {
        return Err(Error::InsufficientData("no points".into()));
    }
    let first = data.row(0);
    if data.rows().into_iter().all(|r| r == first) {
        return Ok(first.to_vec());
    }
    let mut y = crate::synth::column_mean(data);
    for _ in 0..max_iter {
        let mut pull = vec![0.0; d];
        let mut weight = 0.0;
        let mut coincident = 0usize;
        let mut nearest = (f64::INFINITY, 0);
        for (i, row) in data.rows().into_iter().enumerate() {
            let dist = distance(row.as_slice().expect("standard layout"), &y);
            if dist < nearest.0 {
                nearest = (dist, i);
            }
            if dist < ANCHOR_RADIUS {
                coincident += 1;
                continue;
            }
            for j in 0..d {
                pull[j] += (row[j] - y[j]) / dist;
            }
            weight += 1.0 / dist;
        }
        // pull = −gradient over the points away from y.
        let pull_norm = pull.iter().map(|p| p * p).sum::<f64>().sqrt();
        if coincident > 0 {
            if pull_norm <= coincident as f64 + tol * n as f64 {
                return Ok(y);
            }
            let step = (pull_norm - coincident as f64) / weight;
            for j in 0..d {
                y[j] += step * pull[j] / pull_norm;
            }
            continue;
        }
        if pull_norm <= tol * n as f64 {
            return Ok(y);
        }
        let candidate = data.row(nearest.1).to_vec();
        if data_point_is_optimal(data, &candidate, tol) {
            return Ok(candidate);
        }
        for j in 0..d {
            y[j] += pull[j] / weight;
        }
    }
    Err(Error::NotConverged { iterations: max_iter })
}

/// Subgradient test at a data point x: the unit pulls of the other points sum
/// to at most the multiplicity of x (plus tol·n).
fn data_point_is_optimal(data: &Array2<f64>, x: &[f64], tol: f64) -> bool {
    let mut pull = vec![0.0; x.len()];
    let mut multiplicity = 0usize;
    for row in data.rows() {
        let dist = distance(row.as_slice().expect("standard layout"), x);
        if dist < ANCHOR_RADIUS {
            multiplicity += 1;
            continue;
        }
        pull.iter_mut().zip(row.iter().zip(x)).for_each(|(p, (r, c))| *p += (r - c) / dist);
    }
    pull.iter().map(|p| p * p).sum::<f64>().sqrt() <= multiplicity as f64 + tol * data.nrows() as f64
}

/// Kolmogorov distance between the empirical CDF of sorted `xs` and N(μ, 1).
pub fn kolmogorov_to_gaussian(sorted: &[f64], mu: f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x - mu);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Grid search over μ ∈ median ± halfwidth for the unit-variance Gaussian
/// location closest in Kolmogorov distance to the sample.
pub fn gaussian_projection_1d(z: &CorruptedSet, grid_halfwidth: f64, grid_step: f64) -> Result<EstimateReport> {
    let start = Instant::now();
    if z.d() != 1 {
        return Err(Error::Dimension(format!("the 1-D projection needs d = 1, got {}", z.d())));
    }
    let xs: Vec<f64> = z.z.column(0).to_vec();
    let mu = gaussian_projection_of(&xs, grid_halfwidth, grid_step)?;
    Ok(report("gauss1d", z, vec![mu], start))
}

pub fn gaussian_projection_of(xs: &[f64], grid_halfwidth: f64, grid_step: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InsufficientData("no points".into()));
    }
    if !(grid_step > 0.0 && grid_halfwidth >= 0.0 && grid_halfwidth.is_finite()) {
        return Err(invalid("the grid is empty"));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let center = lower_median(&mut sorted.clone());
    let steps = (grid_halfwidth / grid_step).floor() as i64;
    let mut best = (f64::INFINITY, center);
    for s in -steps..=steps {
        let mu = center + s as f64 * grid_step;
        let dist = kolmogorov_to_gaussian(&sorted, mu);
        if dist < best.0 {
            best = (dist, mu);
        }
    }
    Ok(best.1)
}

fn check_sparsity(len: usize, k: usize) -> Result<()> {
    if k == 0 || k > len {
        return Err(invalid(format!("k must lie in 1..={len}, got {k}")));
    }
    Ok(())
}

/// Indices of the k largest |xᵢ|, lowest index first among ties.
fn top_k(x: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Keep the k entries of largest magnitude and zero the rest.
pub fn sparse_truncate(x: &[f64], k: usize) -> Result<Vec<f64>> {
    check_sparsity(x.len(), k)?;
    let mut out = vec![0.0; x.len()];
    for i in top_k(x, k) {
        out[i] = x[i];
    }
    Ok(out)
}

/// Euclidean norm of the k largest-magnitude entries.
pub fn norm_2k(x: &[f64], k: usize) -> Result<f64> {
    check_sparsity(x.len(), k)?;
    Ok(top_k(x, k).into_iter().map(|i| x[i] * x[i]).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{corrupt, AdversaryStrategy};
    use crate::synth::{sample, DistributionSpec, SampleSet};
    use ndarray::array;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn clean(data: Array2<f64>) -> CorruptedSet {
        let d = data.ncols();
        let n = data.nrows();
        let origin = Arc::new(SampleSet::from_data(data.clone(), vec![0.0; d], 0).unwrap());
        CorruptedSet::new(data, vec![true; n], 0.0, origin).unwrap()
    }

    #[test]
    fn baselines_examples() {
        let z = clean(array![[1.0], [2.0], [3.0]]);
        assert_eq!(sample_mean(&z).estimate, vec![2.0]);
        assert_eq!(coordinate_median(&z).estimate, vec![2.0]);
        let z = clean(array![[0.0], [0.0], [0.0], [1e6]]);
        assert_eq!(sample_mean(&z).estimate, vec![250_000.0]);
        assert_eq!(coordinate_median(&z).estimate, vec![0.0]);
        let z = clean(array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(coordinate_median(&z).estimate, vec![0.0, 0.0]);
    }

    #[test]
    fn geometric_median_examples() {
        let sq = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let g = geometric_median_of(&sq, 1e-10, 10_000).unwrap();
        assert!(distance(&g, &[0.5, 0.5]) < 1e-8);
        let g = geometric_median_of(&array![[0.0], [1.0], [10.0]], 1e-10, 10_000).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9, "{g:?}");
        let same = geometric_median_of(&array![[2.0, 3.0], [2.0, 3.0]], 1e-10, 10).unwrap();
        assert_eq!(same, vec![2.0, 3.0]);
    }

    #[test]
    fn fermat_point_against_grid_oracle() {
        let tri = array![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        let cost = |p: &[f64]| tri.rows().into_iter().map(|r| distance(r.as_slice().unwrap(), p)).sum::<f64>();
        let g = geometric_median_of(&tri, 1e-10, 10_000).unwrap();
        // Grid oracle at resolution 1e-4 over the bounding box around the centroid.
        let (mut best, mut arg) = (f64::INFINITY, [0.0, 0.0]);
        for a in 0..=2000 {
            for b in 0..=2000 {
                let p = [0.4 + a as f64 * 1e-4, 0.2 + b as f64 * 1e-4];
                let c = cost(&p);
                if c < best {
                    best = c;
                    arg = p;
                }
            }
        }
        assert!(distance(&g, &arg) <= 2e-4, "{g:?} vs {arg:?}");
        assert!(cost(&g) <= best + 1e-9);
    }

    #[test]
    fn weiszfeld_anchor_at_dominant_point() {
        // Five copies of the origin outweigh two distant points: the origin is optimal.
        let data = array![[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
        let g = geometric_median_of(&data, 1e-10, 10_000).unwrap();
        assert!(distance(&g, &[0.0, 0.0]) < 1e-9, "{g:?}");
    }

    #[test]
    fn projection_examples() {
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|i| 3.0 + crate::numeric::normal_quantile((i as f64 + 0.5) / n as f64).unwrap())
            .collect();
        let step = 0.01;
        let mu = gaussian_projection_of(&xs, 2.0, step).unwrap();
        assert!((mu - 3.0).abs() <= step, "{mu}");
        let s = sample(&DistributionSpec::standard_gaussian(1), n, 11).unwrap();
        let mu = gaussian_projection_of(s.data.column(0).as_slice().unwrap(), 1.0, 0.005).unwrap();
        assert!(mu.abs() <= 0.05, "{mu}");
        assert!(gaussian_projection_of(&xs, 1.0, 0.0).is_err());
        assert!(gaussian_projection_of(&[], 1.0, 0.1).is_err());
    }

    #[test]
    fn sparse_examples() {
        assert_eq!(sparse_truncate(&[3.0, -1.0, 2.0], 2).unwrap(), vec![3.0, 0.0, 2.0]);
        assert!((norm_2k(&[3.0, -1.0, 2.0], 2).unwrap() - 13f64.sqrt()).abs() < 1e-15);
        let x = [1.0, -2.0, 0.5];
        assert_eq!(sparse_truncate(&x, 3).unwrap(), x.to_vec());
        assert!((norm_2k(&x, 3).unwrap() - 5.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(sparse_truncate(&[1.0, -1.0, 1.0], 2).unwrap(), vec![1.0, -1.0, 0.0]);
        assert!(sparse_truncate(&x, 0).is_err() && norm_2k(&x, 4).is_err());
    }

    #[test]
    fn sos_single_sample_pins_mean() {
        let z = clean(array![[2.5]]);
        let rep = sos_mean(&z, 1.0, 2, 2).unwrap();
        assert!((rep.estimate[0] - 2.5).abs() < 1e-5, "{rep:?}");
    }

    #[test]
    fn sos_clean_gaussian() {
        let s = sample(&DistributionSpec::standard_gaussian(1), 20, 21).unwrap();
        let z = corrupt(s, 0.0, &AdversaryStrategy::Identity, 0).unwrap();
        let rep = sos_mean(&z, 1.5, 2, 2).unwrap();
        assert!(rep.error <= 0.2, "{rep:?}");
    }

    #[test]
    fn sos_far_outliers_at_eps_04() {
        let s = sample(&DistributionSpec::standard_gaussian(1), 20, 5).unwrap();
        let good_var = crate::synth::covariance_opnorm(&s.data).unwrap();
        let sigma = good_var.sqrt().max(1.0);
        let z = corrupt(s, 0.4, &AdversaryStrategy::ReplaceWithPoint { location: vec![1e3] }, 6).unwrap();
        let rep = sos_mean(&z, sigma, 2, 2).unwrap();
        assert!(rep.error <= 4.0 * sigma * 1.1 + 1e-3, "{rep:?}");
    }

    #[test]
    fn rounding_never_beats_the_pseudo_distance() {
        use rand::Rng;
        let s = sample(&DistributionSpec::standard_gaussian(2), 12, 8).unwrap();
        let z = corrupt(s, 0.25, &AdversaryStrategy::ReplaceWithPoint { location: vec![30.0, -30.0] }, 9).unwrap();
        let opts = SosOptions::default();
        let out = sos_mean_with(&z, 1.5, 2, 2, &opts).unwrap();
        let mean = out.pe.mean();
        let mut rng = crate::synth::rng_for(4);
        for _ in 0..200 {
            let c: Vec<f64> = (0..2).map(|_| rng.random_range(-50.0..50.0)).collect();
            let lhs: f64 = mean.iter().zip(&c).map(|(m, c)| (m - c).powi(2)).sum();
            let rhs = out.pe.squared_distance(&c).unwrap();
            assert!(lhs <= rhs + 10.0 * opts.solver.tol, "c={c:?}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn sos_translates_with_the_data() {
        let s = sample(&DistributionSpec::standard_gaussian(1), 10, 2).unwrap();
        let z = corrupt(s, 0.2, &AdversaryStrategy::ReplaceWithPoint { location: vec![15.0] }, 3).unwrap();
        let base = sos_mean(&z, 1.5, 2, 2).unwrap();
        for t in [-7.25, 1e3] {
            let moved = sos_mean(&z.translated(&[t]), 1.5, 2, 2).unwrap();
            let gap = (moved.estimate[0] - base.estimate[0] - t).abs();
            assert!(gap <= 1e-5 * (1.0 + t.abs()), "t={t}: gap {gap}");
            assert!((moved.error - base.error).abs() <= 1e-5 * (1.0 + t.abs()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn truncation_is_three_approximate(
            x in prop::collection::vec(-10.0f64..10.0, 1..12),
            seed in any::<u64>(),
            k_frac in 0.0f64..1.0,
        ) {
            use rand::Rng;
            let d = x.len();
            let k = 1 + ((d - 1) as f64 * k_frac) as usize;
            let mut rng = crate::synth::rng_for(seed);
            let mut a = vec![0.0; d];
            for i in rand::seq::index::sample(&mut rng, d, k) {
                a[i] = rng.random_range(-10.0..10.0);
            }
            let h = sparse_truncate(&x, k).unwrap();
            let diff: Vec<f64> = x.iter().zip(&a).map(|(p, q)| p - q).collect();
            prop_assert!(distance(&h, &a) <= 3.0 * norm_2k(&diff, k).unwrap() * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn baselines_translate_exactly(t in -100.0f64..100.0, seed in 0u64..1000) {
            let s = sample(&DistributionSpec::standard_gaussian(2), 9, seed).unwrap();
            let z = corrupt(s, 0.2, &AdversaryStrategy::ReplaceWithPoint { location: vec![7.0, -3.0] }, seed).unwrap();
            let shifted = z.translated(&[t, 0.25 * t]);
            let m0 = sample_mean(&z).estimate;
            let m1 = sample_mean(&shifted).estimate;
            let c0 = coordinate_median(&z).estimate;
            let c1 = coordinate_median(&shifted).estimate;
            let g0 = geometric_median(&z, 1e-10).unwrap().estimate;
            let g1 = geometric_median(&shifted, 1e-10).unwrap().estimate;
            let ts = [t, 0.25 * t];
            for j in 0..2 {
                prop_assert!((m1[j] - m0[j] - ts[j]).abs() <= 1e-9 * (1.0 + t.abs()));
                prop_assert_eq!(c1[j], c0[j] + ts[j]);
                prop_assert!((g1[j] - g0[j] - ts[j]).abs() <= 1e-6 * (1.0 + t.abs()));
            }
        }
    }
}
