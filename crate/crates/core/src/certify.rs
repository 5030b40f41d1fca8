//! Closed-form lower-bound pairs, feasibility identities, bound formulas and
//! the randomized inequality suite.

use rand::Rng;
use serde::Serialize;

use crate::adversary::{scaled_spike, CorruptedSet};
use crate::error::{invalid, Error, Result};
use crate::numeric::{normal_cdf, normal_quantile};
use crate::sdp::PseudoExpectation;
use crate::synth::{covariance_opnorm, rng_for, DistributionSpec, Law1d};

/// One named numeric check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub passed: bool,
}

impl Check {
    fn equal(name: &str, value: f64, target: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            value,
            target,
            passed: (value - target).abs() <= tol,
        }
    }

    fn at_most(name: &str, value: f64, target: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            value,
            target,
            passed: value <= target + tol,
        }
    }

    fn at_least(name: &str, value: f64, target: f64) -> Check {
        Check {
            name: name.into(),
            value,
            target,
            passed: value >= target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundPair {
    pub family: String,
    pub d1: DistributionSpec,
    pub d2: DistributionSpec,
    pub eps: f64,
    pub k: Option<u32>,
    pub tv: f64,
    pub overlap: f64,
    pub mean_gap: f64,
    pub kth_central_moment_d2: Option<f64>,
    pub variance_d2: f64,
    pub checks: Vec<Check>,
}

impl LowerBoundPair {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const EXACT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvReport {
    pub tv: f64,
    pub overlap: f64,
}

/// Total variation between two one-dimensional laws.
///
/// Atoms are compared exactly; the continuous parts are integrated
/// adaptively between breakpoints and sign changes of the density difference.
pub fn tv_distance(a: &Law1d, b: &Law1d) -> Result<TvReport> {
    let mut locations: Vec<f64> = a.atoms().iter().chain(b.atoms().iter()).map(|t| t.0).collect();
    locations.sort_by(f64::total_cmp);
    locations.dedup();
    let atom_part: f64 = locations.iter().map(|&x| (a.atom_mass(x) - b.atom_mass(x)).abs()).sum();

    let cont_part = match (a.support_window(), b.support_window()) {
        (None, None) => 0.0,
        (wa, wb) => {
            let (lo, hi) = match (wa, wb) {
                (Some(x), Some(y)) => (x.0.min(y.0), x.1.max(y.1)),
                (Some(x), None) | (None, Some(x)) => x,
                (None, None) => unreachable!(),
            };
            integrate_abs_difference(a, b, lo, hi)
        }
    };
    let tv = (0.5 * (atom_part + cont_part)).clamp(0.0, 1.0);
    Ok(TvReport { tv, overlap: 1.0 - tv })
}

/// TV between the one-dimensional laws of two specs.
pub fn tv_distance_specs(d1: &DistributionSpec, d2: &DistributionSpec) -> Result<TvReport> {
    tv_distance(&d1.law_1d()?, &d2.law_1d()?)
}

/// Closed form for N(a, σ²) vs N(b, σ²): 2Φ(|a − b|/(2σ)) − 1.
pub fn tv_gaussian_equal_variance(a: f64, b: f64, sd: f64) -> f64 {
    2.0 * normal_cdf((a - b).abs() / (2.0 * sd)) - 1.0
}

fn integrate_abs_difference(a: &Law1d, b: &Law1d, lo: f64, hi: f64) -> f64 {
    let f = |x: f64| a.density(x) - b.density(x);
    let mut cuts: Vec<f64> = a
        .breakpoints()
        .into_iter()
        .chain(b.breakpoints())
        .filter(|x| *x > lo && *x < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    // Sign changes on a fine grid, refined by bisection.
    let grid = 20_000;
    let step = (hi - lo) / grid as f64;
    let mut prev = f(lo);
    for g in 1..=grid {
        let x = lo + g as f64 * step;
        let cur = f(x);
        if prev * cur < 0.0 {
            let (mut l, mut r) = (x - step, x);
            for _ in 0..200 {
                let m = 0.5 * (l + r);
                if f(l) * f(m) <= 0.0 {
                    r = m;
                } else {
                    l = m;
                }
                if r - l <= 1e-15 * (1.0 + m.abs()) {
                    break;
                }
            }
            cuts.push(0.5 * (l + r));
        }
        prev = cur;
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let g = |x: f64| f(x).abs();
    cuts.windows(2)
        .map(|w| {
            // Split long pieces so the adaptive rule sees the bulk of the mass.
            let pieces = (((w[1] - w[0]) / 0.5).ceil() as usize).max(1);
            let h = (w[1] - w[0]) / pieces as f64;
            (0..pieces)
                .map(|p| adaptive_simpson(&g, w[0] + p as f64 * h, w[0] + (p + 1) as f64 * h, 1e-14, 40))
                .sum::<f64>()
        })
        .sum()
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64, fc: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
        + simpson_step(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
}

fn check_open_half(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    Ok(())
}

/// Point mass at 0 versus a spike at √k·(2ε(1−2ε))^{−1/k} with probability 2ε.
pub fn lb_bounded_moment_pair(eps: f64, k: u32) -> Result<LowerBoundPair> {
    check_open_half(eps)?;
    if k < 2 || k % 2 != 0 {
        return Err(invalid(format!("k must be even and >= 2, got {k}")));
    }
    let kf = k as f64;
    let spike = scaled_spike(eps, k);
    let d1 = DistributionSpec::point_mass(0.0);
    let d2 = DistributionSpec::TwoPointMixture {
        base: 0.0,
        spike_location: spike,
        spike_prob: 2.0 * eps,
    };
    let (l1, l2) = (d1.law_1d()?, d2.law_1d()?);
    let tv = tv_distance(&l1, &l2)?;
    let gap = (l2.mean() - l1.mean()).abs();
    let moment = l2.central_moment(k);
    let moment_formula = kf.powf(kf / 2.0) * ((2.0 * eps).powi(k as i32 - 1) + (1.0 - 2.0 * eps).powi(k as i32 - 1));
    let gap_formula = kf.sqrt() * (2.0 * eps).powf(1.0 - 1.0 / kf) * (1.0 - 2.0 * eps).powf(-1.0 / kf);
    let checks = vec![
        Check::equal("tv = 2 eps", tv.tv, 2.0 * eps, EXACT),
        Check::at_most("k-th central moment <= k^(k/2)", moment, kf.powf(kf / 2.0), EXACT),
        Check::equal("k-th central moment closed form", moment, moment_formula, EXACT * moment_formula.max(1.0)),
        Check::equal("mean gap closed form", gap, gap_formula, EXACT * gap_formula.max(1.0)),
    ];
    Ok(LowerBoundPair {
        family: "moment".into(),
        d1,
        d2,
        eps,
        k: Some(k),
        tv: tv.tv,
        overlap: tv.overlap,
        mean_gap: gap,
        kth_central_moment_d2: Some(moment),
        variance_d2: l2.central_moment(2),
        checks,
    })
}

/// N(0,1) versus N(μ,1) with TV exactly 2ε, μ = 2Φ⁻¹(½ + ε).
pub fn lb_gaussian_pair(eps: f64) -> Result<LowerBoundPair> {
    check_open_half(eps)?;
    if eps <= 0.25 {
        return Err(invalid(format!("the Gaussian lower bound needs eps > 1/4, got {eps}")));
    }
    let mu = 2.0 * normal_quantile(0.5 + eps)?;
    let d1 = DistributionSpec::GaussianIdentity { mean: vec![0.0] };
    let d2 = DistributionSpec::GaussianIdentity { mean: vec![mu] };
    let closed = tv_gaussian_equal_variance(0.0, mu, 1.0);
    let integrated = tv_distance_specs(&d1, &d2)?;
    let log_term = (1.0 / (2.0 - 4.0 * eps)).ln();
    let checks = vec![
        Check::equal("2 Phi(mu/2) - 1 = 2 eps", closed, 2.0 * eps, 1e-8),
        Check::equal("integrated tv agrees", integrated.tv, closed, 1e-9),
        Check::at_least("mu >= sqrt(2 ln(1/(2-4 eps)))", mu, (2.0 * log_term).sqrt()),
        Check::at_least(
            "mu >= sqrt(ln(1/(1-2 eps)) - ln 2)",
            mu,
            ((1.0 / (1.0 - 2.0 * eps)).ln() - 2f64.ln()).sqrt(),
        ),
    ];
    Ok(LowerBoundPair {
        family: "gaussian".into(),
        d1,
        d2,
        eps,
        k: None,
        tv: closed,
        overlap: 1.0 - closed,
        mean_gap: mu,
        kth_central_moment_d2: None,
        variance_d2: 1.0,
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Large,
    Small,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "large" => Ok(Regime::Large),
            "small" => Ok(Regime::Small),
            other => Err(Error::Parse(format!("unknown regime `{other}`"))),
        }
    }
}

/// N(0,1) versus N(0,1) with a spike added, matching a bounded-covariance
/// law that a Gaussian cannot be told apart from.
///
/// Large regime (¼ < ε < ½): spike δ^{−1/2}/(2ε) with probability 2ε.
/// Small regime (ε ≤ 0.1): spike √(ln 1/ε) with probability ε.
pub fn lb_gauss_vs_bounded_cov(eps: f64, regime: Regime) -> Result<LowerBoundPair> {
    check_open_half(eps)?;
    let delta = 1.0 - 2.0 * eps;
    let (spike, prob) = match regime {
        Regime::Large => {
            if eps <= 0.25 {
                return Err(invalid(format!("large regime needs eps > 1/4, got {eps}")));
            }
            (delta.powf(-0.5) / (2.0 * eps), 2.0 * eps)
        }
        Regime::Small => {
            if eps > 0.1 {
                return Err(invalid(format!("small regime needs eps <= 0.1, got {eps}")));
            }
            ((1.0 / eps).ln().sqrt(), eps)
        }
    };
    let d1 = DistributionSpec::GaussianIdentity { mean: vec![0.0] };
    let d2 = DistributionSpec::GaussianWithSpike {
        mean: 0.0,
        spike_location: spike,
        spike_prob: prob,
    };
    let (l1, l2) = (d1.law_1d()?, d2.law_1d()?);
    let tv = tv_distance(&l1, &l2)?;
    let gap = (l2.mean() - l1.mean()).abs();
    let variance = l2.central_moment(2);
    let checks = match regime {
        Regime::Large => vec![
            Check::at_most("tv <= 2 eps", tv.tv, 2.0 * eps, EXACT),
            Check::equal("variance = delta + 1/(2 eps)", variance, delta + 1.0 / (2.0 * eps), EXACT),
            Check::at_most("variance <= 1 + 3 delta", variance, 1.0 + 3.0 * delta, EXACT),
            Check::equal("gap = delta^(-1/2)", gap, delta.powf(-0.5), EXACT),
        ],
        Regime::Small => {
            let l = (1.0 / eps).ln();
            vec![
                Check::at_most("tv <= 2 eps", tv.tv, 2.0 * eps, EXACT),
                Check::equal("variance = (1-eps)(1 + eps ln(1/eps))", variance, (1.0 - eps) * (1.0 + eps * l), EXACT),
                Check::at_most("variance <= 1 + eps ln(1/eps)", variance, 1.0 + eps * l, EXACT),
                Check::equal("gap = eps sqrt(ln(1/eps))", gap, eps * l.sqrt(), EXACT),
            ]
        }
    };
    Ok(LowerBoundPair {
        family: "gauss-vs-cov".into(),
        d1,
        d2,
        eps,
        k: None,
        tv: tv.tv,
        overlap: tv.overlap,
        mean_gap: gap,
        kth_central_moment_d2: None,
        variance_d2: variance,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    /// wᵢw*ᵢ = 1 ⇒ zᵢ = x*ᵢ.
    pub consistency: bool,
    /// (1 − wᵢw*ᵢ)² = 1 − wᵢw*ᵢ for all i.
    pub idempotence: bool,
    /// (1/n)Σ(1 − wᵢw*ᵢ) ≤ 2ε.
    pub disagreement: f64,
    pub disagreement_ok: bool,
    /// (1/n)Σ wᵢw*ᵢ ≥ 1 − 2ε.
    pub overlap: f64,
    pub overlap_ok: bool,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.consistency && self.idempotence && self.disagreement_ok && self.overlap_ok
    }
}

/// Check the overlap identities for a boolean w meeting the mass constraint.
pub fn check_feasibility_identities(z: &CorruptedSet, w: &[f64]) -> Result<IdentityReport> {
    let n = z.n();
    if w.len() != n {
        return Err(Error::Dimension(format!("w has length {} but n = {n}", w.len())));
    }
    if w.iter().any(|&x| x != 0.0 && x != 1.0) {
        return Err(invalid("w must be boolean"));
    }
    let mass = w.iter().filter(|&&x| x == 1.0).count();
    let required = ((1.0 - z.epsilon) * n as f64 - 1e-9).ceil() as usize;
    if mass < required {
        return Err(invalid(format!("w selects {mass} points but the mass constraint needs {required}")));
    }
    let both: Vec<bool> = (0..n).map(|i| w[i] == 1.0 && z.mask_wstar[i]).collect();
    let consistency = (0..n).filter(|&i| both[i]).all(|i| z.z.row(i) == z.origin.data.row(i));
    let idempotence = both.iter().all(|&b| {
        let t = 1.0 - if b { 1.0 } else { 0.0 };
        t * t == t
    });
    let agree = both.iter().filter(|&&b| b).count();
    let missing = n - agree;
    let limit = (2.0 * z.epsilon * n as f64 + 1e-9).floor() as usize;
    Ok(IdentityReport {
        consistency,
        idempotence,
        disagreement: missing as f64 / n as f64,
        disagreement_ok: missing <= limit,
        overlap: agree as f64 / n as f64,
        overlap_ok: missing <= limit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityResult {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// max (lhs − rhs)/scale over trials; ≤ 0 means every trial held exactly.
    pub worst_relative_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolkitReport {
    pub trials: usize,
    pub seed: u64,
    pub slack: f64,
    pub results: Vec<InequalityResult>,
}

impl ToolkitReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.violations == 0)
    }
}

/// Relative slack allowed by the suite.
pub const TOOLKIT_SLACK: f64 = 1e-12;

struct Tally {
    name: &'static str,
    trials: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            trials: 0,
            violations: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    /// Record lhs ≤ rhs with magnitude `scale` for the relative slack.
    fn record(&mut self, lhs: f64, rhs: f64, scale: f64) {
        let scale = scale.abs().max(f64::MIN_POSITIVE);
        let excess = (lhs - rhs) / scale;
        self.trials += 1;
        self.worst = self.worst.max(excess);
        if excess > TOOLKIT_SLACK {
            self.violations += 1;
        }
    }

    fn finish(self) -> InequalityResult {
        InequalityResult {
            name: self.name.into(),
            trials: self.trials,
            violations: self.violations,
            worst_relative_excess: self.worst,
        }
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

/// Evaluate each inequality of the toolkit at `trials` random admissible inputs.
pub fn toolkit_suite(trials: usize, seed: u64) -> Result<ToolkitReport> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let mut rng = rng_for(seed);
    let mut squares = Tally::new("squares: 2ab <= a^2 + b^2");
    let mut cs = Tally::new("cauchy-schwarz");
    let mut holder = Tally::new("holder (boolean w, k in {2,4,8})");
    let mut amgm = Tally::new("am-gm");
    let mut triangle = Tally::new("triangle (t in {2,4,6,8})");
    let mut cancel = Tally::new("cancellation");
    let mut sqrt = Tally::new("square root (k in {2,4,8})");
    let mut power = Tally::new("power-of-two reduction");
    let mut factored = Tally::new("factored certificate");

    for t in 0..trials {
        let (a, b): (f64, f64) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        squares.record(2.0 * a * b, a * a + b * b, a * a + b * b);

        let len = rng.random_range(1..=12);
        let (u, v) = (gaussian_vec(&mut rng, len), gaussian_vec(&mut rng, len));
        let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
        let (nu, nv): (f64, f64) = (u.iter().map(|x| x * x).sum(), v.iter().map(|x| x * x).sum());
        cs.record(dot * dot, nu * nv, nu * nv);

        let k = [2, 4, 8][t % 3];
        let w: Vec<f64> = (0..len).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        let wb: f64 = w.iter().zip(&u).map(|(x, y)| x * y).sum();
        let sw: f64 = w.iter().sum();
        let sbk: f64 = u.iter().map(|x| x.powi(k)).sum();
        let rhs = sw.powi(k - 1) * sbk;
        holder.record(wb.powi(k), rhs, rhs.max(wb.powi(k)));

        let tt = rng.random_range(1..=8);
        let xs: Vec<f64> = (0..tt).map(|_| rng.random_range(0.0..3.0)).collect();
        let prod: f64 = xs.iter().product();
        let mean_pow = xs.iter().map(|x| x.powi(tt as i32)).sum::<f64>() / tt as f64;
        amgm.record(prod, mean_pow, mean_pow.max(prod));

        let te = [2, 4, 6, 8][t % 4];
        let tri_rhs = 2f64.powi(te - 1) * (a.powi(te) + b.powi(te));
        triangle.record((a + b).powi(te), tri_rhs, tri_rhs);

        let c = rng.random_range(0.01..100.0);
        let x = c * rng.random::<f64>();
        debug_assert!(x * x <= c * x);
        cancel.record(x, c, c);

        let ks = [2, 4, 8][t % 3];
        let xr: f64 = rng.random_range(-3.0..3.0);
        let cr = xr.powi(ks) + rng.random_range(1e-6..5.0);
        let root = cr.powf(1.0 / ks as f64);
        sqrt.record(xr, root, root);

        let kp = [2, 4, 6, 8][t % 4];
        let cp: f64 = rng.random_range(0.1..5.0);
        let norm2 = nu;
        let norm_k = norm2.powf(kp as f64 / 2.0);
        let p_rhs = 2.0 / (kp as f64 * cp.powi(kp - 2)) * (norm_k + (kp as f64 / 2.0 - 1.0) * cp.powi(kp));
        power.record(norm2, p_rhs, p_rhs);

        // a ≥ 1 − 2ε and a·m^{2k} ≤ 2^k k^{k/2} m^k imply the factored form.
        let kf = [2, 4][t % 2];
        let eps = rng.random_range(0.0..0.49);
        let overlap = rng.random_range((1.0 - 2.0 * eps)..=1.0);
        let cst = 2f64.powi(kf) * (kf as f64).powf(kf as f64 / 2.0);
        let m = rng.random::<f64>() * (cst / overlap).powf(1.0 / kf as f64);
        let per_factor = overlap * m.powi(2 * kf) <= cst * m.powi(kf);
        if per_factor {
            let lhs = overlap.powi(kf) * m.powi(2 * kf);
            let rhs = cst * overlap.powi(kf - 1) * m.powi(kf);
            factored.record(lhs, rhs, rhs.max(lhs));
        } else {
            factored.trials += 1;
        }
    }

    Ok(ToolkitReport {
        trials,
        seed,
        slack: TOOLKIT_SLACK,
        results: [squares, cs, holder, amgm, triangle, cancel, sqrt, power, factored]
            .into_iter()
            .map(Tally::finish)
            .collect(),
    })
}

/// Error-bound evaluators, all in units of σ² (squared error) unless noted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundFormulas;

impl BoundFormulas {
    /// 8ε/(1−2ε).
    pub fn bounded_cov_optimal(eps: f64) -> f64 {
        8.0 * eps / (1.0 - 2.0 * eps)
    }

    /// 8ε/(1−2ε)².
    pub fn bounded_cov_breakdown(eps: f64) -> f64 {
        8.0 * eps / (1.0 - 2.0 * eps).powi(2)
    }

    /// 4k/δ^{2/k}.
    pub fn moment_optimal(eps: f64, k: u32) -> f64 {
        let kf = k as f64;
        4.0 * kf / (1.0 - 2.0 * eps).powf(2.0 / kf)
    }

    /// (2^{2k−1}·ε^{k−1}·k^{k/2}/δ^k)^{2/k}.
    pub fn moment_breakdown(eps: f64, k: u32) -> f64 {
        let kf = k as f64;
        let kth = 2f64.powf(2.0 * kf - 1.0) * eps.powf(kf - 1.0) * kf.powf(kf / 2.0) / (1.0 - 2.0 * eps).powf(kf);
        kth.powf(2.0 / kf)
    }

    /// 2^{2−1/t}·ε^{1−1/t}·M^{1/t}/δ, a bound on the error itself.
    pub fn sparse_breakdown(eps: f64, t: u32, m: f64) -> f64 {
        let tf = t as f64;
        2f64.powf(2.0 - 1.0 / tf) * eps.powf(1.0 - 1.0 / tf) * m.powf(1.0 / tf) / (1.0 - 2.0 * eps)
    }

    /// √(ln 1/δ), a bound on the error itself.
    pub fn gaussian(eps: f64) -> f64 {
        (1.0 / (1.0 - 2.0 * eps)).ln().sqrt()
    }

    /// (optimal, breakdown) squared-error bounds for moment order k.
    pub fn for_k(eps: f64, k: u32) -> (f64, f64) {
        if k == 2 {
            (Self::bounded_cov_optimal(eps), Self::bounded_cov_breakdown(eps))
        } else {
            (Self::moment_optimal(eps, k), Self::moment_breakdown(eps, k))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundComparison {
    pub name: String,
    /// Bound on Ẽ‖μ − μ*‖², already multiplied by the σ scale.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeBoundReport {
    pub status: BoundStatus,
    pub pe_squared_error: f64,
    pub rounded_error: f64,
    /// Largest empirical moment statistic of the uncorrupted sample, and its allowance.
    pub moment_statistic: f64,
    pub moment_allowance: f64,
    pub relaxation_degree: u32,
    pub advisory: Option<String>,
    pub comparisons: Vec<BoundComparison>,
    pub diagnostics: Vec<String>,
}

/// Largest eigenvalue of (1/n)Σ uᵢuᵢᵀ with uᵢ = (xᵢ − x̄)⊗(xᵢ − x̄).
pub fn fourth_moment_opnorm(data: &ndarray::Array2<f64>) -> f64 {
    let (n, d) = data.dim();
    let mean = crate::synth::column_mean(data);
    let dd = d * d;
    let mut m = vec![0.0; dd * dd];
    for row in data.rows() {
        let c: Vec<f64> = (0..d).map(|j| row[j] - mean[j]).collect();
        let u: Vec<f64> = (0..dd).map(|p| c[p / d] * c[p % d]).collect();
        for p in 0..dd {
            for q in 0..dd {
                m[p * dd + q] += u[p] * u[q] / n as f64;
            }
        }
    }
    crate::numeric::max_eigenvalue(dd, &m)
}

/// Compare Ẽ‖μ − μ*‖² with the bound formulas, μ* the uncorrupted empirical mean.
///
/// The precondition is the moment bound the proofs assume for the uncorrupted
/// sample: covariance ⪯ σ²I for k = 2, fourth-moment flattening ⪯ 16σ⁴I for
/// k = 4. When it fails the report is Skipped.
pub fn check_pe_error_bound(pe: &PseudoExpectation, z: &CorruptedSet, sigma: f64, k: u32, tol: f64) -> Result<PeBoundReport> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    let eps = z.epsilon;
    let target = &z.origin.empirical_mean;
    let pe_sq = pe.squared_distance(target)?;
    let est = pe.mean();
    let rounded = est.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let (statistic, allowance) = match k {
        2 => (covariance_opnorm(&z.origin.data)?, sigma * sigma),
        4 => (fourth_moment_opnorm(&z.origin.data), 16.0 * sigma.powi(4)),
        _ => return Err(Error::Unsupported(format!("k must be 2 or 4, got {k}"))),
    };
    let degree = 2 * pe.r;
    let advisory = (k == 2 && degree < 6).then(|| format!("pseudo-expectation degree {degree} is below the proof degree 6"));
    let mut diagnostics = Vec::new();
    let scale = sigma * sigma;
    let (opt, brk) = BoundFormulas::for_k(eps, k);
    let slack = 100.0 * tol;
    let comparisons = vec![
        BoundComparison {
            name: "optimal".into(),
            bound: opt * scale,
            passed: pe_sq <= opt * scale + slack,
        },
        BoundComparison {
            name: "breakdown".into(),
            bound: brk * scale,
            passed: pe_sq <= brk * scale + slack,
        },
    ];
    let status = if statistic > allowance {
        diagnostics.push(format!(
            "uncorrupted sample moment statistic {statistic:.6} exceeds the assumed bound {allowance:.6}"
        ));
        BoundStatus::Skipped
    } else if comparisons.iter().all(|c| c.passed) {
        BoundStatus::Pass
    } else {
        BoundStatus::Fail
    };
    Ok(PeBoundReport {
        status,
        pe_squared_error: pe_sq,
        rounded_error: rounded,
        moment_statistic: statistic,
        moment_allowance: allowance,
        relaxation_degree: degree,
        advisory,
        comparisons,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::corrupt;
    use crate::synth::{sample, SampleSet};
    use std::sync::Arc;

    #[test]
    fn moment_pair_examples() {
        let p = lb_bounded_moment_pair(0.25, 2).unwrap();
        assert!((p.mean_gap - 2f64.sqrt()).abs() < 1e-12);
        assert!((p.kth_central_moment_d2.unwrap() - 2.0).abs() < 1e-12);
        assert!(p.all_passed(), "{:?}", p.checks);
        let small = lb_bounded_moment_pair(1e-9, 4).unwrap();
        assert!(small.mean_gap < 1e-5);
        assert!(lb_bounded_moment_pair(0.5, 2).is_err());
        assert!(lb_bounded_moment_pair(0.0, 2).is_err());
    }

    #[test]
    fn moment_formula_bounded_on_grid() {
        for k in [2u32, 4, 6] {
            let kf = k as f64;
            for i in 1..500 {
                let eps = i as f64 / 1000.0;
                let v = kf.powf(kf / 2.0) * ((2.0 * eps).powi(k as i32 - 1) + (1.0 - 2.0 * eps).powi(k as i32 - 1));
                assert!(v <= kf.powf(kf / 2.0) + 1e-9, "k={k} eps={eps}");
            }
        }
    }

    #[test]
    fn gaussian_pair_examples() {
        let p = lb_gaussian_pair(0.45).unwrap();
        assert!(p.all_passed(), "{:?}", p.checks);
        assert!(p.mean_gap >= 5f64.ln().sqrt());
        assert!((5f64.ln().sqrt() - 1.2686).abs() < 1e-4);
        let mut prev = 0.0;
        for eps in [0.3, 0.4, 0.45, 0.49, 0.499, 0.4999] {
            let mu = lb_gaussian_pair(eps).unwrap().mean_gap;
            assert!(mu > prev);
            prev = mu;
        }
        assert!(lb_gaussian_pair(0.25).is_err());
    }

    #[test]
    fn appendix_pairs() {
        let large = lb_gauss_vs_bounded_cov(0.4, Regime::Large).unwrap();
        assert!((large.mean_gap - 5f64.sqrt()).abs() < 1e-12);
        assert!((large.variance_d2 - 1.45).abs() < 1e-12);
        assert!(large.all_passed(), "{:?}", large.checks);
        let small = lb_gauss_vs_bounded_cov(0.01, Regime::Small).unwrap();
        assert!((small.mean_gap - 0.0215).abs() < 1e-4);
        assert!(small.all_passed(), "{:?}", small.checks);
        assert!(lb_gauss_vs_bounded_cov(0.3, Regime::Small).is_err());
        assert!(lb_gauss_vs_bounded_cov(0.2, Regime::Large).is_err());
    }

    #[test]
    fn tv_examples() {
        let g = Law1d::gaussian(0.0, 1.0);
        let same = tv_distance(&g, &g).unwrap();
        assert_eq!(same.tv, 0.0);
        assert_eq!(same.overlap, 1.0);
        let shifted = tv_distance(&g, &Law1d::gaussian(2.0, 1.0)).unwrap();
        let oracle = 2.0 * normal_cdf(1.0) - 1.0;
        assert!((shifted.tv - oracle).abs() < 1e-10);
        assert!((oracle - 0.6827).abs() < 1e-4);
        for eps in [0.05, 0.2, 0.45] {
            let p = lb_bounded_moment_pair(eps, 4).unwrap();
            assert!((p.tv - 2.0 * eps).abs() < 1e-12);
            assert_eq!(p.tv + p.overlap, 1.0);
        }
    }

    #[test]
    fn tv_unequal_variance_against_quadrature_oracle() {
        // Independent midpoint rule on a wide window.
        let (a, b) = (Law1d::gaussian(0.0, 1.0), Law1d::gaussian(0.5, 2.0));
        let h = 1e-4;
        let oracle: f64 = (0..400_000)
            .map(|i| {
                let x = -20.0 + (i as f64 + 0.5) * h;
                (a.density(x) - b.density(x)).abs() * h
            })
            .sum::<f64>()
            / 2.0;
        let tv = tv_distance(&a, &b).unwrap().tv;
        assert!((tv - oracle).abs() < 1e-8, "{tv} vs {oracle}");
    }

    fn set_with_mask(mask: Vec<bool>, eps: f64) -> CorruptedSet {
        let n = mask.len();
        let data = ndarray::Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let origin = Arc::new(SampleSet::from_data(data.clone(), vec![0.0], 0).unwrap());
        let mut z = data;
        for i in 0..n {
            if !mask[i] {
                z[[i, 0]] = 1e6;
            }
        }
        CorruptedSet::new(z, mask, eps, origin).unwrap()
    }

    #[test]
    fn identities_examples() {
        let mask: Vec<bool> = (0..10).map(|i| i >= 4).collect();
        let c = set_with_mask(mask.clone(), 0.4);
        let wstar: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let r = check_feasibility_identities(&c, &wstar).unwrap();
        assert!(r.all_passed() && r.overlap >= 0.6);
        let w: Vec<f64> = (0..10).map(|i| if i < 6 { 1.0 } else { 0.0 }).collect();
        let r = check_feasibility_identities(&c, &w).unwrap();
        assert!((r.disagreement - 0.8).abs() < 1e-15 && r.all_passed());
        let thin = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(check_feasibility_identities(&c, &thin).is_err());
        assert!(check_feasibility_identities(&c, &[0.5; 10]).is_err());
    }

    #[test]
    fn toolkit_tight_cases_and_suite() {
        let (x, c) = (3.0f64, 3.0f64);
        assert!(x * x <= c * x && x <= c);
        assert_eq!(2f64.powi(4), 2f64.powi(3) * 2.0);
        let report = toolkit_suite(2000, 5).unwrap();
        assert!(report.all_passed(), "{:?}", report.results);
        assert!(toolkit_suite(0, 1).is_err());
    }

    #[test]
    fn holder_k2_matches_cauchy_schwarz_oracle() {
        let mut rng = rng_for(77);
        for _ in 0..10_000 {
            let len = rng.random_range(1..10);
            let w: Vec<f64> = (0..len).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
            let b = gaussian_vec(&mut rng, len);
            let lhs: f64 = w.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>().powi(2);
            // Cauchy-Schwarz with w² = w gives the same right-hand side.
            let rhs = w.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|x| x * x).sum::<f64>();
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bound_formula_examples_and_shape() {
        assert!((BoundFormulas::bounded_cov_optimal(0.25) - 4.0).abs() < 1e-12);
        assert!((BoundFormulas::bounded_cov_breakdown(0.4) - 80.0).abs() < 1e-9);
        let evals: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(BoundFormulas::bounded_cov_optimal),
            Box::new(BoundFormulas::bounded_cov_breakdown),
            Box::new(|e| BoundFormulas::moment_optimal(e, 2)),
            Box::new(|e| BoundFormulas::moment_optimal(e, 4)),
            Box::new(|e| BoundFormulas::moment_breakdown(e, 2)),
            Box::new(|e| BoundFormulas::moment_breakdown(e, 4)),
            Box::new(|e| BoundFormulas::sparse_breakdown(e, 4, 3.0)),
            Box::new(BoundFormulas::gaussian),
        ];
        for f in &evals {
            assert!(f(0.0).is_finite());
            assert!(f(0.5 - 1e-12) > 1e3 || f(0.5 - 1e-12) > 5.0);
            for i in 1..49 {
                let (a, b) = (i as f64 / 100.0, (i + 1) as f64 / 100.0);
                assert!(f(b) >= f(a));
            }
        }
        for i in 30..50 {
            let e = i as f64 / 100.0;
            assert!(BoundFormulas::bounded_cov_optimal(e) < BoundFormulas::bounded_cov_breakdown(e));
            for k in [2, 4] {
                assert!(BoundFormulas::moment_optimal(e, k) < BoundFormulas::moment_breakdown(e, k));
            }
        }
    }

    #[test]
    fn factored_certificate_on_data() {
        // Random feasible (w, μ) on real data: a = (1/n)Σwᵢw*ᵢ ≥ 1 − 2ε holds,
        // and the factored form follows from the per-factor inequality.
        let s = sample(&DistributionSpec::standard_gaussian(1), 20, 3).unwrap();
        let c = corrupt(s, 0.3, &crate::adversary::AdversaryStrategy::ReplaceWithPoint { location: vec![8.0] }, 4).unwrap();
        let mut rng = rng_for(9);
        for _ in 0..200 {
            let mut w = vec![0.0; 20];
            for i in rand::seq::index::sample(&mut rng, 20, 14) {
                w[i] = 1.0;
            }
            let r = check_feasibility_identities(&c, &w).unwrap();
            assert!(r.overlap >= 1.0 - 2.0 * 0.3 - 1e-12);
        }
    }
}
