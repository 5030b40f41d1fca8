use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use robust_sos::adversary::{corrupt, AdversaryStrategy};
use robust_sos::bench::{fit_rate, run_sweep, EstimatorKind, ExperimentConfig};
use robust_sos::certify::{
    check_pe_error_bound, lb_bounded_moment_pair, lb_gauss_vs_bounded_cov, lb_gaussian_pair, toolkit_suite, LowerBoundPair,
    Regime,
};
use robust_sos::estimators::{self, SosOptions};
use robust_sos::io;
use robust_sos::relax::BasisKind;
use robust_sos::sdp::{write_trace_csv, SolveError, SolverOptions, TracePoint};
use robust_sos::synth::{sample, DistributionSpec};

#[derive(Parser)]
#[command(name = "robust-sos", version, about = "Robust mean estimation with sum-of-squares relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Moment,
    Gaussian,
    GaussVsCov,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an uncorrupted sample.
    Gen {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace an eps fraction of a sample.
    Corrupt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        strategy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the mean of a (corrupted) sample.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        estimator: String,
        /// Defaults to the level recorded in the sidecar.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 2)]
        r: u32,
        #[arg(long, default_value_t = 1.1)]
        sigma_slack: f64,
        #[arg(long, default_value = "full")]
        basis: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 50_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-9)]
        geomedian_tol: f64,
        #[arg(long, default_value_t = 10.0)]
        grid_halfwidth: f64,
        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,
        /// Write the solver trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a lower-bound pair against its closed forms.
    VerifyLb {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value = "large")]
        regime: String,
    },
    /// Randomized checks of the SoS toolkit inequalities.
    VerifyToolkit {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an eps sweep described by a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_trace(path: Option<&Path>, trace: &[TracePoint]) -> Result<()> {
    if let Some(p) = path {
        let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_trace_csv(trace, std::io::BufWriter::new(f))?;
    }
    Ok(())
}

fn pair_json(p: &LowerBoundPair) -> serde_json::Value {
    json!({
        "family": p.family,
        "d1": p.d1.to_string(),
        "d2": p.d2.to_string(),
        "eps": p.eps,
        "k": p.k,
        "tv": p.tv,
        "overlap": p.overlap,
        "mean_gap": p.mean_gap,
        "kth_central_moment_d2": p.kth_central_moment_d2,
        "variance_d2": p.variance_d2,
        "checks": p.checks,
        "passed": p.all_passed(),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { dist, n, d, seed, out } => {
            let spec = DistributionSpec::parse(&dist, d)?;
            let set = sample(&spec, n, seed)?;
            io::write_sample(&out, &set)?;
        }
        Command::Corrupt {
            input,
            eps,
            strategy,
            seed,
            out,
        } => {
            let set = io::read_sample(&input)?;
            let strat = AdversaryStrategy::parse(&strategy, set.d())?;
            let z = corrupt(set, eps, &strat, seed)?;
            io::write_corrupted(&out, &z, Some(&strat), Some(seed))?;
        }
        Command::Estimate {
            input,
            estimator,
            eps,
            sigma,
            k,
            r,
            sigma_slack,
            basis,
            tol,
            max_iter,
            geomedian_tol,
            grid_halfwidth,
            grid_step,
            trace,
            out,
        } => {
            let z = io::read_corrupted(&input, eps)?;
            let kind: EstimatorKind = estimator.parse()?;
            let mut extra = json!({});
            let rep = match kind {
                EstimatorKind::Mean => estimators::sample_mean(&z),
                EstimatorKind::Median => estimators::coordinate_median(&z),
                EstimatorKind::Geomedian => estimators::geometric_median(&z, geomedian_tol)?,
                EstimatorKind::Gauss1d => estimators::gaussian_projection_1d(&z, grid_halfwidth, grid_step)?,
                EstimatorKind::Sos => {
                    let opts = SosOptions {
                        sigma_slack,
                        solver: SolverOptions {
                            tol,
                            max_iter,
                            trace_every: if trace.is_some() { 10 } else { 0 },
                            ..Default::default()
                        },
                        basis: basis.parse::<BasisKind>()?,
                        ..Default::default()
                    };
                    match estimators::sos_mean_with(&z, sigma, k, r, &opts) {
                        Ok(o) => {
                            write_trace(trace.as_deref(), &o.trace)?;
                            let bound = check_pe_error_bound(&o.pe, &z, sigma * sigma_slack, k, tol)?;
                            extra = json!({ "bound_check": bound });
                            o.report
                        }
                        Err(SolveError::NotConverged { partial }) => {
                            write_trace(trace.as_deref(), &partial.trace)?;
                            bail!("solver did not converge: {:?}", partial.residuals);
                        }
                        Err(SolveError::Infeasible { residuals, trace: t }) => {
                            write_trace(trace.as_deref(), &t)?;
                            bail!("relaxation reported infeasible (is sigma large enough?): {residuals:?}");
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            };
            let doc = json!({
                "input": input.display().to_string(),
                "eps": z.epsilon,
                "sigma": sigma,
                "k": k,
                "r": r,
                "report": rep,
                "extra": extra,
            });
            std::fs::write(&out, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", out.display()))?;
            println!("{}", serde_json::to_string(&rep)?);
        }
        Command::VerifyLb { family, eps, k, regime } => {
            let pair = match family {
                Family::Moment => lb_bounded_moment_pair(eps, k)?,
                Family::Gaussian => lb_gaussian_pair(eps)?,
                Family::GaussVsCov => lb_gauss_vs_bounded_cov(eps, regime.parse::<Regime>()?)?,
            };
            print_json(&pair_json(&pair))?;
            if !pair.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::VerifyToolkit { trials, seed } => {
            let rep = toolkit_suite(trials, seed)?;
            print_json(&serde_json::to_value(&rep)?)?;
            if !rep.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Sweep { config, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = ExperimentConfig::parse(&text)?;
            let rep = run_sweep(&cfg)?;
            rep.write_to(&out).with_context(|| format!("writing into {}", out.display()))?;
            for est in &cfg.estimators {
                if let Ok(fit) = fit_rate(&rep, *est) {
                    eprintln!("{est}: rate fit anchored at {} {}", fit.anchor, if fit.pass { "PASS" } else { "FAIL" });
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
