//! First-order conic solver for moment relaxations.
//!
//! The program is: find v with Ãv = b̃ and every block Bₖv ⪰ 0, optionally
//! minimizing cᵀv. Each block is a scatter of variables into a symmetric
//! matrix, so BᵀB = D is diagonal. Blocks whose entries are general linear
//! forms get auxiliary variables tied to y by extra equality rows.
//!
//! Iteration (Douglas–Rachford in block-matrix space, relaxation λ):
//!   X = Π_PSD(Z);  v = Π_A(D⁻¹(Bᵀ(2X − Z) − c));  Z ← Z + λ(Bv − X).
//! Π_A is the D-weighted projection onto {Ãv = b̃}, applied through a cached
//! pseudo-inverse of ÃD⁻¹Ãᵀ. ‖Bv − X‖ is the fixed-point residual.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

#[cfg(not(feature = "openblas"))]
use faer::diag::Diag;
#[cfg(not(feature = "openblas"))]
use faer::dyn_stack::{MemBuffer, MemStack};
#[cfg(not(feature = "openblas"))]
use faer::linalg::evd::{self, ComputeEigenvectors, SelfAdjointEvdParams};
#[cfg(not(feature = "openblas"))]
use faer::{Par, Spec};
use faer::{Mat, Side};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numeric::symmetric_eigenvalues;
use crate::relax::{LinearForm, Monomial, MomentRelaxation, Polynomial};

#[derive(Debug, Clone, PartialEq)]
pub struct ConicBlock {
    pub name: String,
    pub size: usize,
    /// Upper triangle, row-major.
    pub entries: Vec<LinearForm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub blocks: Vec<ConicBlock>,
    pub equalities: Vec<(LinearForm, f64)>,
    /// Linear objective to minimize.
    pub objective: Option<LinearForm>,
}

impl ConicProgram {
    pub fn validate(&self) -> Result<()> {
        for b in &self.blocks {
            if b.size == 0 {
                return Err(invalid(format!("block `{}` has size 0", b.name)));
            }
            if b.entries.len() != b.size * (b.size + 1) / 2 {
                return Err(invalid(format!("block `{}` entry count does not match its size", b.name)));
            }
        }
        let forms = self
            .blocks
            .iter()
            .flat_map(|b| b.entries.iter())
            .chain(self.equalities.iter().map(|e| &e.0))
            .chain(self.objective.iter());
        for f in forms {
            if f.iter().any(|&(i, c)| i >= self.num_vars || !c.is_finite()) {
                return Err(invalid("linear form references an invalid variable or coefficient"));
            }
        }
        Ok(())
    }

    pub fn from_relaxation(rel: &MomentRelaxation, objective: Option<LinearForm>) -> Self {
        ConicProgram {
            num_vars: rel.moments.len(),
            blocks: rel
                .blocks
                .iter()
                .map(|b| ConicBlock {
                    name: b.name.clone(),
                    size: b.size,
                    entries: b.entries.clone(),
                })
                .collect(),
            equalities: rel.equalities.iter().map(|e| (e.terms.clone(), e.rhs)).collect(),
            objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    /// Record a trace point every this many iterations (0 disables tracing).
    pub trace_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iter: 50_000,
            relaxation: 1.6,
            trace_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    /// Frobenius norm of Bv − X over all blocks.
    pub fixed_point_residual: f64,
    /// Largest ratio ‖Bₖv − Xₖ‖/(1 + |tr Bₖv|) over blocks.
    pub relative_block_residual: f64,
    pub equality_residual: f64,
}

pub fn write_trace_csv<W: Write>(trace: &[TracePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,fixed_point_residual,relative_block_residual,equality_residual")?;
    for t in trace {
        writeln!(
            out,
            "{},{:e},{:e},{:e}",
            t.iteration, t.fixed_point_residual, t.relative_block_residual, t.equality_residual
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub name: String,
    pub size: usize,
    pub min_eigenvalue: f64,
    pub trace: f64,
}

impl BlockReport {
    /// min-eig / (1 + |trace|); ≥ −tol is the validity condition.
    pub fn relative_slack(&self) -> f64 {
        self.min_eigenvalue / (1.0 + self.trace.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    pub iterations: usize,
    /// max over the original rows of |aᵀy − b| / max(1, ‖a‖∞).
    pub equality: f64,
    pub blocks: Vec<BlockReport>,
    pub fixed_point: f64,
    pub seconds: f64,
}

impl Residuals {
    pub fn worst_relative_psd(&self) -> f64 {
        self.blocks.iter().map(BlockReport::relative_slack).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub residuals: Residuals,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("infeasible: fixed-point residual settled at {:.3e} after {} iterations", .residuals.fixed_point, .residuals.iterations)]
    Infeasible { residuals: Residuals, trace: Vec<TracePoint> },
    #[error("not converged after {} iterations (fixed-point residual {:.3e})", .partial.residuals.iterations, .partial.residuals.fixed_point)]
    NotConverged { partial: Box<ConicSolution> },
    #[error(transparent)]
    Setup(#[from] Error),
}

struct Scatter {
    size: usize,
    /// Variable index of each upper-triangular entry.
    vars: Vec<usize>,
}

impl Scatter {
    fn lift(&self, v: &[f64]) -> Mat<f64> {
        let s = self.size;
        let mut m = Mat::<f64>::zeros(s, s);
        let mut t = 0;
        for a in 0..s {
            for b in a..s {
                let x = v[self.vars[t]];
                m[(a, b)] = x;
                m[(b, a)] = x;
                t += 1;
            }
        }
        m
    }

    fn adjoint_add(&self, m: &Mat<f64>, out: &mut [f64]) {
        let s = self.size;
        let mut t = 0;
        for a in 0..s {
            out[self.vars[t]] += m[(a, a)];
            t += 1;
            for b in (a + 1)..s {
                out[self.vars[t]] += m[(a, b)] + m[(b, a)];
                t += 1;
            }
        }
    }
}

struct AffineProjector {
    rows: Vec<LinearForm>,
    rhs: Vec<f64>,
    dinv: Vec<f64>,
    /// W with WWᵀ the pseudo-inverse of the normal matrix ÃD⁻¹Ãᵀ.
    w: Mat<f64>,
}

/// Eigenvalues of the normal matrix below this fraction of the largest are
/// treated as dependent rows.
const RANK_CUTOFF: f64 = 1e-14;

impl AffineProjector {
    fn new(raw_rows: &[(LinearForm, f64)], dinv: Vec<f64>) -> Result<Self> {
        let nv = dinv.len();
        let mut rows = Vec::with_capacity(raw_rows.len());
        let mut rhs = Vec::with_capacity(raw_rows.len());
        for (form, b) in raw_rows {
            let norm: f64 = form.iter().map(|&(i, c)| c * c * dinv[i]).sum::<f64>().sqrt();
            if norm == 0.0 {
                if b.abs() > 0.0 {
                    return Err(invalid("equality row 0 = nonzero"));
                }
                continue;
            }
            rows.push(form.iter().map(|&(i, c)| (i, c / norm)).collect::<LinearForm>());
            rhs.push(b / norm);
        }
        let m = rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
        for (r, form) in rows.iter().enumerate() {
            for &(i, c) in form {
                cols[i].push((r, c));
            }
        }
        let mut normal = Mat::<f64>::zeros(m, m);
        for (v, col) in cols.iter().enumerate() {
            for &(r1, c1) in col {
                for &(r2, c2) in col {
                    if r2 <= r1 {
                        normal[(r1, r2)] += c1 * c2 * dinv[v];
                    }
                }
            }
        }
        for r1 in 0..m {
            for r2 in 0..r1 {
                normal[(r2, r1)] = normal[(r1, r2)];
            }
        }
        let w = if m == 0 {
            Mat::zeros(0, 0)
        } else {
            let evd = normal
                .self_adjoint_eigen(Side::Lower)
                .map_err(|_| Error::Unsupported("eigendecomposition of the equality normal matrix failed".into()))?;
            let vals = evd.S().column_vector();
            let top = (0..m).map(|i| vals[i]).fold(0.0f64, f64::max);
            let kept: Vec<usize> = (0..m).filter(|&i| vals[i] > RANK_CUTOFF * top).collect();
            let u = evd.U();
            Mat::from_fn(m, kept.len(), |i, j| u[(i, kept[j])] / vals[kept[j]].sqrt())
        };
        Ok(AffineProjector { rows, rhs, dinv, w })
    }

    fn residual(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(form, b)| form.iter().map(|&(i, c)| c * v[i]).sum::<f64>() - b)
            .collect()
    }

    /// v ← v − D⁻¹Ãᵀ(ÃD⁻¹Ãᵀ)⁺(Ãv − b̃), applied twice to mop up rounding.
    fn project(&self, v: &mut [f64]) {
        let m = self.rows.len();
        if m == 0 {
            return;
        }
        for _ in 0..2 {
            let r = self.residual(v);
            let rc = Mat::<f64>::from_fn(m, 1, |i, _| r[i]);
            let lam = &self.w * (self.w.transpose() * &rc);
            for i in 0..m {
                let l = lam[(i, 0)];
                for &(j, c) in &self.rows[i] {
                    v[j] -= self.dinv[j] * c * l;
                }
            }
        }
    }
}

/// Projection onto the PSD cone with reusable workspace.
struct PsdProjector {
    size: usize,
    eig: Eigensolver,
}

/// Symmetric eigendecomposition through LAPACK's divide and conquer driver.
#[cfg(feature = "openblas")]
struct Eigensolver {
    a: Vec<f64>,
    vals: Vec<f64>,
    work: Vec<f64>,
    iwork: Vec<i32>,
}

#[cfg(feature = "openblas")]
impl Eigensolver {
    fn new(n: usize) -> Self {
        let (lwork, liwork) = (1 + 6 * n + 2 * n * n, 3 + 5 * n);
        Eigensolver {
            a: vec![0.0; n * n],
            vals: vec![0.0; n],
            work: vec![0.0; lwork],
            iwork: vec![0; liwork],
        }
    }

    /// Ascending eigenvalues and column-major eigenvectors of z, or None on failure.
    fn decompose(&mut self, z: &Mat<f64>) -> Option<(&[f64], faer::MatRef<'_, f64>)> {
        let n = z.nrows();
        for j in 0..n {
            for i in 0..n {
                self.a[j * n + i] = z[(i, j)];
            }
        }
        let (lwork, liwork) = (self.work.len() as i32, self.iwork.len() as i32);
        let mut info = 0;
        // SAFETY: buffer lengths match the sizes passed to the routine.
        unsafe {
            lapack::dsyevd(
                b'V',
                b'L',
                n as i32,
                &mut self.a,
                n as i32,
                &mut self.vals,
                &mut self.work,
                lwork,
                &mut self.iwork,
                liwork,
                &mut info,
            );
        }
        (info == 0).then(|| (self.vals.as_slice(), faer::MatRef::from_column_major_slice(&self.a, n, n)))
    }
}

#[cfg(not(feature = "openblas"))]
struct Eigensolver {
    u: Mat<f64>,
    s: Diag<f64>,
    vals: Vec<f64>,
    buf: MemBuffer,
    params: Spec<SelfAdjointEvdParams, f64>,
}

#[cfg(not(feature = "openblas"))]
impl Eigensolver {
    fn new(n: usize) -> Self {
        let mut params: Spec<SelfAdjointEvdParams, f64> = Default::default();
        // Divide and conquer is several times faster than QR for the block sizes used here.
        params.recursion_threshold = 16;
        Eigensolver {
            u: Mat::zeros(n, n),
            s: Diag::zeros(n),
            vals: vec![0.0; n],
            buf: MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(n, ComputeEigenvectors::Yes, Par::Seq, params)),
            params,
        }
    }

    fn decompose(&mut self, z: &Mat<f64>) -> Option<(&[f64], faer::MatRef<'_, f64>)> {
        evd::self_adjoint_evd(
            z.as_ref(),
            self.s.as_mut(),
            Some(self.u.as_mut()),
            Par::Seq,
            MemStack::new(&mut self.buf),
            self.params,
        )
        .ok()?;
        let s = self.s.column_vector();
        self.vals.iter_mut().enumerate().for_each(|(i, v)| *v = s[i]);
        Some((self.vals.as_slice(), self.u.as_ref()))
    }
}

impl PsdProjector {
    fn new(size: usize) -> Self {
        PsdProjector {
            size,
            eig: Eigensolver::new(size),
        }
    }

    fn project(&mut self, z: &Mat<f64>) -> Mat<f64> {
        let n = self.size;
        if n == 1 {
            return Mat::from_fn(1, 1, |_, _| z[(0, 0)].max(0.0));
        }
        let Some((vals, u)) = self.eig.decompose(z) else {
            return z.clone();
        };
        let neg = vals.iter().take_while(|&&v| v < 0.0).count();
        if neg == 0 {
            return z.clone();
        }
        if neg <= n - neg {
            let un = u.subcols(0, neg);
            let scaled = Mat::<f64>::from_fn(n, neg, |i, j| un[(i, j)] * vals[j]);
            let mut x = z.clone();
            x -= &scaled * un.transpose();
            x
        } else {
            let pos = n - neg;
            let up = u.subcols(neg, pos);
            let scaled = Mat::<f64>::from_fn(n, pos, |i, j| up[(i, j)] * vals[neg + j]);
            &scaled * up.transpose()
        }
    }
}

fn trace_of(m: &Mat<f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

fn frob_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let d = a[(i, j)] - b[(i, j)];
            acc += d * d;
        }
    }
    acc.sqrt()
}

fn block_reports(prog: &ConicProgram, x: &[f64]) -> Vec<BlockReport> {
    prog.blocks
        .iter()
        .map(|b| {
            let s = b.size;
            let mut dense = vec![0.0; s * s];
            let mut t = 0;
            for a in 0..s {
                for c in a..s {
                    let v: f64 = b.entries[t].iter().map(|&(i, k)| k * x[i]).sum();
                    dense[a * s + c] = v;
                    dense[c * s + a] = v;
                    t += 1;
                }
            }
            BlockReport {
                name: b.name.clone(),
                size: s,
                min_eigenvalue: symmetric_eigenvalues(s, &dense)[0],
                trace: (0..s).map(|i| dense[i * s + i]).sum(),
            }
        })
        .collect()
}

/// max over rows of |aᵀy − b| / max(1, ‖a‖∞).
fn equality_residual(prog: &ConicProgram, x: &[f64]) -> f64 {
    prog.equalities
        .iter()
        .map(|(f, b)| {
            let scale = f.iter().fold(1.0f64, |m, t| m.max(t.1.abs()));
            (f.iter().map(|&(i, c)| c * x[i]).sum::<f64>() - b).abs() / scale
        })
        .fold(0.0, f64::max)
}

const VALIDITY_EVERY: usize = 10;

/// Solve a conic program to tolerance `opts.tol`.
pub fn solve_conic(prog: &ConicProgram, opts: &SolverOptions) -> std::result::Result<ConicSolution, SolveError> {
    let start = std::time::Instant::now();
    if !(opts.tol > 0.0) {
        return Err(invalid("tol must be positive").into());
    }
    if !(opts.relaxation > 0.0 && opts.relaxation < 2.0) {
        return Err(invalid("relaxation factor must lie in (0, 2)").into());
    }
    prog.validate()?;

    // Stack y with auxiliary variables for non-scatter entries.
    let ny = prog.num_vars;
    let mut nv = ny;
    let mut rows: Vec<(LinearForm, f64)> = prog.equalities.clone();
    let mut scatters = Vec::with_capacity(prog.blocks.len());
    for b in &prog.blocks {
        let mut vars = Vec::with_capacity(b.entries.len());
        for form in &b.entries {
            if form.len() == 1 && form[0].1 == 1.0 {
                vars.push(form[0].0);
            } else {
                let g = nv;
                nv += 1;
                let mut row: LinearForm = form.iter().map(|&(i, c)| (i, -c)).collect();
                row.push((g, 1.0));
                rows.push((row, 0.0));
                vars.push(g);
            }
        }
        scatters.push(Scatter { size: b.size, vars });
    }
    let mut dcount = vec![0.0; nv];
    for sc in &scatters {
        let s = sc.size;
        let mut t = 0;
        for a in 0..s {
            for b in a..s {
                dcount[sc.vars[t]] += if a == b { 1.0 } else { 2.0 };
                t += 1;
            }
        }
    }
    if let Some(i) = dcount.iter().position(|&c| c == 0.0) {
        return Err(invalid(format!("variable {i} appears in no PSD block")).into());
    }
    let dinv: Vec<f64> = dcount.iter().map(|c| 1.0 / c).collect();
    let projector = AffineProjector::new(&rows, dinv.clone())?;
    let mut cost = vec![0.0; nv];
    if let Some(obj) = &prog.objective {
        for &(i, c) in obj {
            cost[i] += c;
        }
    }

    let lam = opts.relaxation;
    let mut z: Vec<Mat<f64>> = scatters.iter().map(|s| Mat::zeros(s.size, s.size)).collect();
    let mut v = vec![0.0; nv];
    let mut trace = Vec::new();
    let mut stable_run = 0usize;
    let mut prev_res = f64::INFINITY;
    let mut fixed_point = f64::INFINITY;

    let finish = |v: &[f64], iterations: usize, fixed_point: f64| {
        let x = v[..ny].to_vec();
        Residuals {
            iterations,
            equality: equality_residual(prog, &x),
            blocks: block_reports(prog, &x),
            fixed_point,
            seconds: start.elapsed().as_secs_f64(),
        }
    };

    let mut projectors: Vec<PsdProjector> = scatters.iter().map(|s| PsdProjector::new(s.size)).collect();
    for it in 1..=opts.max_iter {
        let xs: Vec<Mat<f64>> = z.iter().zip(projectors.iter_mut()).map(|(zk, p)| p.project(zk)).collect();
        let mut rhs = vec![0.0; nv];
        for ((sc, x), zk) in scatters.iter().zip(&xs).zip(&z) {
            let reflected = x * 2.0 - zk;
            sc.adjoint_add(&reflected, &mut rhs);
        }
        for i in 0..nv {
            v[i] = (rhs[i] - cost[i]) * dinv[i];
        }
        projector.project(&mut v);

        let mut total = 0.0;
        let mut worst_rel: f64 = 0.0;
        for ((sc, x), zk) in scatters.iter().zip(&xs).zip(z.iter_mut()) {
            let y = sc.lift(&v);
            let r = frob_diff(&y, x);
            total += r * r;
            worst_rel = worst_rel.max(r / (1.0 + trace_of(&y).abs()));
            *zk += (&y - x) * lam;
        }
        fixed_point = total.sqrt();
        let eq_res = projector.residual(&v).iter().fold(0.0f64, |m, r| m.max(r.abs()));

        if opts.trace_every > 0 && (it % opts.trace_every == 0 || it == 1) {
            trace.push(TracePoint {
                iteration: it,
                fixed_point_residual: fixed_point,
                relative_block_residual: worst_rel,
                equality_residual: eq_res,
            });
        }
        // The validity test needs eigenvalues of the blocks evaluated at y, so run it
        // only periodically or once the cheap splitting residual is small.
        // With an objective the iterate must also have settled, not merely be feasible.
        let settled = prog.objective.is_none() || worst_rel <= opts.tol;
        if settled && (it % VALIDITY_EVERY == 0 || worst_rel <= opts.tol) && eq_res <= opts.tol {
            let x = &v[..ny];
            if equality_residual(prog, x) <= opts.tol {
                let blocks = block_reports(prog, x);
                if blocks.iter().all(|b| b.relative_slack() >= -opts.tol) {
                    let residuals = Residuals {
                        iterations: it,
                        equality: equality_residual(prog, x),
                        blocks,
                        fixed_point,
                        seconds: start.elapsed().as_secs_f64(),
                    };
                    return Ok(ConicSolution {
                        x: x.to_vec(),
                        residuals,
                        trace,
                    });
                }
            }
        }
        if worst_rel > 10.0 * opts.tol && (prev_res - fixed_point).abs() <= 1e-6 * fixed_point {
            stable_run += 1;
            if stable_run >= 500 {
                let residuals = finish(&v, it, fixed_point);
                return Err(SolveError::Infeasible { residuals, trace });
            }
        } else {
            stable_run = 0;
        }
        prev_res = fixed_point;
    }
    let residuals = finish(&v, opts.max_iter, fixed_point);
    Err(SolveError::NotConverged {
        partial: Box::new(ConicSolution {
            x: v[..ny].to_vec(),
            residuals,
            trace,
        }),
    })
}

/// A moment vector indexed like the relaxation it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoExpectation {
    pub y: Vec<f64>,
    pub r: u32,
    pub d: usize,
    index: Arc<HashMap<Monomial, usize>>,
    pub residuals: Residuals,
    /// Affine frame: original coordinates are `center + scale·μ`.
    pub center: Vec<f64>,
    pub scale: f64,
}

impl PseudoExpectation {
    pub fn new(rel: &MomentRelaxation, y: Vec<f64>, residuals: Residuals) -> Self {
        PseudoExpectation {
            y,
            r: rel.r,
            d: rel.d,
            index: rel.shared_index(),
            residuals,
            center: vec![0.0; rel.d],
            scale: 1.0,
        }
    }

    /// Attach the affine frame the system was built in.
    pub fn with_frame(mut self, center: Vec<f64>, scale: f64) -> Self {
        assert_eq!(center.len(), self.d);
        self.center = center;
        self.scale = scale;
        self
    }

    pub fn get(&self, m: &Monomial) -> Result<f64> {
        let red = crate::relax::reduce_monomial(m);
        self.index
            .get(&red)
            .map(|&i| self.y[i])
            .ok_or_else(|| Error::OutOfBasis(format!("{red} is outside the degree-{} index set", 2 * self.r)))
    }

    /// Ẽ[μⱼ] for every coordinate, in original coordinates.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| self.center[j] + self.scale * self.get(&Monomial::mu_var(j, self.d)).unwrap_or(f64::NAN))
            .collect()
    }

    /// Ẽ‖μ − t‖² in original coordinates.
    pub fn squared_distance(&self, t: &[f64]) -> Result<f64> {
        if t.len() != self.d {
            return Err(Error::Dimension(format!("target has length {} but d = {}", t.len(), self.d)));
        }
        let local: Vec<f64> = (0..self.d).map(|j| (t[j] - self.center[j]) / self.scale).collect();
        Ok(self.scale * self.scale * pe_evaluate(self, &anchor_objective(&local))?)
    }
}

/// Ẽ[p] for a polynomial whose reduced monomials lie in the index set.
pub fn pe_evaluate(pe: &PseudoExpectation, p: &Polynomial) -> Result<f64> {
    let mut acc = 0.0;
    for (m, &c) in &p.terms {
        if c != 0.0 {
            acc += c * pe.get(m)?;
        }
    }
    Ok(acc)
}

/// Σⱼ (μⱼ − cⱼ)², the optional anchor objective.
pub fn anchor_objective(c: &[f64]) -> Polynomial {
    let d = c.len();
    let mut p = Polynomial::constant(c.iter().map(|x| x * x).sum(), d);
    for (j, &cj) in c.iter().enumerate() {
        let mut sq = Monomial::one(d);
        sq.mu[j] = 2;
        p.add_term(sq, 1.0);
        p.add_term(Monomial::mu_var(j, d), -2.0 * cj);
    }
    p
}

/// Solve a moment relaxation, minimizing `objective` when given.
pub fn solve(
    rel: &MomentRelaxation,
    objective: Option<&Polynomial>,
    opts: &SolverOptions,
) -> std::result::Result<(PseudoExpectation, Vec<TracePoint>), SolveError> {
    let obj = objective.map(|p| rel.linear_form(p)).transpose()?;
    let prog = ConicProgram::from_relaxation(rel, obj);
    let sol = solve_conic(&prog, opts)?;
    Ok((PseudoExpectation::new(rel, sol.x, sol.residuals), sol.trace))
}
