//! Polynomial systems over (w₁..wₙ, μ₁..μ_d) and their moment relaxations.
//!
//! Booleanity wᵢ² = wᵢ is never stored as an equality; every product is
//! reduced to multilinear form in w, which is the quotient by ⟨wᵢ² − wᵢ⟩.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use serde::Serialize;

use crate::adversary::CorruptedSet;
use crate::error::{invalid, Error, Result};
use crate::numeric::{binomial, symmetric_eigenvalues};

/// A monomial: w-indices as a sorted multiset (repeats are exponents) and
/// one exponent per μ coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub w: Vec<u32>,
    pub mu: Vec<u32>,
}

impl Monomial {
    pub fn one(d: usize) -> Self {
        Monomial { w: Vec::new(), mu: vec![0; d] }
    }

    pub fn w_var(i: usize, d: usize) -> Self {
        Monomial { w: vec![i as u32], mu: vec![0; d] }
    }

    pub fn mu_var(j: usize, d: usize) -> Self {
        let mut mu = vec![0; d];
        mu[j] = 1;
        Monomial { w: Vec::new(), mu }
    }

    pub fn degree(&self) -> u32 {
        self.w.len() as u32 + self.mu.iter().sum::<u32>()
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut w = Vec::with_capacity(self.w.len() + other.w.len());
        let (mut a, mut b) = (0, 0);
        while a < self.w.len() || b < other.w.len() {
            if b == other.w.len() || (a < self.w.len() && self.w[a] <= other.w[b]) {
                w.push(self.w[a]);
                a += 1;
            } else {
                w.push(other.w[b]);
                b += 1;
            }
        }
        let mu = self.mu.iter().zip(&other.mu).map(|(x, y)| x + y).collect();
        Monomial { w, mu }
    }

    /// Product followed by booleanity reduction.
    pub fn mul_reduced(&self, other: &Monomial) -> Monomial {
        let mut m = self.mul(other);
        m.w.dedup();
        m
    }

    pub fn eval(&self, w: &[f64], mu: &[f64]) -> f64 {
        let mut v: f64 = self.w.iter().map(|&i| w[i as usize]).product();
        for (x, &e) in mu.iter().zip(&self.mu) {
            v *= x.powi(e as i32);
        }
        v
    }

    fn w_runs(&self) -> Vec<(u32, u32)> {
        let mut runs: Vec<(u32, u32)> = Vec::new();
        for &i in &self.w {
            match runs.last_mut() {
                Some((j, c)) if *j == i => *c += 1,
                _ => runs.push((i, 1)),
            }
        }
        runs
    }
}

/// Every w-exponent ≥ 1 becomes 1; μ-exponents are kept.
pub fn reduce_monomial(m: &Monomial) -> Monomial {
    let mut r = m.clone();
    r.w.dedup();
    r
}

impl Ord for Monomial {
    /// Graded order: lower degree first; within a degree, lexicographically
    /// larger exponent vectors first under w₁ > w₂ > … > μ₁ > μ₂ > ….
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let (a, b) = (&self.w, &other.w);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if a[i] != b[j] {
                // The monomial carrying the lower-indexed w variable ranks first.
                return a[i].cmp(&b[j]);
            }
            let run_a = a[i..].iter().take_while(|&&x| x == a[i]).count();
            let run_b = b[j..].iter().take_while(|&&x| x == b[j]).count();
            if run_a != run_b {
                return run_b.cmp(&run_a);
            }
            i += run_a;
            j += run_b;
        }
        if i < a.len() {
            return Ordering::Less;
        }
        if j < b.len() {
            return Ordering::Greater;
        }
        for (a, b) in self.mu.iter().zip(&other.mu) {
            if a != b {
                return b.cmp(a);
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (i, c) in self.w_runs() {
            parts.push(if c == 1 { format!("w{}", i + 1) } else { format!("w{}^{c}", i + 1) });
        }
        for (j, &e) in self.mu.iter().enumerate() {
            match e {
                0 => {}
                1 => parts.push(format!("mu{}", j + 1)),
                _ => parts.push(format!("mu{}^{e}", j + 1)),
            }
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Sparse polynomial with reduced monomials as keys.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn constant(c: f64, d: usize) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::one(d), c);
        p
    }

    pub fn monomial(m: Monomial) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(m, 1.0);
        p
    }

    /// Adds `c·m`, reducing `m` first.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let m = reduce_monomial(&m);
        let slot = self.terms.entry(m).or_insert(0.0);
        *slot += c;
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), s * c);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                out.add_term(a.mul_reduced(b), ca * cb);
            }
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|(_, &c)| c != 0.0)
            .map(|(m, _)| m.degree())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, w: &[f64], mu: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(w, mu)).sum()
    }

    /// Σ|c·m(x)|, a natural magnitude for relative feasibility tolerances.
    pub fn abs_eval(&self, w: &[f64], mu: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| (c * m.eval(w, mu)).abs()).sum()
    }
}

/// One constraint of a polynomial system.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// wᵢ² = wᵢ, realized by monomial reduction.
    Booleanity { index: usize },
    Nonnegative { name: String, poly: Polynomial },
    Equality { name: String, poly: Polynomial },
    /// Symmetric polynomial matrix (row-major) required to be PSD.
    PsdMatrix { name: String, dim: usize, entries: Vec<Polynomial> },
}

impl Constraint {
    pub fn degree(&self) -> u32 {
        match self {
            Constraint::Booleanity { .. } => 2,
            Constraint::Nonnegative { poly, .. } | Constraint::Equality { poly, .. } => poly.degree(),
            Constraint::PsdMatrix { entries, .. } => entries.iter().map(Polynomial::degree).max().unwrap_or(0),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Constraint::Booleanity { index } => format!("booleanity[{index}]"),
            Constraint::Nonnegative { name, .. }
            | Constraint::Equality { name, .. }
            | Constraint::PsdMatrix { name, .. } => name.clone(),
        }
    }
}

/// A point (w, μ).
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub w: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: String,
    /// Signed slack: ≥ 0 means satisfied (equalities report −|violation|).
    pub slack: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolynomialSystem {
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub sigma: f64,
    pub k: u32,
    pub z: Array2<f64>,
    pub constraints: Vec<Constraint>,
    /// The ground-truth assignment (w*, mean of retained points), when known.
    pub witness: Option<Assignment>,
}

impl PolynomialSystem {
    /// Only the booleanity constraints on n w-variables and d free μ-variables.
    pub fn booleanity_only(n: usize, d: usize) -> Self {
        PolynomialSystem {
            n,
            d,
            z: Array2::zeros((n, d)),
            constraints: (0..n).map(|index| Constraint::Booleanity { index }).collect(),
            ..Default::default()
        }
    }

    /// The robust-mean system over observed rows `z`.
    pub fn for_data(z: &Array2<f64>, eps: f64, sigma: f64, k: u32, mask: Option<&[bool]>) -> Result<Self> {
        Self::for_rows(z, z.nrows(), eps, sigma, k, mask)
    }

    /// The system for a sample of `total` points of which only the rows in `z`
    /// may carry weight; the others have wᵢ fixed to 0. The mass and moment
    /// bounds keep using `total`.
    pub fn for_rows(z: &Array2<f64>, total: usize, eps: f64, sigma: f64, k: u32, mask: Option<&[bool]>) -> Result<Self> {
        let (n, d) = z.dim();
        if n == 0 || d == 0 {
            return Err(invalid("system needs n >= 1 and d >= 1"));
        }
        if total < n {
            return Err(invalid(format!("total {total} is smaller than the {n} free rows")));
        }
        if mask.is_some_and(|m| m.len() != n) {
            return Err(Error::Dimension("mask length differs from the row count".into()));
        }
        if !(0.0..0.5).contains(&eps) {
            return Err(invalid(format!("eps must lie in [0, 1/2), got {eps}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("sigma must be positive, got {sigma}")));
        }
        match k {
            2 => {}
            4 if d <= 2 => {}
            4 => return Err(Error::Unsupported(format!("k = 4 is limited to d <= 2, got d = {d}"))),
            _ => return Err(Error::Unsupported(format!("k must be 2 or 4, got {k}"))),
        }
        let mut constraints: Vec<Constraint> = (0..n).map(|index| Constraint::Booleanity { index }).collect();

        let mut mass = Polynomial::constant(-(1.0 - eps) * total as f64, d);
        for i in 0..n {
            mass.add_term(Monomial::w_var(i, d), 1.0);
        }
        constraints.push(Constraint::Nonnegative {
            name: "mass".into(),
            poly: mass,
        });

        for j in 0..d {
            let mut link = Polynomial::zero();
            for i in 0..n {
                let wi = Monomial::w_var(i, d);
                link.add_term(wi.clone(), z[[i, j]]);
                link.add_term(wi.mul(&Monomial::mu_var(j, d)), -1.0);
            }
            constraints.push(Constraint::Equality {
                name: format!("mean-link[{j}]"),
                poly: link,
            });
        }

        // centered[i][j] = z_ij − μ_j
        let centered: Vec<Vec<Polynomial>> = (0..n)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let mut p = Polynomial::constant(z[[i, j]], d);
                        p.add_term(Monomial::mu_var(j, d), -1.0);
                        p
                    })
                    .collect()
            })
            .collect();
        let weighted = |i: usize, p: Polynomial| Polynomial::monomial(Monomial::w_var(i, d)).mul(&p);

        if k == 2 {
            let mut entries = Vec::with_capacity(d * d);
            for a in 0..d {
                for b in 0..d {
                    let mut e = Polynomial::constant(if a == b { sigma * sigma * total as f64 } else { 0.0 }, d);
                    for (i, c) in centered.iter().enumerate() {
                        e = e.add(&weighted(i, c[a].mul(&c[b])).scale(-1.0));
                    }
                    entries.push(e);
                }
            }
            constraints.push(Constraint::PsdMatrix {
                name: "covariance".into(),
                dim: d,
                entries,
            });
        } else {
            let dd = d * d;
            let bound = 16.0 * sigma.powi(4) * total as f64;
            let mut entries = Vec::with_capacity(dd * dd);
            for p in 0..dd {
                for q in 0..dd {
                    let (a, b, c, e) = (p / d, p % d, q / d, q % d);
                    let mut ent = Polynomial::constant(if p == q { bound } else { 0.0 }, d);
                    for (i, cen) in centered.iter().enumerate() {
                        let prod = cen[a].mul(&cen[b]).mul(&cen[c]).mul(&cen[e]);
                        ent = ent.add(&weighted(i, prod).scale(-1.0));
                    }
                    entries.push(ent);
                }
            }
            constraints.push(Constraint::PsdMatrix {
                name: "fourth-moment".into(),
                dim: dd,
                entries,
            });
        }

        let witness = mask.map(|m| {
            let w: Vec<f64> = m.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let count = w.iter().sum::<f64>().max(1.0);
            let mu = (0..d)
                .map(|j| (0..n).filter(|&i| m[i]).map(|i| z[[i, j]]).sum::<f64>() / count)
                .collect();
            Assignment { w, mu }
        });

        Ok(PolynomialSystem {
            n,
            d,
            eps,
            sigma,
            k,
            z: z.clone(),
            constraints,
            witness,
        })
    }

    /// Evaluate every constraint at `x` with relative tolerance `tol`.
    pub fn check(&self, x: &Assignment, tol: f64) -> Vec<ConstraintCheck> {
        self.constraints
            .iter()
            .map(|c| {
                let (slack, scale) = match c {
                    Constraint::Booleanity { index } => {
                        let v = x.w[*index];
                        (-(v * v - v).abs(), 1.0 + v.abs())
                    }
                    Constraint::Nonnegative { poly, .. } => (poly.eval(&x.w, &x.mu), 1.0 + poly.abs_eval(&x.w, &x.mu)),
                    Constraint::Equality { poly, .. } => {
                        (-poly.eval(&x.w, &x.mu).abs(), 1.0 + poly.abs_eval(&x.w, &x.mu))
                    }
                    Constraint::PsdMatrix { dim, entries, .. } => {
                        let vals: Vec<f64> = entries.iter().map(|p| p.eval(&x.w, &x.mu)).collect();
                        let scale: f64 = entries.iter().map(|p| p.abs_eval(&x.w, &x.mu)).fold(0.0, f64::max);
                        (symmetric_eigenvalues(*dim, &vals)[0], 1.0 + scale)
                    }
                };
                ConstraintCheck {
                    name: c.name(),
                    slack,
                    satisfied: slack >= -tol * scale,
                }
            })
            .collect()
    }

    pub fn is_feasible(&self, x: &Assignment, tol: f64) -> bool {
        self.check(x, tol).iter().all(|c| c.satisfied)
    }

    pub fn max_degree(&self) -> u32 {
        self.constraints.iter().map(Constraint::degree).max().unwrap_or(0)
    }
}

/// The robust-mean system for a corrupted set; the witness is (w*, retained mean).
pub fn build_system(z: &CorruptedSet, sigma: f64, k: u32) -> Result<PolynomialSystem> {
    PolynomialSystem::for_data(&z.z, z.epsilon, sigma, k, Some(&z.mask_wstar))
}

/// Multilinear-in-w monomials of total degree ≤ r, in monomial order.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    pub n: usize,
    pub d: usize,
    pub r: u32,
    pub elements: Vec<Monomial>,
}

/// All μ exponent vectors of total degree ≤ r.
fn mu_exponents(d: usize, r: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(d, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, r, &mut Vec::with_capacity(d), &mut out);
    out
}

fn subsets(n: usize, s: usize) -> Vec<Vec<u32>> {
    fn rec(start: usize, n: usize, s: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == s {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < s - cur.len() {
                break;
            }
            cur.push(i as u32);
            rec(i + 1, n, s, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, s, &mut Vec::with_capacity(s), &mut out);
    out
}

/// Number of μ-monomials in d variables of degree ≤ r: C(r + d, d).
pub fn mu_monomial_count(d: usize, r: usize) -> u128 {
    binomial(r + d, d)
}

/// Σ_{s=0..r} C(n, s)·C(r − s + d, d).
pub fn basis_size(n: usize, d: usize, r: usize) -> u128 {
    (0..=r.min(n)).map(|s| binomial(n, s) * mu_monomial_count(d, r - s)).sum()
}

/// Which multilinear monomials enter the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// Every multilinear-in-w monomial of degree ≤ r.
    #[default]
    Full,
    /// Only monomials carrying at most one w factor; a principal submatrix
    /// of the full moment matrix, so a weaker but much smaller relaxation.
    WLinear,
}

impl BasisKind {
    fn w_cap(self, r: u32) -> u32 {
        match self {
            BasisKind::Full => r,
            BasisKind::WLinear => 1,
        }
    }
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisKind::Full => "full",
            BasisKind::WLinear => "w-linear",
        })
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(BasisKind::Full),
            "w-linear" => Ok(BasisKind::WLinear),
            other => Err(Error::Parse(format!("unknown basis kind `{other}`"))),
        }
    }
}

impl MonomialBasis {
    pub fn new(n: usize, d: usize, r: u32) -> Self {
        Self::with_kind(n, d, r, BasisKind::Full)
    }

    pub fn with_kind(n: usize, d: usize, r: u32, kind: BasisKind) -> Self {
        let mut elements = Vec::new();
        for s in 0..=(r.min(kind.w_cap(r)) as usize).min(n) {
            let mus = mu_exponents(d, r - s as u32);
            for w in subsets(n, s) {
                for mu in &mus {
                    elements.push(Monomial { w: w.clone(), mu: mu.clone() });
                }
            }
        }
        elements.sort();
        MonomialBasis { n, d, r, elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Number of leading elements with degree ≤ `deg` (the basis is graded).
    pub fn prefix_len(&self, deg: u32) -> usize {
        self.elements.partition_point(|m| m.degree() <= deg)
    }
}

/// A linear functional Σ c·y[idx] over the moment vector.
pub type LinearForm = Vec<(usize, f64)>;

/// A PSD block whose (a, b) entry, a ≤ b, is a linear form in y.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub name: String,
    pub size: usize,
    /// Upper triangle in row-major order: (0,0), (0,1), …, (0,s−1), (1,1), ….
    pub entries: Vec<LinearForm>,
}

impl PsdBlock {
    pub fn upper_index(size: usize, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * size - a * (a + 1) / 2 + b
    }

    /// Dense row-major evaluation at moment vector `y`.
    pub fn evaluate(&self, y: &[f64]) -> Vec<f64> {
        let s = self.size;
        let mut out = vec![0.0; s * s];
        let mut t = 0;
        for a in 0..s {
            for b in a..s {
                let v: f64 = self.entries[t].iter().map(|&(i, c)| c * y[i]).sum();
                out[a * s + b] = v;
                out[b * s + a] = v;
                t += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityRow {
    pub name: String,
    pub terms: LinearForm,
    pub rhs: f64,
}

/// Moment relaxation of a polynomial system at order r.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRelaxation {
    pub n: usize,
    pub d: usize,
    pub r: u32,
    pub basis: MonomialBasis,
    /// Index set of the moment vector y: reduced monomials of degree ≤ 2r.
    pub moments: Vec<Monomial>,
    index: Arc<HashMap<Monomial, usize>>,
    pub kind: BasisKind,
    /// `blocks[0]` is the moment matrix.
    pub blocks: Vec<PsdBlock>,
    /// `equalities[0]` is the normalization y[1] = 1.
    pub equalities: Vec<EqualityRow>,
}

impl MomentRelaxation {
    pub fn shared_index(&self) -> Arc<HashMap<Monomial, usize>> {
        Arc::clone(&self.index)
    }

    pub fn index_of(&self, m: &Monomial) -> Result<usize> {
        let red = reduce_monomial(m);
        self.index
            .get(&red)
            .copied()
            .ok_or_else(|| Error::OutOfBasis(format!("{red} is not in the degree-{} index set", 2 * self.r)))
    }

    pub fn linear_form(&self, p: &Polynomial) -> Result<LinearForm> {
        p.terms
            .iter()
            .filter(|(_, &c)| c != 0.0)
            .map(|(m, &c)| Ok((self.index_of(m)?, c)))
            .collect()
    }

    /// Moment vector of the point mass at `x`.
    pub fn point_moments(&self, x: &Assignment) -> Vec<f64> {
        self.moments.iter().map(|m| m.eval(&x.w, &x.mu)).collect()
    }

    pub fn moment_matrix(&self) -> &PsdBlock {
        &self.blocks[0]
    }

    pub fn summary(&self) -> RelaxationSummary {
        RelaxationSummary {
            n: self.n,
            d: self.d,
            r: self.r,
            basis_size: self.basis.len(),
            moment_count: self.moments.len(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockSummary {
                    name: b.name.clone(),
                    size: b.size,
                })
                .collect(),
            equality_rows: self.equalities.len(),
        }
    }

    /// JSON document: basis strings, block sizes and the equality system as
    /// sparse (row, column, value) triplets with a separate right-hand side.
    pub fn to_json(&self) -> serde_json::Value {
        let mut triplets = Vec::new();
        for (row, eq) in self.equalities.iter().enumerate() {
            for &(col, v) in &eq.terms {
                triplets.push(serde_json::json!([row, col, v]));
            }
        }
        serde_json::json!({
            "n": self.n,
            "d": self.d,
            "r": self.r,
            "basis": self.basis.elements.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
            "moment_count": self.moments.len(),
            "blocks": self.blocks.iter().map(|b| serde_json::json!({"name": b.name, "size": b.size})).collect::<Vec<_>>(),
            "equality_names": self.equalities.iter().map(|e| e.name.clone()).collect::<Vec<_>>(),
            "equality_rhs": self.equalities.iter().map(|e| e.rhs).collect::<Vec<_>>(),
            "equality_triplets": triplets,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSummary {
    pub name: String,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationSummary {
    pub n: usize,
    pub d: usize,
    pub r: u32,
    pub basis_size: usize,
    pub moment_count: usize,
    pub blocks: Vec<BlockSummary>,
    pub equality_rows: usize,
}

/// Largest localizing order ℓ with 2ℓ + deg ≤ 2r, or a capacity error.
fn localizing_order(name: &str, deg: u32, r: u32) -> Result<u32> {
    if deg > 2 * r {
        return Err(Error::Capacity(format!(
            "constraint `{name}` has degree {deg} but order {r} only reaches degree {}",
            2 * r
        )));
    }
    Ok((2 * r - deg) / 2)
}

fn merge_form(mut terms: Vec<(usize, f64)>) -> LinearForm {
    terms.sort_by_key(|t| t.0);
    let mut out: LinearForm = Vec::with_capacity(terms.len());
    for (i, c) in terms {
        match out.last_mut() {
            Some((j, acc)) if *j == i => *acc += c,
            _ => out.push((i, c)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

/// Compile `sys` at relaxation order r ∈ {1, 2, 3} over the full basis.
pub fn compile(sys: &PolynomialSystem, r: u32) -> Result<MomentRelaxation> {
    compile_with(sys, r, BasisKind::Full)
}

/// Compile over the chosen basis. With [`BasisKind::WLinear`] localizing
/// blocks keep only multipliers whose products stay inside the moment set,
/// and equality multipliers are restricted the same way.
pub fn compile_with(sys: &PolynomialSystem, r: u32, kind: BasisKind) -> Result<MomentRelaxation> {
    if !(1..=3).contains(&r) {
        return Err(invalid(format!("relaxation order must be 1, 2 or 3, got {r}")));
    }
    if sys.k == 4 && r != 3 {
        return Err(Error::Capacity(format!("k = 4 requires r = 3, got r = {r}")));
    }
    for c in &sys.constraints {
        localizing_order(&c.name(), c.degree(), r)?;
    }
    let (n, d) = (sys.n, sys.d);
    let basis = MonomialBasis::with_kind(n, d, r, kind);
    let cap = kind.w_cap(r);
    let w_degree = |p: &Polynomial| p.terms.keys().map(|m| reduce_monomial(m).w.len() as u32).max().unwrap_or(0);
    // Localizing multipliers: degree ≤ ℓ and 2·w-degree + w-degree(g) ≤ 2·cap.
    let multipliers = |ell: u32, gw: u32| -> Vec<Monomial> {
        basis.elements[..basis.prefix_len(ell)]
            .iter()
            .filter(|m| 2 * m.w.len() as u32 + gw <= 2 * cap)
            .cloned()
            .collect()
    };

    let mut set = BTreeSet::new();
    for (a, ma) in basis.elements.iter().enumerate() {
        for mb in &basis.elements[a..] {
            set.insert(ma.mul_reduced(mb));
        }
    }
    let moments: Vec<Monomial> = set.into_iter().collect();
    let index: HashMap<Monomial, usize> = moments.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let lookup = |m: &Monomial| -> Result<usize> {
        index
            .get(m)
            .copied()
            .ok_or_else(|| Error::OutOfBasis(format!("{m} is not in the degree-{} index set", 2 * r)))
    };

    let s = basis.len();
    let mut moment_entries = Vec::with_capacity(s * (s + 1) / 2);
    for a in 0..s {
        for b in a..s {
            moment_entries.push(vec![(lookup(&basis.elements[a].mul_reduced(&basis.elements[b]))?, 1.0)]);
        }
    }
    let mut blocks = vec![PsdBlock {
        name: "moment".into(),
        size: s,
        entries: moment_entries,
    }];

    let one = Monomial::one(d);
    let mut equalities = vec![EqualityRow {
        name: "normalization".into(),
        terms: vec![(lookup(&one)?, 1.0)],
        rhs: 1.0,
    }];

    // Ẽ[m·p] as a linear form.
    let localize = |m: &Monomial, p: &Polynomial| -> Result<LinearForm> {
        let mut terms = Vec::with_capacity(p.terms.len());
        for (t, &c) in &p.terms {
            if c != 0.0 {
                terms.push((lookup(&t.mul_reduced(m))?, c));
            }
        }
        Ok(merge_form(terms))
    };

    for c in &sys.constraints {
        match c {
            Constraint::Booleanity { .. } => {}
            Constraint::Nonnegative { name, poly } => {
                let ell = localizing_order(name, poly.degree(), r)?;
                let sub = multipliers(ell, w_degree(poly));
                let mut entries = Vec::with_capacity(sub.len() * (sub.len() + 1) / 2);
                for a in 0..sub.len() {
                    for b in a..sub.len() {
                        entries.push(localize(&sub[a].mul_reduced(&sub[b]), poly)?);
                    }
                }
                blocks.push(PsdBlock {
                    name: name.clone(),
                    size: sub.len(),
                    entries,
                });
            }
            Constraint::PsdMatrix { name, dim, entries: g } => {
                let deg = c.degree();
                let ell = localizing_order(name, deg, r)?;
                let sub = multipliers(ell, g.iter().map(w_degree).max().unwrap_or(0));
                let size = sub.len() * dim;
                let mut entries = Vec::with_capacity(size * (size + 1) / 2);
                for p in 0..size {
                    for q in p..size {
                        let (ma, ia) = (&sub[p / dim], p % dim);
                        let (mb, ib) = (&sub[q / dim], q % dim);
                        entries.push(localize(&ma.mul_reduced(mb), &g[ia * dim + ib])?);
                    }
                }
                blocks.push(PsdBlock {
                    name: name.clone(),
                    size,
                    entries,
                });
            }
            Constraint::Equality { name, poly } => {
                let deg = poly.degree();
                for m in moments.iter().filter(|m| m.degree() + deg <= 2 * r) {
                    let terms = match localize(m, poly) {
                        Ok(t) => t,
                        Err(Error::OutOfBasis(_)) if kind == BasisKind::WLinear => continue,
                        Err(e) => return Err(e),
                    };
                    if !terms.is_empty() {
                        equalities.push(EqualityRow {
                            name: format!("{name}*{m}"),
                            terms,
                            rhs: 0.0,
                        });
                    }
                }
            }
        }
    }

    Ok(MomentRelaxation {
        n,
        d,
        r,
        basis,
        moments,
        index: Arc::new(index),
        kind,
        blocks,
        equalities,
    })
}
