//! Bound-constrained convex quadratic programs
//! `min ½ yᵀA y − bᵀy + c` subject to `y ≥ ξ`, solved by MPRGP
//! (modified proportioning with reduced gradient projections).
//!
//! The operator is only accessed through products `A y`, so each product may
//! hide a boundary element backsolve.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Symmetric positive (semi)definite operator, accessed by products.
pub trait QpOperator {
    fn dim(&self) -> usize;
    fn apply(&self, y: &[f64]) -> Result<Vec<f64>>;
}

/// Explicit matrix operator.
#[derive(Debug, Clone)]
pub struct DenseOperator(pub DMatrix<f64>);

impl QpOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::Dimension(format!("vector of length {} for operator of size {}", y.len(), self.dim())));
        }
        Ok((&self.0 * DVector::from_column_slice(y)).as_slice().to_vec())
    }
}

impl<T: QpOperator + ?Sized> QpOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(y)
    }
}

#[derive(Debug, Clone)]
pub struct QpProblem<O> {
    pub op: O,
    pub b: Vec<f64>,
    pub c: f64,
    pub lower: Vec<f64>,
}

impl<O: QpOperator> QpProblem<O> {
    pub fn new(op: O, b: Vec<f64>, c: f64, lower: Vec<f64>) -> Result<Self> {
        let n = op.dim();
        if b.len() != n || lower.len() != n {
            return Err(Error::Dimension(format!(
                "QP of size {n} with linear term {} and bounds {}",
                b.len(),
                lower.len()
            )));
        }
        Ok(QpProblem { op, b, c, lower })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self, y: &[f64]) -> Result<f64> {
        let ay = self.op.apply(y)?;
        Ok(0.5 * dot(y, &ay) - dot(&self.b, y) + self.c)
    }

    /// Gradient `A y − b`.
    pub fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.op.apply(y)?;
        g.iter_mut().zip(&self.b).for_each(|(gi, bi)| *gi -= bi);
        Ok(g)
    }

    /// Componentwise maximum of `y` and the bounds.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.lower).map(|(&v, &l)| v.max(l)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MprgpOptions {
    pub rtol: f64,
    /// Proportioning constant Γ.
    pub gamma: f64,
    /// Power iterations for the norm estimate that fixes the expansion step.
    pub power_iterations: usize,
    /// Iteration cap; `None` means 50 × dimension.
    pub max_iterations: Option<usize>,
}

impl Default for MprgpOptions {
    fn default() -> Self {
        MprgpOptions { rtol: 1e-8, gamma: 1.0, power_iterations: 20, max_iterations: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Start,
    Cg,
    Expansion,
    Proportioning,
}

impl StepKind {
    pub fn name(self) -> &'static str {
        match self {
            StepKind::Start => "start",
            StepKind::Cg => "cg",
            StepKind::Expansion => "expansion",
            StepKind::Proportioning => "proportioning",
        }
    }
}

/// One row of solver telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub kind: StepKind,
    pub objective: f64,
    pub projected_gradient: f64,
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Number of operator products, including the norm estimate.
    pub products: usize,
    pub projected_gradient_norm: f64,
    /// Termination threshold `rtol · scale`.
    pub tolerance: f64,
    pub active: Vec<bool>,
    pub gradient: Vec<f64>,
    pub history: Vec<IterationRecord>,
}

impl QpSolution {
    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest eigenvalue estimate by power iteration from a fixed start.
pub fn estimate_norm<O: QpOperator>(op: &O, iterations: usize) -> Result<f64> {
    let n = op.dim();
    if n == 0 {
        return Ok(0.0);
    }
    // deterministic start with no special symmetry
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64).collect();
    let s = norm2(&x);
    x.iter_mut().for_each(|v| *v /= s);
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let ax = op.apply(&x)?;
        let nrm = norm2(&ax);
        if nrm == 0.0 {
            return Ok(lambda);
        }
        lambda = nrm;
        x = ax.into_iter().map(|v| v / nrm).collect();
    }
    Ok(lambda)
}

/// Gradient split of MPRGP at `y` with gradient `g`.
struct Split {
    free: Vec<f64>,
    chopped: Vec<f64>,
}

fn split(y: &[f64], g: &[f64], lower: &[f64]) -> Split {
    let n = y.len();
    let mut free = vec![0.0; n];
    let mut chopped = vec![0.0; n];
    for i in 0..n {
        if y[i] > lower[i] {
            free[i] = g[i];
        } else {
            chopped[i] = g[i].min(0.0);
        }
    }
    Split { free, chopped }
}

/// Reduced free gradient: free gradient shortened so that a step of length
/// `alpha` stays feasible.
fn reduced_free(y: &[f64], free: &[f64], lower: &[f64], alpha: f64) -> Vec<f64> {
    (0..y.len())
        .map(|i| if y[i] > lower[i] { free[i].min((y[i] - lower[i]) / alpha) } else { 0.0 })
        .collect()
}

/// Largest step `a` with `y − a p ≥ lower`.
fn feasible_step(y: &[f64], p: &[f64], lower: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for i in 0..y.len() {
        if p[i] > 0.0 {
            a = a.min(((y[i] - lower[i]) / p[i]).max(0.0));
        }
    }
    a
}

fn count_active(y: &[f64], lower: &[f64]) -> usize {
    y.iter().zip(lower).filter(|(a, b)| a <= b).count()
}

/// Projected gradient norm at `y`.
pub fn projected_gradient_norm(y: &[f64], g: &[f64], lower: &[f64]) -> f64 {
    let s = split(y, g, lower);
    s.free.iter().zip(&s.chopped).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt()
}

/// Largest violation of the KKT conditions: `|g_i|` on free components,
/// `max(0, −g_i)` on active ones, `max(0, ξ_i − y_i)` for infeasibility.
pub fn kkt_violation(y: &[f64], g: &[f64], lower: &[f64]) -> f64 {
    let mut v: f64 = 0.0;
    for i in 0..y.len() {
        if y[i] > lower[i] {
            v = v.max(g[i].abs());
        } else {
            v = v.max((-g[i]).max(0.0)).max(lower[i] - y[i]);
        }
    }
    v
}

/// MPRGP from the feasible start `y0` (projected if needed).
pub fn mprgp_solve<O: QpOperator>(p: &QpProblem<O>, y0: &[f64], opts: &MprgpOptions) -> Result<QpSolution> {
    let n = p.dim();
    if y0.len() != n {
        return Err(Error::Dimension(format!("start of length {} for QP of size {n}", y0.len())));
    }
    if !(opts.rtol > 0.0) || !(opts.gamma > 0.0) {
        return Err(Error::InvalidSpec("MPRGP needs rtol > 0 and Γ > 0".into()));
    }
    let cap = opts.max_iterations.unwrap_or(50 * n.max(1));
    let lower = &p.lower;
    let norm_a = estimate_norm(&p.op, opts.power_iterations)?;
    let mut products = opts.power_iterations.max(1);
    let alpha_bar = if norm_a > 0.0 { 1.0 / norm_a } else { 1.0 };
    let curvature_floor = 1e-13 * norm_a;

    let mut y = p.project(y0);
    let mut g = p.gradient(&y)?;
    products += 1;
    let objective = |y: &[f64], g: &[f64]| 0.5 * (dot(y, g) - dot(y, &p.b)) + p.c;

    let bnorm = norm2(&p.b);
    let scale = if bnorm > 0.0 { bnorm } else { norm2(&g) };
    let tol = opts.rtol * scale;

    let mut history = Vec::new();
    let mut record = |it: usize, kind: StepKind, y: &[f64], g: &[f64]| {
        let gp = projected_gradient_norm(y, g, lower);
        history.push(IterationRecord {
            iteration: it,
            kind,
            objective: objective(y, g),
            projected_gradient: gp,
            active: count_active(y, lower),
        });
        gp
    };

    let mut gp = record(0, StepKind::Start, &y, &g);
    let mut s = split(&y, &g, lower);
    let mut dir = s.free.clone();
    let mut it = 0;
    while gp > tol {
        if it >= cap {
            return Err(Error::IterationCap(cap));
        }
        it += 1;
        let reduced = reduced_free(&y, &s.free, lower, alpha_bar);
        let kind = if dot(&s.chopped, &s.chopped) <= opts.gamma * opts.gamma * dot(&reduced, &s.free) {
            let ap = p.op.apply(&dir)?;
            products += 1;
            let pap = dot(&dir, &ap);
            let pp = dot(&dir, &dir);
            if pap < -curvature_floor * pp {
                return Err(Error::NonPositiveCurvature(pap / pp));
            }
            let a_cg = if pap > curvature_floor * pp { dot(&g, &dir) / pap } else { f64::INFINITY };
            let a_f = feasible_step(&y, &dir, lower);
            if a_cg <= a_f {
                for i in 0..n {
                    y[i] = (y[i] - a_cg * dir[i]).max(lower[i]);
                    g[i] -= a_cg * ap[i];
                }
                s = split(&y, &g, lower);
                let beta = dot(&s.free, &ap) / pap;
                for i in 0..n {
                    dir[i] = s.free[i] - beta * dir[i];
                }
                StepKind::Cg
            } else {
                if !a_f.is_finite() {
                    return Err(Error::NonPositiveCurvature(pap / pp));
                }
                for i in 0..n {
                    y[i] -= a_f * dir[i];
                    g[i] -= a_f * ap[i];
                }
                let sh = split(&y, &g, lower);
                let trial: Vec<f64> = (0..n).map(|i| y[i] - alpha_bar * sh.free[i]).collect();
                y = p.project(&trial);
                g = p.gradient(&y)?;
                products += 1;
                s = split(&y, &g, lower);
                dir = s.free.clone();
                StepKind::Expansion
            }
        } else {
            let d = s.chopped.clone();
            let ad = p.op.apply(&d)?;
            products += 1;
            let dad = dot(&d, &ad);
            let dd = dot(&d, &d);
            if dad <= curvature_floor * dd {
                return Err(Error::NonPositiveCurvature(dad / dd));
            }
            let a = dot(&g, &d) / dad;
            for i in 0..n {
                y[i] = (y[i] - a * d[i]).max(lower[i]);
                g[i] -= a * ad[i];
            }
            s = split(&y, &g, lower);
            dir = s.free.clone();
            StepKind::Proportioning
        };
        gp = record(it, kind, &y, &g);
    }

    // refresh the gradient to remove drift of the recursive updates
    let g_final = p.gradient(&y)?;
    products += 1;
    let gp_final = projected_gradient_norm(&y, &g_final, lower);
    let objective = objective(&y, &g_final);
    let active = y.iter().zip(lower).map(|(a, b)| a <= b).collect();
    Ok(QpSolution {
        y,
        objective,
        iterations: it,
        products,
        projected_gradient_norm: gp_final,
        tolerance: tol,
        active,
        gradient: g_final,
        history,
    })
}

/// Exact minimizer by enumerating all active sets, for small dense problems
/// with a positive definite matrix. Each subset is solved by elimination and
/// the first one satisfying primal and dual feasibility is returned.
pub fn active_set_oracle(a: &DMatrix<f64>, b: &[f64], lower: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    assert!(n <= 20, "exhaustive enumeration is limited to 20 variables");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << n) {
        let active: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let mut y: Vec<f64> = (0..n).map(|i| if active[i] { lower[i] } else { 0.0 }).collect();
        if !free.is_empty() {
            let m = free.len();
            let mut af = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for (r, &i) in free.iter().enumerate() {
                let mut v = b[i];
                for j in 0..n {
                    if active[j] {
                        v -= a[(i, j)] * lower[j];
                    }
                }
                rhs[r] = v;
                for (c, &j) in free.iter().enumerate() {
                    af[(r, c)] = a[(i, j)];
                }
            }
            let sol = match af.lu().solve(&rhs) {
                Some(s) => s,
                None => continue,
            };
            for (r, &i) in free.iter().enumerate() {
                y[i] = sol[r];
            }
        }
        let scale = 1e-10 * (1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max));
        if free.iter().any(|&i| y[i] < lower[i] - scale) {
            continue;
        }
        let yv = DVector::from_column_slice(&y);
        let g = a * &yv - DVector::from_column_slice(b);
        if (0..n).any(|i| active[i] && g[i] < -scale) {
            continue;
        }
        let f = 0.5 * yv.dot(&(a * &yv)) - DVector::from_column_slice(b).dot(&yv);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, y));
        }
    }
    best.map(|(_, y)| y)
}
