//! Mean-field machinery: the fixed-point map x ← tanh(2Jx + h), Dobrushin
//! certification, a certified concave solve in the high-temperature regime,
//! and a multistart projected-gradient ascent used as the reference F* oracle
//! outside that regime.
//!
//! The mean-field equations x* = tanh(2Jx* + h) are the first-order
//! optimality conditions of F*(x) = x^T J x + h·x + Σ_i H((1+x_i)/2). When
//! every row satisfies Σ_j 2|J_ij| ≤ 1 − η with η > 0, the map is an
//! ∞-norm contraction with factor 1 − η and F* is concave.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{entropy_of_mean, IsingModel, ProductDistribution, INTERIOR_TAU};
use crate::rng;

/// Outcome of the Dobrushin row-sum check. `eta` is the slack
/// 1 − max_i Σ_j 2|J_ij| and may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DobrushinCertificate {
    pub satisfied: bool,
    pub eta: f64,
    pub worst_row: usize,
}

pub fn dobrushin_check(model: &IsingModel) -> DobrushinCertificate {
    let mut worst = 0;
    let mut worst_sum = f64::NEG_INFINITY;
    for i in 0..model.n() {
        let s = 2.0 * model.row_abs_sum(i);
        if s > worst_sum {
            worst_sum = s;
            worst = i;
        }
    }
    let eta = 1.0 - worst_sum;
    DobrushinCertificate {
        satisfied: eta >= 0.0,
        eta,
        worst_row: worst,
    }
}

/// Trace of a fixed-point iteration: all iterates (including the start),
/// per-step sup-norm changes, and whether the tolerance was reached.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iterates: Vec<ProductDistribution>,
    pub sup_deltas: Vec<f64>,
    pub converged: bool,
    pub steps: usize,
}

impl IterationTrace {
    pub fn final_iterate(&self) -> &ProductDistribution {
        self.iterates.last().expect("trace always holds the start")
    }
}

/// One application of the mean-field map, y = tanh(2Jx + h).
pub fn mf_step(model: &IsingModel, x: &[f64], out: &mut [f64]) {
    model.couplings().matvec(x, out);
    for (i, v) in out.iter_mut().enumerate() {
        *v = (2.0 * *v + model.fields()[i]).tanh();
    }
}

/// Iterate the mean-field equations from `x0` until ‖Δ‖_∞ ≤ tol or
/// `max_steps`. Non-convergence is reported in the trace, not an error.
pub fn mf_iterate(
    model: &IsingModel,
    x0: &ProductDistribution,
    tol: f64,
    max_steps: usize,
) -> IterationTrace {
    let mut iterates = vec![x0.clone()];
    let mut sup_deltas = Vec::new();
    let mut x = x0.means().to_vec();
    let mut y = vec![0.0; x.len()];
    let mut converged = false;
    let mut steps = 0;
    for _ in 0..max_steps {
        mf_step(model, &x, &mut y);
        let delta = x
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut x, &mut y);
        steps += 1;
        sup_deltas.push(delta);
        iterates.push(ProductDistribution::new(x.clone()).expect("tanh output lies in [-1,1]"));
        if delta <= tol {
            converged = true;
            break;
        }
    }
    IterationTrace {
        iterates,
        sup_deltas,
        converged,
        steps,
    }
}

/// Gradient of F* at an interior point: g_i = 2(Jx)_i + h_i − artanh(x_i).
/// Vanishes exactly at the mean-field fixed points.
pub fn mf_gradient(model: &IsingModel, dist: &ProductDistribution) -> Result<Vec<f64>> {
    let x = dist.means();
    check_interior(x)?;
    let mut g = vec![0.0; x.len()];
    model.couplings().matvec(x, &mut g);
    for (i, gi) in g.iter_mut().enumerate() {
        *gi = 2.0 * *gi + model.fields()[i] - x[i].atanh();
    }
    Ok(g)
}

fn check_interior(x: &[f64]) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        if v.abs() > 1.0 - INTERIOR_TAU {
            return Err(Error::BoundaryMarginal { i });
        }
    }
    Ok(())
}

/// Largest eigenvalue of the Hessian of F*, 2J + diag(−1/(1−x_i²)).
/// Nonpositive everywhere in the Dobrushin regime.
pub fn mf_hessian_extremal_eigenvalue(
    model: &IsingModel,
    dist: &ProductDistribution,
) -> Result<f64> {
    let x = dist.means();
    check_interior(x)?;
    let n = model.n();
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = 2.0 * model.coupling(i, j);
        }
        h[(i, i)] -= 1.0 / (1.0 - x[i] * x[i]);
    }
    let eigs = h.symmetric_eigenvalues();
    Ok(eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// General concave objective x^T S x + h·x + Σ H((1+x_i)/2) over the box,
/// for a symmetric S that may carry a diagonal (cut decompositions do).
pub(crate) struct QuadraticEntropyObjective<'a> {
    pub sym: &'a DenseMatrix,
    pub fields: &'a [f64],
}

impl QuadraticEntropyObjective<'_> {
    fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.sym.quadratic_form(x);
        for (h, xi) in self.fields.iter().zip(x.iter()) {
            v += h * xi;
        }
        v + x.iter().map(|&xi| entropy_of_mean(xi)).sum::<f64>()
    }

    /// g_i = 2(Sx)_i + h_i − artanh(x_i); valid at interior points.
    pub fn gradient(&self, x: &[f64], g: &mut [f64]) {
        self.sym.matvec(x, g);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = 2.0 * *gi + self.fields[i] - x[i].atanh();
        }
    }
}

#[inline]
fn project(x: &mut [f64]) {
    let hi = 1.0 - INTERIOR_TAU;
    for v in x.iter_mut() {
        *v = v.clamp(-hi, hi);
    }
}

pub(crate) struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Projected gradient ascent with Armijo backtracking, followed by a short
/// best-of fixed-point polish. Monotone in the returned value: the result is
/// the best point visited.
pub(crate) fn projected_ascent(
    obj: &QuadraticEntropyObjective<'_>,
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> AscentResult {
    let n = obj.n();
    let mut x = x0.to_vec();
    project(&mut x);
    let mut fx = obj.value(&x);
    let mut g = vec![0.0; n];
    let step0 = 1.0 / (2.0 * obj.sym.frobenius_norm() + 1.0);
    let mut step = step0;
    let mut small_change = 0usize;
    let gtol = tol / (2.0 * n as f64);

    for _ in 0..max_iters {
        obj.gradient(&x, &mut g);
        let ginf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gl1: f64 = g.iter().map(|v| v.abs()).sum();
        // Concavity over the box: opt − f(x) ≤ ‖g‖_1 · width ≤ 2‖g‖_1.
        if ginf <= gtol || 2.0 * gl1 <= tol {
            break;
        }

        let mut accepted = false;
        let mut trial = vec![0.0; n];
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] + step * g[i];
            }
            project(&mut trial);
            let ft = obj.value(&trial);
            let dir: f64 = g
                .iter()
                .zip(trial.iter().zip(x.iter()))
                .map(|(gi, (t, xi))| gi * (t - xi))
                .sum();
            if ft >= fx + 1e-4 * dir && ft.is_finite() {
                let rel = (ft - fx).abs() / fx.abs().max(1.0);
                small_change = if rel <= 1e-14 { small_change + 1 } else { 0 };
                x.copy_from_slice(&trial);
                fx = ft;
                accepted = true;
                step = (step * 2.0).min(step0.max(1.0));
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        if !accepted || small_change >= 5 {
            break;
        }
    }

    // Fixed-point polish: keep iterating the mean-field map while it improves.
    // Near strongly magnetized optima the map converges much faster than
    // gradient steps through the stiff entropy term.
    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut y = vec![0.0; n];
    for _ in 0..60 {
        obj.sym.matvec(&x, &mut y);
        for i in 0..n {
            y[i] = (2.0 * y[i] + obj.fields[i]).tanh();
        }
        project(&mut y);
        let fy = obj.value(&y);
        std::mem::swap(&mut x, &mut y);
        if fy > best_f {
            best_f = fy;
            best_x.copy_from_slice(&x);
        } else if fy < best_f - 1e-12 {
            break;
        }
    }

    AscentResult {
        x: best_x,
        value: best_f,
    }
}

/// Certified solve of F* in the Dobrushin regime by projected gradient ascent
/// on the concave objective. Stops once concavity certifies the remaining gap
/// is below `tol` (2‖g‖_1 ≤ tol, via ‖g‖_∞ ≤ tol/2n).
pub fn concave_solve(model: &IsingModel, tol: f64) -> Result<(ProductDistribution, f64)> {
    let cert = dobrushin_check(model);
    if !cert.satisfied {
        return Err(Error::NotInDobrushinRegime { eta: cert.eta });
    }
    let obj = QuadraticEntropyObjective {
        sym: model.couplings(),
        fields: model.fields(),
    };
    let res = projected_ascent(&obj, &vec![0.0; model.n()], tol, 20_000);
    Ok((ProductDistribution::new(res.x)?, res.value))
}

/// Default restart count for [`multistart_ascent`].
pub fn default_restarts(n: usize) -> usize {
    16 + n / 4
}

/// Best of `restarts` projected-gradient runs from random interior starts,
/// plus the deterministic starts 0 and ±tanh(h) covering the symmetric and
/// field-dominated basins. The value is a valid lower bound on F by the Gibbs
/// principle. Restarts run in parallel on split RNG streams; the selection is
/// deterministic (max value, ties to the lowest restart index).
pub fn multistart_ascent(
    model: &IsingModel,
    restarts: usize,
    seed: u64,
    tol: f64,
) -> (ProductDistribution, f64) {
    multistart_ascent_matrix(model.couplings(), model.fields(), restarts, seed, tol)
}

/// As [`multistart_ascent`], for an arbitrary symmetric interaction matrix
/// (diagonal allowed). Asymmetric input is symmetrized, which leaves the
/// quadratic form unchanged.
pub fn multistart_ascent_matrix(
    couplings: &DenseMatrix,
    fields: &[f64],
    restarts: usize,
    seed: u64,
    tol: f64,
) -> (ProductDistribution, f64) {
    let n = fields.len();
    let sym = symmetrize(couplings);
    let obj = QuadraticEntropyObjective { sym: &sym, fields };

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(restarts + 3);
    starts.push(vec![0.0; n]);
    starts.push(fields.iter().map(|h| h.tanh()).collect());
    starts.push(fields.iter().map(|h| -h.tanh()).collect());
    for k in 0..restarts.max(1) {
        use rand::Rng as _;
        let mut r = rng::stream(seed, k as u64);
        starts.push((0..n).map(|_| r.gen_range(-1.0..1.0)).collect());
    }

    let runs: Vec<AscentResult> = starts
        .par_iter()
        .map(|x0| projected_ascent(&obj, x0, tol, 5_000))
        .collect();

    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.value > runs[best].value {
            best = k;
        }
    }
    let AscentResult { x, value } = runs.into_iter().nth(best).expect("at least one start");
    (
        ProductDistribution::new(x).expect("projected iterates stay in the box"),
        value,
    )
}

fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows();
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            *s.at_mut(i, j) = 0.5 * (m.at(i, j) + m.at(j, i));
        }
    }
    s
}
