//! Closed-form structural bounds on the mean-field error F − F*, and the
//! spectral quantities behind the low-threshold-rank refinement.
//!
//! All logarithms are natural; bounds are in nats, matching the free energy.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{IsingModel, Mrf};

/// Degrees d(u) = Σ_v |J_uv|, eigenvalues of the normalized adjacency
/// J_D = D^{-1/2} J D^{-1/2} (isolated vertices dropped), and entrywise norms
/// of J. Eigenvalues are clamped to [-1,1] after a 1e-9 rounding allowance and
/// sorted by decreasing magnitude.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    pub degrees: Vec<f64>,
    /// Vertices with positive degree, in index order.
    pub kept: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    pub l1_total: f64,
    pub max_abs_entry: f64,
}

pub fn spectral_profile(model: &IsingModel) -> Result<SpectralProfile> {
    let n = model.n();
    let degrees: Vec<f64> = (0..n).map(|i| model.row_abs_sum(i)).collect();
    let kept: Vec<usize> = (0..n).filter(|&i| degrees[i] > 0.0).collect();
    if kept.is_empty() {
        return Err(Error::AllIsolated);
    }
    let k = kept.len();
    let mut jd = DMatrix::<f64>::zeros(k, k);
    for (a, &i) in kept.iter().enumerate() {
        for (b, &j) in kept.iter().enumerate() {
            jd[(a, b)] = model.coupling(i, j) / (degrees[i] * degrees[j]).sqrt();
        }
    }
    let mut eigenvalues: Vec<f64> = jd.symmetric_eigenvalues().iter().copied().collect();
    for v in eigenvalues.iter_mut() {
        if v.abs() > 1.0 + 1e-9 {
            return Err(Error::EigenvalueOutOfRange { value: *v });
        }
        *v = v.clamp(-1.0, 1.0);
    }
    eigenvalues.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).expect("finite eigenvalues"));
    Ok(SpectralProfile {
        degrees,
        kept,
        eigenvalues,
        l1_total: model.couplings().entrywise_l1(),
        max_abs_entry: model.couplings().max_abs_entry(),
    })
}

/// F − F* ≤ 200 n^{2/3} ‖J‖_F^{2/3} log^{1/3}(n‖J‖_F + e).
pub fn mean_field_error_bound(model: &IsingModel) -> f64 {
    let n = model.n() as f64;
    let jf = model.frobenius_norm();
    200.0 * n.powf(2.0 / 3.0) * jf.powf(2.0 / 3.0) * (n * jf + std::f64::consts::E).ln().cbrt()
}

/// F − F* ≤ 2000 r max_d d^{1/3} n^{d/3} ‖J_{=d}‖_F^{2/3} log^{1/3}(· + e).
pub fn mrf_error_bound(model: &Mrf) -> f64 {
    let n = model.n() as f64;
    let r = model.order();
    let mut worst = 0.0f64;
    for d in 1..=r {
        let jf = model.degree_frobenius_norm(d);
        if jf == 0.0 {
            continue;
        }
        let lead = (d as f64).cbrt() * n.powf(d as f64 / 3.0) * jf.powf(2.0 / 3.0);
        worst = worst.max(lead * (lead + std::f64::consts::E).ln().cbrt());
    }
    2000.0 * r as f64 * worst
}

/// F − F* ≤ ε n ‖J‖_F + 10^5 log(e + 1/ε)/ε².
pub fn epsilon_tradeoff_bound(model: &IsingModel, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let n = model.n() as f64;
    let jf = model.frobenius_norm();
    Ok(epsilon * n * jf + 1e5 * (std::f64::consts::E + 1.0 / epsilon).ln() / (epsilon * epsilon))
}

/// δ-sum-of-squares threshold rank t_δ = Σ_{|λ_i| > δ} λ_i² of the normalized
/// adjacency matrix.
pub fn threshold_rank(model: &IsingModel, delta: f64) -> Result<f64> {
    let profile = spectral_profile(model)?;
    Ok(threshold_rank_of(&profile, delta))
}

pub fn threshold_rank_of(profile: &SpectralProfile, delta: f64) -> f64 {
    profile
        .eigenvalues
        .iter()
        .filter(|l| l.abs() > delta)
        .map(|l| l * l)
        .sum()
}

/// F − F* ≤ 3ε‖vec J‖_1 + (32t/ε²) log(2√t·n·s/(ε‖vec J‖_1) + 1), with
/// t = t_{ε/2}(J_D) and s = 16t/ε² from the decomposition width bound.
pub fn low_threshold_rank_bound(model: &IsingModel, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let profile = spectral_profile(model)?;
    if profile.l1_total <= 0.0 {
        return Err(Error::ZeroModel("‖vec J‖_1 = 0".into()));
    }
    let t = threshold_rank_of(&profile, epsilon / 2.0);
    if t == 0.0 {
        return Ok(3.0 * epsilon * profile.l1_total);
    }
    let n = model.n() as f64;
    let s = 16.0 * t / (epsilon * epsilon);
    let log_arg = 2.0 * t.sqrt() * n * s / (epsilon * profile.l1_total) + 1.0;
    Ok(3.0 * epsilon * profile.l1_total + 32.0 * t / (epsilon * epsilon) * log_arg.ln())
}
