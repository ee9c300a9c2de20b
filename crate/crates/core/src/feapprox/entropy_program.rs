//! Max-entropy convex program over atom magnetizations.
//!
//! Variables z_a, one per atom, with box constraints |z_a| ≤ v_a and window
//! constraints l_t ≤ Σ_{a ∈ side_t} z_a ≤ u_t per cut side. The objective is
//! Σ_a v_a H((1 + z_a/v_a)/2), optionally plus a linear term Σ_a q_a z_a
//! (used to fold decomposed degree-1 interactions into the program exactly).
//!
//! The solver certifies its answer: weak duality gives an upper bound from
//! the Lagrangian (whose inner maximization has the closed form
//! z_a = v_a·tanh(q_a − w_a) for net multiplier weight w_a), and the returned
//! feasible point gives the lower bound. Infeasibility is certified by a
//! multiplier vector with dual value below the objective's lower bound.

use crate::error::Result;

/// Feasible solution of the program.
#[derive(Debug, Clone)]
pub struct EntropyProgram {
    /// The atom partition the program was solved over.
    pub atoms: crate::regularity::AtomPartition,
    /// Target row levels (absolute units, elements of I_γ).
    pub r: Vec<f64>,
    /// Target column levels.
    pub c: Vec<f64>,
    pub gamma: f64,
    /// Per-atom net magnetizations, |z_a| ≤ v_a.
    pub z: Vec<f64>,
    /// Certified objective value (per-vertex units; ≤ log 2 when q = 0).
    pub value: f64,
}

#[derive(Debug, Clone)]
pub enum ProgramResult {
    Feasible(EntropyProgram),
    Infeasible,
}

impl ProgramResult {
    pub fn feasible(&self) -> Option<&EntropyProgram> {
        match self {
            ProgramResult::Feasible(p) => Some(p),
            ProgramResult::Infeasible => None,
        }
    }
}

/// The raw constraint system: sides index into atoms.
pub(crate) struct ProgramSpec<'a> {
    pub sizes: &'a [f64],
    pub sides: &'a [Vec<usize>],
    /// Window [lo, hi] per side, in normalized (per-n) units.
    pub windows: &'a [(f64, f64)],
    /// Linear objective coefficients per atom (zero for the pure program).
    pub linear: &'a [f64],
}

pub(crate) struct Solved {
    pub z: Vec<f64>,
    pub value: f64,
    pub upper: f64,
}

pub(crate) enum SolveOutcome {
    Feasible(Solved),
    Infeasible,
}

const FEAS_VIOLATION: f64 = 1e-9;

fn entropy_term(v: f64, z: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    v * crate::model::binary_entropy(0.5 * (1.0 + z / v))
}

fn objective(spec: &ProgramSpec<'_>, z: &[f64]) -> f64 {
    let mut val = 0.0;
    for a in 0..z.len() {
        val += entropy_term(spec.sizes[a], z[a]) + spec.linear[a] * z[a];
    }
    val
}

/// Σ over side members; sides are small, atoms few.
fn side_sum(side: &[usize], z: &[f64]) -> f64 {
    side.iter().map(|&a| z[a]).sum()
}

fn max_violation(spec: &ProgramSpec<'_>, z: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (side, &(lo, hi)) in spec.sides.iter().zip(spec.windows.iter()) {
        let s = side_sum(side, z);
        worst = worst.max(lo - s).max(s - hi);
    }
    worst
}

/// Interval propagation on the box bounds against the windows. Returns false
/// when some interval empties (a certificate of infeasibility).
fn propagate_intervals(spec: &ProgramSpec<'_>, lo: &mut [f64], hi: &mut [f64]) -> bool {
    let a_count = lo.len();
    for _round in 0..(2 * spec.sides.len() + 2) {
        let mut changed = false;
        for (side, &(wlo, whi)) in spec.sides.iter().zip(spec.windows.iter()) {
            let sum_lo: f64 = side.iter().map(|&a| lo[a]).sum();
            let sum_hi: f64 = side.iter().map(|&a| hi[a]).sum();
            if sum_hi < wlo - 1e-12 || sum_lo > whi + 1e-12 {
                return false;
            }
            for &a in side {
                let new_hi = whi - (sum_lo - lo[a]);
                let new_lo = wlo - (sum_hi - hi[a]);
                if new_hi < hi[a] - 1e-15 {
                    hi[a] = new_hi;
                    changed = true;
                }
                if new_lo > lo[a] + 1e-15 {
                    lo[a] = new_lo;
                    changed = true;
                }
            }
        }
        for a in 0..a_count {
            if lo[a] > hi[a] + 1e-12 {
                return false;
            }
        }
        if !changed {
            break;
        }
    }
    true
}

/// Phase 1: minimize the squared window violation over the box by projected
/// gradient. Returns a point with violation ≤ FEAS_VIOLATION, or None.
fn find_feasible(spec: &ProgramSpec<'_>, lo: &[f64], hi: &[f64]) -> Option<Vec<f64>> {
    let a_count = lo.len();
    let mut z: Vec<f64> = (0..a_count).map(|a| 0.5 * (lo[a] + hi[a])).collect();
    if max_violation(spec, &z) <= FEAS_VIOLATION * 0.5 {
        return Some(z);
    }
    // Lipschitz constant of ∇Φ: rows are 0/1 indicators.
    let l: f64 = spec
        .sides
        .iter()
        .map(|s| s.len() as f64)
        .sum::<f64>()
        .max(1.0);
    let step = 1.0 / l;
    let mut g = vec![0.0; a_count];
    for _ in 0..5000 {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut phi = 0.0;
        for (side, &(wlo, whi)) in spec.sides.iter().zip(spec.windows.iter()) {
            let s = side_sum(side, &z);
            let e = if s < wlo {
                s - wlo
            } else if s > whi {
                s - whi
            } else {
                0.0
            };
            if e != 0.0 {
                phi += e * e;
                for &a in side {
                    g[a] += e;
                }
            }
        }
        if phi <= FEAS_VIOLATION * FEAS_VIOLATION * 0.25 {
            return Some(z);
        }
        let mut moved = 0.0f64;
        for a in 0..a_count {
            let nz = (z[a] - step * g[a]).clamp(lo[a], hi[a]);
            moved = moved.max((nz - z[a]).abs());
            z[a] = nz;
        }
        if moved < 1e-17 {
            break;
        }
    }
    if max_violation(spec, &z) <= FEAS_VIOLATION {
        Some(z)
    } else {
        None
    }
}

/// Multiplier layout: for side t, index 2t is the upper constraint
/// (Σ z − u_t ≤ 0) and 2t+1 the lower (l_t − Σ z ≤ 0).
struct Dual<'p, 'a> {
    spec: &'p ProgramSpec<'a>,
}

impl Dual<'_, '_> {
    /// Closed-form inner maximizer and dual value g(λ).
    fn eval(&self, lambda: &[f64], z_out: &mut [f64]) -> f64 {
        let spec = self.spec;
        let a_count = spec.sizes.len();
        let mut w = vec![0.0f64; a_count];
        for (t, side) in spec.sides.iter().enumerate() {
            let net = lambda[2 * t] - lambda[2 * t + 1];
            for &a in side {
                w[a] += net;
            }
        }
        let mut g = 0.0;
        for a in 0..a_count {
            let y = (spec.linear[a] - w[a]).tanh();
            let z = spec.sizes[a] * y;
            z_out[a] = z;
            g += entropy_term(spec.sizes[a], z) + (spec.linear[a] - w[a]) * z;
        }
        for (t, &(lo, hi)) in spec.windows.iter().enumerate() {
            g += lambda[2 * t] * hi - lambda[2 * t + 1] * lo;
        }
        g
    }

    /// ∂g/∂λ via the envelope theorem: the (signed) constraint slack at z(λ).
    fn gradient(&self, z: &[f64], grad: &mut [f64]) {
        for (t, (side, &(lo, hi))) in self
            .spec
            .sides
            .iter()
            .zip(self.spec.windows.iter())
            .enumerate()
        {
            let s = side_sum(side, z);
            grad[2 * t] = hi - s;
            grad[2 * t + 1] = s - lo;
        }
    }
}

/// Solve to additive tolerance `tol`, certified by weak duality.
pub(crate) fn solve(spec: &ProgramSpec<'_>, tol: f64) -> Result<SolveOutcome> {
    let a_count = spec.sizes.len();
    let mut lo: Vec<f64> = spec.sizes.iter().map(|&v| -v).collect();
    let mut hi: Vec<f64> = spec.sizes.to_vec();

    if !propagate_intervals(spec, &mut lo, &mut hi) {
        return Ok(SolveOutcome::Infeasible);
    }
    let Some(anchor) = find_feasible(spec, &lo, &hi) else {
        return Ok(SolveOutcome::Infeasible);
    };

    // Unconstrained-over-box lower bound on any feasible objective; the dual
    // dropping below it certifies infeasibility (not expected after phase 1).
    let obj_floor: f64 = (0..a_count)
        .map(|a| -spec.linear[a].abs() * spec.sizes[a])
        .sum();

    let dual = Dual { spec };
    let m = 2 * spec.sides.len();
    let mut lambda = vec![0.0f64; m];
    let mut z = vec![0.0f64; a_count];
    let mut grad = vec![0.0f64; m];
    let mut g_val = dual.eval(&lambda, &mut z);
    let mut best_upper = g_val;
    let mut best_point = z.clone();
    let mut step = 1.0f64;

    let mut best_value = objective(spec, &anchor);
    let mut best_z = anchor.clone();

    for iter in 0..20_000 {
        dual.gradient(&z, &mut grad);
        // Projected descent step on λ ≥ 0 with backtracking.
        let mut accepted = false;
        for _ in 0..50 {
            let trial: Vec<f64> = lambda
                .iter()
                .zip(grad.iter())
                .map(|(l, g)| (l - step * g).max(0.0))
                .collect();
            let mut z_trial = vec![0.0; a_count];
            let t_val = dual.eval(&trial, &mut z_trial);
            if t_val <= g_val + 1e-18 {
                lambda = trial;
                z = z_trial;
                g_val = t_val;
                accepted = true;
                step = (step * 1.6).min(1e6);
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                break;
            }
        }
        if g_val < best_upper {
            best_upper = g_val;
            best_point.copy_from_slice(&z);
        }
        if best_upper < obj_floor - 1e-9 {
            return Ok(SolveOutcome::Infeasible);
        }

        // Periodically repair the dual point to feasibility and check the gap.
        if iter % 16 == 15 || !accepted {
            let repaired = repair(spec, &best_point, &anchor);
            let val = objective(spec, &repaired);
            if val > best_value {
                best_value = val;
                best_z = repaired;
            }
            if best_upper - best_value <= tol {
                return Ok(SolveOutcome::Feasible(Solved {
                    z: best_z,
                    value: best_value,
                    upper: best_upper,
                }));
            }
            if !accepted {
                break;
            }
        }
    }

    let repaired = repair(spec, &best_point, &anchor);
    let val = objective(spec, &repaired);
    if val > best_value {
        best_value = val;
        best_z = repaired;
    }
    Ok(SolveOutcome::Feasible(Solved {
        z: best_z,
        value: best_value,
        upper: best_upper,
    }))
}

/// Pull a near-feasible candidate onto the window polytope by blending toward
/// a feasible anchor: constraints are affine, so the minimal blend that fixes
/// each violated side is computable per side.
fn repair(spec: &ProgramSpec<'_>, candidate: &[f64], anchor: &[f64]) -> Vec<f64> {
    let mut theta = 0.0f64;
    for (side, &(lo, hi)) in spec.sides.iter().zip(spec.windows.iter()) {
        let sc = side_sum(side, candidate);
        let sa = side_sum(side, anchor);
        if sc > hi {
            let denom = sc - sa;
            if denom > 0.0 {
                theta = theta.max(((sc - hi) / denom).min(1.0));
            } else {
                theta = 1.0;
            }
        } else if sc < lo {
            let denom = sa - sc;
            if denom > 0.0 {
                theta = theta.max(((lo - sc) / denom).min(1.0));
            } else {
                theta = 1.0;
            }
        }
    }
    if theta == 0.0 {
        return candidate.to_vec();
    }
    candidate
        .iter()
        .zip(anchor.iter())
        .map(|(c, a)| (1.0 - theta) * c + theta * a)
        .collect()
}

/// Public program: maximize Σ_a v_a H((1+z_a/v_a)/2) subject to
/// −v_a ≤ z_a ≤ v_a and |Σ_{a ⊂ R_t} z_a − r_t/n| ≤ γ (likewise for
/// columns) — the constant-dimension rewrite of the max-entropy program over
/// x ∈ [−1,1]^n with |Σ_{i∈R_t} x_i − r_t| ≤ γn. `r` and `c` are level
/// values in absolute units and are normalized by n internally.
pub fn solve_entropy_program(
    atoms: &crate::regularity::AtomPartition,
    r: &[f64],
    c: &[f64],
    gamma: f64,
    tol: f64,
) -> Result<ProgramResult> {
    let s = r.len();
    assert_eq!(c.len(), s, "level vectors must have equal length");
    assert_eq!(
        atoms.membership.len(),
        2 * s,
        "atoms must carry 2s sides (rows then columns)"
    );
    let n = atoms.n as f64;
    let windows: Vec<(f64, f64)> = r
        .iter()
        .chain(c.iter())
        .map(|&level| (level / n - gamma, level / n + gamma))
        .collect();
    let linear = vec![0.0; atoms.sizes.len()];
    let spec = ProgramSpec {
        sizes: &atoms.sizes,
        sides: &atoms.membership,
        windows: &windows,
        linear: &linear,
    };
    match solve(&spec, tol)? {
        SolveOutcome::Infeasible => Ok(ProgramResult::Infeasible),
        SolveOutcome::Feasible(sol) => Ok(ProgramResult::Feasible(EntropyProgram {
            atoms: atoms.clone(),
            r: r.to_vec(),
            c: c.to_vec(),
            gamma,
            z: sol.z,
            value: sol.value,
        })),
    }
}
