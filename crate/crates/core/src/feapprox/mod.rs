//! Regularity-based free-energy approximation.
//!
//! Pipeline: cut-decompose the interaction matrix at ε/12, refine the cut
//! sides into atoms, and grid-search block magnetization levels
//! I_γ = {±γn, ±3γn, …}; each grid point fixes windows |Σ_{R_t} x − r_t| ≤ γn
//! for a max-entropy convex program over per-atom magnetizations (levels are
//! spaced 2γn apart, so every magnetization lies in some window), and the
//! estimate is
//!
//!   F̂ = max over feasible (r,c) of [ Σ_i r_i c_i d_i + n · program value ].
//!
//! The returned budget tracks the four error sources: the ∞→1 transfer
//! between J and its decomposition (twice), the magnetization grouping slack,
//! the count of grid shells, and the program solver tolerance.
//!
//! The full grid has |I_γ|^{2s} points, which explodes for small ε; explicit
//! caps (`BudgetCaps`) coarsen γ and truncate the decomposition to the
//! largest cuts when they bind, flagging the report as degraded. All budget
//! terms are recomputed for the coarsened parameters actually used, so the
//! reported bound stays valid.

mod entropy_program;

pub use entropy_program::{solve_entropy_program, EntropyProgram, ProgramResult};

use std::time::Instant;

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::exact::exact_free_energy_matrix;
use crate::model::{ErrorBudget, FreeEnergyReport, IsingModel, Mrf, ProductDistribution};
use crate::regularity::{
    auto_finder, fk_decompose, inf_to_one_norm_exact, refine_atoms_from_sides, tensor_decompose,
    AtomPartition, CutDecomposition, CutMatrix, DenseTensor, EXACT_NORM_CAP,
};

/// Solver tolerance for the entropy programs; far below every other budget
/// term, and reported as tol·n in the budget.
pub const PROGRAM_TOL: f64 = 1e-9;

const GAMMA_MAX: f64 = 0.9;

/// Magnetization level set I_γ = {±γn, ±3γn, …, ±ℓγn} with ℓ the smallest
/// odd integer satisfying |ℓγn − n| ≤ γn.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub gamma: f64,
    /// Levels in absolute units, ascending.
    pub levels: Vec<f64>,
}

pub fn grid(n: usize, gamma: f64) -> Result<GridSpec> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::BadGamma(gamma));
    }
    let lo = 1.0 / gamma - 1.0;
    let mut ell = (lo - 1e-9).ceil().max(1.0) as i64;
    if ell % 2 == 0 {
        ell += 1;
    }
    debug_assert!((ell as f64) * gamma <= 1.0 + gamma + 1e-9);
    let nf = n as f64;
    let mut levels = Vec::with_capacity(ell as usize + 1);
    let mut k = -ell;
    while k <= ell {
        levels.push(k as f64 * gamma * nf);
        k += 2;
    }
    Ok(GridSpec { gamma, levels })
}

/// Caps that keep the grid search tractable. When they bind, γ is coarsened
/// and the decomposition truncated to the largest-|d| cuts; the report is
/// flagged degraded and the budget recomputed for the parameters used.
#[derive(Debug, Clone, Copy)]
pub struct BudgetCaps {
    pub max_width: usize,
    pub max_levels: usize,
    pub max_grid_points: f64,
}

impl Default for BudgetCaps {
    fn default() -> Self {
        BudgetCaps {
            max_width: 4,
            max_levels: 9,
            max_grid_points: 1e6,
        }
    }
}

/// Valid upper bound on both |F − F_D| and |F* − F*_D| for the residual
/// W = J − D: the exact ‖W‖_{∞→1} when enumerable, otherwise the certified
/// 4ε√(mn)‖J‖_F bound of the decomposition.
pub fn lipschitz_gap_bound(j: &DenseMatrix, decomp: &CutDecomposition) -> f64 {
    let mut w = j.clone();
    w.sub_assign(&decomp.materialize());
    if w.cols() <= EXACT_NORM_CAP {
        inf_to_one_norm_exact(&w).expect("cap checked")
    } else {
        let mn = (j.rows() * j.cols()) as f64;
        4.0 * decomp.epsilon_used * mn.sqrt() * j.frobenius_norm()
    }
}

/// Test oracle for the intermediate problem: log Z*_{D,γ} by exhaustive
/// counting of the shells X_{r,c,γ} = {x : |r_i(x) − r_i| ≤ γn ∀i, same for
/// columns} over all level vectors r,c ∈ I_γ^s.
pub fn z_star_oracle(decomp: &CutDecomposition, gamma: f64) -> Result<f64> {
    let n = decomp.n_rows;
    if n > 15 {
        return Err(Error::TooLargeForExact { n, cap: 15 });
    }
    let spec = grid(n, gamma)?;
    let levels = &spec.levels;
    let nl = levels.len();
    let s = decomp.width();
    if s == 0 {
        return Ok(n as f64 * std::f64::consts::LN_2);
    }
    let sides: Vec<&[usize]> = decomp
        .cuts
        .iter()
        .map(|c| c.rows.as_slice())
        .chain(decomp.cuts.iter().map(|c| c.cols.as_slice()))
        .collect();
    let radius = gamma * n as f64 + 1e-9;

    let total_cells = (nl as f64).powi(2 * s as i32);
    if total_cells > 16_000_000.0 {
        return Err(Error::TooLargeForExact {
            n: decomp.width(),
            cap: 16_000_000,
        });
    }
    let mut counts: Vec<u64> = vec![0; total_cells as usize];

    // Gray-code walk maintaining every side sum.
    let mut x = vec![1.0f64; n];
    let mut sums: Vec<f64> = sides.iter().map(|side| side.len() as f64).collect();
    let mut on_side: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, side) in sides.iter().enumerate() {
        for &i in side.iter() {
            on_side[i].push(t);
        }
    }

    let mut matches: Vec<Vec<usize>> = vec![Vec::new(); 2 * s];
    let record = |sums: &[f64], counts: &mut Vec<u64>, matches: &mut Vec<Vec<usize>>| {
        for (t, &v) in sums.iter().enumerate() {
            matches[t].clear();
            for (li, &lv) in levels.iter().enumerate() {
                if (v - lv).abs() <= radius {
                    matches[t].push(li);
                }
            }
            if matches[t].is_empty() {
                return;
            }
        }
        // Cartesian product over per-side matching levels.
        let mut idx = vec![0usize; 2 * s];
        loop {
            let mut flat = 0usize;
            for t in 0..2 * s {
                flat = flat * nl + matches[t][idx[t]];
            }
            counts[flat] += 1;
            let mut t = 2 * s;
            loop {
                if t == 0 {
                    return;
                }
                t -= 1;
                idx[t] += 1;
                if idx[t] < matches[t].len() {
                    break;
                }
                idx[t] = 0;
            }
        }
    };

    record(&sums, &mut counts, &mut matches);
    for k in 1u64..(1 << n) {
        let i = k.trailing_zeros() as usize;
        x[i] = -x[i];
        for &t in &on_side[i] {
            sums[t] += 2.0 * x[i];
        }
        record(&sums, &mut counts, &mut matches);
    }

    let weights: Vec<f64> = decomp.cuts.iter().map(|c| c.weight).collect();
    let mut best = f64::NEG_INFINITY;
    for (flat, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mut rem = flat;
        let mut idx = vec![0usize; 2 * s];
        for t in (0..2 * s).rev() {
            idx[t] = rem % nl;
            rem /= nl;
        }
        let mut energy = 0.0;
        for i in 0..s {
            energy += weights[i] * levels[idx[i]] * levels[idx[s + i]];
        }
        best = best.max(energy + (count as f64).ln());
    }
    Ok(best)
}

/// Exact free energy of the decomposed model D (used by tests against the
/// sandwich inequalities).
pub fn decomposition_log_z(decomp: &CutDecomposition, cap: usize) -> Result<f64> {
    exact_free_energy_matrix(&decomp.materialize(), cap)
}

struct GridProblem {
    /// One entry per grid axis: the window is [level/n, level/n + γ] over the
    /// atoms of `membership[axis]`.
    axis_sides: Vec<Vec<usize>>,
    /// Energy factors: (weight, axes) per cut; the energy contribution is
    /// weight · Π levels[axis].
    energy_cuts: Vec<(f64, Vec<usize>)>,
    levels: Vec<f64>,
    gamma: f64,
    sizes: Vec<f64>,
    linear: Vec<f64>,
    n: usize,
}

struct GridSolution {
    value: f64,
    flat: u64,
    z: Vec<f64>,
}

impl GridProblem {
    fn axes(&self) -> usize {
        self.axis_sides.len()
    }

    fn decode(&self, mut flat: u64) -> Vec<usize> {
        let nl = self.levels.len() as u64;
        let mut idx = vec![0usize; self.axes()];
        for t in (0..self.axes()).rev() {
            idx[t] = (flat % nl) as usize;
            flat /= nl;
        }
        idx
    }

    fn energy(&self, idx: &[usize]) -> f64 {
        let mut e = 0.0;
        for (w, axes) in &self.energy_cuts {
            let mut p = *w;
            for &a in axes {
                p *= self.levels[idx[a]];
            }
            e += p;
        }
        e
    }

    /// Cheap per-axis feasibility: the window must meet the attainable range
    /// of its side sum.
    fn prescreen(&self, idx: &[usize]) -> bool {
        let n = self.n as f64;
        for (t, side) in self.axis_sides.iter().enumerate() {
            let reach: f64 = side.iter().map(|&a| self.sizes[a]).sum();
            let mid = self.levels[idx[t]] / n;
            if mid - self.gamma > reach + 1e-12 || mid + self.gamma < -reach - 1e-12 {
                return false;
            }
        }
        true
    }

    fn value_cap(&self) -> f64 {
        // Program value never exceeds ln 2 plus the best the linear term can do.
        std::f64::consts::LN_2
            + self
                .linear
                .iter()
                .zip(self.sizes.iter())
                .map(|(q, v)| q.abs() * v)
                .sum::<f64>()
    }

    fn solve_point(&self, flat: u64) -> Option<GridSolution> {
        let idx = self.decode(flat);
        let n = self.n as f64;
        let windows: Vec<(f64, f64)> = idx
            .iter()
            .map(|&li| {
                let mid = self.levels[li] / n;
                (mid - self.gamma, mid + self.gamma)
            })
            .collect();
        let spec = entropy_program::ProgramSpec {
            sizes: &self.sizes,
            sides: &self.axis_sides,
            windows: &windows,
            linear: &self.linear,
        };
        match entropy_program::solve(&spec, PROGRAM_TOL).ok()? {
            entropy_program::SolveOutcome::Infeasible => None,
            entropy_program::SolveOutcome::Feasible(sol) => {
                debug_assert!(sol.upper + 1e-9 >= sol.value);
                Some(GridSolution {
                    value: self.energy(&idx) + n * sol.value,
                    flat,
                    z: sol.z,
                })
            }
        }
    }

    /// Exact maximization over the grid: candidates are ranked by the upper
    /// bound energy + n·(value cap) and solved best-first, so the search stops
    /// as soon as no remaining bound can beat the incumbent. Ties in the
    /// estimate resolve to the lexicographically smallest level vector.
    fn maximize(&self) -> Result<GridSolution> {
        let nl = self.levels.len() as u64;
        let total: u64 = (0..self.axes()).fold(1u64, |acc, _| acc.saturating_mul(nl));
        let cap_term = self.n as f64 * self.value_cap();

        let mut candidates: Vec<(f64, u64)> = (0..total)
            .into_par_iter()
            .filter_map(|flat| {
                let idx = self.decode(flat);
                if !self.prescreen(&idx) {
                    return None;
                }
                Some((self.energy(&idx) + cap_term, flat))
            })
            .collect();
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("finite bounds")
                .then(a.1.cmp(&b.1))
        });

        let mut best: Option<GridSolution> = None;
        for chunk in candidates.chunks(256) {
            if let Some(b) = &best {
                if chunk[0].0 < b.value {
                    break;
                }
            }
            let solved: Vec<GridSolution> = chunk
                .par_iter()
                .filter(|(bound, _)| best.as_ref().map_or(true, |b| *bound >= b.value))
                .filter_map(|&(_, flat)| self.solve_point(flat))
                .collect();
            for sol in solved {
                let better = match &best {
                    None => true,
                    Some(b) => sol.value > b.value || (sol.value == b.value && sol.flat < b.flat),
                };
                if better {
                    best = Some(sol);
                }
            }
        }
        best.ok_or_else(|| {
            Error::GridBudgetExceeded("no feasible grid point; caps are inconsistent".into())
        })
    }
}

/// Coarsen γ until the level count and grid size fit the caps.
fn fit_gamma(n: usize, mut gamma: f64, axes: usize, caps: &BudgetCaps) -> Result<(GridSpec, bool)> {
    gamma = gamma.min(GAMMA_MAX);
    let mut coarsened = false;
    loop {
        let spec = grid(n, gamma)?;
        let points = (spec.levels.len() as f64).powi(axes as i32);
        if spec.levels.len() <= caps.max_levels && points <= caps.max_grid_points {
            return Ok((spec, coarsened));
        }
        if gamma >= GAMMA_MAX {
            return Err(Error::GridBudgetExceeded(format!(
                "grid needs {points:.0} points at the coarsest gamma; raise max_grid_points"
            )));
        }
        gamma = (gamma * 1.25).min(GAMMA_MAX);
        coarsened = true;
    }
}

/// Keep the `keep` largest-|weight| cuts (ties to the earlier cut), preserving
/// order.
fn truncate_cuts(cuts: Vec<CutMatrix>, keep: usize) -> Vec<CutMatrix> {
    if cuts.len() <= keep {
        return cuts;
    }
    let mut ranked: Vec<usize> = (0..cuts.len()).collect();
    ranked.sort_by(|&a, &b| {
        cuts[b]
            .weight
            .abs()
            .partial_cmp(&cuts[a].weight.abs())
            .expect("finite weights")
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = ranked.into_iter().take(keep).collect();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| cuts[i].clone()).collect()
}

/// Canonical vertex order by a permutation-invariant key (field value, then
/// the sorted row of couplings). Running the pipeline in canonical order
/// makes the estimate independent of the input labeling whenever the keys
/// are distinct; equal keys keep their input order.
fn canonical_order_ising(model: &IsingModel) -> Vec<usize> {
    let n = model.n();
    let keys: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = model.couplings().row(i).to_vec();
            row.sort_by(f64::total_cmp);
            let mut key = Vec::with_capacity(n + 1);
            key.push(model.fields()[i]);
            key.extend(row);
            key
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(keys[b].iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// The model with vertex `order[a]` relabeled to `a`.
fn permute_ising(model: &IsingModel, order: &[usize]) -> Result<IsingModel> {
    let n = model.n();
    let mut c = DenseMatrix::zeros(n, n);
    let mut h = vec![0.0; n];
    for a in 0..n {
        h[a] = model.fields()[order[a]];
        for b in 0..n {
            *c.at_mut(a, b) = model.coupling(order[a], order[b]);
        }
    }
    IsingModel::new(c, h)
}

fn unpermute_marginals(dist: &ProductDistribution, order: &[usize]) -> Result<ProductDistribution> {
    let mut means = vec![0.0; dist.n()];
    for (a, &orig) in order.iter().enumerate() {
        means[orig] = dist.means()[a];
    }
    ProductDistribution::new(means)
}

/// Regularity-based estimate of the free energy of an Ising model, with an
/// implicit product-distribution description and an error budget.
pub fn approx_free_energy(
    model: &IsingModel,
    epsilon: f64,
    seed: u64,
    caps: &BudgetCaps,
) -> Result<FreeEnergyReport> {
    let order = canonical_order_ising(model);
    if order.iter().enumerate().any(|(a, &o)| a != o) {
        let canonical = permute_ising(model, &order)?;
        let mut report = approx_free_energy_in_order(&canonical, epsilon, seed, caps)?;
        if let Some(m) = report.marginals.take() {
            report.marginals = Some(unpermute_marginals(&m, &order)?);
        }
        return Ok(report);
    }
    approx_free_energy_in_order(model, epsilon, seed, caps)
}

fn approx_free_energy_in_order(
    model: &IsingModel,
    epsilon: f64,
    seed: u64,
    caps: &BudgetCaps,
) -> Result<FreeEnergyReport> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let t0 = Instant::now();
    let n = model.n();
    let j = model.couplings();

    let full = fk_decompose(j, epsilon / 12.0, seed, auto_finder(n, n))?;
    let mut degraded = full.width() > caps.max_width;
    let mut decomp = CutDecomposition {
        n_rows: n,
        n_cols: n,
        cuts: truncate_cuts(full.cuts, caps.max_width),
        epsilon_used: full.epsilon_used,
        residual_frobenius: 0.0,
    };
    let mut w = j.clone();
    w.sub_assign(&decomp.materialize());
    decomp.residual_frobenius = w.frobenius_norm();

    // External fields enter the programs exactly (linearly in z) through a
    // 1-index cut decomposition of h, so atoms refine the cut supports.
    let (field_cuts, field_residual) = decompose_field(model.fields(), epsilon / 3.0);

    let s = decomp.width();
    let mut sides: Vec<&[usize]> = field_cuts.iter().map(|(set, _)| set.as_slice()).collect();
    let field_side_count = sides.len();
    sides.extend(decomp.cuts.iter().map(|c| c.rows.as_slice()));
    sides.extend(decomp.cuts.iter().map(|c| c.cols.as_slice()));
    let atoms = refine_atoms_from_sides(n, &sides);

    let mut linear = vec![0.0f64; atoms.atoms.len()];
    for (t, (_, dval)) in field_cuts.iter().enumerate() {
        for &a in &atoms.membership[t] {
            linear[a] += dval;
        }
    }

    let (spec, value, z, gamma_used) = if s == 0 {
        let program = entropy_program::ProgramSpec {
            sizes: &atoms.sizes,
            sides: &[],
            windows: &[],
            linear: &linear,
        };
        match entropy_program::solve(&program, PROGRAM_TOL)? {
            entropy_program::SolveOutcome::Feasible(sol) => {
                (None, n as f64 * sol.value, sol.z, 0.0)
            }
            entropy_program::SolveOutcome::Infeasible => unreachable!("box is never empty"),
        }
    } else {
        let gamma0 = epsilon / (48.0 * (s as f64).sqrt());
        let (spec, coarsened) = fit_gamma(n, gamma0, 2 * s, caps)?;
        degraded |= coarsened;
        let problem = GridProblem {
            axis_sides: atoms.membership[field_side_count..].to_vec(),
            energy_cuts: decomp
                .cuts
                .iter()
                .enumerate()
                .map(|(i, c)| (c.weight, vec![i, s + i]))
                .collect(),
            levels: spec.levels.clone(),
            gamma: spec.gamma,
            sizes: atoms.sizes.clone(),
            linear: linear.clone(),
            n,
        };
        let sol = problem.maximize()?;
        let gamma = spec.gamma;
        (Some(spec), sol.value, sol.z, gamma)
    };

    let marginals = marginals_from_atoms(&atoms, &z)?;
    let transfer = lipschitz_gap_bound(j, &decomp);
    let jf = model.frobenius_norm();
    let budget = ErrorBudget {
        cut_transfer: 2.0 * (transfer + field_residual),
        grouping: 2.0 * 8.0 * jf * gamma_used * n as f64 * (s as f64).sqrt(),
        grid_count: 2.0
            * s as f64
            * if let Some(sp) = &spec {
                (1.0 / sp.gamma + 1.0).ln()
            } else {
                0.0
            },
        solver: PROGRAM_TOL * n as f64,
    };
    Ok(FreeEnergyReport {
        estimate: value,
        marginals: Some(marginals),
        budget,
        degraded,
        seed,
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

fn marginals_from_atoms(atoms: &AtomPartition, z: &[f64]) -> Result<ProductDistribution> {
    let mut means = vec![0.0; atoms.n];
    for (a, atom) in atoms.atoms.iter().enumerate() {
        let v = atoms.sizes[a];
        let m = if v > 0.0 {
            (z[a] / v).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        for &i in atom {
            means[i] = m;
        }
    }
    ProductDistribution::new(means)
}

/// Decomposition strategy for MRF degree slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrfMode {
    /// Per-slice decomposition at ε/3 with width ≤ 4·9/ε² (runs in n^r time,
    /// better ε-dependence).
    Narrow,
    /// Smaller per-slice ε (ε/(3·2^{d−1})) compensating the 2^d transfer
    /// factor; wider decompositions.
    WidthHeavy,
}

/// Regularity-based estimate for an order-r MRF. Slices of degree ≤ 2 reduce
/// exactly to the Ising path; higher slices are cut-decomposed as d-index
/// arrays and share one joint atom refinement and grid.
pub fn approx_free_energy_mrf(
    model: &Mrf,
    epsilon: f64,
    seed: u64,
    mode: MrfMode,
    caps: &BudgetCaps,
) -> Result<FreeEnergyReport> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    if model.max_degree() <= 2 {
        return approx_free_energy(&mrf_as_ising(model)?, epsilon, seed, caps);
    }
    let order = canonical_order_mrf(model);
    if order.iter().enumerate().any(|(a, &o)| a != o) {
        let canonical = permute_mrf(model, &order)?;
        let mut report = approx_free_energy_mrf_in_order(&canonical, epsilon, seed, mode, caps)?;
        if let Some(m) = report.marginals.take() {
            report.marginals = Some(unpermute_marginals(&m, &order)?);
        }
        return Ok(report);
    }
    approx_free_energy_mrf_in_order(model, epsilon, seed, mode, caps)
}

fn canonical_order_mrf(model: &Mrf) -> Vec<usize> {
    let n = model.n();
    // Key: sorted (degree, coefficient) pairs of the terms containing i.
    let mut keys: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (key, &coeff) in model.terms() {
        for &i in key {
            keys[i].push((key.len(), coeff));
        }
    }
    for k in keys.iter_mut() {
        k.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (&keys[a], &keys[b]);
        ka.len().cmp(&kb.len()).then_with(|| {
            ka.iter()
                .zip(kb.iter())
                .map(|(x, y)| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    order
}

fn permute_mrf(model: &Mrf, order: &[usize]) -> Result<Mrf> {
    let n = model.n();
    let mut inverse = vec![0usize; n];
    for (a, &orig) in order.iter().enumerate() {
        inverse[orig] = a;
    }
    let terms: Vec<(Vec<usize>, f64)> = model
        .terms()
        .iter()
        .map(|(key, &coeff)| {
            let mut k: Vec<usize> = key.iter().map(|&i| inverse[i]).collect();
            k.sort_unstable();
            (k, coeff)
        })
        .collect();
    Mrf::new(n, model.order(), terms)
}

fn approx_free_energy_mrf_in_order(
    model: &Mrf,
    epsilon: f64,
    seed: u64,
    mode: MrfMode,
    caps: &BudgetCaps,
) -> Result<FreeEnergyReport> {
    let t0 = Instant::now();
    let n = model.n();
    let nf = n as f64;

    // Degree-1 slice: greedy subset cuts, folded into the programs exactly.
    let mut field_vec = vec![0.0f64; n];
    for (key, coeff) in model.degree_slice(1) {
        field_vec[key[0]] += coeff;
    }
    let eps1 = epsilon / 3.0;
    let (field_cuts, field_residual_l1) = decompose_field(&field_vec, eps1);

    // Higher slices.
    struct SliceCut {
        weight: f64,
        sets: Vec<Vec<usize>>,
        degree: usize,
    }
    let mut tensor_cuts: Vec<SliceCut> = Vec::new();
    let mut transfer = 2.0 * field_residual_l1;
    let mut degraded = false;
    for d in 2..=model.order() {
        let slice_norm = model.degree_frobenius_norm(d);
        if slice_norm == 0.0 {
            continue;
        }
        let eps_dec = match mode {
            MrfMode::Narrow => epsilon / 3.0,
            MrfMode::WidthHeavy => epsilon / (3.0 * 2f64.powi(d as i32 - 1)),
        };
        if (nf.powi(d as i32)) > crate::regularity::TENSOR_SIZE_CAP as f64 {
            return Err(Error::TooLargeForExact {
                n: model.n(),
                cap: crate::regularity::TENSOR_SIZE_CAP,
            });
        }
        let tensor = DenseTensor::from_mrf_slice(model, d);
        let dec = tensor_decompose(&tensor, eps_dec, seed.wrapping_add(d as u64))?;
        // Certified ∞→1 transfer for the residual: 2^d · stopping threshold.
        transfer += 2.0 * 2f64.powi(d as i32) * eps_dec * nf.powf(d as f64 / 2.0) * slice_norm;
        for cut in dec.cuts {
            tensor_cuts.push(SliceCut {
                weight: cut.weight,
                sets: cut.index_sets,
                degree: d,
            });
        }
    }

    // Truncate to the caps by maximal possible energy contribution.
    if tensor_cuts.len() > caps.max_width {
        degraded = true;
        let mut ranked: Vec<usize> = (0..tensor_cuts.len()).collect();
        ranked.sort_by(|&a, &b| {
            let ea = tensor_cuts[a].weight.abs() * nf.powi(tensor_cuts[a].degree as i32);
            let eb = tensor_cuts[b].weight.abs() * nf.powi(tensor_cuts[b].degree as i32);
            eb.partial_cmp(&ea).expect("finite").then(a.cmp(&b))
        });
        let mut keep: Vec<usize> = ranked.into_iter().take(caps.max_width).collect();
        keep.sort_unstable();
        tensor_cuts = {
            let mut picked = Vec::with_capacity(keep.len());
            let mut iter = tensor_cuts.into_iter().enumerate();
            let mut want = keep.into_iter().peekable();
            while let Some(&k) = want.peek() {
                let (i, c) = iter.next().expect("index in range");
                if i == k {
                    picked.push(c);
                    want.next();
                }
            }
            picked
        };
    }

    // Joint atoms over field-cut supports and every tensor cut side.
    let mut sides: Vec<&[usize]> = Vec::new();
    for (s, _) in &field_cuts {
        sides.push(s.as_slice());
    }
    let field_side_count = sides.len();
    for cut in &tensor_cuts {
        for set in &cut.sets {
            sides.push(set.as_slice());
        }
    }
    let atoms = refine_atoms_from_sides(n, &sides);

    // Linear program coefficients from the field cuts.
    let mut linear = vec![0.0f64; atoms.atoms.len()];
    for (t, (_, dval)) in field_cuts.iter().enumerate() {
        for &a in &atoms.membership[t] {
            linear[a] += dval;
        }
    }

    // Grid axes: one per tensor-cut slot.
    let axes: usize = tensor_cuts.iter().map(|c| c.degree).sum();
    let axis_sides: Vec<Vec<usize>> = atoms.membership[field_side_count..].to_vec();
    debug_assert_eq!(axis_sides.len(), axes);

    let max_deg = tensor_cuts.iter().map(|c| c.degree).max().unwrap_or(2);
    let (value, z, gamma_used, grid_levels_ln) = if axes == 0 {
        // No windows: closed-form program.
        let spec = entropy_program::ProgramSpec {
            sizes: &atoms.sizes,
            sides: &[],
            windows: &[],
            linear: &linear,
        };
        match entropy_program::solve(&spec, PROGRAM_TOL)? {
            entropy_program::SolveOutcome::Feasible(sol) => (nf * sol.value, sol.z, 0.0, 0.0),
            entropy_program::SolveOutcome::Infeasible => unreachable!("box is never empty"),
        }
    } else {
        let gamma0 = epsilon * epsilon / (18.0 * max_deg as f64);
        let (spec, coarsened) = fit_gamma(n, gamma0, axes, caps)?;
        degraded |= coarsened;
        let mut energy_cuts = Vec::with_capacity(tensor_cuts.len());
        let mut axis = 0usize;
        for cut in &tensor_cuts {
            let list: Vec<usize> = (axis..axis + cut.degree).collect();
            axis += cut.degree;
            energy_cuts.push((cut.weight, list));
        }
        let problem = GridProblem {
            axis_sides,
            energy_cuts,
            levels: spec.levels.clone(),
            gamma: spec.gamma,
            sizes: atoms.sizes.clone(),
            linear: linear.clone(),
            n,
        };
        let sol = problem.maximize()?;
        (sol.value, sol.z, spec.gamma, (1.0 / spec.gamma + 1.0).ln())
    };

    let grouping: f64 = 2.0
        * tensor_cuts
            .iter()
            .map(|c| {
                c.weight.abs()
                    * c.degree as f64
                    * gamma_used
                    * nf.powi(c.degree as i32)
                    * (1.0 + gamma_used).powi(c.degree as i32 - 1)
            })
            .sum::<f64>();
    let budget = ErrorBudget {
        cut_transfer: transfer,
        grouping,
        grid_count: axes as f64 * grid_levels_ln,
        solver: PROGRAM_TOL * nf,
    };
    let marginals = marginals_from_atoms(&atoms, &z)?;
    Ok(FreeEnergyReport {
        estimate: value,
        marginals: Some(marginals),
        budget,
        degraded,
        seed,
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

/// Exact reduction of a degree-≤2 MRF to an Ising model: pair terms halve
/// (the Ising energy counts ordered pairs), singletons become fields.
fn mrf_as_ising(model: &Mrf) -> Result<IsingModel> {
    let n = model.n();
    let mut c = DenseMatrix::zeros(n, n);
    let mut h = vec![0.0; n];
    for (key, &coeff) in model.terms() {
        match key.len() {
            1 => h[key[0]] += coeff,
            2 => {
                *c.at_mut(key[0], key[1]) += 0.5 * coeff;
                *c.at_mut(key[1], key[0]) += 0.5 * coeff;
            }
            _ => {
                return Err(Error::InvalidParams(
                    "mrf_as_ising requires degree <= 2".into(),
                ))
            }
        }
    }
    IsingModel::new(c, h)
}

/// Greedy 1-index cut decomposition of a field vector: the exact best subset
/// is the positive (or negative) support. Returns the cuts and a certified
/// bound on sup_{x∈[-1,1]^n} |residual · x|.
fn decompose_field(w: &[f64], epsilon: f64) -> (Vec<(Vec<usize>, f64)>, f64) {
    let n = w.len();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (Vec::new(), 0.0);
    }
    let threshold = epsilon * (n as f64).sqrt() * norm;
    let width_cap = (4.0 / (epsilon * epsilon)).ceil() as usize;
    let mut res = w.to_vec();
    let mut cuts = Vec::new();
    while cuts.len() < width_cap {
        let pos: f64 = res.iter().filter(|v| **v > 0.0).sum();
        let neg: f64 = res.iter().filter(|v| **v < 0.0).sum();
        let (val, positive) = if pos >= -neg {
            (pos, true)
        } else {
            (-neg, false)
        };
        if val <= threshold {
            break;
        }
        let set: Vec<usize> = (0..n)
            .filter(|&i| if positive { res[i] > 0.0 } else { res[i] < 0.0 })
            .collect();
        let signed: f64 = set.iter().map(|&i| res[i]).sum();
        let d = signed / set.len() as f64;
        for &i in &set {
            res[i] -= d;
        }
        cuts.push((set, d));
    }
    // |Σ res_i x_i| ≤ Σ|res_i| ≤ 2 · best remaining one-sided sum ≤ 2·threshold.
    let l1: f64 = res.iter().map(|v| v.abs()).sum();
    (cuts, l1.min(2.0 * threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_free_energy, exact_free_energy_mrf};
    use crate::generate;
    use crate::regularity::CutFinder;

    #[test]
    fn grid_matches_paper_examples() {
        let g = grid(10, 0.2).unwrap();
        let expect = [-10.0, -6.0, -2.0, 2.0, 6.0, 10.0];
        assert_eq!(g.levels.len(), expect.len());
        for (a, b) in g.levels.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-9, "level {a} vs {b}");
        }
        assert!(g.levels.len() as f64 <= 1.0 / 0.2 + 1.0);

        let g9 = grid(50, 0.9).unwrap();
        assert_eq!(g9.levels.len(), 2);
        assert!((g9.levels[1] - 0.9 * 50.0).abs() < 1e-12);
    }

    #[test]
    fn grid_covers_all_magnetizations() {
        let n = 17;
        let gamma = 0.13;
        let g = grid(n, gamma).unwrap();
        let radius = gamma * n as f64;
        let mut worst = 0.0f64;
        for m in -(n as i64)..=(n as i64) {
            let dist = g
                .levels
                .iter()
                .map(|l| (l - m as f64).abs())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(dist);
            assert!(dist <= radius + 1e-9, "magnetization {m} uncovered: {dist}");
        }
        assert!(worst <= 2.21 + 1e-9);
    }

    #[test]
    fn grid_rejects_bad_gamma() {
        assert!(matches!(grid(5, 0.0), Err(Error::BadGamma(_))));
        assert!(matches!(grid(5, 1.0), Err(Error::BadGamma(_))));
    }

    #[test]
    fn zero_model_gives_n_log2() {
        let m = IsingModel::zero(8);
        let rep = approx_free_energy(&m, 0.5, 0, &BudgetCaps::default()).unwrap();
        assert!((rep.estimate - 8.0 * std::f64::consts::LN_2).abs() < 1e-6);
        let marg = rep.marginals.unwrap();
        assert!(marg.means().iter().all(|&v| v.abs() < 1e-6));
        assert!(!rep.degraded);
    }

    #[test]
    fn estimate_within_additive_budget_on_random_models() {
        for seed in 0..4u64 {
            let m = generate::random_gaussian(12, 1.0, seed).unwrap();
            let rep = approx_free_energy(&m, 0.5, seed, &BudgetCaps::default()).unwrap();
            let f = exact_free_energy(&m).unwrap();
            let budget = 0.5 * 12.0 * m.frobenius_norm()
                + 1e6 * (std::f64::consts::E + 2.0).ln() / 0.25
                + PROGRAM_TOL * 12.0;
            assert!(
                (rep.estimate - f).abs() <= budget,
                "seed {seed}: estimate {} vs exact {f}",
                rep.estimate
            );
            // Marginals give a valid product distribution with value ≤ F.
            let marg = rep.marginals.unwrap();
            let obj = m.mf_objective(&marg);
            assert!(obj <= f + 1e-9, "seed {seed}: objective {obj} above F={f}");
        }
    }

    #[test]
    fn estimate_is_label_invariant() {
        // Permuting vertex labels permutes marginals and leaves F̂ unchanged.
        let m = generate::random_gaussian(9, 0.8, 5).unwrap();
        let n = 9;
        let perm: Vec<usize> = vec![3, 1, 4, 0, 8, 6, 2, 7, 5];
        let mut c = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *c.at_mut(perm[i], perm[j]) = m.coupling(i, j);
            }
        }
        let pm = IsingModel::new(c, vec![0.0; n]).unwrap();
        let a = approx_free_energy(&m, 0.5, 3, &BudgetCaps::default()).unwrap();
        let b = approx_free_energy(&pm, 0.5, 3, &BudgetCaps::default()).unwrap();
        assert!(
            (a.estimate - b.estimate).abs() < 1e-9,
            "estimates differ: {} vs {}",
            a.estimate,
            b.estimate
        );
    }

    /// Two planted ±1 blocks plus noise: cut norm is a constant fraction of
    /// n‖J‖_F, so decompositions at ε = 0.25 are nonempty.
    fn planted_block_model(n: usize, seed: u64) -> IsingModel {
        use rand::Rng as _;
        let mut r = crate::rng::stream(seed, 9);
        let mut c = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let sign = if (i < n / 2) == (j < n / 2) {
                    1.0
                } else {
                    -1.0
                };
                let w = sign + r.gen_range(-0.03..0.03);
                *c.at_mut(i, j) = w;
                *c.at_mut(j, i) = w;
            }
        }
        IsingModel::new(c, vec![0.0; n]).unwrap()
    }

    #[test]
    fn z_star_sandwich_inequalities() {
        // Eqs: log Z_D − 8‖J‖_F υ n √s − 2s log(1/υ+1) ≤ log Z*_{D,υ}
        //      log Z*_{D,υ} ≤ log Z_D + 8‖J‖_F υ n √s.
        let mut total_width = 0;
        for seed in 0..3u64 {
            let m = planted_block_model(10, seed);
            let d = fk_decompose(m.couplings(), 0.25, seed, CutFinder::Exhaustive).unwrap();
            total_width += d.width();
            if d.width() == 0 {
                continue;
            }
            let logzd = decomposition_log_z(&d, 15).unwrap();
            let jf = m.frobenius_norm();
            let s = d.width() as f64;
            for upsilon in [0.1, 0.25, 0.5] {
                let zs = z_star_oracle(&d, upsilon).unwrap();
                let group = 8.0 * jf * upsilon * 10.0 * s.sqrt();
                let count = 2.0 * s * (1.0 / upsilon + 1.0).ln();
                assert!(
                    zs >= logzd - group - count - 1e-9,
                    "seed {seed} υ={upsilon}: lower sandwich fails: {zs} vs {logzd}"
                );
                assert!(
                    zs <= logzd + group + 1e-9,
                    "seed {seed} υ={upsilon}: upper sandwich fails: {zs} vs {logzd}"
                );
            }
        }
        assert!(total_width > 0, "sandwich test would be vacuous");
    }

    #[test]
    fn subcritical_curie_weiss_tracks_multistart() {
        // n = 100 is beyond enumeration; the multistart value anchors F̂.
        let m = generate::curie_weiss(100, 0.5, 0.0).unwrap();
        let eps = 0.5;
        let rep = approx_free_energy(&m, eps, 2, &BudgetCaps::default()).unwrap();
        let (_, v) = crate::meanfield::multistart_ascent(&m, 16, 2, 1e-9);
        let slack = eps * 100.0 * m.frobenius_norm() + rep.budget.total();
        assert!(
            (rep.estimate - v).abs() <= slack,
            "F̂ = {} vs multistart {v}, slack {slack}",
            rep.estimate
        );
    }

    #[test]
    fn z_star_sandwich_single_cut() {
        // One planted cut on n = 8, υ = 0.25.
        let n = 8;
        let mut c = DenseMatrix::zeros(n, n);
        for i in [0usize, 2, 3] {
            for j in [1usize, 4, 6, 7] {
                *c.at_mut(i, j) += 0.4;
                *c.at_mut(j, i) += 0.4;
            }
        }
        let m = IsingModel::new(c, vec![0.0; n]).unwrap();
        let d = fk_decompose(m.couplings(), 0.25, 0, CutFinder::Exhaustive).unwrap();
        assert!(d.width() >= 1);
        let logzd = decomposition_log_z(&d, 15).unwrap();
        let zs = z_star_oracle(&d, 0.25).unwrap();
        let s = d.width() as f64;
        let group = 8.0 * m.frobenius_norm() * 0.25 * n as f64 * s.sqrt();
        let count = 2.0 * s * (1.0f64 / 0.25 + 1.0).ln();
        assert!(zs >= logzd - group - count - 1e-9);
        assert!(zs <= logzd + group + 1e-9);
    }

    #[test]
    fn z_star_empty_decomposition_counts_everything() {
        let d = CutDecomposition {
            n_rows: 8,
            n_cols: 8,
            cuts: vec![],
            epsilon_used: 0.5,
            residual_frobenius: 0.0,
        };
        assert!((z_star_oracle(&d, 0.9).unwrap() - 8.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn entropy_chain_rule_bound_on_buckets() {
        // log|X_{r,c,γ}| ≤ Σ_j H((1+ȳ_j)/2) for the bucket average ȳ.
        let m = planted_block_model(10, 2);
        let d = fk_decompose(m.couplings(), 0.25, 2, CutFinder::Exhaustive).unwrap();
        assert!(d.width() > 0, "chain-rule test would be vacuous");
        let n = 10usize;
        let gamma = 0.25;
        let levels = grid(n, gamma).unwrap().levels;
        let radius = gamma * n as f64 + 1e-9;
        let sides: Vec<Vec<usize>> = d
            .cuts
            .iter()
            .map(|c| c.rows.clone())
            .chain(d.cuts.iter().map(|c| c.cols.clone()))
            .collect();
        // Pick one bucket per level choice of the first side and test it.
        for &l0 in &levels {
            let mut count = 0u64;
            let mut sum = vec![0.0f64; n];
            for mask in 0u64..(1 << n) {
                let x: Vec<f64> = (0..n)
                    .map(|i| if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 })
                    .collect();
                let ok = sides.iter().enumerate().all(|(t, side)| {
                    let v: f64 = side.iter().map(|&i| x[i]).sum();
                    let target = if t == 0 { l0 } else { levels[levels.len() / 2] };
                    (v - target).abs() <= radius
                });
                if ok {
                    count += 1;
                    for i in 0..n {
                        sum[i] += x[i];
                    }
                }
            }
            if count == 0 {
                continue;
            }
            let entropy: f64 = sum
                .iter()
                .map(|&s| crate::model::entropy_of_mean(s / count as f64))
                .sum();
            assert!(
                (count as f64).ln() <= entropy + 1e-9,
                "bucket at level {l0}: log count {} vs entropy {entropy}",
                (count as f64).ln()
            );
        }
    }

    #[test]
    fn lipschitz_bound_dominates_true_gaps() {
        for seed in 10..14u64 {
            let m = generate::random_gaussian(10, 0.7, seed).unwrap();
            let d = fk_decompose(m.couplings(), 0.35, seed, CutFinder::Exhaustive).unwrap();
            let bound = lipschitz_gap_bound(m.couplings(), &d);
            let f_j = exact_free_energy(&m).unwrap();
            let f_d = decomposition_log_z(&d, 15).unwrap();
            assert!((f_j - f_d).abs() <= bound + 1e-9, "seed {seed}");
        }
        // Empty decomposition: the bound is the exact norm of J itself.
        let m = generate::random_gaussian(6, 0.5, 0).unwrap();
        let full = CutDecomposition {
            n_rows: 6,
            n_cols: 6,
            cuts: vec![],
            epsilon_used: 0.5,
            residual_frobenius: m.frobenius_norm(),
        };
        let mut w = m.couplings().clone();
        w.sub_assign(&full.materialize());
        assert!(
            (lipschitz_gap_bound(m.couplings(), &full) - inf_to_one_norm_exact(&w).unwrap()).abs()
                < 1e-12
        );
    }

    #[test]
    fn mrf_degree_two_agrees_with_ising_path() {
        let mut terms = Vec::new();
        use rand::Rng as _;
        let mut r = crate::rng::seeded(31);
        for i in 0..8 {
            for j in (i + 1)..8 {
                if r.gen_bool(0.5) {
                    terms.push((vec![i, j], r.gen_range(-0.6..0.6f64)));
                }
            }
        }
        terms.push((vec![2], 0.3));
        let mrf = Mrf::new(8, 2, terms).unwrap();
        let caps = BudgetCaps::default();
        let a = approx_free_energy_mrf(&mrf, 0.5, 7, MrfMode::Narrow, &caps).unwrap();
        let b = approx_free_energy(&mrf_as_ising(&mrf).unwrap(), 0.5, 7, &caps).unwrap();
        assert!(
            (a.estimate - b.estimate).abs() < 1e-9,
            "mrf path {} vs ising path {}",
            a.estimate,
            b.estimate
        );
    }

    #[test]
    fn mrf_zero_gives_n_log2() {
        let mrf = Mrf::new(7, 3, Vec::<(Vec<usize>, f64)>::new()).unwrap();
        let rep =
            approx_free_energy_mrf(&mrf, 0.5, 0, MrfMode::Narrow, &BudgetCaps::default()).unwrap();
        assert!((rep.estimate - 7.0 * std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn mrf_three_uniform_within_additive_budget() {
        for seed in 0..3u64 {
            let mrf = generate::uniform_hypergraph(9, 12, 3, 0.8, seed).unwrap();
            let rep =
                approx_free_energy_mrf(&mrf, 0.5, seed, MrfMode::Narrow, &BudgetCaps::default())
                    .unwrap();
            let f = exact_free_energy_mrf(&mrf).unwrap();
            let eps = 0.5f64;
            let budget = eps * 9f64.powf(1.5) * mrf.degree_frobenius_norm(3)
                + 1e7 * (1.0 / eps).ln() / eps.powi(4)
                + 9.0 * PROGRAM_TOL;
            assert!(
                (rep.estimate - f).abs() <= budget,
                "seed {seed}: estimate {} exact {f}",
                rep.estimate
            );
            let marg = rep.marginals.unwrap();
            assert!(marg.means().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn grouping_bound_on_perturbed_levels() {
        // Σ_i d_i·|r'_i c'_i − r_i c_i| ≤ 8‖J‖_F υ n √s for levels within υn.
        use rand::Rng as _;
        let n = 10f64;
        for seed in 0..3u64 {
            let m = planted_block_model(10, 40 + seed);
            let d = fk_decompose(m.couplings(), 0.25, seed, CutFinder::Exhaustive).unwrap();
            let s = d.width();
            if s == 0 {
                continue;
            }
            let jf = m.frobenius_norm();
            let mut r = crate::rng::stream(seed, 11);
            for upsilon in [0.1, 0.25] {
                for _ in 0..50 {
                    let levels: Vec<(f64, f64, f64, f64)> = (0..s)
                        .map(|_| {
                            let ri = r.gen_range(-n..n);
                            let ci = r.gen_range(-n..n);
                            let rp = (ri + r.gen_range(-upsilon * n..upsilon * n)).clamp(-n, n);
                            let cp = (ci + r.gen_range(-upsilon * n..upsilon * n)).clamp(-n, n);
                            (ri, ci, rp, cp)
                        })
                        .collect();
                    let lhs: f64 = d
                        .cuts
                        .iter()
                        .zip(levels.iter())
                        .map(|(c, &(ri, ci, rp, cp))| c.weight.abs() * (rp * cp - ri * ci).abs())
                        .sum();
                    let rhs = 8.0 * jf * upsilon * n * (s as f64).sqrt();
                    assert!(lhs <= rhs + 1e-9, "seed {seed} υ={upsilon}: {lhs} > {rhs}");
                }
            }
        }
    }

    #[test]
    fn external_field_is_handled_exactly() {
        let m = generate::curie_weiss(10, 1.0, 0.4).unwrap();
        let rep = approx_free_energy(&m, 0.5, 1, &BudgetCaps::default()).unwrap();
        let f = exact_free_energy(&m).unwrap();
        let marg = rep.marginals.unwrap();
        // A positive uniform field must tilt the chosen marginals positive.
        assert!(marg.means().iter().sum::<f64>() > 0.0);
        assert!(m.mf_objective(&marg) <= f + 1e-9);
        let slack = 0.5 * 10.0 * m.frobenius_norm() + 1e6 * (std::f64::consts::E + 2.0).ln() / 0.25;
        assert!((rep.estimate - f).abs() <= slack);
    }

    #[test]
    fn error_paths_name_their_variant() {
        let m = generate::random_gaussian(6, 0.5, 0).unwrap();
        assert!(matches!(
            approx_free_energy(&m, 0.0, 0, &BudgetCaps::default()),
            Err(Error::BadEpsilon(_))
        ));
        assert!(matches!(
            approx_free_energy(&m, 1.5, 0, &BudgetCaps::default()),
            Err(Error::BadEpsilon(_))
        ));
        let mrf = Mrf::new(5, 3, vec![(vec![0, 1, 2], 1.0)]).unwrap();
        assert!(matches!(
            approx_free_energy_mrf(&mrf, 0.0, 0, MrfMode::Narrow, &BudgetCaps::default()),
            Err(Error::BadEpsilon(_))
        ));
        // Caps so tight that even the coarsest grid cannot fit.
        let caps = BudgetCaps {
            max_width: 4,
            max_levels: 9,
            max_grid_points: 1.0,
        };
        let planted = planted_block_model(10, 0);
        assert!(matches!(
            approx_free_energy(&planted, 0.5, 0, &caps),
            Err(Error::GridBudgetExceeded(_))
        ));
        // Oversized z_star grids are refused rather than attempted.
        let d16 = CutDecomposition {
            n_rows: 12,
            n_cols: 12,
            cuts: (0..16)
                .map(|k| CutMatrix {
                    rows: vec![k % 12],
                    cols: vec![(k + 1) % 12],
                    weight: 1.0,
                })
                .collect(),
            epsilon_used: 0.5,
            residual_frobenius: 0.0,
        };
        assert!(matches!(
            z_star_oracle(&d16, 0.05),
            Err(Error::TooLargeForExact { .. })
        ));
    }

    #[test]
    fn field_decomposition_recovers_uniform_vector() {
        let w = vec![0.5; 6];
        let (cuts, residual) = decompose_field(&w, 0.3);
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].0, (0..6).collect::<Vec<_>>());
        assert!((cuts[0].1 - 0.5).abs() < 1e-12);
        assert!(residual < 1e-12);
    }
}
