//! Ferromagnetic mean-field optimization by blow-up and sampling.
//!
//! Each vertex of a ferromagnetic model with uniform field is replaced by m
//! copies coupled at weight J_ij/m. Normalized group net spins Y/m of a
//! Boltzmann sample of the blow-up concentrate near maximizers of the
//! variational free energy, so a handful of samples followed by gradient
//! refinement recovers F* to good accuracy. Sampling uses single-site Glauber
//! dynamics (heat-bath updates), which mixes acceptably on desk-scale
//! ferromagnetic instances; the refinement step only ever improves the
//! objective, so the returned value stays a valid lower bound on F.

use rand::Rng as _;
use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::meanfield::{projected_ascent, QuadraticEntropyObjective};
use crate::model::{IsingModel, ProductDistribution, INTERIOR_TAU};
use crate::rng;

/// Default number of single-site updates per blown vertex in `ferro_optimize`.
pub const DEFAULT_SWEEPS: usize = 200;
/// Cap on m·n so the blown model stays desk scale.
const BLOW_UP_SIZE_CAP: usize = 5000;

/// An m-blow-up: copies (i,0..m) of each base vertex i, cross-copy couplings
/// J_ij/m, zero couplings within a copy group, uniform field h everywhere.
#[derive(Debug, Clone)]
pub struct BlowUp {
    pub base: IsingModel,
    pub m: usize,
    pub blown: IsingModel,
}

/// Vertex (i,k) of the blow-up lives at index i·m + k.
pub fn blow_up(model: &IsingModel, m: usize) -> Result<BlowUp> {
    check_ferromagnetic(model)?;
    let h = model.has_uniform_field()?;
    if m == 0 {
        return Err(Error::InvalidParams("blow-up factor m must be >= 1".into()));
    }
    let n = model.n();
    let nn = n * m;
    let mut c = DenseMatrix::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            let w = model.coupling(i, j) / m as f64;
            if i == j || w == 0.0 {
                continue;
            }
            for k in 0..m {
                for l in 0..m {
                    *c.at_mut(i * m + k, j * m + l) = w;
                }
            }
        }
    }
    let blown = IsingModel::new(c, vec![h; nn])?;
    Ok(BlowUp {
        base: model.clone(),
        m,
        blown,
    })
}

fn check_ferromagnetic(model: &IsingModel) -> Result<()> {
    for i in 0..model.n() {
        for j in 0..model.n() {
            if model.coupling(i, j) < 0.0 {
                return Err(Error::NotFerromagnetic { i, j });
            }
        }
    }
    Ok(())
}

/// Single-site Glauber dynamics from a uniform random start: `sweeps`·n
/// heat-bath updates, each setting a random spin to +1 with probability
/// σ(2·(2(Jx)_i + h_i)). Stationary law is the Boltzmann distribution.
pub fn glauber_sample(model: &IsingModel, sweeps: usize, seed: u64) -> Vec<i8> {
    let n = model.n();
    let mut r = rng::stream(seed, 0);
    let mut x: Vec<i8> = (0..n)
        .map(|_| if r.gen_bool(0.5) { 1 } else { -1 })
        .collect();
    // Local sums s_i = (Jx)_i, updated incrementally.
    let mut s = vec![0.0f64; n];
    for i in 0..n {
        s[i] = model
            .couplings()
            .row(i)
            .iter()
            .zip(x.iter())
            .map(|(w, &v)| w * v as f64)
            .sum();
    }
    let updates = sweeps.saturating_mul(n).max(1);
    for _ in 0..updates {
        let i = r.gen_range(0..n);
        let p_plus = sigmoid(2.0 * (2.0 * s[i] + model.fields()[i]));
        let new: i8 = if r.gen_bool(p_plus) { 1 } else { -1 };
        if new != x[i] {
            let delta = (new - x[i]) as f64;
            x[i] = new;
            let row = model.couplings().row(i);
            for (sj, w) in s.iter_mut().zip(row.iter()) {
                *sj += delta * w;
            }
        }
    }
    x
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Glauber dynamics on the implicit blow-up, tracking only group net spins.
/// Equivalent to `glauber_sample(&blow_up(..).blown, ..)` in law, but costs
/// O(n) per update instead of O(mn): the local field of copy (i,k) is
/// Σ_j (J_ij/m)·Y_j + h, independent of k.
fn glauber_blowup_net_spins(
    base: &IsingModel,
    m: usize,
    h: f64,
    total_updates: usize,
    mut r: rng::Rng,
) -> Vec<f64> {
    let n = base.n();
    let nn = n * m;
    let mut x: Vec<i8> = (0..nn)
        .map(|_| if r.gen_bool(0.5) { 1 } else { -1 })
        .collect();
    let mut y: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|k| x[i * m + k] as f64).sum())
        .collect();
    for _ in 0..total_updates {
        let v = r.gen_range(0..nn);
        let i = v / m;
        let field: f64 = base
            .couplings()
            .row(i)
            .iter()
            .zip(y.iter())
            .map(|(w, yj)| w * yj)
            .sum::<f64>()
            / m as f64;
        let p_plus = sigmoid(2.0 * (2.0 * field + h));
        let new: i8 = if r.gen_bool(p_plus) { 1 } else { -1 };
        if new != x[v] {
            y[i] += (new - x[v]) as f64;
            x[v] = new;
        }
    }
    y
}

/// Optimize F* for a ferromagnetic model with uniform external field by
/// blow-up sampling plus gradient refinement. Returns the best refined
/// candidate and its objective value (a lower bound on F). The number of
/// samples is ⌈log(3/δ)/log 3⌉ + 2; m = ⌈n log(n+1)/ε⌉ capped so the blown
/// model stays desk scale.
pub fn ferro_optimize(
    model: &IsingModel,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<(ProductDistribution, f64)> {
    ferro_optimize_with_sweeps(model, epsilon, delta, seed, DEFAULT_SWEEPS)
}

pub fn ferro_optimize_with_sweeps(
    model: &IsingModel,
    epsilon: f64,
    delta: f64,
    seed: u64,
    sweeps: usize,
) -> Result<(ProductDistribution, f64)> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    check_ferromagnetic(model)?;
    let h = model.has_uniform_field()?;
    let n = model.n();

    let m_raw = (n as f64 * ((n + 1) as f64).ln() / epsilon).ceil() as usize;
    let m = m_raw.clamp(1, (BLOW_UP_SIZE_CAP / n).max(1));
    let samples = ((3.0 / delta).ln() / 3.0f64.ln()).ceil() as usize + 2;
    let total_updates = sweeps.saturating_mul(n * m).max(1);

    let obj = QuadraticEntropyObjective {
        sym: model.couplings(),
        fields: model.fields(),
    };
    let candidates: Vec<(Vec<f64>, f64)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let r = rng::stream(seed, k as u64 + 1);
            let y = glauber_blowup_net_spins(model, m, h, total_updates, r);
            // Net-spin candidate Y/m lies in [-1,1]^n exactly.
            let start: Vec<f64> = y.iter().map(|v| (v / m as f64).clamp(-1.0, 1.0)).collect();
            let interior: Vec<f64> = start
                .iter()
                .map(|v| v.clamp(-1.0 + INTERIOR_TAU, 1.0 - INTERIOR_TAU))
                .collect();
            let res = projected_ascent(&obj, &interior, 1e-10, 5_000);
            let raw = ProductDistribution::new(start).expect("net spins lie in [-1,1]");
            let raw_value = model.mf_objective(&raw);
            if res.value >= raw_value {
                (res.x, res.value)
            } else {
                (raw.into_means(), raw_value)
            }
        })
        .collect();

    let mut best = 0;
    for (k, c) in candidates.iter().enumerate() {
        if c.1 > candidates[best].1 {
            best = k;
        }
    }
    let (x, value) = candidates.into_iter().nth(best).expect("samples >= 1");
    Ok((ProductDistribution::new(x)?, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::meanfield::multistart_ascent;

    #[test]
    fn blow_up_identity_at_m_one() {
        let base = generate::curie_weiss(4, 1.0, 0.3).unwrap();
        let b = blow_up(&base, 1).unwrap();
        assert_eq!(b.blown, base);
    }

    #[test]
    fn blow_up_two_spin_structure() {
        let base = IsingModel::from_edges(2, &[(0, 1, 0.3)], None).unwrap();
        let b = blow_up(&base, 2).unwrap();
        assert_eq!(b.blown.n(), 4);
        // Cross-copy weight 0.15; zero within each copy group.
        for k in 0..2 {
            for l in 0..2 {
                assert!((b.blown.coupling(k, 2 + l) - 0.15).abs() < 1e-15);
            }
        }
        assert_eq!(b.blown.coupling(0, 1), 0.0);
        assert_eq!(b.blown.coupling(2, 3), 0.0);
    }

    #[test]
    fn blow_up_rejects_bad_models() {
        let anti = IsingModel::from_edges(2, &[(0, 1, -0.1)], None).unwrap();
        assert!(matches!(
            blow_up(&anti, 2),
            Err(Error::NotFerromagnetic { .. })
        ));
        let mixed = IsingModel::from_edges(2, &[(0, 1, 0.1)], Some(vec![0.0, 0.5])).unwrap();
        assert!(matches!(
            blow_up(&mixed, 2),
            Err(Error::NonUniformField { i: 1 })
        ));
    }

    #[test]
    fn blow_up_objective_scales_on_block_constant_vectors() {
        let base = generate::random_gaussian(3, 0.5, 1)
            .map(|m| {
                // Make it ferromagnetic by absolute value.
                let n = m.n();
                let mut c = DenseMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        *c.at_mut(i, j) = m.coupling(i, j).abs();
                    }
                }
                IsingModel::new(c, vec![0.1; n]).unwrap()
            })
            .unwrap();
        let m = 5;
        let b = blow_up(&base, m).unwrap();
        let x = [0.4, -0.2, 0.7];
        let mut big = Vec::new();
        for &v in &x {
            big.extend(std::iter::repeat(v).take(m));
        }
        let small_obj = base.mf_objective(&ProductDistribution::new(x.to_vec()).unwrap());
        let big_obj = b
            .blown
            .mf_objective(&ProductDistribution::new(big).unwrap());
        assert!(
            (big_obj - m as f64 * small_obj).abs() < 1e-9,
            "ratio {} vs m={m}",
            big_obj / small_obj
        );
    }

    #[test]
    fn blow_up_lower_bound_on_variational_energy() {
        let base = generate::curie_weiss(3, 1.8, 0.05).unwrap();
        let (_, v1) = multistart_ascent(&base, 16, 3, 1e-10);
        for m in [2usize, 3] {
            let b = blow_up(&base, m).unwrap();
            let (_, vm) = multistart_ascent(&b.blown, 16, 3, 1e-10);
            assert!(
                vm >= m as f64 * v1 - 1e-6,
                "m={m}: {vm} < {}",
                m as f64 * v1
            );
        }
    }

    #[test]
    fn glauber_free_spins_have_zero_mean() {
        let model = IsingModel::zero(10);
        let samples = 2000;
        let mut total = 0.0;
        for s in 0..samples {
            let x = glauber_sample(&model, 2, s);
            total += x.iter().map(|&v| v as f64).sum::<f64>();
        }
        let mean = total / (samples as f64 * 10.0);
        assert!(mean.abs() < 4.0 / (samples as f64).sqrt(), "mean={mean}");
    }

    #[test]
    fn glauber_field_only_matches_tanh() {
        let n = 8;
        let model = IsingModel::new(DenseMatrix::zeros(n, n), vec![1.0; n]).unwrap();
        let samples: u64 = 1500;
        let mut total = 0.0;
        for s in 0..samples {
            let x = glauber_sample(&model, 10, 1000 + s);
            total += x.iter().map(|&v| v as f64).sum::<f64>();
        }
        let mean = total / (samples as f64 * n as f64);
        let expect = 1.0f64.tanh();
        // Binomial concentration: sd of a single spin is sech ≈ 0.65.
        let tol = 4.0 * 0.65 / ((samples as usize * n) as f64).sqrt();
        assert!(
            (mean - expect).abs() < tol,
            "mean={mean} expect={expect} tol={tol}"
        );
    }

    /// Explicit single-update transition matrix of the Glauber chain.
    fn glauber_transition_matrix(model: &IsingModel) -> Vec<Vec<f64>> {
        let n = model.n();
        let states = 1usize << n;
        let spins = |mask: usize| -> Vec<f64> {
            (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 })
                .collect()
        };
        let mut p = vec![vec![0.0; states]; n.pow(0) * states];
        for mask in 0..states {
            let x = spins(mask);
            for i in 0..n {
                let s: f64 = (0..n).map(|j| model.coupling(i, j) * x[j]).sum();
                let p_plus = sigmoid(2.0 * (2.0 * s + model.fields()[i]));
                let plus_mask = mask & !(1 << i);
                let minus_mask = mask | (1 << i);
                p[mask][plus_mask] += p_plus / n as f64;
                p[mask][minus_mask] += (1.0 - p_plus) / n as f64;
            }
        }
        p
    }

    #[test]
    fn glauber_detailed_balance_small() {
        let model = generate::curie_weiss(3, 1.2, 0.2).unwrap();
        let n = model.n();
        let states = 1usize << n;
        let p = glauber_transition_matrix(&model);
        // Boltzmann weights.
        let mut pi = vec![0.0; states];
        for mask in 0..states {
            let x: Vec<f64> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            pi[mask] = model.energy(&x).unwrap().exp();
        }
        let z: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= z);
        for a in 0..states {
            for b in 0..states {
                let lhs = pi[a] * p[a][b];
                let rhs = pi[b] * p[b][a];
                assert!((lhs - rhs).abs() < 1e-12, "detailed balance fails {a}->{b}");
            }
        }
    }

    #[test]
    fn glauber_long_run_matches_boltzmann() {
        let model = generate::curie_weiss(3, 0.9, 0.1).unwrap();
        let n = 3;
        let states = 1usize << n;
        let mut pi = vec![0.0; states];
        for mask in 0..states {
            let x: Vec<f64> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            pi[mask] = model.energy(&x).unwrap().exp();
        }
        let z: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= z);

        let runs = 100_000usize;
        let mut counts = vec![0u64; states];
        for s in 0..runs {
            let x = glauber_sample(&model, 12, s as u64);
            let mask: usize = (0..n).map(|i| if x[i] == -1 { 1 << i } else { 0 }).sum();
            counts[mask] += 1;
        }
        let tv: f64 = (0..states)
            .map(|m| (counts[m] as f64 / runs as f64 - pi[m]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.02, "total variation {tv}");
    }

    #[test]
    fn implicit_blowup_sampler_matches_dense_in_distribution() {
        // Compare group magnetization statistics between the implicit sampler
        // and plain Glauber on the materialized blow-up.
        let base = IsingModel::from_edges(2, &[(0, 1, 0.4)], Some(vec![0.2, 0.2])).unwrap();
        let m = 3;
        let b = blow_up(&base, m).unwrap();
        let runs = 4000;
        let mut mean_implicit = 0.0;
        let mut mean_dense = 0.0;
        for s in 0..runs {
            let y = glauber_blowup_net_spins(&base, m, 0.2, 20 * 6, rng::stream(s, 1));
            mean_implicit += (y[0] + y[1]) / (2.0 * m as f64);
            let x = glauber_sample(&b.blown, 20, s);
            mean_dense += x.iter().map(|&v| v as f64).sum::<f64>() / (2.0 * m as f64);
        }
        mean_implicit /= runs as f64;
        mean_dense /= runs as f64;
        assert!(
            (mean_implicit - mean_dense).abs() < 0.05,
            "implicit {mean_implicit} vs dense {mean_dense}"
        );
    }

    #[test]
    fn ferro_optimize_free_model() {
        let model = IsingModel::zero(6);
        let (_, v) = ferro_optimize(&model, 0.5, 0.1, 0).unwrap();
        assert!((v - 6.0 * std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn ferro_optimize_two_disconnected_edges() {
        let model = IsingModel::from_edges(4, &[(0, 1, 0.8), (2, 3, 0.8)], None).unwrap();
        let one = IsingModel::from_edges(2, &[(0, 1, 0.8)], None).unwrap();
        let (_, v_pair) = multistart_ascent(&one, 16, 1, 1e-10);
        let (_, v) = ferro_optimize(&model, 0.3, 0.05, 2).unwrap();
        assert!(
            (v - 2.0 * v_pair).abs() < 1e-6,
            "v={v} expected {}",
            2.0 * v_pair
        );
    }

    #[test]
    fn ferro_optimize_tracks_multistart_on_curie_weiss() {
        let model = generate::curie_weiss(8, 2.0, 0.1).unwrap();
        let (_, reference) = multistart_ascent(&model, 16, 0, 1e-10);
        let mut ok = 0;
        for seed in 0..10 {
            let (x, v) = ferro_optimize(&model, 0.3, 0.1, seed).unwrap();
            assert!(x.means().iter().all(|a| a.abs() <= 1.0));
            if v >= reference - 0.1 {
                ok += 1;
            }
        }
        assert!(
            ok >= 9,
            "only {ok}/10 seeds within 0.1 of the multistart value"
        );
    }
}
