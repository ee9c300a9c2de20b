//! Brute-force oracles: exact free energy and exact KL to the Boltzmann
//! distribution by enumeration of {±1}^n.
//!
//! Enumeration walks the binary-reflected Gray code so each step flips one
//! spin and updates the energy incrementally. The state space is split into
//! fixed-size blocks; per-block log-sum-exp partial results are combined in a
//! fixed pairwise tree, so the result is bit-identical whether or not the
//! blocks are processed in parallel.

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{IsingModel, Model, Mrf, ProductDistribution};

/// Default cap on n for exact enumeration (~3·10^7 states, seconds on one core).
pub const DEFAULT_EXACT_CAP: usize = 25;

const BLOCK_BITS: u32 = 16;

/// Running-max log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
struct LogSum {
    max: f64,
    sum: f64, // Σ exp(e - max)
}

impl LogSum {
    fn empty() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    fn push(&mut self, e: f64) {
        if e <= self.max {
            self.sum += (e - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - e).exp() + 1.0;
            self.max = e;
        }
    }

    fn merge(self, other: LogSum) -> LogSum {
        if other.max <= self.max {
            LogSum {
                max: self.max,
                sum: self.sum + other.sum * (other.max - self.max).exp(),
            }
        } else {
            LogSum {
                max: other.max,
                sum: other.sum + self.sum * (self.max - other.max).exp(),
            }
        }
    }

    fn value(self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Combine per-block partials pairwise, level by level. The reduction order is
/// fixed by the block index, independent of scheduling.
fn tree_reduce(mut parts: Vec<LogSum>) -> LogSum {
    if parts.is_empty() {
        return LogSum::empty();
    }
    while parts.len() > 1 {
        parts = parts
            .chunks(2)
            .map(|c| if c.len() == 2 { c[0].merge(c[1]) } else { c[0] })
            .collect();
    }
    parts[0]
}

/// Spins for Gray code g(k): bit i set means x_i = -1.
#[inline]
fn spins_at(index: u64, n: usize) -> Vec<f64> {
    let g = index ^ (index >> 1);
    (0..n)
        .map(|i| if (g >> i) & 1 == 1 { -1.0 } else { 1.0 })
        .collect()
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap || n >= 63 {
        return Err(Error::TooLargeForExact { n, cap });
    }
    Ok(())
}

/// Walk one block of the Gray code, feeding each state's energy to `acc`.
/// `delta(i, x) -> f64` returns the energy change of flipping spin i from the
/// current configuration x and must update its own incremental state.
fn enumerate_block<F>(
    n: usize,
    start: u64,
    len: u64,
    energy0: f64,
    mut x: Vec<f64>,
    mut flip: F,
) -> LogSum
where
    F: FnMut(usize, &mut [f64]) -> f64,
{
    let mut acc = LogSum::empty();
    let mut e = energy0;
    acc.push(e);
    for k in 1..len {
        let idx = start + k;
        let bit = idx.trailing_zeros() as usize;
        debug_assert!(bit < n);
        e += flip(bit, &mut x);
        acc.push(e);
    }
    acc
}

/// log Σ_{x∈{±1}^n} exp(x^T J x + h·x) with the default cap.
pub fn exact_free_energy(model: &IsingModel) -> Result<f64> {
    exact_free_energy_capped(model, DEFAULT_EXACT_CAP)
}

pub fn exact_free_energy_capped(model: &IsingModel, cap: usize) -> Result<f64> {
    let n = model.n();
    check_cap(n, cap)?;
    let total = 1u64 << n;
    let block = total.min(1 << BLOCK_BITS);
    let nblocks = total / block;

    let parts: Vec<LogSum> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let start = b * block;
            let x = spins_at(start, n);
            // Local fields s = Jx, refreshed at each block start.
            let mut s = vec![0.0; n];
            model.couplings().matvec(&x, &mut s);
            let e0 = model.energy(&x).expect("dimensions fixed");
            let h = model.fields().to_vec();
            let couplings = model.couplings();
            enumerate_block(n, start, block, e0, x, move |i, x| {
                let xi = x[i];
                let de = -4.0 * xi * s[i] - 2.0 * h[i] * xi;
                x[i] = -xi;
                let row = couplings.row(i);
                for (sj, w) in s.iter_mut().zip(row.iter()) {
                    *sj += 2.0 * x[i] * w;
                }
                de
            })
        })
        .collect();

    Ok(tree_reduce(parts).value())
}

/// Exact free energy of an arbitrary square interaction matrix W (not
/// necessarily symmetric or zero-diagonal): log Σ_x exp(x^T W x).
///
/// Over ±1 spins the diagonal contributes the constant trace(W), and
/// x^T W x = x^T S x for the symmetrized S, so this reduces to the Ising case.
pub fn exact_free_energy_matrix(w: &DenseMatrix, cap: usize) -> Result<f64> {
    let n = w.rows();
    if w.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.cols(),
        });
    }
    let mut sym = DenseMatrix::zeros(n, n);
    let mut trace = 0.0;
    for i in 0..n {
        trace += w.at(i, i);
        for j in 0..n {
            if i != j {
                *sym.at_mut(i, j) = 0.5 * (w.at(i, j) + w.at(j, i));
            }
        }
    }
    let model = IsingModel::new(sym, vec![0.0; n])?;
    Ok(trace + exact_free_energy_capped(&model, cap)?)
}

/// log Σ_x exp(J(x)) for an MRF, by the same Gray-code walk. Flipping spin i
/// negates exactly the terms containing i.
pub fn exact_free_energy_mrf(mrf: &Mrf) -> Result<f64> {
    exact_free_energy_mrf_capped(mrf, DEFAULT_EXACT_CAP)
}

pub fn exact_free_energy_mrf_capped(mrf: &Mrf, cap: usize) -> Result<f64> {
    let n = mrf.n();
    check_cap(n, cap)?;
    let total = 1u64 << n;
    let block = total.min(1 << BLOCK_BITS);
    let nblocks = total / block;

    let keys: Vec<&Vec<usize>> = mrf.terms().keys().collect();
    let coeffs: Vec<f64> = mrf.terms().values().copied().collect();
    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, key) in keys.iter().enumerate() {
        for &i in key.iter() {
            by_vertex[i].push(t);
        }
    }

    let parts: Vec<LogSum> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let start = b * block;
            let x = spins_at(start, n);
            // Current value of each monomial J_α x^α.
            let mut prods: Vec<f64> = keys
                .iter()
                .zip(coeffs.iter())
                .map(|(key, &c)| key.iter().fold(c, |p, &i| p * x[i]))
                .collect();
            let e0: f64 = prods.iter().sum();
            let by_vertex = &by_vertex;
            enumerate_block(n, start, block, e0, x, move |i, x| {
                x[i] = -x[i];
                let mut de = 0.0;
                for &t in &by_vertex[i] {
                    de -= 2.0 * prods[t];
                    prods[t] = -prods[t];
                }
                de
            })
        })
        .collect();

    Ok(tree_reduce(parts).value())
}

/// Exact free energy for either model kind.
pub fn exact_free_energy_model(model: &Model, cap: usize) -> Result<f64> {
    match model {
        Model::Ising(m) => exact_free_energy_capped(m, cap),
        Model::Mrf(m) => exact_free_energy_mrf_capped(m, cap),
    }
}

/// KL(μ ‖ P) for the product measure μ with the given means:
/// F − [Σ J_ij x_i x_j + h·x + H(μ)]. Nonnegative by the Gibbs principle.
pub fn exact_kl_to_boltzmann(model: &IsingModel, dist: &ProductDistribution) -> Result<f64> {
    exact_kl_to_boltzmann_capped(model, dist, DEFAULT_EXACT_CAP)
}

pub fn exact_kl_to_boltzmann_capped(
    model: &IsingModel,
    dist: &ProductDistribution,
    cap: usize,
) -> Result<f64> {
    if dist.n() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            got: dist.n(),
        });
    }
    Ok(exact_free_energy_capped(model, cap)? - model.mf_objective(dist))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_free_spin() {
        let m = IsingModel::zero(1);
        assert!((exact_free_energy(&m).unwrap() - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_spin_closed_form() {
        let m = IsingModel::from_edges(2, &[(0, 1, 0.5)], None).unwrap();
        // States ++ and -- have energy 1, +- and -+ energy -1.
        let expect = (2.0 * 1.0f64.exp() + 2.0 * (-1.0f64).exp()).ln();
        assert!((exact_free_energy(&m).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 1.8201).abs() < 1e-4);
    }

    #[test]
    fn cap_is_enforced() {
        let m = IsingModel::zero(26);
        assert!(matches!(
            exact_free_energy(&m).unwrap_err(),
            Error::TooLargeForExact { n: 26, cap: 25 }
        ));
    }

    /// Independent oracle: direct loop over all states with per-state energy
    /// recomputed from scratch (no Gray code, no incremental updates).
    fn enumerate_naive(model: &IsingModel) -> f64 {
        let n = model.n();
        let mut energies = Vec::with_capacity(1 << n);
        for mask in 0u64..(1 << n) {
            let x: Vec<f64> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            energies.push(model.energy(&x).unwrap());
        }
        let m = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + energies.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
    }

    fn random_model(n: usize, seed: u64, sigma: f64) -> IsingModel {
        use rand::Rng as _;
        let mut rng = crate::rng::seeded(seed);
        let mut c = crate::dense::DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let w: f64 = rng.gen_range(-sigma..sigma);
                *c.at_mut(i, j) = w;
                *c.at_mut(j, i) = w;
            }
        }
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        IsingModel::new(c, h).unwrap()
    }

    #[test]
    fn gray_code_matches_naive_enumeration() {
        let m = random_model(10, 42, 1.0);
        let fast = exact_free_energy(&m).unwrap();
        let slow = enumerate_naive(&m);
        assert!((fast - slow).abs() < 1e-10, "fast={fast} slow={slow}");
    }

    #[test]
    fn decoupled_model_has_closed_form() {
        // J = 0: F = Σ_i log(2 cosh h_i).
        use rand::Rng as _;
        let mut rng = crate::rng::seeded(5);
        let n = 18;
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let m = IsingModel::new(crate::dense::DenseMatrix::zeros(n, n), h.clone()).unwrap();
        let expect: f64 = h.iter().map(|hi| (2.0 * hi.cosh()).ln()).sum();
        assert!((exact_free_energy(&m).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn matrix_variant_handles_diagonal_and_asymmetry() {
        use rand::Rng as _;
        let mut rng = crate::rng::seeded(9);
        let n = 6;
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let w = DenseMatrix::from_vec(n, n, data).unwrap();

        let mut energies = Vec::new();
        for mask in 0u64..(1 << n) {
            let x: Vec<f64> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            energies.push(w.quadratic_form(&x));
        }
        let mx = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let expect = mx + energies.iter().map(|e| (e - mx).exp()).sum::<f64>().ln();

        assert!((exact_free_energy_matrix(&w, 25).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn mrf_enumeration_matches_naive() {
        use rand::Rng as _;
        let mut rng = crate::rng::seeded(77);
        let n = 9;
        let mut terms = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    if rng.gen_bool(0.3) {
                        terms.push((vec![i, j, k], rng.gen_range(-0.5..0.5f64)));
                    }
                }
            }
        }
        terms.push((vec![0], 0.4));
        let mrf = Mrf::new(n, 3, terms).unwrap();

        let mut energies = Vec::new();
        for mask in 0u64..(1 << n) {
            let x: Vec<f64> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            energies.push(mrf.energy(&x).unwrap());
        }
        let mx = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let expect = mx + energies.iter().map(|e| (e - mx).exp()).sum::<f64>().ln();

        assert!((exact_free_energy_mrf(&mrf).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn kl_is_zero_when_product_equals_boltzmann() {
        // J = 0, x_i = tanh(h_i): the product measure is the Boltzmann measure.
        let n = 6;
        let h: Vec<f64> = (0..n).map(|i| 0.3 * (i as f64) - 0.8).collect();
        let m = IsingModel::new(crate::dense::DenseMatrix::zeros(n, n), h.clone()).unwrap();
        let d = ProductDistribution::new(h.iter().map(|v| v.tanh()).collect()).unwrap();
        let kl = exact_kl_to_boltzmann(&m, &d).unwrap();
        assert!(kl.abs() < 1e-9, "kl={kl}");

        // Pinning one spin of a free model loses exactly log 2.
        let m0 = IsingModel::zero(4);
        let mut means = vec![0.0; 4];
        means[0] = 1.0;
        let d0 = ProductDistribution::new(means).unwrap();
        let kl0 = exact_kl_to_boltzmann(&m0, &d0).unwrap();
        assert!((kl0 - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_matches_state_space_oracle() {
        // Direct Σ_x μ(x) log(μ(x)/P(x)) over all states.
        use rand::Rng as _;
        let m = random_model(8, 13, 0.7);
        let n = m.n();
        let mut rng = crate::rng::seeded(14);
        let means: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.95..0.95)).collect();
        let d = ProductDistribution::new(means.clone()).unwrap();

        let logz = exact_free_energy(&m).unwrap();
        let mut kl = 0.0;
        for mask in 0u64..(1 << n) {
            let x: Vec<f64> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            let mu: f64 = (0..n).map(|i| 0.5 * (1.0 + x[i] * means[i])).product();
            if mu > 0.0 {
                let logp = m.energy(&x).unwrap() - logz;
                kl += mu * (mu.ln() - logp);
            }
        }
        let got = exact_kl_to_boltzmann(&m, &d).unwrap();
        assert!((got - kl).abs() < 1e-8, "got={got} oracle={kl}");
        assert!(got >= -1e-9);
    }

    #[test]
    fn parallel_reduction_is_deterministic() {
        let m = random_model(18, 21, 0.4);
        let a = exact_free_energy(&m).unwrap();
        let b = exact_free_energy(&m).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
