//! Model generators: Curie-Weiss, uniform (hyper)graphs with scaled edge
//! weights, block copies, and Gaussian couplings. All stochastic generators
//! take an explicit seed and sample edges without replacement.

use rand::Rng as _;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{IsingModel, Mrf};
use crate::rng;

/// Curie-Weiss model: J_ij = β/(2n) off the diagonal, uniform field h.
pub fn curie_weiss(n: usize, beta: f64, h: f64) -> Result<IsingModel> {
    if n == 0 {
        return Err(Error::InvalidParams("curie_weiss requires n >= 1".into()));
    }
    let w = beta / (2.0 * n as f64);
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                *c.at_mut(i, j) = w;
            }
        }
    }
    IsingModel::new(c, vec![h; n])
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Sample `m` distinct values from 0..count (Floyd's algorithm).
fn sample_distinct(count: u128, m: usize, rng: &mut rng::Rng) -> Vec<u128> {
    let mut chosen = std::collections::BTreeSet::new();
    let m128 = m as u128;
    for j in (count - m128)..count {
        let t = gen_range_u128(rng, j + 1);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

fn gen_range_u128(rng: &mut rng::Rng, bound: u128) -> u128 {
    // Rejection sampling over two u64 draws.
    if bound <= u64::MAX as u128 {
        return rng.gen_range(0..bound as u64) as u128;
    }
    loop {
        let hi = rng.gen::<u64>() as u128;
        let lo = rng.gen::<u64>() as u128;
        let v = (hi << 64) | lo;
        // Accept with negligible bias for desk-scale bounds.
        if v < (u128::MAX / bound) * bound {
            return v % bound;
        }
    }
}

/// Unrank a k-subset of {0..n-1} in colexicographic order.
fn unrank_subset(mut rank: u128, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut remaining = k;
    // Largest element first: find the biggest v with C(v, remaining) <= rank.
    let mut v = n;
    while remaining > 0 {
        v -= 1;
        let c = binomial(v as u128, remaining as u128);
        if c <= rank {
            rank -= c;
            out.push(v);
            remaining -= 1;
        }
    }
    out.reverse();
    out
}

/// Uniform-weight graph: m edges sampled without replacement among C(n,2)
/// pairs, each with weight β·n/m.
pub fn uniform_graph(n: usize, m: usize, beta: f64, seed: u64) -> Result<IsingModel> {
    let pairs = binomial(n as u128, 2);
    if m == 0 || (m as u128) > pairs {
        return Err(Error::InvalidParams(format!(
            "m={m} must be in 1..={pairs} for n={n}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let w = beta * n as f64 / m as f64;
    let edges: Vec<(usize, usize, f64)> = sample_distinct(pairs, m, &mut rng)
        .into_iter()
        .map(|r| {
            let s = unrank_subset(r, n, 2);
            (s[0], s[1], w)
        })
        .collect();
    IsingModel::from_edges(n, &edges, None)
}

/// Uniform-weight r-uniform hypergraph: J(x) = (β n/m) Σ_{S∈E} x_S.
pub fn uniform_hypergraph(n: usize, m: usize, r: usize, beta: f64, seed: u64) -> Result<Mrf> {
    if r < 2 || r > n {
        return Err(Error::InvalidParams(format!(
            "hyperedge size r={r} must be in 2..={n}"
        )));
    }
    let count = binomial(n as u128, r as u128);
    if m == 0 || (m as u128) > count {
        return Err(Error::InvalidParams(format!(
            "m={m} must be in 1..={count} for n={n}, r={r}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let w = beta * n as f64 / m as f64;
    let terms: Vec<(Vec<usize>, f64)> = sample_distinct(count, m, &mut rng)
        .into_iter()
        .map(|rank| (unrank_subset(rank, n, r), w))
        .collect();
    Mrf::new(n, r, terms)
}

/// m vertex-disjoint copies of the base model on m·n vertices. Copy k of the
/// base occupies vertices k·n..(k+1)·n.
pub fn block_copies(base: &IsingModel, m: usize) -> Result<IsingModel> {
    if m == 0 {
        return Err(Error::InvalidParams("block_copies requires m >= 1".into()));
    }
    let n = base.n();
    let nn = n * m;
    let mut c = DenseMatrix::zeros(nn, nn);
    let mut h = vec![0.0; nn];
    for k in 0..m {
        let off = k * n;
        for i in 0..n {
            h[off + i] = base.fields()[i];
            for j in 0..n {
                *c.at_mut(off + i, off + j) = base.coupling(i, j);
            }
        }
    }
    IsingModel::new(c, h)
}

/// m vertex-disjoint copies of an MRF.
pub fn block_copies_mrf(base: &Mrf, m: usize) -> Result<Mrf> {
    if m == 0 {
        return Err(Error::InvalidParams("block_copies requires m >= 1".into()));
    }
    let n = base.n();
    let mut terms = Vec::new();
    for k in 0..m {
        let off = k * n;
        for (key, &coeff) in base.terms() {
            terms.push((key.iter().map(|&i| i + off).collect(), coeff));
        }
    }
    Mrf::new(n * m, base.order(), terms)
}

/// Symmetric Gaussian couplings J_ij = J_ji ~ N(0, σ²) i.i.d. above the
/// diagonal, zero field.
pub fn random_gaussian(n: usize, sigma: f64, seed: u64) -> Result<IsingModel> {
    if n == 0 {
        return Err(Error::InvalidParams(
            "random_gaussian requires n >= 1".into(),
        ));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            // Box-Muller keeps us off rand_distr for one distribution.
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            let w = sigma * g;
            *c.at_mut(i, j) = w;
            *c.at_mut(j, i) = w;
        }
    }
    IsingModel::new(c, vec![0.0; n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curie_weiss_coupling_value() {
        // β = 2, n = 3: J_ij = 2/6 = 1/3 off the diagonal.
        let m = curie_weiss(3, 2.0, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.0 } else { 1.0 / 3.0 };
                assert!((m.coupling(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn block_copies_scales_frobenius_by_sqrt_m() {
        let base = curie_weiss(3, 1.5, 0.2).unwrap();
        for m in 1..=4 {
            let big = block_copies(&base, m).unwrap();
            assert_eq!(big.n(), 3 * m);
            let expect = (m as f64).sqrt() * base.frobenius_norm();
            assert!((big.frobenius_norm() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_graph_when_m_saturates() {
        // m = C(6,2) = 15 forces the complete graph, each weight 6/15.
        let g = uniform_graph(6, 15, 1.0, 1).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 0.0 } else { 6.0 / 15.0 };
                assert!((g.coupling(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn uniform_graph_rejects_oversized_m() {
        assert!(matches!(
            uniform_graph(4, 7, 1.0, 0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn uniform_graph_edge_count_and_determinism() {
        let a = uniform_graph(12, 20, 0.5, 99).unwrap();
        let b = uniform_graph(12, 20, 0.5, 99).unwrap();
        assert_eq!(a, b);
        let edges: usize = (0..12)
            .map(|i| {
                (0..12)
                    .filter(|&j| j > i && a.coupling(i, j) != 0.0)
                    .count()
            })
            .sum();
        assert_eq!(edges, 20);
    }

    #[test]
    fn hypergraph_term_count_and_weight() {
        let g = uniform_hypergraph(8, 10, 3, 2.0, 5).unwrap();
        assert_eq!(g.terms().len(), 10);
        for (key, &w) in g.terms() {
            assert_eq!(key.len(), 3);
            assert!((w - 2.0 * 8.0 / 10.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unrank_enumerates_all_subsets() {
        let total = binomial(6, 3);
        let mut seen = std::collections::BTreeSet::new();
        for r in 0..total {
            let s = unrank_subset(r, 6, 3);
            assert_eq!(s.len(), 3);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s[2] < 6);
            seen.insert(s);
        }
        assert_eq!(seen.len() as u128, total);
    }

    #[test]
    fn gaussian_is_symmetric_and_seeded() {
        let a = random_gaussian(10, 0.5, 3).unwrap();
        let b = random_gaussian(10, 0.5, 3).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
    }
}
