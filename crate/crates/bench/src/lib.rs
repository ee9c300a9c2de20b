//! Shared instance builders for the benchmarks.

use isingmf::dense::DenseMatrix;
use isingmf::{generate, IsingModel};

/// Two planted ±1 blocks plus small noise; the cut decomposition of this
/// family is nonempty at moderate ε, so decomposition benches do real work.
pub fn planted_blocks(n: usize, seed: u64) -> IsingModel {
    use rand::Rng as _;
    let mut r = isingmf::rng::stream(seed, 9);
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let sign = if (i < n / 2) == (j < n / 2) {
                1.0
            } else {
                -1.0
            };
            let w = sign + r.gen_range(-0.05..0.05);
            *c.at_mut(i, j) = w;
            *c.at_mut(j, i) = w;
        }
    }
    IsingModel::new(c, vec![0.0; n]).unwrap()
}

pub fn gaussian(n: usize, seed: u64) -> IsingModel {
    generate::random_gaussian(n, 1.0, seed).unwrap()
}
