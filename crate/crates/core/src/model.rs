//! Model representations: Ising models, binary Markov random fields, product
//! distributions, and the report type shared by the estimators.
//!
//! An Ising model is the distribution on {±1}^n proportional to
//! exp(x^T J x + h·x), with J real symmetric and zero on the diagonal. All
//! sums over pairs follow the double-sum convention Σ_{i,j}, i.e. each
//! unordered pair is counted twice; norms use the same full-matrix convention.
//!
//! An order-r MRF replaces the quadratic form by a multilinear polynomial
//! J(x) = Σ_α J_α x^α with subsets α of size 1..=r, stored sparsely.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Interior clamp for gradient consumers: artanh and 1/(1-x^2) diverge at ±1.
pub const INTERIOR_TAU: f64 = 1e-12;

/// Binary entropy in nats, H(p) = -p ln p - (1-p) ln(1-p), with H(0)=H(1)=0.
#[inline]
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

/// Entropy of a ±1 spin with mean x: H((1+x)/2).
#[inline]
pub fn entropy_of_mean(x: f64) -> f64 {
    binary_entropy(0.5 * (1.0 + x))
}

/// Ising model: symmetric coupling matrix with zero diagonal plus an external
/// field. Immutable after construction; construction validates all invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n: usize,
    couplings: DenseMatrix,
    fields: Vec<f64>,
}

impl IsingModel {
    /// Build from a dense n×n coupling matrix (row-major) and a length-n field.
    pub fn new(couplings: DenseMatrix, fields: Vec<f64>) -> Result<Self> {
        let n = fields.len();
        if couplings.rows() != n || couplings.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: couplings.rows(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidParams("model must have n >= 1".into()));
        }
        let model = IsingModel {
            n,
            couplings,
            fields,
        };
        model.validate()?;
        Ok(model)
    }

    /// Build from an edge list with 0-based endpoints i < j. Fields default to 0.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
        fields: Option<Vec<f64>>,
    ) -> Result<Self> {
        let mut couplings = DenseMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParams(format!(
                    "edge ({i},{j}) out of range for n={n}"
                )));
            }
            if i == j {
                return Err(Error::NonzeroDiagonal { i });
            }
            *couplings.at_mut(i, j) += w;
            *couplings.at_mut(j, i) += w;
        }
        let fields = fields.unwrap_or_else(|| vec![0.0; n]);
        IsingModel::new(couplings, fields)
    }

    pub fn zero(n: usize) -> Self {
        IsingModel {
            n,
            couplings: DenseMatrix::zeros(n, n),
            fields: vec![0.0; n],
        }
    }

    /// Re-check all type invariants: symmetry, zero diagonal, finiteness.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            if self.couplings.at(i, i) != 0.0 {
                return Err(Error::NonzeroDiagonal { i });
            }
            if !self.fields[i].is_finite() {
                return Err(Error::NonFiniteEntry {
                    at: format!("fields[{i}]"),
                });
            }
            for j in 0..self.n {
                let w = self.couplings.at(i, j);
                if !w.is_finite() {
                    return Err(Error::NonFiniteEntry {
                        at: format!("couplings[{i}][{j}]"),
                    });
                }
                if j > i && w != self.couplings.at(j, i) {
                    return Err(Error::AsymmetricCoupling { i, j });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings.at(i, j)
    }

    pub fn couplings(&self) -> &DenseMatrix {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn has_uniform_field(&self) -> Result<f64> {
        let h = self.fields[0];
        for (i, &hi) in self.fields.iter().enumerate() {
            if hi != h {
                return Err(Error::NonUniformField { i });
            }
        }
        Ok(h)
    }

    /// ‖J‖_F = sqrt(Σ_{i,j} J_ij²), full double-sum convention.
    pub fn frobenius_norm(&self) -> f64 {
        self.couplings.frobenius_norm()
    }

    /// Σ_j |J_ij| for row i.
    pub fn row_abs_sum(&self, i: usize) -> f64 {
        self.couplings.row(i).iter().map(|v| v.abs()).sum()
    }

    /// Energy Σ_{i,j} J_ij x_i x_j + Σ_i h_i x_i with both (i,j) and (j,i) counted.
    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut e = self.couplings.quadratic_form(x);
        for (h, xi) in self.fields.iter().zip(x.iter()) {
            e += h * xi;
        }
        Ok(e)
    }

    /// Mean-field objective F*(x) = energy(x) + Σ_i H((1+x_i)/2).
    pub fn mf_objective(&self, dist: &ProductDistribution) -> f64 {
        let x = dist.means();
        let entropy: f64 = x.iter().map(|&v| entropy_of_mean(v)).sum();
        // dist is length-checked at construction against nothing; check here.
        self.energy(x).expect("distribution dimension mismatch") + entropy
    }
}

/// Sparse degree-r multilinear polynomial J(x) = Σ_α J_α x^α over {±1}^n.
/// Keys are strictly increasing vertex subsets with 1 <= |α| <= r.
#[derive(Debug, Clone, PartialEq)]
pub struct Mrf {
    n: usize,
    order: usize,
    terms: BTreeMap<Vec<usize>, f64>,
}

impl Mrf {
    pub fn new(
        n: usize,
        order: usize,
        terms: impl IntoIterator<Item = (Vec<usize>, f64)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("mrf must have n >= 1".into()));
        }
        if order == 0 {
            return Err(Error::InvalidParams("mrf order must be >= 1".into()));
        }
        let mut map = BTreeMap::new();
        for (key, coeff) in terms {
            validate_subset_key(&key, n, order)?;
            if !coeff.is_finite() {
                return Err(Error::NonFiniteEntry {
                    at: format!("terms[{key:?}]"),
                });
            }
            *map.entry(key).or_insert(0.0) += coeff;
        }
        Ok(Mrf {
            n,
            order,
            terms: map,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (key, coeff) in &self.terms {
            validate_subset_key(key, self.n, self.order)?;
            if !coeff.is_finite() {
                return Err(Error::NonFiniteEntry {
                    at: format!("terms[{key:?}]"),
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.terms
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|k| k.len()).max().unwrap_or(0)
    }

    /// ‖J‖_F = sqrt(Σ_α J_α²) (total Fourier energy).
    pub fn frobenius_norm(&self) -> f64 {
        self.terms.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// ‖J_{=d}‖_F for the degree-d homogeneous part.
    pub fn degree_frobenius_norm(&self, d: usize) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| k.len() == d)
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Terms of the degree-d slice, in key order.
    pub fn degree_slice(&self, d: usize) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.terms
            .iter()
            .filter(move |(k, _)| k.len() == d)
            .map(|(k, &v)| (k, v))
    }

    /// J(x) = Σ_α J_α Π_{i∈α} x_i.
    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut e = 0.0;
        for (key, coeff) in &self.terms {
            let mut p = *coeff;
            for &i in key {
                p *= x[i];
            }
            e += p;
        }
        Ok(e)
    }

    pub fn mf_objective(&self, dist: &ProductDistribution) -> f64 {
        let x = dist.means();
        let entropy: f64 = x.iter().map(|&v| entropy_of_mean(v)).sum();
        self.energy(x).expect("distribution dimension mismatch") + entropy
    }
}

fn validate_subset_key(key: &[usize], n: usize, order: usize) -> Result<()> {
    if key.is_empty() {
        return Err(Error::BadSubsetKey {
            key: key.to_vec(),
            reason: "empty subset".into(),
        });
    }
    if key.len() > order {
        return Err(Error::BadSubsetKey {
            key: key.to_vec(),
            reason: format!("size {} exceeds declared order {order}", key.len()),
        });
    }
    for w in key.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::BadSubsetKey {
                key: key.to_vec(),
                reason: "indices must be strictly increasing".into(),
            });
        }
    }
    if *key.last().unwrap() >= n {
        return Err(Error::BadSubsetKey {
            key: key.to_vec(),
            reason: format!("vertex out of range for n={n}"),
        });
    }
    Ok(())
}

/// Either model kind, as loaded from a model file.
#[derive(Debug, Clone)]
pub enum Model {
    Ising(IsingModel),
    Mrf(Mrf),
}

impl Model {
    pub fn n(&self) -> usize {
        match self {
            Model::Ising(m) => m.n(),
            Model::Mrf(m) => m.n(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Ising(m) => m.validate(),
            Model::Mrf(m) => m.validate(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            Model::Ising(m) => m.frobenius_norm(),
            Model::Mrf(m) => m.frobenius_norm(),
        }
    }

    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Ising(m) => m.energy(x),
            Model::Mrf(m) => m.energy(x),
        }
    }

    pub fn mf_objective(&self, dist: &ProductDistribution) -> f64 {
        match self {
            Model::Ising(m) => m.mf_objective(dist),
            Model::Mrf(m) => m.mf_objective(dist),
        }
    }
}

/// Product measure on {±1}^n with `E[X_i] = means[i]`, each mean in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductDistribution {
    means: Vec<f64>,
}

impl ProductDistribution {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        for (i, &m) in means.iter().enumerate() {
            if !m.is_finite() || !(-1.0..=1.0).contains(&m) {
                return Err(Error::InvalidParams(format!(
                    "mean {m} at index {i} outside [-1,1]"
                )));
            }
        }
        Ok(ProductDistribution { means })
    }

    pub fn zero(n: usize) -> Self {
        ProductDistribution {
            means: vec![0.0; n],
        }
    }

    pub fn constant(n: usize, v: f64) -> Result<Self> {
        ProductDistribution::new(vec![v; n])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn into_means(self) -> Vec<f64> {
        self.means
    }

    /// Entropy of the product measure, Σ_i H((1+x_i)/2).
    pub fn entropy(&self) -> f64 {
        self.means.iter().map(|&v| entropy_of_mean(v)).sum()
    }
}

/// Named nonnegative components of a guaranteed error budget, in nats.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Transfer between the model and its cut decomposition (Lipschitz in the
    /// ∞→1 norm), counted for both the free energy and the variational side.
    pub cut_transfer: f64,
    /// Grouping of configurations into magnetization shells.
    pub grouping: f64,
    /// Replacing the sum over shells by the largest one.
    pub grid_count: f64,
    /// Convex-program solver tolerance, tol·n.
    pub solver: f64,
}

impl ErrorBudget {
    pub fn total(&self) -> f64 {
        self.cut_transfer + self.grouping + self.grid_count + self.solver
    }
}

/// Result of a free-energy estimator: the estimate, optimizer marginals when
/// the method produces them, the error budget, and provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeEnergyReport {
    pub estimate: f64,
    pub marginals: Option<ProductDistribution>,
    pub budget: ErrorBudget,
    pub degraded: bool,
    pub seed: u64,
    pub wall_time_s: f64,
}
