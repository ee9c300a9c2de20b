//! Weak-regularity cut decompositions.
//!
//! A cut matrix CUT(S,T,d) equals d on S×T and 0 elsewhere. A cut
//! decomposition writes J = D(1) + … + D(s) + W with width s, coefficient
//! length sqrt(Σ d_i²), and error ‖W‖_{∞→1}. The decomposition loop greedily
//! finds a box (S,T) with large |Σ_{S×T} W|, subtracts the box mean, and
//! stops once the best box sum falls to ε√(mn)‖J‖_F or the width cap is hit.
//! Subtracting the box mean is an orthogonal projection, so ‖W‖_F never
//! increases and each accepted cut removes at least (box sum)²/(mn) of
//! squared Frobenius mass; the width and coefficient-length guarantees follow
//! without trusting the cut finder.
//!
//! The same loop over k-index boxes decomposes degree-k slices of an MRF.

use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::rng;

/// Largest dimension for the exhaustive 2^n enumerations in this module.
pub const EXACT_NORM_CAP: usize = 22;
/// Largest side for the exhaustive cut finder (2^n subsets scanned).
pub const EXHAUSTIVE_CUT_CAP: usize = 16;
/// Exhaustive box search for degree-d tensors requires n·d within this cap.
pub const EXHAUSTIVE_TENSOR_CAP: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutMatrix {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    #[serde(rename = "d")]
    pub weight: f64,
}

/// k-index generalization: weight d on S_1 × … × S_k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutArray {
    pub index_sets: Vec<Vec<usize>>,
    #[serde(rename = "d")]
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutDecomposition {
    #[serde(skip)]
    pub n_rows: usize,
    #[serde(skip)]
    pub n_cols: usize,
    pub cuts: Vec<CutMatrix>,
    #[serde(rename = "epsilon")]
    pub epsilon_used: f64,
    #[serde(skip)]
    pub residual_frobenius: f64,
}

impl CutDecomposition {
    pub fn width(&self) -> usize {
        self.cuts.len()
    }

    pub fn coefficient_length(&self) -> f64 {
        self.cuts
            .iter()
            .map(|c| c.weight * c.weight)
            .sum::<f64>()
            .sqrt()
    }

    /// Σ_i d_i · r_i(x) · c_i(x) with r_i(x) = Σ_{a∈R_i} x_a.
    pub fn cut_energy(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_cols || x.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut e = 0.0;
        for cut in &self.cuts {
            let r: f64 = cut.rows.iter().map(|&i| x[i]).sum();
            let c: f64 = cut.cols.iter().map(|&j| x[j]).sum();
            e += cut.weight * r * c;
        }
        Ok(e)
    }

    /// Dense D(1) + … + D(s).
    pub fn materialize(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for cut in &self.cuts {
            for &i in &cut.rows {
                for &j in &cut.cols {
                    *m.at_mut(i, j) += cut.weight;
                }
            }
        }
        m
    }

    /// JSON form {"cuts":[{"rows":…,"cols":…,"d":…}…],"epsilon":…}.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decomposition serialization cannot fail")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorDecomposition {
    #[serde(skip)]
    pub n: usize,
    #[serde(skip)]
    pub degree: usize,
    pub cuts: Vec<CutArray>,
    #[serde(rename = "epsilon")]
    pub epsilon_used: f64,
    #[serde(skip)]
    pub residual_frobenius: f64,
}

impl TensorDecomposition {
    pub fn width(&self) -> usize {
        self.cuts.len()
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.cuts.iter().map(|c| c.weight.abs()).sum()
    }

    /// Σ_i d_i Π_k (Σ_{a ∈ S_k} x_a).
    pub fn cut_energy(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut e = 0.0;
        for cut in &self.cuts {
            let mut p = cut.weight;
            for set in &cut.index_sets {
                p *= set.iter().map(|&a| x[a]).sum::<f64>();
            }
            e += p;
        }
        Ok(e)
    }
}

/// Common refinement of a family of vertex subsets: vertices are equivalent
/// when they lie in exactly the same subsets. Atom order follows the first
/// occurrence while scanning vertices 0..n.
#[derive(Debug, Clone)]
pub struct AtomPartition {
    pub n: usize,
    /// Disjoint vertex sets covering 0..n.
    pub atoms: Vec<Vec<usize>>,
    /// For each input side, the atom indices whose union reconstructs it.
    pub membership: Vec<Vec<usize>>,
    /// Normalized sizes v_a = |V_a| / n.
    pub sizes: Vec<f64>,
}

/// Refinement by the rows R_1..R_s and columns C_1..C_s of a square
/// decomposition; membership lists rows first, then columns.
pub fn refine_atoms(decomp: &CutDecomposition) -> AtomPartition {
    let sides: Vec<&[usize]> = decomp
        .cuts
        .iter()
        .map(|c| c.rows.as_slice())
        .chain(decomp.cuts.iter().map(|c| c.cols.as_slice()))
        .collect();
    refine_atoms_from_sides(decomp.n_rows, &sides)
}

pub fn refine_atoms_from_sides(n: usize, sides: &[&[usize]]) -> AtomPartition {
    let mut signature = vec![0u64; n];
    assert!(sides.len() <= 64, "atom refinement supports up to 64 sides");
    for (t, side) in sides.iter().enumerate() {
        for &i in side.iter() {
            signature[i] |= 1 << t;
        }
    }
    let mut atom_of_sig: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    let mut atoms: Vec<Vec<usize>> = Vec::new();
    let mut sigs: Vec<u64> = Vec::new();
    for i in 0..n {
        let a = *atom_of_sig.entry(signature[i]).or_insert_with(|| {
            atoms.push(Vec::new());
            sigs.push(signature[i]);
            atoms.len() - 1
        });
        atoms[a].push(i);
    }
    let membership = (0..sides.len())
        .map(|t| {
            (0..atoms.len())
                .filter(|&a| sigs[a] & (1 << t) != 0)
                .collect()
        })
        .collect();
    let sizes = atoms.iter().map(|a| a.len() as f64 / n as f64).collect();
    AtomPartition {
        n,
        atoms,
        membership,
        sizes,
    }
}

/// Exact ‖W‖_{∞→1} = max_{x∈{±1}^n} ‖Wx‖_1 by enumeration over sign vectors
/// of the column space (2^cols states, Gray-code updates).
pub fn inf_to_one_norm_exact(w: &DenseMatrix) -> Result<f64> {
    let (m, n) = (w.rows(), w.cols());
    if n > EXACT_NORM_CAP {
        return Err(Error::TooLargeForExact {
            n,
            cap: EXACT_NORM_CAP,
        });
    }
    // y = Wx for the all-ones start.
    let mut y: Vec<f64> = (0..m).map(|i| w.row(i).iter().sum()).collect();
    let mut x = vec![1.0f64; n];
    let mut best: f64 = y.iter().map(|v| v.abs()).sum();
    for k in 1u64..(1 << n) {
        let j = k.trailing_zeros() as usize;
        x[j] = -x[j];
        for i in 0..m {
            y[i] += 2.0 * x[j] * w.at(i, j);
        }
        let v: f64 = y.iter().map(|v| v.abs()).sum();
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// Strategy for the per-iteration box search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutFinder {
    /// Exact argmax of |Σ_{S×T} W| by scanning all subsets of the smaller
    /// side (requires min(m,n) ≤ 16). Ties resolve to the first subset in
    /// Gray-code order.
    Exhaustive,
    /// Alternating maximization from random initial sides, best of 20
    /// restarts.
    GreedyLocalSearch,
    /// Sign-round the top singular vector pair, then refine by local search.
    TopSingularRounding,
}

/// Pick the exhaustive finder when feasible, local search otherwise.
pub fn auto_finder(m: usize, n: usize) -> CutFinder {
    if m.min(n) <= EXHAUSTIVE_CUT_CAP {
        CutFinder::Exhaustive
    } else {
        CutFinder::GreedyLocalSearch
    }
}

struct FoundCut {
    rows: Vec<usize>,
    cols: Vec<usize>,
    value: f64, // Σ_{S×T} W, signed
}

/// Exact maximizer of |Σ_{S×T} W|. Enumerates subsets S of the rows in
/// Gray-code order keeping column sums incrementally; for fixed S the best T
/// is the set of positive (or negative) column sums.
fn exhaustive_cut(w: &DenseMatrix) -> Option<FoundCut> {
    let transposed;
    let (wref, swapped) = if w.rows() <= w.cols() {
        (w, false)
    } else {
        transposed = w.transpose();
        (&transposed, true)
    };
    let (m, n) = (wref.rows(), wref.cols());
    assert!(m <= EXHAUSTIVE_CUT_CAP);

    let mut colsum = vec![0.0f64; n];
    let mut in_s = vec![false; m];
    let mut best_abs = f64::NEG_INFINITY;
    let mut best_mask = 0u64;
    let mut best_positive = true;

    for k in 1u64..(1 << m) {
        let i = k.trailing_zeros() as usize;
        in_s[i] = !in_s[i];
        let sign = if in_s[i] { 1.0 } else { -1.0 };
        let row = wref.row(i);
        for (cs, v) in colsum.iter_mut().zip(row.iter()) {
            *cs += sign * v;
        }
        let mut pos = 0.0;
        let mut neg = 0.0;
        for &cs in &colsum {
            if cs > 0.0 {
                pos += cs;
            } else {
                neg += cs;
            }
        }
        // Ties resolve to the numerically smallest row mask, so an exact box
        // beats the same box padded with zero-sum rows.
        let mask = k ^ (k >> 1);
        if pos > best_abs || (pos == best_abs && mask < best_mask) {
            best_abs = pos;
            best_mask = mask;
            best_positive = true;
        }
        if -neg > best_abs || (-neg == best_abs && mask < best_mask) {
            best_abs = -neg;
            best_mask = mask;
            best_positive = false;
        }
    }

    if !best_abs.is_finite() || best_abs <= 0.0 {
        return None;
    }
    let s: Vec<usize> = (0..m).filter(|&i| (best_mask >> i) & 1 == 1).collect();
    let mut sums = vec![0.0f64; n];
    for &i in &s {
        for (cs, v) in sums.iter_mut().zip(wref.row(i).iter()) {
            *cs += v;
        }
    }
    let t: Vec<usize> = (0..n)
        .filter(|&j| {
            if best_positive {
                sums[j] > 0.0
            } else {
                sums[j] < 0.0
            }
        })
        .collect();
    let value: f64 = t.iter().map(|&j| sums[j]).sum();
    let (rows, cols) = if swapped { (t, s) } else { (s, t) };
    Some(FoundCut { rows, cols, value })
}

/// One signed alternating-maximization pass: given S choose the best T, given
/// T the best S, until the objective stops improving.
fn alternate(w: &DenseMatrix, mut in_s: Vec<bool>, maximize: bool) -> (Vec<bool>, Vec<bool>, f64) {
    let (m, n) = (w.rows(), w.cols());
    let flip = if maximize { 1.0 } else { -1.0 };
    let mut in_t = vec![false; n];
    let mut last = f64::NEG_INFINITY;
    for _ in 0..200 {
        // Best T for S.
        let mut colsum = vec![0.0f64; n];
        for i in 0..m {
            if in_s[i] {
                for (cs, v) in colsum.iter_mut().zip(w.row(i).iter()) {
                    *cs += v;
                }
            }
        }
        for j in 0..n {
            in_t[j] = flip * colsum[j] > 0.0;
        }
        // Best S for T.
        let mut value = 0.0;
        for i in 0..m {
            let rowsum: f64 = w
                .row(i)
                .iter()
                .zip(in_t.iter())
                .filter(|(_, &t)| t)
                .map(|(v, _)| v)
                .sum();
            in_s[i] = flip * rowsum > 0.0;
            if in_s[i] {
                value += rowsum;
            }
        }
        if (value * flip - last).abs() < 1e-15 || !value.is_finite() {
            break;
        }
        last = value * flip;
    }
    let value: f64 = {
        let mut v = 0.0;
        for i in 0..m {
            if in_s[i] {
                for j in 0..n {
                    if in_t[j] {
                        v += w.at(i, j);
                    }
                }
            }
        }
        v
    };
    (in_s, in_t, value)
}

fn local_search_cut(w: &DenseMatrix, rng: &mut rng::Rng, restarts: usize) -> Option<FoundCut> {
    use rand::Rng as _;
    let m = w.rows();
    let mut best: Option<(Vec<bool>, Vec<bool>, f64)> = None;
    for _ in 0..restarts {
        let init: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
        for maximize in [true, false] {
            let (s, t, v) = alternate(w, init.clone(), maximize);
            if best.as_ref().map_or(true, |b| v.abs() > b.2.abs()) {
                best = Some((s, t, v));
            }
        }
    }
    let (s, t, value) = best?;
    let rows: Vec<usize> = (0..m).filter(|&i| s[i]).collect();
    let cols: Vec<usize> = (0..w.cols()).filter(|&j| t[j]).collect();
    if rows.is_empty() || cols.is_empty() || value == 0.0 {
        return None;
    }
    Some(FoundCut { rows, cols, value })
}

fn singular_rounding_cut(w: &DenseMatrix, rng: &mut rng::Rng) -> Option<FoundCut> {
    use rand::Rng as _;
    let (m, n) = (w.rows(), w.cols());
    // Power iteration on W^T W for the top right-singular vector.
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut u = vec![0.0; m];
    for _ in 0..120 {
        w.matvec(&v, &mut u);
        let un: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if un == 0.0 {
            return None;
        }
        u.iter_mut().for_each(|a| *a /= un);
        for j in 0..n {
            v[j] = (0..m).map(|i| w.at(i, j) * u[i]).sum();
        }
        let vn: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if vn == 0.0 {
            return None;
        }
        v.iter_mut().for_each(|a| *a /= vn);
    }
    let mut best: Option<(Vec<bool>, Vec<bool>, f64)> = None;
    for su in [1.0, -1.0] {
        let init: Vec<bool> = (0..m).map(|i| su * u[i] > 0.0).collect();
        for maximize in [true, false] {
            let (s, t, val) = alternate(w, init.clone(), maximize);
            if best.as_ref().map_or(true, |b| val.abs() > b.2.abs()) {
                best = Some((s, t, val));
            }
        }
    }
    let (s, t, value) = best?;
    let rows: Vec<usize> = (0..m).filter(|&i| s[i]).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| t[j]).collect();
    if rows.is_empty() || cols.is_empty() || value == 0.0 {
        return None;
    }
    Some(FoundCut { rows, cols, value })
}

/// Greedy Frieze-Kannan decomposition of an arbitrary real matrix.
///
/// Returned guarantees, independent of the finder: width ≤ ⌈16/ε²⌉,
/// ‖W‖_F nonincreasing, and Σ d_i² ≤ ‖J‖_F²/(ε² mn) (so the coefficient
/// length is within the √27‖J‖_F/√(mn) bound of the algorithmic regularity
/// lemma whenever ε ≥ 1/√27). With the exhaustive finder the stopping rule
/// additionally certifies ‖W‖_{∞→1} ≤ 4ε√(mn)‖J‖_F.
pub fn fk_decompose(
    j: &DenseMatrix,
    epsilon: f64,
    seed: u64,
    finder: CutFinder,
) -> Result<CutDecomposition> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let (m, n) = (j.rows(), j.cols());
    if finder == CutFinder::Exhaustive && m.min(n) > EXHAUSTIVE_CUT_CAP {
        return Err(Error::TooLargeForExact {
            n: m.min(n),
            cap: EXHAUSTIVE_CUT_CAP,
        });
    }
    let jf = j.frobenius_norm();
    let mn = (m * n) as f64;
    let threshold = epsilon * mn.sqrt() * jf;
    let width_cap = (16.0 / (epsilon * epsilon)).ceil() as usize;

    let mut rng = rng::stream(seed, 0);
    let mut w = j.clone();
    let mut cuts = Vec::new();

    while cuts.len() < width_cap {
        let found = match finder {
            CutFinder::Exhaustive => exhaustive_cut(&w),
            CutFinder::GreedyLocalSearch => local_search_cut(&w, &mut rng, 20),
            CutFinder::TopSingularRounding => singular_rounding_cut(&w, &mut rng),
        };
        let Some(cut) = found else { break };
        if cut.value.abs() <= threshold {
            break;
        }
        let d = cut.value / (cut.rows.len() * cut.cols.len()) as f64;
        for &i in &cut.rows {
            for &jcol in &cut.cols {
                *w.at_mut(i, jcol) -= d;
            }
        }
        cuts.push(CutMatrix {
            rows: cut.rows,
            cols: cut.cols,
            weight: d,
        });
    }

    Ok(CutDecomposition {
        n_rows: m,
        n_cols: n,
        cuts,
        epsilon_used: epsilon,
        residual_frobenius: w.frobenius_norm(),
    })
}

pub fn fk_decompose_model(
    model: &crate::model::IsingModel,
    epsilon: f64,
    seed: u64,
    finder: CutFinder,
) -> Result<CutDecomposition> {
    fk_decompose(model.couplings(), epsilon, seed, finder)
}

/// Dense k-index array with equal side length n (desk scale only).
#[derive(Debug, Clone)]
pub struct DenseTensor {
    pub n: usize,
    pub degree: usize,
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(n: usize, degree: usize) -> Self {
        let len = n.pow(degree as u32);
        DenseTensor {
            n,
            degree,
            data: vec![0.0; len],
        }
    }

    /// Degree-d slice of an MRF: the coefficient J_α sits at the sorted index
    /// tuple, so ‖tensor‖_F = ‖J_{=d}‖_F.
    pub fn from_mrf_slice(mrf: &crate::model::Mrf, d: usize) -> Self {
        let mut t = DenseTensor::zeros(mrf.n(), d);
        for (key, coeff) in mrf.degree_slice(d) {
            let mut idx = 0usize;
            for &i in key {
                idx = idx * mrf.n() + i;
            }
            t.data[idx] += coeff;
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

struct FoundBox {
    sets: Vec<Vec<usize>>,
    value: f64,
}

/// Exact maximizer of |Σ_box T| over boxes S_1×…×S_d, by recursing on the
/// first index with incremental collapse.
fn exhaustive_box(t: &DenseTensor) -> Option<FoundBox> {
    if t.degree == 2 {
        let m = DenseMatrix::from_vec(t.n, t.n, t.data.clone()).expect("square by construction");
        let cut = exhaustive_cut(&m)?;
        return Some(FoundBox {
            sets: vec![cut.rows, cut.cols],
            value: cut.value,
        });
    }
    let n = t.n;
    let stride = n.pow((t.degree - 1) as u32);
    let mut collapsed = DenseTensor::zeros(n, t.degree - 1);
    let mut in_s = vec![false; n];
    let mut best: Option<(u64, FoundBox)> = None;
    for k in 1u64..(1 << n) {
        let i = k.trailing_zeros() as usize;
        in_s[i] = !in_s[i];
        let sign = if in_s[i] { 1.0 } else { -1.0 };
        let base = i * stride;
        for kk in 0..stride {
            collapsed.data[kk] += sign * t.data[base + kk];
        }
        let mask = k ^ (k >> 1);
        if let Some(inner) = exhaustive_box(&collapsed) {
            let better = best.as_ref().map_or(true, |(bm, b)| {
                inner.value.abs() > b.value.abs()
                    || (inner.value.abs() == b.value.abs() && mask < *bm)
            });
            if better {
                best = Some((mask, inner));
            }
        }
    }
    let (mask, inner) = best?;
    let first: Vec<usize> = (0..n).filter(|&i| (mask >> i) & 1 == 1).collect();
    let mut sets = vec![first];
    sets.extend(inner.sets);
    Some(FoundBox {
        sets,
        value: inner.value,
    })
}

/// Local search over boxes: cyclically re-optimize each slot given the others.
fn local_search_box(t: &DenseTensor, rng: &mut rng::Rng, restarts: usize) -> Option<FoundBox> {
    use rand::Rng as _;
    let n = t.n;
    let d = t.degree;
    let mut best: Option<FoundBox> = None;
    for _ in 0..restarts {
        let mut sets: Vec<Vec<bool>> = (0..d)
            .map(|_| (0..n).map(|_| rng.gen_bool(0.5)).collect())
            .collect();
        for maximize in [true, false] {
            let flip = if maximize { 1.0 } else { -1.0 };
            let mut value = 0.0;
            for _round in 0..60 {
                let mut improved = false;
                for slot in 0..d {
                    // Marginal sum over the other slots for each index in `slot`.
                    let mut marg = vec![0.0f64; n];
                    let strides: Vec<usize> = (0..d).map(|k| n.pow((d - 1 - k) as u32)).collect();
                    for (flat, &v) in t.data.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let mut keep = true;
                        let mut slot_idx = 0usize;
                        for k in 0..d {
                            let ik = (flat / strides[k]) % n;
                            if k == slot {
                                slot_idx = ik;
                            } else if !sets[k][ik] {
                                keep = false;
                                break;
                            }
                        }
                        if keep {
                            marg[slot_idx] += v;
                        }
                    }
                    let mut newval = 0.0;
                    for i in 0..n {
                        sets[slot][i] = flip * marg[i] > 0.0;
                        if sets[slot][i] {
                            newval += marg[i];
                        }
                    }
                    if (newval - value).abs() > 1e-15 {
                        improved = true;
                    }
                    value = newval;
                }
                if !improved {
                    break;
                }
            }
            if value != 0.0 && best.as_ref().map_or(true, |b| value.abs() > b.value.abs()) {
                let out: Vec<Vec<usize>> = sets
                    .iter()
                    .map(|s| (0..n).filter(|&i| s[i]).collect())
                    .collect();
                if out.iter().all(|s: &Vec<usize>| !s.is_empty()) {
                    best = Some(FoundBox { sets: out, value });
                }
            }
        }
    }
    best
}

/// Largest dense tensor (total entries) the decomposition will touch.
pub const TENSOR_SIZE_CAP: usize = 1 << 24;

/// Cut decomposition of a degree-d array: width ≤ ⌈4/ε²⌉ and
/// Σ|d_i| ≤ ‖T‖_F/(ε√N) with N = n^d, both enforced by the stopping rule.
/// Uses the exhaustive box search when n·d ≤ 30, local search otherwise.
pub fn tensor_decompose(t: &DenseTensor, epsilon: f64, seed: u64) -> Result<TensorDecomposition> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    if t.degree < 2 {
        return Err(Error::InvalidParams(
            "tensor decomposition requires degree >= 2".into(),
        ));
    }
    if t.data.len() > TENSOR_SIZE_CAP {
        return Err(Error::TooLargeForExact {
            n: t.data.len(),
            cap: TENSOR_SIZE_CAP,
        });
    }
    let tf = t.frobenius_norm();
    let n_total = t.data.len() as f64;
    let threshold = epsilon * n_total.sqrt() * tf;
    let width_cap = (4.0 / (epsilon * epsilon)).ceil() as usize;
    let exhaustive = t.n * t.degree <= EXHAUSTIVE_TENSOR_CAP;

    let mut rng = rng::stream(seed, 0);
    let mut w = t.clone();
    let mut cuts = Vec::new();
    while cuts.len() < width_cap {
        let found = if exhaustive {
            exhaustive_box(&w)
        } else {
            local_search_box(&w, &mut rng, 20)
        };
        let Some(b) = found else { break };
        if b.value.abs() <= threshold {
            break;
        }
        let vol: usize = b.sets.iter().map(|s| s.len()).product();
        let d = b.value / vol as f64;
        subtract_box(&mut w, &b.sets, d);
        cuts.push(CutArray {
            index_sets: b.sets,
            weight: d,
        });
    }

    Ok(TensorDecomposition {
        n: t.n,
        degree: t.degree,
        cuts,
        epsilon_used: epsilon,
        residual_frobenius: w.frobenius_norm(),
    })
}

fn subtract_box(t: &mut DenseTensor, sets: &[Vec<usize>], d: f64) {
    let n = t.n;
    let deg = t.degree;
    let mut idx = vec![0usize; deg];
    loop {
        let mut flat = 0usize;
        for k in 0..deg {
            flat = flat * n + sets[k][idx[k]];
        }
        t.data[flat] -= d;
        // Odometer over the box.
        let mut k = deg;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sets[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}
