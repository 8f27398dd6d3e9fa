//! Outer-product matrix multiplication, exact and sampled.
//!
//! `A (N×M) · B (M×P)` is the sum of the `M` rank-one products
//! `A[:, m] ⊗ B[m, :]`. The sampled variants evaluate only a selected subset
//! of those terms. Selection is driven by the per-term weights
//! `‖A[:, m]‖₂ · ‖B[m, :]‖₂`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Selected outer-product indices.
///
/// Repeated draws (sampling with replacement) are folded into a single entry
/// with a multiplicity, so each distinct outer product is formed once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
    multiplicities: Vec<usize>,
}

impl IndexSet {
    /// Distinct indices, each with multiplicity one.
    pub fn distinct(indices: Vec<usize>, m: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("index set must not be empty".into()));
        }
        let mut seen = vec![false; m];
        for &i in &indices {
            if i >= m {
                return Err(Error::InvalidArgument(format!(
                    "index {i} out of range for {m} outer products"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("duplicate index {i}")));
            }
        }
        let multiplicities = vec![1; indices.len()];
        Ok(Self {
            indices,
            multiplicities,
        })
    }

    /// Folds a sequence of draws into indices with multiplicities, in order of
    /// first appearance.
    pub fn from_draws(draws: &[usize], m: usize) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InvalidArgument("index set must not be empty".into()));
        }
        let mut slot = vec![usize::MAX; m];
        let mut indices = Vec::new();
        let mut multiplicities = Vec::new();
        for &d in draws {
            if d >= m {
                return Err(Error::InvalidArgument(format!(
                    "index {d} out of range for {m} outer products"
                )));
            }
            if slot[d] == usize::MAX {
                slot[d] = indices.len();
                indices.push(d);
                multiplicities.push(1);
            } else {
                multiplicities[slot[d]] += 1;
            }
        }
        Ok(Self {
            indices,
            multiplicities,
        })
    }

    pub fn full(m: usize) -> Self {
        assert!(m > 0, "index set must not be empty");
        Self {
            indices: (0..m).collect(),
            multiplicities: vec![1; m],
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// Number of distinct outer products this set evaluates.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Total multiplicity, i.e. `K`.
    pub fn total(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.multiplicities.iter().copied())
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    /// Membership mask over `0..m`.
    pub fn mask(&self, m: usize) -> Vec<bool> {
        let mut mask = vec![false; m];
        for &i in &self.indices {
            mask[i] = true;
        }
        mask
    }

    /// Indices of `0..m` not in the set, ascending.
    pub fn complement(&self, m: usize) -> Vec<usize> {
        let mask = self.mask(m);
        (0..m).filter(|&i| !mask[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    TopK,
    RandK,
    WeightedK,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::TopK, PolicyKind::RandK, PolicyKind::WeightedK];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::TopK => "topk",
            PolicyKind::RandK => "randk",
            PolicyKind::WeightedK => "weightedk",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "topk" => Ok(PolicyKind::TopK),
            "randk" => Ok(PolicyKind::RandK),
            "weightedk" => Ok(PolicyKind::WeightedK),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection policy '{other}' (expected topk, randk or weightedk)"
            ))),
        }
    }
}

/// Which outer products to evaluate and how many.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub kind: PolicyKind,
    pub k: usize,
    pub with_replacement: bool,
}

/// Result of applying a [`SelectionPolicy`].
#[derive(Debug, Clone)]
pub struct Selection {
    pub set: IndexSet,
    /// Per-term probabilities for the importance-scaled estimator. Present
    /// only for randomized sampling with replacement.
    pub scaling: Option<Vec<f64>>,
}

impl SelectionPolicy {
    pub fn new(kind: PolicyKind, k: usize, with_replacement: bool) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if kind == PolicyKind::TopK && with_replacement {
            return Err(Error::InvalidArgument(
                "topk is deterministic and cannot sample with replacement".into(),
            ));
        }
        Ok(Self {
            kind,
            k,
            with_replacement,
        })
    }

    pub fn without_replacement(kind: PolicyKind, k: usize) -> Result<Self> {
        Self::new(kind, k, false)
    }

    /// Checks the policy against `m` available outer products.
    pub fn validate_for(&self, m: usize) -> Result<()> {
        if !self.with_replacement && self.k > m {
            return Err(Error::InvalidArgument(format!(
                "k = {} exceeds the {m} available outer products",
                self.k
            )));
        }
        Ok(())
    }

    /// Picks indices given per-term weights (see [`outer_product_weights`]).
    pub fn select<R: Rng + ?Sized>(&self, weights: &[f64], rng: &mut R) -> Result<Selection> {
        self.validate_for(weights.len())?;
        match self.kind {
            PolicyKind::TopK => Ok(Selection {
                set: select_topk(weights, self.k)?,
                scaling: None,
            }),
            PolicyKind::RandK => {
                let m = weights.len();
                let set = select_randk(m, self.k, rng, self.with_replacement)?;
                let scaling = self
                    .with_replacement
                    .then(|| vec![1.0 / m as f64; m]);
                Ok(Selection { set, scaling })
            }
            PolicyKind::WeightedK => {
                let (set, p) = select_weightedk(weights, self.k, rng, self.with_replacement)?;
                let scaling = self.with_replacement.then_some(p);
                Ok(Selection { set, scaling })
            }
        }
    }
}

fn check_inner(a: &Matrix, b: &Matrix, op: &'static str) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(Error::dims(
            op,
            format!(
                "A is {}x{} but B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            ),
        ));
    }
    Ok(())
}

/// Adds `coef · A[:, m] ⊗ B[m, :]` into `out`.
fn accumulate_outer(out: &mut Matrix, a: &Matrix, b: &Matrix, m: usize, coef: f64) {
    let b_row = b.row(m);
    for i in 0..a.rows() {
        let s = coef * a.get(i, m);
        if s == 0.0 {
            continue;
        }
        for (o, &bv) in out.row_mut(i).iter_mut().zip(b_row) {
            *o += s * bv;
        }
    }
}

/// `A · B` computed as the sum of all `M` outer products.
pub fn exact_outer_matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_inner(a, b, "exact_outer_matmul")?;
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for m in 0..a.cols() {
        accumulate_outer(&mut out, a, b, m, 1.0);
    }
    Ok(out)
}

/// `w[m] = ‖A[:, m]‖₂ · ‖B[m, :]‖₂`.
pub fn outer_product_weights(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    check_inner(a, b, "outer_product_weights")?;
    let mut col_sq = vec![0.0; a.cols()];
    for i in 0..a.rows() {
        for (s, &v) in col_sq.iter_mut().zip(a.row(i)) {
            *s += v * v;
        }
    }
    Ok(col_sq
        .into_iter()
        .enumerate()
        .map(|(m, sq)| sq.sqrt() * norm2(b.row(m)))
        .collect())
}

/// Euclidean norm of a slice.
pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("weight vector is empty".into()));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("selection weights"));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidArgument("selection weights must be non-negative".into()));
    }
    Ok(())
}

/// The `k` largest weights; ties go to the smaller index.
pub fn select_topk(weights: &[f64], k: usize) -> Result<IndexSet> {
    check_weights(weights)?;
    if k == 0 || k > weights.len() {
        return Err(Error::InvalidArgument(format!(
            "topk needs 1 <= k <= {}, got {k}",
            weights.len()
        )));
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // stable sort keeps ascending index order among equal weights
    order.sort_by(|&i, &j| weights[j].total_cmp(&weights[i]));
    order.truncate(k);
    IndexSet::distinct(order, weights.len())
}

/// Uniform sample of `k` indices from `0..m`.
pub fn select_randk<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    rng: &mut R,
    with_replacement: bool,
) -> Result<IndexSet> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "randk needs m >= 1 and k >= 1, got m={m}, k={k}"
        )));
    }
    if with_replacement {
        let draws: Vec<usize> = (0..k).map(|_| rng.random_range(0..m)).collect();
        IndexSet::from_draws(&draws, m)
    } else {
        if k > m {
            return Err(Error::InvalidArgument(format!(
                "randk without replacement needs k <= m, got k={k}, m={m}"
            )));
        }
        IndexSet::distinct(rand::seq::index::sample(rng, m, k).into_vec(), m)
    }
}

/// One categorical draw proportional to `weights` (which must have a positive
/// sum). Zero-weight entries are never returned.
fn draw_categorical<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("non-empty cumulative weights");
    let target = rng.random::<f64>() * total;
    let idx = cumulative.partition_point(|&c| c <= target);
    if idx < cumulative.len() {
        idx
    } else {
        // target rounded up to the total; take the last positive entry
        (0..cumulative.len())
            .rev()
            .find(|&i| i == 0 || cumulative[i] > cumulative[i - 1])
            .unwrap_or(0)
    }
}

fn cumulative_sums(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Weighted sample with `p[m] = w[m] / Σ w`.
///
/// With replacement this is `k` i.i.d. categorical draws. Without
/// replacement each draw removes the chosen index and renormalizes the rest.
/// The returned probabilities are always the initial `p`.
pub fn select_weightedk<R: Rng + ?Sized>(
    weights: &[f64],
    k: usize,
    rng: &mut R,
    with_replacement: bool,
) -> Result<(IndexSet, Vec<f64>)> {
    check_weights(weights)?;
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Selection(
            "weightedk is undefined when every weight is zero".into(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("weightedk needs k >= 1".into()));
    }
    let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let m = weights.len();

    if with_replacement {
        let cumulative = cumulative_sums(weights);
        let draws: Vec<usize> = (0..k).map(|_| draw_categorical(&cumulative, rng)).collect();
        return Ok((IndexSet::from_draws(&draws, m)?, probabilities));
    }

    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if k > positive {
        return Err(Error::Selection(format!(
            "weightedk without replacement needs k <= {positive} (positive weights), got {k}"
        )));
    }
    let mut remaining = weights.to_vec();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let cumulative = cumulative_sums(&remaining);
        let idx = draw_categorical(&cumulative, rng);
        debug_assert!(remaining[idx] > 0.0);
        chosen.push(idx);
        remaining[idx] = 0.0;
    }
    Ok((IndexSet::distinct(chosen, m)?, probabilities))
}

/// `Σ_{k∈sel} c_k · A[:, k] ⊗ B[k, :]`.
///
/// Unscaled, `c_k` is the multiplicity of `k`. With `scaling = Some(p)` each
/// draw is importance-weighted, `c_k = multiplicity / (p[k] · K)`, which makes
/// the with-replacement estimator unbiased.
pub fn sampled_outer_matmul(
    a: &Matrix,
    b: &Matrix,
    sel: &IndexSet,
    scaling: Option<&[f64]>,
) -> Result<Matrix> {
    check_inner(a, b, "sampled_outer_matmul")?;
    let m = a.cols();
    if sel.is_empty() {
        return Err(Error::InvalidArgument("index set must not be empty".into()));
    }
    if let Some(&bad) = sel.indices().iter().find(|&&i| i >= m) {
        return Err(Error::InvalidArgument(format!(
            "index {bad} out of range for {m} outer products"
        )));
    }
    if let Some(p) = scaling {
        if p.len() != m {
            return Err(Error::dims(
                "sampled_outer_matmul",
                format!("{} probabilities for {m} outer products", p.len()),
            ));
        }
        if let Some(&bad) = sel.indices().iter().find(|&&i| p[i].is_nan() || p[i] <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "selected index {bad} has zero sampling probability"
            )));
        }
    }
    let k_total = sel.total() as f64;
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for (idx, mult) in sel.iter() {
        let coef = match scaling {
            Some(p) => mult as f64 / (p[idx] * k_total),
            None => mult as f64,
        };
        accumulate_outer(&mut out, a, b, idx, coef);
    }
    Ok(out)
}

/// Convenience: weights, selection and sampled product in one call.
pub fn approx_outer_matmul<R: Rng + ?Sized>(
    a: &Matrix,
    b: &Matrix,
    policy: &SelectionPolicy,
    rng: &mut R,
) -> Result<(Matrix, IndexSet)> {
    let weights = outer_product_weights(a, b)?;
    let Selection { set, scaling } = policy.select(&weights, rng)?;
    let c_hat = sampled_outer_matmul(a, b, &set, scaling.as_deref())?;
    Ok((c_hat, set))
}

/// `‖C − Ĉ‖_F`.
pub fn frobenius_error(c: &Matrix, c_hat: &Matrix) -> Result<f64> {
    if c.shape() != c_hat.shape() {
        return Err(Error::dims(
            "frobenius_error",
            format!(
                "{}x{} vs {}x{}",
                c.rows(),
                c.cols(),
                c_hat.rows(),
                c_hat.cols()
            ),
        ));
    }
    Ok(c
        .as_slice()
        .iter()
        .zip(c_hat.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
    }

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn assert_close_rel(x: &Matrix, y: &Matrix, tol: f64) {
        assert_eq!(x.shape(), y.shape());
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            let scale = a.abs().max(b.abs()).max(1.0);
            assert!((a - b).abs() <= tol * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_identity_and_dot() {
        let b = m(&[&[2.0, 3.0], &[4.0, 5.0]]);
        assert_eq!(exact_outer_matmul(&Matrix::identity(2), &b).unwrap(), b);
        let c = exact_outer_matmul(&m(&[&[1.0, 2.0]]), &m(&[&[3.0], &[4.0]])).unwrap();
        assert_eq!(c.as_slice(), &[11.0]);
    }

    #[test]
    fn exact_matches_triple_loop() {
        let mut r = rng(7);
        for _ in 0..20 {
            let a = random_matrix(&mut r, 7, 5);
            let b = random_matrix(&mut r, 5, 3);
            assert_close_rel(&exact_outer_matmul(&a, &b).unwrap(), &naive_matmul(&a, &b), 1e-12);
        }
    }

    #[test]
    fn exact_rejects_mismatch() {
        let err = exact_outer_matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn weights_examples() {
        let w = outer_product_weights(&m(&[&[3.0, 0.0], &[4.0, 0.0]]), &m(&[&[1.0, 1.0], &[0.0, 0.0]]))
            .unwrap();
        assert!((w[0] - 5.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(w[1], 0.0);
        let w = outer_product_weights(&Matrix::identity(3), &Matrix::identity(3)).unwrap();
        assert_eq!(w, vec![1.0, 1.0, 1.0]);
        assert!(outer_product_weights(&Matrix::zeros(2, 3), &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn weights_match_scalar_norms() {
        let mut r = rng(11);
        let a = random_matrix(&mut r, 6, 4);
        let b = random_matrix(&mut r, 4, 2);
        let w = outer_product_weights(&a, &b).unwrap();
        for (k, &wk) in w.iter().enumerate() {
            let mut ca = 0.0;
            for i in 0..6 {
                ca += a.get(i, k) * a.get(i, k);
            }
            let rb = (b.get(k, 0).powi(2) + b.get(k, 1).powi(2)).sqrt();
            assert!((wk - ca.sqrt() * rb).abs() <= 1e-12 * wk.max(1.0));
        }
    }

    #[test]
    fn topk_examples() {
        assert_eq!(select_topk(&[5.0, 1.0, 3.0], 2).unwrap().indices(), &[0, 2]);
        assert_eq!(select_topk(&[2.0, 2.0, 1.0], 1).unwrap().indices(), &[0]);
        let mut all = select_topk(&[1.0; 4], 4).unwrap().indices().to_vec();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(select_topk(&[1.0, 2.0], 0).is_err());
        assert!(select_topk(&[1.0, 2.0], 3).is_err());
        assert!(select_topk(&[1.0, f64::NAN], 1).is_err());
    }

    #[test]
    fn randk_examples() {
        let mut r = rng(1);
        let mut s = select_randk(5, 5, &mut r, false).unwrap().indices().to_vec();
        s.sort_unstable();
        assert_eq!(s, vec![0, 1, 2, 3, 4]);
        assert_eq!(select_randk(1, 1, &mut r, false).unwrap().indices(), &[0]);
        assert!(select_randk(3, 4, &mut r, false).is_err());
        let with = select_randk(3, 10, &mut r, true).unwrap();
        assert_eq!(with.total(), 10);
    }

    #[test]
    fn randk_uniform_frequency() {
        let mut r = rng(2024);
        let trials = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            for &i in select_randk(4, 2, &mut r, false).unwrap().indices() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((f - 0.5).abs() < 0.01, "frequency {f}");
        }
    }

    #[test]
    fn weightedk_examples() {
        let mut r = rng(3);
        for _ in 0..100 {
            let (set, p) = select_weightedk(&[1.0, 0.0, 0.0], 1, &mut r, true).unwrap();
            assert_eq!(set.indices(), &[0]);
            assert_eq!(p, vec![1.0, 0.0, 0.0]);
        }
        let (set, _) = select_weightedk(&[1.0; 6], 6, &mut r, false).unwrap();
        let mut all = set.indices().to_vec();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
        assert!(matches!(
            select_weightedk(&[0.0, 0.0], 1, &mut r, true),
            Err(Error::Selection(_))
        ));
        assert!(select_weightedk(&[1.0, 0.0, 0.0], 2, &mut r, false).is_err());
    }

    #[test]
    fn weightedk_frequency_with_replacement() {
        let mut r = rng(99);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| select_weightedk(&[3.0, 1.0], 1, &mut r, true).unwrap().0.indices() == [0])
            .count();
        let f = hits as f64 / trials as f64;
        assert!((f - 0.75).abs() < 0.01, "frequency {f}");
    }

    #[test]
    fn weightedk_never_picks_zero_weight() {
        let mut r = rng(5);
        let w = [0.0, 2.0, 0.0, 1.0, 0.0, 4.0];
        for _ in 0..2000 {
            let (set, _) = select_weightedk(&w, 3, &mut r, false).unwrap();
            assert!(set.indices().iter().all(|&i| w[i] > 0.0));
            let (set, _) = select_weightedk(&w, 5, &mut r, true).unwrap();
            assert!(set.indices().iter().all(|&i| w[i] > 0.0));
        }
    }

    #[test]
    fn sampled_examples() {
        let mut r = rng(8);
        let a = random_matrix(&mut r, 4, 6);
        let b = random_matrix(&mut r, 6, 3);
        let full = sampled_outer_matmul(&a, &b, &IndexSet::full(6), None).unwrap();
        assert_eq!(full, exact_outer_matmul(&a, &b).unwrap());

        let b = m(&[&[2.0, 3.0], &[4.0, 5.0]]);
        let sel = IndexSet::distinct(vec![0], 2).unwrap();
        let c = sampled_outer_matmul(&Matrix::identity(2), &b, &sel, None).unwrap();
        assert_eq!(c.as_slice(), &[2.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn sampled_errors() {
        let a = Matrix::identity(2);
        let sel = IndexSet::from_draws(&[1], 2).unwrap();
        assert!(sampled_outer_matmul(&a, &a, &sel, Some(&[1.0, 0.0])).is_err());
        assert!(IndexSet::distinct(vec![2], 2).is_err());
        assert!(IndexSet::distinct(vec![1, 1], 2).is_err());
        let sel3 = IndexSet::full(3);
        assert!(sampled_outer_matmul(&a, &a, &sel3, None).is_err());
    }

    #[test]
    fn multiplicities_fold_repeats() {
        let sel = IndexSet::from_draws(&[2, 0, 2, 2], 3).unwrap();
        assert_eq!(sel.indices(), &[2, 0]);
        assert_eq!(sel.multiplicities(), &[3, 1]);
        assert_eq!(sel.total(), 4);
        assert_eq!(sel.complement(3), vec![1]);
    }

    #[test]
    fn weighted_with_replacement_mean_is_unbiased() {
        let mut r = rng(31);
        let a = Matrix::from_fn(5, 8, |_, _| r.random::<f64>());
        let b = Matrix::from_fn(8, 4, |_, _| r.random::<f64>());
        let c = exact_outer_matmul(&a, &b).unwrap();
        let policy = SelectionPolicy::new(PolicyKind::WeightedK, 3, true).unwrap();
        let trials = 10_000;
        let mut mean = Matrix::zeros(5, 4);
        for _ in 0..trials {
            let (c_hat, set) = approx_outer_matmul(&a, &b, &policy, &mut r).unwrap();
            assert_eq!(set.total(), 3);
            mean.axpy(1.0 / trials as f64, &c_hat).unwrap();
        }
        let rel = frobenius_error(&c, &mean).unwrap() / c.frobenius_norm();
        assert!(rel < 0.01, "relative distance {rel}");
    }

    #[test]
    fn frobenius_examples() {
        let a = m(&[&[1.0, 2.0]]);
        assert_eq!(frobenius_error(&a, &a).unwrap(), 0.0);
        assert_eq!(frobenius_error(&m(&[&[0.0]]), &m(&[&[3.0]])).unwrap(), 3.0);
        assert!(frobenius_error(&a, &m(&[&[1.0]])).is_err());
    }

    #[test]
    fn error_halves_when_samples_quadruple() {
        let mut r = rng(77);
        let a = Matrix::from_fn(6, 16, |_, _| r.random_range(-1.0..1.0));
        let b = Matrix::from_fn(16, 4, |_, _| r.random_range(-1.0..1.0));
        let c = exact_outer_matmul(&a, &b).unwrap();
        let mut mean_err = |k: usize| {
            let policy = SelectionPolicy::new(PolicyKind::WeightedK, k, true).unwrap();
            let trials = 4000;
            (0..trials)
                .map(|_| {
                    let (c_hat, _) = approx_outer_matmul(&a, &b, &policy, &mut r).unwrap();
                    frobenius_error(&c, &c_hat).unwrap()
                })
                .sum::<f64>()
                / trials as f64
        };
        let ratio = mean_err(4) / mean_err(16);
        assert!((ratio - 2.0).abs() <= 0.5, "ratio {ratio}");
    }

    #[test]
    fn policy_validation() {
        assert!(SelectionPolicy::new(PolicyKind::TopK, 2, true).is_err());
        assert!(SelectionPolicy::new(PolicyKind::RandK, 0, false).is_err());
        let p = SelectionPolicy::new(PolicyKind::RandK, 5, false).unwrap();
        assert!(p.validate_for(4).is_err());
        assert!(SelectionPolicy::new(PolicyKind::RandK, 5, true)
            .unwrap()
            .validate_for(4)
            .is_ok());
        assert_eq!("WeightedK".parse::<PolicyKind>().unwrap(), PolicyKind::WeightedK);
        assert!("best".parse::<PolicyKind>().is_err());
    }
}
