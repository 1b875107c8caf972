//! Mixing matrices: construction, validation and spectral analysis.
//!
//! A mixing matrix `W` is a dense symmetric matrix whose rows sum to one. Its
//! spectral parameter `ζ` is the largest eigenvalue magnitude once the
//! consensus eigenvalue (eigenvector `1`, eigenvalue `1`) is removed; `ζ < 1`
//! is what makes repeated mixing contract towards consensus.
//!
//! Matrices are immutable after construction and cache their `ζ`.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Largest supported node count (workers plus auxiliaries).
pub const MAX_NODES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix<T> {
    entries: Matrix<T>,
    zeta: T,
    identity: bool,
}

/// Outcome of [`validate_mixing`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub symmetry_defect: f64,
    pub row_sum_defect: f64,
    pub zeta: f64,
    pub valid: bool,
}

impl<T: Scalar> MixingMatrix<T> {
    /// Wraps `entries` after checking shape, symmetry and unit row sums.
    ///
    /// `ζ ≥ 1` is accepted here; [`MixingMatrix::validate`] reports it.
    pub fn new(entries: Matrix<T>) -> Result<Self> {
        let n = entries.rows();
        if !entries.is_square() {
            return Err(Error::InvalidDimension(format!(
                "mixing matrix must be square, got {}x{}",
                entries.rows(),
                entries.cols()
            )));
        }
        if n == 0 || n > MAX_NODES {
            return Err(Error::InvalidDimension(format!(
                "mixing matrix size {n} outside 1..={MAX_NODES}"
            )));
        }
        if !entries.is_finite() {
            return Err(Error::NonFinite("mixing matrix entries"));
        }
        let tol = T::structural_tol(n);
        let sym = entries.symmetry_defect();
        if sym > tol {
            return Err(Error::NotSymmetric(sym.to_f64_lossy()));
        }
        let rows = row_sum_defect(&entries);
        if rows > tol {
            return Err(Error::RowSums(rows.to_f64_lossy()));
        }
        let zeta = spectral_gap(&entries)?;
        let identity = (0..n).all(|i| {
            (0..n).all(|j| entries[(i, j)] == if i == j { T::one() } else { T::zero() })
        });
        Ok(Self {
            entries,
            zeta,
            identity,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(Matrix::identity(n))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    #[inline]
    pub fn zeta(&self) -> T {
        self.zeta
    }

    #[inline]
    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[(i, j)]
    }

    /// True when every entry equals the identity exactly (no communication).
    #[inline]
    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn validate(&self) -> ValidationReport {
        validate_mixing(&self.entries)
    }

    pub fn is_valid(&self) -> bool {
        self.zeta < T::one() - T::lit(1e-12)
    }

    /// Converts to another scalar precision, recomputing `ζ` there.
    ///
    /// Diagonals are re-derived from the off-diagonal entries so that row sums
    /// stay exact in the target precision.
    pub fn cast<U: Scalar>(&self) -> Result<MixingMatrix<U>> {
        let n = self.n();
        let mut entries = Matrix::from_fn(n, n, |i, j| U::lit(self.get(i, j).to_f64_lossy()));
        for i in 0..n {
            let off = (0..n).filter(|&j| j != i).map(|j| entries[(i, j)]).sum::<U>();
            entries[(i, i)] = U::one() - off;
        }
        MixingMatrix::new(entries)
    }
}

fn row_sum_defect<T: Scalar>(m: &Matrix<T>) -> T {
    (0..m.rows())
        .map(|i| (m.row(i).iter().copied().sum::<T>() - T::one()).abs())
        .fold(T::zero(), T::max)
}

/// Largest eigenvalue magnitude of a symmetric matrix after removing the
/// eigenvalue nearest to one (the consensus direction).
///
/// For `W` with `W·1 = 1` and spectrum inside `[-1, 1]` this is
/// `max{|λ₂|, |λₙ|}`.
pub fn spectral_gap<T: Scalar>(w: &Matrix<T>) -> Result<T> {
    if !w.is_square() {
        return Err(Error::InvalidDimension(format!(
            "spectral gap of non-square {}x{} matrix",
            w.rows(),
            w.cols()
        )));
    }
    let sym = w.symmetry_defect();
    if sym > T::structural_tol(w.rows()) {
        return Err(Error::NotSymmetric(sym.to_f64_lossy()));
    }
    let values = linalg::symmetric_eigenvalues(w)?;
    Ok(gap_from_spectrum(&values))
}

pub(crate) fn gap_from_spectrum<T: Scalar>(values: &[T]) -> T {
    if values.len() <= 1 {
        return T::zero();
    }
    let consensus = values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let da = (**a - T::one()).abs();
            let db = (**b - T::one()).abs();
            da.partial_cmp(&db).expect("finite eigenvalues")
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != consensus)
        .fold(T::zero(), |acc, (_, v)| acc.max(v.abs()))
}

/// Structural and spectral check of a raw matrix; never fails.
///
/// Valid iff both structural defects are below `1e-12` (scaled for `f32`)
/// and `ζ < 1 − 1e-12`.
pub fn validate_mixing<T: Scalar>(w: &Matrix<T>) -> ValidationReport {
    let n = w.rows();
    let square = w.is_square() && n > 0;
    let symmetry_defect = if square {
        w.symmetry_defect().to_f64_lossy()
    } else {
        f64::INFINITY
    };
    let row_sum_defect = if square {
        row_sum_defect(w).to_f64_lossy()
    } else {
        f64::INFINITY
    };
    let zeta = if square && w.is_finite() {
        spectral_gap(w).map(Scalar::to_f64_lossy).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let tol = T::structural_tol(n).to_f64_lossy();
    let valid = symmetry_defect <= tol
        && row_sum_defect <= tol
        && zeta.is_finite()
        && zeta < 1.0 - 1e-12
        && n <= MAX_NODES;
    ValidationReport {
        symmetry_defect,
        row_sum_defect,
        zeta,
        valid,
    }
}

/// `J = 11ᵀ/n`: every node averages with every other.
pub fn make_fully_connected<T: Scalar>(n: usize) -> Result<MixingMatrix<T>> {
    if n == 0 {
        return Err(Error::InvalidDimension("fully connected graph needs n >= 1".into()));
    }
    let w = T::one() / T::from_usize_lossy(n);
    MixingMatrix::new(Matrix::from_fn(n, n, |_, _| w))
}

/// `(1 − ζ)J + ζI` on `n` nodes, a dense matrix whose spectral parameter is exactly `ζ`.
pub fn make_complete_with_gap<T: Scalar>(n: usize, zeta: T) -> Result<MixingMatrix<T>> {
    if n == 0 {
        return Err(Error::InvalidDimension("graph needs n >= 1".into()));
    }
    if !(zeta >= T::zero() && zeta <= T::one()) {
        return Err(Error::config(format!("target zeta {zeta} outside [0, 1]")));
    }
    let avg = (T::one() - zeta) / T::from_usize_lossy(n);
    MixingMatrix::new(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            avg + zeta
        } else {
            avg
        }
    }))
}

/// Ring on `m ≥ 3` nodes with weight 1/3 on self and on both neighbours.
pub fn make_ring<T: Scalar>(m: usize) -> Result<MixingMatrix<T>> {
    if m < 3 {
        return Err(Error::InvalidDimension(format!("ring needs at least 3 nodes, got {m}")));
    }
    let third = T::one() / T::lit(3.0);
    MixingMatrix::new(Matrix::from_fn(m, m, |i, j| {
        let diff = (i + m - j) % m;
        if diff == 0 || diff == 1 || diff == m - 1 {
            third
        } else {
            T::zero()
        }
    }))
}

/// Elastic-averaging matrix on `m` workers plus one auxiliary (last index):
///
/// ```text
/// [ (1−α)I   α1    ]
/// [ α1ᵀ      1−mα  ]
/// ```
pub fn make_easgd<T: Scalar>(m: usize, alpha: T) -> Result<MixingMatrix<T>> {
    if m == 0 {
        return Err(Error::InvalidDimension("elastic averaging needs m >= 1".into()));
    }
    make_generalized_elastic(&MixingMatrix::identity(m)?, alpha)
}

/// Closed-form spectral parameter of [`make_easgd`]: `max{|1−α|, |1−(m+1)α|}`.
pub fn easgd_zeta<T: Scalar>(m: usize, alpha: T) -> T {
    let m1 = T::from_usize_lossy(m + 1);
    (T::one() - alpha).abs().max((T::one() - m1 * alpha).abs())
}

/// The elasticity `α* = 2/(m+2)` that minimises [`easgd_zeta`], with `ζ* = m/(m+2)`.
pub fn best_easgd_alpha<T: Scalar>(m: usize) -> (T, T) {
    let m = T::from_usize_lossy(m);
    let two = T::lit(2.0);
    (two / (m + two), m / (m + two))
}

/// Appends one auxiliary node coupled to every worker of `w` with elasticity `α`:
///
/// ```text
/// [ (1−α)W   α1    ]
/// [ α1ᵀ      1−mα  ]
/// ```
pub fn make_generalized_elastic<T: Scalar>(w: &MixingMatrix<T>, alpha: T) -> Result<MixingMatrix<T>> {
    let m = w.n();
    if m + 1 > MAX_NODES {
        return Err(Error::InvalidDimension(format!(
            "elastic extension of {m} nodes exceeds {MAX_NODES}"
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::NonFinite("elasticity alpha"));
    }
    let keep = T::one() - alpha;
    let aux_self = T::one() - T::from_usize_lossy(m) * alpha;
    let entries = Matrix::from_fn(m + 1, m + 1, |i, j| match (i == m, j == m) {
        (false, false) => keep * w.get(i, j),
        (true, true) => aux_self,
        _ => alpha,
    });
    MixingMatrix::new(entries)
}

/// Closed-form spectral parameter of [`make_generalized_elastic`]:
/// `max{|1−α|ζ, |1−(m+1)α|}` where `ζ` belongs to the `m`-node base matrix.
pub fn generalized_elastic_zeta<T: Scalar>(zeta: T, m: usize, alpha: T) -> T {
    let m1 = T::from_usize_lossy(m + 1);
    ((T::one() - alpha).abs() * zeta).max((T::one() - m1 * alpha).abs())
}

/// `α* = (1+ζ)/(m+1+ζ)`, which equalises both branches and gives `ζ′ = mζ/(m+1+ζ)`.
pub fn best_generalized_elastic_alpha<T: Scalar>(zeta: T, m: usize) -> (T, T) {
    let m = T::from_usize_lossy(m);
    let denom = m + T::one() + zeta;
    ((T::one() + zeta) / denom, m * zeta / denom)
}

/// Two-level topology: workers in group `g` couple only to their own
/// auxiliary node with elasticity `α`; auxiliary nodes mix through `w_inter`.
///
/// Node order is all workers (group by group) followed by one auxiliary per
/// group. With `s = max s_g`, the auxiliary block is
/// `(1 − sα)·W_inter + diag((s − s_g)α)`, which is symmetric and keeps every
/// row sum at one; for equal group sizes it reduces to `(1 − s_gα)·W_inter`.
pub fn make_hierarchical<T: Scalar>(
    group_sizes: &[usize],
    alpha: T,
    w_inter: &MixingMatrix<T>,
) -> Result<MixingMatrix<T>> {
    let groups = group_sizes.len();
    if groups == 0 || group_sizes.contains(&0) {
        return Err(Error::InvalidDimension(
            "hierarchical topology needs non-empty groups".into(),
        ));
    }
    if w_inter.n() != groups {
        return Err(Error::DimensionMismatch {
            context: "inter-group mixing matrix",
            expected: groups,
            found: w_inter.n(),
        });
    }
    if alpha < T::zero() || !alpha.is_finite() {
        return Err(Error::config(format!("elasticity {alpha} must be >= 0")));
    }
    let workers: usize = group_sizes.iter().sum();
    let n = workers + groups;
    if n > MAX_NODES {
        return Err(Error::InvalidDimension(format!(
            "hierarchical topology with {n} nodes exceeds {MAX_NODES}"
        )));
    }
    let group_of: Vec<usize> = group_sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat(g).take(s))
        .collect();
    let largest = T::from_usize_lossy(*group_sizes.iter().max().expect("non-empty"));
    let inter_scale = T::one() - largest * alpha;

    let mut entries = Matrix::zeros(n, n);
    for i in 0..workers {
        entries[(i, i)] = T::one() - alpha;
        let aux = workers + group_of[i];
        entries[(i, aux)] = alpha;
        entries[(aux, i)] = alpha;
    }
    for g in 0..groups {
        for h in 0..groups {
            let mut value = inter_scale * w_inter.get(g, h);
            if g == h {
                value += (largest - T::from_usize_lossy(group_sizes[g])) * alpha;
            }
            entries[(workers + g, workers + h)] = value;
        }
    }
    MixingMatrix::new(entries)
}

/// `‖Wʲ − J‖_op`, evaluated numerically.
pub fn power_deviation_norm<T: Scalar>(w: &MixingMatrix<T>, j: u32) -> Result<T> {
    let n = w.n();
    let avg = T::one() / T::from_usize_lossy(n);
    let power = w.entries().powi(j)?;
    let deviation = power.zip_with(&Matrix::from_fn(n, n, |_, _| avg), |a, b| a - b)?;
    linalg::operator_norm(&deviation)
}

/// Random symmetric doubly-stochastic matrix on `n` nodes.
///
/// A ring backbone plus random chords (all with positive weights and
/// positive self-loops) is balanced by symmetric Sinkhorn scaling until the
/// row sums are within `1e-12`, then the diagonal absorbs the residual.
pub fn random_doubly_stochastic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<MixingMatrix<f64>> {
    if !(2..=MAX_NODES).contains(&n) {
        return Err(Error::InvalidDimension(format!(
            "random mixing matrix size {n} outside 2..={MAX_NODES}"
        )));
    }
    let edge_prob: f64 = rng.gen_range(0.1..0.6);
    let mut a = Matrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = rng.gen_range(0.2..1.0);
        for j in (i + 1)..n {
            let neighbours = j == i + 1 || (i == 0 && j == n - 1);
            if neighbours || rng.gen_bool(edge_prob) {
                let w = rng.gen_range(0.1..1.0);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }

    let mut scale = vec![1.0; n];
    for _ in 0..10_000 {
        let sums: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| scale[i] * a[(i, j)] * scale[j]).sum())
            .collect();
        let defect = sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        if defect < 1e-13 {
            break;
        }
        for i in 0..n {
            scale[i] /= sums[i].sqrt();
        }
    }

    let mut w = Matrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = scale[i] * a[(i, j)] * scale[j];
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::new(w)
}

/// The τ-periodic schedule: `W` on steps `k ≡ 0 (mod τ)`, identity otherwise.
#[derive(Debug, Clone)]
pub struct MixingSchedule<T> {
    base: MixingMatrix<T>,
    identity: MixingMatrix<T>,
    tau: usize,
}

impl<T: Scalar> MixingSchedule<T> {
    pub fn new(base: MixingMatrix<T>, tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::config("communication period tau must be >= 1"));
        }
        let identity = MixingMatrix::identity(base.n())?;
        Ok(Self {
            base,
            identity,
            tau,
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn base(&self) -> &MixingMatrix<T> {
        &self.base
    }

    pub fn is_sync_step(&self, k: usize) -> bool {
        k % self.tau == 0
    }

    pub fn at(&self, k: usize) -> &MixingMatrix<T> {
        if self.is_sync_step(k) {
            &self.base
        } else {
            &self.identity
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixingJson {
    n: usize,
    entries: Vec<f64>,
    zeta: f64,
}

impl<T: Scalar> Serialize for MixingMatrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MixingJson {
            n: self.n(),
            entries: self.entries.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
            zeta: self.zeta.to_f64_lossy(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for MixingMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = MixingJson::deserialize(deserializer)?;
        let entries = raw.entries.iter().map(|&v| T::lit(v)).collect();
        let matrix = Matrix::from_row_major(raw.n, raw.n, entries).map_err(D::Error::custom)?;
        let w = MixingMatrix::new(matrix).map_err(D::Error::custom)?;
        let recorded = raw.zeta;
        let computed = w.zeta().to_f64_lossy();
        if (recorded - computed).abs() > 1e-9 {
            return Err(D::Error::custom(format!(
                "recorded zeta {recorded} disagrees with eigensolve {computed}"
            )));
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn fully_connected() {
        let j2 = make_fully_connected::<f64>(2).unwrap();
        assert_eq!(j2.entries().to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(j2.zeta(), 0.0);

        let j1 = make_fully_connected::<f64>(1).unwrap();
        assert_eq!(j1.entries().to_rows(), vec![vec![1.0]]);
        assert_eq!(j1.zeta(), 0.0);

        let j4 = make_fully_connected::<f64>(4).unwrap();
        assert!(j4.entries().as_slice().iter().all(|&v| v == 0.25));
        let values = linalg::symmetric_eigenvalues(j4.entries()).unwrap();
        for (v, expect) in values.iter().zip([1.0, 0.0, 0.0, 0.0]) {
            assert_close(*v, expect, 1e-14);
        }
        assert!(matches!(
            make_fully_connected::<f64>(0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn easgd_matrix_entries() {
        let w = make_easgd::<f64>(2, 0.25).unwrap();
        assert_eq!(
            w.entries().to_rows(),
            vec![
                vec![0.75, 0.0, 0.25],
                vec![0.0, 0.75, 0.25],
                vec![0.25, 0.25, 0.5]
            ]
        );
    }

    #[test]
    fn easgd_spectral_values() {
        let w = make_easgd::<f64>(8, 0.2).unwrap();
        assert_close(w.zeta(), 0.8, 1e-9);
        assert!(w.validate().valid);

        let disconnected = make_easgd::<f64>(8, 0.0).unwrap();
        assert!(disconnected.is_identity());
        assert_close(disconnected.zeta(), 1.0, 1e-12);
        assert!(!disconnected.validate().valid);

        assert_close(easgd_zeta(8, 0.1125), 0.8875, 1e-15);
        assert_close(easgd_zeta(8, 0.2), 0.8, 1e-15);
        assert_close(easgd_zeta(8, 0.23), 1.07, 1e-12);

        let unstable = make_easgd::<f64>(8, 0.23).unwrap();
        let report = unstable.validate();
        assert!(!report.valid);
        assert_close(report.zeta, 1.07, 1e-9);
    }

    #[test]
    fn best_alpha_matches_grid_scan() {
        assert_eq!(best_easgd_alpha::<f64>(8), (0.2, 0.8));
        assert_eq!(best_easgd_alpha::<f64>(2), (0.5, 0.5));
        // brute-force scan of α ∈ [0, 0.22], step 1e-4
        let (arg, _) = (0..=2200)
            .map(|i| i as f64 * 1e-4)
            .map(|a| (a, easgd_zeta(8, a)))
            .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        assert_close(arg, 0.2, 1e-4);
    }

    #[test]
    fn generalized_elastic_entries() {
        let j2 = make_fully_connected::<f64>(2).unwrap();
        let w = make_generalized_elastic(&j2, 0.25).unwrap();
        assert_eq!(
            w.entries().to_rows(),
            vec![
                vec![0.375, 0.375, 0.25],
                vec![0.375, 0.375, 0.25],
                vec![0.25, 0.25, 0.5]
            ]
        );
        let ring = make_ring::<f64>(5).unwrap();
        let detached = make_generalized_elastic(&ring, 0.0).unwrap();
        assert_close(detached.zeta(), 1.0, 1e-12);
        assert!(!detached.validate().valid);
    }

    #[test]
    fn generalized_elastic_closed_form() {
        assert_close(generalized_elastic_zeta(0.75, 7, 0.2), 0.6, 1e-15);
        let (alpha, zeta) = best_generalized_elastic_alpha(0.75, 7);
        assert_close(alpha, 0.2, 1e-15);
        assert_close(zeta, 0.6, 1e-15);
        for m in [1, 3, 10] {
            assert_close(generalized_elastic_zeta(0.0, m, 1.0 / (m as f64 + 1.0)), 0.0, 1e-15);
        }
        // grid scan over α ∈ [0, 0.4] for ζ = 0.5, m = 4
        let (arg, min) = (0..=4000)
            .map(|i| i as f64 * 1e-4)
            .map(|a| (a, generalized_elastic_zeta(0.5, 4, a)))
            .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        assert_close(arg, 1.5 / 5.5, 1e-4);
        assert_close(min, 2.0 / 5.5, 1e-4);
    }

    #[test]
    fn generalized_elastic_numeric_at_seven_workers() {
        let base = make_complete_with_gap::<f64>(7, 0.75).unwrap();
        assert_close(base.zeta(), 0.75, 1e-12);
        let w = make_generalized_elastic(&base, 0.2).unwrap();
        assert_close(w.zeta(), 0.6, 1e-9);
    }

    #[test]
    fn ring_spectra() {
        let r3 = make_ring::<f64>(3).unwrap();
        assert!(r3.entries().as_slice().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-16));
        assert_close(r3.zeta(), 0.0, 1e-12);
        assert_close(make_ring::<f64>(4).unwrap().zeta(), 1.0 / 3.0, 1e-12);
        let circulant = 1.0 / 3.0 + 2.0 / 3.0 * (2.0 * std::f64::consts::PI / 16.0).cos();
        assert_close(make_ring::<f64>(16).unwrap().zeta(), circulant, 1e-12);
        assert!(make_ring::<f64>(2).is_err());
    }

    #[test]
    fn spectral_gap_basics() {
        for n in 1..6 {
            let j = make_fully_connected::<f64>(n).unwrap();
            assert_close(spectral_gap(j.entries()).unwrap(), 0.0, 1e-14);
        }
        assert_close(spectral_gap(&Matrix::<f64>::identity(4)).unwrap(), 1.0, 1e-15);
        let skew = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.4, 0.6]]).unwrap();
        assert!(matches!(spectral_gap(&skew), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn power_deviation() {
        let j = make_fully_connected::<f64>(5).unwrap();
        for p in 1..5 {
            assert_close(power_deviation_norm(&j, p).unwrap(), 0.0, 1e-14);
        }
        let ring = make_ring::<f64>(4).unwrap();
        assert_close(power_deviation_norm(&ring, 0).unwrap(), 1.0, 1e-12);
        assert_close(power_deviation_norm(&ring, 2).unwrap(), 1.0 / 9.0, 1e-12);
    }

    #[test]
    fn hierarchical_structure() {
        let single = make_hierarchical(&[5], 0.15, &MixingMatrix::<f64>::identity(1).unwrap()).unwrap();
        let elastic = make_easgd::<f64>(5, 0.15).unwrap();
        assert_eq!(single.entries(), elastic.entries());

        let j2 = make_fully_connected::<f64>(2).unwrap();
        let pair = make_hierarchical(&[1, 1], 0.5, &j2).unwrap();
        assert_eq!(pair.n(), 4);
        let report = pair.validate();
        assert!(report.symmetry_defect <= 1e-12 && report.row_sum_defect <= 1e-12);

        let two_groups = make_hierarchical(&[4, 4], 0.2, &j2).unwrap();
        assert_eq!(two_groups.n(), 10);
        assert!(two_groups.validate().valid);

        let uneven = make_hierarchical(&[2, 5], 0.1, &j2).unwrap();
        assert!(uneven.validate().row_sum_defect <= 1e-12);

        assert!(matches!(
            make_hierarchical(&[2, 2, 2], 0.1, &j2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn validation_verdicts() {
        let j4 = make_fully_connected::<f64>(4).unwrap();
        let r = j4.validate();
        assert!(r.valid);
        assert_close(r.zeta, 0.0, 1e-14);
        let r = validate_mixing(&Matrix::<f64>::identity(4));
        assert!(!r.valid);
        assert_close(r.zeta, 1.0, 1e-14);
        let r = validate_mixing(&Matrix::<f64>::zeros(2, 3));
        assert!(!r.valid);
    }

    #[test]
    fn random_matrices_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 3..=12 {
            let w = random_doubly_stochastic(n, &mut rng).unwrap();
            let r = w.validate();
            assert!(r.valid, "n={n}: {r:?}");
        }
    }

    #[test]
    fn schedule_alternates() {
        let s = MixingSchedule::new(make_fully_connected::<f64>(3).unwrap(), 4).unwrap();
        assert!(s.at(4).zeta() < 1e-14 && !s.at(4).is_identity());
        assert!(s.at(3).is_identity());
        assert!(std::ptr::eq(s.at(8), s.base()));
        assert!(MixingSchedule::new(make_fully_connected::<f64>(3).unwrap(), 0).is_err());
    }

    #[test]
    fn json_shape() {
        let w = make_ring::<f64>(4).unwrap();
        let text = serde_json::to_string(&w).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["n"], 4);
        assert_eq!(value["entries"].as_array().unwrap().len(), 16);
        let back: MixingMatrix<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);

        let tampered = text.replace(&format!("{}", w.zeta()), "0.9");
        assert!(serde_json::from_str::<MixingMatrix<f64>>(&tampered).is_err());
    }

    #[test]
    fn single_precision_constructors() {
        let w = make_easgd::<f32>(8, 0.2).unwrap();
        assert!((w.zeta() - 0.8).abs() < 1e-5);
        let back: MixingMatrix<f32> = w.cast::<f64>().unwrap().cast().unwrap();
        assert!((back.zeta() - 0.8).abs() < 1e-5);
    }
}
