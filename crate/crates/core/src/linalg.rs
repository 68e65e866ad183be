//! Small dense linear algebra over the reals and complexes.
//!
//! Everything here is a thin layer over `nalgebra`: relative-threshold
//! kernels and ranges from the SVD, orthonormal complements, the
//! non-conjugating bilinear Gram matrix and minimum-norm least squares.
//! Sizes in this crate stay below ~200 rows, so full SVDs are fine.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("negative tolerance {0}")]
    NegativeTolerance(f64),
    #[error("empty input")]
    Empty,
}

/// An orthonormal basis of a subspace of `T^ambient_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Subspace<T: nalgebra::Scalar> {
    pub ambient_dim: usize,
    #[serde(with = "vec_of_vectors")]
    pub basis: Vec<DVector<T>>,
}

mod vec_of_vectors {
    use nalgebra::{DVector, Scalar};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Scalar + Serialize, S: Serializer>(
        v: &[DVector<T>],
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<T>> = v.iter().map(|x| x.iter().cloned().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, T: Scalar + Deserialize<'de>, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<DVector<T>>, D::Error> {
        let rows: Vec<Vec<T>> = Vec::deserialize(d)?;
        Ok(rows.into_iter().map(DVector::from_vec).collect())
    }
}

impl<T> Subspace<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    pub fn zero(ambient_dim: usize) -> Self {
        Self { ambient_dim, basis: Vec::new() }
    }

    pub fn full(ambient_dim: usize) -> Self {
        let basis = (0..ambient_dim)
            .map(|i| {
                let mut v = DVector::from_element(ambient_dim, T::zero());
                v[i] = T::one();
                v
            })
            .collect();
        Self { ambient_dim, basis }
    }

    /// Orthonormalizes `vectors` (rank decided at `tol` relative to the largest singular value).
    pub fn span(ambient_dim: usize, vectors: &[DVector<T>], tol: f64) -> Result<Self, LinalgError> {
        if vectors.is_empty() {
            return Ok(Self::zero(ambient_dim));
        }
        for v in vectors {
            if v.len() != ambient_dim {
                return Err(LinalgError::DimensionMismatch { expected: ambient_dim, got: v.len() });
            }
        }
        let m = DMatrix::from_columns(vectors);
        numerical_range(&m, tol)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Basis vectors as the columns of an `ambient_dim × dim` matrix.
    pub fn matrix(&self) -> DMatrix<T> {
        if self.basis.is_empty() {
            DMatrix::zeros(self.ambient_dim, 0)
        } else {
            DMatrix::from_columns(&self.basis)
        }
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &DVector<T>) -> DVector<T> {
        let mut out = DVector::from_element(v.len(), T::zero());
        for b in &self.basis {
            let c = b.dotc(v);
            out.axpy(c, b, T::one());
        }
        out
    }

    /// Largest deviation from orthonormality of the stored basis.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dotc(b) - T::from_real(target)).modulus());
            }
        }
        worst
    }
}

pub fn check_finite<T: ComplexField<RealField = f64> + Copy>(
    m: &DMatrix<T>,
) -> Result<(), LinalgError> {
    if m.iter().all(|x| x.real().is_finite() && x.imaginary().is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Full SVD data: singular values (length `min(rows, cols)` after padding to at least
/// `cols` rows) and the right singular vectors as columns of a `cols × cols` matrix.
struct RightSvd<T: ComplexField> {
    u: DMatrix<T>,
    sigma: Vec<f64>,
    v: DMatrix<T>,
}

fn right_svd<T>(m: &DMatrix<T>) -> RightSvd<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let (rows, cols) = m.shape();
    // Pad with zero rows so that V is square and the full kernel is visible.
    let padded = if rows < cols {
        let mut p = DMatrix::from_element(cols, cols, T::zero());
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let (u, sigma, v) = checked_svd(&padded);
    RightSvd { u, sigma, v }
}

/// Unordered thin SVD `(U, σ, V)` whose reconstruction is verified. The sorting step of
/// nalgebra's ordered SVD has been observed to return inconsistent factors on rank-deficient
/// inputs, so the unordered variant is used, retrying on the adjoint if the check fails.
fn checked_svd<T>(m: &DMatrix<T>) -> (DMatrix<T>, Vec<f64>, DMatrix<T>)
where
    T: ComplexField<RealField = f64> + Copy,
{
    let scale = m.iter().map(|x| x.modulus()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let attempt = |a: &DMatrix<T>| {
        let svd = a.clone().try_svd_unordered(true, true, f64::EPSILON, 0)?;
        let u = svd.u?;
        let v = svd.v_t?.adjoint();
        let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
        let mut rec = u.clone();
        for (j, &s) in sigma.iter().enumerate() {
            rec.column_mut(j).scale_mut(s);
        }
        let err = (rec * v.adjoint() - a).iter().map(|x| x.modulus()).fold(0.0, f64::max);
        Some((u, sigma, v, err))
    };
    let direct = attempt(m);
    if let Some((u, s, v, err)) = &direct {
        if *err <= 1e-10 * scale {
            return (u.clone(), s.clone(), v.clone());
        }
    }
    if let Some((u, s, v, err)) = attempt(&m.adjoint()) {
        if err <= 1e-10 * scale || direct.as_ref().is_none_or(|d| err < d.3) {
            return (v, s, u);
        }
    }
    let (u, s, v, _) = direct.expect("SVD did not converge");
    (u, s, v)
}

/// Singular values of `m`, sorted in decreasing order.
pub fn singular_values<T>(m: &DMatrix<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

fn cutoff(sigma: &[f64], tol: f64) -> f64 {
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let scale = if smax > 0.0 { smax } else { 1.0 };
    tol * scale
}

/// Orthonormal basis of the right kernel of `m`: a right singular direction is kept when its
/// singular value is at most `tol` times the largest singular value (or `tol` if all vanish).
pub fn numerical_kernel<T>(m: &DMatrix<T>, tol: f64) -> Result<Subspace<T>, LinalgError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if tol < 0.0 {
        return Err(LinalgError::NegativeTolerance(tol));
    }
    check_finite(m)?;
    let cols = m.ncols();
    if m.nrows() == 0 {
        return Ok(Subspace::full(cols));
    }
    if cols == 0 {
        return Ok(Subspace::zero(0));
    }
    let svd = right_svd(m);
    let cut = cutoff(&svd.sigma, tol);
    Ok(kernel_below(&svd, cols, cut))
}

/// Right kernel with an absolute singular-value threshold (for matrices whose natural scale
/// is known, e.g. Gram matrices of orthonormal vectors).
pub fn numerical_kernel_abs<T>(m: &DMatrix<T>, threshold: f64) -> Result<Subspace<T>, LinalgError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if threshold < 0.0 {
        return Err(LinalgError::NegativeTolerance(threshold));
    }
    check_finite(m)?;
    let cols = m.ncols();
    if m.nrows() == 0 {
        return Ok(Subspace::full(cols));
    }
    if cols == 0 {
        return Ok(Subspace::zero(0));
    }
    Ok(kernel_below(&right_svd(m), cols, threshold))
}

fn kernel_below<T>(svd: &RightSvd<T>, cols: usize, cut: f64) -> Subspace<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let mut basis = Vec::new();
    for j in 0..cols {
        let s = svd.sigma.get(j).copied().unwrap_or(0.0);
        if s <= cut {
            basis.push(svd.v.column(j).into_owned());
        }
    }
    Subspace { ambient_dim: cols, basis }
}

/// Orthonormal basis of the column space of `m`, same threshold rule as [`numerical_kernel`].
pub fn numerical_range<T>(m: &DMatrix<T>, tol: f64) -> Result<Subspace<T>, LinalgError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if tol < 0.0 {
        return Err(LinalgError::NegativeTolerance(tol));
    }
    check_finite(m)?;
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return Ok(Subspace::zero(rows));
    }
    let (u, sigma, _) = checked_svd(m);
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(Subspace::zero(rows));
    }
    let cut = tol * smax;
    let basis = sigma
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(j, _)| u.column(j).into_owned())
        .collect();
    Ok(Subspace { ambient_dim: rows, basis })
}

/// Numerical rank with the relative threshold rule.
pub fn numerical_rank<T>(m: &DMatrix<T>, tol: f64) -> usize
where
    T: ComplexField<RealField = f64> + Copy,
{
    let s = singular_values(m);
    let cut = cutoff(&s, tol);
    s.iter().filter(|&&x| x > cut).count()
}

/// Orthonormal basis of the orthogonal complement of `s` in its ambient space.
pub fn orthonormal_complement<T>(s: &Subspace<T>) -> Subspace<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let d = s.ambient_dim;
    if s.basis.is_empty() {
        return Subspace::full(d);
    }
    // Rows are the conjugated basis vectors: kernel = vectors orthogonal to all of them.
    let rows = DMatrix::from_rows(
        &s.basis.iter().map(|b| b.adjoint()).collect::<Vec<_>>(),
    );
    let svd = right_svd(&rows);
    // Singular values are one on the span and zero on the complement.
    let basis = (0..d)
        .filter(|&j| svd.sigma.get(j).copied().unwrap_or(0.0) < 0.5)
        .map(|j| svd.v.column(j).into_owned())
        .collect();
    Subspace { ambient_dim: d, basis }
}

/// Non-conjugating Gram matrix `G[i][j] = Σ_α v_i[α] v_j[α]`.
pub fn bilinear_gram(vectors: &[CVec]) -> Result<CMat, LinalgError> {
    let Some(first) = vectors.first() else {
        return Ok(CMat::zeros(0, 0));
    };
    let d = first.len();
    for v in vectors {
        if v.len() != d {
            return Err(LinalgError::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    let k = vectors.len();
    Ok(CMat::from_fn(k, k, |i, j| bilinear(&vectors[i], &vectors[j])))
}

/// Complex-bilinear pairing without conjugation.
pub fn bilinear(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Minimum-norm least-squares solution of `a x ≈ b` with the Euclidean residual norm.
/// Singular values below `1e-12 · σ_max` are treated as zero.
pub fn least_squares_solve<T>(
    a: &DMatrix<T>,
    b: &DVector<T>,
) -> Result<(DVector<T>, f64), LinalgError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    least_squares_solve_rcond(a, b, 1e-12)
}

pub fn least_squares_solve_rcond<T>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    rcond: f64,
) -> Result<(DVector<T>, f64), LinalgError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if a.nrows() == 0 {
        return Err(LinalgError::Empty);
    }
    if b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch { expected: a.nrows(), got: b.len() });
    }
    check_finite(a)?;
    if !b.iter().all(|x| x.real().is_finite() && x.imaginary().is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let cols = a.ncols();
    let svd = right_svd(a);
    let cut = cutoff(&svd.sigma, rcond);
    let mut x = DVector::from_element(cols, T::zero());
    let mut bp = DVector::from_element(svd.u.nrows(), T::zero());
    bp.rows_mut(0, b.len()).copy_from(b);
    for (j, &s) in svd.sigma.iter().enumerate() {
        if s > cut && s > 0.0 && j < cols {
            let coef = svd.u.column(j).dotc(&bp).unscale(s);
            x.axpy(coef, &svd.v.column(j).into_owned(), T::one());
        }
    }
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}

/// Sines of the principal angles between two subspaces of equal dimension, largest first.
/// Dimension mismatch returns `[1.0]`.
pub fn principal_sines<T>(a: &Subspace<T>, b: &Subspace<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if a.dim() != b.dim() || a.ambient_dim != b.ambient_dim {
        return vec![1.0];
    }
    if a.dim() == 0 {
        return Vec::new();
    }
    let am = a.matrix();
    let bm = b.matrix();
    // (I - A A^*) B has singular values sin θ_i, accurate for small angles.
    let resid = &bm - &am * (am.adjoint() * &bm);
    singular_values(&resid)
}

/// Largest principal angle (radians) between subspaces; `π/2` on dimension mismatch.
pub fn max_principal_angle<T>(a: &Subspace<T>, b: &Subspace<T>) -> f64
where
    T: ComplexField<RealField = f64> + Copy,
{
    if a.dim() != b.dim() {
        return std::f64::consts::FRAC_PI_2;
    }
    principal_sines(a, b).first().copied().unwrap_or(0.0).min(1.0).asin()
}

/// Modified Gram–Schmidt of `v` against an orthonormal list; `None` if the remainder is
/// shorter than `min_norm`.
pub fn gram_schmidt_step(basis: &[RVec], v: &RVec, min_norm: f64) -> Option<RVec> {
    let mut w = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&w);
            w.axpy(-c, b, 1.0);
        }
    }
    let n = w.norm();
    if n > min_norm {
        Some(w / n)
    } else {
        None
    }
}

/// Largest entry modulus of a complex matrix (0 for an empty matrix).
pub fn max_modulus(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest absolute entry of a complex matrix list, 1 when all vanish.
pub fn max_abs_or_one(ms: &[&CMat]) -> f64 {
    let m = ms.iter().flat_map(|m| m.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

pub fn realify(v: &CVec) -> (RVec, RVec) {
    (v.map(|z| z.re), v.map(|z| z.im))
}

pub fn complexify(v: &RVec) -> CVec {
    v.map(|x| C64::new(x, 0.0))
}

/// `serialize_with` helpers: vectors as arrays, matrices as arrays of rows.
pub mod ser {
    use super::{CMat, CVec, RMat, RVec};
    use serde::ser::{SerializeSeq, Serializer};

    pub fn rvec<S: Serializer>(v: &RVec, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn cvec<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|z| [z.re, z.im]))
    }

    pub fn rmat<S: Serializer>(m: &RMat, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(m.nrows()))?;
        for i in 0..m.nrows() {
            seq.serialize_element(&m.row(i).iter().copied().collect::<Vec<f64>>())?;
        }
        seq.end()
    }

    pub fn cmat<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(m.nrows()))?;
        for i in 0..m.nrows() {
            seq.serialize_element(&m.row(i).iter().map(|z| [z.re, z.im]).collect::<Vec<[f64; 2]>>())?;
        }
        seq.end()
    }

    pub fn rvecs<S: Serializer>(v: &[RVec], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.iter().copied().collect::<Vec<f64>>()))
    }

    pub fn rmats<S: Serializer>(v: &[RMat], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>()))
    }
}

/// Standard complex structure `[[0, -I], [I, 0]]` on `R^{2n}` (sends `ε_i` to `ε_{n+i}`).
pub fn standard_complex_structure(n: usize) -> RMat {
    let mut j = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(n + i, i)] = 1.0;
        j[(i, n + i)] = -1.0;
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kernel_of_zero_and_identity() {
        let z = RMat::zeros(3, 3);
        assert_eq!(numerical_kernel(&z, 1e-10).unwrap().dim(), 3);
        let id = RMat::identity(4, 4);
        assert_eq!(numerical_kernel(&id, 1e-10).unwrap().dim(), 0);
    }

    #[test]
    fn kernel_of_nearly_singular_diagonal() {
        let d = RMat::from_diagonal(&RVec::from_vec(vec![1.0, 1e-14, 2.0]));
        let k = numerical_kernel(&d, 1e-10).unwrap();
        // exact rank of the diagonal is 2 at this threshold
        assert_eq!(k.dim(), 3 - 2);
        assert!((k.basis[0][1].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_of_wide_matrix_is_complete() {
        let m = RMat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = numerical_kernel(&m, 1e-12).unwrap();
        assert_eq!(k.dim(), 2);
        for v in &k.basis {
            assert!((&m * v).norm() < 1e-14);
        }
    }

    #[test]
    fn kernel_rejects_non_finite_and_negative_tol() {
        let mut m = RMat::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert_eq!(numerical_kernel(&m, 1e-9).unwrap_err(), LinalgError::NonFinite);
        assert!(matches!(
            numerical_kernel(&RMat::zeros(1, 1), -1.0),
            Err(LinalgError::NegativeTolerance(_))
        ));
    }

    #[test]
    fn complement_examples() {
        let e1 = Subspace::<f64> { ambient_dim: 3, basis: vec![RVec::from_vec(vec![1.0, 0.0, 0.0])] };
        let comp = orthonormal_complement(&e1);
        assert_eq!(comp.dim(), 2);
        for v in &comp.basis {
            assert!(v[0].abs() < 1e-15);
        }
        assert_eq!(orthonormal_complement(&Subspace::<f64>::full(4)).dim(), 0);

        let s = 0.5f64.sqrt();
        let diag = Subspace::<f64> { ambient_dim: 2, basis: vec![RVec::from_vec(vec![s, s])] };
        let c = orthonormal_complement(&diag);
        let expected = Subspace::<f64> { ambient_dim: 2, basis: vec![RVec::from_vec(vec![s, -s])] };
        assert!(max_principal_angle(&c, &expected) < 1e-14);
    }

    #[test]
    fn bilinear_gram_examples() {
        let v1 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let v2 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, -1.0)]);
        let g = bilinear_gram(&[v1.clone(), v2]).unwrap();
        assert!((g[(0, 0)]).norm() < 1e-15);
        assert!((g[(1, 1)]).norm() < 1e-15);
        assert!((g[(0, 1)] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((g[(1, 0)] - c(2.0, 0.0)).norm() < 1e-15);
        assert!(bilinear(&v1, &v1).norm() < 1e-15);

        let r = CVec::from_vec(vec![c(1.0, 0.0)]);
        assert_eq!(bilinear_gram(&[r]).unwrap()[(0, 0)], c(1.0, 0.0));

        let bad = bilinear_gram(&[CVec::zeros(2), CVec::zeros(3)]);
        assert!(matches!(bad, Err(LinalgError::DimensionMismatch { .. })));
    }

    #[test]
    fn least_squares_identity_and_consistent() {
        let a = RMat::identity(3, 3);
        let b = RVec::from_vec(vec![1.0, -2.0, 3.0]);
        let (x, r) = least_squares_solve(&a, &b).unwrap();
        assert!((x - &b).norm() < 1e-15 && r < 1e-15);

        let a = RMat::from_row_slice(4, 2, &[1.0, 2.0, 0.0, 1.0, 3.0, -1.0, 1.0, 1.0]);
        let x0 = RVec::from_vec(vec![0.3, -1.7]);
        let b = &a * &x0;
        let (x, r) = least_squares_solve(&a, &b).unwrap();
        assert!((x - x0).norm() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn least_squares_errors() {
        let a = RMat::zeros(0, 2);
        assert_eq!(least_squares_solve(&a, &RVec::zeros(0)).unwrap_err(), LinalgError::Empty);
        let mut a = RMat::identity(2, 2);
        a[(0, 0)] = f64::INFINITY;
        assert_eq!(least_squares_solve(&a, &RVec::zeros(2)).unwrap_err(), LinalgError::NonFinite);
    }

    #[test]
    fn complex_kernel_vectors_annihilate() {
        let m = CMat::from_row_slice(2, 3, &[c(1.0, 1.0), c(0.0, 2.0), c(1.0, 0.0), c(2.0, 2.0), c(0.0, 4.0), c(2.0, 0.0)]);
        let k = numerical_kernel(&m, 1e-10).unwrap();
        assert_eq!(k.dim(), 2);
        for v in &k.basis {
            assert!((&m * v).norm() < 1e-13);
        }
        assert!(k.orthonormality_defect() < 1e-13);
    }
}
