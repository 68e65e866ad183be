//! Pointwise second fundamental form data `(H, S)` and its algebra.
//!
//! `H[α]` is the Hermitian matrix `⟨H_{i j̄}, ξ_α⟩` and `S[α]` the complex symmetric matrix
//! `⟨S_{ij}, ξ_α⟩` in a unitary frame `e_i = (ε_i − √−1 ε_{n+i})/√2` of the type (1,0)
//! tangent space and an orthonormal normal frame `ξ_α`. Pairings on `N_ℂ` are complex
//! bilinear throughout.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{
    self, max_abs_or_one, numerical_kernel, numerical_range, orthonormal_complement, CMat, CVec,
    LinalgError, RMat, RVec, Subspace, C64,
};

/// Default relative tolerance for algebraic identities and rank decisions.
pub const TOL_ALG: f64 = 1e-9;

/// Hermitian / symmetric structure must hold to this relative accuracy on construction.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SffError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("symmetry conditions violated (r21={r21:.3e}, r22={r22:.3e}, r23={r23:.3e})")]
    SymmetryViolated { r21: f64, r22: f64, r23: f64 },
    #[error("normal vector must be nonzero")]
    ZeroNormal,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The pair `(H, S)` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondFundamentalFormData {
    n: usize,
    p: usize,
    h: Vec<CMat>,
    s: Vec<CMat>,
}

impl SecondFundamentalFormData {
    pub fn new(n: usize, p: usize, h: Vec<CMat>, s: Vec<CMat>) -> Result<Self, SffError> {
        if n == 0 || p == 0 {
            return Err(SffError::Invalid(format!("n and p must be positive (n={n}, p={p})")));
        }
        if h.len() != p || s.len() != p {
            return Err(SffError::Invalid(format!(
                "expected {p} matrices for H and S, got {} and {}",
                h.len(),
                s.len()
            )));
        }
        for m in h.iter().chain(s.iter()) {
            if m.shape() != (n, n) {
                return Err(SffError::Invalid(format!(
                    "matrix shape {:?}, expected ({n}, {n})",
                    m.shape()
                )));
            }
            linalg::check_finite(m)?;
        }
        let scale = max_abs_or_one(&h.iter().chain(s.iter()).collect::<Vec<_>>());
        for (a, m) in h.iter().enumerate() {
            let defect = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if defect > STRUCTURE_TOL * scale {
                return Err(SffError::Invalid(format!("H[{a}] is not Hermitian (defect {defect:.3e})")));
            }
        }
        for (a, m) in s.iter().enumerate() {
            let defect = (m - m.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if defect > STRUCTURE_TOL * scale {
                return Err(SffError::Invalid(format!("S[{a}] is not symmetric (defect {defect:.3e})")));
            }
        }
        Ok(Self { n, p, h, s })
    }

    pub fn zero(n: usize, p: usize) -> Self {
        Self { n, p, h: vec![CMat::zeros(n, n); p], s: vec![CMat::zeros(n, n); p] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn h(&self) -> &[CMat] {
        &self.h
    }

    pub fn s(&self) -> &[CMat] {
        &self.s
    }

    /// Largest absolute entry of all matrices (1 when everything vanishes).
    pub fn scale(&self) -> f64 {
        max_abs_or_one(&self.h.iter().chain(self.s.iter()).collect::<Vec<_>>())
    }

    /// `H_{i j̄}` as a vector of `N_ℂ`.
    pub fn h_value(&self, i: usize, j: usize) -> CVec {
        CVec::from_iterator(self.p, self.h.iter().map(|m| m[(i, j)]))
    }

    /// `S_{ij}` as a vector of `N_ℂ`.
    pub fn s_value(&self, i: usize, j: usize) -> CVec {
        CVec::from_iterator(self.p, self.s.iter().map(|m| m[(i, j)]))
    }

    /// All `S_{ij}` with `i ≤ j`.
    pub fn s_values(&self) -> Vec<CVec> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            for j in i..self.n {
                out.push(self.s_value(i, j));
            }
        }
        out
    }

    /// `H^η = Σ η_α H[α]` for a (possibly complex) normal vector.
    pub fn h_along(&self, eta: &CVec) -> CMat {
        combine(&self.h, eta, self.n)
    }

    pub fn s_along(&self, eta: &CVec) -> CMat {
        combine(&self.s, eta, self.n)
    }

    /// Real symmetric `2n × 2n` shape form `A^η` in the basis `ε_1..ε_{2n}`.
    pub fn shape_form(&self, eta: &RVec) -> Result<RMat, SffError> {
        if eta.len() != self.p {
            return Err(LinalgError::DimensionMismatch { expected: self.p, got: eta.len() }.into());
        }
        if eta.norm() == 0.0 {
            return Err(SffError::ZeroNormal);
        }
        let e = linalg::complexify(eta);
        Ok(assemble_shape_form(&self.h_along(&e), &self.s_along(&e)))
    }

    /// Shape forms `A^{ξ_α}` for the normal basis vectors.
    pub fn shape_forms(&self) -> Vec<RMat> {
        (0..self.p).map(|a| assemble_shape_form(&self.h[a], &self.s[a])).collect()
    }

    /// Re-expresses the data in the normal frame `ξ'_α = Σ_β q[(β, α)] ξ_β` (`q` orthogonal).
    pub fn rotate_normal(&self, q: &RMat) -> Self {
        let mix = |ms: &[CMat]| -> Vec<CMat> {
            (0..self.p)
                .map(|a| {
                    let mut acc = CMat::zeros(self.n, self.n);
                    for (b, m) in ms.iter().enumerate() {
                        acc += m * C64::new(q[(b, a)], 0.0);
                    }
                    acc
                })
                .collect()
        };
        Self { n: self.n, p: self.p, h: mix(&self.h), s: mix(&self.s) }
    }

    /// Re-expresses the data in the unitary frame `e'_i = Σ_k u[(k, i)] e_k`.
    pub fn change_frame(&self, u: &CMat) -> Self {
        let ut = u.transpose();
        let ubar = u.conjugate();
        Self {
            n: self.n,
            p: self.p,
            h: self.h.iter().map(|m| &ut * m * &ubar).collect(),
            s: self.s.iter().map(|m| &ut * m * u).collect(),
        }
    }

    /// Restriction to a subspace of the normal space given by an orthonormal real basis.
    pub fn restrict_normal(&self, basis: &[RVec]) -> Self {
        let h = basis.iter().map(|b| self.h_along(&linalg::complexify(b))).collect();
        let s = basis.iter().map(|b| self.s_along(&linalg::complexify(b))).collect();
        Self { n: self.n, p: basis.len(), h, s }
    }
}

fn combine(ms: &[CMat], eta: &CVec, n: usize) -> CMat {
    let mut acc = CMat::zeros(n, n);
    for (m, c) in ms.iter().zip(eta.iter()) {
        acc += m * *c;
    }
    acc
}

/// `[[Re H + Re S, Im H − Im S], [−Im H − Im S, Re H − Re S]]`.
pub fn assemble_shape_form(h: &CMat, s: &CMat) -> RMat {
    let n = h.nrows();
    let mut a = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let (hr, hi) = (h[(i, j)].re, h[(i, j)].im);
            let (sr, si) = (s[(i, j)].re, s[(i, j)].im);
            a[(i, j)] = hr + sr;
            a[(i, n + j)] = hi - si;
            a[(n + i, j)] = -hi - si;
            a[(n + i, n + j)] = hr - sr;
        }
    }
    a
}

/// Inverse of [`assemble_shape_form`] for a real symmetric `2n × 2n` matrix.
pub fn split_shape_form(a: &RMat) -> (CMat, CMat) {
    let n = a.nrows() / 2;
    let mut h = CMat::zeros(n, n);
    let mut s = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let a11 = a[(i, j)];
            let a12 = a[(i, n + j)];
            let a21 = a[(n + i, j)];
            let a22 = a[(n + i, n + j)];
            h[(i, j)] = C64::new(0.5 * (a11 + a22), 0.5 * (a12 - a21));
            s[(i, j)] = C64::new(0.5 * (a11 - a22), -0.5 * (a12 + a21));
        }
    }
    (h, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryResiduals {
    pub r21: f64,
    pub r22: f64,
    pub r23: f64,
}

impl SymmetryResiduals {
    pub fn max(&self) -> f64 {
        self.r21.max(self.r22).max(self.r23)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Relative floor for the per-block normalization scales of [`check_symmetry`].
pub const SCALE_FLOOR: f64 = 1e-6;

/// Max-norm residuals of the three quadratic symmetry conditions over all index
/// 4-tuples, each divided by the product of the largest entries of the two tensors involved.
pub fn check_symmetry(sff: &SecondFundamentalFormData) -> SymmetryResiduals {
    // A block at round-off level next to a large one carries no relative information;
    // its scale is floored at `SCALE_FLOOR` times the overall scale.
    let floor = SCALE_FLOOR * sff.scale();
    let hs = max_abs_or_one(&sff.h.iter().collect::<Vec<_>>()).max(floor);
    let ss = max_abs_or_one(&sff.s.iter().collect::<Vec<_>>()).max(floor);
    SymmetryResiduals {
        r21: quadratic_residual(&sff.h, &sff.h, sff.n) / (hs * hs),
        r22: quadratic_residual(&sff.h, &sff.s, sff.n) / (hs * ss),
        r23: quadratic_residual(&sff.s, &sff.s, sff.n) / (ss * ss),
    }
}

/// `max |Σ_α A[α]_{xy} B[α]_{zw} − A[α]_{zy} B[α]_{xw}|`.
fn quadratic_residual(a: &[CMat], b: &[CMat], n: usize) -> f64 {
    let mut worst = 0.0_f64;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for (am, bm) in a.iter().zip(b.iter()) {
                        acc += am[(x, y)] * bm[(z, w)] - am[(z, y)] * bm[(x, w)];
                    }
                    worst = worst.max(acc.norm());
                }
            }
        }
    }
    worst
}

/// Kernels and rank at a point.
#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    /// Common kernel `D ⊆ V` of `H` and `S`.
    pub d: Subspace<C64>,
    /// Relative nullity space `Δ ⊆ T`.
    pub delta: Subspace<f64>,
    pub nu: usize,
    pub nu0: usize,
    pub rank: usize,
    /// Largest principal angle between the realification of `D` and `Δ ∩ JΔ`.
    pub d_vs_delta0_angle: f64,
    /// Smallest retained and largest discarded relative singular values of the stacked map,
    /// used to flag borderline rank decisions.
    pub rank_margin: RankMargin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankMargin {
    pub smallest_kept: f64,
    pub largest_dropped: f64,
}

impl RankMargin {
    fn from_singular_values(s: &[f64], tol: f64) -> Self {
        let smax = s.first().copied().unwrap_or(0.0);
        let scale = if smax > 0.0 { smax } else { 1.0 };
        let rel: Vec<f64> = s.iter().map(|x| x / scale).collect();
        let smallest_kept = rel.iter().copied().filter(|&x| x > tol).fold(f64::INFINITY, f64::min);
        let largest_dropped = rel.iter().copied().filter(|&x| x <= tol).fold(0.0, f64::max);
        Self { smallest_kept, largest_dropped }
    }

    /// True when some singular value lies within a factor `factor` of the threshold.
    pub fn is_borderline(&self, tol: f64, factor: f64) -> bool {
        (self.smallest_kept.is_finite() && self.smallest_kept < tol * factor)
            || (self.largest_dropped > tol / factor)
    }
}

/// Stacks `Hᵀ[α]` and `S[α]` so that the kernel is `{X : H_{XȲ} = S_{XY} = 0 ∀ Y}`.
fn stacked_hs(sff: &SecondFundamentalFormData) -> CMat {
    let n = sff.n;
    let mut m = CMat::zeros(2 * sff.p * n, n);
    for a in 0..sff.p {
        m.view_mut((2 * a * n, 0), (n, n)).copy_from(&sff.h[a].transpose());
        m.view_mut(((2 * a + 1) * n, 0), (n, n)).copy_from(&sff.s[a]);
    }
    m
}

fn stacked_real(blocks: &[RMat]) -> RMat {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = RMat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        m.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    m
}

/// Real vectors `(Re x, Im x)` and `J(Re x, Im x)` spanning the realification of a complex
/// subspace of `V`.
pub fn realify_subspace(d: &Subspace<C64>, n: usize) -> Subspace<f64> {
    let j = linalg::standard_complex_structure(n);
    let mut vecs = Vec::new();
    for x in &d.basis {
        let mut u = RVec::zeros(2 * n);
        for i in 0..n {
            u[i] = x[i].re;
            u[n + i] = x[i].im;
        }
        vecs.push(&j * &u);
        vecs.push(u);
    }
    Subspace::span(2 * n, &vecs, 1e-10).expect("finite vectors")
}

pub fn kernel_report(sff: &SecondFundamentalFormData, tol: f64) -> Result<KernelReport, SffError> {
    let n = sff.n;
    let stacked = stacked_hs(sff);
    let d = numerical_kernel(&stacked, tol)?;
    let margin = RankMargin::from_singular_values(&linalg::singular_values(&stacked), tol);

    let forms = sff.shape_forms();
    let delta = numerical_kernel(&stacked_real(&forms), tol)?;

    let j = linalg::standard_complex_structure(n);
    let mut with_j: Vec<RMat> = forms.clone();
    with_j.extend(forms.iter().map(|a| a * &j));
    let delta0 = numerical_kernel(&stacked_real(&with_j), tol)?;
    let d_real = realify_subspace(&d, n);
    let angle = linalg::max_principal_angle(&d_real, &delta0);

    let nu0 = d.dim();
    Ok(KernelReport {
        nu: delta.dim(),
        nu0,
        rank: n - nu0,
        d,
        delta,
        d_vs_delta0_angle: angle,
        rank_margin: margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimalityReport {
    pub minimal: bool,
    /// Hermitian norm of the trace vector `Σ_i H_{i ī}`.
    pub trace_norm: f64,
    /// `(Σ_{ij} |H_{i j̄}|²)^{1/2}`.
    pub h_norm: f64,
}

/// Minimality through the trace of `H`; requires the symmetry conditions so that
/// `|Σ_i H_{iī}|² = Σ_{ij} |H_{ij̄}|²`.
pub fn is_minimal(sff: &SecondFundamentalFormData, tol: f64) -> Result<MinimalityReport, SffError> {
    let res = check_symmetry(sff);
    if !res.passes(tol) {
        return Err(SffError::SymmetryViolated { r21: res.r21, r22: res.r22, r23: res.r23 });
    }
    let scale = sff.scale();
    let trace_norm = trace_vector(sff).norm();
    let h_norm = h_norm(sff);
    let minimal = trace_norm <= tol * scale;
    if minimal {
        // |H|² = |tr H|² up to the symmetry residual (which is relative to |H|²).
        debug_assert!(h_norm * h_norm <= (tol * scale).powi(2) + res.r21 * 4.0 * scale * scale * (sff.n * sff.n) as f64 + 1e-300);
    }
    Ok(MinimalityReport { minimal, trace_norm, h_norm })
}

pub fn trace_vector(sff: &SecondFundamentalFormData) -> CVec {
    CVec::from_iterator(sff.p, sff.h.iter().map(|m| m.trace()))
}

pub fn h_norm(sff: &SecondFundamentalFormData) -> f64 {
    sff.h.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

/// `{η : A^η = 0}` as the kernel of the stacked map `η ↦ vec(A^η)`.
pub fn vanishing_normal_directions(
    sff: &SecondFundamentalFormData,
    tol: f64,
) -> Result<Subspace<f64>, SffError> {
    let forms = sff.shape_forms();
    let n2 = 4 * sff.n * sff.n;
    let m = RMat::from_fn(n2, sff.p, |r, a| forms[a].as_slice()[r]);
    Ok(numerical_kernel(&m, tol)?)
}

/// Splitting `N = N′ ⊕ N″` with `N′_ℂ` the image of `H`.
#[derive(Debug, Clone, Serialize)]
pub struct HImageSplit {
    pub n_prime: Subspace<f64>,
    pub n_dprime: Subspace<f64>,
    /// `S` components along the `N′` basis.
    #[serde(skip)]
    pub s_prime: Vec<CMat>,
    /// `S` components along the `N″` basis.
    #[serde(skip)]
    pub s_dprime: Vec<CMat>,
    pub p_prime: usize,
}

pub fn split_by_h_image(sff: &SecondFundamentalFormData, tol: f64) -> Result<HImageSplit, SffError> {
    let n = sff.n;
    let mut cols = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let v = sff.h_value(i, j);
            cols.push(v.map(|z| z.re));
            cols.push(v.map(|z| z.im));
        }
    }
    let m = RMat::from_columns(&cols);
    // Rank relative to the overall data scale so that a vanishing H gives N′ = 0.
    let hmax = m.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let n_prime = if hmax <= tol * sff.scale() {
        Subspace::zero(sff.p)
    } else {
        numerical_range(&m, tol)?
    };
    let n_dprime = orthonormal_complement(&n_prime);
    let s_prime = sff.restrict_normal(&n_prime.basis).s;
    let s_dprime = sff.restrict_normal(&n_dprime.basis).s;
    Ok(HImageSplit { p_prime: n_prime.dim(), n_prime, n_dprime, s_prime, s_dprime })
}

/// Complex dimension of `ker(H) ∩ ker(S′)` where `S′ = ⟨S, E′⟩` for an orthonormal basis of `E′`.
pub fn common_kernel_with_partial_s(
    sff: &SecondFundamentalFormData,
    e_prime: &[RVec],
    tol: f64,
) -> Result<Subspace<C64>, SffError> {
    let n = sff.n;
    let restricted = sff.restrict_normal(e_prime);
    let mut blocks: Vec<CMat> = sff.h.iter().map(|m| m.transpose()).collect();
    blocks.extend(restricted.s.iter().cloned());
    let rows = blocks.len() * n;
    let mut m = CMat::zeros(rows.max(1), n);
    for (k, b) in blocks.iter().enumerate() {
        m.view_mut((k * n, 0), (n, n)).copy_from(b);
    }
    // Scale-aware: an all-zero stack has the full kernel.
    let smax = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if smax <= tol * sff.scale() {
        return Ok(Subspace::full(n));
    }
    Ok(numerical_kernel(&m, tol)?)
}

// JSON: { "n", "p", "H": p × n × n × [re, im], "S": ... }

#[derive(Serialize, Deserialize)]
struct RawSff {
    n: usize,
    p: usize,
    #[serde(rename = "H")]
    h: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(rename = "S")]
    s: Vec<Vec<Vec<[f64; 2]>>>,
}

fn to_raw(ms: &[CMat]) -> Vec<Vec<Vec<[f64; 2]>>> {
    ms.iter()
        .map(|m| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect()
        })
        .collect()
}

fn from_raw(raw: &[Vec<Vec<[f64; 2]>>], n: usize) -> Result<Vec<CMat>, String> {
    raw.iter()
        .map(|m| {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(format!("expected {n}×{n} matrices"));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| C64::new(m[i][j][0], m[i][j][1])))
        })
        .collect()
}

impl Serialize for SecondFundamentalFormData {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawSff { n: self.n, p: self.p, h: to_raw(&self.h), s: to_raw(&self.s) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SecondFundamentalFormData {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = RawSff::deserialize(d)?;
        let h = from_raw(&raw.h, raw.n).map_err(D::Error::custom)?;
        let s = from_raw(&raw.s, raw.n).map_err(D::Error::custom)?;
        SecondFundamentalFormData::new(raw.n, raw.p, h, s).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance_gen::{gen_diag_normal_form, gen_holomorphic, gen_mixed, DiagParams};

    fn diag(vals: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&x| C64::new(x, 0.0))))
    }

    fn sorted_eigs(a: &RMat) -> Vec<f64> {
        let mut e: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|x, y| y.partial_cmp(x).unwrap());
        e
    }

    #[test]
    fn zero_instance_has_zero_residuals() {
        let z = SecondFundamentalFormData::zero(3, 2);
        let r = check_symmetry(&z);
        assert_eq!((r.r21, r.r22, r.r23), (0.0, 0.0, 0.0));
    }

    #[test]
    fn holomorphic_instance_passes_symmetry() {
        let sff = gen_holomorphic(4, 4, 11).unwrap();
        assert!(check_symmetry(&sff).max() < 1e-12);
    }

    #[test]
    fn perturbed_normal_form_fails_symmetry() {
        let sff = gen_diag_normal_form(5, DiagParams { a: 2.0, b: 1.0, delta: 1 }).unwrap();
        let mut s = sff.s().to_vec();
        s[0][(2, 2)] += C64::new(0.1, 0.0);
        let bad = SecondFundamentalFormData::new(5, 2, sff.h().to_vec(), s).unwrap();
        let r = check_symmetry(&bad);
        assert!(r.r22 > 0.01 || r.r23 > 0.01, "{r:?}");
    }

    #[test]
    fn shape_form_normal_form_eigenvalues() {
        let n = 2;
        let a = 2.0;
        let h = vec![diag(&[1.0, 0.0])];
        let s = vec![diag(&[a, 0.0])];
        let sff = SecondFundamentalFormData::new(n, 1, h, s).unwrap();
        let form = sff.shape_form(&RVec::from_vec(vec![1.0])).unwrap();
        assert!((form[(0, 0)] - (1.0 + a)).abs() < 1e-15);
        assert!((form[(n, n)] - (1.0 - a)).abs() < 1e-15);
        let e = sorted_eigs(&form);
        let expected = [3.0, 0.0, 0.0, -1.0];
        for (x, y) in e.iter().zip(expected.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_form_zero_and_errors() {
        let z = SecondFundamentalFormData::zero(2, 3);
        let f = z.shape_form(&RVec::from_vec(vec![0.3, 0.1, 2.0])).unwrap();
        assert_eq!(f, RMat::zeros(4, 4));
        assert_eq!(z.shape_form(&RVec::zeros(3)).unwrap_err(), SffError::ZeroNormal);
    }

    #[test]
    fn shape_form_split_roundtrip() {
        let sff = gen_mixed(5, 3, DiagParams { a: 0.7, b: 0.4, delta: 1 }).unwrap();
        for a in 0..sff.p() {
            let form = assemble_shape_form(&sff.h()[a], &sff.s()[a]);
            assert!((&form - form.transpose()).amax() < 1e-14);
            let (h, s) = split_shape_form(&form);
            assert!(linalg::max_modulus(&(h - &sff.h()[a])) < 1e-14);
            assert!(linalg::max_modulus(&(s - &sff.s()[a])) < 1e-14);
        }
    }

    #[test]
    fn kernel_report_of_zero_forms() {
        let k = kernel_report(&SecondFundamentalFormData::zero(3, 2), TOL_ALG).unwrap();
        assert_eq!((k.nu, k.nu0, k.rank), (6, 3, 0));
    }

    #[test]
    fn kernel_report_diag_normal_form() {
        let sff = gen_diag_normal_form(5, DiagParams { a: 2.0, b: 1.0, delta: 1 }).unwrap();
        let k = kernel_report(&sff, TOL_ALG).unwrap();
        assert_eq!(k.nu0, 3);
        assert_eq!(k.rank, 2);
        assert!(k.d_vs_delta0_angle < 1e-8);
        assert!(k.nu >= 2 * 5 - 2 * k.rank);
        // D = span{e3, e4, e5}
        for v in &k.d.basis {
            assert!(v[0].norm() < 1e-12 && v[1].norm() < 1e-12);
        }
    }

    #[test]
    fn kernel_report_holomorphic_full_rank() {
        let sff = gen_holomorphic(5, 4, 2).unwrap();
        let k = kernel_report(&sff, TOL_ALG).unwrap();
        assert_eq!(k.nu0, 0);
        assert_eq!(k.rank, 5);
    }

    #[test]
    fn minimality() {
        let z = SecondFundamentalFormData::zero(3, 2);
        let m = is_minimal(&z, TOL_ALG).unwrap();
        assert!(m.minimal && m.trace_norm == 0.0);

        let sff = gen_diag_normal_form(5, DiagParams { a: 0.0, b: 0.0, delta: 0 }).unwrap();
        let m = is_minimal(&sff, TOL_ALG).unwrap();
        assert!(!m.minimal);
        assert!((m.trace_norm - 1.0).abs() < 1e-15);

        assert!(is_minimal(&gen_holomorphic(5, 4, 9).unwrap(), TOL_ALG).unwrap().minimal);
    }

    #[test]
    fn minimality_requires_symmetry() {
        let h = vec![diag(&[1.0, 1.0])];
        let sff = SecondFundamentalFormData::new(2, 1, h, vec![CMat::zeros(2, 2)]).unwrap();
        assert!(matches!(is_minimal(&sff, TOL_ALG), Err(SffError::SymmetryViolated { .. })));
    }

    #[test]
    fn vanishing_directions() {
        let sff = gen_mixed(5, 4, DiagParams { a: 2.0, b: 1.0, delta: 1 }).unwrap();
        assert_eq!(vanishing_normal_directions(&sff, TOL_ALG).unwrap().dim(), 0);

        let mut h = sff.h().to_vec();
        let mut s = sff.s().to_vec();
        h[3] = CMat::zeros(5, 5);
        s[3] = CMat::zeros(5, 5);
        let cut = SecondFundamentalFormData::new(5, 4, h, s).unwrap();
        let v = vanishing_normal_directions(&cut, TOL_ALG).unwrap();
        assert_eq!(v.dim(), 1);
        assert!((v.basis[0][3].abs() - 1.0).abs() < 1e-12);

        assert_eq!(vanishing_normal_directions(&SecondFundamentalFormData::zero(2, 3), TOL_ALG).unwrap().dim(), 3);
    }

    #[test]
    fn h_image_split() {
        let z = SecondFundamentalFormData::zero(2, 3);
        let sp = split_by_h_image(&z, TOL_ALG).unwrap();
        assert_eq!((sp.p_prime, sp.n_dprime.dim()), (0, 3));

        let sff = gen_mixed(5, 1, DiagParams { a: 2.0, b: 1.0, delta: 1 }).unwrap();
        let sp = split_by_h_image(&sff, TOL_ALG).unwrap();
        assert_eq!(sp.p_prime, 2);
        let expected = Subspace::<f64>::span(4, &[RVec::from_vec(vec![1.0, 0.0, 0.0, 0.0]), RVec::from_vec(vec![0.0, 1.0, 0.0, 0.0])], 1e-12).unwrap();
        assert!(linalg::max_principal_angle(&sp.n_prime, &expected) < 1e-12);

        let h = vec![diag(&[1.0, 0.0]), CMat::zeros(2, 2)];
        let single = SecondFundamentalFormData::new(2, 2, h, vec![CMat::zeros(2, 2); 2]).unwrap();
        assert_eq!(split_by_h_image(&single, TOL_ALG).unwrap().p_prime, 1);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let sff = gen_holomorphic(3, 2, 5).unwrap();
        let text = serde_json::to_string(&sff).unwrap();
        let back: SecondFundamentalFormData = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sff);
        let bad = r#"{"n":1,"p":1,"H":[[[[0.0,1.0]]]],"S":[[[[0.0,0.0]]]]}"#;
        assert!(serde_json::from_str::<SecondFundamentalFormData>(bad).is_err());
    }
}
