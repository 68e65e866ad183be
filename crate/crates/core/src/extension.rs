//! Developable rulings, the extension `h(z, t) = f(z) + t₁η₁(z) + t₂η₂(z)` and its
//! Kähler verification.
//!
//! Frames at a point are *adapted* when the normal frame is `(ξ₁, ξ₂, ξ₃, ξ₄)` with
//! `ξ₁, ξ₂ ∈ E′` and `ξ₃, ξ₄ = Jξ₃ ∈ E`. The ruling directions are `η_i = ξ_{2+i} − v_i` with
//! `⟨A_{ξ_j} v_i, u⟩ = −φ_{j,2+i}(u)` for all tangent `u`, solved in the minimum-norm
//! (canonical) gauge `v_i ⊥ ker A_{ξ₁} ∩ ker A_{ξ₂}`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use crate::complex_part::{find_complex_part, find_complex_part_at, AlmostComplexPart, Classification, ComplexPartError};
use crate::immersion::{pointwise_sff, sample_point_seeded, ImmersionError, ImmersionModel, SampledPoint};
use crate::linalg::{self, least_squares_solve, numerical_kernel, CVec, RMat, RVec, Subspace, C64, I};
use crate::sff::{is_minimal, SecondFundamentalFormData, SffError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtensionError {
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("no developable ruling at numerical precision (residual {0:.3e})")]
    NoRuling(f64),
    #[error("embedding condition not achieved after {0} halvings of the t radius")]
    NotEmbedded(usize),
    #[error("stratum undeterminable: {0}")]
    Borderline(String),
    #[error(transparent)]
    Immersion(#[from] ImmersionError),
    #[error(transparent)]
    ComplexPart(#[from] ComplexPartError),
    #[error(transparent)]
    Sff(#[from] SffError),
}

/// A sampled point re-expressed in an adapted normal frame.
#[derive(Debug, Clone)]
pub struct AdaptedPoint {
    /// Point with normal frame `(ξ₁, ξ₂, ξ₃, ξ₄)`.
    pub point: SampledPoint,
    /// `E` and `J` in the adapted frame (`E = span{ξ₃, ξ₄}`).
    pub part: AlmostComplexPart,
    /// Columns: the adapted frame in the coordinates of the original normal frame.
    pub q: RMat,
}

/// Builds an adapted frame. With `reference` (ambient vectors `ξ₁…ξ₄` at a nearby point) the
/// frame is the one closest to it: `ξ₁, ξ₂` orthonormalized projections onto `E′`, `ξ₃` the
/// normalized projection onto `E`. Without it, the raw normal axes are projected instead.
pub fn adapt_frame(
    point: &SampledPoint,
    part: &AlmostComplexPart,
    reference: Option<&[RVec]>,
) -> Result<AdaptedPoint, ExtensionError> {
    if part.classification != Classification::Plane || point.p() != 4 || part.e.dim() != 2 {
        return Err(ExtensionError::Precondition("an adapted frame needs p = 4 and a plane complex part".into()));
    }
    let p = point.p();
    let refs: Vec<RVec> = match reference {
        Some(r) => r.iter().map(|v| RVec::from_fn(p, |a, _| point.normal_frame[a].dot(v))).collect(),
        None => (0..p).map(|a| RVec::from_fn(p, |b, _| if a == b { 1.0 } else { 0.0 })).collect(),
    };
    let mut e_prime: Vec<RVec> = Vec::new();
    for r in &refs {
        if e_prime.len() == 2 {
            break;
        }
        let proj = part.e_prime.project(r);
        if let Some(v) = linalg::gram_schmidt_step(&e_prime, &proj, 1e-6) {
            e_prime.push(v);
        }
    }
    if e_prime.len() != 2 {
        return Err(ExtensionError::Precondition("could not orthonormalize E′ frame".into()));
    }
    let jn = part.j_on_normal();
    let seed3 = if reference.is_some() { refs[2].clone() } else { part.e.basis[0].clone() };
    let mut xi3 = part.e.project(&seed3);
    if xi3.norm() < 1e-6 {
        xi3 = part.e.basis[0].clone();
    }
    let xi3 = xi3.normalize();
    let xi4 = &jn * &xi3;
    let q = RMat::from_columns(&[e_prime[0].clone(), e_prime[1].clone(), xi3, xi4]);
    let adapted = point.rotate_normal(&q);
    let e = Subspace { ambient_dim: p, basis: vec![unit(p, 2), unit(p, 3)] };
    let e_prime_sub = Subspace { ambient_dim: p, basis: vec![unit(p, 0), unit(p, 1)] };
    let mut j = RMat::zeros(2, 2);
    j[(1, 0)] = 1.0;
    j[(0, 1)] = -1.0;
    let residuals = crate::complex_part::verify_acs(&adapted.sff, &e, &j);
    let new_part = AlmostComplexPart { e, e_prime: e_prime_sub, j, residuals, ..part.clone() };
    Ok(AdaptedPoint { point: adapted, part: new_part, q })
}

fn unit(p: usize, k: usize) -> RVec {
    let mut v = RVec::zeros(p);
    v[k] = 1.0;
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct DevelopableRuling {
    /// `v₁, v₂` in the orthonormal tangent frame `ε`.
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub v1: RVec,
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub v2: RVec,
    /// Ambient ruling directions `η_i = ξ_{2+i} − v_i`.
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub eta1: RVec,
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub eta2: RVec,
    /// `ker A_{ξ₁} ∩ ker A_{ξ₂}` in the frame `ε`.
    pub gauge_space: Subspace<f64>,
    pub residual: f64,
    /// Smallest sine of the angle between `span{η₁, η₂}` and `T`.
    pub transversality: f64,
    /// `‖v₂ − J v₁‖` (relevant in the minimal case).
    pub j_defect: f64,
}

/// Stacked `[A_{ξ₁}; A_{ξ₂}]` and right-hand sides `−φ_{j,2+i}(ε_u)` for `i = 1, 2`.
fn ruling_system(adapted: &SampledPoint) -> (RMat, [RVec; 2]) {
    let d = 2 * adapted.n();
    let forms = &adapted.shape_forms;
    let mut a = RMat::zeros(2 * d, d);
    a.view_mut((0, 0), (d, d)).copy_from(&forms[0]);
    a.view_mut((d, 0), (d, d)).copy_from(&forms[1]);
    let rhs = [2usize, 3].map(|col| {
        RVec::from_fn(2 * d, |r, _| {
            let (j, u) = (r / d, r % d);
            -adapted.normal_connection[u][(j, col)]
        })
    });
    (a, rhs)
}

/// Residual of the ruling equations for given `v₁, v₂` (frame `ε`).
pub fn ruling_residual(adapted: &SampledPoint, v1: &RVec, v2: &RVec) -> f64 {
    let (a, rhs) = ruling_system(adapted);
    (&a * v1 - &rhs[0]).norm().max((&a * v2 - &rhs[1]).norm())
}

/// Solves the ruling system by minimum-norm least squares.
pub fn solve_ruling(adapted: &SampledPoint, tol_alg: f64, tol_geo: f64) -> Result<DevelopableRuling, ExtensionError> {
    let (a, rhs) = ruling_system(adapted);
    let (v1, r1) = least_squares_solve(&a, &rhs[0]).map_err(SffError::from)?;
    let (v2, r2) = least_squares_solve(&a, &rhs[1]).map_err(SffError::from)?;
    let residual = r1.max(r2);
    if residual > tol_geo {
        return Err(ExtensionError::NoRuling(residual));
    }
    let gauge_space = numerical_kernel(&a, tol_alg).map_err(SffError::from)?;
    let t = &adapted.tangent_frame;
    let eta1 = &adapted.normal_frame[2] - t * &v1;
    let eta2 = &adapted.normal_frame[3] - t * &v2;
    let transversality = transversality(t, &eta1, &eta2);
    let j = linalg::standard_complex_structure(adapted.n());
    let j_defect = (&v2 - &j * &v1).norm();
    Ok(DevelopableRuling { v1, v2, eta1, eta2, gauge_space, residual, transversality, j_defect })
}

fn transversality(tangent: &RMat, eta1: &RVec, eta2: &RVec) -> f64 {
    let Ok(plane) = Subspace::span(eta1.len(), &[eta1.clone(), eta2.clone()], 1e-12) else { return 0.0 };
    if plane.dim() < 2 {
        return 0.0;
    }
    let pm = plane.matrix();
    let normal_part = &pm - tangent * (tangent.transpose() * &pm);
    linalg::singular_values(&normal_part).last().copied().unwrap_or(0.0)
}

/// Minimality-condition quantity `‖A_{ξ₁} d‖ + ‖A_{ξ₂} d‖` for `d = v₂ − J v₁`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinimalityCondition {
    pub holds: bool,
    pub norm: f64,
}

pub fn minimality_condition(
    adapted: &SampledPoint,
    v1: &RVec,
    v2: &RVec,
    tol: f64,
) -> Result<MinimalityCondition, ExtensionError> {
    let m = is_minimal(&adapted.sff, tol)?;
    if !m.minimal {
        return Err(ExtensionError::Precondition("point is not minimal".into()));
    }
    let j = linalg::standard_complex_structure(adapted.n());
    let d = v2 - &j * v1;
    let norm = (&adapted.shape_forms[0] * &d).norm() + (&adapted.shape_forms[1] * &d).norm();
    let scale = adapted.sff.scale() * (v1.norm() + v2.norm()).max(1.0);
    Ok(MinimalityCondition { holds: norm <= tol * scale, norm })
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimalDiagnostics {
    /// Codimension of `ker S′` in `V`.
    pub stratum: usize,
    /// Max residual of `Σ_α ψ^α_i ∧ σ_α = 0`.
    pub wedge_residual: f64,
    /// `λ` with `S² = λ S¹` in the codimension-one stratum.
    #[serde(serialize_with = "ser_opt_c64")]
    pub lambda: Option<C64>,
    /// `‖σ₂ − λ σ₁‖` in the codimension-one stratum.
    pub lambda_residual: Option<f64>,
    /// `max |σ_α(X) − A_{ξ_α}(w, X)|` with `w = −v₁ + √−1 v₂` from the canonical ruling.
    pub sigma_w_residual: f64,
}

fn ser_opt_c64<S: serde::Serializer>(v: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(z) => s.serialize_some(&[z.re, z.im]),
        None => s.serialize_none(),
    }
}

/// `σ_α = φ_{α3} − √−1 φ_{α4}` evaluated on the complex frame vectors `(e_1…e_n, ē_1…ē_n)`.
fn sigma_forms(adapted: &SampledPoint) -> [CVec; 2] {
    let n = adapted.n();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    [0usize, 1].map(|al| {
        let on_eps = |a: usize| C64::new(adapted.normal_connection[a][(al, 2)], -adapted.normal_connection[a][(al, 3)]);
        CVec::from_fn(2 * n, |k, _| {
            let i = k % n;
            let sign = if k < n { -1.0 } else { 1.0 };
            (on_eps(i) + I * sign * on_eps(n + i)) * s2
        })
    })
}

/// Checks the structure equations of the minimal case on the `σ` forms.
pub fn minimal_case_diagnostics(adapted: &AdaptedPoint, tol: f64) -> Result<MinimalDiagnostics, ExtensionError> {
    let pt = &adapted.point;
    let n = pt.n();
    let m = is_minimal(&pt.sff, tol)?;
    if !m.minimal {
        return Err(ExtensionError::Precondition("point is not minimal".into()));
    }
    let s = pt.sff.s();
    // ker S′ from the stacked E′ components.
    let mut stacked = crate::linalg::CMat::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&s[0]);
    stacked.view_mut((n, 0), (n, n)).copy_from(&s[1]);
    let sv = linalg::singular_values(&stacked);
    let smax = sv.first().copied().unwrap_or(0.0).max(1e-300);
    if sv.iter().any(|x| x / smax > tol / 10.0 && x / smax <= tol * 10.0) {
        return Err(ExtensionError::Borderline("singular value of S′ near threshold".into()));
    }
    let stratum = sv.iter().filter(|x| *x / smax > tol).count();
    let sigma = sigma_forms(pt);
    // ψ^α_i(e_j) = S^α_{ij}, ψ(ē_j) = 0.
    let psi = |al: usize, i: usize, k: usize| if k < n { s[al][(i, k)] } else { C64::new(0.0, 0.0) };
    let mut wedge = 0.0_f64;
    for i in 0..n {
        for x in 0..2 * n {
            for y in 0..2 * n {
                let mut acc = C64::new(0.0, 0.0);
                for al in 0..2 {
                    acc += psi(al, i, x) * sigma[al][y] - psi(al, i, y) * sigma[al][x];
                }
                wedge = wedge.max(acc.norm());
            }
        }
    }
    let (lambda, lambda_residual) = if stratum == 1 {
        let num: C64 = s[0].iter().zip(s[1].iter()).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = s[0].iter().map(|a| a.norm_sqr()).sum();
        if den == 0.0 {
            return Err(ExtensionError::Borderline("S¹ vanishes in the codimension-one stratum".into()));
        }
        let lambda = num / den;
        if (lambda * lambda + 1.0).norm() < 1e-6 {
            return Err(ExtensionError::Precondition("λ = ±√−1 is excluded".into()));
        }
        let res = (&sigma[1] - &sigma[0] * lambda).norm();
        (Some(lambda), Some(res))
    } else {
        (None, None)
    };
    let ruling = solve_ruling(pt, tol, f64::INFINITY)?;
    let w = CVec::from_fn(2 * n, |k, _| C64::new(-ruling.v1[k], ruling.v2[k]));
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut sigma_w_residual = 0.0_f64;
    for al in 0..2 {
        let aw = pt.shape_forms[al].map(|x| C64::new(x, 0.0)).transpose() * &w;
        for k in 0..2 * n {
            let j = k % n;
            let sign = if k < n { -1.0 } else { 1.0 };
            let val = (aw[j] + I * sign * aw[n + j]) * s2;
            sigma_w_residual = sigma_w_residual.max((sigma[al][k] - val).norm());
        }
    }
    Ok(MinimalDiagnostics { stratum, wedge_residual: wedge, lambda, lambda_residual, sigma_w_residual })
}

/// Synthetic minimal point with `E = span{ξ₃, ξ₄}`: `S′` in the stratum `k` (2: diagonal normal
/// form, 1: `S² = λ S¹`), a holomorphic part on `E`, and normal connection chosen so that the
/// ruling system is solved by `v₁ = −Re w`, `v₂ = Im w` for a type-(1,0) vector
/// `w ∈ span{e₁, e₂}`. The remaining connection blocks are random.
pub fn synthetic_minimal_point(n: usize, seed: u64, stratum: usize, lambda: C64) -> Result<AdaptedPoint, ExtensionError> {
    use crate::instance_gen::{gen_minimal_rank_one, gen_mixed_minimal, random_complex, rng, DiagParams};
    let sff = match stratum {
        2 => gen_mixed_minimal(n, seed, DiagParams { a: 1.3, b: 0.8, delta: 0 }),
        1 => gen_minimal_rank_one(n, seed, 1.1, lambda),
        k => return Err(ExtensionError::Precondition(format!("stratum must be 1 or 2, got {k}"))),
    }
    .map_err(|e| ExtensionError::Precondition(e.to_string()))?;
    let mut r = rng(seed ^ 0x5eed);
    let d = 2 * n;
    let p = 4;
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let (w1, w2) = (random_complex(&mut r), random_complex(&mut r));
    // w = w₁e₁ + w₂e₂ in the frame ε.
    let mut w = CVec::zeros(d);
    for (k, wk) in [(0usize, w1), (1, w2)] {
        w[k] += wk * s2;
        w[n + k] += wk * (-I) * s2;
    }
    let v1 = -w.map(|z| z.re);
    let v2 = w.map(|z| z.im);
    let forms = sff.shape_forms();
    let mut conn = Vec::with_capacity(d);
    for u in 0..d {
        let mut m = RMat::zeros(p, p);
        for (i, v) in [(0usize, &v1), (1, &v2)] {
            for j in 0..2 {
                let val = -(&forms[j] * v)[u];
                m[(j, 2 + i)] = val;
                m[(2 + i, j)] = -val;
            }
        }
        let x: f64 = rand::Rng::gen_range(&mut r, -1.0..1.0);
        let y: f64 = rand::Rng::gen_range(&mut r, -1.0..1.0);
        m[(0, 1)] = x;
        m[(1, 0)] = -x;
        m[(2, 3)] = y;
        m[(3, 2)] = -y;
        conn.push(m);
    }
    let point = synthetic_point(sff, conn);
    let part = find_complex_part(&point.sff, 1e-9)?;
    // E is exactly span{ξ₃, ξ₄}; adapt against the constructed frame so it is kept.
    let reference = point.normal_frame.clone();
    adapt_frame(&point, &part, Some(&reference))
}

/// Wraps algebraic data as a point of the flat embedding `ℝ^{2n} ⊂ ℝ^{2n+p}`.
pub fn synthetic_point(sff: SecondFundamentalFormData, normal_connection: Vec<RMat>) -> SampledPoint {
    let (n, p) = (sff.n(), sff.p());
    let d = 2 * n;
    let amb = d + p;
    let tangent = RMat::from_fn(amb, d, |r, c| if r == c { 1.0 } else { 0.0 });
    SampledPoint {
        z: RVec::zeros(d),
        f_value: RVec::zeros(amb),
        tangent_frame: tangent,
        chart_frame: RMat::identity(d, d),
        normal_frame: (0..p).map(|a| unit(amb, d + a)).collect(),
        shape_forms: sff.shape_forms(),
        sff,
        normal_connection,
        metric: RMat::identity(d, d),
        fd_step: 0.0,
    }
}

/// Ambient matrix of `J_T ⊕ J_E` at an adapted point (zero on `E′`).
pub fn ambient_complex_structure(adapted: &SampledPoint) -> RMat {
    let n = adapted.n();
    let t = &adapted.tangent_frame;
    let mut j = RMat::zeros(t.nrows(), t.nrows());
    for i in 0..n {
        let (a, b) = (t.column(i), t.column(n + i));
        j += b * a.transpose() - a * b.transpose();
    }
    let (x3, x4) = (&adapted.normal_frame[2], &adapted.normal_frame[3]);
    j += x4 * x3.transpose() - x3 * x4.transpose();
    j
}

/// Replaces the `E`–`E′` blocks of the normal connection of an adapted point by those of frame
/// fields that stay in `E` and `E′`: `⟨∇_u ξ_e, ξ_j⟩ = ⟨(∂_u P_E) ξ_e, ξ_j⟩`, with `P_E` the
/// ambient projector onto the complex part, differenced over neighbouring chart points.
/// Frames obtained by Gram–Schmidt do not stay in `E`, and that block is not tensorial.
pub fn with_subbundle_connection(
    model: &ImmersionModel,
    adapted: &AdaptedPoint,
    tol_alg: f64,
) -> Result<AdaptedPoint, ExtensionError> {
    let pt = &adapted.point;
    let (d, p) = (2 * pt.n(), pt.p());
    let h = pt.fd_step;
    let dim_e = adapted.part.e.dim();
    let projector = |z: &RVec| -> Result<RMat, ExtensionError> {
        let (normal, sff) = pointwise_sff(model, z, Some(&pt.normal_frame))?;
        let part = find_complex_part_at(&sff, tol_alg)?;
        if part.e.dim() != dim_e {
            return Err(ExtensionError::Precondition("complex part changes dimension near the point".into()));
        }
        let nm = RMat::from_columns(&normal);
        let em = &nm * part.e.matrix();
        Ok(&em * em.transpose())
    };
    let mut dp = Vec::with_capacity(d);
    for k in 0..d {
        let (zp, zm) = shifted(&pt.z, k, h);
        dp.push((projector(&zp)? - projector(&zm)?) / (2.0 * h));
    }
    let mut out = adapted.clone();
    for a in 0..d {
        let mut dpa = RMat::zeros(dp[0].nrows(), dp[0].ncols());
        for (k, m) in dp.iter().enumerate() {
            dpa += m * pt.chart_frame[(k, a)];
        }
        let m = &mut out.point.normal_connection[a];
        for e in p - dim_e..p {
            for j in 0..p - dim_e {
                let val = pt.normal_frame[j].dot(&(&dpa * &pt.normal_frame[e]));
                m[(e, j)] = val;
                m[(j, e)] = -val;
            }
        }
    }
    Ok(out)
}

/// Samples `z`, finds the complex part and returns the adapted point with the subbundle
/// connection (plane case) or the constant ruling frame (full case).
pub fn adapted_sample(
    model: &ImmersionModel,
    z: &RVec,
    fd_step: f64,
    seed: Option<&[RVec]>,
    reference: Option<&[RVec]>,
    tol_alg: f64,
) -> Result<AdaptedPoint, ExtensionError> {
    let point = sample_point_seeded(model, z, fd_step, seed)?;
    let part = find_complex_part(&point.sff, tol_alg)?;
    let adapted = adapt_frame(&point, &part, reference)?;
    with_subbundle_connection(model, &adapted, tol_alg)
}

/// Ruling for a full complex part (`E′ = 0`, no ruling equations): the constant ambient
/// direction `c` and its rotation, `η₁ = c/|c_N|`, `η₂ = ξ₄ − J_T v₁` with `ξ₃ = c_N/|c_N|`,
/// `ξ₄ = Jξ₃`, `v₁ = −c_T/|c_N|`. For a holomorphic submanifold this is `M + ℂc`.
pub fn constant_ruling(
    point: &SampledPoint,
    part: &AlmostComplexPart,
    c: &RVec,
) -> Result<(AdaptedPoint, DevelopableRuling), ExtensionError> {
    let p = point.p();
    if part.classification != Classification::Full || p != 4 {
        return Err(ExtensionError::Precondition("constant ruling needs a full complex part with p = 4".into()));
    }
    let c_n = RVec::from_fn(p, |a, _| point.normal_frame[a].dot(c));
    let s = c_n.norm();
    if s < 1e-3 * c.norm() {
        return Err(ExtensionError::Precondition("anchor direction is tangent".into()));
    }
    let jn = part.j_on_normal();
    let x3 = &c_n / s;
    let x4 = &jn * &x3;
    let mut rest: Vec<RVec> = vec![x3.clone(), x4.clone()];
    for k in 0..p {
        if rest.len() == 4 {
            break;
        }
        if let Some(v) = linalg::gram_schmidt_step(&rest, &unit(p, k), 0.3) {
            rest.push(v);
        }
    }
    let q = RMat::from_columns(&[rest[2].clone(), rest[3].clone(), x3, x4]);
    let adapted = point.rotate_normal(&q);
    let j = q.transpose() * &jn * &q;
    let e = Subspace::full(p);
    let residuals = crate::complex_part::verify_acs(&adapted.sff, &e, &j);
    let new_part = AlmostComplexPart { e, j, residuals, ..part.clone() };
    let n = point.n();
    let v1 = -(point.tangent_frame.transpose() * c) / s;
    let v2 = linalg::standard_complex_structure(n) * &v1;
    let t = &adapted.tangent_frame;
    let eta1 = &adapted.normal_frame[2] - t * &v1;
    let eta2 = &adapted.normal_frame[3] - t * &v2;
    let transversality = transversality(t, &eta1, &eta2);
    let ruling = DevelopableRuling {
        v1,
        v2,
        eta1,
        eta2,
        gauge_space: Subspace::zero(2 * n),
        residual: 0.0,
        transversality,
        j_defect: 0.0,
    };
    Ok((AdaptedPoint { point: adapted, part: new_part, q }, ruling))
}

/// Ruling data at one chart point.
#[derive(Debug, Clone)]
pub struct RulingAt {
    pub adapted: AdaptedPoint,
    pub ruling: DevelopableRuling,
    /// `J_T ⊕ J_E` in ambient coordinates.
    pub j_ambient: RMat,
}

/// A ruling field over a chart neighbourhood, with frames seeded from one base point.
pub struct RulingField<'a> {
    pub model: &'a ImmersionModel,
    pub fd_step: f64,
    pub tol_alg: f64,
    pub tol_geo: f64,
    seed_normal: Vec<RVec>,
    reference: Vec<RVec>,
    cache: Mutex<HashMap<Vec<u64>, RulingAt>>,
}

impl<'a> RulingField<'a> {
    pub fn new(model: &'a ImmersionModel, base: &RVec, fd_step: f64, tol_alg: f64, tol_geo: f64) -> Result<Self, ExtensionError> {
        let point = sample_point_seeded(model, base, fd_step, None)?;
        let part = find_complex_part(&point.sff, tol_alg)?;
        let reference = match part.classification {
            Classification::Full => point.normal_frame.clone(),
            _ => adapt_frame(&point, &part, None)?.point.normal_frame,
        };
        Ok(Self {
            model,
            fd_step,
            tol_alg,
            tol_geo,
            seed_normal: point.normal_frame.clone(),
            reference,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn at(&self, z: &RVec) -> Result<RulingAt, ExtensionError> {
        let key: Vec<u64> = z.iter().map(|x| x.to_bits()).collect();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let point = sample_point_seeded(self.model, z, self.fd_step, Some(&self.seed_normal))?;
        let part = find_complex_part(&point.sff, self.tol_alg)?;
        let (adapted, ruling) = match part.classification {
            Classification::Plane => {
                let adapted = adapt_frame(&point, &part, Some(&self.reference))?;
                let adapted = with_subbundle_connection(self.model, &adapted, self.tol_alg)?;
                let ruling = solve_ruling(&adapted.point, self.tol_alg, self.tol_geo)?;
                (adapted, ruling)
            }
            Classification::Full => constant_ruling(&point, &part, &self.reference[2])?,
            Classification::Empty => {
                return Err(ExtensionError::Precondition("normal space has no complex part".into()))
            }
        };
        let j_ambient = ambient_complex_structure(&adapted.point);
        let out = RulingAt { adapted, ruling, j_ambient };
        self.cache.lock().expect("cache lock").insert(key, out.clone());
        Ok(out)
    }

    fn eta(&self, z: &RVec) -> Result<[RVec; 2], ExtensionError> {
        let r = self.at(z)?;
        Ok([r.ruling.eta1, r.ruling.eta2])
    }
}

/// Patch layout: `count × count` chart points on axes `(axis_a, axis_b)` around `center` with
/// spacing `spacing`, times a `t_count × t_count` grid on `[−t_radius, t_radius]²`.
#[derive(Debug, Clone, Serialize)]
pub struct PatchGrid {
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub center: RVec,
    pub axis_a: usize,
    pub axis_b: usize,
    pub count: usize,
    pub spacing: f64,
    pub t_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PatchSample {
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub z: RVec,
    pub t: [f64; 2],
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub h: RVec,
    pub min_singular_value: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionPatch {
    pub grid: PatchGrid,
    pub t_radius: f64,
    pub halvings: usize,
    pub samples: Vec<PatchSample>,
    /// `max |h(z, 0) − f(z)|`.
    pub factorization: f64,
    /// Largest principal angle between `span(dh)` at `t = 0` and `T ⊕ E`.
    pub tangent_angle: f64,
    pub max_condition: f64,
    pub max_ruling_residual: f64,
    #[serde(skip)]
    pub chart_points: Vec<RVec>,
}

pub const CONDITION_BOUND: f64 = 1e3;
/// `max |h(z, 0) − f(z)|` bound.
pub const FACTORIZATION_TOL: f64 = 1e-14;
/// Principal-angle bound between `span(dh)` at `t = 0` and `T ⊕ E`.
pub const TANGENT_ANGLE_TOL: f64 = 1e-8;
/// Bound on `‖J_T A_{ξ₃} − A_{ξ₄}‖`, an algebraic identity on extracted data.
pub const ALGEBRAIC_KAHLER_TOL: f64 = 1e-10;
/// The finite-difference Kähler residual is accepted at this multiple of the geometric tolerance.
pub const KAHLER_RESIDUAL_FACTOR: f64 = 10.0;

fn jacobian_h(field: &RulingField, z: &RVec, t: [f64; 2]) -> Result<RMat, ExtensionError> {
    let d = z.len();
    let jf = field.model.jacobian(z);
    let mut cols = Vec::with_capacity(d + 2);
    let dz = field.fd_step;
    for k in 0..d {
        let mut col = jf.column(k).into_owned();
        if t != [0.0, 0.0] {
            let (zp, zm) = shifted(z, k, dz);
            let ep = field.eta(&zp)?;
            let em = field.eta(&zm)?;
            col += (&ep[0] - &em[0]) * (t[0] / (2.0 * dz)) + (&ep[1] - &em[1]) * (t[1] / (2.0 * dz));
        }
        cols.push(col);
    }
    let e = field.eta(z)?;
    cols.push(e[0].clone());
    cols.push(e[1].clone());
    Ok(RMat::from_columns(&cols))
}

fn shifted(z: &RVec, k: usize, h: f64) -> (RVec, RVec) {
    let mut zp = z.clone();
    zp[k] += h;
    let mut zm = z.clone();
    zm[k] -= h;
    (zp, zm)
}

fn t_values(t_count: usize, radius: f64) -> Vec<f64> {
    if t_count <= 1 {
        return vec![0.0];
    }
    (0..t_count).map(|i| -radius + 2.0 * radius * i as f64 / (t_count - 1) as f64).collect()
}

/// Samples `h(z, t) = f(z) + t₁η₁(z) + t₂η₂(z)` and certifies the embedding condition by the
/// sampled Jacobian condition number, halving `t_radius` up to 8 times.
pub fn build_extension(field: &RulingField, grid: PatchGrid, t_radius: f64) -> Result<ExtensionPatch, ExtensionError> {
    if !(t_radius > 0.0) {
        return Err(ExtensionError::Precondition(format!("t_radius must be positive, got {t_radius}")));
    }
    let d = grid.center.len();
    if grid.axis_a >= d || grid.axis_b >= d || grid.axis_a == grid.axis_b || grid.count == 0 {
        return Err(ExtensionError::Precondition("invalid patch grid axes".into()));
    }
    let offsets: Vec<f64> = (0..grid.count).map(|i| (i as f64 - (grid.count - 1) as f64 / 2.0) * grid.spacing).collect();
    let mut chart_points = Vec::new();
    for &oa in &offsets {
        for &ob in &offsets {
            let mut z = grid.center.clone();
            z[grid.axis_a] += oa;
            z[grid.axis_b] += ob;
            chart_points.push(z);
        }
    }
    let mut max_ruling_residual = 0.0_f64;
    let mut factorization = 0.0_f64;
    let mut tangent_angle = 0.0_f64;
    for z in &chart_points {
        let r = field.at(z)?;
        max_ruling_residual = max_ruling_residual.max(r.ruling.residual);
        let jac0 = jacobian_h(field, z, [0.0, 0.0])?;
        let span = Subspace::span(jac0.nrows(), &jac0.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>(), 1e-12)
            .map_err(SffError::from)?;
        let pt = &r.adapted.point;
        let mut p_basis: Vec<RVec> = pt.tangent_frame.column_iter().map(|c| c.into_owned()).collect();
        p_basis.push(pt.normal_frame[2].clone());
        p_basis.push(pt.normal_frame[3].clone());
        let p_sub = Subspace::span(jac0.nrows(), &p_basis, 1e-12).map_err(SffError::from)?;
        tangent_angle = tangent_angle.max(linalg::max_principal_angle(&span, &p_sub));
    }
    let mut radius = t_radius;
    for halvings in 0..=8 {
        let ts = t_values(grid.t_count, radius);
        let mut samples = Vec::new();
        let mut max_condition = 0.0_f64;
        for z in &chart_points {
            let f = field.model.value(z);
            let e = field.eta(z)?;
            for &t1 in &ts {
                for &t2 in &ts {
                    let h = &f + &e[0] * t1 + &e[1] * t2;
                    let sv = linalg::singular_values(&jacobian_h(field, z, [t1, t2])?);
                    let smin = sv.last().copied().unwrap_or(0.0);
                    let cond = if smin > 0.0 { sv[0] / smin } else { f64::INFINITY };
                    max_condition = max_condition.max(cond);
                    samples.push(PatchSample { z: z.clone(), t: [t1, t2], h, min_singular_value: smin, condition: cond });
                }
            }
        }
        // h(z, 0) = f(z) holds by construction; measured on the samples at t = 0.
        for s in samples.iter().filter(|s| s.t == [0.0, 0.0]) {
            factorization = factorization.max((&s.h - field.model.value(&s.z)).amax());
        }
        if max_condition <= CONDITION_BOUND {
            return Ok(ExtensionPatch {
                grid,
                t_radius: radius,
                halvings,
                samples,
                factorization,
                tangent_angle,
                max_condition,
                max_ruling_residual,
                chart_points,
            });
        }
        radius *= 0.5;
    }
    Err(ExtensionError::NotEmbedded(8))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KahlerReport {
    /// `max ‖Proj_{TQ} ∇̃_Z(J W) − J Proj_{TQ} ∇̃_Z W‖` over sampled coordinate fields.
    pub residual1: f64,
    /// `max ‖J_T A_{ξ₃} − A_{ξ₄}‖` at the base points.
    pub residual2: f64,
    /// Largest principal angle between `TQ(z, t)` and `T ⊕ E` at `z`.
    pub developability: f64,
}

/// First and selected second chart derivatives of `η₁, η₂` at `z` by central differences.
struct EtaJet {
    eta: [RVec; 2],
    first: Vec<[RVec; 2]>,
    /// `(a, b) ↦ ∂_a∂_b η` for `a, b` in the requested axes.
    second: HashMap<(usize, usize), [RVec; 2]>,
}

fn eta_jet(field: &RulingField, z: &RVec, axes: &[usize]) -> Result<EtaJet, ExtensionError> {
    let d = z.len();
    let h = field.fd_step;
    let eta = field.eta(z)?;
    let mut first = Vec::with_capacity(d);
    for k in 0..d {
        let (zp, zm) = shifted(z, k, h);
        let (ep, em) = (field.eta(&zp)?, field.eta(&zm)?);
        first.push([0, 1].map(|i| (&ep[i] - &em[i]) / (2.0 * h)));
    }
    let mut second = HashMap::new();
    for &a in axes {
        for &b in axes {
            if b < a {
                continue;
            }
            let val = if a == b {
                let (zp, zm) = shifted(z, a, h);
                let (ep, em) = (field.eta(&zp)?, field.eta(&zm)?);
                [0, 1].map(|i| (&ep[i] - &eta[i] * 2.0 + &em[i]) / (h * h))
            } else {
                let mut acc = [RVec::zeros(eta[0].len()), RVec::zeros(eta[0].len())];
                for (sa, sb, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut zz = z.clone();
                    zz[a] += sa * h;
                    zz[b] += sb * h;
                    let e = field.eta(&zz)?;
                    for i in 0..2 {
                        acc[i] += &e[i] * (sign / (4.0 * h * h));
                    }
                }
                acc
            };
            second.insert((b, a), val.clone());
            second.insert((a, b), val);
        }
    }
    Ok(EtaJet { eta, first, second })
}

/// Kählerness of `Q` with `J_Q = J_T ⊕ J_E` transported constantly along `t`.
///
/// Directions `Z` and fields `W` are coordinate fields of `(z, t)`; they range over the patch
/// axes and `t₁, t₂` at every chart point of the patch, and over all coordinates at its center.
/// With `h = f + t₁η₁ + t₂η₂`, `∂_a∂_b h = ∂_a∂_b f + tᵢ ∂_a∂_b ηᵢ`, `∂_{tᵢ}∂_b h = ∂_b ηᵢ` and
/// `∂_t∂_t h = 0`; the `η` derivatives are central differences of the ruling field.
pub fn verify_kahler(field: &RulingField, patch: &ExtensionPatch) -> Result<KahlerReport, ExtensionError> {
    verify_kahler_with(field, patch, 0.0)
}

/// [`verify_kahler`] with `J_E` replaced by its conjugate under a rotation by `corruption`
/// radians mixing `ξ₃` into `ξ₁` (a corrupted complex structure, for negative checks).
pub fn verify_kahler_with(field: &RulingField, patch: &ExtensionPatch, corruption: f64) -> Result<KahlerReport, ExtensionError> {
    let d = patch.grid.center.len();
    let ts = t_values(patch.grid.t_count, patch.t_radius);
    let h = field.fd_step;
    let mut residual1 = 0.0_f64;
    let mut residual2 = 0.0_f64;
    let mut developability = 0.0_f64;
    let structure = |at: &RulingAt| -> RMat {
        if corruption == 0.0 {
            return at.j_ambient.clone();
        }
        let pt = &at.adapted.point;
        let (c, s) = (corruption.cos(), corruption.sin());
        let x1 = &pt.normal_frame[0];
        let x3 = &pt.normal_frame[2];
        let mut rot = RMat::identity(x1.len(), x1.len());
        rot += (x1 * x1.transpose() + x3 * x3.transpose()) * (c - 1.0) + (x3 * x1.transpose() - x1 * x3.transpose()) * s;
        &rot * &at.j_ambient * rot.transpose()
    };
    for z in &patch.chart_points {
        let at = field.at(z)?;
        let pt = &at.adapted.point;
        let jt = linalg::standard_complex_structure(pt.n());
        residual2 = residual2.max((&jt * &pt.shape_forms[2] - &pt.shape_forms[3]).norm());
        let is_center = (z - &patch.grid.center).amax() == 0.0;
        let axes: Vec<usize> = if is_center { (0..d).collect() } else { vec![patch.grid.axis_a, patch.grid.axis_b] };
        let dirs: Vec<usize> = axes.iter().copied().chain([d, d + 1]).collect();
        let jet = eta_jet(field, z, &axes)?;
        let hess = field.model.hessian(z);
        let df = field.model.jacobian(z);
        let jq = structure(&at);
        let dj: HashMap<usize, RMat> = axes
            .iter()
            .map(|&a| {
                let (zp, zm) = shifted(z, a, h);
                Ok((a, (structure(&field.at(&zp)?) - structure(&field.at(&zm)?)) / (2.0 * h)))
            })
            .collect::<Result<_, ExtensionError>>()?;
        let mut p_basis: Vec<RVec> = pt.tangent_frame.column_iter().map(|c| c.into_owned()).collect();
        p_basis.push(pt.normal_frame[2].clone());
        p_basis.push(pt.normal_frame[3].clone());
        let p_sub = Subspace::span(pt.f_value.len(), &p_basis, 1e-12).map_err(SffError::from)?;
        for &t1 in &ts {
            for &t2 in &ts {
                let t = [t1, t2];
                let field_w = |b: usize| -> RVec {
                    if b < d {
                        df.column(b).into_owned() + &jet.first[b][0] * t1 + &jet.first[b][1] * t2
                    } else {
                        jet.eta[b - d].clone()
                    }
                };
                let w: Vec<RVec> = (0..d + 2).map(field_w).collect();
                let tq = Subspace::span(w[0].len(), &w, 1e-10).map_err(SffError::from)?;
                developability = developability.max(linalg::max_principal_angle(&tq, &p_sub));
                let tm = tq.matrix();
                let proj = &tm * tm.transpose();
                for &a in &dirs {
                    for &b in &dirs {
                        let dw: RVec = match (a < d, b < d) {
                            (true, true) => {
                                let s2 = &jet.second[&(a, b)];
                                &hess[a * d + b] + &s2[0] * t[0] + &s2[1] * t[1]
                            }
                            (true, false) => jet.first[a][b - d].clone(),
                            (false, true) => jet.first[b][a - d].clone(),
                            (false, false) => RVec::zeros(w[0].len()),
                        };
                        let wb = &w[b];
                        let dj_wb = if a < d { &dj[&a] * wb } else { RVec::zeros(wb.len()) };
                        let lhs = &proj * (dj_wb + &jq * &dw);
                        let rhs = &jq * (&proj * &dw);
                        residual1 = residual1.max((lhs - rhs).norm());
                    }
                }
            }
        }
    }
    Ok(KahlerReport { residual1, residual2, developability })
}

/// Ambient complex structure `J̃ = J_M ⊕ J_N` assembled at each point, with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct HolomorphicIdentification {
    #[serde(serialize_with = "linalg::ser::rmat")]
    pub j_base: RMat,
    pub constancy: f64,
    pub holomorphy: f64,
    pub j_square: f64,
    pub orthogonality: f64,
    /// `‖J̃ − J₀‖` against the model's ambient complex structure, when it has one.
    pub distance_to_ambient: Option<f64>,
}

pub fn ambient_structure_full(point: &SampledPoint, part: &AlmostComplexPart) -> RMat {
    let n = point.n();
    let t = &point.tangent_frame;
    let mut j = RMat::zeros(t.nrows(), t.nrows());
    for i in 0..n {
        let (a, b) = (t.column(i), t.column(n + i));
        j += b * a.transpose() - a * b.transpose();
    }
    let nm = RMat::from_columns(&point.normal_frame);
    j += &nm * part.j_on_normal() * nm.transpose();
    j
}

pub fn holomorphic_identification(
    model: &ImmersionModel,
    points: &[SampledPoint],
    parts: &[AlmostComplexPart],
    tol_geo: f64,
) -> Result<HolomorphicIdentification, ExtensionError> {
    if points.is_empty() || points.len() != parts.len() {
        return Err(ExtensionError::Precondition("need one complex part per point".into()));
    }
    let mut js = Vec::with_capacity(points.len());
    for (pt, part) in points.iter().zip(parts) {
        if part.classification != Classification::Full {
            return Err(ExtensionError::Precondition("normal space has no full almost complex structure".into()));
        }
        if !is_minimal(&pt.sff, tol_geo)?.minimal {
            return Err(ExtensionError::Precondition("point is not minimal".into()));
        }
        js.push(ambient_structure_full(pt, part));
    }
    let base = js[0].clone();
    let id = RMat::identity(base.nrows(), base.ncols());
    let mut constancy = 0.0_f64;
    let mut holomorphy = 0.0_f64;
    let mut j_square = 0.0_f64;
    let mut orthogonality = 0.0_f64;
    let jc = linalg::standard_complex_structure(model.n());
    for (pt, j) in points.iter().zip(&js) {
        constancy = constancy.max((j - &base).norm());
        let df = model.jacobian(&pt.z);
        holomorphy = holomorphy.max((&df * &jc - j * &df).norm());
        j_square = j_square.max((j * j + &id).norm());
        orthogonality = orthogonality.max((j.transpose() * j - &id).norm());
    }
    let distance_to_ambient = model.ambient_complex_structure().map(|j0| (&base - j0).norm());
    Ok(HolomorphicIdentification { j_base: base, constancy, holomorphy, j_square, orthogonality, distance_to_ambient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{sample_point, GridSpec, ModelSpec};
    use crate::sff::TOL_ALG;

    fn product_point(seed: u64) -> (ImmersionModel, RVec) {
        let m = ModelSpec::product_hypersurface(5, 1).build().unwrap();
        let z = GridSpec::Random { count: 1, seed }.points(&m).unwrap().remove(0);
        (m, z)
    }

    #[test]
    fn ruling_on_product_model() {
        let (m, z) = product_point(3);
        let pt = sample_point(&m, &z, 1e-3).unwrap();
        let part = find_complex_part(&pt.sff, TOL_ALG).unwrap();
        let ad = adapt_frame(&pt, &part, None).unwrap();
        let r = solve_ruling(&ad.point, TOL_ALG, 1e-4).unwrap();
        assert!(r.residual < 1e-4, "{}", r.residual);
        assert!(r.transversality > 0.1);
        for g in &r.gauge_space.basis {
            assert!(r.v1.dot(g).abs() < 1e-10 && r.v2.dot(g).abs() < 1e-10);
        }
        // Gauge shifts keep the residual.
        if let Some(g) = r.gauge_space.basis.first() {
            let shifted = ruling_residual(&ad.point, &(&r.v1 + g * 0.7), &r.v2);
            assert!((shifted - ruling_residual(&ad.point, &r.v1, &r.v2)).abs() < 1e-10);
        }
        let jt = linalg::standard_complex_structure(5);
        assert!((&jt * &ad.point.shape_forms[2] - &ad.point.shape_forms[3]).norm() < 1e-10);
    }

    #[test]
    fn trivial_connection_gives_zero_ruling() {
        let sff = crate::instance_gen::gen_mixed(5, 1, crate::instance_gen::DiagParams::default()).unwrap();
        let conn = vec![RMat::zeros(4, 4); 10];
        let pt = synthetic_point(sff, conn);
        let part = find_complex_part(&pt.sff, TOL_ALG).unwrap();
        let ad = adapt_frame(&pt, &part, None).unwrap();
        let r = solve_ruling(&ad.point, TOL_ALG, 1e-8).unwrap();
        assert!(r.v1.norm() == 0.0 && r.v2.norm() == 0.0);
    }

    #[test]
    fn synthetic_minimal_points() {
        for (k, lambda) in [(2usize, C64::new(0.0, 0.0)), (1, C64::new(0.4, 0.7))] {
            let ad = synthetic_minimal_point(5, 11, k, lambda).unwrap();
            let diag = minimal_case_diagnostics(&ad, TOL_ALG).unwrap();
            assert_eq!(diag.stratum, k);
            assert!(diag.wedge_residual < 1e-12, "{}", diag.wedge_residual);
            assert!(diag.sigma_w_residual < 1e-12, "{}", diag.sigma_w_residual);
            if k == 1 {
                assert!(diag.lambda_residual.unwrap() < 1e-12);
            }
            let r = solve_ruling(&ad.point, TOL_ALG, 1e-8).unwrap();
            assert!(r.j_defect < 1e-8, "{}", r.j_defect);
            let mc = minimality_condition(&ad.point, &r.v1, &r.v2, 1e-8).unwrap();
            assert!(mc.holds);
        }
        assert!(synthetic_minimal_point(5, 1, 1, I).is_err());
    }

    #[test]
    fn holo_graph_identification() {
        let m = ModelSpec::holo_graph(3, 2).build().unwrap();
        let zs = GridSpec::Random { count: 4, seed: 1 }.points(&m).unwrap();
        let pts: Vec<SampledPoint> = zs.iter().map(|z| sample_point(&m, z, 1e-3).unwrap()).collect();
        let parts: Vec<AlmostComplexPart> = pts.iter().map(|p| find_complex_part(&p.sff, TOL_ALG).unwrap()).collect();
        let id = holomorphic_identification(&m, &pts, &parts, 1e-4).unwrap();
        assert!(id.constancy < 1e-4 && id.holomorphy < 1e-4 && id.j_square < 1e-10);
        assert!(id.distance_to_ambient.unwrap() < 1e-8);
    }

    #[test]
    fn extension_rejects_zero_radius() {
        let (m, z) = product_point(1);
        let field = RulingField::new(&m, &(z * 0.2), 1e-3, TOL_ALG, 1e-4).unwrap();
        let grid = PatchGrid { center: field_center(&m), axis_a: 0, axis_b: 5, count: 1, spacing: 0.01, t_count: 1 };
        assert!(matches!(build_extension(&field, grid, 0.0), Err(ExtensionError::Precondition(_))));
    }

    fn field_center(m: &ImmersionModel) -> RVec {
        RVec::zeros(2 * m.n())
    }
}
