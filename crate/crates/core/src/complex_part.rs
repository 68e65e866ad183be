//! The complex part `E ⊆ N` of the normal space: the maximal subspace carrying an orthogonal
//! `J` with `H^η = 0` and `S^{Jη} = −√−1 S^η` for all `η ∈ E`.
//!
//! `E_ℂ` decomposes as `R ⊕ R̄` with `R` the isotropic radical of the span of the
//! `S`-values projected to the complement of the image of `H`; each radical line `ξ = u + √−1 v`
//! contributes the plane `span{u, v}` with `J u/|u| = −v/|u|`.

use serde::Serialize;
use thiserror::Error;

use crate::instance_gen::{random_orthogonal, random_unitary, rng};
use crate::linalg::{
    self, bilinear, bilinear_gram, numerical_kernel_abs, orthonormal_complement,
    CVec, LinalgError, RMat, RVec, Subspace, C64, I,
};
use crate::sff::{
    check_symmetry, common_kernel_with_partial_s, kernel_report, split_by_h_image,
    vanishing_normal_directions, SecondFundamentalFormData, SffError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexPartError {
    #[error(transparent)]
    Sff(#[from] SffError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("vector is not isotropic: |⟨ξ,ξ⟩|/|ξ|² = {0:.3e}")]
    NotIsotropic(f64),
    #[error("degenerate instance: candidate complex part fails verification (residual {0:.3e})")]
    Degenerate(f64),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Empty,
    Plane,
    Full,
}

/// A radical line together with the input value it coincides with, if any.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessLine {
    #[serde(serialize_with = "linalg::ser::cvec")]
    pub xi: CVec,
    /// Index into the input list of a value parallel to `xi`.
    pub source: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadicalReport {
    /// Complex span of the inputs (Hermitian-orthonormal basis).
    pub w: Subspace<C64>,
    /// `W ∩ W^⊥` for the bilinear pairing.
    pub radical: Subspace<C64>,
    pub witness_lines: Vec<WitnessLine>,
}

/// Span of the inputs and its bilinear radical, decided at relative threshold `tol`.
pub fn isotropic_radical(values: &[CVec], tol: f64) -> Result<RadicalReport, ComplexPartError> {
    let Some(first) = values.first() else {
        return Err(ComplexPartError::Precondition("empty value list".into()));
    };
    let dim = first.len();
    let w = Subspace::span(dim, values, tol)?;
    if w.dim() == 0 {
        return Ok(RadicalReport { radical: Subspace::zero(dim), w, witness_lines: Vec::new() });
    }
    // On a Hermitian-orthonormal basis the Gram matrix has unit scale.
    let gram = bilinear_gram(&w.basis)?;
    let coeffs = numerical_kernel_abs(&gram, tol)?;
    let wm = w.matrix();
    let lifted: Vec<CVec> = coeffs.basis.iter().map(|c| &wm * c).collect();
    let radical = Subspace { ambient_dim: dim, basis: lifted };
    let witness_lines = radical
        .basis
        .iter()
        .map(|xi| {
            let source = values.iter().position(|v| {
                let nv = v.norm();
                nv > 0.0 && (xi.dotc(v).norm() / nv - 1.0).abs() < 1e-8
            });
            WitnessLine { xi: xi.clone(), source }
        })
        .collect();
    Ok(RadicalReport { w, radical, witness_lines })
}

/// A real orthonormal pair spanning the real plane of an isotropic line, with `J ξ₃ = ξ₄`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanePair {
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub xi3: RVec,
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub xi4: RVec,
    /// `ξ₄ = sign · v/|v|` for `ξ = u + √−1 v`.
    pub sign: i8,
}

/// Converts an isotropic line into its real plane. Without `sff` the sign is `−1`, the one
/// for which `S^{Jξ₃} = −√−1 S^{ξ₃}` holds whenever the `S`-values in the plane are
/// multiples of `ξ`; with `sff` the sign is chosen by checking that identity.
pub fn line_to_plane(
    xi: &CVec,
    sff: Option<&SecondFundamentalFormData>,
    tol: f64,
) -> Result<PlanePair, ComplexPartError> {
    let norm2 = xi.norm_squared();
    if norm2 == 0.0 {
        return Err(ComplexPartError::Precondition("zero vector".into()));
    }
    let iso = bilinear(xi, xi).norm() / norm2;
    if iso > tol.max(1e-12) {
        return Err(ComplexPartError::NotIsotropic(iso));
    }
    let (u, v) = linalg::realify(xi);
    let xi3 = u.normalize();
    let xi4 = linalg::gram_schmidt_step(std::slice::from_ref(&xi3), &v, 1e-6 * v.norm().max(1e-300))
        .ok_or_else(|| ComplexPartError::Internal("real and imaginary parts are dependent".into()))?;
    let mut sign: i8 = -1;
    if let Some(sff) = sff {
        let res = |s: f64| sign_residual(sff, &xi3, &(&xi4 * s));
        if res(1.0) < res(-1.0) {
            sign = 1;
        }
    }
    Ok(PlanePair { xi4: xi4 * sign as f64, xi3, sign })
}

/// `‖S^{ξ₄} + √−1 S^{ξ₃}‖` for a candidate pair with `J ξ₃ = ξ₄`.
fn sign_residual(sff: &SecondFundamentalFormData, xi3: &RVec, xi4: &RVec) -> f64 {
    let s3 = sff.s_along(&linalg::complexify(xi3));
    let s4 = sff.s_along(&linalg::complexify(xi4));
    (s4 + s3 * I).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcsResiduals {
    /// `max ‖H^η‖` over the basis of `E`.
    pub h: f64,
    /// `max ‖S^{Jη} + √−1 S^η‖`.
    pub s: f64,
    pub j_square: f64,
    pub j_orthogonal: f64,
}

impl AcsResiduals {
    pub fn max(&self) -> f64 {
        self.h.max(self.s).max(self.j_square).max(self.j_orthogonal)
    }
}

/// Residuals of the defining identities of an almost complex structure `J` (given in the
/// basis of `e`) on the normal subspace `e`.
pub fn verify_acs(sff: &SecondFundamentalFormData, e: &Subspace<f64>, j: &RMat) -> AcsResiduals {
    let k = e.dim();
    if k == 0 {
        return AcsResiduals { h: 0.0, s: 0.0, j_square: 0.0, j_orthogonal: 0.0 };
    }
    let em = e.matrix();
    let mut h = 0.0_f64;
    let mut s = 0.0_f64;
    for c in 0..k {
        let eta = linalg::complexify(&e.basis[c]);
        let jeta = linalg::complexify(&(&em * j.column(c)));
        h = h.max(sff.h_along(&eta).norm());
        s = s.max((sff.s_along(&jeta) + sff.s_along(&eta) * I).norm());
    }
    let id = RMat::identity(k, k);
    AcsResiduals {
        h,
        s,
        j_square: (j * j + &id).norm(),
        j_orthogonal: (j.transpose() * j - id).norm(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlmostComplexPart {
    pub e: Subspace<f64>,
    /// `J` in the basis of `e`: block-diagonal with `J ξ₃ = ξ₄` on consecutive pairs.
    #[serde(serialize_with = "linalg::ser::rmat")]
    pub j: RMat,
    pub e_prime: Subspace<f64>,
    pub classification: Classification,
    pub p_prime: usize,
    pub residuals: AcsResiduals,
    #[serde(skip)]
    pub radical: Option<RadicalReport>,
    /// Classifications at `10·tol` and `tol/10` when they differ from this one.
    pub alternates: Vec<AlternateClassification>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlternateClassification {
    pub tol: f64,
    pub classification: Option<Classification>,
}

impl AlmostComplexPart {
    /// `J` as a `p × p` matrix on `N` (zero on `E′`).
    pub fn j_on_normal(&self) -> RMat {
        let em = self.e.matrix();
        if self.e.dim() == 0 {
            return RMat::zeros(self.e.ambient_dim, self.e.ambient_dim);
        }
        &em * &self.j * em.transpose()
    }

    pub fn planes(&self) -> Vec<(RVec, RVec)> {
        self.e.basis.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect()
    }

    pub fn is_borderline(&self) -> bool {
        !self.alternates.is_empty()
    }
}

fn classify(dim_e: usize, p: usize) -> Classification {
    if dim_e == 0 {
        Classification::Empty
    } else if dim_e == p {
        Classification::Full
    } else {
        Classification::Plane
    }
}

fn pair_j(planes: usize) -> RMat {
    let mut j = RMat::zeros(2 * planes, 2 * planes);
    for k in 0..planes {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// Assembles `E` and `J` from orthonormal plane pairs.
pub fn part_from_planes(
    sff: &SecondFundamentalFormData,
    planes: &[PlanePair],
    p_prime: usize,
) -> AlmostComplexPart {
    let p = sff.p();
    let basis: Vec<RVec> = planes.iter().flat_map(|pl| [pl.xi3.clone(), pl.xi4.clone()]).collect();
    let e = Subspace { ambient_dim: p, basis };
    let j = pair_j(planes.len());
    let residuals = verify_acs(sff, &e, &j);
    AlmostComplexPart {
        e_prime: orthonormal_complement(&e),
        classification: classify(e.dim(), p),
        e,
        j,
        p_prime,
        residuals,
        radical: None,
        alternates: Vec::new(),
    }
}

/// Constructive complex part: image of `H`, radical of the projected `S`-values, planes.
pub fn find_complex_part(
    sff: &SecondFundamentalFormData,
    tol: f64,
) -> Result<AlmostComplexPart, ComplexPartError> {
    let mut part = find_complex_part_at(sff, tol)?;
    // Symmetry is a precondition judged at `tol`; only the rank and kernel decisions are
    // re-run at the neighbouring thresholds.
    for t in [tol * 10.0, tol / 10.0] {
        let other = classify_at(sff, t).ok().map(|p| p.classification);
        if other != Some(part.classification) {
            part.alternates.push(AlternateClassification { tol: t, classification: other });
        }
    }
    Ok(part)
}

/// [`find_complex_part`] at one tolerance, without the alternate-tolerance reruns.
pub fn find_complex_part_at(
    sff: &SecondFundamentalFormData,
    tol: f64,
) -> Result<AlmostComplexPart, ComplexPartError> {
    let sym = check_symmetry(sff);
    if !sym.passes(tol) {
        return Err(SffError::SymmetryViolated { r21: sym.r21, r22: sym.r22, r23: sym.r23 }.into());
    }
    classify_at(sff, tol)
}

fn classify_at(sff: &SecondFundamentalFormData, tol: f64) -> Result<AlmostComplexPart, ComplexPartError> {
    let vanishing = vanishing_normal_directions(sff, tol)?;
    if vanishing.dim() > 0 {
        return Err(ComplexPartError::Precondition(format!(
            "{} normal directions have vanishing shape operator",
            vanishing.dim()
        )));
    }
    let scale = sff.scale();
    let split = split_by_h_image(sff, tol)?;
    let p = sff.p();
    let mut planes = Vec::new();
    let mut radical_report = None;
    if split.n_dprime.dim() > 0 {
        let restricted = sff.restrict_normal(&split.n_dprime.basis);
        let values = restricted.s_values();
        let smax = values.iter().map(|v| v.amax_modulus()).fold(0.0, f64::max);
        if smax > tol * scale {
            let report = isotropic_radical(&values, tol)?;
            let basis = split.n_dprime.matrix().map(|x| C64::new(x, 0.0));
            for line in &report.radical.basis {
                let xi = &basis * line;
                planes.push(line_to_plane(&xi, Some(sff), tol.sqrt())?);
            }
            radical_report = Some(report);
        }
    }
    let mut part = part_from_planes(sff, &planes, split.p_prime);
    part.radical = radical_report;
    let gate = part.residuals.h.max(part.residuals.s) / scale;
    let structural = part.residuals.j_square.max(part.residuals.j_orthogonal).max(part.e.orthonormality_defect());
    if gate > 10.0 * tol || structural > 1e-10 {
        return Err(ComplexPartError::Degenerate(gate.max(structural)));
    }
    debug_assert!(part.e.dim() <= p);
    Ok(part)
}

trait AmaxModulus {
    fn amax_modulus(&self) -> f64;
}

impl AmaxModulus for CVec {
    fn amax_modulus(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Reruns [`find_complex_part`] after a random unitary change of the tangent frame and a
/// random rotation of the normal frame, and maps the result back to the original normal frame.
pub fn find_complex_part_shuffled(
    sff: &SecondFundamentalFormData,
    seed: u64,
    tol: f64,
) -> Result<AlmostComplexPart, ComplexPartError> {
    let mut r = rng(seed);
    let u = random_unitary(&mut r, sff.n());
    let q = random_orthogonal(&mut r, sff.p());
    let moved = sff.change_frame(&u).rotate_normal(&q);
    let part = find_complex_part(&moved, tol)?;
    // New coordinates c' correspond to old coordinates q c'.
    let back = |s: &Subspace<f64>| Subspace { ambient_dim: s.ambient_dim, basis: s.basis.iter().map(|b| &q * b).collect() };
    let e = back(&part.e);
    let residuals = verify_acs(sff, &e, &part.j);
    Ok(AlmostComplexPart { e_prime: back(&part.e_prime), e, residuals, ..part })
}

#[derive(Debug, Clone, Serialize)]
pub struct RankBoundReport {
    pub p_prime: usize,
    pub classification: Classification,
    pub rank: usize,
    /// Complex dimension of `ker H ∩ ker S′`, with `S′` the `E′`-component of `S`.
    pub kernel_h_s_prime: usize,
    pub nonempty: bool,
    /// `dim(ker H ∩ ker S′) ≥ r − 2` in the plane case (vacuously true otherwise).
    pub plane_bound: bool,
    pub passed: bool,
}

/// Checks the rank bound for `p = 4`, rank `≥ 5` and trivial
/// common kernel: the complex part is nonempty, and in the plane case
/// `dim(ker H ∩ ker S′) ≥ r − 2`.
pub fn rank_bound_report(
    sff: &SecondFundamentalFormData,
    tol: f64,
) -> Result<RankBoundReport, ComplexPartError> {
    if sff.p() != 4 {
        return Err(ComplexPartError::Precondition(format!("p = {} (needs 4)", sff.p())));
    }
    let k = kernel_report(sff, tol)?;
    if k.nu0 != 0 {
        return Err(ComplexPartError::Precondition(format!("common kernel of H and S has dimension {}", k.nu0)));
    }
    if k.rank < 5 {
        return Err(ComplexPartError::Precondition(format!("rank {} < 5", k.rank)));
    }
    let part = find_complex_part(sff, tol)?;
    let kernel = common_kernel_with_partial_s(sff, &part.e_prime.basis, tol)?.dim();
    let nonempty = part.classification != Classification::Empty;
    let plane_bound = part.classification != Classification::Plane || kernel + 2 >= k.rank;
    Ok(RankBoundReport {
        p_prime: part.p_prime,
        classification: part.classification,
        rank: k.rank,
        kernel_h_s_prime: kernel,
        nonempty,
        plane_bound,
        passed: nonempty && plane_bound,
    })
}

/// Outcome of the search-based oracle.
#[derive(Debug, Clone, Serialize)]
pub struct BruteForceResult {
    pub part: AlmostComplexPart,
    /// Best objective value among starts that did not yield an accepted line.
    pub best_rejected: f64,
    /// A local minimum fell in the gray band between acceptance and clear rejection.
    pub inconclusive: bool,
    pub starts: usize,
}

const ACCEPT: f64 = 1e-9;
const REJECT: f64 = 1e-3;

/// Search-based oracle for the complex part: minimizes
/// `Σ |⟨ζ, S_zw⟩|² + |⟨Re ζ, H_zw⟩|² + |⟨Im ζ, H_zw⟩|² + |⟨ζ, ζ⟩|² + (|ζ|² − 1)²` over `ζ ∈ ℂ^p`
/// by Gauss–Newton from seeded random starts, deflating accepted lines.
pub fn brute_force_complex_part(
    sff: &SecondFundamentalFormData,
    starts: usize,
    seed: u64,
) -> Result<BruteForceResult, ComplexPartError> {
    let (n, p) = (sff.n(), sff.p());
    if p > 4 || n > 6 {
        return Err(ComplexPartError::Precondition(format!("oracle limited to p ≤ 4, n ≤ 6 (n={n}, p={p})")));
    }
    let scale = sff.scale();
    let mut values_s = Vec::new();
    let mut values_h = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if j >= i {
                values_s.push(sff.s_value(i, j) / C64::new(scale, 0.0));
            }
            values_h.push(sff.h_value(i, j) / C64::new(scale, 0.0));
        }
    }
    let mut r = rng(seed);
    let mut lines: Vec<CVec> = Vec::new();
    let mut best_rejected = f64::INFINITY;
    let mut inconclusive = false;
    while lines.len() < p / 2 {
        let mut found = None;
        for _ in 0..starts {
            let z0 = CVec::from_fn(p, |_, _| crate::instance_gen::random_complex(&mut r));
            let (z, obj) = minimize_line(&values_s, &values_h, &lines, z0);
            if obj < ACCEPT {
                found = Some(z);
                break;
            }
            best_rejected = best_rejected.min(obj);
        }
        match found {
            Some(z) => lines.push(z),
            None => break,
        }
    }
    if (ACCEPT..REJECT).contains(&best_rejected) {
        inconclusive = true;
    }
    let mut planes = Vec::new();
    for z in &lines {
        planes.push(line_to_plane(z, Some(sff), 1e-6)?);
    }
    let p_prime = split_by_h_image(sff, 1e-9)?.p_prime;
    Ok(BruteForceResult { part: part_from_planes(sff, &planes, p_prime), best_rejected, inconclusive, starts })
}

fn line_residual(s: &[CVec], h: &[CVec], found: &[CVec], z: &CVec) -> RVec {
    let mut out = Vec::new();
    let mut push = |c: C64| {
        out.push(c.re);
        out.push(c.im);
    };
    for v in s {
        push(bilinear(z, v));
    }
    let (re, im) = linalg::realify(z);
    let (re, im) = (linalg::complexify(&re), linalg::complexify(&im));
    for v in h {
        push(bilinear(&re, v));
        push(bilinear(&im, v));
    }
    push(bilinear(z, z));
    for f in found {
        // Hermitian orthogonality to ζ_k and to its conjugate.
        push(f.dotc(z));
        push(bilinear(f, z));
    }
    out.push(z.norm_squared() - 1.0);
    RVec::from_vec(out)
}

fn minimize_line(s: &[CVec], h: &[CVec], found: &[CVec], z0: CVec) -> (CVec, f64) {
    let p = z0.len();
    let mut z = z0.normalize();
    let to_real = |z: &CVec| RVec::from_fn(2 * p, |k, _| if k < p { z[k].re } else { z[k - p].im });
    let to_complex = |x: &RVec| CVec::from_fn(p, |k, _| C64::new(x[k], x[k + p]));
    let mut r = line_residual(s, h, found, &z);
    let mut cost = r.norm_squared();
    for _ in 0..100 {
        if cost < 1e-28 {
            break;
        }
        let x = to_real(&z);
        let step_h = 1e-7;
        let mut jac = RMat::zeros(r.len(), 2 * p);
        for k in 0..2 * p {
            let mut xp = x.clone();
            xp[k] += step_h;
            let mut xm = x.clone();
            xm[k] -= step_h;
            let d = (line_residual(s, h, found, &to_complex(&xp)) - line_residual(s, h, found, &to_complex(&xm)))
                / (2.0 * step_h);
            jac.set_column(k, &d);
        }
        let Ok((dx, _)) = linalg::least_squares_solve(&jac, &(-&r)) else { break };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = to_complex(&(&x + &dx * t));
            let rt = line_residual(s, h, found, &trial);
            if rt.norm_squared() < cost {
                z = trial;
                r = rt;
                cost = r.norm_squared();
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (z, cost.sqrt())
}

#[cfg(test)]
mod tests {
    use crate::linalg::CMat;
    use super::*;
    use crate::instance_gen::{gen_diag_normal_form, gen_holomorphic, gen_mixed, gen_mixed_minimal, DiagParams};
    use crate::sff::TOL_ALG;

    fn cv(xs: &[(f64, f64)]) -> CVec {
        CVec::from_iterator(xs.len(), xs.iter().map(|&(a, b)| C64::new(a, b)))
    }

    #[test]
    fn radical_of_isotropic_plane_is_everything() {
        let a = cv(&[(1.0, 0.0), (0.0, 1.0), (0.0, 0.0), (0.0, 0.0)]);
        let b = cv(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let c = &a * C64::new(0.3, -2.0) + &b * C64::new(1.0, 0.5);
        let rep = isotropic_radical(&[a, b, c], TOL_ALG).unwrap();
        assert_eq!(rep.w.dim(), 2);
        assert_eq!(rep.radical.dim(), 2);
        for xi in &rep.radical.basis {
            assert!(bilinear(xi, xi).norm() < 1e-12);
        }
    }

    #[test]
    fn radical_of_generic_and_real_inputs_is_trivial() {
        let mut r = rng(4);
        let vals: Vec<CVec> = (0..6).map(|_| CVec::from_fn(4, |_, _| crate::instance_gen::random_complex(&mut r))).collect();
        assert_eq!(isotropic_radical(&vals, TOL_ALG).unwrap().radical.dim(), 0);
        let real = cv(&[(1.0, 0.0), (2.0, 0.0)]);
        assert_eq!(isotropic_radical(&[real], TOL_ALG).unwrap().radical.dim(), 0);
    }

    #[test]
    fn line_to_plane_examples() {
        let xi = cv(&[(1.0, 0.0), (0.0, 1.0), (0.0, 0.0), (0.0, 0.0)]);
        let pl = line_to_plane(&xi, None, TOL_ALG).unwrap();
        assert!((pl.xi3[0] - 1.0).abs() < 1e-15);
        assert!((pl.xi4[1].abs() - 1.0).abs() < 1e-15);

        let scaled = line_to_plane(&(&xi * C64::new(2.0, 0.0)), None, TOL_ALG).unwrap();
        assert_eq!(scaled, pl);

        let phase = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let rotated = line_to_plane(&(&xi * phase), None, TOL_ALG).unwrap();
        let plane = |p: &PlanePair| Subspace::span(4, &[p.xi3.clone(), p.xi4.clone()], 1e-12).unwrap();
        assert!(linalg::max_principal_angle(&plane(&rotated), &plane(&pl)) < 1e-12);
        // The induced J is phase independent.
        let j = |p: &PlanePair| &p.xi4 * p.xi3.transpose() - &p.xi3 * p.xi4.transpose();
        assert!((j(&rotated) - j(&pl)).norm() < 1e-12);

        let not_iso = cv(&[(1.0, 0.0), (0.0, 0.5)]);
        assert!(matches!(line_to_plane(&not_iso, None, TOL_ALG), Err(ComplexPartError::NotIsotropic(_))));
    }

    #[test]
    fn holomorphic_instance_is_full() {
        let sff = gen_holomorphic(5, 4, 1).unwrap();
        let part = find_complex_part(&sff, TOL_ALG).unwrap();
        assert_eq!(part.classification, Classification::Full);
        assert_eq!(part.e.dim(), 4);
        assert!(part.residuals.max() < 1e-9);
    }

    #[test]
    fn mixed_instance_is_plane_on_last_two_axes() {
        for seed in [7, 8] {
            let sff = gen_mixed(5, seed, DiagParams::default()).unwrap();
            let part = find_complex_part(&sff, TOL_ALG).unwrap();
            assert_eq!(part.classification, Classification::Plane);
            assert_eq!(part.p_prime, 2);
            let expected = Subspace::<f64>::span(4, &[RVec::from_vec(vec![0.0, 0.0, 1.0, 0.0]), RVec::from_vec(vec![0.0, 0.0, 0.0, 1.0])], 1e-12).unwrap();
            assert!(linalg::max_principal_angle(&part.e, &expected) < 1e-10);
            let bound = rank_bound_report(&sff, TOL_ALG).unwrap();
            assert!(bound.passed);
            assert_eq!(bound.kernel_h_s_prime, 3);
        }
    }

    #[test]
    fn sign_flip_breaks_acs() {
        let sff = gen_mixed(5, 3, DiagParams::default()).unwrap();
        let part = find_complex_part(&sff, TOL_ALG).unwrap();
        let flipped = verify_acs(&sff, &part.e, &(-&part.j));
        let s_e = sff.s_along(&linalg::complexify(&part.e.basis[0])).norm();
        assert!((flipped.s - 2.0 * s_e).abs() < 1e-9 * s_e.max(1.0));
        assert_eq!(verify_acs(&sff, &Subspace::zero(4), &RMat::zeros(0, 0)).max(), 0.0);
    }

    #[test]
    fn small_n_may_be_empty() {
        let mut s0 = CMat::zeros(1, 1);
        s0[(0, 0)] = C64::new(1.0, 0.0);
        let mut s1 = CMat::zeros(1, 1);
        s1[(0, 0)] = C64::new(0.5, 0.0);
        let mut h0 = CMat::zeros(1, 1);
        h0[(0, 0)] = C64::new(0.3, 0.0);
        let sff = SecondFundamentalFormData::new(1, 2, vec![h0, CMat::zeros(1, 1)], vec![s0, s1]).unwrap();
        let part = find_complex_part(&sff, TOL_ALG).unwrap();
        assert_eq!(part.classification, Classification::Empty);
    }

    #[test]
    fn rank_bound_preconditions() {
        let sff = gen_diag_normal_form(5, DiagParams::default()).unwrap();
        assert!(matches!(rank_bound_report(&sff, TOL_ALG), Err(ComplexPartError::Precondition(_))));
        let hol = gen_holomorphic(5, 4, 1).unwrap();
        let rep = rank_bound_report(&hol, TOL_ALG).unwrap();
        assert_eq!(rep.classification, Classification::Full);
        assert!(rep.passed);
    }

    #[test]
    fn shuffled_runs_agree() {
        let sff = gen_mixed(6, 5, DiagParams { a: 0.5, b: 1.5, delta: 1 }).unwrap();
        let base = find_complex_part(&sff, TOL_ALG).unwrap();
        for seed in 0..3 {
            let other = find_complex_part_shuffled(&sff, seed, TOL_ALG).unwrap();
            assert!(linalg::max_principal_angle(&base.e, &other.e) < 1e-8);
            assert!((base.j_on_normal() - other.j_on_normal()).norm() < 1e-8);
        }
    }

    #[test]
    fn oracle_agrees() {
        for sff in [
            gen_mixed(5, 7, DiagParams::default()).unwrap(),
            gen_mixed_minimal(5, 2, DiagParams::default()).unwrap(),
            gen_holomorphic(4, 4, 3).unwrap(),
        ] {
            let part = find_complex_part(&sff, TOL_ALG).unwrap();
            let oracle = brute_force_complex_part(&sff, 20, 1).unwrap();
            assert_eq!(oracle.part.e.dim(), part.e.dim());
            assert!(linalg::max_principal_angle(&oracle.part.e, &part.e) < 1e-6);
            assert!((oracle.part.j_on_normal() - part.j_on_normal()).norm() < 1e-6);
        }
    }

    #[test]
    fn oracle_finds_nothing_without_radical() {
        let sff = gen_diag_normal_form(3, DiagParams { a: 0.4, b: 0.7, delta: 1 }).unwrap();
        let oracle = brute_force_complex_part(&sff, 10, 0).unwrap();
        assert_eq!(oracle.part.e.dim(), 0);
        assert!(!oracle.inconclusive);
    }
}
