//! Parametrized immersions `f: U ⊆ ℝ^{2n} → ℝ^{2n+p}` with exact jets, sampled frames,
//! pointwise `(H, S)`, normal connection forms and Codazzi/admissibility diagnostics.
//!
//! Chart coordinates are `(x₁…x_n, y₁…y_n)` with `w_k = x_k + √−1 y_k` holomorphic
//! coordinates of `M`, so `J ∂_{x_k} = ∂_{y_k}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex_part::AlmostComplexPart;
use crate::instance_gen::{random_complex, random_symmetric, rng};
use crate::linalg::{self, numerical_kernel, CMat, CVec, RMat, RVec, C64, I};
use crate::sff::{is_minimal, split_shape_form, SecondFundamentalFormData, SffError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImmersionError {
    #[error("Jacobian is rank deficient at the sample point")]
    RankDeficient,
    #[error("point too close to the domain boundary for step {0}")]
    OutsideDomain(f64),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error(transparent)]
    Sff(#[from] SffError),
}

/// Parameters of the builtin models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `w ↦ (w, g₁(w), g₂(w)) ∈ ℂ^{n+2}` with quadratic (optionally cubic diagonal) `g_k`.
    HoloGraph { n: usize, seed: u64, scale: f64, cubic: bool },
    /// Affine complex `n`-plane in `ℂ^{n+2}`.
    Flat { n: usize },
    /// `w ↦ (g(φ(w)), w) ∈ ℝ⁴ × ℂ^n` with `g` a Clifford torus of radii `r1, r2` in
    /// isothermal coordinates and `φ(w) = c·w + ½ wᵀ B w`.
    ProductHypersurface { n: usize, seed: u64, r1: f64, r2: f64, hess_scale: f64 },
}

impl ModelSpec {
    pub fn holo_graph(n: usize, seed: u64) -> Self {
        ModelSpec::HoloGraph { n, seed, scale: 0.5, cubic: false }
    }

    pub fn product_hypersurface(n: usize, seed: u64) -> Self {
        ModelSpec::ProductHypersurface { n, seed, r1: 1.0, r2: 0.7, hess_scale: 0.6 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::HoloGraph { .. } => "holo_graph",
            ModelSpec::Flat { .. } => "flat",
            ModelSpec::ProductHypersurface { .. } => "product_hypersurface",
        }
    }

    pub fn build(&self) -> Result<ImmersionModel, ImmersionError> {
        ImmersionModel::new(self.clone())
    }
}

/// Holomorphic polynomial map `ℂ^n → ℂ^m`: `g_k(w) = ½ wᵀ A_k w + Σ_j c_{kj} w_j³`.
#[derive(Debug, Clone)]
struct HoloPoly {
    quad: Vec<CMat>,
    cubic: Vec<CVec>,
}

impl HoloPoly {
    fn value(&self, w: &CVec) -> Vec<C64> {
        self.quad
            .iter()
            .zip(&self.cubic)
            .map(|(a, c)| {
                let q = (w.transpose() * a * w)[(0, 0)] * 0.5;
                q + c.iter().zip(w.iter()).map(|(ck, wk)| ck * wk * wk * wk).sum::<C64>()
            })
            .collect()
    }

    fn grad(&self, w: &CVec) -> Vec<CVec> {
        self.quad
            .iter()
            .zip(&self.cubic)
            .map(|(a, c)| a * w + CVec::from_fn(w.len(), |j, _| c[j] * w[j] * w[j] * 3.0))
            .collect()
    }

    fn hess(&self, w: &CVec) -> Vec<CMat> {
        self.quad
            .iter()
            .zip(&self.cubic)
            .map(|(a, c)| {
                let mut h = a.clone();
                for j in 0..w.len() {
                    h[(j, j)] += c[j] * w[j] * 6.0;
                }
                h
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum ModelKind {
    Graph { g: HoloPoly },
    Product { c: CVec, b: CMat, r1: f64, r2: f64 },
}

/// A model ready for evaluation.
#[derive(Debug, Clone)]
pub struct ImmersionModel {
    pub spec: ModelSpec,
    n: usize,
    kind: ModelKind,
}

/// `∂/∂x_j ↦ 1`, `∂/∂y_j ↦ √−1` applied to holomorphic derivatives.
fn coord_factor(a: usize, n: usize) -> (usize, C64) {
    if a < n {
        (a, C64::new(1.0, 0.0))
    } else {
        (a - n, I)
    }
}

pub(crate) fn chart_to_complex(z: &RVec, n: usize) -> CVec {
    CVec::from_fn(n, |k, _| C64::new(z[k], z[n + k]))
}

impl ImmersionModel {
    pub fn new(spec: ModelSpec) -> Result<Self, ImmersionError> {
        let (n, kind) = match &spec {
            ModelSpec::HoloGraph { n, seed, scale, cubic } => {
                let mut r = rng(*seed);
                let quad = (0..2).map(|_| random_symmetric(&mut r, *n) * C64::new(*scale, 0.0)).collect();
                let cubic = (0..2)
                    .map(|_| {
                        CVec::from_fn(*n, |_, _| if *cubic { random_complex(&mut r) * (*scale * 0.3) } else { C64::new(0.0, 0.0) })
                    })
                    .collect();
                (*n, ModelKind::Graph { g: HoloPoly { quad, cubic } })
            }
            ModelSpec::Flat { n } => {
                (*n, ModelKind::Graph { g: HoloPoly { quad: vec![CMat::zeros(*n, *n); 2], cubic: vec![CVec::zeros(*n); 2] } })
            }
            ModelSpec::ProductHypersurface { n, seed, r1, r2, hess_scale } => {
                if !(*r1 > 0.0 && *r2 > 0.0) {
                    return Err(ImmersionError::InvalidParams("torus radii must be positive".into()));
                }
                let mut r = rng(*seed);
                let c = CVec::from_fn(*n, |_, _| random_complex(&mut r) * 0.5);
                let b = random_symmetric(&mut r, *n) * C64::new(*hess_scale, 0.0);
                (*n, ModelKind::Product { c, b, r1: *r1, r2: *r2 })
            }
        };
        if n == 0 {
            return Err(ImmersionError::InvalidParams("n must be positive".into()));
        }
        Ok(Self { spec, n, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        4
    }

    pub fn ambient_dim(&self) -> usize {
        2 * self.n + 4
    }

    /// Chart domain is the cube `|z_i| < domain_radius`.
    pub fn domain_radius(&self) -> f64 {
        match self.kind {
            ModelKind::Graph { .. } => 1.0,
            ModelKind::Product { .. } => 0.5,
        }
    }

    pub fn chart_is_holomorphic(&self) -> bool {
        true
    }

    /// Constant ambient complex structure for which the model is holomorphic, if any.
    pub fn ambient_complex_structure(&self) -> Option<RMat> {
        match self.kind {
            ModelKind::Graph { .. } => Some(linalg::standard_complex_structure(self.n + 2)),
            ModelKind::Product { .. } => None,
        }
    }

    pub fn value(&self, z: &RVec) -> RVec {
        let n = self.n;
        let w = chart_to_complex(z, n);
        match &self.kind {
            ModelKind::Graph { g } => {
                let gv = g.value(&w);
                let m = n + 2;
                let mut out = RVec::zeros(2 * m);
                for k in 0..n {
                    out[k] = z[k];
                    out[m + k] = z[n + k];
                }
                for (k, v) in gv.iter().enumerate() {
                    out[n + k] = v.re;
                    out[m + n + k] = v.im;
                }
                out
            }
            ModelKind::Product { c, b, r1, r2 } => {
                let phi = (c.transpose() * &w)[(0, 0)] + (w.transpose() * b * &w)[(0, 0)] * 0.5;
                let mut out = RVec::zeros(2 * n + 4);
                out.rows_mut(0, 4).copy_from(&torus(phi.re, phi.im, *r1, *r2).0);
                out.rows_mut(4, 2 * n).copy_from(&z.rows(0, 2 * n));
                out
            }
        }
    }

    /// `ambient × 2n` matrix of first derivatives.
    pub fn jacobian(&self, z: &RVec) -> RMat {
        let n = self.n;
        let w = chart_to_complex(z, n);
        match &self.kind {
            ModelKind::Graph { g } => {
                let m = n + 2;
                let grads = g.grad(&w);
                let mut jac = RMat::zeros(2 * m, 2 * n);
                for a in 0..2 * n {
                    let (j, c) = coord_factor(a, n);
                    // Identity block: F_k = w_k.
                    let d = c;
                    jac[(j, a)] = d.re;
                    jac[(m + j, a)] = d.im;
                    for (k, gr) in grads.iter().enumerate() {
                        let d = c * gr[j];
                        jac[(n + k, a)] = d.re;
                        jac[(m + n + k, a)] = d.im;
                    }
                }
                jac
            }
            ModelKind::Product { c, b, r1, r2 } => {
                let (phi, dphi) = phi_jets(c, b, &w);
                let (_, gs, gt, _, _) = torus(phi.re, phi.im, *r1, *r2);
                let mut jac = RMat::zeros(2 * n + 4, 2 * n);
                for a in 0..2 * n {
                    let (j, cf) = coord_factor(a, n);
                    let d = cf * dphi[j];
                    jac.view_mut((0, a), (4, 1)).copy_from(&(&gs * d.re + &gt * d.im));
                    jac[(4 + a, a)] = 1.0;
                }
                jac
            }
        }
    }

    /// Second derivatives `∂_a ∂_b f`, indexed `a·2n + b`.
    pub fn hessian(&self, z: &RVec) -> Vec<RVec> {
        let n = self.n;
        let d = 2 * n;
        let w = chart_to_complex(z, n);
        let mut out = vec![RVec::zeros(self.ambient_dim()); d * d];
        match &self.kind {
            ModelKind::Graph { g } => {
                let m = n + 2;
                let hs = g.hess(&w);
                for a in 0..d {
                    let (ja, ca) = coord_factor(a, n);
                    for bb in 0..d {
                        let (jb, cb) = coord_factor(bb, n);
                        let v = &mut out[a * d + bb];
                        for (k, h) in hs.iter().enumerate() {
                            let e = ca * cb * h[(ja, jb)];
                            v[n + k] = e.re;
                            v[m + n + k] = e.im;
                        }
                    }
                }
            }
            ModelKind::Product { c, b, r1, r2 } => {
                let (phi, dphi) = phi_jets(c, b, &w);
                let (_, gs, gt, gss, gtt) = torus(phi.re, phi.im, *r1, *r2);
                for a in 0..d {
                    let (ja, ca) = coord_factor(a, n);
                    let da = ca * dphi[ja];
                    for bb in 0..d {
                        let (jb, cb) = coord_factor(bb, n);
                        let db = cb * dphi[jb];
                        let dab = ca * cb * b[(ja, jb)];
                        let top = &gss * (da.re * db.re) + &gtt * (da.im * db.im) + &gs * dab.re + &gt * dab.im;
                        out[a * d + bb].rows_mut(0, 4).copy_from(&top);
                    }
                }
            }
        }
        out
    }
}

fn phi_jets(c: &CVec, b: &CMat, w: &CVec) -> (C64, CVec) {
    let bw = b * w;
    let phi = (c.transpose() * w)[(0, 0)] + (w.transpose() * &bw)[(0, 0)] * 0.5;
    (phi, c + bw)
}

/// Clifford torus `g(s,t)` and its derivatives `g, g_s, g_t, g_ss, g_tt` (`g_st = 0`).
fn torus(s: f64, t: f64, r1: f64, r2: f64) -> (RVec, RVec, RVec, RVec, RVec) {
    let (a, b) = (s / r1, t / r2);
    (
        RVec::from_vec(vec![r1 * a.cos(), r1 * a.sin(), r2 * b.cos(), r2 * b.sin()]),
        RVec::from_vec(vec![-a.sin(), a.cos(), 0.0, 0.0]),
        RVec::from_vec(vec![0.0, 0.0, -b.sin(), b.cos()]),
        RVec::from_vec(vec![-a.cos() / r1, -a.sin() / r1, 0.0, 0.0]),
        RVec::from_vec(vec![0.0, 0.0, -b.cos() / r2, -b.sin() / r2]),
    )
}

/// Pointwise first-order data: metric, `J`-adapted orthonormal frame, normal frame.
#[derive(Debug, Clone)]
struct LocalFrame {
    jac: RMat,
    /// Columns: chart coordinates of `ε_1 … ε_{2n}`.
    chart_frame: RMat,
    /// Ambient `ε_a = df(chart_frame[:, a])`.
    tangent: RMat,
    normal: Vec<RVec>,
}

/// `J`-adapted Gram–Schmidt: `ε_i` from `∂_{x_i}` orthogonalized against all previous
/// `ε_j, Jε_j`, and `ε_{n+i} = J ε_i`.
fn adapted_chart_frame(metric: &RMat, n: usize) -> Result<RMat, ImmersionError> {
    let jc = linalg::standard_complex_structure(n);
    let mut frame = RMat::zeros(2 * n, 2 * n);
    let inner = |u: &RVec, v: &RVec| (u.transpose() * metric * v)[(0, 0)];
    for i in 0..n {
        let mut v = RVec::zeros(2 * n);
        v[i] = 1.0;
        for _ in 0..2 {
            for j in 0..i {
                for col in [j, n + j] {
                    let e = frame.column(col).into_owned();
                    let c = inner(&e, &v);
                    v -= e * c;
                }
            }
        }
        let norm = inner(&v, &v).sqrt();
        if !(norm > 1e-10) {
            return Err(ImmersionError::RankDeficient);
        }
        v /= norm;
        let jv = &jc * &v;
        frame.set_column(i, &v);
        frame.set_column(n + i, &jv);
    }
    Ok(frame)
}

/// Normal frame obtained by projecting `seed` vectors onto the normal space and
/// orthonormalizing them in order.
fn seeded_normal_frame(tangent: &RMat, seed: &[RVec], p: usize, min_norm: f64) -> Option<Vec<RVec>> {
    let tbasis: Vec<RVec> = (0..tangent.ncols()).map(|a| tangent.column(a).into_owned()).collect();
    let mut frame: Vec<RVec> = Vec::with_capacity(p);
    for s in seed {
        if frame.len() == p {
            break;
        }
        let mut all = tbasis.clone();
        all.extend(frame.iter().cloned());
        if let Some(v) = linalg::gram_schmidt_step(&all, s, min_norm) {
            frame.push(v);
        }
    }
    (frame.len() == p).then_some(frame)
}

impl ImmersionModel {
    fn check_domain(&self, z: &RVec, margin: f64) -> Result<(), ImmersionError> {
        if z.len() != 2 * self.n {
            return Err(ImmersionError::InvalidParams(format!("chart point has length {}, expected {}", z.len(), 2 * self.n)));
        }
        if z.iter().any(|x| x.abs() + margin >= self.domain_radius()) {
            return Err(ImmersionError::OutsideDomain(margin));
        }
        Ok(())
    }

    fn local_frame(&self, z: &RVec, seed: Option<&[RVec]>) -> Result<LocalFrame, ImmersionError> {
        let jac = self.jacobian(z);
        let metric = jac.transpose() * &jac;
        let chart_frame = adapted_chart_frame(&metric, self.n)?;
        let tangent = &jac * &chart_frame;
        let normal = match seed {
            Some(s) => seeded_normal_frame(&tangent, s, self.p(), 1e-3),
            None => {
                let d = self.ambient_dim();
                let standard: Vec<RVec> = (0..d)
                    .map(|k| {
                        let mut e = RVec::zeros(d);
                        e[k] = 1.0;
                        e
                    })
                    .collect();
                seeded_normal_frame(&tangent, &standard, self.p(), 0.3)
                    .or_else(|| seeded_normal_frame(&tangent, &standard, self.p(), 1e-6))
            }
        }
        .ok_or(ImmersionError::RankDeficient)?;
        Ok(LocalFrame { jac, chart_frame, tangent, normal })
    }

    /// Coordinate second fundamental form `a^α_{kl} = ⟨∂_k∂_l f, ξ_α⟩`.
    fn coordinate_sff(&self, z: &RVec, normal: &[RVec]) -> Vec<RMat> {
        let d = 2 * self.n;
        let hess = self.hessian(z);
        normal.iter().map(|xi| RMat::from_fn(d, d, |k, l| hess[k * d + l].dot(xi))).collect()
    }
}

/// A sampled point with frames, `(H, S)` and normal connection forms.
#[derive(Debug, Clone, Serialize)]
pub struct SampledPoint {
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub z: RVec,
    #[serde(serialize_with = "linalg::ser::rvec")]
    pub f_value: RVec,
    /// Ambient vectors `ε_1 … ε_{2n}` (columns), orthonormal, `ε_{n+i} = J ε_i`.
    #[serde(serialize_with = "linalg::ser::rmat")]
    pub tangent_frame: RMat,
    /// Chart coordinates of the same frame.
    #[serde(serialize_with = "linalg::ser::rmat")]
    pub chart_frame: RMat,
    #[serde(serialize_with = "linalg::ser::rvecs")]
    pub normal_frame: Vec<RVec>,
    pub sff: SecondFundamentalFormData,
    /// `φ_{αβ}(ε_a)` as one `p × p` matrix per frame vector.
    #[serde(serialize_with = "linalg::ser::rmats")]
    pub normal_connection: Vec<RMat>,
    #[serde(serialize_with = "linalg::ser::rmat")]
    pub metric: RMat,
    /// Shape forms `A^{ξ_α}` in the frame `ε`.
    #[serde(skip)]
    pub shape_forms: Vec<RMat>,
    pub fd_step: f64,
}

impl SampledPoint {
    pub fn n(&self) -> usize {
        self.sff.n()
    }

    pub fn p(&self) -> usize {
        self.sff.p()
    }

    /// `φ(u)` for a tangent vector `u` given in the frame `ε`.
    pub fn connection_along(&self, u: &RVec) -> RMat {
        let p = self.p();
        let mut out = RMat::zeros(p, p);
        for (a, m) in self.normal_connection.iter().enumerate() {
            out += m * u[a];
        }
        out
    }

    /// Largest antisymmetry defect of the connection forms.
    pub fn connection_antisymmetry(&self) -> f64 {
        self.normal_connection.iter().map(|m| (m + m.transpose()).amax()).fold(0.0, f64::max)
    }

    /// Same point expressed in the normal frame `ξ'_α = Σ_β q[(β, α)] ξ_β`.
    pub fn rotate_normal(&self, q: &RMat) -> SampledPoint {
        let normal_frame: Vec<RVec> = (0..self.p())
            .map(|a| {
                let mut v = RVec::zeros(self.f_value.len());
                for b in 0..self.p() {
                    v += &self.normal_frame[b] * q[(b, a)];
                }
                v
            })
            .collect();
        let sff = self.sff.rotate_normal(q);
        SampledPoint {
            normal_frame,
            shape_forms: sff.shape_forms(),
            sff,
            normal_connection: self.normal_connection.iter().map(|m| q.transpose() * m * q).collect(),
            ..self.clone()
        }
    }

    /// Normal frame vectors as ambient vectors for a normal vector given in frame coordinates.
    pub fn normal_vector(&self, coords: &RVec) -> RVec {
        let mut v = RVec::zeros(self.f_value.len());
        for (a, xi) in self.normal_frame.iter().enumerate() {
            v += xi * coords[a];
        }
        v
    }
}

/// Samples the model at `z`. Connection forms are central differences of the normal frame
/// field seeded by the frame at `z` (pass `seed` to seed the frame at `z` itself).
pub fn sample_point(model: &ImmersionModel, z: &RVec, fd_step: f64) -> Result<SampledPoint, ImmersionError> {
    sample_point_seeded(model, z, fd_step, None)
}

fn frame_sff(model: &ImmersionModel, z: &RVec, base: &LocalFrame) -> Result<(Vec<RMat>, SecondFundamentalFormData), ImmersionError> {
    let n = model.n();
    let d = 2 * n;
    let hess = model.hessian(z);
    let shape_forms: Vec<RMat> = base
        .normal
        .iter()
        .map(|xi| {
            let coord = RMat::from_fn(d, d, |k, l| hess[k * d + l].dot(xi));
            let f = base.chart_frame.transpose() * coord * &base.chart_frame;
            (&f + f.transpose()) * 0.5
        })
        .collect();
    let mut h = Vec::with_capacity(model.p());
    let mut s = Vec::with_capacity(model.p());
    for a in &shape_forms {
        let (ha, sa) = split_shape_form(a);
        // Exact Hermitian / symmetric structure from the split formulas.
        h.push((&ha + ha.adjoint()) * C64::new(0.5, 0.0));
        s.push((&sa + sa.transpose()) * C64::new(0.5, 0.0));
    }
    Ok((shape_forms, SecondFundamentalFormData::new(n, model.p(), h, s)?))
}

/// Normal frame and `(H, S)` at `z` from exact jets, without the connection.
pub fn pointwise_sff(
    model: &ImmersionModel,
    z: &RVec,
    seed: Option<&[RVec]>,
) -> Result<(Vec<RVec>, SecondFundamentalFormData), ImmersionError> {
    model.check_domain(z, 0.0)?;
    let base = model.local_frame(z, seed)?;
    let (_, sff) = frame_sff(model, z, &base)?;
    Ok((base.normal, sff))
}

pub fn sample_point_seeded(
    model: &ImmersionModel,
    z: &RVec,
    fd_step: f64,
    seed: Option<&[RVec]>,
) -> Result<SampledPoint, ImmersionError> {
    if !(fd_step > 0.0) {
        return Err(ImmersionError::InvalidParams(format!("fd_step must be positive, got {fd_step}")));
    }
    model.check_domain(z, 2.0 * fd_step)?;
    let n = model.n();
    let d = 2 * n;
    let base = model.local_frame(z, seed)?;
    let (shape_forms, sff) = frame_sff(model, z, &base)?;
    let coord_conn = coordinate_connection(model, z, fd_step, &base.normal)?;
    let normal_connection = (0..d)
        .map(|a| {
            let mut m = RMat::zeros(model.p(), model.p());
            for (k, ck) in coord_conn.iter().enumerate() {
                m += ck * base.chart_frame[(k, a)];
            }
            m
        })
        .collect();
    Ok(SampledPoint {
        z: z.clone(),
        f_value: model.value(z),
        metric: base.jac.transpose() * &base.jac,
        tangent_frame: base.tangent,
        chart_frame: base.chart_frame,
        normal_frame: base.normal,
        sff,
        normal_connection,
        shape_forms,
        fd_step,
    })
}

/// `φ_{αβ}(∂_k) = ⟨(ξ_α(z + h e_k) − ξ_α(z − h e_k)) / 2h, ξ_β(z)⟩` with the neighboring
/// frames seeded by `normal`.
fn coordinate_connection(
    model: &ImmersionModel,
    z: &RVec,
    h: f64,
    normal: &[RVec],
) -> Result<Vec<RMat>, ImmersionError> {
    let d = 2 * model.n();
    let p = model.p();
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let mut zp = z.clone();
        zp[k] += h;
        let mut zm = z.clone();
        zm[k] -= h;
        let fp = model.local_frame(&zp, Some(normal))?.normal;
        let fm = model.local_frame(&zm, Some(normal))?.normal;
        let raw = RMat::from_fn(p, p, |a, b| (&fp[a] - &fm[a]).dot(&normal[b]) / (2.0 * h));
        // The symmetric part is an O(h²) artifact of the difference quotient.
        out.push((&raw - raw.transpose()) * 0.5);
    }
    Ok(out)
}

/// Christoffel symbols of the first kind `Γ_{kl,m} = ⟨∂_k∂_l f, ∂_m f⟩` and the metric.
fn christoffel(model: &ImmersionModel, z: &RVec) -> (Vec<RMat>, RMat) {
    let d = 2 * model.n();
    let jac = model.jacobian(z);
    let hess = model.hessian(z);
    let g = jac.transpose() * &jac;
    let ginv = g.clone().try_inverse().expect("metric is positive definite");
    // Γ^j_{kl} as matrices indexed [j][(k, l)].
    let gamma: Vec<RMat> = (0..d)
        .map(|j| {
            RMat::from_fn(d, d, |k, l| {
                (0..d).map(|m| ginv[(j, m)] * hess[k * d + l].dot(&jac.column(m))).sum()
            })
        })
        .collect();
    (gamma, g)
}

/// Codazzi tensor `C^α(k, l, m)` in coordinates, indexed `[α][k·d² + l·d + m]`.
fn codazzi_tensor(model: &ImmersionModel, z: &RVec, h: f64, normal: &[RVec], conn: &[RMat]) -> Result<Vec<Vec<f64>>, ImmersionError> {
    let d = 2 * model.n();
    let p = model.p();
    let a0 = model.coordinate_sff(z, normal);
    let mut da = Vec::with_capacity(d);
    for k in 0..d {
        let mut zp = z.clone();
        zp[k] += h;
        let mut zm = z.clone();
        zm[k] -= h;
        let np = model.local_frame(&zp, Some(normal))?.normal;
        let nm = model.local_frame(&zm, Some(normal))?.normal;
        let ap = model.coordinate_sff(&zp, &np);
        let am = model.coordinate_sff(&zm, &nm);
        da.push((0..p).map(|al| (&ap[al] - &am[al]) / (2.0 * h)).collect::<Vec<RMat>>());
    }
    let (gamma, _) = christoffel(model, z);
    // ∇_k a_{lm} = ∂_k a_{lm} − Γ^j_{kl} a_{jm} − Γ^j_{km} a_{lj} − Σ_β φ_{αβ}(∂_k) a^β_{lm}
    let nabla = |al: usize, k: usize, l: usize, m: usize| -> f64 {
        let mut v = da[k][al][(l, m)];
        for j in 0..d {
            v -= gamma[j][(k, l)] * a0[al][(j, m)] + gamma[j][(k, m)] * a0[al][(l, j)];
        }
        for b in 0..p {
            v -= conn[k][(al, b)] * a0[b][(l, m)];
        }
        v
    };
    let mut out = vec![vec![0.0; d * d * d]; p];
    for (al, t) in out.iter_mut().enumerate() {
        for k in 0..d {
            for l in 0..d {
                for m in 0..d {
                    t[k * d * d + l * d + m] = nabla(al, k, l, m) - nabla(al, l, k, m);
                }
            }
        }
    }
    Ok(out)
}

/// Max residual of the Codazzi equation over coordinate triples and the normal frame.
pub fn check_codazzi(model: &ImmersionModel, z: &RVec, fd_step: f64) -> Result<f64, ImmersionError> {
    check_codazzi_with(model, z, fd_step, 0.0)
}

/// As [`check_codazzi`], with every connection coefficient `φ_{12}` shifted by `corruption`
/// (antisymmetrically), for sensitivity tests.
pub fn check_codazzi_with(model: &ImmersionModel, z: &RVec, fd_step: f64, corruption: f64) -> Result<f64, ImmersionError> {
    model.check_domain(z, 2.0 * fd_step)?;
    let base = model.local_frame(z, None)?;
    let mut conn = coordinate_connection(model, z, fd_step, &base.normal)?;
    for c in conn.iter_mut() {
        c[(0, 1)] += corruption;
        c[(1, 0)] -= corruption;
    }
    let t = codazzi_tensor(model, z, fd_step, &base.normal, &conn)?;
    Ok(t.iter().flat_map(|v| v.iter()).fold(0.0_f64, |m, x| m.max(x.abs())))
}

/// Codazzi equation for minimal submanifolds: the components `C^α(e_i, ē_j, e_k)` of the
/// complexified Codazzi tensor in the unitary frame, which carry the identity relating
/// `S_{∇^⊥_{Ȳ} ξ} X` to `∇_{Ȳ}(S_ξ X) − S_ξ(∇_{Ȳ} X)`.
pub fn check_minimal_codazzi(model: &ImmersionModel, z: &RVec, fd_step: f64, tol_geo: f64) -> Result<f64, ImmersionError> {
    let point = sample_point(model, z, fd_step)?;
    let m = is_minimal(&point.sff, tol_geo)?;
    if !m.minimal {
        return Err(ImmersionError::Precondition(format!("point is not minimal (|tr H| = {:.3e})", m.trace_norm)));
    }
    let n = model.n();
    let d = 2 * n;
    let base = model.local_frame(z, None)?;
    let conn = coordinate_connection(model, z, fd_step, &base.normal)?;
    let t = codazzi_tensor(model, z, fd_step, &base.normal, &conn)?;
    // e_i in chart coordinates: (ε_i − √−1 ε_{n+i}) / √2.
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let e: Vec<CVec> = (0..n)
        .map(|i| {
            CVec::from_fn(d, |k, _| C64::new(base.chart_frame[(k, i)] * s2, -base.chart_frame[(k, n + i)] * s2))
        })
        .collect();
    let mut worst = 0.0_f64;
    for tal in &t {
        for i in 0..n {
            for j in 0..n {
                let ebar = e[j].conjugate();
                for kk in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..d {
                        for l in 0..d {
                            let c = e[i][k] * ebar[l];
                            if c.norm() == 0.0 {
                                continue;
                            }
                            for m in 0..d {
                                acc += c * e[kk][m] * tal[k * d * d + l * d + m];
                            }
                        }
                    }
                    worst = worst.max(acc.norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Largest `|⟨∇^⊥_v η, ξ⟩|` over unit `v` in the kernel of `A_η` and unit `ξ ∈ E`, for `η` in
/// an orthonormal basis of `E′`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelConnectionReport {
    pub residual: f64,
    /// Some kernel decision had a singular value within a factor 10 of its threshold.
    pub inconclusive: bool,
}

pub fn check_kernel_connection(point: &SampledPoint, part: &AlmostComplexPart, tol: f64) -> KernelConnectionReport {
    let mut residual = 0.0_f64;
    let mut inconclusive = false;
    for eta in &part.e_prime.basis {
        let a = point.sff.shape_form(eta).expect("unit vector");
        let sv = linalg::singular_values(&a);
        let smax = sv.first().copied().unwrap_or(0.0).max(1e-300);
        if sv.iter().any(|s| *s / smax > tol / 10.0 && *s / smax <= tol * 10.0) {
            inconclusive = true;
        }
        let kernel = numerical_kernel(&a, tol).expect("finite");
        if kernel.dim() == 0 || part.e.dim() == 0 {
            continue;
        }
        // Spectral norm of (v, ξ) ↦ ⟨∇^⊥_v η, ξ⟩: independent of the bases chosen.
        let m = RMat::from_fn(kernel.dim(), part.e.dim(), |i, j| {
            (point.connection_along(&kernel.basis[i]).transpose() * eta).dot(&part.e.basis[j])
        });
        residual = residual.max(linalg::singular_values(&m)[0]);
    }
    KernelConnectionReport { residual, inconclusive }
}

/// Commutation defect of `J` with the `E`-block of the normal connection.
pub fn check_admissibility(point: &SampledPoint, part: &AlmostComplexPart) -> Result<f64, ImmersionError> {
    match part.e.dim() {
        0 => Err(ImmersionError::Precondition("no almost complex structure on the normal space".into())),
        2 => {
            // A 2×2 antisymmetric block always commutes with J; report the antisymmetry defect.
            let (x3, x4) = (&part.e.basis[0], &part.e.basis[1]);
            Ok(point
                .normal_connection
                .iter()
                .map(|m| ((x3.transpose() * m * x4)[(0, 0)] + (x4.transpose() * m * x3)[(0, 0)]).abs())
                .fold(0.0, f64::max))
        }
        4 => {
            let jn = part.j_on_normal();
            let f1 = part.e.basis[0].clone();
            let f3 = &jn * &f1;
            let f2 = linalg::gram_schmidt_step(&[f1.clone(), f3.clone()], &part.e.basis[1], 1e-6)
                .or_else(|| linalg::gram_schmidt_step(&[f1.clone(), f3.clone()], &part.e.basis[2], 1e-6))
                .ok_or_else(|| ImmersionError::Precondition("degenerate J".into()))?;
            let f4 = &jn * &f2;
            let frame = RMat::from_columns(&[f1, f2, f3, f4]);
            let mut worst = 0.0_f64;
            for m in &point.normal_connection {
                let phi = frame.transpose() * m * &frame;
                let b1 = phi.view((0, 0), (2, 2)).into_owned();
                let b2 = phi.view((0, 2), (2, 2)).into_owned();
                let b3 = phi.view((2, 2), (2, 2)).into_owned();
                worst = worst.max((&b1 - &b3).norm() + (b2.transpose() - &b2).norm());
            }
            Ok(worst)
        }
        k => Err(ImmersionError::Precondition(format!("unsupported complex part dimension {k}"))),
    }
}

/// Grid specifications: `random:N:seed` (uniform in the inner half of the domain) or
/// `slice:a:b:count` (a `count × count` grid on chart axes `a, b` through the origin,
/// spanning the inner half of the domain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    Random { count: usize, seed: u64 },
    Slice { a: usize, b: usize, count: usize },
}

impl std::str::FromStr for GridSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<u64>().map_err(|e| format!("bad number {x:?} in grid spec: {e}"));
        match parts.as_slice() {
            ["random", c, seed] => Ok(GridSpec::Random { count: num(c)? as usize, seed: num(seed)? }),
            ["slice", a, b, c] => Ok(GridSpec::Slice { a: num(a)? as usize, b: num(b)? as usize, count: num(c)? as usize }),
            _ => Err(format!("unrecognized grid spec {s:?} (expected random:N:seed or slice:a:b:count)")),
        }
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridSpec::Random { count, seed } => write!(f, "random:{count}:{seed}"),
            GridSpec::Slice { a, b, count } => write!(f, "slice:{a}:{b}:{count}"),
        }
    }
}

impl GridSpec {
    pub fn points(&self, model: &ImmersionModel) -> Result<Vec<RVec>, ImmersionError> {
        use rand::Rng;
        let d = 2 * model.n();
        let r = 0.5 * model.domain_radius();
        match self {
            GridSpec::Random { count, seed } => {
                let mut g = rng(*seed);
                Ok((0..*count).map(|_| RVec::from_fn(d, |_, _| g.gen_range(-r..r))).collect())
            }
            GridSpec::Slice { a, b, count } => {
                if *a >= d || *b >= d || a == b || *count == 0 {
                    return Err(ImmersionError::InvalidParams(format!("invalid slice grid {self}")));
                }
                let coord = |i: usize| if *count == 1 { 0.0 } else { -r + 2.0 * r * i as f64 / (*count - 1) as f64 };
                let mut out = Vec::new();
                for i in 0..*count {
                    for j in 0..*count {
                        let mut z = RVec::zeros(d);
                        z[*a] = coord(i);
                        z[*b] = coord(j);
                        out.push(z);
                    }
                }
                Ok(out)
            }
        }
    }
}
