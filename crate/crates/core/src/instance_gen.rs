//! Seeded generators of second-fundamental-form data satisfying the symmetry conditions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{max_modulus, CMat, RMat, RVec, C64, I};
use crate::sff::{check_symmetry, kernel_report, SecondFundamentalFormData, SffError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("rejection budget exhausted after {0} draws")]
    RejectionBudget(usize),
    #[error("repair did not converge within {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Sff(#[from] SffError),
}

/// Parameters of the diagonal normal form on a pair of normal directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagParams {
    pub a: f64,
    pub b: f64,
    pub delta: u8,
}

impl Default for DiagParams {
    fn default() -> Self {
        Self { a: 2.0, b: 1.0, delta: 1 }
    }
}

impl DiagParams {
    fn validate(&self) -> Result<(), GenError> {
        if !(self.a >= 0.0 && self.b >= 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(GenError::InvalidParams(format!("a, b must be finite and ≥ 0 (a={}, b={})", self.a, self.b)));
        }
        if self.delta > 1 {
            return Err(GenError::InvalidParams(format!("delta must be 0 or 1, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GeneratorKind {
    Holomorphic,
    DiagNormalForm { params: DiagParams },
    Mixed { params: DiagParams },
    /// Mixed instance with `H = 0`: `S` on `E′` in normal form plus a holomorphic part on `E`.
    MixedMinimal { params: DiagParams },
    Repair { budget: usize },
}

/// Full description of a generated instance; identical specs give identical output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

pub fn generate(spec: &GeneratorSpec) -> Result<SecondFundamentalFormData, GenError> {
    let fixed_p = |want: usize| {
        if spec.p != want {
            Err(GenError::InvalidParams(format!("this generator has p = {want}, got {}", spec.p)))
        } else {
            Ok(())
        }
    };
    match spec.kind {
        GeneratorKind::Holomorphic => gen_holomorphic(spec.n, spec.p, spec.seed),
        GeneratorKind::DiagNormalForm { params } => {
            fixed_p(2)?;
            gen_diag_normal_form(spec.n, params)
        }
        GeneratorKind::Mixed { params } => {
            fixed_p(4)?;
            gen_mixed(spec.n, spec.seed, params)
        }
        GeneratorKind::MixedMinimal { params } => {
            fixed_p(4)?;
            gen_mixed_minimal(spec.n, spec.seed, params)
        }
        GeneratorKind::Repair { budget } => gen_repair(spec.n, spec.p, spec.seed, budget).map(|r| r.sff),
    }
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-1.0..1.0)
}

pub(crate) fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(uniform(rng), uniform(rng))
}

pub(crate) fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let z = random_complex(rng);
            m[(i, j)] = z;
            m[(j, i)] = z;
        }
    }
    m
}

pub(crate) fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(uniform(rng), 0.0);
        for j in (i + 1)..n {
            let z = random_complex(rng);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Random orthogonal matrix (QR of a random matrix with sign-fixed diagonal).
pub fn random_orthogonal(rng: &mut ChaCha8Rng, p: usize) -> RMat {
    let m = RMat::from_fn(p, p, |_, _| uniform(rng));
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let m = CMat::from_fn(n, n, |_, _| random_complex(rng));
    m.qr().q()
}

/// Holomorphic-type values on consecutive normal pairs: `S[2k+1] = −√−1 S[2k]`.
fn holomorphic_pairs(rng: &mut ChaCha8Rng, n: usize, pairs: usize) -> Vec<CMat> {
    let mut s = Vec::with_capacity(2 * pairs);
    for _ in 0..pairs {
        let c = random_symmetric(rng, n);
        s.push(c.clone());
        s.push(c * (-I));
    }
    s
}

const REJECTION_BUDGET: usize = 64;

/// `H = 0` and `S` with values in an isotropic subspace compatible with a random orthogonal
/// complex structure on `ℝ^p`.
pub fn gen_holomorphic(n: usize, p: usize, seed: u64) -> Result<SecondFundamentalFormData, GenError> {
    if n == 0 || p == 0 || p % 2 == 1 {
        return Err(GenError::InvalidParams(format!("need n ≥ 1 and even p ≥ 2 (n={n}, p={p})")));
    }
    let mut rng = rng(seed);
    for _ in 0..REJECTION_BUDGET {
        let s = holomorphic_pairs(&mut rng, n, p / 2);
        if s.iter().any(|m| max_modulus(m) < 1e-3) {
            continue;
        }
        let base = SecondFundamentalFormData::new(n, p, vec![CMat::zeros(n, n); p], s)?;
        let q = random_orthogonal(&mut rng, p);
        return Ok(base.rotate_normal(&q));
    }
    Err(GenError::RejectionBudget(REJECTION_BUDGET))
}

fn diag_entry(n: usize, i: usize, v: f64) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, i)] = C64::new(v, 0.0);
    m
}

/// `H[0] = diag(1,0,…)`, `H[1] = diag(0,δ,0,…)`, `S[0] = diag(a,0,…)`, `S[1] = diag(0,b,0,…)`.
pub fn gen_diag_normal_form(n: usize, params: DiagParams) -> Result<SecondFundamentalFormData, GenError> {
    params.validate()?;
    if n < 2 {
        return Err(GenError::InvalidParams(format!("need n ≥ 2, got {n}")));
    }
    let h = vec![diag_entry(n, 0, 1.0), diag_entry(n, 1, params.delta as f64)];
    let s = vec![diag_entry(n, 0, params.a), diag_entry(n, 1, params.b)];
    Ok(SecondFundamentalFormData::new(n, 2, h, s)?)
}

/// Diagonal normal form on `ξ₁, ξ₂` plus a holomorphic part on `ξ₃, ξ₄` with trivial common kernel.
pub fn gen_mixed(n: usize, seed: u64, params: DiagParams) -> Result<SecondFundamentalFormData, GenError> {
    let base = gen_diag_normal_form(n, params)?;
    with_holomorphic_part(n, seed, base.h().to_vec(), base.s().to_vec())
}

/// Minimal (`H = 0`) mixed instance: `S[0] = diag(a,0,…)`, `S[1] = diag(0,b,0,…)` and a
/// holomorphic part on `ξ₃, ξ₄`.
pub fn gen_mixed_minimal(n: usize, seed: u64, params: DiagParams) -> Result<SecondFundamentalFormData, GenError> {
    params.validate()?;
    if n < 2 || params.a == 0.0 || params.b == 0.0 {
        return Err(GenError::InvalidParams("need n ≥ 2 and a, b > 0".into()));
    }
    let s = vec![diag_entry(n, 0, params.a), diag_entry(n, 1, params.b)];
    with_holomorphic_part(n, seed, vec![CMat::zeros(n, n); 2], s)
}

/// Minimal instance in the stratum where `ker S′` has codimension one:
/// `S[0] = a·e₁e₁ᵀ`, `S[1] = λ·a·e₁e₁ᵀ` with non-real `λ ≠ ±√−1`.
pub fn gen_minimal_rank_one(n: usize, seed: u64, a: f64, lambda: C64) -> Result<SecondFundamentalFormData, GenError> {
    if n < 2 || a <= 0.0 || lambda.im.abs() < 1e-6 || (lambda * lambda + 1.0).norm() < 1e-6 {
        return Err(GenError::InvalidParams(format!("need n ≥ 2, a > 0 and non-real λ ≠ ±√−1 (λ={lambda})")));
    }
    let s0 = diag_entry(n, 0, a);
    let s1 = &s0 * lambda;
    with_holomorphic_part(n, seed, vec![CMat::zeros(n, n); 2], vec![s0, s1])
}

fn with_holomorphic_part(
    n: usize,
    seed: u64,
    h_prime: Vec<CMat>,
    s_prime: Vec<CMat>,
) -> Result<SecondFundamentalFormData, GenError> {
    let mut rng = rng(seed);
    for _ in 0..REJECTION_BUDGET {
        let hol = holomorphic_pairs(&mut rng, n, 1);
        let mut h = h_prime.clone();
        h.extend([CMat::zeros(n, n), CMat::zeros(n, n)]);
        let mut s = s_prime.clone();
        s.extend(hol);
        let sff = SecondFundamentalFormData::new(n, 4, h, s)?;
        let k = kernel_report(&sff, 1e-6)?;
        if k.nu0 == 0 {
            return Ok(sff);
        }
    }
    Err(GenError::RejectionBudget(REJECTION_BUDGET))
}

/// Result of [`gen_repair`].
#[derive(Debug, Clone)]
pub struct RepairOutcome {
    pub sff: SecondFundamentalFormData,
    pub iterations: usize,
    pub residual: f64,
    pub redraws: usize,
}

/// Real parametrization of `(H, S)`: per normal index, the `n²` reals of a Hermitian matrix
/// followed by the `n(n+1)` reals of a complex symmetric matrix.
struct Param {
    n: usize,
    p: usize,
}

impl Param {
    fn per_alpha(&self) -> usize {
        self.n * self.n + self.n * (self.n + 1)
    }

    fn len(&self) -> usize {
        self.p * self.per_alpha()
    }

    fn unpack(&self, theta: &RVec) -> (Vec<CMat>, Vec<CMat>) {
        let n = self.n;
        let mut hs = Vec::with_capacity(self.p);
        let mut ss = Vec::with_capacity(self.p);
        for a in 0..self.p {
            let mut k = a * self.per_alpha();
            let mut h = CMat::zeros(n, n);
            for i in 0..n {
                h[(i, i)] = C64::new(theta[k], 0.0);
                k += 1;
                for j in (i + 1)..n {
                    let z = C64::new(theta[k], theta[k + 1]);
                    k += 2;
                    h[(i, j)] = z;
                    h[(j, i)] = z.conj();
                }
            }
            let mut s = CMat::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let z = C64::new(theta[k], theta[k + 1]);
                    k += 2;
                    s[(i, j)] = z;
                    s[(j, i)] = z;
                }
            }
            hs.push(h);
            ss.push(s);
        }
        (hs, ss)
    }

    fn pack(&self, h: &[CMat], s: &[CMat]) -> RVec {
        let n = self.n;
        let mut theta = Vec::with_capacity(self.len());
        for a in 0..self.p {
            for i in 0..n {
                theta.push(h[a][(i, i)].re);
                for j in (i + 1)..n {
                    theta.push(h[a][(i, j)].re);
                    theta.push(h[a][(i, j)].im);
                }
            }
            for i in 0..n {
                for j in i..n {
                    theta.push(s[a][(i, j)].re);
                    theta.push(s[a][(i, j)].im);
                }
            }
        }
        RVec::from_vec(theta)
    }
}

/// Symmetrized bilinear form `B(u, v)` whose diagonal `B(θ, θ)` lists the independent
/// components of the three symmetry conditions, followed by the normalization `|θ|² − 1`.
fn symmetry_system(n: usize, h1: &[CMat], s1: &[CMat], h2: &[CMat], s2: &[CMat]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut push = |z: C64| {
        out.push(z.re);
        out.push(z.im);
    };
    let pair = |a1: &[CMat], b1: &[CMat], a2: &[CMat], b2: &[CMat], x: usize, y: usize, z: usize, w: usize| {
        let mut acc = C64::new(0.0, 0.0);
        for al in 0..a1.len() {
            acc += a1[al][(x, y)] * b2[al][(z, w)] - a1[al][(z, y)] * b2[al][(x, w)];
            acc += a2[al][(x, y)] * b1[al][(z, w)] - a2[al][(z, y)] * b1[al][(x, w)];
        }
        acc * 0.5
    };
    for x in 0..n {
        for z in (x + 1)..n {
            // Conditions on H·H and S·S are antisymmetric in (y, w) as well.
            for y in 0..n {
                for w in (y + 1)..n {
                    push(pair(h1, h1, h2, h2, x, y, z, w));
                    push(pair(s1, s1, s2, s2, x, y, z, w));
                }
            }
            for y in 0..n {
                for w in 0..n {
                    // H·S is not symmetric in its two slots; symmetrize over the two arguments.
                    let mut acc = C64::new(0.0, 0.0);
                    for al in 0..h1.len() {
                        acc += h1[al][(x, y)] * s2[al][(z, w)] - h1[al][(z, y)] * s2[al][(x, w)];
                        acc += h2[al][(x, y)] * s1[al][(z, w)] - h2[al][(z, y)] * s1[al][(x, w)];
                    }
                    push(acc * 0.5);
                }
            }
        }
    }
    out
}

fn repair_residual(param: &Param, theta: &RVec) -> RVec {
    let (h, s) = param.unpack(theta);
    let mut r = symmetry_system(param.n, &h, &s, &h, &s);
    r.push(theta.norm_squared() - 1.0);
    RVec::from_vec(r)
}

fn repair_jacobian(param: &Param, theta: &RVec, rows: usize) -> RMat {
    let (h, s) = param.unpack(theta);
    let m = param.len();
    let mut jac = RMat::zeros(rows, m);
    for k in 0..m {
        let mut e = RVec::zeros(m);
        e[k] = 1.0;
        let (he, se) = param.unpack(&e);
        // The conditions decouple over normal indices; only the one owning θ_k contributes.
        let a = k / param.per_alpha();
        let col = symmetry_system(param.n, &h[a..=a], &s[a..=a], &he[a..=a], &se[a..=a]);
        for (r, v) in col.iter().enumerate() {
            jac[(r, k)] = 2.0 * v;
        }
        jac[(rows - 1, k)] = 2.0 * theta[k];
    }
    jac
}

/// Random Hermitian `H` and symmetric `S`, driven onto the solution set of the symmetry
/// conditions by Gauss–Newton with step halving, normalized to unit parameter norm.
pub fn gen_repair(n: usize, p: usize, seed: u64, budget: usize) -> Result<RepairOutcome, GenError> {
    if n == 0 || p == 0 || budget == 0 {
        return Err(GenError::InvalidParams(format!("need n, p, budget ≥ 1 (n={n}, p={p}, budget={budget})")));
    }
    let mut rng = rng(seed);
    let h: Vec<CMat> = (0..p).map(|_| random_hermitian(&mut rng, n)).collect();
    let s: Vec<CMat> = (0..p).map(|_| random_symmetric(&mut rng, n)).collect();
    let start = SecondFundamentalFormData::new(n, p, h, s)?;
    repair_from(start, budget, &mut rng)
}

/// Candidates with `H` or `S` zeroed when that block is small next to the other: iterates
/// converging to the `H = 0` or `S = 0` strata approach them only linearly, and the
/// normalized residuals of the vanishing block settle slowly. A snapped candidate is only
/// accepted if it passes the symmetry check itself.
fn snapped_candidates(sff: &SecondFundamentalFormData) -> Vec<SecondFundamentalFormData> {
    let hmax = sff.h().iter().map(max_modulus).fold(0.0, f64::max);
    let smax = sff.s().iter().map(max_modulus).fold(0.0, f64::max);
    let (n, p) = (sff.n(), sff.p());
    let zeros = || vec![CMat::zeros(n, n); p];
    let mut out = Vec::new();
    if hmax > 0.0 && hmax < 1e-3 * smax {
        out.push(SecondFundamentalFormData::new(n, p, zeros(), sff.s().to_vec()).expect("valid blocks"));
    }
    if smax > 0.0 && smax < 1e-3 * hmax {
        out.push(SecondFundamentalFormData::new(n, p, sff.h().to_vec(), zeros()).expect("valid blocks"));
    }
    out
}

/// Gauss–Newton repair starting from a given instance.
pub fn repair_from(
    start: SecondFundamentalFormData,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RepairOutcome, GenError> {
    let (n, p) = (start.n(), start.p());
    let param = Param { n, p };
    let mut redraws = 0;
    let mut theta = param.pack(start.h(), start.s());
    let norm = theta.norm();
    if norm > 0.0 {
        theta /= norm;
    }
    let mut iterations = 0;
    let mut last = f64::INFINITY;
    while iterations <= budget {
        let r = repair_residual(&param, &theta);
        let cost = r.norm();
        last = cost;
        let (h, s) = param.unpack(&theta);
        let candidate = SecondFundamentalFormData::new(n, p, h, s)?;
        let snapped = snapped_candidates(&candidate);
        for c in std::iter::once(candidate).chain(snapped) {
            let residual = check_symmetry(&c).max();
            if residual < 1e-10 {
                return Ok(RepairOutcome { sff: c, iterations, residual, redraws });
            }
        }
        if iterations == budget {
            break;
        }
        iterations += 1;
        let jac = repair_jacobian(&param, &theta, r.len());
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let reg = 1e-12 * jtj.trace().max(1e-300);
        let mut lhs = jtj;
        for i in 0..lhs.nrows() {
            lhs[(i, i)] += reg;
        }
        let step = match lhs.cholesky() {
            Some(ch) => ch.solve(&(-jtr)),
            None => break,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &theta + &step * t;
            if repair_residual(&param, &trial).norm() < cost {
                theta = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Stalled: re-draw from a fresh random point.
            redraws += 1;
            theta = RVec::from_fn(param.len(), |_, _| uniform(rng));
            theta /= theta.norm();
        }
    }
    Err(GenError::NotConverged { iterations, residual: last })
}
