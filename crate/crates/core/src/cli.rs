//! Command implementations behind the `kahler` binary. Every command returns a JSON report and
//! an exit status; rendering and file I/O live in `main.rs`.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::complex_part::{
    rank_bound_report, brute_force_complex_part, find_complex_part, AlmostComplexPart, Classification,
};
use crate::extension::{
    adapt_frame, build_extension, holomorphic_identification, minimality_condition, solve_ruling, verify_kahler,
    with_subbundle_connection, ExtensionError, ExtensionPatch, KahlerReport, PatchGrid, RulingField,
    ALGEBRAIC_KAHLER_TOL, FACTORIZATION_TOL, KAHLER_RESIDUAL_FACTOR, TANGENT_ANGLE_TOL,
};
use crate::immersion::{
    check_admissibility, check_kernel_connection, sample_point, GridSpec, ImmersionError, ImmersionModel, ModelSpec,
    SampledPoint,
};
use crate::instance_gen::{gen_repair, generate, GeneratorKind, GeneratorSpec};
use crate::linalg::RVec;
use crate::report::to_value;
use crate::sff::{check_symmetry, is_minimal, kernel_report, vanishing_normal_directions, SecondFundamentalFormData};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Success = 0,
    VerificationFailed = 1,
    PreconditionNotMet = 2,
    InputError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn worst(self, other: ExitStatus) -> ExitStatus {
        if other.code() > self.code() && other != ExitStatus::InputError {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Input(_) => ExitStatus::InputError,
            CliError::Precondition(_) => ExitStatus::PreconditionNotMet,
        }
    }

    pub fn report(&self) -> Value {
        json!({ "error": self.to_string(), "exit_code": self.status().code() })
    }
}

impl From<ImmersionError> for CliError {
    fn from(e: ImmersionError) -> Self {
        match e {
            ImmersionError::InvalidParams(_) | ImmersionError::OutsideDomain(_) => CliError::Input(e.to_string()),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

impl From<ExtensionError> for CliError {
    fn from(e: ExtensionError) -> Self {
        match e {
            ExtensionError::Immersion(inner) => inner.into(),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Self::Json),
            "text" => Ok(Self::Text),
            _ => Err(format!("unknown format {s:?} (json or text)")),
        }
    }
}

/// Tolerances and seeds shared by all commands. Embedded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tol_alg: f64,
    pub tol_geo: f64,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { tol_alg: 1e-9, tol_geo: 1e-4, fd_step: 1e-3, seed: 0 }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [("tol-alg", self.tol_alg), ("tol-geo", self.tol_geo), ("fd-step", self.fd_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!("--{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub report: Value,
    pub status: ExitStatus,
}

fn output(mut report: Value, status: ExitStatus) -> CommandOutput {
    report["exit_code"] = json!(status.code());
    CommandOutput { report, status }
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: malformed JSON: {e}", path.display())))
}

/// Accepts either a bare `{n, p, H, S}` instance or a `gen` report carrying one under `instance`.
pub fn parse_instance(value: &Value) -> Result<SecondFundamentalFormData, CliError> {
    let inner = value.get("instance").unwrap_or(value);
    serde_json::from_value(inner.clone()).map_err(|e| CliError::Input(format!("invalid instance: {e}")))
}

/// Model spec from a catalog name and a JSON object of parameter overrides.
pub fn parse_model(name: &str, params: Option<&str>, seed: u64) -> Result<ModelSpec, CliError> {
    let base = match name {
        "holo_graph" => ModelSpec::holo_graph(5, seed),
        "product_hypersurface" => ModelSpec::product_hypersurface(5, seed),
        "flat" => ModelSpec::Flat { n: 5 },
        other => return Err(CliError::Input(format!("unknown model {other:?} (holo_graph, product_hypersurface, flat)"))),
    };
    let mut value = to_value(&base);
    if let Some(p) = params {
        let overrides: Value = serde_json::from_str(p).map_err(|e| CliError::Input(format!("--params: {e}")))?;
        let Value::Object(map) = overrides else {
            return Err(CliError::Input("--params must be a JSON object".into()));
        };
        for (k, v) in map {
            if k == "model" {
                return Err(CliError::Input("--params may not change the model name".into()));
            }
            value[k] = v;
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Input(format!("invalid model parameters: {e}")))
}

pub fn cmd_gen(spec: &GeneratorSpec, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let mut report = json!({ "config": cfg, "generator": spec });
    let sff = match spec.kind {
        GeneratorKind::Repair { budget } => {
            let out = gen_repair(spec.n, spec.p, spec.seed, budget).map_err(|e| CliError::Precondition(e.to_string()))?;
            report["repair"] = json!({ "iterations": out.iterations, "residual": out.residual, "redraws": out.redraws });
            out.sff
        }
        _ => generate(spec).map_err(|e| CliError::Input(e.to_string()))?,
    };
    let sym = check_symmetry(&sff);
    report["symmetry"] = to_value(&sym);
    report["instance"] = to_value(&sff);
    let status = if sym.passes(cfg.tol_alg) { ExitStatus::Success } else { ExitStatus::VerificationFailed };
    Ok(output(report, status))
}

/// Every pointwise algebraic diagnostic of one instance.
pub fn cmd_analyze(sff: &SecondFundamentalFormData, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let tol = cfg.tol_alg;
    let sym = check_symmetry(sff);
    let mut report = json!({ "config": cfg, "n": sff.n(), "p": sff.p(), "symmetry": sym });
    if !sym.passes(tol) {
        report["verdict"] = json!("symmetry conditions violated; remaining analyses skipped");
        return Ok(output(report, ExitStatus::VerificationFailed));
    }
    let mut status = ExitStatus::Success;
    let kernels = kernel_report(sff, tol).map_err(|e| CliError::Input(e.to_string()))?;
    report["kernels"] = to_value(&kernels);
    report["minimality"] = to_value(&is_minimal(sff, tol).map_err(|e| CliError::Input(e.to_string()))?);
    let vanishing = vanishing_normal_directions(sff, tol).map_err(|e| CliError::Input(e.to_string()))?;
    report["vanishing_normal_directions"] = to_value(&vanishing);
    match find_complex_part(sff, tol) {
        Ok(part) => report["complex_part"] = part_summary(&part),
        Err(e) => {
            report["complex_part"] = json!({ "error": e.to_string() });
            status = status.worst(ExitStatus::PreconditionNotMet);
        }
    }
    report["rank_bound"] = if sff.p() != 4 {
        json!({ "applicable": false, "reason": format!("p = {} (the rank bound concerns p = 4)", sff.p()) })
    } else {
        match rank_bound_report(sff, tol) {
            Ok(l) => {
                if !l.passed {
                    status = status.worst(ExitStatus::VerificationFailed);
                }
                let mut v = to_value(&l);
                v["applicable"] = json!(true);
                v
            }
            Err(e) => {
                status = status.worst(ExitStatus::PreconditionNotMet);
                json!({ "applicable": true, "error": e.to_string() })
            }
        }
    };
    Ok(output(report, status))
}

fn rvec_json(v: &RVec) -> Value {
    json!(v.iter().collect::<Vec<_>>())
}

fn rmat_json(m: &crate::linalg::RMat) -> Value {
    json!(m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn part_summary(part: &AlmostComplexPart) -> Value {
    let mut v = to_value(part);
    v["borderline"] = json!(part.is_borderline());
    v["j_on_normal"] = rmat_json(&part.j_on_normal());
    v
}

pub fn cmd_complex_part(
    sff: &SecondFundamentalFormData,
    brute_force_starts: Option<usize>,
    cfg: &RunConfig,
) -> Result<CommandOutput, CliError> {
    let part = find_complex_part(sff, cfg.tol_alg).map_err(|e| CliError::Precondition(e.to_string()))?;
    let mut report = json!({ "config": cfg, "complex_part": part_summary(&part) });
    let mut status = ExitStatus::Success;
    if part.residuals.max() > 10.0 * cfg.tol_alg {
        status = ExitStatus::VerificationFailed;
    }
    if let Some(starts) = brute_force_starts {
        let bf = brute_force_complex_part(sff, starts, cfg.seed).map_err(|e| CliError::Precondition(e.to_string()))?;
        let angle = if bf.part.e.dim() == part.e.dim() {
            Some(crate::linalg::max_principal_angle(&bf.part.e, &part.e))
        } else {
            None
        };
        if angle.is_none_or(|a| a > 1e-6) && !bf.inconclusive {
            status = status.worst(ExitStatus::VerificationFailed);
        }
        report["brute_force"] = json!({
            "dim_e": bf.part.e.dim(),
            "classification": bf.part.classification,
            "best_rejected": bf.best_rejected,
            "inconclusive": bf.inconclusive,
            "starts": bf.starts,
            "max_principal_angle": angle,
        });
    }
    Ok(output(report, status))
}

/// Per-point summary used by `immersion sample`, `extend` and `pipeline`.
#[derive(Debug, Clone, Serialize)]
pub struct PointAnalysis {
    pub index: usize,
    #[serde(serialize_with = "crate::linalg::ser::rvec")]
    pub z: RVec,
    pub error: Option<String>,
    /// Why no complex part was computed (e.g. a vanishing shape operator).
    pub complex_part_note: Option<String>,
    pub rank: Option<usize>,
    pub nu: Option<usize>,
    pub minimal: Option<bool>,
    pub h_norm: Option<f64>,
    pub classification: Option<Classification>,
    pub p_prime: Option<usize>,
    /// A rank or classification decision lies within 10× of its threshold.
    pub borderline: bool,
    pub kernel_connection_residual: Option<f64>,
    pub kernel_connection_inconclusive: Option<bool>,
    pub admissibility: Option<f64>,
    /// `‖J_T A_{ξ₃} − A_{ξ₄}‖` in an adapted frame.
    pub algebraic_kahler: Option<f64>,
    pub ruling_residual: Option<f64>,
    pub ruling_transversality: Option<f64>,
    pub minimality_condition: Option<f64>,
    #[serde(skip)]
    pub point: Option<SampledPoint>,
    #[serde(skip)]
    pub part: Option<AlmostComplexPart>,
}

impl PointAnalysis {
    /// Stable plane point of rank ≥ 5, where the ruling construction applies.
    pub fn is_ruling_candidate(&self) -> bool {
        self.error.is_none()
            && !self.borderline
            && self.classification == Some(Classification::Plane)
            && self.rank.is_some_and(|r| r >= 5)
    }

    /// Stable minimal point of rank ≥ 2 with a full complex part.
    pub fn is_holomorphic_candidate(&self) -> bool {
        self.error.is_none()
            && !self.borderline
            && self.classification == Some(Classification::Full)
            && self.minimal == Some(true)
            && self.rank.is_some_and(|r| r >= 2)
    }
}

pub fn analyze_point(model: &ImmersionModel, index: usize, z: &RVec, cfg: &RunConfig) -> PointAnalysis {
    let mut a = PointAnalysis {
        index,
        z: z.clone(),
        error: None,
        complex_part_note: None,
        rank: None,
        nu: None,
        minimal: None,
        h_norm: None,
        classification: None,
        p_prime: None,
        borderline: false,
        kernel_connection_residual: None,
        kernel_connection_inconclusive: None,
        admissibility: None,
        algebraic_kahler: None,
        ruling_residual: None,
        ruling_transversality: None,
        minimality_condition: None,
        point: None,
        part: None,
    };
    if let Err(e) = fill_point(model, z, cfg, &mut a) {
        a.error = Some(e);
    }
    a
}

fn fill_point(model: &ImmersionModel, z: &RVec, cfg: &RunConfig, a: &mut PointAnalysis) -> Result<(), String> {
    let pt = sample_point(model, z, cfg.fd_step).map_err(|e| e.to_string())?;
    let k = kernel_report(&pt.sff, cfg.tol_alg).map_err(|e| e.to_string())?;
    a.rank = Some(k.rank);
    a.nu = Some(k.nu);
    a.borderline = k.rank_margin.is_borderline(cfg.tol_alg, 10.0);
    let m = is_minimal(&pt.sff, cfg.tol_geo).map_err(|e| e.to_string())?;
    a.minimal = Some(m.minimal);
    a.h_norm = Some(m.h_norm);
    let part = match find_complex_part(&pt.sff, cfg.tol_alg) {
        Ok(part) => part,
        Err(e @ crate::complex_part::ComplexPartError::Precondition(_)) => {
            a.complex_part_note = Some(e.to_string());
            a.point = Some(pt);
            return Ok(());
        }
        Err(e) => return Err(e.to_string()),
    };
    a.classification = Some(part.classification);
    a.p_prime = Some(part.p_prime);
    a.borderline |= part.is_borderline();
    let jt = crate::linalg::standard_complex_structure(pt.n());
    match part.classification {
        Classification::Plane if pt.p() == 4 => {
            let adapted = adapt_frame(&pt, &part, None).map_err(|e| e.to_string())?;
            let forms = &adapted.point.shape_forms;
            a.algebraic_kahler = Some((&jt * &forms[2] - &forms[3]).norm());
            // Admissibility is automatic on a plane; reported through the antisymmetry identity.
            a.admissibility = check_admissibility(&adapted.point, &adapted.part).ok();
            if !a.borderline {
                let adapted = with_subbundle_connection(model, &adapted, cfg.tol_alg).map_err(|e| e.to_string())?;
                let kc = check_kernel_connection(&adapted.point, &adapted.part, cfg.tol_alg);
                a.kernel_connection_residual = Some(kc.residual);
                a.kernel_connection_inconclusive = Some(kc.inconclusive);
                if let Ok(r) = solve_ruling(&adapted.point, cfg.tol_alg, f64::INFINITY) {
                    a.ruling_residual = Some(r.residual);
                    a.ruling_transversality = Some(r.transversality);
                    if m.minimal {
                        a.minimality_condition = minimality_condition(&adapted.point, &r.v1, &r.v2, cfg.tol_geo).ok().map(|c| c.norm);
                    }
                }
            }
        }
        Classification::Full => {
            a.admissibility = check_admissibility(&pt, &part).ok();
            let pairs = part.planes();
            if let Some((x3, x4)) = pairs.first() {
                let a3 = pt.sff.shape_form(x3).map_err(|e| e.to_string())?;
                let a4 = pt.sff.shape_form(x4).map_err(|e| e.to_string())?;
                a.algebraic_kahler = Some((&jt * &a3 - &a4).norm());
            }
        }
        _ => {}
    }
    a.point = Some(pt);
    a.part = Some(part);
    Ok(())
}

/// Analyses all grid points in parallel; the result is in grid order.
pub fn analyze_grid(model: &ImmersionModel, zs: &[RVec], cfg: &RunConfig) -> Vec<PointAnalysis> {
    zs.par_iter().enumerate().map(|(i, z)| analyze_point(model, i, z, cfg)).collect()
}

pub fn cmd_sample(spec: &ModelSpec, grid: &GridSpec, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let model = spec.build()?;
    let zs = grid.points(&model)?;
    let points: Vec<Result<SampledPoint, ImmersionError>> = zs.par_iter().map(|z| sample_point(&model, z, cfg.fd_step)).collect();
    let mut records = Vec::with_capacity(points.len());
    let mut status = ExitStatus::Success;
    for (i, p) in points.into_iter().enumerate() {
        records.push(match p {
            Ok(pt) => {
                let mut v = to_value(&pt);
                v["index"] = json!(i);
                v
            }
            Err(e) => {
                status = ExitStatus::PreconditionNotMet;
                json!({ "index": i, "z": rvec_json(&zs[i]), "error": e.to_string() })
            }
        });
    }
    let report = json!({ "config": cfg, "model": spec, "grid": grid.to_string(), "points": records });
    Ok(output(report, status))
}

/// Patch layout: `axes:a:b:count:spacing:t_count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchGridSpec {
    pub axis_a: usize,
    pub axis_b: usize,
    pub count: usize,
    pub spacing: f64,
    pub t_count: usize,
}

impl PatchGridSpec {
    pub fn default_for(n: usize) -> Self {
        Self { axis_a: 0, axis_b: n, count: 5, spacing: 0.02, t_count: 5 }
    }

    pub fn at(&self, center: &RVec) -> PatchGrid {
        PatchGrid {
            center: center.clone(),
            axis_a: self.axis_a,
            axis_b: self.axis_b,
            count: self.count,
            spacing: self.spacing,
            t_count: self.t_count,
        }
    }
}

impl FromStr for PatchGridSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = |e: &dyn std::fmt::Display| format!("bad patch grid {s:?}: {e}");
        match parts.as_slice() {
            ["axes", a, b, c, sp, t] => Ok(Self {
                axis_a: a.parse().map_err(|e| bad(&e))?,
                axis_b: b.parse().map_err(|e| bad(&e))?,
                count: c.parse().map_err(|e| bad(&e))?,
                spacing: sp.parse().map_err(|e| bad(&e))?,
                t_count: t.parse().map_err(|e| bad(&e))?,
            }),
            _ => Err(format!("unrecognized patch grid {s:?} (expected axes:a:b:count:spacing:t_count)")),
        }
    }
}

impl std::fmt::Display for PatchGridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "axes:{}:{}:{}:{}:{}", self.axis_a, self.axis_b, self.count, self.spacing, self.t_count)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExtensionChecks {
    pub factorization: bool,
    pub tangent_space: bool,
    pub kahler_fd: bool,
    pub kahler_algebraic: bool,
    pub passed: bool,
}

pub fn extension_checks(patch: &ExtensionPatch, kahler: &KahlerReport, cfg: &RunConfig) -> ExtensionChecks {
    let factorization = patch.factorization <= FACTORIZATION_TOL;
    let tangent_space = patch.tangent_angle <= TANGENT_ANGLE_TOL;
    let kahler_fd = kahler.residual1 <= KAHLER_RESIDUAL_FACTOR * cfg.tol_geo;
    let kahler_algebraic = kahler.residual2 <= ALGEBRAIC_KAHLER_TOL;
    ExtensionChecks {
        factorization,
        tangent_space,
        kahler_fd,
        kahler_algebraic,
        passed: factorization && tangent_space && kahler_fd && kahler_algebraic,
    }
}

fn patch_summary(patch: &ExtensionPatch) -> Value {
    let min_sv = patch.samples.iter().map(|s| s.min_singular_value).fold(f64::INFINITY, f64::min);
    json!({
        "grid": patch.grid,
        "t_radius": patch.t_radius,
        "halvings": patch.halvings,
        "samples": patch.samples.len(),
        "max_condition": patch.max_condition,
        "min_singular_value": min_sv,
        "factorization": patch.factorization,
        "tangent_angle": patch.tangent_angle,
        "max_ruling_residual": patch.max_ruling_residual,
    })
}

/// Builds and verifies the extension patch around `center`.
pub fn run_extension(
    model: &ImmersionModel,
    center: &RVec,
    t_radius: f64,
    grid: &PatchGridSpec,
    cfg: &RunConfig,
) -> Result<(ExtensionPatch, KahlerReport, ExtensionChecks), CliError> {
    let field = RulingField::new(model, center, cfg.fd_step, cfg.tol_alg, cfg.tol_geo)?;
    let patch = build_extension(&field, grid.at(center), t_radius)?;
    let kahler = verify_kahler(&field, &patch)?;
    let checks = extension_checks(&patch, &kahler, cfg);
    Ok((patch, kahler, checks))
}

fn parse_points_file(value: &Value) -> Result<(ModelSpec, Vec<RVec>), CliError> {
    let spec: ModelSpec = serde_json::from_value(value.get("model").cloned().unwrap_or(Value::Null))
        .map_err(|e| CliError::Input(format!("points file: invalid model: {e}")))?;
    let pts = value.get("points").and_then(Value::as_array).ok_or_else(|| CliError::Input("points file: missing points".into()))?;
    let mut zs = Vec::with_capacity(pts.len());
    for p in pts {
        let z: Vec<f64> = serde_json::from_value(p.get("z").cloned().unwrap_or(Value::Null))
            .map_err(|e| CliError::Input(format!("points file: invalid z: {e}")))?;
        zs.push(RVec::from_vec(z));
    }
    Ok((spec, zs))
}

/// First stable point where an extension applies: a ruling candidate, or for a model
/// without those a holomorphic candidate (constant ruling).
fn extension_center(analyses: &[PointAnalysis]) -> Option<&PointAnalysis> {
    analyses.iter().find(|a| a.is_ruling_candidate()).or_else(|| analyses.iter().find(|a| a.is_holomorphic_candidate()))
}

pub fn cmd_extend(points: &Value, t_radius: f64, grid: Option<PatchGridSpec>, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    if !(t_radius > 0.0) {
        return Err(CliError::Input(format!("--t-radius must be positive, got {t_radius}")));
    }
    let (spec, zs) = parse_points_file(points)?;
    let model = spec.build()?;
    let analyses = analyze_grid(&model, &zs, cfg);
    let center = extension_center(&analyses)
        .ok_or_else(|| CliError::Precondition("no stable point admits an extension (need a plane of rank ≥ 5 or a full part)".into()))?;
    let grid = grid.unwrap_or_else(|| PatchGridSpec::default_for(model.n()));
    let (patch, kahler, checks) = run_extension(&model, &center.z, t_radius, &grid, cfg)?;
    let report = json!({
        "config": cfg,
        "model": spec,
        "center_index": center.index,
        "center": rvec_json(&center.z),
        "patch_grid": grid.to_string(),
        "requested_t_radius": t_radius,
        "patch": patch,
        "kahler": kahler,
        "checks": checks,
    });
    let status = if checks.passed { ExitStatus::Success } else { ExitStatus::VerificationFailed };
    Ok(output(report, status))
}

pub fn cmd_verify_extension(patch_file: &Value, cfg_override: Option<&RunConfig>) -> Result<CommandOutput, CliError> {
    let field = |k: &str| patch_file.get(k).cloned().ok_or_else(|| CliError::Input(format!("patch file: missing {k}")));
    let cfg: RunConfig = match cfg_override {
        Some(c) => *c,
        None => serde_json::from_value(field("config")?).map_err(|e| CliError::Input(format!("patch file: config: {e}")))?,
    };
    cfg.validate()?;
    let spec: ModelSpec = serde_json::from_value(field("model")?).map_err(|e| CliError::Input(format!("patch file: model: {e}")))?;
    let center: Vec<f64> = serde_json::from_value(field("center")?).map_err(|e| CliError::Input(format!("patch file: center: {e}")))?;
    let grid: PatchGridSpec = field("patch_grid")?
        .as_str()
        .ok_or_else(|| CliError::Input("patch file: patch_grid must be a string".into()))?
        .parse()
        .map_err(CliError::Input)?;
    let t_radius = field("patch")?
        .get("t_radius")
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::Input("patch file: missing patch.t_radius".into()))?;
    let stored: Vec<Vec<f64>> = field("patch")?
        .get("samples")
        .and_then(Value::as_array)
        .map(|s| s.iter().filter_map(|x| serde_json::from_value(x.get("h")?.clone()).ok()).collect())
        .unwrap_or_default();
    let model = spec.build()?;
    let center = RVec::from_vec(center);
    let (patch, kahler, checks) = run_extension(&model, &center, t_radius, &grid, &cfg)?;
    let mismatch = if stored.len() == patch.samples.len() {
        patch
            .samples
            .iter()
            .zip(&stored)
            .map(|(s, h)| s.h.iter().zip(h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let consistent = mismatch <= 1e-12;
    let report = json!({
        "config": cfg,
        "model": spec,
        "patch": patch_summary(&patch),
        "kahler": kahler,
        "checks": checks,
        "stored_samples_mismatch": if mismatch.is_finite() { json!(mismatch) } else { Value::Null },
        "stored_samples_consistent": consistent,
    });
    let status = if checks.passed && consistent { ExitStatus::Success } else { ExitStatus::VerificationFailed };
    Ok(output(report, status))
}

/// Options of the end-to-end pipeline.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PipelineOptions {
    pub t_radius: f64,
    pub patch_grid: PatchGridSpec,
}

pub fn cmd_pipeline(spec: &ModelSpec, grid: &GridSpec, opts: &PipelineOptions, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let model = spec.build()?;
    let zs = grid.points(&model)?;
    let analyses = analyze_grid(&model, &zs, cfg);
    let borderline: Vec<usize> = analyses.iter().filter(|a| a.borderline).map(|a| a.index).collect();
    let errors: Vec<usize> = analyses.iter().filter(|a| a.error.is_some()).map(|a| a.index).collect();
    let mut report = json!({
        "config": cfg,
        "model": spec,
        "grid": grid.to_string(),
        "options": { "t_radius": opts.t_radius, "patch_grid": opts.patch_grid.to_string() },
        "points": to_value(&analyses),
        "borderline_points": borderline,
        "error_points": errors,
    });
    let tol = cfg.tol_geo;
    let mut failures: Vec<String> = Vec::new();
    let ruling: Vec<&PointAnalysis> = analyses.iter().filter(|a| a.is_ruling_candidate()).collect();
    let ok: Vec<&PointAnalysis> = analyses.iter().filter(|a| a.error.is_none() && !a.borderline).collect();
    let max_of = |xs: &[&PointAnalysis], f: fn(&PointAnalysis) -> Option<f64>| {
        xs.iter().map(|a| f(a).unwrap_or(f64::INFINITY)).fold(0.0_f64, f64::max)
    };
    if !ruling.is_empty() {
        report["branch"] = json!("ruling_extension");
        let kc = max_of(&ruling, |a| a.kernel_connection_residual);
        let ruling_res = max_of(&ruling, |a| a.ruling_residual);
        let alg = max_of(&ruling, |a| a.algebraic_kahler);
        if kc > tol {
            failures.push(format!("kernel connection residual {kc:.3e} exceeds {tol:.1e}"));
        }
        if ruling_res > tol {
            failures.push(format!("ruling residual {ruling_res:.3e} exceeds {tol:.1e}"));
        }
        if alg > ALGEBRAIC_KAHLER_TOL {
            failures.push(format!("algebraic Kähler residual {alg:.3e} exceeds {ALGEBRAIC_KAHLER_TOL:.1e}"));
        }
        let center = ruling[0];
        let (patch, kahler, checks) = run_extension(&model, &center.z, opts.t_radius, &opts.patch_grid, cfg)?;
        if !checks.passed {
            failures.push("extension patch checks failed".into());
        }
        report["ruling_summary"] = json!({
            "candidates": ruling.iter().map(|a| a.index).collect::<Vec<_>>(),
            "max_kernel_connection_residual": kc,
            "max_ruling_residual": ruling_res,
            "max_algebraic_kahler": alg,
            "min_transversality": ruling.iter().filter_map(|a| a.ruling_transversality).fold(f64::INFINITY, f64::min),
        });
        report["extension"] = json!({
            "center_index": center.index,
            "patch": patch_summary(&patch),
            "kahler": kahler,
            "checks": checks,
        });
    } else if !ok.is_empty() && ok.iter().all(|a| a.is_holomorphic_candidate()) {
        report["branch"] = json!("holomorphic_identification");
        let adm = max_of(&ok, |a| a.admissibility);
        let alg = max_of(&ok, |a| a.algebraic_kahler);
        let points: Vec<SampledPoint> = ok.iter().filter_map(|a| a.point.clone()).collect();
        let parts: Vec<AlmostComplexPart> = ok.iter().filter_map(|a| a.part.clone()).collect();
        let ident = holomorphic_identification(&model, &points, &parts, tol)?;
        if adm > tol {
            failures.push(format!("admissibility residual {adm:.3e} exceeds {tol:.1e}"));
        }
        if alg > ALGEBRAIC_KAHLER_TOL {
            failures.push(format!("algebraic Kähler residual {alg:.3e} exceeds {ALGEBRAIC_KAHLER_TOL:.1e}"));
        }
        for (name, v) in [
            ("constancy", ident.constancy),
            ("holomorphy", ident.holomorphy),
            ("j_square", ident.j_square),
            ("orthogonality", ident.orthogonality),
        ] {
            if v > tol {
                failures.push(format!("identification {name} residual {v:.3e} exceeds {tol:.1e}"));
            }
        }
        report["identification"] = json!({
            "points": points.len(),
            "max_admissibility": adm,
            "max_algebraic_kahler": alg,
            "constancy": ident.constancy,
            "holomorphy": ident.holomorphy,
            "j_square": ident.j_square,
            "orthogonality": ident.orthogonality,
            "distance_to_ambient": ident.distance_to_ambient,
        });
    } else {
        report["branch"] = json!("nothing_to_extend");
        let ranks: Vec<Option<usize>> = analyses.iter().map(|a| a.rank).collect();
        report["diagnostics"] = json!({
            "reason": "no stable point of rank ≥ 5 with a plane complex part, and not every point carries a full complex part",
            "ranks": ranks,
        });
        return Ok(output(report, ExitStatus::PreconditionNotMet));
    }
    let status = if failures.is_empty() { ExitStatus::Success } else { ExitStatus::VerificationFailed };
    report["failures"] = json!(failures);
    Ok(output(report, status))
}
