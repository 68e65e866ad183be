//! Browser bindings for `kahler-core`. Every export takes plain values and returns the same
//! canonical JSON report the `kahler` CLI prints, so the functions are also usable natively.

use kahler_core::cli::{
    cmd_analyze, cmd_gen, cmd_pipeline, parse_instance, parse_model, CliError, CommandOutput, PatchGridSpec,
    PipelineOptions, RunConfig,
};
use kahler_core::immersion::GridSpec;
use kahler_core::instance_gen::{DiagParams, GeneratorKind, GeneratorSpec};
use kahler_core::report::canonical_json;
use wasm_bindgen::prelude::wasm_bindgen;

/// Pipelines in the page are capped so a click stays responsive on one thread.
pub const MAX_DEMO_POINTS: u32 = 32;

fn render(result: Result<CommandOutput, CliError>) -> String {
    match result {
        Ok(out) => canonical_json(&out.report),
        Err(e) => canonical_json(&e.report()),
    }
}

fn config(seed: u32) -> RunConfig {
    RunConfig { seed: seed as u64, ..RunConfig::default() }
}

fn generator_kind(kind: &str) -> Result<GeneratorKind, CliError> {
    let params = DiagParams::default();
    Ok(match kind {
        "holomorphic" => GeneratorKind::Holomorphic,
        "diag-normal-form" => GeneratorKind::DiagNormalForm { params },
        "mixed" => GeneratorKind::Mixed { params },
        "mixed-minimal" => GeneratorKind::MixedMinimal { params },
        other => return Err(CliError::Input(format!("unknown generator kind {other:?}"))),
    })
}

/// Generates a seeded instance and returns it with its full analysis under `"analysis"`.
#[wasm_bindgen]
pub fn generate_and_analyze(kind: &str, n: u32, seed: u32) -> String {
    render((|| {
        let kind = generator_kind(kind)?;
        let p = if matches!(kind, GeneratorKind::DiagNormalForm { .. }) { 2 } else { 4 };
        let cfg = config(seed);
        let gen = cmd_gen(&GeneratorSpec { kind, n: n as usize, p, seed: seed as u64 }, &cfg)?;
        let sff = parse_instance(&gen.report)?;
        let analysis = cmd_analyze(&sff, &cfg)?;
        let mut report = gen.report;
        report["analysis"] = analysis.report;
        report["exit_code"] = analysis.status.code().into();
        Ok(CommandOutput { report, status: analysis.status })
    })())
}

/// Analyzes a pasted instance (`{"n", "p", "H", "S"}`, bare or under `"instance"`).
#[wasm_bindgen]
pub fn analyze_instance(instance_json: &str) -> String {
    render((|| {
        let value = serde_json::from_str(instance_json).map_err(|e| CliError::Input(format!("invalid JSON: {e}")))?;
        cmd_analyze(&parse_instance(&value)?, &RunConfig::default())
    })())
}

/// End-to-end pipeline on a builtin model with `points` random grid points.
#[wasm_bindgen]
pub fn run_pipeline(model: &str, points: u32, seed: u32) -> String {
    render((|| {
        if points == 0 || points > MAX_DEMO_POINTS {
            return Err(CliError::Input(format!("points must be in 1..={MAX_DEMO_POINTS}, got {points}")));
        }
        let spec = parse_model(model, None, seed as u64)?;
        let n = spec.build()?.n();
        let opts = PipelineOptions { t_radius: 0.1, patch_grid: PatchGridSpec::default_for(n) };
        let grid = GridSpec::Random { count: points as usize, seed: seed as u64 };
        cmd_pipeline(&spec, &grid, &opts, &config(seed))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).expect("valid JSON")
    }

    #[test]
    fn generated_mixed_instance_has_a_plane() {
        let v = parse(&generate_and_analyze("mixed", 5, 3));
        assert_eq!(v["exit_code"], 0);
        assert_eq!(v["analysis"]["complex_part"]["classification"], "plane");
    }

    #[test]
    fn pasted_instance_round_trips() {
        let v = parse(&generate_and_analyze("holomorphic", 4, 1));
        let again = parse(&analyze_instance(&v["instance"].to_string()));
        assert_eq!(again["complex_part"]["classification"], "full");
    }

    #[test]
    fn bad_input_reports_exit_code_three() {
        assert_eq!(parse(&analyze_instance("{nope"))["exit_code"], 3);
        assert_eq!(parse(&generate_and_analyze("bogus", 5, 0))["exit_code"], 3);
        assert_eq!(parse(&run_pipeline("holo_graph", 0, 0))["exit_code"], 3);
    }

    #[test]
    fn holomorphic_pipeline_identifies_the_ambient_structure() {
        let v = parse(&run_pipeline("holo_graph", 4, 2));
        assert_eq!(v["branch"], "holomorphic_identification");
        assert_eq!(v["exit_code"], 0);
    }

    #[test]
    fn flat_pipeline_is_deterministic_with_nothing_to_extend() {
        assert_eq!(run_pipeline("flat", 2, 0), run_pipeline("flat", 2, 0));
        assert_eq!(parse(&run_pipeline("flat", 2, 0))["exit_code"], 2);
    }
}
