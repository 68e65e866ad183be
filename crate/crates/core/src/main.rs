use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kahler_core::cli::{
    cmd_analyze, cmd_complex_part, cmd_extend, cmd_gen, cmd_pipeline, cmd_sample, cmd_verify_extension, parse_instance,
    parse_model, read_json, CliError, CommandOutput, ExitStatus, OutputFormat, PatchGridSpec, PipelineOptions, RunConfig,
};
use kahler_core::immersion::GridSpec;
use kahler_core::instance_gen::{DiagParams, GeneratorKind, GeneratorSpec};
use kahler_core::report::{canonical_json, text_report};

#[derive(Parser)]
#[command(name = "kahler", version, about = "Real Kähler submanifolds of codimension four: complex parts, rulings and Kähler extensions")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Tolerance for algebraic decisions on extracted data [default: 1e-9]
    #[arg(long, global = true)]
    tol_alg: Option<f64>,
    /// Tolerance for finite-difference quantities [default: 1e-4]
    #[arg(long, global = true)]
    tol_geo: Option<f64>,
    /// Central-difference step [default: 1e-3]
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    /// Seed for generators and models [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0: all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Report format: json or text
    #[arg(long, global = true, default_value = "json")]
    format: OutputFormat,
    /// Output file (stdout if omitted)
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

impl GlobalOpts {
    fn overrides_any(&self) -> bool {
        self.tol_alg.is_some() || self.tol_geo.is_some() || self.fd_step.is_some() || self.seed.is_some()
    }

    fn config(&self) -> RunConfig {
        let d = RunConfig::default();
        RunConfig {
            tol_alg: self.tol_alg.unwrap_or(d.tol_alg),
            tol_geo: self.tol_geo.unwrap_or(d.tol_geo),
            fd_step: self.fd_step.unwrap_or(d.fd_step),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Holomorphic,
    DiagNormalForm,
    Mixed,
    MixedMinimal,
    Repair,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded (H, S) instance
    Gen {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        p: usize,
        #[arg(long, default_value_t = 2.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1)]
        delta: u8,
        /// Iteration budget of the repair generator
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Symmetry, kernels, minimality, complex part and rank-bound checks of an instance
    Analyze { instance: PathBuf },
    /// Complex part of the normal space, optionally cross-checked by brute force
    ComplexPart {
        instance: PathBuf,
        /// Number of brute-force starts
        #[arg(long)]
        brute_force: Option<usize>,
    },
    /// Sampled immersions
    Immersion {
        #[command(subcommand)]
        command: ImmersionCommand,
    },
    /// Build a Kähler extension patch around a stable point of a points file
    Extend {
        points: PathBuf,
        /// Largest ruling parameter |t|; halved until the patch is well conditioned
        #[arg(long, default_value_t = 0.1)]
        t_radius: f64,
        /// Patch grid axes:a:b:count:spacing:t_count [default: axes:0:n:5:0.02:5]
        #[arg(long)]
        grid: Option<PatchGridSpec>,
    },
    /// Rebuild and verify a patch file
    VerifyExtension { patch: PathBuf },
    /// Sample, analyze, extend and verify end to end
    Pipeline {
        #[arg(long)]
        model: String,
        /// JSON object overriding model parameters
        #[arg(long)]
        params: Option<String>,
        /// Sample points: random:N:seed or slice:a:b:count
        #[arg(long, default_value = "random:16:1")]
        grid: GridSpec,
        /// Largest ruling parameter |t|; halved until the patch is well conditioned
        #[arg(long, default_value_t = 0.1)]
        t_radius: f64,
        /// Patch grid axes:a:b:count:spacing:t_count [default: axes:0:n:5:0.02:5]
        #[arg(long)]
        patch_grid: Option<PatchGridSpec>,
    },
}

#[derive(Subcommand)]
enum ImmersionCommand {
    /// Sample frames, (H, S) and the normal connection on a grid
    Sample {
        #[arg(long)]
        model: String,
        /// JSON object overriding model parameters
        #[arg(long)]
        params: Option<String>,
        /// Sample points: random:N:seed or slice:a:b:count
        #[arg(long, default_value = "random:16:1")]
        grid: GridSpec,
    },
}

fn run(cli: &Cli) -> Result<CommandOutput, CliError> {
    let cfg = cli.global.config();
    cfg.validate()?;
    match &cli.command {
        Command::Gen { kind, n, p, a, b, delta, budget } => {
            let params = DiagParams { a: *a, b: *b, delta: *delta };
            let kind = match kind {
                Kind::Holomorphic => GeneratorKind::Holomorphic,
                Kind::DiagNormalForm => GeneratorKind::DiagNormalForm { params },
                Kind::Mixed => GeneratorKind::Mixed { params },
                Kind::MixedMinimal => GeneratorKind::MixedMinimal { params },
                Kind::Repair => GeneratorKind::Repair { budget: *budget },
            };
            cmd_gen(&GeneratorSpec { kind, n: *n, p: *p, seed: cfg.seed }, &cfg)
        }
        Command::Analyze { instance } => cmd_analyze(&parse_instance(&read_json(instance)?)?, &cfg),
        Command::ComplexPart { instance, brute_force } => {
            cmd_complex_part(&parse_instance(&read_json(instance)?)?, *brute_force, &cfg)
        }
        Command::Immersion { command: ImmersionCommand::Sample { model, params, grid } } => {
            cmd_sample(&parse_model(model, params.as_deref(), cfg.seed)?, grid, &cfg)
        }
        Command::Extend { points, t_radius, grid } => cmd_extend(&read_json(points)?, *t_radius, *grid, &cfg),
        Command::VerifyExtension { patch } => {
            let overrides = cli.global.overrides_any().then_some(cfg);
            cmd_verify_extension(&read_json(patch)?, overrides.as_ref())
        }
        Command::Pipeline { model, params, grid, t_radius, patch_grid } => {
            let spec = parse_model(model, params.as_deref(), cfg.seed)?;
            let n = spec.build()?.n();
            let opts = PipelineOptions { t_radius: *t_radius, patch_grid: patch_grid.unwrap_or_else(|| PatchGridSpec::default_for(n)) };
            cmd_pipeline(&spec, grid, &opts, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitStatus::InputError.code() as u8 } else { 0 });
        }
    };
    if cli.global.jobs > 0 {
        // Only fails if a global pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.global.jobs).build_global();
    }
    let (report, status) = match run(&cli) {
        Ok(out) => (out.report, out.status),
        Err(e) => {
            eprintln!("kahler: {e}");
            (e.report(), e.status())
        }
    };
    let rendered = match cli.global.format {
        OutputFormat::Json => canonical_json(&report),
        OutputFormat::Text => text_report(&report),
    };
    match &cli.global.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered) {
                eprintln!("kahler: cannot write {}: {e}", path.display());
                return ExitCode::from(ExitStatus::InputError.code() as u8);
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::from(status.code() as u8)
}
