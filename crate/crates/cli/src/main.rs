use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use sharpjet_core::bundle::{read_bundle, write_bundle};
use sharpjet_core::jet::validate_with_rank_tol;
use sharpjet_core::pipeline::{extend, ExtensionResult, PipelineConfig};
use sharpjet_core::sampling::GridSpec;
use sharpjet_core::verify::{certify, VerifyConfig};
use sharpjet_core::{Jet, Vector};

/// Convex C^1 extensions of finite 1-jets with the smallest Lipschitz constant.
#[derive(Parser, Debug)]
#[command(name = "sharpjet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a jet is compatible with a convex C^1 function.
    Validate {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build the extension and write it as a bundle directory.
    Extend {
        #[arg(long)]
        input: PathBuf,
        /// Vector spanning X, comma separated; repeat for more vectors.
        #[arg(long = "x-span", value_parser = parse_vector)]
        x_span: Vec<Vector>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate F and its gradient on a tensor grid, as CSV.
    Eval {
        /// Bundle directory written by `extend`.
        #[arg(long, alias = "bundle")]
        input: PathBuf,
        /// Per-axis `min:max:count`, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check every stage of a bundle and print the certificate.
    Certify {
        #[arg(long, alias = "bundle")]
        input: PathBuf,
        /// Certificate destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON file with `pipeline` and `verify` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    pipeline: PipelineConfig,
    verify: VerifyConfig,
}

impl CommonArgs {
    fn load(&self) -> Result<Config> {
        let mut cfg: Config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => Config::default(),
        };
        cfg.pipeline.check()?;
        if let Some(seed) = self.seed {
            cfg.verify.seed = seed;
        }
        Ok(cfg)
    }
}

fn parse_vector(s: &str) -> std::result::Result<Vector, String> {
    let xs = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad component '{t}': {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if xs.iter().any(|x| !x.is_finite()) {
        return Err("components must be finite".into());
    }
    Ok(Vector::from_vec(xs))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_validate(input: &Path, common: &CommonArgs) -> Result<ExitCode> {
    let cfg = common.load()?;
    let jet = Jet::from_path(input).with_context(|| format!("reading jet {}", input.display()))?;
    let t = cfg.pipeline.tolerances(&jet);
    let report = validate_with_rank_tol(&jet, t.tol_eq, t.tol_grad, t.rank_tol);
    emit(None, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[derive(Serialize)]
struct ExtendSummary<'a> {
    bundle: &'a Path,
    lipschitz: f64,
    dim_y: usize,
    dim_x: usize,
    new_points: usize,
    curvature: f64,
    grid_points: usize,
}

fn summary<'a>(out: &'a Path, r: &ExtensionResult) -> ExtendSummary<'a> {
    ExtendSummary {
        bundle: out,
        lipschitz: r.lipschitz,
        dim_y: r.y.dim(),
        dim_x: r.x.dim(),
        new_points: r.augmented.new_points.len(),
        curvature: r.extension.interpolant().m,
        grid_points: r.grid.as_ref().map_or(0, |g| g.len()),
    }
}

fn cmd_extend(input: &Path, x_span: &[Vector], out: &Path, common: &CommonArgs) -> Result<ExitCode> {
    let cfg = common.load()?;
    let jet = Jet::from_path(input).with_context(|| format!("reading jet {}", input.display()))?;
    let span = (!x_span.is_empty()).then_some(x_span);
    let result = extend(&jet, span, &cfg.pipeline)?;
    write_bundle(out, &cfg.pipeline, &result)?;
    emit(None, &(serde_json::to_string_pretty(&summary(out, &result))? + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(input: &Path, grid: &str, out: Option<&Path>) -> Result<ExitCode> {
    let bundle = read_bundle(input).with_context(|| format!("reading bundle {}", input.display()))?;
    let ext = &bundle.result.extension;
    let spec = GridSpec::parse(grid)?;
    let n = ext.ambient_dim();
    if spec.dim() != n {
        bail!(sharpjet_core::Error::DimensionMismatch { expected: n, found: spec.dim() });
    }
    let points = spec.points();
    let evals = ext.eval_f_many(&points);
    let h = ext.interpolant();
    let x = ext.x();

    let mut csv = String::new();
    let header: Vec<String> = (1..=n)
        .map(|k| format!("x{k}"))
        .chain(["F".to_string()])
        .chain((1..=n).map(|k| format!("dF{k}")))
        .chain(["outside_box".to_string()])
        .collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    let mut outside = 0usize;
    for (p, f) in points.iter().zip(evals) {
        let f = f?;
        let out_of_box = x.dim() > 0 && !h.bbox.contains(&x.coords(p));
        outside += out_of_box as usize;
        let row: Vec<String> = p
            .iter()
            .map(|c| c.to_string())
            .chain([f.value.to_string()])
            .chain(f.gradient.iter().map(|c| c.to_string()))
            .chain([(out_of_box as u8).to_string()])
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    if outside > 0 {
        eprintln!("warning: {outside} of {} grid points lie outside the envelope box", points.len());
    }
    emit(out, &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_certify(input: &Path, out: Option<&Path>, common: &CommonArgs) -> Result<ExitCode> {
    let cfg = common.load()?;
    let bundle = read_bundle(input).with_context(|| format!("reading bundle {}", input.display()))?;
    let cert = certify(&bundle.result, &cfg.verify);
    emit(out, &(cert.to_json() + "\n"))?;
    for e in cert.entries.iter().filter(|e| !e.pass) {
        eprintln!("failed: {} (worst {:.3e}, tolerance {:.3e})", e.name, e.worst_violation, e.tolerance);
    }
    Ok(if cert.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// 2 for unreadable or malformed input, 1 for data the construction rejects.
fn failure_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<sharpjet_core::Error>() {
        Some(e) if !e.is_input_error() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { input, common } => cmd_validate(input, common),
        Command::Extend { input, x_span, out, common } => cmd_extend(input, x_span, out, common),
        Command::Eval { input, grid, out } => cmd_eval(input, grid, out.as_deref()),
        Command::Certify { input, out, common } => cmd_certify(input, out.as_deref(), common),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(failure_code(&err))
        }
    }
}
