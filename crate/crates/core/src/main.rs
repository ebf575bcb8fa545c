use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser};

use cliffsurf::pipeline::{parse_config_file, run_pipeline, PipelineError, RunConfig, Stage};

/// Molecular surfaces from a spectral high-order PDE low-pass filter.
#[derive(Parser, Debug)]
#[command(name = "cliffsurf", version)]
struct Cli {
    /// Molecule file (.pqr, .pdb, .xyzr)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input format: pqr, pdb, xyzr or auto
    #[arg(long)]
    format: Option<String>,
    /// Initial data: piecewise, gaussian or piecewise-swapped
    #[arg(long)]
    init: Option<String>,
    /// Grid spacing in Å
    #[arg(long)]
    spacing: Option<String>,
    /// Padding around the atom bounding box in Å
    #[arg(long)]
    padding: Option<String>,
    /// Gaussian scale
    #[arg(long)]
    s: Option<String>,
    /// Gaussian decay rate
    #[arg(long)]
    re: Option<String>,
    /// PDE order 2m (even)
    #[arg(long)]
    order: Option<String>,
    /// Diffusion coefficient as j:value; repeatable. Unlisted d_j are zero.
    #[arg(long, action = ArgAction::Append)]
    dcoeff: Vec<String>,
    /// Restoring coefficient
    #[arg(long)]
    epsilon: Option<String>,
    /// Propagation time; repeatable for a sweep
    #[arg(long, action = ArgAction::Append)]
    time: Vec<String>,
    /// Isovalue; repeatable
    #[arg(long, action = ArgAction::Append)]
    isovalue: Vec<String>,
    /// Number of mode-decomposition passes summed into the surfaced field
    #[arg(long)]
    passes: Option<String>,
    /// Mesh output (.obj or .off)
    #[arg(long)]
    mesh_out: Option<PathBuf>,
    /// Also write the filtered volume: dx or raw
    #[arg(long)]
    volume_out: Option<String>,
    /// Volume output path (defaults to the mesh path with a new extension)
    #[arg(long)]
    volume_path: Option<PathBuf>,
    /// Mesh metrics report
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Run manifest (JSON); printed to stdout when omitted
    #[arg(long)]
    manifest_out: Option<PathBuf>,
    /// Grid memory cap, bytes or with K/M/G suffix
    #[arg(long)]
    mem_cap: Option<String>,
    /// Flat key = value config file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Drop water molecules from PDB input
    #[arg(long)]
    strip_solvent: bool,
}

impl Cli {
    fn settings(&self) -> Vec<(&'static str, Vec<String>)> {
        let one = |v: &Option<String>| v.iter().cloned().collect::<Vec<_>>();
        let path = |v: &Option<PathBuf>| {
            v.iter()
                .map(|p| p.to_string_lossy().into_owned())
                .collect::<Vec<_>>()
        };
        let mut out = vec![
            ("input", path(&self.input)),
            ("format", one(&self.format)),
            ("init", one(&self.init)),
            ("spacing", one(&self.spacing)),
            ("padding", one(&self.padding)),
            ("s", one(&self.s)),
            ("re", one(&self.re)),
            ("order", one(&self.order)),
            ("dcoeff", self.dcoeff.clone()),
            ("epsilon", one(&self.epsilon)),
            ("time", self.time.clone()),
            ("isovalue", self.isovalue.clone()),
            ("passes", one(&self.passes)),
            ("mesh-out", path(&self.mesh_out)),
            ("volume-out", one(&self.volume_out)),
            ("volume-path", path(&self.volume_path)),
            ("metrics-out", path(&self.metrics_out)),
            ("mem-cap", one(&self.mem_cap)),
        ];
        if self.strip_solvent {
            out.push(("strip-solvent", vec!["true".into()]));
        }
        out
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let config_err = |m: String| PipelineError::new(Stage::Config, m);
    let mut settings: BTreeMap<String, Vec<String>> = BTreeMap::new();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        for (k, v) in parse_config_file(&text).map_err(config_err)? {
            settings.entry(k).or_default().push(v);
        }
    }
    for (key, values) in cli.settings() {
        if !values.is_empty() {
            settings.insert(key.to_string(), values);
        }
    }
    RunConfig::from_settings(&settings).map_err(config_err)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let config = build_config(cli)?;
    let report = run_pipeline(&config)?;
    let json = report.manifest.to_json();
    match &cli.manifest_out {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| {
            PipelineError::new(Stage::Output, format!("{}: {e}", path.display()))
        })?,
        None => println!("{json}"),
    }
    for run in &report.manifest.runs {
        for s in &run.surfaces {
            eprintln!(
                "t={} iso={}: {} vertices, {} triangles, area {:.3}, volume {:.3}",
                run.t,
                s.isovalue,
                s.metrics.vertex_count,
                s.metrics.triangle_count,
                s.metrics.area,
                s.metrics.enclosed_volume
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error {
                ExitCode::from(Stage::Config.exit_code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
