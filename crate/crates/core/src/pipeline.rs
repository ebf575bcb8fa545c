//! End-to-end surface generation: parse, grid, rasterize, filter, extract,
//! write. Every effective parameter ends up in the run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::Error;
use crate::grid::{GridSpec, ScalarField3};
use crate::molecule::{read_molecule, FileFormat, Molecule, PdbOptions};
use crate::pde::{lowpass_apply, FilterParams, PreparedSpectrum};
use crate::surface::{format_obj, format_off, marching_cubes, mesh_metrics, MeshMetrics, TriangleMesh};
use crate::volume::{
    encode_raw, format_opendx, make_grid, rasterize_gaussian, rasterize_piecewise_oriented,
    GridOptions, PiecewiseOrientation, DEFAULT_GAUSSIAN_DECAY, DEFAULT_GAUSSIAN_SCALE,
    DEFAULT_MEM_CAP, DEFAULT_PADDING, DEFAULT_SPACING,
};

pub const DEFAULT_ORDER: usize = 12;
pub const DEFAULT_TIME: f64 = 100.0;
pub const DEFAULT_ISO_PIECEWISE: f64 = 0.9;
pub const DEFAULT_ISO_GAUSSIAN: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Piecewise,
    Gaussian,
    PiecewiseSwapped,
}

impl InitKind {
    pub fn default_isovalue(self) -> f64 {
        match self {
            InitKind::Piecewise => DEFAULT_ISO_PIECEWISE,
            InitKind::Gaussian => DEFAULT_ISO_GAUSSIAN,
            InitKind::PiecewiseSwapped => 1.0 - DEFAULT_ISO_PIECEWISE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeFormat {
    Dx,
    Raw,
}

impl VolumeFormat {
    fn extension(self) -> &'static str {
        match self {
            VolumeFormat::Dx => "dx",
            VolumeFormat::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    /// `None` infers the format from the file extension.
    pub format: Option<FileFormat>,
    pub strip_solvent: bool,
    pub init: InitKind,
    pub spacing: f64,
    pub padding: f64,
    pub s: f64,
    pub r_e: f64,
    /// Diffusion coefficients `d_1..d_m`; the PDE order is `2 m`.
    pub dcoeff: Vec<f64>,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub isovalues: Vec<f64>,
    pub passes: usize,
    pub mesh_out: Option<PathBuf>,
    pub volume_out: Option<VolumeFormat>,
    pub volume_path: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
    pub mem_cap: u64,
}

impl RunConfig {
    /// Built-in defaults for `input`.
    pub fn new(input: impl Into<PathBuf>) -> Self {
        let init = InitKind::Piecewise;
        Self {
            input: input.into(),
            format: None,
            strip_solvent: false,
            init,
            spacing: DEFAULT_SPACING,
            padding: DEFAULT_PADDING,
            s: DEFAULT_GAUSSIAN_SCALE,
            r_e: DEFAULT_GAUSSIAN_DECAY,
            dcoeff: FilterParams::highest_order(DEFAULT_ORDER / 2, DEFAULT_TIME).d,
            epsilon: 0.0,
            times: vec![DEFAULT_TIME],
            isovalues: vec![init.default_isovalue()],
            passes: 1,
            mesh_out: None,
            volume_out: None,
            volume_path: None,
            metrics_out: None,
            mem_cap: DEFAULT_MEM_CAP,
        }
    }

    pub fn filter_params(&self, t: f64) -> FilterParams {
        FilterParams {
            d: self.dcoeff.clone(),
            epsilon: self.epsilon,
            t,
        }
    }

    pub fn grid_options(&self) -> GridOptions {
        GridOptions {
            spacing: self.spacing,
            padding: self.padding,
            mem_cap: self.mem_cap,
        }
    }

    /// Cross-field checks, run before any computation.
    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be a positive number, got {v}"))
            }
        };
        positive("spacing", self.spacing)?;
        positive("s", self.s)?;
        positive("re", self.r_e)?;
        if !(self.padding >= 0.0 && self.padding.is_finite()) {
            return Err(format!("padding must be >= 0, got {}", self.padding));
        }
        if self.times.is_empty() {
            return Err("at least one propagation time is required".into());
        }
        if self.isovalues.is_empty() {
            return Err("at least one isovalue is required".into());
        }
        if self.passes == 0 {
            return Err("passes must be >= 1".into());
        }
        for &t in &self.times {
            self.filter_params(t).validate().map_err(|e| e.to_string())?;
        }
        for &iso in &self.isovalues {
            if !iso.is_finite() {
                return Err(format!("isovalue {iso} is not finite"));
            }
            let binary = matches!(self.init, InitKind::Piecewise | InitKind::PiecewiseSwapped);
            if binary && !(iso > 0.0 && iso <= 1.0) {
                return Err(format!(
                    "isovalue {iso} must lie in (0, 1] for piecewise initial data"
                ));
            }
            if self.init == InitKind::Gaussian && iso <= 0.0 {
                return Err(format!("isovalue {iso} must be > 0 for Gaussian initial data"));
            }
        }
        Ok(())
    }

    /// Builds a config from `key -> values` settings (config file entries
    /// overridden by command-line flags). Keys match the long flag names.
    pub fn from_settings(settings: &BTreeMap<String, Vec<String>>) -> Result<Self, String> {
        let input = settings
            .get("input")
            .and_then(|v| v.last())
            .ok_or("missing required setting `input`")?;
        let mut cfg = RunConfig::new(input);
        let mut isovalue_set = false;
        let mut order = DEFAULT_ORDER;
        let mut dcoeff: Option<Vec<(usize, f64)>> = None;
        for (key, values) in settings {
            let last = values.last().map(String::as_str).unwrap_or("");
            match key.as_str() {
                "input" => {}
                "format" => {
                    cfg.format = match last {
                        "auto" => None,
                        "pqr" => Some(FileFormat::Pqr),
                        "pdb" => Some(FileFormat::Pdb),
                        "xyzr" => Some(FileFormat::Xyzr),
                        other => return Err(format!("unknown format {other:?}")),
                    }
                }
                "init" => {
                    cfg.init = match last {
                        "piecewise" => InitKind::Piecewise,
                        "gaussian" => InitKind::Gaussian,
                        "piecewise-swapped" => InitKind::PiecewiseSwapped,
                        other => return Err(format!("unknown initial data {other:?}")),
                    }
                }
                "strip-solvent" => cfg.strip_solvent = parse_bool(key, last)?,
                "spacing" => cfg.spacing = parse_f64(key, last)?,
                "padding" => cfg.padding = parse_f64(key, last)?,
                "s" => cfg.s = parse_f64(key, last)?,
                "re" => cfg.r_e = parse_f64(key, last)?,
                "order" => {
                    order = last
                        .parse()
                        .map_err(|_| format!("order must be an even integer, got {last:?}"))?;
                }
                "dcoeff" => {
                    let mut list = Vec::new();
                    for item in split_list(values) {
                        let (j, v) = item
                            .split_once(':')
                            .ok_or_else(|| format!("dcoeff expects j:value, got {item:?}"))?;
                        let j: usize = j
                            .trim()
                            .parse()
                            .map_err(|_| format!("bad dcoeff index {j:?}"))?;
                        list.push((j, parse_f64(key, v)?));
                    }
                    dcoeff = Some(list);
                }
                "epsilon" => cfg.epsilon = parse_f64(key, last)?,
                "time" => {
                    cfg.times = split_list(values)
                        .map(|v| parse_f64(key, v))
                        .collect::<Result<_, _>>()?
                }
                "isovalue" => {
                    cfg.isovalues = split_list(values)
                        .map(|v| parse_f64(key, v))
                        .collect::<Result<_, _>>()?;
                    isovalue_set = true;
                }
                "passes" => {
                    cfg.passes = last
                        .parse()
                        .map_err(|_| format!("passes must be a positive integer, got {last:?}"))?
                }
                "mesh-out" => cfg.mesh_out = Some(PathBuf::from(last)),
                "volume-out" => {
                    cfg.volume_out = match last {
                        "dx" => Some(VolumeFormat::Dx),
                        "raw" => Some(VolumeFormat::Raw),
                        "none" => None,
                        other => return Err(format!("unknown volume format {other:?}")),
                    }
                }
                "volume-path" => cfg.volume_path = Some(PathBuf::from(last)),
                "metrics-out" => cfg.metrics_out = Some(PathBuf::from(last)),
                "mem-cap" => cfg.mem_cap = parse_bytes(last)?,
                other => return Err(format!("unknown setting {other:?}")),
            }
        }
        if order < 2 || !order.is_multiple_of(2) {
            return Err(format!("order must be an even integer >= 2, got {order}"));
        }
        let m = order / 2;
        cfg.dcoeff = match dcoeff {
            None => FilterParams::highest_order(m, DEFAULT_TIME).d,
            Some(list) => {
                let mut d = vec![0.0; m];
                for (j, v) in list {
                    if j == 0 || j > m {
                        return Err(format!("dcoeff index {j} outside 1..={m}"));
                    }
                    d[j - 1] = v;
                }
                d
            }
        };
        if !isovalue_set {
            cfg.isovalues = vec![cfg.init.default_isovalue()];
        }
        Ok(cfg)
    }
}

fn split_list(values: &[String]) -> impl Iterator<Item = &str> {
    values
        .iter()
        .flat_map(|v| v.split(','))
        .map(str::trim)
        .filter(|v| !v.is_empty())
}

fn parse_f64(key: &str, v: &str) -> Result<f64, String> {
    v.trim()
        .parse()
        .map_err(|_| format!("{key}: expected a number, got {v:?}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "" | "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("{key}: expected true/false, got {v:?}")),
    }
}

/// Byte counts with optional `K`, `M`, `G` (binary) suffixes.
pub fn parse_bytes(v: &str) -> Result<u64, String> {
    let t = v.trim().trim_end_matches("iB").trim_end_matches('B');
    let (digits, shift) = match t.chars().last() {
        Some('K' | 'k') => (&t[..t.len() - 1], 10),
        Some('M' | 'm') => (&t[..t.len() - 1], 20),
        Some('G' | 'g') => (&t[..t.len() - 1], 30),
        _ => (t, 0),
    };
    digits
        .trim()
        .parse::<u64>()
        .ok()
        .and_then(|n| n.checked_mul(1 << shift))
        .ok_or_else(|| format!("mem-cap: cannot parse {v:?}"))
}

/// Parses a flat `key = value` config file. Blank lines and `#` comments are
/// skipped; a key may repeat.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Input,
    Config,
    Grid,
    Rasterize,
    Filter,
    Extract,
    Output,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Input => 2,
            Stage::Config => 3,
            Stage::Grid | Stage::Rasterize | Stage::Filter | Stage::Extract => 4,
            Stage::Output => 5,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Stage::Input => "input",
            Stage::Config => "config",
            Stage::Grid => "grid",
            Stage::Rasterize => "rasterize",
            Stage::Filter => "filter",
            Stage::Extract => "extract",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        Self {
            stage,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage.tag(), self.message)
    }
}

impl std::error::Error for PipelineError {}

trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> StageExt<T> for Result<T, Error> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputSummary {
    pub path: PathBuf,
    pub format: FileFormat,
    pub atom_count: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceRecord {
    pub isovalue: f64,
    pub mesh_path: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
    pub metrics: MeshMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeRecord {
    pub t: f64,
    pub filter: FilterParams,
    pub field_min: f64,
    pub field_max: f64,
    pub field_mean: f64,
    /// Spectral energy of the filtered (first-pass) field over all non-DC bins.
    pub high_frequency_energy: f64,
    pub volume_path: Option<PathBuf>,
    pub surfaces: Vec<SurfaceRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub config: RunConfig,
    pub pde_order: usize,
    pub input: InputSummary,
    pub grid: GridSpec,
    pub initial_min: f64,
    pub initial_max: f64,
    pub initial_mean: f64,
    pub high_frequency_threshold_w2: f64,
    pub runs: Vec<TimeRecord>,
    /// Wall-clock milliseconds per stage; the only non-reproducible entries.
    pub timings_ms: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest is always serializable")
    }
}

/// A mesh produced by a run, kept in memory alongside the manifest.
#[derive(Debug, Clone)]
pub struct SurfaceOutput {
    pub t: f64,
    pub isovalue: f64,
    pub mesh: TriangleMesh,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: Manifest,
    pub surfaces: Vec<SurfaceOutput>,
}

/// `base` with `_t{t}` / `_iso{iso}` inserted before the extension when the
/// sweep has more than one value along that axis.
pub fn output_path(base: &Path, t: Option<f64>, iso: Option<f64>, extension: Option<&str>) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "surface".into());
    let mut name = stem;
    if let Some(t) = t {
        name.push_str(&format!("_t{t}"));
    }
    if let Some(iso) = iso {
        name.push_str(&format!("_iso{iso}"));
    }
    let ext = extension
        .map(str::to_string)
        .or_else(|| base.extension().map(|e| e.to_string_lossy().into_owned()));
    if let Some(ext) = ext {
        name.push('.');
        name.push_str(&ext);
    }
    base.with_file_name(name)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::new(Stage::Output, Error::io(dir, e)))?;
    }
    std::fs::write(path, bytes).map_err(|e| PipelineError::new(Stage::Output, Error::io(path, e)))
}

/// Initial data for `config.init` on `grid`.
pub fn initial_field(config: &RunConfig, mol: &Molecule, grid: &GridSpec) -> crate::Result<ScalarField3> {
    Ok(match config.init {
        InitKind::Piecewise => rasterize_piecewise_oriented(mol, grid, PiecewiseOrientation::InsideZero),
        InitKind::PiecewiseSwapped => {
            rasterize_piecewise_oriented(mol, grid, PiecewiseOrientation::InsideOne)
        }
        InitKind::Gaussian => rasterize_gaussian(mol, grid, config.s, config.r_e)?,
    })
}

/// Field surfaced for one `t`: the sum of the first `passes` modes, which is
/// the plain low-pass output when `passes == 1`. The first pass reuses the
/// precomputed spectrum of the initial data.
fn filtered_field(
    config: &RunConfig,
    initial: &ScalarField3,
    prepared: &PreparedSpectrum,
    params: &FilterParams,
) -> crate::Result<ScalarField3> {
    let mut total = prepared.apply(params)?;
    for _ in 1..config.passes {
        let residue = ScalarField3 {
            grid: initial.grid,
            values: initial.values.iter().zip(&total.values).map(|(x, s)| x - s).collect(),
        };
        let mode = lowpass_apply(&residue, params)?;
        for (s, m) in total.values.iter_mut().zip(&mode.values) {
            *s += m;
        }
    }
    Ok(total)
}

/// Runs every `(t, isovalue)` combination of `config`: one filter solve per
/// `t` from a shared forward transform, one extraction per isovalue.
pub fn sweep(config: &RunConfig) -> Result<RunReport, PipelineError> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |timings: &mut BTreeMap<String, f64>, name: String| {
        let now = Instant::now();
        timings.insert(name, (now - clock).as_secs_f64() * 1e3);
        clock = now;
    };

    config.validate().map_err(|m| PipelineError::new(Stage::Config, m))?;

    if !config.input.is_file() {
        return Err(PipelineError::new(
            Stage::Input,
            format!("cannot read input file {}", config.input.display()),
        ));
    }
    let pdb_options = PdbOptions {
        strip_solvent: config.strip_solvent,
        ..Default::default()
    };
    let mol = read_molecule(&config.input, config.format, &pdb_options).at(Stage::Input)?;
    lap(&mut timings, "input".into());

    let grid = make_grid(&mol, &config.grid_options()).at(Stage::Grid)?;
    lap(&mut timings, "grid".into());

    let initial = initial_field(config, &mol, &grid).at(Stage::Rasterize)?;
    let (initial_min, initial_max) = initial.min_max();
    lap(&mut timings, "rasterize".into());

    let prepared = PreparedSpectrum::new(&initial).at(Stage::Filter)?;
    let threshold = prepared.lowest_threshold();
    lap(&mut timings, "forward_transform".into());

    let multi_t = config.times.len() > 1;
    let multi_iso = config.isovalues.len() > 1;
    let mut runs = Vec::new();
    let mut surfaces = Vec::new();
    for &t in &config.times {
        let params = config.filter_params(t);
        let field = filtered_field(config, &initial, &prepared, &params).at(Stage::Filter)?;
        let (field_min, field_max) = field.min_max();
        let high_frequency_energy = prepared.high_frequency_energy(&params, threshold);
        lap(&mut timings, format!("filter_t{t}"));

        let volume_path = match config.volume_out {
            None => None,
            Some(format) => {
                let base = config
                    .volume_path
                    .clone()
                    .or_else(|| config.mesh_out.clone())
                    .unwrap_or_else(|| PathBuf::from("volume"));
                let path = output_path(&base, multi_t.then_some(t), None, Some(format.extension()));
                let bytes = match format {
                    VolumeFormat::Dx => format_opendx(&field).at(Stage::Output)?.into_bytes(),
                    VolumeFormat::Raw => encode_raw(&field).at(Stage::Output)?,
                };
                write_file(&path, &bytes)?;
                Some(path)
            }
        };

        let mut records = Vec::new();
        for &iso in &config.isovalues {
            let mesh = marching_cubes(&field, iso)
                .map_err(|e| PipelineError::new(Stage::Extract, format!("t = {t}: {e}")))?;
            let metrics = mesh_metrics(&mesh);
            lap(&mut timings, format!("extract_t{t}_iso{iso}"));
            let tag_t = multi_t.then_some(t);
            let tag_iso = multi_iso.then_some(iso);
            let mesh_path = match &config.mesh_out {
                None => None,
                Some(base) => {
                    let path = output_path(base, tag_t, tag_iso, None);
                    let is_off = path
                        .extension()
                        .is_some_and(|e| e.eq_ignore_ascii_case("off"));
                    let text = if is_off { format_off(&mesh) } else { format_obj(&mesh) };
                    write_file(&path, text.at(Stage::Output)?.as_bytes())?;
                    Some(path)
                }
            };
            let metrics_path = match &config.metrics_out {
                None => None,
                Some(base) => {
                    let path = output_path(base, tag_t, tag_iso, None);
                    write_file(&path, metrics.report().as_bytes())?;
                    Some(path)
                }
            };
            records.push(SurfaceRecord {
                isovalue: iso,
                mesh_path,
                metrics_path,
                metrics,
            });
            surfaces.push(SurfaceOutput {
                t,
                isovalue: iso,
                mesh,
            });
        }
        runs.push(TimeRecord {
            t,
            filter: params,
            field_min,
            field_max,
            field_mean: field.mean(),
            high_frequency_energy,
            volume_path,
            surfaces: records,
        });
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        pde_order: 2 * config.dcoeff.len(),
        input: InputSummary {
            path: config.input.clone(),
            format: mol.source.format,
            atom_count: mol.atoms.len(),
            warnings: mol.source.warnings.clone(),
        },
        grid,
        initial_min,
        initial_max,
        initial_mean: initial.mean(),
        high_frequency_threshold_w2: threshold,
        runs,
        timings_ms: timings,
    };
    Ok(RunReport { manifest, surfaces })
}

/// Single-configuration run; identical to [`sweep`], which it delegates to.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport, PipelineError> {
    sweep(config)
}
