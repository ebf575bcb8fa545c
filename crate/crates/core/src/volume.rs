//! Computational grid around a molecule, initial-data rasterization and
//! volumetric output (OpenDX and a raw little-endian dump).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField3};
use crate::molecule::Molecule;

/// Rough peak working set per voxel across the pipeline: initial field,
/// spectrum, filtered spectrum, FFT line buffer and output field.
pub const BYTES_PER_VOXEL: u64 = 64;

pub const DEFAULT_SPACING: f64 = 0.25;
pub const DEFAULT_PADDING: f64 = 5.0;
pub const DEFAULT_MEM_CAP: u64 = 4 << 30;
pub const DEFAULT_GAUSSIAN_SCALE: f64 = 1.0;
pub const DEFAULT_GAUSSIAN_DECAY: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOptions {
    pub spacing: f64,
    pub padding: f64,
    pub mem_cap: u64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            spacing: DEFAULT_SPACING,
            padding: DEFAULT_PADDING,
            mem_cap: DEFAULT_MEM_CAP,
        }
    }
}

fn is_smooth(mut n: usize) -> bool {
    for p in [2, 3, 5, 7] {
        while n.is_multiple_of(p) {
            n /= p;
        }
    }
    n == 1
}

/// Smallest integer `>= n` whose prime factors are all in {2, 3, 5, 7}.
pub fn next_fft_size(n: usize) -> usize {
    (n.max(2)..).find(|&m| is_smooth(m)).expect("smooth numbers are unbounded")
}

/// Box = bounding box of all spheres, grown by `padding` on every side,
/// sampled at `spacing`. Axis sizes are rounded up to FFT-friendly values and
/// the extra samples are split evenly about the box center.
pub fn make_grid(mol: &Molecule, options: &GridOptions) -> Result<GridSpec> {
    let GridOptions {
        spacing,
        padding,
        mem_cap,
    } = *options;
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidGrid(format!("spacing {spacing} must be positive")));
    }
    if !(padding >= 0.0 && padding.is_finite()) {
        return Err(Error::InvalidGrid(format!("padding {padding} must be >= 0")));
    }
    let (lo, hi) = mol.bounding_box();
    let mut dims = [0usize; 3];
    let mut origin = [0.0; 3];
    for a in 0..3 {
        let extent = hi[a] - lo[a] + 2.0 * padding;
        // tolerate round-off when the extent is an exact multiple of spacing
        let intervals = (extent / spacing - 1e-9).ceil().max(1.0) as usize;
        dims[a] = next_fft_size(intervals + 1);
        let center = 0.5 * (lo[a] + hi[a]);
        origin[a] = center - 0.5 * spacing * (dims[a] - 1) as f64;
    }
    let bytes = dims.iter().map(|&n| n as u64).product::<u64>() * BYTES_PER_VOXEL;
    if bytes > mem_cap {
        return Err(Error::MemoryCap {
            dims,
            bytes,
            cap: mem_cap,
        });
    }
    GridSpec::new(origin, spacing, dims)
}

/// Uniform binning of atom centers.
struct CellList {
    lo: [f64; 3],
    pitch: f64,
    dims: [i64; 3],
    cells: Vec<Vec<usize>>,
}

impl CellList {
    fn new(mol: &Molecule, pitch: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for atom in &mol.atoms {
            for d in 0..3 {
                lo[d] = lo[d].min(atom.center[d]);
                hi[d] = hi[d].max(atom.center[d]);
            }
        }
        let dims: [i64; 3] = std::array::from_fn(|d| ((hi[d] - lo[d]) / pitch).floor() as i64 + 1);
        let mut cells = vec![Vec::new(); (dims[0] * dims[1] * dims[2]) as usize];
        let mut list = Self {
            lo,
            pitch,
            dims,
            cells: Vec::new(),
        };
        for (i, atom) in mol.atoms.iter().enumerate() {
            let c = list.cell_of(atom.center);
            cells[list.flat(c)].push(i);
        }
        list.cells = cells;
        list
    }

    fn cell_of(&self, p: [f64; 3]) -> [i64; 3] {
        std::array::from_fn(|d| ((p[d] - self.lo[d]) / self.pitch).floor() as i64)
    }

    fn flat(&self, c: [i64; 3]) -> usize {
        ((c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]) as usize
    }

    /// Visits the existing cells at Chebyshev distance exactly `ring` from `base`.
    fn visit_ring(&self, base: [i64; 3], ring: i64, mut f: impl FnMut(&[usize])) {
        let lo: [i64; 3] = std::array::from_fn(|d| (base[d] - ring).max(0));
        let hi: [i64; 3] = std::array::from_fn(|d| (base[d] + ring).min(self.dims[d] - 1));
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let cheb = (i - base[0])
                        .abs()
                        .max((j - base[1]).abs())
                        .max((k - base[2]).abs());
                    if cheb == ring {
                        f(&self.cells[self.flat([i, j, k])]);
                    }
                }
            }
        }
    }

    /// Largest Chebyshev distance from `base` to any cell in the list.
    fn max_ring(&self, base: [i64; 3]) -> i64 {
        (0..3)
            .map(|d| base[d].abs().max((self.dims[d] - 1 - base[d]).abs()))
            .max()
            .unwrap_or(0)
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn rasterize(grid: &GridSpec, value: impl Fn([f64; 3]) -> f64 + Sync) -> ScalarField3 {
    let [_, ny, nz] = grid.dims;
    let mut values = vec![0.0; grid.len()];
    values
        .par_chunks_mut(ny * nz)
        .enumerate()
        .for_each(|(i, slab)| {
            for j in 0..ny {
                for k in 0..nz {
                    slab[j * nz + k] = value(grid.point(i, j, k));
                }
            }
        });
    ScalarField3 {
        grid: *grid,
        values,
    }
}

/// Which side of the van der Waals surface is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiecewiseOrientation {
    /// 0 inside the union of spheres, 1 outside.
    InsideZero,
    /// 1 inside, 0 outside.
    InsideOne,
}

/// Binary field: 0 at voxels whose center lies in some closed ball
/// `|r - r_b| <= r_b`, 1 elsewhere.
pub fn rasterize_piecewise(mol: &Molecule, grid: &GridSpec) -> ScalarField3 {
    rasterize_piecewise_oriented(mol, grid, PiecewiseOrientation::InsideZero)
}

pub fn rasterize_piecewise_oriented(
    mol: &Molecule,
    grid: &GridSpec,
    orientation: PiecewiseOrientation,
) -> ScalarField3 {
    let cells = CellList::new(mol, mol.max_radius());
    let (inside, outside) = match orientation {
        PiecewiseOrientation::InsideZero => (0.0, 1.0),
        PiecewiseOrientation::InsideOne => (1.0, 0.0),
    };
    rasterize(grid, |p| {
        let base = cells.cell_of(p);
        let mut hit = false;
        for ring in 0..=1 {
            cells.visit_ring(base, ring, |atoms| {
                hit = hit
                    || atoms.iter().any(|&a| {
                        let atom = &mol.atoms[a];
                        dist2(p, atom.center) <= atom.radius * atom.radius
                    });
            });
        }
        if hit {
            inside
        } else {
            outside
        }
    })
}

/// `u(r) = max_b s exp(-(|r - r_b|^2 - r_b^2) / r_e^2)`, evaluated exactly:
/// cells are searched in growing rings until no remaining atom can beat the
/// current best exponent.
pub fn rasterize_gaussian(mol: &Molecule, grid: &GridSpec, s: f64, r_e: f64) -> Result<ScalarField3> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParams(format!("Gaussian scale s = {s} must be > 0")));
    }
    if !(r_e > 0.0 && r_e.is_finite()) {
        return Err(Error::InvalidParams(format!("Gaussian decay r_e = {r_e} must be > 0")));
    }
    let rmax = mol.max_radius();
    let pitch = rmax.max(r_e);
    let cells = CellList::new(mol, pitch);
    Ok(rasterize(grid, |p| {
        let base = cells.cell_of(p);
        let last = cells.max_ring(base);
        let mut best = f64::INFINITY;
        for ring in 0..=last {
            if ring >= 1 {
                let reach = (ring - 1) as f64 * pitch;
                if reach * reach - rmax * rmax >= best {
                    break;
                }
            }
            cells.visit_ring(base, ring, |atoms| {
                for &a in atoms {
                    let atom = &mol.atoms[a];
                    let q = dist2(p, atom.center) - atom.radius * atom.radius;
                    if q < best {
                        best = q;
                    }
                }
            });
        }
        s * (-best / (r_e * r_e)).exp()
    }))
}

/// Brute-force Gaussian rasterization over all atoms; reference for tests.
pub fn rasterize_gaussian_naive(mol: &Molecule, grid: &GridSpec, s: f64, r_e: f64) -> ScalarField3 {
    rasterize(grid, |p| {
        mol.atoms
            .iter()
            .map(|a| s * (-(dist2(p, a.center) - a.radius * a.radius) / (r_e * r_e)).exp())
            .fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Scientific notation with the shortest digits that round-trip, exponent
/// written C-style (`e+00`).
pub(crate) fn format_sci(v: f64) -> String {
    let s = format!("{v:e}");
    let (mantissa, exp) = s.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// OpenDX scalar field text. Data is listed with `z` varying fastest, three
/// values per line.
pub fn format_opendx(field: &ScalarField3) -> Result<String> {
    field.ensure_finite()?;
    let g = &field.grid;
    let [nx, ny, nz] = g.dims;
    let h = format_sci(g.spacing);
    let zero = format_sci(0.0);
    let mut out = String::new();
    let _ = writeln!(out, "object 1 class gridpositions counts {nx} {ny} {nz}");
    let _ = writeln!(
        out,
        "origin {} {} {}",
        format_sci(g.origin[0]),
        format_sci(g.origin[1]),
        format_sci(g.origin[2])
    );
    let _ = writeln!(out, "delta {h} {zero} {zero}");
    let _ = writeln!(out, "delta {zero} {h} {zero}");
    let _ = writeln!(out, "delta {zero} {zero} {h}");
    let _ = writeln!(out, "object 2 class gridconnections counts {nx} {ny} {nz}");
    let _ = writeln!(
        out,
        "object 3 class array type double rank 0 items {} data follows",
        g.len()
    );
    for chunk in field.values.chunks(3) {
        let line: Vec<String> = chunk.iter().map(|&v| format_sci(v)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out.push_str("attribute \"dep\" string \"positions\"\n");
    out.push_str("object \"regular positions regular connections\" class field\n");
    out.push_str("component \"positions\" value 1\n");
    out.push_str("component \"connections\" value 2\n");
    out.push_str("component \"data\" value 3\n");
    Ok(out)
}

pub fn export_opendx(field: &ScalarField3, path: &Path) -> Result<()> {
    let text = format_opendx(field)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn dx_error(message: impl Into<String>) -> Error {
    Error::Format(format!("OpenDX: {}", message.into()))
}

/// Reads the regular-grid subset of OpenDX written by [`format_opendx`]
/// (and by most electrostatics tools).
pub fn parse_opendx(text: &str) -> Result<ScalarField3> {
    let mut dims = None;
    let mut origin = None;
    let mut deltas = Vec::new();
    let mut items = None;
    let mut lines = text.lines();
    for line in lines.by_ref() {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.is_empty() || t[0].starts_with('#') {
            continue;
        }
        let nums = |s: &[&str]| -> Result<Vec<f64>> {
            s.iter()
                .map(|x| x.parse::<f64>().map_err(|_| dx_error(format!("bad number {x:?}"))))
                .collect()
        };
        if line.contains("gridpositions") {
            let i = t.iter().position(|&w| w == "counts").ok_or_else(|| dx_error("no counts"))?;
            let n = nums(&t[i + 1..])?;
            if n.len() != 3 {
                return Err(dx_error("expected three counts"));
            }
            dims = Some([n[0] as usize, n[1] as usize, n[2] as usize]);
        } else if t[0] == "origin" {
            let n = nums(&t[1..])?;
            origin = Some([n[0], n[1], n[2]]);
        } else if t[0] == "delta" {
            deltas.push(nums(&t[1..])?);
        } else if line.contains("data follows") {
            let i = t.iter().position(|&w| w == "items").ok_or_else(|| dx_error("no items"))?;
            items = Some(t[i + 1].parse::<usize>().map_err(|_| dx_error("bad item count"))?);
            break;
        }
    }
    let dims = dims.ok_or_else(|| dx_error("missing gridpositions"))?;
    let origin = origin.ok_or_else(|| dx_error("missing origin"))?;
    let items = items.ok_or_else(|| dx_error("missing data array"))?;
    if deltas.len() != 3 {
        return Err(dx_error("expected three delta lines"));
    }
    let spacing = deltas[0][0];
    for (a, d) in deltas.iter().enumerate() {
        for (b, &v) in d.iter().enumerate() {
            let expected = if a == b { spacing } else { 0.0 };
            if v != expected {
                return Err(dx_error("only uniform axis-aligned grids are supported"));
            }
        }
    }
    let mut values = Vec::with_capacity(items);
    'outer: for line in lines {
        for tok in line.split_whitespace() {
            if values.len() == items {
                break 'outer;
            }
            match tok.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) => break 'outer,
            }
        }
    }
    if values.len() != items {
        return Err(dx_error(format!("expected {items} values, found {}", values.len())));
    }
    ScalarField3::new(GridSpec::new(origin, spacing, dims)?, values)
}

pub fn read_opendx(path: &Path) -> Result<ScalarField3> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_opendx(&text)
}

/// Raw dump: `nx ny nz` as u64, `origin` and `spacing` as f64, then the
/// values as f64, all little-endian, `z` fastest.
pub fn encode_raw(field: &ScalarField3) -> Result<Vec<u8>> {
    field.ensure_finite()?;
    let g = &field.grid;
    let mut out = Vec::with_capacity(56 + 8 * field.values.len());
    for n in g.dims {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in g.origin.iter().chain(std::iter::once(&g.spacing)) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raw(bytes: &[u8]) -> Result<ScalarField3> {
    if bytes.len() < 56 || !(bytes.len() - 56).is_multiple_of(8) {
        return Err(Error::Format(format!("raw volume of {} bytes", bytes.len())));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("8 bytes") };
    let dims = [0, 1, 2].map(|i| u64::from_le_bytes(word(i)) as usize);
    let origin = [3, 4, 5].map(|i| f64::from_le_bytes(word(i)));
    let spacing = f64::from_le_bytes(word(6));
    let values = (7..bytes.len() / 8).map(|i| f64::from_le_bytes(word(i))).collect();
    ScalarField3::new(GridSpec::new(origin, spacing, dims)?, values)
}

pub fn export_raw(field: &ScalarField3, path: &Path) -> Result<()> {
    let bytes = encode_raw(field)?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}
