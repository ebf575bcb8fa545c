//! Discrete Clifford-Fourier transforms in 2D and 3D.
//!
//! The kernel is `exp(-i_n <w, x>)` multiplied on the right of the signal,
//! with `i_n` the pseudoscalar. A multivector field splits into complex
//! signals in which the pseudoscalar plays the role of the imaginary unit:
//!
//! * R_3: `(F0 + F123 i3)`, `e1 (F1 + F23 i3)`, `e2 (F2 + F31 i3)`, `e3 (F3 + F12 i3)`
//! * R_2: `(F0 + F12 i2)`, `e1 (F1 + F2 i2)`
//!
//! so each transform is one classical complex DFT per channel.
//!
//! Frequencies are angular: bin `k` on an axis of `N` samples at spacing `h`
//! has `w = 2 pi k / (N h)` rad per length unit. A cyclic frequency `u`
//! (kernel `exp(-2 pi i <x, u>)`) maps to `w = 2 pi u`, so the derivative
//! symbols `2 pi i3 u` and `-4 pi^2 u^2` become `i3 w` and `-w^2`.
//!
//! Forward transforms are unnormalized; inverses carry the `1/N` factor.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::ga::{Multivector2, Multivector3};
use crate::grid::{GridSpec, ScalarField3};

/// Number of 1D lines handed to each rayon task.
const LINES_PER_TASK: usize = 64;

/// Uniform 2D grid; pixel `(i, j)` is stored at `i * ny + j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub dims: [usize; 2],
    pub spacing: f64,
}

impl Grid2 {
    pub fn new(dims: [usize; 2], spacing: f64) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) || !(spacing > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "2D grid {dims:?} with spacing {spacing}"
            )));
        }
        Ok(Self { dims, spacing })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultivectorField2 {
    pub grid: Grid2,
    pub data: Vec<Multivector2>,
}

impl MultivectorField2 {
    pub fn new(grid: Grid2, data: Vec<Multivector2>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {:?} grid",
                data.len(),
                grid.dims
            )));
        }
        Ok(Self { grid, data })
    }

    fn check(&self) -> Result<()> {
        if self.data.len() != self.grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {:?} grid",
                self.data.len(),
                self.grid.dims
            )));
        }
        Ok(())
    }

    pub fn to_channels(&self) -> [Vec<Complex64>; 2] {
        let mut even = Vec::with_capacity(self.data.len());
        let mut odd = Vec::with_capacity(self.data.len());
        for m in &self.data {
            even.push(Complex64::new(m[0], m[3]));
            odd.push(Complex64::new(m[1], m[2]));
        }
        [even, odd]
    }

    pub fn from_channels(grid: Grid2, channels: &[Vec<Complex64>; 2]) -> Self {
        let data = channels[0]
            .iter()
            .zip(&channels[1])
            .map(|(a, b)| Multivector2([a.re, b.re, b.im, a.im]))
            .collect();
        Self { grid, data }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultivectorField3 {
    pub grid: GridSpec,
    pub data: Vec<Multivector3>,
}

impl MultivectorField3 {
    pub fn new(grid: GridSpec, data: Vec<Multivector3>) -> Result<Self> {
        let f = Self { grid, data };
        f.check()?;
        Ok(f)
    }

    /// Embeds a real field as the scalar blade of a multivector field.
    pub fn from_scalar(field: &ScalarField3) -> Self {
        Self {
            grid: field.grid,
            data: field.values.iter().map(|&v| Multivector3::scalar(v)).collect(),
        }
    }

    pub fn scalar_part(&self) -> ScalarField3 {
        ScalarField3 {
            grid: self.grid,
            values: self.data.iter().map(|m| m[0]).collect(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.data.len() != self.grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {:?} grid",
                self.data.len(),
                self.grid.dims
            )));
        }
        Ok(())
    }

    pub fn to_channels(&self) -> [Vec<Complex64>; 4] {
        let n = self.data.len();
        let mut ch: [Vec<Complex64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
        for m in &self.data {
            ch[0].push(Complex64::new(m[0], m[Multivector3::E123]));
            ch[1].push(Complex64::new(m[1], m[Multivector3::E23]));
            ch[2].push(Complex64::new(m[2], m[Multivector3::E31]));
            ch[3].push(Complex64::new(m[3], m[Multivector3::E12]));
        }
        ch
    }

    pub fn from_channels(grid: GridSpec, ch: &[Vec<Complex64>; 4]) -> Self {
        let data = (0..ch[0].len())
            .map(|i| {
                let (c0, c1, c2, c3) = (ch[0][i], ch[1][i], ch[2][i], ch[3][i]);
                Multivector3([c0.re, c1.re, c2.re, c3.re, c3.im, c1.im, c2.im, c0.im])
            })
            .collect();
        Self { grid, data }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(Multivector3::norm_squared).sum()
    }
}

/// Signed frequency index of DFT bin `i` on an axis of `n` samples.
/// For even `n` the Nyquist bin `n/2` maps to `-n/2`.
#[inline]
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Angular wavenumbers of every DFT bin on a 1D axis.
pub fn angular_wavenumbers(n: usize, spacing: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::PI / (n as f64 * spacing);
    (0..n).map(|i| scale * signed_index(i, n) as f64).collect()
}

/// Per-axis wavenumbers for a grid of up to three axes (unused axes have
/// length 1 and carry only the zero bin).
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub dims: [usize; 3],
    pub wavenumbers: [Vec<f64>; 3],
    nyquist: [Option<usize>; 3],
}

impl SpectralGrid {
    pub fn new(dims: [usize; 3], spacing: f64) -> Self {
        Self {
            dims,
            wavenumbers: dims.map(|n| angular_wavenumbers(n, spacing)),
            nyquist: dims.map(|n| (n % 2 == 0 && n > 1).then_some(n / 2)),
        }
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        Self::new(grid.dims, grid.spacing)
    }

    #[inline]
    fn unravel(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    /// `|w|^2` at linear bin `idx`, Nyquist included.
    #[inline]
    pub fn w2(&self, idx: usize) -> f64 {
        let b = self.unravel(idx);
        (0..3).map(|a| self.wavenumbers[a][b[a]].powi(2)).sum()
    }

    /// Wavenumber vector for odd-symbol operators: Nyquist components are
    /// zeroed so that real fields stay real.
    #[inline]
    pub fn odd_vector(&self, idx: usize) -> [f64; 3] {
        let b = self.unravel(idx);
        std::array::from_fn(|a| {
            if self.nyquist[a] == Some(b[a]) {
                0.0
            } else {
                self.wavenumbers[a][b[a]]
            }
        })
    }

    /// All `|w|^2` values in storage order.
    pub fn w2_all(&self) -> Vec<f64> {
        (0..self.dims.iter().product()).map(|i| self.w2(i)).collect()
    }
}

fn fft_axis(data: &mut [Complex64], dims: [usize; 3], axis: usize, fft: &Arc<dyn Fft<f64>>) {
    let n = dims[axis];
    if n == 1 {
        return;
    }
    let scratch_len = fft.get_inplace_scratch_len();
    let run = |buf: &mut [Complex64]| {
        buf.par_chunks_mut(n * LINES_PER_TASK).for_each_init(
            || vec![Complex64::default(); scratch_len],
            |scratch, chunk| fft.process_with_scratch(chunk, scratch),
        );
    };
    if axis == 2 {
        run(data);
        return;
    }
    let [n0, n1, n2] = dims;
    // Gather strided lines into contiguous storage, transform, scatter back.
    let source = |line: usize, a: usize| -> usize {
        let (outer, k) = (line / n2, line % n2);
        if axis == 1 {
            (outer * n1 + a) * n2 + k
        } else {
            (a * n1 + outer) * n2 + k
        }
    };
    let mut lines = vec![Complex64::default(); data.len()];
    {
        let data = &*data;
        lines
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(line, buf)| {
                for (a, v) in buf.iter_mut().enumerate() {
                    *v = data[source(line, a)];
                }
            });
    }
    run(&mut lines);
    data.par_chunks_mut(n2).enumerate().for_each(|(row, out)| {
        let (i, j) = (row / n1, row % n1);
        for (k, v) in out.iter_mut().enumerate() {
            *v = if axis == 1 {
                lines[(i * n2 + k) * n1 + j]
            } else {
                lines[(j * n2 + k) * n0 + i]
            };
        }
    });
}

/// In-place unnormalized complex DFT over a `dims[0] x dims[1] x dims[2]`
/// array (last axis contiguous).
pub fn fft3_in_place(data: &mut [Complex64], dims: [usize; 3], inverse: bool) {
    debug_assert_eq!(data.len(), dims.iter().product::<usize>());
    let mut planner = FftPlanner::<f64>::new();
    for axis in (0..3).rev() {
        let fft = if inverse {
            planner.plan_fft_inverse(dims[axis])
        } else {
            planner.plan_fft_forward(dims[axis])
        };
        fft_axis(data, dims, axis, &fft);
    }
}

fn inverse_normalized(data: &mut [Complex64], dims: [usize; 3]) {
    fft3_in_place(data, dims, true);
    let scale = 1.0 / data.len() as f64;
    data.par_iter_mut().for_each(|v| *v *= scale);
}

pub fn cft3_forward(field: &MultivectorField3) -> Result<MultivectorField3> {
    field.check()?;
    let mut ch = field.to_channels();
    for c in ch.iter_mut() {
        fft3_in_place(c, field.grid.dims, false);
    }
    Ok(MultivectorField3::from_channels(field.grid, &ch))
}

pub fn cft3_inverse(spectrum: &MultivectorField3) -> Result<MultivectorField3> {
    spectrum.check()?;
    let mut ch = spectrum.to_channels();
    for c in ch.iter_mut() {
        inverse_normalized(c, spectrum.grid.dims);
    }
    Ok(MultivectorField3::from_channels(spectrum.grid, &ch))
}

fn dims2(grid: &Grid2) -> [usize; 3] {
    [grid.dims[0], grid.dims[1], 1]
}

pub fn cft2_forward(field: &MultivectorField2) -> Result<MultivectorField2> {
    field.check()?;
    let mut ch = field.to_channels();
    for c in ch.iter_mut() {
        fft3_in_place(c, dims2(&field.grid), false);
    }
    Ok(MultivectorField2::from_channels(field.grid, &ch))
}

pub fn cft2_inverse(spectrum: &MultivectorField2) -> Result<MultivectorField2> {
    spectrum.check()?;
    let mut ch = spectrum.to_channels();
    for c in ch.iter_mut() {
        inverse_normalized(c, dims2(&spectrum.grid));
    }
    Ok(MultivectorField2::from_channels(spectrum.grid, &ch))
}

/// Spectrum of a real field: the `(F0 + F123 i3)` channel of its CFT3.
/// The other three channels of a scalar field's transform are identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSpectrum {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

/// Scalar fast path of [`cft3_forward`]: transforms only the one nonzero channel.
pub fn cft3_forward_scalar(field: &ScalarField3) -> Result<ScalarSpectrum> {
    if field.values.len() != field.grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for a {:?} grid",
            field.values.len(),
            field.grid.dims
        )));
    }
    let mut data: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3_in_place(&mut data, field.grid.dims, false);
    Ok(ScalarSpectrum {
        grid: field.grid,
        data,
    })
}

/// Inverse of [`cft3_forward_scalar`], returning the scalar blade.
pub fn cft3_inverse_scalar(spectrum: &ScalarSpectrum) -> ScalarField3 {
    let mut data = spectrum.data.clone();
    inverse_normalized(&mut data, spectrum.grid.dims);
    ScalarField3 {
        grid: spectrum.grid,
        values: data.iter().map(|c| c.re).collect(),
    }
}

/// Vector derivative `nabla F` via the symbol `i3 w` applied on the left of
/// each spectral sample.
pub fn spectral_gradient3(field: &MultivectorField3) -> Result<MultivectorField3> {
    let mut spec = cft3_forward(field)?;
    let sg = SpectralGrid::for_grid(&field.grid);
    let i3 = Multivector3::i3();
    spec.data.par_iter_mut().enumerate().for_each(|(idx, m)| {
        let [wx, wy, wz] = sg.odd_vector(idx);
        *m = i3 * (Multivector3::vector(wx, wy, wz) * *m);
    });
    cft3_inverse(&spec)
}

/// `nabla^(2 order) F` via the symbol `(-w^2)^order`.
pub fn spectral_laplacian3(field: &MultivectorField3, order: u32) -> Result<MultivectorField3> {
    if order == 0 {
        return Err(Error::InvalidParams("Laplacian order must be >= 1".into()));
    }
    let mut spec = cft3_forward(field)?;
    let sg = SpectralGrid::for_grid(&field.grid);
    spec.data.par_iter_mut().enumerate().for_each(|(idx, m)| {
        *m = *m * (-sg.w2(idx)).powi(order as i32);
    });
    cft3_inverse(&spec)
}

/// Sign of the left symbol `sign * i2 w` for each part of an R_2 field.
///
/// With the kernel on the right, `nabla F` has spectrum `w F^ i2` for every
/// field. Moving `i2` to the left flips its sign on the vector part only, so
/// the commuting part gets `-i2 w` and the anticommuting part `+i2 w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSigns {
    pub commuting: f64,
    pub anticommuting: f64,
}

pub const GRADIENT2_SIGNS: SplitSigns = SplitSigns {
    commuting: -1.0,
    anticommuting: 1.0,
};

fn apply_left_symbol2(
    field: &MultivectorField2,
    symbol: impl Fn(Multivector2, Multivector2) -> Multivector2 + Sync,
) -> Result<MultivectorField2> {
    let mut spec = cft2_forward(field)?;
    let sg = SpectralGrid::new(dims2(&field.grid), field.grid.spacing);
    spec.data.par_iter_mut().enumerate().for_each(|(idx, m)| {
        let [wx, wy, _] = sg.odd_vector(idx);
        *m = symbol(Multivector2::vector(wx, wy), *m);
    });
    cft2_inverse(&spec)
}

/// `nabla F` in 2D: splits each spectral sample into the parts commuting and
/// anticommuting with `i2` and applies the matching signed symbol to each.
pub fn spectral_gradient2_split(field: &MultivectorField2) -> Result<MultivectorField2> {
    let i2 = Multivector2::i2();
    let SplitSigns {
        commuting,
        anticommuting,
    } = GRADIENT2_SIGNS;
    apply_left_symbol2(field, |w, m| {
        let (c, a) = m.split_by_pseudoscalar();
        i2 * (w * c) * commuting + i2 * (w * a) * anticommuting
    })
}

/// Applies `sign * i2 w` to the whole spectrum, ignoring the split. Matches
/// the true gradient only on single-parity fields.
pub fn spectral_gradient2_single_sign(
    field: &MultivectorField2,
    sign: f64,
) -> Result<MultivectorField2> {
    let i2 = Multivector2::i2();
    apply_left_symbol2(field, |w, m| i2 * (w * m) * sign)
}
