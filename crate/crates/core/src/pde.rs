//! Linearized high-order PDE low-pass transform.
//!
//! The evolution
//!
//! ```text
//! du/dt = sum_{j=1..m} (-1)^(j+1) d_j nabla^(2j) u + eps (X - u),   u(0) = X
//! ```
//!
//! is diagonal in the Clifford-Fourier basis. Each bin with `|w|^2 = w2`
//! is scaled by
//!
//! ```text
//! L(w2) = exp(-(S + eps) t) + eps / (S + eps) * (1 - exp(-(S + eps) t)),
//! S = sum_j d_j w2^j
//! ```
//!
//! With `w` in rad/Å the product `d_m t` has units of Å^(2m); absolute `t`
//! values are only meaningful together with the grid spacing.

use rayon::prelude::*;
use serde::Serialize;

use crate::cft::{cft3_forward_scalar, cft3_inverse_scalar, ScalarSpectrum, SpectralGrid};
use crate::error::{Error, Result};
use crate::grid::ScalarField3;

/// Exponents beyond this underflow `exp(-x)` to zero in f64.
const EXP_UNDERFLOW: f64 = 745.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterParams {
    /// Diffusion coefficients `d_1..d_m`; the PDE order is `2 * d.len()`.
    pub d: Vec<f64>,
    pub epsilon: f64,
    pub t: f64,
}

impl FilterParams {
    /// Single highest-order term: `d_j = 0` for `j < m`, `d_m = 1`, `eps = 0`.
    pub fn highest_order(m: usize, t: f64) -> Self {
        let mut d = vec![0.0; m];
        if let Some(last) = d.last_mut() {
            *last = 1.0;
        }
        Self { d, epsilon: 0.0, t }
    }

    pub fn half_order(&self) -> usize {
        self.d.len()
    }

    pub fn with_time(&self, t: f64) -> Self {
        Self { t, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d.is_empty() {
            return Err(Error::InvalidParams("order m must be >= 1".into()));
        }
        if self.d.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidParams(format!(
                "diffusion coefficients must be finite and >= 0, got {:?}",
                self.d
            )));
        }
        if !self.d.iter().any(|&d| d > 0.0) {
            return Err(Error::InvalidParams(
                "at least one diffusion coefficient must be positive".into(),
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParams(format!("epsilon {} must be >= 0", self.epsilon)));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::InvalidParams(format!("time {} must be > 0", self.t)));
        }
        Ok(())
    }

    /// Frequency response at `w2`; assumes validated parameters.
    pub fn response(&self, w2: f64) -> f64 {
        let mut power = 1.0;
        let mut symbol = 0.0;
        for &d in &self.d {
            power *= w2;
            // skipped zeros keep an overflowed power from turning into NaN
            if d != 0.0 {
                symbol += d * power;
            }
        }
        if symbol == 0.0 {
            return 1.0;
        }
        let rate = symbol + self.epsilon;
        // Compare ln(rate * t) so that huge symbols never overflow first.
        let decay = if rate.ln() + self.t.ln() > EXP_UNDERFLOW.ln() {
            0.0
        } else {
            (-rate * self.t).exp()
        };
        if self.epsilon == 0.0 || !rate.is_finite() {
            return decay;
        }
        let attained = if decay == 0.0 {
            1.0
        } else {
            -(-rate * self.t).exp_m1()
        };
        decay + self.epsilon / rate * attained
    }
}

pub fn frequency_response(params: &FilterParams, w2: f64) -> Result<f64> {
    params.validate()?;
    if !(w2 >= 0.0 && w2.is_finite()) {
        return Err(Error::InvalidParams(format!("w^2 = {w2} must be finite and >= 0")));
    }
    Ok(params.response(w2))
}

/// Forward transform of a field kept around so that several filters can be
/// applied without recomputing it.
#[derive(Debug, Clone)]
pub struct PreparedSpectrum {
    pub spectrum: ScalarSpectrum,
    pub w2: Vec<f64>,
}

impl PreparedSpectrum {
    pub fn new(field: &ScalarField3) -> Result<Self> {
        field.ensure_finite()?;
        let spectrum = cft3_forward_scalar(field)?;
        let w2 = SpectralGrid::for_grid(&field.grid).w2_all();
        Ok(Self { spectrum, w2 })
    }

    pub fn filtered_spectrum(&self, params: &FilterParams) -> Result<ScalarSpectrum> {
        params.validate()?;
        let mut out = self.spectrum.clone();
        out.data
            .par_iter_mut()
            .zip(self.w2.par_iter())
            .for_each(|(c, &w2)| *c *= params.response(w2));
        Ok(out)
    }

    pub fn apply(&self, params: &FilterParams) -> Result<ScalarField3> {
        Ok(cft3_inverse_scalar(&self.filtered_spectrum(params)?))
    }

    /// `sum_{w2 > threshold} |X^(w)|^2 L(w2)^2`: spectral energy of the
    /// filtered field above a wavenumber threshold.
    pub fn high_frequency_energy(&self, params: &FilterParams, threshold_w2: f64) -> f64 {
        self.spectrum
            .data
            .iter()
            .zip(&self.w2)
            .filter(|(_, &w2)| w2 > threshold_w2)
            .map(|(c, &w2)| c.norm_sqr() * params.response(w2).powi(2))
            .sum()
    }

    /// Half the smallest nonzero `|w|^2`, so that every non-DC bin counts.
    pub fn lowest_threshold(&self) -> f64 {
        0.5 * self
            .w2
            .iter()
            .copied()
            .filter(|&w| w > 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}

/// One pass of the low-pass transform: forward CFT3, per-bin scaling by the
/// frequency response, inverse CFT3.
pub fn lowpass_apply(field: &ScalarField3, params: &FilterParams) -> Result<ScalarField3> {
    params.validate()?;
    PreparedSpectrum::new(field)?.apply(params)
}

#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub modes: Vec<ScalarField3>,
    pub final_residue: ScalarField3,
    pub params: Vec<FilterParams>,
}

impl ModeDecomposition {
    pub fn reconstruct(&self) -> ScalarField3 {
        let mut out = self.final_residue.clone();
        for mode in &self.modes {
            for (o, m) in out.values.iter_mut().zip(&mode.values) {
                *o += m;
            }
        }
        out
    }
}

/// Recursive mode extraction: `mode_k = L residue_k`,
/// `residue_{k+1} = X - sum_{j<=k} mode_j`.
pub fn mode_decompose(field: &ScalarField3, passes: &[FilterParams]) -> Result<ModeDecomposition> {
    if passes.is_empty() {
        return Err(Error::InvalidParams("at least one decomposition pass is required".into()));
    }
    for p in passes {
        p.validate()?;
    }
    field.ensure_finite()?;
    let mut modes = Vec::with_capacity(passes.len());
    let mut mode_sum = vec![0.0; field.values.len()];
    let mut residue = field.clone();
    for params in passes {
        let mode = lowpass_apply(&residue, params)?;
        for (s, m) in mode_sum.iter_mut().zip(&mode.values) {
            *s += m;
        }
        modes.push(mode);
        residue = ScalarField3 {
            grid: field.grid,
            values: field.values.iter().zip(&mode_sum).map(|(x, s)| x - s).collect(),
        };
    }
    Ok(ModeDecomposition {
        modes,
        final_residue: residue,
        params: passes.to_vec(),
    })
}
