//! Discretized single-photon wavefunctions on a uniform 1D grid.
//!
//! Wavefunctions are piecewise constant on bins; every integral is a Riemann sum
//! with `dx` weights. Lengths are in mm, phases in radians, wave numbers in rad/mm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{HspError, Result};

/// Bins whose amplitude is below this fraction of the peak amplitude carry no phase.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;

/// Largest probability mass a Gaussian mode may lose outside the grid.
pub const MAX_CLIPPED_MASS: f64 = 1e-4;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_bins: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_bins: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(HspError::InvalidGrid("bounds must be finite".into()));
        }
        if x_min >= x_max {
            return Err(HspError::InvalidGrid(format!(
                "x_min ({x_min}) must be below x_max ({x_max})"
            )));
        }
        if n_bins < 2 {
            return Err(HspError::InvalidGrid(format!(
                "n_bins must be at least 2, got {n_bins}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_bins,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins).map(|i| self.center(i)).collect()
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(HspError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

pub fn make_grid(x_min: f64, x_max: f64, n_bins: usize) -> Result<Grid> {
    Grid::new(x_min, x_max, n_bins)
}

/// Quadratic phase `k x² / (2R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPhase {
    k: f64,
    radius: f64,
}

impl QuadraticPhase {
    pub fn new(k: f64, radius: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(HspError::invalid("k", format!("must be positive, got {k}")));
        }
        if !radius.is_finite() || radius == 0.0 {
            return Err(HspError::invalid(
                "radius",
                format!("must be finite and nonzero, got {radius}"),
            ));
        }
        Ok(Self { k, radius })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Coefficient of `x²` in the phase, rad/mm².
    pub fn curvature(&self) -> f64 {
        self.k / (2.0 * self.radius)
    }

    pub fn phase_at(&self, x: f64) -> f64 {
        self.k * x * x / (2.0 * self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wavefunction {
    grid: Grid,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
}

impl Wavefunction {
    /// Builds a wavefunction from raw amplitude and phase arrays. No normalization
    /// is applied.
    pub fn new(grid: Grid, amplitude: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        let n = grid.n_bins();
        if amplitude.len() != n {
            return Err(HspError::LengthMismatch {
                name: "amplitude",
                expected: n,
                actual: amplitude.len(),
            });
        }
        if phase.len() != n {
            return Err(HspError::LengthMismatch {
                name: "phase",
                expected: n,
                actual: phase.len(),
            });
        }
        if let Some(a) = amplitude.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(HspError::invalid(
                "amplitude",
                format!("must be finite and nonnegative, found {a}"),
            ));
        }
        if let Some(p) = phase.iter().find(|p| !p.is_finite()) {
            return Err(HspError::invalid(
                "phase",
                format!("must be finite, found {p}"),
            ));
        }
        Ok(Self {
            grid,
            amplitude,
            phase,
        })
    }

    /// Flat-phase wavefunction from an amplitude profile.
    pub fn from_amplitude(grid: Grid, amplitude: Vec<f64>) -> Result<Self> {
        let n = grid.n_bins();
        Self::new(grid, amplitude, vec![0.0; n])
    }

    /// Gaussian field `exp(-(x - center)² / waist²)`, flat phase, normalized.
    ///
    /// Fails when more than [`MAX_CLIPPED_MASS`] of the continuous mode's probability
    /// falls outside the grid, since the normalization would then silently rescale
    /// a truncated mode.
    pub fn gaussian(grid: Grid, waist: f64, center: f64) -> Result<Self> {
        if !(waist.is_finite() && waist > 0.0) {
            return Err(HspError::invalid(
                "waist",
                format!("must be positive, got {waist}"),
            ));
        }
        if !center.is_finite() {
            return Err(HspError::invalid("center", "must be finite"));
        }
        let mass = gaussian_clipped_mass(&grid, waist, center);
        if mass > MAX_CLIPPED_MASS {
            return Err(HspError::ModeClipped { mass });
        }
        let amplitude = grid
            .centers()
            .into_iter()
            .map(|x| {
                let d = (x - center) / waist;
                (-d * d).exp()
            })
            .collect();
        Self::from_amplitude(grid, amplitude)?.normalize()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn value(&self, i: usize) -> Complex64 {
        Complex64::from_polar(self.amplitude[i], self.phase[i])
    }

    /// `Σ |ψ|² dx`
    pub fn norm_sq(&self) -> f64 {
        self.amplitude.iter().map(|a| a * a).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let norm_sq = self.norm_sq();
        if !(norm_sq > 0.0 && norm_sq.is_finite()) {
            return Err(HspError::EmptyData(
                "cannot normalize a zero wavefunction".into(),
            ));
        }
        let scale = norm_sq.sqrt().recip();
        self.amplitude.iter_mut().for_each(|a| *a *= scale);
        debug_assert!((self.norm_sq() - 1.0).abs() < NORM_TOL);
        Ok(self)
    }

    /// Bins whose amplitude reaches `threshold` times the peak amplitude.
    pub fn support_mask(&self, threshold: f64) -> Vec<bool> {
        support_mask(&self.amplitude, threshold)
    }

    pub fn with_phase_profile(&self, phase_values: &[f64]) -> Result<Self> {
        if phase_values.len() != self.grid.n_bins() {
            return Err(HspError::LengthMismatch {
                name: "phase_values",
                expected: self.grid.n_bins(),
                actual: phase_values.len(),
            });
        }
        let phase = self
            .phase
            .iter()
            .zip(phase_values)
            .map(|(p, d)| p + d)
            .collect();
        Self::new(self.grid, self.amplitude.clone(), phase)
    }

    pub fn with_quadratic_phase(&self, params: &QuadraticPhase) -> Result<Self> {
        let added: Vec<f64> = self
            .grid
            .centers()
            .into_iter()
            .map(|x| params.phase_at(x))
            .collect();
        self.with_phase_profile(&added)
    }

    /// Two passes through a thin lens of focal length `f`, each imprinting
    /// `-k x² / (2f)`. Equivalent to a quadratic phase with `R = -f/2`.
    pub fn with_lens_double_pass(&self, k: f64, focal_length: f64) -> Result<Self> {
        if !focal_length.is_finite() || focal_length == 0.0 {
            return Err(HspError::invalid(
                "focal_length",
                format!("must be finite and nonzero, got {focal_length}"),
            ));
        }
        self.with_quadratic_phase(&QuadraticPhase::new(k, -focal_length / 2.0)?)
    }

    /// `Σ conj(ψ_self) ψ_other dx`
    pub fn overlap(&self, other: &Wavefunction) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let sum: Complex64 = (0..self.grid.n_bins())
            .map(|i| self.value(i).conj() * other.value(i))
            .sum();
        Ok(sum * self.grid.dx())
    }
}

pub(crate) fn support_mask(amplitude: &[f64], threshold: f64) -> Vec<bool> {
    let peak = amplitude.iter().cloned().fold(0.0, f64::max);
    amplitude
        .iter()
        .map(|&a| peak > 0.0 && a >= threshold * peak)
        .collect()
}

/// Probability mass of the continuous Gaussian mode lying outside the grid.
fn gaussian_clipped_mass(grid: &Grid, waist: f64, center: f64) -> f64 {
    // |ψ|² is a normal density with standard deviation waist/2.
    let scale = std::f64::consts::SQRT_2 / waist;
    let below = 0.5 * erfc((center - grid.x_min()) * scale);
    let above = 0.5 * erfc((grid.x_max() - center) * scale);
    below + above
}

pub fn gaussian_mode(grid: Grid, waist: f64, center: f64) -> Result<Wavefunction> {
    Wavefunction::gaussian(grid, waist, center)
}

pub fn apply_quadratic_phase(wf: &Wavefunction, params: &QuadraticPhase) -> Result<Wavefunction> {
    wf.with_quadratic_phase(params)
}

pub fn apply_lens_double_pass(
    wf: &Wavefunction,
    k: f64,
    focal_length: f64,
) -> Result<Wavefunction> {
    wf.with_lens_double_pass(k, focal_length)
}

pub fn apply_phase_profile(wf: &Wavefunction, phase_values: &[f64]) -> Result<Wavefunction> {
    wf.with_phase_profile(phase_values)
}

pub fn overlap(a: &Wavefunction, b: &Wavefunction) -> Result<Complex64> {
    a.overlap(b)
}

/// Evaluates `Σ_d coeffs[d-1] x^d` (no constant term) on every bin center.
pub fn polynomial_profile(grid: &Grid, coeffs: &[f64]) -> Vec<f64> {
    grid.centers()
        .into_iter()
        .map(|x| eval_poly_no_const(coeffs, x))
        .collect()
}

pub(crate) fn eval_poly_no_const(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| (acc + c) * x)
}
