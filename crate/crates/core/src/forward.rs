//! Two-photon amplitude and the joint coincidence distribution (the hologram).
//!
//! For an unknown photon `ψ_u = |ψ_u| e^{iφ}` and a flat-phase reference `ψ_r`
//! meeting on a 50/50 beam splitter, a coincidence at `(x, x')` has amplitude
//!
//! ```text
//! Ψ(x, x') = ½ (ψ_u(x) ψ_r(x') − ψ_r(x) ψ_u(x'))
//! ```
//!
//! and, allowing for imperfect spectral overlap `V`, probability density
//!
//! ```text
//! |Ψ|² = ¼ (|ψ_u(x)|²|ψ_r(x')|² + |ψ_r(x)|²|ψ_u(x')|²)
//!        − (V/2) |ψ_u(x)||ψ_u(x')||ψ_r(x)||ψ_r(x')| cos(φ(x) − φ(x')).
//! ```
//!
//! The distribution is built from the second form so that `V < 1` is supported; the
//! first form is kept as an independent cross-check at `V = 1`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HspError, Result};
use crate::wavefunction::{support_mask, Grid, Wavefunction, SUPPORT_THRESHOLD};

/// Reference phase spread tolerated on supported bins.
pub const FLAT_PHASE_TOL: f64 = 1e-9;

/// Negative densities above this value are rounding noise and get clamped to zero.
pub const NEGATIVE_CLAMP: f64 = -1e-14;

/// `Ψ(x_i, x'_j)` in mm⁻¹, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix {
    grid: Grid,
    values: Vec<Complex64>,
}

impl AmplitudeMatrix {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n_bins()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n() + j]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Joint coincidence probability density `p[i][j]` in mm⁻², row-major.
///
/// `visibility` is `None` for empirical distributions whose visibility is not known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    grid: Grid,
    p: Vec<f64>,
    visibility: Option<f64>,
}

impl JointDistribution {
    pub fn new(grid: Grid, p: Vec<f64>, visibility: Option<f64>) -> Result<Self> {
        let n = grid.n_bins();
        if p.len() != n * n {
            return Err(HspError::LengthMismatch {
                name: "p",
                expected: n * n,
                actual: p.len(),
            });
        }
        if let Some(v) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(HspError::invalid(
                "p",
                format!("densities must be finite and nonnegative, found {v}"),
            ));
        }
        if let Some(v) = visibility {
            check_visibility(v)?;
        }
        Ok(Self {
            grid,
            p,
            visibility,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n_bins()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn visibility(&self) -> Option<f64> {
        self.visibility
    }

    pub fn max(&self) -> f64 {
        self.p.iter().cloned().fold(0.0, f64::max)
    }

    /// `Σ p dx²`, the total coincidence probability.
    pub fn total(&self) -> f64 {
        let dx = self.grid.dx();
        self.p.iter().sum::<f64>() * dx * dx
    }

    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let dx = self.grid.dx();
        let rows = (0..n)
            .map(|i| self.p[i * n..(i + 1) * n].iter().sum::<f64>() * dx)
            .collect();
        let cols = (0..n)
            .map(|j| (0..n).map(|i| self.p[i * n + j]).sum::<f64>() * dx)
            .collect();
        (rows, cols)
    }
}

pub(crate) fn check_visibility(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(HspError::invalid(
            "visibility",
            format!("must lie in [0, 1], got {v}"),
        ))
    }
}

fn check_flat_reference(psi_r: &Wavefunction) -> Result<()> {
    let mask = psi_r.support_mask(SUPPORT_THRESHOLD);
    let (lo, hi) = psi_r
        .phase()
        .iter()
        .zip(&mask)
        .filter(|(_, &s)| s)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&p, _)| {
            (lo.min(p), hi.max(p))
        });
    let spread = if lo.is_finite() { hi - lo } else { 0.0 };
    if spread > FLAT_PHASE_TOL {
        Err(HspError::NonFlatReference { spread })
    } else {
        Ok(())
    }
}

pub fn two_photon_amplitude(psi_u: &Wavefunction, psi_r: &Wavefunction) -> Result<AmplitudeMatrix> {
    psi_u.grid().ensure_same(psi_r.grid())?;
    let n = psi_u.grid().n_bins();
    let u: Vec<Complex64> = (0..n).map(|i| psi_u.value(i)).collect();
    let r: Vec<Complex64> = (0..n).map(|i| psi_r.value(i)).collect();
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let a = 0.5 * (u[i] * r[j] - r[i] * u[j]);
            values[i * n + j] = a;
            values[j * n + i] = -a;
        }
    }
    Ok(AmplitudeMatrix {
        grid: *psi_u.grid(),
        values,
    })
}

const CANCELLATION_REL: f64 = 1e-13;

/// Row-major `n × n` hologram density from amplitudes and the unknown photon's phase.
pub(crate) fn hsp_density(
    amp_u: &[f64],
    amp_r: &[f64],
    phase: &[f64],
    visibility: f64,
) -> Result<Vec<f64>> {
    let n = amp_u.len();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            for (j, cell) in row.iter_mut().enumerate() {
                let direct = 0.25
                    * (amp_u[i] * amp_u[i] * amp_r[j] * amp_r[j]
                        + amp_r[i] * amp_r[i] * amp_u[j] * amp_u[j]);
                let cross = 0.5
                    * visibility
                    * amp_u[i]
                    * amp_u[j]
                    * amp_r[i]
                    * amp_r[j]
                    * (phase[i] - phase[j]).cos();
                let p = direct - cross;
                // Full destructive interference leaves rounding residue of either sign.
                *cell = if p.abs() <= CANCELLATION_REL * direct {
                    0.0
                } else if p >= 0.0 {
                    p
                } else if p > NEGATIVE_CLAMP {
                    0.0
                } else {
                    return Err(HspError::NegativeProbability { i, j, value: p });
                };
            }
            Ok(())
        })?;
    Ok(out)
}

pub fn hsp_distribution(
    psi_u: &Wavefunction,
    psi_r: &Wavefunction,
    visibility: f64,
) -> Result<JointDistribution> {
    psi_u.grid().ensure_same(psi_r.grid())?;
    check_visibility(visibility)?;
    check_flat_reference(psi_r)?;
    let p = hsp_density(
        psi_u.amplitude(),
        psi_r.amplitude(),
        psi_u.phase(),
        visibility,
    )?;
    Ok(JointDistribution {
        grid: *psi_u.grid(),
        p,
        visibility: Some(visibility),
    })
}

/// Row and column marginals, each `Σ p dx` along the other axis.
pub fn marginals(jd: &JointDistribution) -> (Vec<f64>, Vec<f64>) {
    jd.marginals()
}

/// `½ − (V/2) |⟨ψ_r|ψ_u⟩|²`
pub fn coincidence_probability(
    psi_u: &Wavefunction,
    psi_r: &Wavefunction,
    visibility: f64,
) -> Result<f64> {
    check_visibility(visibility)?;
    check_flat_reference(psi_r)?;
    let o = psi_r.overlap(psi_u)?;
    Ok(0.5 - 0.5 * visibility * o.norm_sqr())
}

/// Depth of the Hong–Ou–Mandel dip, `V |⟨ψ_r|ψ_u⟩|²`.
pub fn hom_dip_visibility(
    psi_u: &Wavefunction,
    psi_r: &Wavefunction,
    visibility: f64,
) -> Result<f64> {
    Ok(1.0 - coincidence_probability(psi_u, psi_r, visibility)? / 0.5)
}

/// Support shared by both photons, where the unknown phase enters the hologram.
pub(crate) fn joint_support(amp_u: &[f64], amp_r: &[f64], threshold: f64) -> Vec<bool> {
    support_mask(amp_u, threshold)
        .into_iter()
        .zip(support_mask(amp_r, threshold))
        .map(|(a, b)| a && b)
        .collect()
}
