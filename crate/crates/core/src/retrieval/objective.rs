//! Hologram misfit restricted to the supported bins.
//!
//! Measured and modeled holograms are both rescaled to unit total `Σ p dx² = 1`
//! before comparison, since the empirical distribution carries no absolute rate.
//! With `w_i = |ψ_u(x_i)||ψ_r(x_i)|`, `g_i = w_i cos φ_i` and `h_i = w_i sin φ_i`
//! the model is
//!
//! ```text
//! M_ij = ¼ (u_i² r_j² + r_i² u_j²) − (V/2) (g_i g_j + h_i h_j)
//! ```
//!
//! which makes both the misfit and its gradient `O(n²)` with one `sin`/`cos` per bin.

use crate::error::{HspError, Result};
use crate::forward::JointDistribution;

#[derive(Debug, Clone)]
pub(crate) struct FitProblem {
    /// Grid indices of the supported bins.
    pub idx: Vec<usize>,
    data: Vec<f64>,
    weight: Vec<f64>,
    base: Vec<f64>,
    base_sum: f64,
    dx2: f64,
}

pub(crate) struct Evaluation {
    pub sq_norm: f64,
    #[allow(dead_code)]
    pub d_visibility: f64,
}

impl FitProblem {
    pub fn new(
        p_meas: &JointDistribution,
        amp_u: &[f64],
        amp_r: &[f64],
        support: &[bool],
    ) -> Result<Self> {
        let n = p_meas.n();
        for (name, len) in [
            ("amp_u", amp_u.len()),
            ("amp_r", amp_r.len()),
            ("support", support.len()),
        ] {
            if len != n {
                return Err(HspError::LengthMismatch {
                    name,
                    expected: n,
                    actual: len,
                });
            }
        }
        let idx: Vec<usize> = (0..n).filter(|&i| support[i]).collect();
        let m = idx.len();
        if m < 2 {
            return Err(HspError::EmptyData(format!(
                "need at least two supported bins, got {m}"
            )));
        }
        let dx = p_meas.grid().dx();
        let dx2 = dx * dx;
        let mut data: Vec<f64> = Vec::with_capacity(m * m);
        for &i in &idx {
            for &j in &idx {
                data.push(p_meas.get(i, j));
            }
        }
        let total = data.iter().sum::<f64>() * dx2;
        if !(total > 0.0) {
            return Err(HspError::EmptyData(
                "measured hologram is empty on the supported bins".into(),
            ));
        }
        data.iter_mut().for_each(|v| *v /= total);

        let u: Vec<f64> = idx.iter().map(|&i| amp_u[i]).collect();
        let r: Vec<f64> = idx.iter().map(|&i| amp_r[i]).collect();
        let weight = u.iter().zip(&r).map(|(a, b)| a * b).collect();
        let mut base = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                base.push(0.25 * (u[a] * u[a] * r[b] * r[b] + r[a] * r[a] * u[b] * u[b]));
            }
        }
        let base_sum = base.iter().sum();
        Ok(Self {
            idx,
            data,
            weight,
            base,
            base_sum,
            dx2,
        })
    }

    /// `|ψ_u||ψ_r|` per supported bin.
    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.idx.len()
    }

    fn trig(&self, phase: &[f64]) -> (Vec<f64>, Vec<f64>) {
        phase
            .iter()
            .zip(&self.weight)
            .map(|(p, w)| {
                let (s, c) = p.sin_cos();
                (w * c, w * s)
            })
            .unzip()
    }

    /// Model normalization `Σ M dx²`, guarded away from zero.
    fn scale(&self, g: &[f64], h: &[f64], visibility: f64) -> f64 {
        let gs: f64 = g.iter().sum();
        let hs: f64 = h.iter().sum();
        ((self.base_sum - 0.5 * visibility * (gs * gs + hs * hs)) * self.dx2).max(f64::MIN_POSITIVE)
    }

    /// Unit-total model on the supported block, row-major.
    pub fn normalized_model(&self, phase: &[f64], visibility: f64) -> Vec<f64> {
        let m = self.dim();
        let (g, h) = self.trig(phase);
        let s = self.scale(&g, &h, visibility);
        let mut out = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                let v = self.base[a * m + b] - 0.5 * visibility * (g[a] * g[b] + h[a] * h[b]);
                out.push(v / s);
            }
        }
        out
    }

    /// Squared Frobenius misfit.
    pub fn sq_norm(&self, phase: &[f64], visibility: f64) -> f64 {
        self.normalized_model(phase, visibility)
            .iter()
            .zip(&self.data)
            .map(|(m, d)| (m - d) * (m - d))
            .sum()
    }

    /// Squared misfit, its phase gradient (written to `grad`) and its visibility derivative.
    pub fn sq_norm_grad(&self, phase: &[f64], visibility: f64, grad: &mut [f64]) -> Evaluation {
        let m = self.dim();
        let (g, h) = self.trig(phase);
        let s = self.scale(&g, &h, visibility);
        let gs: f64 = g.iter().sum();
        let hs: f64 = h.iter().sum();

        let mut sq_norm = 0.0;
        let mut e_dot_model = 0.0;
        let mut e_dot_interference = 0.0;
        // (E + Eᵀ) g and (E + Eᵀ) h
        let mut eg = vec![0.0; m];
        let mut eh = vec![0.0; m];
        for a in 0..m {
            for b in 0..m {
                let interference = g[a] * g[b] + h[a] * h[b];
                let model = (self.base[a * m + b] - 0.5 * visibility * interference) / s;
                let e = model - self.data[a * m + b];
                sq_norm += e * e;
                e_dot_model += e * model;
                e_dot_interference += e * interference;
                eg[a] += e * g[b];
                eh[a] += e * h[b];
                eg[b] += e * g[a];
                eh[b] += e * h[a];
            }
        }
        for k in 0..m {
            let d_model = -0.5 * visibility * (g[k] * eh[k] - h[k] * eg[k]);
            let d_scale = -visibility * self.dx2 * (g[k] * hs - h[k] * gs);
            grad[k] = 2.0 / s * (d_model - e_dot_model * d_scale);
        }
        let d_scale_v = -0.5 * self.dx2 * (gs * gs + hs * hs);
        let d_visibility = 2.0 / s * (-0.5 * e_dot_interference - e_dot_model * d_scale_v);
        Evaluation {
            sq_norm,
            d_visibility,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::hsp_distribution;
    use crate::wavefunction::{gaussian_mode, polynomial_profile, Grid};

    fn problem() -> (FitProblem, Vec<f64>) {
        let g = Grid::new(-1.0, 1.0, 24).unwrap();
        let r = gaussian_mode(g, 0.3, 0.0).unwrap();
        let u = gaussian_mode(g, 0.32, 0.05)
            .unwrap()
            .with_phase_profile(&polynomial_profile(&g, &[0.7, 30.0, -2.0, 1.0]))
            .unwrap();
        let jd = hsp_distribution(&u, &r, 0.85).unwrap();
        let support = vec![true; 24];
        let fp = FitProblem::new(&jd, u.amplitude(), r.amplitude(), &support).unwrap();
        let start: Vec<f64> = u
            .phase()
            .iter()
            .enumerate()
            .map(|(i, p)| p + 0.3 * (i as f64).sin())
            .collect();
        (fp, start)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (fp, phase) = problem();
        let v = 0.8;
        let mut grad = vec![0.0; fp.dim()];
        let ev = fp.sq_norm_grad(&phase, v, &mut grad);
        assert!((ev.sq_norm - fp.sq_norm(&phase, v)).abs() < 1e-12 * ev.sq_norm.max(1.0));
        let h = 1e-6;
        for k in 0..fp.dim() {
            let mut p = phase.clone();
            p[k] += h;
            let fp_ = fp.sq_norm(&p, v);
            p[k] -= 2.0 * h;
            let fm = fp.sq_norm(&p, v);
            let fd = (fp_ - fm) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() < 1e-6 * (1.0 + fd.abs()),
                "bin {k}: {fd} vs {}",
                grad[k]
            );
        }
        let fd_v = (fp.sq_norm(&phase, v + h) - fp.sq_norm(&phase, v - h)) / (2.0 * h);
        assert!((fd_v - ev.d_visibility).abs() < 1e-6 * (1.0 + fd_v.abs()));
    }

    #[test]
    fn truth_has_zero_misfit() {
        let g = Grid::new(-1.0, 1.0, 24).unwrap();
        let r = gaussian_mode(g, 0.3, 0.0).unwrap();
        let u = r
            .with_phase_profile(&polynomial_profile(&g, &[0.0, 40.0]))
            .unwrap();
        let jd = hsp_distribution(&u, &r, 0.91).unwrap();
        let fp = FitProblem::new(&jd, u.amplitude(), r.amplitude(), &[true; 24]).unwrap();
        assert!(fp.sq_norm(u.phase(), 0.91) < 1e-24);
    }
}
