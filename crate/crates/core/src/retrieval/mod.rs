//! Phase retrieval from hologram and amplitude counts.
//!
//! The unknown photon's phase is found by minimizing the Frobenius misfit between the
//! measured hologram and the model built from the measured amplitudes. The search runs
//! in two stages:
//!
//! 1. a multi-start bounded Nelder–Mead over the coefficients of a polynomial phase
//!    (no constant term) together with the visibility, and
//! 2. an L-BFGS refinement of the free per-bin phase vector, started from the
//!    stage-1 polynomial, accepting only steps that lower the misfit.
//!
//! The hologram cannot distinguish `φ` from `−φ + c`. [`gauge_fix`] picks the
//! representative with zero weighted mean and positive weighted curvature.

mod objective;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HspError, Result};
use crate::forward::{check_visibility, hsp_density, joint_support, JointDistribution};
use crate::optim::{lbfgs, nelder_mead_bounded, LbfgsOptions, NelderMeadOptions};
use crate::polyfit::weighted_polyfit;
use crate::rng::rng_from_seed;
use crate::sampler::{CoincidenceCounts, MarginalCounts};
use crate::wavefunction::{eval_poly_no_const, Grid, SUPPORT_THRESHOLD};

use objective::FitProblem;

/// Curvature below which a phase is treated as flat when fitting a radius, rad/mm².
pub const CURVATURE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    pub poly_degree: usize,
    pub n_global_starts: usize,
    /// Random points scored before the best `n_global_starts` are refined.
    pub n_screen: usize,
    /// Symmetric bound `|a_d| ≤ coeff_bounds[d-1]` for degrees `1..=poly_degree`, rad/mmᵈ.
    pub coeff_bounds: Vec<f64>,
    pub visibility_bounds: [f64; 2],
    /// Stage 2 stops once the misfit falls by less than this between iterations.
    pub local_tol: f64,
    pub max_iters: usize,
    /// Stage-1 evaluation budget per start.
    pub max_evals: usize,
    pub support_threshold: f64,
    /// Refit the visibility together with the phase in stage 2.
    pub co_optimize_visibility: bool,
    /// Wave number used to convert curvature to a radius, rad/mm.
    pub wavenumber: f64,
}

impl RetrievalConfig {
    /// Defaults for a grid: the quadratic bound is ten times the curvature a double
    /// pass through a lens of `focal_length` would imprint, every other degree `d` is
    /// bounded by `2π / extentᵈ`.
    pub fn for_grid(grid: &Grid, wavenumber: f64, focal_length: f64) -> Self {
        let poly_degree = 4;
        Self {
            poly_degree,
            n_global_starts: 32,
            n_screen: 4096,
            coeff_bounds: default_bounds(grid, poly_degree, wavenumber, focal_length),
            visibility_bounds: [0.0, 1.0],
            local_tol: 1e-10,
            max_iters: 1000,
            max_evals: 6000,
            support_threshold: SUPPORT_THRESHOLD,
            co_optimize_visibility: false,
            wavenumber,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.poly_degree < 2 {
            return Err(HspError::invalid("poly_degree", "must be at least 2"));
        }
        if self.coeff_bounds.len() != self.poly_degree {
            return Err(HspError::invalid(
                "coeff_bounds",
                format!(
                    "needs one bound per degree 1..={}, got {}",
                    self.poly_degree,
                    self.coeff_bounds.len()
                ),
            ));
        }
        if let Some(b) = self
            .coeff_bounds
            .iter()
            .find(|b| !(b.is_finite() && **b > 0.0))
        {
            return Err(HspError::invalid(
                "coeff_bounds",
                format!("bounds must be positive, got {b}"),
            ));
        }
        let [lo, hi] = self.visibility_bounds;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(HspError::invalid(
                "visibility_bounds",
                format!("need 0 ≤ lo < hi ≤ 1, got [{lo}, {hi}]"),
            ));
        }
        if self.n_global_starts == 0 {
            return Err(HspError::invalid("n_global_starts", "must be positive"));
        }
        if !(self.local_tol >= 0.0) {
            return Err(HspError::invalid("local_tol", "must be nonnegative"));
        }
        if !(self.support_threshold > 0.0 && self.support_threshold < 1.0) {
            return Err(HspError::invalid("support_threshold", "must lie in (0, 1)"));
        }
        if !(self.wavenumber.is_finite() && self.wavenumber > 0.0) {
            return Err(HspError::invalid("wavenumber", "must be positive"));
        }
        Ok(())
    }
}

pub fn default_bounds(grid: &Grid, degree: usize, wavenumber: f64, focal_length: f64) -> Vec<f64> {
    let extent = grid.extent();
    (1..=degree)
        .map(|d| {
            if d == 2 {
                10.0 * wavenumber / focal_length.abs()
            } else {
                2.0 * std::f64::consts::PI / extent.powi(d as i32)
            }
        })
        .collect()
}

/// Offset and sign applied by [`gauge_fix`]: `fixed = sign · (phase − offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeRecord {
    pub offset: f64,
    pub sign_flipped: bool,
    /// The curvature fit was impossible, so only the offset was removed.
    pub degenerate: bool,
}

impl Default for GaugeRecord {
    fn default() -> Self {
        Self {
            offset: 0.0,
            sign_flipped: false,
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusFit {
    /// Signed radius `k / (2a)`, mm.
    pub radius: f64,
    pub stderr: f64,
    /// Quadratic coefficient of the fit, rad/mm².
    pub curvature: f64,
}

/// Stage-1 optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyStage {
    /// `a_1..a_deg`, rad/mmᵈ, sign chosen so the weighted curvature is positive.
    pub coeffs: Vec<f64>,
    pub visibility: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub grid: Grid,
    /// Per-bin phase, `None` outside the support.
    pub phase: Vec<Option<f64>>,
    pub support_mask: Vec<bool>,
    pub visibility_est: f64,
    pub objective: f64,
    pub stage1_objective: f64,
    pub poly_coeffs_stage1: Vec<f64>,
    pub gauge: GaugeRecord,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub amplitude_u: Vec<f64>,
    pub amplitude_r: Vec<f64>,
    pub radius: Option<RadiusFit>,
}

impl RetrievalResult {
    /// Phase with zeros outside the support.
    pub fn phase_or_zero(&self) -> Vec<f64> {
        self.phase.iter().map(|p| p.unwrap_or(0.0)).collect()
    }

    /// Model hologram for the retrieved phase over the whole grid, rescaled to unit total.
    pub fn reconstructed_hsp(&self) -> Result<JointDistribution> {
        let p = hsp_density(
            &self.amplitude_u,
            &self.amplitude_r,
            &self.phase_or_zero(),
            self.visibility_est,
        )?;
        let dx = self.grid.dx();
        let total = p.iter().sum::<f64>() * dx * dx;
        let p = if total > 0.0 {
            p.into_iter().map(|v| v / total).collect()
        } else {
            p
        };
        JointDistribution::new(self.grid, p, Some(self.visibility_est))
    }
}

/// Counts rescaled to a density with `Σ p dx² = 1`.
pub fn empirical_distribution(counts: &CoincidenceCounts) -> Result<JointDistribution> {
    let total: u64 = counts.counts.iter().sum();
    if total == 0 {
        return Err(HspError::EmptyData(
            "coincidence counts are all zero".into(),
        ));
    }
    let dx = counts.grid.dx();
    let scale = 1.0 / (total as f64 * dx * dx);
    let p = counts.counts.iter().map(|&c| c as f64 * scale).collect();
    JointDistribution::new(counts.grid, p, None)
}

/// `|ψ(x_i)| = sqrt(counts_i / (N dx))`.
pub fn amplitude_estimate(m: &MarginalCounts) -> Result<Vec<f64>> {
    let total: u64 = m.counts.iter().sum();
    if total == 0 {
        return Err(HspError::EmptyData("marginal counts are all zero".into()));
    }
    let denom = total as f64 * m.grid.dx();
    Ok(m.counts
        .iter()
        .map(|&c| (c as f64 / denom).sqrt())
        .collect())
}

fn check_lengths(
    p_meas: &JointDistribution,
    amp_u: &[f64],
    amp_r: &[f64],
    phase: Option<&[f64]>,
) -> Result<()> {
    let n = p_meas.n();
    let mut all = vec![("amp_u", amp_u.len()), ("amp_r", amp_r.len())];
    if let Some(p) = phase {
        all.push(("phase", p.len()));
    }
    for (name, len) in all {
        if len != n {
            return Err(HspError::LengthMismatch {
                name,
                expected: n,
                actual: len,
            });
        }
    }
    Ok(())
}

/// Frobenius misfit on the bins supported by both amplitudes at the default threshold.
pub fn objective(
    p_meas: &JointDistribution,
    amp_u: &[f64],
    amp_r: &[f64],
    phase: &[f64],
    visibility: f64,
) -> Result<f64> {
    objective_with_threshold(p_meas, amp_u, amp_r, phase, visibility, SUPPORT_THRESHOLD)
}

pub fn objective_with_threshold(
    p_meas: &JointDistribution,
    amp_u: &[f64],
    amp_r: &[f64],
    phase: &[f64],
    visibility: f64,
    threshold: f64,
) -> Result<f64> {
    check_lengths(p_meas, amp_u, amp_r, Some(phase))?;
    check_visibility(visibility)?;
    let support = joint_support(amp_u, amp_r, threshold);
    let fp = FitProblem::new(p_meas, amp_u, amp_r, &support)?;
    let phase_s: Vec<f64> = fp.idx.iter().map(|&i| phase[i]).collect();
    Ok(fp.sq_norm(&phase_s, visibility).sqrt())
}

struct PolyParam<'a> {
    xs: Vec<f64>,
    bounds: &'a [f64],
    vis: [f64; 2],
}

impl PolyParam<'_> {
    fn new<'a>(grid: &Grid, idx: &[usize], cfg: &'a RetrievalConfig) -> PolyParam<'a> {
        PolyParam {
            xs: idx.iter().map(|&i| grid.center(i)).collect(),
            bounds: &cfg.coeff_bounds,
            vis: cfg.visibility_bounds,
        }
    }

    /// Unit-box point to (coefficients, visibility).
    fn decode(&self, t: &[f64]) -> (Vec<f64>, f64) {
        let coeffs = self
            .bounds
            .iter()
            .zip(t)
            .map(|(b, ti)| b * (2.0 * ti - 1.0))
            .collect();
        let v = self.vis[0] + (self.vis[1] - self.vis[0]) * t[self.bounds.len()];
        (coeffs, v)
    }

    fn encode(&self, coeffs: &[f64], v: f64) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .bounds
            .iter()
            .zip(coeffs)
            .map(|(b, c)| ((c / b + 1.0) / 2.0).clamp(0.0, 1.0))
            .collect();
        t.push(((v - self.vis[0]) / (self.vis[1] - self.vis[0])).clamp(0.0, 1.0));
        t
    }

    fn phase(&self, coeffs: &[f64]) -> Vec<f64> {
        self.xs
            .iter()
            .map(|&x| eval_poly_no_const(coeffs, x))
            .collect()
    }
}

fn stage1_options(cfg: &RetrievalConfig) -> NelderMeadOptions {
    NelderMeadOptions {
        initial_step: 0.01,
        max_evals: cfg.max_evals,
        xtol: 1e-11,
        ftol: 1e-13,
        restarts: 3,
    }
}

fn canonical_sign(coeffs: &mut [f64], xs: &[f64], weights: &[f64]) {
    let phase: Vec<f64> = xs.iter().map(|&x| eval_poly_no_const(coeffs, x)).collect();
    if let Ok(fit) = weighted_polyfit(xs, &phase, weights, 2) {
        if fit.coeffs[2] < 0.0 {
            coeffs.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// Multi-start search over polynomial coefficients and visibility.
///
/// `n_screen` uniform points in the bound box are scored and the best
/// `n_global_starts` seed independent Nelder–Mead runs. The lowest misfit wins,
/// ties going to the lower start index.
pub fn global_poly_search(
    p_meas: &JointDistribution,
    amp_u: &[f64],
    amp_r: &[f64],
    cfg: &RetrievalConfig,
    seed: u64,
) -> Result<PolyStage> {
    cfg.validate()?;
    check_lengths(p_meas, amp_u, amp_r, None)?;
    let support = joint_support(amp_u, amp_r, cfg.support_threshold);
    let fp = FitProblem::new(p_meas, amp_u, amp_r, &support)?;
    let param = PolyParam::new(p_meas.grid(), &fp.idx, cfg);
    let dim = cfg.poly_degree + 1;
    let score = |t: &[f64]| {
        let (coeffs, v) = param.decode(t);
        fp.sq_norm(&param.phase(&coeffs), v)
    };

    let mut rng = rng_from_seed(seed);
    let candidates: Vec<Vec<f64>> = (0..cfg.n_screen.max(cfg.n_global_starts))
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let scores: Vec<f64> = candidates.par_iter().map(|t| score(t)).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

    let lower = vec![0.0; dim];
    let upper = vec![1.0; dim];
    let opts = stage1_options(cfg);
    let runs: Vec<(f64, Vec<f64>)> = order[..cfg.n_global_starts]
        .par_iter()
        .map(|&c| {
            let m = nelder_mead_bounded(score, &candidates[c], &lower, &upper, &opts);
            (m.f, m.x)
        })
        .collect();
    let (best_f, best_t) = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.0.total_cmp(&b.0).then(ia.cmp(ib)))
        .map(|(_, r)| r)
        .expect("at least one start");
    if !best_f.is_finite() {
        return Err(HspError::Numerical(
            "global search produced a non-finite misfit".into(),
        ));
    }
    finish_stage1(&fp, &param, amp_u, &best_t, best_f)
}

fn finish_stage1(
    fp: &FitProblem,
    param: &PolyParam,
    amp_u: &[f64],
    t: &[f64],
    f: f64,
) -> Result<PolyStage> {
    let (mut coeffs, visibility) = param.decode(t);
    let weights: Vec<f64> = fp.idx.iter().map(|&i| amp_u[i] * amp_u[i]).collect();
    canonical_sign(&mut coeffs, &param.xs, &weights);
    Ok(PolyStage {
        coeffs,
        visibility,
        objective: f.sqrt(),
    })
}

/// Single Nelder–Mead run of the stage-1 problem from a known starting point.
pub fn local_poly_search(
    p_meas: &JointDistribution,
    amp_u: &[f64],
    amp_r: &[f64],
    cfg: &RetrievalConfig,
    start: &PolyStage,
) -> Result<PolyStage> {
    cfg.validate()?;
    check_lengths(p_meas, amp_u, amp_r, None)?;
    let support = joint_support(amp_u, amp_r, cfg.support_threshold);
    let fp = FitProblem::new(p_meas, amp_u, amp_r, &support)?;
    let param = PolyParam::new(p_meas.grid(), &fp.idx, cfg);
    let dim = cfg.poly_degree + 1;
    let score = |t: &[f64]| {
        let (coeffs, v) = param.decode(t);
        fp.sq_norm(&param.phase(&coeffs), v)
    };
    let t0 = param.encode(&start.coeffs, start.visibility);
    let m = nelder_mead_bounded(
        score,
        &t0,
        &vec![0.0; dim],
        &vec![1.0; dim],
        &stage1_options(cfg),
    );
    if !m.f.is_finite() {
        return Err(HspError::Numerical(
            "local polynomial search produced a non-finite misfit".into(),
        ));
    }
    finish_stage1(&fp, &param, amp_u, &m.x, m.f)
}

/// Per-bin refinement of the phase on the supported bins.
///
/// The visibility is held at `visibility` unless `cfg.co_optimize_visibility` is
/// set, in which case phase refinement alternates with a golden-section search of
/// the visibility inside `cfg.visibility_bounds`. The returned gauge is the identity.
pub fn local_refine(
    p_meas: &JointDistribution,
    amp_u: &[f64],
    amp_r: &[f64],
    phase_init: &[f64],
    visibility: f64,
    cfg: &RetrievalConfig,
) -> Result<RetrievalResult> {
    cfg.validate()?;
    check_lengths(p_meas, amp_u, amp_r, Some(phase_init))?;
    check_visibility(visibility)?;
    let support = joint_support(amp_u, amp_r, cfg.support_threshold);
    let fp = FitProblem::new(p_meas, amp_u, amp_r, &support)?;
    let mut phase_s: Vec<f64> = fp.idx.iter().map(|&i| phase_init[i]).collect();
    if phase_s.iter().any(|p| !p.is_finite()) {
        return Err(HspError::invalid(
            "phase_init",
            "must be finite on supported bins",
        ));
    }
    let mut v = visibility;
    let start = fp.sq_norm(&phase_s, v).sqrt();
    if !start.is_finite() {
        return Err(HspError::Numerical(format!(
            "non-finite misfit {start} at the starting phase"
        )));
    }

    let opts = LbfgsOptions {
        max_iters: cfg.max_iters,
        ..Default::default()
    };
    let tol = cfg.local_tol;
    let small = |prev: f64, new: f64| prev.sqrt() - new.sqrt() < tol;
    let mut trace = vec![start];
    let mut iterations = 0;
    let rounds = if cfg.co_optimize_visibility { 6 } else { 1 };
    // Curvature along φ_k scales like w_k², which spans many decades between the
    // center and the edge of the support. Work in θ_k = s_k φ_k instead.
    let w_max = fp.weights().iter().cloned().fold(0.0, f64::max);
    let scale: Vec<f64> = fp.weights().iter().map(|w| w / w_max).collect();
    let mut phase_buf = vec![0.0; fp.dim()];
    for _ in 0..rounds {
        let theta0: Vec<f64> = phase_s.iter().zip(&scale).map(|(p, s)| p * s).collect();
        let run = lbfgs(
            |theta, g| {
                for ((p, t), s) in phase_buf.iter_mut().zip(theta).zip(&scale) {
                    *p = t / s;
                }
                let f = fp.sq_norm_grad(&phase_buf, v, g).sq_norm;
                g.iter_mut().zip(&scale).for_each(|(gi, s)| *gi /= s);
                f
            },
            &theta0,
            &opts,
            small,
        )?;
        iterations += run.iters;
        trace.extend(run.trace[1..].iter().map(|f| f.sqrt()));
        phase_s = run.x.iter().zip(&scale).map(|(t, s)| t / s).collect();
        if !cfg.co_optimize_visibility {
            break;
        }
        let before = fp.sq_norm(&phase_s, v);
        let [lo, hi] = cfg.visibility_bounds;
        let (v_new, f_new) = golden_section(|vv| fp.sq_norm(&phase_s, vv), lo, hi, 1e-10);
        if f_new < before {
            v = v_new;
            trace.push(f_new.sqrt());
        }
        if before.sqrt() - f_new.sqrt() < tol {
            break;
        }
    }
    // Each bin only matters mod 2π; keep the branch closest to where it started.
    let tau = 2.0 * std::f64::consts::PI;
    for (p, &i) in phase_s.iter_mut().zip(&fp.idx) {
        *p -= tau * ((*p - phase_init[i]) / tau).round();
    }
    let objective = fp.sq_norm(&phase_s, v).sqrt();
    if !objective.is_finite() {
        return Err(HspError::Numerical(
            "refinement produced a non-finite misfit".into(),
        ));
    }

    let n = p_meas.n();
    let mut phase = vec![None; n];
    for (&i, &p) in fp.idx.iter().zip(&phase_s) {
        phase[i] = Some(p);
    }
    Ok(RetrievalResult {
        grid: *p_meas.grid(),
        phase,
        support_mask: support,
        visibility_est: v,
        objective,
        stage1_objective: start,
        poly_coeffs_stage1: Vec::new(),
        gauge: GaugeRecord::default(),
        objective_trace: trace,
        iterations,
        amplitude_u: amp_u.to_vec(),
        amplitude_r: amp_r.to_vec(),
        radius: None,
    })
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Removes the weighted mean phase, then flips the sign if the weighted quadratic
/// fit curves downward. Weights are `amp_u²` on bins with a phase.
pub fn gauge_fix(phase: &[Option<f64>], amp_u: &[f64]) -> Result<(Vec<Option<f64>>, GaugeRecord)> {
    if phase.len() != amp_u.len() {
        return Err(HspError::LengthMismatch {
            name: "amp_u",
            expected: phase.len(),
            actual: amp_u.len(),
        });
    }
    let weights: Vec<f64> = phase
        .iter()
        .zip(amp_u)
        .map(|(p, a)| if p.is_some() { a * a } else { 0.0 })
        .collect();
    let w_sum: f64 = weights.iter().sum();
    if !(w_sum > 0.0) {
        return Err(HspError::EmptyData(
            "no weighted bins to fix the gauge".into(),
        ));
    }
    let offset = phase
        .iter()
        .zip(&weights)
        .map(|(p, w)| p.unwrap_or(0.0) * w)
        .sum::<f64>()
        / w_sum;
    let centered: Vec<Option<f64>> = phase.iter().map(|p| p.map(|v| v - offset)).collect();

    // Bin positions only matter relative to each other here.
    let xs: Vec<f64> = (0..phase.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = centered.iter().map(|p| p.unwrap_or(0.0)).collect();
    let (sign_flipped, degenerate) = match weighted_polyfit(&xs, &ys, &weights, 2) {
        Ok(fit) => (fit.coeffs[2] < 0.0, false),
        Err(_) => (false, true),
    };
    let fixed = if sign_flipped {
        centered.iter().map(|p| p.map(|v| -v)).collect()
    } else {
        centered
    };
    Ok((
        fixed,
        GaugeRecord {
            offset,
            sign_flipped,
            degenerate,
        },
    ))
}

/// Weighted quadratic fit `φ = a x² + b x + c` with weights `amp²`; `R = k / (2a)`.
pub fn fit_radius(phase: &[Option<f64>], amp: &[f64], grid: &Grid, k: f64) -> Result<RadiusFit> {
    if phase.len() != grid.n_bins() || amp.len() != grid.n_bins() {
        return Err(HspError::LengthMismatch {
            name: "phase/amp",
            expected: grid.n_bins(),
            actual: phase.len().min(amp.len()),
        });
    }
    let xs = grid.centers();
    let ys: Vec<f64> = phase.iter().map(|p| p.unwrap_or(0.0)).collect();
    let ws: Vec<f64> = phase
        .iter()
        .zip(amp)
        .map(|(p, a)| if p.is_some() { a * a } else { 0.0 })
        .collect();
    if ws.iter().filter(|&&w| w > 0.0).count() < 3 {
        return Err(HspError::EmptyData(
            "radius fit needs at least three supported bins".into(),
        ));
    }
    let fit = weighted_polyfit(&xs, &ys, &ws, 2)?;
    let a = fit.coeffs[2];
    if a.abs() < CURVATURE_FLOOR {
        return Err(HspError::NoCurvature(a));
    }
    let radius = k / (2.0 * a);
    let stderr = fit
        .stderr(2)
        .map(|s| radius.abs() * s / a.abs())
        .unwrap_or(0.0);
    Ok(RadiusFit {
        radius,
        stderr,
        curvature: a,
    })
}

/// Full two-stage retrieval from a measured distribution and amplitude estimates.
pub fn retrieve_from_distribution(
    p_meas: &JointDistribution,
    amp_u: &[f64],
    amp_r: &[f64],
    cfg: &RetrievalConfig,
    seed: u64,
) -> Result<RetrievalResult> {
    let stage1 = global_poly_search(p_meas, amp_u, amp_r, cfg, seed)?;
    refine_from_stage1(p_meas, amp_u, amp_r, cfg, stage1)
}

/// Retrieval with the global search replaced by one local run from `start`.
pub fn retrieve_warm(
    p_meas: &JointDistribution,
    amp_u: &[f64],
    amp_r: &[f64],
    cfg: &RetrievalConfig,
    start: &PolyStage,
) -> Result<RetrievalResult> {
    let stage1 = local_poly_search(p_meas, amp_u, amp_r, cfg, start)?;
    refine_from_stage1(p_meas, amp_u, amp_r, cfg, stage1)
}

fn refine_from_stage1(
    p_meas: &JointDistribution,
    amp_u: &[f64],
    amp_r: &[f64],
    cfg: &RetrievalConfig,
    stage1: PolyStage,
) -> Result<RetrievalResult> {
    let init: Vec<f64> = p_meas
        .grid()
        .centers()
        .into_iter()
        .map(|x| eval_poly_no_const(&stage1.coeffs, x))
        .collect();
    let mut result = local_refine(p_meas, amp_u, amp_r, &init, stage1.visibility, cfg)?;
    let (phase, gauge) = gauge_fix(&result.phase, amp_u)?;
    result.phase = phase;
    result.gauge = gauge;
    result.stage1_objective = stage1.objective;
    result.poly_coeffs_stage1 = stage1.coeffs;
    result.radius = fit_radius(&result.phase, amp_u, p_meas.grid(), cfg.wavenumber).ok();
    Ok(result)
}

/// Counts in, retrieved phase out: empirical hologram, amplitude estimates, global
/// polynomial search, per-bin refinement, gauge fixing and radius fit.
pub fn retrieve_phase(
    counts: &CoincidenceCounts,
    m_u: &MarginalCounts,
    m_r: &MarginalCounts,
    cfg: &RetrievalConfig,
    seed: u64,
) -> Result<RetrievalResult> {
    counts.grid.ensure_same(&m_u.grid)?;
    counts.grid.ensure_same(&m_r.grid)?;
    let p = empirical_distribution(counts)?;
    let amp_u = amplitude_estimate(m_u)?;
    let amp_r = amplitude_estimate(m_r)?;
    retrieve_from_distribution(&p, &amp_u, &amp_r, cfg, seed)
}
