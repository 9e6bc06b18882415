//! Poisson Monte-Carlo over the count data.
//!
//! Every trial redraws each bin of the hologram and of both amplitude measurements
//! from a Poisson distribution centered on the observed count, reruns the
//! retrieval and brings the phase into a common gauge. Statistics are taken over
//! the gauge-unified trials only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HspError, Result};
use crate::retrieval::{
    amplitude_estimate, empirical_distribution, gauge_fix, retrieve_from_distribution,
    retrieve_warm, PolyStage, RetrievalConfig, RetrievalResult,
};
use crate::rng::{derive_seed, rng_from_seed, streams};
use crate::sampler::{poisson_draw, CoincidenceCounts, CountData, MarginalCounts};
use crate::wavefunction::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_trials: usize,
    /// Replace each trial's global search by a local search from the base optimum.
    pub warm_start: bool,
    /// Abort when more than this fraction of trials fail.
    pub max_failure_fraction: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_trials: 500,
            warm_start: true,
            max_failure_fraction: 0.1,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials < 2 {
            return Err(HspError::invalid(
                "n_trials",
                format!("needs at least 2 trials, got {}", self.n_trials),
            ));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(HspError::invalid(
                "max_failure_fraction",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// What one successful trial contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub phase: Vec<Option<f64>>,
    pub visibility: f64,
    pub reconstructed_hsp: Vec<f64>,
    pub radius: Option<f64>,
}

impl TrialOutcome {
    pub fn from_result(r: &RetrievalResult) -> Result<Self> {
        Ok(Self {
            phase: r.phase.clone(),
            visibility: r.visibility_est,
            reconstructed_hsp: r.reconstructed_hsp()?.values().to_vec(),
            radius: r.radius.map(|f| f.radius.abs()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub grid: Grid,
    pub n_trials: usize,
    pub n_failed: usize,
    pub phase_mean: Vec<Option<f64>>,
    pub phase_std: Vec<Option<f64>>,
    /// Bins with phase statistics (the base reconstruction's support).
    pub support_mask: Vec<bool>,
    /// Bins whose base amplitude is at least half the peak.
    pub central_mask: Vec<bool>,
    pub visibility_mean: f64,
    pub visibility_std: f64,
    /// Mean of the unit-total reconstructed holograms, row-major.
    pub mean_reconstructed_hsp: Vec<f64>,
    pub radius_mean: Option<f64>,
    pub radius_std: Option<f64>,
    pub seeds: Vec<u64>,
    /// Gauge-unified phase of every successful trial, in trial order.
    #[serde(skip)]
    pub trial_phases: Vec<Vec<Option<f64>>>,
}

impl McSummary {
    pub fn max_central_std(&self) -> Option<f64> {
        self.masked_std(true).into_iter().reduce(f64::max)
    }

    pub fn mean_edge_std(&self) -> Option<f64> {
        let v = self.masked_std(false);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    fn masked_std(&self, central: bool) -> Vec<f64> {
        self.phase_std
            .iter()
            .zip(&self.central_mask)
            .filter(|(_, &c)| c == central)
            .filter_map(|(s, _)| *s)
            .collect()
    }
}

/// Replaces every bin by an independent Poisson draw with the observed count as mean.
pub fn poisson_resample<C: CountData>(counts: &C, seed: u64) -> Result<C> {
    let mut rng = rng_from_seed(seed);
    let drawn = counts
        .counts()
        .iter()
        .map(|&c| poisson_draw(c as f64, &mut rng))
        .collect::<Result<Vec<u64>>>()?;
    Ok(counts.with_counts(drawn))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Gauge-unifies the trials against `base` and aggregates them in trial order.
pub fn summarize_trials(
    base: &RetrievalResult,
    trials: &[TrialOutcome],
    seeds: Vec<u64>,
    n_failed: usize,
) -> Result<McSummary> {
    if trials.len() < 2 {
        return Err(HspError::Numerical(format!(
            "only {} successful trials; need at least 2",
            trials.len()
        )));
    }
    let n = base.grid.n_bins();
    let support = base.support_mask.clone();
    let peak = base.amplitude_u.iter().cloned().fold(0.0, f64::max);
    let central_mask: Vec<bool> = base
        .amplitude_u
        .iter()
        .zip(&support)
        .map(|(&a, &s)| s && a >= 0.5 * peak)
        .collect();

    let mut unified = Vec::with_capacity(trials.len());
    for t in trials {
        let restricted: Vec<Option<f64>> = t
            .phase
            .iter()
            .zip(&support)
            .map(|(p, &s)| if s { *p } else { None })
            .collect();
        let (fixed, _) = gauge_fix(&restricted, &base.amplitude_u)?;
        unified.push(fixed);
    }

    let mut phase_mean = vec![None; n];
    let mut phase_std = vec![None; n];
    for i in 0..n {
        let vals: Vec<f64> = unified.iter().filter_map(|p| p[i]).collect();
        if vals.len() >= 2 {
            let (m, s) = mean_std(&vals);
            phase_mean[i] = Some(m);
            phase_std[i] = Some(s);
        }
    }

    let vis: Vec<f64> = trials.iter().map(|t| t.visibility).collect();
    let (visibility_mean, visibility_std) = mean_std(&vis);
    let radii: Vec<f64> = trials.iter().filter_map(|t| t.radius).collect();
    let (radius_mean, radius_std) = if radii.len() >= 2 {
        let (m, s) = mean_std(&radii);
        (Some(m), Some(s))
    } else {
        (None, None)
    };

    let mut mean_hsp = vec![0.0; n * n];
    for t in trials {
        for (acc, v) in mean_hsp.iter_mut().zip(&t.reconstructed_hsp) {
            *acc += v;
        }
    }
    let k = trials.len() as f64;
    mean_hsp.iter_mut().for_each(|v| *v /= k);

    Ok(McSummary {
        grid: base.grid,
        n_trials: trials.len() + n_failed,
        n_failed,
        phase_mean,
        phase_std,
        support_mask: support,
        central_mask,
        visibility_mean,
        visibility_std,
        mean_reconstructed_hsp: mean_hsp,
        radius_mean,
        radius_std,
        seeds,
        trial_phases: unified,
    })
}

fn run_trial(
    counts: &CoincidenceCounts,
    m_u: &MarginalCounts,
    m_r: &MarginalCounts,
    cfg: &RetrievalConfig,
    warm: Option<&PolyStage>,
    trial_seed: u64,
) -> Result<TrialOutcome> {
    let c = poisson_resample(counts, derive_seed(trial_seed, streams::HOLOGRAM))?;
    let u = poisson_resample(m_u, derive_seed(trial_seed, streams::MARGINAL_U))?;
    let r = poisson_resample(m_r, derive_seed(trial_seed, streams::MARGINAL_R))?;
    let p = empirical_distribution(&c)?;
    let amp_u = amplitude_estimate(&u)?;
    let amp_r = amplitude_estimate(&r)?;
    let result = match warm {
        Some(start) => retrieve_warm(&p, &amp_u, &amp_r, cfg, start)?,
        None => retrieve_from_distribution(
            &p,
            &amp_u,
            &amp_r,
            cfg,
            derive_seed(trial_seed, streams::RETRIEVAL),
        )?,
    };
    TrialOutcome::from_result(&result)
}

/// Monte-Carlo around an already computed base reconstruction of the same data.
pub fn mc_run_with_base(
    counts: &CoincidenceCounts,
    m_u: &MarginalCounts,
    m_r: &MarginalCounts,
    cfg: &RetrievalConfig,
    mc: &McConfig,
    base: &RetrievalResult,
    master_seed: u64,
) -> Result<McSummary> {
    mc.validate()?;
    counts.grid.ensure_same(&m_u.grid)?;
    counts.grid.ensure_same(&m_r.grid)?;
    let warm = mc.warm_start.then(|| PolyStage {
        coeffs: base.poly_coeffs_stage1.clone(),
        visibility: base.visibility_est,
        objective: base.stage1_objective,
    });
    let seeds: Vec<u64> = (0..mc.n_trials as u64)
        .map(|t| derive_seed(master_seed, streams::MC_TRIAL + t))
        .collect();
    let outcomes: Vec<Result<TrialOutcome>> = seeds
        .par_iter()
        .map(|&s| run_trial(counts, m_u, m_r, cfg, warm.as_ref(), s))
        .collect();
    let n_failed = outcomes.iter().filter(|o| o.is_err()).count();
    if n_failed as f64 > mc.max_failure_fraction * mc.n_trials as f64 {
        let first = outcomes
            .iter()
            .find_map(|o| o.as_ref().err())
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(HspError::Numerical(format!(
            "{n_failed} of {} Monte-Carlo trials failed (first: {first})",
            mc.n_trials
        )));
    }
    let trials: Vec<TrialOutcome> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
    summarize_trials(base, &trials, seeds, n_failed)
}

/// Base retrieval with the global search, then `mc.n_trials` resampled retrievals.
pub fn mc_run(
    counts: &CoincidenceCounts,
    m_u: &MarginalCounts,
    m_r: &MarginalCounts,
    cfg: &RetrievalConfig,
    mc: &McConfig,
    master_seed: u64,
) -> Result<McSummary> {
    mc.validate()?;
    let base = crate::retrieval::retrieve_phase(
        counts,
        m_u,
        m_r,
        cfg,
        derive_seed(master_seed, streams::RETRIEVAL),
    )?;
    mc_run_with_base(counts, m_u, m_r, cfg, mc, &base, master_seed)
}
