//! Simulated detector output for the three half-wave-plate settings.
//!
//! At θ = 0° and θ = 45° the two photons leave through separate ports and each
//! output region images one photon's `|ψ|²`; at θ = 22.5° the plate acts as a 50/50
//! beam splitter and paired detections sample the hologram. Every draw comes from a
//! seeded [`crate::rng::HspRng`], so each call is a pure function of its inputs.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{HspError, Result};
use crate::forward::{hsp_distribution, JointDistribution};
use crate::rng::{derive_seed, rng_from_seed, streams};
use crate::wavefunction::{Grid, Wavefunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MeasurementMode {
    /// θ = 0°, unknown photon's amplitude.
    AmplitudeU,
    /// θ = 45°, reference photon's amplitude.
    AmplitudeR,
    /// θ = 22.5°, two-photon interference.
    Hologram,
}

impl MeasurementMode {
    pub fn hwp_angle_deg(self) -> f64 {
        match self {
            MeasurementMode::AmplitudeU => 0.0,
            MeasurementMode::AmplitudeR => 45.0,
            MeasurementMode::Hologram => 22.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementMode::AmplitudeU => "AMPLITUDE_U",
            MeasurementMode::AmplitudeR => "AMPLITUDE_R",
            MeasurementMode::Hologram => "HOLOGRAM",
        }
    }
}

impl std::str::FromStr for MeasurementMode {
    type Err = HspError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AMPLITUDE_U" => Ok(MeasurementMode::AmplitudeU),
            "AMPLITUDE_R" => Ok(MeasurementMode::AmplitudeR),
            "HOLOGRAM" => Ok(MeasurementMode::Hologram),
            other => Err(HspError::Format(format!(
                "unknown measurement mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Expected dark counts per bin (per bin pair for coincidences) per frame.
    pub dark_rate: f64,
    pub n_frames: u64,
    /// Fraction of emitted pairs that are detected; scales the requested pair count.
    pub pair_efficiency: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            dark_rate: 0.0,
            n_frames: 0,
            pair_efficiency: 1.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0) {
            return Err(HspError::invalid(
                "dark_rate",
                format!("must be finite and nonnegative, got {}", self.dark_rate),
            ));
        }
        if !(self.pair_efficiency > 0.0 && self.pair_efficiency <= 1.0) {
            return Err(HspError::invalid(
                "pair_efficiency",
                format!("must lie in (0, 1], got {}", self.pair_efficiency),
            ));
        }
        Ok(())
    }

    /// Expected dark counts added to every bin over the whole run.
    pub fn dark_mean(&self) -> f64 {
        self.dark_rate * self.n_frames as f64
    }

    pub fn detected_pairs(&self, n_pairs: u64) -> u64 {
        (n_pairs as f64 * self.pair_efficiency).round() as u64
    }
}

/// Integer count data on a grid.
pub trait CountData: Clone {
    fn grid(&self) -> &Grid;
    fn counts(&self) -> &[u64];
    fn total(&self) -> u64;
    /// Same metadata with replaced counts; the total is recomputed.
    fn with_counts(&self, counts: Vec<u64>) -> Self;
}

/// Paired detections binned at `(x_i, x'_j)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    pub grid: Grid,
    pub counts: Vec<u64>,
    pub n_pairs: u64,
    pub seed: u64,
}

impl CoincidenceCounts {
    pub fn new(grid: Grid, counts: Vec<u64>, seed: u64) -> Result<Self> {
        let n = grid.n_bins();
        if counts.len() != n * n {
            return Err(HspError::LengthMismatch {
                name: "counts",
                expected: n * n,
                actual: counts.len(),
            });
        }
        let n_pairs = counts.iter().sum();
        Ok(Self {
            grid,
            counts,
            n_pairs,
            seed,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.grid.n_bins() + j]
    }
}

impl CountData for CoincidenceCounts {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn counts(&self) -> &[u64] {
        &self.counts
    }

    fn total(&self) -> u64 {
        self.n_pairs
    }

    fn with_counts(&self, counts: Vec<u64>) -> Self {
        debug_assert_eq!(counts.len(), self.counts.len());
        let n_pairs = counts.iter().sum();
        Self {
            grid: self.grid,
            counts,
            n_pairs,
            seed: self.seed,
        }
    }
}

/// Single-photon detections in one output region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCounts {
    pub grid: Grid,
    pub counts: Vec<u64>,
    pub n_events: u64,
    pub mode: MeasurementMode,
    pub seed: u64,
}

impl MarginalCounts {
    pub fn new(grid: Grid, counts: Vec<u64>, mode: MeasurementMode, seed: u64) -> Result<Self> {
        if mode == MeasurementMode::Hologram {
            return Err(HspError::invalid(
                "mode",
                "marginal counts cannot use HOLOGRAM mode",
            ));
        }
        if counts.len() != grid.n_bins() {
            return Err(HspError::LengthMismatch {
                name: "counts",
                expected: grid.n_bins(),
                actual: counts.len(),
            });
        }
        let n_events = counts.iter().sum();
        Ok(Self {
            grid,
            counts,
            n_events,
            mode,
            seed,
        })
    }
}

impl CountData for MarginalCounts {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn counts(&self) -> &[u64] {
        &self.counts
    }

    fn total(&self) -> u64 {
        self.n_events
    }

    fn with_counts(&self, counts: Vec<u64>) -> Self {
        debug_assert_eq!(counts.len(), self.counts.len());
        let n_events = counts.iter().sum();
        Self {
            grid: self.grid,
            counts,
            n_events,
            mode: self.mode,
            seed: self.seed,
        }
    }
}

/// Multinomial draw by sequential conditional binomials over the cells in order.
///
/// Weights need not be normalized. Exactly `n` events are placed.
pub(crate) fn multinomial<R: Rng>(weights: &[f64], n: u64, rng: &mut R) -> Result<Vec<u64>> {
    let mut out = vec![0u64; weights.len()];
    // Suffix sums avoid the drift of repeatedly subtracting from a running total.
    let mut suffix = vec![0.0; weights.len() + 1];
    for k in (0..weights.len()).rev() {
        suffix[k] = suffix[k + 1] + weights[k];
    }
    if n > 0 && !(suffix[0] > 0.0) {
        return Err(HspError::EmptyData("all sampling weights are zero".into()));
    }
    let last = weights.iter().rposition(|&w| w > 0.0);
    let mut remaining = n;
    for (k, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if Some(k) == last {
            out[k] = remaining;
            break;
        }
        if w <= 0.0 {
            continue;
        }
        let p = (w / suffix[k]).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, p)
            .map_err(|e| HspError::Numerical(format!("binomial({remaining}, {p}): {e}")))?
            .sample(rng);
        out[k] = draw;
        remaining -= draw;
    }
    Ok(out)
}

pub(crate) fn poisson_draw<R: Rng>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| HspError::Numerical(format!("poisson({mean}): {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// Draws `n_pairs` coincidences from `p / Σp` over the full (unfolded) matrix.
pub fn sample_coincidences(
    jd: &JointDistribution,
    n_pairs: u64,
    seed: u64,
) -> Result<CoincidenceCounts> {
    if n_pairs > 0 && !(jd.total() > 0.0) {
        return Err(HspError::EmptyData(
            "cannot sample coincidences from an all-zero distribution".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let counts = multinomial(jd.values(), n_pairs, &mut rng)?;
    Ok(CoincidenceCounts {
        grid: *jd.grid(),
        counts,
        n_pairs,
        seed,
    })
}

/// Draws `n_events` single detections from `|ψ(x_i)|² dx`.
pub fn sample_marginal(
    wf: &Wavefunction,
    n_events: u64,
    mode: MeasurementMode,
    seed: u64,
) -> Result<MarginalCounts> {
    if mode == MeasurementMode::Hologram {
        return Err(HspError::invalid(
            "mode",
            "HOLOGRAM is a coincidence measurement; use sample_coincidences",
        ));
    }
    let dx = wf.grid().dx();
    let weights: Vec<f64> = wf.amplitude().iter().map(|a| a * a * dx).collect();
    let mut rng = rng_from_seed(seed);
    let counts = multinomial(&weights, n_events, &mut rng)?;
    Ok(MarginalCounts {
        grid: *wf.grid(),
        counts,
        n_events,
        mode,
        seed,
    })
}

/// Adds independent `Poisson(dark_rate · n_frames)` counts to every bin.
pub fn add_dark_counts<C: CountData>(counts: &C, det: &DetectorConfig, seed: u64) -> Result<C> {
    det.validate()?;
    let mean = det.dark_mean();
    if mean == 0.0 {
        return Ok(counts.clone());
    }
    let mut rng = rng_from_seed(seed);
    let updated = counts
        .counts()
        .iter()
        .map(|&c| Ok(c + poisson_draw(mean, &mut rng)?))
        .collect::<Result<Vec<u64>>>()?;
    Ok(counts.with_counts(updated))
}

/// The three datasets a retrieval run consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub hologram: CoincidenceCounts,
    pub marginal_u: MarginalCounts,
    pub marginal_r: MarginalCounts,
}

/// Runs all three measurement modes. Sub-seeds are [`derive_seed`] of `seed` with
/// the tags in [`crate::rng::streams`].
pub fn simulate_experiment(
    psi_u: &Wavefunction,
    psi_r: &Wavefunction,
    visibility: f64,
    n_pairs: u64,
    n_marginal_events: u64,
    det: &DetectorConfig,
    seed: u64,
) -> Result<SimulatedData> {
    det.validate()?;
    let jd = hsp_distribution(psi_u, psi_r, visibility)?;
    let hologram = sample_coincidences(
        &jd,
        det.detected_pairs(n_pairs),
        derive_seed(seed, streams::HOLOGRAM),
    )?;
    let marginal_u = sample_marginal(
        psi_u,
        n_marginal_events,
        MeasurementMode::AmplitudeU,
        derive_seed(seed, streams::MARGINAL_U),
    )?;
    let marginal_r = sample_marginal(
        psi_r,
        n_marginal_events,
        MeasurementMode::AmplitudeR,
        derive_seed(seed, streams::MARGINAL_R),
    )?;
    Ok(SimulatedData {
        hologram: add_dark_counts(&hologram, det, derive_seed(seed, streams::DARK_HOLOGRAM))?,
        marginal_u: add_dark_counts(&marginal_u, det, derive_seed(seed, streams::DARK_U))?,
        marginal_r: add_dark_counts(&marginal_r, det, derive_seed(seed, streams::DARK_R))?,
    })
}
