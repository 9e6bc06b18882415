//! Pipeline configuration: one strict JSON document, lengths in mm, phases in rad,
//! wave numbers in rad/mm.

use std::fs;
use std::path::{Path, PathBuf};

use hsp_core::io::Table;
use hsp_core::retrieval::default_bounds;
use hsp_core::{
    gaussian_mode, DetectorConfig, Grid, HspError, McConfig, QuadraticPhase, RetrievalConfig,
    Wavefunction, K_800NM,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Focal length used for the default quadratic bound when the phase is not a lens.
pub const DEFAULT_FOCAL_LENGTH: f64 = 75.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub grid: GridSpec,
    pub reference: ModeSpec,
    pub unknown: UnknownSpec,
    pub visibility: f64,
    pub n_pairs: u64,
    pub n_marginal_events: u64,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub retrieval: RetrievalSpec,
    #[serde(default)]
    pub mc: McSpec,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub waist: f64,
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnknownSpec {
    pub waist: f64,
    pub center: f64,
    pub phase: PhaseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpec {
    Flat,
    Quadratic {
        k: f64,
        radius: f64,
    },
    Lens {
        k: f64,
        focal_length: f64,
    },
    /// `a_1 x + a_2 x² + ...`, rad/mmᵈ.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// Table file with a `phase` column, one row per bin; relative paths start at the config file.
    Table {
        path: PathBuf,
    },
}

/// Overrides on top of the grid-derived retrieval defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poly_degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_global_starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_screen: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeff_bounds: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility_bounds: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub co_optimize_visibility: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavenumber: Option<f64>,
    /// Sets the default quadratic bound, mm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focal_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSpec {
    pub n_trials: usize,
    pub warm_start: bool,
    pub max_failure_fraction: f64,
    /// Also write every gauge-unified trial phase.
    pub dump_trials: bool,
}

impl Default for McSpec {
    fn default() -> Self {
        let d = McConfig::default();
        Self {
            n_trials: d.n_trials,
            warm_start: d.warm_start,
            max_failure_fraction: d.max_failure_fraction,
            dump_trials: false,
        }
    }
}

/// Validated configuration with every derived object built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: PipelineConfig,
    pub grid: Grid,
    pub psi_u: Wavefunction,
    pub psi_r: Wavefunction,
    pub retrieval: RetrievalConfig,
    pub mc: McConfig,
}

fn field(path: &str, e: HspError) -> CliError {
    CliError::Config(format!("{path}: {e}"))
}

fn require(ok: bool, path: &str, msg: String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{path}: {msg}")))
    }
}

pub fn load(path: &Path) -> CliResult<PipelineConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn read_phase_table(path: &Path, grid: &Grid) -> CliResult<Vec<f64>> {
    let file = fs::File::open(path).map_err(|e| {
        CliError::Config(format!(
            "unknown.phase.path: cannot open {}: {e}",
            path.display()
        ))
    })?;
    let table =
        Table::read(std::io::BufReader::new(file)).map_err(|e| field("unknown.phase.path", e))?;
    let table_grid = table
        .header
        .grid()
        .map_err(|e| field("unknown.phase.path", e))?;
    require(
        table_grid == *grid,
        "unknown.phase.path",
        format!("table grid {table_grid:?} differs from the configured grid {grid:?}"),
    )?;
    let phase = table
        .full_column("phase")
        .map_err(|e| field("unknown.phase.path", e))?;
    require(
        phase.len() == grid.n_bins(),
        "unknown.phase.path",
        format!("{} rows for {} bins", phase.len(), grid.n_bins()),
    )?;
    Ok(phase)
}

impl PipelineConfig {
    /// Checks every field and builds the objects the commands need.
    /// `base_dir` anchors relative table paths.
    pub fn resolve(self, base_dir: &Path) -> CliResult<Resolved> {
        require(
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            format!(
                "unsupported version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            ),
        )?;
        let grid = Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n_bins)
            .map_err(|e| field("grid", e))?;
        require(
            (0.0..=1.0).contains(&self.visibility),
            "visibility",
            format!("must lie in [0, 1], got {}", self.visibility),
        )?;
        require(self.n_pairs > 0, "n_pairs", "must be positive".into())?;
        require(
            self.n_marginal_events > 0,
            "n_marginal_events",
            "must be positive".into(),
        )?;
        self.detector.validate().map_err(|e| field("detector", e))?;

        let psi_r = gaussian_mode(grid, self.reference.waist, self.reference.center)
            .map_err(|e| field("reference", e))?;
        let mode_u = gaussian_mode(grid, self.unknown.waist, self.unknown.center)
            .map_err(|e| field("unknown", e))?;
        let psi_u = match &self.unknown.phase {
            PhaseSpec::Flat => Ok(mode_u),
            PhaseSpec::Quadratic { k, radius } => {
                QuadraticPhase::new(*k, *radius).and_then(|q| mode_u.with_quadratic_phase(&q))
            }
            PhaseSpec::Lens { k, focal_length } => mode_u.with_lens_double_pass(*k, *focal_length),
            PhaseSpec::Polynomial { coefficients } => {
                require(
                    coefficients.iter().all(|c| c.is_finite()),
                    "unknown.phase.coefficients",
                    "must be finite".into(),
                )?;
                mode_u.with_phase_profile(&hsp_core::wavefunction::polynomial_profile(
                    &grid,
                    coefficients,
                ))
            }
            PhaseSpec::Table { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                mode_u.with_phase_profile(&read_phase_table(&full, &grid)?)
            }
        }
        .map_err(|e| field("unknown.phase", e))?;

        let retrieval = self.resolve_retrieval(&grid)?;
        let mc = McConfig {
            n_trials: self.mc.n_trials,
            warm_start: self.mc.warm_start,
            max_failure_fraction: self.mc.max_failure_fraction,
        };
        mc.validate().map_err(|e| field("mc", e))?;
        Ok(Resolved {
            config: self,
            grid,
            psi_u,
            psi_r,
            retrieval,
            mc,
        })
    }

    fn resolve_retrieval(&self, grid: &Grid) -> CliResult<RetrievalConfig> {
        let spec = &self.retrieval;
        let (phase_k, lens_f) = match &self.unknown.phase {
            PhaseSpec::Quadratic { k, .. } => (Some(*k), None),
            PhaseSpec::Lens { k, focal_length } => (Some(*k), Some(*focal_length)),
            _ => (None, None),
        };
        let k = spec.wavenumber.or(phase_k).unwrap_or(K_800NM);
        let f = spec.focal_length.or(lens_f).unwrap_or(DEFAULT_FOCAL_LENGTH);
        require(
            k.is_finite() && k > 0.0,
            "retrieval.wavenumber",
            format!("must be positive, got {k}"),
        )?;
        require(
            f.is_finite() && f != 0.0,
            "retrieval.focal_length",
            format!("must be finite and nonzero, got {f}"),
        )?;
        let mut cfg = RetrievalConfig::for_grid(grid, k, f);
        if let Some(d) = spec.poly_degree {
            cfg.poly_degree = d;
            cfg.coeff_bounds = default_bounds(grid, d, k, f);
        }
        if let Some(b) = &spec.coeff_bounds {
            cfg.coeff_bounds = b.clone();
        }
        macro_rules! over {
            ($($name:ident),*) => {$(if let Some(v) = spec.$name { cfg.$name = v; })*};
        }
        over!(
            n_global_starts,
            n_screen,
            visibility_bounds,
            local_tol,
            max_iters,
            max_evals,
            support_threshold,
            co_optimize_visibility
        );
        cfg.validate().map_err(|e| field("retrieval", e))?;
        Ok(cfg)
    }
}
