use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hsp_core::io::{
    counts_from_matrix, counts_matrix, distribution_from_matrix, distribution_matrix,
    marginal_from_table, marginal_table, wavefunction_from_table, wavefunction_table, Header,
    MatrixFile, Table,
};
use hsp_core::rng::{derive_seed, streams};
use hsp_core::{
    hsp_distribution, mc_run_with_base, retrieve_from_distribution, retrieve_phase,
    simulate_experiment, CoincidenceCounts, Grid, JointDistribution, MarginalCounts, McSummary,
    MeasurementMode, RetrievalConfig, RetrievalResult, SimulatedData,
};
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::config::{McSpec, Resolved, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};

pub const COINCIDENCES: &str = "coincidences.txt";
pub const MARGINAL_U: &str = "marginal_u.tsv";
pub const MARGINAL_R: &str = "marginal_r.tsv";
pub const EXACT_HSP: &str = "hsp_exact.txt";
pub const TRUTH_U: &str = "truth_unknown.tsv";
pub const TRUTH_R: &str = "truth_reference.tsv";

/// Seed of the base retrieval, shared by `retrieve`, `uncertainty` and `pipeline`.
pub fn retrieval_seed(master: u64) -> u64 {
    derive_seed(master, streams::RETRIEVAL)
}

pub struct CountInputs {
    pub hologram: CoincidenceCounts,
    pub marginal_u: MarginalCounts,
    pub marginal_r: MarginalCounts,
}

impl From<SimulatedData> for CountInputs {
    fn from(d: SimulatedData) -> Self {
        Self {
            hologram: d.hologram,
            marginal_u: d.marginal_u,
            marginal_r: d.marginal_r,
        }
    }
}

pub struct ExactInputs {
    pub hsp: JointDistribution,
    pub amp_u: Vec<f64>,
    pub amp_r: Vec<f64>,
}

fn open(dir: &Path, name: &str) -> CliResult<BufReader<File>> {
    let path = dir.join(name);
    File::open(&path)
        .map(BufReader::new)
        .map_err(CliError::io(format!("cannot open {}", path.display())))
}

fn ensure_grid(name: &str, got: &Grid, want: &Grid) -> CliResult<()> {
    if got != want {
        return Err(CliError::Core {
            context: name.to_string(),
            source: hsp_core::HspError::GridMismatch(format!(
                "file grid {got:?}, configured grid {want:?}"
            )),
        });
    }
    Ok(())
}

fn read_table(dir: &Path, name: &str) -> CliResult<Table> {
    Table::read(open(dir, name)?).map_err(CliError::core(name))
}

fn read_matrix(dir: &Path, name: &str) -> CliResult<MatrixFile> {
    MatrixFile::read(open(dir, name)?).map_err(CliError::core(name))
}

pub fn read_counts(dir: &Path, grid: &Grid) -> CliResult<CountInputs> {
    let hologram = counts_from_matrix(&read_matrix(dir, COINCIDENCES)?)
        .map_err(CliError::core(COINCIDENCES))?;
    let marginal_u =
        marginal_from_table(&read_table(dir, MARGINAL_U)?).map_err(CliError::core(MARGINAL_U))?;
    let marginal_r =
        marginal_from_table(&read_table(dir, MARGINAL_R)?).map_err(CliError::core(MARGINAL_R))?;
    ensure_grid(COINCIDENCES, &hologram.grid, grid)?;
    ensure_grid(MARGINAL_U, &marginal_u.grid, grid)?;
    ensure_grid(MARGINAL_R, &marginal_r.grid, grid)?;
    for (name, m, want) in [
        (MARGINAL_U, &marginal_u, MeasurementMode::AmplitudeU),
        (MARGINAL_R, &marginal_r, MeasurementMode::AmplitudeR),
    ] {
        if m.mode != want {
            return Err(CliError::Core {
                context: name.to_string(),
                source: hsp_core::HspError::Format(format!(
                    "mode {} where {} was expected",
                    m.mode.as_str(),
                    want.as_str()
                )),
            });
        }
    }
    Ok(CountInputs {
        hologram,
        marginal_u,
        marginal_r,
    })
}

pub fn read_exact(dir: &Path, grid: &Grid) -> CliResult<ExactInputs> {
    let hsp = distribution_from_matrix(&read_matrix(dir, EXACT_HSP)?)
        .map_err(CliError::core(EXACT_HSP))?;
    let u = wavefunction_from_table(&read_table(dir, TRUTH_U)?).map_err(CliError::core(TRUTH_U))?;
    let r = wavefunction_from_table(&read_table(dir, TRUTH_R)?).map_err(CliError::core(TRUTH_R))?;
    ensure_grid(EXACT_HSP, hsp.grid(), grid)?;
    ensure_grid(TRUTH_U, u.grid(), grid)?;
    ensure_grid(TRUTH_R, r.grid(), grid)?;
    Ok(ExactInputs {
        hsp,
        amp_u: u.amplitude().to_vec(),
        amp_r: r.amplitude().to_vec(),
    })
}

pub fn simulate(res: &Resolved) -> CliResult<(Artifacts, CountInputs)> {
    let c = &res.config;
    let exact = hsp_distribution(&res.psi_u, &res.psi_r, c.visibility)
        .map_err(CliError::core("forward model"))?;
    let data = simulate_experiment(
        &res.psi_u,
        &res.psi_r,
        c.visibility,
        c.n_pairs,
        c.n_marginal_events,
        &c.detector,
        c.seed,
    )
    .map_err(CliError::core("simulation"))?;

    let n = res.grid.n_bins();
    let mut out = Artifacts::default();
    out.table(TRUTH_U, &wavefunction_table(&res.psi_u))?;
    out.table(TRUTH_R, &wavefunction_table(&res.psi_r))?;
    out.matrix(EXACT_HSP, &distribution_matrix(&exact))?;
    out.render("hsp_exact", exact.values(), n, "exact hologram density")?;

    let mut counts = counts_matrix(&data.hologram);
    counts.header = counts.header.with_detector(&c.detector);
    out.matrix(COINCIDENCES, &counts)?;
    for (name, m) in [
        (MARGINAL_U, &data.marginal_u),
        (MARGINAL_R, &data.marginal_r),
    ] {
        let mut t = marginal_table(m);
        t.header = t.header.with_detector(&c.detector);
        out.table(name, &t)?;
    }
    let measured: Vec<f64> = data.hologram.counts.iter().map(|&v| v as f64).collect();
    out.render("hsp_measured", &measured, n, "coincidence counts")?;
    Ok((out, data.into()))
}

#[derive(Serialize)]
struct RetrievalDoc<'a> {
    schema_version: u32,
    kind: &'static str,
    input: &'static str,
    seed: u64,
    config: &'a RetrievalConfig,
    result: &'a RetrievalResult,
}

pub enum RetrievalInput<'a> {
    Counts(&'a CountInputs),
    Exact(&'a ExactInputs),
}

pub fn retrieve(res: &Resolved, input: RetrievalInput) -> CliResult<(Artifacts, RetrievalResult)> {
    let seed = retrieval_seed(res.config.seed);
    let (result, label) = match input {
        RetrievalInput::Counts(d) => (
            retrieve_phase(
                &d.hologram,
                &d.marginal_u,
                &d.marginal_r,
                &res.retrieval,
                seed,
            ),
            "counts",
        ),
        RetrievalInput::Exact(e) => (
            retrieve_from_distribution(&e.hsp, &e.amp_u, &e.amp_r, &res.retrieval, seed),
            "exact",
        ),
    };
    let result = result.map_err(CliError::core("retrieval"))?;

    let mut out = Artifacts::default();
    out.json(
        "retrieval.json",
        &RetrievalDoc {
            schema_version: SCHEMA_VERSION,
            kind: "retrieval",
            input: label,
            seed,
            config: &res.retrieval,
            result: &result,
        },
    )?;
    let hsp = result
        .reconstructed_hsp()
        .map_err(CliError::core("reconstruction"))?;
    out.matrix("hsp_reconstructed.txt", &distribution_matrix(&hsp))?;
    out.render(
        "hsp_reconstructed",
        hsp.values(),
        res.grid.n_bins(),
        "reconstructed hologram, unit total",
    )?;

    let header = Header::new("phase")
        .with_grid(&res.grid)
        .with("visibility", result.visibility_est)
        .with("objective", result.objective);
    let mut t = Table::new(header, &["x", "amplitude_u", "amplitude_r", "phase"]);
    for (i, x) in res.grid.centers().into_iter().enumerate() {
        t.push(vec![
            Some(x),
            Some(result.amplitude_u[i]),
            Some(result.amplitude_r[i]),
            result.phase[i],
        ]);
    }
    out.table("phase.tsv", &t)?;
    Ok((out, result))
}

#[derive(Serialize)]
struct McConfigEcho<'a> {
    retrieval: &'a RetrievalConfig,
    mc: &'a McSpec,
}

#[derive(Serialize)]
struct UncertaintyDoc<'a> {
    schema_version: u32,
    kind: &'static str,
    seed: u64,
    config: McConfigEcho<'a>,
    summary: &'a McSummary,
}

/// Monte-Carlo around `base`, computing it first when absent.
pub fn uncertainty(
    res: &Resolved,
    data: &CountInputs,
    base: Option<RetrievalResult>,
) -> CliResult<(Artifacts, McSummary)> {
    let base = match base {
        Some(b) => b,
        None => retrieve(res, RetrievalInput::Counts(data))?.1,
    };
    let summary = mc_run_with_base(
        &data.hologram,
        &data.marginal_u,
        &data.marginal_r,
        &res.retrieval,
        &res.mc,
        &base,
        res.config.seed,
    )
    .map_err(CliError::core("uncertainty"))?;

    let mut out = Artifacts::default();
    out.json(
        "uncertainty.json",
        &UncertaintyDoc {
            schema_version: SCHEMA_VERSION,
            kind: "uncertainty",
            seed: res.config.seed,
            config: McConfigEcho {
                retrieval: &res.retrieval,
                mc: &res.config.mc,
            },
            summary: &summary,
        },
    )?;
    let n = res.grid.n_bins();
    let mean = JointDistribution::new(res.grid, summary.mean_reconstructed_hsp.clone(), None)
        .map_err(CliError::core("mean hologram"))?;
    out.matrix("hsp_mc_mean.txt", &distribution_matrix(&mean))?;
    out.render(
        "hsp_mc_mean",
        mean.values(),
        n,
        "mean reconstructed hologram over trials",
    )?;

    let header = Header::new("phase_uncertainty")
        .with_grid(&res.grid)
        .with("n_trials", summary.n_trials)
        .with("n_failed", summary.n_failed);
    let mut t = Table::new(
        header,
        &[
            "x",
            "amplitude_u",
            "central",
            "phase_mean",
            "phase_std",
            "phase_low",
            "phase_high",
        ],
    );
    for (i, x) in res.grid.centers().into_iter().enumerate() {
        let (m, s) = (summary.phase_mean[i], summary.phase_std[i]);
        let band = m.zip(s);
        t.push(vec![
            Some(x),
            Some(base.amplitude_u[i]),
            Some(if summary.central_mask[i] { 1.0 } else { 0.0 }),
            m,
            s,
            band.map(|(m, s)| m - s),
            band.map(|(m, s)| m + s),
        ]);
    }
    out.table("phase_uncertainty.tsv", &t)?;

    if res.config.mc.dump_trials {
        let names: Vec<String> = (0..n).map(|i| format!("bin_{i}")).collect();
        let mut cols: Vec<&str> = vec!["trial"];
        cols.extend(names.iter().map(String::as_str));
        let mut dump = Table::new(Header::new("mc_trials").with_grid(&res.grid), &cols);
        for (k, phase) in summary.trial_phases.iter().enumerate() {
            let mut row = vec![Some(k as f64)];
            row.extend(phase.iter().copied());
            dump.push(row);
        }
        out.table("mc_trials.tsv", &dump)?;
    }
    Ok((out, summary))
}
