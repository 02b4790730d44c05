use std::path::Path;

use pfa_core::constructions::{self, FamilySpec, VerificationReport};
use pfa_core::matlin::{eigendecompose, CovarianceMatrix};
use pfa_core::pfa::{self, ConditionReport, DEFAULT_BETA_GRID};
use pfa_core::slln::{self, ExperimentConfig, SllnReport};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::{decay_table, matrix_to_string, read_matrix, vector_to_string, write_json, write_text};
use crate::manifest::RunManifest;
use crate::{CliError, CliResult};

pub const MATRIX_FILE: &str = "matrix.txt";
pub const EIGENVALUES_FILE: &str = "eigenvalues.txt";
pub const CONSTRUCT_REPORT: &str = "construct_report.json";
pub const PFA_REPORT: &str = "pfa_report.json";
pub const SWEEP_REPORT: &str = "sweep_report.json";
pub const DECAY_TABLE: &str = "decay.tsv";

fn default_delta() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructParams {
    pub family: FamilySpec,
    pub m: usize,
    /// Exponent for the `ϑ_m ≤ m^{-δ}` check.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructReport {
    pub manifest: RunManifest,
    pub params: ConstructParams,
    pub eigenvalues: Vec<f64>,
    /// 1-based indices with `a_i = ∞`.
    pub degenerate_indices: Vec<usize>,
    pub passed: bool,
    pub verification: VerificationReport,
}

fn prepare(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

/// Builds a family matrix, writes it with its spectrum and checks every
/// construction invariant. Outputs are written before a failed check is
/// reported.
pub fn construct(params: &ConstructParams, seed: u64, out: &Path) -> CliResult<ConstructReport> {
    if !(params.delta > 0.0) {
        return Err(CliError::Input(format!("delta must be positive, got {}", params.delta)));
    }
    let construction = params.family.build(params.m, seed)?;
    let (verification, model) = constructions::verify(&construction, params.delta)?;
    let report = ConstructReport {
        manifest: RunManifest::new(
            "construct",
            &(params, seed),
            seed,
            &[MATRIX_FILE, EIGENVALUES_FILE, CONSTRUCT_REPORT],
        )?,
        params: params.clone(),
        eigenvalues: construction.eigenvalues.clone(),
        degenerate_indices: (0..model.m).filter(|&i| model.is_degenerate(i)).map(|i| i + 1).collect(),
        passed: verification.passed(),
        verification,
    };
    prepare(out)?;
    write_text(&out.join(MATRIX_FILE), &matrix_to_string(construction.sigma.entries()))?;
    write_text(&out.join(EIGENVALUES_FILE), &vector_to_string(&construction.eigenvalues))?;
    write_json(&out.join(CONSTRUCT_REPORT), &report)?;
    if !report.passed {
        let failed: Vec<&str> = report.verification.failures().map(|c| c.name.as_str()).collect();
        return Err(CliError::Verification(format!(
            "{} check(s) failed: {}",
            failed.len(),
            failed.join(", ")
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfaParams {
    pub matrix_sha256: String,
    pub c: f64,
    pub delta: f64,
    pub k: Option<usize>,
    pub eps_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierRow {
    pub k: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PfaReport {
    pub manifest: RunManifest,
    pub params: PfaParams,
    pub m: usize,
    pub eigenvalues: Vec<f64>,
    /// `C·m^{-δ}`.
    pub bound: f64,
    pub frontier: Vec<FrontierRow>,
    pub selected_k: usize,
    pub k_used: usize,
    pub degenerate_count: usize,
    pub sigma: Vec<f64>,
    /// `None` marks an infinite `a_i`.
    pub a: Vec<Option<f64>>,
    pub conditions: ConditionReport,
}

/// Decomposes a matrix file, scans `k` and reports the model conditions.
pub fn pfa_report(
    matrix_path: &Path,
    c: f64,
    delta: f64,
    k: Option<usize>,
    eps_s: f64,
    seed: u64,
    out: &Path,
) -> CliResult<PfaReport> {
    if !(delta > 0.0) {
        return Err(CliError::Input(format!("delta must be positive, got {delta}")));
    }
    if !(c > 0.0) {
        return Err(CliError::Input(format!("C must be positive, got {c}")));
    }
    let bytes = std::fs::read(matrix_path).map_err(|e| CliError::io(matrix_path, e))?;
    let sigma = CovarianceMatrix::new(read_matrix(matrix_path)?)?;
    let spectrum = eigendecompose(&sigma)?;
    let selection = pfa::select_k(&spectrum.eigenvalues, c, delta)?;
    let k_used = k.unwrap_or(selection.k);
    let model = pfa::from_spectrum(&spectrum, k_used)?;
    let conditions = pfa::condition_report(&model, c, delta, eps_s, &DEFAULT_BETA_GRID, None)?;
    let params = PfaParams {
        matrix_sha256: hex::encode(Sha256::digest(&bytes)),
        c,
        delta,
        k,
        eps_s,
    };
    let report = PfaReport {
        manifest: RunManifest::new("pfa", &params, seed, &[PFA_REPORT])?,
        m: model.m,
        eigenvalues: spectrum.eigenvalues.clone(),
        bound: selection.bound,
        frontier: selection
            .frontier
            .iter()
            .enumerate()
            .map(|(k, &theta)| FrontierRow { k, theta })
            .collect(),
        selected_k: selection.k,
        k_used,
        degenerate_count: model.degenerate_count(),
        sigma: model.sigma.clone(),
        a: model.a.iter().map(|a| a.finite()).collect(),
        conditions,
        params,
    };
    prepare(out)?;
    write_json(&out.join(PFA_REPORT), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub manifest: RunManifest,
    pub config: ExperimentConfig,
    pub report: SllnReport,
}

pub fn load_experiment(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Runs a sweep; with `assert_slope` a fitted slope above `−δ` (or no fit)
/// is a verification failure, reported after the outputs are written.
pub fn sweep(config: &ExperimentConfig, assert_slope: bool, out: &Path) -> CliResult<SweepReport> {
    let report = slln::sweep(config)?;
    let curve: Vec<(usize, f64)> = report.points.iter().map(|p| (p.m, p.variance.value)).collect();
    let bundle = SweepReport {
        manifest: RunManifest::new("sweep", config, config.seed, &[SWEEP_REPORT, DECAY_TABLE])?,
        config: config.clone(),
        report,
    };
    prepare(out)?;
    write_json(&out.join(SWEEP_REPORT), &bundle)?;
    write_text(&out.join(DECAY_TABLE), &decay_table(&curve))?;
    if assert_slope && bundle.report.slope_meets_delta != Some(true) {
        return Err(CliError::Verification(match bundle.report.slope.slope {
            Some(s) => format!("fitted slope {s:.4} exceeds −δ = {}", -config.delta),
            None => "slope undefined; the criterion cannot be asserted".into(),
        }));
    }
    Ok(bundle)
}
