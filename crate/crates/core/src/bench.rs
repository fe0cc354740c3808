//! Deterministic Monte Carlo harness comparing the three solvers.
//!
//! An experiment is a grid of cells — one per (design parameters, noise
//! level) pair — each holding a single fixed design. Every trial inside a
//! cell draws a fresh ground truth and noise vector from seeds derived
//! deterministically from the master seed, runs all three solvers, and
//! records support-recovery outcomes. Aggregation produces one summary row
//! per cell per solver, exported as CSV, a JSON summary document, and a
//! JSONL trial log. Identical configurations produce byte-identical
//! artifacts regardless of thread schedule.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{build_design, DesignMatrix, DesignParams};
use crate::diagnostics::{irrepresentable_value, worst_case_irrepresentable_value};
use crate::error::{Error, Result};
use crate::instance::{observe, sample_ground_truth};
use crate::seed::derive_seed;
use crate::solvers::lasso::{lasso_path, LassoConfig};
use crate::solvers::omp::fit_omp;
use crate::solvers::sbl::{fit_sbl, SblHyper};
use crate::solvers::Trace;

/// Noise variance handed to the SBL solver in (near-)noiseless cells, where
/// the data term would otherwise be unbounded.
pub const NOISELESS_VARIANCE_FLOOR: f64 = 1e-4;

/// Slack allowed when checking that the SBL objective never increases.
const MONOTONE_SLACK: f64 = 1e-9;

/// Exact column set and order of [`cells_csv`].
pub const CELLS_CSV_HEADER: &str = "cell_id,solver,rho_in,sigma,m,p,k,\
                                    recovery_rate,se,mean_hamming,omp_misselect_rate,ic_value";

/// Per-solver knobs shared by every cell of an experiment.
///
/// The SBL entry acts as a template: its `noise_variance` is replaced per
/// cell by `max(sigma^2, NOISELESS_VARIANCE_FLOOR)` and its `restart_seed`
/// by a value derived from the master seed, so the template fields carry
/// only the structural hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SolverSettings {
    pub lasso: LassoConfig,
    pub sbl: SblHyper,
    /// Greedy step budget; `None` selects each design's true support size.
    pub omp_steps: Option<usize>,
}

/// Full description of a Monte Carlo experiment.
///
/// Cells enumerate `design_params_grid x sigma_grid` (designs outer, noise
/// levels inner). Each design is built once per grid entry and shared by all
/// its noise cells and trials; per-trial randomness covers only the ground
/// truth and the noise vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design_params_grid: Vec<DesignParams>,
    pub sigma_grid: Vec<f64>,
    pub trials_per_cell: usize,
    /// Smallest true coefficient magnitude.
    pub beta_min: f64,
    /// Largest true coefficient magnitude.
    pub magnitude_max: f64,
    /// Reuse trial 0's ground truth for every trial of a cell, so that only
    /// the noise varies.
    #[serde(default)]
    pub freeze_truth: bool,
    #[serde(default)]
    pub solver_settings: SolverSettings,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Checks every cross-field precondition.
    pub fn validate(&self) -> Result<()> {
        if self.design_params_grid.is_empty() {
            return Err(Error::InfeasibleParams(
                "design_params_grid must not be empty".into(),
            ));
        }
        for params in &self.design_params_grid {
            params.validate()?;
        }
        if self.sigma_grid.is_empty() {
            return Err(Error::InfeasibleParams(
                "sigma_grid must not be empty".into(),
            ));
        }
        if let Some(bad) = self.sigma_grid.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InfeasibleParams(format!(
                "sigma_grid entry {bad} must be finite and nonnegative"
            )));
        }
        if self.trials_per_cell == 0 {
            return Err(Error::InfeasibleParams(
                "trials_per_cell must be positive".into(),
            ));
        }
        if !(self.beta_min > 0.0 && self.beta_min <= self.magnitude_max) {
            return Err(Error::InfeasibleParams(format!(
                "need 0 < beta_min <= magnitude_max, got {} and {}",
                self.beta_min, self.magnitude_max
            )));
        }
        if let Some(steps) = self.solver_settings.omp_steps {
            if steps == 0 {
                return Err(Error::InfeasibleParams(
                    "omp_steps must be positive when given".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One solver's outcome on one trial.
///
/// Wall-clock runtime is measured but excluded from serialized artifacts so
/// reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutcome {
    /// Declared support equals the true support exactly.
    pub exact_recovery: bool,
    /// Symmetric difference between declared and true support. For the
    /// lasso this is the best (smallest) value along the penalty path.
    pub hamming_distance: usize,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

/// Everything recorded about a single (truth, noise) draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub cell_id: String,
    pub trial: usize,
    pub truth_seed: u64,
    pub noise_seed: u64,
    pub lasso: SolverOutcome,
    pub omp: SolverOutcome,
    pub sbl: SolverOutcome,
    /// The greedy solver's first selection fell outside the true support.
    pub omp_first_step_misselection: bool,
    /// Largest stationarity-condition violation across the lasso path fits.
    pub lasso_kkt_max: f64,
    /// Largest correlation between the greedy solver's final residual and
    /// any column it selected.
    pub omp_orthogonality_max: f64,
    /// The SBL objective was nonincreasing across outer iterations.
    pub sbl_objective_monotone: bool,
    /// Irrepresentability statistic of the true support at this trial's
    /// sign pattern.
    pub ic_value: f64,
    /// Failure message when any stage of the trial errored; the solver
    /// outcomes then count as non-recoveries.
    pub error: Option<String>,
}

/// Per-solver aggregate over one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub recovery_rate: f64,
    /// Binomial standard error of the recovery rate.
    pub se: f64,
    pub mean_hamming: f64,
}

/// One cell's aggregate row set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell_id: String,
    pub rho_in: f64,
    pub sigma: f64,
    pub m: usize,
    pub p: usize,
    pub k: usize,
    pub group_size: usize,
    pub design_seed: u64,
    pub trials: usize,
    pub failed_trials: usize,
    pub lasso: SolverSummary,
    pub omp: SolverSummary,
    pub sbl: SolverSummary,
    /// Frequency of first-step mis-selection among non-errored trials.
    pub omp_misselect_rate: f64,
    /// Sign-maximized irrepresentability statistic of the cell's design.
    pub ic_value: f64,
}

/// Aggregate and raw results of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellSummary>,
    pub trials: Vec<TrialReport>,
}

/// Document layout of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
}

/// Runs every cell of the configured grid and aggregates the results.
///
/// Designs are built once per grid entry; trials run in parallel with
/// per-trial seeds derived from `(master_seed, cell index, trial index)`, so
/// results do not depend on the thread schedule. Per-trial errors are
/// recorded in the affected report—with the solvers scored as
/// non-recoveries—without aborting the cell.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut cells = Vec::new();
    let mut trials = Vec::new();
    let mut cell_index = 0u64;
    for params in &config.design_params_grid {
        let design = build_design(params)?;
        let (cell_ic, _) = worst_case_irrepresentable_value(&design, &design.true_support)?;
        for &sigma in &config.sigma_grid {
            let cell_id = format!("c{cell_index:03}");
            let hyper = SblHyper {
                noise_variance: (sigma * sigma).max(NOISELESS_VARIANCE_FLOOR),
                restart_seed: derive_seed(config.master_seed, &[4, cell_index]),
                ..config.solver_settings.sbl.clone()
            };
            let steps = config.solver_settings.omp_steps.unwrap_or(params.k);
            let cell_trials: Vec<TrialReport> = (0..config.trials_per_cell)
                .into_par_iter()
                .map(|trial| {
                    let truth_trial = if config.freeze_truth { 0 } else { trial as u64 };
                    let truth_seed = derive_seed(config.master_seed, &[2, cell_index, truth_trial]);
                    let noise_seed =
                        derive_seed(config.master_seed, &[3, cell_index, trial as u64]);
                    run_trial(
                        &design, config, &hyper, steps, sigma, &cell_id, cell_ic, trial,
                        truth_seed, noise_seed,
                    )
                })
                .collect();
            cells.push(summarize(&cell_id, params, sigma, cell_ic, &cell_trials)?);
            trials.extend(cell_trials);
            cell_index += 1;
        }
    }
    Ok(ExperimentReport { cells, trials })
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    design: &DesignMatrix,
    config: &ExperimentConfig,
    hyper: &SblHyper,
    omp_steps: usize,
    sigma: f64,
    cell_id: &str,
    cell_ic: f64,
    trial: usize,
    truth_seed: u64,
    noise_seed: u64,
) -> TrialReport {
    match try_trial(
        design, config, hyper, omp_steps, sigma, cell_id, trial, truth_seed, noise_seed,
    ) {
        Ok(report) => report,
        Err(err) => {
            let failed = SolverOutcome {
                exact_recovery: false,
                hamming_distance: design.true_support.len(),
                runtime_seconds: 0.0,
            };
            TrialReport {
                cell_id: cell_id.to_string(),
                trial,
                truth_seed,
                noise_seed,
                lasso: failed.clone(),
                omp: failed.clone(),
                sbl: failed,
                omp_first_step_misselection: false,
                lasso_kkt_max: 0.0,
                omp_orthogonality_max: 0.0,
                sbl_objective_monotone: true,
                ic_value: cell_ic,
                error: Some(err.to_string()),
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn try_trial(
    design: &DesignMatrix,
    config: &ExperimentConfig,
    hyper: &SblHyper,
    omp_steps: usize,
    sigma: f64,
    cell_id: &str,
    trial: usize,
    truth_seed: u64,
    noise_seed: u64,
) -> Result<TrialReport> {
    let truth = sample_ground_truth(design, config.beta_min, config.magnitude_max, truth_seed)?;
    let obs = observe(design, &truth, sigma, noise_seed)?;
    let truth_support = &design.true_support;

    let signs: Vec<i8> = truth_support
        .iter()
        .map(|&j| if truth.w_star[j] >= 0.0 { 1 } else { -1 })
        .collect();
    let ic_value = irrepresentable_value(design, truth_support, &signs)?;

    let tick = Instant::now();
    let path = lasso_path(design, &obs, &config.solver_settings.lasso)?;
    let lasso_runtime = tick.elapsed().as_secs_f64();
    let mut lasso_exact = false;
    let mut lasso_hamming = usize::MAX;
    let mut lasso_kkt_max = 0.0f64;
    for point in &path {
        lasso_exact |= point.estimate.exactly_recovers(truth_support);
        lasso_hamming = lasso_hamming.min(point.estimate.hamming_distance(truth_support));
        if let Trace::Lasso(trace) = &point.estimate.trace {
            lasso_kkt_max = lasso_kkt_max.max(trace.kkt_max_violation);
        }
    }
    let lasso = SolverOutcome {
        exact_recovery: lasso_exact,
        hamming_distance: lasso_hamming,
        runtime_seconds: lasso_runtime,
    };

    let tick = Instant::now();
    let omp_estimate = fit_omp(design, &obs, omp_steps)?;
    let omp_runtime = tick.elapsed().as_secs_f64();
    let omp_first_step_misselection = match &omp_estimate.trace {
        Trace::Omp(trace) => trace.first_step_misselection,
        _ => false,
    };
    let residual = &obs.y - &design.columns * &omp_estimate.coefficients;
    let omp_orthogonality_max = omp_estimate
        .support
        .iter()
        .map(|&j| design.columns.column(j).dot(&residual).abs())
        .fold(0.0f64, f64::max);
    let omp = SolverOutcome {
        exact_recovery: omp_estimate.exactly_recovers(truth_support),
        hamming_distance: omp_estimate.hamming_distance(truth_support),
        runtime_seconds: omp_runtime,
    };

    let tick = Instant::now();
    let sbl_estimate = fit_sbl(design, &obs, hyper)?;
    let sbl_runtime = tick.elapsed().as_secs_f64();
    let sbl_objective_monotone = match &sbl_estimate.trace {
        Trace::Sbl(trace) => trace
            .objective_per_iter
            .windows(2)
            .all(|w| w[1] <= w[0] + MONOTONE_SLACK * w[0].abs().max(1.0)),
        _ => true,
    };
    let sbl = SolverOutcome {
        exact_recovery: sbl_estimate.exactly_recovers(truth_support),
        hamming_distance: sbl_estimate.hamming_distance(truth_support),
        runtime_seconds: sbl_runtime,
    };

    Ok(TrialReport {
        cell_id: cell_id.to_string(),
        trial,
        truth_seed,
        noise_seed,
        lasso,
        omp,
        sbl,
        omp_first_step_misselection,
        lasso_kkt_max,
        omp_orthogonality_max,
        sbl_objective_monotone,
        ic_value,
        error: None,
    })
}

/// Aggregates one cell's trial reports into its summary row set.
///
/// Errors with [`Error::EmptyCell`] when `trials` is empty. The mis-selection
/// frequency averages over non-errored trials only (0 when every trial
/// errored).
pub fn summarize(
    cell_id: &str,
    params: &DesignParams,
    sigma: f64,
    ic_value: f64,
    trials: &[TrialReport],
) -> Result<CellSummary> {
    if trials.is_empty() {
        return Err(Error::EmptyCell(cell_id.to_string()));
    }
    let n = trials.len() as f64;
    let solver_summary = |pick: &dyn Fn(&TrialReport) -> &SolverOutcome| {
        let hits = trials.iter().filter(|t| pick(t).exact_recovery).count() as f64;
        let rate = hits / n;
        SolverSummary {
            recovery_rate: rate,
            se: (rate * (1.0 - rate) / n).sqrt(),
            mean_hamming: trials
                .iter()
                .map(|t| pick(t).hamming_distance as f64)
                .sum::<f64>()
                / n,
        }
    };
    let clean: Vec<&TrialReport> = trials.iter().filter(|t| t.error.is_none()).collect();
    let omp_misselect_rate = if clean.is_empty() {
        0.0
    } else {
        clean
            .iter()
            .filter(|t| t.omp_first_step_misselection)
            .count() as f64
            / clean.len() as f64
    };
    Ok(CellSummary {
        cell_id: cell_id.to_string(),
        rho_in: params.rho_in,
        sigma,
        m: params.m,
        p: params.p,
        k: params.k,
        group_size: params.group_size,
        design_seed: params.seed,
        trials: trials.len(),
        failed_trials: trials.len() - clean.len(),
        lasso: solver_summary(&|t: &TrialReport| &t.lasso),
        omp: solver_summary(&|t: &TrialReport| &t.omp),
        sbl: solver_summary(&|t: &TrialReport| &t.sbl),
        omp_misselect_rate,
        ic_value,
    })
}

/// Renders the per-cell, per-solver table as CSV with [`CELLS_CSV_HEADER`].
pub fn cells_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from(CELLS_CSV_HEADER);
    out.push('\n');
    for cell in cells {
        for (solver, summary) in [
            ("lasso", &cell.lasso),
            ("omp", &cell.omp),
            ("sbl", &cell.sbl),
        ] {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.10}",
                cell.cell_id,
                solver,
                cell.rho_in,
                cell.sigma,
                cell.m,
                cell.p,
                cell.k,
                summary.recovery_rate,
                summary.se,
                summary.mean_hamming,
                cell.omp_misselect_rate,
                cell.ic_value,
            );
        }
    }
    out
}

/// Renders `summary.json`: the configuration echoed back plus one summary
/// per cell.
pub fn summary_json(config: &ExperimentConfig, cells: &[CellSummary]) -> Result<String> {
    let doc = SummaryDocument {
        config: config.clone(),
        cells: cells.to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::InfeasibleParams(format!("summary serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Renders the trial log as JSON Lines, one report per line.
pub fn trials_jsonl(trials: &[TrialReport]) -> Result<String> {
    let mut out = String::new();
    for trial in trials {
        let line = serde_json::to_string(trial)
            .map_err(|e| Error::InfeasibleParams(format!("trial serialization failed: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benign_params(seed: u64) -> DesignParams {
        DesignParams {
            m: 40,
            p: 12,
            k: 2,
            group_size: 1,
            rho_in: 0.4,
            rho_out_max: 0.25,
            support_gram_offdiag: 0.0,
            seed,
        }
    }

    fn benign_config() -> ExperimentConfig {
        ExperimentConfig {
            design_params_grid: vec![benign_params(11)],
            sigma_grid: vec![0.0],
            trials_per_cell: 3,
            beta_min: 1.0,
            magnitude_max: 2.0,
            freeze_truth: false,
            solver_settings: SolverSettings::default(),
            master_seed: 99,
        }
    }

    #[test]
    fn noiseless_benign_cell_recovers_everywhere() {
        let report = run_experiment(&benign_config()).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert_eq!(report.trials.len(), 3);
        let cell = &report.cells[0];
        assert_eq!(cell.lasso.recovery_rate, 1.0);
        assert_eq!(cell.omp.recovery_rate, 1.0);
        assert_eq!(cell.sbl.recovery_rate, 1.0);
        assert_eq!(cell.failed_trials, 0);
        assert_eq!(cell.omp_misselect_rate, 0.0);
        assert_eq!(cell.lasso.se, 0.0);
        assert_eq!(cell.lasso.mean_hamming, 0.0);
        for trial in &report.trials {
            assert!(trial.error.is_none());
            assert!(trial.sbl_objective_monotone);
            assert!(trial.lasso_kkt_max.is_finite());
            assert!(trial.omp_orthogonality_max < 1e-8);
            assert!(trial.ic_value > 0.0);
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let config = benign_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(cells_csv(&a.cells), cells_csv(&b.cells));
        assert_eq!(
            trials_jsonl(&a.trials).unwrap(),
            trials_jsonl(&b.trials).unwrap()
        );
        assert_eq!(
            summary_json(&config, &a.cells).unwrap(),
            summary_json(&config, &b.cells).unwrap()
        );
    }

    #[test]
    fn csv_has_pinned_header_and_one_row_per_cell_solver() {
        let mut config = benign_config();
        config.sigma_grid = vec![0.0, 0.05];
        config.trials_per_cell = 1;
        let report = run_experiment(&config).unwrap();
        let csv = cells_csv(&report.cells);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "cell_id,solver,rho_in,sigma,m,p,k,recovery_rate,se,mean_hamming,\
             omp_misselect_rate,ic_value"
        );
        assert_eq!(lines.len(), 1 + 2 * 3);
        for row in &lines[1..] {
            assert_eq!(row.split(',').count(), 12);
        }
        assert!(lines[1].starts_with("c000,lasso,"));
        assert!(lines[4].starts_with("c001,lasso,"));
    }

    #[test]
    fn trial_seeds_vary_unless_truth_is_frozen() {
        let mut config = benign_config();
        let free = run_experiment(&config).unwrap();
        let free_seeds: Vec<u64> = free.trials.iter().map(|t| t.truth_seed).collect();
        assert_eq!(free_seeds.len(), 3);
        assert!(free_seeds.windows(2).all(|w| w[0] != w[1]));

        config.freeze_truth = true;
        let frozen = run_experiment(&config).unwrap();
        let frozen_seeds: Vec<u64> = frozen.trials.iter().map(|t| t.truth_seed).collect();
        assert!(frozen_seeds.windows(2).all(|w| w[0] == w[1]));
        let ic0 = frozen.trials[0].ic_value;
        assert!(frozen.trials.iter().all(|t| t.ic_value == ic0));
        // Noise still varies run to run.
        let noise: Vec<u64> = frozen.trials.iter().map(|t| t.noise_seed).collect();
        assert!(noise.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn summarize_rejects_empty_cells() {
        let err = summarize("c000", &benign_params(1), 0.1, 0.5, &[]).unwrap_err();
        assert!(matches!(err, Error::EmptyCell(_)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = benign_config();
        config.trials_per_cell = 0;
        assert!(run_experiment(&config).is_err());

        let mut config = benign_config();
        config.sigma_grid.clear();
        assert!(run_experiment(&config).is_err());

        let mut config = benign_config();
        config.beta_min = 3.0; // exceeds magnitude_max = 2.0
        assert!(run_experiment(&config).is_err());

        let mut config = benign_config();
        config.design_params_grid.clear();
        assert!(run_experiment(&config).is_err());

        let mut config = benign_config();
        config.solver_settings.omp_steps = Some(0);
        assert!(run_experiment(&config).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = benign_config();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn near_duplicate_cell_shows_omp_misselections() {
        // One tight duplicate pair and sizable noise: the greedy first step
        // should flip in a visible fraction of trials.
        let config = ExperimentConfig {
            design_params_grid: vec![DesignParams {
                m: 60,
                p: 6,
                k: 1,
                group_size: 1,
                rho_in: 0.99,
                rho_out_max: 0.2,
                support_gram_offdiag: 0.0,
                seed: 5,
            }],
            sigma_grid: vec![0.5],
            trials_per_cell: 40,
            beta_min: 1.0,
            magnitude_max: 1.0,
            freeze_truth: false,
            solver_settings: SolverSettings::default(),
            master_seed: 7,
        };
        let report = run_experiment(&config).unwrap();
        let cell = &report.cells[0];
        assert!(
            cell.omp_misselect_rate > 0.05,
            "{}",
            cell.omp_misselect_rate
        );
        // A first-step flip is irreversible for a one-step fit.
        assert!(cell.omp.recovery_rate <= 1.0 - cell.omp_misselect_rate + 1e-12);
        // The duplicate pair pins the irrepresentability statistic at rho_in.
        assert!((cell.ic_value - 0.99).abs() < 1e-8);
    }

    /// Adversarial duplicate-pair cells behave as the theory predicts: the
    /// greedy first-pick error tracks its closed form, the best-over-path
    /// lasso rate stays bounded away from 1, and the Bayesian solver's rate
    /// does not degrade as the noise shrinks.
    #[test]
    fn witness_cells_match_closed_form_and_noise_trend() {
        let params = DesignParams {
            m: 30,
            p: 2,
            k: 1,
            group_size: 1,
            rho_in: 0.99,
            rho_out_max: 0.3,
            support_gram_offdiag: 0.0,
            seed: 33,
        };
        // High-noise cells: the pair is the only candidate set, so the
        // closed-form flip probability applies exactly.
        let config = ExperimentConfig {
            design_params_grid: vec![params.clone()],
            sigma_grid: vec![0.5, 0.3],
            trials_per_cell: 150,
            beta_min: 1.0,
            magnitude_max: 1.0,
            freeze_truth: false,
            solver_settings: SolverSettings::default(),
            master_seed: 99,
        };
        let report = run_experiment(&config).unwrap();
        for cell in &report.cells {
            let q =
                crate::solvers::omp::first_step_flip_probability(1.0, params.rho_in, cell.sigma)
                    .unwrap();
            let se = (q * (1.0 - q) / cell.trials as f64).sqrt();
            assert!(q >= 0.05, "flip probability {q} too small to witness");
            assert!(
                (cell.omp_misselect_rate - q).abs() <= 3.0 * se,
                "cell {}: misselect rate {} vs closed form {q} (se {se})",
                cell.cell_id,
                cell.omp_misselect_rate,
            );
            assert!(
                cell.lasso.recovery_rate <= 0.95,
                "lasso best-path rate {} should stay bounded away from 1",
                cell.lasso.recovery_rate,
            );
        }
        // Noise trend, on noise levels small enough that the penalty admits
        // unit-magnitude coefficients at all (inclusion needs roughly
        // beta/sigma > 6 under the default penalty scale).
        let config = ExperimentConfig {
            sigma_grid: vec![0.15, 0.05],
            master_seed: 100,
            ..config
        };
        let report = run_experiment(&config).unwrap();
        let (noisier, cleaner) = (&report.cells[0], &report.cells[1]);
        assert!(
            cleaner.sbl.recovery_rate
                >= noisier.sbl.recovery_rate - 2.0 * (cleaner.sbl.se + noisier.sbl.se),
            "sbl rate degraded as noise shrank: {} at sigma={} vs {} at sigma={}",
            cleaner.sbl.recovery_rate,
            cleaner.sigma,
            noisier.sbl.recovery_rate,
            noisier.sigma,
        );
        assert!(
            cleaner.sbl.recovery_rate > 0.5,
            "sbl should mostly recover the pair at sigma=0.05, got {}",
            cleaner.sbl.recovery_rate,
        );
    }
}
