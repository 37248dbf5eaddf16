//! Experiment orchestration: configuration, seeded Monte Carlo trials,
//! parameter sweeps, convergence traces, and CSV/plot-script emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::biht::{biht_recover, BihtConfig};
use crate::dictlearn::{learn, recover_phi, reconstruct_signals, Dictionary, LearnConfig};
use crate::error::{Error, Result};
use crate::kernels::IndicatorVariant;
use crate::metrics::{average_nmse, nmse, sign_consistency, TrialResult};
use crate::model::{synthesize, SignMeasurements, SparseCodes};
use crate::rng::RngStream;

/// Which learning variants an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantSelection {
    L1,
    L2,
    Both,
}

impl VariantSelection {
    pub fn list(&self) -> Vec<IndicatorVariant> {
        match self {
            VariantSelection::L1 => vec![IndicatorVariant::L1],
            VariantSelection::L2 => vec![IndicatorVariant::L2],
            VariantSelection::Both => vec![IndicatorVariant::L1, IndicatorVariant::L2],
        }
    }
}

impl FromStr for VariantSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(VariantSelection::L1),
            "l2" => Ok(VariantSelection::L2),
            "both" => Ok(VariantSelection::Both),
            other => Err(format!("unknown variant `{other}` (expected l1, l2 or both)")),
        }
    }
}

/// All scalar parameters of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Signal dimension m.
    pub m: usize,
    /// Sign-measurement count n.
    pub n: usize,
    /// Atom count K.
    pub k: usize,
    /// Training-signal count T.
    pub t: usize,
    /// Bernoulli-Gaussian activity probability.
    pub p: f64,
    /// Std of active coefficients.
    pub sigma_r: f64,
    /// Measurement-noise std.
    pub sigma_n: f64,
    /// Steepest-descent step size.
    pub mu: f64,
    pub outer_iterations: usize,
    pub biht_iterations: usize,
    pub tau: f64,
    /// Hard-threshold level; `None` derives max(2, ceil(3 p K)).
    pub sparsity: Option<usize>,
    /// Std of the Gaussian perturbation applied to the oracle dictionary
    /// for initialization; 0 starts from the oracle itself.
    pub init_perturbation: f64,
    pub mc_trials: usize,
    pub seed: u64,
    pub variant: VariantSelection,
    pub baseline: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 50,
            n: 100,
            k: 100,
            t: 100,
            p: 0.01,
            sigma_r: 1.0,
            sigma_n: 0.01,
            mu: 1.0,
            outer_iterations: 40,
            biht_iterations: 20,
            tau: 1.0,
            sparsity: None,
            init_perturbation: 0.1,
            mc_trials: 50,
            seed: 0,
            variant: VariantSelection::Both,
            baseline: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m", self.m),
            ("n", self.n),
            ("k", self.k),
            ("t", self.t),
            ("outer_iterations", self.outer_iterations),
            ("biht_iterations", self.biht_iterations),
            ("mc_trials", self.mc_trials),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "count must be at least 1"));
            }
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::invalid("p", format!("must be in (0,1), got {}", self.p)));
        }
        if !(self.sigma_r > 0.0) {
            return Err(Error::invalid("sigma_r", "must be positive"));
        }
        if !(self.sigma_n >= 0.0) {
            return Err(Error::invalid("sigma_n", "must be nonnegative"));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::invalid("mu", "must be nonnegative"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if !(self.init_perturbation >= 0.0) {
            return Err(Error::invalid("init_perturbation", "must be nonnegative"));
        }
        let ks = self.effective_sparsity();
        if ks == 0 || ks > self.k {
            return Err(Error::invalid(
                "sparsity",
                format!("must be in 1..={}, got {ks}", self.k),
            ));
        }
        Ok(())
    }

    /// Hard-threshold level K_s; the default covers the Bernoulli-Gaussian
    /// tail at the configured activity.
    pub fn effective_sparsity(&self) -> usize {
        self.sparsity
            .unwrap_or_else(|| 2usize.max((3.0 * self.p * self.k as f64).ceil() as usize))
    }

    pub fn biht_config(&self) -> BihtConfig {
        BihtConfig {
            iterations: self.biht_iterations,
            tau: self.tau,
            sparsity: self.effective_sparsity(),
            normalize_output: true,
        }
    }

    pub fn learn_config(&self, variant: IndicatorVariant) -> LearnConfig {
        LearnConfig {
            variant,
            mu: self.mu,
            outer_iterations: self.outer_iterations,
            inner_steps: 1,
            biht: self.biht_config(),
        }
    }

    /// Load `key = value` lines (with `#` comments) over the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.merge_file(path)?;
        Ok(cfg)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                reason: format!("line {}: expected key=value, got `{raw}`", lineno + 1),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", lineno + 1),
            })?;
        }
        Ok(())
    }

    /// Set one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("bad value `{value}` for `{key}`"))
        }
        match key {
            "m" => self.m = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "t" => self.t = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "sigma_r" => self.sigma_r = parse(key, value)?,
            "sigma_n" => self.sigma_n = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "outer_iterations" => self.outer_iterations = parse(key, value)?,
            "biht_iterations" => self.biht_iterations = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "sparsity" => self.sparsity = Some(parse(key, value)?),
            "init_perturbation" => self.init_perturbation = parse(key, value)?,
            "mc_trials" => self.mc_trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "variant" => self.variant = value.parse()?,
            "baseline" => self.baseline = parse(key, value)?,
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }
}

/// Parameter swept by `run_sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    TrainingSignals,
    Measurements,
    StepSize,
}

impl SweepParameter {
    pub fn label(&self) -> &'static str {
        match self {
            SweepParameter::TrainingSignals => "T",
            SweepParameter::Measurements => "n",
            SweepParameter::StepSize => "mu",
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        match self {
            SweepParameter::TrainingSignals | SweepParameter::Measurements => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::invalid(
                        "sweep",
                        format!("{} must be a positive integer, got {value}", self.label()),
                    ));
                }
                if *self == SweepParameter::TrainingSignals {
                    cfg.t = value as usize;
                } else {
                    cfg.n = value as usize;
                }
            }
            SweepParameter::StepSize => {
                if !(value >= 0.0) {
                    return Err(Error::invalid("sweep", "mu must be nonnegative"));
                }
                cfg.mu = value;
            }
        }
        Ok(())
    }
}

/// A sweep over one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep", "value list is empty"));
        }
        if !self.values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("sweep", "values must be strictly increasing"));
        }
        Ok(())
    }
}

/// Label used in CSV rows.
pub fn method_label(variant: Option<IndicatorVariant>) -> &'static str {
    match variant {
        None => "no-dl",
        Some(IndicatorVariant::L1) => "dl-biht-l1",
        Some(IndicatorVariant::L2) => "dl-biht-l2",
    }
}

/// Paired results for one synthetic instance: every method sees the same
/// model and the same initial dictionary.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub baseline: Option<TrialResult>,
    pub learned: Vec<(IndicatorVariant, TrialResult)>,
}

fn recover_all(y: &SignMeasurements, d: &Dictionary, cfg: &BihtConfig) -> Result<SparseCodes> {
    let codes: Vec<DVector<f64>> = (0..y.ncols())
        .into_par_iter()
        .map(|i| {
            let yi = DVector::from_iterator(y.nrows(), y.column(i).iter().copied());
            biht_recover(&yi, &d.data, cfg).map(|r| r.code)
        })
        .collect::<Result<_>>()?;
    let mut s = DMatrix::zeros(d.atoms(), y.ncols());
    for (i, code) in codes.iter().enumerate() {
        s.column_mut(i).copy_from(code);
    }
    Ok(SparseCodes::new(s))
}

/// Run one seeded trial: synthesize, learn each requested variant from a
/// perturbed oracle initialization, optionally run the no-learning
/// baseline, and score everything against the true signals.
pub fn run_trial(cfg: &ExperimentConfig, rng: RngStream) -> Result<TrialOutcome> {
    cfg.validate()?;
    // Two sub-streams per trial: one for the model, one for the
    // initialization perturbation. The doubling keeps streams of
    // distinct trials disjoint.
    let synth_rng = RngStream::with_stream(rng.seed, rng.stream.wrapping_mul(2));
    let init_rng = RngStream::with_stream(rng.seed, rng.stream.wrapping_mul(2).wrapping_add(1));

    let inst = synthesize(cfg, synth_rng)?;
    let d_init = if cfg.init_perturbation > 0.0 {
        let normal = Normal::new(0.0, cfg.init_perturbation).expect("validated");
        let mut r = init_rng.rng();
        Dictionary::new(&inst.d + DMatrix::from_fn(cfg.n, cfg.k, |_, _| normal.sample(&mut r)))
    } else {
        Dictionary::new(inst.d.clone())
    };

    let biht_cfg = cfg.biht_config();
    let baseline = if cfg.baseline {
        let start = Instant::now();
        let s_hat = recover_all(&inst.y, &d_init, &biht_cfg)?;
        let phi_hat = recover_phi(&inst.a, &d_init)?;
        let x_hat = reconstruct_signals(&phi_hat, &s_hat)?;
        Some(TrialResult {
            nmse_db: nmse(&inst.x, &x_hat)?,
            cost_trace: Vec::new(),
            sign_consistency: sign_consistency(&inst.y, &d_init, &s_hat)?,
            wall_time: start.elapsed().as_secs_f64(),
        })
    } else {
        None
    };

    let mut learned = Vec::new();
    for variant in cfg.variant.list() {
        let start = Instant::now();
        let state = learn(&inst.y, d_init.clone(), &cfg.learn_config(variant))?;
        let phi_hat = recover_phi(&inst.a, &state.dictionary)?;
        let x_hat = reconstruct_signals(&phi_hat, &state.s_hat)?;
        learned.push((
            variant,
            TrialResult {
                nmse_db: nmse(&inst.x, &x_hat)?,
                sign_consistency: sign_consistency(&inst.y, &state.dictionary, &state.s_hat)?,
                cost_trace: state.cost_history,
                wall_time: start.elapsed().as_secs_f64(),
            },
        ));
    }

    Ok(TrialOutcome { baseline, learned })
}

/// One aggregated row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub method: &'static str,
    pub nmse_db: f64,
    pub trials_ok: usize,
}

/// Run `mc_trials` independent trials per sweep value and aggregate.
/// Trials are parallel; streams are keyed by (value index, trial index)
/// so the table does not depend on scheduling.
pub fn run_sweep(cfg: &ExperimentConfig, sweep: &SweepSpec) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    sweep.validate()?;
    let mut rows = Vec::new();
    for (value_idx, &value) in sweep.values.iter().enumerate() {
        let mut point_cfg = cfg.clone();
        sweep.parameter.apply(&mut point_cfg, value)?;
        point_cfg.validate()?;

        let outcomes: Vec<Result<TrialOutcome>> = (0..point_cfg.mc_trials)
            .into_par_iter()
            .map(|trial| {
                let stream = ((value_idx as u64) << 32) | trial as u64;
                run_trial(&point_cfg, RngStream::with_stream(point_cfg.seed, stream))
            })
            .collect();
        let ok: Vec<&TrialOutcome> = outcomes.iter().filter_map(|r| r.as_ref().ok()).collect();
        let failed = outcomes.len() - ok.len();
        if ok.len() * 5 < point_cfg.mc_trials * 4 {
            return Err(Error::TooManyFailures {
                failed,
                total: point_cfg.mc_trials,
            });
        }

        if point_cfg.baseline {
            let results: Vec<TrialResult> = ok
                .iter()
                .filter_map(|o| o.baseline.clone())
                .collect();
            let avg = average_nmse(&results)?;
            rows.push(SweepRow {
                value,
                method: method_label(None),
                nmse_db: avg.mean_db,
                trials_ok: ok.len(),
            });
        }
        for variant in point_cfg.variant.list() {
            let results: Vec<TrialResult> = ok
                .iter()
                .filter_map(|o| {
                    o.learned
                        .iter()
                        .find(|(v, _)| *v == variant)
                        .map(|(_, r)| r.clone())
                })
                .collect();
            let avg = average_nmse(&results)?;
            rows.push(SweepRow {
                value,
                method: method_label(Some(variant)),
                nmse_db: avg.mean_db,
                trials_ok: ok.len(),
            });
        }
    }
    Ok(rows)
}

/// Cost trace of one (mu, variant) convergence run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub mu: f64,
    pub variant: IndicatorVariant,
    pub costs: Vec<f64>,
    /// True when the run hit a NaN and the trace is truncated.
    pub diverged: bool,
}

/// Default step sizes examined by the convergence experiment.
pub const DEFAULT_MU_VALUES: [f64; 3] = [0.1, 1.0, 10.0];

/// Record the cost trace of every (mu, variant) pair on one seeded
/// instance shared across all runs.
pub fn run_convergence(cfg: &ExperimentConfig, mu_values: &[f64]) -> Result<Vec<ConvergenceTrace>> {
    cfg.validate()?;
    if mu_values.is_empty() {
        return Err(Error::invalid("mu_values", "must be nonempty"));
    }
    let inst = synthesize(cfg, RngStream::with_stream(cfg.seed, 0))?;
    let d_init = if cfg.init_perturbation > 0.0 {
        let normal = Normal::new(0.0, cfg.init_perturbation).expect("validated");
        let mut r = RngStream::with_stream(cfg.seed, 1).rng();
        Dictionary::new(&inst.d + DMatrix::from_fn(cfg.n, cfg.k, |_, _| normal.sample(&mut r)))
    } else {
        Dictionary::new(inst.d.clone())
    };

    let mut traces = Vec::new();
    for &mu in mu_values {
        for variant in cfg.variant.list() {
            let mut learn_cfg = cfg.learn_config(variant);
            learn_cfg.mu = mu;
            let trace = match learn(&inst.y, d_init.clone(), &learn_cfg) {
                Ok(state) => ConvergenceTrace {
                    mu,
                    variant,
                    costs: state.cost_history,
                    diverged: false,
                },
                Err(Error::NumericDivergence { iteration }) => {
                    // Re-run the finite prefix to recover the partial trace.
                    let costs = if iteration == 0 {
                        Vec::new()
                    } else {
                        learn_cfg.outer_iterations = iteration;
                        learn(&inst.y, d_init.clone(), &learn_cfg)?.cost_history
                    };
                    ConvergenceTrace {
                        mu,
                        variant,
                        costs,
                        diverged: true,
                    }
                }
                Err(e) => return Err(e),
            };
            traces.push(trace);
        }
    }
    Ok(traces)
}

fn fmt_value(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:.9e}")
    }
}

fn write_file(path: &Path, content: &str) -> Result<PathBuf> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// `fig1_cost.csv` plus a self-contained plot script.
pub fn write_convergence_outputs(out_dir: &Path, traces: &[ConvergenceTrace]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut csv = String::from("iteration,mu,variant,cost\n");
    for trace in traces {
        for (i, cost) in trace.costs.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                i + 1,
                fmt_value(trace.mu),
                method_label(Some(trace.variant)),
                fmt_value(*cost)
            );
        }
    }
    Ok(vec![
        write_file(&out_dir.join("fig1_cost.csv"), &csv)?,
        write_file(&out_dir.join("fig1_plot.py"), PLOT_CONVERGENCE)?,
    ])
}

/// Which NMSE figure a sweep feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepFigure {
    /// NMSE versus training-signal count T.
    TrainingSignals,
    /// NMSE versus measurement count n.
    Measurements,
}

impl SweepFigure {
    fn csv_name(&self) -> &'static str {
        match self {
            SweepFigure::TrainingSignals => "fig2_nmse.csv",
            SweepFigure::Measurements => "fig3_nmse.csv",
        }
    }

    fn script_name(&self) -> &'static str {
        match self {
            SweepFigure::TrainingSignals => "fig2_plot.py",
            SweepFigure::Measurements => "fig3_plot.py",
        }
    }

    fn column(&self) -> &'static str {
        match self {
            SweepFigure::TrainingSignals => "T",
            SweepFigure::Measurements => "n",
        }
    }
}

/// `fig{2,3}_nmse.csv` plus a self-contained plot script.
pub fn write_sweep_outputs(
    out_dir: &Path,
    figure: SweepFigure,
    rows: &[SweepRow],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut csv = format!("{},variant,nmse_db,trials_ok\n", figure.column());
    for row in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_value(row.value),
            row.method,
            fmt_value(row.nmse_db),
            row.trials_ok
        );
    }
    let script = PLOT_SWEEP
        .replace("__CSV__", figure.csv_name())
        .replace("__XCOL__", figure.column());
    Ok(vec![
        write_file(&out_dir.join(figure.csv_name()), &csv)?,
        write_file(&out_dir.join(figure.script_name()), &script)?,
    ])
}

/// `single_trial.csv` plus per-variant cost traces.
pub fn write_single_outputs(out_dir: &Path, outcome: &TrialOutcome) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut csv = String::from("variant,nmse_db,sign_consistency\n");
    if let Some(baseline) = &outcome.baseline {
        let _ = writeln!(
            csv,
            "{},{},{}",
            method_label(None),
            fmt_value(baseline.nmse_db),
            fmt_value(baseline.sign_consistency)
        );
    }
    let mut files = Vec::new();
    for (variant, result) in &outcome.learned {
        let _ = writeln!(
            csv,
            "{},{},{}",
            method_label(Some(*variant)),
            fmt_value(result.nmse_db),
            fmt_value(result.sign_consistency)
        );
        let trace_path = out_dir.join(format!("cost_{}.txt", variant.label()));
        crate::io::save_trace(&trace_path, &result.cost_trace)?;
        files.push(trace_path);
    }
    files.insert(0, write_file(&out_dir.join("single_trial.csv"), &csv)?);
    Ok(files)
}

const PLOT_CONVERGENCE: &str = r#"#!/usr/bin/env python3
"""Render the cost-versus-iteration figure from fig1_cost.csv."""
import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
series = defaultdict(list)
with open(os.path.join(here, "fig1_cost.csv")) as fh:
    for row in csv.DictReader(fh):
        key = (float(row["mu"]), row["variant"])
        series[key].append((int(row["iteration"]), float(row["cost"])))

plt.figure(figsize=(7, 5))
for (mu, variant), points in sorted(series.items()):
    points.sort()
    plt.semilogy([p[0] for p in points], [p[1] for p in points],
                 label=f"{variant}, mu={mu:g}")
plt.xlabel("iteration")
plt.ylabel("cost J(D)")
plt.legend()
plt.grid(True, which="both", alpha=0.3)
plt.tight_layout()
plt.savefig(os.path.join(here, "fig1_cost.png"), dpi=150)
print("wrote fig1_cost.png")
"#;

const PLOT_SWEEP: &str = r#"#!/usr/bin/env python3
"""Render the NMSE figure from __CSV__."""
import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
series = defaultdict(list)
with open(os.path.join(here, "__CSV__")) as fh:
    for row in csv.DictReader(fh):
        series[row["variant"]].append((float(row["__XCOL__"]), float(row["nmse_db"])))

plt.figure(figsize=(7, 5))
for variant, points in sorted(series.items()):
    points.sort()
    plt.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=variant)
plt.xlabel("__XCOL__")
plt.ylabel("NMSE (dB)")
plt.legend()
plt.grid(True, alpha=0.3)
plt.tight_layout()
out = "__CSV__".replace(".csv", ".png")
plt.savefig(os.path.join(here, out), dpi=150)
print("wrote " + out)
"#;
