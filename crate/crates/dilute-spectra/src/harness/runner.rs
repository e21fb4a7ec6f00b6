//! Executes a configured campaign across its grid cells and persists the
//! records.
//!
//! Every mode emits rows in one flat schema (one row per cell per metric),
//! so the CSV is plot-ready without custom tooling. Timing lives only in
//! the JSON summary: the CSV is byte-identical across reruns of the same
//! (config, master_seed).

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng as _;
use serde::Serialize;

use crate::concentration::{
    small_ball_fixed_vector, tail_s1, tail_sn, verify_lemma_concentr,
    verify_lemma_concsingle, verify_tensorization, TailRun,
};
use crate::error::{Error, Result};
use crate::geometry::{build_net, sample_incompressible, CompressibilityParams, NetTarget, SphereVector};
use crate::ladder::{build_schedule, terminal_constants};
use crate::model::{
    pipeline_constants, truncate_center_rescale, truncation_mean_norm_bound, SparseSample,
};
use crate::rng::{mix, rng_from_seed, stream};
use crate::spectral::{
    dense_svd_oracle, largest_sv_lanczos, row_norm_moment_check,
    seginer_sandwich_check, DENSE_GUARD,
};
use crate::stats::median;

use super::config::{CellSpec, ExperimentConfig, Mode};

/// One CSV/JSON record: a single metric of a single cell.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Record {
    pub mode: String,
    pub name: String,
    pub cell_index: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub p: f64,
    pub np: f64,
    pub cell_seed: u64,
    pub trials: usize,
    pub metric: String,
    pub value: f64,
    pub hits: Option<usize>,
    pub p_hat: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub threshold: Option<f64>,
    pub pass: Option<bool>,
    pub censored: Option<bool>,
    pub detail: String,
}

/// CSV column order, documented in `--help`.
pub const CSV_COLUMNS: &str = "mode,name,cell_index,n_rows,n_cols,p,np,cell_seed,trials,metric,\
                               value,hits,p_hat,ci_lower,ci_upper,threshold,pass,censored,detail";

#[derive(Debug, Clone, Serialize)]
pub struct CellTiming {
    pub cell_index: usize,
    pub elapsed_ms: u128,
}

/// Full output of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub config_digest: String,
    pub tool_version: String,
    pub name: String,
    pub mode: String,
    pub partial: bool,
    pub warnings: Vec<String>,
    pub records: Vec<Record>,
    pub timing: Vec<CellTiming>,
    pub total_ms: u128,
}

impl RunResult {
    pub fn failed_checks(&self) -> usize {
        self.records.iter().filter(|r| r.pass == Some(false)).count()
    }
}

struct RecordBuilder<'a> {
    mode: &'a str,
    name: &'a str,
    cell: CellSpec,
    trials: usize,
}

impl RecordBuilder<'_> {
    fn metric(&self, metric: &str, value: f64) -> Record {
        Record {
            mode: self.mode.to_string(),
            name: self.name.to_string(),
            cell_index: self.cell.index,
            n_rows: self.cell.n_rows,
            n_cols: self.cell.n_cols,
            p: self.cell.p,
            np: self.cell.n_rows as f64 * self.cell.p,
            cell_seed: self.cell.seed,
            trials: self.trials,
            metric: metric.to_string(),
            value,
            hits: None,
            p_hat: None,
            ci_lower: None,
            ci_upper: None,
            threshold: None,
            pass: None,
            censored: None,
            detail: String::new(),
        }
    }

    fn check(&self, metric: &str, value: f64, pass: bool, detail: &str) -> Record {
        let mut r = self.metric(metric, value);
        r.pass = Some(pass);
        r.detail = detail.to_string();
        r
    }

    fn tail(&self, metric: &str, run: &TailRun) -> Record {
        let mut r = self.metric(metric, run.tail.p_hat);
        r.hits = Some(run.tail.hits);
        r.p_hat = Some(run.tail.p_hat);
        r.ci_lower = Some(run.tail.ci.lower);
        r.ci_upper = Some(run.tail.ci.upper);
        r.threshold = Some(run.tail.threshold);
        r
    }

    fn error(&self, err: &Error) -> Record {
        let mut r = self.metric("error", f64::NAN);
        r.pass = Some(false);
        r.detail = err.to_string();
        r
    }

    fn skipped(&self, metric: &str, reason: &str) -> Record {
        let mut r = self.metric(metric, f64::NAN);
        r.censored = Some(true);
        r.detail = reason.to_string();
        r
    }
}

/// Execute the campaign; per-cell failures are recorded and the run
/// continues with `partial` set.
pub fn run(config: &ExperimentConfig) -> Result<RunResult> {
    let (cells, warnings) = config.cells()?;
    let start = Instant::now();
    let mut records = Vec::new();
    let mut timing = Vec::new();
    let mut partial = false;

    for cell in &cells {
        let cell_start = Instant::now();
        let rb = RecordBuilder {
            mode: config.mode.as_str(),
            name: &config.name,
            cell: cell.clone(),
            trials: config.trials,
        };
        match run_cell(config, cell, &rb) {
            Ok(mut rows) => records.append(&mut rows),
            Err(err) => {
                partial = true;
                records.push(rb.error(&err));
            }
        }
        timing.push(CellTiming { cell_index: cell.index, elapsed_ms: cell_start.elapsed().as_millis() });
    }

    partial = partial || records.iter().any(|r| r.pass == Some(false));
    let result = RunResult {
        config_digest: config.digest(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        name: config.name.clone(),
        mode: config.mode.as_str().to_string(),
        partial,
        warnings,
        records,
        timing,
        total_ms: start.elapsed().as_millis(),
    };
    persist(config, &result)?;
    Ok(result)
}

fn run_cell(config: &ExperimentConfig, cell: &CellSpec, rb: &RecordBuilder) -> Result<Vec<Record>> {
    match config.mode {
        Mode::Sample => sample_cell(config, cell, rb),
        Mode::Spectrum => spectrum_cell(config, cell, rb),
        Mode::Ladder => ladder_cell(config, cell, rb),
        Mode::TailS1 => {
            let params = config.cell_params(cell)?;
            let run = tail_s1(&params, config.thresholds.k, config.trials, cell.seed)?;
            let mut rows = vec![rb.tail("s1_tail", &run)];
            rows.push(rb.metric("s1_over_sqrt_np_median", median(&run.normalized)));
            rows.push(rb.metric("nonconverged", run.nonconverged as f64));
            Ok(rows)
        }
        Mode::TailSn => {
            let params = config.cell_params(cell)?;
            let run = tail_sn(&params, config.thresholds.tau, config.trials, cell.seed)?;
            let mut rows = vec![rb.tail("sn_tail", &run)];
            rows.push(rb.metric("sn_over_sqrt_np_median", median(&run.normalized)));
            Ok(rows)
        }
        Mode::Concentration => concentration_cell(config, cell, rb),
        Mode::VerifyAll => verify_all_cell(config, cell, rb),
    }
}

fn sample_cell(config: &ExperimentConfig, cell: &CellSpec, rb: &RecordBuilder) -> Result<Vec<Record>> {
    let params = config.cell_params(cell)?;
    let mut rows = Vec::new();
    let mut nnz_total = 0usize;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut clip_total = 0.0;
    let pipeline = params.dist().delta() > 0.0;
    for t in 0..config.trials as u64 {
        let sample = SparseSample::sample(&params, mix(cell.seed, mix(stream::TRIAL, t)));
        nnz_total += sample.nnz();
        if pipeline {
            let (processed, report) = truncate_center_rescale(&sample)?;
            clip_total += report.frac_entries_clipped;
            for row in processed.rows() {
                for &(_, v) in row {
                    sum += v;
                    sumsq += v * v;
                }
            }
        } else {
            for row in sample.rows() {
                for &(_, v) in row {
                    sum += v;
                    sumsq += v * v;
                }
            }
        }
    }
    let expected = params.np() * params.n_cols() as f64;
    rows.push(rb.metric("nnz_mean", nnz_total as f64 / config.trials as f64));
    rows.push(rb.metric("nnz_expected", expected));
    let k = nnz_total as f64;
    let mean = sum / k;
    rows.push(rb.metric("entry_mean", mean));
    rows.push(rb.metric("entry_var", sumsq / k - mean * mean));
    if pipeline {
        let consts = pipeline_constants(&params)?;
        rows.push(rb.metric("trunc_level", consts.level));
        rows.push(rb.metric("sigma_n", consts.sigma_n));
        rows.push(rb.metric("mean_truncated", consts.mean_truncated));
        rows.push(rb.metric("clip_frac_mean", clip_total / config.trials as f64));
        let norm_bound = truncation_mean_norm_bound(&params);
        rows.push(rb.metric("mean_norm", norm_bound));
        rows.push(rb.metric(
            "mean_norm_envelope_ratio",
            norm_bound * params.np().powf(0.5 + params.kappa()) * params.trunc_a().powi(3),
        ));
    }
    Ok(rows)
}

fn spectrum_cell(config: &ExperimentConfig, cell: &CellSpec, rb: &RecordBuilder) -> Result<Vec<Record>> {
    let params = config.cell_params(cell)?;
    let scale = params.np().sqrt();
    let dense_ok = cell.n_rows * cell.n_cols <= DENSE_GUARD;
    let mut rows = Vec::new();
    if dense_ok {
        let summaries: Vec<_> = (0..config.trials as u64)
            .map(|t| {
                let sample = SparseSample::sample(&params, mix(cell.seed, mix(stream::TRIAL, t)));
                dense_svd_oracle(&sample)
            })
            .collect::<Result<_>>()?;
        let s1: Vec<f64> = summaries.iter().map(|s| s.s1 / scale).collect();
        let sn: Vec<f64> = summaries.iter().map(|s| s.sn.unwrap() / scale).collect();
        rows.push(rb.metric("s1_over_sqrt_np_median", median(&s1)));
        rows.push(rb.metric("sn_over_sqrt_np_median", median(&sn)));
        if summaries.len() >= 30 {
            let report = seginer_sandwich_check(&summaries, 10.0)?;
            rows.push(rb.check(
                "seginer_lower_violations",
                report.lower_violations as f64,
                report.lower_violations == 0,
                "max(row,col) norm <= s1",
            ));
            rows.push(rb.check(
                "seginer_ratio",
                report.ratio,
                report.pass,
                "mean(s1)/mean(max norm) in [1, 10]",
            ));
        }
    } else {
        let s1: Vec<f64> = (0..config.trials as u64)
            .map(|t| {
                let sample = SparseSample::sample(&params, mix(cell.seed, mix(stream::TRIAL, t)));
                largest_sv_lanczos(&sample, 1e-8, 600).map(|s| s.s1 / scale)
            })
            .collect::<Result<_>>()?;
        rows.push(rb.metric("s1_over_sqrt_np_median", median(&s1)));
    }
    Ok(rows)
}

fn ladder_cell(config: &ExperimentConfig, cell: &CellSpec, rb: &RecordBuilder) -> Result<Vec<Record>> {
    let schedule = build_schedule(cell.n_rows, cell.p, config.thresholds.delta0)?;
    let mut rows = Vec::new();
    rows.push(rb.metric("levels", schedule.levels as f64));
    rows.push(rb.check(
        "certificate",
        schedule.levels as f64,
        schedule.certificate_holds(),
        "r^(L-1) <= 1/p <= r^L",
    ));
    for v in 0..=schedule.levels {
        let mut r = rb.metric("p_nu", schedule.p_seq[v]);
        r.detail = format!("nu={v}");
        rows.push(r);
        let mut r = rb.metric("delta_nu", schedule.delta_seq[v]);
        r.detail = format!("nu={v}");
        rows.push(r);
        let mut r = rb.metric("p_hat_nu", schedule.p_hat_seq[v]);
        r.detail = format!("nu={v}");
        rows.push(r);
        let mut r = rb.metric("delta_hat_nu", schedule.delta_hat_seq[v]);
        r.detail = format!("nu={v}");
        rows.push(r);
    }
    let (g0, g1) = terminal_constants(&schedule);
    rows.push(rb.metric("gamma0", g0));
    rows.push(rb.metric("gamma1", g1));
    Ok(rows)
}

fn concentration_cell(
    config: &ExperimentConfig,
    cell: &CellSpec,
    rb: &RecordBuilder,
) -> Result<Vec<Record>> {
    let params = config.cell_params(cell)?;
    let th = &config.thresholds;
    let mut rows = Vec::new();

    // single-entry concentration bound
    let trials = config.trials.max(10_000);
    let report = verify_lemma_concsingle(params.dist(), cell.p, trials, mix(cell.seed, 1))?;
    rows.push(rb.check(
        "concsingle_levy",
        report.levy.value,
        report.pass,
        &format!("L(xi X/sqrt p, 1/2) <= 1 - p/(8 mu4) = {:.6}", report.bound),
    ));

    // incompressible row functional at the terminal ladder level
    match build_schedule(cell.n_rows, cell.p, th.delta0) {
        Ok(schedule) if schedule.levels >= 1 => {
            match verify_lemma_concentr(
                &params,
                &schedule,
                schedule.levels,
                th.rho,
                config.trials.max(2000),
                mix(cell.seed, 2),
            ) {
                Ok(c) => {
                    let mut r = rb.check(
                        "concentr_gap",
                        c.gap,
                        c.ci_excludes_zero,
                        &format!("fitted_a={:.4} at nu=L={}", c.fitted_a, c.nu),
                    );
                    r.threshold = Some(c.rho.powi(4) * c.p_nu);
                    rows.push(r);
                }
                Err(err) => rows.push(rb.skipped("concentr_gap", &err.to_string())),
            }
        }
        Ok(_) => rows.push(rb.skipped("concentr_gap", "ladder terminates at L = 0")),
        Err(err) => rows.push(rb.skipped("concentr_gap", &err.to_string())),
    }

    // small-ball at a fixed incompressible direction
    let comp = CompressibilityParams::new(th.delta0.min(0.5), th.rho)?;
    let x = sample_incompressible(params.n_cols(), &comp, mix(cell.seed, 3), 500)?;
    let est = small_ball_fixed_vector(&params, &x, th.tau, config.trials.max(1000), mix(cell.seed, 4))?;
    let run = TailRun { tail: est, normalized: Vec::new(), nonconverged: 0 };
    rows.push(rb.tail("small_ball_p_hat", &run));
    Ok(rows)
}

/// Smoke-scale pass over every lemma check. Heavyweight pieces run on the
/// cell only when its guards allow; skipped work is recorded as censored.
fn verify_all_cell(
    config: &ExperimentConfig,
    cell: &CellSpec,
    rb: &RecordBuilder,
) -> Result<Vec<Record>> {
    let params = config.cell_params(cell)?;
    let th = &config.thresholds;
    let trials = config.trials;
    let mut rows = Vec::new();

    // ladder certificates
    match build_schedule(cell.n_rows, cell.p, th.delta0) {
        Ok(schedule) => {
            rows.push(rb.check(
                "ladder_certificate",
                schedule.levels as f64,
                schedule.certificate_holds(),
                "two-sided L display",
            ));
            let dominated = (0..=schedule.levels).all(|v| {
                schedule.p_seq[v] >= schedule.p_hat_seq[v] * (1.0 - 1e-12)
                    && schedule.delta_seq[v] >= schedule.delta_hat_seq[v] * (1.0 - 1e-12)
                    && schedule.p_seq[v] >= cell.p * (1.0 - 1e-12)
            });
            rows.push(rb.check("ladder_domination", schedule.gamma0, dominated, "p >= p_hat, delta >= delta_hat, floor"));
        }
        Err(err) => rows.push(rb.skipped("ladder_certificate", &err.to_string())),
    }

    // norm sandwich + deterministic inequalities at desk scale
    let desk = cell.n_rows * cell.n_cols <= DENSE_GUARD / 8;
    if desk {
        let count = trials.clamp(30, 100);
        let summaries: Vec<_> = (0..count as u64)
            .map(|t| {
                let s = SparseSample::sample(&params, mix(cell.seed, mix(stream::TRIAL, t)));
                dense_svd_oracle(&s)
            })
            .collect::<Result<_>>()?;
        let seginer = seginer_sandwich_check(&summaries, 10.0)?;
        rows.push(rb.check(
            "seginer_lower_violations",
            seginer.lower_violations as f64,
            seginer.lower_violations == 0,
            "deterministic sandwich lower half",
        ));
        rows.push(rb.check("seginer_ratio", seginer.ratio, seginer.pass, "ratio in [1, 10]"));

        // ||X x|| within [sn, s1] on random directions
        let sample = SparseSample::sample(&params, mix(cell.seed, 11));
        let summary = dense_svd_oracle(&sample)?;
        let (s1, sn) = (summary.s1, summary.sn.unwrap());
        let mut rng = rng_from_seed(mix(cell.seed, 12));
        let slack = 1e-10 * s1.max(1.0);
        let mut violations = 0usize;
        for _ in 0..200 {
            let x = SphereVector::uniform(params.n_cols(), &mut rng);
            let norm = sample.matvec(x.coords()).iter().map(|t| t * t).sum::<f64>().sqrt();
            if norm < sn - slack || norm > s1 + slack {
                violations += 1;
            }
        }
        rows.push(rb.check(
            "variational_violations",
            violations as f64,
            violations == 0,
            "sn <= ||Xx|| <= s1",
        ));
    } else {
        rows.push(rb.skipped("seginer_ratio", "beyond desk-scale guard"));
    }

    // row-norm moment growth
    let q2 = row_norm_moment_check(&params, 2, trials.max(200), mix(cell.seed, 13), 8.0)?;
    rows.push(rb.check("row_moment_q2_root", q2.normalized_root, q2.pass, "q-th root <= 8 sqrt(Np)"));

    // Levy machinery
    let concsingle =
        verify_lemma_concsingle(params.dist(), cell.p, trials.max(10_000), mix(cell.seed, 14))?;
    rows.push(rb.check(
        "concsingle_levy",
        concsingle.levy.value,
        concsingle.pass,
        &format!("bound {:.6}", concsingle.bound),
    ));

    match build_schedule(cell.n_rows, cell.p, th.delta0) {
        Ok(schedule) if schedule.levels >= 1 => match verify_lemma_concentr(
            &params,
            &schedule,
            schedule.levels,
            th.rho,
            trials.max(2000),
            mix(cell.seed, 15),
        ) {
            Ok(c) => rows.push(rb.check("concentr_gap", c.gap, c.ci_excludes_zero, "99% CI excludes 0")),
            Err(err) => rows.push(rb.skipped("concentr_gap", &err.to_string())),
        },
        _ => rows.push(rb.skipped("concentr_gap", "outside ladder regime")),
    }

    // tensorization decay (two-point law, threshold within Monte Carlo reach)
    let q = 0.02;
    let tens = verify_tensorization(
        |rng| if rng.random::<f64>() < q { 2.0 } else { 0.0 },
        1.0,
        q,
        &[50, 100, 200, 400],
        trials.max(3000),
        mix(cell.seed, 16),
    )?;
    match (tens.decreasing, tens.c_fit) {
        (Some(dec), Some(c_fit)) => {
            rows.push(rb.check(
                "tensorization_decay",
                c_fit,
                dec && c_fit > 0.0,
                "log p_hat strictly decreasing in N",
            ));
        }
        _ => rows.push(rb.skipped("tensorization_decay", "cells censored (< 5 hits)")),
    }

    // small-ball decay in N at fixed direction
    let comp = CompressibilityParams::new(th.delta0.min(0.5), th.rho)?;
    let x = sample_incompressible(params.n_cols(), &comp, mix(cell.seed, 17), 500)?;
    let sb = small_ball_fixed_vector(&params, &x, th.tau, trials.max(1000), mix(cell.seed, 18))?;
    let run = TailRun { tail: sb, normalized: Vec::new(), nonconverged: 0 };
    rows.push(rb.tail("small_ball_p_hat", &run));

    // extreme singular value tails
    let s1run = tail_s1(&params, th.k, trials, mix(cell.seed, 19))?;
    rows.push(rb.tail("s1_tail", &s1run));
    rows.push(rb.check(
        "s1_tail_zero_hits",
        s1run.tail.hits as f64,
        s1run.tail.hits == 0,
        &format!("K = {}", th.k),
    ));
    rows.push(rb.metric("s1_over_sqrt_np_median", median(&s1run.normalized)));

    if cell.n_rows * cell.n_cols <= DENSE_GUARD {
        let snrun = tail_sn(&params, th.tau, trials, mix(cell.seed, 20))?;
        rows.push(rb.tail("sn_tail", &snrun));
        rows.push(rb.check(
            "sn_tail_zero_hits",
            snrun.tail.hits as f64,
            snrun.tail.hits == 0,
            &format!("tau = {}", th.tau),
        ));
        rows.push(rb.metric("sn_over_sqrt_np_median", median(&snrun.normalized)));
    } else {
        rows.push(rb.skipped("sn_tail", "beyond the dense-oracle guard"));
    }

    // net packing sanity on a small sphere
    let net = build_net(
        params.n_cols().min(6),
        th.epsilon,
        NetTarget::FullSphere,
        mix(cell.seed, 21),
    )?;
    rows.push(rb.check(
        "net_within_cardinality_bound",
        net.points.len() as f64,
        (net.points.len() as f64) <= net.cardinality_bound,
        &format!("bound {:.1}", net.cardinality_bound),
    ));

    Ok(rows)
}

fn persist(config: &ExperimentConfig, result: &RunResult) -> Result<()> {
    let stem = Path::new(&config.output_path);
    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let csv_path = stem.with_extension("csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    for record in &result.records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    let json_path = stem.with_extension("json");
    fs::write(&json_path, serde_json::to_string_pretty(result)?)?;
    Ok(())
}
