//! Monte Carlo strong-error tables, rate fits, moment sweeps and the
//! divergence comparison.
//!
//! Trials are independent work units run on a rayon pool of the requested
//! size; per-trial results are collected in trial order and reduced
//! sequentially, so every aggregate is bitwise independent of the worker
//! count.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{norm, SdeProblem};
use crate::paths::{generate, grid_steps, sample_initial, NORMAL_METHOD};
use crate::solver::{Integrator, SchemeKind, SimulationOutput};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Trial count, seed and parallelism shared by the Monte Carlo drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub trials: u64,
    pub master_seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(trials: u64, master_seed: u64) -> Self {
        Self {
            trials,
            master_seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn map_trials<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..self.trials).into_par_iter().map(&f).collect())
    }
}

/// Sample mean and 95% half-width of a sequence, summed in order.
fn mean_ci(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, Z_95 * (var / k as f64).sqrt())
}

fn check_grid_size(n: u64, horizon: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !grid_steps(n, horizon).1 {
        return Err(Error::InvalidArgument(format!(
            "n * T must be an integer for experiments (n = {n}, T = {horizon})"
        )));
    }
    Ok(())
}

fn scheme_description(scheme: SchemeKind) -> String {
    match scheme.alpha() {
        Some(a) => format!("{}(alpha={a})", scheme.label()),
        None => scheme.label().to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableMeta {
    pub problem: String,
    pub scheme: SchemeKind,
    pub p: f64,
    pub n_ref: u64,
    pub master_seed: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub n: u64,
    /// Trials that entered the estimate (blowups excluded).
    pub trials: u64,
    /// Sample mean of `|X_ref(T) - X_n(T)|^p`.
    pub mse: f64,
    pub ci_half_width: f64,
    pub blowups: u64,
    /// Set when the scheme is undefined for this `n`.
    pub error: Option<String>,
}

impl ErrorRow {
    pub fn is_defined(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    pub meta: TableMeta,
}

impl ErrorTable {
    pub fn row(&self, n: u64) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// `n,trials,mse,ci,blowups` rows followed by `#` metadata lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,trials,mse,ci,blowups\n");
        for r in &self.rows {
            match &r.error {
                None => {
                    let _ = writeln!(s, "{},{},{:e},{:e},{}", r.n, r.trials, r.mse, r.ci_half_width, r.blowups);
                }
                Some(_) => {
                    let _ = writeln!(s, "{},{},undefined,undefined,{}", r.n, r.trials, r.blowups);
                }
            }
        }
        let m = &self.meta;
        let _ = writeln!(
            s,
            "# problem={} scheme={} p={} n_ref={} trials={} seed={} normals={}",
            m.problem,
            scheme_description(m.scheme),
            m.p,
            m.n_ref,
            m.trials,
            m.master_seed,
            NORMAL_METHOD
        );
        for r in &self.rows {
            if let Some(e) = &r.error {
                let _ = writeln!(s, "# n={}: {e}", r.n);
            }
        }
        s
    }

    /// `log2_n,log2_mse` for rows with positive error.
    pub fn plot_csv(&self) -> String {
        let mut s = String::from("log2_n,log2_mse\n");
        for r in self.rows.iter().filter(|r| r.is_defined() && r.mse > 0.0) {
            let _ = writeln!(s, "{},{}", (r.n as f64).log2(), r.mse.log2());
        }
        s
    }
}

/// Estimates `E|X_ref(T) - X_n(T)|^p` for each `n`, with the reference run
/// of the same scheme at `n_ref` on the same Wiener path and initial state.
pub fn strong_error(
    problem: &SdeProblem,
    scheme: SchemeKind,
    n_list: &[u64],
    n_ref: u64,
    p: f64,
    mc: &MonteCarlo,
) -> Result<ErrorTable> {
    if mc.trials < 2 {
        return Err(Error::InvalidArgument("at least 2 trials are required".into()));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("n list is empty".into()));
    }
    let horizon = problem.horizon();
    check_grid_size(n_ref, horizon)?;
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    for &n in &ns {
        if n == 0 || n_ref % n != 0 {
            return Err(Error::NotDivisible { value: n_ref, divisor: n });
        }
    }
    let reference = Integrator::new(problem, scheme, n_ref)?;
    let coarse: Vec<std::result::Result<Integrator<'_>, String>> = ns
        .iter()
        .map(|&n| match Integrator::new(problem, scheme, n) {
            Ok(i) => Ok(i),
            Err(e @ Error::SchemeUndefined { .. }) => Err(e.to_string()),
            Err(e) => Err(e.to_string()),
        })
        .collect();

    let m = problem.noise_dim();
    let per_trial = mc.map_trials(|trial| {
        let fine = generate(mc.master_seed, trial, n_ref, horizon, m)?;
        let x0 = sample_initial(mc.master_seed, trial, problem);
        let r = reference.run(&fine, &x0)?;
        let mut errs = Vec::with_capacity(coarse.len());
        for integ in &coarse {
            let Ok(integ) = integ else {
                errs.push(None);
                continue;
            };
            let out = if integ.n() == n_ref {
                r.clone()
            } else {
                integ.run(&fine.coarsen(n_ref / integ.n())?, &x0)?
            };
            errs.push(if r.blowup || out.blowup {
                None
            } else {
                let diff: Vec<f64> = r.endpoint.iter().zip(&out.endpoint).map(|(a, b)| a - b).collect();
                Some(norm(&diff).powf(p))
            });
        }
        Ok(errs)
    })?;

    let rows = ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            if let Err(msg) = &coarse[j] {
                return ErrorRow {
                    n,
                    trials: 0,
                    mse: f64::NAN,
                    ci_half_width: f64::NAN,
                    blowups: 0,
                    error: Some(msg.clone()),
                };
            }
            let values: Vec<f64> = per_trial.iter().filter_map(|errs| errs[j]).collect();
            let (mse, ci) = mean_ci(&values);
            ErrorRow {
                n,
                trials: values.len() as u64,
                mse,
                ci_half_width: ci,
                blowups: mc.trials - values.len() as u64,
                error: None,
            }
        })
        .collect();

    Ok(ErrorTable {
        rows,
        meta: TableMeta {
            problem: problem.name().to_string(),
            scheme,
            p,
            n_ref,
            master_seed: mc.master_seed,
            trials: mc.trials,
        },
    })
}

/// Which table rows enter a rate fit.
#[derive(Debug, Clone, PartialEq)]
pub enum FitWindow {
    All,
    /// The `k` largest `n`.
    Largest(usize),
    /// Explicit `n` values.
    Values(Vec<u64>),
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow::Largest(3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// Slope of `log2 mse` against `log2 n`.
    pub slope: f64,
    pub intercept: f64,
    /// `n` values used.
    pub window: Vec<u64>,
    /// Root-mean-square residual in log2 units.
    pub residual: f64,
    /// Rows dropped from the window and why.
    pub notices: Vec<String>,
}

impl RateFit {
    pub fn to_comment_lines(&self) -> String {
        let mut s = format!(
            "# rate slope={} intercept={} residual={} window={:?}\n",
            self.slope, self.intercept, self.residual, self.window
        );
        for n in &self.notices {
            let _ = writeln!(s, "# notice: {n}");
        }
        s
    }
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    (slope, intercept, (rss / k).sqrt())
}

/// Fits `log2 mse = intercept + slope log2 n` over the window.
pub fn fit_rate(table: &ErrorTable, window: &FitWindow) -> Result<RateFit> {
    let selected: Vec<&ErrorRow> = match window {
        FitWindow::All => table.rows.iter().collect(),
        FitWindow::Largest(k) => {
            let mut rows: Vec<&ErrorRow> = table.rows.iter().collect();
            rows.sort_by_key(|r| r.n);
            let skip = rows.len().saturating_sub(*k);
            rows.into_iter().skip(skip).collect()
        }
        FitWindow::Values(ns) => {
            let mut rows = Vec::with_capacity(ns.len());
            for n in ns {
                rows.push(
                    table
                        .row(*n)
                        .ok_or_else(|| Error::InvalidArgument(format!("n = {n} is not in the table")))?,
                );
            }
            rows
        }
    };
    let mut notices = Vec::new();
    let mut used = Vec::new();
    for r in selected {
        if !r.is_defined() {
            notices.push(format!("n={} excluded: scheme undefined", r.n));
        } else if !(r.mse > 0.0) || !r.mse.is_finite() {
            notices.push(format!("n={} excluded: non-positive error {}", r.n, r.mse));
        } else {
            used.push(r);
        }
    }
    if used.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 2 rows with positive error, got {}",
            used.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|r| (r.n as f64).log2()).collect();
    let ys: Vec<f64> = used.iter().map(|r| r.mse.log2()).collect();
    let (slope, intercept, residual) = least_squares(&xs, &ys);
    Ok(RateFit {
        slope,
        intercept,
        window: used.iter().map(|r| r.n).collect(),
        residual,
        notices,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub n: u64,
    pub p: f64,
    pub trials: u64,
    /// Monte Carlo estimate of `E[max_k |X_n(t_k)|^p]`.
    pub estimate: f64,
    pub ci_half_width: f64,
    pub blowups: u64,
}

impl MomentRow {
    /// Blowups were excluded, so the estimate is biased low.
    pub fn reliable(&self) -> bool {
        self.blowups == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    pub problem: String,
    pub scheme: SchemeKind,
    pub master_seed: u64,
}

impl MomentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,p,trials,estimate,ci,blowups\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e},{}",
                r.n, r.p, r.trials, r.estimate, r.ci_half_width, r.blowups
            );
        }
        let _ = writeln!(
            s,
            "# problem={} scheme={} seed={} normals={}",
            self.problem,
            scheme_description(self.scheme),
            self.master_seed,
            NORMAL_METHOD
        );
        s
    }

    /// Ratio of largest to smallest estimate at order `p`.
    pub fn spread(&self, p: f64) -> Option<f64> {
        let ests: Vec<f64> = self.rows.iter().filter(|r| r.p == p).map(|r| r.estimate).collect();
        if ests.is_empty() {
            return None;
        }
        let max = ests.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ests.iter().copied().fold(f64::INFINITY, f64::min);
        Some(max / min)
    }
}

/// Estimates the discrete running-supremum moments for every `(n, p)`.
///
/// When the largest `n` is a multiple of every other, all grids are
/// coarsened from one fine path per trial; otherwise each `n` draws its own.
pub fn moment_sweep(
    problem: &SdeProblem,
    scheme: SchemeKind,
    n_list: &[u64],
    p_list: &[f64],
    mc: &MonteCarlo,
) -> Result<MomentReport> {
    if n_list.is_empty() || p_list.is_empty() {
        return Err(Error::InvalidArgument("n and p lists must be nonempty".into()));
    }
    if mc.trials < 2 {
        return Err(Error::InvalidArgument("at least 2 trials are required".into()));
    }
    for &p in p_list {
        if !(p > 0.0 && p <= problem.moment_order()) {
            return Err(Error::InvalidArgument(format!(
                "moment order p = {p} must lie in (0, {}]",
                problem.moment_order()
            )));
        }
    }
    let horizon = problem.horizon();
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    for &n in &ns {
        check_grid_size(n, horizon)?;
    }
    let n_max = *ns.last().expect("nonempty");
    let shared = ns.iter().all(|&n| n_max % n == 0);
    let integrators = ns
        .iter()
        .map(|&n| Integrator::new(problem, scheme, n))
        .collect::<Result<Vec<_>>>()?;
    let m = problem.noise_dim();

    let per_trial: Vec<Vec<SimulationOutput>> = mc.map_trials(|trial| {
        let x0 = sample_initial(mc.master_seed, trial, problem);
        let fine = if shared {
            Some(generate(mc.master_seed, trial, n_max, horizon, m)?)
        } else {
            None
        };
        integrators
            .iter()
            .map(|integ| {
                let grid = match &fine {
                    Some(f) => f.coarsen(n_max / integ.n())?,
                    None => generate(mc.master_seed, trial, integ.n(), horizon, m)?,
                };
                integ.run(&grid, &x0)
            })
            .collect()
    })?;

    let mut rows = Vec::with_capacity(ns.len() * p_list.len());
    for (j, &n) in ns.iter().enumerate() {
        for &p in p_list {
            let values: Vec<f64> = per_trial
                .iter()
                .filter(|outs| !outs[j].blowup)
                .map(|outs| outs[j].sup_norm.powf(p))
                .collect();
            let (estimate, ci) = mean_ci(&values);
            rows.push(MomentRow {
                n,
                p,
                trials: values.len() as u64,
                estimate,
                ci_half_width: ci,
                blowups: mc.trials - values.len() as u64,
            });
        }
    }
    Ok(MomentReport {
        rows,
        problem: problem.name().to_string(),
        scheme,
        master_seed: mc.master_seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceEntry {
    pub scheme: SchemeKind,
    pub blowup_fraction: f64,
    /// Median of `|X_n(T)|`; blown-up paths count as infinite.
    pub median_endpoint: f64,
    /// Set when the scheme could not be constructed for this `n`.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub n: u64,
    pub x0: Vec<f64>,
    pub trials: u64,
    pub entries: Vec<DivergenceEntry>,
}

impl DivergenceReport {
    pub fn entry(&self, label: &str) -> Option<&DivergenceEntry> {
        self.entries.iter().find(|e| e.scheme.label() == label)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,n,trials,blowup_fraction,median_endpoint\n");
        for e in &self.entries {
            match &e.error {
                None => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{:e}",
                        e.scheme.label(),
                        self.n,
                        self.trials,
                        e.blowup_fraction,
                        e.median_endpoint
                    );
                }
                Some(msg) => {
                    let _ = writeln!(s, "{},{},{},undefined,undefined", e.scheme.label(), self.n, self.trials);
                    let _ = writeln!(s, "# {}: {msg}", e.scheme.label());
                }
            }
        }
        s
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        let (a, b) = (v[k / 2 - 1], v[k / 2]);
        if a.is_infinite() || b.is_infinite() {
            b
        } else {
            0.5 * (a + b)
        }
    }
}

/// Runs the plain and monotone schemes side by side from a fixed start.
pub fn divergence_demo(
    problem: &SdeProblem,
    n: u64,
    x0: &[f64],
    alpha: f64,
    mc: &MonteCarlo,
) -> Result<DivergenceReport> {
    if x0.len() != problem.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.state_dim(),
            got: x0.len(),
        });
    }
    if mc.trials == 0 {
        return Err(Error::InvalidArgument("at least 1 trial is required".into()));
    }
    let horizon = problem.horizon();
    check_grid_size(n, horizon)?;
    let m = problem.noise_dim();
    let mut entries = Vec::new();
    for scheme in [SchemeKind::Vanilla, SchemeKind::MonotonePolygonal { alpha }] {
        let integ = match Integrator::new(problem, scheme, n) {
            Ok(i) => i,
            Err(e @ Error::SchemeUndefined { .. }) => {
                entries.push(DivergenceEntry {
                    scheme,
                    blowup_fraction: f64::NAN,
                    median_endpoint: f64::NAN,
                    error: Some(e.to_string()),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let outs = mc.map_trials(|trial| {
            let grid = generate(mc.master_seed, trial, n, horizon, m)?;
            integ.run(&grid, x0)
        })?;
        let blowups = outs.iter().filter(|o| o.blowup).count();
        let mags = outs
            .iter()
            .map(|o| if o.blowup { f64::INFINITY } else { norm(&o.endpoint) })
            .collect();
        entries.push(DivergenceEntry {
            scheme,
            blowup_fraction: blowups as f64 / mc.trials as f64,
            median_endpoint: median(mags),
            error: None,
        });
    }
    Ok(DivergenceReport {
        n,
        x0: x0.to_vec(),
        trials: mc.trials,
        entries,
    })
}
