//! Accuracy and complexity reporting.
//!
//! All standard deviations are population (divide by `n`) deviations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raytracer::{predicted_tuple_count, predicted_tuples_at_order, OpCounter};

/// SINR assigned to outage samples before comparison [dB].
pub const OUTAGE_FLOOR_DB: f64 = -40.0;
/// Largest NRMSE considered acceptable in reports.
pub const NRMSE_ACCEPTABLE: f64 = 0.05;
/// Network-simulation runs per ray-tracing run in the total-time model.
pub const DEFAULT_NS_RUNS: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.len() != v.len() {
            return Err(Error::Metric(format!("time/value length mismatch: {} vs {}", t.len(), v.len())));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Metric("time stamps must be strictly increasing".into()));
        }
        Ok(TimeSeries { t, v })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// NaN values replaced by `floor`.
    pub fn with_outage_floor(&self, floor: f64) -> Self {
        TimeSeries {
            t: self.t.clone(),
            v: self.v.iter().map(|&x| if x.is_nan() { floor } else { x }).collect(),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// RMSE between `x` and the baseline `x_hat`, divided by the baseline's std.
pub fn nrmse(x: &TimeSeries, x_hat: &TimeSeries) -> Result<f64> {
    if x.t != x_hat.t {
        return Err(Error::Metric(format!(
            "time grid mismatch ({} vs {} samples)",
            x.len(),
            x_hat.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Metric("empty series".into()));
    }
    if x.v.iter().chain(&x_hat.v).any(|v| !v.is_finite()) {
        return Err(Error::Metric("non-finite sample; apply the outage floor first".into()));
    }
    let sigma = population_std(&x_hat.v);
    if sigma == 0.0 {
        return Err(Error::Metric("baseline has zero standard deviation".into()));
    }
    let mse = x.v.iter().zip(&x_hat.v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
    Ok(mse.sqrt() / sigma)
}

/// `(T_rt + n T_ns)` of the baseline over that of the simplified run.
pub fn speedup(t_rt_base: f64, t_ns_base: f64, t_rt_simp: f64, t_ns_simp: f64, n_runs: f64) -> f64 {
    (t_rt_base + n_runs * t_ns_base) / (t_rt_simp + n_runs * t_ns_simp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowStat {
    pub start_s: f64,
    pub mean: f64,
    pub std: f64,
    /// Some sub-window had no finite data.
    pub outage: bool,
}

/// Splits the series into sub-windows of `sub_s`, averages each, then
/// reports mean and std of the sub-window means over each full window of
/// `window_s`. A sample at `t` belongs to the sub-window containing `t`.
pub fn windowed_stats(series: &TimeSeries, window_s: f64, sub_s: f64) -> Result<Vec<WindowStat>> {
    if !(sub_s > 0.0 && window_s >= sub_s) {
        return Err(Error::Metric("need window_s >= sub_s > 0".into()));
    }
    let ratio = window_s / sub_s;
    let per_window = ratio.round() as usize;
    if (ratio - per_window as f64).abs() > 1e-9 * ratio {
        return Err(Error::Metric("window must be a whole number of sub-windows".into()));
    }
    let Some(&t0) = series.t.first() else {
        return Ok(Vec::new());
    };
    let slot = |t: f64| ((t - t0) / sub_s + 1e-9).floor() as usize;
    let n_sub = slot(*series.t.last().expect("non-empty")) + 1;
    let mut sums = vec![(0.0, 0usize); n_sub];
    for (&t, &v) in series.t.iter().zip(&series.v) {
        let s = &mut sums[slot(t)];
        s.0 += v;
        s.1 += 1;
    }
    let sub_means: Vec<f64> = sums
        .iter()
        .map(|&(s, n)| if n == 0 { f64::NAN } else { s / n as f64 })
        .collect();
    Ok(sub_means
        .chunks_exact(per_window)
        .enumerate()
        .map(|(k, w)| {
            let outage = w.iter().any(|x| !x.is_finite());
            WindowStat {
                start_s: t0 + (k * per_window) as f64 * sub_s,
                mean: mean(w),
                std: population_std(w),
                outage,
            }
        })
        .collect())
}

/// Right-continuous empirical CDF as sorted `(value, fraction <= value)`.
pub fn ecdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Metric("ecdf needs finite samples".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in s.into_iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub nrmse: f64,
    pub speedup: f64,
    pub rays_baseline: u64,
    pub rays_simplified: u64,
    /// Baseline minus simplified obstruction checks.
    pub checks_saved: i64,
    pub outage_floor_db: f64,
}

/// Counters of one unpruned trace at a given `T` and `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexitySample {
    pub triangles: usize,
    pub max_order: usize,
    pub counter: OpCounter,
    /// Obstruction checks ran without early exit.
    pub exhaustive: bool,
}

/// Operation count the per-tuple model `r + (r+1) T` assigns to the visited
/// tuples.
pub fn model_ops(per_order: &[u64], triangles: usize) -> f64 {
    per_order
        .iter()
        .enumerate()
        .map(|(r, &n)| n as f64 * (r as f64 + (r as f64 + 1.0) * triangles as f64))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub max_order: usize,
    /// Log-log slope of the modelled op count over T.
    pub model_slope: f64,
    /// Log-log slope of the instrumented op count over T.
    pub measured_slope: f64,
    pub expected: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub slopes: Vec<SlopeFit>,
}

pub const SLOPE_TOLERANCE: f64 = 0.3;

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Checks tuple counts per depth against the enumeration formula and the
/// geometric/obstruction counters against the per-tuple accounting, then
/// fits the growth exponent over `T` for every `R` with at least two
/// distinct triangle counts.
pub fn validate_complexity(samples: &[ComplexitySample]) -> Result<ComplexityReport> {
    let mut problems = Vec::new();
    for s in samples {
        let c = &s.counter;
        let tag = format!("T={} R={}", s.triangles, s.max_order);
        let predicted = predicted_tuple_count(s.triangles as u64, s.max_order);
        if c.tuples_visited != predicted {
            problems.push(format!("{tag}: tuples_visited {} != predicted {predicted}", c.tuples_visited));
        }
        for r in 0..=s.max_order {
            let got = c.tuples_per_order.get(r).copied().unwrap_or(0);
            let want = predicted_tuples_at_order(s.triangles as u64, r);
            if got != want {
                problems.push(format!("{tag} depth {r}: visited {got}, predicted {want}"));
            }
        }
        let geo: u64 = c.tuples_per_order.iter().enumerate().map(|(r, n)| r as u64 * n).sum();
        if c.geometric_ops != geo {
            problems.push(format!("{tag}: geometric_ops {} != sum r*count_r {geo}", c.geometric_ops));
        }
        if s.exhaustive && c.obstruction_checks != c.check_budget {
            problems.push(format!(
                "{tag}: obstruction_checks {} != budget {} without early exit",
                c.obstruction_checks, c.check_budget
            ));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Metric(problems.join("; ")));
    }
    let mut orders: Vec<usize> = samples.iter().map(|s| s.max_order).collect();
    orders.sort_unstable();
    orders.dedup();
    let mut slopes = Vec::new();
    for r in orders {
        let group: Vec<_> = samples.iter().filter(|s| s.max_order == r).collect();
        let mut ts: Vec<usize> = group.iter().map(|s| s.triangles).collect();
        ts.sort_unstable();
        ts.dedup();
        if ts.len() < 2 {
            continue;
        }
        let model: Vec<_> = group
            .iter()
            .map(|s| (s.triangles as f64, model_ops(&s.counter.tuples_per_order, s.triangles)))
            .collect();
        let measured: Vec<_> = group
            .iter()
            .map(|s| (s.triangles as f64, s.counter.total_ops().max(1) as f64))
            .collect();
        let model_slope = loglog_slope(&model);
        let expected = r as f64 + 1.0;
        slopes.push(SlopeFit {
            max_order: r,
            model_slope,
            measured_slope: loglog_slope(&measured),
            expected,
            within_tolerance: (model_slope - expected).abs() <= SLOPE_TOLERANCE,
        });
    }
    Ok(ComplexityReport { slopes })
}
