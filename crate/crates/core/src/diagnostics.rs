//! Output analysis for chains: autocorrelation, batch-means ESS and
//! factory loop statistics.
//!
//! Absolute ESS values depend on the estimator. This one uses
//! non-overlapping batch means with batches of `floor(sqrt(n))` and caps the
//! result at `n`.

use crate::error::{Error, Result};
use crate::kernel::ChainTrace;
use crate::models::correlation::CorrelationTrace;

/// Shortest series accepted by [`ess`].
pub const MIN_ESS_LEN: usize = 100;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Biased sample autocorrelations at lags `0..=max_lag`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag == 0 || n <= max_lag {
        return Err(Error::domain(format!(
            "need 1 <= max_lag < n, got max_lag = {max_lag}, n = {n}"
        )));
    }
    let m = mean(series);
    let dev: Vec<f64> = series.iter().map(|x| x - m).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if !(c0 > 0.0) {
        return Err(Error::DegenerateSeries("series has zero variance".into()));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        let ck: f64 = dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum();
        out.push(ck / c0);
    }
    Ok(out)
}

/// Batch-means estimate of the asymptotic variance `sigma^2` in
/// `sqrt(n) (mean - E) -> N(0, sigma^2)`.
pub fn batch_means_variance(series: &[f64], batch_size: Option<usize>) -> Result<f64> {
    let n = series.len();
    if n < MIN_ESS_LEN {
        return Err(Error::domain(format!(
            "series of length {n}; need at least {MIN_ESS_LEN}"
        )));
    }
    let b = batch_size.unwrap_or_else(|| (n as f64).sqrt().floor() as usize);
    if b == 0 || n / b < 2 {
        return Err(Error::domain(format!(
            "batch size {b} leaves fewer than two batches"
        )));
    }
    let a = n / b;
    let used = &series[..a * b];
    let overall = mean(used);
    let ss: f64 = used
        .chunks_exact(b)
        .map(|chunk| {
            let d = mean(chunk) - overall;
            d * d
        })
        .sum();
    Ok(b as f64 * ss / (a - 1) as f64)
}

/// Effective sample size `n s^2 / sigma^2_bm`, capped at `n`.
///
/// A series that never moves after its first value is reported as
/// degenerate: its batch-means ESS would otherwise be driven by a single
/// point.
pub fn ess(series: &[f64], batch_size: Option<usize>) -> Result<f64> {
    let n = series.len();
    if n < MIN_ESS_LEN {
        return Err(Error::domain(format!(
            "series of length {n}; need at least {MIN_ESS_LEN}"
        )));
    }
    if series[1..].iter().all(|&x| x == series[1]) {
        return Err(Error::DegenerateSeries(
            "series is constant after its first value".into(),
        ));
    }
    let s2 = sample_variance(series);
    let bm = batch_means_variance(series, batch_size)?;
    if !(bm > 0.0) {
        return Ok(n as f64);
    }
    Ok((n as f64 * s2 / bm).min(n as f64))
}

/// Monte Carlo standard error of the mean by batch means.
pub fn mcse(series: &[f64], batch_size: Option<usize>) -> Result<f64> {
    Ok((batch_means_variance(series, batch_size)? / series.len() as f64).sqrt())
}

/// Smallest componentwise ESS; stands in for a multivariate ESS.
pub fn min_ess(components: &[Vec<f64>]) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::domain("no components"));
    }
    components
        .iter()
        .map(|c| ess(c, None))
        .try_fold(f64::INFINITY, |acc, e| Ok(acc.min(e?)))
}

/// Loop counts over factory calls.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoopStats {
    pub calls: u64,
    pub mean: f64,
    pub max: u64,
}

impl LoopStats {
    pub fn from_counts(counts: impl IntoIterator<Item = u64>) -> Self {
        let (mut calls, mut total, mut max) = (0u64, 0f64, 0u64);
        for c in counts {
            calls += 1;
            total += c as f64;
            max = max.max(c);
        }
        let mean = if calls == 0 {
            0.0
        } else {
            total / calls as f64
        };
        Self { calls, mean, max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub n_steps: usize,
    /// `NaN` when the series is too short or degenerate.
    pub ess: f64,
    pub ess_per_sec: f64,
    pub accept_rate: f64,
    /// Over factory calls only; zero when no factory ran.
    pub mean_loops: f64,
    pub max_loops: u64,
    pub wall_time_sec: f64,
}

fn per_sec(ess: f64, wall_time_sec: f64) -> f64 {
    if wall_time_sec > 0.0 {
        ess / wall_time_sec
    } else {
        f64::NAN
    }
}

/// Summary of a chain, with ESS computed on `g(state)`. `wall_time_sec`
/// should cover the sampling loop only.
pub fn summarize<S>(
    trace: &ChainTrace<S>,
    g: impl Fn(&S) -> f64,
    wall_time_sec: f64,
) -> RunSummary {
    let series: Vec<f64> = trace.states.iter().map(g).collect();
    let ess = ess(&series, None).unwrap_or(f64::NAN);
    let n = trace.len();
    let accepted = trace.accepted.iter().filter(|&&a| a).count();
    let loops = LoopStats::from_counts(trace.factory_loops());
    RunSummary {
        n_steps: n,
        ess,
        ess_per_sec: per_sec(ess, wall_time_sec),
        accept_rate: if n == 0 {
            0.0
        } else {
            accepted as f64 / n as f64
        },
        mean_loops: loops.mean,
        max_loops: loops.max,
        wall_time_sec,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSummary {
    pub n_sweeps: usize,
    /// Minimum ESS over the correlations, `mu` and `sigma2`.
    pub ess: f64,
    pub ess_per_sec: f64,
    pub r_accept_rate: f64,
    pub mu_accept_rate: f64,
    pub sigma2_accept_rate: f64,
    pub mu_loops: LoopStats,
    pub sigma2_loops: LoopStats,
    pub wall_time_sec: f64,
}

pub fn summarize_correlation(trace: &CorrelationTrace, wall_time_sec: f64) -> CorrelationSummary {
    let n = trace.len();
    let l = trace.samples.first().map_or(0, |s| s.r.len());
    let mut components: Vec<Vec<f64>> = (0..l).map(|k| trace.r_series(k)).collect();
    components.push(trace.mu());
    components.push(trace.sigma2());
    let ess = min_ess(&components).unwrap_or(f64::NAN);
    let rate = |count: usize, per: usize| {
        if n == 0 {
            0.0
        } else {
            count as f64 / (n * per) as f64
        }
    };
    let r_acc: usize = trace.sweeps.iter().map(|s| s.r_accepted).sum();
    let mu_acc = trace.sweeps.iter().filter(|s| s.mu.accepted).count();
    let s2_acc = trace.sweeps.iter().filter(|s| s.sigma2.accepted).count();
    CorrelationSummary {
        n_sweeps: n,
        ess,
        ess_per_sec: per_sec(ess, wall_time_sec),
        r_accept_rate: rate(r_acc, l.max(1)),
        mu_accept_rate: rate(mu_acc, 1),
        sigma2_accept_rate: rate(s2_acc, 1),
        mu_loops: LoopStats::from_counts(trace.mu_loops()),
        sigma2_loops: LoopStats::from_counts(trace.sigma2_loops()),
        wall_time_sec,
    }
}
