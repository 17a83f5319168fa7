//! The `run` command: replications over a list of betas, one trace file per
//! run plus per-run and aggregated summary tables.

use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use anyhow::Context;
use nalgebra::DMatrix;
use portkey::diagnostics::{summarize, summarize_correlation};
use portkey::models::correlation::{run_gibbs, standardize, CorrelationTrace};
use portkey::models::{
    CorrelationModel, CorrelationPrior, CorrelationState, CorrelationTuning, WeibullMixtureTarget,
};
use portkey::{run_chain, ChainTrace, PortkeyBeta, SeedRecord};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ModelKind};
use crate::data::read_matrix;

/// One row of `summary.csv`. For the correlation model the base columns
/// describe the mu update, and `extra` holds the remaining components.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub beta: f64,
    pub replication: usize,
    pub ess: f64,
    pub ess_per_sec: f64,
    pub accept_rate: f64,
    pub mean_loops: f64,
    pub max_loops: f64,
    pub wall_time_sec: f64,
    pub extra: Option<CorrelationExtra>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationExtra {
    pub r_accept_rate: f64,
    pub sigma2_accept_rate: f64,
    pub sigma2_mean_loops: f64,
    pub sigma2_max_loops: f64,
}

const BASE_COLUMNS: [&str; 6] = [
    "ess",
    "ess_per_sec",
    "accept_rate",
    "mean_loops",
    "max_loops",
    "wall_time_sec",
];
const EXTRA_COLUMNS: [&str; 4] = [
    "r_accept_rate",
    "sigma2_accept_rate",
    "sigma2_mean_loops",
    "sigma2_max_loops",
];

impl SummaryRow {
    fn metrics(&self) -> Vec<f64> {
        let mut v = vec![
            self.ess,
            self.ess_per_sec,
            self.accept_rate,
            self.mean_loops,
            self.max_loops,
            self.wall_time_sec,
        ];
        if let Some(e) = &self.extra {
            v.extend([
                e.r_accept_rate,
                e.sigma2_accept_rate,
                e.sigma2_mean_loops,
                e.sigma2_max_loops,
            ]);
        }
        v
    }
}

/// Mean and standard error of each metric for one beta.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub beta: f64,
    pub n_replications: usize,
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Aggregates exactly the rows given, grouped by beta in first-seen order.
/// The standard error is `sd / sqrt(k)` and NaN for a single replication.
pub fn aggregate(rows: &[SummaryRow]) -> Vec<AggregateRow> {
    let mut betas: Vec<f64> = Vec::new();
    for r in rows {
        if !betas.contains(&r.beta) {
            betas.push(r.beta);
        }
    }
    betas
        .into_iter()
        .map(|beta| {
            let group: Vec<Vec<f64>> = rows
                .iter()
                .filter(|r| r.beta == beta)
                .map(SummaryRow::metrics)
                .collect();
            let k = group.len() as f64;
            let width = group[0].len();
            let means: Vec<f64> = (0..width)
                .map(|m| group.iter().map(|g| g[m]).sum::<f64>() / k)
                .collect();
            let std_errors = (0..width)
                .map(|m| {
                    if group.len() < 2 {
                        return f64::NAN;
                    }
                    let ss: f64 = group.iter().map(|g| (g[m] - means[m]).powi(2)).sum();
                    (ss / (k - 1.0)).sqrt() / k.sqrt()
                })
                .collect();
            AggregateRow {
                beta,
                n_replications: group.len(),
                means,
                std_errors,
            }
        })
        .collect()
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub rows: Vec<SummaryRow>,
    /// One message per replication that errored.
    pub failures: Vec<String>,
}

enum Trace {
    Weibull(ChainTrace<f64>),
    Correlation(CorrelationTrace),
}

struct Finished {
    beta_index: usize,
    replication: usize,
    outcome: Result<(Trace, SummaryRow), String>,
}

/// Builds the per-model runner. The correlation data is read once and
/// shared by all replications.
enum Runner {
    Weibull(WeibullMixtureTarget),
    Correlation { data: DMatrix<f64> },
}

impl Runner {
    fn new(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        Ok(match cfg.experiment.model {
            ModelKind::Weibull => {
                let w = &cfg.weibull;
                Runner::Weibull(WeibullMixtureTarget::new(
                    w.k,
                    w.gamma_shape,
                    w.gamma_rate,
                    w.proposal_sd,
                    w.initial_theta,
                )?)
            }
            ModelKind::Correlation => {
                let path = cfg
                    .correlation
                    .data
                    .as_ref()
                    .context("correlation.data is not set")?;
                let raw = read_matrix(path)?;
                let data = if cfg.correlation.standardize {
                    standardize(&raw)
                } else {
                    raw
                };
                Runner::Correlation { data }
            }
        })
    }

    fn run(
        &self,
        cfg: &ExperimentConfig,
        beta: f64,
        replication: usize,
    ) -> portkey::Result<(Trace, SummaryRow)> {
        let e = &cfg.experiment;
        let b = PortkeyBeta::new(beta)?;
        let seed = SeedRecord::new(e.seed, replication as u64);
        let clock = |start: Instant| {
            if e.timing {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            }
        };
        match self {
            Runner::Weibull(model) => {
                let start = Instant::now();
                let trace = run_chain(model, e.kernel, b, e.n_steps, seed, e.max_loops)?;
                let wall = clock(start);
                let s = summarize(&trace, |t| *t, wall);
                let row = SummaryRow {
                    beta,
                    replication,
                    ess: s.ess,
                    ess_per_sec: s.ess_per_sec,
                    accept_rate: s.accept_rate,
                    mean_loops: s.mean_loops,
                    max_loops: s.max_loops as f64,
                    wall_time_sec: s.wall_time_sec,
                    extra: None,
                };
                Ok((Trace::Weibull(trace), row))
            }
            Runner::Correlation { data } => {
                let c = &cfg.correlation;
                let prior = CorrelationPrior {
                    tau2: c.tau2,
                    a0: c.a0,
                    b0: c.b0,
                };
                let tuning = CorrelationTuning {
                    proposal_sd_r: c.proposal_sd_r,
                    proposal_sd_mu: c.proposal_sd_mu,
                    proposal_sd_sigma2: c.proposal_sd_sigma2,
                    beta_mu: b,
                    beta_sigma2: b,
                    kernel: e.kernel,
                    max_loops: e.max_loops,
                };
                let p = data.ncols();
                let state = CorrelationState {
                    r: DMatrix::identity(p, p),
                    mu: c.initial_mu,
                    sigma2: c.initial_sigma2,
                };
                let mut model =
                    CorrelationModel::new(data.clone(), prior, tuning)?.with_state(state)?;
                let start = Instant::now();
                let trace = run_gibbs(&mut model, e.n_steps, seed)?;
                let wall = clock(start);
                let s = summarize_correlation(&trace, wall);
                let row = SummaryRow {
                    beta,
                    replication,
                    ess: s.ess,
                    ess_per_sec: s.ess_per_sec,
                    accept_rate: s.mu_accept_rate,
                    mean_loops: s.mu_loops.mean,
                    max_loops: s.mu_loops.max as f64,
                    wall_time_sec: s.wall_time_sec,
                    extra: Some(CorrelationExtra {
                        r_accept_rate: s.r_accept_rate,
                        sigma2_accept_rate: s.sigma2_accept_rate,
                        sigma2_mean_loops: s.sigma2_loops.mean,
                        sigma2_max_loops: s.sigma2_loops.max as f64,
                    }),
                };
                Ok((Trace::Correlation(trace), row))
            }
        }
    }
}

fn trace_path(dir: &Path, beta: f64, replication: usize) -> PathBuf {
    dir.join(format!("trace_beta{beta}_rep{replication}.csv"))
}

fn write_trace(path: &Path, trace: &Trace, thin: usize) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let keep = |k: usize| (k + 1) % thin == 0;
    match trace {
        Trace::Weibull(t) => {
            w.write_record(["step", "theta", "accepted", "loops"])?;
            for k in (0..t.len()).filter(|&k| keep(k)) {
                w.write_record([
                    (k + 1).to_string(),
                    t.states[k].to_string(),
                    u8::from(t.accepted[k]).to_string(),
                    t.loops[k].to_string(),
                ])?;
            }
        }
        Trace::Correlation(t) => {
            let l = t.samples[0].r.len();
            let p = (1..).find(|p| p * (p - 1) / 2 == l).unwrap();
            let mut header = vec!["step".to_string()];
            for i in 1..=p {
                for j in i + 1..=p {
                    header.push(format!("r_{i}_{j}"));
                }
            }
            header.extend(
                [
                    "mu",
                    "sigma2",
                    "r_accepted",
                    "mu_accepted",
                    "mu_loops",
                    "sigma2_accepted",
                    "sigma2_loops",
                ]
                .map(String::from),
            );
            w.write_record(&header)?;
            for k in (0..t.len()).filter(|&k| keep(k)) {
                let (s, sw) = (&t.samples[k], &t.sweeps[k]);
                let mut rec = vec![(k + 1).to_string()];
                rec.extend(s.r.iter().map(|v| v.to_string()));
                rec.extend([
                    s.mu.to_string(),
                    s.sigma2.to_string(),
                    sw.r_accepted.to_string(),
                    u8::from(sw.mu.accepted).to_string(),
                    sw.mu.loops.to_string(),
                    u8::from(sw.sigma2.accepted).to_string(),
                    sw.sigma2.loops.to_string(),
                ]);
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_summary(path: &Path, rows: &[SummaryRow], with_extra: bool) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["beta", "replication"];
    header.extend(BASE_COLUMNS);
    if with_extra {
        header.extend(EXTRA_COLUMNS);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.beta.to_string(), r.replication.to_string()];
        rec.extend(r.metrics().iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_aggregate(path: &Path, rows: &[AggregateRow], with_extra: bool) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["beta".to_string(), "n_replications".to_string()];
    let names = BASE_COLUMNS
        .iter()
        .chain(if with_extra { &EXTRA_COLUMNS[..] } else { &[] });
    for name in names {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_se"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.beta.to_string(), r.n_replications.to_string()];
        for (m, se) in r.means.iter().zip(&r.std_errors) {
            rec.push(m.to_string());
            rec.push(se.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every (beta, replication) pair on a worker pool of `threads`
/// threads (all cores when `None`). Files are written by the calling thread
/// as results arrive; summaries are sorted by beta then replication.
///
/// A replication that errors is reported in `failures` and left out of the
/// tables. I/O and configuration problems are returned as errors.
pub fn cmd_run(cfg: &ExperimentConfig, threads: Option<usize>) -> anyhow::Result<RunReport> {
    cfg.validate()?;
    let e = &cfg.experiment;
    let out_dir = e.out_dir.clone();
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml())?;
    let runner = Runner::new(cfg)?;

    let jobs: Vec<(usize, usize)> = (0..e.betas.len())
        .flat_map(|b| (0..e.n_replications).map(move |r| (b, r)))
        .collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;

    let (tx, rx) = mpsc::channel::<Finished>();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    std::thread::scope(|scope| -> anyhow::Result<()> {
        let runner = &runner;
        scope.spawn(move || {
            pool.install(|| {
                jobs.into_par_iter()
                    .for_each_with(tx, |tx, (beta_index, replication)| {
                        let beta = e.betas[beta_index];
                        let outcome = runner
                            .run(cfg, beta, replication)
                            .map_err(|err| err.to_string());
                        // the receiver only disappears if the collector failed
                        let _ = tx.send(Finished {
                            beta_index,
                            replication,
                            outcome,
                        });
                    });
            });
        });
        for done in rx {
            let beta = e.betas[done.beta_index];
            match done.outcome {
                Ok((trace, row)) => {
                    write_trace(
                        &trace_path(&out_dir, beta, done.replication),
                        &trace,
                        e.thin,
                    )?;
                    rows.push((done.beta_index, row));
                }
                Err(msg) => failures.push(format!(
                    "beta {beta}, replication {}: {msg}",
                    done.replication
                )),
            }
        }
        Ok(())
    })?;

    rows.sort_by_key(|(b, r)| (*b, r.replication));
    let rows: Vec<SummaryRow> = rows.into_iter().map(|(_, r)| r).collect();
    failures.sort();
    let with_extra = e.model == ModelKind::Correlation;
    write_summary(&out_dir.join("summary.csv"), &rows, with_extra)?;
    write_aggregate(
        &out_dir.join("aggregate.csv"),
        &aggregate(&rows),
        with_extra,
    )?;
    Ok(RunReport {
        out_dir,
        rows,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(beta: f64, replication: usize, ess: f64) -> SummaryRow {
        SummaryRow {
            beta,
            replication,
            ess,
            ess_per_sec: ess / 2.0,
            accept_rate: 0.1,
            mean_loops: 3.0 + ess / 1e4,
            max_loops: 40.0,
            wall_time_sec: 2.0,
            extra: None,
        }
    }

    #[test]
    fn aggregate_by_hand() {
        let rows = [row(1.0, 0, 100.0), row(1.0, 1, 300.0), row(0.9, 0, 50.0)];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].beta, 1.0);
        assert_eq!(agg[0].n_replications, 2);
        assert_eq!(agg[0].means[0], 200.0);
        // sd of {100, 300} is sqrt(20000); se = sd / sqrt 2 = 100
        assert!((agg[0].std_errors[0] - 100.0).abs() < 1e-12);
        assert_eq!(agg[0].std_errors[4], 0.0);
        assert!(agg[1].std_errors[0].is_nan());
    }

    proptest! {
        #[test]
        fn aggregate_uses_exactly_the_rows_present(
            ess in prop::collection::vec(1.0f64..1e4, 2..30),
            split in 0.0f64..1.0,
        ) {
            let rows: Vec<SummaryRow> = ess
                .iter()
                .enumerate()
                .map(|(i, &e)| row(if (i as f64) < split * ess.len() as f64 { 0.9 } else { 0.5 }, i, e))
                .collect();
            let agg = aggregate(&rows);
            let total: usize = agg.iter().map(|a| a.n_replications).sum();
            prop_assert_eq!(total, rows.len());
            for a in &agg {
                let vals: Vec<f64> = rows.iter().filter(|r| r.beta == a.beta).map(|r| r.ess).collect();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                prop_assert!((a.means[0] - m).abs() <= 1e-12 * m.abs().max(1.0));
            }
        }
    }
}
