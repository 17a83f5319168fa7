//! The `validate` command: fast self-checks of the factories, kernels and
//! model pieces, each against an independent reference.

use nalgebra::DMatrix;
use portkey::factory::{
    alpha_barker, analytic_alpha_flipped, analytic_alpha_portkey, flipped_portkey_two_coin,
    portkey_two_coin, stopping_probability, two_coin, BernoulliCoin, WeightedCoin,
};
use portkey::kernel::finite::{
    detailed_balance_residual, finite_state_transition_matrix, scaled_bounds, AcceptanceMode,
};
use portkey::models::correlation::linalg::{is_positive_definite, r_bounds};
use portkey::models::correlation::{run_gibbs, standardize, synth_data};
use portkey::models::weibull::{weibull_density, weibull_envelope};
use portkey::models::{
    CorrelationModel, CorrelationPrior, CorrelationTuning, WeibullMixtureTarget,
};
use portkey::{run_chain, stream_rng, KernelKind, PortkeyBeta, SeedRecord, DEFAULT_MAX_LOOPS};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    /// Scales the Weibull envelope before checking it. Values below one
    /// must make the envelope check fail.
    pub corrupt_envelope: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name, pass, detail }
}

const TRIALS: usize = 20_000;
const Z_LIMIT: f64 = 5.0;

fn factory_frequencies() -> CheckResult {
    let values_c = [0.5, 2.0, 10.0];
    let values_p = [0.05, 0.5, 0.95];
    let mut worst = 0f64;
    let mut cells = 0;
    let mut rng = stream_rng(101, 0);
    for &c_x in &values_c {
        for &c_y in &values_c {
            for &p_x in &values_p {
                for &p_y in &values_p {
                    let x = WeightedCoin::new(c_x, BernoulliCoin::new(p_x).unwrap()).unwrap();
                    let y = WeightedCoin::new(c_y, BernoulliCoin::new(p_y).unwrap()).unwrap();
                    let mut z = |hits: usize, a: f64| {
                        let f = hits as f64 / TRIALS as f64;
                        worst = worst.max(((f - a) / (a * (1.0 - a) / TRIALS as f64).sqrt()).abs());
                        cells += 1;
                    };
                    let hits = (0..TRIALS)
                        .filter(|_| {
                            two_coin(&x, &y, &mut rng, DEFAULT_MAX_LOOPS)
                                .unwrap()
                                .accepted
                        })
                        .count();
                    z(hits, alpha_barker(c_x, p_x, c_y, p_y).unwrap());
                    let b = PortkeyBeta::new(0.9).unwrap();
                    let hits = (0..TRIALS)
                        .filter(|_| {
                            portkey_two_coin(&x, &y, b, &mut rng, DEFAULT_MAX_LOOPS)
                                .unwrap()
                                .accepted
                        })
                        .count();
                    z(
                        hits,
                        analytic_alpha_portkey(c_x, p_x, c_y, p_y, 0.9).unwrap(),
                    );
                    let hits = (0..TRIALS)
                        .filter(|_| {
                            flipped_portkey_two_coin(&x, &y, b, &mut rng, DEFAULT_MAX_LOOPS)
                                .unwrap()
                                .accepted
                        })
                        .count();
                    z(
                        hits,
                        analytic_alpha_flipped(c_x, p_x, c_y, p_y, 0.9).unwrap(),
                    );
                }
            }
        }
    }
    check(
        "factory frequencies",
        worst <= Z_LIMIT,
        format!("{cells} cells x {TRIALS} trials, max |z| = {worst:.2} (limit {Z_LIMIT})"),
    )
}

/// Chi-square fit of portkey loop counts to the geometric law, 0.001 level.
fn geometric_loops() -> CheckResult {
    let mut rng = stream_rng(102, 0);
    let cases = [
        (1.0, 0.5, 2.0, 0.25, 0.9),
        (10.0, 0.05, 0.5, 0.05, 0.99),
        (2.0, 0.95, 2.0, 0.5, 0.5),
    ];
    let mut worst = 0f64;
    for (c_x, p_x, c_y, p_y, beta) in cases {
        let x = WeightedCoin::new(c_x, BernoulliCoin::new(p_x).unwrap()).unwrap();
        let y = WeightedCoin::new(c_y, BernoulliCoin::new(p_y).unwrap()).unwrap();
        let b = PortkeyBeta::new(beta).unwrap();
        let s = stopping_probability(c_x, p_x, c_y, p_y, beta).unwrap();
        let n = TRIALS as f64;
        let mut k_max = 1;
        while n * s * (1.0 - s).powi(k_max) >= 5.0 {
            k_max += 1;
        }
        let mut observed = vec![0f64; k_max as usize];
        for _ in 0..TRIALS {
            let l = portkey_two_coin(&x, &y, b, &mut rng, DEFAULT_MAX_LOOPS)
                .unwrap()
                .loops;
            observed[(l.min(k_max as u64) - 1) as usize] += 1.0;
        }
        let chi2: f64 = observed
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                let k = i as i32 + 1;
                let p = if k < k_max {
                    s * (1.0 - s).powi(k - 1)
                } else {
                    (1.0 - s).powi(k - 1)
                };
                (o - n * p).powi(2) / (n * p)
            })
            .sum();
        let df = (k_max - 1) as f64;
        // Wilson-Hilferty upper 0.001 point
        let crit = df * (1.0 - 2.0 / (9.0 * df) + 3.090_232 * (2.0 / (9.0 * df)).sqrt()).powi(3);
        worst = worst.max(chi2 / crit);
    }
    check(
        "geometric loop law",
        worst < 1.0,
        format!(
            "max chi2 / critical value = {worst:.3} over {} cells",
            cases.len()
        ),
    )
}

fn detailed_balance() -> CheckResult {
    let mut rng = stream_rng(103, 0);
    let mut worst = 0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mut q = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() + 0.01);
        for mut row in q.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        let scale = DMatrix::from_fn(n, n, |_, _| 1.0 + 4.0 * rng.random::<f64>());
        let beta = rng.random_range(0.05..=1.0);
        for flipped in [false, true] {
            let bounds = scaled_bounds(&pi, &q, &scale, flipped);
            let mode = if flipped {
                AcceptanceMode::Flipped { bounds }
            } else {
                AcceptanceMode::Portkey { bounds }
            };
            let p = finite_state_transition_matrix(&pi, &q, beta, &mode).unwrap();
            worst = worst.max(detailed_balance_residual(&pi, &p));
        }
    }
    check(
        "detailed balance",
        worst < 1e-12,
        format!("max residual {worst:.2e} over 20 targets x 2 modes"),
    )
}

/// The envelope must dominate the Weibull density for every scale.
fn envelope(opts: &ValidateOptions) -> CheckResult {
    let factor = opts.corrupt_envelope.unwrap_or(1.0);
    let mut worst = 0f64;
    for k in [0.5, 1.0, 2.0, 10.0] {
        for i in 1..=200 {
            let theta = 10f64.powf(-3.0 + 4.0 * i as f64 / 200.0);
            let env = factor * weibull_envelope(theta, k).unwrap();
            for j in 0..=200 {
                let lambda = 10f64.powf(-4.0 + 6.0 * j as f64 / 200.0);
                worst = worst.max(weibull_density(theta, lambda, k) / env);
            }
        }
    }
    check(
        "Weibull envelope",
        worst <= 1.0 + 1e-12,
        format!("max density / envelope = {worst:.6}"),
    )
}

/// Random correlation matrix from a Gaussian factor.
fn random_correlation(p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &a * a.transpose();
    DMatrix::from_fn(p, p, |i, j| s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt())
}

/// Bounds from the determinant fit against direct PD tests just inside
/// and just outside each end.
fn r_bounds_oracle() -> CheckResult {
    let mut rng = stream_rng(104, 0);
    let mut bad = 0;
    let n = 50;
    for _ in 0..n {
        let p = rng.random_range(3..=6);
        let r = random_correlation(p, &mut rng);
        let i = rng.random_range(0..p);
        let j = (i + rng.random_range(1..p)) % p;
        let b = r_bounds(&r, i, j).unwrap();
        let pd_at = |v: f64| {
            let mut m = r.clone();
            m[(i, j)] = v;
            m[(j, i)] = v;
            is_positive_definite(&m)
        };
        let eps = 1e-6 * (b.upper - b.lower);
        let ok = pd_at(0.5 * (b.lower + b.upper))
            && pd_at(b.lower + eps)
            && pd_at(b.upper - eps)
            && (b.lower - eps <= -1.0 || !pd_at(b.lower - eps))
            && (b.upper + eps >= 1.0 || !pd_at(b.upper + eps));
        bad += usize::from(!ok);
    }
    check(
        "r_bounds oracle",
        bad == 0,
        format!("{}/{n} random matrices agree with direct PD tests", n - bad),
    )
}

fn beta_one_reduction() -> CheckResult {
    let model = WeibullMixtureTarget::default();
    let seed = SeedRecord::new(105, 0);
    let a = run_chain(
        &model,
        KernelKind::TwoCoin,
        PortkeyBeta::ONE,
        500,
        seed,
        DEFAULT_MAX_LOOPS,
    )
    .unwrap();
    let b = run_chain(
        &model,
        KernelKind::Portkey,
        PortkeyBeta::ONE,
        500,
        seed,
        DEFAULT_MAX_LOOPS,
    )
    .unwrap();
    let weibull = a.states == b.states && a.accepted == b.accepted && a.loops == b.loops;

    let truth = random_correlation(3, &mut stream_rng(105, 1));
    let data = standardize(&synth_data(200, &truth, &mut stream_rng(105, 2)).unwrap());
    let flipped = CorrelationTuning {
        beta_mu: PortkeyBeta::ONE,
        beta_sigma2: PortkeyBeta::ONE,
        ..Default::default()
    };
    let plain = CorrelationTuning {
        kernel: KernelKind::TwoCoin,
        ..flipped
    };
    let run = |tuning| {
        let mut m =
            CorrelationModel::new(data.clone(), CorrelationPrior::default(), tuning).unwrap();
        run_gibbs(&mut m, 200, SeedRecord::new(105, 3))
    };
    let correlation = match (run(flipped), run(plain)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    };
    check(
        "beta = 1 reduction",
        weibull && correlation,
        format!("Weibull identical: {weibull}; correlation identical: {correlation}"),
    )
}

pub fn cmd_validate(opts: &ValidateOptions) -> Vec<CheckResult> {
    vec![
        factory_frequencies(),
        geometric_loops(),
        detailed_balance(),
        envelope(opts),
        r_bounds_oracle(),
        beta_one_reduction(),
    ]
}
