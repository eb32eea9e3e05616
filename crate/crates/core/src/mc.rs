//! Monte-Carlo oracle for the game.
//!
//! Cramér–Lundberg and compound Poisson paths are simulated exactly, event by
//! event. Brownian paths use an Euler grid with step `dt`, so first passages
//! are detected late and extrema are monitored only at grid points; callers
//! account for that with [`bias_allowance`].
//!
//! Every path owns an RNG stream seeded with `mix64(seed, index)`. Per-path
//! results are collected in index order and reduced with a fixed pairwise
//! sum, so estimates are bit-reproducible for any worker count.

use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::GameSolution;
use crate::levy::{GameSpec, LevyModel, ModelParams};
use crate::wiener_hopf::{extrema_density_params, DefectiveExponential, WienerHopfFactors};

/// Environment variable capping the number of simulation workers (0 = auto).
pub const THREADS_ENV: &str = "DYNKIN_THREADS";

/// Acceptance multiplier on the standard error.
pub const SE_MULTIPLIER: f64 = 3.5;

/// Relative slack for the rounding of a mean over identical payoffs; without
/// it an immediate stop, which has zero standard error, can fail by one ulp.
pub const ROUNDING_SLACK: f64 = 1e-12;

fn rounding_floor(value: f64) -> f64 {
    ROUNDING_SLACK * value.abs().max(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub paths: usize,
    pub seed: u64,
    /// Euler step, used by Brownian paths only.
    pub dt: f64,
    /// Paths still running at this time contribute zero payoff.
    pub horizon_cap: f64,
}

impl SimConfig {
    pub fn new(paths: usize, seed: u64, dt: f64, horizon_cap: f64) -> Result<Self> {
        let cfg = Self {
            paths,
            seed,
            dt,
            horizon_cap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `dt = 10⁻⁴·min(1, 1/r)` and `horizon_cap = 30/r`.
    pub fn for_discount(paths: usize, seed: u64, r: f64) -> Self {
        Self {
            paths,
            seed,
            dt: default_dt(r),
            horizon_cap: default_horizon(r),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config("paths must be >= 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon_cap.is_finite() && self.horizon_cap > 0.0) {
            return Err(Error::Config(format!(
                "horizon_cap must be > 0, got {}",
                self.horizon_cap
            )));
        }
        Ok(())
    }
}

pub fn default_dt(r: f64) -> f64 {
    1e-4 * (1.0f64).min(1.0 / r)
}

pub fn default_horizon(r: f64) -> f64 {
    30.0 / r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub estimate: f64,
    pub std_error: f64,
    pub paths_used: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopSide {
    /// Min player stops once `X ≤ level`.
    Lower,
    /// Max player stops once `X ≥ level`.
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdStrategy {
    pub level: f64,
    pub side: StopSide,
}

impl ThresholdStrategy {
    pub fn lower(level: f64) -> Self {
        Self {
            level,
            side: StopSide::Lower,
        }
    }

    pub fn upper(level: f64) -> Self {
        Self {
            level,
            side: StopSide::Upper,
        }
    }
}

/// splitmix64 finalizer applied to `seed + (index + 1)·γ`.
pub fn mix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed, index as u64))
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to build simulation thread pool")
    })
}

/// Runs `f` once per path index; the output is in index order.
fn map_paths<T, F>(cfg: &SimConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    pool().install(|| {
        (0..cfg.paths)
            .into_par_iter()
            .map(|i| f(&mut path_rng(cfg.seed, i)))
            .collect()
    })
}

/// Pairwise summation with a fixed split, independent of scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn report(values: &[f64], cfg: &SimConfig) -> McReport {
    let (estimate, std_error) = mean_and_se(values);
    McReport {
        estimate,
        std_error,
        paths_used: values.len(),
        seed: cfg.seed,
    }
}

/// Distributions needed to advance a path, built once per run.
#[derive(Clone, Copy)]
enum Sampler {
    Brownian {
        drift_step: f64,
        vol_step: f64,
        dt: f64,
    },
    CramerLundberg {
        c: f64,
        arrivals: Exp<f64>,
        claims: Exp<f64>,
    },
    CompoundPoisson {
        arrivals: Exp<f64>,
        p_up: f64,
        down: Exp<f64>,
        up: Exp<f64>,
    },
}

fn exp_dist(rate: f64) -> Exp<f64> {
    Exp::new(rate).expect("validated positive rate")
}

impl Sampler {
    fn new(model: &LevyModel, dt: f64) -> Self {
        match *model.params() {
            ModelParams::BrownianDrift { c, sigma } => Sampler::Brownian {
                drift_step: c * dt,
                vol_step: sigma * dt.sqrt(),
                dt,
            },
            ModelParams::CramerLundberg { c, lambda1, alpha1 } => Sampler::CramerLundberg {
                c,
                arrivals: exp_dist(lambda1),
                claims: exp_dist(alpha1),
            },
            ModelParams::CompoundPoisson {
                lambda1,
                alpha1,
                lambda2,
                alpha2,
            } => Sampler::CompoundPoisson {
                arrivals: exp_dist(lambda1 + lambda2),
                p_up: lambda2 / (lambda1 + lambda2),
                down: exp_dist(alpha1),
                up: exp_dist(alpha2),
            },
        }
    }

    /// `(inf, sup)` of `X − X₀` over `[0, horizon]`.
    fn extrema<R: Rng>(&self, horizon: f64, rng: &mut R) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        match *self {
            Sampler::Brownian {
                drift_step,
                vol_step,
                dt,
            } => {
                let full = (horizon / dt).floor() as u64;
                let mut x = 0.0;
                for _ in 0..full {
                    let z: f64 = StandardNormal.sample(rng);
                    x += drift_step + vol_step * z;
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                let rest = horizon - full as f64 * dt;
                if rest > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    x += drift_step * (rest / dt) + vol_step * (rest / dt).sqrt() * z;
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
            Sampler::CramerLundberg {
                c,
                arrivals,
                claims,
            } => {
                let (mut t, mut x) = (0.0, 0.0);
                loop {
                    let w = arrivals.sample(rng);
                    if t + w >= horizon {
                        hi = hi.max(x + c * (horizon - t));
                        break;
                    }
                    t += w;
                    x += c * w;
                    hi = hi.max(x);
                    x -= claims.sample(rng);
                    lo = lo.min(x);
                }
            }
            Sampler::CompoundPoisson {
                arrivals,
                p_up,
                down,
                up,
            } => {
                let (mut t, mut x) = (0.0, 0.0);
                loop {
                    t += arrivals.sample(rng);
                    if t >= horizon {
                        break;
                    }
                    if rng.random::<f64>() < p_up {
                        x += up.sample(rng);
                        hi = hi.max(x);
                    } else {
                        x -= down.sample(rng);
                        lo = lo.min(x);
                    }
                }
            }
        }
        (lo, hi)
    }

    /// Exit of `(lower, upper)` from `x0`: returns `(time, position, upper_hit)`,
    /// or `None` once `cap` is exceeded.
    fn exit<R: Rng>(
        &self,
        x0: f64,
        lower: f64,
        upper: f64,
        cap: f64,
        rng: &mut R,
    ) -> Option<(f64, f64, bool)> {
        if x0 >= upper {
            return Some((0.0, x0, true));
        }
        if x0 <= lower {
            return Some((0.0, x0, false));
        }
        let (mut t, mut x) = (0.0, x0);
        match *self {
            Sampler::Brownian {
                drift_step,
                vol_step,
                dt,
            } => loop {
                let z: f64 = StandardNormal.sample(rng);
                x += drift_step + vol_step * z;
                t += dt;
                if t > cap {
                    return None;
                }
                if x >= upper {
                    return Some((t, x, true));
                }
                if x <= lower {
                    return Some((t, x, false));
                }
            },
            Sampler::CramerLundberg {
                c,
                arrivals,
                claims,
            } => loop {
                let w = arrivals.sample(rng);
                let to_upper = (upper - x) / c;
                if to_upper <= w {
                    let t_hit = t + to_upper;
                    return (t_hit <= cap).then_some((t_hit, upper, true));
                }
                t += w;
                if t > cap {
                    return None;
                }
                x += c * w - claims.sample(rng);
                if x <= lower {
                    return Some((t, x, false));
                }
            },
            Sampler::CompoundPoisson {
                arrivals,
                p_up,
                down,
                up,
            } => loop {
                t += arrivals.sample(rng);
                if t > cap {
                    return None;
                }
                if rng.random::<f64>() < p_up {
                    x += up.sample(rng);
                    if x >= upper {
                        return Some((t, x, true));
                    }
                } else {
                    x -= down.sample(rng);
                    if x <= lower {
                        return Some((t, x, false));
                    }
                }
            },
        }
    }
}

/// Per-path `(I, S)` of the process started at `x0` and killed at an
/// independent `Exp(r)` time.
pub fn simulate_extrema(
    model: &LevyModel,
    r: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("r must be > 0, got {r}")));
    }
    let sampler = Sampler::new(model, cfg.dt);
    let killing = exp_dist(r);
    Ok(map_paths(cfg, |rng| {
        let e_r = killing.sample(rng);
        let (lo, hi) = sampler.extrema(e_r, rng);
        (x0 + lo, x0 + hi)
    }))
}

/// Space-unit allowance for the Euler discretisation bias; zero for the
/// exact simulators.
pub fn bias_allowance(model: &LevyModel, dt: f64) -> f64 {
    match *model.params() {
        ModelParams::BrownianDrift { sigma, .. } => 5.0 * dt.sqrt() * sigma,
        _ => 0.0,
    }
}

/// Estimates `M_x(σ, τ)` for a pair of threshold rules. The max player's
/// payoff `G₁` wins ties, paths still running at `horizon_cap` pay zero.
pub fn estimate_payoff(
    spec: &GameSpec,
    x0: f64,
    sigma: ThresholdStrategy,
    tau: ThresholdStrategy,
    cfg: &SimConfig,
) -> Result<McReport> {
    cfg.validate()?;
    if sigma.side != StopSide::Lower || tau.side != StopSide::Upper {
        return Err(Error::Config(
            "sigma must be a lower rule and tau an upper rule".into(),
        ));
    }
    if !(sigma.level < tau.level) {
        return Err(Error::Config(format!(
            "lower level {} must be below upper level {}",
            sigma.level, tau.level
        )));
    }
    if cfg.horizon_cap * spec.r() < 20.0 {
        return Err(Error::Config(format!(
            "horizon_cap * r = {} is below 20",
            cfg.horizon_cap * spec.r()
        )));
    }
    let sampler = Sampler::new(spec.model(), cfg.dt);
    let r = spec.r();
    let values = map_paths(cfg, |rng| {
        match sampler.exit(x0, sigma.level, tau.level, cfg.horizon_cap, rng) {
            None => 0.0,
            Some((t, x, true)) => (-r * t).exp() * spec.g1(x),
            Some((t, x, false)) => (-r * t).exp() * spec.g2(x),
        }
    });
    Ok(report(&values, cfg))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PayoffComparison {
    pub x0: f64,
    pub value: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub allowance: f64,
    pub pass: bool,
}

/// Payoff of the equilibrium pair against `V(x0)` at each start point.
pub fn compare_with_value(
    solution: &GameSolution,
    starts: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<PayoffComparison>> {
    let spec = solution.spec();
    let allowance = bias_allowance(spec.model(), cfg.dt);
    starts
        .iter()
        .map(|&x0| {
            let est = estimate_payoff(
                spec,
                x0,
                ThresholdStrategy::lower(solution.x_i()),
                ThresholdStrategy::upper(solution.x_s()),
                cfg,
            )?;
            let value = solution.value(x0);
            let pass = (est.estimate - value).abs()
                <= SE_MULTIPLIER * est.std_error + allowance + rounding_floor(value);
            Ok(PayoffComparison {
                x0,
                value,
                estimate: est.estimate,
                std_error: est.std_error,
                allowance,
                pass,
            })
        })
        .collect()
}

/// `n` equispaced points on `[x_I − 1, x_S + 1]`.
pub fn start_grid(solution: &GameSolution, n: usize) -> Vec<f64> {
    let lo = solution.x_i() - 1.0;
    let hi = solution.x_s() + 1.0;
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    /// Max player moves its threshold to `x_S + offset`; payoff must not exceed `V`.
    MaxPlayer,
    /// Min player moves its threshold to `x_I + offset`; payoff must not fall below `V`.
    MinPlayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SaddleCell {
    pub deviation: Deviation,
    pub offset: f64,
    pub level: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// The bound the estimate is compared against.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaddleReport {
    pub x0: f64,
    pub value: f64,
    pub allowance: f64,
    pub cells: Vec<SaddleCell>,
}

impl SaddleReport {
    pub fn all_pass(&self) -> bool {
        self.cells.iter().all(|c| c.pass)
    }
}

/// One-sided saddle checks: `M_x(σ*, τ_b) ≤ V(x)` and `M_x(σ_a, τ*) ≥ V(x)`
/// for every offset, up to `3.5·SE` plus the discretisation allowance.
pub fn saddle_check(
    spec: &GameSpec,
    x0: f64,
    solution: &GameSolution,
    offsets: &[f64],
    cfg: &SimConfig,
) -> Result<SaddleReport> {
    let (x_i, x_s) = (solution.x_i(), solution.x_s());
    for &a in offsets {
        for &b in offsets {
            if !(x_i + a < x_s + b) {
                return Err(Error::Config(format!(
                    "offsets {a} and {b} reverse the threshold order"
                )));
            }
        }
    }
    let value = solution.value(x0);
    let allowance = bias_allowance(spec.model(), cfg.dt);
    let mut cells = Vec::with_capacity(2 * offsets.len());
    for &b in offsets {
        let level = x_s + b;
        let est = estimate_payoff(
            spec,
            x0,
            ThresholdStrategy::lower(x_i),
            ThresholdStrategy::upper(level),
            cfg,
        )?;
        let bound = value + SE_MULTIPLIER * est.std_error + allowance + rounding_floor(value);
        cells.push(SaddleCell {
            deviation: Deviation::MaxPlayer,
            offset: b,
            level,
            estimate: est.estimate,
            std_error: est.std_error,
            bound,
            pass: est.estimate <= bound,
        });
    }
    for &a in offsets {
        let level = x_i + a;
        let est = estimate_payoff(
            spec,
            x0,
            ThresholdStrategy::lower(level),
            ThresholdStrategy::upper(x_s),
            cfg,
        )?;
        let bound = value - SE_MULTIPLIER * est.std_error - allowance - rounding_floor(value);
        cells.push(SaddleCell {
            deviation: Deviation::MinPlayer,
            offset: a,
            level,
            estimate: est.estimate,
            std_error: est.std_error,
            bound,
            pass: est.estimate >= bound,
        });
    }
    Ok(SaddleReport {
        x0,
        value,
        allowance,
        cells,
    })
}

/// Kolmogorov–Smirnov distance between sorted samples and a law that may
/// carry an atom.
pub fn ks_statistic(sorted: &[f64], law: &DefectiveExponential) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let above = (k + 1) as f64 / n - law.cdf(x);
            let below = law.cdf_left(x) - k as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov critical value `sqrt(−ln(α/2)/2)/√n`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

pub const KS_ALPHA: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LawCheck {
    pub atom_expected: f64,
    pub atom_estimate: f64,
    pub atom_std_error: f64,
    pub atom_pass: bool,
    pub mean_expected: f64,
    pub mean_estimate: f64,
    pub mean_std_error: f64,
    pub mean_pass: bool,
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub ks_pass: bool,
}

impl LawCheck {
    pub fn all_pass(&self) -> bool {
        self.atom_pass && self.mean_pass && self.ks_pass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtremaCheck {
    pub paths: usize,
    pub infimum: LawCheck,
    pub supremum: LawCheck,
}

fn law_check(mut samples: Vec<f64>, law: &DefectiveExponential) -> LawCheck {
    let n = samples.len();
    let atoms: Vec<f64> = samples
        .iter()
        .map(|&x| if x == 0.0 { 1.0 } else { 0.0 })
        .collect();
    let (atom_estimate, atom_se) = mean_and_se(&atoms);
    let (mean_estimate, mean_se) = mean_and_se(&samples);
    samples.sort_by(f64::total_cmp);
    let ks = ks_statistic(&samples, law);
    let crit = ks_critical(n, KS_ALPHA);
    // a vanishing atom has a degenerate (zero) standard error
    let atom_pass = if law.atom == 0.0 {
        atom_estimate == 0.0
    } else {
        (atom_estimate - law.atom).abs() <= SE_MULTIPLIER * atom_se
    };
    LawCheck {
        atom_expected: law.atom,
        atom_estimate,
        atom_std_error: atom_se,
        atom_pass,
        mean_expected: law.mean(),
        mean_estimate,
        mean_std_error: mean_se,
        mean_pass: (mean_estimate - law.mean()).abs() <= SE_MULTIPLIER * mean_se,
        ks_statistic: ks,
        ks_critical: crit,
        ks_pass: ks < crit,
    }
}

/// Compares simulated killed extrema with the laws implied by `factors`.
pub fn extrema_check(
    model: &LevyModel,
    r: f64,
    factors: &WienerHopfFactors,
    cfg: &SimConfig,
) -> Result<ExtremaCheck> {
    let samples = simulate_extrema(model, r, 0.0, cfg)?;
    let laws = extrema_density_params(factors);
    let (infs, sups): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    Ok(ExtremaCheck {
        paths: cfg.paths,
        infimum: law_check(infs, &laws.infimum),
        supremum: law_check(sups, &laws.supremum),
    })
}
