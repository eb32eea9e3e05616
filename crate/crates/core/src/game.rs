//! Closed-form resolution of the linear-payoff Dynkin game.
//!
//! Given exponential-type laws for the killed extrema, the game reduces to a
//! scalar equation for the gap `u = x_S − x_I`, a 2×2 linear system for the
//! coefficients `A_I`, `A_S` and explicit formulas for the thresholds. The
//! value function is
//!
//! ```text
//! V(x) = x + δ                                   x ≤ x_I
//!      = A_I e^{−r_I (x − x_S)} + A_S e^{r_S (x − x_I)}   x_I ≤ x ≤ x_S
//!      = x − δ                                   x ≥ x_S
//! ```
//!
//! Internally the coefficients are kept in the scaled form
//! `a_I = A_I e^{r_I u}`, `a_S = A_S e^{r_S u}` so that every exponential that
//! is evaluated has a non-positive argument.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::GameSpec;
use crate::wiener_hopf::{wh_factors, WienerHopfFactors};

/// Tolerance on `|f(u)|` for the threshold equation.
pub const U_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_GRID_SIZE: usize = 1001;

const BISECTION_LIMIT: usize = 400;
const NEWTON_STEPS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GameConstants {
    /// `−E I = (1 − π_I)/r_I`
    pub e_i: f64,
    /// `E S = (1 − π_S)/r_S`
    pub e_s: f64,
    /// `1 / E e^{−r_I S}`
    pub f_i: f64,
    /// `1 / E e^{r_S I}`
    pub f_s: f64,
    pub g_i: f64,
    pub g_s: f64,
}

pub fn game_constants(factors: &WienerHopfFactors) -> GameConstants {
    let WienerHopfFactors {
        r_i,
        r_s,
        pi_i,
        pi_s,
    } = *factors;
    let f_i = (r_i + r_s) / (r_i + pi_i * r_s);
    let f_s = (r_i + r_s) / (pi_s * r_i + r_s);
    GameConstants {
        e_i: (1.0 - pi_i) / r_i,
        e_s: (1.0 - pi_s) / r_s,
        f_i,
        f_s,
        // F − 1 written out to keep full precision when π is close to 1
        g_i: (1.0 - pi_i) * r_s / (r_i + pi_i * r_s),
        g_s: (1.0 - pi_s) * r_i / (pi_s * r_i + r_s),
    }
}

/// `f(u) = u − 2δ − E_I − E_S − RHS(u)`; its unique positive root is the gap.
#[derive(Clone, Copy, Debug)]
pub struct ThresholdEquation {
    c: GameConstants,
    r_i: f64,
    r_s: f64,
    delta: f64,
}

impl ThresholdEquation {
    pub fn new(constants: &GameConstants, factors: &WienerHopfFactors, delta: f64) -> Self {
        Self {
            c: *constants,
            r_i: factors.r_i,
            r_s: factors.r_s,
            delta,
        }
    }

    /// Upper end of the bracket, where `f > 0`.
    pub fn bracket_hi(&self) -> f64 {
        2.0 * self.delta + self.c.e_i + self.c.e_s
    }

    // numerator and denominator of RHS divided by e^{(r_I + r_S) u}
    fn parts(&self, u: f64) -> (f64, f64, f64, f64) {
        let c = &self.c;
        let k = self.r_i + self.r_s;
        let ei = (-self.r_i * u).exp();
        let es = (-self.r_s * u).exp();
        let ek = (-k * u).exp();
        let num = -c.e_i * c.f_s * ei - c.e_s * c.f_i * es + 2.0 * c.e_s * c.f_s * c.g_i * ek;
        let den = 1.0 - c.g_i * c.g_s * ek;
        let dnum = c.e_i * c.f_s * self.r_i * ei + c.e_s * c.f_i * self.r_s * es
            - 2.0 * c.e_s * c.f_s * c.g_i * k * ek;
        let dden = c.g_i * c.g_s * k * ek;
        (num, den, dnum, dden)
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u == 0.0 {
            // RHS(0) = −(E_I + E_S); taken as a limit when the denominator vanishes
            return -2.0 * self.delta;
        }
        let (num, den, _, _) = self.parts(u);
        u - 2.0 * self.delta - self.c.e_i - self.c.e_s - num / den
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let (num, den, dnum, dden) = self.parts(u);
        1.0 - (dnum * den - num * dden) / (den * den)
    }
}

/// Bisection on `[0, 2δ + E_I + E_S]` until `|f| ≤ 10⁻¹²`, then a few
/// guarded Newton steps.
pub fn solve_u(constants: &GameConstants, factors: &WienerHopfFactors, delta: f64) -> Result<f64> {
    solve_u_with_tolerance(constants, factors, delta, U_TOLERANCE)
}

pub fn solve_u_with_tolerance(
    constants: &GameConstants,
    factors: &WienerHopfFactors,
    delta: f64,
    tolerance: f64,
) -> Result<f64> {
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be > 0, got {tolerance}"
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be > 0, got {delta}"
        )));
    }
    let eq = ThresholdEquation::new(constants, factors, delta);
    let (mut lo, mut hi) = (0.0, eq.bracket_hi());
    let f_hi = eq.eval(hi);
    if f_hi.abs() <= tolerance {
        // RHS underflows at the bracket end: the root sits on it within float error
        return Ok(hi);
    }
    if !(f_hi > 0.0) {
        return Err(Error::Consistency(format!(
            "threshold equation not bracketed: f({hi}) = {f_hi}"
        )));
    }

    let mut u = 0.5 * (lo + hi);
    let mut fu = eq.eval(u);
    let mut iterations = 0;
    while fu.abs() > tolerance {
        if fu < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        if mid == lo || mid == hi || iterations >= BISECTION_LIMIT {
            break;
        }
        u = mid;
        fu = eq.eval(u);
    }

    for _ in 0..NEWTON_STEPS {
        if fu == 0.0 {
            break;
        }
        let d = eq.derivative(u);
        let next = u - fu / d;
        if !(next > lo && next < hi) {
            break;
        }
        let f_next = eq.eval(next);
        if f_next.abs() >= fu.abs() {
            break;
        }
        u = next;
        fu = f_next;
    }

    if fu.abs() > tolerance {
        return Err(Error::IterationLimit(iterations));
    }
    Ok(u)
}

/// `(A_I, A_S)` solving the linear system at gap `u`.
pub fn compute_coefficients(
    u: f64,
    constants: &GameConstants,
    factors: &WienerHopfFactors,
) -> Result<(f64, f64)> {
    let (a_i, a_s) = scaled_coefficients(u, constants, factors)?;
    Ok((
        a_i * (-factors.r_i * u).exp(),
        a_s * (-factors.r_s * u).exp(),
    ))
}

fn scaled_coefficients(
    u: f64,
    c: &GameConstants,
    factors: &WienerHopfFactors,
) -> Result<(f64, f64)> {
    let ei = (-factors.r_i * u).exp();
    let es = (-factors.r_s * u).exp();
    let den = 1.0 - c.g_i * c.g_s * ei * es;
    if !(u > 0.0 && den > 0.0) {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok((
        (-c.e_i + c.e_s * c.g_i * es) / den,
        (c.e_s - c.e_i * c.g_s * ei) / den,
    ))
}

/// Thresholds from the boundary conditions `Q_I(x_I) = 0`, `Q_S(x_S) = 0`,
/// cross-checked against continuity of `V` at both points.
pub fn compute_thresholds(
    u: f64,
    a_i: f64,
    a_s: f64,
    constants: &GameConstants,
    factors: &WienerHopfFactors,
    delta: f64,
) -> Result<(f64, f64)> {
    let scaled = (a_i * (factors.r_i * u).exp(), a_s * (factors.r_s * u).exp());
    thresholds_from_scaled(u, scaled, constants, factors, delta)
}

// Continuity is checked on the scaled pair: for large `r·u` the unscaled
// coefficient underflows while `e^{r u}` overflows.
fn thresholds_from_scaled(
    u: f64,
    (scaled_i, scaled_s): (f64, f64),
    constants: &GameConstants,
    factors: &WienerHopfFactors,
    delta: f64,
) -> Result<(f64, f64)> {
    let c = constants;
    let a_i = scaled_i * (-factors.r_i * u).exp();
    let a_s = scaled_s * (-factors.r_s * u).exp();
    let x_i = -delta - c.e_i + c.f_i * a_s;
    let x_s = delta + c.e_s + c.f_s * a_i;
    let gap_err = (x_s - x_i - u).abs();
    if gap_err > 1e-10 * u.max(1.0) {
        return Err(Error::Consistency(format!(
            "x_S − x_I differs from u by {gap_err:e}"
        )));
    }
    let lower = scaled_i + a_s - (x_i + delta);
    let upper = a_i + scaled_s - (x_s - delta);
    let scale = x_i.abs().max(x_s.abs()).max(1.0);
    if !(lower.abs() <= 1e-9 * scale && upper.abs() <= 1e-9 * scale) {
        return Err(Error::Consistency(format!(
            "continuity residuals {lower:e}, {upper:e}"
        )));
    }
    Ok((x_i, x_s))
}

/// Outcome of the hypothesis checks on a candidate solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub sandwich_ok: bool,
    /// Minimum of `min(V − G₁, G₂ − V)` over `[x_I, x_S]`. Zero at the
    /// thresholds by construction.
    pub sandwich_worst_margin: f64,
    pub qi_monotone_ok: bool,
    pub qi_worst_derivative: f64,
    pub qs_monotone_ok: bool,
    pub qs_worst_derivative: f64,
    pub qi_zero_residual: f64,
    pub qs_zero_residual: f64,
    pub grid_size: usize,
}

impl ConditionReport {
    pub const SANDWICH_TOLERANCE: f64 = 1e-9;
    pub const ZERO_TOLERANCE: f64 = 1e-9;
    pub const MONOTONE_TOLERANCE: f64 = 1e-12;

    pub fn all_ok(&self) -> bool {
        self.sandwich_ok
            && self.qi_monotone_ok
            && self.qs_monotone_ok
            && self.qi_zero_residual <= Self::ZERO_TOLERANCE
            && self.qs_zero_residual <= Self::ZERO_TOLERANCE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothPasting {
    /// `V′(x_I+) − V′(x_I−)`
    pub jump_i: f64,
    /// `V′(x_S+) − V′(x_S−)`
    pub jump_s: f64,
    /// `−π_I Q_I′(x_I−)`, the atom-formula prediction for `jump_i`.
    pub predicted_i: f64,
    /// `π_S Q_S′(x_S+)`
    pub predicted_s: f64,
}

impl SmoothPasting {
    pub const TOLERANCE: f64 = 1e-8;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameSolution {
    spec: GameSpec,
    factors: WienerHopfFactors,
    constants: GameConstants,
    u: f64,
    x_i: f64,
    x_s: f64,
    // A_I e^{r_I u} and A_S e^{r_S u}
    #[serde(skip)]
    scaled_i: f64,
    #[serde(skip)]
    scaled_s: f64,
    checks: Option<ConditionReport>,
    pasting: Option<SmoothPasting>,
    warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    StopMin,
    Continue,
    StopMax,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::StopMin => "stop_min",
            Region::Continue => "continue",
            Region::StopMax => "stop_max",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Residual target for the threshold equation.
    pub tolerance: f64,
    /// Sample count for each hypothesis check.
    pub grid_size: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: U_TOLERANCE,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

/// Solve the game and run the hypothesis checks with the default grid.
pub fn solve_game(spec: &GameSpec) -> Result<GameSolution> {
    solve_game_with(spec, &SolveOptions::default())
}

pub fn solve_game_with_grid(spec: &GameSpec, grid_size: usize) -> Result<GameSolution> {
    solve_game_with(
        spec,
        &SolveOptions {
            grid_size,
            ..SolveOptions::default()
        },
    )
}

pub fn solve_game_with(spec: &GameSpec, opts: &SolveOptions) -> Result<GameSolution> {
    let grid_size = opts.grid_size;
    spec.model().admissible_alpha(spec.r())?;
    let factors = wh_factors(spec.model(), spec.r())?;
    let constants = game_constants(&factors);
    let u = solve_u_with_tolerance(&constants, &factors, spec.delta(), opts.tolerance)?;
    let (scaled_i, scaled_s) = scaled_coefficients(u, &constants, &factors)?;
    let (a_i, a_s) = (
        scaled_i * (-factors.r_i * u).exp(),
        scaled_s * (-factors.r_s * u).exp(),
    );
    let (x_i, _) =
        thresholds_from_scaled(u, (scaled_i, scaled_s), &constants, &factors, spec.delta())?;

    let mut solution = GameSolution {
        spec: *spec,
        factors,
        constants,
        u,
        x_i,
        x_s: x_i + u,
        scaled_i,
        scaled_s,
        checks: None,
        pasting: None,
        warnings: Vec::new(),
    };
    if !(a_i < 0.0 && a_s > 0.0) {
        solution.warnings.push(format!(
            "unexpected coefficient signs: A_I = {a_i:e}, A_S = {a_s:e}"
        ));
    }
    solution.pasting = Some(smooth_pasting_jumps(&solution)?);
    let report = verify_conditions(&solution, grid_size)?;
    if !report.all_ok() {
        solution
            .warnings
            .push("hypothesis checks failed; solution is not certified".to_string());
    }
    solution.checks = Some(report);
    Ok(solution)
}

impl GameSolution {
    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn factors(&self) -> &WienerHopfFactors {
        &self.factors
    }

    pub fn constants(&self) -> &GameConstants {
        &self.constants
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn x_i(&self) -> f64 {
        self.x_i
    }

    pub fn x_s(&self) -> f64 {
        self.x_s
    }

    pub fn a_i(&self) -> f64 {
        self.scaled_i * (-self.factors.r_i * self.u).exp()
    }

    pub fn a_s(&self) -> f64 {
        self.scaled_s * (-self.factors.r_s * self.u).exp()
    }

    pub fn checks(&self) -> Option<&ConditionReport> {
        self.checks.as_ref()
    }

    pub fn pasting(&self) -> Option<&SmoothPasting> {
        self.pasting.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// True when every hypothesis check passed.
    pub fn certified(&self) -> bool {
        self.checks.is_some_and(|c| c.all_ok())
    }

    /// Copy with the coefficients replaced and all checks cleared. Used for
    /// negative controls and sensitivity studies.
    pub fn with_coefficients(&self, a_i: f64, a_s: f64) -> Self {
        let mut s = self.clone();
        s.scaled_i = a_i * (self.factors.r_i * self.u).exp();
        s.scaled_s = a_s * (self.factors.r_s * self.u).exp();
        s.checks = None;
        s.pasting = None;
        s
    }

    pub fn region(&self, x: f64) -> Region {
        if x < self.x_i {
            Region::StopMin
        } else if x > self.x_s {
            Region::StopMax
        } else {
            Region::Continue
        }
    }

    /// The value function. The closed interval `[x_I, x_S]` uses the
    /// continuation branch.
    pub fn value(&self, x: f64) -> f64 {
        match self.region(x) {
            Region::StopMin => self.spec.g2(x),
            Region::StopMax => self.spec.g1(x),
            Region::Continue => {
                self.scaled_i * (-self.factors.r_i * (x - self.x_i)).exp()
                    + self.scaled_s * (self.factors.r_s * (x - self.x_s)).exp()
            }
        }
    }

    /// `(Q_I(x), Q_S(x))`.
    pub fn averaging_functions(&self, x: f64) -> (f64, f64) {
        let c = &self.constants;
        let delta = self.spec.delta();
        let q_i = if x <= self.x_i {
            x + delta + c.e_i - c.f_i * self.scaled_s * (self.factors.r_s * (x - self.x_s)).exp()
        } else {
            0.0
        };
        let q_s = if x >= self.x_s {
            x - delta - c.e_s - c.f_s * self.scaled_i * (-self.factors.r_i * (x - self.x_i)).exp()
        } else {
            0.0
        };
        (q_i, q_s)
    }

    /// `Q_I′(x)` on `x ≤ x_I`.
    pub fn q_i_derivative(&self, x: f64) -> f64 {
        1.0 - self.constants.f_i
            * self.factors.r_s
            * self.scaled_s
            * (self.factors.r_s * (x - self.x_s)).exp()
    }

    /// `Q_S′(x)` on `x ≥ x_S`.
    pub fn q_s_derivative(&self, x: f64) -> f64 {
        1.0 + self.constants.f_s
            * self.factors.r_i
            * self.scaled_i
            * (-self.factors.r_i * (x - self.x_i)).exp()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let last = (n - 1) as f64;
    (0..n).map(move |k| {
        if k + 1 == n {
            hi
        } else {
            lo + (hi - lo) * k as f64 / last
        }
    })
}

pub fn verify_conditions(solution: &GameSolution, grid_size: usize) -> Result<ConditionReport> {
    if grid_size < 101 {
        return Err(Error::InvalidParameter(format!(
            "grid_size must be >= 101, got {grid_size}"
        )));
    }
    let s = solution;
    let spec = s.spec;
    let sandwich_worst_margin = linspace(s.x_i, s.x_s, grid_size)
        .map(|x| {
            let v = s.value(x);
            (v - spec.g1(x)).min(spec.g2(x) - v)
        })
        .fold(f64::INFINITY, f64::min);

    let span = 10.0 * (s.x_s - s.x_i);
    let qi_worst_derivative = linspace(s.x_i - span, s.x_i, grid_size)
        .map(|x| s.q_i_derivative(x))
        .fold(f64::INFINITY, f64::min);
    let qs_worst_derivative = linspace(s.x_s, s.x_s + span, grid_size)
        .map(|x| s.q_s_derivative(x))
        .fold(f64::INFINITY, f64::min);

    let (qi_at, _) = s.averaging_functions(s.x_i);
    let (_, qs_at) = s.averaging_functions(s.x_s);

    Ok(ConditionReport {
        sandwich_ok: sandwich_worst_margin >= -ConditionReport::SANDWICH_TOLERANCE,
        sandwich_worst_margin,
        qi_monotone_ok: qi_worst_derivative >= -ConditionReport::MONOTONE_TOLERANCE,
        qi_worst_derivative,
        qs_monotone_ok: qs_worst_derivative >= -ConditionReport::MONOTONE_TOLERANCE,
        qs_worst_derivative,
        qi_zero_residual: qi_at.abs(),
        qs_zero_residual: qs_at.abs(),
        grid_size,
    })
}

/// Derivative jumps of `V` at both thresholds, checked against the atom
/// formula `W′(x₀+) − W′(x₀−) = Q′(x₀+)·P(S = 0)` (and its mirror for `I`).
pub fn smooth_pasting_jumps(solution: &GameSolution) -> Result<SmoothPasting> {
    let s = solution;
    let WienerHopfFactors {
        r_i,
        r_s,
        pi_i,
        pi_s,
    } = s.factors;
    // V′ on the continuation branch is −r_I a_I e^{−r_I(x−x_I)} + r_S a_S e^{r_S(x−x_S)}
    let slope_after_i = -r_i * s.scaled_i + r_s * s.a_s();
    let slope_before_s = -r_i * s.a_i() + r_s * s.scaled_s;
    let jump_i = slope_after_i - 1.0;
    let jump_s = 1.0 - slope_before_s;
    let predicted_i = -pi_i * s.q_i_derivative(s.x_i);
    let predicted_s = pi_s * s.q_s_derivative(s.x_s);
    if (jump_i - predicted_i).abs() > SmoothPasting::TOLERANCE
        || (jump_s - predicted_s).abs() > SmoothPasting::TOLERANCE
    {
        return Err(Error::Consistency(format!(
            "derivative jumps ({jump_i:e}, {jump_s:e}) disagree with atom prediction ({predicted_i:e}, {predicted_s:e})"
        )));
    }
    Ok(SmoothPasting {
        jump_i,
        jump_s,
        predicted_i,
        predicted_s,
    })
}
