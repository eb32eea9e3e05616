//! Wiener–Hopf factors of the three model families.
//!
//! For each family the infimum `I` and supremum `S` of the process killed at
//! an independent `Exp(r)` time have (possibly defective) exponential laws:
//! `−I` is exponential with rate `r_I` mixed with an atom of mass `π_I` at
//! zero, and likewise `S` with `r_S`, `π_S`. The rates are the magnitudes of
//! the two real roots `−r_I < 0 < r_S` of `Ψ(z) = r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{LevyModel, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WienerHopfFactors {
    pub r_i: f64,
    pub r_s: f64,
    pub pi_i: f64,
    pub pi_s: f64,
}

/// Roots of `a z² + b z + c = 0` with `a > 0`, `c < 0`, returned as
/// `(negative, positive)`. The larger-magnitude root is formed first and the
/// other one from the product `c / a`, which avoids cancellation.
fn split_quadratic(a: f64, b: f64, c: f64) -> (f64, f64) {
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q = -0.5 * (b + b.signum() * disc);
    let (z1, z2) = if q == 0.0 {
        // b == 0 and disc == 0 cannot happen for c < 0; keep symmetric case exact
        let z = (-c / a).sqrt();
        (-z, z)
    } else {
        (q / a, c / q)
    };
    if z1 < z2 {
        (z1, z2)
    } else {
        (z2, z1)
    }
}

/// Closed-form `(r_I, r_S)` for the given model and discount rate.
pub fn solve_roots(model: &LevyModel, r: f64) -> Result<(f64, f64)> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("r must be > 0, got {r}")));
    }
    let (neg, pos) = match *model.params() {
        // σ²/2 z² + c z − r = 0
        ModelParams::BrownianDrift { c, sigma } => split_quadratic(0.5 * sigma * sigma, c, -r),
        // c z² + (c α₁ − λ₁ − r) z − r α₁ = 0
        ModelParams::CramerLundberg { c, lambda1, alpha1 } => {
            split_quadratic(c, c * alpha1 - lambda1 - r, -r * alpha1)
        }
        ModelParams::CompoundPoisson {
            lambda1,
            alpha1,
            lambda2,
            alpha2,
        } => split_quadratic(
            r + lambda1 + lambda2,
            alpha1 * (lambda2 + r) - alpha2 * (lambda1 + r),
            -r * alpha1 * alpha2,
        ),
    };
    let (r_i, r_s) = (-neg, pos);

    let tolerance = 1e-10 * r.max(1.0);
    for (which, z) in [("left root", -r_i), ("right root", r_s)] {
        let residual = (model.psi(z)? - r).abs();
        if !(residual <= tolerance) {
            return Err(Error::RootResidual {
                which,
                residual,
                tolerance,
            });
        }
    }
    Ok((r_i, r_s))
}

pub fn wh_factors(model: &LevyModel, r: f64) -> Result<WienerHopfFactors> {
    let (r_i, r_s) = solve_roots(model, r)?;
    let (pi_i, pi_s) = match *model.params() {
        ModelParams::BrownianDrift { .. } => (0.0, 0.0),
        ModelParams::CramerLundberg { c, .. } => (r / (r_s * c), 0.0),
        ModelParams::CompoundPoisson { alpha1, alpha2, .. } => (r_i / alpha1, r_s / alpha2),
    };
    Ok(WienerHopfFactors {
        r_i,
        r_s,
        pi_i,
        pi_s,
    })
}

/// Which side of zero a defective exponential law lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Negative,
    Positive,
}

/// Atom of mass `atom` at zero plus `(1 − atom)·rate·e^{−rate|x|}` on one side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectiveExponential {
    pub atom: f64,
    pub rate: f64,
    pub side: Side,
}

impl DefectiveExponential {
    /// Density of the absolutely continuous part (the atom is excluded).
    pub fn density(&self, x: f64) -> f64 {
        let y = match self.side {
            Side::Negative => -x,
            Side::Positive => x,
        };
        if y > 0.0 {
            (1.0 - self.atom) * self.rate * (-self.rate * y).exp()
        } else {
            0.0
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.side {
            Side::Positive => {
                if x < 0.0 {
                    0.0
                } else {
                    1.0 - (1.0 - self.atom) * (-self.rate * x).exp()
                }
            }
            Side::Negative => {
                if x < 0.0 {
                    (1.0 - self.atom) * (self.rate * x).exp()
                } else {
                    1.0
                }
            }
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self.side {
            Side::Positive => {
                if x <= 0.0 {
                    0.0
                } else {
                    self.cdf(x)
                }
            }
            Side::Negative => {
                if x <= 0.0 {
                    (1.0 - self.atom) * (self.rate * x).exp()
                } else {
                    1.0
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        let m = (1.0 - self.atom) / self.rate;
        match self.side {
            Side::Negative => -m,
            Side::Positive => m,
        }
    }

    /// `E e^{zX}`, finite for `z` on the light side of `−rate` / `rate`.
    pub fn mgf(&self, z: f64) -> f64 {
        match self.side {
            Side::Negative => self.atom + (1.0 - self.atom) * self.rate / (self.rate + z),
            Side::Positive => self.atom + (1.0 - self.atom) * self.rate / (self.rate - z),
        }
    }

    /// Atom plus the integral of the density; equals one.
    pub fn total_mass(&self) -> f64 {
        self.atom + (1.0 - self.atom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremaLaws {
    pub infimum: DefectiveExponential,
    pub supremum: DefectiveExponential,
}

pub fn extrema_density_params(factors: &WienerHopfFactors) -> ExtremaLaws {
    ExtremaLaws {
        infimum: DefectiveExponential {
            atom: factors.pi_i,
            rate: factors.r_i,
            side: Side::Negative,
        },
        supremum: DefectiveExponential {
            atom: factors.pi_s,
            rate: factors.r_s,
            side: Side::Positive,
        },
    }
}

/// 101 equispaced points on `(−r_I + w, r_S − w)` with `w = (r_I + r_S)·10⁻³`.
pub fn standard_identity_grid(factors: &WienerHopfFactors) -> Vec<f64> {
    let w = (factors.r_i + factors.r_s) * 1e-3;
    let lo = -factors.r_i + w;
    let hi = factors.r_s - w;
    (0..101)
        .map(|k| lo + (hi - lo) * k as f64 / 100.0)
        .collect()
}

/// Maximum relative error between `r / (r − Ψ(z))` and the product of the
/// transforms of `I` and `S` over `grid`.
pub fn check_wh_identity(
    model: &LevyModel,
    r: f64,
    factors: &WienerHopfFactors,
    grid: &[f64],
) -> Result<f64> {
    let lo = -factors.r_i + 1e-6;
    let hi = factors.r_s - 1e-6;
    let laws = extrema_density_params(factors);
    let mut worst = 0.0f64;
    for &z in grid {
        if !(z > lo && z < hi) {
            return Err(Error::Domain { z, lo, hi });
        }
        let lhs = r / (r - model.psi(z)?);
        let rhs = laws.infimum.mgf(z) * laws.supremum.mgf(z);
        worst = worst.max(((lhs - rhs) / lhs).abs());
    }
    Ok(worst)
}
