//! Lévy process families with exponential-type Wiener–Hopf factors.
//!
//! Three families are supported: Brownian motion with drift, the
//! Cramér–Lundberg process (positive drift, exponential downward claims) and
//! the compound Poisson process with two-sided exponential jumps. Each one is
//! described by its characteristic exponent `Ψ`, defined by
//! `E exp(z X_t) = exp(t Ψ(z))` for real `z` inside the analyticity strip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw parameters of a model, as they appear in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParams {
    /// `X_t = c t + σ W_t`.
    BrownianDrift { c: f64, sigma: f64 },
    /// `X_t = c t − Σ Y_i`, claims `Y_i ~ Exp(alpha1)` arriving at rate `lambda1`.
    CramerLundberg { c: f64, lambda1: f64, alpha1: f64 },
    /// Downward jumps `Exp(alpha1)` at rate `lambda1`, upward jumps `Exp(alpha2)` at rate `lambda2`.
    CompoundPoisson {
        lambda1: f64,
        alpha1: f64,
        lambda2: f64,
        alpha2: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BrownianDrift,
    CramerLundberg,
    CompoundPoisson,
}

/// A validated Lévy model. Only constructible through the checked
/// constructors (or deserialization, which runs the same checks).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParams", into = "ModelParams")]
pub struct LevyModel(ModelParams);

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be > 0, got {v}"
        )))
    }
}

fn require_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

impl TryFrom<ModelParams> for LevyModel {
    type Error = Error;

    fn try_from(p: ModelParams) -> Result<Self> {
        match p {
            ModelParams::BrownianDrift { c, sigma } => {
                require_finite("c", c)?;
                require_positive("sigma", sigma)?;
            }
            ModelParams::CramerLundberg { c, lambda1, alpha1 } => {
                require_positive("c", c)?;
                require_positive("lambda1", lambda1)?;
                require_positive("alpha1", alpha1)?;
            }
            ModelParams::CompoundPoisson {
                lambda1,
                alpha1,
                lambda2,
                alpha2,
            } => {
                require_positive("lambda1", lambda1)?;
                require_positive("alpha1", alpha1)?;
                require_positive("lambda2", lambda2)?;
                require_positive("alpha2", alpha2)?;
            }
        }
        Ok(LevyModel(p))
    }
}

impl From<LevyModel> for ModelParams {
    fn from(m: LevyModel) -> Self {
        m.0
    }
}

impl LevyModel {
    pub fn brownian_drift(c: f64, sigma: f64) -> Result<Self> {
        ModelParams::BrownianDrift { c, sigma }.try_into()
    }

    pub fn cramer_lundberg(c: f64, lambda1: f64, alpha1: f64) -> Result<Self> {
        ModelParams::CramerLundberg { c, lambda1, alpha1 }.try_into()
    }

    /// Argument order follows the jump sides: `(lambda1, alpha1)` downward,
    /// `(lambda2, alpha2)` upward.
    pub fn compound_poisson(lambda1: f64, alpha1: f64, lambda2: f64, alpha2: f64) -> Result<Self> {
        ModelParams::CompoundPoisson {
            lambda1,
            alpha1,
            lambda2,
            alpha2,
        }
        .try_into()
    }

    pub fn params(&self) -> &ModelParams {
        &self.0
    }

    pub fn family(&self) -> Family {
        match self.0 {
            ModelParams::BrownianDrift { .. } => Family::BrownianDrift,
            ModelParams::CramerLundberg { .. } => Family::CramerLundberg,
            ModelParams::CompoundPoisson { .. } => Family::CompoundPoisson,
        }
    }

    /// Open interval `(lo, hi)` of real arguments where `Ψ` is finite.
    pub fn strip(&self) -> (f64, f64) {
        match self.0 {
            ModelParams::BrownianDrift { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ModelParams::CramerLundberg { alpha1, .. } => (-alpha1, f64::INFINITY),
            ModelParams::CompoundPoisson { alpha1, alpha2, .. } => (-alpha1, alpha2),
        }
    }

    /// Characteristic exponent at a real argument.
    pub fn psi(&self, z: f64) -> Result<f64> {
        let (lo, hi) = self.strip();
        if !(z > lo && z < hi) {
            return Err(Error::Domain { z, lo, hi });
        }
        Ok(self.psi_unchecked(z))
    }

    pub(crate) fn psi_unchecked(&self, z: f64) -> f64 {
        match self.0 {
            ModelParams::BrownianDrift { c, sigma } => 0.5 * sigma * sigma * z * z + c * z,
            ModelParams::CramerLundberg { c, lambda1, alpha1 } => {
                c * z - lambda1 * z / (alpha1 + z)
            }
            ModelParams::CompoundPoisson {
                lambda1,
                alpha1,
                lambda2,
                alpha2,
            } => -lambda1 * z / (alpha1 + z) + lambda2 * z / (alpha2 - z),
        }
    }

    /// Search grid for [`admissible_alpha`](Self::admissible_alpha): `s·2^k`
    /// clipped to the open symmetric part of the strip, with `s` equal to the
    /// symmetric half-width over 1024. Brownian motion has no finite strip, so
    /// a unit half-width is used and the grid extends to `2^10`.
    pub fn alpha_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.strip();
        let half_width = (-lo).min(hi);
        if half_width.is_finite() {
            let s = half_width / 1024.0;
            (0..10).map(|k| s * f64::from(1u32 << k)).collect()
        } else {
            let s = 1.0 / 1024.0;
            (0..=20).map(|k| s * f64::from(1u32 << k)).collect()
        }
    }

    /// Largest `α` on [`alpha_grid`](Self::alpha_grid) with `Ψ(α) < r` and
    /// `Ψ(−α) < r`. Such an `α` bounds the linear payoffs by `A + B cosh(αx)`
    /// and makes the discounted payoffs integrable with a vanishing limit.
    pub fn admissible_alpha(&self, r: f64) -> Result<f64> {
        self.admissible_alpha_on_grid(r, &self.alpha_grid())
    }

    pub fn admissible_alpha_on_grid(&self, r: f64, grid: &[f64]) -> Result<f64> {
        require_positive("r", r)?;
        let passes = |a: f64| {
            a > 0.0
                && matches!(self.psi(a), Ok(p) if p < r)
                && matches!(self.psi(-a), Ok(p) if p < r)
        };
        grid.iter()
            .copied()
            .filter(|&a| passes(a))
            .fold(None, |best: Option<f64>, a| {
                Some(best.map_or(a, |b| b.max(a)))
            })
            .ok_or_else(|| {
                Error::NotAdmissible(format!(
                    "no alpha in {grid:?} has psi(+alpha) < {r} and psi(-alpha) < {r}"
                ))
            })
    }
}

/// A perpetual Dynkin game with payoffs `G₁(x) = x − δ` (collected by the max
/// player) and `G₂(x) = x + δ` (paid by the min player), discounted at rate `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GameSpec {
    model: LevyModel,
    r: f64,
    delta: f64,
}

impl GameSpec {
    pub fn new(model: LevyModel, r: f64, delta: f64) -> Result<Self> {
        require_positive("r", r)?;
        require_positive("delta", delta)?;
        Ok(Self { model, r, delta })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    pub fn g1(&self, x: f64) -> f64 {
        x - self.delta
    }

    #[inline]
    pub fn g2(&self, x: f64) -> f64 {
        x + self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psi_examples() {
        let bm = LevyModel::brownian_drift(0.0, 1.0).unwrap();
        assert_eq!(bm.psi(1.0).unwrap(), 0.5);
        let cl = LevyModel::cramer_lundberg(1.0, 1.0, 1.0).unwrap();
        assert_eq!(cl.psi(1.0).unwrap(), 0.5);
        let cp = LevyModel::compound_poisson(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(cp.psi(0.0).unwrap(), 0.0);
    }

    #[test]
    fn psi_rejects_poles() {
        let cl = LevyModel::cramer_lundberg(1.0, 1.0, 2.0).unwrap();
        assert!(matches!(cl.psi(-2.0), Err(Error::Domain { .. })));
        let cp = LevyModel::compound_poisson(1.0, 1.0, 1.0, 3.0).unwrap();
        assert!(cp.psi(3.0).is_err());
        assert!(cp.psi(-1.0).is_err());
        assert!(cp.psi(-1.5).is_err());
        assert!(cp.psi(2.999).is_ok());
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(LevyModel::brownian_drift(0.0, 0.0).is_err());
        assert!(LevyModel::brownian_drift(f64::NAN, 1.0).is_err());
        assert!(LevyModel::brownian_drift(-3.0, 1.0).is_ok());
        assert!(LevyModel::cramer_lundberg(0.0, 1.0, 1.0).is_err());
        assert!(LevyModel::cramer_lundberg(-1.0, 1.0, 1.0).is_err());
        assert!(LevyModel::cramer_lundberg(1.0, -1.0, 1.0).is_err());
        assert!(LevyModel::cramer_lundberg(1.0, 1.0, 0.0).is_err());
        for bad in 0..4 {
            let mut p = [1.0; 4];
            p[bad] = 0.0;
            assert!(LevyModel::compound_poisson(p[0], p[1], p[2], p[3]).is_err());
        }
        let m = LevyModel::brownian_drift(0.0, 1.0).unwrap();
        assert!(GameSpec::new(m, 0.0, 1.0).is_err());
        assert!(GameSpec::new(m, 1.0, 0.0).is_err());
    }

    #[test]
    fn deserialization_validates() {
        let ok: LevyModel = serde_json::from_str(
            r#"{"family":"cramer_lundberg","c":1.0,"lambda1":1.0,"alpha1":1.0}"#,
        )
        .unwrap();
        assert_eq!(ok.family(), Family::CramerLundberg);
        let bad = serde_json::from_str::<LevyModel>(
            r#"{"family":"cramer_lundberg","c":-1.0,"lambda1":1.0,"alpha1":1.0}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn admissible_alpha_examples() {
        let bm = LevyModel::brownian_drift(0.0, 1.0).unwrap();
        let a = bm.admissible_alpha(1.0).unwrap();
        assert_eq!(a, 1.0);

        let cp = LevyModel::compound_poisson(1.0, 1.0, 1.0, 1.0).unwrap();
        // psi(±0.5) = -(0.5/1.5) + 0.5/0.5 and its mirror, largest is 2/3
        assert!((cp.psi(0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((cp.psi(-0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cp.admissible_alpha(1.0).unwrap(), 0.5);

        let cl = LevyModel::cramer_lundberg(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            cl.admissible_alpha_on_grid(1.0, &[2.0, 4.0, 8.0]),
            Err(Error::NotAdmissible(_))
        ));
        assert_eq!(cl.admissible_alpha(1.0).unwrap(), 0.5);
    }

    #[test]
    fn alpha_grid_stays_inside_strip() {
        let cp = LevyModel::compound_poisson(1.0, 2.0, 1.0, 0.5).unwrap();
        let grid = cp.alpha_grid();
        assert_eq!(grid.len(), 10);
        assert!(grid.iter().all(|&a| a > 0.0 && a < 0.5));
    }

    fn any_model() -> impl Strategy<Value = LevyModel> {
        prop_oneof![
            (-3.0..3.0f64, 0.1..3.0f64).prop_map(|(c, s)| LevyModel::brownian_drift(c, s).unwrap()),
            (0.1..3.0f64, 0.1..5.0f64, 0.1..5.0f64)
                .prop_map(|(c, l, a)| LevyModel::cramer_lundberg(c, l, a).unwrap()),
            (0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64)
                .prop_map(|(l1, a1, l2, a2)| LevyModel::compound_poisson(l1, a1, l2, a2).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn psi_vanishes_at_origin(m in any_model()) {
            prop_assert_eq!(m.psi(0.0).unwrap(), 0.0);
        }

        #[test]
        fn brownian_odd_part_is_drift(c in -5.0..5.0f64, s in 0.1..4.0f64, z in -10.0..10.0f64) {
            let m = LevyModel::brownian_drift(c, s).unwrap();
            let odd = m.psi(z).unwrap() - m.psi(-z).unwrap();
            let expected = 2.0 * c * z;
            let scale = expected.abs().max(0.5 * s * s * z * z).max(1e-300);
            prop_assert!((odd - expected).abs() <= 1e-12 * scale);
        }

        #[test]
        fn admissible_alpha_rechecks(m in any_model(), r in 0.1..5.0f64) {
            let a = m.admissible_alpha(r).unwrap();
            // independent re-evaluation of the closed forms
            let eval = |z: f64| match *m.params() {
                ModelParams::BrownianDrift { c, sigma } => sigma * sigma * z * z / 2.0 + c * z,
                ModelParams::CramerLundberg { c, lambda1, alpha1 } => c * z - lambda1 * z / (alpha1 + z),
                ModelParams::CompoundPoisson { lambda1, alpha1, lambda2, alpha2 } =>
                    lambda2 * z / (alpha2 - z) - lambda1 * z / (alpha1 + z),
            };
            prop_assert!(eval(a) < r);
            prop_assert!(eval(-a) < r);
        }
    }
}
