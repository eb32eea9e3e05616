//! Python bindings for `dynkin-core`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use dynkin_core::game::solve_game_with_grid;
use dynkin_core::mc::{self, SimConfig, ThresholdStrategy};
use dynkin_core::wiener_hopf::{self, standard_identity_grid};
use dynkin_core::{Error, GameSpec};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A Lévy process from one of the three supported families.
#[pyclass(name = "LevyModel", module = "dynkin", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyLevyModel(dynkin_core::LevyModel);

#[pymethods]
impl PyLevyModel {
    /// `Ψ(z) = σ²z²/2 + cz`.
    #[staticmethod]
    fn brownian_drift(c: f64, sigma: f64) -> PyResult<Self> {
        dynkin_core::LevyModel::brownian_drift(c, sigma)
            .map(Self)
            .map_err(py_err)
    }

    /// `Ψ(z) = cz − λ₁z/(α₁ + z)`.
    #[staticmethod]
    fn cramer_lundberg(c: f64, lambda1: f64, alpha1: f64) -> PyResult<Self> {
        dynkin_core::LevyModel::cramer_lundberg(c, lambda1, alpha1)
            .map(Self)
            .map_err(py_err)
    }

    /// `Ψ(z) = −λ₁z/(α₁ + z) + λ₂z/(α₂ − z)`.
    #[staticmethod]
    fn compound_poisson(lambda1: f64, alpha1: f64, lambda2: f64, alpha2: f64) -> PyResult<Self> {
        dynkin_core::LevyModel::compound_poisson(lambda1, alpha1, lambda2, alpha2)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn family(&self) -> &'static str {
        match self.0.family() {
            dynkin_core::Family::BrownianDrift => "brownian_drift",
            dynkin_core::Family::CramerLundberg => "cramer_lundberg",
            dynkin_core::Family::CompoundPoisson => "compound_poisson",
        }
    }

    /// Open interval on which `Ψ` is finite.
    fn strip(&self) -> (f64, f64) {
        self.0.strip()
    }

    fn psi(&self, z: f64) -> PyResult<f64> {
        self.0.psi(z).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("LevyModel({:?})", self.0.params())
    }
}

#[pyclass(
    name = "WienerHopfFactors",
    module = "dynkin",
    frozen,
    get_all,
    from_py_object
)]
#[derive(Clone, Copy)]
pub struct PyFactors {
    r_i: f64,
    r_s: f64,
    pi_i: f64,
    pi_s: f64,
}

impl From<dynkin_core::WienerHopfFactors> for PyFactors {
    fn from(f: dynkin_core::WienerHopfFactors) -> Self {
        Self {
            r_i: f.r_i,
            r_s: f.r_s,
            pi_i: f.pi_i,
            pi_s: f.pi_s,
        }
    }
}

#[pymethods]
impl PyFactors {
    fn __repr__(&self) -> String {
        format!(
            "WienerHopfFactors(r_i={}, r_s={}, pi_i={}, pi_s={})",
            self.r_i, self.r_s, self.pi_i, self.pi_s
        )
    }
}

#[pyfunction]
fn wh_factors(model: PyLevyModel, r: f64) -> PyResult<PyFactors> {
    wiener_hopf::wh_factors(&model.0, r)
        .map(Into::into)
        .map_err(py_err)
}

/// Largest relative error of the factorisation identity on the standard grid.
#[pyfunction]
fn check_wh_identity(model: PyLevyModel, r: f64) -> PyResult<f64> {
    let f = wiener_hopf::wh_factors(&model.0, r).map_err(py_err)?;
    wiener_hopf::check_wh_identity(&model.0, r, &f, &standard_identity_grid(&f)).map_err(py_err)
}

#[pyclass(name = "GameSolution", module = "dynkin", frozen)]
pub struct PyGameSolution(dynkin_core::GameSolution);

#[pymethods]
impl PyGameSolution {
    #[getter]
    fn u(&self) -> f64 {
        self.0.u()
    }

    #[getter]
    fn x_i(&self) -> f64 {
        self.0.x_i()
    }

    #[getter]
    fn x_s(&self) -> f64 {
        self.0.x_s()
    }

    #[getter]
    fn a_i(&self) -> f64 {
        self.0.a_i()
    }

    #[getter]
    fn a_s(&self) -> f64 {
        self.0.a_s()
    }

    #[getter]
    fn factors(&self) -> PyFactors {
        (*self.0.factors()).into()
    }

    #[getter]
    fn certified(&self) -> bool {
        self.0.certified()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings().to_vec()
    }

    /// `(jump_I, jump_S)` of the derivative of `V` at the thresholds.
    #[getter]
    fn jumps(&self) -> Option<(f64, f64)> {
        self.0.pasting().map(|p| (p.jump_i, p.jump_s))
    }

    fn value(&self, x: f64) -> f64 {
        self.0.value(x)
    }

    /// `"stop_min"`, `"continue"` or `"stop_max"`.
    fn region(&self, x: f64) -> &'static str {
        self.0.region(x).as_str()
    }

    /// `(Q_I(x), Q_S(x))`.
    fn averaging_functions(&self, x: f64) -> (f64, f64) {
        self.0.averaging_functions(x)
    }

    /// Monte-Carlo payoff of the threshold pair `(lower, upper)` started at
    /// `x0`, defaulting to the equilibrium pair. Returns `(estimate, std_error)`.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (x0, paths, seed=42, lower=None, upper=None, dt=None))]
    fn estimate_payoff(
        &self,
        py: Python<'_>,
        x0: f64,
        paths: usize,
        seed: u64,
        lower: Option<f64>,
        upper: Option<f64>,
        dt: Option<f64>,
    ) -> PyResult<(f64, f64)> {
        let spec = *self.0.spec();
        let mut cfg = SimConfig::for_discount(paths, seed, spec.r());
        if let Some(dt) = dt {
            cfg.dt = dt;
        }
        let sigma = ThresholdStrategy::lower(lower.unwrap_or(self.0.x_i()));
        let tau = ThresholdStrategy::upper(upper.unwrap_or(self.0.x_s()));
        let report = py
            .detach(|| mc::estimate_payoff(&spec, x0, sigma, tau, &cfg))
            .map_err(py_err)?;
        Ok((report.estimate, report.std_error))
    }

    fn __repr__(&self) -> String {
        format!(
            "GameSolution(x_i={}, x_s={}, a_i={}, a_s={}, certified={})",
            self.0.x_i(),
            self.0.x_s(),
            self.0.a_i(),
            self.0.a_s(),
            self.0.certified()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (model, r, delta, grid_size=1001))]
fn solve_game(
    model: PyLevyModel,
    r: f64,
    delta: f64,
    grid_size: usize,
) -> PyResult<PyGameSolution> {
    let spec = GameSpec::new(model.0, r, delta).map_err(py_err)?;
    solve_game_with_grid(&spec, grid_size)
        .map(PyGameSolution)
        .map_err(py_err)
}

#[pymodule]
fn dynkin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLevyModel>()?;
    m.add_class::<PyFactors>()?;
    m.add_class::<PyGameSolution>()?;
    m.add_function(wrap_pyfunction!(wh_factors, m)?)?;
    m.add_function(wrap_pyfunction!(check_wh_identity, m)?)?;
    m.add_function(wrap_pyfunction!(solve_game, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyo3::types::PyDict;

    fn run(code: &std::ffi::CStr) {
        Python::attach(|py| {
            let globals = PyDict::new(py);
            globals
                .set_item("dynkin", pyo3::wrap_pymodule!(dynkin)(py))
                .unwrap();
            py.run(code, Some(&globals), None).unwrap();
        });
    }

    #[test]
    fn solves_cramer_lundberg_through_python() {
        run(c"
m = dynkin.LevyModel.cramer_lundberg(1.0, 1.0, 1.0)
s = dynkin.solve_game(m, 1.0, 1.0)
assert s.certified
assert abs(s.x_i + 1.6127) < 5e-4 and abs(s.x_s - 1.4931) < 5e-4
assert s.region(0.0) == 'continue'
assert abs(s.value(s.x_s) - (s.x_s - 1.0)) < 1e-9
assert abs(s.factors.pi_i - 0.6180339887498949) < 1e-12
");
    }

    #[test]
    fn invalid_parameters_raise_value_error() {
        run(c"
try:
    dynkin.solve_game(dynkin.LevyModel.brownian_drift(0.0, 1.0), 1.0, 0.0)
except ValueError as e:
    assert 'delta must be > 0' in str(e)
else:
    raise AssertionError('expected ValueError')
");
    }

    #[test]
    fn payoff_estimate_is_seeded() {
        run(c"
s = dynkin.solve_game(dynkin.LevyModel.compound_poisson(1.0, 1.0, 1.0, 1.0), 1.0, 1.0)
a = s.estimate_payoff(0.0, 2000, seed=3)
assert a == s.estimate_payoff(0.0, 2000, seed=3)
assert abs(a[0] - s.value(0.0)) <= 3.5 * a[1]
");
    }

    #[test]
    fn identity_error_is_small() {
        run(c"assert dynkin.check_wh_identity(dynkin.LevyModel.compound_poisson(3.0, 1.0, 1.0, 3.0), 1.0) < 1e-10");
    }
}
