//! Python bindings. Rationals cross the boundary as `fractions.Fraction`;
//! any argument whose `str()` parses as a rational (int, Fraction, "2/5",
//! "0.4") is accepted where a number is expected.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rv::cli::format::{ballot_label, parse_profile, serialize_profile};
use rv::guarantees::{self, Setting};
use rv::{montecarlo, rational, verifier, Q};

create_exception!(realityvote, RealityVoteError, PyValueError);

fn err(e: rv::Error) -> PyErr {
    RealityVoteError::new_err(e.to_string())
}

fn to_q(x: &Bound<'_, PyAny>) -> PyResult<Q> {
    rational::parse(&x.str()?.to_cow()?).map_err(err)
}

fn fraction<'py>(py: Python<'py>, q: &Q) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((rational::format(q),))
}

#[pyclass(name = "Profile", module = "realityvote", frozen)]
struct PyProfile(rv::Profile);

#[pymethods]
impl PyProfile {
    /// Parses the JSON profile format used by the command line tool.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_profile(text).map(PyProfile).map_err(err)
    }

    /// Canonical JSON text of the profile.
    fn to_json(&self) -> String {
        serialize_profile(&self.0)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn sigma<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &self.0.sigma())
    }

    #[getter]
    fn mu<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &self.0.mu())
    }

    #[getter]
    fn h_plus<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &self.0.h_plus())
    }

    fn __repr__(&self) -> String {
        format!(
            "Profile(n={}, sybils={}, passives={}, domain={})",
            self.0.n(),
            self.0.sybil_count(),
            self.0.passive_count(),
            self.0.domain().kind()
        )
    }
}

#[pyclass(name = "Mechanism", module = "realityvote", frozen)]
struct PyMechanism(rv::Mechanism);

#[pymethods]
impl PyMechanism {
    /// `spec` uses the command line syntax, e.g. `"mj re:1/3 mode:active"`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(PyMechanism).map_err(err)
    }

    /// Winner on `profile`, as a label of the profile's domain.
    fn apply(&self, profile: &PyProfile) -> PyResult<String> {
        let w = rv::apply(&self.0, &profile.0).map_err(err)?;
        Ok(profile.0.domain().label(&w))
    }

    /// Winner together with the virtual mass and the visible ballots.
    fn evaluate<'py>(&self, py: Python<'py>, profile: &PyProfile) -> PyResult<Bound<'py, PyDict>> {
        let e = rv::evaluate(&self.0, &profile.0).map_err(err)?;
        let d = profile.0.domain();
        let out = PyDict::new(py);
        out.set_item("winner", d.label(&e.winner))?;
        out.set_item("q", fraction(py, &e.tally.q)?)?;
        out.set_item("visible", e.tally.visible)?;
        let cast = PyDict::new(py);
        for (b, mass) in &e.tally.cast {
            cast.set_item(ballot_label(d, b), fraction(py, mass)?)?;
        }
        out.set_item("cast", cast)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Mechanism({:?})", self.0.to_string())
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

/// Closed-form thresholds for `setting` at the given fractions.
#[pyfunction]
fn guarantees_report<'py>(
    py: Python<'py>,
    setting: &str,
    sigma: &Bound<'py, PyAny>,
    mu: &Bound<'py, PyAny>,
    tau: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyDict>> {
    let setting: Setting = setting.parse().map_err(err)?;
    let r = guarantees::report(setting, &to_q(sigma)?, &to_q(mu)?, &to_q(tau)?).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("setting", r.setting.name())?;
    out.set_item("tau", fraction(py, &r.tau)?)?;
    out.set_item("alpha_star", fraction(py, &r.alpha_star)?)?;
    out.set_item("beta_star", fraction(py, &r.beta_star)?)?;
    out.set_item("alpha_is_whp", r.alpha_is_whp)?;
    let feasible = match &r.feasible_tau {
        Some((lo, hi)) => Some((fraction(py, lo)?, fraction(py, hi)?)),
        None => None,
    };
    out.set_item("feasible_tau", feasible)?;
    out.set_item("impossibility", r.impossibility)?;
    Ok(out)
}

/// Smallest `tau` making `setting` safe at level `alpha`.
#[pyfunction]
fn required_tau<'py>(
    py: Python<'py>,
    setting: &str,
    sigma: &Bound<'py, PyAny>,
    mu: &Bound<'py, PyAny>,
    alpha: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let setting: Setting = setting.parse().map_err(err)?;
    let t = guarantees::required_tau(setting, &to_q(sigma)?, &to_q(mu)?, &to_q(alpha)?).map_err(err)?;
    fraction(py, &t)
}

/// Whether `mechanism` is `alpha`-safe on `profile` against `base`.
#[pyfunction]
fn is_safe(mechanism: &PyMechanism, base: &PyMechanism, profile: &PyProfile, alpha: &Bound<'_, PyAny>) -> PyResult<bool> {
    verifier::is_safe(&mechanism.0, &base.0, &profile.0, &to_q(alpha)?).map_err(err)
}

/// Least `alpha` for which `mechanism` is safe on every binary profile with
/// `n` voters and the given sybil and passive fractions.
#[pyfunction]
fn min_alpha<'py>(
    py: Python<'py>,
    mechanism: &PyMechanism,
    base: &PyMechanism,
    n: usize,
    sigma: &Bound<'py, PyAny>,
    mu: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let shape = verifier::Shape::from_fractions(n, &to_q(sigma)?, &to_q(mu)?).map_err(err)?;
    let domain = rv::DomainSpec::binary("r", "p").map_err(err)?;
    let a = py.detach(|| verifier::min_alpha(&mechanism.0, &base.0, shape, &domain)).map_err(err)?;
    fraction(py, &a)
}

/// Monte Carlo estimate of the safety violation rate when `n_plus` active
/// voters are sampled from `template`.
#[pyfunction]
#[pyo3(signature = (template, mechanism, base, alpha_prime, n_plus, trials, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate_safety<'py>(
    py: Python<'py>,
    template: &PyProfile,
    mechanism: &PyMechanism,
    base: &PyMechanism,
    alpha_prime: &Bound<'py, PyAny>,
    n_plus: usize,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let exp = montecarlo::Experiment {
        template: template.0.clone(),
        mechanism: mechanism.0.clone(),
        base: base.0.clone(),
        alpha_prime: to_q(alpha_prime)?,
        trials,
        seed,
        n_plus,
    };
    let s = py.detach(|| montecarlo::run_safety_whp(&exp)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("violations", s.violation_count)?;
    out.set_item("trials", s.trials)?;
    out.set_item("rate", fraction(py, &s.empirical_rate)?)?;
    out.set_item("bound", s.bound_value)?;
    out.set_item("standard_error", s.standard_error)?;
    out.set_item("passes", s.passes())?;
    Ok(out)
}

#[pymodule]
fn realityvote(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RealityVoteError", m.py().get_type::<RealityVoteError>())?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyMechanism>()?;
    m.add_function(wrap_pyfunction!(guarantees_report, m)?)?;
    m.add_function(wrap_pyfunction!(required_tau, m)?)?;
    m.add_function(wrap_pyfunction!(is_safe, m)?)?;
    m.add_function(wrap_pyfunction!(min_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_safety, m)?)?;
    Ok(())
}
