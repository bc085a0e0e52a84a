//! Python bindings. Parameters are a `Params` object; every solver returns a
//! plain dict.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use sav_bottleneck::departure::{build_profile, verify_profile};
use sav_bottleneck::fares::{
    capacity_sensitivity, ordering_check, solve_ac, solve_mc, solve_monopoly, Equilibrium, Regime,
};
use sav_bottleneck::first_best::{
    first_best_social_cost, pareto_check, self_financing_check, solve_first_best, solve_first_best_lp, toll, LpMethod,
    TimeGrid,
};
use sav_bottleneck::params::DEFAULT_TOL;
use sav_bottleneck::stability::{basin_threshold, classify, FareRule, IntegrateOptions, Protocol};
use sav_bottleneck::welfare::{recommend_strategy, regime_social_costs, sc_of_split, solve_second_best, Threshold};
use sav_bottleneck::{scenarios, validate_with_tol, ModelError, ModelParams, ValidatedParams};

fn err(e: ModelError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Validated model parameters.
#[pyclass(name = "Params", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Params {
    vp: ValidatedParams,
}

#[pymethods]
impl Params {
    #[new]
    #[pyo3(signature = (n_total, mu, kappa, theta, beta, gamma, t_f, f_n, f_a, m, tol = DEFAULT_TOL))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_total: f64,
        mu: f64,
        kappa: f64,
        theta: f64,
        beta: f64,
        gamma: f64,
        t_f: f64,
        f_n: f64,
        f_a: f64,
        m: f64,
        tol: f64,
    ) -> PyResult<Self> {
        let p = ModelParams {
            n_total,
            mu,
            kappa,
            theta,
            beta,
            gamma,
            t_f,
            f_n,
            f_a,
            m,
        };
        Ok(Params {
            vp: validate_with_tol(p, tol).map_err(err)?,
        })
    }

    /// Bundled scenario: "fig2", "fig3", "fig4" or "fig6".
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let p = scenarios::by_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset `{name}`")))?;
        Ok(Params {
            vp: validate_with_tol(p, DEFAULT_TOL).map_err(err)?,
        })
    }

    /// Copy with some fields replaced, e.g. `p.replace(kappa=0.8)`.
    #[pyo3(signature = (**changes))]
    fn replace(&self, changes: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = *self.vp.params();
        if let Some(changes) = changes {
            for (k, v) in changes.iter() {
                let key: String = k.extract()?;
                if !p.set(&key, v.extract()?) {
                    return Err(PyValueError::new_err(format!("unknown parameter `{key}`")));
                }
            }
        }
        Ok(Params {
            vp: validate_with_tol(p, self.vp.tol()).map_err(err)?,
        })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = self.vp.params();
        let d = PyDict::new(py);
        for (k, v) in sav_bottleneck::params::PARAM_KEYS.iter().zip([
            p.n_total, p.mu, p.kappa, p.theta, p.beta, p.gamma, p.t_f, p.f_n, p.f_a, p.m,
        ]) {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    /// `A`, `B`, `eta`, `N_min`, the AC discriminant and validity flags.
    fn derived<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = self.vp.derived();
        let v = self.vp.validity();
        let out = PyDict::new(py);
        out.set_item("a", d.a_coef)?;
        out.set_item("b", d.b_coef)?;
        out.set_item("eta", d.eta)?;
        out.set_item("n_min", d.n_min)?;
        out.set_item("discriminant", d.discriminant)?;
        out.set_item("interior", v.interior)?;
        out.set_item("ac_viable", v.ac_viable)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        let p = self.vp.params();
        format!(
            "Params(n_total={}, mu={}, kappa={}, theta={}, beta={}, gamma={}, t_f={}, f_n={}, f_a={}, m={})",
            p.n_total, p.mu, p.kappa, p.theta, p.beta, p.gamma, p.t_f, p.f_n, p.f_a, p.m
        )
    }
}

fn eq_dict<'py>(py: Python<'py>, e: &Equilibrium, n: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n_a", e.n_a())?;
    d.set_item("n_n", e.split.n_n)?;
    d.set_item("fare", e.fare)?;
    d.set_item("cost", e.cost)?;
    d.set_item("profit", e.profit)?;
    d.set_item("social_cost", e.social_cost(n))?;
    d.set_item("boundary", e.boundary.label())?;
    Ok(d)
}

/// Mode-choice equilibria keyed by regime label, plus `ordering_passed`.
#[pyfunction]
fn equilibria<'py>(py: Python<'py>, params: &Params) -> PyResult<Bound<'py, PyDict>> {
    let vp = &params.vp;
    let n = vp.n_total;
    let out = PyDict::new(py);
    out.set_item("MC", eq_dict(py, &solve_mc(vp), n)?)?;
    for e in &solve_ac(vp).equilibria {
        out.set_item(e.regime.label(), eq_dict(py, e, n)?)?;
    }
    out.set_item("monopoly", eq_dict(py, &solve_monopoly(vp), n)?)?;
    out.set_item("ordering_passed", ordering_check(vp).passed)?;
    Ok(out)
}

/// Arrival windows and profile residuals at `n_a` SAV riders (MC split by default).
#[pyfunction]
#[pyo3(signature = (params, n_a = None))]
fn profile<'py>(py: Python<'py>, params: &Params, n_a: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let vp = &params.vp;
    let split = match n_a {
        Some(x) => sav_bottleneck::departure::ModeSplit::with_sav(vp.n_total, x).map_err(err)?,
        None => solve_mc(vp).split,
    };
    let fare = sav_bottleneck::fares::inverse_fare(vp, split.n_a);
    let prof = build_profile(vp, split);
    let rep = verify_profile(vp, &prof, fare, None);
    let d = PyDict::new(py);
    d.set_item("n_a", split.n_a)?;
    d.set_item("fare", fare)?;
    d.set_item("t_n_minus", prof.t_n_minus)?;
    d.set_item("t_n_plus", prof.t_n_plus)?;
    d.set_item("t_a_minus", prof.t_a_minus)?;
    d.set_item("t_a_plus", prof.t_a_plus)?;
    d.set_item("peak_queue", prof.queue_delay.eval(0.0))?;
    d.set_item("passed", rep.passed)?;
    Ok(d)
}

fn protocol(name: &str, temperature: f64) -> PyResult<Protocol> {
    match name {
        "smith" => Ok(Protocol::Smith),
        "best_response" => Ok(Protocol::BestResponse { temperature }),
        "bnn" => Ok(Protocol::Bnn),
        _ => Err(PyValueError::new_err(format!("unknown protocol `{name}`"))),
    }
}

/// Stability of each AC rest point and the basin boundary.
#[pyfunction]
#[pyo3(signature = (params, protocol_name = "smith", temperature = 1.0))]
fn stability<'py>(
    py: Python<'py>,
    params: &Params,
    protocol_name: &str,
    temperature: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let vp = &params.vp;
    let proto = protocol(protocol_name, temperature)?;
    let opts = IntegrateOptions::default();
    let rep = py.detach(|| classify(vp, FareRule::AverageCost, proto, &opts));
    let d = PyDict::new(py);
    for p in &rep.points {
        let label = p.point.regime.map_or("rest", |r| r.label());
        d.set_item(label, p.stability.label())?;
    }
    let basin = py.detach(|| basin_threshold(vp, proto, 1e-6, &opts));
    d.set_item("basin_threshold", basin)?;
    Ok(d)
}

/// `dc/dmu` for "MC", "monopoly" or "AC2", with its finite-difference check.
#[pyfunction]
fn sensitivity<'py>(py: Python<'py>, params: &Params, regime: &str) -> PyResult<Bound<'py, PyDict>> {
    let r = match regime {
        "MC" => Regime::Mc,
        "monopoly" => Regime::Monopoly,
        "AC2" => Regime::Ac2,
        _ => return Err(PyValueError::new_err(format!("unknown regime `{regime}`"))),
    };
    let s = capacity_sensitivity(&params.vp, r).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("dc_dmu", s.dc_dmu)?;
    d.set_item("finite_diff", s.finite_diff)?;
    d.set_item("paradox_lhs", s.paradox_lhs)?;
    d.set_item("paradox", s.paradox)?;
    Ok(d)
}

/// Tolled system optimum with Pareto and revenue checks.
#[pyfunction]
fn first_best<'py>(py: Python<'py>, params: &Params) -> PyResult<Bound<'py, PyDict>> {
    let vp = &params.vp;
    let fb = solve_first_best(vp);
    let d = PyDict::new(py);
    d.set_item("case", fb.case.label())?;
    d.set_item("n_n", fb.split.n_n)?;
    d.set_item("n_a", fb.split.n_a)?;
    d.set_item("cost", fb.cost)?;
    d.set_item("windows", (fb.t_n_minus, fb.t_a_minus, fb.t_a_plus, fb.t_n_plus))?;
    d.set_item("toll_peak", toll(vp, &fb, 0.0))?;
    d.set_item("social_cost", first_best_social_cost(vp, &fb))?;
    d.set_item("pareto_slack", pareto_check(vp).slack)?;
    d.set_item("self_financing_gap", self_financing_check(vp).relative_gap)?;
    Ok(d)
}

/// Discretised optimum on `cells` cells around the closed-form rush hour.
#[pyfunction]
#[pyo3(signature = (params, cells = 2000, margin = 0.05, method = "greedy"))]
fn first_best_lp<'py>(
    py: Python<'py>,
    params: &Params,
    cells: usize,
    margin: f64,
    method: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let vp = &params.vp;
    let m = match method {
        "greedy" => LpMethod::Greedy,
        "simplex" => LpMethod::Simplex,
        _ => return Err(PyValueError::new_err(format!("unknown method `{method}`"))),
    };
    let fb = solve_first_best(vp);
    let grid = TimeGrid::covering(&fb, cells, margin);
    let lp = py.detach(|| solve_first_best_lp(vp, grid, m)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("objective", lp.objective)?;
    d.set_item("n_a", lp.n_a())?;
    d.set_item("lambda", lp.lambda)?;
    d.set_item("t_mid", (0..grid.cells).map(|i| grid.midpoint(i)).collect::<Vec<_>>())?;
    d.set_item("duals", lp.duals)?;
    Ok(d)
}

/// Social cost when the fare admits exactly `n_a` riders.
#[pyfunction]
fn social_cost(params: &Params, n_a: f64) -> PyResult<f64> {
    sc_of_split(&params.vp, n_a).map_err(err)
}

#[pyfunction]
fn second_best<'py>(py: Python<'py>, params: &Params) -> PyResult<Bound<'py, PyDict>> {
    let sb = solve_second_best(&params.vp);
    let d = PyDict::new(py);
    d.set_item("n_a", sb.n_a_sb)?;
    d.set_item("n_a_unclamped", sb.n_a_raw)?;
    d.set_item("fare", sb.fare_sb)?;
    d.set_item("clamped", sb.clamped.label())?;
    d.set_item("social_cost", sb.sc_sb)?;
    Ok(d)
}

fn threshold(t: Threshold) -> Option<f64> {
    t.value()
}

/// Regime social costs, ranking and critical thresholds (absent ones are None).
#[pyfunction]
fn welfare<'py>(py: Python<'py>, params: &Params) -> PyResult<Bound<'py, PyDict>> {
    let t = regime_social_costs(&params.vp).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("MC", t.sc_mc)?;
    d.set_item("AC0", t.sc_ac0)?;
    d.set_item("AC2", t.sc_ac2)?;
    d.set_item("monopoly", t.sc_monopoly)?;
    d.set_item("ranking", t.ranking.iter().map(|r| r.label()).collect::<Vec<_>>())?;
    d.set_item("eta_regime", t.eta_regime.label())?;
    d.set_item("chain_holds", t.chain_holds)?;
    let th = t.thresholds;
    d.set_item("n_min", th.n_min)?;
    d.set_item("n_c_mc_ac", threshold(th.n_c_mc_ac))?;
    d.set_item("n_c_mc_m", threshold(th.n_c_mc_m))?;
    d.set_item("n_c_ac_m", threshold(th.n_c_ac_m))?;
    d.set_item("f_a_c", threshold(th.f_a_c))?;
    Ok(d)
}

/// Recommendation for the current SAV ridership (monopoly ridership by default).
#[pyfunction]
#[pyo3(signature = (params, current_n_a = None))]
fn strategy<'py>(py: Python<'py>, params: &Params, current_n_a: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let vp = &params.vp;
    let current = current_n_a.unwrap_or_else(|| solve_monopoly(vp).n_a());
    let r = recommend_strategy(vp, current).map_err(err)?;
    let d = PyDict::new(py);
    for (k, v) in r.key_values() {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Oracle suite: name -> (residual, tolerance, passed), plus "passed".
#[pyfunction]
#[pyo3(signature = (params, tol = None))]
fn verify<'py>(py: Python<'py>, params: &Params, tol: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let rep = py.detach(|| sav_bottleneck::verify::run_suite(&params.vp, tol));
    let d = PyDict::new(py);
    for c in &rep.checks {
        d.set_item(c.name, (c.residual, c.tolerance, c.passed))?;
    }
    d.set_item("passed", rep.passed)?;
    Ok(d)
}

#[pymodule]
fn savbottleneck(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_function(wrap_pyfunction!(equilibria, m)?)?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(first_best, m)?)?;
    m.add_function(wrap_pyfunction!(first_best_lp, m)?)?;
    m.add_function(wrap_pyfunction!(social_cost, m)?)?;
    m.add_function(wrap_pyfunction!(second_best, m)?)?;
    m.add_function(wrap_pyfunction!(welfare, m)?)?;
    m.add_function(wrap_pyfunction!(strategy, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
