//! Python bindings. Results come back as plain dicts and lists.

use std::collections::HashMap;

use irand_core::inference::{
    did_regression_estimate, did_reorganized_estimate, irand_estimate, pooled_estimate,
    IrandConfig, Tail,
};
use irand_core::matching::MatchingOptions;
use irand_core::mediation::{categorize, mediation_reports, Engine, MediationSpec};
use irand_core::panel::{load_panel, save_panel, write_panel, AnalysisSpec, TwoPointPanel, VariableKind, VariableSchema};
use irand_core::simulation::{
    run_mse_experiment, simulate_panel, DgpConfig, Design, EstimatorKind, ExperimentConfig,
};
use irand_core::subsample::Strategy;
use irand_core::synth::{bundled_summary, load_summary, synthesize_panel, SynthOptions};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(irand, IrandError, PyException);

fn err(e: irand_core::Error) -> PyErr {
    IrandError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: DeserializeOwned>(name: &str, what: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} `{name}`")))
}

/// A two-point panel: one baseline and one follow-up row per individual.
#[pyclass(module = "irand", frozen)]
struct Panel {
    inner: TwoPointPanel,
}

#[pymethods]
impl Panel {
    /// Reads a long CSV with `id`, `time` (0/1) and one column per variable.
    #[staticmethod]
    #[pyo3(signature = (path, treatment, confounders, outcome, mediator=None, kinds=None))]
    fn load(
        path: &str,
        treatment: &str,
        confounders: Vec<String>,
        outcome: &str,
        mediator: Option<&str>,
        kinds: Option<HashMap<String, String>>,
    ) -> PyResult<Self> {
        let confs: Vec<&str> = confounders.iter().map(String::as_str).collect();
        let mut schema = VariableSchema::new(treatment, &confs, outcome);
        if let Some(m) = mediator {
            schema = schema.with_mediator(m);
        }
        for (col, kind) in kinds.unwrap_or_default() {
            schema = schema.with_kind(&col, parse::<VariableKind>(&kind, "variable kind")?);
        }
        Ok(Panel { inner: load_panel(path, schema).map_err(err)? })
    }

    /// Synthetic panel drawn from the bundled cohort summary, or from `summary` if given.
    #[staticmethod]
    #[pyo3(signature = (n, seed=0, missingness=false, summary=None))]
    fn synthesize(n: usize, seed: u64, missingness: bool, summary: Option<&str>) -> PyResult<Self> {
        let rows = match summary {
            Some(p) => load_summary(p).map_err(err)?,
            None => bundled_summary(),
        };
        let mut options = SynthOptions::new(n, seed);
        options.missingness = missingness;
        Ok(Panel { inner: synthesize_panel(&rows, &options).map_err(err)? })
    }

    /// Simulated panel from the `lcd_like` or `bmi_like` design.
    #[staticmethod]
    #[pyo3(signature = (design, n, sigma, seed=0, delta=1.0))]
    fn simulate(design: &str, n: usize, sigma: f64, seed: u64, delta: f64) -> PyResult<Self> {
        let mut config = match design.parse::<Design>().map_err(err)? {
            Design::LcdLike => DgpConfig::lcd_like(n, sigma, seed),
            Design::BmiLike => DgpConfig::bmi_like(n, sigma, seed),
        };
        config.delta = delta;
        Ok(Panel { inner: simulate_panel(&config).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_panel(&self.inner, path).map_err(err)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_panel(&self.inner, &mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn n_individuals(&self) -> usize {
        self.inner.n_individuals()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.inner.variables().to_vec()
    }

    #[getter]
    fn schema<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.schema())
    }

    fn __len__(&self) -> usize {
        self.inner.n_individuals()
    }

    fn __repr__(&self) -> String {
        format!(
            "Panel(n_individuals={}, variables={:?})",
            self.inner.n_individuals(),
            self.inner.variables()
        )
    }
}

/// Roles from the panel's schema, overridden by any given argument.
fn analysis(
    panel: &Panel,
    treatment: Option<&str>,
    confounders: Option<Vec<String>>,
    outcome: Option<&str>,
) -> AnalysisSpec {
    let mut spec = panel.inner.schema().analysis_spec();
    if let Some(t) = treatment {
        spec.treatment = t.into();
    }
    if let Some(c) = confounders {
        spec.confounders = c;
    }
    if let Some(o) = outcome {
        spec.outcome = o.into();
    }
    spec
}

/// Mean matching ATE and permutation p-value over random one-row-per-individual subsamples.
#[pyfunction]
#[pyo3(signature = (panel, *, treatment=None, confounders=None, outcome=None, m=500, s=500, tail="lower", strategy="min_overlap", seed=0))]
#[allow(clippy::too_many_arguments)]
fn estimate<'py>(
    py: Python<'py>,
    panel: &Panel,
    treatment: Option<&str>,
    confounders: Option<Vec<String>>,
    outcome: Option<&str>,
    m: usize,
    s: usize,
    tail: &str,
    strategy: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = analysis(panel, treatment, confounders, outcome);
    let config = IrandConfig {
        m,
        s,
        tail: tail.parse::<Tail>().map_err(err)?,
        strategy: parse(strategy, "strategy")?,
        seed,
        matching: MatchingOptions::default(),
    };
    let report = py.detach(|| irand_estimate(&panel.inner, &spec, &config)).map_err(err)?;
    to_py(py, &report)
}

/// Matching on the pooled data, each individual-time row as its own unit.
#[pyfunction]
#[pyo3(signature = (panel, *, treatment=None, confounders=None, outcome=None, s=0, tail="lower", seed=0))]
#[allow(clippy::too_many_arguments)]
fn pooled<'py>(
    py: Python<'py>,
    panel: &Panel,
    treatment: Option<&str>,
    confounders: Option<Vec<String>>,
    outcome: Option<&str>,
    s: usize,
    tail: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = analysis(panel, treatment, confounders, outcome);
    let tail = tail.parse::<Tail>().map_err(err)?;
    let opts = MatchingOptions::default();
    let r = py.detach(|| pooled_estimate(&panel.inner, &spec, s, tail, seed, &opts)).map_err(err)?;
    to_py(py, &r)
}

/// Difference-in-differences regression on within-individual changes.
#[pyfunction]
#[pyo3(signature = (panel, *, treatment=None, confounders=None, outcome=None))]
fn did_regression<'py>(
    py: Python<'py>,
    panel: &Panel,
    treatment: Option<&str>,
    confounders: Option<Vec<String>>,
    outcome: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = analysis(panel, treatment, confounders, outcome);
    to_py(py, &did_regression_estimate(&panel.inner, &spec).map_err(err)?)
}

/// Matching on the reorganized difference data.
#[pyfunction]
#[pyo3(signature = (panel, *, treatment=None, confounders=None, outcome=None, s=0, tail="lower", seed=0))]
#[allow(clippy::too_many_arguments)]
fn did_reorganized<'py>(
    py: Python<'py>,
    panel: &Panel,
    treatment: Option<&str>,
    confounders: Option<Vec<String>>,
    outcome: Option<&str>,
    s: usize,
    tail: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = analysis(panel, treatment, confounders, outcome);
    let tail = tail.parse::<Tail>().map_err(err)?;
    let opts = MatchingOptions::default();
    let r = py
        .detach(|| did_reorganized_estimate(&panel.inner, &spec, s, tail, seed, &opts))
        .map_err(err)?;
    to_py(py, &r)
}

/// Total, direct and indirect effects; one report per adjacent contrast for an ordinal treatment.
#[pyfunction]
#[pyo3(signature = (panel, mediator, *, treatment=None, confounders=None, outcome=None, cuts=None, engine="irand", m=500, s=500, tail="lower", strategy="min_overlap", seed=0))]
#[allow(clippy::too_many_arguments)]
fn mediate<'py>(
    py: Python<'py>,
    panel: &Panel,
    mediator: &str,
    treatment: Option<&str>,
    confounders: Option<Vec<String>>,
    outcome: Option<&str>,
    cuts: Option<Vec<f64>>,
    engine: &str,
    m: usize,
    s: usize,
    tail: &str,
    strategy: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let a = analysis(panel, treatment, confounders, outcome);
    let mut data = panel.inner.clone();
    let mut treatment = a.treatment.clone();
    if let Some(cuts) = cuts {
        let name = format!("{treatment}_category");
        data = categorize(&data, &treatment, &cuts, &name).map_err(err)?;
        treatment = name;
    }
    let confs: Vec<&str> = a.confounders.iter().map(String::as_str).collect();
    let mut spec = MediationSpec::new(&treatment, &confs, mediator, &a.outcome);
    spec.engine = parse::<Engine>(engine, "engine")?;
    spec.config.m = m;
    spec.config.s = s;
    spec.config.tail = tail.parse::<Tail>().map_err(err)?;
    spec.config.strategy = parse(strategy, "strategy")?;
    spec.config.seed = seed;
    let reports = py.detach(|| mediation_reports(&data, &spec)).map_err(err)?;
    to_py(py, &reports)
}

/// MSE of each estimator over a grid of sample sizes and noise levels.
#[pyfunction]
#[pyo3(signature = (design="lcd_like", *, grid_n=None, grid_sigma=None, estimators=None, replicates=200, m=50, seed=0))]
#[allow(clippy::too_many_arguments)]
fn mse_experiment<'py>(
    py: Python<'py>,
    design: &str,
    grid_n: Option<Vec<usize>>,
    grid_sigma: Option<Vec<f64>>,
    estimators: Option<Vec<String>>,
    replicates: usize,
    m: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let dgp = match design.parse::<Design>().map_err(err)? {
        Design::LcdLike => DgpConfig::lcd_like(0, 0.0, 0),
        Design::BmiLike => DgpConfig::bmi_like(0, 0.0, 0),
    };
    let mut config = ExperimentConfig::new(dgp, replicates, seed);
    if let Some(g) = grid_n {
        config.grid_n = g;
    }
    if let Some(g) = grid_sigma {
        config.grid_sigma = g;
    }
    if let Some(names) = estimators {
        config.estimators = names
            .iter()
            .map(|name| match name.as_str() {
                "irand" => Ok(EstimatorKind::Irand { m, strategy: Strategy::MinOverlap }),
                "pooled" => Ok(EstimatorKind::Pooled),
                "did_regression" => Ok(EstimatorKind::DidRegression),
                "did_reorganized" => Ok(EstimatorKind::DidReorganized),
                other => Err(PyValueError::new_err(format!("unknown estimator `{other}`"))),
            })
            .collect::<PyResult<_>>()?;
    } else {
        for e in &mut config.estimators {
            if let EstimatorKind::Irand { m: mm, .. } = e {
                *mm = m;
            }
        }
    }
    let surface = py.detach(|| run_mse_experiment(&config)).map_err(err)?;
    to_py(py, &surface)
}

#[pymodule]
fn irand(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("IrandError", m.py().get_type::<IrandError>())?;
    m.add_class::<Panel>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(pooled, m)?)?;
    m.add_function(wrap_pyfunction!(did_regression, m)?)?;
    m.add_function(wrap_pyfunction!(did_reorganized, m)?)?;
    m.add_function(wrap_pyfunction!(mediate, m)?)?;
    m.add_function(wrap_pyfunction!(mse_experiment, m)?)?;
    Ok(())
}
