use chronodil::cli::{self, Command, RunConfig};
use chronodil::constants;
use chronodil::dilation;
use chronodil::kinematics::{CatState, GaussianState, Physics};
use chronodil::measurement::{self, ConditionedResult, MomentumBinning};
use chronodil::precision;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn physics_err(e: chronodil::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn cli_err(e: cli::CliError) -> PyErr {
    match e {
        cli::CliError::Config(_) | cli::CliError::Io(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse(config: &str) -> PyResult<RunConfig> {
    cli::parse_config(config).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn conditioned_dict<'py>(py: Python<'py>, r: &ConditionedResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("bin", r.bin)?;
    d.set_item("probability", r.probability)?;
    d.set_item("mean_t", r.mean_t)?;
    d.set_item("sigma_t", r.sigma_t)?;
    Ok(d)
}

/// Runs `command` on the config text and returns the CSV.
#[pyfunction]
#[pyo3(signature = (command, config, timestamp=None))]
fn run(command: &str, config: &str, timestamp: Option<u64>) -> PyResult<String> {
    let command: Command = command.parse().map_err(PyValueError::new_err)?;
    let mut config = parse(config)?;
    config.command = Some(command);
    let outcome = cli::run(&config).map_err(cli_err)?;
    outcome.table.to_csv(timestamp).map_err(cli_err)
}

/// Normalised config text, as echoed into CSV metadata.
#[pyfunction]
fn normalise_config(config: &str) -> PyResult<String> {
    Ok(parse(config)?.to_text())
}

/// Clock-time mean for the clock, state and physics of a config.
#[pyfunction]
fn mean_clock_time<'py>(py: Python<'py>, config: &str, t: f64) -> PyResult<Bound<'py, PyDict>> {
    let c = parse(config)?;
    let clock = cli::build_clock(&c.clock).map_err(physics_err)?;
    let state = cli::build_state(&c.kinematics).map_err(physics_err)?;
    let phys = cli::build_physics(&c.physics).map_err(physics_err)?;
    let r = dilation::mean_clock_time(&clock, &state, t, &phys).map_err(physics_err)?;
    let d = PyDict::new(py);
    d.set_item("t", r.t)?;
    d.set_item("mean_t_nr", r.mean_t_nr)?;
    d.set_item("r_factor", r.r_factor)?;
    d.set_item("error_trace", r.error_trace)?;
    d.set_item("relativistic_shift", r.relativistic_shift)?;
    d.set_item("mean_t", r.mean_t)?;
    d.set_item("classical_tau", r.classical_tau)?;
    Ok(d)
}

/// Precision decomposition `sigma_T = sigma_NR + sigma_I + sigma_NI`.
#[pyfunction]
fn sigma_breakdown<'py>(py: Python<'py>, config: &str, t: f64) -> PyResult<Bound<'py, PyDict>> {
    let c = parse(config)?;
    let clock = cli::build_clock(&c.clock).map_err(physics_err)?;
    let state = cli::build_state(&c.kinematics).map_err(physics_err)?;
    let phys = cli::build_physics(&c.physics).map_err(physics_err)?;
    let r = precision::sigma_breakdown(&clock, &state, t, &phys).map_err(physics_err)?;
    let d = PyDict::new(py);
    d.set_item("sigma_nr", r.sigma_nr)?;
    d.set_item("sigma_i", r.sigma_i)?;
    d.set_item("sigma_ni", r.sigma_ni)?;
    d.set_item("total", r.total)?;
    Ok(d)
}

/// Superposition, mixture and coherence times of a cat state.
#[pyfunction]
#[pyo3(signature = (mass, sigma_x, delta_x0, t, alpha=0.5, theta=0.0, x0=0.0, p0=0.0, g=constants::G_EARTH, c=constants::SPEED_OF_LIGHT))]
#[allow(clippy::too_many_arguments)]
fn t_coh(
    mass: f64,
    sigma_x: f64,
    delta_x0: f64,
    t: f64,
    alpha: f64,
    theta: f64,
    x0: f64,
    p0: f64,
    g: f64,
    c: f64,
) -> PyResult<(f64, f64, f64)> {
    let base = GaussianState::new(x0, p0, sigma_x, mass).map_err(physics_err)?;
    let cat = CatState::new(base, delta_x0, alpha, theta).map_err(physics_err)?;
    let phys = Physics::new(g, c).map_err(physics_err)?;
    let r = dilation::t_coh(&cat, t, &phys).map_err(physics_err)?;
    Ok((r.t_sup, r.t_mix, r.t_coh))
}

/// Spread conditioned on the momentum bin of width `q sigma_p` labelled `bin`,
/// for a Gaussian packet at `g = 0`.
#[pyfunction]
#[pyo3(signature = (sigma_nr, mass, sigma_x, t, q, bin=0, p0=0.0, c=constants::SPEED_OF_LIGHT))]
#[allow(clippy::too_many_arguments)]
fn conditioned_sigma<'py>(
    py: Python<'py>,
    sigma_nr: f64,
    mass: f64,
    sigma_x: f64,
    t: f64,
    q: f64,
    bin: i64,
    p0: f64,
    c: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let state = GaussianState::new(0.0, p0, sigma_x, mass).map_err(physics_err)?;
    let phys = Physics::new(0.0, c).map_err(physics_err)?;
    let binning = MomentumBinning::covering(q, &state).map_err(physics_err)?;
    let r = measurement::conditioned_sigma(sigma_nr, &state, t, &phys, &binning, bin)
        .map_err(physics_err)?;
    conditioned_dict(py, &r)
}

/// Spread with no momentum information, for a Gaussian packet at `g = 0`.
#[pyfunction]
#[pyo3(signature = (sigma_nr, mass, sigma_x, t, p0=0.0, c=constants::SPEED_OF_LIGHT))]
fn unconditioned_sigma<'py>(
    py: Python<'py>,
    sigma_nr: f64,
    mass: f64,
    sigma_x: f64,
    t: f64,
    p0: f64,
    c: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let state = GaussianState::new(0.0, p0, sigma_x, mass).map_err(physics_err)?;
    let phys = Physics::new(0.0, c).map_err(physics_err)?;
    let r = measurement::unconditioned_sigma(sigma_nr, &state, t, &phys).map_err(physics_err)?;
    conditioned_dict(py, &r)
}

#[pymodule]
fn pychronodil(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("HBAR", constants::HBAR)?;
    m.add("SPEED_OF_LIGHT", constants::SPEED_OF_LIGHT)?;
    m.add("ATOMIC_MASS_UNIT", constants::ATOMIC_MASS_UNIT)?;
    m.add("ELECTRON_MASS", constants::ELECTRON_MASS)?;
    m.add("G_EARTH", constants::G_EARTH)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(normalise_config, m)?)?;
    m.add_function(wrap_pyfunction!(mean_clock_time, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_breakdown, m)?)?;
    m.add_function(wrap_pyfunction!(t_coh, m)?)?;
    m.add_function(wrap_pyfunction!(conditioned_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(unconditioned_sigma, m)?)?;
    Ok(())
}
