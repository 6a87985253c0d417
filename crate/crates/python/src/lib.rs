//! Python bindings: tiers, network sampling, association maps, formulas and experiments.

use hetnet_cells::analytics::{self, Kernel};
use hetnet_cells::config::{dbm_to_watts, watts_to_dbm};
use hetnet_cells::pointprocess::sample_network as sample;
use hetnet_cells::tessellation::{self, compute_association_map};
use hetnet_cells::{
    AssociationStrategy, FadingModel, GainFieldMode, Point, PointPattern, SimulationConfig, StreamKey, TierConfig,
    Window,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

const MAX_REPLICATION: u64 = (1 << 28) - 1;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_fading(kind: &str, sigma: f64, scale: f64) -> Result<FadingModel, String> {
    let model = match kind {
        "deterministic" | "none" => FadingModel::Deterministic,
        "lognormal" => FadingModel::LogNormal { sigma },
        "exponential" | "rayleigh" => FadingModel::Exponential { scale },
        other => return Err(format!("unknown fading kind {other:?}")),
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

/// Strategy and gain-mode names use the same snake_case spelling as the JSON configs.
fn parse_name<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(name.to_owned())).map_err(|_| format!("unknown {what} {name:?}"))
}

fn stream_key(seed: u64, replication: u64) -> PyResult<StreamKey> {
    if replication > MAX_REPLICATION {
        return Err(value_error(format!("replication must be <= {MAX_REPLICATION}")));
    }
    Ok(StreamKey::new(seed, replication))
}

fn json_to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// One tier of access points.
#[pyclass(name = "Tier", frozen, from_py_object)]
#[derive(Clone)]
struct PyTier {
    inner: TierConfig,
}

#[pymethods]
impl PyTier {
    #[new]
    #[pyo3(signature = (density, power_dbm, path_loss_exponent, fading = "deterministic", sigma = 0.0, scale = 1.0))]
    fn new(
        density: f64,
        power_dbm: f64,
        path_loss_exponent: f64,
        fading: &str,
        sigma: f64,
        scale: f64,
    ) -> PyResult<Self> {
        let fading = parse_fading(fading, sigma, scale).map_err(value_error)?;
        let inner = TierConfig::new(density, dbm_to_watts(power_dbm), path_loss_exponent, fading);
        inner.validate().map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn density(&self) -> f64 {
        self.inner.density
    }

    #[getter]
    fn power_watts(&self) -> f64 {
        self.inner.power
    }

    #[getter]
    fn power_dbm(&self) -> f64 {
        watts_to_dbm(self.inner.power)
    }

    #[getter]
    fn path_loss_exponent(&self) -> f64 {
        self.inner.path_loss_exponent
    }

    #[getter]
    fn fading(&self) -> &'static str {
        match self.inner.fading {
            FadingModel::Deterministic => "deterministic",
            FadingModel::LogNormal { .. } => "lognormal",
            FadingModel::Exponential { .. } => "exponential",
        }
    }

    fn __repr__(&self) -> String {
        let fading = match self.inner.fading {
            FadingModel::Deterministic => String::new(),
            FadingModel::LogNormal { sigma } => format!(", fading='lognormal', sigma={sigma}"),
            FadingModel::Exponential { scale } => format!(", fading='exponential', scale={scale}"),
        };
        format!(
            "Tier(density={}, power_dbm={:.3}, path_loss_exponent={}{fading})",
            self.inner.density,
            watts_to_dbm(self.inner.power),
            self.inner.path_loss_exponent
        )
    }
}

fn unwrap_tiers(tiers: &[PyTier]) -> Vec<TierConfig> {
    tiers.iter().map(|t| t.inner).collect()
}

/// Per-tier mean area of a typical cell (closed form when exponents agree, quadrature otherwise).
#[pyfunction]
fn mean_areas(py: Python<'_>, tiers: Vec<PyTier>) -> PyResult<Vec<f64>> {
    let tiers = unwrap_tiers(&tiers);
    py.detach(|| analytics::mean_areas(&tiers)).map_err(value_error)
}

/// Closed-form mean areas; requires a common path-loss exponent.
#[pyfunction]
fn mean_area_closed_form(tiers: Vec<PyTier>) -> PyResult<Vec<f64>> {
    analytics::mean_area_closed_form(&unwrap_tiers(&tiers)).map_err(value_error)
}

/// Quadrature value and estimated absolute error of one tier's mean area.
#[pyfunction]
fn mean_area_integral(py: Python<'_>, tiers: Vec<PyTier>, tier: usize) -> PyResult<(f64, f64)> {
    let tiers = unwrap_tiers(&tiers);
    let q = py
        .detach(|| analytics::mean_area_integral(&tiers, tier))
        .map_err(value_error)?;
    Ok((q.value, q.error))
}

#[pyfunction]
fn association_probability(py: Python<'_>, tiers: Vec<PyTier>) -> PyResult<Vec<f64>> {
    let tiers = unwrap_tiers(&tiers);
    py.detach(|| analytics::association_probability(&tiers))
        .map_err(value_error)
}

/// Mean user-weighted sum over a typical cell; `kernel_exponent=None` is the constant kernel.
#[pyfunction]
#[pyo3(signature = (tiers, tier, user_density, kernel_exponent = None, cutoff = 0.0))]
fn campbell_functional(
    py: Python<'_>,
    tiers: Vec<PyTier>,
    tier: usize,
    user_density: f64,
    kernel_exponent: Option<f64>,
    cutoff: f64,
) -> PyResult<f64> {
    let tiers = unwrap_tiers(&tiers);
    let kernel = kernel_exponent.map_or(Kernel::Constant, |exponent| Kernel::PowerLaw { exponent });
    py.detach(|| analytics::campbell_functional(&tiers, tier, kernel, user_density, cutoff))
        .map(|q| q.value)
        .map_err(value_error)
}

/// A sampled AP configuration on a square torus.
#[pyclass(name = "Network", frozen)]
struct PyNetwork {
    tiers: Vec<TierConfig>,
    window: Window,
    pattern: PointPattern,
}

#[pymethods]
impl PyNetwork {
    fn __len__(&self) -> usize {
        self.pattern.len()
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        self.pattern.points.iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn tier_marks(&self) -> Vec<usize> {
        self.pattern.tier_marks.clone()
    }

    /// Per-AP channel gains (natural log).
    #[getter]
    fn log_gains(&self) -> Vec<f64> {
        self.pattern.gain_marks.clone()
    }

    fn tier_counts(&self) -> Vec<usize> {
        self.pattern.tier_counts(self.tiers.len())
    }

    #[pyo3(signature = (strategy = "max_power", gain_mode = "per_ap"))]
    fn association_map(&self, py: Python<'_>, strategy: &str, gain_mode: &str) -> PyResult<PyAssociationMap> {
        let strategy: AssociationStrategy = parse_name("strategy", strategy).map_err(value_error)?;
        let mode: GainFieldMode = parse_name("gain mode", gain_mode).map_err(value_error)?;
        let map = py
            .detach(|| {
                compute_association_map(
                    &self.pattern,
                    &self.tiers,
                    strategy,
                    mode,
                    &self.window,
                    self.pattern.seed,
                )
            })
            .map_err(value_error)?;
        Ok(PyAssociationMap {
            map,
            pattern: self.pattern.clone(),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(aps={}, side_length={}, resolution={})",
            self.pattern.len(),
            self.window.side_length,
            self.window.resolution
        )
    }
}

#[pyfunction]
#[pyo3(signature = (tiers, side_length, resolution, seed, replication = 0))]
fn sample_network(
    py: Python<'_>,
    tiers: Vec<PyTier>,
    side_length: f64,
    resolution: usize,
    seed: u64,
    replication: u64,
) -> PyResult<PyNetwork> {
    let tiers = unwrap_tiers(&tiers);
    let window = Window::new(side_length, resolution).map_err(value_error)?;
    let key = stream_key(seed, replication)?;
    let pattern = py.detach(|| sample(&tiers, &window, key)).map_err(value_error)?;
    Ok(PyNetwork { tiers, window, pattern })
}

/// Serving AP of every pixel.
#[pyclass(name = "AssociationMap", frozen)]
struct PyAssociationMap {
    map: tessellation::AssociationMap,
    pattern: PointPattern,
}

#[pymethods]
impl PyAssociationMap {
    #[getter]
    fn resolution(&self) -> usize {
        self.map.window.resolution
    }

    /// Row-major AP indices.
    #[getter]
    fn grid(&self) -> Vec<u32> {
        self.map.grid.clone()
    }

    fn serving_at(&self, x: f64, y: f64) -> usize {
        self.map.serving_at(Point::new(x, y))
    }

    /// `(ap_index, tier, area, contains_origin)` for every AP.
    fn cell_areas(&self) -> PyResult<Vec<(usize, usize, f64, bool)>> {
        let cells = tessellation::cell_areas(&self.map, &self.pattern).map_err(value_error)?;
        Ok(cells
            .iter()
            .map(|c| (c.ap_index, c.tier, c.area, c.contains_origin))
            .collect())
    }

    /// `(ap_index, tier, area)` of the cell covering `(x, y)`.
    fn zero_cell(&self, x: f64, y: f64) -> PyResult<(usize, usize, f64)> {
        let c = tessellation::zero_cell(&self.map, &self.pattern, Point::new(x, y)).map_err(value_error)?;
        Ok((c.ap_index, c.tier, c.area))
    }

    fn to_raster(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        tessellation::write_raster(&self.map, &mut buf).map_err(value_error)?;
        String::from_utf8(buf).map_err(value_error)
    }
}

/// JSON experiment configuration, as read by the command-line tool.
#[pyclass(name = "SimulationConfig")]
struct PyConfig {
    inner: SimulationConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: SimulationConfig::from_json_str(text).map_err(value_error)?,
        })
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: SimulationConfig::from_file(&path).map_err(value_error)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_pretty()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn warnings(&self) -> Vec<String> {
        self.inner.warnings()
    }

    #[getter]
    fn get_replications(&self) -> usize {
        self.inner.replications
    }

    #[setter]
    fn set_replications(&mut self, value: usize) {
        self.inner.replications = value;
    }

    #[getter]
    fn get_master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[setter]
    fn set_master_seed(&mut self, value: u64) {
        self.inner.master_seed = value;
    }

    fn tiers(&self) -> Vec<PyTier> {
        self.inner
            .tier_configs()
            .into_iter()
            .map(|inner| PyTier { inner })
            .collect()
    }

    /// Formula predictions as a dict.
    fn predict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let tiers = self.inner.tier_configs();
        let p = py.detach(|| analytics::predict(&tiers)).map_err(value_error)?;
        json_to_py(py, &p)
    }

    /// Runs all replications and returns the per-tier statistics as a dict.
    fn run(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let config = self.inner.clone();
        let exp = py
            .detach(|| hetnet_cells::stats::run_experiment(&config))
            .map_err(value_error)?;
        json_to_py(py, &exp.statistics)
    }
}

#[pymodule]
#[pyo3(name = "hetnet_cells")]
fn hetnet_cells_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTier>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyAssociationMap>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(mean_areas, m)?)?;
    m.add_function(wrap_pyfunction!(mean_area_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(mean_area_integral, m)?)?;
    m.add_function(wrap_pyfunction!(association_probability, m)?)?;
    m.add_function(wrap_pyfunction!(campbell_functional, m)?)?;
    m.add_function(wrap_pyfunction!(sample_network, m)?)?;
    Ok(())
}
