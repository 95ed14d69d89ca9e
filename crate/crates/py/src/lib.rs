//! Python bindings: catalog entries, frame curvature, twist quantities, geodesics
//! and estimate monitors.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use stationary::catalog::{by_name, CatalogEntry, EntryParams, ENTRY_NAMES};
use stationary::checks::{run_checks, Tier};
use stationary::estimates::{curvature_estimate_ratio, curvature_norm, gradient_estimate_ratio, SampleSpec};
use stationary::geodesics::{integrate_geodesic, GeodesicOptions, GeodesicState, MetricKind};
use stationary::reduction4d::{energy_density, tension_field, twist_identities, twist_one_form};
use stationary::ChartPoint;

fn err(e: stationary::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A catalog spacetime.
#[pyclass(name = "Entry", frozen)]
struct PyEntry {
    inner: CatalogEntry,
}

#[pymethods]
impl PyEntry {
    #[new]
    #[pyo3(signature = (name, mass=None, spin=None, omega=None, lam=None, dim=None))]
    fn new(name: &str, mass: Option<f64>, spin: Option<f64>, omega: Option<f64>, lam: Option<f64>, dim: Option<usize>) -> PyResult<Self> {
        let params = EntryParams { mass, spin, omega, lambda: lam, dim };
        Ok(PyEntry { inner: by_name(name, &params).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.spacetime.n()
    }

    #[getter]
    fn lam(&self) -> Option<f64> {
        self.inner.lambda()
    }

    #[getter]
    fn anchors(&self) -> Vec<Vec<f64>> {
        self.inner.anchors.iter().map(|p| p.to_vec()).collect()
    }

    fn flags<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.flags)
    }

    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in &self.inner.params {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        self.inner.sample_points(count, seed).iter().map(|p| p.to_vec()).collect()
    }

    /// Coordinate components of the metric in `(t, x)`.
    fn metric_components(&self, p: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.spacetime.metric_components(&ChartPoint::new(p)).map_err(err)?))
    }

    /// Frame Ricci tensor, `(n+1) x (n+1)`.
    fn ricci_blocks(&self, p: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.spacetime.ricci_blocks(&ChartPoint::new(p)).map_err(err)?.full()))
    }

    fn curvature_norm(&self, p: Vec<f64>) -> PyResult<f64> {
        curvature_norm(&self.inner.spacetime, &ChartPoint::new(p)).map_err(err)
    }

    fn twist_one_form(&self, p: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(twist_one_form(&self.inner.spacetime, &ChartPoint::new(p)).map_err(err)?.as_slice().to_vec())
    }

    /// Residuals `norm`, `divergence` and `curl` of the twist identities.
    fn twist_identities<'py>(&self, py: Python<'py>, p: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &twist_identities(&self.inner.spacetime, &ChartPoint::new(p)).map_err(err)?)
    }

    fn tension_field(&self, p: Vec<f64>) -> PyResult<(f64, f64)> {
        let t = tension_field(&self.inner.spacetime, &ChartPoint::new(p)).map_err(err)?;
        Ok((t[0], t[1]))
    }

    fn energy_density(&self, p: Vec<f64>) -> PyResult<f64> {
        energy_density(&self.inner.spacetime, &ChartPoint::new(p)).map_err(err)
    }

    /// Integrates a geodesic; `tangent` holds adapted-frame components.
    #[pyo3(signature = (x0, tangent, s_max, tol=1e-11, output_step=1.0, kind="lorentzian"))]
    fn geodesic<'py>(
        &self,
        py: Python<'py>,
        x0: Vec<f64>,
        tangent: Vec<f64>,
        s_max: f64,
        tol: f64,
        output_step: f64,
        kind: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let kind = match kind {
            "lorentzian" => MetricKind::Lorentzian,
            "hat" => MetricKind::Hat,
            other => return Err(PyValueError::new_err(format!("unknown metric kind {other:?}"))),
        };
        let init = GeodesicState { t: 0.0, x: ChartPoint::new(x0), frame_t: DVector::from_vec(tangent) };
        let opts = GeodesicOptions::new(tol).with_output_step(output_step);
        let tr = integrate_geodesic(&self.inner.spacetime, kind, &init, s_max, &opts).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("s", tr.samples.iter().map(|s| s.s).collect::<Vec<_>>())?;
        d.set_item("t", tr.samples.iter().map(|s| s.state.t).collect::<Vec<_>>())?;
        d.set_item("x", tr.samples.iter().map(|s| s.state.x.to_vec()).collect::<Vec<_>>())?;
        d.set_item("c", tr.c)?;
        d.set_item("max_c_drift", tr.max_c_drift())?;
        d.set_item("max_norm_drift", tr.max_norm_drift())?;
        d.set_item("exit", to_py(py, &tr.exit)?)?;
        d.set_item("s_exit", tr.s_exit)?;
        Ok(d)
    }

    #[pyo3(signature = (center, a, rays=64, per_ray=16, seed=0))]
    fn gradient_estimate<'py>(&self, py: Python<'py>, center: Vec<f64>, a: f64, rays: usize, per_ray: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let spec = SampleSpec { rays, per_ray, seed };
        to_py(py, &gradient_estimate_ratio(&self.inner.spacetime, &ChartPoint::new(center), a, &spec).map_err(err)?)
    }

    #[pyo3(signature = (center, a, rays=64, per_ray=16, seed=0))]
    fn curvature_estimate<'py>(&self, py: Python<'py>, center: Vec<f64>, a: f64, rays: usize, per_ray: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let spec = SampleSpec { rays, per_ray, seed };
        to_py(py, &curvature_estimate_ratio(&self.inner.spacetime, &ChartPoint::new(center), a, &spec).map_err(err)?)
    }

    /// Runs the residual suites; `tier` is `"analytic"` or `"fd"`.
    #[pyo3(signature = (tier="analytic", samples=20, seed=0))]
    fn check<'py>(&self, py: Python<'py>, tier: &str, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let tier = match tier {
            "analytic" => Tier::Analytic,
            "fd" => Tier::Fd,
            other => return Err(PyValueError::new_err(format!("unknown tier {other:?}"))),
        };
        to_py(py, &run_checks(&self.inner, tier, samples, seed).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("Entry({:?}, n={})", self.inner.name, self.inner.spacetime.n())
    }
}

#[pyfunction]
fn entry_names() -> Vec<&'static str> {
    ENTRY_NAMES.to_vec()
}

#[pymodule]
fn pystationary(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEntry>()?;
    m.add_function(wrap_pyfunction!(entry_names, m)?)?;
    Ok(())
}
