// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Python bindings: netlists, placements, densities, shrinkage, placement and
//! clustering.

use goalplace::clustering::{cluster_netlist, ClusterConfig};
use goalplace::density::{achieved_density, tool_target};
use goalplace::ebayes::{
    build_prior, hetero_shrink, james_stein, js_timing_clip, risk_report, slack_to_budget, ShrinkageResult, Sigma0,
};
use goalplace::explore::{density_histogram, hellinger as hellinger_distance, HIST_BINS};
use goalplace::netlist::{parse_netlist, read_placement, read_size_table, write_placement, NetlistFormat};
use goalplace::placer::{place_with_targets, PlacerConfig, PlacerMode};
use goalplace::synth::{two_region, TwoRegionParams};
use goalplace::Error;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A parsed netlist.
#[pyclass(name = "Netlist", module = "goalplace_py", from_py_object)]
#[derive(Clone)]
pub struct PyNetlist {
    inner: goalplace::netlist::Netlist,
}

#[pymethods]
impl PyNetlist {
    /// Loads a `.jsonl` netlist, or the Bookshelf-style format from an `.aux` file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let format = if path.ends_with(".aux") { NetlistFormat::BookshelfLike } else { NetlistFormat::Jsonl };
        Ok(PyNetlist { inner: parse_netlist(path, format).map_err(py_err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.cells.iter().map(|c| c.name.clone()).collect()
    }

    #[getter]
    fn movable_ids(&self) -> Vec<usize> {
        self.inner.movable_std_ids()
    }

    #[getter]
    fn num_nets(&self) -> usize {
        self.inner.nets.len()
    }

    fn hpwl(&self, placement: &PyPlacement) -> PyResult<f64> {
        check_cover(&self.inner, &placement.inner)?;
        Ok(self.inner.hpwl(&placement.inner))
    }

    fn __repr__(&self) -> String {
        format!("Netlist(cells={}, nets={})", self.inner.len(), self.inner.nets.len())
    }
}

/// Lower-left cell positions in netlist order.
#[pyclass(name = "Placement", module = "goalplace_py", from_py_object)]
#[derive(Clone)]
pub struct PyPlacement {
    inner: goalplace::netlist::Placement,
}

#[pymethods]
impl PyPlacement {
    #[new]
    fn new(positions: Vec<(f64, f64)>) -> Self {
        PyPlacement { inner: goalplace::netlist::Placement::new("python", positions) }
    }

    #[staticmethod]
    fn load(path: &str, netlist: &PyNetlist) -> PyResult<Self> {
        Ok(PyPlacement { inner: read_placement(path, &netlist.inner).map_err(py_err)? })
    }

    fn save(&self, path: &str, netlist: &PyNetlist) -> PyResult<()> {
        check_cover(&netlist.inner, &self.inner)?;
        write_placement(&self.inner, &netlist.inner, path).map_err(py_err)
    }

    #[getter]
    fn positions(&self) -> Vec<(f64, f64)> {
        self.inner.positions.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn check_cover(nl: &goalplace::netlist::Netlist, pl: &goalplace::netlist::Placement) -> PyResult<()> {
    if nl.len() == pl.len() {
        Ok(())
    } else {
        Err(PyValueError::new_err(format!("placement has {} positions for {} cells", pl.len(), nl.len())))
    }
}

/// Per-cell density of `placement` on bins of `bin_scale` rows.
#[pyfunction]
#[pyo3(signature = (netlist, placement, bin_scale = 10.0))]
fn cell_density(netlist: &PyNetlist, placement: &PyPlacement, bin_scale: f64) -> PyResult<Vec<f64>> {
    let (_, cells) = achieved_density(&netlist.inner, &placement.inner, bin_scale).map_err(py_err)?;
    Ok(cells.values)
}

/// Tool targets for every cell of `place`, measured on the post-route reference.
#[pyfunction]
#[pyo3(signature = (place, postroute, postroute_placement, sizes_path, bin_scale = 10.0))]
fn tool_targets(
    place: &PyNetlist,
    postroute: &PyNetlist,
    postroute_placement: &PyPlacement,
    sizes_path: &str,
    bin_scale: f64,
) -> PyResult<Vec<f64>> {
    let sizes = read_size_table(sizes_path).map_err(py_err)?;
    let t = tool_target(&place.inner, &postroute.inner, &postroute_placement.inner, &sizes, bin_scale)
        .map_err(py_err)?;
    Ok(t.targets.values)
}

fn shrink_dict<'py>(py: Python<'py>, r: &ShrinkageResult) -> PyResult<Bound<'py, PyDict>> {
    let st = r.stats();
    let d = PyDict::new(py);
    d.set_item("estimates", r.estimates.clone())?;
    d.set_item("B_hat", st.b_hat)?;
    d.set_item("sigma0", r.sigma0)?;
    d.set_item("S", r.s)?;
    d.set_item("clamped_count", r.clamped_count)?;
    Ok(d)
}

fn sigma_arg(sigma0: Option<f64>) -> Sigma0 {
    sigma0.map_or(Sigma0::Auto, Sigma0::Fixed)
}

/// James-Stein estimates of `z` toward the mean of `prior_runs` (one
/// per-cell density list per run). Adds timing clipping when `slacks` is given.
#[pyfunction]
#[pyo3(signature = (z, prior_runs, sigma0 = None, slacks = None, quantiles = 4))]
fn james_stein_targets<'py>(
    py: Python<'py>,
    z: Vec<f64>,
    prior_runs: Vec<Vec<f64>>,
    sigma0: Option<f64>,
    slacks: Option<Vec<Option<f64>>>,
    quantiles: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let prior = build_prior(&prior_runs).map_err(py_err)?;
    let js = james_stein(&z, &prior, sigma_arg(sigma0)).map_err(py_err)?;
    let r = match slacks {
        None => js,
        Some(s) => {
            let clip = slack_to_budget(&s, quantiles).map_err(py_err)?;
            js_timing_clip(&js, &z, &prior, &clip).map_err(py_err)?
        }
    };
    shrink_dict(py, &r)
}

/// Per-cell shrinkage using the prior's per-cell spread.
#[pyfunction]
fn hetero_targets<'py>(py: Python<'py>, z: Vec<f64>, prior_runs: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let prior = build_prior(&prior_runs).map_err(py_err)?;
    let (r, _) = hetero_shrink(&z, &prior).map_err(py_err)?;
    shrink_dict(py, &r)
}

/// Monte Carlo risks of the MLE, James-Stein and Bayes estimators.
#[pyfunction]
#[pyo3(signature = (n, a, sigma0, trials = 1000, seed = 0))]
fn risk<'py>(py: Python<'py>, n: usize, a: f64, sigma0: f64, trials: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let r = risk_report(trials, n, a, sigma0, seed).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("r_mle", r.r_mle)?;
    d.set_item("r_js", r.r_js)?;
    d.set_item("r_bayes", r.r_bayes)?;
    d.set_item("ratio_js_bayes", r.ratio_js_bayes)?;
    d.set_item("expected_ratio", r.expected_ratio)?;
    d.set_item("ratio_js_mle", r.ratio_js_mle)?;
    d.set_item("js_beats_mle", r.js_beats_mle)?;
    Ok(d)
}

/// Hellinger distance between the density histograms of two value lists.
#[pyfunction]
fn hellinger(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    hellinger_distance(&density_histogram(&a, HIST_BINS), &density_histogram(&b, HIST_BINS)).map_err(py_err)
}

/// Global placement. `mode` is "uniform" or "inflated" (needs `targets`).
#[pyfunction]
#[pyo3(signature = (netlist, fixed, targets = None, mode = "uniform", d_t = 1.0, iterations = 1000, seed = 0))]
fn place<'py>(
    py: Python<'py>,
    netlist: &PyNetlist,
    fixed: &PyPlacement,
    targets: Option<Vec<f64>>,
    mode: &str,
    d_t: f64,
    iterations: usize,
    seed: u64,
) -> PyResult<(PyPlacement, Bound<'py, PyDict>)> {
    let mode = match mode {
        "uniform" => PlacerMode::Uniform,
        "inflated" => PlacerMode::Inflated,
        m => return Err(PyValueError::new_err(format!("unknown mode `{m}`"))),
    };
    let cfg = PlacerConfig { mode, d_t, iterations, seed, ..Default::default() };
    let nl = netlist.inner.clone();
    let fx = fixed.inner.clone();
    let out = py
        .detach(move || place_with_targets(&nl, targets.as_deref(), &cfg, &fx))
        .map_err(py_err)?;
    let ov = out.final_overflow();
    let d = PyDict::new(py);
    d.set_item("hpwl", netlist.inner.hpwl(&out.placement))?;
    d.set_item("iterations", out.log.len())?;
    d.set_item("converged", out.converged)?;
    d.set_item("total_overflow", ov.total_overflow)?;
    d.set_item("max_overflow", ov.max_overflow)?;
    Ok((PyPlacement { inner: out.placement }, d))
}

/// Cluster id per cell.
#[pyfunction]
#[pyo3(signature = (netlist, resolution = 1.0, min_size = 1000, max_size = 50000, seed = 0))]
fn cluster(netlist: &PyNetlist, resolution: f64, min_size: usize, max_size: usize, seed: u64) -> PyResult<Vec<usize>> {
    let cfg = ClusterConfig { resolution, min_size, max_size, seed, ..Default::default() };
    Ok(cluster_netlist(&netlist.inner, &cfg).map_err(py_err)?.assignment)
}

/// Synthetic two-region design: (netlist, fixed, postroute, postroute_placement, region_targets).
#[pyfunction]
#[pyo3(signature = (cells = 2000, seed = 1, noise = 0.0))]
fn synth_two_region(
    cells: usize,
    seed: u64,
    noise: f64,
) -> PyResult<(PyNetlist, PyPlacement, PyNetlist, PyPlacement, Vec<f64>)> {
    let d = two_region(&TwoRegionParams { cells, seed, noise, ..Default::default() }).map_err(py_err)?;
    Ok((
        PyNetlist { inner: d.netlist },
        PyPlacement { inner: d.fixed },
        PyNetlist { inner: d.postroute },
        PyPlacement { inner: d.postroute_positions },
        d.region_targets,
    ))
}

#[pymodule]
fn goalplace_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetlist>()?;
    m.add_class::<PyPlacement>()?;
    m.add_function(wrap_pyfunction!(cell_density, m)?)?;
    m.add_function(wrap_pyfunction!(tool_targets, m)?)?;
    m.add_function(wrap_pyfunction!(james_stein_targets, m)?)?;
    m.add_function(wrap_pyfunction!(hetero_targets, m)?)?;
    m.add_function(wrap_pyfunction!(risk, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger, m)?)?;
    m.add_function(wrap_pyfunction!(place, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(synth_two_region, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
