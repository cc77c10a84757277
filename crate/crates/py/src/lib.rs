//! Python bindings: road networks, exact distances, model training and
//! benchmark runs, and trained-index queries.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use distidx::bench::{self, BenchConfig, GraphSource, WorkloadSpec};
use distidx::graph::{self, Coordinate};
use distidx::oracle;
use distidx::synthetic::{perturbed_grid, GridSpec};

fn to_py(e: distidx::Error) -> PyErr {
    match e {
        distidx::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Undirected weighted road network with node coordinates.
#[pyclass(name = "RoadNetwork", module = "distidx_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRoadNetwork {
    inner: graph::RoadNetwork,
}

#[pymethods]
impl PyRoadNetwork {
    /// Builds from `(lat, lon)` pairs and `(u, v, meters)` edges over
    /// 0-based node indices.
    #[new]
    fn new(coords: Vec<(f64, f64)>, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        let coords = coords.into_iter().map(|(lat, lon)| Coordinate::new(lat, lon)).collect::<Result<Vec<_>, _>>();
        let inner = graph::RoadNetwork::from_edges(coords.map_err(to_py)?, &edges).map_err(to_py)?;
        Ok(PyRoadNetwork { inner })
    }

    #[staticmethod]
    fn load(edges: PathBuf, coords: PathBuf) -> PyResult<Self> {
        Ok(PyRoadNetwork { inner: graph::load_graph(&edges, &coords).map_err(to_py)? })
    }

    /// Synthetic grid with jittered coordinates and noisy weights.
    #[staticmethod]
    #[pyo3(signature = (rows, cols, seed = 0))]
    fn grid(rows: usize, cols: usize, seed: u64) -> Self {
        PyRoadNetwork { inner: perturbed_grid(&GridSpec { rows, cols, ..GridSpec::default() }, seed) }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn largest_component(&self) -> PyResult<Self> {
        Ok(PyRoadNetwork { inner: graph::largest_connected_component(&self.inner).map_err(to_py)?.0 })
    }

    fn coords(&self) -> Vec<(f64, f64)> {
        self.inner.coords().iter().map(|c| (c.lat, c.lon)).collect()
    }

    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges()
    }

    /// Exact shortest-path distance in meters.
    fn distance(&self, u: usize, v: usize) -> PyResult<f64> {
        oracle::exact_distance(&self.inner, u, v).map_err(to_py)
    }

    /// Distances from `source` to every node; unreachable nodes are `inf`.
    fn sssp(&self, source: usize) -> PyResult<Vec<f64>> {
        Ok(oracle::dijkstra_sssp(&self.inner, source).map_err(to_py)?.dist)
    }

    fn ground_truth(&self, py: Python<'_>, pairs: Vec<(usize, usize)>) -> PyResult<Vec<f64>> {
        let g = &self.inner;
        let samples = py.detach(|| oracle::batch_ground_truth(g, &pairs)).map_err(to_py)?;
        Ok(samples.into_iter().map(|s| s.d).collect())
    }

    fn write(&self, edges: PathBuf, coords: PathBuf) -> PyResult<()> {
        self.inner.write_files(&edges, &coords).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("RoadNetwork(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

/// A trained distance index.
#[pyclass(name = "DistanceIndex", module = "distidx_py", frozen, skip_from_py_object)]
struct PyDistanceIndex {
    inner: distidx::DistanceIndex,
}

#[pymethods]
impl PyDistanceIndex {
    #[staticmethod]
    #[pyo3(signature = (path, graph = None))]
    fn load(path: PathBuf, graph: Option<&PyRoadNetwork>) -> PyResult<Self> {
        let hash = graph.map(|g| g.inner.content_hash());
        Ok(PyDistanceIndex { inner: distidx::DistanceIndex::load(&path, hash.as_deref()).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Serialized size in bytes.
    fn index_bytes(&self) -> usize {
        self.inner.index_bytes()
    }

    /// Estimated distance in meters.
    fn predict(&self, u: usize, v: usize) -> PyResult<f64> {
        self.inner.predict(u, v).map_err(to_py)
    }

    fn predict_many(&self, py: Python<'_>, pairs: Vec<(usize, usize)>) -> PyResult<Vec<f64>> {
        let m = &self.inner;
        py.detach(|| pairs.iter().map(|&(u, v)| m.predict(u, v)).collect::<Result<Vec<_>, _>>()).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("DistanceIndex(name={:?}, n={})", self.inner.name(), self.inner.n())
    }
}

#[pyfunction]
fn model_names() -> Vec<&'static str> {
    distidx::zoo::MODEL_NAMES.to_vec()
}

/// Mean relative error of `pred` against positive labels `truth`.
#[pyfunction]
fn mre(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    bench::mre(&pred, &truth).map_err(to_py)
}

/// Trains `model` on the largest component of `graph` and returns
/// `(index, test_mre, pt_seconds)`. With `queries` unset all pairs are used.
#[pyfunction]
#[pyo3(signature = (graph, model, seed = 0, budget_secs = 60.0, dim = 64, landmarks = 64, queries = None, epochs = None, trees = None))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    graph: &PyRoadNetwork,
    model: &str,
    seed: u64,
    budget_secs: f64,
    dim: usize,
    landmarks: usize,
    queries: Option<usize>,
    epochs: Option<usize>,
    trees: Option<usize>,
) -> PyResult<(PyDistanceIndex, f64, f64)> {
    let cfg = BenchConfig {
        workload: match queries {
            Some(count) => WorkloadSpec::Random { count },
            None => WorkloadSpec::AllPairs { budget: 2_000_000 },
        },
        models: vec![model.to_string()],
        seed,
        budget_seconds: budget_secs,
        dim,
        landmarks,
        epochs,
        trees,
        ..BenchConfig::default()
    };
    let g = &graph.inner;
    let out = py.detach(|| -> distidx::Result<_> {
        cfg.validate()?;
        let data = bench::prepare_graph(g, &cfg)?;
        let mut ctx = bench::context(&cfg, &data);
        let t = bench::train_index(model, &cfg, &mut ctx)?;
        let m = bench::evaluate_mre(&t.index, &data.split.test.samples)?;
        Ok((t.index, m, t.pt_seconds))
    });
    let (index, m, pt) = out.map_err(to_py)?;
    Ok((PyDistanceIndex { inner: index }, m, pt))
}

/// Full benchmark run on a synthetic grid or graph files; returns the
/// JSON report.
#[pyfunction]
#[pyo3(signature = (models, grid = (20, 25), edges = None, coords = None, seed = 0, budget_secs = 60.0, serial = false, epochs = None, trees = None, out = None))]
#[allow(clippy::too_many_arguments)]
fn run_benchmark(
    py: Python<'_>,
    models: Vec<String>,
    grid: (usize, usize),
    edges: Option<PathBuf>,
    coords: Option<PathBuf>,
    seed: u64,
    budget_secs: f64,
    serial: bool,
    epochs: Option<usize>,
    trees: Option<usize>,
    out: Option<PathBuf>,
) -> PyResult<String> {
    let graph = match (edges, coords) {
        (Some(edges), Some(coords)) => GraphSource::Files { edges, coords },
        (None, None) => GraphSource::Grid { rows: grid.0, cols: grid.1, seed },
        _ => return Err(PyValueError::new_err("edges and coords must be given together")),
    };
    let cfg = BenchConfig {
        graph,
        models,
        seed,
        budget_seconds: budget_secs,
        serial,
        epochs,
        trees,
        out_dir: out,
        ..BenchConfig::default()
    };
    py.detach(|| bench::run_benchmark(&cfg).and_then(|r| r.to_json())).map_err(to_py)
}

#[pymodule]
fn distidx_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRoadNetwork>()?;
    m.add_class::<PyDistanceIndex>()?;
    m.add_function(wrap_pyfunction!(model_names, m)?)?;
    m.add_function(wrap_pyfunction!(mre, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    Ok(())
}
