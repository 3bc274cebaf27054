//! Python bindings for `seb_core`.
//!
//! Vectors cross the boundary as lists of floats; statuses and regimes as
//! their variant names.

use nalgebra::DVector;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use seb_core::jnr::{self, ProbeOptions};
use seb_core::sampler::{self, SampleMethod};
use seb_core::simplex_qp::{self, QpOptions};
use seb_core::solver::{self, SolveOptions};
use seb_core::{linalg, SebError};

create_exception!(sebpy, SebException, PyException);
create_exception!(sebpy, EmptyInteriorError, SebException);
create_exception!(sebpy, UnsupportedRegimeError, SebException);

fn py_err(e: SebError) -> PyErr {
    match e {
        SebError::EmptyInterior => EmptyInteriorError::new_err(e.to_string()),
        SebError::UnsupportedRegime => UnsupportedRegimeError::new_err(e.to_string()),
        _ => SebException::new_err(e.to_string()),
    }
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// A ball as `(center, radius)`.
type BallTuple = (Vec<f64>, f64);

fn debug_name(v: impl std::fmt::Debug) -> String {
    format!("{v:?}")
}

#[pyclass(frozen, name = "Instance")]
struct PyInstance {
    inner: seb_core::Instance,
}

#[pymethods]
impl PyInstance {
    #[new]
    fn new(centers: Vec<Vec<f64>>, radii: Vec<f64>) -> PyResult<Self> {
        let inner = seb_core::Instance::from_parts(&centers, &radii).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Parses an instance document; returns `(instance, target_or_None)`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<(Self, Option<BallTuple>)> {
        let (inner, target) = seb_core::io::parse_instance(text).map_err(py_err)?;
        Ok((Self { inner }, target.map(|b| (vec(b.center()), b.radius()))))
    }

    fn to_json(&self) -> String {
        seb_core::io::InstanceFile::from_instance(&self.inner, None).to_json()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn centers(&self) -> Vec<Vec<f64>> {
        self.inner.centers().iter().map(vec).collect()
    }

    fn radii(&self) -> Vec<f64> {
        self.inner.balls().iter().map(|b| b.radius()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Instance(dimension={}, balls={})", self.inner.dimension(), self.inner.len())
    }
}

#[pyclass(frozen, name = "Solution")]
struct PySolution {
    inner: seb_core::Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn center(&self) -> Vec<f64> {
        vec(&self.inner.center)
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }

    #[getter]
    fn multipliers(&self) -> Vec<f64> {
        vec(&self.inner.multipliers)
    }

    #[getter]
    fn qp_value(&self) -> f64 {
        self.inner.qp_value
    }

    #[getter]
    fn status(&self) -> String {
        debug_name(self.inner.status)
    }

    #[getter]
    fn regime(&self) -> String {
        debug_name(self.inner.regime.regime)
    }

    #[getter]
    fn rank_centers(&self) -> usize {
        self.inner.regime.rank_centers
    }

    #[getter]
    fn rank_shifted(&self) -> Option<usize> {
        self.inner.regime.rank_shifted
    }

    #[getter]
    fn fw_gap(&self) -> f64 {
        self.inner.fw_gap
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(center={:?}, radius={}, status={:?})",
            self.center(),
            self.inner.radius,
            self.inner.status
        )
    }
}

#[pyclass(frozen, get_all, name = "Certificate")]
struct PyCertificate {
    multipliers: Vec<f64>,
    alpha: f64,
    offdiag: Vec<f64>,
    beta: f64,
    psd_ok: bool,
    residual: f64,
}

#[pyclass(frozen, get_all, name = "MembershipVerdict")]
struct PyVerdict {
    member: bool,
    witness: Option<Vec<f64>>,
    margin: f64,
}

impl From<jnr::MembershipVerdict> for PyVerdict {
    fn from(v: jnr::MembershipVerdict) -> Self {
        Self {
            member: v.member,
            witness: v.witness.as_ref().map(vec),
            margin: v.margin,
        }
    }
}

#[pyclass(frozen, name = "QuadraticMap")]
struct PyQuadraticMap {
    inner: jnr::QuadraticMap,
}

#[pymethods]
impl PyQuadraticMap {
    /// `target` and `components` are `(a, theta)` pairs for `x'x - 2a'x + theta`.
    #[new]
    fn new(target: (Vec<f64>, f64), components: Vec<(Vec<f64>, f64)>) -> PyResult<Self> {
        let quad = |(a, t): &(Vec<f64>, f64)| seb_core::UnitQuadratic::from_slice(a, *t).map_err(py_err);
        let target = quad(&target)?;
        let components = components.iter().map(quad).collect::<PyResult<Vec<_>>>()?;
        let inner = jnr::QuadraticMap::new(target, components).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// The map for `instance` with the given target ball, or the solved
    /// enclosing ball when `target` is omitted.
    #[staticmethod]
    #[pyo3(signature = (instance, target=None))]
    fn from_instance(instance: &PyInstance, target: Option<(Vec<f64>, f64)>) -> PyResult<Self> {
        let inner = match target {
            Some((c, r)) => {
                let ball = seb_core::Ball::from_slice(&c, r).map_err(py_err)?;
                jnr::QuadraticMap::from_instance(&instance.inner, &ball)
            }
            None => solver::solve_seb(&instance.inner, &SolveOptions::default())
                .and_then(|s| jnr::QuadraticMap::from_solution(&instance.inner, &s)),
        }
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn regime(&self) -> String {
        debug_name(self.inner.regime())
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        jnr::eval_map(&self.inner, &dv(&x)).map(|z| vec(&z)).map_err(py_err)
    }

    fn membership_g(&self, z: Vec<f64>) -> PyResult<PyVerdict> {
        jnr::membership_g(&self.inner, &dv(&z)).map(Into::into).map_err(py_err)
    }

    fn membership_g_bullet(&self, z: Vec<f64>) -> PyResult<PyVerdict> {
        jnr::membership_g_bullet(&self.inner, &dv(&z)).map(Into::into).map_err(py_err)
    }

    /// Number of sampled combinations outside `G(R^n)`.
    fn convexity_probe(&self, samples: usize, seed: u64) -> PyResult<usize> {
        jnr::convexity_probe(&self.inner, &ProbeOptions::new(samples, seed))
            .map(|r| r.counterexamples.len())
            .map_err(py_err)
    }

    /// `(g_hits_lambda, bullet_hits_lambda)` counts.
    fn separation_probe(&self, samples: usize, seed: u64) -> PyResult<(usize, usize)> {
        jnr::separation_probe(&self.inner, &ProbeOptions::new(samples, seed))
            .map(|r| (r.g_hits_lambda.len(), r.bullet_hits_lambda.len()))
            .map_err(py_err)
    }

    fn sample(&self, samples: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        jnr::sample_range(&self.inner, &ProbeOptions::new(samples, seed))
            .map(|hits| hits.iter().map(|h| vec(&h.z)).collect())
            .map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (instance, tol=None, max_iter=None))]
fn solve(instance: &PyInstance, tol: Option<f64>, max_iter: Option<usize>) -> PyResult<PySolution> {
    let opts = SolveOptions {
        qp: QpOptions {
            tol_gap: tol,
            max_iter,
            ..QpOptions::default()
        },
        ..SolveOptions::default()
    };
    let inner = solver::solve_seb(&instance.inner, &opts).map_err(py_err)?;
    Ok(PySolution { inner })
}

/// `(rank_centers, regime)`.
#[pyfunction]
fn classify(instance: &PyInstance) -> (usize, String) {
    let r = solver::classify(&instance.inner);
    (r.rank_centers, debug_name(r.regime))
}

#[pyfunction]
fn certificate(instance: &PyInstance, solution: &PySolution) -> PyResult<PyCertificate> {
    let c = solver::build_certificate(&instance.inner, &solution.inner).map_err(py_err)?;
    Ok(PyCertificate {
        multipliers: vec(&c.multipliers),
        alpha: c.alpha,
        offdiag: vec(&c.offdiag),
        beta: c.beta,
        psd_ok: c.psd_ok,
        residual: c.residual,
    })
}

#[pyfunction]
fn identity_residual(instance: &PyInstance, solution: &PySolution, x: Vec<f64>) -> PyResult<f64> {
    solver::identity_residual(&instance.inner, &solution.inner, &dv(&x)).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (vectors, tol=linalg::DEFAULT_RANK_TOL))]
fn numerical_rank(vectors: Vec<Vec<f64>>, tol: f64) -> usize {
    let vs: Vec<DVector<f64>> = vectors.iter().map(|v| dv(v)).collect();
    linalg::numerical_rank(&vs, tol)
}

/// `(psd, residual)` for `[[alpha I, b], [b', beta]]`.
#[pyfunction]
#[pyo3(signature = (alpha, b, beta, tol=0.0))]
fn arrowhead_psd(alpha: f64, b: Vec<f64>, beta: f64, tol: f64) -> (bool, f64) {
    let c = linalg::arrowhead_psd(alpha, &dv(&b), beta, tol);
    (c.psd, c.residual)
}

#[pyfunction]
fn project_simplex(v: Vec<f64>) -> PyResult<Vec<f64>> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(SebException::new_err("project_simplex needs a nonempty finite vector"));
    }
    Ok(vec(&simplex_qp::project_simplex(&dv(&v))))
}

/// `(value, minimizer)` of the QP over the grid `{mu : k mu integral}`.
#[pyfunction]
fn grid_oracle(instance: &PyInstance, k: usize) -> PyResult<(f64, Vec<f64>)> {
    let qp = simplex_qp::build_qp(&instance.inner);
    simplex_qp::grid_oracle(&qp, k)
        .map(|(v, mu)| (v, vec(&mu)))
        .map_err(py_err)
}

#[pyfunction]
fn h_transform(z: Vec<f64>) -> Vec<f64> {
    vec(&jnr::h_transform(&dv(&z)))
}

#[pyfunction]
fn h_inverse(y: Vec<f64>) -> Vec<f64> {
    vec(&jnr::h_inverse(&dv(&y)))
}

#[pyfunction]
fn in_lambda(z: Vec<f64>) -> bool {
    jnr::in_lambda(&dv(&z))
}

/// Points of the intersection; `method` is `"hit_and_run"` or `"rejection"`.
#[pyfunction]
#[pyo3(signature = (instance, count, seed, method="hit_and_run"))]
fn sample_intersection(instance: &PyInstance, count: usize, seed: u64, method: &str) -> PyResult<Vec<Vec<f64>>> {
    let method = match method {
        "hit_and_run" => SampleMethod::HitAndRun,
        "rejection" => SampleMethod::Rejection,
        other => return Err(SebException::new_err(format!("unknown sampling method {other:?}"))),
    };
    let cloud = sampler::sample_intersection(&instance.inner, count, seed, method).map_err(py_err)?;
    Ok(cloud.points.iter().map(vec).collect())
}

/// `(center, radius, lower_bound)` of the approximate smallest ball of a cloud.
#[pyfunction]
#[pyo3(signature = (points, iterations=1000))]
fn cloud_meb(points: Vec<Vec<f64>>, iterations: usize) -> PyResult<(Vec<f64>, f64, f64)> {
    let cloud = sampler::SampleCloud {
        points: points.iter().map(|p| dv(p)).collect(),
        seed: 0,
        method: SampleMethod::HitAndRun,
    };
    let b = sampler::cloud_meb(&cloud, iterations).map_err(py_err)?;
    Ok((vec(&b.center), b.radius, b.lower_bound))
}

#[pymodule]
fn sebpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("SebException", py.get_type::<SebException>())?;
    m.add("EmptyInteriorError", py.get_type::<EmptyInteriorError>())?;
    m.add("UnsupportedRegimeError", py.get_type::<UnsupportedRegimeError>())?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyCertificate>()?;
    m.add_class::<PyVerdict>()?;
    m.add_class::<PyQuadraticMap>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(identity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(numerical_rank, m)?)?;
    m.add_function(wrap_pyfunction!(arrowhead_psd, m)?)?;
    m.add_function(wrap_pyfunction!(project_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(grid_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(h_transform, m)?)?;
    m.add_function(wrap_pyfunction!(h_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(in_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(sample_intersection, m)?)?;
    m.add_function(wrap_pyfunction!(cloud_meb, m)?)?;
    Ok(())
}
