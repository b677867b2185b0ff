//! Python bindings. Heavy calls release the interpreter; Python callables
//! reattach for each evaluation.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sphslice::analysis::{default_levels, existence_check, support_experiment, CapSpec};
use sphslice::cli::scene::{Family, SceneSpec};
use sphslice::geometry::{self, Dimensions, FlatSpec};
use sphslice::inversion::{self, InversionReport, RieszParams};
use sphslice::linalg::Coords;
use sphslice::quadrature::{QuadratureSpec, RadialMap};
use sphslice::stereo::SpherePoint;
use sphslice::transforms::{self, PlaneField as CorePlaneField, SphereField as CoreSphereField};
use sphslice::zonal::{self, ZonalProfile as CoreProfile};
use sphslice::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::IntegrandBlowup { .. } | Error::ExistenceFailed(_) | Error::PoleSingularity | Error::Callback(_) => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn dims(n: usize, k: usize) -> PyResult<Dimensions> {
    Dimensions::new(n, k).map_err(to_py)
}

fn call_f64<A: for<'py> IntoPyObject<'py>>(f: &Py<PyAny>, arg: A) -> sphslice::Result<f64> {
    Python::attach(|py| {
        f.bind(py)
            .call1((arg,))
            .and_then(|v| v.extract::<f64>())
            .map_err(|e| Error::Callback(e.to_string()))
    })
}

/// Discretization settings; keyword names match the fields.
#[pyclass(name = "Quadrature", from_py_object)]
#[derive(Clone, Default)]
struct PyQuadrature {
    spec: QuadratureSpec,
}

#[pymethods]
impl PyQuadrature {
    #[new]
    #[pyo3(signature = (
        sphere_order=64, radial_order=128, radial_cutoff=40.0, truncated=false, hs_epsilon=0.1,
        hs_outer=30.0, hs_radial_order=64, hs_angular_order=32, orientation_samples=256, seed=0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        sphere_order: usize,
        radial_order: usize,
        radial_cutoff: f64,
        truncated: bool,
        hs_epsilon: f64,
        hs_outer: f64,
        hs_radial_order: usize,
        hs_angular_order: usize,
        orientation_samples: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let spec = QuadratureSpec {
            sphere_order,
            radial_order,
            radial_cutoff,
            radial_map: if truncated { RadialMap::Truncated } else { RadialMap::Tangent },
            hs_epsilon,
            hs_outer,
            hs_radial_order,
            hs_angular_order,
            orientation_samples,
            seed,
            ..Default::default()
        };
        spec.validate().map_err(to_py)?;
        Ok(Self { spec })
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.spec)
    }
}

fn spec_of(q: Option<PyQuadrature>) -> QuadratureSpec {
    q.map(|q| q.spec).unwrap_or_default()
}

/// A k-plane of ℝⁿ⁺¹ through the north pole, stored by its trace ζ ⊂ ℝⁿ.
#[pyclass(name = "SlicePlane", from_py_object)]
#[derive(Clone)]
struct PySlicePlane {
    inner: geometry::SlicePlane,
}

#[pymethods]
impl PySlicePlane {
    /// Trace spanned by `basis` (k−1 vectors of ℝⁿ) at offset `offset`.
    #[new]
    fn new(basis: Vec<Vec<f64>>, offset: Vec<f64>) -> PyResult<Self> {
        let b: Vec<Coords> = basis.into_iter().map(Coords::from_vec).collect();
        let zeta = FlatSpec::new(&b, &Coords::from_vec(offset)).map_err(to_py)?;
        Ok(Self { inner: geometry::slice_plane_from_section(zeta) })
    }

    /// Seeded random planes, `t = tan U(0, π/2 − 0.01)`, or at a fixed `dist`.
    #[staticmethod]
    #[pyo3(signature = (n, k, count, seed=0, dist=None))]
    fn random(n: usize, k: usize, count: usize, seed: u64, dist: Option<f64>) -> PyResult<Vec<Self>> {
        let d = dims(n, k)?;
        if let Some(x) = dist {
            if !(0.0..1.0).contains(&x) {
                return Err(PyValueError::new_err(format!("dist {x} not in [0, 1)")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| Self {
                inner: match dist {
                    Some(x) => geometry::random_slice_plane_at(&mut rng, d, x),
                    None => geometry::random_slice_plane(&mut rng, d, 0.01),
                },
            })
            .collect())
    }

    #[getter]
    fn dist(&self) -> f64 {
        self.inner.dist
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }

    #[getter]
    fn offset(&self) -> Vec<f64> {
        self.inner.section().offset().to_vec()
    }

    #[getter]
    fn basis(&self) -> Vec<Vec<f64>> {
        self.inner.section().basis().iter().map(|b| b.to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!("SlicePlane(dist={}, t={})", self.inner.dist, self.inner.t)
    }
}

fn scene(family: &str, n: usize, k: usize, params: Option<BTreeMap<String, f64>>) -> PyResult<SceneSpec> {
    let fam: Family = family.parse().map_err(to_py)?;
    SceneSpec::new(fam, params.unwrap_or_default(), None, dims(n, k)?).map_err(to_py)
}

/// A function on Sⁿ.
#[pyclass(name = "SphereField", from_py_object)]
#[derive(Clone)]
struct PySphereField {
    inner: CoreSphereField,
}

#[pymethods]
impl PySphereField {
    /// Wraps `f(coords) -> float`, coords a list of n+1 floats.
    #[staticmethod]
    #[pyo3(signature = (f, zonal=false))]
    fn from_callable(f: Py<PyAny>, zonal: bool) -> Self {
        let inner = CoreSphereField::try_new(move |p: &SpherePoint| call_f64(&f, p.coords().to_vec())).with_zonal(zonal);
        Self { inner }
    }

    /// A built-in family: constant, zonal_gaussian, cap_bump,
    /// first_harmonic_weighted, pole_power.
    #[staticmethod]
    #[pyo3(signature = (family, n, k, params=None))]
    fn family(family: &str, n: usize, k: usize, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        Ok(Self { inner: scene(family, n, k, params)?.sphere_field().map_err(to_py)? })
    }

    fn __call__(&self, coords: Vec<f64>) -> PyResult<f64> {
        let p = SpherePoint::new(Coords::from_vec(coords)).map_err(to_py)?;
        self.inner.eval(&p).map_err(to_py)
    }
}

/// A function on ℝⁿ.
#[pyclass(name = "PlaneField", from_py_object)]
#[derive(Clone)]
struct PyPlaneField {
    inner: CorePlaneField,
}

#[pymethods]
impl PyPlaneField {
    #[staticmethod]
    fn gaussian(center: Vec<f64>, width: f64) -> Self {
        Self { inner: CorePlaneField::gaussian(Coords::from_vec(center), width) }
    }

    #[staticmethod]
    fn from_callable(f: Py<PyAny>) -> Self {
        Self { inner: CorePlaneField::try_new(move |x: &[f64]| call_f64(&f, x.to_vec())) }
    }

    /// `Bf` for a sphere field.
    #[staticmethod]
    fn lift(f: &PySphereField, n: usize, k: usize) -> PyResult<Self> {
        Ok(Self { inner: transforms::op_b(&f.inner, dims(n, k)?) })
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x).map_err(to_py)
    }
}

/// A zonal profile f₀(s), s = |ν⁻¹(η)|.
#[pyclass(name = "ZonalProfile", from_py_object)]
#[derive(Clone)]
struct PyZonalProfile {
    inner: CoreProfile,
}

#[pymethods]
impl PyZonalProfile {
    #[staticmethod]
    fn from_callable(f: Py<PyAny>) -> Self {
        Self { inner: CoreProfile::new(move |s| call_f64(&f, s).unwrap_or(f64::NAN)) }
    }

    #[staticmethod]
    fn from_samples(s: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: CoreProfile::from_samples(s, values).map_err(to_py)? })
    }

    /// Sample grid and values, if the profile is tabulated.
    fn samples(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.inner.samples().map(|(s, v)| (s.to_vec(), v.to_vec()))
    }

    fn __call__(&self, s: f64) -> f64 {
        self.inner.eval(s)
    }
}

#[pyfunction]
#[pyo3(signature = (f, plane, quad=None))]
fn slice_transform(py: Python<'_>, f: &PySphereField, plane: &PySlicePlane, quad: Option<PyQuadrature>) -> PyResult<f64> {
    let spec = spec_of(quad);
    let (f, tau) = (f.inner.clone(), plane.inner.clone());
    py.detach(move || transforms::slice_transform(&f, &tau, &spec)).map_err(to_py)
}

/// Radon-John transform over the trace of `plane`.
#[pyfunction]
#[pyo3(signature = (g, plane, quad=None))]
fn radon_john(py: Python<'_>, g: &PyPlaneField, plane: &PySlicePlane, quad: Option<PyQuadrature>) -> PyResult<f64> {
    let spec = spec_of(quad);
    let (g, zeta) = (g.inner.clone(), plane.inner.section().clone());
    py.detach(move || transforms::radon_john(&g, &zeta, &spec)).map_err(to_py)
}

/// `(lhs, rhs)` of the factorization through the Radon-John transform.
#[pyfunction]
#[pyo3(signature = (f, plane, quad=None))]
fn factorization_check(py: Python<'_>, f: &PySphereField, plane: &PySlicePlane, quad: Option<PyQuadrature>) -> PyResult<(f64, f64)> {
    let spec = spec_of(quad);
    let (f, tau) = (f.inner.clone(), plane.inner.clone());
    let c = py.detach(move || transforms::factorization_check(&f, &tau, &spec)).map_err(to_py)?;
    Ok((c.lhs, c.rhs))
}

#[pyfunction]
#[pyo3(signature = (profile, t, n, k, quad=None))]
fn zonal_forward(py: Python<'_>, profile: &PyZonalProfile, t: f64, n: usize, k: usize, quad: Option<PyQuadrature>) -> PyResult<f64> {
    let (spec, d, p) = (spec_of(quad), dims(n, k)?, profile.inner.clone());
    py.detach(move || zonal::zonal_forward(&p, t, d, &spec)).map_err(to_py)
}

/// Recovers f₀ from the zonal data of `profile` (forward then Abel inversion).
#[pyfunction]
#[pyo3(signature = (profile, n, k, quad=None))]
fn zonal_round_trip(py: Python<'_>, profile: &PyZonalProfile, n: usize, k: usize, quad: Option<PyQuadrature>) -> PyResult<PyZonalProfile> {
    let (spec, d, p) = (spec_of(quad), dims(n, k)?, profile.inner.clone());
    let rec = py
        .detach(move || {
            let big = |t: f64| zonal::zonal_forward(&p, t, d, &spec).unwrap_or(f64::NAN);
            zonal::zonal_invert(&big, d, &spec)
        })
        .map_err(to_py)?;
    Ok(PyZonalProfile { inner: rec })
}

#[pyfunction]
fn weighted_sup_error(recovered: &PyZonalProfile, truth: &PyZonalProfile, lo: f64, hi: f64) -> f64 {
    let t = truth.inner.clone();
    zonal::weighted_sup_error(&recovered.inner, &move |s| t.eval(s), lo, hi)
}

/// Reconstructs g from its Radon-John data at `points`; returns the values.
#[pyfunction]
#[pyo3(signature = (g, points, k_order=1, quad=None))]
fn invert_radon(py: Python<'_>, g: &PyPlaneField, points: Vec<Vec<f64>>, k_order: usize, quad: Option<PyQuadrature>) -> PyResult<Vec<f64>> {
    let spec = spec_of(quad);
    let g = g.inner.clone();
    let n = points.first().map_or(0, |p| p.len());
    py.detach(move || {
        let params = RieszParams::from_spec(k_order, None, &spec)?;
        let radius = points.iter().map(|p| sphslice::linalg::norm(p)).fold(0.0, f64::max);
        let (g2, s2) = (g.clone(), spec.clone());
        let phi = Arc::new(move |z: &FlatSpec| transforms::radon_john(&g2, z, &s2));
        let rec = inversion::invert_radon(phi, n, &params, &spec, radius)?;
        let pts: Vec<Coords> = points.into_iter().map(Coords::from_vec).collect();
        let report = InversionReport::evaluate(&|x| rec.eval(x), &|x| g.eval(x), pts, String::new())?;
        Ok(report.values)
    })
    .map_err(to_py)
}

/// `(verdict, [(delta, value), ...])` for the slice transform near the pole.
#[pyfunction]
#[pyo3(signature = (f, n, k, quad=None))]
fn existence(py: Python<'_>, f: &PySphereField, n: usize, k: usize, quad: Option<PyQuadrature>) -> PyResult<(String, Vec<(f64, f64)>)> {
    let (spec, d, f) = (spec_of(quad), dims(n, k)?, f.inner.clone());
    let r = py.detach(move || existence_check(&f, d, &default_levels(), &spec)).map_err(to_py)?;
    Ok((r.verdict.as_str().to_string(), r.trace.iter().map(|t| (t.delta, t.value)).collect()))
}

/// `(max beyond b*, control max, holds)` for slices missing the cap.
#[pyfunction]
#[pyo3(signature = (f, b, n, k, trials=200, quad=None))]
fn support(py: Python<'_>, f: &PySphereField, b: f64, n: usize, k: usize, trials: usize, quad: Option<PyQuadrature>) -> PyResult<(f64, f64, bool)> {
    let (spec, d, f) = (spec_of(quad), dims(n, k)?, f.inner.clone());
    let cap = CapSpec::new(b).map_err(to_py)?;
    let r = py.detach(move || support_experiment(&f, cap, d, &spec, trials, 0.5)).map_err(to_py)?;
    Ok((r.max_violation, r.control_max, r.holds))
}

#[pyfunction]
fn coeff_c(k: usize, n: usize) -> PyResult<f64> {
    inversion::coeff_c(k, n).map_err(to_py)
}

#[pyfunction]
fn coeff_d(n: usize, ell: usize, k: usize) -> PyResult<f64> {
    inversion::coeff_d(n, ell, k).map_err(to_py)
}

#[pymodule]
fn sphslice_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuadrature>()?;
    m.add_class::<PySlicePlane>()?;
    m.add_class::<PySphereField>()?;
    m.add_class::<PyPlaneField>()?;
    m.add_class::<PyZonalProfile>()?;
    m.add_function(wrap_pyfunction!(slice_transform, m)?)?;
    m.add_function(wrap_pyfunction!(radon_john, m)?)?;
    m.add_function(wrap_pyfunction!(factorization_check, m)?)?;
    m.add_function(wrap_pyfunction!(zonal_forward, m)?)?;
    m.add_function(wrap_pyfunction!(zonal_round_trip, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_sup_error, m)?)?;
    m.add_function(wrap_pyfunction!(invert_radon, m)?)?;
    m.add_function(wrap_pyfunction!(existence, m)?)?;
    m.add_function(wrap_pyfunction!(support, m)?)?;
    m.add_function(wrap_pyfunction!(coeff_c, m)?)?;
    m.add_function(wrap_pyfunction!(coeff_d, m)?)?;
    Ok(())
}
