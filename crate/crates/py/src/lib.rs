//! Python bindings: polytope arithmetic, layered functions,
//! sup-convolutions, measures, means and the verification harness.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use bmlab_core::harness::{self, RunConfig};
use bmlab_core::means;
use bmlab_core::measure::{Budget, MeasureSpec};
use bmlab_core::polytope::{self, DirectionSet};
use bmlab_core::stepfn::{self, ProfileSpec};
use bmlab_core::supconv::{self, HeisenbergRegion, SupConvolutionSpec};

fn err(e: bmlab_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Vertex-represented convex body.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Polytope {
    inner: polytope::Polytope,
}

#[pymethods]
impl Polytope {
    #[new]
    fn new(dim: usize, vertices: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Polytope { inner: polytope::Polytope::from_points(dim, vertices).map_err(err)? })
    }

    #[staticmethod]
    fn axis_box(half_sides: Vec<f64>) -> PyResult<Self> {
        Ok(Polytope { inner: polytope::Polytope::axis_box(&half_sides).map_err(err)? })
    }

    #[staticmethod]
    fn regular_polygon(k: usize, r: f64) -> PyResult<Self> {
        Ok(Polytope { inner: polytope::Polytope::regular_polygon(k, r).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Polytope { inner: polytope::Polytope::from_json(text).map_err(err)? })
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn vertices(&self) -> Vec<Vec<f64>> {
        self.inner.vertices().to_vec()
    }

    fn volume(&self) -> PyResult<f64> {
        self.inner.exact_volume().map_err(err)
    }

    fn mc_volume(&self, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        self.inner.mc_volume(samples, seed).map_err(err)
    }

    fn support(&self, direction: Vec<f64>) -> f64 {
        self.inner.support(&direction)
    }

    #[pyo3(signature = (point, margin = 1e-9))]
    fn contains(&self, point: Vec<f64>, margin: f64) -> PyResult<bool> {
        self.inner.contains(&point, margin).map_err(err)
    }

    fn symmetry_class(&self) -> &'static str {
        match self.inner.symmetry_class() {
            polytope::SymmetryClass::General => "general",
            polytope::SymmetryClass::OriginSymmetric => "origin_symmetric",
            polytope::SymmetryClass::Unconditional => "unconditional",
        }
    }

    fn translate(&self, v: Vec<f64>) -> PyResult<Self> {
        Ok(Polytope { inner: self.inner.translate(&v).map_err(err)? })
    }

    fn scale(&self, lambda: f64) -> PyResult<Self> {
        Ok(Polytope { inner: self.inner.scale(lambda).map_err(err)? })
    }

    fn minkowski_sum(&self, other: &Polytope) -> PyResult<Self> {
        Ok(Polytope { inner: polytope::minkowski_sum(&self.inner, &other.inner).map_err(err)? })
    }

    fn affine_combination(&self, other: &Polytope, t: f64) -> PyResult<Self> {
        Ok(Polytope {
            inner: polytope::affine_combination(&self.inner, &other.inner, t).map_err(err)?,
        })
    }

    /// `(ratio, stderr)` of `|D^m(K)| / |K|^m`, exact when the target
    /// dimension allows it.
    #[pyo3(signature = (m, samples = 1_000_000, seed = 1))]
    fn difference_body_ratio(&self, m: usize, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        let vol = self.inner.exact_volume().map_err(err)?;
        let d = polytope::difference_body(&self.inner, m).map_err(err)?;
        let denom = vol.powi(m as i32);
        if d.target_dim() <= 3 {
            Ok((d.exact_volume().map_err(err)? / denom, 0.0))
        } else {
            let (v, s) = d.mc_volume(samples, seed).map_err(err)?;
            Ok((v / denom, s / denom))
        }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }
}

/// `(inner_volume, outer_volume, shrink, exact)` of an L_p combination.
#[pyfunction]
#[pyo3(signature = (a, b, t, p, directions = 720))]
fn lp_combination(
    a: &Polytope,
    b: &Polytope,
    t: f64,
    p: f64,
    directions: usize,
) -> PyResult<(f64, f64, f64, bool)> {
    let dirs = DirectionSet::circle(directions).map_err(err)?;
    let w = polytope::lp_combination(&a.inner, &b.inner, t, p, &dirs).map_err(err)?;
    Ok((
        w.inner.exact_volume().map_err(err)?,
        w.outer.exact_volume().map_err(err)?,
        w.shrink,
        w.exact,
    ))
}

fn parse_measure(name: &str, dim: usize) -> PyResult<MeasureSpec> {
    match name {
        "lebesgue" => Ok(MeasureSpec::lebesgue(dim)),
        "gaussian" => Ok(MeasureSpec::gaussian(dim)),
        other => serde_json::from_str(other)
            .map_err(|e| PyValueError::new_err(format!("bad measure {other:?}: {e}"))),
    }
}

/// Nested step function `sum a_j 1_{A_j}`.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct LayeredFunction {
    inner: stepfn::LayeredFunction,
}

#[pymethods]
impl LayeredFunction {
    /// Builds the function whose superlevel set at value `v` is `r * gauge`
    /// for every `(r, v)` profile entry.
    #[staticmethod]
    fn from_profile(gauge: &Polytope, profile: Vec<(f64, f64)>) -> PyResult<Self> {
        let spec = ProfileSpec::new(gauge.inner.clone(), profile).map_err(err)?;
        Ok(LayeredFunction { inner: stepfn::LayeredFunction::from_profile(&spec).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(LayeredFunction { inner: stepfn::LayeredFunction::from_json(text).map_err(err)? })
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate(&x).map_err(err)
    }

    fn max_value(&self) -> f64 {
        self.inner.max_value()
    }

    fn layer_count(&self) -> usize {
        self.inner.layers().len()
    }

    #[pyo3(signature = (measure = "lebesgue", samples = 200_000, seed = 1))]
    fn integrate(&self, measure: &str, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        let m = parse_measure(measure, self.inner.dim())?;
        let budget = match m {
            MeasureSpec::Lebesgue { .. } => Budget::Exact,
            _ => Budget::MonteCarlo { samples, seed },
        };
        let r = m.integrate_layered(&self.inner, budget).map_err(err)?;
        Ok((r.value, r.stderr))
    }

    fn dyadic_approximation(&self, m: u32) -> PyResult<Self> {
        Ok(LayeredFunction { inner: self.inner.dyadic_approximation(m).map_err(err)? })
    }

    fn split_at_threshold(&self, t: f64) -> (LayeredFunction, LayeredFunction, bool) {
        let (lo, hi, flagged) = self.inner.split_at_threshold(t);
        (LayeredFunction { inner: lo }, LayeredFunction { inner: hi }, flagged)
    }

    /// Solves `∫ min(f, t) = lambda ∫ f` under the Lebesgue measure.
    fn solve_matching_threshold(&self, lambda: f64) -> PyResult<f64> {
        let m = MeasureSpec::lebesgue(self.inner.dim());
        self.inner.solve_matching_threshold(&m, lambda, Budget::Exact).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }
}

/// Sup-convolution of layered inputs in max-layer form.
#[pyclass]
struct SupConvolution {
    inner: supconv::MaxLayerFunction,
}

#[pymethods]
impl SupConvolution {
    fn evaluate(&self, z: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate(&z).map_err(err)
    }

    fn piece_count(&self) -> usize {
        self.inner.pieces.len()
    }

    #[pyo3(signature = (measure = "lebesgue", samples = 200_000, seed = 1))]
    fn integrate(&self, measure: &str, samples: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
        let m = parse_measure(measure, self.inner.target_dim())?;
        let budget = if matches!(m, MeasureSpec::Lebesgue { .. }) && self.inner.target_dim() <= 2 {
            Budget::Exact
        } else {
            Budget::MonteCarlo { samples, seed }
        };
        let r = supconv::integrate_supconv(&self.inner, &m, budget).map_err(err)?;
        Ok((r.lower.value, r.lower.stderr, r.outer_value))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }
}

/// `□f` over a named constraint family: affine | lp | schneider |
/// heisenberg, or a family JSON string.
#[pyfunction]
#[pyo3(signature = (family, fs, alpha = 0.0, t = 0.5, p = 0.0, m = 1))]
fn sup_convolution(
    family: &str,
    fs: Vec<LayeredFunction>,
    alpha: f64,
    t: f64,
    p: f64,
    m: usize,
) -> PyResult<SupConvolution> {
    let dim = fs.first().map(|f| f.inner.dim()).unwrap_or(2);
    let spec = match family {
        "affine" => SupConvolutionSpec::affine(dim, t, alpha),
        "lp" => SupConvolutionSpec::level_set_lp(p, t, alpha, 720),
        "schneider" => SupConvolutionSpec::schneider(dim, m),
        "heisenberg" => SupConvolutionSpec::heisenberg(t, alpha, 64),
        text => supconv::ConstraintFamily::from_json(text).and_then(|fam| {
            let weights = match &fam {
                supconv::ConstraintFamily::GeneralLinear { coeffs, .. } => {
                    let total: f64 = coeffs.iter().sum();
                    coeffs.iter().map(|c| c / total).collect()
                }
                _ => vec![1.0 - t, t],
            };
            SupConvolutionSpec::new(
                fam,
                means::MeanSpec::new(
                    means::Exponent::Finite(alpha),
                    means::WeightVector::new(weights)?,
                ),
            )
        }),
    }
    .map_err(err)?;
    let inputs: Vec<stepfn::LayeredFunction> = fs.into_iter().map(|f| f.inner).collect();
    Ok(SupConvolution { inner: supconv::supconv_layered(&spec, &inputs).map_err(err)? })
}

/// Weighted power mean with extended exponent (`float("inf")` works).
#[pyfunction]
fn eval_mean(p: f64, weights: Vec<f64>, values: Vec<f64>) -> PyResult<f64> {
    means::MeanSpec::new(
        means::Exponent::from_f64(p),
        means::WeightVector::new(weights).map_err(err)?,
    )
    .eval(&values)
    .map_err(err)
}

/// `r` with `1/r = 1/p + 1/q`.
#[pyfunction]
fn holder_exponent(p: f64, q: f64) -> PyResult<f64> {
    means::holder_exponent(means::Exponent::from_f64(p), means::Exponent::from_f64(q))
        .map(|r| r.as_f64())
        .map_err(err)
}

#[pyfunction]
fn gaussian_mean(t: f64, a1: f64, a2: f64) -> PyResult<f64> {
    means::GaussianMean::new(t).map_err(err)?.eval(a1, a2).map_err(err)
}

#[pyfunction]
fn normal_cdf(x: f64) -> f64 {
    means::normal_cdf(x)
}

#[pyfunction]
fn normal_quantile(p: f64) -> f64 {
    means::normal_quantile(p)
}

/// Maximal-margin witness of the radial superadditivity violation of the
/// Gaussian mean, or `None` at this resolution.
#[pyfunction]
#[pyo3(signature = (t = 0.5, resolution = 50))]
fn find_ehrhard_violation(py: Python<'_>, t: f64, resolution: usize) -> PyResult<Option<Py<PyDict>>> {
    match means::find_ehrhard_violation(t, resolution).map_err(err)? {
        Some(w) => {
            let d = PyDict::new(py);
            d.set_item("a", w.a.to_vec())?;
            d.set_item("lambda", w.lambda)?;
            d.set_item("margin", w.margin)?;
            Ok(Some(d.unbind()))
        }
        None => Ok(None),
    }
}

/// Reverse Brascamp-Lieb constant estimate of an instance JSON.
#[pyfunction]
#[pyo3(signature = (instance_json, starts = 8, seed = 1))]
fn barthe_constant(py: Python<'_>, instance_json: &str, starts: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let inst = bmlab_core::barthe::BartheInstance::from_json(instance_json).map_err(err)?;
    let rep = bmlab_core::barthe::constant_estimate(&inst, starts, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("constant", rep.constant)?;
    d.set_item("best_objective", rep.best_objective)?;
    d.set_item("sampling_floor", rep.sampling_floor)?;
    d.set_item("starts", rep.starts.len())?;
    Ok(d.into_any().unbind())
}

/// `(lower, upper, stderr)` bracket of the Haar measure of the Heisenberg
/// product set `A · B`.
#[pyfunction]
#[pyo3(signature = (a, b, resolution = 64, samples = 100_000, seed = 1))]
fn heisenberg_product_measure(
    a: &Polytope,
    b: &Polytope,
    resolution: usize,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, f64, f64)> {
    let region =
        HeisenbergRegion::new(a.inner.clone(), b.inner.clone(), resolution).map_err(err)?;
    region.mc_measure(samples, seed).map_err(err)
}

/// Runs one verification case and returns the report rows.
#[pyfunction]
#[pyo3(signature = (name, seed = 1, instances = 3, samples = 100_000))]
fn run_case(
    py: Python<'_>,
    name: &str,
    seed: u64,
    instances: usize,
    samples: usize,
) -> PyResult<Py<PyAny>> {
    let case = harness::case_by_name(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown case {name:?}")))?;
    let config = RunConfig { seed, instances, samples, ..Default::default() };
    let reports = harness::run_case(&case, &config);
    let rows = PyList::empty(py);
    for r in reports {
        let d = PyDict::new(py);
        d.set_item("case", &r.case)?;
        d.set_item("seed", r.seed)?;
        d.set_item("lhs", r.lhs)?;
        d.set_item("rhs", r.rhs)?;
        d.set_item("lhs_stderr", r.lhs_stderr)?;
        d.set_item("rhs_stderr", r.rhs_stderr)?;
        d.set_item("margin", r.margin)?;
        d.set_item(
            "status",
            match r.status {
                harness::Status::Pass => "pass",
                harness::Status::Fail => "fail",
                harness::Status::Evidence => "evidence",
                harness::Status::Error => "error",
            },
        )?;
        rows.append(d)?;
    }
    Ok(rows.into_any().unbind())
}

/// Names of the cases in the default verification suite.
#[pyfunction]
fn case_names() -> Vec<&'static str> {
    harness::default_suite().iter().map(|c| c.name()).collect()
}

#[pymodule]
fn bmlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Polytope>()?;
    m.add_class::<LayeredFunction>()?;
    m.add_class::<SupConvolution>()?;
    m.add_function(wrap_pyfunction!(lp_combination, m)?)?;
    m.add_function(wrap_pyfunction!(sup_convolution, m)?)?;
    m.add_function(wrap_pyfunction!(eval_mean, m)?)?;
    m.add_function(wrap_pyfunction!(holder_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_mean, m)?)?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(normal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(find_ehrhard_violation, m)?)?;
    m.add_function(wrap_pyfunction!(barthe_constant, m)?)?;
    m.add_function(wrap_pyfunction!(heisenberg_product_measure, m)?)?;
    m.add_function(wrap_pyfunction!(run_case, m)?)?;
    m.add_function(wrap_pyfunction!(case_names, m)?)?;
    Ok(())
}
