//! Additive nested step functions `sum_j a_j 1_{A_j}` with the machinery
//! that lifts set inequalities to functional ones: dyadic approximation,
//! threshold splitting into a capped part plus an overflow part, and the
//! matched-threshold solver that equalizes integral fractions.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::measure::{Budget, MeasureSpec};
use crate::polytope::{format_f64, Polytope, SymmetryClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassTag {
    General,
    EvenUnimodal,
    Unconditional,
    StarUnimodal,
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub increment: f64,
    pub body: Polytope,
}

/// `f = sum_j a_j 1_{A_j}` with strictly positive increments and nested
/// full-dimensional bodies `A_1 ⊇ A_2 ⊇ ...`. The empty layer list is the
/// zero function.
#[derive(Clone, Debug)]
pub struct LayeredFunction {
    dim: usize,
    layers: Vec<Layer>,
    class: ClassTag,
}

/// Membership margin used when evaluating layered functions: boundary
/// points count as inside (closed superlevel sets).
pub const EVAL_MARGIN: f64 = 1e-9;

impl LayeredFunction {
    pub fn new(dim: usize, layers: Vec<Layer>, class: ClassTag) -> Result<LayeredFunction> {
        for layer in &layers {
            if !(layer.increment > 0.0) || !layer.increment.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "layer increment {} must be strictly positive",
                    layer.increment
                )));
            }
            if layer.body.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: layer.body.dim() });
            }
            if !layer.body.is_full_dimensional() {
                return Err(Error::Degenerate("layered functions need full-dimensional layers"));
            }
        }
        for w in layers.windows(2) {
            for v in w[1].body.vertices() {
                if !w[0].body.contains(v, EVAL_MARGIN)? {
                    return Err(Error::InvalidParameter("layers are not nested".into()));
                }
            }
        }
        let f = LayeredFunction { dim, layers, class };
        f.validate_class()?;
        Ok(f)
    }

    pub fn zero(dim: usize) -> LayeredFunction {
        LayeredFunction { dim, layers: Vec::new(), class: ClassTag::General }
    }

    fn validate_class(&self) -> Result<()> {
        let ok = match self.class {
            ClassTag::General => true,
            ClassTag::EvenUnimodal => self
                .layers
                .iter()
                .all(|l| l.body.symmetry_class() != SymmetryClass::General),
            ClassTag::Unconditional => self
                .layers
                .iter()
                .all(|l| l.body.symmetry_class() == SymmetryClass::Unconditional),
            ClassTag::StarUnimodal => self
                .layers
                .iter()
                .all(|l| l.body.contains(&vec![0.0; self.dim], EVAL_MARGIN).unwrap_or(false)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::HypothesisViolation(format!(
                "layers do not support class tag {:?}",
                self.class
            )))
        }
    }

    /// Re-tags the function after re-validating the layers against the tag.
    pub fn with_class(mut self, class: ClassTag) -> Result<LayeredFunction> {
        self.class = class;
        self.validate_class()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class(&self) -> ClassTag {
        self.class
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn is_zero(&self) -> bool {
        self.layers.is_empty()
    }

    /// Cumulative values `v_j = a_1 + ... + a_j` (the value of `f` on
    /// `A_j \ A_{j+1}`).
    pub fn cumulative_values(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.layers
            .iter()
            .map(|l| {
                acc += l.increment;
                acc
            })
            .collect()
    }

    pub fn max_value(&self) -> f64 {
        self.layers.iter().map(|l| l.increment).sum()
    }

    /// `f(x)`: sum of increments over layers containing `x`, with boundary
    /// points counted inside.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut v = 0.0;
        for layer in &self.layers {
            if layer.body.contains(x, EVAL_MARGIN)? {
                v += layer.increment;
            } else {
                // nested layers: once outside, outside for good
                break;
            }
        }
        Ok(v)
    }

    /// Smallest layer whose cumulative value reaches `c`; `None` above the
    /// maximum.
    pub fn superlevel_set(&self, c: f64) -> Option<&Polytope> {
        if c <= 0.0 {
            return self.layers.first().map(|l| &l.body);
        }
        let mut acc = 0.0;
        for layer in &self.layers {
            acc += layer.increment;
            if acc >= c {
                return Some(&layer.body);
            }
        }
        None
    }

    /// Merges equal-body layers and drops non-positive increments.
    pub fn canonicalize(&self) -> LayeredFunction {
        let mut layers: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            if layer.increment <= 0.0 {
                continue;
            }
            if let Some(last) = layers.last_mut() {
                if last.body.vertex_set_equals(&layer.body, 1e-9) {
                    last.increment += layer.increment;
                    continue;
                }
            }
            layers.push(layer.clone());
        }
        LayeredFunction { dim: self.dim, layers, class: self.class }
    }

    /// Rebuilds the function from target cumulative values on the existing
    /// layer bodies (non-increasing differences dropped by canonicalization).
    fn from_cumulative(&self, cumulative: &[f64]) -> LayeredFunction {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut prev = 0.0;
        for (layer, &cv) in self.layers.iter().zip(cumulative) {
            let inc = cv - prev;
            prev = cv;
            if inc > 0.0 {
                layers.push(Layer { increment: inc, body: layer.body.clone() });
            }
        }
        LayeredFunction { dim: self.dim, layers, class: self.class }.canonicalize()
    }

    /// The dyadic minorant `sum_{k=1..2^{2m}} 2^{-m} 1_{f >= k 2^{-m}}` in
    /// canonical layered form; pointwise below `f` and increasing in `m`.
    pub fn dyadic_approximation(&self, m: u32) -> Result<LayeredFunction> {
        if m > 30 {
            return Err(Error::InvalidParameter("dyadic level capped at 30".into()));
        }
        if self.layers.len() > 10_000 {
            return Err(Error::BudgetExceeded("layer explosion guard".into()));
        }
        let scale = (1u64 << m) as f64;
        let kmax = 1u64 << (2 * m);
        let cumulative: Vec<f64> = self
            .cumulative_values()
            .iter()
            .map(|&v| ((v * scale).floor().min(kmax as f64)) / scale)
            .collect();
        Ok(self.from_cumulative(&cumulative))
    }

    /// `(min(f, t), max(f - t, 0))` in canonical layered form. Outside
    /// `(0, max f)` the split is trivial and flagged.
    pub fn split_at_threshold(&self, t: f64) -> (LayeredFunction, LayeredFunction, bool) {
        let vmax = self.max_value();
        if !(t > 0.0) {
            return (LayeredFunction::zero(self.dim), self.clone(), true);
        }
        if t >= vmax {
            return (self.clone(), LayeredFunction::zero(self.dim), t > vmax);
        }
        let cumulative = self.cumulative_values();
        let minus: Vec<f64> = cumulative.iter().map(|&v| v.min(t)).collect();
        let plus: Vec<f64> = cumulative.iter().map(|&v| (v - t).max(0.0)).collect();
        (self.from_cumulative(&minus), self.from_cumulative(&plus), false)
    }

    /// Solves `∫ min(f, t) dm = lambda ∫ f dm` for `t`.
    ///
    /// The map `t -> ∫ min(f, t)` is piecewise linear with breakpoints at
    /// the cumulative layer values, so the solution is closed-form given
    /// the layer measures; under the exact Lebesgue budget this is the
    /// exact solution, otherwise it is deterministic in the Monte Carlo
    /// layer estimates.
    pub fn solve_matching_threshold(
        &self,
        m: &MeasureSpec,
        lambda: f64,
        budget: Budget,
    ) -> Result<f64> {
        if !(0.0 < lambda && lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!("lambda={lambda} outside (0,1]")));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidParameter("cannot match thresholds on the zero function".into()));
        }
        let mut mu = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let b = match budget {
                Budget::Exact => Budget::Exact,
                Budget::MonteCarlo { samples, seed } => {
                    Budget::MonteCarlo { samples, seed: seed.wrapping_add(i as u64) }
                }
            };
            mu.push(m.measure_of_polytope(&layer.body, b)?.value);
        }
        let cumulative = self.cumulative_values();
        let total: f64 = self
            .layers
            .iter()
            .zip(&mu)
            .map(|(l, &m)| l.increment * m)
            .sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NumericalFailure("integral of f is not positive and finite".into()));
        }
        let target = lambda * total;
        let mut acc = 0.0;
        let mut prev_v = 0.0;
        for (j, &v) in cumulative.iter().enumerate() {
            let seg = (v - prev_v) * mu[j];
            if acc + seg >= target - 1e-15 * total {
                if mu[j] <= 0.0 {
                    prev_v = v;
                    continue;
                }
                let t = prev_v + (target - acc) / mu[j];
                return Ok(t.min(v));
            }
            acc += seg;
            prev_v = v;
        }
        Ok(self.max_value())
    }

    /// Serializes with 17-significant-digit numerals.
    pub fn to_json(&self) -> String {
        let class = match self.class {
            ClassTag::General => "general",
            ClassTag::EvenUnimodal => "even_unimodal",
            ClassTag::Unconditional => "unconditional",
            ClassTag::StarUnimodal => "star_unimodal",
        };
        let mut s = format!("{{\"dim\":{},\"class\":\"{}\",\"layers\":[", self.dim, class);
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&format!(
                "{{\"a\":{},\"body\":{}}}",
                format_f64(layer.increment),
                layer.body.to_json()
            ));
        }
        s.push_str("]}");
        s
    }

    pub fn from_json(text: &str) -> Result<LayeredFunction> {
        #[derive(Deserialize)]
        struct RawBody {
            dim: usize,
            vertices: Vec<Vec<f64>>,
        }
        #[derive(Deserialize)]
        struct RawLayer {
            a: f64,
            body: RawBody,
        }
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            class: ClassTag,
            layers: Vec<RawLayer>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        let layers = raw
            .layers
            .into_iter()
            .map(|l| {
                Ok(Layer {
                    increment: l.a,
                    body: Polytope::from_points(l.body.dim, l.body.vertices)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LayeredFunction::new(raw.dim, layers, raw.class)
    }

    /// Builds the layered function whose superlevel set at profile value
    /// `v_k` is `r_k * K`.
    pub fn from_profile(spec: &ProfileSpec) -> Result<LayeredFunction> {
        let gauge = &spec.gauge;
        let mut entries = spec.profile.clone();
        // outermost (largest radius, smallest value) first
        entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut layers = Vec::with_capacity(entries.len());
        let mut below = 0.0;
        for &(radius, value) in &entries {
            layers.push(Layer { increment: value - below, body: gauge.scale(radius)? });
            below = value;
        }
        let class = match gauge.symmetry_class() {
            SymmetryClass::Unconditional => ClassTag::Unconditional,
            SymmetryClass::OriginSymmetric => ClassTag::EvenUnimodal,
            SymmetryClass::General => ClassTag::General,
        };
        LayeredFunction::new(gauge.dim(), layers, class)
    }
}

/// Gauge body plus a decreasing radial step profile `(r_k, v_k)` with radii
/// strictly increasing and values strictly decreasing.
#[derive(Clone, Debug)]
pub struct ProfileSpec {
    pub gauge: Polytope,
    pub profile: Vec<(f64, f64)>,
}

impl ProfileSpec {
    pub fn new(gauge: Polytope, profile: Vec<(f64, f64)>) -> Result<ProfileSpec> {
        if profile.is_empty() {
            return Err(Error::EmptyInput("radial profile"));
        }
        let depth = gauge.origin_depth()?;
        if depth < 1e-9 {
            return Err(Error::OriginNotInterior(depth));
        }
        for w in profile.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::InvalidParameter("profile radii must strictly increase".into()));
            }
            if !(w[0].1 > w[1].1) {
                return Err(Error::InvalidParameter("profile values must strictly decrease".into()));
            }
        }
        for &(r, v) in &profile {
            if !(r > 0.0) || !(v > 0.0) {
                return Err(Error::InvalidParameter("profile entries must be positive".into()));
            }
        }
        Ok(ProfileSpec { gauge, profile })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpec;

    fn interval_fn(pairs: &[(f64, f64)]) -> LayeredFunction {
        // pairs of (half width, increment), outermost first
        let layers = pairs
            .iter()
            .map(|&(h, a)| Layer { increment: a, body: Polytope::interval(-h, h).unwrap() })
            .collect();
        LayeredFunction::new(1, layers, ClassTag::EvenUnimodal).unwrap()
    }

    #[test]
    fn profile_examples() {
        let f = LayeredFunction::from_profile(
            &ProfileSpec::new(Polytope::axis_box(&[1.0, 1.0]).unwrap(), vec![(1.0, 1.0)]).unwrap(),
        )
        .unwrap();
        assert_eq!(f.layers().len(), 1);
        assert_eq!(f.evaluate(&[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(f.evaluate(&[2.0, 0.0]).unwrap(), 0.0);
        assert_eq!(f.class(), ClassTag::Unconditional);

        let f = LayeredFunction::from_profile(
            &ProfileSpec::new(
                Polytope::interval(-1.0, 1.0).unwrap(),
                vec![(1.0, 2.0), (2.0, 1.0)],
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(f.evaluate(&[0.5]).unwrap(), 2.0);
        assert_eq!(f.evaluate(&[1.5]).unwrap(), 1.0);
        assert_eq!(f.evaluate(&[2.5]).unwrap(), 0.0);
    }

    #[test]
    fn nonsymmetric_gauge_tags_general() {
        let gauge = Polytope::from_points(
            2,
            vec![vec![-0.5, -0.5], vec![2.0, -0.5], vec![-0.5, 2.0]],
        )
        .unwrap();
        let f = LayeredFunction::from_profile(&ProfileSpec::new(gauge, vec![(1.0, 1.0)]).unwrap()).unwrap();
        assert_eq!(f.class(), ClassTag::General);
        assert!(f.clone().with_class(ClassTag::StarUnimodal).is_ok());
        assert!(f.with_class(ClassTag::EvenUnimodal).is_err());
    }

    #[test]
    fn evaluate_boundary_counted_inside() {
        let f = interval_fn(&[(1.0, 1.0)]);
        assert_eq!(f.evaluate(&[1.0]).unwrap(), 1.0);
        assert_eq!(f.evaluate(&[1.0 + 2e-9]).unwrap(), 0.0);
    }

    #[test]
    fn superlevel_sets() {
        let f = interval_fn(&[(2.0, 1.0), (1.0, 1.0)]);
        assert!((f.superlevel_set(0.5).unwrap().exact_volume().unwrap() - 4.0).abs() < 1e-12);
        assert!((f.superlevel_set(1.0).unwrap().exact_volume().unwrap() - 4.0).abs() < 1e-12);
        assert!((f.superlevel_set(1.5).unwrap().exact_volume().unwrap() - 2.0).abs() < 1e-12);
        assert!(f.superlevel_set(2.5).is_none());
    }

    #[test]
    fn dyadic_examples() {
        // constant 0.3 truncates to 0.25 at level 2
        let f = interval_fn(&[(1.0, 0.3)]);
        let d = f.dyadic_approximation(2).unwrap();
        assert_eq!(d.max_value(), 0.25);
        // exactly dyadic values are preserved
        let f = interval_fn(&[(2.0, 0.5), (1.0, 0.75)]);
        let d = f.dyadic_approximation(2).unwrap();
        assert_eq!(d.cumulative_values(), f.cumulative_values());
        // f == 1 is preserved at every level
        let f = interval_fn(&[(1.0, 1.0)]);
        for m in 1..6 {
            assert_eq!(f.dyadic_approximation(m).unwrap().max_value(), 1.0);
        }
    }

    #[test]
    fn dyadic_monotone_and_convergent() {
        let f = interval_fn(&[(3.0, 0.37), (2.0, 0.41), (1.0, 1.93)]);
        let lebesgue = MeasureSpec::lebesgue(1);
        let int_f = lebesgue.integrate_layered(&f, Budget::Exact).unwrap().value;
        let mut prev = 0.0;
        for m in 1..=8 {
            let d = f.dyadic_approximation(m).unwrap();
            let int_d = lebesgue.integrate_layered(&d, Budget::Exact).unwrap().value;
            assert!(int_d >= prev - 1e-12);
            assert!(int_d <= int_f + 1e-12);
            // deficit bound by 2^{-m} |A_1|
            assert!(int_f - int_d <= 2f64.powi(-(m as i32)) * 6.0 + 1e-12);
            prev = int_d;
            // pointwise domination at a few points
            for x in [-2.9, -1.5, 0.0, 0.7, 1.01, 2.5] {
                assert!(d.evaluate(&[x]).unwrap() <= f.evaluate(&[x]).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn split_examples() {
        let f = interval_fn(&[(1.0, 2.0)]);
        let (lo, hi, flagged) = f.split_at_threshold(1.0);
        assert!(!flagged);
        assert_eq!(lo.max_value(), 1.0);
        assert_eq!(hi.max_value(), 1.0);
        // split at max is trivial
        let (lo, hi, _) = f.split_at_threshold(2.0);
        assert_eq!(lo.max_value(), 2.0);
        assert!(hi.is_zero());
        // two indicator layers split at 1
        let f = interval_fn(&[(2.0, 1.0), (1.0, 1.0)]);
        let (lo, hi, _) = f.split_at_threshold(1.0);
        assert_eq!(lo.layers().len(), 1);
        assert!((lo.layers()[0].body.exact_volume().unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(hi.layers().len(), 1);
        assert!((hi.layers()[0].body.exact_volume().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn split_slicing_property() {
        let f = interval_fn(&[(3.0, 0.7), (2.0, 0.9), (1.0, 0.5)]);
        let t = 1.1;
        let (lo, hi, _) = f.split_at_threshold(t);
        let tmax = lo.max_value();
        for k in 0..200 {
            let x = [-3.2 + 6.4 * k as f64 / 199.0];
            if hi.evaluate(&x).unwrap() > 0.0 {
                assert!((lo.evaluate(&x).unwrap() - tmax).abs() < 1e-12);
            }
            // the split reassembles f
            assert!(
                (lo.evaluate(&x).unwrap() + hi.evaluate(&x).unwrap() - f.evaluate(&x).unwrap()).abs() < 1e-12
            );
        }
    }

    #[test]
    fn matching_threshold_examples() {
        let lebesgue = MeasureSpec::lebesgue(1);
        let f = interval_fn(&[(1.0, 2.0)]);
        let t = f.solve_matching_threshold(&lebesgue, 0.5, Budget::Exact).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        let t = f.solve_matching_threshold(&lebesgue, 1.0, Budget::Exact).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        // piecewise-linear segment solve: f = 1_{[-2,2]} + 1_{[-1,1]}
        let f = interval_fn(&[(2.0, 1.0), (1.0, 1.0)]);
        let t = f.solve_matching_threshold(&lebesgue, 2.0 / 3.0, Budget::Exact).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matching_threshold_bisection_oracle() {
        // independent bisection on t -> ∫ min(f,t) for a 3-layer function
        let lebesgue = MeasureSpec::lebesgue(1);
        let f = interval_fn(&[(2.7, 0.31), (1.9, 0.47), (0.8, 1.11)]);
        let lambda = 0.37;
        let total = lebesgue.integrate_layered(&f, Budget::Exact).unwrap().value;
        let int_min = |t: f64| {
            let (lo, _, _) = f.split_at_threshold(t);
            lebesgue.integrate_layered(&lo, Budget::Exact).unwrap().value
        };
        let (mut a, mut b) = (0.0, f.max_value());
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if int_min(mid) < lambda * total {
                a = mid;
            } else {
                b = mid;
            }
        }
        let direct = f.solve_matching_threshold(&lebesgue, lambda, Budget::Exact).unwrap();
        assert!((direct - 0.5 * (a + b)).abs() < 1e-9);
        // consistency: the split at the matched threshold divides the integral
        let (lo, hi, _) = f.split_at_threshold(direct);
        let int_lo = lebesgue.integrate_layered(&lo, Budget::Exact).unwrap().value;
        let int_hi = lebesgue.integrate_layered(&hi, Budget::Exact).unwrap().value;
        assert!((int_lo - lambda * total).abs() < 1e-9);
        assert!((int_hi - (1.0 - lambda) * total).abs() < 1e-9);
    }

    #[test]
    fn canonicalize_idempotent() {
        let f = interval_fn(&[(2.0, 0.5), (1.0, 0.25)]);
        let c1 = f.canonicalize();
        let c2 = c1.canonicalize();
        assert_eq!(c1.cumulative_values(), c2.cumulative_values());
        assert_eq!(c1.layers().len(), c2.layers().len());
    }

    #[test]
    fn json_round_trip() {
        let f = interval_fn(&[(2.0, 0.5), (1.0, 0.25)]);
        let s = f.to_json();
        let g = LayeredFunction::from_json(&s).unwrap();
        assert_eq!(s, g.to_json());
    }

    #[test]
    fn nesting_violation_rejected() {
        let a = Polytope::interval(-1.0, 1.0).unwrap();
        let b = Polytope::interval(-2.0, 2.0).unwrap();
        let layers = vec![
            Layer { increment: 1.0, body: a },
            Layer { increment: 1.0, body: b },
        ];
        assert!(LayeredFunction::new(1, layers, ClassTag::General).is_err());
    }
}
