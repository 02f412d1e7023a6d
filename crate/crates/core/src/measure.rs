//! Measure families: Lebesgue (exact in low dimension), the standard
//! Gaussian, radial log-concave densities `e^{-w(|x|)}`, homogeneous
//! potentials `e^{-V}`, and weighted-concave densities `phi^beta` over a
//! convex support.
//!
//! Only the Lebesgue measure of a polytope is exact; everything else is
//! Monte Carlo with a reported standard error. Radial and potential
//! densities are used unnormalized (every inequality checked against them
//! is invariant under scaling the measure) and the profile functions are
//! restricted to a small named catalog so measure specifications stay
//! serializable.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{dot, norm, Polytope, VolumeMethod};
use crate::rng::{stream_of, stream_rng};
use crate::stepfn::LayeredFunction;

/// Scalar profile `w(r)` for radial log-concave densities; `s -> w(e^s)`
/// must be convex.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "w", rename_all = "snake_case")]
pub enum ProfileFn {
    /// `w(r) = a r^p` with `a > 0`, `p > 0`.
    WPower { a: f64, p: f64 },
}

impl ProfileFn {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            ProfileFn::WPower { a, p } => a * r.powf(*p),
        }
    }
}

/// Potential `V(x)` with a fixed homogeneity degree `s > 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "v", rename_all = "snake_case")]
pub enum PotentialFn {
    /// `V(x) = a |x|_2^s`.
    VNormPow { a: f64, s: f64 },
    /// `V(x) = a sum_i |x_i|^s`.
    VSumPow { a: f64, s: f64 },
}

impl PotentialFn {
    pub fn degree(&self) -> f64 {
        match self {
            PotentialFn::VNormPow { s, .. } | PotentialFn::VSumPow { s, .. } => *s,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PotentialFn::VNormPow { a, s } => a * norm(x).powf(*s),
            PotentialFn::VSumPow { a, s } => a * x.iter().map(|c| c.abs().powf(*s)).sum::<f64>(),
        }
    }
}

/// Even concave weight on a symmetric support.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "phi", rename_all = "snake_case")]
pub enum ConcaveFn {
    /// `phi(x) = max(0, 1 - |x|_2 / rho)`.
    PhiCap { rho: f64 },
    /// `phi(x) = max(0, 1 - |x|_2^2 / rho^2)`.
    PhiQuadCap { rho: f64 },
}

impl ConcaveFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ConcaveFn::PhiCap { rho } => (1.0 - norm(x) / rho).max(0.0),
            ConcaveFn::PhiQuadCap { rho } => (1.0 - dot(x, x) / (rho * rho)).max(0.0),
        }
    }
}

/// One of the supported measure families on `R^n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Lebesgue { dim: usize },
    Gaussian { dim: usize },
    RadialLogConcave { dim: usize, profile: ProfileFn },
    HomogeneousPotential { dim: usize, potential: PotentialFn },
    WeightedConcave {
        dim: usize,
        base: Box<MeasureSpec>,
        phi: ConcaveFn,
        #[serde(with = "polytope_json")]
        support: Polytope,
        beta: f64,
    },
}

mod polytope_json {
    use super::*;
    use serde::de::Error as _;

    #[derive(Serialize, Deserialize)]
    struct Raw {
        dim: usize,
        vertices: Vec<Vec<f64>>,
    }

    pub fn serialize<S: serde::Serializer>(p: &Polytope, s: S) -> std::result::Result<S::Ok, S::Error> {
        Raw { dim: p.dim(), vertices: p.vertices().to_vec() }.serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Polytope, D::Error> {
        let raw = Raw::deserialize(d)?;
        Polytope::from_points(raw.dim, raw.vertices).map_err(D::Error::custom)
    }
}

/// Default Monte Carlo sample count; callers override per run.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Integration budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Budget {
    pub fn default_mc(seed: u64) -> Budget {
        Budget::MonteCarlo { samples: DEFAULT_MC_SAMPLES, seed }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntegrationResult {
    pub value: f64,
    pub stderr: f64,
    pub samples_used: usize,
}

impl IntegrationResult {
    pub fn exact(value: f64) -> Self {
        IntegrationResult { value, stderr: 0.0, samples_used: 0 }
    }
}

const MC_SHARDS: usize = 32;

impl MeasureSpec {
    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::Lebesgue { dim }
            | MeasureSpec::Gaussian { dim }
            | MeasureSpec::RadialLogConcave { dim, .. }
            | MeasureSpec::HomogeneousPotential { dim, .. }
            | MeasureSpec::WeightedConcave { dim, .. } => *dim,
        }
    }

    pub fn lebesgue(dim: usize) -> MeasureSpec {
        MeasureSpec::Lebesgue { dim }
    }

    pub fn gaussian(dim: usize) -> MeasureSpec {
        MeasureSpec::Gaussian { dim }
    }

    /// Radial log-concave density; the construction spot-checks midpoint
    /// convexity of `s -> w(e^s)` on a log grid and rejects violations.
    pub fn radial_log_concave(dim: usize, profile: ProfileFn) -> Result<MeasureSpec> {
        for i in -20..20 {
            let s0 = i as f64 * 0.35;
            let s1 = s0 + 0.7;
            let mid = 0.5 * (s0 + s1);
            let lhs = profile.eval(mid.exp());
            let rhs = 0.5 * profile.eval(s0.exp()) + 0.5 * profile.eval(s1.exp());
            if lhs > rhs + 1e-9 * (1.0 + rhs.abs()) {
                return Err(Error::InvalidParameter(
                    "profile w(e^s) fails midpoint convexity".into(),
                ));
            }
        }
        Ok(MeasureSpec::RadialLogConcave { dim, profile })
    }

    pub fn homogeneous_potential(dim: usize, potential: PotentialFn) -> Result<MeasureSpec> {
        if potential.degree() <= 1.0 {
            return Err(Error::InvalidParameter("homogeneity degree must exceed 1".into()));
        }
        Ok(MeasureSpec::HomogeneousPotential { dim, potential })
    }

    /// Weighted-concave density `phi^beta` over `support` against `base`;
    /// evenness and midpoint concavity of `phi` are spot-checked on the
    /// support at construction.
    pub fn weighted_concave(
        base: MeasureSpec,
        phi: ConcaveFn,
        support: Polytope,
        beta: f64,
    ) -> Result<MeasureSpec> {
        if beta <= 0.0 {
            return Err(Error::InvalidParameter("beta must be positive".into()));
        }
        let dim = base.dim();
        if support.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: support.dim() });
        }
        let mut rng = stream_rng(0xC0FFEE, stream_of("phi-spot-check"));
        let (lo, hi) = support.bounding_box();
        let mut sampled = 0;
        while sampled < 64 {
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            let y: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            if !support.contains(&x, 0.0)? || !support.contains(&y, 0.0)? {
                continue;
            }
            sampled += 1;
            let neg: Vec<f64> = x.iter().map(|c| -c).collect();
            if (phi.eval(&x) - phi.eval(&neg)).abs() > 1e-9 {
                return Err(Error::InvalidParameter("phi is not even".into()));
            }
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            if phi.eval(&mid) + 1e-9 < 0.5 * (phi.eval(&x) + phi.eval(&y)) {
                return Err(Error::InvalidParameter("phi fails midpoint concavity".into()));
            }
        }
        Ok(MeasureSpec::WeightedConcave { dim, base: Box::new(base), phi, support, beta })
    }

    /// Pointwise density, unnormalized except for the Gaussian.
    pub fn density_at(&self, x: &[f64]) -> f64 {
        match self {
            MeasureSpec::Lebesgue { .. } => 1.0,
            MeasureSpec::Gaussian { dim } => {
                let n = *dim as f64;
                (2.0 * std::f64::consts::PI).powf(-n / 2.0) * (-0.5 * dot(x, x)).exp()
            }
            MeasureSpec::RadialLogConcave { profile, .. } => (-profile.eval(norm(x))).exp(),
            MeasureSpec::HomogeneousPotential { potential, .. } => (-potential.eval(x)).exp(),
            MeasureSpec::WeightedConcave { base, phi, support, beta, .. } => {
                if !support.contains(x, 0.0).unwrap_or(false) {
                    return 0.0;
                }
                let w = phi.eval(x);
                if w <= 0.0 {
                    0.0
                } else {
                    base.density_at(x) * w.powf(*beta)
                }
            }
        }
    }

    /// Measure of a polytope. `Exact` is available only for Lebesgue in
    /// dimension at most three; the Gaussian uses direct normal sampling
    /// with membership counting, everything else integrates density times
    /// indicator over the bounding box.
    pub fn measure_of_polytope(&self, p: &Polytope, budget: Budget) -> Result<IntegrationResult> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.dim() });
        }
        match budget {
            Budget::Exact => match self {
                MeasureSpec::Lebesgue { .. } => {
                    let est = p.volume(VolumeMethod::Exact)?;
                    Ok(IntegrationResult::exact(est.value))
                }
                _ => Err(Error::InvalidParameter(
                    "exact budget is only available for the Lebesgue measure".into(),
                )),
            },
            Budget::MonteCarlo { samples, seed } => {
                if !p.is_full_dimensional() {
                    return Ok(IntegrationResult { value: 0.0, stderr: 0.0, samples_used: 0 });
                }
                match self {
                    MeasureSpec::Lebesgue { .. } => {
                        let (value, stderr) = p.mc_volume(samples, seed)?;
                        Ok(IntegrationResult { value, stderr, samples_used: samples })
                    }
                    MeasureSpec::Gaussian { dim } => {
                        let hit = gaussian_hit_fraction(p, *dim, samples, seed)?;
                        Ok(IntegrationResult {
                            value: hit.0,
                            stderr: hit.1,
                            samples_used: samples,
                        })
                    }
                    _ => {
                        let f = |x: &[f64]| self.density_at(x);
                        let (value, stderr) = box_mc(p, samples, seed, &f)?;
                        Ok(IntegrationResult { value, stderr, samples_used: samples })
                    }
                }
            }
        }
    }

    /// `sum_j a_j * m(A_j)` with errors combined in quadrature.
    pub fn integrate_layered(&self, f: &LayeredFunction, budget: Budget) -> Result<IntegrationResult> {
        if f.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: f.dim() });
        }
        let mut value = 0.0;
        let mut var = 0.0;
        let mut samples = 0;
        for (i, layer) in f.layers().iter().enumerate() {
            let budget_i = match budget {
                Budget::Exact => Budget::Exact,
                Budget::MonteCarlo { samples, seed } => {
                    Budget::MonteCarlo { samples, seed: seed.wrapping_add(i as u64) }
                }
            };
            let part = self.measure_of_polytope(&layer.body, budget_i)?;
            value += layer.increment * part.value;
            var += (layer.increment * part.stderr).powi(2);
            samples += part.samples_used;
        }
        Ok(IntegrationResult { value, stderr: var.sqrt(), samples_used: samples })
    }
}

/// Gaussian measure via direct standard normal sampling and membership
/// counting; unbiased with binomial standard error.
fn gaussian_hit_fraction(p: &Polytope, dim: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let per = samples / MC_SHARDS;
    let rem = samples % MC_SHARDS;
    let hits: usize = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = stream_rng(seed, 0x6a5 ^ shard as u64);
            let count = per + if shard == 0 { rem } else { 0 };
            let mut x = vec![0.0; dim];
            let mut h = 0usize;
            for _ in 0..count {
                for c in x.iter_mut() {
                    *c = rng.sample(StandardNormal);
                }
                if p.contains(&x, 0.0).unwrap_or(false) {
                    h += 1;
                }
            }
            h
        })
        .sum();
    let frac = hits as f64 / samples as f64;
    Ok((frac, (frac * (1.0 - frac) / samples as f64).sqrt()))
}

/// Bounding-box Monte Carlo of `f * 1_P`.
fn box_mc(p: &Polytope, samples: usize, seed: u64, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<(f64, f64)> {
    let (lo, hi) = p.bounding_box();
    let vbox: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    if vbox <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let per = samples / MC_SHARDS;
    let rem = samples % MC_SHARDS;
    let parts: Vec<(f64, f64, usize)> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = stream_rng(seed, 0xb0c5 ^ shard as u64);
            let count = per + if shard == 0 { rem } else { 0 };
            let mut x = vec![0.0; p.dim()];
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..count {
                for (c, (a, b)) in x.iter_mut().zip(lo.iter().zip(&hi)) {
                    *c = rng.random_range(*a..*b);
                }
                let v = if p.contains(&x, 0.0).unwrap_or(false) { f(&x) } else { 0.0 };
                sum += v;
                sumsq += v * v;
            }
            (sum, sumsq, count)
        })
        .collect();
    let n: usize = parts.iter().map(|p| p.2).sum();
    let sum: f64 = parts.iter().map(|p| p.0).sum();
    let sumsq: f64 = parts.iter().map(|p| p.1).sum();
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    Ok((vbox * mean, vbox * (var / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepfn::{LayeredFunction, ProfileSpec};

    /// Adaptive Simpson quadrature of the standard normal density; the
    /// independent one-dimensional oracle for Gaussian tests.
    pub fn gaussian_interval_oracle(a: f64, b: f64) -> f64 {
        fn density(x: f64) -> f64 {
            (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
        }
        fn simpson(a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (density(a) + 4.0 * density(0.5 * (a + b)) + density(b))
        }
        fn adapt(a: f64, b: f64, whole: f64, depth: usize) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(a, m);
            let right = simpson(m, b);
            if depth == 0 || (left + right - whole).abs() < 1e-13 {
                left + right + (left + right - whole) / 15.0
            } else {
                adapt(a, m, left, depth - 1) + adapt(m, b, right, depth - 1)
            }
        }
        adapt(a, b, simpson(a, b), 24)
    }

    #[test]
    fn density_examples() {
        let g = MeasureSpec::gaussian(2);
        assert!((g.density_at(&[0.0, 0.0]) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        let l = MeasureSpec::lebesgue(2);
        assert_eq!(l.density_at(&[3.0, -4.0]), 1.0);
    }

    #[test]
    fn exact_lebesgue_square() {
        let p = Polytope::axis_box(&[1.0, 1.0]).unwrap();
        let m = MeasureSpec::lebesgue(2);
        let r = m.measure_of_polytope(&p, Budget::Exact).unwrap();
        assert_eq!(r.value, 4.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn exact_budget_rejected_for_gaussian() {
        let p = Polytope::axis_box(&[1.0, 1.0]).unwrap();
        let m = MeasureSpec::gaussian(2);
        assert!(m.measure_of_polytope(&p, Budget::Exact).is_err());
    }

    #[test]
    fn gaussian_interval_matches_quadrature_oracle() {
        let oracle = gaussian_interval_oracle(-1.0, 1.0);
        assert!((oracle - 0.6826894921370859).abs() < 1e-10);
        let p = Polytope::interval(-1.0, 1.0).unwrap();
        let m = MeasureSpec::gaussian(1);
        let r = m
            .measure_of_polytope(&p, Budget::MonteCarlo { samples: 1_000_000, seed: 42 })
            .unwrap();
        assert!((r.value - oracle).abs() < 3.0 * r.stderr, "{} vs {}", r.value, oracle);
    }

    #[test]
    fn gaussian_near_total_mass() {
        let p = Polytope::axis_box(&[10.0, 10.0]).unwrap();
        let m = MeasureSpec::gaussian(2);
        let r = m
            .measure_of_polytope(&p, Budget::MonteCarlo { samples: 200_000, seed: 7 })
            .unwrap();
        assert!((r.value - 1.0).abs() <= 3.0 * r.stderr + 1e-9);
    }

    #[test]
    fn layered_integration_exact() {
        let f = LayeredFunction::from_profile(&ProfileSpec::new(
            Polytope::axis_box(&[1.0, 1.0]).unwrap(),
            vec![(1.0, 2.0)],
        ).unwrap())
        .unwrap();
        let m = MeasureSpec::lebesgue(2);
        let r = m.integrate_layered(&f, Budget::Exact).unwrap();
        assert_eq!(r.value, 8.0);
        let two = LayeredFunction::from_profile(&ProfileSpec::new(
            Polytope::axis_box(&[1.0, 1.0]).unwrap(),
            vec![(1.0, 2.0), (2.0, 1.0)],
        ).unwrap())
        .unwrap();
        let r = m.integrate_layered(&two, Budget::Exact).unwrap();
        assert_eq!(r.value, 16.0 + 4.0);
    }

    #[test]
    fn weighted_concave_outside_support_is_zero() {
        let support = Polytope::axis_box(&[1.0, 1.0]).unwrap();
        let m = MeasureSpec::weighted_concave(
            MeasureSpec::lebesgue(2),
            ConcaveFn::PhiQuadCap { rho: 3.0 },
            support,
            1.5,
        )
        .unwrap();
        assert_eq!(m.density_at(&[2.0, 0.0]), 0.0);
        assert!(m.density_at(&[0.5, 0.5]) > 0.0);
    }

    #[test]
    fn lebesgue_translation_invariance() {
        let p = Polytope::regular_polygon(7, 1.1).unwrap();
        let m = MeasureSpec::lebesgue(2);
        let a = m.measure_of_polytope(&p, Budget::Exact).unwrap().value;
        let q = p.translate(&[3.0, -2.0]).unwrap();
        let b = m.measure_of_polytope(&q, Budget::Exact).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gaussian_rotation_invariance() {
        let m = MeasureSpec::gaussian(2);
        let mut rng = crate::rng::stream_rng(17, 0);
        for i in 0..10u64 {
            let p = crate::harness::random_symmetric_polygon(&mut rng);
            let budget = Budget::MonteCarlo { samples: 150_000, seed: 5 + i };
            let a = m.measure_of_polytope(&p, budget).unwrap();
            let q = crate::polytope::rotate_2d(&p, 0.1 + 0.5 * i as f64).unwrap();
            let b = m
                .measure_of_polytope(&q, Budget::MonteCarlo { samples: 150_000, seed: 105 + i })
                .unwrap();
            let sigma = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            assert!((a.value - b.value).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn monotone_in_inclusion() {
        let small = Polytope::axis_box(&[0.5, 0.5]).unwrap();
        let big = Polytope::axis_box(&[1.0, 1.0]).unwrap();
        let m = MeasureSpec::radial_log_concave(2, ProfileFn::WPower { a: 0.5, p: 1.5 }).unwrap();
        let budget = Budget::MonteCarlo { samples: 200_000, seed: 3 };
        let a = m.measure_of_polytope(&small, budget).unwrap();
        let b = m.measure_of_polytope(&big, Budget::MonteCarlo { samples: 200_000, seed: 4 }).unwrap();
        let sigma = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(a.value <= b.value + 4.0 * sigma);
    }

    #[test]
    fn weighted_concave_mass_self_consistent() {
        let support = Polytope::axis_box(&[2.0, 2.0]).unwrap();
        let m = MeasureSpec::weighted_concave(
            MeasureSpec::lebesgue(2),
            ConcaveFn::PhiQuadCap { rho: 4.0 },
            support.clone(),
            1.5,
        )
        .unwrap();
        let a = m.measure_of_polytope(&support, Budget::MonteCarlo { samples: 300_000, seed: 11 }).unwrap();
        let b = m.measure_of_polytope(&support, Budget::MonteCarlo { samples: 300_000, seed: 12 }).unwrap();
        let sigma = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.value - b.value).abs() <= 4.0 * sigma);
        // crude upper bound: density at most 1 on the support
        assert!(a.value <= support.exact_volume().unwrap() + 4.0 * a.stderr);
    }

    #[test]
    fn profile_convexity_rejected() {
        // w(r) = a sqrt(ln-scale concave): use a decreasing-power profile,
        // p < 0 makes w(e^s) = a e^{ps} still convex, so craft a violation
        // through a negative coefficient instead.
        assert!(MeasureSpec::radial_log_concave(2, ProfileFn::WPower { a: -1.0, p: 2.0 }).is_err());
    }
}
