//! Weighted power means with extended exponents, the Holder exponent
//! algebra, abstract generalized-mean triples, and the Gaussian mean
//! built from the standard normal CDF.
//!
//! The mean `M_p^{(t)}(u) = (sum t_i u_i^p)^{1/p}` is extended to
//! `p in {-inf, 0, +inf}` by min, weighted geometric mean and max, and to
//! vectors with a zero coordinate by the value 0 for every exponent.
//! Weight vectors need not sum to one; the `p = 0` branch evaluates
//! `prod u_i^{t_i}` directly in that case (the continuous-extension caveat
//! applies only to normalized weights and is documented, not enforced).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use rand::Rng;

/// Exponent of a power mean: a finite real or a tagged infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Exponent {
    pub fn as_f64(&self) -> f64 {
        match self {
            Exponent::NegInf => f64::NEG_INFINITY,
            Exponent::Finite(p) => *p,
            Exponent::PosInf => f64::INFINITY,
        }
    }

    pub fn from_f64(p: f64) -> Self {
        if p == f64::NEG_INFINITY {
            Exponent::NegInf
        } else if p == f64::INFINITY {
            Exponent::PosInf
        } else {
            Exponent::Finite(p)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::NegInf => s.serialize_str("-inf"),
            Exponent::PosInf => s.serialize_str("inf"),
            Exponent::Finite(p) => s.serialize_f64(*p),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(Exponent::Finite(p)),
            Raw::Tag(t) => match t.as_str() {
                "inf" | "+inf" => Ok(Exponent::PosInf),
                "-inf" => Ok(Exponent::NegInf),
                other => Err(serde::de::Error::custom(format!(
                    "bad exponent tag {other:?}, expected \"inf\" or \"-inf\""
                ))),
            },
        }
    }
}

/// Strictly positive weights; `normalized` reports whether they sum to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput("weight vector"));
        }
        for &w in &weights {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("weight {w} not in (0, inf)")));
            }
        }
        Ok(WeightVector { weights })
    }

    pub fn pair(t: f64) -> Result<Self> {
        WeightVector::new(vec![1.0 - t, t])
    }

    pub fn uniform(n: usize) -> Result<Self> {
        WeightVector::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True iff the weights sum to one within 1e-12.
    pub fn normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= 1e-12
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        WeightVector::new(raw).map_err(serde::de::Error::custom)
    }
}

/// A weighted power mean `M_p^{(t)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSpec {
    pub p: Exponent,
    pub weights: WeightVector,
}

/// Finite exponents closer to zero than this evaluate via the `p = 0`
/// branch to avoid catastrophic cancellation.
pub const ZERO_EXPONENT_CUTOFF: f64 = 1e-10;

impl MeanSpec {
    pub fn new(p: Exponent, weights: WeightVector) -> Self {
        MeanSpec { p, weights }
    }

    pub fn finite(p: f64, weights: Vec<f64>) -> Result<Self> {
        Ok(MeanSpec::new(Exponent::Finite(p), WeightVector::new(weights)?))
    }

    /// Two-point mean with weights `(1-t, t)`.
    pub fn pair(p: f64, t: f64) -> Result<Self> {
        Ok(MeanSpec::new(Exponent::from_f64(p), WeightVector::pair(t)?))
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    /// Evaluates the mean on non-negative values.
    ///
    /// Any zero coordinate makes the result exactly 0, for every exponent.
    pub fn eval(&self, values: &[f64]) -> Result<f64> {
        let t = self.weights.as_slice();
        if values.len() != t.len() {
            return Err(Error::LengthMismatch(values.len(), t.len()));
        }
        for &u in values {
            if u < 0.0 || u.is_nan() {
                return Err(Error::NegativeValue(u));
            }
        }
        if values.iter().any(|&u| u == 0.0) {
            return Ok(0.0);
        }
        Ok(match self.p {
            Exponent::NegInf => values.iter().cloned().fold(f64::INFINITY, f64::min),
            Exponent::PosInf => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Exponent::Finite(p) if p.abs() < ZERO_EXPONENT_CUTOFF => {
                // prod u_i^{t_i}, evaluated in log space; weights may be
                // non-normalized here.
                let s: f64 = values.iter().zip(t).map(|(&u, &w)| w * u.ln()).sum();
                s.exp()
            }
            Exponent::Finite(p) => {
                // Factor out an extreme value so u^p never overflows.
                let c = if p > 0.0 {
                    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    values.iter().cloned().fold(f64::INFINITY, f64::min)
                };
                let acc: f64 = values.iter().zip(t).map(|(&u, &w)| w * (u / c).powf(p)).sum();
                c * (acc.ln() / p).exp()
            }
        })
    }
}

/// Solves `1/r = 1/p + 1/q` with the extended-exponent conventions.
///
/// A zero exponent on either side yields `r = 0`; infinities contribute
/// `1/p = 0`. The only rejected configuration is `p + q = 0` with both
/// exponents finite and non-zero, which has no solution.
pub fn holder_exponent(p: Exponent, q: Exponent) -> Result<Exponent> {
    use Exponent::*;
    match (p, q) {
        (Finite(a), Finite(b)) => {
            if a.abs() < ZERO_EXPONENT_CUTOFF || b.abs() < ZERO_EXPONENT_CUTOFF {
                return Ok(Finite(0.0));
            }
            if a + b == 0.0 {
                return Err(Error::DegenerateHolderPair);
            }
            Ok(Finite(a * b / (a + b)))
        }
        (NegInf, other) | (other, NegInf) => {
            if matches!(other, NegInf) {
                Ok(NegInf)
            } else {
                Ok(other)
            }
        }
        (PosInf, other) | (other, PosInf) => Ok(other),
    }
}

/// The mean `a -> Phi(t Phi^{-1}(a_1) + (1-t) Phi^{-1}(a_2))` on `[0,1]^2`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GaussianMean {
    pub t: f64,
}

impl GaussianMean {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidParameter(format!("gaussian mean weight t={t} not in (0,1)")));
        }
        Ok(GaussianMean { t })
    }

    /// Evaluates the mean; endpoints follow the limit conventions
    /// (0 if either argument is 0, 1 only if both are 1).
    pub fn eval(&self, a1: f64, a2: f64) -> Result<f64> {
        for a in [a1, a2] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!("gaussian mean argument {a} outside [0,1]")));
            }
        }
        if a1 == 0.0 || a2 == 0.0 {
            return Ok(0.0);
        }
        if a1 == 1.0 && a2 == 1.0 {
            return Ok(1.0);
        }
        let x = self.t * normal_quantile(a1) + (1.0 - self.t) * normal_quantile(a2);
        Ok(normal_cdf(x).clamp(0.0, 1.0))
    }
}

// ---------------------------------------------------------------------------
// Standard normal CDF and quantile.
// ---------------------------------------------------------------------------

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// erfc on [0, inf): Taylor series below 2, Lentz continued fraction above.
fn erfc_pos(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 2.0 {
        // erf(z) = 2/sqrt(pi) * sum (-1)^n z^(2n+1) / (n! (2n+1))
        let z2 = z * z;
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0_f64;
        loop {
            n += 1.0;
            term *= -z2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) || n > 80.0 {
                break;
            }
        }
        1.0 - 2.0 * FRAC_1_SQRT_PI * sum
    } else if z > 27.0 {
        0.0
    } else {
        // erfc(z) = exp(-z^2)/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
        let tiny = 1e-300;
        let mut f = z.max(tiny);
        let mut c = f;
        let mut d = 0.0_f64;
        let mut k = 0.5_f64;
        for _ in 0..200 {
            d = z + k * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = z + k / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
            k += 0.5;
        }
        (-z * z).exp() * FRAC_1_SQRT_PI / f
    }
}

/// Standard normal CDF, accurate to roughly 1e-15 absolute.
pub fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    if z >= 0.0 {
        1.0 - 0.5 * erfc_pos(z)
    } else {
        0.5 * erfc_pos(-z)
    }
}

/// Standard normal quantile: Acklam's rational initializer plus one Halley
/// step against `normal_cdf`. Inputs are clamped to `[1e-15, 1 - 1e-15]`
/// before inversion so endpoint singularities never leak infinities into
/// mean evaluations.
pub fn normal_quantile(p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // One Halley refinement: e = Phi(x) - p, x' = x - 2e/(2*phi(x) + e*x).
    let e = normal_cdf(x) - p;
    let pdf = (-0.5 * x * x).exp() * FRAC_1_SQRT_PI / std::f64::consts::SQRT_2;
    x - 2.0 * e / (2.0 * pdf + e * x)
}

// ---------------------------------------------------------------------------
// Generalized mean triples.
// ---------------------------------------------------------------------------

/// A mean evaluator usable as one leg of a generalized-mean triple.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanEvaluator {
    Power(MeanSpec),
    Gaussian(GaussianMean),
}

impl MeanEvaluator {
    pub fn arity(&self) -> usize {
        match self {
            MeanEvaluator::Power(m) => m.arity(),
            MeanEvaluator::Gaussian(_) => 2,
        }
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        match self {
            MeanEvaluator::Power(m) => m.eval(u),
            MeanEvaluator::Gaussian(g) => {
                if u.len() != 2 {
                    return Err(Error::LengthMismatch(u.len(), 2));
                }
                g.eval(u[0], u[1])
            }
        }
    }
}

/// Three mean evaluators `(W, M, N)` with per-coordinate bounds `m_i`;
/// `W` and `M` act on `prod [0, m_i]` and `N` on `prod [0, m_i^2]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneralizedMeanTriple {
    pub w: MeanEvaluator,
    pub m: MeanEvaluator,
    pub n: MeanEvaluator,
    pub bounds: Vec<Exponent>,
}

impl GeneralizedMeanTriple {
    pub fn new(w: MeanEvaluator, m: MeanEvaluator, n: MeanEvaluator, bounds: Vec<f64>) -> Result<Self> {
        let arity = w.arity();
        if m.arity() != arity || n.arity() != arity || bounds.len() != arity {
            return Err(Error::LengthMismatch(bounds.len(), arity));
        }
        Ok(GeneralizedMeanTriple {
            w,
            m,
            n,
            bounds: bounds.into_iter().map(Exponent::from_f64).collect(),
        })
    }

    pub fn arity(&self) -> usize {
        self.bounds.len()
    }

    /// Sampling caps: infinite bounds are sampled on (0, 1].
    fn caps(&self) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|b| match b {
                Exponent::Finite(m) => m.min(1.0),
                _ => 1.0,
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyWitness {
    pub args: Vec<f64>,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyCheck {
    pub passed: bool,
    pub worst: Option<PropertyWitness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TripleReport {
    pub reverse_minkowski: PropertyCheck,
    pub radial_superadditivity: PropertyCheck,
    pub holder_pairing: PropertyCheck,
    pub duality: PropertyCheck,
}

impl TripleReport {
    pub fn all_passed(&self) -> bool {
        self.reverse_minkowski.passed
            && self.radial_superadditivity.passed
            && self.holder_pairing.passed
            && self.duality.passed
    }
}

const TRIPLE_TOL: f64 = 1e-9;

/// Randomized check of the three triple properties plus the duality
/// relation `sup_a N(a u) / M(a) = W(u)`.
///
/// Inequalities are violations only past 1e-9; the duality equality is
/// checked by a zoomed grid maximization over `a` and must be attained
/// within 1e-4 relative (the grid cannot certify exact suprema).
pub fn check_triple_properties(
    triple: &GeneralizedMeanTriple,
    samples: usize,
    seed: u64,
) -> Result<TripleReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let caps = triple.caps();
    let mut rng = stream_rng(seed, crate::rng::stream_of("triple-check"));

    let mut reverse = PropertyCheck { passed: true, worst: None };
    let mut radial = PropertyCheck { passed: true, worst: None };
    let mut holder = PropertyCheck { passed: true, worst: None };

    let note = |check: &mut PropertyCheck, margin: f64, args: &[f64]| {
        let worse = check.worst.as_ref().map(|w| margin < w.margin).unwrap_or(true);
        if worse {
            check.worst = Some(PropertyWitness { args: args.to_vec(), margin });
        }
        if margin < -TRIPLE_TOL {
            check.passed = false;
        }
    };

    for _ in 0..samples {
        // (1) reverse Minkowski for M: M(u+v) >= M(u) + M(v).
        let u: Vec<f64> = caps.iter().map(|&c| rng.random_range(1e-3..=0.5) * c).collect();
        let v: Vec<f64> = caps.iter().map(|&c| rng.random_range(1e-3..=0.5) * c).collect();
        let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let margin = triple.m.eval(&uv)? - triple.m.eval(&u)? - triple.m.eval(&v)?;
        let args: Vec<f64> = u.iter().chain(&v).cloned().collect();
        note(&mut reverse, margin, &args);

        // (2) radial superadditivity for N: N(lu) + N((1-l)u) >= N(u).
        let uu: Vec<f64> = caps.iter().map(|&c| rng.random_range(1e-3..=1.0) * c * c).collect();
        let lambda: f64 = rng.random_range(0.01..=0.99);
        let lo: Vec<f64> = uu.iter().map(|x| lambda * x).collect();
        let hi: Vec<f64> = uu.iter().map(|x| (1.0 - lambda) * x).collect();
        let margin = triple.n.eval(&lo)? + triple.n.eval(&hi)? - triple.n.eval(&uu)?;
        let mut args = uu.clone();
        args.push(lambda);
        note(&mut radial, margin, &args);

        // (3) Holder pairing: W(u) M(v) >= N(uv).
        let u: Vec<f64> = caps.iter().map(|&c| rng.random_range(1e-3..=1.0) * c).collect();
        let v: Vec<f64> = caps.iter().map(|&c| rng.random_range(1e-3..=1.0) * c).collect();
        let prod: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
        let margin = triple.w.eval(&u)? * triple.m.eval(&v)? - triple.n.eval(&prod)?;
        let args: Vec<f64> = u.iter().chain(&v).cloned().collect();
        note(&mut holder, margin, &args);
    }

    // Duality via zoomed grid maximization over a in (0, caps].
    let mut duality = PropertyCheck { passed: true, worst: None };
    let duality_trials = 8.min(samples);
    for trial in 0..duality_trials {
        let mut rng = stream_rng(seed, crate::rng::stream_of("triple-duality") ^ trial as u64);
        let u: Vec<f64> = caps.iter().map(|&c| rng.random_range(0.05..=1.0) * c).collect();
        let w_u = triple.w.eval(&u)?;
        let ratio = |a: &[f64]| -> Result<f64> {
            let m_a = triple.m.eval(a)?;
            if m_a <= 0.0 {
                return Ok(0.0);
            }
            let au: Vec<f64> = a.iter().zip(&u).map(|(x, y)| x * y).collect();
            Ok(triple.n.eval(&au)? / m_a)
        };
        let best = grid_maximize(&caps, 100, 3, &ratio)?;
        // Inequality side: no grid point may exceed W(u) past tolerance.
        let gap = w_u - best;
        if gap < -TRIPLE_TOL {
            duality.passed = false;
        }
        // Attainment side: the zoomed maximum must come within 1e-4 relative.
        let attained = gap <= 1e-4 * (1.0 + w_u.abs());
        if !attained {
            duality.passed = false;
        }
        let worse = duality.worst.as_ref().map(|w| -gap.abs() < w.margin).unwrap_or(true);
        if worse {
            let mut args = u.clone();
            args.push(best);
            duality.worst = Some(PropertyWitness { args, margin: -gap.abs() });
        }
    }

    Ok(TripleReport {
        reverse_minkowski: reverse,
        radial_superadditivity: radial,
        holder_pairing: holder,
        duality,
    })
}

/// Maximizes `f` over the box `prod (0, caps_i]` by nested grid refinement.
fn grid_maximize<F>(caps: &[f64], res: usize, rounds: usize, f: &F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let k = caps.len();
    let mut lo: Vec<f64> = caps.iter().map(|&c| c * 1e-6).collect();
    let mut hi: Vec<f64> = caps.to_vec();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..rounds {
        let mut best_pt: Vec<f64> = lo.clone();
        let mut idx = vec![0usize; k];
        let mut pt = vec![0.0; k];
        loop {
            for d in 0..k {
                pt[d] = lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / (res - 1) as f64;
            }
            let val = f(&pt)?;
            if val > best {
                best = val;
                best_pt.copy_from_slice(&pt);
            }
            // odometer increment
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < res {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == k {
                    break;
                }
            }
            if d == k {
                break;
            }
        }
        // Zoom around the best point.
        for d in 0..k {
            let span = (hi[d] - lo[d]) / (res - 1) as f64 * 2.0;
            lo[d] = (best_pt[d] - span).max(caps[d] * 1e-9);
            hi[d] = (best_pt[d] + span).min(caps[d]);
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Ehrhard counterexample search.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct EhrhardWitness {
    pub a: [f64; 2],
    pub lambda: f64,
    pub margin: f64,
}

/// Grid search for a violation of radial superadditivity by the Gaussian
/// mean: `M(la) + M((1-l)a) < M(a) - 1e-6`. Returns the maximal-margin
/// witness, or `None` at this resolution.
pub fn find_ehrhard_violation(t: f64, grid_resolution: usize) -> Result<Option<EhrhardWitness>> {
    if grid_resolution < 10 {
        return Err(Error::InvalidParameter("grid resolution must be >= 10".into()));
    }
    let mean = GaussianMean::new(t)?;
    let n = grid_resolution;
    let step = 1.0 / (n + 1) as f64;
    let mut best: Option<EhrhardWitness> = None;
    for i in 1..=n {
        let a1 = i as f64 * step;
        for j in 1..=n {
            let a2 = j as f64 * step;
            let whole = mean.eval(a1, a2)?;
            for l in 1..=n {
                let lambda = l as f64 * step;
                let lo = mean.eval(lambda * a1, lambda * a2)?;
                let hi = mean.eval((1.0 - lambda) * a1, (1.0 - lambda) * a2)?;
                let margin = whole - lo - hi;
                if margin > 1e-6 && best.as_ref().map(|b| margin > b.margin).unwrap_or(true) {
                    best = Some(EhrhardWitness { a: [a1, a2], lambda, margin });
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mean(p: f64, t: &[f64]) -> MeanSpec {
        MeanSpec::finite(p, t.to_vec()).unwrap()
    }

    #[test]
    fn power_mean_examples() {
        let m = mean(0.0, &[0.5, 0.5]);
        assert!((m.eval(&[4.0, 9.0]).unwrap() - 6.0).abs() < 1e-12);
        let m = mean(1.0, &[0.3, 0.7]);
        assert!((m.eval(&[5.0, 5.0]).unwrap() - 5.0).abs() < 1e-12);
        let m = MeanSpec::new(Exponent::NegInf, WeightVector::new(vec![0.5, 0.5]).unwrap());
        assert_eq!(m.eval(&[2.0, 3.0]).unwrap(), 2.0);
        // Zero extension applies to positive exponents as well.
        let m = mean(0.5, &[1.0, 1.0]);
        assert_eq!(m.eval(&[4.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_errors() {
        let m = mean(1.0, &[0.5, 0.5]);
        assert!(matches!(m.eval(&[1.0]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(m.eval(&[1.0, -2.0]), Err(Error::NegativeValue(_))));
    }

    #[test]
    fn holder_examples() {
        let r = holder_exponent(Exponent::Finite(1.0), Exponent::Finite(1.0)).unwrap();
        assert_eq!(r, Exponent::Finite(0.5));
        // The two-coordinate pattern 1/r = 1/alpha + n with n = 2.
        let r = holder_exponent(Exponent::Finite(1.0), Exponent::Finite(0.5)).unwrap();
        match r {
            Exponent::Finite(v) => assert!((v - 1.0 / 3.0).abs() < 1e-15),
            _ => panic!("expected finite"),
        }
        assert!(matches!(
            holder_exponent(Exponent::Finite(1.0), Exponent::Finite(-1.0)),
            Err(Error::DegenerateHolderPair)
        ));
    }

    #[test]
    fn extended_exponent_continuity() {
        let t = [0.5, 0.5];
        let u = [0.7, 2.3];
        let m_inf = MeanSpec::new(Exponent::PosInf, WeightVector::new(t.to_vec()).unwrap());
        let m_neg = MeanSpec::new(Exponent::NegInf, WeightVector::new(t.to_vec()).unwrap());
        let big = mean(1e6, &t).eval(&u).unwrap();
        let small = mean(-1e6, &t).eval(&u).unwrap();
        assert!((big - m_inf.eval(&u).unwrap()).abs() < 1e-4);
        assert!((small - m_neg.eval(&u).unwrap()).abs() < 1e-4);
        let near_zero = mean(1e-6, &t).eval(&u).unwrap();
        let zero = mean(0.0, &t).eval(&u).unwrap();
        assert!((near_zero - zero).abs() < 1e-4);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.841344746068543).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.158655253931457).abs() < 1e-12);
        assert!((normal_cdf(3.0) - 0.998650101968370).abs() < 1e-12);
        assert!((normal_cdf(-6.0) - 9.865876450377018e-10).abs() < 1e-18);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-7] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn gaussian_mean_examples() {
        let g = GaussianMean::new(0.5).unwrap();
        assert!((g.eval(0.5, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((g.eval(0.37, 0.37).unwrap() - 0.37).abs() < 1e-10);
        assert_eq!(g.eval(0.0, 0.9).unwrap(), 0.0);
        assert_eq!(g.eval(1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn ehrhard_violation_exists_at_half() {
        let w = find_ehrhard_violation(0.5, 50).unwrap().expect("witness");
        assert!(w.margin > 1e-6);
    }

    #[test]
    fn log_mean_radial_additivity_has_no_witness() {
        // The normalized geometric mean satisfies M_0(la) = l M_0(a), so the
        // same grid search over it must come up empty.
        let m = mean(0.0, &[0.5, 0.5]);
        let n = 20;
        let step = 1.0 / (n + 1) as f64;
        for i in 1..=n {
            for j in 1..=n {
                let a = [i as f64 * step, j as f64 * step];
                for l in 1..=n {
                    let lambda = l as f64 * step;
                    let whole = m.eval(&a).unwrap();
                    let lo = m.eval(&[lambda * a[0], lambda * a[1]]).unwrap();
                    let hi = m.eval(&[(1.0 - lambda) * a[0], (1.0 - lambda) * a[1]]).unwrap();
                    assert!(whole - lo - hi < 1e-6);
                }
            }
        }
    }

    #[test]
    fn canonical_triple_passes() {
        // (W, M, N) = (M_{1/2}, M_{-1/2}, M_{-inf}) with uniform weights.
        let w = MeanEvaluator::Power(mean(0.5, &[0.5, 0.5]));
        let m = MeanEvaluator::Power(mean(-0.5, &[0.5, 0.5]));
        let n = MeanEvaluator::Power(MeanSpec::new(
            Exponent::NegInf,
            WeightVector::new(vec![0.5, 0.5]).unwrap(),
        ));
        let triple = GeneralizedMeanTriple::new(w, m, n, vec![f64::INFINITY, f64::INFINITY]).unwrap();
        let report = check_triple_properties(&triple, 400, 7).unwrap();
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn gaussian_radial_leg_fails() {
        let w = MeanEvaluator::Power(mean(0.5, &[0.5, 0.5]));
        let m = MeanEvaluator::Power(mean(-0.5, &[0.5, 0.5]));
        let n = MeanEvaluator::Gaussian(GaussianMean::new(0.5).unwrap());
        let triple = GeneralizedMeanTriple::new(w, m, n, vec![1.0, 1.0]).unwrap();
        let report = check_triple_properties(&triple, 400, 11).unwrap();
        assert!(!report.radial_superadditivity.passed);
    }

    #[test]
    fn mean_mixed_weights_p_zero_direct() {
        // Non-normalized weights with p = 0 evaluate prod u^t directly.
        let m = mean(0.0, &[1.0, 2.0]);
        let got = m.eval(&[2.0, 3.0]).unwrap();
        assert!((got - 2.0 * 9.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn monotone_in_values(p in -3.0f64..3.0, a in 0.01f64..5.0, b in 0.01f64..5.0,
                              da in 0.0f64..2.0, db in 0.0f64..2.0, t in 0.05f64..0.95) {
            let m = MeanSpec::pair(p, t).unwrap();
            let lo = m.eval(&[a, b]).unwrap();
            let hi = m.eval(&[a + da, b + db]).unwrap();
            prop_assert!(hi >= lo - 1e-12 * (1.0 + hi.abs()));
        }

        #[test]
        fn homogeneous(p in -3.0f64..3.0, a in 0.01f64..5.0, b in 0.01f64..5.0,
                       lam in 0.01f64..10.0, t in 0.05f64..0.95) {
            let m = MeanSpec::pair(p, t).unwrap();
            let one = m.eval(&[a, b]).unwrap();
            let scaled = m.eval(&[lam * a, lam * b]).unwrap();
            prop_assert!((scaled - lam * one).abs() < 1e-10 * (1.0 + scaled.abs()));
        }

        #[test]
        fn ordered_in_exponent(p in -3.0f64..3.0, q in -3.0f64..3.0,
                               a in 0.01f64..5.0, b in 0.01f64..5.0, t in 0.05f64..0.95) {
            let (p, q) = if p <= q { (p, q) } else { (q, p) };
            let lo = MeanSpec::pair(p, t).unwrap().eval(&[a, b]).unwrap();
            let hi = MeanSpec::pair(q, t).unwrap().eval(&[a, b]).unwrap();
            prop_assert!(lo <= hi + 1e-12 * (1.0 + hi.abs()));
        }

        #[test]
        fn reverse_minkowski_below_one(p in -3.0f64..1.0, t in 0.05f64..0.95,
                                       a in 0.01f64..5.0, b in 0.01f64..5.0,
                                       c in 0.01f64..5.0, d in 0.01f64..5.0) {
            let m = MeanSpec::pair(p, t).unwrap();
            let sum = m.eval(&[a + c, b + d]).unwrap();
            let parts = m.eval(&[a, b]).unwrap() + m.eval(&[c, d]).unwrap();
            prop_assert!(sum >= parts - 1e-10 * (1.0 + sum.abs()));
        }
    }
}
