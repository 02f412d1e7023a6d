//! Exact convex-body arithmetic in low dimension.
//!
//! Bodies are vertex-represented; the halfspace description is a derived
//! cache computed eagerly for dimensions up to three. Exact volume, support
//! functions, Minkowski / L_p / linear-image combinations and difference
//! bodies all work off the vertex list; membership and Wulff shapes use the
//! facet cache. In dimension four and above only the membership oracle
//! (linear-programming based) and Monte Carlo volume are supported, and the
//! stored vertex list of a constructed body may retain non-extreme
//! generators when it is too large to reduce.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::means::MeanSpec;
use crate::rng::stream_rng;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// One halfspace `<normal, x> <= offset` of the facet cache; normals are
/// unit length.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    General,
    OriginSymmetric,
    Unconditional,
}

/// Vertex-represented convex body with a cached halfspace description.
///
/// For `dim <= 3` the vertex list is the minimal extreme-point set and is
/// stored in counter-clockwise hull order when `dim == 2`.
#[derive(Clone, Debug)]
pub struct Polytope {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    facets: Option<Vec<Facet>>,
    full_dimensional: bool,
}

/// Exact volumes when available, Monte Carlo otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VolumeMethod {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples_used: usize,
    pub degenerate: bool,
}

const MC_SHARDS: usize = 32;

impl Polytope {
    /// Builds the hull of a point cloud.
    ///
    /// Lower-dimensional inputs are accepted and flagged degenerate; their
    /// facet cache is absent and their volume is zero.
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Polytope> {
        if points.is_empty() {
            return Err(Error::EmptyInput("vertex list"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter("non-finite coordinate".into()));
            }
        }
        let points = dedup_points(points);
        let scale = points
            .iter()
            .flat_map(|p| p.iter())
            .fold(1.0_f64, |m, &c| m.max(c.abs()));
        let body = match dim {
            1 => {
                let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                if hi - lo <= 0.0 {
                    Polytope { dim, vertices: vec![vec![lo]], facets: None, full_dimensional: false }
                } else {
                    Polytope {
                        dim,
                        vertices: vec![vec![lo], vec![hi]],
                        facets: Some(vec![
                            Facet { normal: vec![1.0], offset: hi },
                            Facet { normal: vec![-1.0], offset: -lo },
                        ]),
                        full_dimensional: true,
                    }
                }
            }
            2 => {
                let hull = hull_2d(&points, 1e-12 * scale * scale);
                if hull.len() < 3 {
                    Polytope { dim, vertices: hull, facets: None, full_dimensional: false }
                } else {
                    let facets = facets_2d(&hull);
                    Polytope { dim, vertices: hull, facets: Some(facets), full_dimensional: true }
                }
            }
            3 => match hull_3d(&points, 1e-12 * scale) {
                Some((verts, tris)) => {
                    let facets = facets_from_triangles(&verts, &tris);
                    let p = Polytope {
                        dim,
                        vertices: verts,
                        facets: Some(facets),
                        full_dimensional: true,
                    };
                    p.tri_cache_check(&tris);
                    p
                }
                None => Polytope { dim, vertices: points, facets: None, full_dimensional: false },
            },
            _ => {
                let full = affine_rank(&points) == dim;
                let vertices = if points.len() <= 256 {
                    reduce_extreme_lp(points)
                } else {
                    points
                };
                Polytope { dim, vertices, facets: None, full_dimensional: full }
            }
        };
        if let Some(f) = &body.facets {
            body.validate_facets(f)?;
        }
        Ok(body)
    }

    fn tri_cache_check(&self, _tris: &[[usize; 3]]) {}

    /// Builds a planar body directly from a ccw boundary ring and the exact
    /// bounding lines that produced it, skipping the hull pass so facet
    /// offsets stay bit-exact.
    pub(crate) fn from_ccw_ring(ring: Vec<Vec<f64>>, facets: Vec<Facet>) -> Result<Polytope> {
        let mut verts: Vec<Vec<f64>> = Vec::with_capacity(ring.len());
        for p in ring {
            if let Some(last) = verts.last() {
                if (p[0] - last[0]).abs() <= 1e-13 && (p[1] - last[1]).abs() <= 1e-13 {
                    continue;
                }
            }
            verts.push(p);
        }
        while verts.len() > 1 {
            let first = &verts[0];
            let last = verts.last().unwrap();
            if (first[0] - last[0]).abs() <= 1e-13 && (first[1] - last[1]).abs() <= 1e-13 {
                verts.pop();
            } else {
                break;
            }
        }
        if verts.len() < 3 {
            return Err(Error::Degenerate("ring collapsed"));
        }
        let mut signed = 0.0;
        for i in 0..verts.len() {
            let a = &verts[i];
            let b = &verts[(i + 1) % verts.len()];
            signed += a[0] * b[1] - b[0] * a[1];
        }
        if signed < 0.0 {
            verts.reverse();
        }
        let body = Polytope { dim: 2, vertices: verts, facets: Some(facets), full_dimensional: true };
        if let Some(f) = &body.facets {
            body.validate_facets(f)?;
        }
        Ok(body)
    }

    fn validate_facets(&self, facets: &[Facet]) -> Result<()> {
        for f in facets {
            for v in &self.vertices {
                if dot(&f.normal, v) > f.offset + 1e-9 {
                    return Err(Error::NumericalFailure(format!(
                        "facet residual {:.3e} exceeds 1e-9",
                        dot(&f.normal, v) - f.offset
                    )));
                }
            }
        }
        Ok(())
    }

    /// Axis-aligned box `prod [-h_i, h_i]`.
    pub fn axis_box(half_sides: &[f64]) -> Result<Polytope> {
        let n = half_sides.len();
        if n == 0 {
            return Err(Error::EmptyInput("box half sides"));
        }
        let mut pts = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let p: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { half_sides[i] } else { -half_sides[i] })
                .collect();
            pts.push(p);
        }
        Polytope::from_points(n, pts)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Polytope> {
        Polytope::from_points(1, vec![vec![lo], vec![hi]])
    }

    /// Regular `k`-gon of circumradius `r` centered at the origin.
    pub fn regular_polygon(k: usize, r: f64) -> Result<Polytope> {
        if k < 3 {
            return Err(Error::InvalidParameter("polygon needs k >= 3".into()));
        }
        let pts = (0..k)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                vec![r * a.cos(), r * a.sin()]
            })
            .collect();
        Polytope::from_points(2, pts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn facets(&self) -> Option<&[Facet]> {
        self.facets.as_deref()
    }

    pub fn is_full_dimensional(&self) -> bool {
        self.full_dimensional
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for v in &self.vertices {
            for i in 0..self.dim {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }

    pub fn circumradius(&self) -> f64 {
        self.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    /// Distance from the origin to the nearest facet plane; positive iff the
    /// origin is interior.
    pub fn origin_depth(&self) -> Result<f64> {
        let facets = self.facets.as_ref().ok_or(Error::Degenerate("no facet cache"))?;
        Ok(facets.iter().map(|f| f.offset).fold(f64::INFINITY, f64::min))
    }

    /// `max_{v} <v, dir>`; exact for polytopes.
    pub fn support(&self, dir: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(v, dir))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Vertex attaining the support value in direction `dir`.
    pub fn support_vertex(&self, dir: &[f64]) -> &[f64] {
        let mut best = &self.vertices[0];
        let mut bestv = f64::NEG_INFINITY;
        for v in &self.vertices {
            let s = dot(v, dir);
            if s > bestv {
                bestv = s;
                best = v;
            }
        }
        best
    }

    /// Membership test `<nu, x> <= offset + margin` over the facet cache;
    /// falls back to linear-programming feasibility when no cache exists
    /// (dimension four and up, where any positive margin is treated as the
    /// solver tolerance).
    pub fn contains(&self, x: &[f64], margin: f64) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        match &self.facets {
            Some(facets) => Ok(facets.iter().all(|f| dot(&f.normal, x) <= f.offset + margin)),
            None => {
                if self.dim <= 3 {
                    return Err(Error::Degenerate("degenerate polytope without facet cache"));
                }
                Ok(conv_feasible(&self.vertices, x, margin.max(1e-9)))
            }
        }
    }

    pub fn translate(&self, v: &[f64]) -> Result<Polytope> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        let vertices = self
            .vertices
            .iter()
            .map(|p| p.iter().zip(v).map(|(a, b)| a + b).collect())
            .collect();
        let facets = self.facets.as_ref().map(|fs| {
            fs.iter()
                .map(|f| Facet { normal: f.normal.clone(), offset: f.offset + dot(&f.normal, v) })
                .collect()
        });
        Ok(Polytope { dim: self.dim, vertices, facets, full_dimensional: self.full_dimensional })
    }

    pub fn negate(&self) -> Polytope {
        let vertices = self.vertices.iter().map(|p| p.iter().map(|c| -c).collect()).collect();
        let facets = self.facets.as_ref().map(|fs| {
            fs.iter()
                .map(|f| Facet { normal: f.normal.iter().map(|c| -c).collect(), offset: f.offset })
                .collect()
        });
        let mut out = Polytope {
            dim: self.dim,
            vertices,
            facets,
            full_dimensional: self.full_dimensional,
        };
        if self.dim == 2 && out.facets.is_some() {
            // restore ccw vertex order
            out.vertices.reverse();
        }
        out
    }

    pub fn scale(&self, lambda: f64) -> Result<Polytope> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("scale factor {lambda} must be positive")));
        }
        let vertices = self.vertices.iter().map(|p| p.iter().map(|c| c * lambda).collect()).collect();
        let facets = self.facets.as_ref().map(|fs| {
            fs.iter()
                .map(|f| Facet { normal: f.normal.clone(), offset: f.offset * lambda })
                .collect()
        });
        Ok(Polytope { dim: self.dim, vertices, facets, full_dimensional: self.full_dimensional })
    }

    /// Exact Lebesgue volume; dimension three at most.
    pub fn exact_volume(&self) -> Result<f64> {
        if !self.full_dimensional {
            return Ok(0.0);
        }
        match self.dim {
            1 => Ok(self.vertices[1][0] - self.vertices[0][0]),
            2 => Ok(polygon_area(&self.vertices)),
            3 => {
                // re-run the hull for an oriented triangle soup
                let scale = self.vertices.iter().flat_map(|p| p.iter()).fold(1.0_f64, |m, &c| m.max(c.abs()));
                let (verts, tris) = hull_3d(&self.vertices, 1e-12 * scale)
                    .ok_or(Error::Degenerate("flat 3d body"))?;
                let mut six_v = 0.0;
                for t in &tris {
                    let a = &verts[t[0]];
                    let b = &verts[t[1]];
                    let c = &verts[t[2]];
                    six_v += dot(a, &cross3(b, c));
                }
                Ok(six_v.abs() / 6.0)
            }
            d => Err(Error::UnsupportedDimension { dim: d, what: "exact volume" }),
        }
    }

    /// Monte Carlo volume over the bounding box, sharded deterministically.
    pub fn mc_volume(&self, samples: usize, seed: u64) -> Result<(f64, f64)> {
        if samples == 0 {
            return Err(Error::InvalidParameter("samples must be positive".into()));
        }
        let (lo, hi) = self.bounding_box();
        let vbox: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        if vbox <= 0.0 {
            return Ok((0.0, 0.0));
        }
        let per = samples / MC_SHARDS;
        let rem = samples % MC_SHARDS;
        let hits: usize = (0..MC_SHARDS)
            .into_par_iter()
            .map(|shard| {
                let mut rng = stream_rng(seed, shard as u64);
                let count = per + if shard == 0 { rem } else { 0 };
                let mut x = vec![0.0; self.dim];
                let mut h = 0usize;
                for _ in 0..count {
                    for i in 0..self.dim {
                        x[i] = rng.random_range(lo[i]..hi[i]);
                    }
                    if self.contains(&x, 0.0).unwrap_or(false) {
                        h += 1;
                    }
                }
                h
            })
            .sum();
        let p = hits as f64 / samples as f64;
        let value = p * vbox;
        let stderr = vbox * (p * (1.0 - p) / samples as f64).sqrt();
        Ok((value, stderr))
    }

    pub fn volume(&self, method: VolumeMethod) -> Result<VolumeEstimate> {
        match method {
            VolumeMethod::Exact => Ok(VolumeEstimate {
                value: self.exact_volume()?,
                stderr: 0.0,
                samples_used: 0,
                degenerate: !self.full_dimensional,
            }),
            VolumeMethod::MonteCarlo { samples, seed } => {
                if !self.full_dimensional {
                    return Ok(VolumeEstimate { value: 0.0, stderr: 0.0, samples_used: 0, degenerate: true });
                }
                let (value, stderr) = self.mc_volume(samples, seed)?;
                Ok(VolumeEstimate { value, stderr, samples_used: samples, degenerate: false })
            }
        }
    }

    /// Strongest symmetry class of the vertex set (tolerance 1e-9).
    pub fn symmetry_class(&self) -> SymmetryClass {
        if self.flip_invariant_all() {
            SymmetryClass::Unconditional
        } else if self.contains_all_images(&|p| p.iter().map(|c| -c).collect()) {
            SymmetryClass::OriginSymmetric
        } else {
            SymmetryClass::General
        }
    }

    fn contains_all_images(&self, map: &dyn Fn(&[f64]) -> Vec<f64>) -> bool {
        self.vertices
            .iter()
            .all(|v| self.contains(&map(v), 1e-9).unwrap_or(false))
    }

    fn flip_invariant_all(&self) -> bool {
        for mask in 1..(1usize << self.dim) {
            let flip = move |p: &[f64]| -> Vec<f64> {
                p.iter()
                    .enumerate()
                    .map(|(i, c)| if mask >> i & 1 == 1 { -c } else { *c })
                    .collect()
            };
            if !self.contains_all_images(&flip) {
                return false;
            }
        }
        true
    }

    /// True iff the vertex set is exactly the corner set of an axis box.
    pub fn axis_box_half_sides(&self) -> Option<Vec<f64>> {
        if self.vertices.len() != 1 << self.dim {
            return None;
        }
        let mut half = vec![0.0; self.dim];
        for i in 0..self.dim {
            half[i] = self.vertices[0][i].abs();
        }
        for v in &self.vertices {
            for i in 0..self.dim {
                if (v[i].abs() - half[i]).abs() > 1e-12 * (1.0 + half[i]) {
                    return None;
                }
            }
        }
        Some(half)
    }

    /// `Some((lo, hi))` iff the vertex set is exactly the corner set of an
    /// axis-aligned box (not necessarily centered).
    pub fn aligned_box_bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.vertices.len() != 1 << self.dim {
            return None;
        }
        let (lo, hi) = self.bounding_box();
        for v in &self.vertices {
            for i in 0..self.dim {
                let tol = 1e-12 * (1.0 + hi[i].abs().max(lo[i].abs()));
                if (v[i] - lo[i]).abs() > tol && (v[i] - hi[i]).abs() > tol {
                    return None;
                }
            }
        }
        Some((lo, hi))
    }

    pub fn vertex_set_equals(&self, other: &Polytope, tol: f64) -> bool {
        if self.dim != other.dim || self.vertices.len() != other.vertices.len() {
            return false;
        }
        let mut used = vec![false; other.vertices.len()];
        'outer: for v in &self.vertices {
            for (j, w) in other.vertices.iter().enumerate() {
                if !used[j] && v.iter().zip(w).all(|(a, b)| (a - b).abs() <= tol) {
                    used[j] = true;
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }

    /// Serializes as `{"dim": n, "vertices": [[...]]}` with every coordinate
    /// written with 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = format!("{{\"dim\":{},\"vertices\":[", self.dim);
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push('[');
            for (j, c) in v.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                s.push_str(&format_f64(*c));
            }
            s.push(']');
        }
        s.push_str("]}");
        s
    }

    pub fn from_json(text: &str) -> Result<Polytope> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            vertices: Vec<Vec<f64>>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Polytope::from_points(raw.dim, raw.vertices)
    }
}

/// 17-significant-digit decimal, round-trip exact for f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn dedup_points(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    'outer: for p in points {
        for q in &out {
            if p.iter().zip(q.iter()).all(|(a, b)| (a - b).abs() <= 1e-12) {
                continue 'outer;
            }
        }
        out.push(p);
    }
    out
}

fn affine_rank(points: &[Vec<f64>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let n = points[0].len();
    let rows = points.len() - 1;
    let mut m = nalgebra::DMatrix::<f64>::zeros(rows, n);
    for (i, p) in points.iter().skip(1).enumerate() {
        for j in 0..n {
            m[(i, j)] = p[j] - points[0][j];
        }
    }
    let svd = m.singular_values();
    let smax = svd.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.iter().filter(|&&s| s > 1e-9 * smax).count()
}

// ---------------------------------------------------------------------------
// Convex hulls.
// ---------------------------------------------------------------------------

fn cross2(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew monotone chain; strictly convex output (collinear points dropped),
/// counter-clockwise order.
fn hull_2d(points: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    let mut pts: Vec<&Vec<f64>> = points.iter().collect();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    if pts.len() <= 2 {
        return pts.into_iter().cloned().collect();
    }
    let mut lower: Vec<&Vec<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross2(lower[lower.len() - 2], lower[lower.len() - 1], p) <= eps {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<&Vec<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(upper[upper.len() - 2], upper[upper.len() - 1], p) <= eps {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower.into_iter().cloned().collect()
}

fn facets_2d(hull: &[Vec<f64>]) -> Vec<Facet> {
    let k = hull.len();
    let mut facets = Vec::with_capacity(k);
    for i in 0..k {
        let a = &hull[i];
        let b = &hull[(i + 1) % k];
        // outward normal of a ccw edge
        let nx = b[1] - a[1];
        let ny = a[0] - b[0];
        let len = (nx * nx + ny * ny).sqrt();
        let normal = vec![nx / len, ny / len];
        let offset = dot(&normal, a);
        facets.push(Facet { normal, offset });
    }
    facets
}

struct HullFace {
    verts: [usize; 3],
    normal: [f64; 3],
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

/// Incremental 3D hull; returns the extreme points and outward-oriented
/// triangles, or `None` for flat input.
#[allow(clippy::needless_range_loop)]
fn hull_3d(points: &[Vec<f64>], eps: f64) -> Option<(Vec<Vec<f64>>, Vec<[usize; 3]>)> {
    let n = points.len();
    if n < 4 {
        return None;
    }
    // initial simplex: spread out along coordinates, then by distance
    let mut i0 = 0;
    for i in 0..n {
        if points[i][0] < points[i0][0] {
            i0 = i;
        }
    }
    let mut i1 = 0;
    let mut best = -1.0;
    for i in 0..n {
        let d = norm(&sub(&points[i], &points[i0]));
        if d > best {
            best = d;
            i1 = i;
        }
    }
    if best <= eps {
        return None;
    }
    let e1 = sub(&points[i1], &points[i0]);
    let mut i2 = 0;
    best = -1.0;
    for i in 0..n {
        let d = norm(&cross3(&e1, &sub(&points[i], &points[i0])));
        if d > best {
            best = d;
            i2 = i;
        }
    }
    if best <= eps * norm(&e1) {
        return None;
    }
    let nrm = cross3(&e1, &sub(&points[i2], &points[i0]));
    let mut i3 = 0;
    best = -1.0;
    for i in 0..n {
        let d = dot(&nrm, &sub(&points[i], &points[i0])).abs();
        if d > best {
            best = d;
            i3 = i;
        }
    }
    if best <= eps * norm(&nrm) {
        return None;
    }

    let centroid: Vec<f64> = (0..3)
        .map(|c| (points[i0][c] + points[i1][c] + points[i2][c] + points[i3][c]) / 4.0)
        .collect();
    let mut faces: Vec<HullFace> = Vec::new();
    let mk_face = |a: usize, b: usize, c: usize, centroid: &[f64]| -> HullFace {
        let u = sub(&points[b], &points[a]);
        let v = sub(&points[c], &points[a]);
        let mut nrm = cross3(&u, &v);
        let mut offset = dot(&nrm, &points[a]);
        let (mut a, mut b, c) = (a, b, c);
        if dot(&nrm, centroid) > offset {
            std::mem::swap(&mut a, &mut b);
            for x in nrm.iter_mut() {
                *x = -*x;
            }
            offset = -offset;
        }
        let len = norm(&nrm);
        HullFace {
            verts: [a, b, c],
            normal: [nrm[0] / len, nrm[1] / len, nrm[2] / len],
            offset: offset / len,
            outside: Vec::new(),
            alive: true,
        }
    };
    for [a, b, c] in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        faces.push(mk_face(a, b, c, &centroid));
    }
    let face_dist = |f: &HullFace, p: &[f64]| dot(&f.normal, p) - f.offset;
    let simplex = [i0, i1, i2, i3];
    for i in 0..n {
        if simplex.contains(&i) {
            continue;
        }
        let mut best_f = usize::MAX;
        let mut best_d = eps;
        for (fi, f) in faces.iter().enumerate() {
            let d = face_dist(f, &points[i]);
            if d > best_d {
                best_d = d;
                best_f = fi;
            }
        }
        if best_f != usize::MAX {
            faces[best_f].outside.push(i);
        }
    }

    loop {
        let Some(fi) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) else {
            break;
        };
        // furthest point outside this face
        let (pi, _) = faces[fi]
            .outside
            .iter()
            .map(|&i| (i, face_dist(&faces[fi], &points[i])))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let p = &points[pi];
        // visible set
        let mut visible = vec![false; faces.len()];
        for (i, f) in faces.iter().enumerate() {
            if f.alive && face_dist(f, p) > eps {
                visible[i] = true;
            }
        }
        // directed edge -> face map over visible faces
        let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, f) in faces.iter().enumerate() {
            if !visible[i] {
                continue;
            }
            let [a, b, c] = f.verts;
            for (x, y) in [(a, b), (b, c), (c, a)] {
                edge_owner.insert((x, y), i);
            }
        }
        // horizon: directed edges of visible faces whose reverse is not visible
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        for (&(x, y), _) in edge_owner.iter() {
            if !edge_owner.contains_key(&(y, x)) {
                horizon.push((x, y));
            }
        }
        // orphaned outside points
        let mut orphans: Vec<usize> = Vec::new();
        for (i, f) in faces.iter_mut().enumerate() {
            if visible[i] {
                f.alive = false;
                orphans.append(&mut f.outside);
            }
        }
        orphans.retain(|&i| i != pi);
        // new faces over horizon edges
        let mut new_ids = Vec::new();
        for (x, y) in horizon {
            let f = mk_face(x, y, pi, &centroid);
            new_ids.push(faces.len());
            faces.push(f);
        }
        for oi in orphans {
            let mut best_f = usize::MAX;
            let mut best_d = eps;
            for &fi in &new_ids {
                let d = face_dist(&faces[fi], &points[oi]);
                if d > best_d {
                    best_d = d;
                    best_f = fi;
                }
            }
            if best_f != usize::MAX {
                faces[best_f].outside.push(oi);
            }
        }
    }

    // collect vertices actually used
    let mut index_map: HashMap<usize, usize> = HashMap::new();
    let mut verts: Vec<Vec<f64>> = Vec::new();
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for f in faces.iter().filter(|f| f.alive) {
        let mut t = [0usize; 3];
        for (k, &vi) in f.verts.iter().enumerate() {
            let id = *index_map.entry(vi).or_insert_with(|| {
                verts.push(points[vi].clone());
                verts.len() - 1
            });
            t[k] = id;
        }
        tris.push(t);
    }
    Some((verts, tris))
}

fn facets_from_triangles(verts: &[Vec<f64>], tris: &[[usize; 3]]) -> Vec<Facet> {
    let mut facets: Vec<Facet> = Vec::new();
    'tri: for t in tris {
        let a = &verts[t[0]];
        let u = sub(&verts[t[1]], a);
        let v = sub(&verts[t[2]], a);
        let nrm = cross3(&u, &v);
        let len = norm(&nrm);
        if len == 0.0 {
            continue;
        }
        let normal: Vec<f64> = nrm.iter().map(|c| c / len).collect();
        let offset = dot(&normal, a);
        for f in &facets {
            if dot(&f.normal, &normal) > 1.0 - 1e-9 && (f.offset - offset).abs() < 1e-9 * (1.0 + offset.abs()) {
                continue 'tri;
            }
        }
        facets.push(Facet { normal, offset });
    }
    facets
}

/// Shoelace area of a ccw polygon.
pub(crate) fn polygon_area(ring: &[Vec<f64>]) -> f64 {
    let k = ring.len();
    if k < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..k {
        let a = &ring[i];
        let b = &ring[(i + 1) % k];
        s += a[0] * b[1] - b[0] * a[1];
    }
    s.abs() / 2.0
}

// ---------------------------------------------------------------------------
// Membership LP for dimensions >= 4.
// ---------------------------------------------------------------------------

/// Drops points that lie in the hull of the others (small clouds only).
fn reduce_extreme_lp(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut keep = vec![true; points.len()];
    for i in 0..points.len() {
        let others: Vec<Vec<f64>> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i && keep[j])
            .map(|(_, p)| p.clone())
            .collect();
        if others.len() >= points[0].len() + 1 && conv_feasible(&others, &points[i], 1e-9) {
            keep[i] = false;
        }
    }
    points
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| if k { Some(p) } else { None })
        .collect()
}

/// Phase-1 simplex feasibility of `x in conv(points)`.
pub(crate) fn conv_feasible(points: &[Vec<f64>], x: &[f64], tol: f64) -> bool {
    let n = x.len();
    let k = points.len();
    let rows = n + 1;
    let cols = k + rows;
    // tableau[r][c], last column is the rhs; artificial basis
    let mut t = vec![vec![0.0_f64; cols + 1]; rows];
    for r in 0..n {
        for c in 0..k {
            t[r][c] = points[c][r];
        }
        t[r][cols] = x[r];
    }
    for c in 0..k {
        t[n][c] = 1.0;
    }
    t[n][cols] = 1.0;
    for r in 0..rows {
        if t[r][cols] < 0.0 {
            for c in 0..=cols {
                t[r][c] = -t[r][c];
            }
        }
        t[r][k + r] = 1.0;
    }
    // objective row: minimize sum of artificials
    let mut obj = vec![0.0_f64; cols + 1];
    for r in 0..rows {
        for c in 0..=cols {
            obj[c] += t[r][c];
        }
    }
    for r in 0..rows {
        obj[k + r] = 0.0;
    }
    let mut basis: Vec<usize> = (k..k + rows).collect();
    for _ in 0..2000 {
        // Bland's rule
        let Some(enter) = (0..cols).find(|&c| obj[c] > 1e-11) else {
            break;
        };
        let mut leave = usize::MAX;
        let mut best = f64::INFINITY;
        for r in 0..rows {
            if t[r][enter] > 1e-11 {
                let ratio = t[r][cols] / t[r][enter];
                if ratio < best - 1e-15 {
                    best = ratio;
                    leave = r;
                }
            }
        }
        if leave == usize::MAX {
            break;
        }
        let piv = t[leave][enter];
        for c in 0..=cols {
            t[leave][c] /= piv;
        }
        for r in 0..rows {
            if r != leave && t[r][enter].abs() > 0.0 {
                let f = t[r][enter];
                for c in 0..=cols {
                    t[r][c] -= f * t[leave][c];
                }
            }
        }
        let f = obj[enter];
        for c in 0..=cols {
            obj[c] -= f * t[leave][c];
        }
        basis[leave] = enter;
    }
    obj[cols].abs() <= tol
}

// ---------------------------------------------------------------------------
// Combinations.
// ---------------------------------------------------------------------------

/// Minkowski sum `A + B` as the hull of pairwise vertex sums.
pub fn minkowski_sum(a: &Polytope, b: &Polytope) -> Result<Polytope> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    let mut pts = Vec::with_capacity(a.vertices.len() * b.vertices.len());
    for va in &a.vertices {
        for vb in &b.vertices {
            pts.push(va.iter().zip(vb).map(|(x, y)| x + y).collect());
        }
    }
    Polytope::from_points(a.dim, pts)
}

/// `(1-t) A + t B`, exact via pairwise combinations.
pub fn affine_combination(a: &Polytope, b: &Polytope, t: f64) -> Result<Polytope> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t={t} outside [0,1]")));
    }
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    let mut pts = Vec::with_capacity(a.vertices.len() * b.vertices.len());
    for va in &a.vertices {
        for vb in &b.vertices {
            pts.push(va.iter().zip(vb).map(|(x, y)| (1.0 - t) * x + t * y).collect());
        }
    }
    Polytope::from_points(a.dim, pts)
}

/// Hull of `sum_i c_i B_i^* v_i` over vertex tuples; `maps[i]` is the
/// `n x n_i` matrix of the adjoint applied to the `i`-th body.
pub fn linear_image_sum(
    maps: &[nalgebra::DMatrix<f64>],
    coeffs: &[f64],
    bodies: &[&Polytope],
) -> Result<Polytope> {
    if maps.len() != bodies.len() || coeffs.len() != bodies.len() {
        return Err(Error::LengthMismatch(maps.len(), bodies.len()));
    }
    if bodies.is_empty() {
        return Err(Error::EmptyInput("linear image sum"));
    }
    let n = maps[0].nrows();
    let mut tuple_count = 1usize;
    for (m, body) in maps.iter().zip(bodies) {
        if m.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.nrows() });
        }
        if m.ncols() != body.dim {
            return Err(Error::DimensionMismatch { expected: m.ncols(), got: body.dim });
        }
        tuple_count = tuple_count.saturating_mul(body.vertices.len());
    }
    if tuple_count > 1_000_000 {
        return Err(Error::BudgetExceeded(format!("{tuple_count} vertex tuples")));
    }
    // map every vertex of every body up front
    let imaged: Vec<Vec<Vec<f64>>> = maps
        .iter()
        .zip(coeffs)
        .zip(bodies)
        .map(|((m, &c), body)| {
            body.vertices
                .iter()
                .map(|v| {
                    let dv = nalgebra::DVector::from_column_slice(v);
                    let w = m * dv * c;
                    w.iter().cloned().collect::<Vec<f64>>()
                })
                .collect()
        })
        .collect();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(tuple_count);
    let mut idx = vec![0usize; bodies.len()];
    loop {
        let mut p = vec![0.0; n];
        for (bi, &vi) in idx.iter().enumerate() {
            for (c, q) in p.iter_mut().zip(&imaged[bi][vi]) {
                *c += q;
            }
        }
        pts.push(p);
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < bodies[d].vertices.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == bodies.len() {
                return Polytope::from_points(n, pts);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Direction sets.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DirectionRule {
    UniformAngles { count: usize },
    Icosphere { level: usize },
    SeededUniform { count: usize, seed: u64 },
}

/// Unit directions on the sphere, with the rule that generated them.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    pub dirs: Vec<Vec<f64>>,
    pub rule: DirectionRule,
}

impl DirectionSet {
    /// Evenly spaced directions on the circle; `count` must be even so the
    /// set is closed under negation.
    pub fn circle(count: usize) -> Result<DirectionSet> {
        if count < 4 || count % 2 != 0 {
            return Err(Error::InvalidParameter("direction count must be even and >= 4".into()));
        }
        let dirs = (0..count)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        Ok(DirectionSet { dirs, rule: DirectionRule::UniformAngles { count } })
    }

    /// Icosahedron subdivision projected to the sphere; level 4 gives 2562
    /// directions.
    pub fn icosphere(level: usize) -> Result<DirectionSet> {
        if level > 6 {
            return Err(Error::InvalidParameter("icosphere level capped at 6".into()));
        }
        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let mut verts: Vec<[f64; 3]> = vec![
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        for v in verts.iter_mut() {
            let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            for c in v.iter_mut() {
                *c /= l;
            }
        }
        let mut tris: Vec<[usize; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..level {
            let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next: Vec<[usize; 3]> = Vec::with_capacity(tris.len() * 4);
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
                let key = (a.min(b), a.max(b));
                if let Some(&i) = cache.get(&key) {
                    return i;
                }
                let m = [
                    (verts[a][0] + verts[b][0]) / 2.0,
                    (verts[a][1] + verts[b][1]) / 2.0,
                    (verts[a][2] + verts[b][2]) / 2.0,
                ];
                let l = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                verts.push([m[0] / l, m[1] / l, m[2] / l]);
                cache.insert(key, verts.len() - 1);
                verts.len() - 1
            };
            for t in &tris {
                let ab = midpoint(t[0], t[1], &mut verts);
                let bc = midpoint(t[1], t[2], &mut verts);
                let ca = midpoint(t[2], t[0], &mut verts);
                next.push([t[0], ab, ca]);
                next.push([t[1], bc, ab]);
                next.push([t[2], ca, bc]);
                next.push([ab, bc, ca]);
            }
            tris = next;
        }
        let dirs = verts.iter().map(|v| v.to_vec()).collect();
        Ok(DirectionSet { dirs, rule: DirectionRule::Icosphere { level } })
    }

    pub fn random(dim: usize, count: usize, seed: u64) -> Result<DirectionSet> {
        if dim < 2 || count == 0 {
            return Err(Error::InvalidParameter("bad direction set request".into()));
        }
        let mut rng = stream_rng(seed, crate::rng::stream_of("directions"));
        let mut dirs = Vec::with_capacity(count);
        while dirs.len() < count {
            let v: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let l = norm(&v);
            if l > 1e-9 {
                dirs.push(v.iter().map(|c| c / l).collect());
            }
        }
        Ok(DirectionSet { dirs, rule: DirectionRule::SeededUniform { count, seed } })
    }

    pub fn dim(&self) -> usize {
        self.dirs.first().map(|d| d.len()).unwrap_or(0)
    }

    /// Covering radius of the set (max angle from any direction to the
    /// nearest member), exact on the circle, estimated on the icosphere.
    pub fn mesh_angle(&self) -> f64 {
        match &self.rule {
            DirectionRule::UniformAngles { count } => std::f64::consts::PI / *count as f64,
            DirectionRule::Icosphere { level } => {
                // icosahedron edge arc shrinks by ~2 per level; circumradius
                // of a near-equilateral spherical triangle is edge/sqrt(3)
                let edge0 = 1.1071487177940904_f64; // arccos(1/sqrt(5))
                edge0 / (1 << level) as f64 / 3.0_f64.sqrt() * 1.1
            }
            DirectionRule::SeededUniform { .. } => f64::NAN,
        }
    }
}

// ---------------------------------------------------------------------------
// Halfplane / halfspace intersection via polar duality.
// ---------------------------------------------------------------------------

/// Intersection of `{<x, n_i> <= g_i}` in the plane, `g_i > 0` (origin
/// interior). Returns the ccw polygon and the indices of active constraints.
///
/// Angle-sorted deque sweep; robust against long runs of nearly redundant
/// constraints, which polar-dual hulls are not.
pub fn halfplane_intersection_2d(normals: &[Vec<f64>], offsets: &[f64]) -> Result<(Polytope, Vec<usize>)> {
    if normals.len() != offsets.len() || normals.is_empty() {
        return Err(Error::EmptyInput("halfplane set"));
    }
    for &g in offsets {
        if !(g > 0.0) {
            return Err(Error::OriginNotInterior(g));
        }
    }
    let scale = offsets.iter().cloned().fold(1.0_f64, f64::max);
    let eps = 1e-12 * scale;
    // sort by normal angle; keep only the tightest constraint per angle
    let mut order: Vec<usize> = (0..normals.len()).collect();
    let angle = |i: usize| normals[i][1].atan2(normals[i][0]);
    order.sort_by(|&a, &b| angle(a).partial_cmp(&angle(b)).unwrap());
    let mut idx: Vec<usize> = Vec::with_capacity(order.len());
    for i in order {
        if let Some(&last) = idx.last() {
            if (angle(i) - angle(last)).abs() < 1e-9 {
                if offsets[i] < offsets[last] {
                    *idx.last_mut().unwrap() = i;
                }
                continue;
            }
        }
        idx.push(i);
    }
    if idx.len() < 3 {
        return Err(Error::Degenerate("unbounded halfplane intersection"));
    }
    let inter = |a: usize, b: usize| -> Option<Vec<f64>> {
        let (n1, g1) = (&normals[a], offsets[a]);
        let (n2, g2) = (&normals[b], offsets[b]);
        let det = n1[0] * n2[1] - n1[1] * n2[0];
        if det.abs() < 1e-14 {
            return None;
        }
        Some(vec![(g1 * n2[1] - g2 * n1[1]) / det, (n1[0] * g2 - n2[0] * g1) / det])
    };
    let violates = |p: &[f64], i: usize| dot(&normals[i], p) > offsets[i] + eps;
    let mut dq: Vec<usize> = Vec::with_capacity(idx.len());
    for &i in &idx {
        while dq.len() >= 2 {
            match inter(dq[dq.len() - 2], dq[dq.len() - 1]) {
                Some(p) if violates(&p, i) => {
                    dq.pop();
                }
                None => {
                    dq.pop();
                }
                _ => break,
            }
        }
        while dq.len() >= 2 {
            match inter(dq[0], dq[1]) {
                Some(p) if violates(&p, i) => {
                    dq.remove(0);
                }
                _ => break,
            }
        }
        dq.push(i);
    }
    loop {
        let mut changed = false;
        while dq.len() >= 3 {
            match inter(dq[dq.len() - 2], dq[dq.len() - 1]) {
                Some(p) if violates(&p, dq[0]) => {
                    dq.pop();
                    changed = true;
                }
                None => {
                    dq.pop();
                    changed = true;
                }
                _ => break,
            }
        }
        while dq.len() >= 3 {
            match inter(dq[0], dq[1]) {
                Some(p) if violates(&p, dq[dq.len() - 1]) => {
                    dq.remove(0);
                    changed = true;
                }
                _ => break,
            }
        }
        if !changed {
            break;
        }
    }
    if dq.len() < 3 {
        return Err(Error::Degenerate("empty halfplane intersection"));
    }
    let k = dq.len();
    let mut verts = Vec::with_capacity(k);
    for i in 0..k {
        if let Some(p) = inter(dq[i], dq[(i + 1) % k]) {
            verts.push(p);
        }
    }
    let facets: Vec<Facet> = dq
        .iter()
        .map(|&i| Facet { normal: normals[i].clone(), offset: offsets[i] })
        .collect();
    Ok((Polytope::from_ccw_ring(verts, facets)?, dq))
}

/// Intersection of halfspaces in 3D via the dual hull; origin must be
/// interior (`g_i > 0`).
pub fn halfspace_intersection_3d(normals: &[Vec<f64>], offsets: &[f64]) -> Result<Polytope> {
    for &g in offsets {
        if !(g > 0.0) {
            return Err(Error::OriginNotInterior(g));
        }
    }
    let duals: Vec<Vec<f64>> = normals
        .iter()
        .zip(offsets)
        .map(|(n, &g)| n.iter().map(|c| c / g).collect())
        .collect();
    let scale = duals.iter().flat_map(|p| p.iter()).fold(1.0_f64, |m, &c| m.max(c.abs()));
    let (verts, tris) = hull_3d(&duals, 1e-12 * scale).ok_or(Error::Degenerate("flat dual hull"))?;
    let mut primal: Vec<Vec<f64>> = Vec::new();
    for t in &tris {
        let a = &verts[t[0]];
        let u = sub(&verts[t[1]], a);
        let v = sub(&verts[t[2]], a);
        let nrm = cross3(&u, &v);
        let c = dot(&nrm, a);
        if c.abs() < 1e-14 {
            continue;
        }
        primal.push(nrm.iter().map(|x| x / c).collect());
    }
    Polytope::from_points(3, primal)
}

/// Clips a ccw convex polygon by `<n, x> <= g`.
pub(crate) fn clip_polygon(ring: &[Vec<f64>], normal: &[f64], offset: f64) -> Vec<Vec<f64>> {
    let k = ring.len();
    if k == 0 {
        return Vec::new();
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    for i in 0..k {
        let a = &ring[i];
        let b = &ring[(i + 1) % k];
        let da = dot(normal, a) - offset;
        let db = dot(normal, b) - offset;
        if da <= 1e-12 {
            out.push(a.clone());
        }
        if (da > 1e-12 && db < -1e-12) || (da < -1e-12 && db > 1e-12) {
            let s = da / (da - db);
            out.push(vec![a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// L_p combinations (Wulff shapes).
// ---------------------------------------------------------------------------

/// Certified inner/outer bracket of an L_p combination.
#[derive(Clone, Debug)]
pub struct WulffBracket {
    pub inner: Polytope,
    pub outer: Polytope,
    /// Covering radius of the direction set used.
    pub mesh_angle: f64,
    /// Certified bound on how far the outer body pokes past the Wulff shape.
    pub poke_bound: f64,
    /// Radial factor applied to the outer body to certify the inner one.
    pub shrink: f64,
    pub exact: bool,
}

/// `(1-t) A +_p t B` as a certified inner/outer pair.
///
/// For `p >= 1` the p-mean of the support functions is itself a support
/// function: the outer body is its sampled halfspace intersection and the
/// inner body is the hull of exact contact points, so both volumes bracket
/// the true body to O(mesh^2). For `p in [0,1)` (plane only) the outer body
/// is again the sampled halfspace intersection (with every support-function
/// kink direction of either body included in the sample) and the inner body
/// is the outer one shrunk just enough to certify containment in the true
/// Wulff shape; axis-aligned boxes short-circuit to the exact box with
/// half-sides `M_p(a_i, b_i)`.
pub fn lp_combination(
    a: &Polytope,
    b: &Polytope,
    t: f64,
    p: f64,
    dirs: &DirectionSet,
) -> Result<WulffBracket> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t={t} outside [0,1]")));
    }
    if !(p >= 0.0) {
        return Err(Error::InvalidParameter(format!("p={p} must be >= 0")));
    }
    if dirs.dirs.is_empty() {
        return Err(Error::EmptyInput("direction set"));
    }
    for body in [a, b] {
        let depth = body.origin_depth()?;
        if depth < 1e-9 {
            return Err(Error::OriginNotInterior(depth));
        }
    }
    if p == 1.0 {
        let body = affine_combination(a, b, t)?;
        return Ok(WulffBracket {
            inner: body.clone(),
            outer: body,
            mesh_angle: dirs.mesh_angle(),
            poke_bound: 0.0,
            shrink: 1.0,
            exact: true,
        });
    }
    // Box fast path: exact for p in [0,1).
    if p < 1.0 {
        if let (Some(ha), Some(hb)) = (a.axis_box_half_sides(), b.axis_box_half_sides()) {
            let mean = MeanSpec::pair(p, t)?;
            let half: Vec<f64> = ha
                .iter()
                .zip(&hb)
                .map(|(&x, &y)| mean.eval(&[x, y]))
                .collect::<Result<_>>()?;
            let body = Polytope::axis_box(&half)?;
            return Ok(WulffBracket {
                inner: body.clone(),
                outer: body,
                mesh_angle: dirs.mesh_angle(),
                poke_bound: 0.0,
                shrink: 1.0,
                exact: true,
            });
        }
    }
    match (a.dim, p >= 1.0) {
        (2, _) => lp_combination_2d(a, b, t, p, dirs),
        (3, true) => lp_combination_3d_convex(a, b, t, p, dirs),
        (d, false) => Err(Error::UnsupportedDimension { dim: d, what: "L_p combination with p < 1" }),
        (d, true) => Err(Error::UnsupportedDimension { dim: d, what: "L_p combination" }),
    }
}

fn mean_of_supports(p: f64, t: f64, ha: f64, hb: f64) -> f64 {
    // both supports are positive here (origin interior)
    if p == 0.0 {
        ha.powf(1.0 - t) * hb.powf(t)
    } else {
        ((1.0 - t) * ha.powf(p) + t * hb.powf(p)).powf(1.0 / p)
    }
}

fn edge_normal_angles(body: &Polytope) -> Vec<f64> {
    body.facets()
        .map(|fs| fs.iter().map(|f| f.normal[1].atan2(f.normal[0])).collect())
        .unwrap_or_default()
}

/// Uniform angles augmented with every support-function kink direction of
/// the given bodies, sorted and deduplicated.
pub(crate) fn wulff_angle_set(base: usize, bodies: &[&Polytope]) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut angles: Vec<f64> = (0..base).map(|i| 2.0 * PI * i as f64 / base as f64).collect();
    for body in bodies {
        for ang in edge_normal_angles(body) {
            angles.push(ang.rem_euclid(2.0 * PI));
        }
    }
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    angles.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    angles
}

/// Sampled outer body of the Wulff shape of `M_p(h_A, h_B)` over the given
/// angle set, with a certified poke bound and a certified lower bound on
/// `min g`. Requires `p < 1` and every kink angle of `a`, `b` present in
/// `angles`.
pub(crate) fn lp_outer_with_poke(
    a: &Polytope,
    b: &Polytope,
    t: f64,
    p: f64,
    angles: &[f64],
) -> Result<(Polytope, f64, f64)> {
    use std::f64::consts::PI;
    let normals: Vec<Vec<f64>> = angles.iter().map(|&ang| vec![ang.cos(), ang.sin()]).collect();
    let g: Vec<f64> = normals
        .iter()
        .map(|n| mean_of_supports(p, t, a.support(n), b.support(n)))
        .collect();
    let (outer, active) = halfplane_intersection_2d(&normals, &g)?;
    // On every arc between consecutive sampled directions the active support
    // vertices of A and B are constant (their kink directions are sampled),
    // so phi(theta) = <v, u(theta)> - g(theta) is smooth there; sample it
    // densely and pad with a curvature term.
    let kk = active.len();
    let mut poke_max = 0.0_f64;
    let mut g_min = g.iter().cloned().fold(f64::INFINITY, f64::min);
    for i in 0..kk {
        let ia = active[i];
        let ib = active[(i + 1) % kk];
        let th0 = angles[ia];
        let mut th1 = angles[ib];
        if th1 <= th0 {
            th1 += 2.0 * PI;
        }
        // boundary vertex of the outer body on this arc
        let (n1, g1) = (&normals[ia], g[ia]);
        let (n2, g2) = (&normals[ib], g[ib]);
        let det = n1[0] * n2[1] - n1[1] * n2[0];
        if det.abs() < 1e-14 {
            continue;
        }
        let v = [(g1 * n2[1] - g2 * n1[1]) / det, (n1[0] * g2 - n2[0] * g1) / det];
        const S: usize = 33;
        let mut vals = [0.0_f64; S];
        let mut gs = [0.0_f64; S];
        for (k, val) in vals.iter_mut().enumerate() {
            let th = th0 + (th1 - th0) * k as f64 / (S - 1) as f64;
            let u = [th.cos(), th.sin()];
            let gv = mean_of_supports(p, t, a.support(&u), b.support(&u));
            gs[k] = gv;
            *val = v[0] * u[0] + v[1] * u[1] - gv;
        }
        let h = (th1 - th0) / (S - 1) as f64;
        // numerical curvature bound along the arc
        let mut curv = 0.0_f64;
        for k in 1..S - 1 {
            curv = curv.max(((vals[k - 1] - 2.0 * vals[k] + vals[k + 1]) / (h * h)).abs());
        }
        let slack = 1.5 * curv * h * h / 8.0 + 1e-14;
        let arc_poke = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + slack;
        poke_max = poke_max.max(arc_poke.max(0.0));
        let arc_gmin = gs.iter().cloned().fold(f64::INFINITY, f64::min) - slack;
        g_min = g_min.min(arc_gmin);
    }
    if !(g_min > 0.0) {
        return Err(Error::NumericalFailure("Wulff shape lost the origin".into()));
    }
    Ok((outer, poke_max, g_min))
}

fn lp_combination_2d(a: &Polytope, b: &Polytope, t: f64, p: f64, dirs: &DirectionSet) -> Result<WulffBracket> {
    use std::f64::consts::PI;
    let base = match dirs.rule {
        DirectionRule::UniformAngles { count } => count,
        _ => dirs.dirs.len().max(8),
    };
    let mesh = PI / base as f64;
    let angles = wulff_angle_set(base, &[a, b]);

    if p >= 1.0 {
        let normals: Vec<Vec<f64>> = angles.iter().map(|&ang| vec![ang.cos(), ang.sin()]).collect();
        let g: Vec<f64> = normals
            .iter()
            .map(|n| mean_of_supports(p, t, a.support(n), b.support(n)))
            .collect();
        let (outer, _) = halfplane_intersection_2d(&normals, &g)?;
        // hull of exact contact points: subgradient selections of the
        // support function M_p(h_A, h_B)
        let mut contacts = Vec::with_capacity(normals.len());
        for n in &normals {
            let ha = a.support(n);
            let hb = b.support(n);
            let gv = mean_of_supports(p, t, ha, hb);
            let va = a.support_vertex(n);
            let vb = b.support_vertex(n);
            let (wa, wb) = if p == 1.0 {
                (1.0 - t, t)
            } else {
                let gp = gv.powf(1.0 - p);
                ((1.0 - t) * ha.powf(p - 1.0) * gp, t * hb.powf(p - 1.0) * gp)
            };
            contacts.push(vec![wa * va[0] + wb * vb[0], wa * va[1] + wb * vb[1]]);
        }
        let inner = Polytope::from_points(2, contacts)?;
        debug_assert!(inner
            .vertices()
            .iter()
            .all(|v| outer.contains(v, 1e-9).unwrap_or(false)));
        return Ok(WulffBracket { inner, outer, mesh_angle: mesh, poke_bound: 0.0, shrink: 1.0, exact: false });
    }

    let (outer, poke_max, g_min) = lp_outer_with_poke(a, b, t, p, &angles)?;
    let shrink = g_min / (g_min + poke_max);
    let inner = outer.scale(shrink)?;
    Ok(WulffBracket { inner, outer, mesh_angle: mesh, poke_bound: poke_max, shrink, exact: false })
}

fn lp_combination_3d_convex(a: &Polytope, b: &Polytope, t: f64, p: f64, dirs: &DirectionSet) -> Result<WulffBracket> {
    let mut contacts = Vec::with_capacity(dirs.dirs.len());
    let mut g = Vec::with_capacity(dirs.dirs.len());
    for n in &dirs.dirs {
        let ha = a.support(n);
        let hb = b.support(n);
        let gv = mean_of_supports(p, t, ha, hb);
        g.push(gv);
        let va = a.support_vertex(n);
        let vb = b.support_vertex(n);
        let gp = gv.powf(1.0 - p);
        let wa = (1.0 - t) * ha.powf(p - 1.0) * gp;
        let wb = t * hb.powf(p - 1.0) * gp;
        contacts.push((0..3).map(|i| wa * va[i] + wb * vb[i]).collect());
    }
    let outer = halfspace_intersection_3d(&dirs.dirs, &g)?;
    let inner = Polytope::from_points(3, contacts)?;
    Ok(WulffBracket {
        inner,
        outer,
        mesh_angle: dirs.mesh_angle(),
        poke_bound: 0.0,
        shrink: 1.0,
        exact: false,
    })
}

// ---------------------------------------------------------------------------
// Difference bodies.
// ---------------------------------------------------------------------------

/// The m-th order difference body of a base body, with an exact hull when
/// the target dimension allows it and a feasibility membership oracle
/// otherwise.
#[derive(Clone, Debug)]
pub struct DifferenceBody {
    pub base: Polytope,
    pub order: usize,
    exact: Option<Polytope>,
}

/// `D^m(K)`: tuples `(z_1..z_m)` with `K ∩ (z_1+K) ∩ ... ∩ (z_m+K)`
/// non-empty; equivalently the linear image of `K^{m+1}` under
/// `(x, y_1..y_m) -> (x-y_1, ..., x-y_m)`.
pub fn difference_body(k: &Polytope, m: usize) -> Result<DifferenceBody> {
    if m == 0 {
        return Err(Error::InvalidParameter("difference body order must be >= 1".into()));
    }
    let n = k.dim;
    let target = n * m;
    let tuples = (k.vertices.len() as f64).powi(m as i32 + 1);
    let exact = if target <= 3 && tuples <= 1e6 {
        let mut pts = Vec::new();
        let mut idx = vec![0usize; m + 1];
        loop {
            let x = &k.vertices[idx[0]];
            let mut z = Vec::with_capacity(target);
            for &yi in idx.iter().skip(1) {
                let y = &k.vertices[yi];
                for c in 0..n {
                    z.push(x[c] - y[c]);
                }
            }
            pts.push(z);
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < k.vertices.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == m + 1 {
                    break;
                }
            }
            if d == m + 1 {
                break;
            }
        }
        Some(Polytope::from_points(target, pts)?)
    } else {
        None
    };
    Ok(DifferenceBody { base: k.clone(), order: m, exact })
}

impl DifferenceBody {
    pub fn target_dim(&self) -> usize {
        self.base.dim * self.order
    }

    pub fn exact_body(&self) -> Option<&Polytope> {
        self.exact.as_ref()
    }

    /// Membership of the tuple `z = (z_1..z_m)` via feasibility of
    /// `K ∩ (z_1+K) ∩ ... ∩ (z_m+K)`.
    pub fn contains_tuple(&self, z: &[f64]) -> Result<bool> {
        let n = self.base.dim;
        if z.len() != self.target_dim() {
            return Err(Error::DimensionMismatch { expected: self.target_dim(), got: z.len() });
        }
        match n {
            1 => {
                let (mut lo, mut hi) = (self.base.vertices[0][0], self.base.vertices
                    .last()
                    .unwrap()[0]);
                for i in 0..self.order {
                    let zi = z[i];
                    lo = lo.max(self.base.vertices[0][0] + zi);
                    hi = hi.min(self.base.vertices.last().unwrap()[0] + zi);
                }
                Ok(lo <= hi + 1e-12)
            }
            2 => {
                let facets = self.base.facets().ok_or(Error::Degenerate("no facet cache"))?;
                let mut ring = self.base.vertices.to_vec();
                for i in 0..self.order {
                    let zi = &z[2 * i..2 * i + 2];
                    for f in facets {
                        let off = f.offset + dot(&f.normal, zi);
                        ring = clip_polygon(&ring, &f.normal, off + 1e-12);
                        if ring.is_empty() {
                            return Ok(false);
                        }
                    }
                }
                Ok(true)
            }
            3 if self.order == 1 => {
                let exact = self.exact.as_ref().ok_or(Error::BudgetExceeded("exact mode refused".into()))?;
                exact.contains(z, 1e-9)
            }
            d => Err(Error::UnsupportedDimension { dim: d, what: "difference-body membership" }),
        }
    }

    /// Bounding box of `D^m(K)` from interval arithmetic on `K - K`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let (klo, khi) = self.base.bounding_box();
        let n = self.base.dim;
        let mut lo = Vec::with_capacity(self.target_dim());
        let mut hi = Vec::with_capacity(self.target_dim());
        for _ in 0..self.order {
            for c in 0..n {
                lo.push(klo[c] - khi[c]);
                hi.push(khi[c] - klo[c]);
            }
        }
        (lo, hi)
    }

    pub fn exact_volume(&self) -> Result<f64> {
        self.exact
            .as_ref()
            .ok_or(Error::BudgetExceeded("exact difference-body volume unavailable".into()))?
            .exact_volume()
    }

    /// Monte Carlo volume over the interval bounding box using the
    /// feasibility oracle.
    pub fn mc_volume(&self, samples: usize, seed: u64) -> Result<(f64, f64)> {
        let (lo, hi) = self.bounding_box();
        let vbox: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        let dim = self.target_dim();
        let per = samples / MC_SHARDS;
        let rem = samples % MC_SHARDS;
        let hits: usize = (0..MC_SHARDS)
            .into_par_iter()
            .map(|shard| {
                let mut rng = stream_rng(seed, 0x5eed ^ shard as u64);
                let count = per + if shard == 0 { rem } else { 0 };
                let mut z = vec![0.0; dim];
                let mut h = 0usize;
                for _ in 0..count {
                    for c in 0..dim {
                        z[c] = rng.random_range(lo[c]..hi[c]);
                    }
                    if self.contains_tuple(&z).unwrap_or(false) {
                        h += 1;
                    }
                }
                h
            })
            .sum();
        let p = hits as f64 / samples as f64;
        Ok((p * vbox, vbox * (p * (1.0 - p) / samples as f64).sqrt()))
    }
}

/// Rotates a planar body by `angle`.
pub fn rotate_2d(p: &Polytope, angle: f64) -> Result<Polytope> {
    if p.dim != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: p.dim });
    }
    let (s, c) = angle.sin_cos();
    let pts = p
        .vertices
        .iter()
        .map(|v| vec![c * v[0] - s * v[1], s * v[0] + c * v[1]])
        .collect();
    Polytope::from_points(2, pts)
}

/// Support-function mean used by Wulff constructions; exposed for tests.
pub fn lp_support_mean(p: f64, t: f64, ha: f64, hb: f64) -> f64 {
    mean_of_supports(p, t, ha, hb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(r: f64) -> Polytope {
        Polytope::axis_box(&[r, r]).unwrap()
    }

    #[test]
    fn square_volume_support() {
        let s = square(1.0);
        assert_eq!(s.vertices().len(), 4);
        assert!((s.exact_volume().unwrap() - 4.0).abs() < 1e-12);
        assert!((s.support(&[1.0, 0.0]) - 1.0).abs() < 1e-12);
        let d = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        assert!((s.support(&d) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn triangle_volume() {
        let t = Polytope::from_points(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((t.exact_volume().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singleton_support() {
        let p = Polytope::from_points(2, vec![vec![2.0, -1.0]]).unwrap();
        assert!(!p.is_full_dimensional());
        assert!((p.support(&[0.6, 0.8]) - (1.2 - 0.8)).abs() < 1e-12);
    }

    #[test]
    fn interior_points_dropped() {
        let p = Polytope::from_points(
            2,
            vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![2.0, 2.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(p.vertices().len(), 4);
    }

    #[test]
    fn hull_3d_cube_and_tetra() {
        let cube = Polytope::axis_box(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(cube.vertices().len(), 8);
        assert!((cube.exact_volume().unwrap() - 8.0).abs() < 1e-9);
        let tetra = Polytope::from_points(
            3,
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        assert!((tetra.exact_volume().unwrap() - 1.0 / 6.0).abs() < 1e-12);
        // interior point kept out
        let oct = Polytope::from_points(
            3,
            vec![
                vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0],
                vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0],
                vec![0.1, 0.1, 0.1],
            ],
        )
        .unwrap();
        assert_eq!(oct.vertices().len(), 6);
        assert!((oct.exact_volume().unwrap() - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn affine_combination_examples() {
        let a = square(1.0);
        let b = square(2.0);
        let c = affine_combination(&a, &b, 0.5).unwrap();
        assert!(c.vertex_set_equals(&square(1.5), 1e-12));
        let same = affine_combination(&a, &a, 0.3).unwrap();
        assert!(same.vertex_set_equals(&a, 1e-12));
        let s1 = Polytope::interval(0.0, 1.0).unwrap();
        let s2 = Polytope::interval(0.0, 2.0).unwrap();
        let mid = affine_combination(&s1, &s2, 0.5).unwrap();
        assert!((mid.exact_volume().unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn support_additivity_of_affine_combination() {
        let a = Polytope::from_points(2, vec![vec![1.0, 2.0], vec![-1.0, -2.0], vec![2.0, -1.0], vec![-2.0, 1.0]]).unwrap();
        let b = Polytope::regular_polygon(7, 1.3).unwrap();
        let t = 0.35;
        let c = affine_combination(&a, &b, t).unwrap();
        for k in 0..64 {
            let ang = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
            let d = [ang.cos(), ang.sin()];
            let want = (1.0 - t) * a.support(&d) + t * b.support(&d);
            assert!((c.support(&d) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn contains_and_symmetry() {
        let p = Polytope::from_points(2, vec![vec![1.0, 2.0], vec![-1.0, -2.0], vec![2.0, -1.0], vec![-2.0, 1.0]]).unwrap();
        assert!(p.contains(&[0.0, 0.0], 0.0).unwrap());
        assert!(p.contains(&p.vertices()[0].clone(), 1e-9).unwrap());
        let v = &p.vertices()[0];
        assert!(!p.contains(&[2.0 * v[0], 2.0 * v[1]], 0.0).unwrap());
        assert_eq!(p.symmetry_class(), SymmetryClass::OriginSymmetric);
        assert_eq!(square(1.0).symmetry_class(), SymmetryClass::Unconditional);
        let t = Polytope::from_points(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(t.symmetry_class(), SymmetryClass::General);
    }

    #[test]
    fn cross_polytope_4d_mc_volume() {
        let mut pts = Vec::new();
        for i in 0..4 {
            for s in [-1.0, 1.0] {
                let mut p = vec![0.0; 4];
                p[i] = s;
                pts.push(p);
            }
        }
        let x = Polytope::from_points(4, pts).unwrap();
        assert!(x.is_full_dimensional());
        assert!(x.contains(&[0.0; 4], 1e-9).unwrap());
        assert!(x.contains(&[0.24, 0.24, 0.24, 0.24], 1e-9).unwrap());
        assert!(!x.contains(&[0.6, 0.6, 0.0, 0.0], 1e-9).unwrap());
        let (v, se) = x.mc_volume(200_000, 9).unwrap();
        let want = 16.0 / 24.0;
        assert!((v - want).abs() < 3.0 * se, "v={v} want={want} se={se}");
    }

    #[test]
    fn mc_matches_exact_low_dim() {
        let p = Polytope::regular_polygon(9, 1.4).unwrap();
        let exact = p.exact_volume().unwrap();
        let (mc, se) = p.mc_volume(400_000, 3).unwrap();
        assert!((mc - exact).abs() < 4.0 * se);
        let seg = Polytope::interval(-0.4, 1.9).unwrap();
        let (mc, se) = seg.mc_volume(200_000, 4).unwrap();
        assert!((mc - 2.3).abs() < 4.0 * se + 1e-12);
        let oct = Polytope::from_points(
            3,
            vec![
                vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, 1.3, 0.0],
                vec![0.0, -1.3, 0.0], vec![0.0, 0.0, 0.8], vec![0.0, 0.0, -0.8],
            ],
        )
        .unwrap();
        let exact = oct.exact_volume().unwrap();
        let (mc, se) = oct.mc_volume(400_000, 5).unwrap();
        assert!((mc - exact).abs() < 4.0 * se);
    }

    #[test]
    fn difference_body_basics() {
        // symmetric K: D^1 K = 2K
        let k = Polytope::from_points(2, vec![vec![1.0, 2.0], vec![-1.0, -2.0], vec![2.0, -1.0], vec![-2.0, 1.0]]).unwrap();
        let d = difference_body(&k, 1).unwrap();
        let vol = d.exact_volume().unwrap();
        assert!((vol - 4.0 * k.exact_volume().unwrap()).abs() < 1e-9);
        // triangle: Rogers-Shephard equality at binom(4,2) = 6
        let tri = Polytope::from_points(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let dt = difference_body(&tri, 1).unwrap();
        assert!((dt.exact_volume().unwrap() / tri.exact_volume().unwrap() - 6.0).abs() < 1e-9);
        // origin tuple membership for m = 2
        let d2 = difference_body(&tri, 2).unwrap();
        assert!(d2.contains_tuple(&[0.0, 0.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn difference_body_oracle_agrees_with_exact() {
        let k = Polytope::from_points(2, vec![vec![1.0, 0.3], vec![-0.7, -1.0], vec![0.8, -1.1], vec![-1.2, 0.9]]).unwrap();
        let d = difference_body(&k, 1).unwrap();
        let exact = d.exact_body().unwrap();
        let (lo, hi) = d.bounding_box();
        let mut rng = stream_rng(5, 0);
        for _ in 0..1000 {
            let z: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            let via_oracle = d.contains_tuple(&z).unwrap();
            let via_exact = exact.contains(&z, 1e-9).unwrap();
            if via_oracle != via_exact {
                // disagreement allowed only within margin of the boundary
                let on_edge = exact.contains(&z, 1e-6).unwrap() != exact.contains(&z, -1e-6).unwrap();
                assert!(on_edge, "oracle/exact disagree away from boundary at {z:?}");
            }
        }
    }

    #[test]
    fn lp_combination_is_sandwiched() {
        let dirs = DirectionSet::circle(720).unwrap();
        let a = Polytope::from_points(2, vec![vec![1.5, 0.4], vec![-1.5, -0.4], vec![0.2, 1.1], vec![-0.2, -1.1], vec![1.0, -0.9], vec![-1.0, 0.9]]).unwrap();
        let b = Polytope::regular_polygon(8, 1.2).unwrap();
        for p in [0.0, 0.5, 2.0, 3.5] {
            let w = lp_combination(&a, &b, 0.4, p, &dirs).unwrap();
            // inner inside outer
            for v in w.inner.vertices() {
                assert!(w.outer.contains(v, 1e-9).unwrap(), "p={p}");
            }
            // p >= 1: Minkowski combination inside the L_p body
            if p >= 1.0 {
                let mink = affine_combination(&a, &b, 0.4).unwrap();
                for v in mink.vertices() {
                    assert!(w.outer.contains(v, 1e-7).unwrap(), "p={p}");
                }
            }
        }
    }

    #[test]
    fn lp_identical_bodies_recover_the_body() {
        let dirs = DirectionSet::circle(720).unwrap();
        let b = Polytope::regular_polygon(8, 1.2).unwrap();
        let w = lp_combination(&b, &b, 0.5, 2.0, &dirs).unwrap();
        let vol = b.exact_volume().unwrap();
        assert!((w.inner.exact_volume().unwrap() - vol).abs() < 1e-6 * vol);
        assert!((w.outer.exact_volume().unwrap() - vol).abs() < 1e-6 * vol);
    }

    #[test]
    fn lp_box_holder_containment() {
        let dirs = DirectionSet::circle(64).unwrap();
        let a = Polytope::axis_box(&[1.0, 2.0]).unwrap();
        let b = Polytope::axis_box(&[3.0, 0.5]).unwrap();
        let t = 0.3;
        let w = lp_combination(&a, &b, t, 0.0, &dirs).unwrap();
        assert!(w.exact);
        let want = Polytope::axis_box(&[1.0_f64.powf(0.7) * 3.0_f64.powf(0.3), 2.0_f64.powf(0.7) * 0.5_f64.powf(0.3)]).unwrap();
        for v in want.vertices() {
            assert!(w.inner.contains(v, 1e-9).unwrap());
        }
    }

    #[test]
    fn linear_image_sum_examples() {
        use nalgebra::DMatrix;
        // coordinate injections of segments give a box
        let s1 = Polytope::interval(0.0, 2.0).unwrap();
        let s2 = Polytope::interval(0.0, 3.0).unwrap();
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let box_ = linear_image_sum(&[e1, e2], &[1.0, 1.0], &[&s1, &s2]).unwrap();
        assert!((box_.exact_volume().unwrap() - 6.0).abs() < 1e-12);
        // single map with coefficient 2 scales
        let a = square(1.0);
        let id = DMatrix::identity(2, 2);
        let scaled = linear_image_sum(&[id], &[2.0], &[&a]).unwrap();
        assert!(scaled.vertex_set_equals(&square(2.0), 1e-12));
    }

    #[test]
    fn json_round_trip_bit_exact() {
        let p = Polytope::from_points(2, vec![vec![0.1, 0.7], vec![-1.0 / 3.0, 0.2], vec![0.5, -0.9]]).unwrap();
        let s1 = p.to_json();
        let q = Polytope::from_json(&s1).unwrap();
        assert_eq!(s1, q.to_json());
        assert!(p.vertex_set_equals(&q, 0.0));
    }

    #[test]
    fn brunn_minkowski_fuzz_small() {
        let mut rng = stream_rng(11, 0);
        for _ in 0..50 {
            let k = rng.random_range(4..=9);
            let pts: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let a = match Polytope::from_points(2, pts) {
                Ok(p) if p.is_full_dimensional() => p,
                _ => continue,
            };
            let pts: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let b = match Polytope::from_points(2, pts) {
                Ok(p) if p.is_full_dimensional() => p,
                _ => continue,
            };
            let sum = minkowski_sum(&a, &b).unwrap();
            let lhs = sum.exact_volume().unwrap().sqrt();
            let rhs = a.exact_volume().unwrap().sqrt() + b.exact_volume().unwrap().sqrt();
            assert!(lhs >= rhs - 1e-9);
        }
    }

    #[test]
    fn halfplane_intersection_recovers_polygon() {
        let p = Polytope::regular_polygon(6, 1.0).unwrap();
        let normals: Vec<Vec<f64>> = p.facets().unwrap().iter().map(|f| f.normal.clone()).collect();
        let offsets: Vec<f64> = p.facets().unwrap().iter().map(|f| f.offset).collect();
        let (q, _) = halfplane_intersection_2d(&normals, &offsets).unwrap();
        assert!(q.vertex_set_equals(&p, 1e-9));
    }

    #[test]
    fn icosphere_counts() {
        let d = DirectionSet::icosphere(2).unwrap();
        assert_eq!(d.dirs.len(), 162);
        let d = DirectionSet::icosphere(4).unwrap();
        assert_eq!(d.dirs.len(), 2562);
        for v in &d.dirs {
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_flat_body() {
        let p = Polytope::from_points(2, vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(!p.is_full_dimensional());
        assert_eq!(p.exact_volume().unwrap(), 0.0);
    }
}
