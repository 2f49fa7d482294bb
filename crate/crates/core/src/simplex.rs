//! Simplex kernels: contents, polar sines, the discrete curvatures, faces and
//! separation ratios.
//!
//! A simplex `X = (x_0, ..., x_m)` is an ordered vertex tuple. Its content
//! `M_m(X)` is the m-volume of the parallelotope spanned by `x_i - x_0`,
//! i.e. `m!` times the simplex volume, computed as the square root of the
//! Gram determinant. Every curvature and polar sine is exactly zero on a
//! simplex whose content or relevant denominator vanishes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Contents below `REL_RANK_TOL * diam^m` are treated as exactly zero.
pub const REL_RANK_TOL: f64 = 1e-10;

pub(crate) type Buf = SmallVec<[f64; 32]>;
type EdgeBuf = SmallVec<[f64; 15]>;

/// A point of the ambient Euclidean space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    /// Validated constructor: at least one coordinate, all finite.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point has no coordinates"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("coordinate {i} is not finite")));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.0, &other.0)
    }

    pub fn scaled(&self, s: f64) -> Point {
        Point(self.0.iter().map(|c| c * s).collect())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pivoted modified Gram-Schmidt with one reorthogonalization pass, in place
/// on `count` row vectors of length `n`. Stops at the first pivot whose norm is
/// not above `stop_below`. Returns the product of the accepted pivot norms and
/// the number of accepted pivots; rows `0..rank` are then orthonormal.
fn pivoted_gram_schmidt(buf: &mut [f64], count: usize, n: usize, stop_below: f64) -> (f64, usize) {
    let mut prod = 1.0;
    let mut norms: SmallVec<[f64; 8]> = SmallVec::from_elem(0.0, count);
    for step in 0..count {
        let rows = &mut buf[step * n..count * n];
        let norms = &mut norms[step..];
        let (mut piv, mut best) = (0, -1.0);
        for (r, (row, nn)) in rows.chunks_exact(n).zip(norms.iter_mut()).enumerate() {
            *nn = dot(row, row);
            if *nn > best {
                best = *nn;
                piv = r;
            }
        }
        let nrm = best.sqrt();
        if !(nrm > stop_below) {
            return (prod, step);
        }
        if piv != 0 {
            let (a, b) = rows.split_at_mut(piv * n);
            a[..n].swap_with_slice(&mut b[..n]);
            norms.swap(0, piv);
        }
        let (q, tail) = rows.split_at_mut(n);
        let inv = 1.0 / nrm;
        q.iter_mut().for_each(|x| *x *= inv);
        prod *= nrm;
        for (row, &nn) in tail.chunks_exact_mut(n).zip(&norms[1..]) {
            let c = dot(row, q);
            axpy(row, -c, q);
            // Second pass only after heavy cancellation.
            if c * c > 0.5 * nn {
                let c = dot(row, q);
                axpy(row, -c, q);
            }
        }
    }
    (prod, count)
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// Unthresholded content of the simplex with the given vertices.
pub(crate) fn raw_content(v: &[&[f64]]) -> f64 {
    let k = v.len();
    if k <= 1 {
        return 1.0;
    }
    let n = v[0].len();
    let count = k - 1;
    if count > n {
        return 0.0;
    }
    let (prod, rank) = match n {
        2 => fixed_content::<2>(v),
        3 => fixed_content::<3>(v),
        4 => fixed_content::<4>(v),
        _ => {
            let mut buf: Buf = SmallVec::with_capacity(count * n);
            for x in &v[1..] {
                for (a, b) in x.iter().zip(v[0]) {
                    buf.push(a - b);
                }
            }
            pivoted_gram_schmidt(&mut buf, count, n, 0.0)
        }
    };
    if rank < count {
        0.0
    } else {
        prod
    }
}

/// Same elimination as `pivoted_gram_schmidt` on fixed-width rows.
fn fixed_content<const N: usize>(v: &[&[f64]]) -> (f64, usize) {
    let count = v.len() - 1;
    let mut rows = [[0.0; N]; N];
    for (row, x) in rows.iter_mut().zip(&v[1..]) {
        for c in 0..N {
            row[c] = x[c] - v[0][c];
        }
    }
    let rows = &mut rows[..count];
    let mut norms = [0.0; N];
    let mut prod = 1.0;
    for step in 0..count {
        let (mut piv, mut best) = (step, -1.0);
        for r in step..count {
            norms[r] = rows[r].iter().map(|x| x * x).sum();
            if norms[r] > best {
                best = norms[r];
                piv = r;
            }
        }
        let nrm = best.sqrt();
        if !(nrm > 0.0) {
            return (prod, step);
        }
        rows.swap(step, piv);
        norms.swap(step, piv);
        let inv = 1.0 / nrm;
        let mut q = rows[step];
        q.iter_mut().for_each(|x| *x *= inv);
        rows[step] = q;
        prod *= nrm;
        for r in step + 1..count {
            let row = &mut rows[r];
            let c: f64 = row.iter().zip(&q).map(|(a, b)| a * b).sum();
            axpy(row, -c, &q);
            if c * c > 0.5 * norms[r] {
                let c: f64 = row.iter().zip(&q).map(|(a, b)| a * b).sum();
                axpy(row, -c, &q);
            }
        }
    }
    (prod, count)
}

/// Distance from `y` to the affine span of `pts`, ignoring directions whose
/// residual norm is below `REL_RANK_TOL` times the spread of `pts`.
pub(crate) fn dist_to_span(y: &[f64], pts: &[&[f64]]) -> f64 {
    let n = y.len();
    let base = pts[0];
    let count = pts.len() - 1;
    let mut scale: f64 = 0.0;
    let mut buf: Buf = SmallVec::with_capacity(count * n);
    for x in &pts[1..] {
        scale = scale.max(dist(x, base));
        buf.extend(x.iter().zip(base).map(|(a, b)| a - b));
    }
    let (_, rank) = pivoted_gram_schmidt(&mut buf, count, n, REL_RANK_TOL * scale);
    let mut r: Buf = y.iter().zip(base).map(|(a, b)| a - b).collect();
    for q in buf.chunks_exact(n).take(rank) {
        for _ in 0..2 {
            let c = dot(&r, q);
            for (x, qv) in r.iter_mut().zip(q) {
                *x -= c * qv;
            }
        }
    }
    dot(&r, &r).sqrt()
}

fn fixed_edges<const N: usize>(v: &[&[f64]], out: &mut [f64]) {
    let mut slot = out.iter_mut();
    for (i, a) in v.iter().enumerate() {
        let a: &[f64; N] = (*a).try_into().expect("uniform dimension");
        for b in &v[i + 1..] {
            let b: &[f64; N] = (*b).try_into().expect("uniform dimension");
            let mut sq = 0.0;
            for c in 0..N {
                sq += (a[c] - b[c]) * (a[c] - b[c]);
            }
            *slot.next().expect("pair count") = sq.sqrt();
        }
    }
}

/// Pairwise edges, extreme edges and thresholded content of one vertex tuple.
pub(crate) struct Shape {
    k: usize,
    edges: EdgeBuf,
    pub(crate) diam: f64,
    pub(crate) min_edge: f64,
    pub(crate) content: f64,
}

impl Shape {
    pub(crate) fn of(v: &[&[f64]]) -> Shape {
        let mut s = Shape::edges_only(v);
        s.fill_content(v);
        s
    }

    /// Edges and extremes; `content` is left at zero.
    pub(crate) fn edges_only(v: &[&[f64]]) -> Shape {
        let k = v.len();
        let pairs = k * k.saturating_sub(1) / 2;
        let mut edges = if pairs <= 15 { EdgeBuf::from_buf_and_len([0.0; 15], pairs) } else { EdgeBuf::from_elem(0.0, pairs) };
        let mut diam: f64 = 0.0;
        let mut min_edge = if k >= 2 { f64::INFINITY } else { 0.0 };
        match v.first().map_or(0, |x| x.len()) {
            2 => fixed_edges::<2>(v, &mut edges),
            3 => fixed_edges::<3>(v, &mut edges),
            4 => fixed_edges::<4>(v, &mut edges),
            _ => {
                let mut slot = edges.iter_mut();
                for i in 0..k {
                    for j in (i + 1)..k {
                        *slot.next().expect("pair count") = dist(v[i], v[j]);
                    }
                }
            }
        }
        for &e in &edges {
            diam = diam.max(e);
            min_edge = min_edge.min(e);
        }
        Shape { k, edges, diam, min_edge, content: 0.0 }
    }

    pub(crate) fn fill_content(&mut self, v: &[&[f64]]) {
        let raw = if self.diam > 0.0 { raw_content(v) } else { 0.0 };
        self.content = if raw <= REL_RANK_TOL * self.diam.powi(self.k as i32 - 1) { 0.0 } else { raw };
    }

    /// Upper-triangle storage: pairs `(i, j)`, `i < j`, row by row.
    #[inline]
    pub(crate) fn edge(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i < j { (i, j) } else if j < i { (j, i) } else { return 0.0 };
        self.edges[i * (2 * self.k - i - 1) / 2 + (j - i - 1)]
    }

    /// Product of the edges incident to vertex `i`.
    #[inline]
    fn star_product(&self, i: usize) -> f64 {
        (0..self.k).filter(|&j| j != i).map(|j| self.edge(i, j)).product()
    }

    pub(crate) fn polar_sine(&self, i: usize) -> f64 {
        if self.content == 0.0 {
            return 0.0;
        }
        let denom = self.star_product(i);
        if denom == 0.0 {
            0.0
        } else {
            (self.content / denom).min(1.0)
        }
    }
}

/// The discrete curvatures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureKind {
    /// Root mean square of the vertex polar sines over `diam^{d(d+1)/2}`.
    Mt,
    Min,
    Max,
    /// Content over `diam^{(d+1)(d+2)/2}`.
    Vol,
    /// Vertex-0 polar sine over the product of the edges not touching `x_0`.
    Alg,
    /// Distance of `x_0` to the opposite face over the product of its edges.
    Leger,
}

impl CurvatureKind {
    pub const ALL: [CurvatureKind; 6] = [
        CurvatureKind::Mt,
        CurvatureKind::Min,
        CurvatureKind::Max,
        CurvatureKind::Vol,
        CurvatureKind::Alg,
        CurvatureKind::Leger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CurvatureKind::Mt => "mt",
            CurvatureKind::Min => "min",
            CurvatureKind::Max => "max",
            CurvatureKind::Vol => "vol",
            CurvatureKind::Alg => "alg",
            CurvatureKind::Leger => "leger",
        }
    }
}

impl fmt::Display for CurvatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CurvatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CurvatureKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown curvature kind `{s}` (expected mt, min, max, vol, alg or leger)")))
    }
}

/// Which discrete curvature, for which intrinsic dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSpec {
    pub kind: CurvatureKind,
    pub d: usize,
    /// Exponent of the polar-sine power integrand.
    pub power: f64,
}

impl CurvatureSpec {
    pub fn new(kind: CurvatureKind, d: usize) -> Self {
        Self { kind, d, power: 2.0 }
    }

    pub fn mt(d: usize) -> Self {
        Self::new(CurvatureKind::Mt, d)
    }

    pub fn with_power(mut self, power: f64) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::invalid(format!("power must be positive, got {power}")));
        }
        self.power = power;
        Ok(self)
    }
}

/// `dist(x_0, L[X(0)])^{d+1} / prod_i |x_i - x_0|^{d+1}`.
pub(crate) fn leger_power_from_shape(v: &[&[f64]], s: &Shape, d: usize) -> f64 {
    if s.content == 0.0 {
        return 0.0;
    }
    let prod: f64 = (1..s.k).map(|i| s.edge(0, i)).product();
    if prod == 0.0 {
        return 0.0;
    }
    let h = dist_to_span(v[0], &v[1..]);
    (h / prod).powi(d as i32 + 1)
}

/// The curvature value (not squared) for a tuple with `d + 2` vertices.
pub(crate) fn curvature_from_shape(v: &[&[f64]], s: &Shape, kind: CurvatureKind, d: usize) -> f64 {
    if s.content == 0.0 || s.diam == 0.0 {
        return 0.0;
    }
    let norm = s.diam.powi((d * (d + 1)) as i32);
    let psin_sq = || (0..s.k).map(|i| s.polar_sine(i).powi(2));
    match kind {
        CurvatureKind::Mt => (psin_sq().sum::<f64>() / (d + 2) as f64 / norm).sqrt(),
        CurvatureKind::Min => (psin_sq().fold(f64::INFINITY, f64::min) / norm).sqrt(),
        CurvatureKind::Max => (psin_sq().fold(0.0, f64::max) / norm).sqrt(),
        CurvatureKind::Vol => (s.content.powi(2) / s.diam.powi(((d + 1) * (d + 2)) as i32)).sqrt(),
        CurvatureKind::Alg => {
            if s.min_edge == 0.0 {
                return 0.0;
            }
            let mut prod = 1.0;
            for i in 1..s.k {
                for j in (i + 1)..s.k {
                    prod *= s.edge(i, j);
                }
            }
            s.polar_sine(0) / prod
        }
        CurvatureKind::Leger => leger_power_from_shape(v, s, d).powf(1.0 / (d + 1) as f64),
    }
}

/// `psin_{x_0}^p(X) / diam(X)^{d(d+1)}`, the vertex-0 form of the squared
/// Menger-type integrand when `p = 2`.
pub(crate) fn psin0_power_from_shape(s: &Shape, d: usize, p: f64) -> f64 {
    if s.content == 0.0 {
        return 0.0;
    }
    let ps = s.polar_sine(0);
    if ps == 0.0 {
        return 0.0;
    }
    let pw = if p == p.trunc() && (1.0..=16.0).contains(&p) { ps.powi(p as i32) } else { ps.powf(p) };
    pw / s.diam.powi((d * (d + 1)) as i32)
}

/// Curvature of a raw vertex tuple; `v.len()` must equal `spec.d + 2`.
pub fn curvature_of(v: &[&[f64]], spec: &CurvatureSpec) -> f64 {
    debug_assert_eq!(v.len(), spec.d + 2);
    curvature_from_shape(v, &Shape::of(v), spec.kind, spec.d)
}

/// An affine subspace: base point plus orthonormal directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePlane {
    base: Point,
    basis: Vec<Vec<f64>>,
}

impl AffinePlane {
    /// Checks dimensions and orthonormality of `basis` to 1e-12.
    pub fn new(base: Point, basis: Vec<Vec<f64>>) -> Result<Self> {
        let n = base.dim();
        if basis.len() > n {
            return Err(Error::invalid(format!("{} directions exceed ambient dimension {n}", basis.len())));
        }
        for (i, u) in basis.iter().enumerate() {
            if u.len() != n {
                return Err(Error::invalid(format!("direction {i} has dimension {}, expected {n}", u.len())));
            }
            for (j, w) in basis.iter().enumerate().take(i + 1) {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot(u, w) - expect).abs() > 1e-12 {
                    return Err(Error::invalid(format!("directions {j} and {i} are not orthonormal")));
                }
            }
        }
        Ok(Self { base, basis })
    }

    pub(crate) fn from_parts(base: Point, basis: Vec<Vec<f64>>) -> Self {
        Self { base, basis }
    }

    /// The affine span of `points`, dropping directions whose residual is
    /// below `rank_tol` times the largest distance to the first point.
    pub fn through(points: &[&[f64]], rank_tol: f64) -> AffinePlane {
        let base = points[0];
        let n = base.len();
        let count = points.len() - 1;
        let mut scale: f64 = 0.0;
        let mut buf: Buf = SmallVec::with_capacity(count * n);
        for x in &points[1..] {
            scale = scale.max(dist(x, base));
            buf.extend(x.iter().zip(base).map(|(a, b)| a - b));
        }
        let (_, rank) = pivoted_gram_schmidt(&mut buf, count, n, rank_tol * scale);
        let basis = buf.chunks_exact(n).take(rank).map(|q| q.to_vec()).collect();
        AffinePlane { base: Point(base.to_vec()), basis }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = y.iter().zip(self.base.coords()).map(|(a, b)| a - b).collect();
        let mut out = self.base.coords().to_vec();
        for u in &self.basis {
            let c = dot(&r, u);
            for (o, uv) in out.iter_mut().zip(u) {
                *o += c * uv;
            }
        }
        out
    }

    /// Distance from `y` to the plane; `y` must have the ambient dimension.
    pub(crate) fn residual(&self, y: &[f64]) -> f64 {
        let mut r: Buf = y.iter().zip(self.base.coords()).map(|(a, b)| a - b).collect();
        for u in &self.basis {
            let c = dot(&r, u);
            for (x, uv) in r.iter_mut().zip(u) {
                *x -= c * uv;
            }
        }
        dot(&r, &r).sqrt()
    }

    pub fn dist(&self, y: &Point) -> Result<f64> {
        if y.dim() != self.ambient_dim() {
            return Err(Error::invalid(format!(
                "point dimension {} does not match plane ambient dimension {}",
                y.dim(),
                self.ambient_dim()
            )));
        }
        Ok(self.residual(y.coords()))
    }
}

/// One edit of a face operation: drop vertex `i`, or put `y` in its slot.
#[derive(Clone, Debug)]
pub enum FaceEdit {
    Remove(usize),
    Replace(usize, Point),
}

impl FaceEdit {
    fn index(&self) -> usize {
        match self {
            FaceEdit::Remove(i) | FaceEdit::Replace(i, _) => *i,
        }
    }
}

/// An ordered tuple of vertices in a common ambient space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simplex {
    vertices: Vec<Point>,
}

impl Simplex {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(Error::invalid("simplex has no vertices"));
        };
        let n = first.dim();
        if let Some(i) = vertices.iter().position(|v| v.dim() != n) {
            return Err(Error::invalid(format!("vertex {i} has dimension {}, expected {n}", vertices[i].dim())));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.vertices[0].dim()
    }

    fn refs(&self) -> SmallVec<[&[f64]; 8]> {
        self.vertices.iter().map(|p| p.coords()).collect()
    }

    /// `(diam(X), min(X))`: largest and smallest pairwise distances.
    pub fn edge_stats(&self) -> Result<(f64, f64)> {
        if self.len() < 2 {
            return Err(Error::invalid("edge statistics need at least two vertices"));
        }
        let s = Shape::of(&self.refs());
        Ok((s.diam, s.min_edge))
    }

    /// `M_m(X)` for `m + 1` vertices, zero below the rank tolerance.
    pub fn content(&self) -> Result<f64> {
        let m = self.len() - 1;
        if m > self.ambient_dim() {
            return Err(Error::invalid(format!("{m}-content needs ambient dimension at least {m}")));
        }
        if m == 0 {
            return Ok(1.0);
        }
        Ok(Shape::of(&self.refs()).content)
    }

    /// General face operation: one or two distinct edits applied in place,
    /// vertex order otherwise preserved.
    pub fn face(&self, edits: &[FaceEdit]) -> Result<Simplex> {
        if edits.is_empty() || edits.len() > 2 {
            return Err(Error::invalid("a face takes one or two edits"));
        }
        for e in edits {
            if e.index() >= self.len() {
                return Err(Error::invalid(format!("index {} out of range for {} vertices", e.index(), self.len())));
            }
            if let FaceEdit::Replace(_, y) = e {
                if y.dim() != self.ambient_dim() {
                    return Err(Error::invalid("replacement point has the wrong dimension"));
                }
            }
        }
        if edits.len() == 2 && edits[0].index() == edits[1].index() {
            return Err(Error::invalid(format!("duplicate face index {}", edits[0].index())));
        }
        let mut out = Vec::with_capacity(self.len());
        for (i, v) in self.vertices.iter().enumerate() {
            match edits.iter().find(|e| e.index() == i) {
                None => out.push(v.clone()),
                Some(FaceEdit::Remove(_)) => {}
                Some(FaceEdit::Replace(_, y)) => out.push(y.clone()),
            }
        }
        if out.is_empty() {
            return Err(Error::invalid("face would have no vertices"));
        }
        Ok(Simplex { vertices: out })
    }

    /// `X(i)`.
    pub fn remove(&self, i: usize) -> Result<Simplex> {
        self.face(&[FaceEdit::Remove(i)])
    }

    /// `X(i;j)`.
    pub fn remove_pair(&self, i: usize, j: usize) -> Result<Simplex> {
        self.face(&[FaceEdit::Remove(i), FaceEdit::Remove(j)])
    }

    /// `X(y,i)`.
    pub fn replace(&self, i: usize, y: Point) -> Result<Simplex> {
        self.face(&[FaceEdit::Replace(i, y)])
    }

    /// `X(y,i;z,j)`.
    pub fn replace_pair(&self, i: usize, y: Point, j: usize, z: Point) -> Result<Simplex> {
        self.face(&[FaceEdit::Replace(i, y), FaceEdit::Replace(j, z)])
    }

    /// `L[X]`; see [`AffinePlane::through`] for `rank_tol`.
    pub fn affine_span(&self, rank_tol: f64) -> AffinePlane {
        AffinePlane::through(&self.refs(), rank_tol)
    }

    /// `M(X) / prod_{j != i} |x_j - x_i|`, zero when the denominator is zero.
    pub fn polar_sine(&self, i: usize) -> f64 {
        if i >= self.len() || self.len() < 2 {
            return 0.0;
        }
        Shape::of(&self.refs()).polar_sine(i)
    }

    /// `sin(theta_i) = dist(x_i, L[X(i)]) / |x_i - x_0|` for `i >= 1`.
    pub fn elevation_sine(&self, i: usize) -> Result<f64> {
        if i == 0 || i >= self.len() {
            return Err(Error::invalid(format!("elevation index must be in 1..{}", self.len())));
        }
        let v = self.refs();
        let s = Shape::of(&v);
        if s.min_edge == 0.0 {
            return Err(Error::Degenerate("elevation angle needs distinct vertices".into()));
        }
        let rest: SmallVec<[&[f64]; 8]> = v.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| *x).collect();
        let h = dist_to_span(v[i], &rest);
        Ok((h / s.edge(0, i)).min(1.0))
    }

    fn check_curvature_arity(&self, d: usize) -> Result<()> {
        if self.len() != d + 2 {
            return Err(Error::invalid(format!("curvature with d = {d} needs {} vertices, got {}", d + 2, self.len())));
        }
        Ok(())
    }

    /// The curvature value for `spec.kind` (the root form for Léger).
    pub fn curvature(&self, spec: &CurvatureSpec) -> Result<f64> {
        self.check_curvature_arity(spec.d)?;
        Ok(curvature_of(&self.refs(), spec))
    }

    /// `c_L^{d+1}(X)`, the Léger integrand.
    pub fn leger_power(&self, d: usize) -> Result<f64> {
        self.check_curvature_arity(d)?;
        let v = self.refs();
        Ok(leger_power_from_shape(&v, &Shape::of(&v), d))
    }

    /// Minimal `n`-face content over `diam^n`, for `1 <= n <= len - 2`.
    pub fn separation_ratio(&self, n: usize) -> Result<f64> {
        let k = self.len();
        if n == 0 || n + 2 > k {
            return Err(Error::invalid(format!("separation order {n} must be in 1..={}", k.saturating_sub(2))));
        }
        let v = self.refs();
        let s = Shape::of(&v);
        if s.diam == 0.0 {
            return Err(Error::Degenerate("separation ratio needs positive diameter".into()));
        }
        let mut best = f64::INFINITY;
        let mut idx: SmallVec<[usize; 8]> = (0..=n).collect();
        loop {
            let face: SmallVec<[&[f64]; 8]> = idx.iter().map(|&i| v[i]).collect();
            best = best.min(Shape::of(&face).content);
            // next (n+1)-combination of 0..k
            let mut pos = n as isize;
            while pos >= 0 && idx[pos as usize] == k - (n + 1) + pos as usize {
                pos -= 1;
            }
            if pos < 0 {
                break;
            }
            let p = pos as usize;
            idx[p] += 1;
            for q in (p + 1)..=n {
                idx[q] = idx[q - 1] + 1;
            }
        }
        Ok(best / s.diam.powi(n as i32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sx(pts: &[&[f64]]) -> Simplex {
        Simplex::new(pts.iter().map(|p| Point::from(p.to_vec())).collect()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn edge_stats_examples() {
        assert_eq!(sx(&[&[0.0, 0.0], &[3.0, 4.0]]).edge_stats().unwrap(), (5.0, 5.0));
        let (d, m) = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]).edge_stats().unwrap();
        assert!(close(d, 2f64.sqrt(), 1e-15) && m == 1.0);
        let (_, m) = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]).edge_stats().unwrap();
        assert_eq!(m, 0.0);
        assert!(sx(&[&[0.0]]).edge_stats().is_err());
    }

    #[test]
    fn content_examples() {
        assert!(close(sx(&[&[0.0, 0.0], &[3.0, 4.0]]).content().unwrap(), 5.0, 1e-15));
        assert!(close(sx(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]).content().unwrap(), 1.0, 1e-15));
        assert_eq!(sx(&[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]).content().unwrap(), 0.0);
        assert!(sx(&[&[0.0], &[1.0], &[2.0]]).content().is_err());
    }

    #[test]
    fn face_operations_follow_index_conventions() {
        let x = sx(&[&[0.0], &[1.0], &[2.0]]);
        assert_eq!(x.remove(1).unwrap(), sx(&[&[0.0], &[2.0]]));
        assert_eq!(x.replace(1, Point::from([9.0])).unwrap(), sx(&[&[0.0], &[9.0], &[2.0]]));
        let four = sx(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        assert_eq!(four.remove_pair(0, 2).unwrap(), sx(&[&[1.0], &[3.0]]));
        assert_eq!(
            four.replace_pair(1, Point::from([7.0]), 3, Point::from([8.0])).unwrap(),
            sx(&[&[0.0], &[7.0], &[2.0], &[8.0]])
        );
        // X(y,1;3): replace slot 1, drop slot 3
        let mixed = four.face(&[FaceEdit::Replace(1, Point::from([5.0])), FaceEdit::Remove(3)]).unwrap();
        assert_eq!(mixed, sx(&[&[0.0], &[5.0], &[2.0]]));
        assert!(x.remove(3).is_err());
        assert!(four.remove_pair(1, 1).is_err());
    }

    #[test]
    fn affine_span_dimensions() {
        assert_eq!(sx(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]]).affine_span(1e-10).dim(), 1);
        assert_eq!(sx(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]).affine_span(1e-10).dim(), 2);
        let p = sx(&[&[3.0, 4.0]]).affine_span(1e-10);
        assert_eq!(p.dim(), 0);
        assert_eq!(p.base(), &Point::from([3.0, 4.0]));
    }

    #[test]
    fn dist_to_plane_examples() {
        let z0 = AffinePlane::new(Point::origin(3), vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(z0.dist(&Point::from([0.0, 0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(z0.dist(&Point::from([2.0, -3.0, 0.0])).unwrap(), 0.0);
        let line = sx(&[&[1.0, 0.0], &[0.0, 1.0]]).affine_span(1e-10);
        // closed-form |ax + by - c| / sqrt(a^2 + b^2) for x + y = 1
        let oracle = (0.0f64 + 0.0 - 1.0).abs() / 2f64.sqrt();
        assert!(close(line.dist(&Point::from([0.0, 0.0])).unwrap(), oracle, 1e-15));
        assert!(z0.dist(&Point::from([0.0, 0.0])).is_err());
        assert!(AffinePlane::new(Point::origin(2), vec![vec![1.0, 0.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn polar_sine_examples() {
        let x = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        assert!(close(x.polar_sine(0), 1.0, 1e-15));
        // cross product oracle: |u x v| / (|u||v|) at vertex 1
        let (u, v) = ([-1.0f64, 0.0], [-1.0f64, 1.0]);
        let oracle = (u[0] * v[1] - u[1] * v[0]).abs() / (1.0 * 2f64.sqrt());
        assert!(close(x.polar_sine(1), oracle, 1e-15));
        assert_eq!(sx(&[&[0.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]]).polar_sine(0), 0.0);
    }

    #[test]
    fn elevation_sine_examples() {
        let x = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        assert!(close(x.elevation_sine(2).unwrap(), 1.0, 1e-15));
        let flat = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[3.0, 0.0]]);
        assert_eq!(flat.elevation_sine(2).unwrap(), 0.0);
        // d = 1 reduces to |sin| of the angle at x_0
        let y = sx(&[&[0.0, 0.0], &[2.0, 0.0], &[1.0, 3.0]]);
        let ang = (3.0f64).atan2(1.0);
        assert!(close(y.elevation_sine(2).unwrap(), ang.sin().abs(), 1e-14));
        assert!(sx(&[&[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]]).elevation_sine(2).is_err());
    }

    #[test]
    fn curvature_examples() {
        let x = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        // Gram-determinant oracle: M_2 = 1, psin = (1, 1/sqrt2, 1/sqrt2), diam^2 = 2
        let mt_oracle = ((1.0 + 0.5 + 0.5) / 3.0 / 2.0f64).sqrt();
        assert!(close(x.curvature(&CurvatureSpec::mt(1)).unwrap(), mt_oracle, 1e-14));
        assert!(close(x.curvature(&CurvatureSpec::new(CurvatureKind::Vol, 1)).unwrap(), 1.0 / (2.0 * 2f64.sqrt()), 1e-14));
        let leger = x.curvature(&CurvatureSpec::new(CurvatureKind::Leger, 1)).unwrap();
        assert!(close(leger * leger, 0.5, 1e-14));
        assert!(close(x.leger_power(1).unwrap(), 0.5, 1e-14));
        let collinear = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        let repeated = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        for kind in CurvatureKind::ALL {
            assert_eq!(collinear.curvature(&CurvatureSpec::new(kind, 1)).unwrap(), 0.0, "{kind}");
            assert_eq!(repeated.curvature(&CurvatureSpec::new(kind, 1)).unwrap(), 0.0, "{kind}");
        }
        assert!(x.curvature(&CurvatureSpec::mt(2)).is_err());
    }

    #[test]
    fn separation_ratio_examples() {
        let x = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        assert!(close(x.separation_ratio(1).unwrap(), 1.0 / 2f64.sqrt(), 1e-15));
        let h = 3f64.sqrt() / 2.0;
        let reg = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, h]]);
        assert!(close(reg.separation_ratio(1).unwrap(), 1.0, 1e-15));
        let rep = sx(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(rep.separation_ratio(1).unwrap(), 0.0);
        let pt = sx(&[&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(pt.separation_ratio(1), Err(Error::Degenerate(_))));
        // d = 2: faces are triangles; regular tetrahedron gives M_2 / diam^2 = sqrt(3)/2
        let tet = sx(&[&[1.0, 1.0, 1.0], &[1.0, -1.0, -1.0], &[-1.0, 1.0, -1.0], &[-1.0, -1.0, 1.0]]);
        let e = 8f64.sqrt();
        assert!(close(tet.separation_ratio(2).unwrap(), (3f64.sqrt() / 2.0 * e * e) / (e * e), 1e-14));
        assert!(tet.separation_ratio(3).is_err());
    }

    #[test]
    fn curvature_kind_parsing() {
        assert_eq!("MT".parse::<CurvatureKind>().unwrap(), CurvatureKind::Mt);
        assert!("menger".parse::<CurvatureKind>().is_err());
        assert!(CurvatureSpec::mt(1).with_power(0.0).is_err());
    }
}
