//! Weighted finite point sets standing in for d-regular measures.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::simplex::{dist, AffinePlane, Point};

/// Closed ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    center: Point,
    radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive and finite, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `diam(B) = 2 * radius`.
    pub fn diam(&self) -> f64 {
        2.0 * self.radius
    }

    /// `gamma * B`, same center.
    pub fn scaled(&self, gamma: f64) -> Result<Ball> {
        Ball::new(self.center.clone(), self.radius * gamma)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        crate::simplex::dist_sq(y, self.center.coords()) <= self.radius * self.radius
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.center, self.radius)
    }
}

/// Outcome of a finite-probe regularity estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    /// `max(mu(B)/t^d, t^d/mu(B))` over all probes; always `>= 1`.
    pub c_mu: f64,
    /// Number of (center, scale) pairs evaluated.
    pub probes: usize,
    pub scale_range: (f64, f64),
    /// Probe attaining `c_mu`: (atom index, scale).
    pub worst: (usize, f64),
}

/// A weighted atom set with a spatial index.
#[derive(Clone)]
pub struct EmpiricalMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
    d: usize,
    dim: usize,
    index: KdTree,
    diameter: OnceLock<f64>,
}

impl fmt::Debug for EmpiricalMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmpiricalMeasure")
            .field("atoms", &self.points.len())
            .field("ambient_dim", &self.dim)
            .field("d", &self.d)
            .field("total_mass", &self.total_mass())
            .finish()
    }
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>, d: usize) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::invalid("measure has no atoms"));
        };
        let dim = first.dim();
        if d == 0 || d > dim {
            return Err(Error::invalid(format!("intrinsic dimension {d} must be in 1..={dim}")));
        }
        if weights.len() != points.len() {
            return Err(Error::invalid(format!("{} weights for {} points", weights.len(), points.len())));
        }
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::invalid(format!("point {i} has dimension {}, expected {dim}", p.dim())));
            }
            if p.coords().iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
            }
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("weight {i} must be positive, got {}", weights[i])));
        }
        let flat: Vec<f64> = points.iter().flat_map(|p| p.coords().iter().copied()).collect();
        let index = KdTree::build(flat, dim);
        Ok(Self { points, weights, d, dim, index, diameter: OnceLock::new() })
    }

    /// Equal weights `diam^d / count`, so the total mass is `diam^d`.
    pub fn with_default_weights(points: Vec<Point>, d: usize) -> Result<Self> {
        let n = points.len();
        let mut mu = Self::new(points, vec![1.0; n], d)?;
        let diam = mu.diameter();
        let w = if diam > 0.0 { diam.powi(d as i32) / n as f64 } else { 1.0 / n as f64 };
        mu.weights = vec![w; n];
        Ok(mu)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn coords(&self, i: usize) -> &[f64] {
        self.points[i].coords()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Diameter of the atom set (exact, computed once).
    pub fn diameter(&self) -> f64 {
        *self.diameter.get_or_init(|| {
            let mut best: f64 = 0.0;
            for i in 0..self.len() {
                for j in (i + 1)..self.len() {
                    best = best.max(dist(self.coords(i), self.coords(j)));
                }
            }
            best
        })
    }

    fn check_dim(&self, p: &Point, what: &str) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::invalid(format!("{what} has dimension {}, measure has {}", p.dim(), self.dim)));
        }
        Ok(())
    }

    /// Atoms in the closed ball, ascending index order.
    pub fn ball_indices(&self, ball: &Ball) -> Vec<usize> {
        self.index.within(ball.center().coords(), ball.radius())
    }

    pub(crate) fn indices_within(&self, center: &[f64], radius: f64) -> Vec<usize> {
        self.index.within(center, radius)
    }

    /// Atoms in the ball sorted by distance to the center, ties by index.
    pub fn ball_indices_by_distance(&self, ball: &Ball) -> Vec<usize> {
        let c = ball.center().coords();
        let mut idx = self.ball_indices(ball);
        idx.sort_by(|&a, &b| dist(self.coords(a), c).total_cmp(&dist(self.coords(b), c)).then(a.cmp(&b)));
        idx
    }

    /// Nearest atom to `x`, ties to the lower index.
    pub fn nearest(&self, x: &Point) -> Result<usize> {
        self.check_dim(x, "query point")?;
        Ok(self.index.nearest(x.coords(), None).expect("measure is non-empty").0)
    }

    pub(crate) fn mass_of(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.weights[i]).sum()
    }

    pub(crate) fn mass_within(&self, center: &[f64], radius: f64) -> f64 {
        self.mass_of(&self.index.within(center, radius))
    }

    /// `mu(B)` for the closed ball.
    pub fn mass_in_ball(&self, ball: &Ball) -> Result<f64> {
        self.check_dim(ball.center(), "ball center")?;
        Ok(self.mass_within(ball.center().coords(), ball.radius()))
    }

    /// Mass of `{y : r1 < |x - y| <= r2}`, as `mu(B(x,r2)) - mu(B(x,r1))`.
    pub fn annulus_mass(&self, x: &Point, r1: f64, r2: f64) -> Result<f64> {
        self.check_dim(x, "annulus center")?;
        if !(r1 >= 0.0) || !(r1 < r2) || !r2.is_finite() {
            return Err(Error::invalid(format!("annulus radii must satisfy 0 <= r1 < r2, got ({r1}, {r2})")));
        }
        let outer = self.mass_within(x.coords(), r2);
        let inner = self.mass_within(x.coords(), r1);
        Ok(outer - inner)
    }

    /// Mass of atoms in `ball` within distance `eta` of `plane`.
    pub fn tube_mass(&self, plane: &AffinePlane, eta: f64, ball: &Ball) -> Result<f64> {
        self.check_dim(ball.center(), "ball center")?;
        if plane.ambient_dim() != self.dim {
            return Err(Error::invalid("plane dimension does not match the measure"));
        }
        if !(eta >= 0.0) {
            return Err(Error::invalid(format!("tube height must be non-negative, got {eta}")));
        }
        Ok(self
            .ball_indices(ball)
            .into_iter()
            .filter(|&i| plane.residual(self.coords(i)) <= eta)
            .map(|i| self.weights[i])
            .sum())
    }

    /// Points multiplied by `s`, weights by `s^d`.
    pub fn rescale(&self, s: f64) -> Result<EmpiricalMeasure> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::invalid(format!("scale factor must be positive, got {s}")));
        }
        let sd = s.powi(self.d as i32);
        let points = self.points.iter().map(|p| p.scaled(s)).collect();
        let weights = self.weights.iter().map(|w| w * sd).collect();
        EmpiricalMeasure::new(points, weights, self.d)
    }

    /// Nearest-neighbour distance of every atom.
    pub fn nn_distances(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.index.nearest(self.coords(i), Some(i)).map_or(0.0, |(_, d)| d))
            .collect()
    }

    /// Smallest positive nearest-neighbour distance, if any.
    pub fn min_spacing(&self) -> Option<f64> {
        self.nn_distances().into_iter().filter(|&d| d > 0.0).min_by(f64::total_cmp)
    }

    /// Median nearest-neighbour distance (0 for a single atom).
    pub fn median_spacing(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let mut nn = self.nn_distances();
        nn.sort_by(f64::total_cmp);
        nn[nn.len() / 2]
    }

    /// Greedy farthest-point sample of `k` atoms starting from `start`;
    /// ties go to the lower index.
    pub fn farthest_point_sample(&self, k: usize, start: usize) -> Vec<usize> {
        let n = self.len();
        let k = k.min(n);
        if k == 0 {
            return Vec::new();
        }
        let mut chosen = vec![start];
        let mut gap: Vec<f64> = (0..n).map(|i| dist(self.coords(i), self.coords(start))).collect();
        while chosen.len() < k {
            let (next, _) = gap
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bi, bd), (i, &g)| if g > bd { (i, g) } else { (bi, bd) });
            chosen.push(next);
            for (i, g) in gap.iter_mut().enumerate() {
                *g = g.min(dist(self.coords(i), self.coords(next)));
            }
        }
        chosen
    }

    /// `count` dyadic scales `diam / 2^k`, `k = 0..count`.
    pub fn dyadic_scales(&self, count: usize) -> Vec<f64> {
        let diam = self.diameter();
        (0..count).map(|k| diam / 2f64.powi(k as i32)).collect()
    }

    /// Geometric grid of `count` scales between `4 * median spacing` and `diam / 4`.
    pub fn mid_scales(&self, count: usize) -> Vec<f64> {
        let lo = 4.0 * self.median_spacing();
        let hi = self.diameter() / 4.0;
        if count <= 1 || !(hi > lo) {
            return vec![hi.max(lo)];
        }
        let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
        (0..count).map(|k| lo * ratio.powi(k as i32)).collect()
    }

    /// Regularity constant estimated over the given probe centers and scales.
    ///
    /// Scales are clamped to `(min spacing, diameter]` whenever those bounds
    /// exist; a single atom keeps the requested scales.
    pub fn estimate_regularity(&self, probe_centers: &[usize], scales: &[f64]) -> Result<RegularityEstimate> {
        if probe_centers.is_empty() {
            return Err(Error::invalid("regularity estimate needs at least one probe center"));
        }
        if let Some(&i) = probe_centers.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!("probe center {i} is not an atom index")));
        }
        let lo = self.min_spacing().unwrap_or(0.0);
        let diam = self.diameter();
        let kept: Vec<f64> = scales
            .iter()
            .copied()
            .filter(|&t| t > 0.0 && t.is_finite() && t > lo && (diam == 0.0 || t <= diam))
            .collect();
        if kept.is_empty() {
            return Err(Error::invalid("no probe scale lies in (min spacing, diameter]"));
        }
        let dd = self.d as i32;
        let mut c_mu: f64 = 1.0;
        let mut worst = (probe_centers[0], kept[0]);
        for &c in probe_centers {
            for &t in &kept {
                let m = self.mass_within(self.coords(c), t);
                let td = t.powi(dd);
                let r = (m / td).max(td / m);
                if r > c_mu {
                    c_mu = r;
                    worst = (c, t);
                }
            }
        }
        let (tmin, tmax) = kept.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
        Ok(RegularityEstimate { c_mu, probes: probe_centers.len() * kept.len(), scale_range: (tmin, tmax), worst })
    }

    /// Regularity with 64 farthest-point centers and 8 dyadic scales.
    pub fn estimate_regularity_default(&self) -> Result<RegularityEstimate> {
        let probes = self.farthest_point_sample(64, 0);
        self.estimate_regularity(&probes, &self.dyadic_scales(8))
    }

    /// Smallest ball centered at the atom centroid containing every atom.
    pub fn enclosing_ball(&self) -> Ball {
        let total = self.total_mass();
        let mut c = vec![0.0; self.dim];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (ci, x) in c.iter_mut().zip(p.coords()) {
                *ci += w * x / total;
            }
        }
        let r = self.points.iter().map(|p| dist(p.coords(), &c)).fold(0.0, f64::max);
        // a single location still needs a positive radius
        let r = if r > 0.0 { r * (1.0 + 1e-12) } else { 1.0 };
        Ball { center: Point::from(c), radius: r }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_measure(xs: &[f64], w: f64) -> EmpiricalMeasure {
        let pts = xs.iter().map(|&x| Point::from([x, 0.0])).collect();
        EmpiricalMeasure::new(pts, vec![w; xs.len()], 1).unwrap()
    }

    fn ball(c: [f64; 2], r: f64) -> Ball {
        Ball::new(Point::from(c), r).unwrap()
    }

    #[test]
    fn mass_in_ball_examples() {
        let mu = line_measure(&[0.0, 2.0], 1.0);
        assert_eq!(mu.mass_in_ball(&ball([0.0, 0.0], 1.0)).unwrap(), 1.0);
        assert_eq!(mu.mass_in_ball(&ball([1.0, 0.0], 5.0)).unwrap(), 2.0);
        // closed ball: boundary atom counts
        assert_eq!(mu.mass_in_ball(&ball([0.0, 0.0], 2.0)).unwrap(), 2.0);
        let bad = Ball::new(Point::from([0.0]), 1.0).unwrap();
        assert!(mu.mass_in_ball(&bad).is_err());
    }

    #[test]
    fn annulus_examples() {
        let mu = line_measure(&[0.0, 1.0, 2.0], 1.0);
        let x = Point::from([0.0, 0.0]);
        assert_eq!(mu.annulus_mass(&x, 1.0, 1.5).unwrap(), 0.0);
        assert_eq!(mu.annulus_mass(&x, 0.5, 2.0).unwrap(), 2.0);
        assert_eq!(mu.annulus_mass(&x, 2.5, 3.0).unwrap(), 0.0);
        assert!(mu.annulus_mass(&x, 1.0, 1.0).is_err());
    }

    #[test]
    fn tube_examples() {
        let pts = vec![Point::from([0.0, 0.0]), Point::from([1.0, 0.5]), Point::from([-1.0, -0.2])];
        let mu = EmpiricalMeasure::new(pts, vec![1.0; 3], 1).unwrap();
        let b = ball([0.0, 0.0], 2.0);
        let xaxis = AffinePlane::new(Point::origin(2), vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(mu.tube_mass(&xaxis, 2.0, &b).unwrap(), mu.mass_in_ball(&b).unwrap());
        let off = AffinePlane::new(Point::from([0.0, 5.0]), vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(mu.tube_mass(&off, 0.0, &b).unwrap(), 0.0);
        assert_eq!(mu.tube_mass(&xaxis, 0.3, &b).unwrap(), 2.0);
        let flat = line_measure(&[0.0, 0.3, 0.9], 1.0);
        assert_eq!(flat.tube_mass(&xaxis, 0.0, &b).unwrap(), 3.0);
    }

    #[test]
    fn rescale_round_trip() {
        let mu = line_measure(&[0.0, 1.0, 3.0], 0.5);
        assert_eq!(mu.rescale(1.0).unwrap().points(), mu.points());
        let twice = mu.rescale(2.0).unwrap();
        assert_eq!(twice.diameter(), 2.0 * mu.diameter());
        assert_eq!(twice.total_mass(), 2.0 * mu.total_mass());
        let back = twice.rescale(0.5).unwrap();
        assert_eq!(back.points(), mu.points());
        assert_eq!(back.weights(), mu.weights());
        assert!(mu.rescale(0.0).is_err());
    }

    #[test]
    fn regularity_of_lattice_matches_brute_force() {
        let n = 101;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let mu = line_measure(&xs, 1.0 / (n - 1) as f64);
        let probes: Vec<usize> = (0..n).step_by(5).collect();
        let scales = [0.05, 0.1, 0.2];
        let est = mu.estimate_regularity(&probes, &scales).unwrap();
        // brute force over the same probes without the index
        let mut brute: f64 = 1.0;
        for &c in &probes {
            for &t in &scales {
                let m: f64 = xs.iter().filter(|&&x| (x - xs[c]).abs() <= t).count() as f64 / (n - 1) as f64;
                brute = brute.max((m / t).max(t / m));
            }
        }
        assert!((est.c_mu - brute).abs() < 1e-12);
        // interior balls hold about 2t of mass; endpoint balls about t
        assert!(est.c_mu > 1.9 && est.c_mu < 2.3, "{}", est.c_mu);
        let s = 2.0;
        let scaled = mu.rescale(s).unwrap();
        let scaled_scales: Vec<f64> = scales.iter().map(|t| t * s).collect();
        assert_eq!(scaled.estimate_regularity(&probes, &scaled_scales).unwrap().c_mu, est.c_mu);
    }

    #[test]
    fn regularity_of_single_atom_is_large_but_finite() {
        let mu = line_measure(&[0.0], 1.0);
        let est = mu.estimate_regularity(&[0], &[1.0, 1e-3, 1e-6]).unwrap();
        assert!(est.c_mu.is_finite() && est.c_mu >= 1e6);
        assert!(mu.estimate_regularity(&[], &[1.0]).is_err());
    }

    #[test]
    fn default_weights_total_diameter_power() {
        let pts: Vec<Point> = (0..5).map(|i| Point::from([i as f64, 0.0])).collect();
        let mu = EmpiricalMeasure::with_default_weights(pts, 1).unwrap();
        assert!((mu.total_mass() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mass_is_monotone_and_annulus_is_exact_difference() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 7.0).collect();
        let mu = line_measure(&xs, 0.3);
        let x = Point::from([1.0, 0.0]);
        let mut prev = 0.0;
        for k in 1..40 {
            let r = k as f64 * 0.2;
            let m = mu.mass_in_ball(&Ball::new(x.clone(), r).unwrap()).unwrap();
            assert!(m >= prev);
            let a = mu.annulus_mass(&x, r / 2.0, r).unwrap();
            let inner = mu.mass_in_ball(&Ball::new(x.clone(), r / 2.0).unwrap()).unwrap();
            assert_eq!(a, m - inner);
            prev = m;
        }
    }
}
