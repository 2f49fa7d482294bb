//! Greedy construction of `d + 2` separated balls inside `B(x, t)` and the
//! intersection bound for probability measures.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::measure::{Ball, EmpiricalMeasure};
use crate::rng::CounterRng;
use crate::simplex::{dist, dist_to_span, raw_content, Point};

pub const DEFAULT_SAMPLE_BUDGET: u64 = 10_000;
/// Halvings of the starting radius before giving up.
pub const MAX_HALVINGS: u32 = 6;
/// A stage fails when its best distance is at most this times `t`.
const STAGE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub radius: f64,
    pub samples: u64,
    /// Sampled minimum of `min_i M_d(X(i)) / t^d` over one-vertex-per-ball tuples.
    pub omega_empirical: f64,
    /// Same quantity at the ball centers.
    pub omega_center: f64,
    /// Sampled tuples whose face contents fell below `threshold * t^d`.
    pub violations: u64,
    pub threshold: f64,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.omega_empirical > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatedBalls {
    pub centers: Vec<Point>,
    pub center_indices: Vec<usize>,
    pub radius: f64,
    pub omega_empirical: f64,
    pub parent: Ball,
    /// Distance attained at each greedy stage `1..=d+1`.
    pub stage_distances: Vec<f64>,
    pub halvings: u32,
    pub verification: Verification,
}

impl SeparatedBalls {
    pub fn d(&self) -> usize {
        self.centers.len() - 2
    }

    /// `B(c_i, radius)`.
    pub fn balls(&self) -> Vec<Ball> {
        self.centers.iter().map(|c| Ball::new(c.clone(), self.radius).expect("radius is positive")).collect()
    }

    /// `lambda_0 = radius / (2 t)`.
    pub fn lambda0(&self) -> f64 {
        self.radius / (2.0 * self.parent.radius())
    }
}

/// `min_i M_d(X(i))` over the `d + 2` faces of the tuple `v`.
pub(crate) fn min_face_content(v: &[&[f64]]) -> f64 {
    let k = v.len();
    (0..k)
        .map(|i| {
            let face: SmallVec<[&[f64]; 8]> = (0..k).filter(|&j| j != i).map(|j| v[j]).collect();
            raw_content(&face)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Uniform point of the closed ball `B(c, r)`.
pub(crate) fn uniform_in_ball(rng: &mut CounterRng, c: &[f64], r: f64) -> Vec<f64> {
    let n = c.len();
    let mut g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rad = r * rng.uniform().powf(1.0 / n as f64);
    let s = if norm > 0.0 { rad / norm } else { 0.0 };
    for (gi, ci) in g.iter_mut().zip(c) {
        *gi = ci + *gi * s;
    }
    g
}

/// Sample `samples` tuples with vertex `i` uniform in `B(centers[i], radius)`
/// and record the smallest normalized face content.
pub fn verify_separated(centers: &[Point], radius: f64, t: f64, samples: u64, seed: u64) -> Result<Verification> {
    if centers.len() < 3 {
        return Err(Error::invalid("separation needs at least three centers"));
    }
    if !(radius > 0.0) || !(t > 0.0) {
        return Err(Error::invalid("radius and t must be positive"));
    }
    let d = centers.len() - 2;
    let td = t.powi(d as i32);
    let cv: Vec<&[f64]> = centers.iter().map(Point::coords).collect();
    let omega_center = min_face_content(&cv) / td;
    let threshold = 0.5 * omega_center;
    let mins: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = CounterRng::keyed(seed, &[s]);
            let pts: Vec<Vec<f64>> = cv.iter().map(|c| uniform_in_ball(&mut rng, c, radius)).collect();
            let v: SmallVec<[&[f64]; 8]> = pts.iter().map(Vec::as_slice).collect();
            min_face_content(&v) / td
        })
        .collect();
    let omega_empirical = mins.iter().copied().fold(omega_center, f64::min);
    let violations = mins.iter().filter(|&&m| !(m >= threshold) || m <= 0.0).count() as u64;
    Ok(Verification { radius, samples, omega_empirical, omega_center, violations, threshold })
}

fn fail(stage: usize, reason: impl Into<String>) -> Error {
    Error::SeparationFailure { stage, reason: reason.into() }
}

/// Argmax of `score` over `cands`, ties to the earlier candidate.
fn argmax(cands: &[usize], score: impl Fn(usize) -> f64) -> (usize, f64) {
    let mut best = (cands[0], f64::NEG_INFINITY);
    for &c in cands {
        let s = score(c);
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

/// Greedy separated balls in `B(x, t)`.
///
/// Vertices are picked among atoms of `B(x, t/2)`: `x_0` nearest to `x`,
/// `x_{n+1}` farthest from `L[x_0..x_n]` for `n < d`, and `x_{d+1}` maximizing
/// `min_i dist(., L[X_d(i)])`. The radius starts at the smaller of a quarter
/// of the least attained distance and the room left inside `B(x, t)`, and is
/// halved until sampled verification passes.
pub fn find_separated_balls(
    mu: &EmpiricalMeasure,
    x: &Point,
    t: f64,
    sample_budget: u64,
    seed: u64,
) -> Result<SeparatedBalls> {
    let parent = Ball::new(x.clone(), t)?;
    if x.dim() != mu.ambient_dim() {
        return Err(Error::invalid("center dimension does not match the measure"));
    }
    if sample_budget == 0 {
        return Err(Error::invalid("verification needs at least one sample"));
    }
    let d = mu.d();
    let cands = mu.indices_within(x.coords(), t / 2.0);
    if cands.len() < d + 2 {
        return Err(fail(0, format!("{} atoms within t/2 of the center, need at least {}", cands.len(), d + 2)));
    }
    let x0 = mu.nearest(x)?;
    let mut chosen = vec![x0];
    let mut stage_distances = Vec::with_capacity(d + 1);
    for n in 0..d {
        let span: Vec<&[f64]> = chosen.iter().map(|&i| mu.coords(i)).collect();
        let (best, h) = argmax(&cands, |c| dist_to_span(mu.coords(c), &span));
        if !(h > STAGE_TOL * t) {
            return Err(fail(n + 1, format!("every candidate lies within {h:.3e} of the {n}-plane through the chosen vertices")));
        }
        chosen.push(best);
        stage_distances.push(h);
    }
    let faces: Vec<Vec<&[f64]>> = (0..=d)
        .map(|i| chosen.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &c)| mu.coords(c)).collect())
        .collect();
    let (last, h) = argmax(&cands, |c| {
        faces.iter().map(|f| dist_to_span(mu.coords(c), f)).fold(f64::INFINITY, f64::min)
    });
    if !(h > STAGE_TOL * t) {
        return Err(fail(d + 1, format!("no candidate stays {h:.3e} away from every face plane")));
    }
    chosen.push(last);
    stage_distances.push(h);

    let centers: Vec<Point> = chosen.iter().map(|&i| mu.points()[i].clone()).collect();
    let min_h = stage_distances.iter().copied().fold(f64::INFINITY, f64::min);
    let room = t - centers.iter().map(|c| dist(c.coords(), x.coords())).fold(0.0, f64::max);
    let mut radius = (0.25 * min_h).min(room);
    for halvings in 0..=MAX_HALVINGS {
        let verification = verify_separated(&centers, radius, t, sample_budget, seed)?;
        if verification.passed() {
            return Ok(SeparatedBalls {
                centers,
                center_indices: chosen,
                radius,
                omega_empirical: verification.omega_empirical,
                parent,
                stage_distances,
                halvings,
                verification,
            });
        }
        radius *= 0.5;
    }
    Err(fail(d + 1, format!("verification still failing after {MAX_HALVINGS} halvings")))
}

/// `(k+1) xi - k`: a lower bound for `nu(A_0 n ... n A_k)` when each
/// `nu(A_i) >= xi` under a probability measure `nu`.
pub fn intersection_lower_bound(xi: f64, k: usize) -> Result<f64> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::invalid(format!("xi must lie in (0, 1), got {xi}")));
    }
    Ok((k as f64 + 1.0) * xi - k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[Vec<f64>], d: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(pts.iter().cloned().map(Point::from).collect(), vec![1.0; pts.len()], d).unwrap()
    }

    #[test]
    fn regular_triangle_plus_centroid_offset() {
        let s3 = 3f64.sqrt() / 2.0;
        let pts = vec![vec![0.05, 0.02], vec![1.0, 0.0], vec![-0.5, s3], vec![-0.5, -s3]];
        let mu = cloud(&pts, 2);
        let sep = find_separated_balls(&mu, &Point::from([0.0, 0.0]), 2.5, 2000, 1).unwrap();
        assert_eq!(sep.center_indices[0], 0);
        let mut rest = sep.center_indices[1..].to_vec();
        rest.sort();
        assert_eq!(rest, vec![1, 2, 3]);
        assert!(sep.omega_empirical > 0.0);
        assert_eq!(sep.verification.violations, 0);
        let v: Vec<&[f64]> = sep.centers.iter().map(Point::coords).collect();
        assert!((min_face_content(&v) / 6.25 - sep.verification.omega_center).abs() < 1e-15);
        let balls = sep.balls();
        for (i, a) in balls.iter().enumerate() {
            assert!(dist(a.center().coords(), &[0.0, 0.0]) + a.radius() <= 2.5);
            for b in &balls[i + 1..] {
                assert!(dist(a.center().coords(), b.center().coords()) > a.radius() + b.radius());
            }
        }
    }

    #[test]
    fn flat_input_fails_at_stage_d() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.1, i as f64 * 0.05, 0.0]).collect();
        let mu = cloud(&pts, 2);
        let err = find_separated_balls(&mu, &Point::from([0.45, 0.225, 0.0]), 2.0, 100, 0).unwrap_err();
        assert!(matches!(err, Error::SeparationFailure { stage: 2, .. }), "{err}");
    }

    #[test]
    fn two_locations_fail_at_final_stage() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.5, 0.0], vec![0.5, 0.0]];
        let mu = cloud(&pts, 1);
        let err = find_separated_balls(&mu, &Point::from([0.2, 0.0]), 2.0, 100, 0).unwrap_err();
        assert!(matches!(err, Error::SeparationFailure { stage: 2, .. }), "{err}");
        let few = cloud(&[vec![0.0, 0.0], vec![1.0, 0.0]], 1);
        let err = find_separated_balls(&few, &Point::from([0.0, 0.0]), 4.0, 100, 0).unwrap_err();
        assert!(matches!(err, Error::SeparationFailure { stage: 0, .. }));
    }

    #[test]
    fn intersection_bound_values() {
        assert!((intersection_lower_bound(0.9, 2).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(intersection_lower_bound(0.3, 0).unwrap(), 0.3);
        for d in 1..5 {
            let xi = (d as f64 + 0.5) / (d as f64 + 1.0);
            assert!((intersection_lower_bound(xi, d).unwrap() - 0.5).abs() < 1e-12);
        }
        assert!(intersection_lower_bound(1.0, 1).is_err());
    }

    #[test]
    fn uniform_in_ball_stays_inside() {
        let mut rng = CounterRng::new(5, 0);
        for _ in 0..1000 {
            let p = uniform_in_ball(&mut rng, &[1.0, 2.0, 3.0], 0.5);
            assert!(dist(&p, &[1.0, 2.0, 3.0]) <= 0.5 + 1e-15);
        }
    }
}
