//! Least-squares d-planes, Jones beta numbers and the multiscale flatness
//! functionals `J_p` and `J~_p`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Mutex;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Ball, EmpiricalMeasure};
use crate::simplex::{AffinePlane, Point};

/// Residuals below this (in units of the ball diameter) are floored in the
/// reweighting step of the `p != 2` fit.
const IRLS_RESIDUAL_FLOOR: f64 = 1e-12;
const IRLS_MAX_ITERS: usize = 50;
const IRLS_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub beta: f64,
    pub plane: AffinePlane,
    pub p: f64,
    pub ball: Ball,
    pub mass: f64,
}

/// Weighted principal d-plane: weighted centroid plus the top `d`
/// eigenvectors of the weighted covariance. Eigenvalue ties keep the lower
/// eigen-index; each direction's largest-magnitude component is positive.
pub(crate) fn principal_plane(pts: &[&[f64]], w: &[f64], d: usize) -> AffinePlane {
    let n = pts[0].len();
    let total: f64 = w.iter().sum();
    let mut c = vec![0.0; n];
    for (p, wi) in pts.iter().zip(w) {
        for (ci, x) in c.iter_mut().zip(p.iter()) {
            *ci += wi * x;
        }
    }
    for ci in &mut c {
        *ci /= total;
    }
    let mut cov = DMatrix::<f64>::zeros(n, n);
    let mut diff = vec![0.0; n];
    for (p, wi) in pts.iter().zip(w) {
        for ((df, x), ci) in diff.iter_mut().zip(p.iter()).zip(&c) {
            *df = x - ci;
        }
        for a in 0..n {
            let wa = wi * diff[a];
            for b in a..n {
                cov[(a, b)] += wa * diff[b];
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            let v = cov[(a, b)] / total;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let basis = order
        .iter()
        .take(d.min(n))
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            let s = if lead < 0.0 { -1.0 } else { 1.0 } / norm;
            v.iter_mut().for_each(|x| *x *= s);
            v
        })
        .collect();
    AffinePlane::from_parts(Point::from(c), basis)
}

fn axis_plane(center: &Point, d: usize) -> AffinePlane {
    let n = center.dim();
    let basis = (0..d.min(n))
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            e
        })
        .collect();
    AffinePlane::from_parts(center.clone(), basis)
}

fn check_d(mu: &EmpiricalMeasure, d: usize) -> Result<()> {
    if d == 0 || d > mu.ambient_dim() {
        return Err(Error::invalid(format!("plane dimension {d} must be in 1..={}", mu.ambient_dim())));
    }
    Ok(())
}

/// Sum of `w * (dist / scale)^p` over the atoms.
fn lp_objective(mu: &EmpiricalMeasure, idx: &[usize], plane: &AffinePlane, scale: f64, p: f64) -> f64 {
    idx.iter()
        .map(|&i| {
            let r = plane.residual(mu.coords(i)) / scale;
            mu.weight(i) * if p == 2.0 { r * r } else { r.powf(p) }
        })
        .sum()
}

/// Least-squares d-plane of `mu` restricted to `ball` and its `beta_2`,
/// normalized by `diam(B) = 2 * radius`. Zero for an empty ball.
pub fn lsq_plane(mu: &EmpiricalMeasure, ball: &Ball, d: usize) -> Result<(AffinePlane, f64)> {
    check_d(mu, d)?;
    if ball.center().dim() != mu.ambient_dim() {
        return Err(Error::invalid("ball center dimension does not match the measure"));
    }
    let idx = mu.ball_indices(ball);
    let mass = mu.mass_of(&idx);
    if idx.is_empty() || mass == 0.0 {
        return Ok((axis_plane(ball.center(), d), 0.0));
    }
    let pts: Vec<&[f64]> = idx.iter().map(|&i| mu.coords(i)).collect();
    let w: Vec<f64> = idx.iter().map(|&i| mu.weight(i)).collect();
    let plane = principal_plane(&pts, &w, d);
    let beta_sq = lp_objective(mu, &idx, &plane, ball.diam(), 2.0) / mass;
    Ok((plane, beta_sq.sqrt()))
}

/// `beta_p(x, t)` in dimension `d`. For `p != 2` the infimum is approached by
/// iteratively reweighted principal fits started at the `p = 2` plane; the
/// best plane seen is kept, so the value never exceeds the `p = 2` plane's
/// `L_p` error.
pub fn beta_p(mu: &EmpiricalMeasure, x: &Point, t: f64, p: f64, d: usize) -> Result<BetaResult> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("beta exponent must be at least 1, got {p}")));
    }
    let ball = Ball::new(x.clone(), t)?;
    let (plane, beta2) = lsq_plane(mu, &ball, d)?;
    let idx = mu.ball_indices(&ball);
    let mass = mu.mass_of(&idx);
    if p == 2.0 || mass == 0.0 {
        let beta = if mass == 0.0 { 0.0 } else { beta2 };
        return Ok(BetaResult { beta, plane, p, ball, mass });
    }
    let scale = ball.diam();
    let pts: Vec<&[f64]> = idx.iter().map(|&i| mu.coords(i)).collect();
    let mut best_plane = plane.clone();
    let mut best = lp_objective(mu, &idx, &plane, scale, p);
    let mut current = plane;
    let mut obj = best;
    for _ in 0..IRLS_MAX_ITERS {
        let w: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let r = (current.residual(mu.coords(i)) / scale).max(IRLS_RESIDUAL_FLOOR);
                mu.weight(i) * r.powf(p - 2.0)
            })
            .collect();
        if !w.iter().all(|v| v.is_finite()) || w.iter().sum::<f64>() <= 0.0 {
            break;
        }
        current = principal_plane(&pts, &w, d);
        let next = lp_objective(mu, &idx, &current, scale, p);
        if next < best {
            best = next;
            best_plane = current.clone();
        }
        let done = (next - obj).abs() <= IRLS_REL_TOL * obj.max(f64::MIN_POSITIVE);
        obj = next;
        if done {
            break;
        }
    }
    Ok(BetaResult { beta: (best / mass).powf(1.0 / p), plane: best_plane, p, ball, mass })
}

impl BetaResult {
    /// One CSV row: center coordinates, t, p, beta, mass.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.ball.center().dim();
        let mut header: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
        header.extend(["t", "p", "beta", "mass"].map(String::from));
        w.write_record(&header)?;
        let mut row: Vec<String> = self.ball.center().coords().iter().map(|c| c.to_string()).collect();
        row.extend([self.ball.radius(), self.p, self.beta, self.mass].map(|v| v.to_string()));
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }
}

/// Which power of `beta_p` enters the multiscale sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// `beta_p^2`.
    J,
    /// `beta_p^p`.
    JTilde,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub center_index: usize,
    pub center: Point,
    pub scale: f64,
    pub beta: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessResult {
    pub value: f64,
    pub ball: Ball,
    pub p: f64,
    pub flavor: Flavor,
    pub scale_grid: Vec<f64>,
    pub per_scale: Vec<ScaleRecord>,
}

impl FlatnessResult {
    /// Flat rows: center coordinates, t, beta, contribution.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.ball.center().dim();
        let mut header: Vec<String> = vec!["center_index".into()];
        header.extend((0..n).map(|k| format!("x{k}")));
        header.extend(["t", "beta", "contribution"].map(String::from));
        w.write_record(&header)?;
        for r in &self.per_scale {
            let mut row = vec![r.center_index.to_string()];
            row.extend(r.center.coords().iter().map(|c| c.to_string()));
            row.extend([r.scale, r.beta, r.contribution].map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dyadic level count `floor(log2(diam(B) / median spacing)) - 1`, at least 1.
pub fn default_levels(mu: &EmpiricalMeasure, ball: &Ball) -> usize {
    let h = mu.median_spacing();
    if !(h > 0.0) {
        return 1;
    }
    let k = (ball.diam() / h).log2().floor() as i64 - 1;
    k.max(1) as usize
}

/// Memo of `beta_p(atom, t)` values keyed by atom index, scale and exponent.
#[derive(Debug, Default)]
pub struct BetaCache {
    map: Mutex<HashMap<(usize, u64, u64), f64>>,
}

impl BetaCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn beta(&self, mu: &EmpiricalMeasure, i: usize, t: f64, p: f64) -> Result<f64> {
        let key = (i, t.to_bits(), p.to_bits());
        if let Some(&b) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(b);
        }
        let b = beta_p(mu, &mu.points()[i], t, p, mu.d())?.beta;
        self.map.lock().expect("cache lock").insert(key, b);
        Ok(b)
    }
}

/// Dyadic discretization of `int_B int_0^{diam B} beta_p^q(x,t) dt/t dmu(x)`:
/// scales `t_k = diam(B) / 2^k` for `k < levels`, each weighted by `ln 2`,
/// outer integral as the weighted sum over atoms in `B`.
pub fn jones_flatness(mu: &EmpiricalMeasure, ball: &Ball, p: f64, flavor: Flavor, levels: usize) -> Result<FlatnessResult> {
    jones_flatness_cached(mu, ball, p, flavor, levels, &BetaCache::new())
}

/// [`jones_flatness`] reusing and filling `cache`.
pub fn jones_flatness_cached(
    mu: &EmpiricalMeasure,
    ball: &Ball,
    p: f64,
    flavor: Flavor,
    levels: usize,
    cache: &BetaCache,
) -> Result<FlatnessResult> {
    if levels == 0 {
        return Err(Error::invalid("flatness needs at least one level"));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("beta exponent must be at least 1, got {p}")));
    }
    if ball.center().dim() != mu.ambient_dim() {
        return Err(Error::invalid("ball center dimension does not match the measure"));
    }
    let q = match flavor {
        Flavor::J => 2.0,
        Flavor::JTilde => p,
    };
    let scale_grid: Vec<f64> = (0..levels).map(|k| ball.diam() / 2f64.powi(k as i32)).collect();
    let idx = mu.ball_indices(ball);
    let rows: Vec<Vec<ScaleRecord>> = idx
        .par_iter()
        .map(|&i| {
            let x = &mu.points()[i];
            scale_grid
                .iter()
                .map(|&t| {
                    let beta = cache.beta(mu, i, t, p)?;
                    let bq = if q == 2.0 { beta * beta } else { beta.powf(q) };
                    Ok(ScaleRecord {
                        center_index: i,
                        center: x.clone(),
                        scale: t,
                        beta,
                        contribution: mu.weight(i) * std::f64::consts::LN_2 * bq,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let per_scale: Vec<ScaleRecord> = rows.into_iter().flatten().collect();
    let value = per_scale.iter().map(|r| r.contribution).sum();
    Ok(FlatnessResult { value, ball: ball.clone(), p, flavor, scale_grid, per_scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(pts: &[[f64; 2]], d: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(pts.iter().map(|p| Point::from(*p)).collect(), vec![1.0; pts.len()], d).unwrap()
    }

    fn square() -> EmpiricalMeasure {
        measure(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], 1)
    }

    /// Brute-force `L_p` objective minimum over a dense grid of lines
    /// `{y : <y, n(theta)> = c}`.
    fn grid_line_min(pts: &[[f64; 2]], p: f64, scale: f64) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..720 {
            let th = a as f64 * std::f64::consts::PI / 720.0;
            let (nx, ny) = (th.cos(), th.sin());
            for k in 0..=800 {
                let c = -1.5 + 3.0 * k as f64 / 800.0;
                let obj: f64 = pts.iter().map(|q| ((q[0] * nx + q[1] * ny - c).abs() / scale).powf(p)).sum();
                best = best.min(obj);
            }
        }
        best
    }

    #[test]
    fn collinear_points_have_zero_beta() {
        let mu = measure(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], 1);
        let (plane, beta) = lsq_plane(&mu, &Ball::new(Point::from([1.0, 1.0]), 2.0).unwrap(), 1).unwrap();
        assert!(beta < 1e-15);
        assert_eq!(plane.dim(), 1);
    }

    #[test]
    fn unit_square_beta_two_is_a_quarter() {
        let ball = Ball::new(Point::from([0.5, 0.5]), 1.0).unwrap();
        let (_, beta) = lsq_plane(&square(), &ball, 1).unwrap();
        assert!((beta - 0.25).abs() < 1e-14);
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let brute = (grid_line_min(&pts, 2.0, 2.0) / 4.0).sqrt();
        assert!((brute - 0.25).abs() < 1e-6, "{brute}");
        assert!(beta <= brute + 1e-12);
    }

    #[test]
    fn empty_ball_has_zero_beta() {
        let ball = Ball::new(Point::from([10.0, 10.0]), 1.0).unwrap();
        let (_, beta) = lsq_plane(&square(), &ball, 1).unwrap();
        assert_eq!(beta, 0.0);
        assert_eq!(beta_p(&square(), &Point::from([10.0, 10.0]), 1.0, 1.0, 1).unwrap().beta, 0.0);
    }

    #[test]
    fn beta_p_paths() {
        let mu = square();
        let x = Point::from([0.5, 0.5]);
        let b2 = beta_p(&mu, &x, 1.0, 2.0, 1).unwrap();
        let (_, lsq) = lsq_plane(&mu, &Ball::new(x.clone(), 1.0).unwrap(), 1).unwrap();
        assert!((b2.beta - lsq).abs() < 1e-12);
        let b1 = beta_p(&mu, &x, 1.0, 1.0, 1).unwrap();
        assert!(b1.beta <= 0.25 + 1e-12);
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let brute = grid_line_min(&pts, 1.0, 2.0) / 4.0;
        assert!(b1.beta >= brute - 1e-3, "{} vs {brute}", b1.beta);
        assert!(beta_p(&mu, &x, 1.0, 0.5, 1).is_err());
        let flat = measure(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], 1);
        for p in [1.0, 1.5, 3.0] {
            assert!(beta_p(&flat, &Point::from([1.5, 0.0]), 2.0, p, 1).unwrap().beta < 1e-12);
        }
    }

    #[test]
    fn flatness_of_flat_cloud_vanishes_and_flavors_agree_at_two() {
        let pts: Vec<[f64; 2]> = (0..30).map(|i| [i as f64 * 0.1, 2.0 * i as f64 * 0.1]).collect();
        let mu = measure(&pts, 1);
        let ball = Ball::new(Point::from([1.5, 3.0]), 2.0).unwrap();
        let j = jones_flatness(&mu, &ball, 2.0, Flavor::J, 4).unwrap();
        assert!(j.value < 1e-20);
        let bumpy: Vec<[f64; 2]> = (0..30).map(|i| [i as f64 * 0.1, ((i * 7) % 5) as f64 * 0.05]).collect();
        let mu = measure(&bumpy, 1);
        let ball = Ball::new(Point::from([1.5, 0.1]), 1.0).unwrap();
        let j = jones_flatness(&mu, &ball, 2.0, Flavor::J, 4).unwrap();
        let jt = jones_flatness(&mu, &ball, 2.0, Flavor::JTilde, 4).unwrap();
        assert!(j.value > 0.0);
        assert_eq!(j.value, jt.value);
        assert_eq!(j.per_scale.len(), mu.ball_indices(&ball).len() * 4);
        assert!(jones_flatness(&mu, &ball, 2.0, Flavor::J, 0).is_err());
    }

    #[test]
    fn flatness_csv_has_one_row_per_record() {
        let mu = square();
        let ball = Ball::new(Point::from([0.5, 0.5]), 1.0).unwrap();
        let j = jones_flatness(&mu, &ball, 2.0, Flavor::J, 2).unwrap();
        let mut buf = Vec::new();
        j.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + j.per_scale.len());
        assert!(text.starts_with("center_index,x0,x1,t,beta,contribution"));
    }
}
