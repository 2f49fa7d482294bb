//! Curvature-guided choice of an approximating d-plane from separated balls.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::integrals::{mc_mean, Mode};
use crate::measure::{Ball, EmpiricalMeasure};
use crate::plane_fit::lsq_plane;
use crate::rng::{CounterRng, WeightedSampler};
use crate::separation::{find_separated_balls, SeparatedBalls, DEFAULT_SAMPLE_BUDGET};
use crate::simplex::{psin0_power_from_shape, AffinePlane, Point, Shape, REL_RANK_TOL};

/// Both sides at most this are treated as zero in the error ratio.
const ZERO_RATIO_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub index: usize,
    /// `X~(d+1)`: one vertex per half-radius ball `B(c_i, r/2)`, `i = 0..d`.
    pub candidate: Vec<Point>,
    pub atom_indices: Vec<usize>,
    pub e_score: f64,
    pub e_std_error: f64,
    /// `max_i` of the two-variable functional.
    pub a_score: f64,
    pub a_std_error: f64,
    pub a_argmax: usize,
    /// `e_score * t^{d(d+1)} / mu(B)`.
    pub e_normalized: f64,
    /// `a_score * t^{d^2} / mu(B)`.
    pub a_normalized: f64,
    pub plane: AffinePlane,
}

impl CandidateScore {
    pub fn objective(&self) -> f64 {
        self.e_normalized.max(self.a_normalized)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneSelection {
    pub plane: AffinePlane,
    pub selected: usize,
    /// `int_B (dist(y, L) / 2t)^2 dmu / mu(B)`.
    pub error_sq: f64,
    pub beta2_ref: f64,
    /// `sqrt(error_sq) / beta2_ref`; 1 when both vanish.
    pub ratio: f64,
    pub candidates_tried: usize,
    pub invalid_candidates: usize,
    pub lambda0: f64,
    pub separation: SeparatedBalls,
    /// Smallest `dist(y, L) / t` over atoms `y` of `B(c_{d+1}, r/2)`.
    pub last_ball_min_dist: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<CandidateScore>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    /// Defaults to `radius / (2t)` of the separated balls.
    pub lambda0: Option<f64>,
    pub n_candidates: usize,
    pub mode: Mode,
    pub separation_samples: u64,
    pub seed: u64,
    pub keep_scores: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            lambda0: None,
            n_candidates: 64,
            mode: Mode::monte_carlo(20_000, 0),
            separation_samples: DEFAULT_SAMPLE_BUDGET,
            seed: 0,
            keep_scores: false,
        }
    }
}

fn sub_seed(seed: u64, path: &[u64]) -> u64 {
    CounterRng::keyed(seed, path).next_u64()
}

/// Score `cand` (`d + 1` points) against atoms of `B(x, t)`. The admissible
/// completions are those whose every edge is at least `lambda0 * t`.
pub fn score_candidate(
    mu: &EmpiricalMeasure,
    x: &Point,
    t: f64,
    lambda0: f64,
    cand: &[Point],
    mode: Mode,
) -> Result<CandidateScore> {
    let d = mu.d();
    if cand.len() != d + 1 {
        return Err(Error::InvalidCandidate(format!("expected {} vertices, got {}", d + 1, cand.len())));
    }
    if cand.iter().any(|p| p.dim() != mu.ambient_dim()) || x.dim() != mu.ambient_dim() {
        return Err(Error::invalid("candidate dimension does not match the measure"));
    }
    if !(lambda0 > 0.0 && lambda0 < 2.0) {
        return Err(Error::invalid(format!("lambda0 must lie in (0, 2), got {lambda0}")));
    }
    let cv: Vec<&[f64]> = cand.iter().map(Point::coords).collect();
    let shape = Shape::of(&cv);
    if shape.min_edge == 0.0 || shape.content == 0.0 {
        return Err(Error::InvalidCandidate("candidate vertices span fewer than d dimensions".into()));
    }
    let plane = AffinePlane::through(&cv, REL_RANK_TOL);
    let ball = Ball::new(x.clone(), t)?;
    let idx = mu.ball_indices(&ball);
    let mass = mu.mass_of(&idx);
    let atoms: Vec<&[f64]> = idx.iter().map(|&i| mu.coords(i)).collect();
    let w: Vec<f64> = idx.iter().map(|&i| mu.weight(i)).collect();
    let min_edge = lambda0 * t;

    let kernel = |v: &[&[f64]]| -> Option<f64> {
        let s = Shape::of(v);
        (s.min_edge >= min_edge).then(|| psin0_power_from_shape(&s, d, 2.0))
    };
    let e_tuple = |y: &[f64]| -> Option<f64> {
        let mut v: SmallVec<[&[f64]; 8]> = cv.iter().copied().collect();
        v.push(y);
        kernel(&v)
    };
    let a_tuple = |i: usize, y: &[f64], z: &[f64]| -> Option<f64> {
        let mut v: SmallVec<[&[f64]; 8]> = cv.iter().copied().collect();
        v[i] = y;
        v.push(z);
        kernel(&v)
    };

    let (e, e_se, a_parts) = match mode {
        Mode::Exact { budget } => {
            let m = atoms.len() as u128;
            let tuples = m + (d as u128 + 1) * m * m;
            if tuples > budget as u128 {
                return Err(Error::BudgetExceeded { tuples, budget });
            }
            let e: f64 = atoms.iter().zip(&w).map(|(y, wy)| e_tuple(y).unwrap_or(0.0) * wy).sum();
            let a: Vec<(f64, f64)> = (0..=d)
                .map(|i| {
                    let mut s = 0.0;
                    for (y, wy) in atoms.iter().zip(&w) {
                        for (z, wz) in atoms.iter().zip(&w) {
                            s += a_tuple(i, y, z).unwrap_or(0.0) * wy * wz;
                        }
                    }
                    (s, 0.0)
                })
                .collect();
            (e, 0.0, a)
        }
        Mode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::invalid("Monte Carlo needs at least one sample"));
            }
            match WeightedSampler::new(&w) {
                None => (0.0, 0.0, vec![(0.0, 0.0); d + 1]),
                Some(sampler) => {
                    let (em, ese, _) =
                        mc_mean(samples, sub_seed(seed, &[0]), |rng| e_tuple(atoms[sampler.sample(rng)]));
                    let a = (0..=d)
                        .map(|i| {
                            let (am, ase, _) = mc_mean(samples, sub_seed(seed, &[1 + i as u64]), |rng| {
                                let y = atoms[sampler.sample(rng)];
                                let z = atoms[sampler.sample(rng)];
                                a_tuple(i, y, z)
                            });
                            (am * mass * mass, ase * mass * mass)
                        })
                        .collect();
                    (em * mass, ese * mass, a)
                }
            }
        }
    };
    let (a_argmax, &(a, a_se)) = a_parts
        .iter()
        .enumerate()
        .fold((0, &a_parts[0]), |best, (i, p)| if p.0 > best.1 .0 { (i, p) } else { best });
    let (e_normalized, a_normalized) = if mass > 0.0 {
        (e * t.powi((d * (d + 1)) as i32) / mass, a * t.powi((d * d) as i32) / mass)
    } else {
        (0.0, 0.0)
    };
    Ok(CandidateScore {
        index: 0,
        candidate: cand.to_vec(),
        atom_indices: Vec::new(),
        e_score: e,
        e_std_error: e_se,
        a_score: a,
        a_std_error: a_se,
        a_argmax,
        e_normalized,
        a_normalized,
        plane,
    })
}

/// Atoms drawn for candidate `j`: one per half-radius ball around `c_0..c_d`,
/// proportionally to weight.
pub fn draw_candidate(mu: &EmpiricalMeasure, sep: &SeparatedBalls, j: usize, seed: u64) -> Vec<usize> {
    let mut rng = CounterRng::keyed(seed, &[2, j as u64]);
    sep.centers[..sep.centers.len() - 1]
        .iter()
        .map(|c| {
            let inside = mu.indices_within(c.coords(), 0.5 * sep.radius);
            let w: Vec<f64> = inside.iter().map(|&i| mu.weight(i)).collect();
            let sampler = WeightedSampler::new(&w).expect("a ball center is an atom");
            inside[sampler.sample(&mut rng)]
        })
        .collect()
}

/// Mean squared normalized distance `int_B (dist(y, L) / 2t)^2 dmu / mu(B)`.
pub fn plane_error_sq(mu: &EmpiricalMeasure, ball: &Ball, plane: &AffinePlane) -> f64 {
    let idx = mu.ball_indices(ball);
    let mass = mu.mass_of(&idx);
    if mass == 0.0 {
        return 0.0;
    }
    idx.iter()
        .map(|&i| {
            let r = plane.residual(mu.coords(i)) / ball.diam();
            mu.weight(i) * r * r
        })
        .sum::<f64>()
        / mass
}

/// Separate, draw `n_candidates` candidate simplices, keep the one with the
/// smallest `max(e_normalized, a_normalized)` and certify its plane against
/// the least-squares optimum.
pub fn select_plane(mu: &EmpiricalMeasure, x: &Point, t: f64, cfg: &SelectConfig) -> Result<PlaneSelection> {
    if cfg.n_candidates == 0 {
        return Err(Error::invalid("need at least one candidate"));
    }
    let sep = find_separated_balls(mu, x, t, cfg.separation_samples, cfg.seed)?;
    let lambda0 = cfg.lambda0.unwrap_or_else(|| sep.lambda0());
    let mut scores = Vec::with_capacity(cfg.n_candidates);
    let mut invalid = 0;
    for j in 0..cfg.n_candidates {
        let atoms = draw_candidate(mu, &sep, j, cfg.seed);
        let cand: Vec<Point> = atoms.iter().map(|&i| mu.points()[i].clone()).collect();
        let mode = match cfg.mode {
            Mode::MonteCarlo { samples, seed } => Mode::MonteCarlo { samples, seed: sub_seed(seed, &[3, j as u64]) },
            exact => exact,
        };
        match score_candidate(mu, x, t, lambda0, &cand, mode) {
            Ok(mut s) => {
                s.index = j;
                s.atom_indices = atoms;
                scores.push(s);
            }
            Err(Error::InvalidCandidate(_)) => invalid += 1,
            Err(e) => return Err(e),
        }
    }
    let best = scores
        .iter()
        .min_by(|a, b| a.objective().total_cmp(&b.objective()).then(a.index.cmp(&b.index)))
        .ok_or_else(|| Error::SelectionFailure(format!("all {} candidates were degenerate", cfg.n_candidates)))?;
    let ball = Ball::new(x.clone(), t)?;
    let plane = best.plane.clone();
    let error_sq = plane_error_sq(mu, &ball, &plane);
    let (_, beta2_ref) = lsq_plane(mu, &ball, mu.d())?;
    let err = error_sq.sqrt();
    let ratio = if err < ZERO_RATIO_TOL && beta2_ref < ZERO_RATIO_TOL { 1.0 } else { err / beta2_ref };
    let last = &sep.centers[mu.d() + 1];
    let last_ball_min_dist = mu
        .indices_within(last.coords(), 0.5 * sep.radius)
        .into_iter()
        .map(|i| plane.residual(mu.coords(i)) / t)
        .fold(f64::INFINITY, f64::min);
    let selected = best.index;
    Ok(PlaneSelection {
        plane,
        selected,
        error_sq,
        beta2_ref,
        ratio,
        candidates_tried: cfg.n_candidates,
        invalid_candidates: invalid,
        lambda0,
        separation: sep,
        last_ball_min_dist,
        scores: cfg.keep_scores.then_some(scores),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: Vec<Vec<f64>>, d: usize) -> EmpiricalMeasure {
        let n = pts.len();
        EmpiricalMeasure::new(pts.into_iter().map(Point::from).collect(), vec![1.0 / n as f64; n], d).unwrap()
    }

    fn grid(bump: f64) -> EmpiricalMeasure {
        let mut pts = Vec::new();
        for i in 0..9 {
            for j in 0..9 {
                let (u, v) = (i as f64 / 4.0 - 1.0, j as f64 / 4.0 - 1.0);
                pts.push(vec![u, v, bump * ((i * 5 + j * 3) % 7) as f64 / 7.0]);
            }
        }
        cloud(pts, 2)
    }

    #[test]
    fn flat_cloud_scores_zero() {
        let mu = grid(0.0);
        let x = Point::from([0.0, 0.0, 0.0]);
        let cand = vec![Point::from([0.0, 0.0, 0.0]), Point::from([0.5, 0.0, 0.0]), Point::from([0.0, 0.5, 0.0])];
        let s = score_candidate(&mu, &x, 1.0, 0.1, &cand, Mode::exact()).unwrap();
        assert!(s.e_score.abs() < 1e-20 && s.a_score.abs() < 1e-20);
        let cfg = SelectConfig { n_candidates: 4, mode: Mode::monte_carlo(500, 1), separation_samples: 500, ..Default::default() };
        let sel = select_plane(&mu, &x, 1.0, &cfg).unwrap();
        assert!(sel.error_sq < 1e-24);
        assert_eq!(sel.ratio, 1.0);
    }

    #[test]
    fn coincident_vertices_are_invalid() {
        let mu = grid(0.1);
        let x = Point::from([0.0, 0.0, 0.0]);
        let cand = vec![Point::from([0.0, 0.0, 0.0]), Point::from([0.0, 0.0, 0.0]), Point::from([0.0, 0.5, 0.0])];
        let err = score_candidate(&mu, &x, 1.0, 0.1, &cand, Mode::exact()).unwrap_err();
        assert!(matches!(err, Error::InvalidCandidate(_)));
    }

    #[test]
    fn monte_carlo_score_tracks_exact() {
        let mu = grid(0.2);
        let x = Point::from([0.0, 0.0, 0.05]);
        let cand = vec![
            Point::from(mu.coords(40).to_vec()),
            Point::from(mu.coords(42).to_vec()),
            Point::from(mu.coords(58).to_vec()),
        ];
        let ex = score_candidate(&mu, &x, 1.0, 0.2, &cand, Mode::exact()).unwrap();
        let mc = score_candidate(&mu, &x, 1.0, 0.2, &cand, Mode::monte_carlo(40_000, 9)).unwrap();
        assert!(ex.e_score > 0.0 && ex.a_score > 0.0);
        assert!((mc.e_score - ex.e_score).abs() < 4.0 * mc.e_std_error, "{} {} {}", mc.e_score, ex.e_score, mc.e_std_error);
        assert!((mc.a_score - ex.a_score).abs() < 4.0 * mc.a_std_error.max(1e-3 * ex.a_score));
    }

    #[test]
    fn single_candidate_is_returned_and_ratio_is_at_least_one() {
        let mu = grid(0.15);
        let x = Point::from([0.0, 0.0, 0.05]);
        let cfg = SelectConfig { n_candidates: 1, mode: Mode::monte_carlo(2000, 4), separation_samples: 1000, seed: 2, keep_scores: true, ..Default::default() };
        let sel = select_plane(&mu, &x, 1.0, &cfg).unwrap();
        let scores = sel.scores.as_ref().unwrap();
        assert_eq!(scores.len(), 1);
        assert_eq!(sel.selected, 0);
        let atoms = draw_candidate(&mu, &sel.separation, 0, 2);
        assert_eq!(scores[0].atom_indices, atoms);
        assert!(sel.error_sq >= sel.beta2_ref.powi(2) - 1e-12);
        assert!(sel.ratio >= 1.0 - 1e-9);
    }
}
