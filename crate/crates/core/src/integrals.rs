//! Curvature functionals over `U_lambda(B)`, `W_lambda(B)` and `B^{d+2}`,
//! by exact tuple enumeration or Monte Carlo.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::measure::{Ball, EmpiricalMeasure};
use crate::rng::{CounterRng, WeightedSampler};
use crate::simplex::{
    curvature_from_shape, leger_power_from_shape, psin0_power_from_shape, CurvatureKind, CurvatureSpec, Point, Shape,
};

pub const DEFAULT_EXACT_BUDGET: u64 = 100_000_000;
pub const DEFAULT_MC_SAMPLES: u64 = 100_000;
/// Monte Carlo samples per reduction chunk.
pub const MC_CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mode {
    Exact { budget: u64 },
    MonteCarlo { samples: u64, seed: u64 },
}

impl Mode {
    pub fn exact() -> Self {
        Mode::Exact { budget: DEFAULT_EXACT_BUDGET }
    }

    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        Mode::MonteCarlo { samples, seed }
    }
}

/// The set of tuples integrated over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// `U_lambda(B(x,t))`: all vertices in the ball, every edge at least `lambda * t`.
    Local { center: Point, t: f64, lambda: f64 },
    /// `W_lambda(B)`: `min(X) >= lambda * diam(X) > 0`.
    WellScaled { ball: Ball, lambda: f64 },
    /// All of `B^{d+2}`.
    FullBall { ball: Ball },
}

impl Domain {
    pub fn ball(&self) -> Result<Ball> {
        match self {
            Domain::Local { center, t, .. } => Ball::new(center.clone(), *t),
            Domain::WellScaled { ball, .. } | Domain::FullBall { ball } => Ok(ball.clone()),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Domain::Local { lambda, .. } if !(lambda > 0.0 && lambda < 2.0) => {
                Err(Error::invalid(format!("lambda for U must lie in (0, 2), got {lambda}")))
            }
            Domain::WellScaled { lambda, .. } if !(lambda > 0.0 && lambda <= 1.0) => {
                Err(Error::invalid(format!("lambda for W must lie in (0, 1], got {lambda}")))
            }
            _ => self.ball().map(|_| ()),
        }
    }

    #[inline]
    /// Whether a tuple with a repeated atom lies in the domain; its integrand is zero.
    fn admits_repeat(&self) -> bool {
        matches!(self, Domain::FullBall { .. })
    }

    fn admits(&self, s: &Shape) -> bool {
        match self {
            Domain::Local { t, lambda, .. } => s.min_edge >= lambda * t,
            Domain::WellScaled { lambda, .. } => s.diam > 0.0 && s.min_edge >= lambda * s.diam,
            Domain::FullBall { .. } => true,
        }
    }
}

/// The function of a `(d+2)`-tuple being integrated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Integrand {
    /// Squared curvature. For the Menger-type kind the vertex-0 form
    /// `psin_{x_0}^2 / diam^{d(d+1)}` is used; it has the same integral.
    CurvatureSq(CurvatureSpec),
    /// `psin_{x_0}^p / diam^{d(d+1)}`.
    PsinPower { d: usize, p: f64 },
    /// `c_L^{d+1}`.
    LegerPower { d: usize },
}

impl Integrand {
    pub fn d(&self) -> usize {
        match *self {
            Integrand::CurvatureSq(spec) => spec.d,
            Integrand::PsinPower { d, .. } | Integrand::LegerPower { d } => d,
        }
    }

    #[inline]
    pub(crate) fn eval(&self, v: &[&[f64]], s: &Shape) -> f64 {
        match *self {
            Integrand::CurvatureSq(spec) if spec.kind == CurvatureKind::Mt => psin0_power_from_shape(s, spec.d, 2.0),
            Integrand::CurvatureSq(spec) => curvature_from_shape(v, s, spec.kind, spec.d).powi(2),
            Integrand::PsinPower { d, p } => psin0_power_from_shape(s, d, p),
            Integrand::LegerPower { d } => leger_power_from_shape(v, s, d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralSpec {
    pub integrand: Integrand,
    pub domain: Domain,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    /// Zero in exact mode.
    pub std_error: f64,
    pub tuples_evaluated: u64,
    /// Fraction of enumerated or sampled tuples lying in the domain.
    pub accepted_fraction: f64,
    /// `mu(B)` of the integration ball.
    pub ball_mass: f64,
    pub atoms_in_ball: usize,
    pub spec: IntegralSpec,
}

/// Running mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
    accepted: u64,
}

impl Welford {
    #[inline]
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, o: Welford) -> Welford {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        let mean = self.mean + delta * o.n as f64 / n as f64;
        let m2 = self.m2 + o.m2 + delta * delta * self.n as f64 * o.n as f64 / n as f64;
        Welford { n, mean, m2, accepted: self.accepted + o.accepted }
    }
}

type Verts<'a> = SmallVec<[&'a [f64]; 8]>;

/// Evaluate an integral.
pub fn integrate(mu: &EmpiricalMeasure, spec: &IntegralSpec) -> Result<IntegralResult> {
    spec.domain.validate()?;
    let ball = spec.domain.ball()?;
    if ball.center().dim() != mu.ambient_dim() {
        return Err(Error::invalid("integration ball dimension does not match the measure"));
    }
    let k = spec.integrand.d() + 2;
    let idx = mu.ball_indices(&ball);
    let mass = mu.mass_of(&idx);
    let coords: Vec<&[f64]> = idx.iter().map(|&i| mu.coords(i)).collect();
    let weights: Vec<f64> = idx.iter().map(|&i| mu.weight(i)).collect();
    let kernel = |v: &[&[f64]]| -> Option<f64> {
        let mut s = Shape::edges_only(v);
        if !spec.domain.admits(&s) {
            return None;
        }
        s.fill_content(v);
        Some(spec.integrand.eval(v, &s))
    };
    let (value, std_error, tuples, accepted) = match spec.mode {
        Mode::Exact { budget } => {
            let m = coords.len();
            let tuples = (m as u128).pow(k as u32);
            if tuples > budget as u128 {
                return Err(Error::BudgetExceeded { tuples, budget });
            }
            let (value, accepted) = exact_sum(&coords, &weights, k, &kernel);
            (value, 0.0, tuples as u64, accepted)
        }
        Mode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::invalid("Monte Carlo needs at least one sample"));
            }
            let Some(sampler) = WeightedSampler::new(&weights) else {
                return Ok(IntegralResult {
                    value: 0.0,
                    std_error: 0.0,
                    tuples_evaluated: 0,
                    accepted_fraction: 0.0,
                    ball_mass: mass,
                    atoms_in_ball: idx.len(),
                    spec: spec.clone(),
                });
            };
            let repeat = spec.domain.admits_repeat().then_some(0.0);
            let stats = monte_carlo(samples, seed, |rng| {
                let mut pos: SmallVec<[usize; 8]> = SmallVec::new();
                for _ in 0..k {
                    let p = sampler.sample(rng);
                    if pos.contains(&p) {
                        return repeat;
                    }
                    pos.push(p);
                }
                let v: Verts = pos.iter().map(|&p| coords[p]).collect();
                kernel(&v)
            });
            let scale = mass.powi(k as i32);
            let sd = if stats.n > 1 { (stats.m2 / (stats.n - 1) as f64).max(0.0).sqrt() } else { 0.0 };
            (stats.mean * scale, sd / (stats.n as f64).sqrt() * scale, samples, stats.accepted)
        }
    };
    Ok(IntegralResult {
        value,
        std_error,
        tuples_evaluated: tuples,
        accepted_fraction: if tuples == 0 { 0.0 } else { accepted as f64 / tuples as f64 },
        ball_mass: mass,
        atoms_in_ball: idx.len(),
        spec: spec.clone(),
    })
}

/// Sum over all ordered `k`-tuples with repetition, weighted by the product
/// of atom weights. Parallel over the first vertex, reduced in index order.
fn exact_sum<F>(coords: &[&[f64]], weights: &[f64], k: usize, kernel: &F) -> (f64, u64)
where
    F: Fn(&[&[f64]]) -> Option<f64> + Sync,
{
    let m = coords.len();
    if m == 0 {
        return (0.0, 0);
    }
    let parts: Vec<(f64, u64)> = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut pos: SmallVec<[usize; 8]> = SmallVec::from_elem(0, k);
            pos[0] = first;
            let mut sum = 0.0;
            let mut accepted = 0u64;
            let mut v: Verts = pos.iter().map(|&p| coords[p]).collect();
            loop {
                for (slot, &p) in v.iter_mut().zip(&pos) {
                    *slot = coords[p];
                }
                if let Some(f) = kernel(&v) {
                    accepted += 1;
                    if f != 0.0 {
                        sum += f * pos.iter().map(|&p| weights[p]).product::<f64>();
                    }
                }
                let mut j = k - 1;
                loop {
                    if j == 0 {
                        return (sum, accepted);
                    }
                    pos[j] += 1;
                    if pos[j] < m {
                        break;
                    }
                    pos[j] = 0;
                    j -= 1;
                }
            }
        })
        .collect();
    parts.iter().fold((0.0, 0), |(s, a), &(ps, pa)| (s + ps, a + pa))
}

/// Mean and variance of `draw` over `samples` independent streams keyed by
/// `(seed, sample index)`; `None` draws count as zero, outside the domain.
fn monte_carlo<F>(samples: u64, seed: u64, draw: F) -> Welford
where
    F: Fn(&mut CounterRng) -> Option<f64> + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Welford> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut w = Welford::default();
            for s in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(samples) {
                let mut rng = CounterRng::keyed(seed, &[s]);
                match draw(&mut rng) {
                    Some(f) => {
                        w.accepted += 1;
                        w.push(f);
                    }
                    None => w.push(0.0),
                }
            }
            w
        })
        .collect();
    parts.into_iter().fold(Welford::default(), Welford::merge)
}

pub(crate) fn mc_mean<F>(samples: u64, seed: u64, draw: F) -> (f64, f64, u64)
where
    F: Fn(&mut CounterRng) -> Option<f64> + Sync,
{
    let w = monte_carlo(samples, seed, draw);
    let sd = if w.n > 1 { (w.m2 / (w.n - 1) as f64).max(0.0).sqrt() } else { 0.0 };
    (w.mean, sd / (w.n as f64).sqrt(), w.accepted)
}

/// `c^2(x, t, lambda)`: squared curvature over `U_lambda(B(x,t))`.
pub fn local_curvature_sq(
    mu: &EmpiricalMeasure,
    x: &Point,
    t: f64,
    lambda: f64,
    spec: &CurvatureSpec,
    mode: Mode,
) -> Result<IntegralResult> {
    let domain = Domain::Local { center: x.clone(), t, lambda };
    integrate(mu, &IntegralSpec { integrand: Integrand::CurvatureSq(*spec), domain, mode })
}

/// `c^2(mu|_B)` without `lambda`, `c^2(mu|_B, lambda)` over `W_lambda(B)` with it.
pub fn ball_curvature_sq(
    mu: &EmpiricalMeasure,
    ball: &Ball,
    lambda: Option<f64>,
    spec: &CurvatureSpec,
    mode: Mode,
) -> Result<IntegralResult> {
    let domain = match lambda {
        Some(lambda) => Domain::WellScaled { ball: ball.clone(), lambda },
        None => Domain::FullBall { ball: ball.clone() },
    };
    integrate(mu, &IntegralSpec { integrand: Integrand::CurvatureSq(*spec), domain, mode })
}

/// `int_{B^{d+2}} psin_{x_0}^p(X) / diam(X)^{d(d+1)}` with `d = mu.d()`.
pub fn psin_power_integral(mu: &EmpiricalMeasure, ball: &Ball, p: f64, mode: Mode) -> Result<IntegralResult> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("polar sine power must be at least 1, got {p}")));
    }
    let domain = Domain::FullBall { ball: ball.clone() };
    integrate(mu, &IntegralSpec { integrand: Integrand::PsinPower { d: mu.d(), p }, domain, mode })
}

/// `c_L^{d+1}(mu|_B)` with `d = mu.d()`.
pub fn leger_integral(mu: &EmpiricalMeasure, ball: &Ball, mode: Mode) -> Result<IntegralResult> {
    let domain = Domain::FullBall { ball: ball.clone() };
    integrate(mu, &IntegralSpec { integrand: Integrand::LegerPower { d: mu.d() }, domain, mode })
}
