//! Deterministic point-cloud generators.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::rng::CounterRng;
use crate::simplex::Point;

/// Largest cloud a generator will build.
pub const MAX_ATOMS: usize = 5_000_000;
/// Hinges in the piecewise-linear graph map.
const HINGES: usize = 24;
/// Lipschitz bound of each graph coordinate.
const GRAPH_SLOPE: f64 = 0.5;
/// Grid jitter as a fraction of the spacing.
const JITTER: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Jittered unit-spacing lattice patch on a random `d`-plane; noise is in
    /// units of the spacing.
    Plane,
    LipschitzGraph,
    Sphere,
    CantorProduct,
    Segment,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::Plane, Family::LipschitzGraph, Family::Sphere, Family::CantorProduct, Family::Segment];

    pub fn name(self) -> &'static str {
        match self {
            Family::Plane => "plane",
            Family::LipschitzGraph => "lipschitz_graph",
            Family::Sphere => "sphere",
            Family::CantorProduct => "cantor_product",
            Family::Segment => "segment",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(&s))
            .ok_or_else(|| Error::invalid(format!("unknown family `{s}`")))
    }
}

/// A dataset descriptor, also accepted as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub family: Family,
    pub d: usize,
    /// Ambient dimension.
    pub n: usize,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Construction depth for `cantor_product`.
    #[serde(default = "default_level")]
    pub level: u32,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_count() -> usize {
    500
}

fn default_level() -> u32 {
    4
}

impl GeneratorSpec {
    pub fn new(family: Family, d: usize, n: usize) -> Self {
        Self { family, d, n, count: default_count(), level: default_level(), noise_sigma: 0.0, seed: 0 }
    }

    pub fn count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn level(mut self, level: u32) -> Self {
        self.level = level;
        self
    }

    pub fn sigma(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GeneratorSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.d == 0 || self.n == 0 {
            return bad("d and n must be positive".into());
        }
        if self.d > self.n {
            return bad(format!("d = {} exceeds ambient dimension n = {}", self.d, self.n));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        match self.family {
            Family::CantorProduct => {
                if self.level == 0 {
                    return bad("cantor level must be at least 1".into());
                }
                if self.n < 2 * self.d {
                    return bad(format!("cantor_product needs n >= 2d, got n = {}", self.n));
                }
                let atoms = 4f64.powi((self.level as usize * self.d) as i32);
                if atoms > MAX_ATOMS as f64 {
                    return bad(format!("cantor_product at level {} has {atoms} atoms, above {MAX_ATOMS}", self.level));
                }
            }
            _ if self.count < self.d + 2 => return bad(format!("count must be at least d + 2 = {}", self.d + 2)),
            _ if self.count > MAX_ATOMS => return bad(format!("count {} exceeds {MAX_ATOMS}", self.count)),
            Family::LipschitzGraph if self.n == self.d => return bad("lipschitz_graph needs n > d".into()),
            Family::Sphere if self.n < self.d + 1 => return bad("sphere needs n >= d + 1".into()),
            Family::Segment if self.d != 1 => return bad("segment is one-dimensional; use d = 1".into()),
            _ => {}
        }
        Ok(())
    }
}

fn gauss(rng: &mut CounterRng) -> f64 {
    rng.sample(StandardNormal)
}

/// `d` orthonormal vectors in `R^n` from Gram-Schmidt on Gaussian vectors.
fn random_frame(n: usize, d: usize, rng: &mut CounterRng) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
    while frame.len() < d {
        let mut v: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
        for _ in 0..2 {
            for u in &frame {
                let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            frame.push(v);
        }
    }
    frame
}

/// The `count` points of `Z^d` nearest the origin, ordered by norm then
/// lexicographically.
fn lattice_patch(d: usize, count: usize) -> Vec<Vec<f64>> {
    let unit_ball_volume = std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half_integer(d + 2);
    let mut k = (count as f64 / unit_ball_volume).powf(1.0 / d as f64).ceil() as i64 + 1;
    loop {
        let mut pts = Vec::new();
        let mut z = vec![-k; d];
        loop {
            if z.iter().map(|c| c * c).sum::<i64>() <= k * k {
                pts.push(z.iter().map(|&c| c as f64).collect::<Vec<f64>>());
            }
            let mut j = 0;
            while j < d {
                z[j] += 1;
                if z[j] <= k {
                    break;
                }
                z[j] = -k;
                j += 1;
            }
            if j == d {
                break;
            }
        }
        if pts.len() >= count {
            let norm = |p: &Vec<f64>| p.iter().map(|x| x * x).sum::<f64>();
            pts.sort_by(|a, b| norm(a).total_cmp(&norm(b)).then_with(|| a.partial_cmp(b).expect("finite")));
            pts.truncate(count);
            return pts;
        }
        k += 1;
    }
}

/// `Gamma(m / 2)`.
fn gamma_half_integer(m: usize) -> f64 {
    if m == 1 {
        std::f64::consts::PI.sqrt()
    } else if m == 2 {
        1.0
    } else {
        (m as f64 / 2.0 - 1.0) * gamma_half_integer(m - 2)
    }
}

fn plane(spec: &GeneratorSpec) -> Vec<Point> {
    let (d, n) = (spec.d, spec.n);
    let mut frame_rng = CounterRng::keyed(spec.seed, &[0]);
    let frame = random_frame(n, d, &mut frame_rng);
    let grid = lattice_patch(d, spec.count);
    grid.iter()
        .enumerate()
        .map(|(i, u)| {
            let mut rng = CounterRng::keyed(spec.seed, &[1, i as u64]);
            let mut p = vec![0.0; n];
            for (uj, e) in u.iter().zip(&frame) {
                let c = uj + JITTER * (2.0 * rng.uniform() - 1.0);
                p.iter_mut().zip(e).for_each(|(a, b)| *a += c * b);
            }
            if spec.noise_sigma > 0.0 && d < n {
                let mut g: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
                for e in &frame {
                    let c: f64 = g.iter().zip(e).map(|(a, b)| a * b).sum();
                    g.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
                }
                p.iter_mut().zip(&g).for_each(|(a, b)| *a += spec.noise_sigma * b);
            }
            Point::from(p)
        })
        .collect()
}

fn lipschitz_graph(spec: &GeneratorSpec) -> Vec<Point> {
    let (d, n) = (spec.d, spec.n);
    let m = n - d;
    let mut frng = CounterRng::keyed(spec.seed, &[0]);
    // Per output coordinate: hinge directions, offsets and signed amplitudes with sum |a| = slope.
    let maps: Vec<Vec<(Vec<f64>, f64, f64)>> = (0..m)
        .map(|_| {
            let raw: Vec<(Vec<f64>, f64, f64)> = (0..HINGES)
                .map(|_| {
                    let w = random_frame(d, 1, &mut frng).remove(0);
                    let b = 2.0 * frng.uniform() - 1.0;
                    let a = 2.0 * frng.uniform() - 1.0;
                    (w, b, a)
                })
                .collect();
            let total: f64 = raw.iter().map(|h| h.2.abs()).sum();
            raw.into_iter().map(|(w, b, a)| (w, b, a * GRAPH_SLOPE / total)).collect()
        })
        .collect();
    let k = ((spec.count as f64).powf(1.0 / d as f64).round() as usize).max(2);
    let h = 2.0 / (k - 1) as f64;
    let total = k.pow(d as u32);
    (0..total)
        .map(|i| {
            let mut rng = CounterRng::keyed(spec.seed, &[1, i as u64]);
            let mut rem = i;
            let u: Vec<f64> = (0..d)
                .map(|_| {
                    let c = rem % k;
                    rem /= k;
                    let jit = if c == 0 || c == k - 1 { 0.0 } else { JITTER * h * (2.0 * rng.uniform() - 1.0) };
                    -1.0 + c as f64 * h + jit
                })
                .collect();
            let mut p = u.clone();
            for hinges in &maps {
                let f: f64 = hinges
                    .iter()
                    .map(|(w, b, a)| a * (w.iter().zip(&u).map(|(x, y)| x * y).sum::<f64>() - b).abs())
                    .sum();
                p.push(f + spec.noise_sigma * if spec.noise_sigma > 0.0 { gauss(&mut rng) } else { 0.0 });
            }
            Point::from(p)
        })
        .collect()
}

fn sphere(spec: &GeneratorSpec) -> Vec<Point> {
    let (d, n, count) = (spec.d, spec.n, spec.count);
    (0..count)
        .map(|i| {
            let mut rng = CounterRng::keyed(spec.seed, &[1, i as u64]);
            let mut p = vec![0.0; n];
            match d {
                1 => {
                    let a = std::f64::consts::TAU * (i as f64 + 0.5 + JITTER * (2.0 * rng.uniform() - 1.0)) / count as f64;
                    p[0] = a.cos();
                    p[1] = a.sin();
                }
                2 => {
                    // Fibonacci lattice.
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = i as f64 * std::f64::consts::PI * (3.0 - 5f64.sqrt());
                    p[0] = r * a.cos();
                    p[1] = r * a.sin();
                    p[2] = z;
                }
                _ => {
                    let g: Vec<f64> = (0..=d).map(|_| gauss(&mut rng)).collect();
                    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                    p[..=d].iter_mut().zip(&g).for_each(|(a, b)| *a = b / norm);
                }
            }
            if spec.noise_sigma > 0.0 {
                let s = 1.0 + spec.noise_sigma * gauss(&mut rng);
                p[..=d].iter_mut().for_each(|a| *a *= s);
            }
            Point::from(p)
        })
        .collect()
}

/// Centers of the `4^level` cells of the 4-corner Cantor construction in the
/// unit square: each cell keeps its four corner subcells of a quarter side.
pub fn cantor_corners(level: u32) -> Vec<[f64; 2]> {
    let mut cells = vec![[0.0, 0.0]];
    let mut side = 1.0;
    for _ in 0..level {
        side /= 4.0;
        let off = 3.0 * side;
        cells = cells
            .iter()
            .flat_map(|&[x, y]| [[x, y], [x + off, y], [x, y + off], [x + off, y + off]])
            .collect();
    }
    cells.into_iter().map(|[x, y]| [x + side / 2.0, y + side / 2.0]).collect()
}

fn cantor_product(spec: &GeneratorSpec) -> Vec<Point> {
    let base = cantor_corners(spec.level);
    let per = base.len();
    let total = per.pow(spec.d as u32);
    (0..total)
        .map(|i| {
            let mut p = vec![0.0; spec.n];
            let mut rem = i;
            for f in 0..spec.d {
                let c = base[rem % per];
                rem /= per;
                p[2 * f] = c[0];
                p[2 * f + 1] = c[1];
            }
            Point::from(p)
        })
        .collect()
}

fn segment(spec: &GeneratorSpec) -> Vec<Point> {
    let count = spec.count;
    (0..count)
        .map(|i| {
            let mut p = vec![0.0; spec.n];
            p[0] = i as f64 / (count - 1) as f64;
            if spec.noise_sigma > 0.0 {
                let mut rng = CounterRng::keyed(spec.seed, &[1, i as u64]);
                p.iter_mut().skip(1).for_each(|a| *a = spec.noise_sigma * gauss(&mut rng));
            }
            Point::from(p)
        })
        .collect()
}

/// Build the cloud with equal weights summing to `diam^d`.
pub fn generate(spec: &GeneratorSpec) -> Result<EmpiricalMeasure> {
    spec.validate()?;
    let points = match spec.family {
        Family::Plane => plane(spec),
        Family::LipschitzGraph => lipschitz_graph(spec),
        Family::Sphere => sphere(spec),
        Family::CantorProduct => cantor_product(spec),
        Family::Segment => segment(spec),
    };
    EmpiricalMeasure::with_default_weights(points, spec.d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_level_one_is_four_corners() {
        let c = cantor_corners(1);
        assert_eq!(c, vec![[0.125, 0.125], [0.875, 0.125], [0.125, 0.875], [0.875, 0.875]]);
        assert_eq!(cantor_corners(3).len(), 64);
    }

    #[test]
    fn generation_is_deterministic_and_massed() {
        for fam in Family::ALL {
            let (d, n) = match fam {
                Family::Segment => (1, 2),
                Family::CantorProduct => (1, 2),
                _ => (2, 3),
            };
            let spec = GeneratorSpec::new(fam, d, n).count(200).level(3).sigma(0.01).seed(11);
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a.points(), b.points(), "{fam}");
            assert_eq!(a.weights(), b.weights());
            let diam = a.diameter();
            assert!((a.total_mass() - diam.powi(d as i32)).abs() < 1e-9 * diam.powi(d as i32), "{fam}");
        }
    }

    #[test]
    fn plane_lies_on_a_plane_without_noise() {
        let mu = generate(&GeneratorSpec::new(Family::Plane, 2, 4).count(300).seed(3)).unwrap();
        assert_eq!(mu.len(), 300);
        let ball = crate::measure::Ball::new(Point::origin(4), 6.0).unwrap();
        let (_, beta) = crate::plane_fit::lsq_plane(&mu, &ball, 2).unwrap();
        assert!(beta < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate(&GeneratorSpec::new(Family::Plane, 3, 2)).is_err());
        assert!(generate(&GeneratorSpec::new(Family::CantorProduct, 1, 2).level(0)).is_err());
        assert!(generate(&GeneratorSpec::new(Family::Segment, 2, 3)).is_err());
        assert!(generate(&GeneratorSpec::new(Family::Plane, 1, 2).sigma(-1.0)).is_err());
        assert!(GeneratorSpec::from_json(r#"{"family":"sphere","d":1,"n":2,"bogus":1}"#).is_err());
        let s = GeneratorSpec::from_json(r#"{"family":"lipschitz_graph","d":2,"n":3,"count":100}"#).unwrap();
        assert_eq!(s.family, Family::LipschitzGraph);
        assert_eq!("cantor-product".parse::<Family>().unwrap(), Family::CantorProduct);
    }
}
