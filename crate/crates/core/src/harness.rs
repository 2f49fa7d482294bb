//! Inequality suites over a fixed grid of balls.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::{self, IntegralResult, Mode};
use crate::measure::{Ball, EmpiricalMeasure};
use crate::plane_fit::{default_levels, jones_flatness_cached, lsq_plane, BetaCache, Flavor};
use crate::rng::CounterRng;
use crate::separation::find_separated_balls;
use crate::simplex::{CurvatureSpec, Point};

pub const SCHEMA_VERSION: u32 = 1;
/// Quantities at most this times `mu(B)` count as zero.
const ZERO_REL: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// `c^2(x,t,lambda) / (beta_2^2 mu(B))`.
    Prop11,
    /// `beta_2^2 mu(B) / c^2(x,t,lambda_0)`.
    Thm12,
    /// `c^2(mu|_B) / J_2(mu|_{6B})`.
    Thm13,
    /// `J_2(mu|_B) / c^2(mu|_{3B}, lambda_0 / 2)`.
    Thm14,
    /// `int psin^p / J~_p(mu|_{6B})`, and `J~_p(mu|_{B/3}) / int psin^p`.
    Thm62,
    /// `J~_{d+1}(mu|_{B/3}) / c_L^{d+1}(mu|_B)`.
    Leger,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Prop11, Suite::Thm12, Suite::Thm13, Suite::Thm14, Suite::Thm62, Suite::Leger];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Prop11 => "prop11",
            Suite::Thm12 => "thm12",
            Suite::Thm13 => "thm13",
            Suite::Thm14 => "thm14",
            Suite::Thm62 => "thm62",
            Suite::Leger => "leger",
        }
    }

    fn sides(self) -> (&'static str, &'static str) {
        match self {
            Suite::Prop11 => ("c2_local(x,t,lambda)", "beta2_sq*mass"),
            Suite::Thm12 => ("beta2_sq*mass", "c2_local(x,t,lambda0)"),
            Suite::Thm13 => ("c2_ball(B)", "J2(6B)"),
            Suite::Thm14 => ("J2(B)", "c2_ball(3B,lambda0/2)"),
            Suite::Thm62 => ("psin_p(B)", "Jtilde_p(6B)"),
            Suite::Leger => ("Jtilde_{d+1}(B/3)", "leger(B)"),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown suite `{s}` (expected prop11, thm12, thm13, thm14, thm62 or leger)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub centers: usize,
    pub scales: usize,
    /// `lambda` of the local integral in `prop11`.
    pub lambda: f64,
    /// Exponent for `thm62`.
    pub p: f64,
    /// Largest tuple count evaluated exactly; above it Monte Carlo is used.
    pub exact_limit: u64,
    pub mc_samples: u64,
    pub separation_samples: u64,
    pub seed: u64,
    /// Multiscale levels; derived from the median spacing when absent.
    pub levels: Option<usize>,
    /// Wall-clock seconds in the report (breaks byte-stability).
    pub record_runtime: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            centers: 16,
            scales: 5,
            lambda: 0.1,
            p: 1.5,
            exact_limit: 200_000,
            mc_samples: 200_000,
            separation_samples: 2_000,
            seed: 0,
            levels: None,
            record_runtime: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub row: usize,
    pub center_index: usize,
    pub center: Point,
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub mass: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_std_error: f64,
    pub rhs_std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub quantities: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub lhs: String,
    pub rhs: String,
    pub d: usize,
    pub atoms: usize,
    pub config: SuiteConfig,
    pub rows: Vec<ReportRow>,
    pub rows_used: usize,
    pub rows_skipped: usize,
    /// Rows whose bounding side vanished while the bounded side did not.
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_constant_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl ExperimentReport {
    /// `max / min` of the used ratios.
    pub fn spread(&self) -> Option<f64> {
        match (self.empirical_constant, self.min_ratio) {
            (Some(hi), Some(lo)) if lo > 0.0 => Some(hi / lo),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One CSV row per ball; skipped rows have empty ratio fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "row", "center_index", "t", "lambda", "mass", "lhs", "rhs", "lhs_std_error", "rhs_std_error", "ratio",
            "ratio_lower", "skipped",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.row.to_string(),
                r.center_index.to_string(),
                r.t.to_string(),
                opt(r.lambda),
                r.mass.to_string(),
                r.lhs.to_string(),
                r.rhs.to_string(),
                r.lhs_std_error.to_string(),
                r.rhs_std_error.to_string(),
                opt(r.ratio),
                opt(r.ratio_lower),
                r.skipped.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ball grid: farthest-point centers and dyadic radii `diam / 4, diam / 8, ...`.
pub fn ball_grid(mu: &EmpiricalMeasure, centers: usize, scales: usize) -> Vec<(usize, f64)> {
    let diam = mu.diameter();
    let cs = mu.farthest_point_sample(centers, 0);
    cs.iter()
        .flat_map(|&c| (0..scales).map(move |k| (c, diam / 4.0 / 2f64.powi(k as i32))))
        .collect()
}

struct RowCtx<'a> {
    mu: &'a EmpiricalMeasure,
    cfg: &'a SuiteConfig,
    cache: &'a BetaCache,
    encl: Ball,
    row: usize,
}

impl RowCtx<'_> {
    fn mode(&self, atoms: usize, k: usize, tag: u64) -> Mode {
        let tuples = (atoms as f64).powi(k as i32);
        if tuples <= self.cfg.exact_limit as f64 {
            Mode::Exact { budget: self.cfg.exact_limit }
        } else {
            let seed = CounterRng::keyed(self.cfg.seed, &[self.row as u64, tag]).next_u64();
            Mode::monte_carlo(self.cfg.mc_samples, seed)
        }
    }

    fn integral(&self, ball: &Ball, tag: u64, f: impl Fn(Mode) -> Result<IntegralResult>) -> Result<IntegralResult> {
        let atoms = self.mu.ball_indices(ball).len();
        f(self.mode(atoms, self.mu.d() + 2, tag))
    }

    /// `gamma * B`, replaced by the enclosing ball once it holds every atom.
    fn blow_up(&self, ball: &Ball, gamma: f64, notes: &mut Vec<String>) -> Result<Ball> {
        let big = ball.scaled(gamma)?;
        if self.mu.ball_indices(&big).len() == self.mu.len() && big.radius() > self.encl.radius() {
            notes.push(format!("{gamma}B clamped to the enclosing ball"));
            Ok(self.encl.clone())
        } else {
            Ok(big)
        }
    }

    fn flatness(&self, ball: &Ball, p: f64, flavor: Flavor) -> Result<f64> {
        let levels = self.cfg.levels.unwrap_or_else(|| default_levels(self.mu, ball));
        Ok(jones_flatness_cached(self.mu, ball, p, flavor, levels, self.cache)?.value)
    }

    fn lambda0(&self, x: &Point, t: f64) -> Result<f64> {
        let seed = CounterRng::keyed(self.cfg.seed, &[self.row as u64, 99]).next_u64();
        Ok(find_separated_balls(self.mu, x, t, self.cfg.separation_samples, seed)?.lambda0())
    }
}

struct Sides {
    lhs: f64,
    rhs: f64,
    lhs_se: f64,
    rhs_se: f64,
    lambda: Option<f64>,
    lower: Option<f64>,
}

fn compute_row(suite: Suite, ctx: &RowCtx, x: &Point, t: f64, q: &mut BTreeMap<String, f64>, notes: &mut Vec<String>) -> Result<Sides> {
    let mu = ctx.mu;
    let d = mu.d();
    let ball = Ball::new(x.clone(), t)?;
    let mt = CurvatureSpec::mt(d);
    let beta_mass = || -> Result<f64> {
        let (_, b) = lsq_plane(mu, &ball, d)?;
        let mass = mu.mass_in_ball(&ball)?;
        Ok(b * b * mass)
    };
    let note_mode = |notes: &mut Vec<String>, name: &str, r: &IntegralResult| {
        if r.std_error > 0.0 || matches!(r.spec.mode, Mode::MonteCarlo { .. }) {
            notes.push(format!("{name}: monte carlo"));
        }
    };
    let sides = match suite {
        Suite::Prop11 => {
            let lambda = ctx.cfg.lambda;
            let c = ctx.integral(&ball, 1, |m| integrals::local_curvature_sq(mu, x, t, lambda, &mt, m))?;
            note_mode(notes, "lhs", &c);
            let bm = beta_mass()?;
            q.insert("beta2_sq".into(), bm / c.ball_mass.max(f64::MIN_POSITIVE));
            Sides { lhs: c.value, rhs: bm, lhs_se: c.std_error, rhs_se: 0.0, lambda: Some(lambda), lower: None }
        }
        Suite::Thm12 => {
            let lambda0 = ctx.lambda0(x, t)?;
            let c = ctx.integral(&ball, 1, |m| integrals::local_curvature_sq(mu, x, t, lambda0, &mt, m))?;
            note_mode(notes, "rhs", &c);
            let bm = beta_mass()?;
            Sides { lhs: bm, rhs: c.value, lhs_se: 0.0, rhs_se: c.std_error, lambda: Some(lambda0), lower: None }
        }
        Suite::Thm13 => {
            let c = ctx.integral(&ball, 1, |m| integrals::ball_curvature_sq(mu, &ball, None, &mt, m))?;
            note_mode(notes, "lhs", &c);
            let big = ctx.blow_up(&ball, 6.0, notes)?;
            let j = ctx.flatness(&big, 2.0, Flavor::J)?;
            Sides { lhs: c.value, rhs: j, lhs_se: c.std_error, rhs_se: 0.0, lambda: None, lower: None }
        }
        Suite::Thm14 => {
            let lambda0 = ctx.lambda0(x, t)?;
            let j = ctx.flatness(&ball, 2.0, Flavor::J)?;
            let big = ctx.blow_up(&ball, 3.0, notes)?;
            let c = ctx.integral(&big, 1, |m| integrals::ball_curvature_sq(mu, &big, Some(lambda0 / 2.0), &mt, m))?;
            note_mode(notes, "rhs", &c);
            Sides { lhs: j, rhs: c.value, lhs_se: 0.0, rhs_se: c.std_error, lambda: Some(lambda0 / 2.0), lower: None }
        }
        Suite::Thm62 => {
            let p = ctx.cfg.p;
            let c = ctx.integral(&ball, 1, |m| integrals::psin_power_integral(mu, &ball, p, m))?;
            note_mode(notes, "lhs", &c);
            let big = ctx.blow_up(&ball, 6.0, notes)?;
            let upper = ctx.flatness(&big, p, Flavor::JTilde)?;
            let lower = ctx.flatness(&ball.scaled(1.0 / 3.0)?, p, Flavor::JTilde)?;
            q.insert("jtilde_third".into(), lower);
            let zero = ZERO_REL * c.ball_mass;
            let lower_ratio = (c.value > zero && lower > zero).then(|| lower / c.value);
            Sides { lhs: c.value, rhs: upper, lhs_se: c.std_error, rhs_se: 0.0, lambda: None, lower: lower_ratio }
        }
        Suite::Leger => {
            let j = ctx.flatness(&ball.scaled(1.0 / 3.0)?, (d + 1) as f64, Flavor::JTilde)?;
            let c = ctx.integral(&ball, 1, |m| integrals::leger_integral(mu, &ball, m))?;
            note_mode(notes, "rhs", &c);
            Sides { lhs: j, rhs: c.value, lhs_se: 0.0, rhs_se: c.std_error, lambda: None, lower: None }
        }
    };
    Ok(sides)
}

/// Run `suite` over the ball grid of `mu`.
pub fn verify_suite(suite: Suite, mu: &EmpiricalMeasure, cfg: &SuiteConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if mu.len() < mu.d() + 2 {
        return Err(Error::invalid(format!("suite {suite} needs at least d + 2 = {} atoms, dataset has {}", mu.d() + 2, mu.len())));
    }
    if cfg.centers == 0 || cfg.scales == 0 {
        return Err(Error::invalid("ball grid needs at least one center and one scale"));
    }
    if !(mu.diameter() > 0.0) {
        return Err(Error::invalid("dataset support is a single point"));
    }
    let cache = BetaCache::new();
    let encl = mu.enclosing_ball();
    let grid = ball_grid(mu, cfg.centers, cfg.scales);
    let rows: Vec<ReportRow> = grid
        .par_iter()
        .enumerate()
        .map(|(row, &(ci, t))| {
            let ctx = RowCtx { mu, cfg, cache: &cache, encl: encl.clone(), row };
            let x = mu.points()[ci].clone();
            let mass = mu.mass_in_ball(&Ball::new(x.clone(), t)?)?;
            let mut quantities = BTreeMap::new();
            let mut notes = Vec::new();
            let mut out = ReportRow {
                row,
                center_index: ci,
                center: x.clone(),
                t,
                lambda: None,
                mass,
                lhs: 0.0,
                rhs: 0.0,
                lhs_std_error: 0.0,
                rhs_std_error: 0.0,
                ratio: None,
                ratio_lower: None,
                skipped: None,
                quantities: BTreeMap::new(),
                notes: Vec::new(),
            };
            match compute_row(suite, &ctx, &x, t, &mut quantities, &mut notes) {
                Ok(s) => {
                    let zero = ZERO_REL * mass;
                    out.lambda = s.lambda;
                    out.lhs = s.lhs;
                    out.rhs = s.rhs;
                    out.lhs_std_error = s.lhs_se;
                    out.rhs_std_error = s.rhs_se;
                    out.ratio_lower = s.lower;
                    match (s.lhs > zero, s.rhs > zero) {
                        (false, false) => out.skipped = Some("0/0 skipped".into()),
                        (true, false) => out.skipped = Some("unbounded: bounding side is zero".into()),
                        (false, true) => out.ratio = Some(0.0),
                        (true, true) => out.ratio = Some(s.lhs / s.rhs),
                    }
                }
                Err(e) if e.is_computation_failure() => out.skipped = Some(e.to_string()),
                Err(e) => return Err(e),
            }
            out.quantities = quantities;
            out.notes = notes;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<f64> = rows.iter().filter_map(|r| r.ratio).filter(|&r| r > 0.0).collect();
    let violations = rows.iter().filter(|r| r.skipped.as_deref().is_some_and(|s| s.starts_with("unbounded"))).count();
    let lower: Vec<f64> = rows.iter().filter_map(|r| r.ratio_lower).collect();
    let (lhs, rhs) = suite.sides();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        experiment: suite.name().into(),
        lhs: lhs.into(),
        rhs: rhs.into(),
        d: mu.d(),
        atoms: mu.len(),
        config: cfg.clone(),
        rows_used: rows.iter().filter(|r| r.ratio.is_some()).count(),
        rows_skipped: rows.iter().filter(|r| r.skipped.is_some()).count(),
        violations,
        empirical_constant: used.iter().copied().reduce(f64::max),
        min_ratio: used.iter().copied().reduce(f64::min),
        empirical_constant_lower: lower.iter().copied().reduce(f64::max),
        runtime_seconds: cfg.record_runtime.then(|| start.elapsed().as_secs_f64()),
        rows,
    })
}
