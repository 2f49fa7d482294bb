mod args;

use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use menger_core::harness::{ball_grid, SCHEMA_VERSION};
use menger_core::integrals::DEFAULT_EXACT_BUDGET;
use menger_core::plane_fit::default_levels;
use menger_core::{
    beta_p, find_separated_balls, generate, integrate, jones_flatness, load_dataset, select_plane, verify_suite, write_csv, Ball,
    CurvatureKind, CurvatureSpec, Domain, EmpiricalMeasure, Error, Family, Flavor, GeneratorSpec, IntegralSpec, Integrand, Mode,
    Point, Result, SelectConfig, Simplex, Suite, SuiteConfig, WeightColumn,
};
use serde::Serialize;

use args::{parse_ball, parse_simplex, Cli, Command, Dataset, Format, Global};

const DEFAULT_MC_SAMPLES: u64 = 100_000;

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    schema_version: u32,
    command: &'static str,
    result: T,
}

fn envelope<T: Serialize>(command: &'static str, result: T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(&Envelope { schema_version: SCHEMA_VERSION, command, result })?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn emit(g: &Global, bytes: &[u8]) -> Result<()> {
    match &g.out {
        Some(path) => File::create(path)
            .and_then(|mut f| f.write_all(bytes))
            .map_err(|e| Error::InvalidInput(format!("--out {}: {e}", path.display()))),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn coord_header(n: usize) -> impl Iterator<Item = String> {
    (0..n).map(|k| format!("x{k}"))
}

fn load(g: &Global, data: &Dataset) -> Result<EmpiricalMeasure> {
    let weights = if g.weighted { WeightColumn::Last } else { WeightColumn::Auto };
    load_dataset(&data.dataset, data.d, weights).map_err(|e| match e {
        Error::Io(io) => Error::InvalidInput(format!("--dataset {}: {io}", data.dataset.display())),
        other => other,
    })
}

fn ball_arg(mu: &EmpiricalMeasure, field: &str, s: &str) -> Result<Ball> {
    let (c, r) = parse_ball(field, s)?;
    if c.len() != mu.ambient_dim() {
        return Err(Error::InvalidInput(format!(
            "{field}: centre has {} coordinates, dataset points have {}",
            c.len(),
            mu.ambient_dim()
        )));
    }
    Ball::new(Point::from(c), r)
}

/// Atom nearest the enclosing centre, with half the diameter.
fn default_ball(mu: &EmpiricalMeasure) -> Result<Ball> {
    let i = mu.nearest(mu.enclosing_ball().center())?;
    Ball::new(mu.points()[i].clone(), mu.diameter() / 2.0)
}

fn mc_mode(g: &Global, default: u64) -> Mode {
    Mode::monte_carlo(g.mc_samples.unwrap_or(default), g.seed())
}

fn run(cli: Cli) -> Result<()> {
    let g = cli.global.resolve()?;
    let json = |default: Format| g.format.unwrap_or(default) == Format::Json;
    let bytes = match cli.command {
        Command::Generate { family, d, n, count, level, sigma } => {
            let mut spec = GeneratorSpec::new(family.parse::<Family>()?, d, n).sigma(sigma).seed(g.seed());
            if let Some(c) = count {
                spec = spec.count(c);
            }
            if let Some(l) = level {
                spec = spec.level(l);
            }
            let mu = generate(&spec)?;
            if json(Format::Csv) {
                #[derive(Serialize)]
                struct Cloud<'a> {
                    spec: &'a GeneratorSpec,
                    points: &'a [Point],
                    weights: &'a [f64],
                }
                envelope("generate", Cloud { spec: &spec, points: mu.points(), weights: mu.weights() })?
            } else {
                let mut buf = Vec::new();
                write_csv(&mu, &mut buf)?;
                buf
            }
        }
        Command::Curvature { kind, simplex, dataset, d, ball, local, power, exact } => {
            let kind: CurvatureKind = kind.parse()?;
            if let Some(s) = simplex {
                if power.is_some() {
                    return Err(Error::InvalidInput("--power: needs --ball or --local".into()));
                }
                let verts = parse_simplex(&s)?;
                if verts.len() < 3 {
                    return Err(Error::InvalidInput("--simplex: needs at least three vertices".into()));
                }
                let d = verts.len() - 2;
                let x = Simplex::new(verts.into_iter().map(Point::from).collect())?;
                let value = x.curvature(&CurvatureSpec::new(kind, d))?;
                if json(Format::Json) {
                    #[derive(Serialize)]
                    struct Value {
                        kind: CurvatureKind,
                        d: usize,
                        value: f64,
                    }
                    envelope("curvature", Value { kind, d, value })?
                } else {
                    csv_bytes(
                        vec!["kind".into(), "d".into(), "value".into()],
                        vec![vec![kind.to_string(), d.to_string(), value.to_string()]],
                    )?
                }
            } else {
                let dataset = dataset.ok_or_else(|| Error::InvalidInput("--dataset: required unless --simplex is given".into()))?;
                let d = d.ok_or_else(|| Error::InvalidInput("--d: required with --dataset".into()))?;
                let mu = load(&g, &Dataset { dataset, d })?;
                let domain = match (ball, local) {
                    (Some(b), _) => {
                        let ball = ball_arg(&mu, "--ball", &b)?;
                        match g.lambda {
                            Some(lambda) => Domain::WellScaled { ball, lambda },
                            None => Domain::FullBall { ball },
                        }
                    }
                    (None, Some(l)) => {
                        let ball = ball_arg(&mu, "--local", &l)?;
                        Domain::Local { center: ball.center().clone(), t: ball.radius(), lambda: g.lambda.unwrap_or(0.1) }
                    }
                    (None, None) => Domain::FullBall { ball: mu.enclosing_ball() },
                };
                let integrand = match (power, kind) {
                    (Some(p), _) => Integrand::PsinPower { d, p },
                    (None, CurvatureKind::Leger) => Integrand::LegerPower { d },
                    (None, k) => Integrand::CurvatureSq(CurvatureSpec::new(k, d)),
                };
                let mode = if exact {
                    Mode::Exact { budget: g.exact_budget.unwrap_or(DEFAULT_EXACT_BUDGET) }
                } else {
                    mc_mode(&g, DEFAULT_MC_SAMPLES)
                };
                let r = integrate(&mu, &IntegralSpec { integrand, domain, mode })?;
                if json(Format::Json) {
                    envelope("curvature", r)?
                } else {
                    csv_bytes(
                        ["value", "std_error", "tuples_evaluated", "accepted_fraction", "ball_mass", "atoms_in_ball"]
                            .map(String::from)
                            .to_vec(),
                        vec![vec![
                            r.value.to_string(),
                            r.std_error.to_string(),
                            r.tuples_evaluated.to_string(),
                            r.accepted_fraction.to_string(),
                            r.ball_mass.to_string(),
                            r.atoms_in_ball.to_string(),
                        ]],
                    )?
                }
            }
        }
        Command::Beta { data, p, ball, centers, scales } => {
            let mu = load(&g, &data)?;
            let grid: Vec<(Option<usize>, Point, f64)> = match ball {
                Some(b) => {
                    let b = ball_arg(&mu, "--ball", &b)?;
                    vec![(None, b.center().clone(), b.radius())]
                }
                None => ball_grid(&mu, centers, scales).into_iter().map(|(i, t)| (Some(i), mu.points()[i].clone(), t)).collect(),
            };
            #[derive(Serialize)]
            struct Row {
                center_index: Option<usize>,
                center: Point,
                t: f64,
                p: f64,
                beta: f64,
                mass: f64,
            }
            let rows = grid
                .into_iter()
                .map(|(i, x, t)| {
                    let r = beta_p(&mu, &x, t, p, data.d)?;
                    Ok(Row { center_index: i, center: x, t, p, beta: r.beta, mass: r.mass })
                })
                .collect::<Result<Vec<_>>>()?;
            if json(Format::Json) {
                envelope("beta", rows)?
            } else {
                let mut header = vec!["center_index".to_string()];
                header.extend(coord_header(mu.ambient_dim()));
                header.extend(["t", "p", "beta", "mass"].map(String::from));
                let body = rows
                    .iter()
                    .map(|r| {
                        let mut v = vec![r.center_index.map(|i| i.to_string()).unwrap_or_default()];
                        v.extend(r.center.coords().iter().map(|c| c.to_string()));
                        v.extend([r.t, r.p, r.beta, r.mass].map(|x| x.to_string()));
                        v
                    })
                    .collect();
                csv_bytes(header, body)?
            }
        }
        Command::Jflat { data, ball, p, tilde, levels } => {
            let mu = load(&g, &data)?;
            let ball = match ball {
                Some(b) => ball_arg(&mu, "--ball", &b)?,
                None => mu.enclosing_ball(),
            };
            let levels = levels.unwrap_or_else(|| default_levels(&mu, &ball));
            let flavor = if tilde { Flavor::JTilde } else { Flavor::J };
            let r = jones_flatness(&mu, &ball, p, flavor, levels)?;
            if json(Format::Json) {
                envelope("jflat", r)?
            } else {
                let mut buf = Vec::new();
                r.write_csv(&mut buf)?;
                buf
            }
        }
        Command::Separate { data, ball, samples } => {
            let mu = load(&g, &data)?;
            let ball = match ball {
                Some(b) => ball_arg(&mu, "--ball", &b)?,
                None => default_ball(&mu)?,
            };
            let sep = find_separated_balls(&mu, ball.center(), ball.radius(), samples, g.seed())?;
            if json(Format::Json) {
                envelope("separate", sep)?
            } else {
                let mut header = vec!["ball".to_string(), "center_index".to_string()];
                header.extend(coord_header(mu.ambient_dim()));
                header.extend(["radius", "omega_empirical", "lambda0"].map(String::from));
                let body = sep
                    .centers
                    .iter()
                    .zip(&sep.center_indices)
                    .enumerate()
                    .map(|(k, (c, i))| {
                        let mut v = vec![k.to_string(), i.to_string()];
                        v.extend(c.coords().iter().map(|x| x.to_string()));
                        v.extend([sep.radius, sep.omega_empirical, sep.lambda0()].map(|x| x.to_string()));
                        v
                    })
                    .collect();
                csv_bytes(header, body)?
            }
        }
        Command::Plane { data, ball, candidates, scores } => {
            let mu = load(&g, &data)?;
            let ball = match ball {
                Some(b) => ball_arg(&mu, "--ball", &b)?,
                None => default_ball(&mu)?,
            };
            let cfg = SelectConfig {
                lambda0: g.lambda,
                n_candidates: candidates,
                mode: mc_mode(&g, 20_000),
                seed: g.seed(),
                keep_scores: scores,
                ..Default::default()
            };
            let sel = select_plane(&mu, ball.center(), ball.radius(), &cfg)?;
            if json(Format::Json) {
                envelope("plane", sel)?
            } else {
                csv_bytes(
                    ["ratio", "error_sq", "beta2_ref", "selected", "candidates_tried", "invalid_candidates", "lambda0"]
                        .map(String::from)
                        .to_vec(),
                    vec![vec![
                        sel.ratio.to_string(),
                        sel.error_sq.to_string(),
                        sel.beta2_ref.to_string(),
                        sel.selected.to_string(),
                        sel.candidates_tried.to_string(),
                        sel.invalid_candidates.to_string(),
                        sel.lambda0.to_string(),
                    ]],
                )?
            }
        }
        Command::Verify { suite, data, centers, scales, p, levels, exact_limit, runtime } => {
            let suite: Suite = suite.parse()?;
            let mu = load(&g, &data)?;
            let mut cfg = SuiteConfig::default();
            cfg.centers = centers.unwrap_or(cfg.centers);
            cfg.scales = scales.unwrap_or(cfg.scales);
            cfg.p = p.unwrap_or(cfg.p);
            cfg.levels = levels.or(cfg.levels);
            cfg.exact_limit = exact_limit.or(g.exact_budget).unwrap_or(cfg.exact_limit);
            cfg.mc_samples = g.mc_samples.unwrap_or(cfg.mc_samples);
            cfg.lambda = g.lambda.unwrap_or(cfg.lambda);
            cfg.seed = g.seed();
            cfg.record_runtime = runtime;
            let report = verify_suite(suite, &mu, &cfg)?;
            if json(Format::Json) {
                let mut s = report.to_json()?;
                s.push('\n');
                s.into_bytes()
            } else {
                let mut buf = Vec::new();
                report.write_csv(&mut buf)?;
                buf
            }
        }
    };
    emit(&g, &bytes)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_computation_failure() { 3 } else { 2 })
        }
    }
}
