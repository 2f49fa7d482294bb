use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use menger_core::{Error, Result};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "menger", version, about = "Menger curvatures, beta numbers and flatness of point clouds")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Global {
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    pub mc_samples: Option<u64>,
    /// Largest tuple count enumerated in exact mode.
    #[arg(long, global = true)]
    pub exact_budget: Option<u64>,
    /// Separation parameter of the tuple domain.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// TOML file with the same keys as these flags; flags win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Treat the last CSV column as weights even without a header.
    #[arg(long, global = true)]
    #[serde(default)]
    pub weighted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Global {
    /// Fill unset flags from `--config`.
    pub fn resolve(mut self) -> Result<Global> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::InvalidInput(format!("--config {}: {e}", path.display())))?;
        let file: Global =
            toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("--config {}: {}", path.display(), e.message())))?;
        self.seed = self.seed.or(file.seed);
        self.mc_samples = self.mc_samples.or(file.mc_samples);
        self.exact_budget = self.exact_budget.or(file.exact_budget);
        self.lambda = self.lambda.or(file.lambda);
        self.out = self.out.or(file.out);
        self.format = self.format.or(file.format);
        self.weighted |= file.weighted;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Args, Debug, Clone)]
pub struct Dataset {
    /// CSV point cloud, or a `.json` generator descriptor.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Intrinsic dimension.
    #[arg(long)]
    pub d: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic dataset as CSV.
    Generate {
        #[arg(long)]
        family: String,
        #[arg(long)]
        d: usize,
        /// Ambient dimension.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
    /// Curvature of one simplex, or its integral over a ball.
    Curvature {
        /// mt, min, max, vol, alg or leger.
        #[arg(long, default_value = "mt")]
        kind: String,
        /// Vertices `x,y;x,y;...`; no dataset needed.
        #[arg(long, conflicts_with_all = ["dataset", "ball", "local"])]
        simplex: Option<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        d: Option<usize>,
        /// Ball `x,y,..:r`; integrates over all tuples, or over
        /// `lambda`-separated ones when `--lambda` is given.
        #[arg(long, conflicts_with = "local")]
        ball: Option<String>,
        /// Local integral over `B(x,t)` with every edge at least `lambda t`.
        #[arg(long)]
        local: Option<String>,
        /// Integrate `psin^p / diam^{d(d+1)}` instead of a squared curvature.
        #[arg(long)]
        power: Option<f64>,
        /// Enumerate every tuple instead of sampling.
        #[arg(long)]
        exact: bool,
    },
    /// Beta numbers on a grid of balls.
    Beta {
        #[command(flatten)]
        data: Dataset,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// A single ball `x,y,..:t`; otherwise the farthest-point grid.
        #[arg(long)]
        ball: Option<String>,
        #[arg(long, default_value_t = 16)]
        centers: usize,
        #[arg(long, default_value_t = 5)]
        scales: usize,
    },
    /// Multiscale flatness J_p or its tilde variant.
    Jflat {
        #[command(flatten)]
        data: Dataset,
        /// Defaults to the enclosing ball.
        #[arg(long)]
        ball: Option<String>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Sum beta^p times the mass of each ball instead of beta^2.
        #[arg(long)]
        tilde: bool,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Greedy d-separated balls in B(x, t).
    Separate {
        #[command(flatten)]
        data: Dataset,
        /// Ball `x,y,..:t`; defaults to the atom nearest the enclosing centre
        /// and half the diameter.
        #[arg(long)]
        ball: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Curvature-selected plane compared with the least-squares plane.
    Plane {
        #[command(flatten)]
        data: Dataset,
        #[arg(long)]
        ball: Option<String>,
        #[arg(long, default_value_t = 64)]
        candidates: usize,
        #[arg(long)]
        scores: bool,
    },
    /// Run an inequality suite over the ball grid.
    Verify {
        /// prop11, thm12, thm13, thm14, thm62 or leger.
        #[arg(long)]
        suite: String,
        #[command(flatten)]
        data: Dataset,
        #[arg(long)]
        centers: Option<usize>,
        #[arg(long)]
        scales: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
        /// Tuple count above which Monte Carlo replaces enumeration.
        #[arg(long)]
        exact_limit: Option<u64>,
        #[arg(long)]
        runtime: bool,
    },
}

pub fn parse_coords(field: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|c| {
            let c = c.trim();
            c.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("{field}: cannot parse `{c}` as a coordinate")))
        })
        .collect()
}

/// `x,y,..:r`
pub fn parse_ball(field: &str, s: &str) -> Result<(Vec<f64>, f64)> {
    let (c, r) = s
        .rsplit_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("{field}: expected `x,y,..:radius`, got `{s}`")))?;
    let center = parse_coords(field, c)?;
    let r: f64 = r
        .trim()
        .parse()
        .ok()
        .filter(|r: &f64| r.is_finite() && *r > 0.0)
        .ok_or_else(|| Error::InvalidInput(format!("{field}: radius `{r}` must be a positive number")))?;
    Ok((center, r))
}

pub fn parse_simplex(s: &str) -> Result<Vec<Vec<f64>>> {
    let v: Vec<Vec<f64>> = s.split(';').map(|p| parse_coords("--simplex", p)).collect::<Result<_>>()?;
    if v.iter().any(|p| p.len() != v[0].len()) {
        return Err(Error::InvalidInput("--simplex: vertices have different numbers of coordinates".into()));
    }
    Ok(v)
}

