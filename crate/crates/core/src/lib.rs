//! Menger-type curvatures, Jones beta numbers and multiscale flatness for
//! empirical d-regular measures.
//!
//! The crate computes discrete simplex curvatures, their integrals against a
//! weighted point cloud (exactly or by Monte Carlo), least-squares planes and
//! beta numbers, greedy separated-ball constructions, and a curvature-guided
//! plane selection, plus the generators and suites used to compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod harness;
pub mod integrals;
pub mod io;
mod kdtree;
pub mod measure;
pub mod plane_fit;
pub mod plane_select;
pub mod rng;
pub mod separation;
pub mod simplex;

pub use datasets::{generate, Family, GeneratorSpec};
pub use error::{Error, Result};
pub use harness::{verify_suite, ExperimentReport, ReportRow, Suite, SuiteConfig};
pub use integrals::{
    ball_curvature_sq, integrate, leger_integral, local_curvature_sq, psin_power_integral, Domain, IntegralResult,
    IntegralSpec, Integrand, Mode,
};
pub use io::{load_dataset, read_csv, write_csv, WeightColumn};
pub use measure::{Ball, EmpiricalMeasure, RegularityEstimate};
pub use plane_fit::{beta_p, jones_flatness, lsq_plane, BetaResult, Flavor, FlatnessResult};
pub use plane_select::{score_candidate, select_plane, CandidateScore, PlaneSelection, SelectConfig};
pub use separation::{find_separated_balls, intersection_lower_bound, SeparatedBalls};
pub use simplex::{AffinePlane, CurvatureKind, CurvatureSpec, FaceEdit, Point, Simplex};
