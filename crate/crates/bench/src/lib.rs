//! Fixtures shared by the benchmarks.

use menger_core::{generate, EmpiricalMeasure, Family, GeneratorSpec, Point, Simplex};

pub fn sphere(d: usize, n: usize, count: usize) -> EmpiricalMeasure {
    generate(&GeneratorSpec::new(Family::Sphere, d, n).count(count).sigma(0.01).seed(1)).expect("sphere fixture")
}

pub fn plane(d: usize, n: usize, count: usize) -> EmpiricalMeasure {
    generate(&GeneratorSpec::new(Family::Plane, d, n).count(count).sigma(0.05).seed(1)).expect("plane fixture")
}

/// `k` vertices of a fixed, well-shaped simplex in R^n.
pub fn simplex(k: usize, n: usize) -> Simplex {
    let v = (0..k)
        .map(|i| {
            let c = (0..n).map(|j| ((i * 7 + j * 3) % 11) as f64 / 11.0 + if i == j + 1 { 1.0 } else { 0.0 }).collect();
            Point::new(c).unwrap()
        })
        .collect();
    Simplex::new(v).unwrap()
}
