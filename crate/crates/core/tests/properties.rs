use menger_core::*;
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

/// `k` vertices in R^n.
fn tuple(k: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(coord(), n), k)
}

fn simplex(v: &[Vec<f64>]) -> Simplex {
    Simplex::new(v.iter().map(|c| Point::new(c.clone()).unwrap()).collect()).unwrap()
}

/// Rotation in the (0, 1) coordinate plane.
fn rotate(v: &[Vec<f64>], angle: f64, shift: &[f64]) -> Vec<Vec<f64>> {
    let (s, c) = angle.sin_cos();
    v.iter()
        .map(|p| {
            let mut q = p.clone();
            q[0] = c * p[0] - s * p[1];
            q[1] = s * p[0] + c * p[1];
            q.iter_mut().zip(shift).for_each(|(a, b)| *a += b);
            q
        })
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn well_shaped(x: &Simplex, d: usize) -> bool {
    x.separation_ratio(d).map(|r| r > 1e-2).unwrap_or(false)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn polar_sine_is_a_sine(v in tuple(4, 3)) {
        let x = simplex(&v);
        for i in 0..4 {
            let p = x.polar_sine(i);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn curvatures_are_rigid_motion_invariant(v in tuple(4, 3), angle in 0.0..6.3f64, shift in prop::collection::vec(coord(), 3)) {
        let x = simplex(&v);
        prop_assume!(well_shaped(&x, 2));
        let y = simplex(&rotate(&v, angle, &shift));
        for kind in CurvatureKind::ALL {
            let spec = CurvatureSpec::new(kind, 2);
            prop_assert!(close(x.curvature(&spec).unwrap(), y.curvature(&spec).unwrap(), 1e-7), "{kind}");
        }
        prop_assert!(close(x.content().unwrap(), y.content().unwrap(), 1e-9));
    }

    #[test]
    fn symmetric_kinds_ignore_vertex_order(v in tuple(4, 3), swap in 0usize..4) {
        let x = simplex(&v);
        prop_assume!(well_shaped(&x, 2));
        let mut w = v.clone();
        w.swap(swap, (swap + 1) % 4);
        let y = simplex(&w);
        for kind in [CurvatureKind::Mt, CurvatureKind::Min, CurvatureKind::Max, CurvatureKind::Vol] {
            let spec = CurvatureSpec::new(kind, 2);
            prop_assert!(close(x.curvature(&spec).unwrap(), y.curvature(&spec).unwrap(), 1e-9), "{kind}");
        }
    }

    #[test]
    fn curvature_scaling(v in tuple(3, 2), s in 0.1..10.0f64) {
        let x = simplex(&v);
        prop_assume!(well_shaped(&x, 1));
        let w: Vec<Vec<f64>> = v.iter().map(|p| p.iter().map(|c| c * s).collect()).collect();
        let y = simplex(&w);
        let spec = CurvatureSpec::mt(1);
        prop_assert!(close(y.curvature(&spec).unwrap() * s, x.curvature(&spec).unwrap(), 1e-9));
        prop_assert!(close(y.content().unwrap(), x.content().unwrap() * s * s, 1e-9));
        prop_assert!(close(y.leger_power(1).unwrap() * s.powi(2), x.leger_power(1).unwrap(), 1e-8));
    }

    #[test]
    fn mt_lies_between_min_and_max(v in tuple(5, 4)) {
        let x = simplex(&v);
        let c = |k| x.curvature(&CurvatureSpec::new(k, 3)).unwrap();
        let (lo, mt, hi) = (c(CurvatureKind::Min), c(CurvatureKind::Mt), c(CurvatureKind::Max));
        prop_assert!(lo <= mt * (1.0 + 1e-12) && mt <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn flat_tuples_have_zero_curvature(a in prop::collection::vec(coord(), 2), b in prop::collection::vec(coord(), 2), ts in prop::collection::vec(-3.0..3.0f64, 4)) {
        // four points on the line through a and b, embedded in R^3
        let v: Vec<Vec<f64>> = ts.iter().map(|t| vec![a[0] + t * b[0], a[1] + t * b[1], 0.0]).collect();
        let x = simplex(&v[..3]);
        prop_assert_eq!(x.curvature(&CurvatureSpec::mt(1)).unwrap(), 0.0);
        let y = simplex(&v);
        prop_assert_eq!(y.content().unwrap(), 0.0);
        prop_assert_eq!(y.leger_power(2).unwrap(), 0.0);
    }

    #[test]
    fn removing_a_vertex_multiplies_by_elevation(v in tuple(4, 3), i in 1usize..4) {
        let x = simplex(&v);
        prop_assume!(well_shaped(&x, 2));
        let lhs = x.polar_sine(0);
        let rhs = x.elevation_sine(i).unwrap() * x.remove(i).unwrap().polar_sine(0);
        prop_assert!(close(lhs, rhs, 1e-8));
    }

    #[test]
    fn beta_is_rigid_invariant_and_bounded(seed in 0u64..1000, angle in 0.0..6.3f64) {
        let mu = generate(&GeneratorSpec::new(Family::Sphere, 1, 2).count(60).sigma(0.05).seed(seed)).unwrap();
        let ball = mu.enclosing_ball();
        let b = beta_p(&mu, ball.center(), ball.radius(), 2.0, 1).unwrap().beta;
        prop_assert!((0.0..=1.0).contains(&b));
        let pts: Vec<Vec<f64>> = mu.points().iter().map(|p| p.coords().to_vec()).collect();
        let moved = rotate(&pts, angle, &[1.5, -2.0]);
        let nu = EmpiricalMeasure::new(moved.into_iter().map(|c| Point::new(c).unwrap()).collect(), mu.weights().to_vec(), 1).unwrap();
        let c = rotate(&[ball.center().coords().to_vec()], angle, &[1.5, -2.0]).remove(0);
        let b2 = beta_p(&nu, &Point::new(c).unwrap(), ball.radius(), 2.0, 1).unwrap().beta;
        prop_assert!(close(b, b2, 1e-6));
    }

    #[test]
    fn rescale_keeps_mass_regular(s in 0.1..10.0f64, seed in 0u64..1000) {
        let mu = generate(&GeneratorSpec::new(Family::Plane, 1, 2).count(40).sigma(0.1).seed(seed)).unwrap();
        let nu = mu.rescale(s).unwrap();
        prop_assert!(close(nu.total_mass(), mu.total_mass() * s, 1e-12));
        prop_assert!(close(nu.diameter(), mu.diameter() * s, 1e-12));
    }

    #[test]
    fn monte_carlo_is_deterministic(seed in 0u64..1000) {
        let mu = generate(&GeneratorSpec::new(Family::Sphere, 1, 2).count(30).sigma(0.02).seed(3)).unwrap();
        let ball = mu.enclosing_ball();
        let spec = IntegralSpec {
            integrand: Integrand::CurvatureSq(CurvatureSpec::mt(1)),
            domain: Domain::FullBall { ball },
            mode: Mode::MonteCarlo { samples: 500, seed },
        };
        let a = integrate(&mu, &spec).unwrap();
        let b = integrate(&mu, &spec).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert!(a.value >= 0.0);
    }
}
