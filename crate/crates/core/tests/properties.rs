use proptest::prelude::*;

use ksmotility::fields::{exp_integral, grad_sq_integral, integrate, mean};
use ksmotility::grid::{laplacian_neumann, solve_helmholtz, solve_weighted_implicit};
use ksmotility::initdata::{bubble_pair, max_face_difference, random_perturbation, BubbleSpec};
use ksmotility::solver::step;
use ksmotility::{Field, Grid, ModelParams, State, StepControl};

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (2usize..12, 2usize..12, 0.5f64..3.0, 0.5f64..3.0)
        .prop_map(|(nx, ny, lx, ly)| Grid::new(nx, ny, lx, ly).unwrap())
}

fn field_on(g: Grid, lo: f64, hi: f64) -> impl Strategy<Value = Field> {
    proptest::collection::vec(lo..hi, g.len()).prop_map(move |v| Field::new(g, v).unwrap())
}

fn grid_and_field(lo: f64, hi: f64) -> impl Strategy<Value = Field> {
    grid_strategy().prop_flat_map(move |g| field_on(g, lo, hi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_integrates_to_zero(f in grid_and_field(-5.0, 5.0)) {
        let l = laplacian_neumann(&f).unwrap();
        let scale: f64 = l.values().iter().map(|x| x.abs()).sum::<f64>() * f.grid().cell_area();
        prop_assert!(integrate(&l).abs() <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn helmholtz_round_trip(f in grid_and_field(-2.0, 2.0), a in 0.1f64..50.0) {
        let x = solve_helmholtz(a, &f, 1e-12).unwrap();
        let lx = laplacian_neumann(&x).unwrap();
        let worst = x
            .values()
            .iter()
            .zip(lx.values())
            .zip(f.values())
            .map(|((xi, li), fi)| (a * xi - li - fi).abs())
            .fold(0.0, f64::max);
        prop_assert!(worst <= 1e-8, "residual {}", worst);
    }

    #[test]
    fn weighted_implicit_keeps_sign_and_mass(
        (u, gamma) in grid_strategy().prop_flat_map(|g| (field_on(g, 0.0, 10.0), field_on(g, 1e-3, 1.0))),
        dt in 1e-3f64..1.0,
    ) {
        let a = 1.0 / dt;
        let rhs = u.map(|x| a * x);
        let next = solve_weighted_implicit(a, &gamma, &rhs, 1e-12).unwrap();
        prop_assert!(next.min() >= -1e-14);
        let m0 = integrate(&u);
        prop_assert!((integrate(&next) - m0).abs() <= 1e-12 * m0.max(1.0));
    }

    #[test]
    fn poincare_ratio_is_at_least_first_eigenvalue(f in grid_and_field(-3.0, 3.0)) {
        // discrete Neumann spectral gap on the coarsest axis
        let g = f.grid();
        let m = mean(&f);
        let c = f.map(|x| x - m);
        let l2: f64 = c.values().iter().map(|x| x * x).sum::<f64>() * g.cell_area();
        prop_assume!(l2 > 1e-12);
        let gap = |n: usize, h: f64| (2.0 / h * (std::f64::consts::PI / (2.0 * n as f64)).sin()).powi(2);
        let lambda1 = gap(g.nx(), g.hx()).min(gap(g.ny(), g.hy()));
        prop_assert!(grad_sq_integral(&c) >= lambda1 * l2 * (1.0 - 1e-10));
    }

    #[test]
    fn exp_integral_obeys_jensen(f in grid_and_field(-3.0, 3.0), a in -2.0f64..2.0) {
        let area = f.grid().area();
        let lhs = exp_integral(&f, a) / area;
        let rhs = (a * mean(&f)).exp();
        prop_assert!(lhs >= rhs * (1.0 - 1e-12));
    }

    #[test]
    fn step_preserves_positivity(
        seed in any::<u64>(),
        mass in 0.1f64..40.0,
        amp in 0.0f64..1.5,
        chi in 0.1f64..4.0,
        dt in 1e-3f64..0.5,
    ) {
        let g = Grid::unit_square(10).unwrap();
        let (u, v) = random_perturbation(mass, amp, seed, &g).unwrap();
        let p = ModelParams::exponential(chi).unwrap();
        let s = State::new(u, v, 0.0).unwrap();
        let next = step(&s, &p, dt, &StepControl::fixed(dt)).unwrap();
        prop_assert!(next.u.min() >= -1e-14 && next.v.min() >= -1e-14);
        prop_assert!((next.mass() - s.mass()).abs() <= 1e-10 * s.mass());
    }
}

fn bubble(eps: f64, n: usize) -> ksmotility::initdata::BubblePair {
    let g = Grid::unit_square(n).unwrap();
    bubble_pair(
        &BubbleSpec {
            epsilon: eps,
            x0: (0.0, 0.5),
            mass: 4.0,
            chi: 1.5,
        },
        &g,
    )
    .unwrap()
}

#[test]
fn bubble_is_radially_decreasing() {
    let b = bubble(0.1, 48);
    let g = *b.u.grid();
    let mut cells: Vec<(f64, f64)> = g
        .centers()
        .zip(b.u.values())
        .map(|((x, y), &u)| ((x * x + (y - 0.5) * (y - 0.5)).sqrt(), u))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in cells.windows(2) {
        if w[1].0 > w[0].0 + 1e-12 {
            assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12), "{:?}", w);
        }
    }
}

#[test]
fn bubble_sharpens_as_epsilon_shrinks() {
    let peaks: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&e| bubble(e, 64).u.max())
        .collect();
    assert!(peaks.windows(2).all(|w| w[1] > w[0]), "{peaks:?}");
    for e in [0.4, 0.2, 0.1, 0.05] {
        let b = bubble(e, 64);
        assert!(max_face_difference(&b.v).is_finite());
        assert!(max_face_difference(&b.u).is_finite());
    }
}
