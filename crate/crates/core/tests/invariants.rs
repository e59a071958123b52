use epnozzle::{
    fixed_point_solve, integrate_background, make_bump_boundary_data, BumpAmplitudes, FixedPointConfig, GasParams,
    Grid2D, InletState, NozzleGeometry,
};
use proptest::prelude::*;

fn inlet(u0: f64, e0: f64) -> InletState {
    InletState { rho0: 1.0, u0, p0: 1.0, e0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn admissible_backgrounds_conserve_mass_and_stay_subsonic(
        gamma in 1.4f64..3.0,
        ratio in 1.2f64..2.5,
        u0 in 0.2f64..0.6,
        e0 in -6.0f64..-3.5,
    ) {
        let gas = GasParams::new(gamma, 1.0).unwrap();
        let geom = NozzleGeometry::new(1.0, ratio, 0.5).unwrap();
        let bg = integrate_background(gas, geom, inlet(u0, e0), 401).unwrap();
        prop_assert!(bg.mass_flux_defect() < 1e-12);
        prop_assert!(bg.rho.iter().all(|&x| x > 0.0));
        prop_assert!(bg.msq.iter().all(|&m| m > 0.0 && m < 1.0));
        prop_assert_eq!(bg.r.len(), 401);
    }
}

#[test]
fn zero_data_leave_the_background_untouched() {
    let gas = GasParams::new(2.0, 1.0).unwrap();
    let geom = NozzleGeometry::new(1.0, 2.0, 0.5).unwrap();
    let bg = integrate_background(gas, geom, inlet(0.5, -3.0), 401).unwrap();
    let grid = Grid2D::new(11, 9, geom).unwrap();
    let bd = make_bump_boundary_data(&BumpAmplitudes::uniform(0.0), &bg, &grid);
    let (v, rep) = fixed_point_solve(&bd, &bg, &grid, &FixedPointConfig::default()).unwrap();
    assert!(rep.converged);
    assert_eq!(v.norm(&grid), 0.0);
}

#[test]
fn response_scales_linearly_for_small_data() {
    let gas = GasParams::new(2.0, 1.0).unwrap();
    let geom = NozzleGeometry::new(1.0, 2.0, 0.5).unwrap();
    let bg = integrate_background(gas, geom, inlet(0.5, -3.0), 801).unwrap();
    let grid = Grid2D::new(21, 17, geom).unwrap();
    let norm = |a: f64| {
        let bd = make_bump_boundary_data(&BumpAmplitudes::uniform(a), &bg, &grid);
        fixed_point_solve(&bd, &bg, &grid, &FixedPointConfig::default()).unwrap().0.norm(&grid)
    };
    let ratio = norm(2e-5) / norm(1e-5);
    assert!((ratio - 2.0).abs() < 1e-2, "ratio {ratio}");
}
