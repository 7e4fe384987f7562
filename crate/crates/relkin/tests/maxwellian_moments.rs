//! Maxwellian moments against their closed forms, and recovery of the fluid
//! variables, over random backgrounds.

use proptest::prelude::*;
use relkin::grid::GridSpec;
use relkin::maxwellian::{macroscopic_decompose, moment_discrepancy, moments, sample_maxwellian, FourVelocity, MaxwellianParams};
use relkin::PhysicalConstants;

const K: PhysicalConstants = PhysicalConstants::UNIT;

fn check_moments(m: &MaxwellianParams, spec: GridSpec) -> Result<(), TestCaseError> {
    let grid = m.grid(spec).unwrap();
    let ms = moments(&sample_maxwellian(m, &grid), &grid, &K).unwrap();
    let (di, dt, ds) = moment_discrepancy(&ms, &m.closed_form_moments().unwrap());
    prop_assert!(di < 1e-6 && dt < 1e-6 && ds < 1e-6, "{} {} {}", di, dt, ds);

    let mac = macroscopic_decompose(&ms, &K).unwrap();
    let th = m.thermo().unwrap();
    prop_assert!((mac.n / m.n - 1.0).abs() < 1e-6);
    prop_assert!((mac.p / th.p - 1.0).abs() < 1e-6);
    prop_assert!((mac.rho / th.rho - 1.0).abs() < 1e-6);
    for d in 0..3 {
        prop_assert!((mac.u.0[1 + d] - m.u.0[1 + d]).abs() < 1e-6);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // Cold, fast Maxwellians are narrow and off-center; the default grid's
    // 8 x 16 angular rule stops resolving them near sqrt(z)|u|/c ~ 1.5.
    #[test]
    fn moments_match_closed_forms_on_refined_grid(
        ln_n in (-2.0f64..2.0),
        ln_z in (-1.0f64..2.5),
        ux in (-0.4f64..0.4),
        uy in (-0.4f64..0.4),
    ) {
        let u = FourVelocity::from_spatial([ux, uy, 0.1], 1.0);
        let m = MaxwellianParams::new(ln_n.exp(), ln_z.exp(), u, K).unwrap();
        check_moments(&m, GridSpec::DEFAULT.refined(2.0))?;
    }

    #[test]
    fn moments_match_closed_forms_on_default_grid(
        ln_n in (-2.0f64..2.0),
        ln_z in (-1.0f64..2.5),
        ux in (-0.12f64..0.12),
        uy in (-0.12f64..0.12),
        uz in (-0.12f64..0.12),
    ) {
        let u = FourVelocity::from_spatial([ux, uy, uz], 1.0);
        let m = MaxwellianParams::new(ln_n.exp(), ln_z.exp(), u, K).unwrap();
        check_moments(&m, GridSpec::DEFAULT)?;
    }
}

#[test]
fn dimensional_constants() {
    let k = PhysicalConstants::new(1.5, 2.0, 0.8, 1.0).unwrap();
    let u = FourVelocity::from_spatial([0.3, 0.0, -0.2], k.c);
    let m = MaxwellianParams::new(0.9, 2.0, u, k).unwrap();
    let grid = m.grid(GridSpec::DEFAULT).unwrap();
    let ms = moments(&sample_maxwellian(&m, &grid), &grid, &k).unwrap();
    let (di, dt, _) = moment_discrepancy(&ms, &m.closed_form_moments().unwrap());
    assert!(di < 1e-6 && dt < 1e-6, "{di} {dt}");
}
