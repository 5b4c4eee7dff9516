use std::f64::consts::PI;

use proptest::prelude::*;

use dma_nearfield::array_model::{ArrayConfig, DistanceMode, SphericalPosition};
use dma_nearfield::gain::{kernel_k, relative_gain_oracle};
use dma_nearfield::specfun::quadrature::{quadrature_oracle, Integrand, Tolerance};

fn user() -> impl Strategy<Value = SphericalPosition> {
    (2.0f64..40.0, -PI..PI, 0.1f64..PI - 0.1).prop_map(|(r, phi, theta)| SphericalPosition::new(r, phi, theta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_is_one_when_focused_on_user(pos in user(), w in 0.0f64..10.0) {
        let cfg = ArrayConfig::reference().with_w(w).unwrap();
        let g = relative_gain_oracle(&cfg, &pos, &pos, DistanceMode::Exact);
        prop_assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_is_bounded_and_beta_free(pos in user(), dr in 0.0f64..20.0, w in 0.0f64..10.0, b in 1.0f64..5.0) {
        let cfg = ArrayConfig::reference().with_w(w).unwrap();
        let other = cfg.with_beta(b * PI / cfg.wavelength).unwrap();
        let focus = pos.with_range(pos.r + dr).unwrap();
        let g = relative_gain_oracle(&cfg, &pos, &focus, DistanceMode::Exact);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
        prop_assert_eq!(g, relative_gain_oracle(&other, &pos, &focus, DistanceMode::Exact));
    }

    #[test]
    fn kernel_matches_quadrature(x in 0.0f64..12.0, w in 0.0f64..15.0) {
        let q = quadrature_oracle(&Integrand::LossyChirp { c: x * x, w }, -0.5, 0.5, Tolerance::new(1e-300, 1e-13))
            .unwrap()
            .value
            .norm()
            * (-w).exp();
        prop_assert!((kernel_k(x, w) - q).abs() <= 1e-10 * q.max(1e-6));
    }
}
