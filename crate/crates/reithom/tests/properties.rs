//! Property tests over randomized fields and scalar arguments.

use proptest::prelude::*;
use reithom::fields::{CellDomain, DiffScheme, GridSpec, PeriodicField};
use reithom::nfunction::{self, luxemburg_norm, LuxemburgNormRequest};
use std::f64::consts::TAU;

/// Random band-limited periodic field from a handful of Fourier modes.
fn trig_field(res: usize, coeffs: &[(usize, f64, f64)]) -> PeriodicField {
    let modes: Vec<(usize, f64, f64)> = coeffs.to_vec();
    PeriodicField::from_fn(
        CellDomain::Y,
        GridSpec::unit_cells(1, res),
        1,
        move |x, _| {
            modes
                .iter()
                .map(|&(k, a, b)| {
                    a * (TAU * k as f64 * x[0]).cos() + b * (TAU * k as f64 * x[0]).sin()
                })
                .sum()
        },
    )
}

fn mode_strategy() -> impl Strategy<Value = Vec<(usize, f64, f64)>> {
    proptest::collection::vec((1usize..6, -2.0..2.0f64, -2.0..2.0f64), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The discrete divergence theorem: the integral of the periodic
    /// derivative of any sampled field vanishes for both schemes.
    #[test]
    fn gradient_integrates_to_zero(modes in mode_strategy(), offset in -3.0..3.0f64) {
        let mut f = trig_field(64, &modes);
        for v in &mut f.values {
            *v += offset;
        }
        for scheme in [DiffScheme::Central, DiffScheme::Spectral] {
            let g = f.gradient(scheme).unwrap();
            prop_assert!(g.integrate()[0].abs() < 1e-10);
        }
    }

    /// Mean-zero projection does not change derivatives.
    #[test]
    fn projection_commutes_with_gradient(modes in mode_strategy(), offset in -3.0..3.0f64) {
        let mut f = trig_field(32, &modes);
        for v in &mut f.values {
            *v += offset;
        }
        let g1 = f.gradient(DiffScheme::Central).unwrap();
        let g2 = f.project_mean_zero().gradient(DiffScheme::Central).unwrap();
        for (a, b) in g1.values.iter().zip(&g2.values) {
            prop_assert!((a - b).abs() < 1e-11);
        }
    }

    /// Central and spectral derivatives agree to O(res^-2) on band-limited
    /// fields.
    #[test]
    fn central_matches_spectral_to_second_order(modes in mode_strategy()) {
        let res = 128;
        let f = trig_field(res, &modes);
        let gc = f.gradient(DiffScheme::Central).unwrap();
        let gs = f.gradient(DiffScheme::Spectral).unwrap();
        // worst-case bound: sum_k |coef| (2 pi k)^3 / (6 res^2)
        let bound: f64 = modes
            .iter()
            .map(|&(k, a, b)| (a.abs() + b.abs()) * (TAU * k as f64).powi(3))
            .sum::<f64>()
            / (6.0 * (res * res) as f64)
            + 1e-10;
        for (a, b) in gc.values.iter().zip(&gs.values) {
            prop_assert!((a - b).abs() <= bound, "dev {} > bound {}", (a - b).abs(), bound);
        }
    }

    /// Luxemburg norms scale homogeneously.
    #[test]
    fn luxemburg_norm_is_homogeneous(
        modes in mode_strategy(),
        lambda in prop::sample::select(vec![0.5f64, 2.0, 10.0]),
    ) {
        let f = trig_field(128, &modes);
        let mags: Vec<f64> = f.values.iter().map(|v| v.abs() + 0.05).collect();
        let nf = nfunction::square().unwrap();
        let base = luxemburg_norm(
            &nf,
            &LuxemburgNormRequest::new(&mags, 1.0).unwrap(),
            1e-12,
        ).unwrap();
        let scaled: Vec<f64> = mags.iter().map(|v| lambda * v).collect();
        let s = luxemburg_norm(
            &nf,
            &LuxemburgNormRequest::new(&scaled, 1.0).unwrap(),
            1e-12,
        ).unwrap();
        prop_assert!((s - lambda * base).abs() <= 1e-7 * lambda * base.max(1e-6));
    }

    /// Young's inequality s t <= B(s) + Bconj(t) across catalog generators.
    #[test]
    fn young_inequality(
        s in 1e-2..50.0f64,
        t in 1e-2..50.0f64,
        p in prop::sample::select(vec![1.5f64, 2.0, 3.0, 4.0]),
    ) {
        let nf = nfunction::power(p).unwrap();
        let conj = nf.conjugate_nfunction(1e-12);
        let rhs = nf.b(s) + conj.b(t);
        prop_assert!(s * t <= rhs + 1e-8 * rhs.max(1.0));
    }

    /// The sampled integrand respects the convexity subgradient inequality.
    #[test]
    fn integrand_subgradient_inequality(
        z in -0.5..0.5f64,
        xi1 in -4.0..4.0f64,
        xi2 in -4.0..4.0f64,
    ) {
        use reithom::integrand::{catalog, CatalogParams};
        let ig = catalog("quadratic_laminate", &CatalogParams::default()).unwrap();
        let f1 = ig.eval_f(&[0.1], &[z], &[xi1]).unwrap();
        let f2 = ig.eval_f(&[0.1], &[z], &[xi2]).unwrap();
        let g = ig.grad_f(&[0.1], &[z], &[xi1]).unwrap();
        prop_assert!(f2 >= f1 + g[0] * (xi2 - xi1) - 1e-9);
    }
}
