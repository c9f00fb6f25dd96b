//! Empirical reiterated two-scale convergence: pairings of oscillating
//! sequences against periodic test functions, Luxemburg-norm convergence,
//! averaging consistency, and the constructed sequences that realize the
//! hessian decomposition at order two.
//!
//! Everything here is one-dimensional in the macroscopic variable and built
//! on commensurate dyadic scales, so oscillations are grid-exact and the
//! quadrature never aliases. Incommensurate epsilon values are refused.

use crate::error::{Error, Result};
use crate::fields::{kahan_sum, wrap_unit, Generator3, MacroGrid, PeriodicField};
use crate::integrand::Order;
use crate::nfunction::{luxemburg_norm, LuxemburgNormRequest, NFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A sequence u_eps(x) = v(x, x/eps, x/eps^2) produced by a smooth generator
/// that is periodic in its second and third slots.
#[derive(Clone)]
pub struct OscillatingSequence {
    pub generator: Generator3,
    pub epsilon_list: Vec<f64>,
    pub macro_grid: MacroGrid,
}

impl OscillatingSequence {
    pub fn new(
        generator: Generator3,
        epsilon_list: Vec<f64>,
        macro_grid: MacroGrid,
    ) -> Result<Self> {
        if macro_grid.space != 1 {
            return Err(Error::Contract(
                "oscillating sequences are implemented over a 1-D macroscopic domain".into(),
            ));
        }
        let seq = OscillatingSequence {
            generator,
            epsilon_list,
            macro_grid,
        };
        for &eps in &seq.epsilon_list {
            seq.macro_grid.check_commensurate(eps)?;
        }
        Ok(seq)
    }

    /// Sample u_eps at the midpoint quadrature nodes of the macro grid.
    fn samples(&self, epsilon: f64) -> Vec<f64> {
        let n = self.macro_grid.n;
        let h = self.macro_grid.h();
        let eps2 = epsilon * epsilon;
        (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                (self.generator)(x, wrap_unit(x / epsilon), wrap_unit(x / eps2))
            })
            .collect()
    }
}

/// Midpoint quadrature of g(x, y, z) over Omega x Y x Z.
pub fn triple_integral(g: &(dyn Fn(f64, f64, f64) -> f64 + Sync), length: f64, res: usize) -> f64 {
    let hx = length / res as f64;
    let total: f64 = (0..res)
        .into_par_iter()
        .map(|i| {
            let x = (i as f64 + 0.5) * hx;
            let mut acc = 0.0;
            for j in 0..res {
                let y = -0.5 + (j as f64 + 0.5) / res as f64;
                for k in 0..res {
                    let z = -0.5 + (k as f64 + 0.5) / res as f64;
                    acc += g(x, y, z);
                }
            }
            acc / (res * res) as f64
        })
        .sum();
    total * hx
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingRow {
    pub epsilon: f64,
    pub pairing: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingStudy {
    pub rows: Vec<PairingRow>,
    /// Richardson extrapolation of the pairing values along the epsilon list
    /// (first order in epsilon; equals the last value when the list is short).
    pub limit_estimate: f64,
}

/// int_Omega u_eps(x) test(x, x/eps, x/eps^2) dx for each epsilon, plus the
/// extrapolated limit.
pub fn two_scale_pair(
    seq: &OscillatingSequence,
    test: &(dyn Fn(f64, f64, f64) -> f64 + Sync),
) -> Result<PairingStudy> {
    let n = seq.macro_grid.n;
    let h = seq.macro_grid.h();
    let mut rows = Vec::with_capacity(seq.epsilon_list.len());
    for &epsilon in &seq.epsilon_list {
        seq.macro_grid.check_commensurate(epsilon)?;
        let u = seq.samples(epsilon);
        let eps2 = epsilon * epsilon;
        let pairing = h * kahan_sum((0..n).map(|i| {
            let x = (i as f64 + 0.5) * h;
            u[i] * test(x, wrap_unit(x / epsilon), wrap_unit(x / eps2))
        }));
        rows.push(PairingRow { epsilon, pairing });
    }
    let limit_estimate = richardson_limit(&rows);
    Ok(PairingStudy {
        rows,
        limit_estimate,
    })
}

/// First-order Richardson extrapolation over the last two entries of a
/// dyadic-ish epsilon list: p(eps) ~ L + C eps gives
/// L ~ (e1 p2 - e2 p1) / (e1 - e2).
fn richardson_limit(rows: &[PairingRow]) -> f64 {
    match rows.len() {
        0 => f64::NAN,
        1 => rows[0].pairing,
        _ => {
            let a = &rows[rows.len() - 2];
            let b = &rows[rows.len() - 1];
            if (a.epsilon - b.epsilon).abs() < 1e-300 {
                b.pairing
            } else {
                (a.epsilon * b.pairing - b.epsilon * a.pairing) / (a.epsilon - b.epsilon)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormRow {
    pub epsilon: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormStudy {
    pub rows: Vec<NormRow>,
    /// Luxemburg norm of the generator over the triple domain.
    pub target: f64,
}

/// Luxemburg norms of u_eps on Omega per epsilon together with the
/// triple-domain norm of the generator they converge to.
pub fn luxemburg_limit_check(
    seq: &OscillatingSequence,
    nf: &NFunction,
    triple_res: usize,
    tol: f64,
) -> Result<NormStudy> {
    let rows: Result<Vec<NormRow>> = seq
        .epsilon_list
        .iter()
        .map(|&epsilon| {
            let u = seq.samples(epsilon);
            let mags: Vec<f64> = u.iter().map(|v| v.abs()).collect();
            let req = LuxemburgNormRequest::new(&mags, seq.macro_grid.measure())?;
            Ok(NormRow {
                epsilon,
                norm: luxemburg_norm(nf, &req, tol)?,
            })
        })
        .collect();
    // generator magnitudes on the Omega x Y x Z grid
    let res = triple_res;
    let length = seq.macro_grid.length;
    let hx = length / res as f64;
    let mut mags = Vec::with_capacity(res * res * res);
    for i in 0..res {
        let x = (i as f64 + 0.5) * hx;
        for j in 0..res {
            let y = -0.5 + (j as f64 + 0.5) / res as f64;
            for k in 0..res {
                let z = -0.5 + (k as f64 + 0.5) / res as f64;
                mags.push((seq.generator)(x, y, z).abs());
            }
        }
    }
    let req = LuxemburgNormRequest::new(&mags, length)?;
    let target = luxemburg_norm(nf, &req, tol)?;
    Ok(NormStudy {
        rows: rows?,
        target,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragingRow {
    pub epsilon: f64,
    /// Pairing against the x-only test vs the doubly averaged limit.
    pub pairing_x: f64,
    pub target_x: f64,
    /// Pairing against the (x, y) test vs the z-averaged limit.
    pub pairing_xy: f64,
    pub target_xy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragingReport {
    pub rows: Vec<AveragingRow>,
}

/// Check the two averaging relations: pairing with z-independent tests
/// converges to the pairing of the z-average of the limit, and pairing with
/// x-only tests to that of the double average.
pub fn averaging_consistency(
    seq: &OscillatingSequence,
    test_x: &(dyn Fn(f64) -> f64 + Sync),
    test_xy: &(dyn Fn(f64, f64) -> f64 + Sync),
    quad_res: usize,
) -> Result<AveragingReport> {
    let target_x = triple_integral(
        &|x, y, z| (seq.generator)(x, y, z) * test_x(x),
        seq.macro_grid.length,
        quad_res,
    );
    let target_xy = triple_integral(
        &|x, y, z| (seq.generator)(x, y, z) * test_xy(x, y),
        seq.macro_grid.length,
        quad_res,
    );
    let mut rows = Vec::new();
    for &epsilon in &seq.epsilon_list {
        let n = seq.macro_grid.n;
        let h = seq.macro_grid.h();
        let u = seq.samples(epsilon);
        let pairing_x = h * kahan_sum((0..n).map(|i| {
            let x = (i as f64 + 0.5) * h;
            u[i] * test_x(x)
        }));
        let pairing_xy = h * kahan_sum((0..n).map(|i| {
            let x = (i as f64 + 0.5) * h;
            u[i] * test_xy(x, wrap_unit(x / epsilon))
        }));
        rows.push(AveragingRow {
            epsilon,
            pairing_x,
            target_x,
            pairing_xy,
            target_xy,
        });
    }
    Ok(AveragingReport { rows })
}

/// Sample the recovery competitor u(x) + eps phi(x/eps) + eps^2 psi(x/eps,
/// x/eps^2) at the macro node grid (n + 1 nodes). phi lives on Y, psi on
/// Y x Z; both are interpolated multilinearly.
pub fn build_recovery_s1(
    u: &(dyn Fn(f64) -> f64 + Sync),
    phi: &PeriodicField,
    psi: &PeriodicField,
    epsilon: f64,
    grid: &MacroGrid,
) -> Result<Vec<f64>> {
    grid.check_commensurate(epsilon)?;
    if phi.grid.ndim() != 1 || psi.grid.ndim() != 2 {
        return Err(Error::Contract(
            "recovery builder expects phi on Y and psi on Y x Z".into(),
        ));
    }
    let n = grid.n;
    let h = grid.h();
    let eps2 = epsilon * epsilon;
    Ok((0..=n)
        .map(|i| {
            let x = i as f64 * h;
            let y = wrap_unit(x / epsilon);
            let z = wrap_unit(x / eps2);
            u(x) + epsilon * phi.interp(&[y], 0) + eps2 * psi.interp(&[y, z], 0)
        })
        .collect())
}

/// Constructed limit triple for the order-two decomposition: a macroscopic
/// profile u, a Y-periodic corrector U, and a Y x Z-periodic corrector W,
/// all given as smooth closures.
#[derive(Clone)]
pub struct CorrectorTriple {
    pub u: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub u_corr: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub w_corr: Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    pub order: Order,
}

impl CorrectorTriple {
    pub fn new(
        u: impl Fn(f64) -> f64 + Send + Sync + 'static,
        u_corr: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        w_corr: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CorrectorTriple {
            u: Arc::new(u),
            u_corr: Arc::new(u_corr),
            w_corr: Arc::new(w_corr),
            order: Order::Two,
        }
    }
}

/// Sample u_eps = u + eps^2 U(x, x/eps) + eps^4 W(x, x/eps, x/eps^2) at the
/// node grid; its hessian carries D^2 u + D^2_y U + D^2_z W to leading order.
pub fn build_recovery_s2(ct: &CorrectorTriple, epsilon: f64, grid: &MacroGrid) -> Result<Vec<f64>> {
    grid.check_commensurate(epsilon)?;
    let n = grid.n;
    let h = grid.h();
    let eps2 = epsilon * epsilon;
    let eps4 = eps2 * eps2;
    Ok((0..=n)
        .map(|i| {
            let x = i as f64 * h;
            (ct.u)(x)
                + eps2 * (ct.u_corr)(x, wrap_unit(x / epsilon))
                + eps4 * (ct.w_corr)(x, wrap_unit(x / epsilon), wrap_unit(x / eps2))
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Row {
    pub epsilon: f64,
    pub pairing: f64,
    pub target: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub rows: Vec<Theorem1Row>,
}

/// Pair the discrete hessian of the constructed sequence against a test
/// function and compare with the triple integral of
/// (D^2 u + D^2_y U + D^2_z W) * test. Reports the residual per epsilon.
pub fn verify_theorem1(
    ct: &CorrectorTriple,
    epsilon_list: &[f64],
    test: &(dyn Fn(f64, f64, f64) -> f64 + Sync),
    res_per_period: usize,
    target_res: usize,
) -> Result<Theorem1Report> {
    // second derivatives of the closures by small-step central differences,
    // independent of the sampling grids
    let fd = 1e-4;
    let u = ct.u.clone();
    let uc = ct.u_corr.clone();
    let wc = ct.w_corr.clone();
    let limit_hessian = move |x: f64, y: f64, z: f64| -> f64 {
        let uxx = (u(x + fd) - 2.0 * u(x) + u(x - fd)) / (fd * fd);
        let uyy = (uc(x, y + fd) - 2.0 * uc(x, y) + uc(x, y - fd)) / (fd * fd);
        let wzz = (wc(x, y, z + fd) - 2.0 * wc(x, y, z) + wc(x, y, z - fd)) / (fd * fd);
        uxx + uyy + wzz
    };
    let target = triple_integral(
        &|x, y, z| limit_hessian(x, y, z) * test(x, y, z),
        1.0,
        target_res,
    );

    let mut rows = Vec::new();
    for &epsilon in epsilon_list {
        let fast = 1.0 / (epsilon * epsilon);
        let n = (res_per_period as f64 * fast).round() as usize;
        let grid = MacroGrid::new(
            1,
            1.0,
            n,
            crate::fields::BoundaryData::Affine {
                gradient: vec![0.0],
            },
        );
        grid.check_commensurate(epsilon)?;
        let h = grid.h();
        let eps2 = epsilon * epsilon;
        let eps4 = eps2 * eps2;
        // sample with two ghost nodes on each side so the discrete hessian is
        // central everywhere on [0, L]
        let sample = |i: isize| -> f64 {
            let x = i as f64 * h;
            (ct.u)(x)
                + eps2 * (ct.u_corr)(x, wrap_unit(x / epsilon))
                + eps4 * (ct.w_corr)(x, wrap_unit(x / epsilon), wrap_unit(x / eps2))
        };
        // trapezoid pairing of the discrete hessian with the test
        let pairing = h * kahan_sum((0..=n as isize).map(|i| {
            let x = i as f64 * h;
            let upp = (sample(i + 1) - 2.0 * sample(i) + sample(i - 1)) / (h * h);
            let w = if i == 0 || i == n as isize { 0.5 } else { 1.0 };
            w * upp * test(x, wrap_unit(x / epsilon), wrap_unit(x / eps2))
        }));
        rows.push(Theorem1Row {
            epsilon,
            pairing,
            target,
            residual: (pairing - target).abs(),
        });
    }
    Ok(Theorem1Report { rows })
}

/// Named generators for the command-line interface.
pub fn generator_by_name(name: &str) -> Result<Generator3> {
    let tau = std::f64::consts::TAU;
    Ok(match name {
        "cos_fast" => Arc::new(move |_x, _y, z| (tau * z).cos()),
        "sin_slow" => Arc::new(move |_x, y, _z| (tau * y).sin()),
        "x_cos_slow" => Arc::new(move |x, y, _z| x * (tau * y).cos()),
        "shifted_slow" => Arc::new(move |_x, y, _z| 2.0 + (tau * y).cos()),
        "x_sin_slow" => Arc::new(move |x, y, _z| x * (tau * y).sin()),
        "cosy_cosz" => Arc::new(move |_x, y, z| (tau * y).cos() * (tau * z).cos()),
        "x_over_shifted" => Arc::new(move |x, y, _z| x / (2.0 + (tau * y).sin())),
        _ => {
            return Err(Error::Config(format!(
                "unknown sequence generator {name:?}"
            )))
        }
    })
}

/// Named test functions for the command-line interface.
pub fn test_by_name(name: &str) -> Result<Generator3> {
    let tau = std::f64::consts::TAU;
    Ok(match name {
        "one" => Arc::new(move |_x, _y, _z| 1.0),
        "cos_y" => Arc::new(move |_x, y, _z| (tau * y).cos()),
        "sin_y" => Arc::new(move |_x, y, _z| (tau * y).sin()),
        "cos_z" => Arc::new(move |_x, _y, z| (tau * z).cos()),
        "cosy_cosz" => Arc::new(move |_x, y, z| (tau * y).cos() * (tau * z).cos()),
        "inv_shifted" => Arc::new(move |_x, y, _z| 1.0 / (2.0 + (tau * y).sin()).powi(2)),
        _ => return Err(Error::Config(format!("unknown test function {name:?}"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid(n: usize) -> MacroGrid {
        MacroGrid::unit_affine_1d(n, 0.0)
    }

    fn seq(gen: Generator3, eps: Vec<f64>, n: usize) -> OscillatingSequence {
        OscillatingSequence::new(gen, eps, grid(n)).unwrap()
    }

    #[test]
    fn pairing_fast_cosine_orthogonality() {
        // u_eps = cos(2 pi x / eps^2) against cos(2 pi z): pairings -> 1/2
        let s = seq(
            Arc::new(|_x, _y, z| (TAU * z).cos()),
            vec![0.25, 0.125],
            8 * 64,
        );
        let study = two_scale_pair(&s, &|_x, _y, z| (TAU * z).cos()).unwrap();
        for row in &study.rows {
            assert!(
                (row.pairing - 0.5).abs() < 1e-12,
                "eps {}: {}",
                row.epsilon,
                row.pairing
            );
        }
        assert!((study.limit_estimate - 0.5).abs() < 1e-10);
    }

    #[test]
    fn pairing_full_periods_vanish() {
        let s = seq(
            Arc::new(|_x, y, _z| (TAU * y).sin()),
            vec![0.25, 0.125],
            8 * 64,
        );
        let study = two_scale_pair(&s, &|_x, _y, _z| 1.0).unwrap();
        for row in &study.rows {
            assert!(row.pairing.abs() < 1e-13);
        }
    }

    #[test]
    fn pairing_slow_modulated_cosine() {
        // u_eps = x cos(2 pi x / eps), test cos(2 pi y): limit 1/4
        let s = seq(
            Arc::new(|x, y, _z| x * (TAU * y).cos()),
            vec![0.25, 0.125, 0.0625],
            8 * 256,
        );
        let study = two_scale_pair(&s, &|_x, y, _z| (TAU * y).cos()).unwrap();
        let last = study.rows.last().unwrap();
        assert!((last.pairing - 0.25).abs() < 1e-4, "{}", last.pairing);
        assert!((study.limit_estimate - 0.25).abs() < 1e-5);
    }

    #[test]
    fn pairing_is_linear_in_the_test() {
        let s = seq(Arc::new(|x, _y, z| x + (TAU * z).cos()), vec![0.25], 8 * 16);
        let t1 = |_x: f64, y: f64, _z: f64| (TAU * y).cos();
        let t2 = |_x: f64, _y: f64, z: f64| (TAU * z).sin();
        let p1 = two_scale_pair(&s, &t1).unwrap().rows[0].pairing;
        let p2 = two_scale_pair(&s, &t2).unwrap().rows[0].pairing;
        let combined = two_scale_pair(&s, &|x, y, z| 2.0 * t1(x, y, z) - 3.0 * t2(x, y, z))
            .unwrap()
            .rows[0]
            .pairing;
        assert!((combined - (2.0 * p1 - 3.0 * p2)).abs() < 1e-13);
    }

    #[test]
    fn incommensurate_epsilon_refused() {
        let err = OscillatingSequence::new(Arc::new(|_x, _y, _z| 1.0), vec![1.0 / 3.0], grid(512));
        assert!(matches!(err, Err(Error::Incommensurate(_))));
        // eps = 2^-4 needs 1/eps^2 = 256 to divide n
        let err = OscillatingSequence::new(Arc::new(|_x, _y, _z| 1.0), vec![0.0625], grid(384));
        assert!(matches!(err, Err(Error::Incommensurate(_))));
    }

    #[test]
    fn pairing_residual_order_at_least_one() {
        // generator with a genuinely epsilon-dependent pairing: residual ~ C eps
        let s = seq(
            Arc::new(|x, y, _z| x / (2.0 + (TAU * y).sin())),
            vec![0.25, 0.125, 0.0625],
            8 * 256,
        );
        let test = |_x: f64, y: f64, _z: f64| 1.0 / (2.0 + (TAU * y).sin()).powi(2);
        let target = triple_integral(
            &|x, y, z| {
                let _ = z;
                x / (2.0 + (TAU * y).sin()) * test(x, y, z)
            },
            1.0,
            256,
        );
        let study = two_scale_pair(&s, &test).unwrap();
        let residuals: Vec<f64> = study
            .rows
            .iter()
            .map(|r| (r.pairing - target).abs())
            .collect();
        for w in residuals.windows(2) {
            assert!(w[1] < w[0], "residuals not decreasing: {residuals:?}");
        }
        // fitted order >= 1
        let rate = ((residuals[0] / residuals[2]).ln()) / ((0.25f64 / 0.0625).ln());
        assert!(rate >= 0.99, "rate {rate}");
    }

    #[test]
    fn luxemburg_norm_convergence_for_fast_cosine() {
        let nf = crate::nfunction::square().unwrap();
        let s = seq(
            Arc::new(|_x, _y, z| (TAU * z).cos()),
            vec![0.25, 0.125],
            8 * 64,
        );
        let study = luxemburg_limit_check(&s, &nf, 48, 1e-10).unwrap();
        let expect = 0.5f64.sqrt();
        for row in &study.rows {
            assert!(
                (row.norm - expect).abs() < 1e-6,
                "eps {}: {}",
                row.epsilon,
                row.norm
            );
        }
        assert!((study.target - expect).abs() < 1e-6);
    }

    #[test]
    fn luxemburg_norm_constant_generator() {
        let nf = crate::nfunction::square().unwrap();
        let s = seq(Arc::new(|_x, _y, _z| 3.0), vec![0.5, 0.25], 64);
        let study = luxemburg_limit_check(&s, &nf, 16, 1e-10).unwrap();
        for row in &study.rows {
            assert!((row.norm - 3.0).abs() < 1e-8);
        }
        assert!((study.target - 3.0).abs() < 1e-8);
    }

    #[test]
    fn luxemburg_norm_product_generator() {
        let nf = crate::nfunction::square().unwrap();
        let s = seq(
            Arc::new(|_x, y, z| (TAU * y).cos() * (TAU * z).cos()),
            vec![0.125],
            8 * 64,
        );
        let study = luxemburg_limit_check(&s, &nf, 48, 1e-10).unwrap();
        assert!((study.target - 0.5).abs() < 1e-6, "target {}", study.target);
        assert!((study.rows[0].norm - 0.5).abs() < 1e-6);
    }

    #[test]
    fn averaging_relations() {
        // u_eps = cos(2 pi x/eps^2), test 1: everything vanishes
        let s = seq(
            Arc::new(|_x, _y, z| (TAU * z).cos()),
            vec![0.25, 0.125],
            8 * 64,
        );
        let rep = averaging_consistency(&s, &|_x| 1.0, &|_x, _y| 1.0, 64).unwrap();
        for row in &rep.rows {
            assert!(row.pairing_x.abs() < 1e-12 && row.target_x.abs() < 1e-12);
        }

        // u_eps = 2 + cos(2 pi x/eps): double average 2
        let s = seq(
            Arc::new(|_x, y, _z| 2.0 + (TAU * y).cos()),
            vec![0.25, 0.125],
            8 * 64,
        );
        let rep = averaging_consistency(&s, &|_x| 1.0, &|_x, _y| 1.0, 64).unwrap();
        for row in &rep.rows {
            assert!((row.pairing_x - 2.0).abs() < 1e-12);
            assert!((row.target_x - 2.0).abs() < 1e-12);
        }

        // u_eps = x sin(2 pi x/eps) against sin(2 pi y): 1/4
        let s = seq(
            Arc::new(|x, y, _z| x * (TAU * y).sin()),
            vec![0.0625],
            8 * 256,
        );
        let rep = averaging_consistency(&s, &|_x| 1.0, &|_x, y| (TAU * y).sin(), 128).unwrap();
        let row = &rep.rows[0];
        assert!((row.target_xy - 0.25).abs() < 1e-6);
        assert!((row.pairing_xy - 0.25).abs() < 1e-3, "{}", row.pairing_xy);
    }

    #[test]
    fn recovery_with_zero_correctors_is_exact() {
        use crate::fields::{AxisSpec, CellDomain, GridSpec};
        let phi = PeriodicField::zeros(CellDomain::Y, GridSpec::unit_cells(1, 32), 1);
        let psi = PeriodicField::zeros(
            CellDomain::YxZ,
            GridSpec::new(vec![AxisSpec::unit_cell(16), AxisSpec::unit_cell(16)]),
            1,
        );
        let g = MacroGrid::unit_affine_1d(8 * 16, 1.0);
        let rec = build_recovery_s1(&|x| 3.0 * x, &phi, &psi, 0.25, &g).unwrap();
        for (i, v) in rec.iter().enumerate() {
            let x = i as f64 * g.h();
            assert!((v - 3.0 * x).abs() < 1e-14);
        }
    }

    #[test]
    fn recovery_gradient_identity() {
        use crate::fields::{AxisSpec, CellDomain, DiffScheme, GridSpec};
        // phi, psi smooth band-limited correctors: discrete gradient of the
        // recovery equals Du + (D phi)^eps + (D_z psi)^eps up to O(eps)
        let phi = PeriodicField::from_fn(CellDomain::Y, GridSpec::unit_cells(1, 256), 1, |p, _| {
            (TAU * p[0]).sin() / TAU
        });
        let psi = PeriodicField::from_fn(
            CellDomain::YxZ,
            GridSpec::new(vec![AxisSpec::unit_cell(64), AxisSpec::unit_cell(64)]),
            1,
            |p, _| (TAU * p[0]).cos() * (TAU * p[1]).sin() / TAU,
        );
        let dphi = phi.gradient(DiffScheme::Spectral).unwrap();
        let dpsi = psi.gradient(DiffScheme::Spectral).unwrap();
        let epsilon = 1.0 / 16.0;
        let n = 8 * 256;
        let g = MacroGrid::unit_affine_1d(n, 1.0);
        let rec = build_recovery_s1(&|x| x, &phi, &psi, epsilon, &g).unwrap();
        let h = g.h();
        let eps2 = epsilon * epsilon;
        let mut max_dev = 0.0f64;
        for i in 0..n {
            let xc = (i as f64 + 0.5) * h;
            let du = (rec[i + 1] - rec[i]) / h;
            let y = wrap_unit(xc / epsilon);
            let z = wrap_unit(xc / eps2);
            let predicted = 1.0 + dphi.interp(&[y], 0) + dpsi.interp(&[y, z], 1);
            max_dev = max_dev.max((du - predicted).abs());
        }
        assert!(max_dev < 10.0 * epsilon, "sup deviation {max_dev}");
    }

    #[test]
    fn recovery_s2_sampling() {
        // zero correctors return u exactly
        let ct = CorrectorTriple::new(|x| 0.5 * x * x, |_x, _y| 0.0, |_x, _y, _z| 0.0);
        let g = MacroGrid::unit_affine_1d(8 * 16, 0.0);
        let rec = build_recovery_s2(&ct, 0.25, &g).unwrap();
        for (i, v) in rec.iter().enumerate() {
            let x = i as f64 * g.h();
            assert!((v - 0.5 * x * x).abs() < 1e-15);
        }

        // a pure Y-corrector enters at amplitude eps^2
        let ct = CorrectorTriple::new(|_x| 0.0, |_x, y| (TAU * y).sin(), |_x, _y, _z| 0.0);
        let eps = 0.25;
        let rec = build_recovery_s2(&ct, eps, &g).unwrap();
        for (i, v) in rec.iter().enumerate() {
            let x = i as f64 * g.h();
            let expect = eps * eps * (TAU * wrap_unit(x / eps)).sin();
            assert!((v - expect).abs() < 1e-14);
        }

        assert!(matches!(
            build_recovery_s2(&ct, 1.0 / 3.0, &g),
            Err(Error::Incommensurate(_))
        ));
    }

    #[test]
    fn theorem1_pure_macroscopic_hessian() {
        // U = W = 0 and u = x^2/2: pairing is the integral of the test
        let ct = CorrectorTriple::new(|x| 0.5 * x * x, |_x, _y| 0.0, |_x, _y, _z| 0.0);
        let rep = verify_theorem1(&ct, &[0.25, 0.125], &|_x, _y, _z| 1.0, 8, 64).unwrap();
        for row in &rep.rows {
            assert!((row.pairing - 1.0).abs() < 1e-6, "{}", row.pairing);
            assert!((row.target - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn theorem1_y_corrector_mode() {
        // u = 0, U = sin(2 pi y)/(4 pi^2): D^2_y U = -sin(2 pi y);
        // pairing against sin(2 pi y) -> -1/2
        let ct = CorrectorTriple::new(
            |_x| 0.0,
            |_x, y| (TAU * y).sin() / (TAU * TAU),
            |_x, _y, _z| 0.0,
        );
        let rep = verify_theorem1(
            &ct,
            &[0.25, 0.125, 0.0625, 0.03125],
            &|_x, y, _z| (TAU * y).sin(),
            8,
            64,
        )
        .unwrap();
        assert!((rep.rows.last().unwrap().pairing - (-0.5)).abs() < 5e-2);
        for w in rep.rows.windows(2) {
            assert!(w[1].residual <= w[0].residual * (1.0 + 1e-9));
        }
    }

    #[test]
    fn theorem1_z_corrector_mode() {
        // u = 0, W = -cos(2 pi z)/(4 pi^2): D^2_z W = cos(2 pi z) -> +1/2
        let ct = CorrectorTriple::new(
            |_x| 0.0,
            |_x, _y| 0.0,
            |_x, _y, z| -(TAU * z).cos() / (TAU * TAU),
        );
        let rep = verify_theorem1(
            &ct,
            &[0.25, 0.125, 0.03125],
            &|_x, _y, z| (TAU * z).cos(),
            8,
            64,
        )
        .unwrap();
        assert!((rep.rows.last().unwrap().pairing - 0.5).abs() < 5e-2);
    }

    #[test]
    fn named_registries() {
        assert!(generator_by_name("cos_fast").is_ok());
        assert!(test_by_name("cos_z").is_ok());
        assert!(matches!(generator_by_name("nope"), Err(Error::Config(_))));
        assert!(matches!(test_by_name("nope"), Err(Error::Config(_))));
    }
}
