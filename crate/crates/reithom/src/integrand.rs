//! The multiscale integrand f(y, z, xi) of order s, its xi-gradient, and
//! sampled validation of the structural hypotheses (periodicity, convexity,
//! growth sandwich, gradient consistency).
//!
//! For s = 1 the gradient slot xi is a d x N matrix; for s = 2 it holds d
//! symmetric N x N matrices. Both are stored flat, row-major.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::wrap_unit;
use crate::nfunction::{self, NFunction};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Derivative order of the functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    One,
    Two,
}

impl Order {
    pub fn s(&self) -> usize {
        match self {
            Order::One => 1,
            Order::Two => 2,
        }
    }

    pub fn from_s(s: usize) -> Result<Order> {
        match s {
            1 => Ok(Order::One),
            2 => Ok(Order::Two),
            _ => Err(Error::Contract(format!("order s = {s} not in {{1, 2}}"))),
        }
    }
}

/// Space dimension N and target dimension d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub space: usize,
    pub target: usize,
}

impl Dims {
    pub fn scalar_1d() -> Self {
        Dims {
            space: 1,
            target: 1,
        }
    }

    /// Flat length of a gradient-slot tensor.
    pub fn xi_len(&self, order: Order) -> usize {
        match order {
            Order::One => self.target * self.space,
            Order::Two => self.target * self.space * self.space,
        }
    }
}

/// Growth envelope (H4): c1 B(|xi|) <= f <= c2 (1 + B(|xi|)).
#[derive(Clone)]
pub struct Growth {
    pub c1: f64,
    pub c2: f64,
    pub nfunction: NFunction,
}

/// The xi-profile of separable integrands: f = a(y) a(z) * profile(|xi|).
#[derive(Clone)]
pub enum Profile {
    /// t^2
    Quadratic,
    /// t^p
    Power { p: f64 },
    /// B(t) for a catalog N-function
    NFun { nf: NFunction },
}

impl Profile {
    fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Quadratic => t * t,
            Profile::Power { p } => t.powf(*p),
            Profile::NFun { nf } => nf.b(t),
        }
    }

    fn slope(&self, t: f64) -> f64 {
        match self {
            Profile::Quadratic => 2.0 * t,
            Profile::Power { p } => p * t.powf(p - 1.0),
            Profile::NFun { nf } => nf.density(t),
        }
    }

    /// Differentiable at the origin without smoothing?
    fn smooth_at_zero(&self) -> bool {
        match self {
            Profile::Quadratic => true,
            // slope p t^{p-1} stays finite iff p >= 2 keeps the radial
            // derivative Lipschitz; p in (1,2) kinks at the origin
            Profile::Power { p } => *p >= 2.0,
            // b(0) = 0 and b nondecreasing: the radial slope vanishes at 0
            Profile::NFun { .. } => true,
        }
    }
}

/// Evaluation kernel behind an integrand. Coordinates arrive already wrapped
/// to the centered unit cell.
pub trait Kernel: Send + Sync {
    fn eval(&self, y: &[f64], z: &[f64], xi: &[f64]) -> f64;
    fn grad_xi(&self, y: &[f64], z: &[f64], xi: &[f64], out: &mut [f64]);
    /// Whether the xi-gradient exists everywhere (possibly via smoothing).
    fn smooth(&self) -> bool;
}

/// Separable kernel a_y(y) a_z(z) P(|xi|), with |xi| smoothed to
/// sqrt(|xi|^2 + delta^2) when the profile kinks at the origin. The smoothing
/// keeps P(0) = 0 by subtracting the offset, at an O(delta) energy bias.
pub struct SeparableKernel {
    pub coeff_y: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub coeff_z: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub profile: Profile,
    pub delta: f64,
}

impl SeparableKernel {
    fn norm_smoothed(&self, xi: &[f64]) -> f64 {
        let sq: f64 = xi.iter().map(|v| v * v).sum();
        (sq + self.delta * self.delta).sqrt()
    }
}

impl Kernel for SeparableKernel {
    fn eval(&self, y: &[f64], z: &[f64], xi: &[f64]) -> f64 {
        let t = self.norm_smoothed(xi);
        let offset = if self.delta > 0.0 {
            self.profile.value(self.delta)
        } else {
            0.0
        };
        (self.coeff_y)(y) * (self.coeff_z)(z) * (self.profile.value(t) - offset)
    }

    fn grad_xi(&self, y: &[f64], z: &[f64], xi: &[f64], out: &mut [f64]) {
        let t = self.norm_smoothed(xi);
        let a = (self.coeff_y)(y) * (self.coeff_z)(z);
        if t == 0.0 {
            out.fill(0.0);
            return;
        }
        let radial = a * self.profile.slope(t) / t;
        for (o, &x) in out.iter_mut().zip(xi) {
            *o = radial * x;
        }
    }

    fn smooth(&self) -> bool {
        self.profile.smooth_at_zero() || self.delta > 0.0
    }
}

/// A validated multiscale integrand. Immutable and shareable; eval and grad
/// are pure.
#[derive(Clone)]
pub struct Integrand {
    label: String,
    order: Order,
    dims: Dims,
    kernel: Arc<dyn Kernel>,
    growth: Growth,
    regularization_delta: f64,
    /// Documented analytic effective density, when one exists for the catalog
    /// entry: xi -> homogenized value.
    oracle: Option<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for Integrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Integrand")
            .field("label", &self.label)
            .field("order", &self.order)
            .field("dims", &self.dims)
            .finish()
    }
}

impl Integrand {
    pub fn new(
        label: impl Into<String>,
        order: Order,
        dims: Dims,
        kernel: Arc<dyn Kernel>,
        growth: Growth,
        regularization_delta: f64,
    ) -> Self {
        Integrand {
            label: label.into(),
            order,
            dims,
            kernel,
            growth,
            regularization_delta,
            oracle: None,
        }
    }

    pub fn with_oracle(mut self, oracle: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn growth(&self) -> &Growth {
        &self.growth
    }

    pub fn regularization_delta(&self) -> f64 {
        self.regularization_delta
    }

    pub fn xi_len(&self) -> usize {
        self.dims.xi_len(self.order)
    }

    pub fn oracle(&self) -> Option<&(dyn Fn(&[f64]) -> f64 + Send + Sync)> {
        self.oracle.as_deref()
    }

    /// Whether the xi-gradient is available (A3, possibly via smoothing).
    pub fn differentiable(&self) -> bool {
        self.kernel.smooth()
    }

    fn check_shape(&self, y: &[f64], z: &[f64], xi: &[f64]) -> Result<()> {
        if y.len() != self.dims.space || z.len() != self.dims.space {
            return Err(Error::Contract(format!(
                "cell point dimension {} or {} does not match N = {}",
                y.len(),
                z.len(),
                self.dims.space
            )));
        }
        if xi.len() != self.xi_len() {
            return Err(Error::Contract(format!(
                "xi length {} does not match expected {}",
                xi.len(),
                self.xi_len()
            )));
        }
        Ok(())
    }

    /// f(y, z, xi) with periodic wrap applied to y and z. For s = 2 the input
    /// is symmetrized before evaluation.
    pub fn eval_f(&self, y: &[f64], z: &[f64], xi: &[f64]) -> Result<f64> {
        self.check_shape(y, z, xi)?;
        let yw: Vec<f64> = y.iter().map(|&v| wrap_unit(v)).collect();
        let zw: Vec<f64> = z.iter().map(|&v| wrap_unit(v)).collect();
        let xs = self.symmetrized(xi);
        Ok(self.kernel.eval(&yw, &zw, &xs))
    }

    /// xi-gradient; errors on declared-nonsmooth integrands without smoothing.
    pub fn grad_f(&self, y: &[f64], z: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        self.check_shape(y, z, xi)?;
        if !self.differentiable() {
            return Err(Error::Nonsmooth(format!(
                "integrand {} has a kink at xi = 0 and regularization delta = 0",
                self.label
            )));
        }
        let yw: Vec<f64> = y.iter().map(|&v| wrap_unit(v)).collect();
        let zw: Vec<f64> = z.iter().map(|&v| wrap_unit(v)).collect();
        let xs = self.symmetrized(xi);
        let mut out = vec![0.0; xi.len()];
        self.kernel.grad_xi(&yw, &zw, &xs, &mut out);
        Ok(out)
    }

    /// Raw kernel access for solver hot loops: assumes wrapped coordinates and
    /// valid shapes, skips the per-call checks.
    #[inline]
    pub fn eval_raw(&self, y: &[f64], z: &[f64], xi: &[f64]) -> f64 {
        self.kernel.eval(y, z, xi)
    }

    #[inline]
    pub fn grad_raw(&self, y: &[f64], z: &[f64], xi: &[f64], out: &mut [f64]) {
        self.kernel.grad_xi(y, z, xi, out)
    }

    /// For s = 2, enforce symmetry of each N x N block.
    pub fn symmetrized(&self, xi: &[f64]) -> Vec<f64> {
        match self.order {
            Order::One => xi.to_vec(),
            Order::Two => {
                let n = self.dims.space;
                let mut out = xi.to_vec();
                for c in 0..self.dims.target {
                    for a in 0..n {
                        for b in (a + 1)..n {
                            let ij = c * n * n + a * n + b;
                            let ji = c * n * n + b * n + a;
                            let avg = 0.5 * (xi[ij] + xi[ji]);
                            out[ij] = avg;
                            out[ji] = avg;
                        }
                    }
                }
                out
            }
        }
    }

    /// Sampled hypothesis validation; deterministic given the seed.
    pub fn validate(&self, sample_budget: usize, seed: u64) -> Result<ValidationReport> {
        if sample_budget < 1000 {
            return Err(Error::Contract(format!(
                "validation sample budget {sample_budget} below 1000"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dims.space;
        let xi_len = self.xi_len();
        let nf = &self.growth.nfunction;

        let mut report = ValidationReport {
            label: self.label.clone(),
            sample_budget,
            seed,
            periodicity_max_dev: 0.0,
            lower_growth_margin: f64::INFINITY,
            upper_growth_margin: f64::INFINITY,
            worst_midpoint_violation: 0.0,
            grad_fd_max_rel: 0.0,
            gradient_checked: self.differentiable(),
            grad_growth_constant: 0.0,
            periodicity_ok: true,
            growth_ok: true,
            convexity_ok: true,
            gradient_ok: true,
        };

        let sample_point = |rng: &mut ChaCha8Rng| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
            // geometric magnitudes cover the growth envelope across scales
            let mag = 10f64.powf(rng.random_range(-2.0..1.3));
            let mut xi: Vec<f64> = (0..xi_len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm: f64 = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut xi {
                    *v *= mag / norm;
                }
            }
            (y, z, self.symmetrized(&xi))
        };

        let budget = sample_budget;
        for _ in 0..budget {
            let (y, z, xi) = sample_point(&mut rng);
            let f = self.eval_f(&y, &z, &xi)?;
            if !f.is_finite() || f < -1e-12 {
                report.growth_ok = false;
                continue;
            }

            // (H2) separate periodicity in y and z
            for axis in 0..n {
                let mut ys = y.clone();
                ys[axis] += 1.0;
                let dev = (self.eval_f(&ys, &z, &xi)? - f).abs();
                report.periodicity_max_dev = report.periodicity_max_dev.max(dev);
                let mut zs = z.clone();
                zs[axis] -= 1.0;
                let dev = (self.eval_f(&y, &zs, &xi)? - f).abs();
                report.periodicity_max_dev = report.periodicity_max_dev.max(dev);
            }

            // (H4) growth sandwich
            let norm: f64 = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let lower = self.growth.c1 * nf.b(norm);
            let upper = self.growth.c2 * (1.0 + nf.b(norm));
            let scale = upper.abs().max(1.0);
            report.lower_growth_margin = report.lower_growth_margin.min((f - lower) / scale);
            report.upper_growth_margin = report.upper_growth_margin.min((upper - f) / scale);

            // (H3) midpoint convexity against a second sample at the same (y, z)
            let (_, _, xi2) = sample_point(&mut rng);
            let f2 = self.eval_f(&y, &z, &xi2)?;
            let mid: Vec<f64> = xi.iter().zip(&xi2).map(|(a, b)| 0.5 * (a + b)).collect();
            let fm = self.eval_f(&y, &z, &mid)?;
            let violation = fm - 0.5 * (f + f2);
            report.worst_midpoint_violation = report
                .worst_midpoint_violation
                .max(violation / f.abs().max(f2.abs()).max(1.0));

            // (A3) gradient against central differences, plus the growth of
            // the gradient itself
            if report.gradient_checked {
                let g = self.grad_f(&y, &z, &xi)?;
                let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let denom = 1.0 + nf.density(1.0 + norm);
                report.grad_growth_constant = report.grad_growth_constant.max(gnorm / denom);
                if norm > 1e-2 {
                    let h = 1e-6 * norm.max(1.0);
                    for k in 0..xi_len {
                        let mut xp = xi.clone();
                        let mut xm = xi.clone();
                        xp[k] += h;
                        xm[k] -= h;
                        let fd =
                            (self.eval_f(&y, &z, &xp)? - self.eval_f(&y, &z, &xm)?) / (2.0 * h);
                        let rel = (g[k] - fd).abs() / gnorm.max(1e-8);
                        report.grad_fd_max_rel = report.grad_fd_max_rel.max(rel);
                    }
                }
            }
        }

        report.periodicity_ok = report.periodicity_max_dev <= 1e-9;
        report.growth_ok = report.growth_ok
            && report.lower_growth_margin >= -1e-9
            && report.upper_growth_margin >= -1e-9;
        report.convexity_ok = report.worst_midpoint_violation <= 1e-9;
        report.gradient_ok = !report.gradient_checked || report.grad_fd_max_rel <= 1e-5;
        Ok(report)
    }
}

/// Per-hypothesis outcome of sampled validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub label: String,
    pub sample_budget: usize,
    pub seed: u64,
    pub periodicity_ok: bool,
    pub periodicity_max_dev: f64,
    pub growth_ok: bool,
    /// min over samples of (f - c1 B(|xi|)) / scale; negative means violation.
    pub lower_growth_margin: f64,
    /// min over samples of (c2 (1 + B(|xi|)) - f) / scale.
    pub upper_growth_margin: f64,
    pub convexity_ok: bool,
    pub worst_midpoint_violation: f64,
    pub gradient_ok: bool,
    /// False when the integrand is accepted as merely continuous: the
    /// minimizer will refuse it, validation only skips the gradient check.
    pub gradient_checked: bool,
    pub grad_fd_max_rel: f64,
    /// Smallest c with |grad f| <= c (1 + b(1 + |xi|)) over the samples.
    pub grad_growth_constant: f64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.periodicity_ok && self.growth_ok && self.convexity_ok && self.gradient_ok
    }
}

/// The map x -> (x/eps mod Y, x/eps^2 mod Z) with the centered-cell wrap.
#[derive(Debug, Clone, Copy)]
pub struct ScaleMap {
    pub epsilon: f64,
}

impl ScaleMap {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Contract(format!("epsilon {epsilon} outside (0, 1]")));
        }
        Ok(ScaleMap { epsilon })
    }

    pub fn map(&self, x: f64) -> (f64, f64) {
        (
            wrap_unit(x / self.epsilon),
            wrap_unit(x / (self.epsilon * self.epsilon)),
        )
    }
}

/// Catalog parameters; unset fields fall back to per-entry defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CatalogParams {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub nf: Option<String>,
    pub delta: Option<f64>,
    /// Derivative order of the functional the integrand feeds (1 or 2).
    pub order: Option<u8>,
}

impl CatalogParams {
    fn order(&self) -> Result<Order> {
        Order::from_s(self.order.unwrap_or(1) as usize)
    }
}

fn laminate_a1(y: &[f64]) -> f64 {
    1.0 / (2.0 + (std::f64::consts::TAU * y[0]).sin())
}

fn laminate_a2(z: &[f64]) -> f64 {
    1.0 / (2.0 + (std::f64::consts::TAU * z[0]).cos())
}

/// Built-in integrands with documented analytic effective densities where one
/// exists.
///
/// - `quadratic_laminate`: a1(y) a2(z) xi^2 with a1 = 1/(2 + sin 2 pi y),
///   a2 = 1/(2 + cos 2 pi z). Effective density xi^2 / 4: the harmonic means
///   of a1 and a2 are 1/2 each and they multiply across the two levels.
/// - `p_laminate` (param p, default 3): a2(z) |xi|^p. Level-one effective
///   coefficient (int a2^(-1/(p-1)) dz)^(-(p-1)).
/// - `orlicz_plog` (params p, q): a2(z) B_plog(|xi|); no closed-form density.
/// - `constant_B` (param nf, default power:2): B(|xi|); homogenization is the
///   identity.
pub fn catalog(name: &str, params: &CatalogParams) -> Result<Integrand> {
    match name {
        "quadratic_laminate" => {
            let growth = Growth {
                c1: 1.0 / 9.0,
                c2: 1.0,
                nfunction: nfunction::square()?,
            };
            let kernel = SeparableKernel {
                coeff_y: Arc::new(laminate_a1),
                coeff_z: Arc::new(laminate_a2),
                profile: Profile::Quadratic,
                delta: 0.0,
            };
            Ok(Integrand::new(
                "quadratic_laminate",
                params.order()?,
                Dims::scalar_1d(),
                Arc::new(kernel),
                growth,
                0.0,
            )
            .with_oracle(Arc::new(|xi: &[f64]| 0.25 * xi[0] * xi[0])))
        }
        "p_laminate" => {
            let p = params.p.unwrap_or(3.0);
            if !(p > 1.0) {
                return Err(Error::Config(format!("p_laminate needs p > 1, got {p}")));
            }
            let delta = params.delta.unwrap_or(if p < 2.0 { 1e-6 } else { 0.0 });
            let growth = Growth {
                c1: 1.0 / 3.0,
                c2: 1.0,
                nfunction: nfunction::power_raw(p)?,
            };
            let kernel = SeparableKernel {
                coeff_y: Arc::new(|_: &[f64]| 1.0),
                coeff_z: Arc::new(laminate_a2),
                profile: Profile::Power { p },
                delta,
            };
            let oracle_p = p;
            Ok(Integrand::new(
                format!("p_laminate:{p}"),
                params.order()?,
                Dims::scalar_1d(),
                Arc::new(kernel),
                growth,
                delta,
            )
            .with_oracle(Arc::new(move |xi: &[f64]| {
                p_laminate_coefficient(oracle_p, 1 << 16) * xi[0].abs().powf(oracle_p)
            })))
        }
        "orlicz_plog" => {
            let p = params.p.unwrap_or(2.0);
            let q = params.q.unwrap_or(1.0);
            let nf = nfunction::plog(p, q)?;
            let growth = Growth {
                c1: 1.0 / 3.0,
                c2: 1.0,
                nfunction: nf.clone(),
            };
            let kernel = SeparableKernel {
                coeff_y: Arc::new(|_: &[f64]| 1.0),
                coeff_z: Arc::new(laminate_a2),
                profile: Profile::NFun { nf },
                delta: params.delta.unwrap_or(0.0),
            };
            Ok(Integrand::new(
                format!("orlicz_plog:{p},{q}"),
                params.order()?,
                Dims::scalar_1d(),
                Arc::new(kernel),
                growth,
                params.delta.unwrap_or(0.0),
            ))
        }
        "constant_B" => {
            let nf_name = params.nf.as_deref().unwrap_or("power:2");
            let nf = nfunction::by_name(nf_name)?;
            let growth = Growth {
                c1: 1.0,
                c2: 1.0,
                nfunction: nf.clone(),
            };
            let oracle_nf = nf.clone();
            let kernel = SeparableKernel {
                coeff_y: Arc::new(|_: &[f64]| 1.0),
                coeff_z: Arc::new(|_: &[f64]| 1.0),
                profile: Profile::NFun { nf },
                delta: params.delta.unwrap_or(0.0),
            };
            Ok(Integrand::new(
                format!("constant_B:{nf_name}"),
                params.order()?,
                Dims::scalar_1d(),
                Arc::new(kernel),
                growth,
                params.delta.unwrap_or(0.0),
            )
            .with_oracle(Arc::new(move |xi: &[f64]| {
                let norm: f64 = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                oracle_nf.b(norm)
            })))
        }
        other => Err(Error::Config(format!(
            "unknown catalog integrand {other:?}"
        ))),
    }
}

/// Effective coefficient of the 1-D p-growth laminate:
/// (int a2^(-1/(p-1)) dz)^(-(p-1)) by midpoint quadrature.
pub fn p_laminate_coefficient(p: f64, quad_points: usize) -> f64 {
    let n = quad_points;
    let mut acc = 0.0;
    for i in 0..n {
        let z = -0.5 + (i as f64 + 0.5) / n as f64;
        acc += laminate_a2(&[z]).powf(-1.0 / (p - 1.0));
    }
    (acc / n as f64).powf(-(p - 1.0))
}

/// Custom integrand from config expressions: coeff_y(y) coeff_z(z) profile.
pub struct CustomSpec {
    pub coeff_y: String,
    pub coeff_z: String,
    pub profile: String,
    pub space: usize,
    pub order: Order,
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
}

pub fn from_custom_spec(spec: &CustomSpec) -> Result<Integrand> {
    let ey = Expr::parse(&spec.coeff_y, spec.space)?;
    if ey.uses_z() {
        return Err(Error::Config(
            "coeff_y must not reference z variables".into(),
        ));
    }
    let ez = Expr::parse(&spec.coeff_z, spec.space)?;
    let (profile, growth_nf) = if spec.profile == "quadratic" {
        (Profile::Quadratic, nfunction::square()?)
    } else if let Some(p) = spec.profile.strip_prefix("power:") {
        let p: f64 = p
            .parse()
            .map_err(|_| Error::Config(format!("bad profile {:?}", spec.profile)))?;
        (Profile::Power { p }, nfunction::power_raw(p)?)
    } else if let Some(name) = spec.profile.strip_prefix("nfunction:") {
        let nf = nfunction::by_name(name)?;
        (Profile::NFun { nf: nf.clone() }, nf)
    } else {
        return Err(Error::Config(format!(
            "unknown xi profile {:?}",
            spec.profile
        )));
    };
    let kernel = SeparableKernel {
        coeff_y: Arc::new(move |y: &[f64]| ey.eval(y, &[])),
        coeff_z: Arc::new(move |z: &[f64]| ez.eval(&[], z)),
        profile,
        delta: spec.delta,
    };
    Ok(Integrand::new(
        format!(
            "custom({} * {} * {})",
            spec.coeff_y, spec.coeff_z, spec.profile
        ),
        spec.order,
        Dims {
            space: spec.space,
            target: 1,
        },
        Arc::new(kernel),
        Growth {
            c1: spec.c1,
            c2: spec.c2,
            nfunction: growth_nf,
        },
        spec.delta,
    ))
}
