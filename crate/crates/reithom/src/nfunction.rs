//! N-functions and Orlicz-space scalar machinery.
//!
//! An N-function is a convex B: [0, inf) -> [0, inf) with B(0) = 0,
//! B(t)/t -> 0 at 0 and -> inf at infinity, represented here together with its
//! right-continuous nondecreasing density b, so that B(t) = int_0^t b.
//! On top of that sit the numerical Legendre conjugate, a heuristic Delta-2
//! check, and Luxemburg norms of sampled fields.

use crate::error::{Error, Result};
use crate::fields::{kahan_sum, PeriodicField};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Orlicz generator with its density and optional analytic Delta-2 witness.
///
/// Values are immutable after construction and safe to share across threads;
/// all operations are pure.
#[derive(Clone)]
pub struct NFunction {
    label: String,
    eval: ScalarFn,
    density: ScalarFn,
    delta2_witness: Option<(f64, f64)>,
}

impl std::fmt::Debug for NFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NFunction")
            .field("label", &self.label)
            .finish()
    }
}

impl NFunction {
    /// Build from a closed-form (B, b) pair and check the N-function axioms on
    /// sample grids.
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let nf = NFunction {
            label: label.into(),
            eval: Arc::new(eval),
            density: Arc::new(density),
            delta2_witness: None,
        };
        nf.check_axioms()?;
        Ok(nf)
    }

    /// Build from B alone; the density falls back to a centered finite
    /// difference of B with step 1e-6 * max(t, 1). Lower-accuracy mode.
    pub fn from_eval(
        label: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let eval = Arc::new(eval);
        let e = eval.clone();
        let density = move |t: f64| {
            let h = 1e-6 * t.max(1.0);
            let lo = (t - h).max(0.0);
            (e(t + h) - e(lo)) / (t + h - lo)
        };
        let nf = NFunction {
            label: label.into(),
            eval,
            density: Arc::new(density),
            delta2_witness: None,
        };
        nf.check_axioms()?;
        Ok(nf)
    }

    pub fn with_delta2_witness(mut self, alpha: f64, t0: f64) -> Self {
        self.delta2_witness = Some((alpha, t0));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn delta2_witness(&self) -> Option<(f64, f64)> {
        self.delta2_witness
    }

    /// B(t) without domain checking (hot path for solvers and quadrature).
    #[inline]
    pub fn b(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    /// b(t) without domain checking.
    #[inline]
    pub fn density(&self, t: f64) -> f64 {
        (self.density)(t)
    }

    /// (B(t), b(t)) with the t >= 0 domain contract enforced.
    pub fn eval_pair(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!(
                "N-function argument t = {t} must be >= 0"
            )));
        }
        Ok(((self.eval)(t), (self.density)(t)))
    }

    /// Construction-time sanity checks of the N-function axioms, all sampled.
    fn check_axioms(&self) -> Result<()> {
        let b0 = (self.eval)(0.0);
        if b0.abs() > 1e-12 {
            return Err(Error::InvalidNFunction(format!("B(0) = {b0}, expected 0")));
        }
        // positivity and midpoint convexity on a geometric grid
        let grid: Vec<f64> = geometric_grid(1e-6, 1e6, 49);
        for pair in grid.windows(2) {
            let (s, t) = (pair[0], pair[1]);
            let (bs, bt) = ((self.eval)(s), (self.eval)(t));
            if bs <= 0.0 || bt <= 0.0 {
                return Err(Error::InvalidNFunction(format!(
                    "B not strictly positive at t in [{s}, {t}]"
                )));
            }
            let mid = (self.eval)(0.5 * (s + t));
            if mid > 0.5 * (bs + bt) * (1.0 + 1e-9) + 1e-300 {
                return Err(Error::InvalidNFunction(format!(
                    "midpoint convexity fails on [{s}, {t}]"
                )));
            }
        }
        // B(t)/t -> 0 at 0 and -> inf at infinity, relative to the slope at 1
        let slope1 = (self.eval)(1.0) / 1.0;
        let slope_lo = (self.eval)(1e-8) / 1e-8;
        let slope_hi = (self.eval)(1e8) / 1e8;
        if !(slope_lo < 1e-2 * slope1) {
            return Err(Error::InvalidNFunction(format!(
                "B(t)/t does not vanish near 0 (ratio {slope_lo} vs {slope1} at 1)"
            )));
        }
        if !(slope_hi > 1e2 * slope1) {
            return Err(Error::InvalidNFunction(format!(
                "B(t)/t does not diverge at infinity (ratio {slope_hi} vs {slope1} at 1)"
            )));
        }
        // int_0^t b recovers B(t); Simpson with a fine grid (densities with
        // fractional-power behaviour near 0 converge slowly)
        for t in [0.5, 1.0, 3.0] {
            let quad = simpson(|s| (self.density)(s), 0.0, t, 16_384);
            let direct = (self.eval)(t);
            if (quad - direct).abs() > 1e-5 * direct.abs().max(1.0) {
                return Err(Error::InvalidNFunction(format!(
                    "density inconsistent with eval at t = {t}: int b = {quad}, B = {direct}"
                )));
            }
        }
        // Young consistency: t b(t) <= B(2t)
        for &t in &[0.1, 0.5, 1.0, 2.0, 10.0] {
            let lhs = t * (self.density)(t);
            let rhs = (self.eval)(2.0 * t);
            if lhs > rhs * (1.0 + 1e-9) {
                return Err(Error::InvalidNFunction(format!(
                    "t b(t) = {lhs} exceeds B(2t) = {rhs} at t = {t}"
                )));
            }
        }
        Ok(())
    }

    /// Legendre conjugate at `t`, within `tol` on the value.
    ///
    /// The sup of s t - B(s) is attained where the nondecreasing density
    /// crosses `t`, so this brackets b(s) = t by doubling the range up to 2^60
    /// and bisects.
    pub fn conjugate(&self, t: f64, tol: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!(
                "conjugate argument t = {t} must be >= 0"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain("conjugate tolerance must be positive".into()));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0f64;
        let mut expansions = 0;
        while (self.density)(hi) < t {
            hi *= 2.0;
            expansions += 1;
            if expansions > 60 {
                return Err(Error::UnboundedConjugate(format!(
                    "density of {} stays below {t} up to s = 2^60",
                    self.label
                )));
            }
        }
        let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
        // bisect for the crossing; value error <= width * slope defect
        for _ in 0..200 {
            let width = hi - lo;
            let defect = ((self.density)(hi) - (self.density)(lo)).abs();
            if width * defect <= tol || width <= 1e-15 * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if (self.density)(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v_lo = lo * t - (self.eval)(lo);
        let v_hi = hi * t - (self.eval)(hi);
        Ok(v_lo.max(v_hi).max(0.0))
    }

    /// The conjugate as an N-function of its own: numerical eval plus the
    /// generalized (right-continuous) inverse of the density.
    pub fn conjugate_nfunction(&self, tol: f64) -> NFunction {
        let this = self.clone();
        let eval_tol = tol;
        let eval = move |t: f64| this.conjugate(t, eval_tol).unwrap_or(f64::INFINITY);
        let inv = self.clone();
        let density = move |t: f64| inv.density_inverse(t);
        NFunction {
            label: format!("conjugate({})", self.label),
            eval: Arc::new(eval),
            density: Arc::new(density),
            delta2_witness: None,
        }
    }

    /// inf { s >= 0 : b(s) >= t }, by bracketing and bisection.
    fn density_inverse(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0f64;
        let mut expansions = 0;
        while (self.density)(hi) < t {
            hi *= 2.0;
            expansions += 1;
            if expansions > 60 {
                return f64::INFINITY;
            }
        }
        let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
        for _ in 0..200 {
            if hi - lo <= 1e-14 * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if (self.density)(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Sampled Delta-2 verdict: B(2t) <= alpha B(t) for t >= t0.
    ///
    /// Heuristic by necessity (the condition quantifies over all large t): the
    /// ratio B(2t)/B(t) is inspected on a geometric grid and the verdict
    /// records the inspected range.
    pub fn delta2_check(&self, t_min: f64, t_max: f64, n_samples: usize) -> Result<Delta2Report> {
        if !(t_min > 0.0 && t_min < t_max) {
            return Err(Error::Domain(format!(
                "delta2 range ({t_min}, {t_max}) must satisfy 0 < t_min < t_max"
            )));
        }
        if n_samples < 16 {
            return Err(Error::Domain(
                "delta2 check needs at least 16 samples".into(),
            ));
        }
        let grid = geometric_grid(t_min, t_max, n_samples);
        let mut ratios = Vec::with_capacity(n_samples);
        for &t in &grid {
            let bt = (self.eval)(t);
            if bt <= 0.0 {
                return Err(Error::InvalidNFunction(format!("B({t}) = {bt} but t > 0")));
            }
            ratios.push((self.eval)(2.0 * t) / bt);
        }
        // overflow past the f64 range counts as divergence evidence; restrict
        // the verdict to the finite part of the grid
        let overflowed = ratios.iter().any(|r| !r.is_finite());
        let finite: Vec<(f64, f64)> = grid
            .iter()
            .zip(&ratios)
            .filter(|(_, r)| r.is_finite())
            .map(|(t, r)| (*t, *r))
            .collect();
        if finite.len() < 2 {
            return Ok(Delta2Report {
                holds: false,
                alpha: None,
                t0: None,
                range: (t_min, t_max),
                heuristic: true,
                note: "B(2t) overflows across the inspected range; doubling condition \
                       rejected for B or for its conjugate"
                    .into(),
            });
        }
        // reject if the ratio grows monotonically across the top decade of
        // the finite samples
        let t_hi = finite.last().unwrap().0;
        let top: Vec<(f64, f64)> = finite
            .iter()
            .cloned()
            .filter(|(t, _)| *t >= t_hi / 10.0)
            .collect();
        let growing = overflowed
            || (top.len() >= 2 && top.windows(2).all(|w| w[1].1 > w[0].1 * (1.0 + 1e-9)));
        if growing {
            return Ok(Delta2Report {
                holds: false,
                alpha: None,
                t0: None,
                range: (t_min, t_max),
                heuristic: true,
                note: "ratio B(2t)/B(t) grows across the top decade; doubling condition \
                       rejected for B or for its conjugate"
                    .into(),
            });
        }
        let sup = finite.iter().map(|(_, r)| *r).fold(f64::MIN, f64::max);
        let inf = finite.iter().map(|(_, r)| *r).fold(f64::MAX, f64::min);
        // a flat ratio certifies the bound from t = 0, otherwise only from t_min
        let t0 = if sup - inf <= 1e-6 * sup { 0.0 } else { t_min };
        Ok(Delta2Report {
            holds: true,
            alpha: Some(sup),
            t0: Some(t0),
            range: (t_min, t_max),
            heuristic: true,
            note: String::new(),
        })
    }
}

/// Heuristic Delta-2 verdict over an inspected range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Delta2Report {
    pub holds: bool,
    pub alpha: Option<f64>,
    pub t0: Option<f64>,
    pub range: (f64, f64),
    /// Always true: a finite grid cannot certify the condition.
    pub heuristic: bool,
    pub note: String,
}

/// A Luxemburg-norm query: a sampled scalar magnitude on a quadrature grid of
/// known measure.
pub struct LuxemburgNormRequest<'a> {
    pub magnitudes: &'a [f64],
    pub domain_measure: f64,
}

impl<'a> LuxemburgNormRequest<'a> {
    pub fn new(magnitudes: &'a [f64], domain_measure: f64) -> Result<Self> {
        if !(domain_measure > 0.0) {
            return Err(Error::Domain("domain measure must be positive".into()));
        }
        Ok(LuxemburgNormRequest {
            magnitudes,
            domain_measure,
        })
    }
}

/// inf { k > 0 : int_Omega B(|u|/k) <= 1 }, by bisection on the modular.
///
/// The map k -> int B(|u|/k) is strictly decreasing where positive, so the
/// bracket [lo, hi] pins the unique k with modular = 1. Returns 0 for the
/// a.e.-zero field. `tol` bounds |modular(k) - 1|.
pub fn luxemburg_norm(nf: &NFunction, req: &LuxemburgNormRequest, tol: f64) -> Result<f64> {
    if req.magnitudes.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("field has non-finite values".into()));
    }
    let sup = req.magnitudes.iter().cloned().fold(0.0f64, f64::max);
    if sup == 0.0 {
        return Ok(0.0);
    }
    let measure = req.domain_measure;
    let npts = req.magnitudes.len() as f64;
    let modular = |k: f64| -> f64 {
        measure * kahan_sum(req.magnitudes.iter().map(|&u| nf.b(u.abs() / k))) / npts
    };
    let mut hi = sup;
    let mut guard = 0;
    while modular(hi) > 1.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 400 {
            return Err(Error::Data(
                "Luxemburg bracket expansion failed upward".into(),
            ));
        }
    }
    let mut lo = hi;
    while modular(lo) < 1.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 800 {
            // modular stays below 1 down to denormal k: treat as zero field
            return Ok(0.0);
        }
    }
    for _ in 0..400 {
        let k = 0.5 * (lo + hi);
        let m = modular(k);
        if (m - 1.0).abs() <= tol || (hi - lo) <= 1e-16 * k {
            return Ok(k);
        }
        if m > 1.0 {
            lo = k;
        } else {
            hi = k;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Luxemburg norm of a sampled field (Euclidean magnitude across components)
/// over its own grid measure.
pub fn luxemburg_norm_field(nf: &NFunction, field: &PeriodicField, tol: f64) -> Result<f64> {
    let mags = field.magnitude();
    let req = LuxemburgNormRequest::new(&mags, field.grid.measure())?;
    luxemburg_norm(nf, &req, tol)
}

/// Row of the JSON report emitted by the N-function check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NFunctionSample {
    pub t: f64,
    #[serde(rename = "B")]
    pub b_val: f64,
    pub b: f64,
    #[serde(rename = "Bconj")]
    pub b_conj: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NFunctionReport {
    pub label: String,
    pub delta2: Delta2Report,
    pub samples: Vec<NFunctionSample>,
}

/// Full diagnostic report: Delta-2 verdict plus (t, B, b, conjugate) samples.
pub fn nfunction_report(
    nf: &NFunction,
    t_min: f64,
    t_max: f64,
    n_samples: usize,
) -> Result<NFunctionReport> {
    let delta2 = nf.delta2_check(t_min, t_max, n_samples.max(16))?;
    let mut samples = Vec::new();
    for t in geometric_grid(t_min, t_max, n_samples.min(64)) {
        let (b_val, b) = nf.eval_pair(t)?;
        let b_conj = nf.conjugate(t, 1e-10).unwrap_or(f64::INFINITY);
        samples.push(NFunctionSample {
            t,
            b_val,
            b,
            b_conj,
        });
    }
    Ok(NFunctionReport {
        label: nf.label().to_string(),
        delta2,
        samples,
    })
}

/// Built-in catalog: "power:p" (t^p / p), "plog:p,q" (t^p log(1+t)^q),
/// "exp" (e^t - t - 1, a doubling-condition violator), "square" (t^2).
pub fn by_name(name: &str) -> Result<NFunction> {
    if let Some(rest) = name.strip_prefix("power:") {
        let p: f64 = rest
            .parse()
            .map_err(|_| Error::Config(format!("bad power exponent in {name:?}")))?;
        return power(p);
    }
    if let Some(rest) = name.strip_prefix("plog:") {
        let mut it = rest.split(',');
        let p: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Config(format!("bad plog parameters in {name:?}")))?;
        let q: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Config(format!("bad plog parameters in {name:?}")))?;
        return plog(p, q);
    }
    match name {
        "exp" => exp_demo(),
        "square" => square(),
        _ => Err(Error::Config(format!("unknown N-function {name:?}"))),
    }
}

/// B(t) = t^p / p with density t^(p-1). Requires p > 1.
pub fn power(p: f64) -> Result<NFunction> {
    if !(p > 1.0) {
        return Err(Error::Config(format!(
            "power N-function needs p > 1, got {p}"
        )));
    }
    Ok(NFunction::new(
        format!("power:{p}"),
        move |t: f64| t.powf(p) / p,
        move |t: f64| t.powf(p - 1.0),
    )?
    .with_delta2_witness(2f64.powf(p), 0.0))
}

/// B(t) = t^2, the plain quadratic generator (L^2 growth).
pub fn square() -> Result<NFunction> {
    Ok(NFunction::new("square", |t: f64| t * t, |t: f64| 2.0 * t)?.with_delta2_witness(4.0, 0.0))
}

/// B(t) = t^p without the 1/p normalization; the natural growth envelope for
/// p-power integrands. Requires p > 1.
pub fn power_raw(p: f64) -> Result<NFunction> {
    if !(p > 1.0) {
        return Err(Error::Config(format!(
            "power N-function needs p > 1, got {p}"
        )));
    }
    Ok(NFunction::new(
        format!("tpow:{p}"),
        move |t: f64| t.powf(p),
        move |t: f64| p * t.powf(p - 1.0),
    )?
    .with_delta2_witness(2f64.powf(p), 0.0))
}

/// B(t) = t^p log(1+t)^q. Requires p > 1, q >= 0.
pub fn plog(p: f64, q: f64) -> Result<NFunction> {
    if !(p > 1.0 && q >= 0.0) {
        return Err(Error::Config(format!(
            "plog N-function needs p > 1, q >= 0, got p = {p}, q = {q}"
        )));
    }
    Ok(NFunction::new(
        format!("plog:{p},{q}"),
        move |t: f64| t.powf(p) * t.ln_1p().powf(q),
        move |t: f64| {
            if t == 0.0 {
                return 0.0;
            }
            let l = t.ln_1p();
            p * t.powf(p - 1.0) * l.powf(q) + t.powf(p) * q * l.powf(q - 1.0) / (1.0 + t)
        },
    )?
    .with_delta2_witness(2f64.powf(p + q), 1.0))
}

/// B(t) = e^t - t - 1; violates the doubling condition.
pub fn exp_demo() -> Result<NFunction> {
    NFunction::new("exp", |t: f64| t.exp() - t - 1.0, |t: f64| t.exp() - 1.0)
}

/// Geometric grid with n points from a to b inclusive.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let ratio = (b / a).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| a * ratio.powi(i as i32)).collect()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_pair_examples() {
        // B(t) = t^2: forced (0, 0) at the origin
        let sq = square().unwrap();
        assert_eq!(sq.eval_pair(0.0).unwrap(), (0.0, 0.0));

        // B(t) = t^3/3 at t = 2: closed-form antiderivative
        let cube = power(3.0).unwrap();
        let (b, d) = cube.eval_pair(2.0).unwrap();
        assert!((b - 8.0 / 3.0).abs() < 1e-14);
        assert!((d - 4.0).abs() < 1e-14);

        // B(t) = e^t - t - 1 at t = 1
        let e = exp_demo().unwrap();
        let (b, d) = e.eval_pair(1.0).unwrap();
        assert!((b - (1f64.exp() - 2.0)).abs() < 1e-14);
        assert!((d - (1f64.exp() - 1.0)).abs() < 1e-14);

        assert!(matches!(sq.eval_pair(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn conjugate_examples() {
        // t^2/2 is self-conjugate
        let half_sq = NFunction::new("t^2/2", |t| 0.5 * t * t, |t| t).unwrap();
        assert!((half_sq.conjugate(3.0, 1e-12).unwrap() - 4.5).abs() < 1e-9);

        // conjugate of t^3/3 is t^(3/2)/(3/2)
        let cube = power(3.0).unwrap();
        let got = cube.conjugate(1.0, 1e-12).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-9, "got {got}");

        // at t = 0 the sup of -B(s) is 0
        assert_eq!(cube.conjugate(0.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn conjugate_unbounded_for_bounded_density() {
        // density saturates at 1, so slopes above 1 are unreachable
        let nf = NFunction {
            label: "saturating".into(),
            eval: Arc::new(|t: f64| if t < 1.0 { 0.5 * t * t } else { t - 0.5 }),
            density: Arc::new(|t: f64| t.min(1.0)),
            delta2_witness: None,
        };
        assert!(matches!(
            nf.conjugate(2.0, 1e-10),
            Err(Error::UnboundedConjugate(_))
        ));
    }

    #[test]
    fn delta2_verdicts() {
        let cube = power(3.0).unwrap();
        let rep = cube.delta2_check(1e-2, 1e4, 64).unwrap();
        assert!(rep.holds);
        assert!((rep.alpha.unwrap() - 8.0).abs() < 1e-9);
        assert_eq!(rep.t0.unwrap(), 0.0);

        let e = exp_demo().unwrap();
        let rep = e.delta2_check(1.0, 1e4, 64).unwrap();
        assert!(!rep.holds);
        assert!(rep.alpha.is_none());

        let pl = plog(2.0, 1.0).unwrap();
        let rep = pl.delta2_check(1.0, 1e4, 64).unwrap();
        assert!(rep.holds);
        assert!(rep.alpha.unwrap() <= 8.0 + 1e-9);
        assert!((rep.t0.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn luxemburg_norm_examples() {
        let sq = square().unwrap();

        // u = 2 on a measure-1 box
        let vals = vec![2.0; 128];
        let req = LuxemburgNormRequest::new(&vals, 1.0).unwrap();
        let k = luxemburg_norm(&sq, &req, 1e-10).unwrap();
        assert!((k - 2.0).abs() < 1e-9);

        // u(x) = x on (0,1): int (x/k)^2 = 1/(3k^2) so k = 1/sqrt(3)
        let n = 4096;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let req = LuxemburgNormRequest::new(&vals, 1.0).unwrap();
        let k = luxemburg_norm(&sq, &req, 1e-12).unwrap();
        assert!((k - 1.0 / 3f64.sqrt()).abs() < 1e-7, "got {k}");

        // zero field
        let vals = vec![0.0; 16];
        let req = LuxemburgNormRequest::new(&vals, 1.0).unwrap();
        assert_eq!(luxemburg_norm(&sq, &req, 1e-10).unwrap(), 0.0);

        // non-finite data is refused
        let vals = vec![1.0, f64::NAN];
        let req = LuxemburgNormRequest::new(&vals, 1.0).unwrap();
        assert!(matches!(
            luxemburg_norm(&sq, &req, 1e-10),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn luxemburg_scaling() {
        let sq = square().unwrap();
        let n = 512;
        let base: Vec<f64> = (0..n)
            .map(|i| {
                ((i as f64 + 0.5) / n as f64 * std::f64::consts::TAU)
                    .sin()
                    .abs()
                    + 0.3
            })
            .collect();
        let req = LuxemburgNormRequest::new(&base, 1.0).unwrap();
        let k0 = luxemburg_norm(&sq, &req, 1e-12).unwrap();
        for lambda in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = base.iter().map(|v| lambda * v).collect();
            let req = LuxemburgNormRequest::new(&scaled, 1.0).unwrap();
            let k = luxemburg_norm(&sq, &req, 1e-12).unwrap();
            assert!(
                (k - lambda * k0).abs() < 1e-8 * lambda * k0,
                "lambda {lambda}: {k} vs {}",
                lambda * k0
            );
        }
    }

    #[test]
    fn norm_modular_bracketing() {
        // int B(|u|) <= ||u|| when ||u|| <= 1, and ||u|| <= int B(|u|) when > 1
        let sq = square().unwrap();
        for amp in [0.4, 0.9, 1.3, 4.0] {
            let n = 1024;
            let vals: Vec<f64> = (0..n)
                .map(|i| {
                    amp * (((i as f64 + 0.5) / n as f64) * std::f64::consts::TAU)
                        .cos()
                        .abs()
                })
                .collect();
            let req = LuxemburgNormRequest::new(&vals, 1.0).unwrap();
            let norm = luxemburg_norm(&sq, &req, 1e-12).unwrap();
            let modular = kahan_sum(vals.iter().map(|&v| sq.b(v))) / n as f64;
            if norm <= 1.0 {
                assert!(modular <= norm + 1e-9, "amp {amp}: {modular} > {norm}");
            } else {
                assert!(norm <= modular + 1e-9, "amp {amp}: {norm} > {modular}");
            }
        }
    }

    #[test]
    fn holder_bound_on_random_samples() {
        // |int u v| <= 2 ||u||_B ||v||_Bconj for B = t^2/2 (self-conjugate)
        let nf = NFunction::new("t^2/2", |t| 0.5 * t * t, |t| t).unwrap();
        let conj = nf.conjugate_nfunction(1e-12);
        let n = 512;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand01 = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let u: Vec<f64> = (0..n).map(|_| 2.0 * rand01() - 1.0).collect();
        let v: Vec<f64> = (0..n).map(|_| 2.0 * rand01() - 1.0).collect();
        let pairing = kahan_sum(u.iter().zip(&v).map(|(a, b)| a * b)) / n as f64;
        let mags_u: Vec<f64> = u.iter().map(|a| a.abs()).collect();
        let mags_v: Vec<f64> = v.iter().map(|a| a.abs()).collect();
        let nu = luxemburg_norm(
            &nf,
            &LuxemburgNormRequest::new(&mags_u, 1.0).unwrap(),
            1e-10,
        )
        .unwrap();
        let nv = luxemburg_norm(
            &conj,
            &LuxemburgNormRequest::new(&mags_v, 1.0).unwrap(),
            1e-10,
        )
        .unwrap();
        assert!(pairing.abs() <= 2.0 * nu * nv + 1e-9);
    }

    #[test]
    fn double_conjugate_recovers_b() {
        for nf in [
            power(2.0).unwrap(),
            power(3.0).unwrap(),
            plog(2.0, 1.0).unwrap(),
        ] {
            let conj = nf.conjugate_nfunction(1e-12);
            for t in geometric_grid(1e-2, 1e2, 64) {
                let double = conj.conjugate(t, 1e-12).unwrap();
                let direct = nf.b(t);
                assert!(
                    (double - direct).abs() <= 1e-6 * direct.max(1.0),
                    "{}: t = {t}, double = {double}, direct = {direct}",
                    nf.label()
                );
            }
        }
    }

    #[test]
    fn young_inequality_with_equality_at_density() {
        let nf = power(3.0).unwrap();
        let conj = nf.conjugate_nfunction(1e-12);
        for s in geometric_grid(1e-2, 1e2, 24) {
            for t in geometric_grid(1e-2, 1e2, 24) {
                let lhs = s * t;
                let rhs = nf.b(s) + conj.b(t);
                assert!(
                    lhs <= rhs + 1e-8 * rhs.max(1.0),
                    "Young fails at ({s}, {t})"
                );
            }
            // equality within tolerance at t = b(s)
            let t = nf.density(s);
            let gap = nf.b(s) + conj.b(t) - s * t;
            assert!(gap.abs() <= 1e-6 * (s * t).max(1.0), "gap {gap} at s = {s}");
        }
    }

    #[test]
    fn luxemburg_norm_of_sampled_field() {
        use crate::fields::{CellDomain, GridSpec, PeriodicField};
        let sq = square().unwrap();
        let f = PeriodicField::from_fn(CellDomain::Y, GridSpec::unit_cells(1, 256), 1, |x, _| {
            (std::f64::consts::TAU * x[0]).cos()
        });
        let norm = luxemburg_norm_field(&sq, &f, 1e-12).unwrap();
        assert!((norm - 0.5f64.sqrt()).abs() < 1e-9, "got {norm}");
    }

    #[test]
    fn catalog_lookup() {
        assert!(by_name("power:2").is_ok());
        assert!(by_name("plog:2,1").is_ok());
        assert!(by_name("exp").is_ok());
        assert!(matches!(by_name("bogus"), Err(Error::Config(_))));
    }

    #[test]
    fn from_eval_finite_difference_density() {
        let nf = NFunction::from_eval("fd-square", |t| t * t).unwrap();
        let (_, d) = nf.eval_pair(3.0).unwrap();
        assert!((d - 6.0).abs() < 1e-4);
    }

    #[test]
    fn concave_generator_rejected() {
        assert!(matches!(
            NFunction::new(
                "sqrt",
                |t: f64| t.sqrt(),
                |t: f64| 0.5 / t.sqrt().max(1e-300)
            ),
            Err(Error::InvalidNFunction(_))
        ));
    }
}
