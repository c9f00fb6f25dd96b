//! Sampled fields on periodic unit cells and on the macroscopic domain.
//!
//! Fields live on uniform tensor grids with the midpoint convention: axis `a`
//! with `n` points places samples at `origin + (i + 1/2) * len / n`. Midpoint
//! quadrature on a periodic axis is exact for trigonometric polynomials below
//! the Nyquist degree, which keeps quadrature error out of the convergence
//! studies.
//!
//! Periodic cells Y and Z are copies of the unit cube (-1/2, 1/2)^N.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

/// Which product of cells a field is sampled on. Metadata only; the grid
/// carries the actual axis layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellDomain {
    Y,
    Z,
    YxZ,
    OmegaYxZ,
    Omega,
}

/// One grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    /// Sample count (points per period for periodic axes).
    pub n: usize,
    /// Physical length of the axis.
    pub len: f64,
    /// Left end of the axis interval.
    pub origin: f64,
    pub periodic: bool,
}

impl AxisSpec {
    pub fn unit_cell(n: usize) -> Self {
        AxisSpec {
            n,
            len: 1.0,
            origin: -0.5,
            periodic: true,
        }
    }

    pub fn macro_axis(n: usize, len: f64) -> Self {
        AxisSpec {
            n,
            len,
            origin: 0.0,
            periodic: false,
        }
    }

    pub fn h(&self) -> f64 {
        self.len / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.h()
    }
}

/// Uniform tensor grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    pub fn new(axes: Vec<AxisSpec>) -> Self {
        GridSpec { axes }
    }

    /// N periodic unit-cell axes at a common resolution.
    pub fn unit_cells(naxes: usize, res: usize) -> Self {
        GridSpec {
            axes: vec![AxisSpec::unit_cell(res); naxes],
        }
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn points(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.h()).product()
    }

    pub fn measure(&self) -> f64 {
        self.axes.iter().map(|a| a.len).product()
    }

    /// Decode a flat index into per-axis indices (row-major, last axis fastest).
    pub fn unflatten(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.axes.len()).rev() {
            out[a] = idx % self.axes[a].n;
            idx /= self.axes[a].n;
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (a, &i) in idx.iter().enumerate() {
            flat = flat * self.axes[a].n + i;
        }
        flat
    }

    /// Flat index of the neighbour one step along `axis` (periodic wrap).
    /// Only valid on periodic axes.
    pub fn step(&self, flat: usize, axis: usize, delta: isize) -> usize {
        let mut idx = vec![0usize; self.ndim()];
        self.unflatten(flat, &mut idx);
        let n = self.axes[axis].n as isize;
        idx[axis] = (((idx[axis] as isize + delta) % n) + n) as usize % self.axes[axis].n;
        self.flatten(&idx)
    }

    pub fn coords(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0usize; self.ndim()];
        self.unflatten(flat, &mut idx);
        for a in 0..self.ndim() {
            out[a] = self.axes[a].coord(idx[a]);
        }
    }
}

/// Wrap a coordinate into the centered unit cell [-1/2, 1/2).
pub fn wrap_unit(x: f64) -> f64 {
    let w = x - x.round();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// Compensated (Kahan) sum; keeps quadrature deterministic and tight.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Finite-difference scheme for grid derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffScheme {
    /// Second-order central differences. Dimension-agnostic default.
    Central,
    /// Trigonometric differentiation; exact for band-limited fields.
    Spectral,
}

/// A dense sampled field on a tensor grid, value-semantic.
///
/// Layout: `values[point * components + c]` with points row-major over axes.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    pub cells: CellDomain,
    pub grid: GridSpec,
    pub components: usize,
    pub values: Vec<f64>,
}

/// Sidecar metadata for the on-disk field format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub cells: CellDomain,
    pub grid: GridSpec,
    pub components: usize,
}

impl PeriodicField {
    pub fn zeros(cells: CellDomain, grid: GridSpec, components: usize) -> Self {
        let n = grid.points() * components;
        PeriodicField {
            cells,
            grid,
            components,
            values: vec![0.0; n],
        }
    }

    /// Sample a function of the grid coordinates. `f(coords, component)`.
    pub fn from_fn(
        cells: CellDomain,
        grid: GridSpec,
        components: usize,
        f: impl Fn(&[f64], usize) -> f64,
    ) -> Self {
        let npts = grid.points();
        let mut values = vec![0.0; npts * components];
        let mut x = vec![0.0; grid.ndim()];
        for p in 0..npts {
            grid.coords(p, &mut x);
            for c in 0..components {
                values[p * components + c] = f(&x, c);
            }
        }
        PeriodicField {
            cells,
            grid,
            components,
            values,
        }
    }

    pub fn points(&self) -> usize {
        self.grid.points()
    }

    pub fn value(&self, point: usize, component: usize) -> f64 {
        self.values[point * self.components + component]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Midpoint-rule integral over the whole grid, per component.
    pub fn integrate(&self) -> Vec<f64> {
        let w = self.grid.cell_volume();
        (0..self.components)
            .map(|c| {
                w * kahan_sum((0..self.points()).map(|p| self.values[p * self.components + c]))
            })
            .collect()
    }

    /// Cell average per component.
    pub fn mean(&self) -> Vec<f64> {
        let m = self.grid.measure();
        self.integrate().into_iter().map(|v| v / m).collect()
    }

    /// Subtract the cell average, component-wise. Idempotent.
    pub fn project_mean_zero(&self) -> Self {
        let means = self.mean();
        let mut out = self.clone();
        for p in 0..self.points() {
            for c in 0..self.components {
                out.values[p * self.components + c] -= means[c];
            }
        }
        out
    }

    /// Pointwise Euclidean magnitude across components.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.points())
            .map(|p| {
                (0..self.components)
                    .map(|c| self.value(p, c).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    fn require_periodic(&self) -> Result<()> {
        if self.grid.axes.iter().any(|a| !a.periodic) {
            return Err(Error::Contract(
                "grid differentiation requires periodic axes".into(),
            ));
        }
        if self.grid.axes.iter().any(|a| a.n < 8) {
            return Err(Error::Contract(
                "grid differentiation requires at least 8 points per axis".into(),
            ));
        }
        Ok(())
    }

    /// Periodic derivative along every axis.
    ///
    /// Output has `components * ndim` components laid out `[c * ndim + axis]`.
    pub fn gradient(&self, scheme: DiffScheme) -> Result<PeriodicField> {
        self.require_periodic()?;
        let ndim = self.grid.ndim();
        let mut out = PeriodicField::zeros(self.cells, self.grid.clone(), self.components * ndim);
        match scheme {
            DiffScheme::Central => {
                for axis in 0..ndim {
                    let h = self.grid.axes[axis].h();
                    for p in 0..self.points() {
                        let fw = self.grid.step(p, axis, 1);
                        let bw = self.grid.step(p, axis, -1);
                        for c in 0..self.components {
                            let d = (self.value(fw, c) - self.value(bw, c)) / (2.0 * h);
                            out.values[p * out.components + c * ndim + axis] = d;
                        }
                    }
                }
            }
            DiffScheme::Spectral => {
                for axis in 0..ndim {
                    for c in 0..self.components {
                        self.spectral_axis_derivative(axis, c, &mut out, ndim);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Derivative along one axis for one component, written into `out` at
    /// component `c * ndim + axis`. Direct trigonometric interpolation, O(n^2)
    /// per grid line; fine at verification resolutions.
    fn spectral_axis_derivative(
        &self,
        axis: usize,
        c: usize,
        out: &mut PeriodicField,
        ndim: usize,
    ) {
        let n = self.grid.axes[axis].n;
        let len = self.grid.axes[axis].len;
        let nlines = self.points() / n;
        // stride between consecutive points along `axis`
        let stride: usize = self.grid.axes[axis + 1..].iter().map(|a| a.n).product();
        let block = stride * n;
        for line in 0..nlines {
            let base = (line / stride) * block + (line % stride);
            let mut samples = Vec::with_capacity(n);
            for i in 0..n {
                samples.push(self.value(base + i * stride, c));
            }
            let deriv = spectral_derivative_line(&samples, len);
            for i in 0..n {
                out.values[(base + i * stride) * out.components + c * ndim + axis] = deriv[i];
            }
        }
    }

    /// Second derivatives along every axis pair: gradient applied twice, then
    /// symmetrized. Output components laid out `[c * ndim * ndim + a * ndim + b]`.
    pub fn hessian(&self, scheme: DiffScheme) -> Result<PeriodicField> {
        let ndim = self.grid.ndim();
        let g = self.gradient(scheme)?;
        let gg = g.gradient(scheme)?;
        // gg component layout: [(c * ndim + a) * ndim + b]
        let mut out =
            PeriodicField::zeros(self.cells, self.grid.clone(), self.components * ndim * ndim);
        for p in 0..self.points() {
            for c in 0..self.components {
                for a in 0..ndim {
                    for b in 0..ndim {
                        let ab = gg.value(p, (c * ndim + a) * ndim + b);
                        let ba = gg.value(p, (c * ndim + b) * ndim + a);
                        out.values[p * out.components + c * ndim * ndim + a * ndim + b] =
                            0.5 * (ab + ba);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Multilinear interpolation at an arbitrary point, wrapping periodic axes.
    pub fn interp(&self, x: &[f64], component: usize) -> f64 {
        let ndim = self.grid.ndim();
        debug_assert_eq!(x.len(), ndim);
        // per-axis lower index + weight
        let mut i0 = vec![0usize; ndim];
        let mut w = vec![0.0; ndim];
        for a in 0..ndim {
            let ax = &self.grid.axes[a];
            let t = (x[a] - ax.origin) / ax.h() - 0.5;
            if ax.periodic {
                let n = ax.n as f64;
                let t = t.rem_euclid(n);
                let fl = t.floor();
                i0[a] = (fl as usize) % ax.n;
                w[a] = t - fl;
            } else {
                let t = t.clamp(0.0, (ax.n - 1) as f64);
                let fl = t.floor().min(ax.n.saturating_sub(2) as f64);
                i0[a] = fl as usize;
                w[a] = t - fl;
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << ndim) {
            let mut weight = 1.0;
            let mut idx = vec![0usize; ndim];
            for a in 0..ndim {
                if corner >> a & 1 == 1 {
                    weight *= w[a];
                    idx[a] = if self.grid.axes[a].periodic {
                        (i0[a] + 1) % self.grid.axes[a].n
                    } else {
                        (i0[a] + 1).min(self.grid.axes[a].n - 1)
                    };
                } else {
                    weight *= 1.0 - w[a];
                    idx[a] = i0[a];
                }
            }
            if weight != 0.0 {
                acc += weight * self.value(self.grid.flatten(&idx), component);
            }
        }
        acc
    }

    /// Write `<prefix>.bin` (row-major little-endian f64) and `<prefix>.json`.
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let sidecar = FieldSidecar {
            cells: self.cells,
            grid: self.grid.clone(),
            components: self.components,
        };
        let json = serde_json::to_string_pretty(&sidecar)?;
        std::fs::write(prefix.with_extension("json"), json)?;
        let mut bin = std::fs::File::create(prefix.with_extension("bin"))?;
        for v in &self.values {
            bin.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(prefix: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(prefix.with_extension("json"))?;
        let sidecar: FieldSidecar = serde_json::from_str(&json)?;
        let mut raw = Vec::new();
        std::fs::File::open(prefix.with_extension("bin"))?.read_to_end(&mut raw)?;
        let expect = sidecar.grid.points() * sidecar.components;
        if raw.len() != expect * 8 {
            return Err(Error::Data(format!(
                "field binary has {} bytes, expected {}",
                raw.len(),
                expect * 8
            )));
        }
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(PeriodicField {
            cells: sidecar.cells,
            grid: sidecar.grid,
            components: sidecar.components,
            values,
        })
    }

    /// CSV export of a 1-D field (or of one component along the only axis).
    pub fn to_csv_1d(&self, component: usize) -> Result<String> {
        if self.grid.ndim() != 1 {
            return Err(Error::Contract("CSV export is for 1-D fields".into()));
        }
        let mut s = String::from("x,value\n");
        for i in 0..self.points() {
            s.push_str(&format!(
                "{:.16e},{:.16e}\n",
                self.grid.axes[0].coord(i),
                self.value(i, component)
            ));
        }
        Ok(s)
    }
}

/// Trigonometric derivative of one periodic sample line.
fn spectral_derivative_line(samples: &[f64], len: f64) -> Vec<f64> {
    let n = samples.len();
    let mut deriv = vec![0.0; n];
    // Real DFT coefficients for k = 1..n/2 (mode 0 has zero derivative; the
    // Nyquist mode of an even n carries no usable first-derivative phase).
    let kmax = (n - 1) / 2;
    let tau = std::f64::consts::TAU;
    for k in 1..=kmax {
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, &v) in samples.iter().enumerate() {
            let phase = tau * (k * j) as f64 / n as f64;
            re += v * phase.cos();
            im -= v * phase.sin();
        }
        re *= 2.0 / n as f64;
        im *= 2.0 / n as f64;
        let omega = tau * k as f64 / len;
        for (j, d) in deriv.iter_mut().enumerate() {
            let phase = tau * (k * j) as f64 / n as f64;
            // d/dx Re[(re + i im) e^{i omega x}] sampled at grid points
            *d += omega * (-re * phase.sin() - im * phase.cos());
        }
    }
    deriv
}

/// Boundary data for the macroscopic problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BoundaryData {
    /// u(x) = xi0 . x, with `gradient` in d x N layout.
    Affine { gradient: Vec<f64> },
    /// u(x) = 1/2 x^T Q x per component, with `hessian` in d x N x N layout.
    Quadratic { hessian: Vec<f64> },
}

impl BoundaryData {
    /// Evaluate the boundary datum for component `c` at `x` (N space dims).
    pub fn eval(&self, x: &[f64], c: usize, space: usize) -> f64 {
        match self {
            BoundaryData::Affine { gradient } => {
                (0..space).map(|a| gradient[c * space + a] * x[a]).sum()
            }
            BoundaryData::Quadratic { hessian } => {
                let mut acc = 0.0;
                for a in 0..space {
                    for b in 0..space {
                        acc += 0.5 * hessian[c * space * space + a * space + b] * x[a] * x[b];
                    }
                }
                acc
            }
        }
    }
}

/// The macroscopic domain Omega = (0, L)^N with its sampling resolution and
/// Dirichlet data.
#[derive(Debug, Clone)]
pub struct MacroGrid {
    pub space: usize,
    pub length: f64,
    /// Cells per axis; node grids carry n + 1 points per axis.
    pub n: usize,
    pub boundary: BoundaryData,
}

impl MacroGrid {
    pub fn new(space: usize, length: f64, n: usize, boundary: BoundaryData) -> Self {
        MacroGrid {
            space,
            length,
            n,
            boundary,
        }
    }

    pub fn unit_affine_1d(n: usize, xi0: f64) -> Self {
        MacroGrid::new(
            1,
            1.0,
            n,
            BoundaryData::Affine {
                gradient: vec![xi0],
            },
        )
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn measure(&self) -> f64 {
        self.length.powi(self.space as i32)
    }

    /// Check that `epsilon` oscillations are grid-exact: 1/eps and 1/eps^2
    /// must divide the per-axis point count times L.
    pub fn check_commensurate(&self, epsilon: f64) -> Result<()> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Incommensurate(format!(
                "epsilon {epsilon} outside (0, 1]"
            )));
        }
        let nl = self.n as f64 * self.length;
        for scale in [1.0 / epsilon, 1.0 / (epsilon * epsilon)] {
            if (scale - scale.round()).abs() > 1e-9 {
                return Err(Error::Incommensurate(format!(
                    "1/eps = {scale} is not an integer"
                )));
            }
            let ratio = nl / scale;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.abs().max(1.0) {
                return Err(Error::Incommensurate(format!(
                    "period 1/{scale} does not divide n*L = {nl}"
                )));
            }
        }
        Ok(())
    }
}

/// Convenience alias used by generator-driven sequences.
pub type Generator3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn unit_field_1d(res: usize, f: impl Fn(f64) -> f64) -> PeriodicField {
        PeriodicField::from_fn(CellDomain::Y, GridSpec::unit_cells(1, res), 1, |x, _| {
            f(x[0])
        })
    }

    #[test]
    fn integrate_sin_squared_is_exact() {
        let f = unit_field_1d(64, |y| (TAU * y).sin().powi(2));
        let v = f.integrate()[0];
        assert!((v - 0.5).abs() < 1e-14, "got {v}");
    }

    #[test]
    fn integrate_constant() {
        let f = unit_field_1d(16, |_| 3.0);
        assert!((f.integrate()[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn integrate_odd_mode_on_product_cell() {
        let grid = GridSpec::unit_cells(2, 16);
        let f = PeriodicField::from_fn(CellDomain::YxZ, grid, 1, |x, _| {
            (TAU * x[0]).sin() * (TAU * x[1]).cos()
        });
        assert!(f.integrate()[0].abs() < 1e-14);
    }

    #[test]
    fn spectral_gradient_of_sine_is_machine_exact() {
        let f = unit_field_1d(32, |y| (TAU * y).sin());
        let g = f.gradient(DiffScheme::Spectral).unwrap();
        let mut max_err = 0.0f64;
        for i in 0..32 {
            let y = f.grid.axes[0].coord(i);
            max_err = max_err.max((g.value(i, 0) - TAU * (TAU * y).cos()).abs());
        }
        assert!(max_err < 1e-11, "max err {max_err}");
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let f = unit_field_1d(16, |_| 5.0);
        for scheme in [DiffScheme::Central, DiffScheme::Spectral] {
            let g = f.gradient(scheme).unwrap();
            assert!(g.values.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn central_gradient_second_order_bound() {
        let res = 64;
        let f = unit_field_1d(res, |y| (TAU * y).sin());
        let g = f.gradient(DiffScheme::Central).unwrap();
        // Taylor remainder of the central difference for sin(2 pi y)
        let bound = TAU.powi(3) / (6.0 * (res * res) as f64);
        let mut max_err = 0.0f64;
        for i in 0..res {
            let y = f.grid.axes[0].coord(i);
            max_err = max_err.max((g.value(i, 0) - TAU * (TAU * y).cos()).abs());
        }
        assert!(max_err <= bound * 1.01, "err {max_err} > bound {bound}");
    }

    #[test]
    fn spectral_hessian_of_sine() {
        let f = unit_field_1d(32, |y| (TAU * y).sin());
        let h = f.hessian(DiffScheme::Spectral).unwrap();
        for i in 0..32 {
            let y = f.grid.axes[0].coord(i);
            let expect = -TAU * TAU * (TAU * y).sin();
            assert!((h.value(i, 0) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn hessian_of_y_only_field_has_zero_z_block() {
        let grid = GridSpec::unit_cells(2, 16);
        let f = PeriodicField::from_fn(CellDomain::YxZ, grid, 1, |x, _| (TAU * x[0]).cos());
        let h = f.hessian(DiffScheme::Central).unwrap();
        // components [a*2+b]: the (1,1) entry is the z-z second derivative
        for p in 0..f.points() {
            assert!(h.value(p, 3).abs() < 1e-12);
            assert!(h.value(p, 1).abs() < 1e-12);
            assert!(h.value(p, 2).abs() < 1e-12);
        }
    }

    #[test]
    fn project_mean_zero_examples() {
        let c = unit_field_1d(16, |_| 5.0).project_mean_zero();
        assert!(c.values.iter().all(|v| v.abs() < 1e-14));

        let f = unit_field_1d(64, |y| (TAU * y).sin() + 1.0).project_mean_zero();
        for i in 0..64 {
            let y = f.grid.axes[0].coord(i);
            assert!((f.value(i, 0) - (TAU * y).sin()).abs() < 1e-13);
        }

        let again = f.project_mean_zero();
        assert_eq!(f, again, "projection must be idempotent");
    }

    #[test]
    fn integral_of_gradient_vanishes() {
        let f = unit_field_1d(32, |y| (TAU * y).sin().exp());
        for scheme in [DiffScheme::Central, DiffScheme::Spectral] {
            let g = f.gradient(scheme).unwrap();
            assert!(g.integrate()[0].abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_unchanged_by_mean_projection() {
        let f = unit_field_1d(32, |y| (TAU * y).cos() + 2.5);
        let g1 = f.gradient(DiffScheme::Central).unwrap();
        let g2 = f.project_mean_zero().gradient(DiffScheme::Central).unwrap();
        for (a, b) in g1.values.iter().zip(&g2.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn interp_reproduces_nodes_and_wraps() {
        let f = unit_field_1d(16, |y| (TAU * y).sin());
        for i in 0..16 {
            let y = f.grid.axes[0].coord(i);
            assert!((f.interp(&[y], 0) - f.value(i, 0)).abs() < 1e-14);
            assert!((f.interp(&[y + 3.0], 0) - f.value(i, 0)).abs() < 1e-13);
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = std::env::temp_dir().join("reithom_field_test");
        std::fs::create_dir_all(&dir).unwrap();
        let f = unit_field_1d(16, |y| y * y);
        let prefix = dir.join("field");
        f.save(&prefix).unwrap();
        let g = PeriodicField::load(&prefix).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_export_1d() {
        let f = unit_field_1d(8, |y| y);
        let csv = f.to_csv_1d(0).unwrap();
        assert!(csv.starts_with("x,value\n"));
        assert_eq!(csv.lines().count(), 9);
        let grid2 = GridSpec::unit_cells(2, 8);
        let f2 = PeriodicField::zeros(CellDomain::YxZ, grid2, 1);
        assert!(f2.to_csv_1d(0).is_err());
    }

    #[test]
    fn commensurability_checks() {
        let grid = MacroGrid::unit_affine_1d(1024, 1.0);
        assert!(grid.check_commensurate(0.25).is_ok());
        assert!(grid.check_commensurate(1.0 / 3.0).is_err());
        // 1/eps^2 = 4096 does not divide 1024
        assert!(grid.check_commensurate(1.0 / 64.0).is_err());
    }

    #[test]
    fn wrap_unit_convention() {
        assert!((wrap_unit(0.75) - (-0.25)).abs() < 1e-15);
        assert!((wrap_unit(-0.75) - 0.25).abs() < 1e-15);
        assert_eq!(wrap_unit(0.5), -0.5);
        assert!((wrap_unit(3.25) - 0.25).abs() < 1e-15);
    }
}
