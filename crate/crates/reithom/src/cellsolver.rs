//! Inner and outer periodic cell problems.
//!
//! The inner problem freezes the slow variable y and minimizes
//! int_Z f(y, z, xi + D^s psi(z)) dz over mean-zero periodic correctors psi;
//! its value is the level-one effective density. The outer problem repeats
//! the construction on Y with the tabulated inner density in place of f and
//! yields the fully homogenized density.
//!
//! Discretization: correctors are sampled on the midpoint grid of the unit
//! cell. For s = 1 the gradient is the forward difference per axis with the
//! coefficient evaluated at the dual point, so the 1-D discrete minimum is
//! exactly the midpoint-quadrature harmonic mean. For s = 2 the hessian uses
//! the compact 3-point / cross stencils at the nodes.

use crate::error::{Error, Result};
use crate::fields::{kahan_sum, wrap_unit, CellDomain, GridSpec, PeriodicField};
use crate::integrand::{Dims, Integrand, Order};
use crate::solver::{minimize, Objective, SolveResult, SolverParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::{Cell, RefCell};
use std::io::{Read, Write};
use std::path::Path;

/// Which level of the reiterated construction a problem solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Inner,
    Outer,
}

/// One corrector minimization.
#[derive(Debug, Clone)]
pub struct CellProblem {
    pub integrand: Integrand,
    pub level: Level,
    /// Frozen slow point for inner problems (length N).
    pub frozen_y: Vec<f64>,
    /// Applied gradient / hessian, flat d x N or d x N x N.
    pub xi: Vec<f64>,
    /// Points per period per axis.
    pub resolution: usize,
    pub params: SolverParams,
}

impl CellProblem {
    pub fn inner(
        integrand: Integrand,
        frozen_y: Vec<f64>,
        xi: Vec<f64>,
        resolution: usize,
    ) -> Self {
        CellProblem {
            integrand,
            level: Level::Inner,
            frozen_y,
            xi,
            resolution,
            params: SolverParams::default(),
        }
    }

    pub fn outer(integrand: Integrand, xi: Vec<f64>, resolution: usize) -> Self {
        CellProblem {
            integrand,
            level: Level::Outer,
            frozen_y: Vec::new(),
            xi,
            resolution,
            params: SolverParams::default(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.resolution < 8 {
            return Err(Error::Contract(format!(
                "cell resolution {} below the minimum of 8",
                self.resolution
            )));
        }
        if self.xi.len() != self.integrand.xi_len() {
            return Err(Error::Contract(format!(
                "xi length {} does not match integrand ({})",
                self.xi.len(),
                self.integrand.xi_len()
            )));
        }
        if !self.xi.iter().all(|v| v.is_finite()) {
            return Err(Error::Data("xi has non-finite entries".into()));
        }
        if self.level == Level::Inner && self.frozen_y.len() != self.integrand.dims().space {
            return Err(Error::Contract(format!(
                "frozen_y length {} does not match N = {}",
                self.frozen_y.len(),
                self.integrand.dims().space
            )));
        }
        Ok(())
    }
}

/// A minimizing corrector with the attained energy and solver diagnostics.
#[derive(Debug, Clone)]
pub struct CellSolution {
    /// The attained effective-density value.
    pub energy: f64,
    pub corrector: PeriodicField,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub converged: bool,
    /// Energy of the zero corrector; the infimum never exceeds it.
    pub zero_candidate_energy: f64,
}

/// Pointwise density seen by the corrector assembly: either the integrand at
/// a frozen y (inner) or the tabulated level-one density (outer).
trait LocalDensity {
    fn eval_grad(&self, pos: &[f64], xi_loc: &[f64], grad: &mut [f64]) -> f64;
    /// Called once per objective evaluation with the visited xi range, before
    /// any pointwise evaluation. Tables use it to auto-extend.
    fn prepare(&self, _xi_range: &[(f64, f64)]) {}
}

struct InnerDensity<'a> {
    integrand: &'a Integrand,
    frozen_y: Vec<f64>,
}

impl LocalDensity for InnerDensity<'_> {
    #[inline]
    fn eval_grad(&self, pos: &[f64], xi_loc: &[f64], grad: &mut [f64]) -> f64 {
        self.integrand.grad_raw(&self.frozen_y, pos, xi_loc, grad);
        self.integrand.eval_raw(&self.frozen_y, pos, xi_loc)
    }
}

/// Corrector objective shared by both levels and both orders.
struct CorrectorObjective<D: LocalDensity> {
    density: D,
    order: Order,
    dims: Dims,
    npts: usize,
    h: f64,
    w: f64,
    /// forward / backward neighbour index per point and axis, [pt * N + a]
    fw: Vec<usize>,
    bw: Vec<usize>,
    /// wrapped evaluation coordinates per point, [pt * N + a]
    pos: Vec<f64>,
    xi: Vec<f64>,
}

impl<D: LocalDensity> CorrectorObjective<D> {
    fn new(density: D, order: Order, dims: Dims, resolution: usize, xi: Vec<f64>) -> Self {
        let n = dims.space;
        let grid = GridSpec::unit_cells(n, resolution);
        let npts = grid.points();
        let h = 1.0 / resolution as f64;
        let w = grid.cell_volume();
        let mut fw = vec![0usize; npts * n];
        let mut bw = vec![0usize; npts * n];
        let mut pos = vec![0.0; npts * n];
        let mut coords = vec![0.0; n];
        for pt in 0..npts {
            grid.coords(pt, &mut coords);
            for a in 0..n {
                fw[pt * n + a] = grid.step(pt, a, 1);
                bw[pt * n + a] = grid.step(pt, a, -1);
                // s = 1 evaluates at the dual point between pt and its forward
                // neighbour; s = 2 collocates at the node
                pos[pt * n + a] = match order {
                    Order::One => wrap_unit(coords[a] + 0.5 * h),
                    Order::Two => coords[a],
                };
            }
        }
        CorrectorObjective {
            density,
            order,
            dims,
            npts,
            h,
            w,
            fw,
            bw,
            pos,
            xi,
        }
    }

    fn xi_local(&self, x: &[f64], pt: usize, out: &mut [f64]) {
        let n = self.dims.space;
        let d = self.dims.target;
        match self.order {
            Order::One => {
                for c in 0..d {
                    for a in 0..n {
                        let q = self.fw[pt * n + a];
                        out[c * n + a] =
                            self.xi[c * n + a] + (x[q * d + c] - x[pt * d + c]) / self.h;
                    }
                }
            }
            Order::Two => {
                let h2 = self.h * self.h;
                for c in 0..d {
                    for a in 0..n {
                        let fa = self.fw[pt * n + a];
                        let ba = self.bw[pt * n + a];
                        out[c * n * n + a * n + a] = self.xi[c * n * n + a * n + a]
                            + (x[fa * d + c] - 2.0 * x[pt * d + c] + x[ba * d + c]) / h2;
                        for b in (a + 1)..n {
                            let fafb = self.fw[fa * n + b];
                            let fabb = self.bw[fa * n + b];
                            let bafb = self.fw[ba * n + b];
                            let babb = self.bw[ba * n + b];
                            let cross = (x[fafb * d + c] - x[fabb * d + c] - x[bafb * d + c]
                                + x[babb * d + c])
                                / (4.0 * h2);
                            out[c * n * n + a * n + b] = self.xi[c * n * n + a * n + b] + cross;
                            out[c * n * n + b * n + a] = self.xi[c * n * n + b * n + a] + cross;
                        }
                    }
                }
            }
        }
    }
}

impl<D: LocalDensity> Objective for CorrectorObjective<D> {
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.dims.space;
        let d = self.dims.target;
        let xi_len = self.xi.len();
        let mut xi_loc = vec![0.0; xi_len];
        let mut fxi = vec![0.0; xi_len];
        grad.fill(0.0);

        // visited range per xi entry, for table auto-extension
        let mut range = vec![(f64::INFINITY, f64::NEG_INFINITY); xi_len];
        for pt in 0..self.npts {
            self.xi_local(x, pt, &mut xi_loc);
            for (k, v) in xi_loc.iter().enumerate() {
                range[k].0 = range[k].0.min(*v);
                range[k].1 = range[k].1.max(*v);
            }
        }
        self.density.prepare(&range);

        let mut energy = 0.0;
        let mut comp = 0.0;
        for pt in 0..self.npts {
            self.xi_local(x, pt, &mut xi_loc);
            let f = self
                .density
                .eval_grad(&self.pos[pt * n..(pt + 1) * n], &xi_loc, &mut fxi);
            if !f.is_finite() {
                return f64::INFINITY;
            }
            // Kahan accumulation
            let y = self.w * f - comp;
            let t = energy + y;
            comp = (t - energy) - y;
            energy = t;

            match self.order {
                Order::One => {
                    for c in 0..d {
                        for a in 0..n {
                            let g = self.w / self.h * fxi[c * n + a];
                            let q = self.fw[pt * n + a];
                            grad[q * d + c] += g;
                            grad[pt * d + c] -= g;
                        }
                    }
                }
                Order::Two => {
                    let h2 = self.h * self.h;
                    for c in 0..d {
                        for a in 0..n {
                            let fa = self.fw[pt * n + a];
                            let ba = self.bw[pt * n + a];
                            let g = self.w / h2 * fxi[c * n * n + a * n + a];
                            grad[fa * d + c] += g;
                            grad[pt * d + c] -= 2.0 * g;
                            grad[ba * d + c] += g;
                            for b in (a + 1)..n {
                                let gc = self.w / (4.0 * h2)
                                    * (fxi[c * n * n + a * n + b] + fxi[c * n * n + b * n + a]);
                                let fafb = self.fw[fa * n + b];
                                let fabb = self.bw[fa * n + b];
                                let bafb = self.fw[ba * n + b];
                                let babb = self.bw[ba * n + b];
                                grad[fafb * d + c] += gc;
                                grad[fabb * d + c] -= gc;
                                grad[bafb * d + c] -= gc;
                                grad[babb * d + c] += gc;
                            }
                        }
                    }
                }
            }
        }
        energy
    }

    fn project_point(&self, x: &mut [f64]) {
        project_mean_zero_components(x, self.dims.target, self.npts);
    }

    fn project_grad(&self, g: &mut [f64]) {
        project_mean_zero_components(g, self.dims.target, self.npts);
    }
}

fn project_mean_zero_components(x: &mut [f64], d: usize, npts: usize) {
    for c in 0..d {
        let mean = (0..npts).map(|p| x[p * d + c]).sum::<f64>() / npts as f64;
        for p in 0..npts {
            x[p * d + c] -= mean;
        }
    }
}

/// One-dimensional corrector problems restated in flux variables
/// v = xi + D^s psi: the feasible set {mean v = xi} is the exact image of the
/// periodic correctors, the energy is pointwise in v, and the Hessian becomes
/// diagonal, which removes the mesh-induced conditioning from the descent.
/// The corrector is recovered from the minimizing flux by periodic
/// integration.
struct FluxObjective<D: LocalDensity> {
    density: D,
    d: usize,
    npts: usize,
    w: f64,
    /// wrapped evaluation coordinate per point
    pos: Vec<f64>,
    /// target mean per component
    xi: Vec<f64>,
}

impl<D: LocalDensity> FluxObjective<D> {
    fn new(density: D, order: Order, d: usize, resolution: usize, xi: Vec<f64>) -> Self {
        let h = 1.0 / resolution as f64;
        let pos = (0..resolution)
            .map(|i| {
                let node = -0.5 + (i as f64 + 0.5) * h;
                match order {
                    // s = 1 fluxes live on the dual points, s = 2 at the nodes
                    Order::One => wrap_unit(node + 0.5 * h),
                    Order::Two => node,
                }
            })
            .collect();
        FluxObjective {
            density,
            d,
            npts: resolution,
            w: h,
            pos,
            xi,
        }
    }
}

impl<D: LocalDensity> Objective for FluxObjective<D> {
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.d;
        let mut range = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for pt in 0..self.npts {
            for c in 0..d {
                let v = x[pt * d + c];
                range[c].0 = range[c].0.min(v);
                range[c].1 = range[c].1.max(v);
            }
        }
        self.density.prepare(&range);

        let mut energy = 0.0;
        let mut comp = 0.0;
        for pt in 0..self.npts {
            let f = self.density.eval_grad(
                &self.pos[pt..pt + 1],
                &x[pt * d..(pt + 1) * d],
                &mut grad[pt * d..(pt + 1) * d],
            );
            if !f.is_finite() {
                return f64::INFINITY;
            }
            for g in &mut grad[pt * d..(pt + 1) * d] {
                *g *= self.w;
            }
            let y = self.w * f - comp;
            let t = energy + y;
            comp = (t - energy) - y;
            energy = t;
        }
        energy
    }

    fn project_point(&self, x: &mut [f64]) {
        for c in 0..self.d {
            let mean = (0..self.npts).map(|p| x[p * self.d + c]).sum::<f64>() / self.npts as f64;
            let shift = self.xi[c] - mean;
            for p in 0..self.npts {
                x[p * self.d + c] += shift;
            }
        }
    }

    fn project_grad(&self, g: &mut [f64]) {
        project_mean_zero_components(g, self.d, self.npts);
    }
}

/// Rebuild the periodic corrector from its minimizing flux.
fn corrector_from_flux(order: Order, d: usize, res: usize, xi: &[f64], v: &[f64]) -> Vec<f64> {
    let h = 1.0 / res as f64;
    let mut psi = vec![0.0; res * d];
    match order {
        Order::One => {
            // psi' = v - xi on the dual points: cumulative sum node by node
            for c in 0..d {
                let mut acc = 0.0;
                for i in 0..res - 1 {
                    acc += h * (v[i * d + c] - xi[c]);
                    psi[(i + 1) * d + c] = acc;
                }
            }
        }
        Order::Two => {
            // psi'' = v - xi at the nodes: invert the periodic 3-point
            // stencil mode by mode (direct DFT; done once per solve)
            let tau = std::f64::consts::TAU;
            for c in 0..d {
                let g: Vec<f64> = (0..res).map(|i| v[i * d + c] - xi[c]).collect();
                for k in 1..res {
                    let mu = (2.0 * (tau * k as f64 / res as f64).cos() - 2.0) / (h * h);
                    let mut re = 0.0;
                    let mut im = 0.0;
                    for (j, &gj) in g.iter().enumerate() {
                        let phase = tau * (k * j) as f64 / res as f64;
                        re += gj * phase.cos();
                        im -= gj * phase.sin();
                    }
                    re /= res as f64 * mu;
                    im /= res as f64 * mu;
                    for (j, p) in psi.iter_mut().skip(c).step_by(d).enumerate() {
                        let phase = tau * (k * j) as f64 / res as f64;
                        *p += re * phase.cos() - im * phase.sin();
                    }
                }
            }
        }
    }
    // mean-zero per component
    project_mean_zero_components(&mut psi, d, res);
    psi
}

fn solution_from(
    result: SolveResult,
    zero_energy: f64,
    cells: CellDomain,
    dims: Dims,
    res: usize,
) -> CellSolution {
    let grid = GridSpec::unit_cells(dims.space, res);
    let corrector = PeriodicField {
        cells,
        grid,
        components: dims.target,
        values: result.x,
    };
    CellSolution {
        energy: result.energy,
        corrector,
        iterations: result.iterations,
        final_grad_norm: result.grad_norm,
        converged: result.converged,
        zero_candidate_energy: zero_energy,
    }
}

/// Minimize the inner cell energy; the returned energy approximates the
/// level-one effective density at (frozen_y, xi).
pub fn solve_inner(cp: &CellProblem) -> Result<CellSolution> {
    cp.check()?;
    if cp.level != Level::Inner {
        return Err(Error::Contract(
            "solve_inner requires an inner-level problem".into(),
        ));
    }
    if !cp.integrand.differentiable() {
        return Err(Error::Nonsmooth(format!(
            "integrand {} is not differentiable in xi; set a regularization delta",
            cp.integrand.label()
        )));
    }
    let dims = cp.integrand.dims();
    let frozen: Vec<f64> = cp.frozen_y.iter().map(|&v| wrap_unit(v)).collect();
    let xi = cp.integrand.symmetrized(&cp.xi);
    let density = InnerDensity {
        integrand: &cp.integrand,
        frozen_y: frozen,
    };
    if dims.space == 1 {
        let (result, zero_energy) = flux_minimize(
            density,
            cp.integrand.order(),
            dims.target,
            cp.resolution,
            &xi,
            &cp.params,
        );
        return Ok(solution_from(
            result,
            zero_energy,
            CellDomain::Z,
            dims,
            cp.resolution,
        ));
    }
    let obj = CorrectorObjective::new(density, cp.integrand.order(), dims, cp.resolution, xi);
    let nvars = obj.npts * dims.target;
    let mut scratch = vec![0.0; nvars];
    let zero_energy = obj.eval(&vec![0.0; nvars], &mut scratch);
    let result = minimize(&obj, vec![0.0; nvars], &cp.params);
    Ok(solution_from(
        result,
        zero_energy,
        CellDomain::Z,
        dims,
        cp.resolution,
    ))
}

/// Run the 1-D flux-form descent and translate the minimizing flux back to a
/// corrector-sample solve result.
fn flux_minimize<D: LocalDensity>(
    density: D,
    order: Order,
    d: usize,
    resolution: usize,
    xi: &[f64],
    params: &SolverParams,
) -> (SolveResult, f64) {
    let obj = FluxObjective::new(density, order, d, resolution, xi.to_vec());
    let nvars = resolution * d;
    // start at the zero corrector: constant flux xi
    let mut v0 = vec![0.0; nvars];
    for pt in 0..resolution {
        v0[pt * d..(pt + 1) * d].copy_from_slice(xi);
    }
    let mut scratch = vec![0.0; nvars];
    let zero_energy = obj.eval(&v0, &mut scratch);
    let mut result = minimize(&obj, v0, params);
    result.x = corrector_from_flux(order, d, resolution, xi, &result.x);
    (result, zero_energy)
}

/// Cell energy of a given corrector (inner level); lets callers check
/// admissibility of explicit candidates.
pub fn inner_energy(
    ig: &Integrand,
    frozen_y: &[f64],
    xi: &[f64],
    psi: &PeriodicField,
) -> Result<f64> {
    let dims = ig.dims();
    if psi.components != dims.target || psi.grid.ndim() != dims.space {
        return Err(Error::Contract(
            "corrector shape does not match integrand".into(),
        ));
    }
    let frozen: Vec<f64> = frozen_y.iter().map(|&v| wrap_unit(v)).collect();
    let obj = CorrectorObjective::new(
        InnerDensity {
            integrand: ig,
            frozen_y: frozen,
        },
        ig.order(),
        dims,
        psi.grid.axes[0].n,
        ig.symmetrized(xi),
    );
    let mut scratch = vec![0.0; psi.values.len()];
    Ok(obj.eval(&psi.values, &mut scratch))
}

// ---------------------------------------------------------------------------
// Tabulated effective densities
// ---------------------------------------------------------------------------

/// One axis of the xi lattice.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LatticeAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl LatticeAxis {
    pub fn spacing(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.max - self.min) / (self.count - 1) as f64
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.min + self.spacing() * i as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub axes: Vec<LatticeAxis>,
}

impl LatticeSpec {
    pub fn uniform_1d(min: f64, max: f64, count: usize) -> Self {
        LatticeSpec {
            axes: vec![LatticeAxis { min, max, count }],
        }
    }

    pub fn points(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn unflatten(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.axes.len()).rev() {
            out[a] = idx % self.axes[a].count;
            idx /= self.axes[a].count;
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (a, &i) in idx.iter().enumerate() {
            flat = flat * self.axes[a].count + i;
        }
        flat
    }

    pub fn node_coords(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0usize; self.axes.len()];
        self.unflatten(flat, &mut idx);
        for a in 0..self.axes.len() {
            out[a] = self.axes[a].node(idx[a]);
        }
    }
}

/// Whether a table stores the level-one density per y-sample or the fully
/// homogenized density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// y samples sit at the dual points -1/2 + (j+1)/m per axis, matching the
    /// outer solver's coefficient collocation.
    Inner {
        y_per_axis: usize,
    },
    Outer,
}

/// Tabulated effective density with multilinear interpolation in xi and
/// nearest-sample lookup in y.
#[derive(Debug, Clone)]
pub struct HomTable {
    pub kind: TableKind,
    pub space: usize,
    pub lattice: LatticeSpec,
    /// [y_flat * lattice.points() + lattice_flat]
    pub values: Vec<f64>,
    pub converged: Vec<bool>,
    pub integrand_label: String,
    pub resolution: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableSidecar {
    kind: TableKind,
    space: usize,
    lattice: LatticeSpec,
    integrand_label: String,
    resolution: usize,
}

impl HomTable {
    pub fn y_count(&self) -> usize {
        match self.kind {
            TableKind::Inner { y_per_axis } => y_per_axis.pow(self.space as u32),
            TableKind::Outer => 1,
        }
    }

    /// Nearest y-sample flat index for a query point (length N).
    pub fn nearest_y(&self, y: &[f64]) -> usize {
        match self.kind {
            TableKind::Outer => 0,
            TableKind::Inner { y_per_axis } => {
                let m = y_per_axis;
                let mut flat = 0;
                for a in 0..self.space {
                    // samples at -1/2 + (j+1)/m
                    let t = (wrap_unit(y[a]) + 0.5) * m as f64 - 1.0;
                    let j = (t.round().rem_euclid(m as f64)) as usize % m;
                    flat = flat * m + j;
                }
                flat
            }
        }
    }

    pub fn y_sample_coords(&self, flat: usize) -> Vec<f64> {
        match self.kind {
            TableKind::Outer => vec![0.0; self.space],
            TableKind::Inner { y_per_axis } => {
                let m = y_per_axis;
                let mut idx = vec![0usize; self.space];
                let mut rem = flat;
                for a in (0..self.space).rev() {
                    idx[a] = rem % m;
                    rem /= m;
                }
                idx.iter()
                    .map(|&j| wrap_unit(-0.5 + (j as f64 + 1.0) / m as f64))
                    .collect()
            }
        }
    }

    fn hull_check(&self, xi: &[f64]) -> Result<()> {
        for (a, ax) in self.lattice.axes.iter().enumerate() {
            let slack = 1e-12 * (ax.max - ax.min).abs().max(1.0);
            if xi[a] < ax.min - slack || xi[a] > ax.max + slack {
                return Err(Error::Range(format!(
                    "xi[{a}] = {} outside lattice hull [{}, {}]",
                    xi[a], ax.min, ax.max
                )));
            }
        }
        Ok(())
    }

    /// Multilinear interpolation in xi at the nearest y sample. Exact at
    /// lattice nodes.
    pub fn eval_interp(&self, y: &[f64], xi: &[f64]) -> Result<f64> {
        self.hull_check(xi)?;
        Ok(self.interp_with_grad(self.nearest_y(y), xi, None))
    }

    pub fn eval_interp_grad(&self, y: &[f64], xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.hull_check(xi)?;
        Ok(self.interp_with_grad(self.nearest_y(y), xi, Some(grad)))
    }

    fn interp_with_grad(&self, y_flat: usize, xi: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let k = self.lattice.axes.len();
        let base = y_flat * self.lattice.points();
        let mut i0 = vec![0usize; k];
        let mut wgt = vec![0.0; k];
        for a in 0..k {
            let ax = &self.lattice.axes[a];
            if ax.count < 2 {
                i0[a] = 0;
                wgt[a] = 0.0;
                continue;
            }
            let t = ((xi[a] - ax.min) / ax.spacing()).clamp(0.0, (ax.count - 1) as f64);
            let fl = t.floor().min((ax.count - 2) as f64);
            i0[a] = fl as usize;
            wgt[a] = t - fl;
        }
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut value = 0.0;
        let mut idx = vec![0usize; k];
        for corner in 0..(1usize << k) {
            let mut w = 1.0;
            for a in 0..k {
                let hi = corner >> a & 1 == 1;
                idx[a] = i0[a] + usize::from(hi && self.lattice.axes[a].count > 1);
                w *= if hi { wgt[a] } else { 1.0 - wgt[a] };
            }
            let v = self.values[base + self.lattice.flatten(&idx)];
            value += w * v;
            if let Some(g) = grad.as_deref_mut() {
                for a in 0..k {
                    let ax = &self.lattice.axes[a];
                    if ax.count < 2 {
                        continue;
                    }
                    let mut dw = if corner >> a & 1 == 1 { 1.0 } else { -1.0 } / ax.spacing();
                    for b in 0..k {
                        if b != a {
                            dw *= if corner >> b & 1 == 1 {
                                wgt[b]
                            } else {
                                1.0 - wgt[b]
                            };
                        }
                    }
                    g[a] += dw * v;
                }
            }
        }
        value
    }

    /// Worst midpoint-convexity violation along every lattice axis
    /// (positive means a violation of that size).
    pub fn worst_convexity_violation(&self) -> f64 {
        let k = self.lattice.axes.len();
        let mut worst: f64 = 0.0;
        let lat_pts = self.lattice.points();
        let mut idx = vec![0usize; k];
        for y in 0..self.y_count() {
            for flat in 0..lat_pts {
                self.lattice.unflatten(flat, &mut idx);
                for a in 0..k {
                    if idx[a] == 0 || idx[a] + 1 >= self.lattice.axes[a].count {
                        continue;
                    }
                    let mut lo = idx.clone();
                    lo[a] -= 1;
                    let mut hi = idx.clone();
                    hi[a] += 1;
                    let base = y * lat_pts;
                    let v = 2.0 * self.values[base + flat]
                        - self.values[base + self.lattice.flatten(&lo)]
                        - self.values[base + self.lattice.flatten(&hi)];
                    worst = worst.max(v);
                }
            }
        }
        worst
    }

    /// Worst growth-sandwich violation against the integrand's envelope
    /// (positive means a violation of that size).
    pub fn worst_growth_violation(&self, ig: &Integrand) -> f64 {
        let growth = ig.growth();
        let nf = &growth.nfunction;
        let mut worst: f64 = 0.0;
        let lat_pts = self.lattice.points();
        let mut xi = vec![0.0; self.lattice.axes.len()];
        for y in 0..self.y_count() {
            for flat in 0..lat_pts {
                self.lattice.node_coords(flat, &mut xi);
                let norm: f64 = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                let v = self.values[y * lat_pts + flat];
                worst = worst.max(growth.c1 * nf.b(norm) - v);
                worst = worst.max(v - growth.c2 * (1.0 + nf.b(norm)));
            }
        }
        worst
    }

    /// Write `<prefix>.bin` (values then converged flags) and `<prefix>.json`.
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let sidecar = TableSidecar {
            kind: self.kind,
            space: self.space,
            lattice: self.lattice.clone(),
            integrand_label: self.integrand_label.clone(),
            resolution: self.resolution,
        };
        std::fs::write(
            prefix.with_extension("json"),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        let mut bin = std::fs::File::create(prefix.with_extension("bin"))?;
        for v in &self.values {
            bin.write_all(&v.to_le_bytes())?;
        }
        for &c in &self.converged {
            bin.write_all(&[u8::from(c)])?;
        }
        Ok(())
    }

    pub fn load(prefix: &Path) -> Result<Self> {
        let sidecar: TableSidecar =
            serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json"))?)?;
        let mut raw = Vec::new();
        std::fs::File::open(prefix.with_extension("bin"))?.read_to_end(&mut raw)?;
        let y_count = match sidecar.kind {
            TableKind::Inner { y_per_axis } => y_per_axis.pow(sidecar.space as u32),
            TableKind::Outer => 1,
        };
        let n = y_count * sidecar.lattice.points();
        if raw.len() != n * 9 {
            return Err(Error::Data(format!(
                "table binary has {} bytes, expected {}",
                raw.len(),
                n * 9
            )));
        }
        let values: Vec<f64> = raw[..n * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let converged: Vec<bool> = raw[n * 8..].iter().map(|&b| b != 0).collect();
        Ok(HomTable {
            kind: sidecar.kind,
            space: sidecar.space,
            lattice: sidecar.lattice,
            values,
            converged,
            integrand_label: sidecar.integrand_label,
            resolution: sidecar.resolution,
        })
    }
}

/// Builds and extends inner tables for a fixed integrand and resolution.
pub struct Tabulator<'a> {
    pub integrand: &'a Integrand,
    pub resolution: usize,
    pub params: SolverParams,
}

impl<'a> Tabulator<'a> {
    pub fn new(integrand: &'a Integrand, resolution: usize) -> Self {
        Tabulator {
            integrand,
            resolution,
            params: SolverParams::default(),
        }
    }

    fn solve_entry(&self, y: &[f64], xi: &[f64]) -> (f64, bool) {
        let mut cp = CellProblem::inner(
            self.integrand.clone(),
            y.to_vec(),
            xi.to_vec(),
            self.resolution,
        );
        cp.params = self.params;
        match solve_inner(&cp) {
            Ok(sol) => (sol.energy, sol.converged),
            Err(_) => (f64::NAN, false),
        }
    }

    /// Inner solves at every (y sample, xi lattice node); parallel over
    /// entries with deterministic assembly order.
    pub fn tabulate(&self, lattice: LatticeSpec, y_per_axis: usize) -> Result<HomTable> {
        if lattice.points() == 0 || lattice.axes.is_empty() {
            return Err(Error::Contract("empty xi lattice".into()));
        }
        if lattice.axes.len() != self.integrand.xi_len() {
            return Err(Error::Contract(format!(
                "lattice dimension {} does not match xi length {}",
                lattice.axes.len(),
                self.integrand.xi_len()
            )));
        }
        let space = self.integrand.dims().space;
        let kind = TableKind::Inner { y_per_axis };
        let proto = HomTable {
            kind,
            space,
            lattice,
            values: Vec::new(),
            converged: Vec::new(),
            integrand_label: self.integrand.label().to_string(),
            resolution: self.resolution,
        };
        let y_count = proto.y_count();
        let lat_pts = proto.lattice.points();
        let entries: Vec<(f64, bool)> = (0..y_count * lat_pts)
            .into_par_iter()
            .map(|flat| {
                let y = proto.y_sample_coords(flat / lat_pts);
                let mut xi = vec![0.0; proto.lattice.axes.len()];
                proto.lattice.node_coords(flat % lat_pts, &mut xi);
                self.solve_entry(&y, &xi)
            })
            .collect();
        let mut table = proto;
        table.values = entries.iter().map(|e| e.0).collect();
        table.converged = entries.iter().map(|e| e.1).collect();
        Ok(table)
    }

    /// Extend one lattice axis outward keeping its spacing, re-solving only
    /// the new entries.
    pub fn extend_axis(
        &self,
        table: &mut HomTable,
        axis: usize,
        add_lo: usize,
        add_hi: usize,
    ) -> Result<()> {
        if add_lo == 0 && add_hi == 0 {
            return Ok(());
        }
        let old = table.lattice.clone();
        let spacing = old.axes[axis].spacing();
        if spacing == 0.0 {
            return Err(Error::Range(
                "cannot extend a single-node lattice axis".into(),
            ));
        }
        let mut new_lattice = old.clone();
        new_lattice.axes[axis] = LatticeAxis {
            min: old.axes[axis].min - add_lo as f64 * spacing,
            max: old.axes[axis].max + add_hi as f64 * spacing,
            count: old.axes[axis].count + add_lo + add_hi,
        };
        let y_count = table.y_count();
        let old_pts = old.points();
        let new_pts = new_lattice.points();
        let k = old.axes.len();

        // gather coordinates of entries that need fresh solves
        let mut fresh: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut new_values = vec![f64::NAN; y_count * new_pts];
        let mut new_converged = vec![false; y_count * new_pts];
        let mut idx = vec![0usize; k];
        for y in 0..y_count {
            for flat in 0..new_pts {
                new_lattice.unflatten(flat, &mut idx);
                let shifted = idx[axis] as isize - add_lo as isize;
                if shifted >= 0 && (shifted as usize) < old.axes[axis].count {
                    let mut old_idx = idx.clone();
                    old_idx[axis] = shifted as usize;
                    let src = y * old_pts + old.flatten(&old_idx);
                    new_values[y * new_pts + flat] = table.values[src];
                    new_converged[y * new_pts + flat] = table.converged[src];
                } else {
                    let mut xi = vec![0.0; k];
                    new_lattice.node_coords(flat, &mut xi);
                    fresh.push((y * new_pts + flat, xi));
                }
            }
        }
        let proto_kind = table.kind;
        let solved: Vec<(usize, f64, bool)> = fresh
            .par_iter()
            .map(|(dst, xi)| {
                let y = match proto_kind {
                    TableKind::Inner { .. } => table.y_sample_coords(dst / new_pts),
                    TableKind::Outer => vec![0.0; table.space],
                };
                let (v, c) = self.solve_entry(&y, xi);
                (*dst, v, c)
            })
            .collect();
        for (dst, v, c) in solved {
            new_values[dst] = v;
            new_converged[dst] = c;
        }
        table.lattice = new_lattice;
        table.values = new_values;
        table.converged = new_converged;
        Ok(())
    }
}

/// Table-backed density for the outer solve, auto-extending on demand.
struct OuterDensity<'a> {
    table: &'a RefCell<HomTable>,
    tabulator: Option<&'a Tabulator<'a>>,
    extensions_left: &'a Cell<usize>,
    exhausted: &'a Cell<bool>,
}

impl LocalDensity for OuterDensity<'_> {
    fn eval_grad(&self, pos: &[f64], xi_loc: &[f64], grad: &mut [f64]) -> f64 {
        let table = self.table.borrow();
        table
            .eval_interp_grad(pos, xi_loc, grad)
            .unwrap_or(f64::INFINITY)
    }

    fn prepare(&self, xi_range: &[(f64, f64)]) {
        let Some(tab) = self.tabulator else {
            // no tabulator: any visit outside the hull is a hard range failure
            let t = self.table.borrow();
            for (a, &(lo, hi)) in xi_range.iter().enumerate() {
                let ax = &t.lattice.axes[a];
                if lo < ax.min - 1e-12 || hi > ax.max + 1e-12 {
                    self.exhausted.set(true);
                }
            }
            return;
        };
        for (a, &(lo, hi)) in xi_range.iter().enumerate() {
            // Extend only for moderate hull violations (at most half the
            // current span per side and call). Wilder ranges come from
            // overshooting trial steps; those evaluate to infinity and get
            // rejected by the descent, which is much cheaper than tabulating
            // them.
            let (need_lo, need_hi) = {
                let t = self.table.borrow();
                let ax = &t.lattice.axes[a];
                let spacing = ax.spacing();
                if spacing == 0.0 {
                    continue;
                }
                let span = ax.max - ax.min;
                let max_grow = 0.5 * span;
                let margin = 0.1 * span;
                let deficit_lo = ax.min - lo;
                let deficit_hi = hi - ax.max;
                let need_lo = if deficit_lo > 0.0 && deficit_lo <= max_grow {
                    ((deficit_lo + margin) / spacing).ceil() as usize
                } else {
                    0
                };
                let need_hi = if deficit_hi > 0.0 && deficit_hi <= max_grow {
                    ((deficit_hi + margin) / spacing).ceil() as usize
                } else {
                    0
                };
                (need_lo, need_hi)
            };
            if need_lo == 0 && need_hi == 0 {
                continue;
            }
            if self.extensions_left.get() == 0 {
                self.exhausted.set(true);
                return;
            }
            self.extensions_left.set(self.extensions_left.get() - 1);
            let mut t = self.table.borrow_mut();
            if tab.extend_axis(&mut t, a, need_lo, need_hi).is_err() {
                self.exhausted.set(true);
                return;
            }
        }
    }
}

/// Minimize the outer cell energy against a tabulated inner density. The
/// table auto-extends through `tabulator` when the descent leaves its hull;
/// without a tabulator, hull violations abort with a range error.
pub fn solve_outer(
    cp: &CellProblem,
    table: &mut HomTable,
    tabulator: Option<&Tabulator<'_>>,
) -> Result<CellSolution> {
    cp.check()?;
    if cp.level != Level::Outer {
        return Err(Error::Contract(
            "solve_outer requires an outer-level problem".into(),
        ));
    }
    if table.lattice.axes.len() != cp.xi.len() {
        return Err(Error::Contract(format!(
            "table lattice dimension {} does not match xi length {}",
            table.lattice.axes.len(),
            cp.xi.len()
        )));
    }
    // the applied xi itself must start inside the hull or be extendable
    let dims = cp.integrand.dims();
    let xi = cp.integrand.symmetrized(&cp.xi);

    let shared = RefCell::new(std::mem::replace(
        table,
        HomTable {
            kind: TableKind::Outer,
            space: 0,
            lattice: LatticeSpec { axes: vec![] },
            values: vec![],
            converged: vec![],
            integrand_label: String::new(),
            resolution: 0,
        },
    ));
    let extensions_left = Cell::new(8usize);
    let exhausted_flag = Cell::new(false);
    let density = OuterDensity {
        table: &shared,
        tabulator,
        extensions_left: &extensions_left,
        exhausted: &exhausted_flag,
    };
    let (result, zero_energy) = if dims.space == 1 {
        flux_minimize(
            density,
            cp.integrand.order(),
            dims.target,
            cp.resolution,
            &xi,
            &cp.params,
        )
    } else {
        let obj = CorrectorObjective::new(density, cp.integrand.order(), dims, cp.resolution, xi);
        let nvars = obj.npts * dims.target;
        let mut scratch = vec![0.0; nvars];
        let zero_energy = obj.eval(&vec![0.0; nvars], &mut scratch);
        (minimize(&obj, vec![0.0; nvars], &cp.params), zero_energy)
    };
    let exhausted = exhausted_flag.get();
    *table = shared.into_inner();
    if exhausted {
        return Err(Error::Range(
            "inner table range exhausted after maximum extensions".into(),
        ));
    }
    if !zero_energy.is_finite() || !result.energy.is_finite() {
        return Err(Error::Range("outer solve left the table hull".into()));
    }
    Ok(solution_from(
        result,
        zero_energy,
        CellDomain::Y,
        dims,
        cp.resolution,
    ))
}

/// Convenience: tabulate the inner density and solve the outer problem at a
/// single xi, returning (table, solution).
pub fn reiterated_density(
    ig: &Integrand,
    xi: &[f64],
    lattice: LatticeSpec,
    y_per_axis: usize,
    resolution: usize,
    params: SolverParams,
) -> Result<(HomTable, CellSolution)> {
    let tab = Tabulator {
        integrand: ig,
        resolution,
        params,
    };
    let mut table = tab.tabulate(lattice, y_per_axis)?;
    let mut cp = CellProblem::outer(ig.clone(), xi.to_vec(), resolution);
    cp.params = params;
    let sol = solve_outer(&cp, &mut table, Some(&tab))?;
    Ok((table, sol))
}

/// Midpoint-quadrature harmonic mean of a coefficient over the unit cell:
/// (int a^(-1) dz)^(-1). The 1-D quadratic-oracle helper.
pub fn harmonic_mean(a: impl Fn(f64) -> f64, n: usize) -> f64 {
    let inv = kahan_sum((0..n).map(|i| {
        let z = -0.5 + (i as f64 + 0.5) / n as f64;
        1.0 / a(z)
    })) / n as f64;
    1.0 / inv
}
