//! Direct minimization of the oscillating functional on the macroscopic
//! domain, and convergence studies against the homogenized minimum.
//!
//! The epsilon-problem minimizes int_Omega f(x/eps, x/eps^2, D^s u) dx with
//! Dirichlet data pinned at the boundary nodes, using the same BB descent as
//! the cell problems. For s = 1 the element is Q1 on cells with the gradient
//! collocated at cell centers (in 1-D this makes the discrete minimum equal
//! the midpoint-quadrature harmonic mean exactly); for s = 2 (1-D) the
//! hessian is the 3-point stencil at nodes with trapezoid quadrature and the
//! clamped boundary rows supplied by the data.

use crate::cellsolver::{
    solve_inner, solve_outer, CellProblem, HomTable, LatticeSpec, TableKind, Tabulator,
};
use crate::error::{Error, Result};
use crate::fields::{
    kahan_sum, wrap_unit, AxisSpec, BoundaryData, CellDomain, GridSpec, MacroGrid, PeriodicField,
};
use crate::integrand::{Integrand, Order};
use crate::multiscale::build_recovery_s1;
use crate::solver::{minimize, Objective, SolverParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One direct minimization of the oscillating energy.
#[derive(Debug, Clone)]
pub struct EpsilonRun {
    pub epsilon: f64,
    /// Cells per axis of the macro grid.
    pub grid_cells: usize,
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// Node values of the minimizer, row-major over the (n+1)^N node grid.
    pub minimizer: Vec<f64>,
}

struct EpsilonObjective<'a> {
    ig: &'a Integrand,
    order: Order,
    space: usize,
    d: usize,
    h: f64,
    node_count: usize,
    /// Dirichlet mask and values per node (per component).
    pinned: Vec<bool>,
    pin_values: Vec<f64>,
    /// s=1: wrapped (y, z) coordinates per cell, [cell * 2N .. ].
    /// s=2: per node.
    osc_coords: Vec<f64>,
    /// s=1: node indices of each cell's corners, [cell * 2^N + corner].
    cell_nodes: Vec<usize>,
    /// quadrature weight per evaluation point
    weights: Vec<f64>,
    /// s=2 only: hessian of the boundary datum at ghost-adjacent evaluation
    /// points (constant rows outside the DOF range).
    boundary_hessian: f64,
}

impl<'a> EpsilonObjective<'a> {
    fn new(ig: &'a Integrand, grid: &MacroGrid, epsilon: f64) -> Result<Self> {
        let space = grid.space;
        let d = ig.dims().target;
        if ig.dims().space != space {
            return Err(Error::Contract(format!(
                "integrand space dimension {} does not match grid {}",
                ig.dims().space,
                space
            )));
        }
        let order = ig.order();
        if order == Order::Two && space != 1 {
            return Err(Error::Contract(
                "second-order macroscopic solves are implemented in one dimension".into(),
            ));
        }
        let n = grid.n;
        let h = grid.h();
        let nodes_per_axis = n + 1;
        let node_count = nodes_per_axis.pow(space as u32);

        let mut pinned = vec![false; node_count];
        let mut pin_values = vec![0.0; node_count * d];
        let mut idx = vec![0usize; space];
        let mut x = vec![0.0; space];
        for node in 0..node_count {
            let mut rem = node;
            for a in (0..space).rev() {
                idx[a] = rem % nodes_per_axis;
                rem /= nodes_per_axis;
            }
            for a in 0..space {
                x[a] = idx[a] as f64 * h;
            }
            let on_boundary = match order {
                Order::One => idx.iter().any(|&i| i == 0 || i == n),
                // clamped: two node layers at each end
                Order::Two => idx.iter().any(|&i| i <= 1 || i >= n - 1),
            };
            pinned[node] = on_boundary;
            for c in 0..d {
                pin_values[node * d + c] = grid.boundary.eval(&x, c, space);
            }
        }

        let eps2 = epsilon * epsilon;
        match order {
            Order::One => {
                let cell_count = n.pow(space as u32);
                let corners = 1usize << space;
                let mut cell_nodes = vec![0usize; cell_count * corners];
                let mut osc_coords = vec![0.0; cell_count * 2 * space];
                let weights = vec![h.powi(space as i32); cell_count];
                let mut cidx = vec![0usize; space];
                for cell in 0..cell_count {
                    let mut rem = cell;
                    for a in (0..space).rev() {
                        cidx[a] = rem % n;
                        rem /= n;
                    }
                    for corner in 0..corners {
                        let mut flat = 0;
                        for a in 0..space {
                            let off = corner >> a & 1;
                            flat = flat * nodes_per_axis + cidx[a] + off;
                        }
                        cell_nodes[cell * corners + corner] = flat;
                    }
                    for a in 0..space {
                        let xc = (cidx[a] as f64 + 0.5) * h;
                        osc_coords[cell * 2 * space + a] = wrap_unit(xc / epsilon);
                        osc_coords[cell * 2 * space + space + a] = wrap_unit(xc / eps2);
                    }
                }
                Ok(EpsilonObjective {
                    ig,
                    order,
                    space,
                    d,
                    h,
                    node_count,
                    pinned,
                    pin_values,
                    osc_coords,
                    cell_nodes,
                    weights,
                    boundary_hessian: 0.0,
                })
            }
            Order::Two => {
                // evaluation at every node, trapezoid weights
                let mut osc_coords = vec![0.0; node_count * 2];
                let mut weights = vec![h; node_count];
                weights[0] = 0.5 * h;
                weights[node_count - 1] = 0.5 * h;
                for node in 0..node_count {
                    let xn = node as f64 * h;
                    osc_coords[node * 2] = wrap_unit(xn / epsilon);
                    osc_coords[node * 2 + 1] = wrap_unit(xn / eps2);
                }
                let bh = match &grid.boundary {
                    BoundaryData::Quadratic { hessian } => hessian[0],
                    BoundaryData::Affine { .. } => 0.0,
                };
                Ok(EpsilonObjective {
                    ig,
                    order,
                    space,
                    d,
                    h,
                    node_count,
                    pinned,
                    pin_values,
                    osc_coords,
                    cell_nodes: Vec::new(),
                    weights,
                    boundary_hessian: bh,
                })
            }
        }
    }

    fn boundary_interpolant(&self) -> Vec<f64> {
        self.pin_values.clone()
    }
}

impl Objective for EpsilonObjective<'_> {
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let d = self.d;
        let space = self.space;
        let mut energy = 0.0;
        let mut comp = 0.0;
        match self.order {
            Order::One => {
                let corners = 1usize << space;
                let pairs = (corners / 2) as f64;
                let mut xi_loc = vec![0.0; d * space];
                let mut fxi = vec![0.0; d * space];
                for cell in 0..self.weights.len() {
                    let base = cell * corners;
                    for c in 0..d {
                        for a in 0..space {
                            let mut acc = 0.0;
                            for corner in 0..corners {
                                if corner >> a & 1 == 0 {
                                    let lo = self.cell_nodes[base + corner];
                                    let hi = self.cell_nodes[base + (corner | (1 << a))];
                                    acc += (x[hi * d + c] - x[lo * d + c]) / self.h;
                                }
                            }
                            xi_loc[c * space + a] = acc / pairs;
                        }
                    }
                    let y = &self.osc_coords[cell * 2 * space..cell * 2 * space + space];
                    let z =
                        &self.osc_coords[cell * 2 * space + space..cell * 2 * space + 2 * space];
                    self.ig.grad_raw(y, z, &xi_loc, &mut fxi);
                    let f = self.ig.eval_raw(y, z, &xi_loc);
                    let w = self.weights[cell];
                    let val = w * f - comp;
                    let t = energy + val;
                    comp = (t - energy) - val;
                    energy = t;
                    for c in 0..d {
                        for a in 0..space {
                            let g = w * fxi[c * space + a] / (self.h * pairs);
                            for corner in 0..corners {
                                if corner >> a & 1 == 0 {
                                    let lo = self.cell_nodes[base + corner];
                                    let hi = self.cell_nodes[base + (corner | (1 << a))];
                                    grad[hi * d + c] += g;
                                    grad[lo * d + c] -= g;
                                }
                            }
                        }
                    }
                }
            }
            Order::Two => {
                let h2 = self.h * self.h;
                let n = self.node_count - 1;
                let mut fxi = vec![0.0; d];
                let mut flux = vec![0.0; self.node_count * d];
                for node in 0..self.node_count {
                    for c in 0..d {
                        // ghost rows carry the boundary hessian exactly
                        let upp = if node == 0 || node == n {
                            self.boundary_hessian
                        } else {
                            (x[(node + 1) * d + c] - 2.0 * x[node * d + c] + x[(node - 1) * d + c])
                                / h2
                        };
                        let y = &self.osc_coords[node * 2..node * 2 + 1];
                        let z = &self.osc_coords[node * 2 + 1..node * 2 + 2];
                        let xi_loc = [upp];
                        self.ig.grad_raw(y, z, &xi_loc, &mut fxi[c..c + 1]);
                        let f = self.ig.eval_raw(y, z, &xi_loc);
                        let w = self.weights[node];
                        let val = w * f - comp;
                        let t = energy + val;
                        comp = (t - energy) - val;
                        energy = t;
                        flux[node * d + c] = w * fxi[c];
                    }
                }
                for node in 1..n {
                    for c in 0..d {
                        let g = flux[node * d + c] / h2;
                        grad[(node + 1) * d + c] += g;
                        grad[node * d + c] -= 2.0 * g;
                        grad[(node - 1) * d + c] += g;
                    }
                }
            }
        }
        energy
    }

    fn project_point(&self, x: &mut [f64]) {
        for node in 0..self.node_count {
            if self.pinned[node] {
                for c in 0..self.d {
                    x[node * self.d + c] = self.pin_values[node * self.d + c];
                }
            }
        }
    }

    fn project_grad(&self, g: &mut [f64]) {
        for node in 0..self.node_count {
            if self.pinned[node] {
                for c in 0..self.d {
                    g[node * self.d + c] = 0.0;
                }
            }
        }
    }
}

/// First-order 1-D epsilon-problem in flux variables v = u': the Dirichlet
/// data pins only the mean of v, the energy is pointwise, and the descent
/// sees a diagonal Hessian. The minimizer nodes are recovered by cumulative
/// summation.
struct FluxEpsilonS1<'a> {
    ig: &'a Integrand,
    d: usize,
    cells: usize,
    h: f64,
    /// wrapped (y, z) per cell
    osc: Vec<f64>,
    /// required mean slope per component
    xi0: Vec<f64>,
}

impl<'a> FluxEpsilonS1<'a> {
    fn new(ig: &'a Integrand, grid: &MacroGrid, epsilon: f64) -> Result<Self> {
        let d = ig.dims().target;
        let xi0 = match &grid.boundary {
            BoundaryData::Affine { gradient } => gradient.clone(),
            _ => {
                return Err(Error::Contract(
                    "first-order problems take affine boundary data".into(),
                ))
            }
        };
        let n = grid.n;
        let h = grid.h();
        let eps2 = epsilon * epsilon;
        let mut osc = vec![0.0; n * 2];
        for i in 0..n {
            let xc = (i as f64 + 0.5) * h;
            osc[i * 2] = wrap_unit(xc / epsilon);
            osc[i * 2 + 1] = wrap_unit(xc / eps2);
        }
        Ok(FluxEpsilonS1 {
            ig,
            d,
            cells: n,
            h,
            osc,
            xi0,
        })
    }

    fn nodes_from_flux(&self, grid: &MacroGrid, v: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut u = vec![0.0; (self.cells + 1) * d];
        for c in 0..d {
            u[c] = grid.boundary.eval(&[0.0], c, 1);
            for i in 0..self.cells {
                u[(i + 1) * d + c] = u[i * d + c] + self.h * v[i * d + c];
            }
        }
        u
    }
}

impl Objective for FluxEpsilonS1<'_> {
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.d;
        let mut energy = 0.0;
        let mut comp = 0.0;
        for i in 0..self.cells {
            let y = &self.osc[i * 2..i * 2 + 1];
            let z = &self.osc[i * 2 + 1..i * 2 + 2];
            let v = &x[i * d..(i + 1) * d];
            let g = &mut grad[i * d..(i + 1) * d];
            self.ig.grad_raw(y, z, v, g);
            for gc in g.iter_mut() {
                *gc *= self.h;
            }
            let f = self.h * self.ig.eval_raw(y, z, v);
            let val = f - comp;
            let t = energy + val;
            comp = (t - energy) - val;
            energy = t;
        }
        energy
    }

    fn project_point(&self, x: &mut [f64]) {
        for c in 0..self.d {
            let mean = (0..self.cells).map(|i| x[i * self.d + c]).sum::<f64>() / self.cells as f64;
            let shift = self.xi0[c] - mean;
            for i in 0..self.cells {
                x[i * self.d + c] += shift;
            }
        }
    }

    fn project_grad(&self, g: &mut [f64]) {
        for c in 0..self.d {
            let mean = (0..self.cells).map(|i| g[i * self.d + c]).sum::<f64>() / self.cells as f64;
            for i in 0..self.cells {
                g[i * self.d + c] -= mean;
            }
        }
    }
}

/// Second-order 1-D epsilon-problem in flux variables v = u'' at the interior
/// nodes. The clamped data (two pinned node layers at each end) turns into
/// two linear constraints per component, handled by affine projection.
struct FluxEpsilonS2<'a> {
    ig: &'a Integrand,
    d: usize,
    /// interior nodes carrying DOF: j = 1..n-1
    m: usize,
    h: f64,
    /// wrapped (y, z) per node 0..n
    osc: Vec<f64>,
    /// trapezoid weight per node
    weights: Vec<f64>,
    /// boundary hessian per component (ghost rows)
    bh: Vec<f64>,
    /// constraint rows over the m interior nodes and their 2x2 Gram inverse
    row1: Vec<f64>,
    row2: Vec<f64>,
    gram_inv: [f64; 4],
    /// right-hand sides per component
    b1: Vec<f64>,
    b2: Vec<f64>,
    /// pinned first two node values per component
    u0: Vec<f64>,
    u1: Vec<f64>,
}

impl<'a> FluxEpsilonS2<'a> {
    fn new(ig: &'a Integrand, grid: &MacroGrid, epsilon: f64) -> Result<Self> {
        let d = ig.dims().target;
        let n = grid.n;
        if n < 8 {
            return Err(Error::Contract(
                "second-order grid needs at least 8 cells".into(),
            ));
        }
        let h = grid.h();
        let eps2 = epsilon * epsilon;
        let node_count = n + 1;
        let mut osc = vec![0.0; node_count * 2];
        let mut weights = vec![h; node_count];
        weights[0] = 0.5 * h;
        weights[n] = 0.5 * h;
        for j in 0..node_count {
            let xj = j as f64 * h;
            osc[j * 2] = wrap_unit(xj / epsilon);
            osc[j * 2 + 1] = wrap_unit(xj / eps2);
        }
        let bh = match &grid.boundary {
            BoundaryData::Quadratic { hessian } => hessian.clone(),
            BoundaryData::Affine { .. } => vec![0.0; d],
        };
        let m = n - 1;
        // u_k = u0 + k (u1 - u0) + h^2 sum_{i=1}^{k-1} (k - i) v_i;
        // pin u_{n-1} and u_n
        let mut row1 = vec![0.0; m];
        let mut row2 = vec![0.0; m];
        for i in 1..n {
            if i <= n - 2 {
                row1[i - 1] = (n - 1 - i) as f64;
            }
            row2[i - 1] = (n - i) as f64;
        }
        let g11: f64 = row1.iter().map(|r| r * r).sum();
        let g12: f64 = row1.iter().zip(&row2).map(|(a, b)| a * b).sum();
        let g22: f64 = row2.iter().map(|r| r * r).sum();
        let det = g11 * g22 - g12 * g12;
        if det.abs() < 1e-300 {
            return Err(Error::Contract("degenerate clamped constraints".into()));
        }
        let gram_inv = [g22 / det, -g12 / det, -g12 / det, g11 / det];
        let mut u0 = vec![0.0; d];
        let mut u1 = vec![0.0; d];
        let mut b1 = vec![0.0; d];
        let mut b2 = vec![0.0; d];
        for c in 0..d {
            u0[c] = grid.boundary.eval(&[0.0], c, 1);
            u1[c] = grid.boundary.eval(&[h], c, 1);
            let dn1 = grid.boundary.eval(&[(n - 1) as f64 * h], c, 1);
            let dn = grid.boundary.eval(&[n as f64 * h], c, 1);
            let slope = u1[c] - u0[c];
            b1[c] = (dn1 - u0[c] - (n - 1) as f64 * slope) / (h * h);
            b2[c] = (dn - u0[c] - n as f64 * slope) / (h * h);
        }
        Ok(FluxEpsilonS2 {
            ig,
            d,
            m,
            h,
            osc,
            weights,
            bh,
            row1,
            row2,
            gram_inv,
            b1,
            b2,
            u0,
            u1,
        })
    }

    fn project_affine(&self, x: &mut [f64], homogeneous: bool) {
        let d = self.d;
        for c in 0..d {
            let mut r1 = 0.0;
            let mut r2 = 0.0;
            for i in 0..self.m {
                r1 += self.row1[i] * x[i * d + c];
                r2 += self.row2[i] * x[i * d + c];
            }
            if !homogeneous {
                r1 -= self.b1[c];
                r2 -= self.b2[c];
            }
            let l1 = self.gram_inv[0] * r1 + self.gram_inv[1] * r2;
            let l2 = self.gram_inv[2] * r1 + self.gram_inv[3] * r2;
            for i in 0..self.m {
                x[i * d + c] -= l1 * self.row1[i] + l2 * self.row2[i];
            }
        }
    }

    fn nodes_from_flux(&self, v: &[f64]) -> Vec<f64> {
        let d = self.d;
        let n = self.m + 1;
        let mut u = vec![0.0; (n + 1) * d];
        for c in 0..d {
            u[c] = self.u0[c];
            u[d + c] = self.u1[c];
            for j in 1..n {
                u[(j + 1) * d + c] =
                    2.0 * u[j * d + c] - u[(j - 1) * d + c] + self.h * self.h * v[(j - 1) * d + c];
            }
        }
        u
    }
}

impl Objective for FluxEpsilonS2<'_> {
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.d;
        let n = self.m + 1;
        let mut energy = 0.0;
        let mut comp = 0.0;
        let add = |energy: &mut f64, comp: &mut f64, val: f64| {
            let y = val - *comp;
            let t = *energy + y;
            *comp = (t - *energy) - y;
            *energy = t;
        };
        // ghost rows at the two boundary nodes carry the datum's hessian
        for (j, w) in [(0usize, self.weights[0]), (n, self.weights[n])] {
            for c in 0..d {
                let y = &self.osc[j * 2..j * 2 + 1];
                let z = &self.osc[j * 2 + 1..j * 2 + 2];
                add(
                    &mut energy,
                    &mut comp,
                    w * self.ig.eval_raw(y, z, &self.bh[c..c + 1]),
                );
            }
        }
        let mut fxi = [0.0];
        for j in 1..n {
            let w = self.weights[j];
            let y = &self.osc[j * 2..j * 2 + 1];
            let z = &self.osc[j * 2 + 1..j * 2 + 2];
            for c in 0..d {
                let v = &x[(j - 1) * d + c..(j - 1) * d + c + 1];
                self.ig.grad_raw(y, z, v, &mut fxi);
                grad[(j - 1) * d + c] = w * fxi[0];
                add(&mut energy, &mut comp, w * self.ig.eval_raw(y, z, v));
            }
        }
        energy
    }

    fn project_point(&self, x: &mut [f64]) {
        self.project_affine(x, false);
    }

    fn project_grad(&self, g: &mut [f64]) {
        self.project_affine(g, true);
    }
}

fn check_resolution(grid: &MacroGrid, epsilon: f64) -> Result<()> {
    grid.check_commensurate(epsilon)?;
    let fastest = 1.0 / (epsilon * epsilon);
    let per_period = grid.n as f64 * grid.length / fastest;
    if per_period < 8.0 - 1e-9 {
        return Err(Error::Contract(format!(
            "grid under-resolves the fast scale: {per_period:.2} points per period, need >= 8"
        )));
    }
    Ok(())
}

/// Minimize the oscillating energy on the macro grid with pinned Dirichlet
/// data.
pub fn solve_epsilon(
    ig: &Integrand,
    grid: &MacroGrid,
    epsilon: f64,
    params: &SolverParams,
) -> Result<EpsilonRun> {
    check_resolution(grid, epsilon)?;
    if !ig.differentiable() {
        return Err(Error::Nonsmooth(format!(
            "integrand {} is not differentiable in xi",
            ig.label()
        )));
    }
    if grid.space == 1 {
        // flux-form descent: diagonal Hessian, minimizer by integration
        return match ig.order() {
            Order::One => {
                let obj = FluxEpsilonS1::new(ig, grid, epsilon)?;
                let mut v0 = vec![0.0; grid.n * obj.d];
                for i in 0..grid.n {
                    v0[i * obj.d..(i + 1) * obj.d].copy_from_slice(&obj.xi0);
                }
                let result = minimize(&obj, v0, params);
                Ok(EpsilonRun {
                    epsilon,
                    grid_cells: grid.n,
                    energy: result.energy,
                    iterations: result.iterations,
                    grad_norm: result.grad_norm,
                    converged: result.converged,
                    minimizer: obj.nodes_from_flux(grid, &result.x),
                })
            }
            Order::Two => {
                let obj = FluxEpsilonS2::new(ig, grid, epsilon)?;
                let mut v0 = vec![0.0; obj.m * obj.d];
                for i in 0..obj.m {
                    v0[i * obj.d..(i + 1) * obj.d].copy_from_slice(&obj.bh);
                }
                let result = minimize(&obj, v0, params);
                Ok(EpsilonRun {
                    epsilon,
                    grid_cells: grid.n,
                    energy: result.energy,
                    iterations: result.iterations,
                    grad_norm: result.grad_norm,
                    converged: result.converged,
                    minimizer: obj.nodes_from_flux(&result.x),
                })
            }
        };
    }
    let obj = EpsilonObjective::new(ig, grid, epsilon)?;
    let x0 = obj.boundary_interpolant();
    let result = minimize(&obj, x0, params);
    Ok(EpsilonRun {
        epsilon,
        grid_cells: grid.n,
        energy: result.energy,
        iterations: result.iterations,
        grad_norm: result.grad_norm,
        converged: result.converged,
        minimizer: result.x,
    })
}

/// Oscillating energy of a given node field (same discretization as
/// `solve_epsilon`); lets recovery sequences be scored without solving.
pub fn epsilon_energy(
    ig: &Integrand,
    grid: &MacroGrid,
    epsilon: f64,
    nodes: &[f64],
) -> Result<f64> {
    check_resolution(grid, epsilon)?;
    let obj = EpsilonObjective::new(ig, grid, epsilon)?;
    let expect = obj.node_count * obj.d;
    if nodes.len() != expect {
        return Err(Error::Contract(format!(
            "node field length {} does not match grid ({expect})",
            nodes.len()
        )));
    }
    let mut scratch = vec![0.0; nodes.len()];
    Ok(obj.eval(nodes, &mut scratch))
}

/// Exact 1-D quadratic-energy minimum at grid level:
/// xi0^2 (sum_c h / a_eps(x_c))^(-1) with the coefficient read off the
/// integrand at xi = 1. Independent of the descent path.
pub fn exact_min_1d_quadratic(ig: &Integrand, grid: &MacroGrid, epsilon: f64) -> Result<f64> {
    if grid.space != 1 || ig.order() != Order::One {
        return Err(Error::Contract(
            "the exact quadratic formula applies to first-order 1-D problems".into(),
        ));
    }
    let xi0 = match &grid.boundary {
        BoundaryData::Affine { gradient } => gradient[0],
        _ => return Err(Error::Contract("exact formula needs affine data".into())),
    };
    let n = grid.n;
    let h = grid.h();
    let eps2 = epsilon * epsilon;
    let inv = kahan_sum((0..n).map(|i| {
        let xc = (i as f64 + 0.5) * h;
        let a = ig.eval_raw(&[wrap_unit(xc / epsilon)], &[wrap_unit(xc / eps2)], &[1.0]);
        h / a
    }));
    Ok(xi0 * xi0 / inv)
}

/// |Omega| * interpolated effective density at the boundary gradient; the
/// affine (or uniform-hessian) datum is the minimizer of a convex
/// x-independent density, so no macroscopic solve is needed.
pub fn homogenized_minimum(grid: &MacroGrid, outer_table: &HomTable) -> Result<f64> {
    if outer_table.kind != TableKind::Outer {
        return Err(Error::Contract(
            "homogenized_minimum expects a fully homogenized (outer) table".into(),
        ));
    }
    let xi = match &grid.boundary {
        BoundaryData::Affine { gradient } => gradient.clone(),
        BoundaryData::Quadratic { hessian } => hessian.clone(),
    };
    let value = outer_table.eval_interp(&vec![0.0; grid.space], &xi)?;
    Ok(grid.measure() * value)
}

/// Tabulate the fully homogenized density on a xi lattice by solving the
/// outer problem at each node against the given inner table.
pub fn tabulate_outer(
    ig: &Integrand,
    inner_table: &mut HomTable,
    tabulator: &Tabulator<'_>,
    lattice: LatticeSpec,
    resolution: usize,
    params: SolverParams,
) -> Result<HomTable> {
    let mut values = Vec::with_capacity(lattice.points());
    let mut converged = Vec::with_capacity(lattice.points());
    let mut xi = vec![0.0; lattice.axes.len()];
    for flat in 0..lattice.points() {
        lattice.node_coords(flat, &mut xi);
        let mut cp = CellProblem::outer(ig.clone(), xi.clone(), resolution);
        cp.params = params;
        let sol = solve_outer(&cp, inner_table, Some(tabulator))?;
        values.push(sol.energy);
        converged.push(sol.converged);
    }
    Ok(HomTable {
        kind: TableKind::Outer,
        space: ig.dims().space,
        lattice,
        values,
        converged,
        integrand_label: ig.label().to_string(),
        resolution,
    })
}

/// One row of a convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub epsilon: f64,
    pub grid_points: usize,
    pub f_eps_min: f64,
    pub oracle_min: Option<f64>,
    pub hom_value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A decreasing-epsilon study of the direct minima against the homogenized
/// minimum.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<StudyRow>,
    pub homogenized_value: f64,
    pub oracle_value: Option<f64>,
    /// Least-squares slope of log residual against log epsilon (descriptive
    /// only; NaN when residuals vanish or the fit degenerates).
    pub fitted_rate: f64,
}

pub struct StudyConfig {
    pub xi0: f64,
    pub epsilon_list: Vec<f64>,
    /// Grid points per fastest period.
    pub res_per_period: usize,
    /// Attach the exact 1-D quadratic oracle column.
    pub quadratic_oracle: bool,
    pub params: SolverParams,
}

/// Run the per-epsilon solves (in parallel), compare against the homogenized
/// minimum from the outer table, and fit a descriptive rate.
pub fn convergence_study(
    ig: &Integrand,
    cfg: &StudyConfig,
    outer_table: &HomTable,
) -> Result<ConvergenceStudy> {
    if cfg.epsilon_list.is_empty() {
        return Err(Error::Contract("empty epsilon list".into()));
    }
    if cfg.epsilon_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Contract(
            "epsilon list must be strictly decreasing".into(),
        ));
    }
    let order = ig.order();
    let make_grid = |epsilon: f64| -> Result<MacroGrid> {
        let fast = 1.0 / (epsilon * epsilon);
        let n = (cfg.res_per_period as f64 * fast).round() as usize;
        let boundary = match order {
            Order::One => BoundaryData::Affine {
                gradient: vec![cfg.xi0],
            },
            Order::Two => BoundaryData::Quadratic {
                hessian: vec![cfg.xi0],
            },
        };
        Ok(MacroGrid::new(1, 1.0, n, boundary))
    };
    let hom_value = {
        let grid = make_grid(cfg.epsilon_list[0])?;
        homogenized_minimum(&grid, outer_table)?
    };
    let rows: Result<Vec<StudyRow>> = cfg
        .epsilon_list
        .par_iter()
        .map(|&epsilon| {
            let grid = make_grid(epsilon)?;
            let run = solve_epsilon(ig, &grid, epsilon, &cfg.params)?;
            let oracle_min = if cfg.quadratic_oracle {
                Some(exact_min_1d_quadratic(ig, &grid, epsilon)?)
            } else {
                None
            };
            Ok(StudyRow {
                epsilon,
                grid_points: grid.n,
                f_eps_min: run.energy,
                oracle_min,
                hom_value,
                residual: (run.energy - hom_value).abs(),
                iterations: run.iterations,
                converged: run.converged,
            })
        })
        .collect();
    let rows = rows?;
    let oracle_value = ig.oracle().map(|f| f(&[cfg.xi0]));
    let fitted_rate = fit_rate(&rows);
    Ok(ConvergenceStudy {
        rows,
        homogenized_value: hom_value,
        oracle_value,
        fitted_rate,
    })
}

fn fit_rate(rows: &[StudyRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.residual > 0.0)
        .map(|r| (r.epsilon.ln(), r.residual.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return f64::NAN;
    }
    (n * sxy - sx * sy) / denom
}

/// One row of a recovery-sequence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub epsilon: f64,
    pub recovery_energy: f64,
    pub direct_min: f64,
    /// Quadrature of the cell energies along the outer corrector: the value
    /// the recovery energies approach.
    pub target: f64,
}

/// Score the explicitly constructed oscillating competitors
/// u + eps phi(x/eps) + eps^2 psi(x/eps, x/eps^2) built from cell-problem
/// correctors, against the direct minima. Instantiates the upper-bound side
/// of the convergence statement.
pub fn recovery_study(
    ig: &Integrand,
    xi0: f64,
    epsilon_list: &[f64],
    res_per_period: usize,
    cell_resolution: usize,
    params: &SolverParams,
) -> Result<Vec<RecoveryRow>> {
    if ig.order() != Order::One || ig.dims().space != 1 || ig.dims().target != 1 {
        return Err(Error::Contract(
            "recovery studies are implemented for scalar first-order 1-D problems".into(),
        ));
    }
    // outer corrector phi and its applied slopes
    let tab = Tabulator {
        integrand: ig,
        resolution: cell_resolution,
        params: *params,
    };
    let span = 2.0 * xi0.abs().max(1.0);
    let mut inner_table =
        tab.tabulate(LatticeSpec::uniform_1d(-span, span, 81), cell_resolution)?;
    let mut outer_cp = CellProblem::outer(ig.clone(), vec![xi0], cell_resolution);
    outer_cp.params = *params;
    let outer = solve_outer(&outer_cp, &mut inner_table, Some(&tab))?;
    let phi = &outer.corrector;
    let m = phi.grid.axes[0].n;
    let hy = 1.0 / m as f64;

    // inner correctors along y midpoints, slopes from central differences
    let inner: Result<Vec<(PeriodicField, f64)>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let jp = (j + 1) % m;
            let jm = (j + m - 1) % m;
            let slope = (phi.value(jp, 0) - phi.value(jm, 0)) / (2.0 * hy);
            let y = phi.grid.axes[0].coord(j);
            let mut cp =
                CellProblem::inner(ig.clone(), vec![y], vec![xi0 + slope], cell_resolution);
            cp.params = *params;
            let sol = solve_inner(&cp)?;
            Ok((sol.corrector, sol.energy))
        })
        .collect();
    let inner = inner?;
    let target = inner.iter().map(|(_, e)| e).sum::<f64>() / m as f64;

    // assemble psi(y, z) on the product cell
    let kz = inner[0].0.grid.axes[0].n;
    let psi = PeriodicField {
        cells: CellDomain::YxZ,
        grid: GridSpec::new(vec![AxisSpec::unit_cell(m), AxisSpec::unit_cell(kz)]),
        components: 1,
        values: {
            let mut v = Vec::with_capacity(m * kz);
            for (row, _) in &inner {
                v.extend_from_slice(&row.values);
            }
            v
        },
    };

    let u = move |x: f64| xi0 * x;
    let mut rows = Vec::new();
    for &epsilon in epsilon_list {
        let fast = 1.0 / (epsilon * epsilon);
        let n = (res_per_period as f64 * fast).round() as usize;
        let grid = MacroGrid::unit_affine_1d(n, xi0);
        let rec = build_recovery_s1(&u, phi, &psi, epsilon, &grid)?;
        let recovery_energy = epsilon_energy(ig, &grid, epsilon, &rec)?;
        let run = solve_epsilon(ig, &grid, epsilon, params)?;
        rows.push(RecoveryRow {
            epsilon,
            recovery_energy,
            direct_min: run.energy,
            target,
        });
    }
    Ok(rows)
}
