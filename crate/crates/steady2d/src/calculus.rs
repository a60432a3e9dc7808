//! Differential operators and residual norms.
//!
//! Two operator paths exist. Fields with closed-form jets (catalog, tube
//! series) get exact derivatives, so the bracket residual of a steady field
//! is rounding noise. Grid-sampled fields go through finite differences:
//! centered order-6 stencils inside, shifted stencils near masked nodes, with
//! validity masks propagated so degraded nodes never pollute sup norms.

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::{BracketField, DerivativeField, FieldRef, LaplacianField};
use crate::grid::{sample_grid, GridField};
use crate::stencil::fd_weights;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Velocity field of a stream function: (-∂y f, ∂x f).
pub fn perp_gradient(f: &FieldRef) -> (FieldRef, FieldRef) {
    let u = Arc::new(DerivativeField { base: f.clone(), di: 0, dj: 1, sign: -1.0 });
    let v = Arc::new(DerivativeField { base: f.clone(), di: 1, dj: 0, sign: 1.0 });
    (u, v)
}

/// Vorticity of a stream function: ∂xx f + ∂yy f.
pub fn laplacian(f: &FieldRef) -> FieldRef {
    Arc::new(LaplacianField { base: f.clone() })
}

/// Poisson bracket {f, g} = ∇⊥f · ∇g as a field.
pub fn poisson_bracket(f: &FieldRef, g: &FieldRef) -> Result<FieldRef> {
    if !f.domain().same_as(g.domain()) {
        return Err(Error::DomainMismatch);
    }
    Ok(Arc::new(BracketField { f: f.clone(), g: g.clone() }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Norm {
    Sup,
    L2,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub field: String,
    pub scheme: String,
    pub resolution: usize,
    pub sup_residual: f64,
    pub l2_residual: f64,
    pub nodes_used: usize,
    pub margin_cells: usize,
}

impl ResidualReport {
    pub fn norm(&self, which: Norm) -> f64 {
        match which {
            Norm::Sup => self.sup_residual,
            Norm::L2 => self.l2_residual,
        }
    }
}

/// Nodes at least `margin` cells from any masked node or grid edge.
fn interior_mask(g: &GridField, margin: usize) -> Vec<bool> {
    if g.periodic {
        return g.mask.clone();
    }
    let m = margin as i64;
    let mut out = vec![false; g.mask.len()];
    for iy in 0..g.ny as i64 {
        for ix in 0..g.nx as i64 {
            let idx = (iy as usize) * g.nx + ix as usize;
            if !g.mask[idx] {
                continue;
            }
            let mut good = true;
            'scan: for dy in -m..=m {
                for dx in -m..=m {
                    let jx = ix + dx;
                    let jy = iy + dy;
                    if jx < 0 || jy < 0 || jx >= g.nx as i64 || jy >= g.ny as i64 {
                        good = false;
                        break 'scan;
                    }
                    if !g.mask[(jy as usize) * g.nx + jx as usize] {
                        good = false;
                        break 'scan;
                    }
                }
            }
            out[idx] = good;
        }
    }
    out
}

/// Margin (in cells) excluded from sup norms near the domain boundary.
pub const RESIDUAL_MARGIN_CELLS: usize = 2;

fn norms_over<F: Fn(f64, f64) -> f64 + Sync>(
    domain: &Domain,
    resolution: usize,
    margin: usize,
    value: F,
) -> (f64, f64, usize) {
    let (x0, y0, x1, y1) = domain.bounding_box();
    let periodic = domain.is_periodic().is_some();
    let n = resolution;
    let (dx, dy) = if periodic {
        ((x1 - x0) / n as f64, (y1 - y0) / n as f64)
    } else {
        ((x1 - x0) / (n - 1) as f64, (y1 - y0) / (n - 1) as f64)
    };
    let margin_dist = margin as f64 * dx.max(dy);
    let rows: Vec<(f64, f64, usize)> = (0..n)
        .into_par_iter()
        .map(|iy| {
            let y = y0 + iy as f64 * dy;
            let mut sup: f64 = 0.0;
            let mut sq = 0.0;
            let mut used = 0;
            for ix in 0..n {
                let x = x0 + ix as f64 * dx;
                if !domain.contains(x, y) {
                    continue;
                }
                if let Some(d) = domain.boundary_distance(x, y) {
                    if d < margin_dist {
                        continue;
                    }
                }
                let v = value(x, y).abs();
                if v.is_finite() {
                    sup = sup.max(v);
                    sq += v * v;
                    used += 1;
                }
            }
            (sup, sq, used)
        })
        .collect();
    let mut sup: f64 = 0.0;
    let mut sq = 0.0;
    let mut used = 0;
    for (s, q, u) in rows {
        sup = sup.max(s);
        sq += q;
        used += u;
    }
    let l2 = if used > 0 { (sq / used as f64).sqrt() } else { 0.0 };
    (sup, l2, used)
}

/// ‖{f, g}‖ over the domain grid. Uses exact jets when both fields support
/// order >= 1 everywhere (they do for closed forms).
pub fn bracket_residual(f: &FieldRef, g: &FieldRef, resolution: usize) -> Result<ResidualReport> {
    if !f.domain().same_as(g.domain()) {
        return Err(Error::DomainMismatch);
    }
    let (sup, l2, used) = norms_over(f.domain(), resolution, RESIDUAL_MARGIN_CELLS, |x, y| {
        let jf = f.jet(x, y, 1);
        let jg = g.jet(x, y, 1);
        jf.partial(1, 0) * jg.partial(0, 1) - jf.partial(0, 1) * jg.partial(1, 0)
    });
    Ok(ResidualReport {
        field: format!("{{{}, {}}}", f.name(), g.name()),
        scheme: "exact-jets".into(),
        resolution,
        sup_residual: sup,
        l2_residual: l2,
        nodes_used: used,
        margin_cells: RESIDUAL_MARGIN_CELLS,
    })
}

/// ‖{ψ, Δψ}‖ over the domain grid at the report resolution: the steadiness
/// check. One order-3 jet of ψ per node.
pub fn steady_residual(psi: &FieldRef, resolution: usize) -> ResidualReport {
    let (sup, l2, used) = norms_over(psi.domain(), resolution, RESIDUAL_MARGIN_CELLS, |x, y| {
        let j = psi.jet(x, y, 3);
        let fx = j.partial(1, 0);
        let fy = j.partial(0, 1);
        let gx = j.partial(3, 0) + j.partial(1, 2);
        let gy = j.partial(2, 1) + j.partial(0, 3);
        fx * gy - fy * gx
    });
    ResidualReport {
        field: psi.name(),
        scheme: "exact-jets".into(),
        resolution,
        sup_residual: sup,
        l2_residual: l2,
        nodes_used: used,
        margin_cells: RESIDUAL_MARGIN_CELLS,
    }
}

// ---------------------------------------------------------------------------
// Grid operator path (order-6 centered, shifted near masks)
// ---------------------------------------------------------------------------

const FD_STENCIL: usize = 7;

/// Apply an m-th derivative along one axis of a grid, producing a new grid
/// whose mask marks nodes where a full 7-point stencil of valid data existed.
fn grid_axis_derivative(g: &GridField, axis: usize, m: usize) -> GridField {
    let (n_along, h) = if axis == 0 { (g.nx, g.dx) } else { (g.ny, g.dy) };
    // precompute the 7 shifted stencil layouts
    let mut layouts = Vec::new();
    for shift in 0..FD_STENCIL {
        let nodes: Vec<f64> = (0..FD_STENCIL)
            .map(|k| (k as i64 - shift as i64) as f64 * h)
            .collect();
        layouts.push(fd_weights(0.0, &nodes, m)[m].clone());
    }
    let center = FD_STENCIL / 2;
    let mut values = vec![0.0; g.values.len()];
    let mut mask = vec![false; g.values.len()];
    let get = |ix: i64, iy: i64| -> Option<f64> {
        let (ix, iy) = if g.periodic {
            (ix.rem_euclid(g.nx as i64) as usize, iy.rem_euclid(g.ny as i64) as usize)
        } else {
            if ix < 0 || iy < 0 || ix >= g.nx as i64 || iy >= g.ny as i64 {
                return None;
            }
            (ix as usize, iy as usize)
        };
        g.mask[iy * g.nx + ix].then(|| g.values[iy * g.nx + ix])
    };
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let idx = iy * g.nx + ix;
            if !g.mask[idx] {
                continue;
            }
            let i_along = if axis == 0 { ix } else { iy } as i64;
            // try stencil shifts from centered outward
            'shifts: for &shift in order_of_shifts(center, n_along, i_along).iter() {
                let start = i_along - shift as i64;
                let mut acc = 0.0;
                for k in 0..FD_STENCIL {
                    let j = start + k as i64;
                    let v = if axis == 0 { get(j, iy as i64) } else { get(ix as i64, j) };
                    match v {
                        Some(v) => acc += layouts[shift][k] * v,
                        None => continue 'shifts,
                    }
                }
                values[idx] = acc;
                mask[idx] = true;
                break;
            }
        }
    }
    GridField {
        domain: g.domain.clone(),
        nx: g.nx,
        ny: g.ny,
        x0: g.x0,
        y0: g.y0,
        dx: g.dx,
        dy: g.dy,
        values,
        mask,
        periodic: g.periodic,
    }
}

fn order_of_shifts(center: usize, _n: usize, _i: i64) -> Vec<usize> {
    // centered first, then nearest shifts
    let mut order = vec![center];
    for d in 1..=center {
        order.push(center - d);
        order.push(center + d);
    }
    order
}

pub fn grid_derivative(g: &GridField, di: usize, dj: usize) -> GridField {
    let mut out = None;
    if di > 0 {
        out = Some(grid_axis_derivative(g, 0, di));
    }
    if dj > 0 {
        let base = out.as_ref().unwrap_or(g);
        out = Some(grid_axis_derivative(base, 1, dj));
    }
    out.unwrap_or_else(|| grid_axis_derivative(g, 0, 0))
}

pub fn grid_laplacian(g: &GridField) -> GridField {
    let xx = grid_axis_derivative(g, 0, 2);
    let yy = grid_axis_derivative(g, 1, 2);
    let mut values = xx.values.clone();
    let mut mask = xx.mask.clone();
    for i in 0..values.len() {
        values[i] += yy.values[i];
        mask[i] = mask[i] && yy.mask[i];
    }
    GridField { values, mask, ..copy_geom(g) }
}

pub fn grid_bracket(f: &GridField, g: &GridField) -> GridField {
    let fx = grid_axis_derivative(f, 0, 1);
    let fy = grid_axis_derivative(f, 1, 1);
    let gx = grid_axis_derivative(g, 0, 1);
    let gy = grid_axis_derivative(g, 1, 1);
    let mut values = vec![0.0; f.values.len()];
    let mut mask = vec![false; f.values.len()];
    for i in 0..values.len() {
        mask[i] = fx.mask[i] && fy.mask[i] && gx.mask[i] && gy.mask[i];
        if mask[i] {
            values[i] = fx.values[i] * gy.values[i] - fy.values[i] * gx.values[i];
        }
    }
    GridField { values, mask, ..copy_geom(f) }
}

fn copy_geom(g: &GridField) -> GridField {
    GridField {
        domain: g.domain.clone(),
        nx: g.nx,
        ny: g.ny,
        x0: g.x0,
        y0: g.y0,
        dx: g.dx,
        dy: g.dy,
        values: vec![],
        mask: vec![],
        periodic: g.periodic,
    }
}

// ---------------------------------------------------------------------------
// Convergence probe
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProbeOperator {
    Laplacian,
    Bracket,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub operator: String,
    pub field: String,
    pub resolutions: Vec<usize>,
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of log error vs log h; `None` when the scheme is
    /// exact on the field (errors at rounding level at all resolutions).
    pub slope: Option<f64>,
    pub exact: bool,
}

/// Measure grid-operator error against the exact-jet reference over a fixed
/// interior region, then fit the order as a log-log slope.
pub fn convergence_probe(
    operator: ProbeOperator,
    field: &FieldRef,
    resolutions: &[usize],
) -> Result<ProbeReport> {
    if resolutions.len() < 3 {
        return Err(Error::TooFew { what: "resolutions", need: 3, got: resolutions.len() });
    }
    // fixed physical margin from the coarsest run so every resolution is
    // measured on the same region
    let margin_nodes = FD_STENCIL + 1;
    let coarsest = *resolutions.iter().min().unwrap();
    let mut spacings = Vec::new();
    let mut errors = Vec::new();
    let mut scale: f64 = 0.0;
    for &res in resolutions {
        let g = sample_grid(field.as_ref(), (res, res))?;
        let approx = match operator {
            ProbeOperator::Laplacian => grid_laplacian(&g),
            ProbeOperator::Bracket => {
                let lap = grid_laplacian(&g);
                grid_bracket(&g, &lap)
            }
        };
        let margin_cells = margin_nodes * res / coarsest
            * match operator {
                ProbeOperator::Laplacian => 1,
                ProbeOperator::Bracket => 2,
            };
        let ok = interior_mask(&approx, margin_cells);
        let mut err: f64 = 0.0;
        for iy in 0..approx.ny {
            for ix in 0..approx.nx {
                let idx = approx.index(ix, iy);
                if !ok[idx] {
                    continue;
                }
                let (x, y) = approx.node(ix, iy);
                let reference = match operator {
                    ProbeOperator::Laplacian => {
                        let j = field.jet(x, y, 2);
                        j.partial(2, 0) + j.partial(0, 2)
                    }
                    ProbeOperator::Bracket => {
                        let j = field.jet(x, y, 3);
                        j.partial(1, 0) * (j.partial(2, 1) + j.partial(0, 3))
                            - j.partial(0, 1) * (j.partial(3, 0) + j.partial(1, 2))
                    }
                };
                scale = scale.max(reference.abs());
                err = err.max((approx.values[idx] - reference).abs());
            }
        }
        spacings.push(g.dx.max(g.dy));
        errors.push(err);
    }
    let exact = errors.iter().all(|e| *e <= 1e-11 * scale.max(1.0));
    let slope = if exact {
        None
    } else {
        let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
        Some(lsq_slope(&xs, &ys))
    };
    Ok(ProbeReport {
        operator: format!("{operator:?}"),
        field: field.name(),
        resolutions: resolutions.to_vec(),
        spacings,
        errors,
        slope,
        exact,
    })
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Params};
    use crate::field::Field;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn perp_gradient_of_coordinates() {
        let f = catalog::field("poly", &params(&[("c10", 1.0)])).unwrap() as FieldRef;
        let (u, v) = perp_gradient(&f);
        assert!((u.eval(0.3, 0.4) - 0.0).abs() < 1e-15);
        assert!((v.eval(0.3, 0.4) - 1.0).abs() < 1e-15);
        let g = catalog::field("poly", &params(&[("c01", 1.0)])).unwrap() as FieldRef;
        let (u, v) = perp_gradient(&g);
        assert!((u.eval(0.1, -0.2) + 1.0).abs() < 1e-15);
        assert!(v.eval(0.1, -0.2).abs() < 1e-15);
    }

    #[test]
    fn perp_gradient_vanishes_at_sinsin_origin() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let (u, v) = perp_gradient(&f);
        assert!(u.eval(0.0, 0.0).abs() < 1e-15);
        assert!(v.eval(0.0, 0.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_of_r_squared_is_four() {
        let f = catalog::field("poly", &params(&[("c20", 1.0), ("c02", 1.0)])).unwrap() as FieldRef;
        let lap = laplacian(&f);
        for &(x, y) in &[(0.0, 0.0), (0.3, -0.4), (0.5, 0.5)] {
            assert!((lap.eval(x, y) - 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn laplacian_identity_for_sinsin() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let lap = laplacian(&f);
        for &(x, y) in &[(0.3, 0.9), (2.0, 4.0), (5.5, 1.1)] {
            assert!((lap.eval(x, y) + 2.0 * f.eval(x, y)).abs() < 1e-13);
        }
    }

    #[test]
    fn radial_poly_laplacian_at_center() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let lap = laplacian(&f);
        // radial profile oracle: psi'' + psi'/r with psi = (1-r^2)^2 has the
        // series limit -8 at r = 0
        assert!((lap.eval(0.0, 0.0) + 8.0).abs() < 1e-13);
    }

    #[test]
    fn bracket_of_coordinates_is_one() {
        let f = catalog::field("poly", &params(&[("c10", 1.0)])).unwrap() as FieldRef;
        let g = catalog::field("poly", &params(&[("c01", 1.0)])).unwrap() as FieldRef;
        let b = poisson_bracket(&f, &g).unwrap();
        assert!((b.eval(0.2, 0.6) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bracket_antisymmetry_and_self_annihilation() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let g = catalog::field("sin2sin2", &Params::new()).unwrap() as FieldRef;
        let fg = poisson_bracket(&f, &g).unwrap();
        let gf = poisson_bracket(&g, &f).unwrap();
        for &(x, y) in &[(0.7, 1.9), (3.3, 0.4)] {
            assert!((fg.eval(x, y) + gf.eval(x, y)).abs() < 1e-12);
        }
        let ff = poisson_bracket(&f, &f).unwrap();
        assert!(ff.eval(1.0, 2.0).abs() < 1e-13);
    }

    #[test]
    fn wall_pair_brackets_to_zero() {
        // f = g^2 with g = sinsin: {f, g} = 2g {g, g} = 0
        let f = catalog::field("sin2sin2", &Params::new()).unwrap() as FieldRef;
        let g = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let rep = bracket_residual(&f, &g, 128).unwrap();
        assert!(rep.sup_residual <= 1e-10, "sup {}", rep.sup_residual);
    }

    #[test]
    fn steady_residual_discriminates() {
        let steady = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let rep = steady_residual(&steady, 128);
        assert!(rep.sup_residual <= 1e-10, "sinsin sup {}", rep.sup_residual);
        let perturbed = catalog::field("perturbed", &Params::new()).unwrap() as FieldRef;
        let rep = steady_residual(&perturbed, 128);
        assert!(rep.sup_residual > 0.01, "perturbed sup {}", rep.sup_residual);
    }

    #[test]
    fn domain_mismatch_rejected() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let g = catalog::field("disk-eigen", &Params::new()).unwrap() as FieldRef;
        assert!(matches!(poisson_bracket(&f, &g), Err(Error::DomainMismatch)));
    }

    #[test]
    fn probe_laplacian_order_six_on_torus() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let rep = convergence_probe(ProbeOperator::Laplacian, &f, &[32, 64, 128]).unwrap();
        let slope = rep.slope.unwrap();
        assert!(slope >= 5.0, "slope {slope}");
    }

    #[test]
    fn probe_exact_on_low_degree_polynomial() {
        let f = catalog::field(
            "poly",
            &params(&[("c00", 1.0), ("c21", 2.0), ("c30", -1.0), ("c11", 0.5)]),
        )
        .unwrap() as FieldRef;
        let rep = convergence_probe(ProbeOperator::Laplacian, &f, &[32, 64, 128]).unwrap();
        assert!(rep.exact, "errors {:?}", rep.errors);
        assert!(rep.slope.is_none());
    }

    #[test]
    fn probe_needs_three_resolutions() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        assert!(matches!(
            convergence_probe(ProbeOperator::Laplacian, &f, &[32, 64]),
            Err(Error::TooFew { .. })
        ));
    }
}
