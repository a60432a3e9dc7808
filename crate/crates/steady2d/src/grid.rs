//! Uniform-grid sampling of fields, high-order local interpolation, and the
//! CSV dump format.

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::jet::{factorial, Jet};
use crate::stencil::fd_weights;
use rayon::prelude::*;
use std::io::Write;

/// Interpolation stencil width per axis (order-6 local polynomial).
const STENCIL: usize = 6;
/// Derivative cap for grid-backed fields.
pub const GRID_MAX_ORDER: usize = 4;

/// A field sampled on a uniform grid over the domain bounding box, with a
/// mask for nodes outside the domain. Periodic domains wrap; bounded domains
/// carry endpoint nodes.
pub struct GridField {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub periodic: bool,
}

impl GridField {
    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn node(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x0 + ix as f64 * self.dx, self.y0 + iy as f64 * self.dy)
    }

    #[inline]
    pub fn valid(&self, ix: usize, iy: usize) -> bool {
        self.mask[self.index(ix, iy)]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }

    /// 1D stencil start index so that `STENCIL` nodes fit around `i_near`.
    fn stencil_start(&self, i_near: i64, n: usize) -> i64 {
        if self.periodic {
            i_near - (STENCIL as i64) / 2 + 1
        } else {
            (i_near - (STENCIL as i64) / 2 + 1).clamp(0, n as i64 - STENCIL as i64)
        }
    }

    #[inline]
    fn wrap(i: i64, n: usize) -> usize {
        i.rem_euclid(n as i64) as usize
    }

    /// Interpolated jet at `(x, y)` up to `order` (capped at [`GRID_MAX_ORDER`]).
    /// Returns `None` when the stencil touches masked nodes.
    pub fn interp_jet(&self, x: f64, y: f64, order: usize) -> Option<Jet> {
        let order = order.min(GRID_MAX_ORDER);
        let fx = (x - self.x0) / self.dx;
        let fy = (y - self.y0) / self.dy;
        let ix_near = fx.round() as i64;
        let iy_near = fy.round() as i64;
        let sx = self.stencil_start(ix_near, self.nx);
        let sy = self.stencil_start(iy_near, self.ny);
        let nodes_x: Vec<f64> = (0..STENCIL)
            .map(|k| self.x0 + (sx + k as i64) as f64 * self.dx)
            .collect();
        let nodes_y: Vec<f64> = (0..STENCIL)
            .map(|k| self.y0 + (sy + k as i64) as f64 * self.dy)
            .collect();
        let wx = fd_weights(x, &nodes_x, order);
        let wy = fd_weights(y, &nodes_y, order);
        // gather the block
        let mut block = [[0.0; STENCIL]; STENCIL];
        for (a, row) in block.iter_mut().enumerate() {
            let ix = if self.periodic {
                Self::wrap(sx + a as i64, self.nx)
            } else {
                (sx + a as i64) as usize
            };
            for (b, cell) in row.iter_mut().enumerate() {
                let iy = if self.periodic {
                    Self::wrap(sy + b as i64, self.ny)
                } else {
                    (sy + b as i64) as usize
                };
                if !self.valid(ix, iy) {
                    return None;
                }
                *cell = self.values[self.index(ix, iy)];
            }
        }
        let mut jet = Jet::constant(0.0, order);
        for di in 0..=order {
            for dj in 0..=(order - di) {
                let mut acc = 0.0;
                for (a, row) in block.iter().enumerate() {
                    let wa = wx[di][a];
                    if wa == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for (b, cell) in row.iter().enumerate() {
                        inner += wy[dj][b] * cell;
                    }
                    acc += wa * inner;
                }
                *jet.coeff_mut(di, dj) = acc / (factorial(di) * factorial(dj));
            }
        }
        Some(jet)
    }

    /// Interpolated value; exact (bit-identical) at grid nodes.
    pub fn interp(&self, x: f64, y: f64) -> Option<f64> {
        let fx = (x - self.x0) / self.dx;
        let fy = (y - self.y0) / self.dy;
        let ix = fx.round();
        let iy = fy.round();
        if (fx - ix).abs() < 1e-12 && (fy - iy).abs() < 1e-12 {
            let (ix, iy) = if self.periodic {
                (Self::wrap(ix as i64, self.nx), Self::wrap(iy as i64, self.ny))
            } else {
                if ix < 0.0 || iy < 0.0 || ix as usize >= self.nx || iy as usize >= self.ny {
                    return None;
                }
                (ix as usize, iy as usize)
            };
            return self.valid(ix, iy).then(|| self.values[self.index(ix, iy)]);
        }
        self.interp_jet(x, y, 0).map(|j| j.value())
    }

    /// Row-major CSV dump: header `# nx ny x0 y0 dx dy`, one grid row per
    /// line, masked cells as `nan`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "# {} {} {} {} {} {}",
            self.nx, self.ny, self.x0, self.y0, self.dx, self.dy
        )?;
        for iy in 0..self.ny {
            let mut line = String::with_capacity(self.nx * 12);
            for ix in 0..self.nx {
                if ix > 0 {
                    line.push(',');
                }
                let i = self.index(ix, iy);
                if self.mask[i] {
                    line.push_str(&format!("{:.17e}", self.values[i]));
                } else {
                    line.push_str("nan");
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

impl Field for GridField {
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        self.interp_jet(x, y, order)
            .unwrap_or_else(|| Jet::constant(f64::NAN, order.min(GRID_MAX_ORDER)))
    }
    fn max_order(&self) -> usize {
        GRID_MAX_ORDER
    }
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.interp(x, y).unwrap_or(f64::NAN)
    }
    fn name(&self) -> String {
        format!("grid({}x{})", self.nx, self.ny)
    }
}

/// Sample a field on an `nx x ny` uniform grid over its domain bounding box.
pub fn sample_grid(field: &dyn Field, resolution: (usize, usize)) -> Result<GridField> {
    let (nx, ny) = resolution;
    if nx < 16 || ny < 16 {
        return Err(Error::ResolutionTooSmall(nx, ny));
    }
    let domain = field.domain().clone();
    let (x0, y0, x1, y1) = domain.bounding_box();
    let periodic = domain.is_periodic().is_some();
    let (dx, dy) = if periodic {
        ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64)
    } else {
        ((x1 - x0) / (nx - 1) as f64, (y1 - y0) / (ny - 1) as f64)
    };
    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            let y = y0 + iy as f64 * dy;
            let mut vals = vec![0.0; nx];
            let mut mask = vec![false; nx];
            for ix in 0..nx {
                let x = x0 + ix as f64 * dx;
                if domain.contains(x, y) {
                    vals[ix] = field.eval(x, y);
                    mask[ix] = true;
                }
            }
            (vals, mask)
        })
        .collect();
    let mut values = Vec::with_capacity(nx * ny);
    let mut mask = Vec::with_capacity(nx * ny);
    for (v, m) in rows {
        values.extend(v);
        mask.extend(m);
    }
    if mask.iter().all(|m| !*m) {
        return Err(Error::EmptyDomain);
    }
    Ok(GridField { domain, nx, ny, x0, y0, dx, dy, values, mask, periodic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn node_roundtrip_is_bit_exact() {
        let f = catalog::field("sinsin", &Default::default()).unwrap();
        let g = sample_grid(f.as_ref(), (64, 64)).unwrap();
        let mut max_diff: f64 = 0.0;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let (x, y) = g.node(ix, iy);
                let d = (g.interp(x, y).unwrap() - g.values[g.index(ix, iy)]).abs();
                max_diff = max_diff.max(d);
            }
        }
        assert_eq!(max_diff, 0.0);
    }

    #[test]
    fn masked_count_matches_disk_geometry() {
        let f = catalog::field("radial-poly", &[("p".to_string(), 2.0)].into_iter().collect())
            .unwrap();
        let g = sample_grid(f.as_ref(), (128, 128)).unwrap();
        let mut outside = 0;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let (x, y) = g.node(ix, iy);
                if x * x + y * y > 1.0 {
                    outside += 1;
                }
            }
        }
        assert_eq!(g.masked_count(), outside);
    }

    #[test]
    fn mid_edge_interpolation_accuracy_disk_eigen() {
        let f = catalog::field("disk-eigen", &Default::default()).unwrap();
        let g = sample_grid(f.as_ref(), (256, 256)).unwrap();
        let mut max_err: f64 = 0.0;
        for iy in (8..248).step_by(7) {
            for ix in (8..248).step_by(7) {
                let (x, y) = g.node(ix, iy);
                let xm = x + g.dx / 2.0;
                if xm * xm + y * y > 0.9 * 0.9 {
                    continue;
                }
                if let Some(v) = g.interp(xm, y) {
                    max_err = max_err.max((v - f.eval(xm, y)).abs());
                }
            }
        }
        assert!(max_err <= 1e-8, "mid-edge error {max_err}");
    }

    #[test]
    fn too_small_resolution_rejected() {
        let f = catalog::field("sinsin", &Default::default()).unwrap();
        assert!(matches!(
            sample_grid(f.as_ref(), (8, 64)),
            Err(Error::ResolutionTooSmall(..))
        ));
    }

    #[test]
    fn csv_header_and_nan_cells() {
        let f = catalog::field("radial-poly", &[("p".to_string(), 2.0)].into_iter().collect())
            .unwrap();
        let g = sample_grid(f.as_ref(), (16, 16)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# 16 16 "));
        assert!(text.contains("nan"));
        assert_eq!(lines.count(), 16);
    }

    #[test]
    fn grid_jet_derivatives_converge() {
        let f = catalog::field("sinsin", &Default::default()).unwrap();
        let g = sample_grid(f.as_ref(), (128, 128)).unwrap();
        let (x, y) = (1.234, 2.345);
        let j = g.interp_jet(x, y, 2).unwrap();
        let exact = f.jet(x, y, 2);
        assert!((j.partial(1, 0) - exact.partial(1, 0)).abs() < 1e-7);
        assert!((j.partial(2, 0) - exact.partial(2, 0)).abs() < 1e-5);
        assert!((j.partial(1, 1) - exact.partial(1, 1)).abs() < 1e-6);
    }
}
