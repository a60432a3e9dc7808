//! Domains the scalar fields live on.

use crate::error::{Error, Result};
use crate::tube::FermiChart;
use std::sync::Arc;

/// A 2D domain: a periodic torus cell, a disk, an annulus, or a tubular
/// neighborhood of a Jordan curve (addressed through its Fermi chart).
#[derive(Clone)]
pub enum Domain {
    /// Torus cell `[0, lx) x [0, ly)`.
    PeriodicRect { lx: f64, ly: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
    Annulus { cx: f64, cy: f64, r_in: f64, r_out: f64 },
    /// Points within `half_width` of the chart's curve (in signed normal
    /// distance). The chart enforces injectivity at construction.
    JordanTube { chart: Arc<FermiChart>, half_width: f64 },
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::PeriodicRect { lx, ly } => write!(f, "PeriodicRect({lx}, {ly})"),
            Domain::Disk { cx, cy, r } => write!(f, "Disk(({cx}, {cy}), r={r})"),
            Domain::Annulus { cx, cy, r_in, r_out } => {
                write!(f, "Annulus(({cx}, {cy}), {r_in}..{r_out})")
            }
            Domain::JordanTube { half_width, .. } => write!(f, "JordanTube(delta={half_width})"),
        }
    }
}

impl Domain {
    pub fn disk_unit() -> Domain {
        Domain::Disk { cx: 0.0, cy: 0.0, r: 1.0 }
    }

    pub fn torus_2pi() -> Domain {
        Domain::PeriodicRect {
            lx: std::f64::consts::TAU,
            ly: std::f64::consts::TAU,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::PeriodicRect { lx, ly } => {
                if *lx <= 0.0 || *ly <= 0.0 {
                    return Err(Error::ParamOutOfRange {
                        name: "lx/ly".into(),
                        reason: "periodic widths must be positive".into(),
                    });
                }
            }
            Domain::Disk { r, .. } => {
                if *r <= 0.0 {
                    return Err(Error::ParamOutOfRange {
                        name: "r".into(),
                        reason: "disk radius must be positive".into(),
                    });
                }
            }
            Domain::Annulus { r_in, r_out, .. } => {
                if !(0.0 < *r_in && r_in < r_out) {
                    return Err(Error::ParamOutOfRange {
                        name: "r_in/r_out".into(),
                        reason: "need 0 < r_in < r_out".into(),
                    });
                }
            }
            Domain::JordanTube { chart, half_width } => {
                let prod = half_width * chart.curvature_sup();
                if *half_width <= 0.0 || prod > 0.5 {
                    return Err(Error::TubeTooWide(prod));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Domain::PeriodicRect { .. } => true,
            Domain::Disk { cx, cy, r } => {
                let dx = x - cx;
                let dy = y - cy;
                dx * dx + dy * dy <= r * r
            }
            Domain::Annulus { cx, cy, r_in, r_out } => {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                *r_in * r_in <= d2 && d2 <= r_out * r_out
            }
            Domain::JordanTube { chart, half_width } => match chart.locate(x, y) {
                Some((_s, n)) => n.abs() <= *half_width,
                None => false,
            },
        }
    }

    pub fn is_periodic(&self) -> Option<(f64, f64)> {
        match self {
            Domain::PeriodicRect { lx, ly } => Some((*lx, *ly)),
            _ => None,
        }
    }

    /// Axis-aligned bounding box `(x0, y0, x1, y1)`. For the periodic cell
    /// this is the fundamental cell itself.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match self {
            Domain::PeriodicRect { lx, ly } => (0.0, 0.0, *lx, *ly),
            Domain::Disk { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
            Domain::Annulus { cx, cy, r_out, .. } => {
                (cx - r_out, cy - r_out, cx + r_out, cy + r_out)
            }
            Domain::JordanTube { chart, half_width } => chart.bounding_box(*half_width),
        }
    }

    /// Closed boundary polylines, outermost first, each traversed
    /// counterclockwise. Empty for the periodic cell.
    pub fn boundary_polylines(&self, points_per_curve: usize) -> Vec<Vec<(f64, f64)>> {
        let m = points_per_curve.max(16);
        let circle = |cx: f64, cy: f64, r: f64| -> Vec<(f64, f64)> {
            (0..m)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / m as f64;
                    (cx + r * t.cos(), cy + r * t.sin())
                })
                .collect()
        };
        match self {
            Domain::PeriodicRect { .. } => vec![],
            Domain::Disk { cx, cy, r } => vec![circle(*cx, *cy, *r)],
            Domain::Annulus { cx, cy, r_in, r_out } => {
                vec![circle(*cx, *cy, *r_out), circle(*cx, *cy, *r_in)]
            }
            Domain::JordanTube { chart, half_width } => vec![
                chart.offset_polyline(*half_width, m),
                chart.offset_polyline(-*half_width, m),
            ],
        }
    }

    /// Signed distance to the domain boundary, positive inside. Exact for
    /// disks, annuli, and tubes; the periodic cell has no boundary.
    pub fn boundary_distance(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            Domain::PeriodicRect { .. } => None,
            Domain::Disk { cx, cy, r } => {
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                Some(r - d)
            }
            Domain::Annulus { cx, cy, r_in, r_out } => {
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                Some((r_out - d).min(d - r_in))
            }
            Domain::JordanTube { chart, half_width } => {
                let (_s, n) = chart.locate(x, y)?;
                Some(half_width - n.abs())
            }
        }
    }

    /// Boundary of this domain as a [`RegionBoundary`] (outermost curve).
    pub fn outer_boundary(&self) -> Option<RegionBoundary> {
        match self {
            Domain::PeriodicRect { .. } => None,
            Domain::Disk { cx, cy, r } => {
                Some(RegionBoundary::Circle { cx: *cx, cy: *cy, r: *r })
            }
            Domain::Annulus { cx, cy, r_out, .. } => {
                Some(RegionBoundary::Circle { cx: *cx, cy: *cy, r: *r_out })
            }
            Domain::JordanTube { chart, half_width } => Some(RegionBoundary::ChartOffset {
                chart: chart.clone(),
                offset: *half_width,
            }),
        }
    }

    /// Loose structural equality, enough for domain-mismatch checks.
    pub fn same_as(&self, other: &Domain) -> bool {
        match (self, other) {
            (Domain::PeriodicRect { lx: a, ly: b }, Domain::PeriodicRect { lx: c, ly: d }) => {
                a == c && b == d
            }
            (Domain::Disk { cx, cy, r }, Domain::Disk { cx: a, cy: b, r: c }) => {
                cx == a && cy == b && r == c
            }
            (
                Domain::Annulus { cx, cy, r_in, r_out },
                Domain::Annulus { cx: a, cy: b, r_in: c, r_out: d },
            ) => cx == a && cy == b && r_in == c && r_out == d,
            (
                Domain::JordanTube { chart: c1, half_width: h1 },
                Domain::JordanTube { chart: c2, half_width: h2 },
            ) => Arc::ptr_eq(c1, c2) && h1 == h2,
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Region boundaries
// ---------------------------------------------------------------------------

/// A closed boundary curve used by the overdetermined checks and the moving
/// plane sweep: exact for circles and chart offsets, nearest-segment for
/// traced polylines.
#[derive(Clone)]
pub enum RegionBoundary {
    Circle { cx: f64, cy: f64, r: f64 },
    /// Offset curve of a Fermi chart at signed normal distance `offset`
    /// (0 = the curve itself).
    ChartOffset { chart: Arc<FermiChart>, offset: f64 },
    Polyline(Vec<(f64, f64)>),
}

/// Boundary samples with unit normals (orientation is not guaranteed; the
/// checks that use these are orientation-free).
#[derive(Clone, Debug)]
pub struct BoundarySamples {
    pub points: Vec<(f64, f64)>,
    pub normals: Vec<(f64, f64)>,
}

impl RegionBoundary {
    /// Unsigned distance from a point to the boundary curve.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match self {
            RegionBoundary::Circle { cx, cy, r } => {
                (((x - cx).hypot(y - cy)) - r).abs()
            }
            RegionBoundary::ChartOffset { chart, offset } => match chart.locate(x, y) {
                Some((_s, n)) => (n - offset).abs(),
                None => f64::MAX,
            },
            RegionBoundary::Polyline(pts) => {
                let mut best = f64::MAX;
                for i in 0..pts.len() {
                    let a = pts[i];
                    let b = pts[(i + 1) % pts.len()];
                    best = best.min(segment_distance((x, y), a, b));
                }
                best
            }
        }
    }

    /// Sample points with normals along the boundary.
    pub fn samples(&self, count: usize) -> BoundarySamples {
        match self {
            RegionBoundary::Circle { cx, cy, r } => {
                let mut points = Vec::with_capacity(count);
                let mut normals = Vec::with_capacity(count);
                for k in 0..count {
                    let t = std::f64::consts::TAU * k as f64 / count as f64;
                    points.push((cx + r * t.cos(), cy + r * t.sin()));
                    normals.push((t.cos(), t.sin()));
                }
                BoundarySamples { points, normals }
            }
            RegionBoundary::ChartOffset { chart, offset } => {
                let mut points = Vec::with_capacity(count);
                let mut normals = Vec::with_capacity(count);
                for k in 0..count {
                    let s = chart.curve.length * k as f64 / count as f64;
                    let f = chart.curve.frame(s);
                    points.push((f.pos.0 + offset * f.normal.0, f.pos.1 + offset * f.normal.1));
                    normals.push(f.normal);
                }
                BoundarySamples { points, normals }
            }
            RegionBoundary::Polyline(pts) => {
                let n = pts.len();
                let step = (n / count.max(1)).max(1);
                let mut points = Vec::new();
                let mut normals = Vec::new();
                for i in (0..n).step_by(step) {
                    let prev = pts[(i + n - 1) % n];
                    let next = pts[(i + 1) % n];
                    let tx = next.0 - prev.0;
                    let ty = next.1 - prev.1;
                    let norm = tx.hypot(ty);
                    if norm < 1e-300 {
                        continue;
                    }
                    points.push(pts[i]);
                    normals.push((ty / norm, -tx / norm));
                }
                BoundarySamples { points, normals }
            }
        }
    }

    /// A representative interior point (used to orient sweeps).
    pub fn interior_hint(&self) -> (f64, f64) {
        match self {
            RegionBoundary::Circle { cx, cy, .. } => (*cx, *cy),
            RegionBoundary::ChartOffset { chart, .. } => {
                let f = chart.curve.frame(0.0);
                f.pos
            }
            RegionBoundary::Polyline(pts) => {
                let n = pts.len() as f64;
                let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
                (sx / n, sy / n)
            }
        }
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let abx = b.0 - a.0;
    let aby = b.1 - a.1;
    let apx = p.0 - a.0;
    let apy = p.1 - a.1;
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 { ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let qx = a.0 + t * abx;
    let qy = a.1 + t * aby;
    (p.0 - qx).hypot(p.1 - qy)
}
