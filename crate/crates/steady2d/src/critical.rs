//! Critical-set analysis: degrees of vanishing, critical curve tracing,
//! region decomposition, and the degree-relation checks.
//!
//! Detection works on a raster: a node is flagged when its gradient is small
//! against the Newton distance estimate `|∇ψ| / ‖D²ψ‖`, which stays
//! scale-free across degenerate curves of any vanishing order. Flagged nodes
//! are clustered, point clusters are polished by Newton, and curve clusters
//! are collapsed onto the critical curve by sliding each node to the local
//! minimum of `|∇ψ|²` before chaining into polylines. Junctions (where the
//! degree jumps) become shared polyline endpoints; no attempt is made to
//! continue branches through them.

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::Field;
use rayon::prelude::*;
use serde::Serialize;

/// Degeneracy tolerance relative to the local Taylor scale (closed forms).
pub const TOL_DEGREE_EXACT: f64 = 1e-7;
/// Same, for grid-backed fields.
pub const TOL_DEGREE_GRID: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct DegreeResult {
    pub point: (f64, f64),
    /// Smallest order with a nonvanishing derivative tensor; `None` means it
    /// exceeds the derivative cap.
    pub degree: Option<usize>,
    pub leading_norm: f64,
    /// Ratio of the leading-order magnitude to the next order's.
    pub confidence: f64,
}

/// Degree of vanishing of `f` at a point: the first k >= 1 with a
/// nonvanishing k-th derivative, judged against the local Taylor scale.
pub fn vanishing_degree(
    f: &dyn Field,
    point: (f64, f64),
    max_order: usize,
) -> Result<DegreeResult> {
    let tol = if f.max_order() >= 6 { TOL_DEGREE_EXACT } else { TOL_DEGREE_GRID };
    vanishing_degree_with_tol(f, point, max_order, tol)
}

pub fn vanishing_degree_with_tol(
    f: &dyn Field,
    point: (f64, f64),
    max_order: usize,
    tol: f64,
) -> Result<DegreeResult> {
    if !f.domain().contains(point.0, point.1) {
        return Err(Error::OutsideDomain(point.0, point.1));
    }
    let k = max_order.min(f.max_order());
    let jet = f.jet(point.0, point.1, k);
    // per-order Taylor-coefficient magnitudes
    let mut mags = vec![0.0f64; k + 1];
    for (d, m) in mags.iter_mut().enumerate() {
        for i in 0..=d {
            *m = m.max(jet.coeff(i, d - i).abs());
        }
    }
    let scale = mags.iter().fold(0.0f64, |a, b| a.max(*b));
    if scale == 0.0 {
        return Ok(DegreeResult { point, degree: None, leading_norm: 0.0, confidence: 0.0 });
    }
    for d in 1..=k {
        if mags[d] > tol * scale {
            let next = if d < k { mags[d + 1] } else { 0.0 };
            return Ok(DegreeResult {
                point,
                degree: Some(d),
                leading_norm: mags[d],
                confidence: if next > 0.0 { mags[d] / next } else { f64::INFINITY },
            });
        }
    }
    Ok(DegreeResult { point, degree: None, leading_norm: 0.0, confidence: 0.0 })
}

// ---------------------------------------------------------------------------
// Critical components
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ComponentKind {
    IsolatedPoint,
    /// Arc ending on the domain boundary or on junction points.
    Arc,
    Loop,
    /// Two-dimensional degenerate set (field locally constant); reported,
    /// never traced.
    Region,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalComponent {
    pub kind: ComponentKind,
    pub polyline: Vec<(f64, f64)>,
    /// Degrees at sampled polyline points (subsampled for long curves).
    pub degrees: Vec<Option<usize>>,
    /// The constant degree when `constant_degree` holds.
    pub degree: Option<usize>,
    pub constant_degree: bool,
    pub anomalous: bool,
    /// Junction points (degree jumps) shared with other components.
    pub junctions: Vec<(f64, f64)>,
    /// Mean field value along the component.
    pub level: f64,
    pub closed: bool,
}

impl CriticalComponent {
    pub fn length(&self) -> f64 {
        polyline_length(&self.polyline, self.closed)
    }
}

fn polyline_length(pts: &[(f64, f64)], closed: bool) -> f64 {
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += (w[0].0 - w[1].0).hypot(w[0].1 - w[1].1);
    }
    if closed && pts.len() > 2 {
        let a = pts[0];
        let b = pts[pts.len() - 1];
        acc += (a.0 - b.0).hypot(a.1 - b.1);
    }
    acc
}

pub fn shoelace_area(pts: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

pub fn point_in_polygon(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if ((yi > p.1) != (yj > p.1)) && (p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi) {
            inside = !inside;
        }
        j = i;
    }
    inside
}

// ---------------------------------------------------------------------------
// Raster detection
// ---------------------------------------------------------------------------

pub(crate) struct Raster {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub periodic: bool,
    pub lx: f64,
    pub ly: f64,
    pub in_domain: Vec<bool>,
    pub flagged: Vec<bool>,
}

impl Raster {
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }
    pub fn node(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x0 + ix as f64 * self.dx, self.y0 + iy as f64 * self.dy)
    }
    fn neighbors(&self, ix: usize, iy: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(8);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let jx = ix as i64 + dx;
                let jy = iy as i64 + dy;
                if self.periodic {
                    out.push((
                        jx.rem_euclid(self.nx as i64) as usize,
                        jy.rem_euclid(self.ny as i64) as usize,
                    ));
                } else if jx >= 0 && jy >= 0 && (jx as usize) < self.nx && (jy as usize) < self.ny {
                    out.push((jx as usize, jy as usize));
                }
            }
        }
        out
    }
    /// Shortest displacement honoring periodicity.
    fn disp(&self, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let mut ux = b.0 - a.0;
        let mut uy = b.1 - a.1;
        if self.periodic {
            ux -= (ux / self.lx).round() * self.lx;
            uy -= (uy / self.ly).round() * self.ly;
        }
        (ux, uy)
    }
    fn dist(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let (ux, uy) = self.disp(a, b);
        ux.hypot(uy)
    }
    fn nearest_node(&self, p: (f64, f64)) -> Option<(usize, usize)> {
        let ix = ((p.0 - self.x0) / self.dx).round() as i64;
        let iy = ((p.1 - self.y0) / self.dy).round() as i64;
        if self.periodic {
            Some((ix.rem_euclid(self.nx as i64) as usize, iy.rem_euclid(self.ny as i64) as usize))
        } else if ix >= 0 && iy >= 0 && (ix as usize) < self.nx && (iy as usize) < self.ny {
            Some((ix as usize, iy as usize))
        } else {
            None
        }
    }
}

fn build_raster(f: &dyn Field, resolution: usize) -> Raster {
    let domain = f.domain();
    let (x0, y0, x1, y1) = domain.bounding_box();
    let periodic = domain.is_periodic().is_some();
    let n = resolution;
    let (dx, dy) = if periodic {
        ((x1 - x0) / n as f64, (y1 - y0) / n as f64)
    } else {
        ((x1 - x0) / (n - 1) as f64, (y1 - y0) / (n - 1) as f64)
    };
    let h = dx.max(dy);
    let rows: Vec<(Vec<bool>, Vec<bool>)> = (0..n)
        .into_par_iter()
        .map(|iy| {
            let y = y0 + iy as f64 * dy;
            let mut dom = vec![false; n];
            let mut flag = vec![false; n];
            for ix in 0..n {
                let x = x0 + ix as f64 * dx;
                if !domain.contains(x, y) {
                    continue;
                }
                let jet = f.jet(x, y, 2);
                if !jet.value().is_finite() {
                    continue;
                }
                dom[ix] = true;
                let gx = jet.partial(1, 0);
                let gy = jet.partial(0, 1);
                let grad = gx.hypot(gy);
                let hxx = jet.partial(2, 0);
                let hxy = jet.partial(1, 1);
                let hyy = jet.partial(0, 2);
                let hn = (hxx * hxx + 2.0 * hxy * hxy + hyy * hyy).sqrt();
                // Newton distance estimate plus an absolute floor for fully
                // degenerate (locally constant) zones
                let scale = jet.value().abs().max(grad).max(hn);
                flag[ix] = grad <= 1.6 * h * hn + 1e-11 * scale;
            }
            (dom, flag)
        })
        .collect();
    let mut in_domain = Vec::with_capacity(n * n);
    let mut flagged = Vec::with_capacity(n * n);
    for (d, fl) in rows {
        in_domain.extend(d);
        flagged.extend(fl);
    }
    Raster {
        nx: n,
        ny: n,
        x0,
        y0,
        dx,
        dy,
        periodic,
        lx: x1 - x0,
        ly: y1 - y0,
        in_domain,
        flagged,
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }
    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Slide a point onto the critical set by minimizing g = |∇f|² along its
/// steepest direction (damped 1D Newton).
fn slide_to_ridge(f: &dyn Field, start: (f64, f64), h: f64) -> (f64, f64) {
    let mut p = start;
    for _ in 0..40 {
        let jet = f.jet(p.0, p.1, 3);
        let gx = jet.partial(1, 0);
        let gy = jet.partial(0, 1);
        let hxx = jet.partial(2, 0);
        let hxy = jet.partial(1, 1);
        let hyy = jet.partial(0, 2);
        // ∇g = 2 H ∇f
        let dgx = 2.0 * (gx * hxx + gy * hxy);
        let dgy = 2.0 * (gx * hxy + gy * hyy);
        let norm = dgx.hypot(dgy);
        let dir = if norm > 1e-14 {
            (dgx / norm, dgy / norm)
        } else {
            let e = dominant_eigvec(hxx, hxy, hyy);
            if e == (0.0, 0.0) {
                return p;
            }
            e
        };
        // 1D Newton for phi(t) = g(p + t dir)
        let phi_p = dgx * dir.0 + dgy * dir.1;
        let txxx = jet.partial(3, 0);
        let txxy = jet.partial(2, 1);
        let txyy = jet.partial(1, 2);
        let tyyy = jet.partial(0, 3);
        let hgxx = 2.0 * (hxx * hxx + hxy * hxy + gx * txxx + gy * txxy);
        let hgxy = 2.0 * (hxx * hxy + hxy * hyy + gx * txxy + gy * txyy);
        let hgyy = 2.0 * (hxy * hxy + hyy * hyy + gx * txyy + gy * tyyy);
        let phi_pp = hgxx * dir.0 * dir.0 + 2.0 * hgxy * dir.0 * dir.1 + hgyy * dir.1 * dir.1;
        if phi_pp.abs() < 1e-300 {
            return p;
        }
        let mut t = -phi_p / phi_pp;
        if !t.is_finite() {
            return p;
        }
        t = t.clamp(-h, h);
        p = (p.0 + t * dir.0, p.1 + t * dir.1);
        if t.abs() < 1e-14 {
            break;
        }
    }
    p
}

fn dominant_eigvec(a: f64, b: f64, c: f64) -> (f64, f64) {
    // symmetric [[a, b], [b, c]]
    let tr = a + c;
    let det = a * c - b * b;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l1 = tr / 2.0 + disc;
    let l2 = tr / 2.0 - disc;
    let l = if l1.abs() >= l2.abs() { l1 } else { l2 };
    let (vx, vy) = if b.abs() > 1e-300 {
        (l - c, b)
    } else if a.abs() >= c.abs() {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let n = vx.hypot(vy);
    if n == 0.0 {
        (0.0, 0.0)
    } else {
        (vx / n, vy / n)
    }
}

/// 2D Newton polish for an isolated critical point (∇f = 0).
fn polish_point(f: &dyn Field, start: (f64, f64), h: f64) -> (f64, f64) {
    let mut p = start;
    let mut best = start;
    let mut best_g = f64::MAX;
    for _ in 0..50 {
        let jet = f.jet(p.0, p.1, 2);
        let gx = jet.partial(1, 0);
        let gy = jet.partial(0, 1);
        let g = gx.hypot(gy);
        if g < best_g {
            best_g = g;
            best = p;
        }
        let hxx = jet.partial(2, 0);
        let hxy = jet.partial(1, 1);
        let hyy = jet.partial(0, 2);
        let det = hxx * hyy - hxy * hxy;
        let scale = (hxx.abs() + hyy.abs()).max(1e-300);
        let (sx, sy) = if det.abs() > 1e-12 * scale * scale {
            ((hyy * gx - hxy * gy) / det, (hxx * gy - hxy * gx) / det)
        } else {
            let q = slide_to_ridge(f, p, h);
            (p.0 - q.0, p.1 - q.1)
        };
        let step = sx.hypot(sy);
        let clamp = if step > h { h / step } else { 1.0 };
        p = (p.0 - sx * clamp, p.1 - sy * clamp);
        if step < 1e-15 {
            break;
        }
    }
    let jet = f.jet(p.0, p.1, 1);
    if jet.partial(1, 0).hypot(jet.partial(0, 1)) <= best_g {
        p
    } else {
        best
    }
}

// ---------------------------------------------------------------------------
// find_critical_set
// ---------------------------------------------------------------------------

/// Connected components of the critical set at a given raster resolution:
/// isolated points, arcs, loops, with per-point degrees attached.
pub fn find_critical_set(f: &dyn Field, resolution: usize) -> Result<Vec<CriticalComponent>> {
    Ok(analyze_critical_set(f, resolution)?.components)
}

pub struct CriticalSetAnalysis {
    pub components: Vec<CriticalComponent>,
    pub(crate) raster: Raster,
    /// Component id per node (usize::MAX where not flagged).
    pub(crate) node_component: Vec<usize>,
}

pub fn analyze_critical_set(f: &dyn Field, resolution: usize) -> Result<CriticalSetAnalysis> {
    let raster = build_raster(f, resolution);
    let h = raster.dx.max(raster.dy);
    let n = raster.nx;
    let mut uf = UnionFind::new(n * n);
    for iy in 0..n {
        for ix in 0..n {
            let idx = raster.index(ix, iy);
            if !raster.flagged[idx] {
                continue;
            }
            for (jx, jy) in raster.neighbors(ix, iy) {
                let jdx = raster.index(jx, jy);
                if raster.flagged[jdx] {
                    uf.union(idx, jdx);
                }
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for iy in 0..n {
        for ix in 0..n {
            let idx = raster.index(ix, iy);
            if raster.flagged[idx] {
                clusters.entry(uf.find(idx)).or_default().push(idx);
            }
        }
    }
    let max_order = f.max_order().min(8);
    let mut components = Vec::new();
    let mut node_component = vec![usize::MAX; n * n];
    let mut cluster_of_component = Vec::new();
    for (cluster_id, (_root, nodes)) in clusters.into_iter().enumerate() {
        let pts: Vec<(f64, f64)> =
            nodes.iter().map(|&idx| raster.node(idx % n, idx / n)).collect();
        let mut diam: f64 = 0.0;
        let step = (pts.len() / 400).max(1);
        for i in (0..pts.len()).step_by(step) {
            for j in (i + 1..pts.len()).step_by(step) {
                diam = diam.max(raster.dist(pts[i], pts[j]));
            }
        }
        let first_component = components.len();
        if pts.len() <= 9 && diam <= 3.0 * h {
            let p = polish_point(f, pts[0], 2.0 * h);
            if !effectively_inside(f.domain(), p, 1e-9 + 1e-6 * h) {
                continue; // converged to a zero of ∇f outside the domain
            }
            let jet = f.jet(p.0, p.1, 2);
            let grad = jet.partial(1, 0).hypot(jet.partial(0, 1));
            let scale = (0..=2)
                .flat_map(|o| (0..=o).map(move |i| (i, o - i)))
                .map(|(i, j)| jet.partial(i, j).abs())
                .fold(0.0f64, f64::max);
            if grad > 1e-6 * scale.max(1e-300) {
                continue; // near-critical noise, not an actual zero of ∇f
            }
            let deg = vanishing_degree(f, clamp_into(f.domain(), p), max_order)
                .map(|d| d.degree)
                .unwrap_or(None);
            components.push(CriticalComponent {
                kind: ComponentKind::IsolatedPoint,
                polyline: vec![p],
                degrees: vec![deg],
                degree: deg,
                constant_degree: true,
                anomalous: false,
                junctions: vec![],
                level: f.eval(p.0, p.1),
                closed: false,
            });
        } else {
            // curve ribbons are a few cells thick; a genuinely 2D degenerate
            // set has nodes whose whole 11x11 neighborhood is flagged
            let deep_frac = {
                let step = (nodes.len() / 400).max(1);
                let mut deep = 0usize;
                let mut total = 0usize;
                for &idx in nodes.iter().step_by(step) {
                    total += 1;
                    let (ix, iy) = (idx % n, idx / n);
                    let mut all = true;
                    'probe: for r in 1..=5usize {
                        for (jx, jy) in ring_nodes(&raster, ix, iy, r) {
                            if !raster.flagged[raster.index(jx, jy)] {
                                all = false;
                                break 'probe;
                            }
                        }
                    }
                    if all {
                        deep += 1;
                    }
                }
                deep as f64 / total.max(1) as f64
            };
            if deep_frac > 0.1 {
                let take = pts.len().min(64);
                let mut level = 0.0;
                for p in pts.iter().take(take) {
                    level += f.eval(p.0, p.1);
                }
                level /= take as f64;
                components.push(CriticalComponent {
                    kind: ComponentKind::Region,
                    polyline: pts,
                    degrees: vec![None],
                    degree: None,
                    constant_degree: false,
                    anomalous: false,
                    junctions: vec![],
                    level,
                    closed: false,
                });
            } else {
                trace_curve_cluster(f, &raster, &pts, max_order, h, &mut components);
            }
        }
        for _ in first_component..components.len() {
            cluster_of_component.push(cluster_id);
        }
        if components.len() > first_component {
            for &idx in &nodes {
                node_component[idx] = first_component;
            }
        }
    }
    // distinct flag clusters can polish onto the same isolated critical
    // point; merge those before judging separation
    let mut drop = vec![false; components.len()];
    for i in 0..components.len() {
        if drop[i] || components[i].kind != ComponentKind::IsolatedPoint {
            continue;
        }
        for j in (i + 1)..components.len() {
            if drop[j] || components[j].kind != ComponentKind::IsolatedPoint {
                continue;
            }
            if raster.dist(components[i].polyline[0], components[j].polyline[0]) < 2.0 * h {
                drop[j] = true;
            }
        }
    }
    let mut kept_components = Vec::new();
    let mut remap = vec![usize::MAX; components.len()];
    let mut kept_clusters = Vec::new();
    for (i, c) in components.into_iter().enumerate() {
        if !drop[i] {
            remap[i] = kept_components.len();
            kept_components.push(c);
            kept_clusters.push(cluster_of_component[i]);
        }
    }
    for nc in node_component.iter_mut() {
        if *nc != usize::MAX {
            *nc = remap[*nc]; // usize::MAX when the component was dropped
        }
    }
    let components = kept_components;
    check_separation(&raster, &components, &kept_clusters)?;
    Ok(CriticalSetAnalysis { components, raster, node_component })
}

/// Collapse a curve-like cluster onto polylines (ridge sliding, junction
/// split, nearest-neighbor chaining).
fn trace_curve_cluster(
    f: &dyn Field,
    raster: &Raster,
    pts: &[(f64, f64)],
    max_order: usize,
    h: f64,
    components: &mut Vec<CriticalComponent>,
) {
    let refined: Vec<(f64, f64)> =
        pts.par_iter().map(|&p| slide_to_ridge(f, p, 1.8 * h)).collect();
    // keep only points where the slide actually reached the critical set:
    // weakly perturbed near-critical ribbons (gradient small but nonzero)
    // must not masquerade as curves
    let converged = |p: (f64, f64)| -> bool {
        if !effectively_inside(f.domain(), p, 1e-9 + 1e-6 * h) {
            return false;
        }
        let jet = f.jet(p.0, p.1, 2);
        let grad = jet.partial(1, 0).hypot(jet.partial(0, 1));
        let scale = (0..=2)
            .flat_map(|o| (0..=o).map(move |i| (i, o - i)))
            .map(|(i, j)| jet.partial(i, j).abs())
            .fold(0.0f64, f64::max);
        grad <= 1e-6 * scale.max(1e-300)
    };
    let mut kept: Vec<(f64, f64)> = Vec::new();
    'outer: for p in refined {
        if !p.0.is_finite() || !p.1.is_finite() || !converged(p) {
            continue;
        }
        for q in &kept {
            if raster.dist(p, *q) < 0.55 * h {
                continue 'outer;
            }
        }
        kept.push(p);
    }
    if kept.is_empty() {
        return;
    }
    let degs: Vec<Option<usize>> = kept
        .par_iter()
        .map(|&p| {
            vanishing_degree(f, clamp_into(f.domain(), p), max_order)
                .map(|d| d.degree)
                .unwrap_or(None)
        })
        .collect();
    let mode_degree = mode(&degs);
    let mut junctions = Vec::new();
    let mut body: Vec<(f64, f64)> = Vec::new();
    for (p, d) in kept.iter().zip(&degs) {
        if *d != mode_degree && d.map_or(true, |v| v > mode_degree.unwrap_or(0)) {
            junctions.push(*p);
        } else {
            body.push(*p);
        }
    }
    junctions = merge_close(raster, junctions, 1.5 * h);
    let body: Vec<(f64, f64)> = body
        .into_iter()
        .filter(|p| junctions.iter().all(|q| raster.dist(*p, *q) >= 1.2 * h))
        .collect();
    let chains = chain_points(raster, &body, 2.4 * h);
    let mut emitted = false;
    for chain in &chains {
        if chain.len() >= 3 {
            emitted = true;
        }
    }
    if !emitted {
        // the cluster collapsed onto one point under ridge refinement:
        // an isolated (possibly degenerate) critical point
        let seed = kept.first().copied().unwrap_or(pts[0]);
        let p = polish_point(f, seed, 2.0 * h);
        let deg = vanishing_degree(f, clamp_into(f.domain(), p), max_order)
            .map(|d| d.degree)
            .unwrap_or(None);
        components.push(CriticalComponent {
            kind: ComponentKind::IsolatedPoint,
            polyline: vec![p],
            degrees: vec![deg],
            degree: deg,
            constant_degree: true,
            anomalous: false,
            junctions: vec![],
            level: f.eval(p.0, p.1),
            closed: false,
        });
        return;
    }
    for chain in chains {
        if chain.len() < 3 {
            continue;
        }
        let mut polyline = chain;
        let mut attached = Vec::new();
        for q in &junctions {
            let d_start = raster.dist(polyline[0], *q);
            let d_end = raster.dist(*polyline.last().unwrap(), *q);
            if d_start < 3.0 * h && d_start <= d_end {
                polyline.insert(0, *q);
                attached.push(*q);
            } else if d_end < 3.0 * h {
                polyline.push(*q);
                attached.push(*q);
            }
        }
        let closed =
            raster.dist(polyline[0], *polyline.last().unwrap()) < 2.4 * h && polyline.len() >= 6;
        let kind = if closed { ComponentKind::Loop } else { ComponentKind::Arc };
        // degree is sampled on the open curve: junction endpoints carry the
        // jumped degree by definition and are reported separately
        let interior: Vec<(f64, f64)> = polyline
            .iter()
            .copied()
            .filter(|p| attached.iter().all(|q| raster.dist(*p, *q) > 1e-12))
            .collect();
        let sample_pts = subsample(&interior, 32);
        let sample_degs: Vec<Option<usize>> = sample_pts
            .iter()
            .map(|&p| {
                vanishing_degree(f, clamp_into(f.domain(), p), max_order)
                    .map(|d| d.degree)
                    .unwrap_or(None)
            })
            .collect();
        let const_deg = sample_degs.windows(2).all(|w| w[0] == w[1]);
        let level_pts = subsample(&polyline, 16);
        let level =
            level_pts.iter().map(|p| f.eval(p.0, p.1)).sum::<f64>() / level_pts.len() as f64;
        components.push(CriticalComponent {
            kind,
            degree: if const_deg { sample_degs[0] } else { None },
            degrees: sample_degs,
            constant_degree: const_deg,
            anomalous: !const_deg,
            junctions: attached,
            polyline,
            level,
            closed,
        });
    }
}

/// Inside the domain, allowing a sliver outside for boundary-hugging
/// refinement output.
fn effectively_inside(domain: &Domain, p: (f64, f64), slack: f64) -> bool {
    if domain.contains(p.0, p.1) {
        return true;
    }
    match domain.boundary_distance(p.0, p.1) {
        Some(d) => d >= -slack,
        None => false,
    }
}

fn clamp_into(domain: &Domain, p: (f64, f64)) -> (f64, f64) {
    if domain.contains(p.0, p.1) {
        return p;
    }
    // nudge boundary-hugging points inward so degree queries stay legal
    match domain {
        Domain::Disk { cx, cy, r } => {
            let d = (p.0 - cx).hypot(p.1 - cy);
            if d >= *r {
                let f = (r - 1e-12) / d;
                (cx + (p.0 - cx) * f, cy + (p.1 - cy) * f)
            } else {
                p
            }
        }
        Domain::Annulus { cx, cy, r_in, r_out } => {
            let d = (p.0 - cx).hypot(p.1 - cy);
            let target = d.clamp(r_in + 1e-12, r_out - 1e-12);
            let f = target / d;
            (cx + (p.0 - cx) * f, cy + (p.1 - cy) * f)
        }
        _ => p,
    }
}

fn merge_close(raster: &Raster, pts: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    'outer: for p in pts {
        for q in &out {
            if raster.dist(p, *q) < tol {
                continue 'outer;
            }
        }
        out.push(p);
    }
    out
}

fn subsample(pts: &[(f64, f64)], count: usize) -> Vec<(f64, f64)> {
    if pts.len() <= count {
        return pts.to_vec();
    }
    (0..count).map(|k| pts[k * (pts.len() - 1) / (count - 1)]).collect()
}

fn mode(degs: &[Option<usize>]) -> Option<usize> {
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    for d in degs.iter().flatten() {
        *counts.entry(*d).or_default() += 1;
    }
    counts.into_iter().max_by_key(|(_, c)| *c).map(|(d, _)| d)
}

/// Greedy nearest-neighbor chaining with direction continuity.
fn chain_points(raster: &Raster, pts: &[(f64, f64)], reach: f64) -> Vec<Vec<(f64, f64)>> {
    let n = pts.len();
    let mut used = vec![false; n];
    let mut chains = Vec::new();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if raster.dist(pts[i], pts[j]) <= reach {
                nbrs[i].push(j);
                nbrs[j].push(i);
            }
        }
    }
    loop {
        let mut seed = None;
        let mut best = usize::MAX;
        for i in 0..n {
            if !used[i] && nbrs[i].len() < best {
                best = nbrs[i].len();
                seed = Some(i);
            }
        }
        let Some(seed) = seed else { break };
        let mut chain = vec![seed];
        used[seed] = true;
        for _pass in 0..2 {
            loop {
                let cur = *chain.last().unwrap();
                let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
                let mut next = None;
                let mut next_score = f64::MAX;
                for &c in &nbrs[cur] {
                    if used[c] {
                        continue;
                    }
                    let d = raster.dist(pts[cur], pts[c]);
                    let mut score = d;
                    if let Some(pv) = prev {
                        let (ax, ay) = raster.disp(pts[pv], pts[cur]);
                        let (bx, by) = raster.disp(pts[cur], pts[c]);
                        let na = ax.hypot(ay);
                        let nb = bx.hypot(by);
                        if na > 0.0 && nb > 0.0 {
                            let cosang = (ax * bx + ay * by) / (na * nb);
                            if cosang < 0.25 {
                                continue; // sharper than ~75 degrees: not this curve
                            }
                            score = d * (1.5 - cosang);
                        }
                    }
                    if score < next_score {
                        next_score = score;
                        next = Some(c);
                    }
                }
                match next {
                    Some(c) => {
                        used[c] = true;
                        chain.push(c);
                    }
                    None => break,
                }
            }
            chain.reverse();
        }
        chains.push(chain.into_iter().map(|i| pts[i]).collect());
    }
    chains
}

fn check_separation(
    raster: &Raster,
    components: &[CriticalComponent],
    cluster_of: &[usize],
) -> Result<()> {
    let h = raster.dx.max(raster.dy);
    for i in 0..components.len() {
        for j in (i + 1)..components.len() {
            if cluster_of[i] == cluster_of[j] {
                continue; // same detection cluster: junction-split pieces
            }
            let pa = subsample(&components[i].polyline, 64);
            let pb = subsample(&components[j].polyline, 64);
            let mut min_d = f64::MAX;
            for a in &pa {
                for b in &pb {
                    min_d = min_d.min(raster.dist(*a, *b));
                }
            }
            if min_d < 2.0 * h {
                return Err(Error::ResolutionInsufficient);
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Region decomposition and the innermost loop
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct RegionCell {
    pub id: usize,
    pub representative: (f64, f64),
    pub area: f64,
    pub node_count: usize,
    pub adjacent_cells: Vec<usize>,
    /// Critical components bordering this cell.
    pub boundary_components: Vec<usize>,
    /// Isolated critical points inside the cell.
    pub isolated_inside: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionDecomposition {
    pub cells: Vec<RegionCell>,
    /// Cell chosen as Ω_Γ.
    pub innermost: Option<usize>,
    /// The loop (or wall) component delimiting it.
    pub innermost_component: Option<usize>,
    pub no_critical_curves: bool,
    /// Cell label per raster node (usize::MAX: blocked or outside).
    #[serde(skip)]
    pub(crate) node_cell: Vec<usize>,
}

/// Decompose the domain along the critical curves and pick the innermost
/// cell: the region enclosed by a critical curve containing no further
/// critical curves (smallest enclosed area first). With only isolated
/// critical points the whole domain is one cell, flagged accordingly.
pub fn innermost_loop(
    analysis: &CriticalSetAnalysis,
    _domain: &Domain,
) -> Result<RegionDecomposition> {
    if let Some((i, _)) =
        analysis.components.iter().enumerate().find(|(_, c)| c.anomalous)
    {
        return Err(Error::AnomalousComponent(i));
    }
    let raster = &analysis.raster;
    let n = raster.nx;
    let h = raster.dx.max(raster.dy);
    let mut blocked = vec![false; n * n];
    for iy in 0..n {
        for ix in 0..n {
            let idx = raster.index(ix, iy);
            let comp = analysis.node_component[idx];
            if comp != usize::MAX
                && analysis.components.get(comp).map(|c| c.kind)
                    != Some(ComponentKind::IsolatedPoint)
            {
                blocked[idx] = true;
            }
        }
    }
    for c in &analysis.components {
        if matches!(c.kind, ComponentKind::Loop | ComponentKind::Arc) {
            for p in &c.polyline {
                stamp(raster, &mut blocked, *p, 1.2 * h);
            }
        }
    }
    let mut uf = UnionFind::new(n * n);
    for iy in 0..n {
        for ix in 0..n {
            let idx = raster.index(ix, iy);
            if !raster.in_domain[idx] || blocked[idx] {
                continue;
            }
            for (jx, jy) in raster.neighbors(ix, iy) {
                // 4-connectivity for cells so diagonal leaks across thin
                // ribbons are impossible
                if jx != ix && jy != iy {
                    let _ = (jx, jy);
                    continue;
                }
                let jdx = raster.index(jx, jy);
                if raster.in_domain[jdx] && !blocked[jdx] {
                    uf.union(idx, jdx);
                }
            }
        }
    }
    let mut cell_ids: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut cells: Vec<RegionCell> = Vec::new();
    let mut node_cell = vec![usize::MAX; n * n];
    for iy in 0..n {
        for ix in 0..n {
            let idx = raster.index(ix, iy);
            if !raster.in_domain[idx] || blocked[idx] {
                continue;
            }
            let root = uf.find(idx);
            let id = *cell_ids.entry(root).or_insert_with(|| {
                cells.push(RegionCell {
                    id: cells.len(),
                    representative: raster.node(ix, iy),
                    area: 0.0,
                    node_count: 0,
                    adjacent_cells: vec![],
                    boundary_components: vec![],
                    isolated_inside: vec![],
                });
                cells.len() - 1
            });
            node_cell[idx] = id;
            cells[id].node_count += 1;
            cells[id].area += raster.dx * raster.dy;
        }
    }
    // pick roomier representatives: the node farthest into each cell wins
    let mut best_clearance = vec![0usize; cells.len()];
    for iy in 0..n {
        for ix in 0..n {
            let idx = raster.index(ix, iy);
            let c = node_cell[idx];
            if c == usize::MAX {
                continue;
            }
            let mut clearance = 0;
            'ring: for r in 1..6usize {
                for (jx, jy) in ring_nodes(raster, ix, iy, r) {
                    let jdx = raster.index(jx, jy);
                    if node_cell[jdx] != c {
                        break 'ring;
                    }
                }
                clearance = r;
            }
            if clearance > best_clearance[c] {
                best_clearance[c] = clearance;
                cells[c].representative = raster.node(ix, iy);
            }
        }
    }
    // adjacency and boundary components via blocked nodes
    for iy in 0..n {
        for ix in 0..n {
            let idx = raster.index(ix, iy);
            if !blocked[idx] || !raster.in_domain[idx] {
                continue;
            }
            let comp = analysis.node_component[idx];
            let mut touching: Vec<usize> = Vec::new();
            for (jx, jy) in raster.neighbors(ix, iy) {
                let c = node_cell[raster.index(jx, jy)];
                if c != usize::MAX && !touching.contains(&c) {
                    touching.push(c);
                }
            }
            for &c in &touching {
                if comp != usize::MAX && !cells[c].boundary_components.contains(&comp) {
                    cells[c].boundary_components.push(comp);
                }
                for &d in &touching {
                    if d != c && !cells[c].adjacent_cells.contains(&d) {
                        cells[c].adjacent_cells.push(d);
                    }
                }
            }
        }
    }
    for (ci, comp) in analysis.components.iter().enumerate() {
        if comp.kind == ComponentKind::IsolatedPoint {
            let p = comp.polyline[0];
            if let Some((ix, iy)) = raster.nearest_node(p) {
                let mut found = None;
                'search: for r in 0..5usize {
                    for (jx, jy) in ring_nodes(raster, ix, iy, r) {
                        let c = node_cell[raster.index(jx, jy)];
                        if c != usize::MAX {
                            found = Some(c);
                            break 'search;
                        }
                    }
                }
                if let Some(c) = found {
                    cells[c].isolated_inside.push(ci);
                }
            }
        }
    }
    let has_curves = analysis.components.iter().any(|c| {
        matches!(c.kind, ComponentKind::Loop | ComponentKind::Arc | ComponentKind::Region)
    });
    if !has_curves {
        return Ok(RegionDecomposition {
            cells,
            innermost: None,
            innermost_component: None,
            no_critical_curves: true,
            node_cell,
        });
    }
    // candidate Ω_Γ from closed loops with genuine enclosed area
    let mut best: Option<(f64, usize, usize)> = None; // (area, comp, cell)
    for (ci, comp) in analysis.components.iter().enumerate() {
        if comp.kind != ComponentKind::Loop {
            continue;
        }
        let area = shoelace_area(&comp.polyline).abs();
        if area < 4.0 * h * h {
            continue; // wrap-around loop: no enclosed area in the cell
        }
        let inside: Vec<usize> = cells
            .iter()
            .filter(|c| point_in_polygon(c.representative, &comp.polyline))
            .map(|c| c.id)
            .collect();
        if inside.is_empty() {
            continue;
        }
        let mut clean = true;
        for (cj, other) in analysis.components.iter().enumerate() {
            if cj == ci || other.kind == ComponentKind::IsolatedPoint {
                continue;
            }
            if other.polyline.iter().take(16).all(|p| point_in_polygon(*p, &comp.polyline)) {
                clean = false;
                break;
            }
        }
        if !clean {
            continue;
        }
        let cell = inside
            .iter()
            .copied()
            .max_by(|a, b| cells[*a].area.partial_cmp(&cells[*b].area).unwrap())
            .unwrap();
        if best.map_or(true, |(a, _, _)| area < a) {
            best = Some((area, ci, cell));
        }
    }
    if best.is_none() {
        // no contractible qualifying loop: fall back to the smallest cell
        // bounded by critical curves (torus walls and similar)
        let candidate = cells
            .iter()
            .filter(|c| !c.boundary_components.is_empty() && c.node_count > 16)
            .min_by(|a, b| {
                (a.area, a.representative.1, a.representative.0)
                    .partial_cmp(&(b.area, b.representative.1, b.representative.0))
                    .unwrap()
            });
        if let Some(c) = candidate {
            best = Some((c.area, c.boundary_components[0], c.id));
        }
    }
    Ok(RegionDecomposition {
        innermost: best.map(|(_, _, c)| c),
        innermost_component: best.map(|(_, ci, _)| ci),
        cells,
        no_critical_curves: false,
        node_cell,
    })
}

fn ring_nodes(raster: &Raster, ix: usize, iy: usize, r: usize) -> Vec<(usize, usize)> {
    if r == 0 {
        return vec![(ix, iy)];
    }
    let mut out = Vec::new();
    let r = r as i64;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx.abs() != r && dy.abs() != r {
                continue;
            }
            let jx = ix as i64 + dx;
            let jy = iy as i64 + dy;
            if raster.periodic {
                out.push((
                    jx.rem_euclid(raster.nx as i64) as usize,
                    jy.rem_euclid(raster.ny as i64) as usize,
                ));
            } else if jx >= 0 && jy >= 0 && (jx as usize) < raster.nx && (jy as usize) < raster.ny
            {
                out.push((jx as usize, jy as usize));
            }
        }
    }
    out
}

fn stamp(raster: &Raster, blocked: &mut [bool], p: (f64, f64), radius: f64) {
    let r_cells = (radius / raster.dx.min(raster.dy)).ceil() as i64;
    let ix = ((p.0 - raster.x0) / raster.dx).round() as i64;
    let iy = ((p.1 - raster.y0) / raster.dy).round() as i64;
    for dy in -r_cells..=r_cells {
        for dx in -r_cells..=r_cells {
            let jx = ix + dx;
            let jy = iy + dy;
            let (jx, jy) = if raster.periodic {
                (
                    jx.rem_euclid(raster.nx as i64) as usize,
                    jy.rem_euclid(raster.ny as i64) as usize,
                )
            } else {
                if jx < 0 || jy < 0 || jx >= raster.nx as i64 || jy >= raster.ny as i64 {
                    continue;
                }
                (jx as usize, jy as usize)
            };
            let node = raster.node(jx, jy);
            if raster.dist(node, p) <= radius {
                blocked[raster.index(jx, jy)] = true;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Degree relation check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DegreeRelationReport {
    pub curve_degree: usize,
    /// Expected degree of Δψ on the curve (`d - 2`); `None` in the degree-2
    /// case, where the check is Δψ != 0 instead.
    pub expected: Option<usize>,
    pub sampled: Vec<((f64, f64), Option<usize>)>,
    pub min_abs_laplacian: Option<f64>,
    pub pass: bool,
}

/// On a constant-degree critical curve: for d >= 3 the vorticity Δψ vanishes
/// to degree exactly d - 2; for d = 2 it must not vanish at all.
pub fn degree_relation_check(
    psi: &crate::field::FieldRef,
    component: &CriticalComponent,
    samples: usize,
) -> Result<DegreeRelationReport> {
    let Some(d) = component.degree else {
        return Err(Error::AnomalousComponent(0));
    };
    let lap = crate::calculus::laplacian(psi);
    let pts = subsample(&component.polyline, samples.max(4));
    if d >= 3 {
        let sampled: Vec<((f64, f64), Option<usize>)> = pts
            .iter()
            .map(|&p| {
                let q = clamp_into(psi.domain(), p);
                let deg = vanishing_degree(lap.as_ref(), q, psi.max_order().saturating_sub(2))
                    .map(|r| r.degree)
                    .unwrap_or(None);
                (p, deg)
            })
            .collect();
        let pass = sampled.iter().all(|(_, deg)| *deg == Some(d - 2));
        Ok(DegreeRelationReport {
            curve_degree: d,
            expected: Some(d - 2),
            sampled,
            min_abs_laplacian: None,
            pass,
        })
    } else {
        let mut min_abs = f64::MAX;
        let mut sampled = Vec::new();
        for &p in &pts {
            let q = clamp_into(psi.domain(), p);
            let v = lap.eval(q.0, q.1).abs();
            min_abs = min_abs.min(v);
            sampled.push((p, None));
        }
        let pass = min_abs > 1e-8;
        Ok(DegreeRelationReport {
            curve_degree: d,
            expected: None,
            sampled,
            min_abs_laplacian: Some(min_abs),
            pass,
        })
    }
}

// ---------------------------------------------------------------------------
// Local radiality
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub enum RadialityVerdict {
    Radial { center: (f64, f64), max_variation: f64 },
    NonRadial { max_variation: f64 },
    TooThin { usable_circles: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct CellRadiality {
    pub cell: usize,
    pub verdict: RadialityVerdict,
}

/// Per-cell radial symmetry test: fit a center from gradient alignment, then
/// measure the field's variation around circles about that center. A circle
/// is usable when all of its samples stay in the cell (critical-set ribbons
/// are tolerated, other cells are not).
pub fn detect_local_radiality(
    psi: &dyn Field,
    analysis: &CriticalSetAnalysis,
    decomposition: &RegionDecomposition,
) -> Vec<CellRadiality> {
    let raster = &analysis.raster;
    let n = raster.nx;
    let mut out = Vec::new();
    for cell in &decomposition.cells {
        if cell.node_count < 16 {
            out.push(CellRadiality {
                cell: cell.id,
                verdict: RadialityVerdict::TooThin { usable_circles: 0 },
            });
            continue;
        }
        let mut nodes = Vec::new();
        let mut range = (f64::MAX, f64::MIN);
        for iy in 0..n {
            for ix in 0..n {
                let idx = raster.index(ix, iy);
                if decomposition.node_cell[idx] != cell.id {
                    continue;
                }
                let p = raster.node(ix, iy);
                nodes.push(p);
                let v = psi.eval(p.0, p.1);
                if v.is_finite() {
                    range = (range.0.min(v), range.1.max(v));
                }
            }
        }
        let (center, ok) = fit_center(psi, &nodes, cell.representative);
        if !ok {
            out.push(CellRadiality {
                cell: cell.id,
                verdict: RadialityVerdict::TooThin { usable_circles: 0 },
            });
            continue;
        }
        let r_max = max_circle_radius(psi.domain(), center);
        let in_cell = |p: (f64, f64)| -> bool {
            match raster.nearest_node(p) {
                Some((ix, iy)) => {
                    let idx = raster.index(ix, iy);
                    let c = decomposition.node_cell[idx];
                    c == cell.id || (c == usize::MAX && raster.in_domain[idx])
                }
                None => false,
            }
        };
        let mut usable = 0;
        let mut max_var: f64 = 0.0;
        for k in 0..24 {
            let r = r_max * (0.12 + 0.85 * k as f64 / 23.0);
            if r <= 0.0 {
                continue;
            }
            let mut lo = f64::MAX;
            let mut hi = f64::MIN;
            let mut all_in = true;
            for a in 0..96 {
                let th = std::f64::consts::TAU * a as f64 / 96.0;
                let p = (center.0 + r * th.cos(), center.1 + r * th.sin());
                if !psi.domain().contains(p.0, p.1) || !in_cell(p) {
                    all_in = false;
                    break;
                }
                let v = psi.eval(p.0, p.1);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if all_in {
                usable += 1;
                max_var = max_var.max(hi - lo);
            }
        }
        if usable < 8 {
            out.push(CellRadiality {
                cell: cell.id,
                verdict: RadialityVerdict::TooThin { usable_circles: usable },
            });
            continue;
        }
        let scale = (range.1 - range.0).abs().max(1e-300);
        let verdict = if max_var <= 1e-7 * scale.max(1e-12) {
            RadialityVerdict::Radial { center, max_variation: max_var }
        } else {
            RadialityVerdict::NonRadial { max_variation: max_var }
        };
        out.push(CellRadiality { cell: cell.id, verdict });
    }
    out
}

fn fit_center(psi: &dyn Field, nodes: &[(f64, f64)], seed: (f64, f64)) -> ((f64, f64), bool) {
    // rows: (x - c) x ∇ψ = 0  =>  uy c_x - ux c_y = x uy - y ux
    let mut a11 = 0.0;
    let mut a12 = 0.0;
    let mut a22 = 0.0;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    let mut count = 0usize;
    let stride = (nodes.len() / 600).max(1);
    for p in nodes.iter().step_by(stride) {
        let j = psi.jet(p.0, p.1, 1);
        let gx = j.partial(1, 0);
        let gy = j.partial(0, 1);
        let norm = gx.hypot(gy);
        if norm < 1e-12 || !norm.is_finite() {
            continue;
        }
        let (ux, uy) = (gx / norm, gy / norm);
        let rhs = p.0 * uy - p.1 * ux;
        a11 += uy * uy;
        a12 -= uy * ux;
        a22 += ux * ux;
        b1 += uy * rhs;
        b2 -= ux * rhs;
        count += 1;
    }
    if count < 8 {
        return (seed, false);
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-9 * (a11 + a22).max(1e-300).powi(2) {
        return (seed, false);
    }
    let cx = (b1 * a22 - b2 * a12) / det;
    let cy = (a11 * b2 - a12 * b1) / det;
    ((cx, cy), true)
}

fn max_circle_radius(domain: &Domain, center: (f64, f64)) -> f64 {
    match domain.boundary_distance(center.0, center.1) {
        Some(d) => d.max(0.0),
        None => {
            let (x0, y0, x1, y1) = domain.bounding_box();
            0.45 * (x1 - x0).min(y1 - y0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Params};
    use crate::field::FieldRef;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn degree_frozen_values() {
        let f = catalog::field("sinsin", &Params::new()).unwrap();
        // Taylor oracle: sin x sin y = xy + h.o.t. at the origin
        let d = vanishing_degree(f.as_ref(), (0.0, 0.0), 8).unwrap();
        assert_eq!(d.degree, Some(2));
        // sin^2 x sin^2 y = x^2 y^2 + h.o.t.
        let g = catalog::field("sin2sin2", &Params::new()).unwrap();
        let d = vanishing_degree(g.as_ref(), (0.0, 0.0), 8).unwrap();
        assert_eq!(d.degree, Some(4));
        let d = vanishing_degree(
            f.as_ref(),
            (std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_4),
            8,
        )
        .unwrap();
        assert_eq!(d.degree, Some(1));
    }

    #[test]
    fn degree_on_radial_poly_boundary() {
        for p in [2u32, 3, 4] {
            let f = catalog::field("radial-poly", &params(&[("p", p as f64)])).unwrap();
            for &t in &[0.0f64, 1.0, 2.5] {
                let pt = (0.999999999999 * t.cos(), 0.999999999999 * t.sin());
                let d = vanishing_degree(f.as_ref(), pt, 8).unwrap();
                assert_eq!(d.degree, Some(p as usize), "p={p} t={t}");
            }
        }
    }

    #[test]
    fn degree_exceeds_cap_in_flat_region() {
        let f = catalog::field("two-bump", &Params::new()).unwrap();
        let d = vanishing_degree(f.as_ref(), (0.0, -1.2), 8).unwrap();
        assert_eq!(d.degree, None);
    }

    #[test]
    fn degree_rotation_invariance() {
        use crate::field::RotatedField;
        use std::sync::Arc;
        let f = catalog::field("sin2sin2", &Params::new()).unwrap() as FieldRef;
        let rot = Arc::new(RotatedField {
            base: f.clone(),
            cx: 0.0,
            cy: 0.0,
            angle: std::f64::consts::FRAC_PI_2,
        }) as FieldRef;
        for pt in [(0.0, 0.0), (std::f64::consts::PI, 0.0)] {
            let d0 = vanishing_degree(f.as_ref(), pt, 8).unwrap();
            let d1 = vanishing_degree(rot.as_ref(), pt, 8).unwrap();
            assert_eq!(d0.degree, d1.degree);
        }
    }

    #[test]
    fn sinsin_has_only_isolated_points() {
        let f = catalog::field("sinsin", &Params::new()).unwrap();
        let comps = find_critical_set(f.as_ref(), 128).unwrap();
        assert_eq!(
            comps.len(),
            8,
            "{:?}",
            comps.iter().map(|c| (c.kind, c.polyline[0])).collect::<Vec<_>>()
        );
        assert!(comps.iter().all(|c| c.kind == ComponentKind::IsolatedPoint));
        assert!(comps.iter().all(|c| c.degree == Some(2)));
    }

    #[test]
    fn radial_poly_loop_and_center() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap();
        let comps = find_critical_set(f.as_ref(), 192).unwrap();
        let loops: Vec<_> = comps.iter().filter(|c| c.kind == ComponentKind::Loop).collect();
        let points: Vec<_> =
            comps.iter().filter(|c| c.kind == ComponentKind::IsolatedPoint).collect();
        assert_eq!(
            loops.len(),
            1,
            "kinds: {:?}",
            comps.iter().map(|c| (c.kind, c.polyline.len())).collect::<Vec<_>>()
        );
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].degree, Some(2));
        assert_eq!(loops[0].degree, Some(2));
        for p in &loops[0].polyline {
            let r = p.0.hypot(p.1);
            assert!((r - 1.0).abs() < 1e-6, "loop point at r = {r}");
        }
        // no-cusp proxy: turning angle between consecutive segments stays tame
        let poly = &loops[0].polyline;
        for w in poly.windows(3) {
            let a = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            let b = (w[2].0 - w[1].0, w[2].1 - w[1].1);
            let cosang = (a.0 * b.0 + a.1 * b.1) / (a.0.hypot(a.1) * b.0.hypot(b.1));
            assert!(cosang > 0.5, "cusp-like turn: cos = {cosang}");
        }
    }

    #[test]
    fn sin2sin2_walls_with_junctions() {
        let f = catalog::field("sin2sin2", &Params::new()).unwrap();
        let comps = find_critical_set(f.as_ref(), 192).unwrap();
        let segs: Vec<_> = comps
            .iter()
            .filter(|c| matches!(c.kind, ComponentKind::Arc | ComponentKind::Loop))
            .collect();
        assert!(!segs.is_empty());
        assert!(
            segs.iter().all(|c| c.degree == Some(2)),
            "wall degrees: {:?}",
            segs.iter().map(|c| c.degree).collect::<Vec<_>>()
        );
        let with_junctions = segs.iter().filter(|c| !c.junctions.is_empty()).count();
        assert!(with_junctions >= 4, "only {with_junctions} segments touch junctions");
        let maxima: Vec<_> = comps
            .iter()
            .filter(|c| c.kind == ComponentKind::IsolatedPoint && c.degree == Some(2))
            .collect();
        assert_eq!(maxima.len(), 4);
    }

    #[test]
    fn innermost_loop_radial_poly() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let analysis = analyze_critical_set(f.as_ref(), 192).unwrap();
        let dec = innermost_loop(&analysis, f.domain()).unwrap();
        assert!(!dec.no_critical_curves);
        let inner = dec.innermost.expect("innermost cell");
        let cell = &dec.cells[inner];
        assert!((cell.area - std::f64::consts::PI).abs() < 0.2, "area {}", cell.area);
        assert_eq!(cell.isolated_inside.len(), 1);
    }

    #[test]
    fn innermost_flag_for_sinsin() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let analysis = analyze_critical_set(f.as_ref(), 128).unwrap();
        let dec = innermost_loop(&analysis, f.domain()).unwrap();
        assert!(dec.no_critical_curves);
        assert_eq!(dec.cells.len(), 1);
    }

    #[test]
    fn innermost_cell_for_sin2sin2_is_a_quadrant() {
        let f = catalog::field("sin2sin2", &Params::new()).unwrap() as FieldRef;
        let analysis = analyze_critical_set(f.as_ref(), 192).unwrap();
        let dec = innermost_loop(&analysis, f.domain()).unwrap();
        assert!(!dec.no_critical_curves);
        let inner = dec.innermost.expect("innermost cell");
        let cell = &dec.cells[inner];
        let quadrant = std::f64::consts::PI * std::f64::consts::PI;
        assert!(
            (cell.area - quadrant).abs() < 0.25 * quadrant,
            "cell area {} vs quadrant {}",
            cell.area,
            quadrant
        );
    }

    #[test]
    fn degree_relation_radial_cubed() {
        let f = catalog::field("radial-poly", &params(&[("p", 3.0)])).unwrap() as FieldRef;
        let comps = find_critical_set(f.as_ref(), 192).unwrap();
        let lp = comps.iter().find(|c| c.kind == ComponentKind::Loop).unwrap();
        assert_eq!(lp.degree, Some(3));
        let rep = degree_relation_check(&f, lp, 16).unwrap();
        assert_eq!(rep.expected, Some(1));
        assert!(rep.pass, "sampled: {:?}", rep.sampled);
    }

    #[test]
    fn degree_relation_degree_two_checks_nonzero_laplacian() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let comps = find_critical_set(f.as_ref(), 192).unwrap();
        let lp = comps.iter().find(|c| c.kind == ComponentKind::Loop).unwrap();
        let rep = degree_relation_check(&f, lp, 16).unwrap();
        assert_eq!(rep.expected, None);
        // Δψ = 8 on r = 1
        assert!(rep.min_abs_laplacian.unwrap() > 7.5);
        assert!(rep.pass);
    }

    #[test]
    fn shear_wall_laplacian_nonzero() {
        let f = catalog::field("shear", &Params::new()).unwrap() as FieldRef;
        let comps = find_critical_set(f.as_ref(), 128).unwrap();
        let walls: Vec<_> = comps
            .iter()
            .filter(|c| matches!(c.kind, ComponentKind::Loop | ComponentKind::Arc))
            .collect();
        assert!(!walls.is_empty());
        for w in walls {
            assert_eq!(w.degree, Some(2));
            let rep = degree_relation_check(&f, w, 12).unwrap();
            assert!(rep.min_abs_laplacian.unwrap() > 0.9);
        }
    }

    #[test]
    fn two_bump_cells_are_radial_about_their_centers() {
        let f = catalog::field("two-bump", &Params::new()).unwrap() as FieldRef;
        let analysis = analyze_critical_set(f.as_ref(), 192).unwrap();
        let dec = innermost_loop(&analysis, f.domain()).unwrap();
        let verdicts = detect_local_radiality(f.as_ref(), &analysis, &dec);
        let mut centers = Vec::new();
        for v in &verdicts {
            if let RadialityVerdict::Radial { center, .. } = v.verdict {
                centers.push(center);
            }
        }
        assert!(centers.len() >= 2, "verdicts: {verdicts:?}");
        let near = |c: (f64, f64), t: (f64, f64)| (c.0 - t.0).hypot(c.1 - t.1) < 0.02;
        assert!(centers.iter().any(|c| near(*c, (-0.9, 0.0))), "{centers:?}");
        assert!(centers.iter().any(|c| near(*c, (0.8, 0.3))), "{centers:?}");
    }

    #[test]
    fn sinsin_cell_is_non_radial() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let analysis = analyze_critical_set(f.as_ref(), 128).unwrap();
        let dec = innermost_loop(&analysis, f.domain()).unwrap();
        let verdicts = detect_local_radiality(f.as_ref(), &analysis, &dec);
        assert!(verdicts
            .iter()
            .any(|v| matches!(v.verdict, RadialityVerdict::NonRadial { .. })));
    }
}
