//! Recovering the vorticity profile F with Δψ = F(ψ).
//!
//! For a steady flow the vorticity is constant along each connected level
//! set of ψ, so sampling Δψ along contour components either produces one
//! consistent value per level (a single-valued profile F) or exposes a
//! branch discrepancy. The profile is represented as a piecewise-cubic
//! interpolant over the sampled levels; fractional-power structure at the
//! range endpoints is fitted on a dyadic window.

use crate::error::{Error, Result};
use crate::field::FieldRef;
use crate::grid::{sample_grid, GridField};
use rayon::prelude::*;
use serde::Serialize;

/// Floor for the branch-discrepancy tolerance.
pub const TOL_BRANCH_FLOOR: f64 = 1e-8;
/// Levels closer than this fraction of the range to a critical value are
/// skipped (contour topology changes there).
pub const CRITICAL_LEVEL_SKIP: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Level schedule
// ---------------------------------------------------------------------------

/// Level placement: uniform through the middle of the range plus dyadic
/// towers clustering toward both endpoints (fractional-power fitting needs
/// scale-free sampling there).
pub fn default_levels(range: (f64, f64)) -> Vec<f64> {
    let (a, b) = range;
    let span = b - a;
    let mut out = Vec::new();
    // uniform middle
    let mid_n = 128;
    for k in 32..=96 {
        out.push(a + span * k as f64 / mid_n as f64);
    }
    // towers at ratio 2^(1/24) from 0.25 span down to the skip floor
    let ratio = (2.0f64).powf(1.0 / 24.0);
    let mut t = 0.25;
    while t >= CRITICAL_LEVEL_SKIP {
        out.push(a + span * t);
        out.push(b - span * t);
        t /= ratio;
    }
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out.dedup_by(|x, y| (*x - *y).abs() < 1e-13 * span);
    out
}

// ---------------------------------------------------------------------------
// Level-set sampling
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct LevelComponent {
    pub id: usize,
    /// Contour length estimate from the marching segments.
    pub length: f64,
    /// Points Newton-projected onto {ψ = s}.
    pub points: Vec<(f64, f64)>,
    /// g sampled at those points (g = Δψ in the steady analysis).
    pub values: Vec<f64>,
    pub mean: f64,
    pub spread: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSetSample {
    pub level: f64,
    pub components: Vec<LevelComponent>,
}

/// Contour components of {ψ = s} with g sampled along each. Levels that
/// fail to contour cleanly are skipped and reported in `skipped`.
pub struct LevelSamples {
    pub samples: Vec<LevelSetSample>,
    pub skipped: Vec<(f64, String)>,
    pub range: (f64, f64),
}

/// Sample g along level sets of psi. `critical_values` are levels to avoid
/// (within [`CRITICAL_LEVEL_SKIP`] of the range). The default g is Δψ.
pub fn collect_pairs(
    psi: &FieldRef,
    g: &FieldRef,
    levels: &[f64],
    resolution: usize,
    critical_values: &[f64],
) -> Result<LevelSamples> {
    let grid = sample_grid(psi.as_ref(), (resolution, resolution))?;
    let mut range = (f64::MAX, f64::MIN);
    for (i, v) in grid.values.iter().enumerate() {
        if grid.mask[i] && v.is_finite() {
            range = (range.0.min(*v), range.1.max(*v));
        }
    }
    let span = range.1 - range.0;
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    let results: Vec<std::result::Result<LevelSetSample, (f64, String)>> = levels
        .par_iter()
        .map(|&level| {
            if level < range.0 || level > range.1 {
                return Err((level, "level outside the sampled range".into()));
            }
            if critical_values
                .iter()
                .any(|cv| (level - cv).abs() < CRITICAL_LEVEL_SKIP * span)
            {
                return Err((level, "level too close to a critical value".into()));
            }
            match contour_level(psi, g, &grid, level) {
                Ok(sample) if !sample.components.is_empty() => Ok(sample),
                Ok(_) => Err((level, "no contour components".into())),
                Err(e) => Err((level, e.to_string())),
            }
        })
        .collect();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(sk) => skipped.push(sk),
        }
    }
    Ok(LevelSamples { samples, skipped, range })
}

/// Marching squares on one level, components via shared segment endpoints.
fn contour_level(
    psi: &FieldRef,
    g: &FieldRef,
    grid: &GridField,
    level: f64,
) -> Result<LevelSetSample> {
    let n = grid.nx;
    let periodic = grid.periodic;
    let cells = if periodic { n } else { n - 1 };
    // a vertex is (cell_x, cell_y, axis): the crossing on the edge leaving
    // the cell corner along x (axis 0) or y (axis 1)
    use std::collections::HashMap;
    let mut segments: Vec<((usize, usize, u8), (usize, usize, u8), (f64, f64), (f64, f64))> =
        Vec::new();
    let corner = |ix: usize, iy: usize| -> Option<f64> {
        let (ix, iy) = if periodic { (ix % n, iy % n) } else { (ix, iy) };
        grid.mask[grid.index(ix, iy)].then(|| grid.values[grid.index(ix, iy)])
    };
    let cross = |va: f64, vb: f64| -> Option<f64> {
        if (va >= level) != (vb >= level) {
            Some((level - va) / (vb - va))
        } else {
            None
        }
    };
    for iy in 0..cells {
        for ix in 0..cells {
            let (x0, y0) = grid.node(ix, iy);
            let v = [
                corner(ix, iy),
                corner(ix + 1, iy),
                corner(ix + 1, iy + 1),
                corner(ix, iy + 1),
            ];
            let [Some(v00), Some(v10), Some(v11), Some(v01)] = v else { continue };
            // edge crossings: bottom (axis 0 at iy), right (axis 1 at ix+1),
            // top (axis 0 at iy+1), left (axis 1 at ix)
            let eb = cross(v00, v10).map(|t| ((ix, iy, 0u8), (x0 + t * grid.dx, y0)));
            let er = cross(v10, v11).map(|t| ((ix + 1, iy, 1u8), (x0 + grid.dx, y0 + t * grid.dy)));
            let et = cross(v01, v11).map(|t| ((ix, iy + 1, 0u8), (x0 + t * grid.dx, y0 + grid.dy)));
            let el = cross(v00, v01).map(|t| ((ix, iy, 1u8), (x0, y0 + t * grid.dy)));
            let mut crossings: Vec<((usize, usize, u8), (f64, f64))> = Vec::new();
            for e in [eb, er, et, el].into_iter().flatten() {
                crossings.push(e);
            }
            match crossings.len() {
                2 => segments.push((
                    crossings[0].0,
                    crossings[1].0,
                    crossings[0].1,
                    crossings[1].1,
                )),
                4 => {
                    // ambiguous saddle cell: split by the center value
                    let center = (v00 + v10 + v11 + v01) / 4.0;
                    // pair bottom-right/top-left or bottom-left/top-right
                    let (b, r, t, l) = (
                        crossings.iter().find(|c| c.0 .2 == 0 && c.0 .1 == iy).copied(),
                        crossings.iter().find(|c| c.0 .2 == 1 && c.0 .0 == ix + 1).copied(),
                        crossings.iter().find(|c| c.0 .2 == 0 && c.0 .1 == iy + 1).copied(),
                        crossings.iter().find(|c| c.0 .2 == 1 && c.0 .0 == ix).copied(),
                    );
                    if let (Some(b), Some(r), Some(t), Some(l)) = (b, r, t, l) {
                        if (center >= level) == (v00 >= level) {
                            segments.push((b.0, l.0, b.1, l.1));
                            segments.push((t.0, r.0, t.1, r.1));
                        } else {
                            segments.push((b.0, r.0, b.1, r.1));
                            segments.push((t.0, l.0, t.1, l.1));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    if segments.is_empty() {
        return Ok(LevelSetSample { level, components: vec![] });
    }
    // union-find on vertex keys
    let mut key_ids: HashMap<(usize, usize, u8), usize> = HashMap::new();
    let mut id_of = |k: (usize, usize, u8), n_keys: &mut usize| -> usize {
        let periodic_key = if periodic { (k.0 % n, k.1 % n, k.2) } else { k };
        *key_ids.entry(periodic_key).or_insert_with(|| {
            *n_keys += 1;
            *n_keys - 1
        })
    };
    let mut n_keys = 0usize;
    let seg_keys: Vec<(usize, usize)> = segments
        .iter()
        .map(|s| (id_of(s.0, &mut n_keys), id_of(s.1, &mut n_keys)))
        .collect();
    let mut parent: Vec<usize> = (0..n_keys).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = i;
        while parent[c] != r {
            let nx = parent[c];
            parent[c] = r;
            c = nx;
        }
        r
    }
    for &(a, b) in &seg_keys {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    // bucket segments per component
    let mut comp_segments: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (si, &(a, _)) in seg_keys.iter().enumerate() {
        comp_segments.entry(find(&mut parent, a)).or_default().push(si);
    }
    let mut components = Vec::new();
    for (_root, segs) in comp_segments {
        if segs.len() < 4 {
            continue; // sub-resolution fragment
        }
        let mut length = 0.0;
        for &si in &segs {
            let (_, _, p, q) = segments[si];
            length += (p.0 - q.0).hypot(p.1 - q.1);
        }
        // sample midpoints, Newton-project onto the exact level set
        let take = 48.min(segs.len());
        let stride = segs.len() / take;
        let mut points = Vec::with_capacity(take);
        let mut values = Vec::with_capacity(take);
        for k in 0..take {
            let (_, _, p, q) = segments[segs[k * stride]];
            let mut x = ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
            let mut ok = false;
            for _ in 0..8 {
                let j = psi.jet(x.0, x.1, 1);
                let err = j.value() - level;
                let gx = j.partial(1, 0);
                let gy = j.partial(0, 1);
                let g2 = gx * gx + gy * gy;
                if g2 < 1e-28 || !err.is_finite() {
                    break;
                }
                x = (x.0 - err * gx / g2, x.1 - err * gy / g2);
                if err.abs() < 1e-13 * (1.0 + level.abs()) {
                    ok = true;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let jg = g.jet(x.0, x.1, 0);
            if !jg.value().is_finite() {
                continue;
            }
            points.push(x);
            values.push(jg.value());
        }
        if values.len() < 4 {
            continue;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let spread = values.iter().fold(0.0f64, |a, v| a.max(*v - mean))
            + values.iter().fold(0.0f64, |a, v| a.max(mean - *v));
        components.push(LevelComponent { id: 0, length, points, values, mean, spread });
    }
    // deterministic ids: longest first, then by first point
    components.sort_by(|a, b| {
        (-a.length, a.points[0].1, a.points[0].0)
            .partial_cmp(&(-b.length, b.points[0].1, b.points[0].0))
            .unwrap()
    });
    for (i, c) in components.iter_mut().enumerate() {
        c.id = i;
    }
    Ok(LevelSetSample { level, components })
}

// ---------------------------------------------------------------------------
// Flux extraction
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FluxVerdict {
    SingleValued,
    BranchDiscrepancy,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchRow {
    pub level: f64,
    /// Per-component mean of g, in component-id order.
    pub branch_means: Vec<f64>,
    pub across_spread: f64,
    pub max_within_spread: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxRelation {
    pub range: (f64, f64),
    pub verdict: FluxVerdict,
    pub tol_branch: f64,
    pub branch_table: Vec<BranchRow>,
    pub max_across_spread: f64,
    pub max_within_spread: f64,
    /// Sorted (level, F) nodes of the interpolant (single-valued only).
    pub nodes: Vec<(f64, f64)>,
}

/// Decide single-valuedness and build the interpolant. `tol_branch` should
/// come from [`branch_tolerance`].
pub fn extract_flux(samples: &LevelSamples, tol_branch: f64) -> Result<FluxRelation> {
    let usable: Vec<&LevelSetSample> =
        samples.samples.iter().filter(|s| !s.components.is_empty()).collect();
    if usable.len() < 16 {
        return Err(Error::TooFew { what: "usable levels", need: 16, got: usable.len() });
    }
    let mut branch_table = Vec::new();
    let mut max_across: f64 = 0.0;
    let mut max_within: f64 = 0.0;
    for s in &usable {
        let means: Vec<f64> = s.components.iter().map(|c| c.mean).collect();
        let hi = means.iter().cloned().fold(f64::MIN, f64::max);
        let lo = means.iter().cloned().fold(f64::MAX, f64::min);
        let across = hi - lo;
        let within = s.components.iter().map(|c| c.spread).fold(0.0, f64::max);
        max_across = max_across.max(across);
        max_within = max_within.max(within);
        branch_table.push(BranchRow {
            level: s.level,
            branch_means: means,
            across_spread: across,
            max_within_spread: within,
        });
    }
    branch_table.sort_by(|a, b| a.level.partial_cmp(&b.level).unwrap());
    let single = max_across <= tol_branch && max_within <= tol_branch;
    let mut nodes = Vec::new();
    if single {
        for row in &branch_table {
            let mean =
                row.branch_means.iter().sum::<f64>() / row.branch_means.len() as f64;
            nodes.push((row.level, mean));
        }
    }
    Ok(FluxRelation {
        range: samples.range,
        verdict: if single { FluxVerdict::SingleValued } else { FluxVerdict::BranchDiscrepancy },
        tol_branch,
        branch_table,
        max_across_spread: max_across,
        max_within_spread: max_within,
        nodes,
    })
}

/// tol_branch = 10x the steadiness residual, floored.
pub fn branch_tolerance(steady_sup_residual: f64) -> f64 {
    (10.0 * steady_sup_residual).max(TOL_BRANCH_FLOOR)
}

impl FluxRelation {
    /// Covered level interval (inside which the interpolant is trustworthy).
    pub fn covered(&self) -> Option<(f64, f64)> {
        match (self.nodes.first(), self.nodes.last()) {
            (Some(a), Some(b)) => Some((a.0, b.0)),
            _ => None,
        }
    }

    /// Piecewise-cubic (4-point Lagrange) evaluation of F at s, clamped to
    /// the covered interval.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if self.verdict != FluxVerdict::SingleValued || self.nodes.len() < 4 {
            return Err(Error::NotSingleValued);
        }
        let n = self.nodes.len();
        let s = s.clamp(self.nodes[0].0, self.nodes[n - 1].0);
        // locate the interval by binary search
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.nodes[mid].0 <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let start = lo.saturating_sub(1).min(n - 4);
        let pts = &self.nodes[start..start + 4];
        // Lagrange through 4 points
        let mut acc = 0.0;
        for i in 0..4 {
            let mut w = pts[i].1;
            for j in 0..4 {
                if i != j {
                    w *= (s - pts[j].0) / (pts[i].0 - pts[j].0);
                }
            }
            acc += w;
        }
        Ok(acc)
    }

    /// Numerical derivative of the interpolant (central difference).
    pub fn eval_derivative(&self, s: f64) -> Result<f64> {
        let span = self.range.1 - self.range.0;
        let h = 1e-6 * span;
        Ok((self.eval(s + h)? - self.eval(s - h)?) / (2.0 * h))
    }

    /// Per-branch (level, mean) series, for branch-resolved endpoint fits.
    pub fn branch_series(&self, branch: usize) -> Vec<(f64, f64)> {
        self.branch_table
            .iter()
            .filter_map(|row| row.branch_means.get(branch).map(|m| (row.level, *m)))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Puiseux endpoint fits
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EndpointSide {
    Min,
    Max,
}

#[derive(Clone, Debug, Serialize)]
pub struct PuiseuxSeries {
    pub side: EndpointSide,
    pub endpoint: f64,
    /// Ramification index: exponents live on the lattice k/k0.
    pub k0: usize,
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Relative residual of the lattice fit on the window.
    pub residual: f64,
    /// Sign flag: leading fractional coefficient is negative.
    pub leading_negative: bool,
    /// Log-log estimate of the leading fractional exponent.
    pub holder_exponent: Option<f64>,
    /// True when the fit degenerates to integer exponents.
    pub analytic: bool,
    pub window_samples: usize,
}

/// Fit the endpoint expansion of a single-valued flux relation.
pub fn fit_puiseux(flux: &FluxRelation, side: EndpointSide, k0_max: usize) -> Result<PuiseuxSeries> {
    if flux.verdict != FluxVerdict::SingleValued {
        return Err(Error::NotSingleValued);
    }
    fit_puiseux_series(&flux.nodes, flux.range, side, k0_max)
}

/// Same fit on an explicit (level, value) series (used for branch-resolved
/// fits when the relation is not single-valued).
pub fn fit_puiseux_series(
    series: &[(f64, f64)],
    range: (f64, f64),
    side: EndpointSide,
    k0_max: usize,
) -> Result<PuiseuxSeries> {
    let span = range.1 - range.0;
    let endpoint = match side {
        EndpointSide::Min => range.0,
        EndpointSide::Max => range.1,
    };
    // window: outer 10% of the range
    let window: Vec<(f64, f64)> = series
        .iter()
        .filter(|(s, _)| (s - endpoint).abs() <= 0.10 * span)
        .map(|(s, v)| ((s - endpoint).abs() / span, *v))
        .collect();
    if window.len() < 12 {
        return Err(Error::TooFew { what: "levels in the endpoint window", need: 12, got: window.len() });
    }
    let scale = window.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max).max(1e-300);
    // candidate lattices: exponents (k0-1)/k0 .. for the max side, k/2 for
    // the min side (boundary-normal square root)
    let mut best: Option<PuiseuxSeries> = None;
    let candidates: Vec<usize> = match side {
        EndpointSide::Max => (1..=k0_max.max(1)).collect(),
        EndpointSide::Min => vec![2],
    };
    for k0 in candidates {
        let exponents: Vec<f64> = match side {
            EndpointSide::Max => {
                let mut e = vec![0.0];
                for k in (k0.saturating_sub(1)).max(1)..(k0 + 5) {
                    e.push(k as f64 / k0 as f64);
                }
                e.dedup();
                e
            }
            EndpointSide::Min => (0..=6).map(|k| k as f64 / 2.0).collect(),
        };
        let Some((norm_coeffs, residual)) = lattice_fit(&window, &exponents, scale) else {
            continue;
        };
        // window distances were span-normalized; report coefficients in raw
        // units of (s - endpoint), but judge significance on the normalized
        // ones (they measure contribution at window scale)
        let coeffs: Vec<f64> = norm_coeffs
            .iter()
            .zip(&exponents)
            .map(|(c, e)| c / span.powf(*e))
            .collect();
        let candidate = build_series(
            side, endpoint, k0, exponents, coeffs, &norm_coeffs, residual, scale, &window,
        );
        match &best {
            None => best = Some(candidate),
            Some(b) => {
                // parsimony: a smaller k0 wins unless the larger one is
                // decisively better
                if candidate.residual < 0.2 * b.residual && candidate.residual < 1e-3 {
                    best = Some(candidate);
                }
            }
        }
    }
    let best = best.ok_or(Error::NoPuiseuxStructure)?;
    if best.residual > 0.05 {
        return Err(Error::NoPuiseuxStructure);
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn build_series(
    side: EndpointSide,
    endpoint: f64,
    k0: usize,
    exponents: Vec<f64>,
    coefficients: Vec<f64>,
    norm_coefficients: &[f64],
    residual: f64,
    scale: f64,
    window: &[(f64, f64)],
) -> PuiseuxSeries {
    // leading fractional term and its sign
    let mut leading_negative = false;
    let mut analytic = true;
    for (e, c) in exponents.iter().zip(norm_coefficients) {
        if e.fract() != 0.0 && c.abs() > 1e-4 * scale {
            analytic = false;
            leading_negative = *c < 0.0;
            break;
        }
        if e.fract() == 0.0 && *e > 0.0 && c.abs() > 1e-4 * scale {
            // integer term leads: keep scanning for the first fractional one
            continue;
        }
    }
    // log-log estimate of the leading exponent after removing the constant
    let c0 = norm_coefficients
        .iter()
        .zip(&exponents)
        .find(|(_, e)| **e == 0.0)
        .map(|(c, _)| *c)
        .unwrap_or(0.0);
    let noise = (residual * scale).max(1e-13 * scale);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (d, v) in window {
        let r = (v - c0).abs();
        if r > 30.0 * noise && *d > 0.0 {
            xs.push(d.ln());
            ys.push(r.ln());
        }
    }
    let holder = if xs.len() >= 6 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            num += (x - mx) * (y - my);
            den += (x - mx) * (x - mx);
        }
        Some(num / den)
    } else {
        None
    };
    PuiseuxSeries {
        side,
        endpoint,
        k0,
        exponents,
        coefficients,
        residual,
        leading_negative,
        holder_exponent: holder,
        analytic,
        window_samples: window.len(),
    }
}

/// Least squares on the exponent lattice; returns (coefficients, relative
/// residual). Distances are pre-normalized by the range span.
fn lattice_fit(window: &[(f64, f64)], exponents: &[f64], scale: f64) -> Option<(Vec<f64>, f64)> {
    let m = exponents.len();
    let n = window.len();
    if n < m + 2 {
        return None;
    }
    // column scaling for conditioning
    let mut col_scale = vec![0.0f64; m];
    for (k, e) in exponents.iter().enumerate() {
        for (d, _) in window {
            col_scale[k] = col_scale[k].max(d.powf(*e).abs());
        }
        if col_scale[k] == 0.0 {
            col_scale[k] = 1.0;
        }
    }
    let mut ata = vec![vec![0.0f64; m]; m];
    let mut atb = vec![0.0f64; m];
    for (d, v) in window {
        let row: Vec<f64> = exponents
            .iter()
            .enumerate()
            .map(|(k, e)| d.powf(*e) / col_scale[k])
            .collect();
        for i in 0..m {
            atb[i] += row[i] * v;
            for j in 0..m {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let sol = solve_dense(&mut ata, &mut atb)?;
    let coeffs: Vec<f64> = sol.iter().zip(&col_scale).map(|(c, s)| c / s).collect();
    let mut res: f64 = 0.0;
    for (d, v) in window {
        let fit: f64 = coeffs.iter().zip(exponents).map(|(c, e)| c * d.powf(*e)).sum();
        res = res.max((fit - v).abs());
    }
    Some((coeffs, res / scale))
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in (col + 1)..n {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Closing consistency check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct FluxResidualReport {
    pub sup: f64,
    pub nodes_checked: usize,
    /// Fraction of interior nodes whose ψ value lay inside the covered
    /// level interval.
    pub coverage: f64,
}

/// sup over interior nodes of |Δψ - F(ψ)| where ψ lands inside the covered
/// level range.
pub fn verify_flux_residual(
    psi: &FieldRef,
    flux: &FluxRelation,
    resolution: usize,
) -> Result<FluxResidualReport> {
    if flux.verdict != FluxVerdict::SingleValued {
        return Err(Error::NotSingleValued);
    }
    // trim the outermost two intervals: their one-sided stencils carry
    // extrapolation-grade error, everything inside is centered
    if flux.nodes.len() < 8 {
        return Err(Error::NotSingleValued);
    }
    let lo = flux.nodes[2].0;
    let hi = flux.nodes[flux.nodes.len() - 3].0;
    let domain = psi.domain();
    let (x0, y0, x1, y1) = domain.bounding_box();
    let n = resolution;
    let periodic = domain.is_periodic().is_some();
    let (dx, dy) = if periodic {
        ((x1 - x0) / n as f64, (y1 - y0) / n as f64)
    } else {
        ((x1 - x0) / (n - 1) as f64, (y1 - y0) / (n - 1) as f64)
    };
    let margin = 2.0 * dx.max(dy);
    let rows: Vec<(f64, usize, usize)> = (0..n)
        .into_par_iter()
        .map(|iy| {
            let y = y0 + iy as f64 * dy;
            let mut sup: f64 = 0.0;
            let mut checked = 0usize;
            let mut interior = 0usize;
            for ix in 0..n {
                let x = x0 + ix as f64 * dx;
                if !domain.contains(x, y) {
                    continue;
                }
                if let Some(d) = domain.boundary_distance(x, y) {
                    if d < margin {
                        continue;
                    }
                }
                interior += 1;
                let j = psi.jet(x, y, 2);
                let s = j.value();
                if !(lo..=hi).contains(&s) {
                    continue;
                }
                let lap = j.partial(2, 0) + j.partial(0, 2);
                if let Ok(fv) = flux.eval(s) {
                    sup = sup.max((lap - fv).abs());
                    checked += 1;
                }
            }
            (sup, checked, interior)
        })
        .collect();
    let mut sup: f64 = 0.0;
    let mut checked = 0;
    let mut interior = 0;
    for (s, c, i) in rows {
        sup = sup.max(s);
        checked += c;
        interior += i;
    }
    Ok(FluxResidualReport {
        sup,
        nodes_checked: checked,
        coverage: checked as f64 / interior.max(1) as f64,
    })
}

/// Convenience: full single-field flux analysis (levels, tolerance from the
/// steadiness residual, extraction).
pub fn analyze_flux(
    psi: &FieldRef,
    resolution: usize,
    critical_values: &[f64],
    steady_sup: f64,
) -> Result<(LevelSamples, FluxRelation)> {
    let lap = crate::calculus::laplacian(psi);
    let grid = sample_grid(psi.as_ref(), (resolution.min(128), resolution.min(128)))?;
    let mut range = (f64::MAX, f64::MIN);
    for (i, v) in grid.values.iter().enumerate() {
        if grid.mask[i] && v.is_finite() {
            range = (range.0.min(*v), range.1.max(*v));
        }
    }
    let levels = default_levels(range);
    let samples = collect_pairs(psi, &lap, &levels, resolution, critical_values)?;
    let flux = extract_flux(&samples, branch_tolerance(steady_sup))?;
    Ok((samples, flux))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{laplacian, steady_residual};
    use crate::catalog::{self, FluxForm, Params, J01};

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn radial_poly_flux(resolution: usize) -> FluxRelation {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let sup = steady_residual(&f, 128).sup_residual;
        let (_s, flux) = analyze_flux(&f, resolution, &[0.0, 1.0], sup).unwrap();
        flux
    }

    #[test]
    fn sinsin_level_half_two_components_same_vorticity() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let lap = laplacian(&f);
        let samples = collect_pairs(&f, &lap, &[0.5], 192, &[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(samples.samples.len(), 1);
        let s = &samples.samples[0];
        assert_eq!(s.components.len(), 2, "components: {}", s.components.len());
        for c in &s.components {
            assert!((c.mean + 1.0).abs() < 1e-10, "Δψ on level 0.5: {}", c.mean);
            assert!(c.spread < 1e-10);
        }
    }

    #[test]
    fn example_pair_bump_shows_branch_values() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let g = catalog::field("bump-of-f", &Params::new()).unwrap() as FieldRef;
        let samples = collect_pairs(&f, &g, &[0.5], 192, &[-1.0, 0.0, 1.0]).unwrap();
        let s = &samples.samples[0];
        assert_eq!(s.components.len(), 2);
        let mut means: Vec<f64> = s.components.iter().map(|c| c.mean).collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(means[0].abs() < 1e-12, "quadrant-3 value {}", means[0]);
        let expected = (1.0_f64 - 1.0 / (1.0 - (0.5_f64 - 1.0).powi(2) / 0.64)).exp();
        assert!((means[1] - expected).abs() < 1e-10, "quadrant-1 value {}", means[1]);
    }

    #[test]
    fn radial_poly_single_valued_with_correct_profile() {
        let flux = radial_poly_flux(256);
        assert_eq!(flux.verdict, FluxVerdict::SingleValued);
        let truth = FluxForm::RadialPoly { p: 2 };
        let mut max_err: f64 = 0.0;
        let mut s = 0.01;
        while s < 0.99 {
            let err = (flux.eval(s).unwrap() - truth.eval(s)).abs();
            max_err = max_err.max(err);
            s += 0.001;
        }
        assert!(max_err <= 1e-5, "sup error {max_err}");
    }

    #[test]
    fn disk_eigen_linear_profile() {
        let f = catalog::field("disk-eigen", &Params::new()).unwrap() as FieldRef;
        let sup = steady_residual(&f, 128).sup_residual;
        let (_s, flux) = analyze_flux(&f, 256, &[1.0, 0.0], sup).unwrap();
        assert_eq!(flux.verdict, FluxVerdict::SingleValued);
        // slope against -j01^2 s
        for &s in &[0.1, 0.3, 0.7, 0.9] {
            let err = (flux.eval(s).unwrap() + J01 * J01 * s).abs();
            assert!(err < 1e-6, "F({s}) error {err}");
        }
        let rep = verify_flux_residual(&f, &flux, 256).unwrap();
        assert!(rep.sup <= 1e-8, "flux residual {}", rep.sup);
    }

    #[test]
    fn flux_residual_discriminates_perturbed_field() {
        let flux = radial_poly_flux(256);
        let g = catalog::field("perturbed", &Params::new()).unwrap() as FieldRef;
        let rep = verify_flux_residual(&g, &flux, 128).unwrap();
        assert!(rep.sup > 1e-2, "perturbed residual {}", rep.sup);
    }

    #[test]
    fn verify_residual_radial_poly() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let flux = radial_poly_flux(256);
        let rep = verify_flux_residual(&f, &flux, 256).unwrap();
        assert!(rep.sup <= 1e-6, "residual {}", rep.sup);
        assert!(rep.coverage > 0.95, "coverage {}", rep.coverage);
    }

    #[test]
    fn puiseux_max_side_radial_quartic() {
        let f = catalog::field("radial-quartic", &Params::new()).unwrap() as FieldRef;
        let sup = steady_residual(&f, 128).sup_residual;
        let (_s, flux) = analyze_flux(&f, 256, &[1.0, 0.0], sup).unwrap();
        assert_eq!(flux.verdict, FluxVerdict::SingleValued);
        let fit = fit_puiseux(&flux, EndpointSide::Max, 4).unwrap();
        assert_eq!(fit.k0, 2, "fit: {fit:?}");
        // leading term a1 (1-s)^(1/2) with a1 = -16
        let a1 = fit
            .exponents
            .iter()
            .zip(&fit.coefficients)
            .find(|(e, _)| (**e - 0.5).abs() < 1e-9)
            .map(|(_, c)| *c)
            .unwrap();
        assert!((-16.5..=-15.5).contains(&a1), "a1 = {a1}");
        assert!(fit.leading_negative);
        assert!(!fit.analytic);
    }

    #[test]
    fn puiseux_min_side_radial_poly() {
        let flux = radial_poly_flux(256);
        let fit = fit_puiseux(&flux, EndpointSide::Min, 4).unwrap();
        // F = 8 - 16 sqrt(s): constant 8, sqrt coefficient -16
        let a0 = fit
            .exponents
            .iter()
            .zip(&fit.coefficients)
            .find(|(e, _)| **e == 0.0)
            .map(|(_, c)| *c)
            .unwrap();
        let ahalf = fit
            .exponents
            .iter()
            .zip(&fit.coefficients)
            .find(|(e, _)| (**e - 0.5).abs() < 1e-9)
            .map(|(_, c)| *c)
            .unwrap();
        assert!((7.9..=8.1).contains(&a0), "a0 = {a0}");
        assert!((ahalf + 16.0).abs() < 0.5, "a_1/2 = {ahalf}");
        let h = fit.holder_exponent.unwrap();
        assert!((h - 0.5).abs() < 0.05, "holder exponent {h}");
    }

    #[test]
    fn puiseux_linear_profile_is_analytic() {
        let f = catalog::field("disk-eigen", &Params::new()).unwrap() as FieldRef;
        let sup = steady_residual(&f, 128).sup_residual;
        let (_s, flux) = analyze_flux(&f, 256, &[1.0, 0.0], sup).unwrap();
        let fit = fit_puiseux(&flux, EndpointSide::Min, 4).unwrap();
        assert!(fit.analytic, "fit: {fit:?}");
    }

    #[test]
    fn shift_scale_equivariance() {
        use crate::field::AffineField;
        use std::sync::Arc;
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let alpha = 2.0;
        let beta = 1.0;
        let g = Arc::new(AffineField { base: f, alpha, beta }) as FieldRef;
        let sup = steady_residual(&g, 128).sup_residual;
        let (_s, flux) = analyze_flux(&g, 256, &[beta, alpha + beta], sup).unwrap();
        assert_eq!(flux.verdict, FluxVerdict::SingleValued);
        // Δ(αψ+β) = α F((s-β)/α) against the p=2 profile
        let truth = FluxForm::RadialPoly { p: 2 };
        for &s in &[1.2, 1.8, 2.4, 2.9] {
            let expected = alpha * truth.eval((s - beta) / alpha);
            let got = flux.eval(s).unwrap();
            assert!((got - expected).abs() < 1e-5, "F({s}) = {got} vs {expected}");
        }
    }

    #[test]
    fn branch_verdict_stable_under_refinement() {
        for res in [128usize, 256] {
            let flux = {
                let f =
                    catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
                let sup = steady_residual(&f, 128).sup_residual;
                analyze_flux(&f, res, &[0.0, 1.0], sup).unwrap().1
            };
            assert_eq!(flux.verdict, FluxVerdict::SingleValued, "res {res}");
        }
    }

    #[test]
    fn too_few_levels_rejected() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let lap = laplacian(&f);
        let samples = collect_pairs(&f, &lap, &[0.3, 0.5, 0.7], 128, &[]).unwrap();
        assert!(matches!(
            extract_flux(&samples, 1e-8),
            Err(Error::TooFew { .. })
        ));
    }

    #[test]
    fn two_bump_is_branch_discrepant() {
        let f = catalog::field("two-bump", &Params::new()).unwrap() as FieldRef;
        let sup = steady_residual(&f, 128).sup_residual;
        let (_s, flux) = analyze_flux(&f, 256, &[0.0, 1.0, 0.7], sup).unwrap();
        assert_eq!(flux.verdict, FluxVerdict::BranchDiscrepancy);
    }
}
