//! Moving-plane symmetry detection.
//!
//! For each direction the region is swept by a reflection hyperplane. While
//! the reflected cap stays inside the region and ψ dominates its reflection
//! there, the sweep advances; λ₀ is the supremum of such levels, located by
//! bisection and classified as an internal or boundary tangency (or a plain
//! monotonicity break). The per-direction symmetry verdict is the midline
//! reflection test; a radial verdict additionally requires the symmetry
//! axes of all directions to meet in one point.

use crate::domain::{Domain, RegionBoundary};
use crate::error::{Error, Result};
use crate::field::FieldRef;
use rayon::prelude::*;
use serde::Serialize;

/// Monotonicity slack relative to sup |ψ|.
pub const TOL_MP_REL: f64 = 1e-9;
/// Difference-quotient floor for the coefficient audit.
pub const EPS_DIV: f64 = 1e-10;
/// Angular tolerance for calling a boundary tangency.
pub const TOL_ANGLE: f64 = 1e-3;
/// Axis concurrency tolerance for the radial verdict.
pub const TOL_CENTER: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Sweep region
// ---------------------------------------------------------------------------

/// The region being swept: inside predicate plus its boundary curves.
#[derive(Clone)]
pub struct SweepRegion {
    pub curves: Vec<RegionBoundary>,
    inside: InsideKind,
}

#[derive(Clone)]
enum InsideKind {
    ByDomain(Domain),
    ByPolygon(Vec<(f64, f64)>),
}

impl SweepRegion {
    pub fn from_domain(domain: &Domain) -> Result<SweepRegion> {
        if domain.is_periodic().is_some() {
            return Err(Error::RegionUnbounded);
        }
        let curves = match domain {
            Domain::Disk { cx, cy, r } => {
                vec![RegionBoundary::Circle { cx: *cx, cy: *cy, r: *r }]
            }
            Domain::Annulus { cx, cy, r_in, r_out } => vec![
                RegionBoundary::Circle { cx: *cx, cy: *cy, r: *r_out },
                RegionBoundary::Circle { cx: *cx, cy: *cy, r: *r_in },
            ],
            Domain::JordanTube { chart, half_width } => vec![
                RegionBoundary::ChartOffset { chart: chart.clone(), offset: *half_width },
                RegionBoundary::ChartOffset { chart: chart.clone(), offset: -*half_width },
            ],
            Domain::PeriodicRect { .. } => unreachable!(),
        };
        Ok(SweepRegion { curves, inside: InsideKind::ByDomain(domain.clone()) })
    }

    pub fn from_polyline(polyline: Vec<(f64, f64)>) -> SweepRegion {
        SweepRegion {
            curves: vec![RegionBoundary::Polyline(polyline.clone())],
            inside: InsideKind::ByPolygon(polyline),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match &self.inside {
            InsideKind::ByDomain(d) => d.contains(x, y),
            InsideKind::ByPolygon(p) => crate::critical::point_in_polygon((x, y), p),
        }
    }

    /// Signed distance to the region boundary, positive inside.
    pub fn inside_signed(&self, x: f64, y: f64) -> f64 {
        let dist = self
            .curves
            .iter()
            .map(|c| c.distance(x, y))
            .fold(f64::MAX, f64::min);
        if dist == f64::MAX {
            return -f64::MAX;
        }
        if self.contains(x, y) {
            dist
        } else {
            -dist
        }
    }

    fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match &self.inside {
            InsideKind::ByDomain(d) => d.bounding_box(),
            InsideKind::ByPolygon(p) => {
                let mut bb = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
                for (x, y) in p {
                    bb = (bb.0.min(*x), bb.1.min(*y), bb.2.max(*x), bb.3.max(*y));
                }
                bb
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Reflection states
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ReflectionState {
    pub lambda: f64,
    pub admissible: bool,
    /// min over the reflected cap of h = ψ - ψ∘π_λ.
    pub min_h: f64,
    pub argmin: (f64, f64),
    pub cap_samples: usize,
    /// Worst penetration of the reflected boundary arc (negative = outside).
    pub clearance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TangencyKind {
    Internal,
    Boundary,
}

#[derive(Clone, Debug, Serialize)]
pub struct TangencyEvent {
    pub kind: TangencyKind,
    pub contact: (f64, f64),
    pub lambda0: f64,
    /// h vanished identically at λ₀ (exact symmetry about H_λ₀).
    pub h_identically_zero: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// Sweep reached the geometric midline intact.
    Midline,
    /// Reflected cap left the region.
    Inadmissible,
    /// min h dipped below the slack.
    MonotonicityBreak,
    /// Monotonicity already fails at the smallest level.
    FailsAtStart,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionReport {
    pub direction: (f64, f64),
    pub lambda0: f64,
    /// Midline level of this direction (candidate symmetry axis).
    pub lambda_mid: f64,
    pub stop: StopReason,
    pub event: Option<TangencyEvent>,
    pub symmetric: bool,
    /// sup |h| at the midline reflection; None when the midline cap leaves
    /// the region.
    pub midline_defect: Option<f64>,
    pub min_h_profile: Vec<(f64, f64)>,
}

// ---------------------------------------------------------------------------
// Sampling machinery
// ---------------------------------------------------------------------------

struct SweepFrame<'a> {
    psi: &'a FieldRef,
    region: &'a SweepRegion,
    dir: (f64, f64),
    /// Interior sample points with cached ψ values and u-coordinates.
    nodes: Vec<(f64, f64, f64, f64)>, // (x, y, u, psi)
    boundary_pts: Vec<(f64, f64, f64)>, // (x, y, u) on all boundary curves
    u_min: f64,
    u_max: f64,
    tol_mp: f64,
    tol_clip: f64,
}

impl<'a> SweepFrame<'a> {
    fn u(&self, x: f64, y: f64) -> f64 {
        self.dir.0 * x + self.dir.1 * y
    }

    fn reflect(&self, lambda: f64, x: f64, y: f64) -> (f64, f64) {
        let u = self.u(x, y);
        let shift = 2.0 * (lambda - u);
        (x + shift * self.dir.0, y + shift * self.dir.1)
    }

    /// Evaluate the reflection state at a level.
    fn state(&self, lambda: f64) -> ReflectionState {
        // admissibility: reflected boundary arc must stay inside
        let mut clearance = f64::MAX;
        for &(bx, by, bu) in &self.boundary_pts {
            if bu < lambda {
                let (rx, ry) = self.reflect(lambda, bx, by);
                clearance = clearance.min(self.region.inside_signed(rx, ry));
            }
        }
        if clearance == f64::MAX {
            clearance = 0.0; // empty arc: nothing reflected yet
        }
        let admissible = clearance >= -self.tol_clip;
        let mut min_h = f64::MAX;
        let mut argmin = (f64::NAN, f64::NAN);
        let mut count = 0usize;
        if admissible {
            for &(x, y, u, psi_x) in &self.nodes {
                if u <= lambda {
                    continue;
                }
                let (rx, ry) = self.reflect(lambda, x, y);
                if !self.region.contains(rx, ry) {
                    continue;
                }
                let psi_r = self.psi.eval(rx, ry);
                if !psi_r.is_finite() {
                    continue;
                }
                let h = psi_x - psi_r;
                count += 1;
                if h < min_h {
                    min_h = h;
                    argmin = (x, y);
                }
            }
        }
        if count == 0 {
            min_h = 0.0;
        }
        ReflectionState {
            lambda,
            admissible,
            min_h,
            argmin,
            cap_samples: count,
            clearance,
        }
    }

    fn good(&self, s: &ReflectionState) -> bool {
        s.admissible && s.min_h >= -self.tol_mp
    }

    /// sup |h| over the cap at a level (for h ≡ 0 verdicts).
    fn sup_h(&self, lambda: f64) -> Option<f64> {
        let s = self.state(lambda);
        if !s.admissible {
            return None;
        }
        let mut sup: f64 = 0.0;
        for &(x, y, u, psi_x) in &self.nodes {
            if u <= lambda {
                continue;
            }
            let (rx, ry) = self.reflect(lambda, x, y);
            if !self.region.contains(rx, ry) {
                continue;
            }
            let psi_r = self.psi.eval(rx, ry);
            if psi_r.is_finite() {
                sup = sup.max((psi_x - psi_r).abs());
            }
        }
        Some(sup)
    }
}

fn build_frame<'a>(
    psi: &'a FieldRef,
    region: &'a SweepRegion,
    dir: (f64, f64),
    resolution: usize,
    boundary_samples: usize,
) -> Result<SweepFrame<'a>> {
    let (x0, y0, x1, y1) = region.bounding_box();
    if !(x1 - x0).is_finite() || !(y1 - y0).is_finite() {
        return Err(Error::RegionUnbounded);
    }
    let mut nodes = Vec::new();
    for iy in 0..resolution {
        for ix in 0..resolution {
            let x = x0 + (x1 - x0) * (ix as f64 + 0.5) / resolution as f64;
            let y = y0 + (y1 - y0) * (iy as f64 + 0.5) / resolution as f64;
            if !region.contains(x, y) {
                continue;
            }
            let v = psi.eval(x, y);
            if v.is_finite() {
                nodes.push((x, y, dir.0 * x + dir.1 * y, v));
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut boundary_pts = Vec::new();
    let mut u_min = f64::MAX;
    let mut u_max = f64::MIN;
    for curve in &region.curves {
        for p in curve.samples(boundary_samples).points {
            let u = dir.0 * p.0 + dir.1 * p.1;
            u_min = u_min.min(u);
            u_max = u_max.max(u);
            boundary_pts.push((p.0, p.1, u));
        }
    }
    let sup_psi = nodes.iter().map(|n| n.3.abs()).fold(0.0, f64::max);
    let diam = (x1 - x0).max(y1 - y0);
    Ok(SweepFrame {
        psi,
        region,
        dir,
        nodes,
        boundary_pts,
        u_min,
        u_max,
        tol_mp: TOL_MP_REL * sup_psi.max(1e-12),
        tol_clip: 1e-9 * diam,
    })
}

// ---------------------------------------------------------------------------
// Sweep and λ₀
// ---------------------------------------------------------------------------

/// Reflection states over a λ grid up to the midline.
pub fn reflect_sweep(
    psi: &FieldRef,
    region: &SweepRegion,
    dir: (f64, f64),
    lambda_count: usize,
) -> Result<Vec<ReflectionState>> {
    let frame = build_frame(psi, region, dir, 96, 256)?;
    let mid = 0.5 * (frame.u_min + frame.u_max);
    let states: Vec<ReflectionState> = (1..=lambda_count)
        .map(|k| {
            let lambda =
                frame.u_min + (mid - frame.u_min) * k as f64 / lambda_count as f64;
            frame.state(lambda)
        })
        .collect();
    Ok(states)
}

/// Sweep one direction: grid scan, bisection refinement of λ₀, tangency
/// classification, midline symmetry verdict.
pub fn sweep_direction(
    psi: &FieldRef,
    region: &SweepRegion,
    dir: (f64, f64),
    lambda_count: usize,
) -> Result<DirectionReport> {
    let frame = build_frame(psi, region, dir, 96, 256)?;
    let mid = 0.5 * (frame.u_min + frame.u_max);
    let span = mid - frame.u_min;
    let mut profile = Vec::with_capacity(lambda_count);
    let mut last_good: Option<f64> = None;
    let mut first_bad: Option<f64> = None;
    for k in 1..=lambda_count {
        let lambda = frame.u_min + span * k as f64 / lambda_count as f64;
        let s = frame.state(lambda);
        profile.push((lambda, if s.admissible { s.min_h } else { f64::NAN }));
        if frame.good(&s) {
            last_good = Some(lambda);
        } else {
            first_bad = Some(lambda);
            break;
        }
    }
    // classify the stop
    let (lambda0, stop) = match (last_good, first_bad) {
        (Some(_), None) => (mid, StopReason::Midline),
        (Some(lo), Some(hi)) => {
            // bisection to 1e-8 of the span
            let mut lo = lo;
            let mut hi = hi;
            while hi - lo > 1e-8 * span.max(1e-8) {
                let m = 0.5 * (lo + hi);
                if frame.good(&frame.state(m)) {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            let s_bad = frame.state(hi);
            let reason = if s_bad.admissible {
                StopReason::MonotonicityBreak
            } else {
                StopReason::Inadmissible
            };
            (lo, reason)
        }
        (None, _) => (frame.u_min, StopReason::FailsAtStart),
    };
    // tangency classification at λ₀
    let event = if matches!(stop, StopReason::Midline | StopReason::Inadmissible) {
        let (contact, clearance) = contact_point(&frame, lambda0);
        let h_zero = frame
            .sup_h(lambda0)
            .map(|s| s <= 10.0 * frame.tol_mp)
            .unwrap_or(false);
        if clearance.abs() <= 1e-3 * span.max(1e-8) || stop == StopReason::Midline {
            // the reflected arc touches: classify by position and normal
            let u_contact = frame.u(contact.0, contact.1);
            let kind = if (u_contact - lambda0).abs() < 1e-3 * span.max(1e-8)
                && boundary_normal_orthogonal(&frame, contact)
            {
                TangencyKind::Boundary
            } else {
                TangencyKind::Internal
            };
            Some(TangencyEvent { kind, contact, lambda0, h_identically_zero: h_zero })
        } else {
            None
        }
    } else {
        None
    };
    // midline symmetry verdict
    let midline_defect = frame.sup_h(mid);
    let symmetric = midline_defect.map(|d| d <= 10.0 * frame.tol_mp).unwrap_or(false);
    Ok(DirectionReport {
        direction: dir,
        lambda0,
        lambda_mid: mid,
        stop,
        event,
        symmetric,
        midline_defect,
        min_h_profile: profile,
    })
}

/// Contact point: reflected boundary sample with the worst clearance,
/// reported in its reflected (cap-side) position.
fn contact_point(frame: &SweepFrame, lambda: f64) -> ((f64, f64), f64) {
    let mut best = ((f64::NAN, f64::NAN), f64::MAX);
    for &(bx, by, bu) in &frame.boundary_pts {
        if bu < lambda {
            let r = frame.reflect(lambda, bx, by);
            let c = frame.region.inside_signed(r.0, r.1);
            if c < best.1 {
                best = (r, c);
            }
        }
    }
    best
}

/// Does the region boundary normal at the (near-boundary) point lie
/// orthogonal to the sweep direction?
fn boundary_normal_orthogonal(frame: &SweepFrame, p: (f64, f64)) -> bool {
    // nearest boundary curve normal via finite differences of the distance
    let eps = 1e-6;
    let d = |x: f64, y: f64| frame.region.inside_signed(x, y);
    let gx = (d(p.0 + eps, p.1) - d(p.0 - eps, p.1)) / (2.0 * eps);
    let gy = (d(p.0, p.1 + eps) - d(p.0, p.1 - eps)) / (2.0 * eps);
    let norm = gx.hypot(gy);
    if norm < 1e-9 {
        return false;
    }
    let along = (gx * frame.dir.0 + gy * frame.dir.1) / norm;
    along.abs() <= TOL_ANGLE
}

// ---------------------------------------------------------------------------
// Global verdict
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub enum GlobalVerdict {
    Radial { center: (f64, f64), center_error: f64 },
    AxisSymmetric { axes: Vec<usize> },
    Asymmetric,
}

#[derive(Clone, Debug, Serialize)]
pub struct MovingPlaneReport {
    pub directions: Vec<DirectionReport>,
    pub verdict: GlobalVerdict,
    pub audit: Option<CoefficientAudit>,
}

/// Sweep `n_directions` equally spaced directions and synthesize the global
/// verdict: radial when every direction is symmetric and the axes meet in
/// one point.
pub fn symmetry_verdict(
    psi: &FieldRef,
    region: &SweepRegion,
    n_directions: usize,
    lambda_count: usize,
) -> Result<MovingPlaneReport> {
    if n_directions < 8 {
        return Err(Error::TooFew { what: "directions", need: 8, got: n_directions });
    }
    let dirs: Vec<(f64, f64)> = (0..n_directions)
        .map(|i| {
            let th = std::f64::consts::PI * i as f64 / n_directions as f64;
            (th.cos(), th.sin())
        })
        .collect();
    let reports: Vec<Result<DirectionReport>> = dirs
        .par_iter()
        .map(|d| sweep_direction(psi, region, *d, lambda_count))
        .collect();
    let mut directions = Vec::with_capacity(n_directions);
    for r in reports {
        directions.push(r?);
    }
    let symmetric_idx: Vec<usize> = directions
        .iter()
        .enumerate()
        .filter(|(_, d)| d.symmetric)
        .map(|(i, _)| i)
        .collect();
    let verdict = if symmetric_idx.len() == n_directions {
        // least-squares intersection of the axes e_i . c = λ_mid,i
        let mut a11 = 0.0;
        let mut a12 = 0.0;
        let mut a22 = 0.0;
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for d in &directions {
            let (ex, ey) = d.direction;
            a11 += ex * ex;
            a12 += ex * ey;
            a22 += ey * ey;
            b1 += d.lambda_mid * ex;
            b2 += d.lambda_mid * ey;
        }
        let det = a11 * a22 - a12 * a12;
        let cx = (b1 * a22 - b2 * a12) / det;
        let cy = (a11 * b2 - a12 * b1) / det;
        let err = directions
            .iter()
            .map(|d| (d.direction.0 * cx + d.direction.1 * cy - d.lambda_mid).abs())
            .fold(0.0, f64::max);
        if err <= TOL_CENTER {
            GlobalVerdict::Radial { center: (cx, cy), center_error: err }
        } else {
            GlobalVerdict::AxisSymmetric { axes: symmetric_idx }
        }
    } else if !symmetric_idx.is_empty() {
        GlobalVerdict::AxisSymmetric { axes: symmetric_idx }
    } else {
        GlobalVerdict::Asymmetric
    };
    Ok(MovingPlaneReport { directions, verdict, audit: None })
}

// ---------------------------------------------------------------------------
// Coefficient audit
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientAudit {
    /// Empirical M: max over sampled λ and cap points of (-c)⁺ dist(x, ∂Ω̆).
    pub m_bound: f64,
    pub per_lambda: Vec<(f64, f64)>,
    /// Samples where the quotient was replaced by F' (|ψ - ψ_λ| below floor).
    pub derivative_fallbacks: usize,
    pub skipped: usize,
    /// Singular-part sign check (see below): points tested / points passed.
    pub sign_checked: usize,
    pub sign_passed: usize,
}

/// Audit the singular coefficient c_λ = (F(ψ) - F(ψ_λ))/(ψ - ψ_λ) along the
/// sweep of one direction: the product of the negative part with the
/// distance to the reflected-cap boundary must stay bounded uniformly in λ.
/// When an endpoint expansion with index k0 >= 2 and negative leading
/// coefficient is supplied, the corresponding difference quotient of
/// (1-s)^((k0-1)/k0) is sign-checked pointwise.
pub fn coefficient_audit(
    psi: &FieldRef,
    flux: &crate::flux::FluxRelation,
    region: &SweepRegion,
    dir: (f64, f64),
    lambda_count: usize,
    endpoint_fit: Option<&crate::flux::PuiseuxSeries>,
) -> Result<CoefficientAudit> {
    if flux.verdict != crate::flux::FluxVerdict::SingleValued {
        return Err(Error::NotSingleValued);
    }
    let frame = build_frame(psi, region, dir, 96, 256)?;
    let mid = 0.5 * (frame.u_min + frame.u_max);
    let span = mid - frame.u_min;
    let (range_a, range_b) = flux.range;
    let range_span = (range_b - range_a).max(1e-300);
    let q_term = endpoint_fit.and_then(|fit| {
        if fit.k0 >= 2 && fit.leading_negative {
            Some(((fit.k0 - 1) as f64 / fit.k0 as f64, -1.0))
        } else {
            None
        }
    });
    let mut per_lambda = Vec::new();
    let mut m_bound: f64 = 0.0;
    let mut fallbacks = 0usize;
    let mut skipped = 0usize;
    let mut sign_checked = 0usize;
    let mut sign_passed = 0usize;
    for k in 1..=lambda_count {
        let lambda = frame.u_min + span * k as f64 / lambda_count as f64;
        let s = frame.state(lambda);
        if !frame.good(&s) {
            break;
        }
        let mut audit: f64 = 0.0;
        for &(x, y, u, psi_x) in &frame.nodes {
            if u <= lambda {
                continue;
            }
            let (rx, ry) = frame.reflect(lambda, x, y);
            if !frame.region.contains(rx, ry) {
                continue;
            }
            let psi_r = frame.psi.eval(rx, ry);
            if !psi_r.is_finite() {
                continue;
            }
            let c = if (psi_x - psi_r).abs() > EPS_DIV {
                let (fa, fb) = (flux.eval(psi_x), flux.eval(psi_r));
                match (fa, fb) {
                    (Ok(fa), Ok(fb)) => (fa - fb) / (psi_x - psi_r),
                    _ => {
                        skipped += 1;
                        continue;
                    }
                }
            } else {
                match flux.eval_derivative(psi_x) {
                    Ok(d) if d.is_finite() => {
                        fallbacks += 1;
                        d
                    }
                    _ => {
                        skipped += 1;
                        continue;
                    }
                }
            };
            // distance to the reflected-cap boundary: min of distance to the
            // hyperplane and to the reflected arc (reflection is an isometry)
            let d_h = (frame.u(x, y) - lambda).abs();
            let d_arc = frame
                .region
                .curves
                .iter()
                .map(|cv| cv.distance(rx, ry))
                .fold(f64::MAX, f64::min);
            let dist = d_h.min(d_arc);
            audit = audit.max((-c).max(0.0) * dist);
            // sign structure of the (1-s)^((k0-1)/k0) singular part
            if let Some((q, d1_sign)) = q_term {
                let sa = ((psi_x - range_a) / range_span).clamp(0.0, 1.0);
                let sb = ((psi_r - range_a) / range_span).clamp(0.0, 1.0);
                if (sa - sb).abs() > EPS_DIV {
                    sign_checked += 1;
                    let quot =
                        ((1.0 - sa).powf(q) - (1.0 - sb).powf(q)) / (sa - sb);
                    if d1_sign * quot >= -1e-12 {
                        sign_passed += 1;
                    }
                }
            }
        }
        per_lambda.push((lambda, audit));
        m_bound = m_bound.max(audit);
    }
    if per_lambda.is_empty() {
        return Err(Error::NoAdmissibleStates);
    }
    Ok(CoefficientAudit {
        m_bound,
        per_lambda,
        derivative_fallbacks: fallbacks,
        skipped,
        sign_checked,
        sign_passed,
    })
}

// ---------------------------------------------------------------------------
// Hopf-type sign checks
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HopfKind {
    /// Ball tangent to the region boundary at the contact point.
    Internal,
    /// Half-ball with the contact at the hyperplane-boundary corner.
    Boundary,
}

#[derive(Clone, Debug, Serialize)]
pub enum HopfOutcome {
    IdenticallyZero,
    /// Internal: the inward normal derivative at the contact.
    PositiveNormalDerivative(f64),
    /// Boundary: min over tested directions of the second derivative.
    PositiveSecondDerivative(f64),
    Fail(f64),
}

/// Sign predicate behind the tangency arguments: for a nonnegative h
/// vanishing at the contact, either h ≡ 0 on the test ball or the stated
/// derivative is strictly positive.
pub fn hopf_sign_check(
    h: &dyn Fn(f64, f64) -> f64,
    in_region: &dyn Fn(f64, f64) -> bool,
    contact: (f64, f64),
    inward: (f64, f64),
    kind: HopfKind,
    radius: f64,
) -> Result<HopfOutcome> {
    // precondition: h >= 0 on the sampled part of the ball inside the region
    let mut sup: f64 = 0.0;
    let mut min: f64 = 0.0;
    let nrm = inward.0.hypot(inward.1);
    let inward = (inward.0 / nrm, inward.1 / nrm);
    let tangent = (-inward.1, inward.0);
    for i in 0..24 {
        for j in 0..24 {
            let a = radius * (i as f64 + 0.5) / 24.0;
            let b = radius * ((j as f64 + 0.5) / 12.0 - 1.0);
            if a * a + b * b > radius * radius {
                continue;
            }
            let p = (
                contact.0 + a * inward.0 + b * tangent.0,
                contact.1 + a * inward.1 + b * tangent.1,
            );
            if !in_region(p.0, p.1) {
                continue;
            }
            let v = h(p.0, p.1);
            sup = sup.max(v.abs());
            min = min.min(v);
        }
    }
    if min < -1e-10 * sup.max(1e-300) {
        return Err(Error::HopfPrecondition(min));
    }
    if sup <= 1e-12 {
        return Ok(HopfOutcome::IdenticallyZero);
    }
    let fd = radius / 200.0;
    match kind {
        HopfKind::Internal => {
            let d = (h(contact.0 + fd * inward.0, contact.1 + fd * inward.1)
                - h(contact.0, contact.1))
                / fd;
            if d > 0.0 {
                Ok(HopfOutcome::PositiveNormalDerivative(d))
            } else {
                Ok(HopfOutcome::Fail(d))
            }
        }
        HopfKind::Boundary => {
            // the corner is a right angle; admissible directions lie strictly
            // inside the cone, i.e. within ±45° of the bisector
            let mut min_second = f64::MAX;
            for k in 0..8 {
                let th = (k as f64 / 7.0 - 0.5) * (std::f64::consts::FRAC_PI_2 * 0.8);
                let (s, c) = th.sin_cos();
                let eta = (c * inward.0 - s * inward.1, s * inward.0 + c * inward.1);
                let second = (h(contact.0 + fd * eta.0, contact.1 + fd * eta.1)
                    - 2.0 * h(contact.0, contact.1)
                    + h(contact.0 - fd * eta.0, contact.1 - fd * eta.1))
                    / (fd * fd);
                min_second = min_second.min(second);
            }
            if min_second > 0.0 {
                Ok(HopfOutcome::PositiveSecondDerivative(min_second))
            } else {
                Ok(HopfOutcome::Fail(min_second))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Params, J01};
    use crate::calculus::steady_residual;
    use crate::flux::{analyze_flux, fit_puiseux, EndpointSide};

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn disk_region() -> SweepRegion {
        SweepRegion::from_domain(&Domain::disk_unit()).unwrap()
    }

    #[test]
    fn reflection_identity_on_hyperplane() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let region = disk_region();
        let frame = build_frame(&f, &region, (1.0, 0.0), 64, 128).unwrap();
        for k in 0..16 {
            let y = -0.9 + 1.8 * k as f64 / 15.0;
            let lambda = -0.3;
            let p = (lambda, y);
            let r = frame.reflect(lambda, p.0, p.1);
            assert!((r.0 - p.0).abs() < 1e-14 && (r.1 - p.1).abs() < 1e-14);
            // π ∘ π = id
            let q = frame.reflect(lambda, 0.4, y);
            let qq = frame.reflect(lambda, q.0, q.1);
            assert!((qq.0 - 0.4).abs() < 1e-14);
        }
    }

    #[test]
    fn radial_field_sweeps_to_center() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let region = disk_region();
        let rep = sweep_direction(&f, &region, (1.0, 0.0), 128).unwrap();
        assert_eq!(rep.stop, StopReason::Midline);
        assert!((rep.lambda0 - 0.0).abs() < 1e-6, "lambda0 {}", rep.lambda0);
        assert!(rep.symmetric);
        assert!(rep.midline_defect.unwrap() <= 1e-12);
        // reflection monotonicity held at every admissible level
        for (_, mh) in &rep.min_h_profile {
            assert!(mh.is_nan() || *mh >= -1e-9);
        }
        let ev = rep.event.unwrap();
        assert!(ev.h_identically_zero);
        assert_eq!(ev.kind, TangencyKind::Internal);
    }

    #[test]
    fn radial_verdict_with_center() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let region = disk_region();
        let rep = symmetry_verdict(&f, &region, 16, 96).unwrap();
        match rep.verdict {
            GlobalVerdict::Radial { center, center_error } => {
                assert!(center.0.hypot(center.1) <= 1e-6, "center {center:?}");
                assert!(center_error <= 1e-6);
            }
            other => panic!("expected radial, got {other:?}"),
        }
    }

    #[test]
    fn two_bump_is_asymmetric_and_breaks_before_center() {
        let f = catalog::field("two-bump", &Params::new()).unwrap() as FieldRef;
        let region = SweepRegion::from_domain(f.domain()).unwrap();
        let rep = sweep_direction(&f, &region, (1.0, 0.0), 192).unwrap();
        assert!(!rep.symmetric);
        assert_eq!(rep.stop, StopReason::MonotonicityBreak);
        // the break happens at the first bump's own symmetry plane, well
        // before the disk midline at 0
        assert!(
            rep.lambda0 < -0.5,
            "lambda0 = {} (expected around -0.9)",
            rep.lambda0
        );
        let global = symmetry_verdict(&f, &region, 8, 96).unwrap();
        assert!(matches!(global.verdict, GlobalVerdict::Asymmetric));
    }

    #[test]
    fn audit_bounded_for_sqrt_profile() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let sup = steady_residual(&f, 128).sup_residual;
        let (_s, flux) = analyze_flux(&f, 256, &[0.0, 1.0], sup).unwrap();
        let fit = fit_puiseux(&flux, EndpointSide::Max, 4).unwrap();
        let region = disk_region();
        let audit =
            coefficient_audit(&f, &flux, &region, (1.0, 0.0), 48, Some(&fit)).unwrap();
        // -c = 16/(sqrt(ψ) + sqrt(ψ_λ)) and ψ >= dist²/C keeps the product
        // bounded by 16 sqrt(C) ≈ 32
        assert!(audit.m_bound.is_finite());
        assert!(audit.m_bound < 40.0, "M = {}", audit.m_bound);
        // F = 8 - 16 sqrt(s) is analytic at the max (k0 = 1): no singular
        // (1-s) part exists, so the sign check has nothing to test
        assert_eq!(audit.sign_checked, 0);
    }

    #[test]
    fn audit_sign_check_engages_for_sextic() {
        // 1 - r^6: F = -36 (1-s)^(2/3), k0 = 3, leading coefficient negative
        let f = catalog::field("radial-even", &params(&[("m", 3.0)])).unwrap() as FieldRef;
        let sup = steady_residual(&f, 128).sup_residual;
        let (_s, flux) = analyze_flux(&f, 256, &[0.0, 1.0], sup).unwrap();
        let fit = fit_puiseux(&flux, EndpointSide::Max, 4).unwrap();
        assert_eq!(fit.k0, 3, "fit {fit:?}");
        assert!(fit.leading_negative);
        let region = disk_region();
        let audit =
            coefficient_audit(&f, &flux, &region, (1.0, 0.0), 32, Some(&fit)).unwrap();
        assert!(audit.sign_checked > 1000, "checked {}", audit.sign_checked);
        assert_eq!(audit.sign_checked, audit.sign_passed);
        assert!(audit.m_bound.is_finite());
    }

    #[test]
    fn audit_constant_coefficient_for_linear_profile() {
        let f = catalog::field("disk-eigen", &Params::new()).unwrap() as FieldRef;
        let sup = steady_residual(&f, 128).sup_residual;
        let (_s, flux) = analyze_flux(&f, 256, &[0.0, 1.0], sup).unwrap();
        let region = disk_region();
        let audit = coefficient_audit(&f, &flux, &region, (1.0, 0.0), 32, None).unwrap();
        // c ≡ -j01²: audit ≤ j01² · diam(Ω) = 2 j01²
        assert!(audit.m_bound <= J01 * J01 * 2.0 + 1e-6, "M = {}", audit.m_bound);
    }

    #[test]
    fn singular_quotient_sign_is_structural() {
        // d1 < 0 and (1-s)^q decreasing make the quotient nonnegative
        let q: f64 = 2.0 / 3.0;
        for i in 0..40 {
            for j in 0..40 {
                let sa = 0.01 + 0.98 * i as f64 / 39.0;
                let sb = 0.01 + 0.98 * j as f64 / 39.0;
                if (sa - sb).abs() < 1e-10 {
                    continue;
                }
                let quot = ((1.0 - sa).powf(q) - (1.0 - sb).powf(q)) / (sa - sb);
                assert!(-quot >= 0.0 || quot.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hopf_internal_manufactured() {
        // h = y (1 + x) on the upper half ball, contact at the origin
        let h = |x: f64, y: f64| y * (1.0 + x);
        let region = |_x: f64, y: f64| y >= 0.0;
        let out =
            hopf_sign_check(&h, &region, (0.0, 0.0), (0.0, 1.0), HopfKind::Internal, 0.3).unwrap();
        match out {
            HopfOutcome::PositiveNormalDerivative(d) => assert!((d - 1.0).abs() < 0.01),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hopf_boundary_manufactured() {
        // h = -x y on the quarter x > 0, y < 0: second derivative along
        // η = (η1, -η2) is -2 η1 η2 > 0
        let h = |x: f64, y: f64| -x * y;
        let region = |x: f64, y: f64| x >= 0.0 && y <= 0.0;
        let out = hopf_sign_check(
            &h,
            &region,
            (0.0, 0.0),
            (1.0, -1.0),
            HopfKind::Boundary,
            0.2,
        )
        .unwrap();
        assert!(matches!(out, HopfOutcome::PositiveSecondDerivative(_)), "{out:?}");
    }

    #[test]
    fn hopf_zero_field() {
        let h = |_x: f64, _y: f64| 0.0;
        let all = |_x: f64, _y: f64| true;
        let out =
            hopf_sign_check(&h, &all, (0.0, 0.0), (0.0, 1.0), HopfKind::Internal, 0.2).unwrap();
        assert!(matches!(out, HopfOutcome::IdenticallyZero));
    }

    #[test]
    fn hopf_rejects_sign_changing_h() {
        let h = |x: f64, _y: f64| x;
        let all = |_x: f64, _y: f64| true;
        let out = hopf_sign_check(&h, &all, (0.0, 0.0), (0.0, 1.0), HopfKind::Internal, 0.2);
        assert!(matches!(out, Err(Error::HopfPrecondition(_))));
    }

    #[test]
    fn periodic_domain_rejected() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        assert!(matches!(
            SweepRegion::from_domain(f.domain()),
            Err(Error::RegionUnbounded)
        ));
    }
}
