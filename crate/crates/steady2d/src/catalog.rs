//! Catalog of closed-form scalar fields with attached ground truth.
//!
//! Every entry evaluates through jet arithmetic, so derivatives up to the
//! catalog cap are exact (rounding only). Ground-truth metadata (critical
//! points with degrees, the flux profile when one exists, symmetry) is what
//! the test suites assert against; consistency of the metadata with the
//! closed form is itself checked by tests, not assumed.

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::jet::Jet;
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// First positive zero of the Bessel function J0.
pub const J01: f64 = 2.404825557695773;
/// J1(J01) = -J0'(J01).
pub const J1_AT_J01: f64 = 0.5191474972894669;

/// Derivative cap for catalog fields.
pub const CATALOG_MAX_ORDER: usize = 8;

/// Flux profiles F with Δψ = F(ψ) for catalog steady fields.
#[derive(Clone, Debug)]
pub enum FluxForm {
    /// F(s) = c s
    Linear { c: f64 },
    /// F(s) = c
    Const { c: f64 },
    /// Profile of (1-r^2)^p: F(s) = -4p s^((p-1)/p) + 4p(p-1)(1 - s^(1/p)) s^((p-2)/p)
    RadialPoly { p: u32 },
    /// Profile of 1 - r^(2m): F(s) = -4 m^2 (1-s)^((m-1)/m)
    RadialEven { m: u32 },
}

impl FluxForm {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            FluxForm::Linear { c } => c * s,
            FluxForm::Const { c } => *c,
            FluxForm::RadialPoly { p } => {
                let p = *p as f64;
                let s = s.max(0.0);
                -4.0 * p * s.powf((p - 1.0) / p)
                    + 4.0 * p * (p - 1.0) * (1.0 - s.powf(1.0 / p)) * s.powf((p - 2.0) / p)
            }
            FluxForm::RadialEven { m } => {
                let m = *m as f64;
                -4.0 * m * m * (1.0 - s).max(0.0).powf((m - 1.0) / m)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum Symmetry {
    Radial { center: (f64, f64) },
    None,
}

/// Declared ground truth for a catalog entry.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub steady: bool,
    /// (point, degree of vanishing of the gradient).
    pub critical_points: Vec<((f64, f64), usize)>,
    pub flux: Option<FluxForm>,
    pub symmetry: Symmetry,
    /// Value of the field on the domain boundary, when constant.
    pub boundary_value: Option<f64>,
}

#[derive(Clone, Debug)]
enum Form {
    SinSin,
    Sin2Sin2,
    Shear,
    RadialPoly { p: u32 },
    RadialEven { m: u32 },
    DiskEigen,
    TwoBump { bumps: Vec<Bump> },
    BumpOfF { s0: f64 },
    Perturbed { eps: f64 },
    Poly { coeffs: Vec<(u32, u32, f64)> },
}

#[derive(Clone, Debug)]
struct Bump {
    cx: f64,
    cy: f64,
    radius: f64,
    amp: f64,
}

/// A catalog field: closed form + domain + ground truth.
pub struct CatalogField {
    name: String,
    form: Form,
    domain: Domain,
    truth: GroundTruth,
}

impl CatalogField {
    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }
}

/// exp(1 - 1/t) on jets, identically zero once t is inside the rounding
/// floor (the true value is below 1e-300 there).
fn bump_profile(t: &Jet) -> Jet {
    if t.value() <= 1e-6 {
        return Jet::constant(0.0, t.order());
    }
    t.recip().neg().add_scalar(1.0).exp()
}

fn j0_series(u: &Jet) -> Jet {
    // J0(z) = sum (-1)^k (z^2/4)^k / (k!)^2 with u = z^2/4; 25 terms is
    // far below rounding for the unit disk argument range.
    const TERMS: usize = 25;
    let mut coeff = vec![0.0; TERMS + 1];
    let mut f = 1.0;
    for (k, c) in coeff.iter_mut().enumerate() {
        if k > 0 {
            f *= k as f64;
        }
        *c = if k % 2 == 0 { 1.0 } else { -1.0 } / (f * f);
    }
    let mut acc = Jet::constant(coeff[TERMS], u.order());
    for k in (0..TERMS).rev() {
        acc = acc.mul(u).add_scalar(coeff[k]);
    }
    acc
}

impl Field for CatalogField {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn max_order(&self) -> usize {
        CATALOG_MAX_ORDER
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        let xj = Jet::var_x(x, order);
        let yj = Jet::var_y(y, order);
        match &self.form {
            Form::SinSin => xj.sin().mul(&yj.sin()),
            Form::Sin2Sin2 => {
                let sx = xj.sin();
                let sy = yj.sin();
                sx.mul(&sx).mul(&sy.mul(&sy))
            }
            Form::Shear => yj.cos(),
            Form::RadialPoly { p } => {
                let r2 = xj.mul(&xj).add(&yj.mul(&yj));
                r2.neg().add_scalar(1.0).powi(*p as usize)
            }
            Form::RadialEven { m } => {
                let r2 = xj.mul(&xj).add(&yj.mul(&yj));
                r2.powi(*m as usize).neg().add_scalar(1.0)
            }
            Form::DiskEigen => {
                let r2 = xj.mul(&xj).add(&yj.mul(&yj));
                let u = r2.scale(J01 * J01 / 4.0);
                j0_series(&u)
            }
            Form::TwoBump { bumps } => {
                let mut acc = Jet::constant(0.0, order);
                for b in bumps {
                    let dx = xj.add_scalar(-b.cx);
                    let dy = yj.add_scalar(-b.cy);
                    let u = dx.mul(&dx).add(&dy.mul(&dy)).scale(1.0 / (b.radius * b.radius));
                    if u.value() >= 1.0 {
                        continue;
                    }
                    let t = u.neg().add_scalar(1.0);
                    acc = acc.add(&bump_profile(&t).scale(b.amp));
                }
                acc
            }
            Form::BumpOfF { s0 } => {
                let xm = x.rem_euclid(TAU);
                let ym = y.rem_euclid(TAU);
                if !(xm > 0.0 && xm < PI && ym > 0.0 && ym < PI) {
                    return Jet::constant(0.0, order);
                }
                let f = Jet::var_x(xm, order).sin().mul(&Jet::var_y(ym, order).sin());
                // u = (f - 1)/(1 - s0) runs over (-1, 0] exactly on {f > s0}
                let u = f.add_scalar(-1.0).scale(1.0 / (1.0 - s0));
                if u.value() <= -1.0 {
                    return Jet::constant(0.0, order);
                }
                let t = u.mul(&u).neg().add_scalar(1.0);
                bump_profile(&t)
            }
            Form::Perturbed { eps } => {
                let r2 = xj.mul(&xj).add(&yj.mul(&yj));
                let base = r2.neg().add_scalar(1.0).powi(2);
                base.add(&xj.mul(&yj).scale(*eps))
            }
            Form::Poly { coeffs } => {
                let mut acc = Jet::constant(0.0, order);
                for &(i, j, c) in coeffs {
                    acc = acc.add(&xj.powi(i as usize).mul(&yj.powi(j as usize)).scale(c));
                }
                acc
            }
        }
    }
}

pub type Params = BTreeMap<String, f64>;

fn get_param(params: &Params, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

/// Construct a catalog field by name. Documented entries: `sinsin`,
/// `sin2sin2`, `bump-of-f`, `radial-poly` (p >= 2), `radial-even` (m >= 1),
/// `radial-quartic`, `disk-eigen`, `shear`, `two-bump`, `perturbed`, `poly`.
pub fn field(name: &str, params: &Params) -> Result<Arc<CatalogField>> {
    let entry = match name {
        "sinsin" => {
            let mut pts = Vec::new();
            for &cx in &[PI / 2.0, 3.0 * PI / 2.0] {
                for &cy in &[PI / 2.0, 3.0 * PI / 2.0] {
                    pts.push(((cx, cy), 2));
                }
            }
            for &cx in &[0.0, PI] {
                for &cy in &[0.0, PI] {
                    pts.push(((cx, cy), 2));
                }
            }
            CatalogField {
                name: name.into(),
                form: Form::SinSin,
                domain: Domain::torus_2pi(),
                truth: GroundTruth {
                    steady: true,
                    critical_points: pts,
                    flux: Some(FluxForm::Linear { c: -2.0 }),
                    symmetry: Symmetry::None,
                    boundary_value: None,
                },
            }
        }
        "sin2sin2" => {
            let mut pts = Vec::new();
            for &cx in &[0.0, PI] {
                for &cy in &[0.0, PI] {
                    pts.push(((cx, cy), 4));
                }
            }
            for &cx in &[PI / 2.0, 3.0 * PI / 2.0] {
                for &cy in &[PI / 2.0, 3.0 * PI / 2.0] {
                    pts.push(((cx, cy), 2));
                }
            }
            // wall points away from the junctions
            pts.push(((0.0, PI / 2.0), 2));
            pts.push(((PI / 2.0, 0.0), 2));
            pts.push(((PI, PI / 2.0), 2));
            pts.push(((PI / 2.0, PI), 2));
            CatalogField {
                name: name.into(),
                form: Form::Sin2Sin2,
                domain: Domain::torus_2pi(),
                truth: GroundTruth {
                    steady: false,
                    critical_points: pts,
                    flux: None,
                    symmetry: Symmetry::None,
                    boundary_value: None,
                },
            }
        }
        "shear" => CatalogField {
            name: name.into(),
            form: Form::Shear,
            domain: Domain::torus_2pi(),
            truth: GroundTruth {
                steady: true,
                critical_points: vec![((0.3, 0.0), 2), ((2.0, PI), 2), ((5.0, 0.0), 2)],
                flux: Some(FluxForm::Linear { c: -1.0 }),
                symmetry: Symmetry::None,
                boundary_value: None,
            },
        },
        "radial-poly" => {
            let p = get_param(params, "p", 2.0);
            if p < 2.0 || p.fract() != 0.0 {
                return Err(Error::ParamOutOfRange {
                    name: "p".into(),
                    reason: format!("need integer p >= 2, got {p}"),
                });
            }
            let p = p as u32;
            let mut pts = vec![((0.0, 0.0), 2)];
            for &t in &[0.0, PI / 2.0, PI, -PI / 2.0, 1.0] {
                pts.push(((t.cos(), t.sin()), p as usize));
            }
            CatalogField {
                name: format!("radial-poly(p={p})"),
                form: Form::RadialPoly { p },
                domain: Domain::disk_unit(),
                truth: GroundTruth {
                    steady: true,
                    critical_points: pts,
                    flux: Some(FluxForm::RadialPoly { p }),
                    symmetry: Symmetry::Radial { center: (0.0, 0.0) },
                    boundary_value: Some(0.0),
                },
            }
        }
        "radial-even" | "radial-quartic" => {
            let m = if name == "radial-quartic" {
                2.0
            } else {
                get_param(params, "m", 2.0)
            };
            if m < 1.0 || m.fract() != 0.0 {
                return Err(Error::ParamOutOfRange {
                    name: "m".into(),
                    reason: format!("need integer m >= 1, got {m}"),
                });
            }
            let m = m as u32;
            CatalogField {
                name: format!("radial-even(m={m})"),
                form: Form::RadialEven { m },
                domain: Domain::disk_unit(),
                truth: GroundTruth {
                    steady: true,
                    critical_points: vec![((0.0, 0.0), 2 * m as usize)],
                    flux: Some(FluxForm::RadialEven { m }),
                    symmetry: Symmetry::Radial { center: (0.0, 0.0) },
                    boundary_value: Some(0.0),
                },
            }
        }
        "disk-eigen" => CatalogField {
            name: name.into(),
            form: Form::DiskEigen,
            domain: Domain::disk_unit(),
            truth: GroundTruth {
                steady: true,
                critical_points: vec![((0.0, 0.0), 2)],
                flux: Some(FluxForm::Linear { c: -J01 * J01 }),
                symmetry: Symmetry::Radial { center: (0.0, 0.0) },
                boundary_value: Some(0.0),
            },
        },
        "two-bump" => {
            let bumps = vec![
                Bump { cx: -0.9, cy: 0.0, radius: 0.5, amp: 1.0 },
                Bump { cx: 0.8, cy: 0.3, radius: 0.4, amp: 0.7 },
            ];
            let pts = bumps.iter().map(|b| ((b.cx, b.cy), 2)).collect();
            CatalogField {
                name: name.into(),
                form: Form::TwoBump { bumps },
                domain: Domain::Disk { cx: 0.0, cy: 0.0, r: 2.0 },
                truth: GroundTruth {
                    steady: true,
                    critical_points: pts,
                    flux: None,
                    symmetry: Symmetry::None,
                    boundary_value: Some(0.0),
                },
            }
        }
        "bump-of-f" => {
            let s0 = get_param(params, "s0", 0.2);
            if !(0.0 < s0 && s0 < 1.0) {
                return Err(Error::ParamOutOfRange {
                    name: "s0".into(),
                    reason: format!("need 0 < s0 < 1, got {s0}"),
                });
            }
            CatalogField {
                name: name.into(),
                form: Form::BumpOfF { s0 },
                domain: Domain::torus_2pi(),
                truth: GroundTruth {
                    steady: false,
                    critical_points: vec![((PI / 2.0, PI / 2.0), 2)],
                    flux: None,
                    symmetry: Symmetry::None,
                    boundary_value: None,
                },
            }
        }
        "perturbed" => {
            let eps = get_param(params, "eps", 0.1);
            CatalogField {
                name: format!("perturbed(eps={eps})"),
                form: Form::Perturbed { eps },
                domain: Domain::disk_unit(),
                truth: GroundTruth {
                    steady: false,
                    critical_points: vec![],
                    flux: None,
                    symmetry: Symmetry::None,
                    boundary_value: None,
                },
            }
        }
        "poly" => {
            let mut coeffs = Vec::new();
            for (k, v) in params {
                if let Some(rest) = k.strip_prefix('c') {
                    if rest.len() == 2 {
                        let i = rest[0..1].parse::<u32>().map_err(|_| Error::ParamOutOfRange {
                            name: k.clone(),
                            reason: "expected cIJ with single digits".into(),
                        })?;
                        let j = rest[1..2].parse::<u32>().map_err(|_| Error::ParamOutOfRange {
                            name: k.clone(),
                            reason: "expected cIJ with single digits".into(),
                        })?;
                        coeffs.push((i, j, *v));
                        continue;
                    }
                }
                if k == "r" {
                    continue;
                }
                return Err(Error::ParamOutOfRange {
                    name: k.clone(),
                    reason: "polynomial parameters are cIJ (e.g. c21) or r".into(),
                });
            }
            let r = get_param(params, "r", 1.0);
            CatalogField {
                name: name.into(),
                form: Form::Poly { coeffs },
                domain: Domain::Disk { cx: 0.0, cy: 0.0, r },
                truth: GroundTruth {
                    steady: false,
                    critical_points: vec![],
                    flux: None,
                    symmetry: Symmetry::None,
                    boundary_value: None,
                },
            }
        }
        _ => return Err(Error::UnknownCatalogField(name.into())),
    };
    entry.domain.validate()?;
    Ok(Arc::new(entry))
}

/// Names of all documented catalog entries.
pub fn entry_names() -> &'static [&'static str] {
    &[
        "sinsin",
        "sin2sin2",
        "bump-of-f",
        "radial-poly",
        "radial-even",
        "radial-quartic",
        "disk-eigen",
        "shear",
        "two-bump",
        "perturbed",
        "poly",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{derivative, MultiIndex};

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn sinsin_values_and_partials() {
        let f = field("sinsin", &Params::new()).unwrap();
        assert!((f.eval(PI / 2.0, PI / 2.0) - 1.0).abs() < 1e-15);
        // mixed partial at the origin: cos(0) cos(0) = 1
        let d = derivative(f.as_ref(), MultiIndex::new(1, 1), (0.0, 0.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sin2sin2_fourth_order_partial() {
        let f = field("sin2sin2", &Params::new()).unwrap();
        let d = derivative(f.as_ref(), MultiIndex::new(2, 2), (0.0, 0.0)).unwrap();
        assert!((d - 4.0).abs() < 1e-12, "d22 = {d}");
    }

    #[test]
    fn radial_poly_boundary_double_root() {
        let f = field("radial-poly", &params(&[("p", 2.0)])).unwrap();
        assert!(f.eval(1.0, 0.0).abs() < 1e-15);
        let dx = derivative(f.as_ref(), MultiIndex::new(1, 0), (1.0, 0.0)).unwrap();
        assert!(dx.abs() < 1e-14);
    }

    #[test]
    fn disk_eigen_center_value_and_laplacian() {
        let f = field("disk-eigen", &Params::new()).unwrap();
        assert!((f.eval(0.0, 0.0) - 1.0).abs() < 1e-15);
        let j = f.jet(0.0, 0.0, 2);
        let lap = j.partial(2, 0) + j.partial(0, 2);
        assert!((lap + J01 * J01).abs() < 1e-12, "laplacian {lap}");
        // independent oracle: J0 via its integral representation
        let z = J01 * 0.6;
        let quad = {
            let n = 4000;
            let mut acc = 0.0;
            for k in 0..n {
                let th = PI * (k as f64 + 0.5) / n as f64;
                acc += (z * th.sin()).cos();
            }
            acc * PI / n as f64 / PI
        };
        assert!((f.eval(0.6, 0.0) - quad).abs() < 1e-10);
    }

    #[test]
    fn bump_of_f_support_and_value() {
        let g = field("bump-of-f", &Params::new()).unwrap();
        // outside the first quadrant cell: identically zero
        assert_eq!(g.eval(PI + 0.5, 0.5), 0.0);
        assert_eq!(g.eval(4.0, 4.0), 0.0);
        // at the cell max f = 1: profile value 1
        assert!((g.eval(PI / 2.0, PI / 2.0) - 1.0).abs() < 1e-14);
        // constant along level sets of f: compare two points with f = 0.5
        let f = field("sinsin", &Params::new()).unwrap();
        let p1 = (PI / 2.0, PI / 6.0); // sin = 1 * 0.5
        let p2 = (PI / 6.0, PI / 2.0);
        assert!((f.eval(p1.0, p1.1) - 0.5).abs() < 1e-12);
        assert!((g.eval(p1.0, p1.1) - g.eval(p2.0, p2.1)).abs() < 1e-12);
        let expected = (1.0_f64 - 1.0 / (1.0 - (0.5_f64 - 1.0).powi(2) / (0.8_f64).powi(2))).exp();
        assert!((g.eval(p1.0, p1.1) - expected).abs() < 1e-12);
    }

    #[test]
    fn two_bump_centers_are_degree_two_maxima() {
        let f = field("two-bump", &Params::new()).unwrap();
        assert!((f.eval(-0.9, 0.0) - 1.0).abs() < 1e-14);
        assert!((f.eval(0.8, 0.3) - 0.7).abs() < 1e-14);
        let j = f.jet(-0.9, 0.0, 2);
        assert!(j.partial(1, 0).abs() < 1e-13);
        assert!(j.partial(0, 1).abs() < 1e-13);
        assert!(j.partial(2, 0) < -1e-3);
        // far region is exactly flat
        assert_eq!(f.eval(0.0, -1.5), 0.0);
    }

    #[test]
    fn catalog_ground_truth_consistency() {
        // every declared critical point p with degree d: derivatives below
        // order d vanish and some order-d derivative does not
        for name in ["sinsin", "sin2sin2", "radial-poly", "radial-even", "disk-eigen", "shear", "two-bump"] {
            let f = field(name, &params(&[("p", 3.0), ("m", 2.0)])).unwrap();
            for &((x, y), d) in &f.truth().critical_points {
                let j = f.jet(x, y, d);
                let scale: f64 = (0..=d)
                    .flat_map(|o| (0..=o).map(move |i| (i, o - i)))
                    .map(|(i, jj)| j.partial(i, jj).abs())
                    .fold(0.0, f64::max)
                    .max(1e-30);
                for order in 1..d {
                    for i in 0..=order {
                        let v = j.partial(i, order - i);
                        assert!(
                            v.abs() <= 1e-12 * scale,
                            "{name} at ({x},{y}): order {order} partial {v} not zero (scale {scale})"
                        );
                    }
                }
                let top = (0..=d).map(|i| j.partial(i, d - i).abs()).fold(0.0, f64::max);
                assert!(top > 1e-12 * scale, "{name} at ({x},{y}): degree-{d} tensor vanishes");
            }
        }
    }

    #[test]
    fn unknown_name_and_bad_params_error() {
        assert!(matches!(
            field("nope", &Params::new()),
            Err(Error::UnknownCatalogField(_))
        ));
        assert!(matches!(
            field("radial-poly", &params(&[("p", 1.0)])),
            Err(Error::ParamOutOfRange { .. })
        ));
    }

    #[test]
    fn flux_forms_match_hand_derivations() {
        let f2 = FluxForm::RadialPoly { p: 2 };
        for &s in &[0.0, 0.25, 0.5, 0.9] {
            assert!((f2.eval(s) - (8.0 - 16.0 * s.sqrt())).abs() < 1e-12);
        }
        let f4 = FluxForm::RadialEven { m: 2 };
        for &s in &[0.0, 0.3, 0.99] {
            assert!((f4.eval(s) + 16.0 * (1.0 - s).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_partial_symmetry_all_catalog() {
        for name in ["sinsin", "sin2sin2", "radial-poly", "disk-eigen", "two-bump", "bump-of-f"] {
            let f = field(name, &Params::new()).unwrap();
            let pts = [(0.4, 0.3), (1.1, 0.9), (0.2, -0.1)];
            for &(x, y) in &pts {
                if !f.domain().contains(x, y) {
                    continue;
                }
                let j = f.jet(x, y, 4);
                // triangle storage: d12 and d21 come from one expansion, so the
                // check is that derivative_jet paths commute
                let a = j.derivative_jet(1, 0).derivative_jet(0, 1).value();
                let b = j.derivative_jet(0, 1).derivative_jet(1, 0).value();
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
