//! Scalar fields with high-order derivative access.
//!
//! Every field exposes one primitive: a truncated Taylor expansion at a
//! point ([`Field::jet`]). Closed-form fields produce exact jets; grid-backed
//! fields produce finite-difference jets up to their documented cap. Derived
//! fields (derivatives, Laplacians, brackets, compositions) combine the jets
//! of their inputs, so exactness propagates through the whole operator
//! algebra. Fields are immutable after construction and safe to share across
//! threads.

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::jet::Jet;
use std::sync::Arc;

pub trait Field: Send + Sync {
    fn domain(&self) -> &Domain;

    /// Truncated Taylor expansion at `(x, y)` to total degree `order`.
    fn jet(&self, x: f64, y: f64, order: usize) -> Jet;

    /// Highest derivative order this field supports.
    fn max_order(&self) -> usize;

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y, 0).value()
    }

    /// Short identifier used in reports.
    fn name(&self) -> String {
        "field".into()
    }
}

pub type FieldRef = Arc<dyn Field>;

/// Multi-index for a mixed partial derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MultiIndex {
    pub dx: usize,
    pub dy: usize,
}

impl MultiIndex {
    pub fn new(dx: usize, dy: usize) -> Self {
        MultiIndex { dx, dy }
    }
    pub fn order(&self) -> usize {
        self.dx + self.dy
    }
}

/// ∂^alpha field at a point, with the spec's precondition checks.
pub fn derivative(field: &dyn Field, alpha: MultiIndex, point: (f64, f64)) -> Result<f64> {
    if alpha.order() > field.max_order() {
        return Err(Error::DerivativeOrder {
            requested: alpha.order(),
            cap: field.max_order(),
        });
    }
    if !field.domain().contains(point.0, point.1) {
        return Err(Error::OutsideDomain(point.0, point.1));
    }
    Ok(field
        .jet(point.0, point.1, alpha.order())
        .partial(alpha.dx, alpha.dy))
}

/// Gradient via one order-1 jet.
pub fn gradient(field: &dyn Field, x: f64, y: f64) -> (f64, f64) {
    let j = field.jet(x, y, 1);
    (j.partial(1, 0), j.partial(0, 1))
}

// ---------------------------------------------------------------------------
// Derived fields
// ---------------------------------------------------------------------------

/// ∂^(di,dj) of a base field.
pub struct DerivativeField {
    pub base: FieldRef,
    pub di: usize,
    pub dj: usize,
    pub sign: f64,
}

impl Field for DerivativeField {
    fn domain(&self) -> &Domain {
        self.base.domain()
    }
    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        self.base
            .jet(x, y, order + self.di + self.dj)
            .derivative_jet(self.di, self.dj)
            .scale(self.sign)
    }
    fn max_order(&self) -> usize {
        self.base.max_order().saturating_sub(self.di + self.dj)
    }
    fn name(&self) -> String {
        format!("d({},{}) {}", self.di, self.dj, self.base.name())
    }
}

/// ∂xx + ∂yy of a base field.
pub struct LaplacianField {
    pub base: FieldRef,
}

impl Field for LaplacianField {
    fn domain(&self) -> &Domain {
        self.base.domain()
    }
    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        let j = self.base.jet(x, y, order + 2);
        j.derivative_jet(2, 0).add(&j.derivative_jet(0, 2))
    }
    fn max_order(&self) -> usize {
        self.base.max_order().saturating_sub(2)
    }
    fn name(&self) -> String {
        format!("laplacian({})", self.base.name())
    }
}

/// Poisson bracket {f, g} = f_x g_y - f_y g_x as a field.
pub struct BracketField {
    pub f: FieldRef,
    pub g: FieldRef,
}

impl Field for BracketField {
    fn domain(&self) -> &Domain {
        self.f.domain()
    }
    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        let jf = self.f.jet(x, y, order + 1);
        let jg = self.g.jet(x, y, order + 1);
        let fx = jf.derivative_jet(1, 0);
        let fy = jf.derivative_jet(0, 1);
        let gx = jg.derivative_jet(1, 0);
        let gy = jg.derivative_jet(0, 1);
        fx.mul(&gy).sub(&fy.mul(&gx))
    }
    fn max_order(&self) -> usize {
        self.f
            .max_order()
            .min(self.g.max_order())
            .saturating_sub(1)
    }
    fn name(&self) -> String {
        format!("bracket({}, {})", self.f.name(), self.g.name())
    }
}

/// alpha * f + beta.
pub struct AffineField {
    pub base: FieldRef,
    pub alpha: f64,
    pub beta: f64,
}

impl Field for AffineField {
    fn domain(&self) -> &Domain {
        self.base.domain()
    }
    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        self.base.jet(x, y, order).scale(self.alpha).add_scalar(self.beta)
    }
    fn max_order(&self) -> usize {
        self.base.max_order()
    }
    fn name(&self) -> String {
        format!("{}*{}+{}", self.alpha, self.base.name(), self.beta)
    }
}

/// f + g.
pub struct SumField {
    pub f: FieldRef,
    pub g: FieldRef,
}

impl Field for SumField {
    fn domain(&self) -> &Domain {
        self.f.domain()
    }
    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        self.f.jet(x, y, order).add(&self.g.jet(x, y, order))
    }
    fn max_order(&self) -> usize {
        self.f.max_order().min(self.g.max_order())
    }
    fn name(&self) -> String {
        format!("{}+{}", self.f.name(), self.g.name())
    }
}

/// Base field pulled back by a rotation about a center: (R_theta f)(x) = f(c + R^{-1}(x - c)).
pub struct RotatedField {
    pub base: FieldRef,
    pub cx: f64,
    pub cy: f64,
    pub angle: f64,
}

impl Field for RotatedField {
    fn domain(&self) -> &Domain {
        self.base.domain()
    }
    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        let (s, c) = self.angle.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        // preimage point
        let px = self.cx + c * dx + s * dy;
        let py = self.cy - s * dx + c * dy;
        let outer = self.base.jet(px, py, order);
        // preimage coordinates as linear jets of (x, y)
        let xj = Jet::var_x(x, order);
        let yj = Jet::var_y(y, order);
        let mut u = xj.scale(c).add(&yj.scale(s));
        *u.coeff_mut(0, 0) = px;
        let mut v = xj.scale(-s).add(&yj.scale(c));
        *v.coeff_mut(0, 0) = py;
        Jet::compose_bivariate(&outer, &u, &v)
    }
    fn max_order(&self) -> usize {
        self.base.max_order()
    }
    fn name(&self) -> String {
        format!("rot({}, {})", self.angle, self.base.name())
    }
}

/// Pointwise map of field values: (phi ∘ f)(x). `phi` supplies its own
/// univariate Taylor coefficients at an arbitrary expansion point.
pub trait ScalarMap: Send + Sync {
    /// Taylor coefficients phi^(m)(t0)/m! for m = 0..=order.
    fn taylor(&self, t0: f64, order: usize) -> Vec<f64>;
    fn name(&self) -> String {
        "phi".into()
    }
}

pub struct ComposedField {
    pub base: FieldRef,
    pub map: Arc<dyn ScalarMap>,
}

impl Field for ComposedField {
    fn domain(&self) -> &Domain {
        self.base.domain()
    }
    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        let inner = self.base.jet(x, y, order);
        let outer = self.map.taylor(inner.value(), order);
        inner.compose_univariate(&outer)
    }
    fn max_order(&self) -> usize {
        self.base.max_order()
    }
    fn name(&self) -> String {
        format!("{}({})", self.map.name(), self.base.name())
    }
}

/// Polynomial scalar map, handy for tests and for φ∘f probes.
pub struct PolyMap {
    pub coeffs: Vec<f64>,
}

impl ScalarMap for PolyMap {
    fn taylor(&self, t0: f64, order: usize) -> Vec<f64> {
        // expand sum a_k t^k about t0 by repeated synthetic division
        let mut work = self.coeffs.clone();
        let mut out = vec![0.0; order + 1];
        for o in out.iter_mut() {
            if work.is_empty() {
                break;
            }
            let mut q = vec![0.0; work.len() - 1];
            let mut carry = *work.last().unwrap();
            for k in (1..work.len()).rev() {
                q[k - 1] = carry;
                carry = work[k - 1] + carry * t0;
            }
            *o = carry;
            work = q;
        }
        out
    }
    fn name(&self) -> String {
        "poly".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn derivative_checks_order_and_domain() {
        let f = catalog::field("sinsin", &Default::default()).unwrap();
        let err = derivative(f.as_ref(), MultiIndex::new(5, 5), (0.1, 0.2));
        assert!(matches!(err, Err(Error::DerivativeOrder { .. })));
        let g = catalog::field("radial-poly", &[("p".to_string(), 2.0)].into_iter().collect())
            .unwrap();
        let err = derivative(g.as_ref(), MultiIndex::new(1, 0), (2.0, 0.0));
        assert!(matches!(err, Err(Error::OutsideDomain(..))));
    }

    #[test]
    fn identity_multi_index_returns_value() {
        let f = catalog::field("sinsin", &Default::default()).unwrap();
        let v = derivative(f.as_ref(), MultiIndex::new(0, 0), (0.3, 0.9)).unwrap();
        assert!((v - f.eval(0.3, 0.9)).abs() < 1e-15);
    }

    #[test]
    fn rotation_pullback_matches_direct_evaluation() {
        let f = catalog::field("sinsin", &Default::default()).unwrap();
        let rot = RotatedField {
            base: f.clone(),
            cx: 0.0,
            cy: 0.0,
            angle: std::f64::consts::FRAC_PI_2,
        };
        // (R f)(x, y) = f(y, -x) for a +90 degree rotation about the origin
        let (x, y) = (0.7, 0.4);
        assert!((rot.eval(x, y) - f.eval(y, -x)).abs() < 1e-14);
        let jr = rot.jet(x, y, 3);
        let jd = f.jet(y, -x, 3);
        // d/dx (R f) = -d/dy f at the preimage
        assert!((jr.partial(1, 0) - (-jd.partial(0, 1))).abs() < 1e-12);
        assert!((jr.partial(0, 1) - jd.partial(1, 0)).abs() < 1e-12);
    }

    #[test]
    fn poly_map_taylor_shift() {
        // phi(t) = 1 + 2t + 3t^2 about t0 = 2: phi = 17 + 14 (t-2) + 3 (t-2)^2
        let m = PolyMap { coeffs: vec![1.0, 2.0, 3.0] };
        let c = m.taylor(2.0, 3);
        assert!((c[0] - 17.0).abs() < 1e-14);
        assert!((c[1] - 14.0).abs() < 1e-14);
        assert!((c[2] - 3.0).abs() < 1e-14);
        assert!(c[3].abs() < 1e-14);
    }
}
