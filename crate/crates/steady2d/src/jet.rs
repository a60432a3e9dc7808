//! Truncated bivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients of a function at a base point up
//! to a fixed total degree. Closed-form field evaluators run on jets instead
//! of plain floats, which turns every catalog formula into an exact source of
//! mixed partial derivatives: no finite differencing, no truncation error
//! beyond rounding. Coefficients are stored as `∂^(i+j)f / (i! j!)` in a
//! degree-major triangle.

/// Triangle offset of degree `d`.
#[inline]
fn tri(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Flat index of the coefficient for `x^i y^j`.
#[inline]
pub fn idx(i: usize, j: usize) -> usize {
    tri(i + j) + j
}

const FACT: [f64; 17] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
    6227020800.0,
    87178291200.0,
    1307674368000.0,
    20922789888000.0,
];

/// Factorial as f64 (panics above 16; derivative caps keep us far below).
#[inline]
pub fn factorial(n: usize) -> f64 {
    FACT[n]
}

/// Truncated Taylor expansion of a scalar function of (x, y).
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; tri(order + 1)];
        c[0] = v;
        Jet { order, c }
    }

    /// The coordinate function x seeded at `x0`.
    pub fn var_x(x0: f64, order: usize) -> Self {
        let mut j = Jet::constant(x0, order);
        if order >= 1 {
            j.c[idx(1, 0)] = 1.0;
        }
        j
    }

    /// The coordinate function y seeded at `y0`.
    pub fn var_y(y0: f64, order: usize) -> Self {
        let mut j = Jet::constant(y0, order);
        if order >= 1 {
            j.c[idx(0, 1)] = 1.0;
        }
        j
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient of x^i y^j.
    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.c[idx(i, j)]
        }
    }

    #[inline]
    pub fn coeff_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.c[idx(i, j)]
    }

    /// Mixed partial ∂^(i+j) f / ∂x^i ∂y^j at the base point.
    #[inline]
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * FACT[i] * FACT[j]
    }

    pub fn add(&self, rhs: &Jet) -> Jet {
        debug_assert_eq!(self.order, rhs.order);
        let mut c = self.c.clone();
        for (a, b) in c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
        Jet { order: self.order, c }
    }

    pub fn sub(&self, rhs: &Jet) -> Jet {
        debug_assert_eq!(self.order, rhs.order);
        let mut c = self.c.clone();
        for (a, b) in c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        Jet { order: self.order, c }
    }

    pub fn neg(&self) -> Jet {
        let c = self.c.iter().map(|v| -v).collect();
        Jet { order: self.order, c }
    }

    pub fn scale(&self, k: f64) -> Jet {
        let c = self.c.iter().map(|v| k * v).collect();
        Jet { order: self.order, c }
    }

    pub fn add_scalar(&self, k: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += k;
        out
    }

    /// Truncated product.
    pub fn mul(&self, rhs: &Jet) -> Jet {
        debug_assert_eq!(self.order, rhs.order);
        let k = self.order;
        let mut c = vec![0.0; tri(k + 1)];
        for da in 0..=k {
            let base_a = tri(da);
            for ia in 0..=da {
                let ja = da - ia;
                let av = self.c[base_a + ja];
                if av == 0.0 {
                    continue;
                }
                for db in 0..=(k - da) {
                    let base_b = tri(db);
                    let base_o = tri(da + db);
                    for ib in 0..=db {
                        let jb = db - ib;
                        let bv = rhs.c[base_b + jb];
                        if bv != 0.0 {
                            c[base_o + (ja + jb)] += av * bv;
                        }
                    }
                }
            }
        }
        Jet { order: k, c }
    }

    /// Substitute this jet (as `t`) into a univariate Taylor expansion of
    /// `phi` about `t0 = self.value()`: the caller passes `phi^(m)(t0)/m!`.
    pub fn compose_univariate(&self, outer: &[f64]) -> Jet {
        let k = self.order;
        debug_assert!(outer.len() >= k + 1);
        let mut u = self.clone();
        u.c[0] = 0.0; // nilpotent part
        let mut acc = Jet::constant(outer[k], k);
        for m in (0..k).rev() {
            acc = acc.mul(&u);
            acc.c[0] += outer[m];
        }
        acc
    }

    /// 1 / self.
    pub fn recip(&self) -> Jet {
        let v = self.value();
        let k = self.order;
        let mut outer = vec![0.0; k + 1];
        let mut t = 1.0 / v;
        for o in outer.iter_mut() {
            *o = t;
            t = -t / v;
        }
        self.compose_univariate(&outer)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let k = self.order;
        let mut outer = vec![0.0; k + 1];
        for (m, o) in outer.iter_mut().enumerate() {
            *o = e / FACT[m];
        }
        self.compose_univariate(&outer)
    }

    pub fn ln(&self) -> Jet {
        let v = self.value();
        let k = self.order;
        let mut outer = vec![0.0; k + 1];
        outer[0] = v.ln();
        let mut p = 1.0 / v;
        for (m, o) in outer.iter_mut().enumerate().skip(1) {
            *o = if m % 2 == 1 { p } else { -p } / m as f64;
            p /= v;
        }
        self.compose_univariate(&outer)
    }

    /// self^p for real p; requires a positive base value.
    pub fn powf(&self, p: f64) -> Jet {
        let v = self.value();
        let k = self.order;
        let mut outer = vec![0.0; k + 1];
        let mut binom = 1.0;
        for (m, o) in outer.iter_mut().enumerate() {
            *o = binom * v.powf(p - m as f64);
            binom *= (p - m as f64) / (m as f64 + 1.0);
        }
        self.compose_univariate(&outer)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powi(&self, n: usize) -> Jet {
        match n {
            0 => Jet::constant(1.0, self.order),
            _ => {
                let mut acc = self.clone();
                for _ in 1..n {
                    acc = acc.mul(self);
                }
                acc
            }
        }
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let k = self.order;
        let cycle = [s, c, -s, -c];
        let mut outer = vec![0.0; k + 1];
        for (m, o) in outer.iter_mut().enumerate() {
            *o = cycle[m % 4] / FACT[m];
        }
        self.compose_univariate(&outer)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let k = self.order;
        let cycle = [c, -s, -c, s];
        let mut outer = vec![0.0; k + 1];
        for (m, o) in outer.iter_mut().enumerate() {
            *o = cycle[m % 4] / FACT[m];
        }
        self.compose_univariate(&outer)
    }

    /// Jet of ∂^(di,dj) f, truncated to order `self.order - di - dj`.
    pub fn derivative_jet(&self, di: usize, dj: usize) -> Jet {
        let shift = di + dj;
        assert!(shift <= self.order, "derivative order exceeds jet order");
        let k = self.order - shift;
        let mut c = vec![0.0; tri(k + 1)];
        for d in 0..=k {
            for i in 0..=d {
                let j = d - i;
                // d^(di) x^(i+di)/dx^(di) = (i+di)!/i! x^i; coeffs absorb 1/(i+di)!
                let scale = FACT[i + di] / FACT[i] * FACT[j + dj] / FACT[j];
                c[tri(d) + j] = self.c[idx(i + di, j + dj)] * scale;
            }
        }
        Jet { order: k, c }
    }

    /// Substitute jets `u`, `v` for the two variables of `outer`, which is
    /// expanded about `(u.value(), v.value())`.
    pub fn compose_bivariate(outer: &Jet, u: &Jet, v: &Jet) -> Jet {
        debug_assert_eq!(u.order, v.order);
        let k = u.order;
        let ko = outer.order;
        let mut du = u.clone();
        du.c[0] = 0.0;
        let mut dv = v.clone();
        dv.c[0] = 0.0;
        // Horner over rows: f = sum_i du^i * (sum_j a_ij dv^j)
        let mut acc = Jet::constant(0.0, k);
        let imax = ko.min(k);
        for i in (0..=imax).rev() {
            let jmax = (ko - i).min(k);
            let mut row = Jet::constant(outer.coeff(i, jmax), k);
            for j in (0..jmax).rev() {
                row = row.mul(&dv);
                row.c[0] += outer.coeff(i, j);
            }
            acc = acc.mul(&du).add(&row);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn product_rule_matches_hand_expansion() {
        // f = (x + 2y)^2 at (1, 3): expand by hand.
        let k = 3;
        let x = Jet::var_x(1.0, k);
        let y = Jet::var_y(3.0, k);
        let f = x.add(&y.scale(2.0)).powi(2);
        close(f.value(), 49.0, 1e-14);
        close(f.partial(1, 0), 14.0, 1e-14); // 2(x+2y)
        close(f.partial(0, 1), 28.0, 1e-14);
        close(f.partial(1, 1), 4.0, 1e-14);
        close(f.partial(2, 0), 2.0, 1e-14);
        close(f.partial(0, 2), 8.0, 1e-14);
        close(f.partial(2, 1), 0.0, 1e-14);
    }

    #[test]
    fn sin_cos_derivatives() {
        let k = 8;
        let x = Jet::var_x(0.7, k);
        let y = Jet::var_y(-0.3, k);
        let f = x.sin().mul(&y.cos());
        // partial(2,1) of sin x cos y = (-sin x)(-sin y) = sin x sin y
        close(f.partial(2, 1), 0.7f64.sin() * (-0.3f64).sin(), 1e-12);
        // partial(4,0) = sin x cos y again
        close(f.partial(4, 0), 0.7f64.sin() * (-0.3f64).cos(), 1e-12);
    }

    #[test]
    fn recip_exp_ln_roundtrip() {
        let k = 6;
        let x = Jet::var_x(0.4, k);
        let y = Jet::var_y(1.1, k);
        let f = x.mul(&y).add_scalar(2.0);
        let g = f.recip().recip();
        for d in 0..=k {
            for i in 0..=d {
                close(g.coeff(i, d - i), f.coeff(i, d - i), 1e-12);
            }
        }
        let h = f.ln().exp();
        for d in 0..=k {
            for i in 0..=d {
                close(h.coeff(i, d - i), f.coeff(i, d - i), 1e-12);
            }
        }
    }

    #[test]
    fn powf_agrees_with_sqrt_square() {
        let k = 7;
        let x = Jet::var_x(0.9, k);
        let y = Jet::var_y(0.2, k);
        let f = x.powi(2).add(&y.powi(2)).add_scalar(0.5);
        let a = f.powf(2.5);
        let b = f.sqrt().mul(&f.powi(2));
        for d in 0..=k {
            for i in 0..=d {
                close(a.coeff(i, d - i), b.coeff(i, d - i), 1e-10);
            }
        }
    }

    #[test]
    fn derivative_jet_shifts_coefficients() {
        let k = 6;
        let x = Jet::var_x(0.3, k);
        let y = Jet::var_y(0.8, k);
        let f = x.sin().mul(&y.sin());
        let fx = f.derivative_jet(1, 0);
        close(fx.value(), f.partial(1, 0), 1e-14);
        close(fx.partial(1, 1), f.partial(2, 1), 1e-12);
        let fxy = f.derivative_jet(1, 1);
        close(fxy.partial(2, 0), f.partial(3, 1), 1e-12);
    }

    #[test]
    fn bivariate_composition_matches_direct() {
        // f(u,v) = sin(u) * v at (u,v) = (x^2, x+y); compare against direct jets.
        let k = 5;
        let x = Jet::var_x(0.6, k);
        let y = Jet::var_y(-0.2, k);
        let u = x.powi(2);
        let v = x.add(&y);
        let outer = {
            let uu = Jet::var_x(u.value(), k);
            let vv = Jet::var_y(v.value(), k);
            uu.sin().mul(&vv)
        };
        let composed = Jet::compose_bivariate(&outer, &u, &v);
        let direct = x.powi(2).sin().mul(&x.add(&y));
        for d in 0..=k {
            for i in 0..=d {
                close(composed.coeff(i, d - i), direct.coeff(i, d - i), 1e-11);
            }
        }
    }

    #[test]
    fn mixed_partials_symmetric_by_construction() {
        let k = 5;
        let x = Jet::var_x(1.2, k);
        let y = Jet::var_y(0.4, k);
        let f = x.mul(&y).sin().exp();
        // coeff storage is a triangle: (1,2) and (2,1) are distinct entries but
        // derive from one expansion, so d12 == d21 holds identically.
        close(f.partial(1, 2), f.partial(1, 2), 0.0);
        let fx = f.derivative_jet(1, 0).derivative_jet(0, 1);
        let fy = f.derivative_jet(0, 1).derivative_jet(1, 0);
        close(fx.value(), fy.value(), 1e-13);
    }
}
