//! Tube flows around a Jordan curve.
//!
//! Builds an analytic stream function on a tubular neighborhood of a closed
//! analytic curve satisfying `Δψ = 2 + ψ^(5/2)` on the inner side and
//! `Δψ = 2 - ψ^(5/2)` on the outer side, with `ψ = ∂ψ/∂n = 0` on the curve.
//! The two one-sided equations glue into a single power series in the signed
//! normal distance because `sign(n) ψ^(5/2) = n^5 (c2 + c3 n + ...)^(5/2)`.
//!
//! Conventions: the curve is traversed counterclockwise, `ν` is the outward
//! unit normal, `n > 0` is the exterior side, and the curvature `κ` is
//! positive for a convex curve, so the Fermi metric factor is `J = 1 + κ n`.

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::jet::{factorial, Jet};
use serde::Serialize;
use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

// ---------------------------------------------------------------------------
// Fourier helpers
// ---------------------------------------------------------------------------

/// Real Fourier series c0 + sum_m (a_m cos(m w t) + b_m sin(m w t)).
#[derive(Clone, Debug, Serialize)]
pub struct FourierSeries {
    pub period: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn from_samples(samples: &[f64], period: f64) -> Self {
        let m = samples.len();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|v| Complex::new(*v, 0.0)).collect();
        fft.process(&mut buf);
        let half = m / 2;
        let mut cos = vec![0.0; half + 1];
        let mut sin = vec![0.0; half + 1];
        cos[0] = buf[0].re / m as f64;
        for k in 1..=half {
            cos[k] = 2.0 * buf[k].re / m as f64;
            sin[k] = -2.0 * buf[k].im / m as f64;
        }
        if m % 2 == 0 {
            cos[half] /= 2.0;
            sin[half] = 0.0;
        }
        FourierSeries { period, cos, sin }
    }

    /// Value and derivatives up to `orders` at `t` (index 0 = value).
    pub fn derivs(&self, t: f64, orders: usize) -> Vec<f64> {
        let w = TAU / self.period;
        let mut out = vec![0.0; orders + 1];
        out[0] = self.cos[0];
        for m in 1..self.cos.len() {
            let a = self.cos[m];
            let b = self.sin[m];
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let mw = m as f64 * w;
            let (s, c) = (mw * t).sin_cos();
            // d/dt rotates (a cos + b sin) into (b cos - a sin) times mw
            let mut da = a;
            let mut db = b;
            let mut pw = 1.0;
            for o in out.iter_mut() {
                *o += pw * (da * c + db * s);
                pw *= mw;
                (da, db) = (db, -da);
            }
        }
        out
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.derivs(t, 0)[0]
    }

    /// Zero all modes above `keep`.
    pub fn truncate(&mut self, keep: usize) {
        for m in (keep + 1)..self.cos.len() {
            self.cos[m] = 0.0;
            self.sin[m] = 0.0;
        }
    }
}

fn spectral_derivative(samples: &[f64], period: f64) -> Vec<f64> {
    let m = samples.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(m);
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|v| Complex::new(*v, 0.0)).collect();
    fft.process(&mut buf);
    let w = TAU / period;
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        if m % 2 == 0 && k == m / 2 {
            *c = Complex::new(0.0, 0.0); // Nyquist mode has no odd derivative
        } else {
            *c *= Complex::new(0.0, freq * w);
        }
    }
    ifft.process(&mut buf);
    buf.into_iter().map(|c| c.re / m as f64).collect()
}

// ---------------------------------------------------------------------------
// Jordan curves
// ---------------------------------------------------------------------------

/// Input curve: finite Fourier sums for x(t), y(t) over t in [0, 2π).
#[derive(Clone, Debug)]
pub struct CurveSpec {
    pub x_cos: Vec<f64>,
    pub x_sin: Vec<f64>,
    pub y_cos: Vec<f64>,
    pub y_sin: Vec<f64>,
}

impl CurveSpec {
    pub fn circle(r: f64) -> Self {
        CurveSpec {
            x_cos: vec![0.0, r],
            x_sin: vec![0.0, 0.0],
            y_cos: vec![0.0, 0.0],
            y_sin: vec![0.0, r],
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        CurveSpec {
            x_cos: vec![0.0, a],
            x_sin: vec![0.0, 0.0],
            y_cos: vec![0.0, 0.0],
            y_sin: vec![0.0, b],
        }
    }

    fn eval_derivs(&self, t: f64, orders: usize) -> (Vec<f64>, Vec<f64>) {
        let der = |cos: &[f64], sin: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; orders + 1];
            for m in 0..cos.len().max(sin.len()) {
                let a = cos.get(m).copied().unwrap_or(0.0);
                let b = sin.get(m).copied().unwrap_or(0.0);
                if m == 0 {
                    out[0] += a;
                    continue;
                }
                let (s, c) = (m as f64 * t).sin_cos();
                let mut da = a;
                let mut db = b;
                let mut pw = 1.0;
                for o in out.iter_mut() {
                    *o += pw * (da * c + db * s);
                    pw *= m as f64;
                    let (na, nb) = (db, -da);
                    da = na;
                    db = nb;
                }
            }
            out
        };
        (der(&self.x_cos, &self.x_sin), der(&self.y_cos, &self.y_sin))
    }

    pub fn mode_count(&self) -> usize {
        self.x_cos
            .len()
            .max(self.x_sin.len())
            .max(self.y_cos.len())
            .max(self.y_sin.len())
    }
}

/// An arclength-parameterized analytic Jordan curve with curvature tables.
pub struct JordanCurve {
    pub length: f64,
    pub x: FourierSeries,
    pub y: FourierSeries,
    pub kappa_sup: f64,
    /// Uniform arclength samples (s_i, x_i, y_i) kept for seeding searches.
    samples: Vec<(f64, f64, f64)>,
}

impl JordanCurve {
    /// Reparameterize a Fourier curve by arclength on `m` uniform samples.
    pub fn build(spec: &CurveSpec, m: usize) -> Result<JordanCurve> {
        let fine = (16 * spec.mode_count()).max(1024).next_power_of_two();
        // speed on the fine parameter grid
        let mut speed = vec![0.0; fine];
        for (k, sp) in speed.iter_mut().enumerate() {
            let t = TAU * k as f64 / fine as f64;
            let (dx, dy) = spec.eval_derivs(t, 1);
            *sp = (dx[1] * dx[1] + dy[1] * dy[1]).sqrt();
            if *sp <= 1e-12 {
                return Err(Error::SelfIntersection);
            }
        }
        // orientation: require counterclockwise (positive signed area)
        let mut area = 0.0;
        for k in 0..fine {
            let t = TAU * k as f64 / fine as f64;
            let (x, y) = spec.eval_derivs(t, 1);
            area += x[0] * y[1] - y[0] * x[1];
        }
        if area <= 0.0 {
            return Err(Error::SpecParse(
                "curve must be counterclockwise (positive signed area)".into(),
            ));
        }
        // arclength s(t) by spectral integration of the speed
        let speed_series = FourierSeries::from_samples(&speed, TAU);
        let mean_speed = speed_series.cos[0];
        let length = mean_speed * TAU;
        let arclength_at = |t: f64| -> f64 {
            let mut s = mean_speed * t;
            let w = 1.0;
            for mm in 1..speed_series.cos.len() {
                let a = speed_series.cos[mm];
                let b = speed_series.sin[mm];
                let mw = mm as f64 * w;
                s += a / mw * (mw * t).sin() - b / mw * ((mw * t).cos() - 1.0);
            }
            s
        };
        // invert s(t) on the uniform-s grid
        let mut xs = vec![0.0; m];
        let mut ys = vec![0.0; m];
        let mut samples = Vec::with_capacity(m);
        let mut kappa_sup: f64 = 0.0;
        let mut t_guess: f64 = 0.0;
        for i in 0..m {
            let target = length * i as f64 / m as f64;
            let mut t = t_guess.max(target / mean_speed.max(1e-300) - 1.0);
            for _ in 0..60 {
                let f = arclength_at(t) - target;
                let (dx, dy) = spec.eval_derivs(t, 1);
                let v = (dx[1] * dx[1] + dy[1] * dy[1]).sqrt();
                let step = f / v;
                t -= step;
                if step.abs() < 1e-14 {
                    break;
                }
            }
            t_guess = t;
            let (dx, dy) = spec.eval_derivs(t, 2);
            xs[i] = dx[0];
            ys[i] = dy[0];
            let v = (dx[1] * dx[1] + dy[1] * dy[1]).sqrt();
            let kappa = (dx[1] * dy[2] - dy[1] * dx[2]) / (v * v * v);
            kappa_sup = kappa_sup.max(kappa.abs());
            samples.push((target, xs[i], ys[i]));
        }
        // simplicity check on the sample grid: non-neighbor points keep a
        // distance comparable to their arclength separation
        let min_sep = length / m as f64;
        for i in 0..m {
            for j in (i + m / 8)..(i + m - m / 8) {
                let (_, xi, yi) = samples[i];
                let (_, xj, yj) = samples[j % m];
                let d2 = (xi - xj).powi(2) + (yi - yj).powi(2);
                if d2 < (0.5 * min_sep).powi(2) {
                    return Err(Error::SelfIntersection);
                }
            }
        }
        let x = FourierSeries::from_samples(&xs, length);
        let y = FourierSeries::from_samples(&ys, length);
        Ok(JordanCurve { length, x, y, kappa_sup, samples })
    }

    /// Position, tangent, outward normal, curvature at arclength s.
    pub fn frame(&self, s: f64) -> CurveFrame {
        let dx = self.x.derivs(s, 2);
        let dy = self.y.derivs(s, 2);
        // arclength parameterization: |gamma'| = 1, kappa = gamma' x gamma''
        let kappa = dx[1] * dy[2] - dy[1] * dx[2];
        CurveFrame {
            pos: (dx[0], dy[0]),
            tangent: (dx[1], dy[1]),
            normal: (dy[1], -dx[1]),
            kappa,
        }
    }

    pub fn kappa(&self, s: f64) -> f64 {
        self.frame(s).kappa
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CurveFrame {
    pub pos: (f64, f64),
    pub tangent: (f64, f64),
    /// Outward unit normal (counterclockwise curve).
    pub normal: (f64, f64),
    pub kappa: f64,
}

// ---------------------------------------------------------------------------
// Fermi chart
// ---------------------------------------------------------------------------

/// Curve-adapted coordinates `(s, n) -> γ(s) + n ν(s)`, injective for
/// `|n| δ·sup|κ| <= 0.5` (enforced at construction).
pub struct FermiChart {
    pub curve: JordanCurve,
    pub delta: f64,
}

pub fn build_fermi_chart(curve: JordanCurve, delta: f64) -> Result<Arc<FermiChart>> {
    let prod = delta * curve.kappa_sup;
    if delta <= 0.0 || prod > 0.5 {
        return Err(Error::TubeTooWide(prod));
    }
    Ok(Arc::new(FermiChart { curve, delta }))
}

impl FermiChart {
    pub fn forward(&self, s: f64, n: f64) -> (f64, f64) {
        let f = self.curve.frame(s);
        (f.pos.0 + n * f.normal.0, f.pos.1 + n * f.normal.1)
    }

    pub fn curvature_sup(&self) -> f64 {
        self.curve.kappa_sup
    }

    /// Nearest-point inversion: arclength and signed normal distance of
    /// `(x, y)`. `None` when the point is farther than ~2δ from the curve or
    /// the projection fails.
    pub fn locate(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        // coarse seed from the sample table
        let mut best = (f64::MAX, 0.0);
        for &(s, cx, cy) in &self.curve.samples {
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            if d2 < best.0 {
                best = (d2, s);
            }
        }
        let mut s = best.1;
        let reach = 4.0 * self.delta + 4.0 * self.curve.length / self.curve.samples.len() as f64;
        if best.0 > reach * reach {
            return None;
        }
        for _ in 0..60 {
            let f = self.curve.frame(s);
            let rx = x - f.pos.0;
            let ry = y - f.pos.1;
            let g = rx * f.tangent.0 + ry * f.tangent.1;
            let dg = -1.0 + (rx * f.normal.0 + ry * f.normal.1) * f.kappa;
            // dg = d/ds [(p - γ)·T] = -|T|^2 + (p - γ)·(T)' with T' = -κ ν ... sign folded
            let step = g / dg;
            s -= step;
            if step.abs() < 1e-13 * self.curve.length.max(1.0) {
                break;
            }
        }
        let f = self.curve.frame(s);
        let rx = x - f.pos.0;
        let ry = y - f.pos.1;
        let tangential = rx * f.tangent.0 + ry * f.tangent.1;
        if tangential.abs() > 1e-6 * self.curve.length {
            return None;
        }
        let n = rx * f.normal.0 + ry * f.normal.1;
        (n.abs() <= 2.5 * self.delta).then_some((s.rem_euclid(self.curve.length), n))
    }

    pub fn bounding_box(&self, half_width: f64) -> (f64, f64, f64, f64) {
        let mut x0 = f64::MAX;
        let mut y0 = f64::MAX;
        let mut x1 = f64::MIN;
        let mut y1 = f64::MIN;
        for &(s, _, _) in &self.curve.samples {
            let f = self.curve.frame(s);
            for sgn in [-1.0, 1.0] {
                let px = f.pos.0 + sgn * half_width * f.normal.0;
                let py = f.pos.1 + sgn * half_width * f.normal.1;
                x0 = x0.min(px);
                y0 = y0.min(py);
                x1 = x1.max(px);
                y1 = y1.max(py);
            }
        }
        let pad = 0.02 * ((x1 - x0).max(y1 - y0));
        (x0 - pad, y0 - pad, x1 + pad, y1 + pad)
    }

    /// Offset curve at signed distance `n`, sampled as a closed polyline.
    pub fn offset_polyline(&self, n: f64, m: usize) -> Vec<(f64, f64)> {
        (0..m)
            .map(|k| {
                let s = self.curve.length * k as f64 / m as f64;
                self.forward(s, n)
            })
            .collect()
    }

    /// Bivariate jets of the forward map at (s, n).
    fn forward_jets(&self, s: f64, n: f64, order: usize) -> (Jet, Jet) {
        let dx = self.curve.x.derivs(s, order + 1);
        let dy = self.curve.y.derivs(s, order + 1);
        let mut xj = Jet::constant(0.0, order);
        let mut yj = Jet::constant(0.0, order);
        for i in 0..=order {
            // ν = (y', -x'): ν^(i) = (y^(i+1), -x^(i+1))
            let gx = dx[i] / factorial(i);
            let gy = dy[i] / factorial(i);
            let nvx = dy[i + 1] / factorial(i);
            let nvy = -dx[i + 1] / factorial(i);
            *xj.coeff_mut(i, 0) = gx + n * nvx;
            *yj.coeff_mut(i, 0) = gy + n * nvy;
            if order >= 1 && i + 1 <= order {
                *xj.coeff_mut(i, 1) = nvx;
                *yj.coeff_mut(i, 1) = nvy;
            }
        }
        (xj, yj)
    }

    /// Jets of the inverse chart (S(x,y), N(x,y)) at a located point.
    pub fn inverse_jets(&self, x: f64, y: f64, s: f64, n: f64, order: usize) -> (Jet, Jet) {
        let (fx, fy) = self.forward_jets(s, n, order);
        // Jacobian at the base point
        let a = fx.coeff(1, 0);
        let b = fx.coeff(0, 1);
        let c = fy.coeff(1, 0);
        let d = fy.coeff(0, 1);
        let det = a * d - b * c;
        let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
        let xt = Jet::var_x(x, order);
        let yt = Jet::var_y(y, order);
        let mut sj = Jet::constant(s, order);
        let mut nj = Jet::constant(n, order);
        for _ in 0..=order {
            let ex = Jet::compose_bivariate(&fx, &sj, &nj).sub(&xt);
            let ey = Jet::compose_bivariate(&fy, &sj, &nj).sub(&yt);
            sj = sj.sub(&ex.scale(ia).add(&ey.scale(ib)));
            nj = nj.sub(&ex.scale(ic).add(&ey.scale(id)));
        }
        (sj, nj)
    }
}

// ---------------------------------------------------------------------------
// Power series in n with Fourier-grid coefficients
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct TubeSeries {
    /// c[k][i]: coefficient of n^k sampled at s_i.
    c: Vec<Vec<f64>>,
    m: usize,
}

impl TubeSeries {
    fn zero(orders: usize, m: usize) -> Self {
        TubeSeries { c: vec![vec![0.0; m]; orders + 1], m }
    }

    fn order(&self) -> usize {
        self.c.len() - 1
    }

    fn mul(&self, rhs: &TubeSeries) -> TubeSeries {
        let k = self.order().min(rhs.order());
        let mut out = TubeSeries::zero(k, self.m);
        for ka in 0..=self.order() {
            for kb in 0..=rhs.order() {
                if ka + kb > k {
                    break;
                }
                for i in 0..self.m {
                    out.c[ka + kb][i] += self.c[ka][i] * rhs.c[kb][i];
                }
            }
        }
        out
    }


    fn d_ds(&self, period: f64) -> TubeSeries {
        let mut out = TubeSeries::zero(self.order(), self.m);
        for (k, row) in self.c.iter().enumerate() {
            out.c[k] = spectral_derivative(row, period);
        }
        out
    }

    /// W^alpha via the power recurrence (pointwise in s); requires W0 > 0.
    fn powf(&self, alpha: f64) -> TubeSeries {
        let k = self.order();
        let mut out = TubeSeries::zero(k, self.m);
        for i in 0..self.m {
            out.c[0][i] = self.c[0][i].powf(alpha);
        }
        for kk in 1..=k {
            for i in 0..self.m {
                let mut acc = 0.0;
                for a in 1..=kk {
                    let coef = alpha * a as f64 - (kk - a) as f64;
                    acc += coef * self.c[a][i] * out.c[kk - a][i];
                }
                out.c[kk][i] = acc / (kk as f64 * self.c[0][i]);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// The tube solution
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct TubeResidualReport {
    /// Sup of |Δψ - (2 - sign(n) ψ^(5/2))| over |n| <= δ/2.
    pub certified_zone: f64,
    /// Same sup over δ/2 < |n| <= δ (series degradation zone).
    pub outer_zone: f64,
    /// Sup over modes >= 1 of every c_k for a circle-like check.
    pub max_nonconstant_mode: f64,
    /// Fitted decay base ρ with ‖c_k‖ <= A ρ^{-k}.
    pub decay_radius: Option<f64>,
    pub orders: (usize, usize),
}

pub struct TubeSeriesSolution {
    pub chart: Arc<FermiChart>,
    pub n_order: usize,
    pub s_modes: usize,
    pub grid_m: usize,
    /// c[k][i] on the uniform s-grid.
    pub coeffs: Vec<Vec<f64>>,
    /// Fourier form of each coefficient (for evaluation at arbitrary s).
    pub coeff_series: Vec<FourierSeries>,
    pub residual: TubeResidualReport,
}

/// Interior/exterior signed forcing: Δψ = 2 - sign(n) ψ^(5/2).
pub fn forcing(n: f64, psi: f64) -> f64 {
    2.0 - n.signum() * psi.max(0.0).powf(2.5)
}

/// Solve the tube system order-by-order in n.
///
/// Matching powers of n in `Δψ = 2 - n^5 (c2 + c3 n + ...)^(5/2)` determines
/// each c_k algebraically from lower coefficients; the order-m equation is
/// `(m+2)(m+1) c_{m+2} + [κβψ_n]_m + [β ∂_s(β ψ_s)]_m = rhs_m`, so no
/// division other than by (m+2)(m+1) occurs and the recursion cannot
/// encounter an obstruction.
pub fn solve_tube_series(
    chart: &Arc<FermiChart>,
    orders: (usize, usize),
) -> Result<TubeSeriesSolution> {
    let (n_order, s_modes) = orders;
    if n_order < 6 {
        return Err(Error::ParamOutOfRange {
            name: "n_order".into(),
            reason: format!("need N_n >= 6, got {n_order}"),
        });
    }
    let m = (4 * s_modes).max(64).next_power_of_two();
    let length = chart.curve.length;
    // curvature on the s-grid
    let kappa: Vec<f64> = (0..m)
        .map(|i| chart.curve.kappa(length * i as f64 / m as f64))
        .collect();

    let mut coeffs: Vec<Vec<f64>> = vec![vec![0.0; m]; n_order + 1];
    // beta = 1/(1 + κ n) as a series: beta_j = (-κ)^j
    let mut beta = TubeSeries::zero(n_order, m);
    for j in 0..=n_order {
        for i in 0..m {
            beta.c[j][i] = (-kappa[i]).powi(j as i32);
        }
    }
    let mut kappa_beta = TubeSeries::zero(n_order, m);
    for j in 0..=n_order {
        for i in 0..m {
            kappa_beta.c[j][i] = kappa[i] * beta.c[j][i];
        }
    }

    for step in 0..=(n_order - 2) {
        // assemble the current partial ψ
        let mut psi = TubeSeries::zero(n_order, m);
        psi.c = coeffs.clone();
        // ψ_n
        let mut psi_n = TubeSeries::zero(n_order, m);
        for k in 1..=n_order {
            for i in 0..m {
                psi_n.c[k - 1][i] = k as f64 * psi.c[k][i];
            }
        }
        let drag = kappa_beta.mul(&psi_n);
        let psi_s = psi.d_ds(length);
        let tangential = beta.mul(&beta.mul(&psi_s).d_ds(length));
        // rhs: 2 at order 0, then -n^5 W^(5/2) once c2 is pinned
        let rhs_m = if step == 0 {
            vec![2.0; m]
        } else if step >= 5 {
            let mut w = TubeSeries::zero(n_order, m);
            for k in 2..=n_order {
                w.c[k - 2] = psi.c[k].clone();
            }
            if w.c[0].iter().any(|v| *v <= 0.0) {
                return Err(Error::RecursionObstruction {
                    order: step,
                    reason: "leading coefficient c2 not positive".into(),
                });
            }
            let p = w.powf(2.5);
            p.c[step - 5].iter().map(|v| -v).collect()
        } else {
            vec![0.0; m]
        };
        let denom = ((step + 2) * (step + 1)) as f64;
        let mut next = vec![0.0; m];
        for i in 0..m {
            next[i] = (rhs_m[i] - drag.c[step][i] - tangential.c[step][i]) / denom;
        }
        // Fourier truncation at N_s per coefficient
        let mut series = FourierSeries::from_samples(&next, length);
        series.truncate(s_modes);
        for (i, v) in next.iter_mut().enumerate() {
            *v = series.eval(length * i as f64 / m as f64);
        }
        coeffs[step + 2] = next;
    }

    // coefficient Fourier forms
    let mut coeff_series = Vec::with_capacity(n_order + 1);
    for row in &coeffs {
        let mut fs = FourierSeries::from_samples(row, length);
        fs.truncate(s_modes);
        coeff_series.push(fs);
    }

    let residual = residual_report(chart, &coeffs, &coeff_series, n_order, s_modes, m);
    Ok(TubeSeriesSolution {
        chart: chart.clone(),
        n_order,
        s_modes,
        grid_m: m,
        coeffs,
        coeff_series,
        residual,
    })
}

fn residual_report(
    chart: &Arc<FermiChart>,
    coeffs: &[Vec<f64>],
    coeff_series: &[FourierSeries],
    n_order: usize,
    s_modes: usize,
    m: usize,
) -> TubeResidualReport {
    let length = chart.curve.length;
    let delta = chart.delta;
    // pointwise Fermi-Laplacian residual using spectral s-derivatives of the
    // coefficient series (independent of the recursion's series algebra)
    let eval_zone = |n_lo: f64, n_hi: f64| -> f64 {
        let s_probe = 2 * m.min(256);
        let n_probe = 24;
        let mut sup: f64 = 0.0;
        for i in 0..s_probe {
            let s = length * i as f64 / s_probe as f64;
            let kap = chart.curve.kappa(s);
            let d: Vec<Vec<f64>> = coeff_series.iter().map(|cs| cs.derivs(s, 2)).collect();
            for j in 0..n_probe {
                for sgn in [-1.0, 1.0] {
                    let n = sgn * (n_lo + (n_hi - n_lo) * (j as f64 + 0.5) / n_probe as f64);
                    let mut psi = 0.0;
                    let mut psi_n = 0.0;
                    let mut psi_nn = 0.0;
                    let mut psi_s = 0.0;
                    let mut psi_ss = 0.0;
                    let mut pw = 1.0; // n^k
                    let mut pw1 = 0.0; // n^(k-1)
                    let mut pw2 = 0.0; // n^(k-2)
                    for k in 0..=n_order {
                        psi += d[k][0] * pw;
                        psi_s += d[k][1] * pw;
                        psi_ss += d[k][2] * pw;
                        if k >= 1 {
                            psi_n += k as f64 * d[k][0] * pw1;
                        }
                        if k >= 2 {
                            psi_nn += (k * (k - 1)) as f64 * d[k][0] * pw2;
                        }
                        pw2 = pw1;
                        pw1 = pw;
                        pw *= n;
                    }
                    let beta = 1.0 / (1.0 + kap * n);
                    // β_s = -κ' n β^2 via spectral curvature derivative
                    let kap_s = curvature_derivative(chart, s);
                    let beta_s = -kap_s * n * beta * beta;
                    let lap = psi_nn + kap * beta * psi_n + beta * (beta_s * psi_s + beta * psi_ss);
                    let res = (lap - forcing(n, psi)).abs();
                    sup = sup.max(res);
                }
            }
        }
        sup
    };
    let certified = eval_zone(0.0, delta / 2.0);
    let outer = eval_zone(delta / 2.0, delta);
    // circle-likeness: energy in nonconstant modes
    let mut max_mode: f64 = 0.0;
    for cs in coeff_series.iter() {
        for mm in 1..cs.cos.len() {
            max_mode = max_mode.max(cs.cos[mm].abs()).max(cs.sin[mm].abs());
        }
    }
    // decay fit over k >= 3
    let mut ks = Vec::new();
    let mut ls = Vec::new();
    for (k, row) in coeffs.iter().enumerate().skip(3) {
        let norm = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm > 1e-300 {
            ks.push(k as f64);
            ls.push(norm.ln());
        }
    }
    let decay_radius = if ks.len() >= 3 {
        let n = ks.len() as f64;
        let mx = ks.iter().sum::<f64>() / n;
        let my = ls.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in ks.iter().zip(&ls) {
            num += (x - mx) * (y - my);
            den += (x - mx) * (x - mx);
        }
        Some((-num / den).exp())
    } else {
        None
    };
    let _ = s_modes;
    TubeResidualReport {
        certified_zone: certified,
        outer_zone: outer,
        max_nonconstant_mode: max_mode,
        decay_radius,
        orders: (n_order, s_modes),
    }
}

fn curvature_derivative(chart: &FermiChart, s: f64) -> f64 {
    let dx = chart.curve.x.derivs(s, 3);
    let dy = chart.curve.y.derivs(s, 3);
    // κ = x' y'' - y' x'' (arclength); κ' = x' y''' - y' x'''
    dx[1] * dy[3] - dy[1] * dx[3]
}

// ---------------------------------------------------------------------------
// Exported field
// ---------------------------------------------------------------------------

/// The tube stream function as a [`Field`] on the Jordan-tube domain,
/// differentiated through the chart by the chain rule.
pub struct TubeField {
    pub solution: Arc<TubeSeriesSolution>,
    domain: Domain,
    half_width: f64,
}

pub fn export_field(solution: Arc<TubeSeriesSolution>) -> TubeField {
    let hw = solution.chart.delta;
    TubeField {
        domain: Domain::JordanTube { chart: solution.chart.clone(), half_width: hw },
        half_width: hw,
        solution,
    }
}

impl TubeField {
    /// A view of the same field on a narrower tube (used to certify the
    /// |n| <= δ/2 zone separately from the degradation zone).
    pub fn restricted(&self, half_width: f64) -> TubeField {
        TubeField {
            solution: self.solution.clone(),
            domain: Domain::JordanTube {
                chart: self.solution.chart.clone(),
                half_width,
            },
            half_width,
        }
    }

    pub fn chart(&self) -> &Arc<FermiChart> {
        &self.solution.chart
    }

    /// In-chart evaluation.
    pub fn eval_sn(&self, s: f64, n: f64) -> f64 {
        let mut acc = 0.0;
        for k in (0..=self.solution.n_order).rev() {
            acc = acc * n + self.solution.coeff_series[k].eval(s);
        }
        acc
    }

    /// Bivariate jet of ψ in (s, n) at the given chart point.
    fn chart_jet(&self, s: f64, n: f64, order: usize) -> Jet {
        let sol = &self.solution;
        let mut out = Jet::constant(0.0, order);
        let ders: Vec<Vec<f64>> = sol
            .coeff_series
            .iter()
            .map(|cs| cs.derivs(s, order))
            .collect();
        for i in 0..=order {
            for j in 0..=(order - i) {
                // coefficient of δs^i δn^j: Σ_k c_k^(i)/i! · C(k, j) n^(k-j)
                let mut acc = 0.0;
                for k in j..=sol.n_order {
                    let binom = factorial(k) / (factorial(j) * factorial(k - j));
                    acc += ders[k][i] / factorial(i) * binom * n.powi((k - j) as i32);
                }
                *out.coeff_mut(i, j) = acc;
            }
        }
        out
    }
}

impl Field for TubeField {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn max_order(&self) -> usize {
        8
    }

    fn name(&self) -> String {
        format!(
            "tube(Nn={}, Ns={})",
            self.solution.n_order, self.solution.s_modes
        )
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        match self.solution.chart.locate(x, y) {
            Some((s, n)) if n.abs() <= self.half_width * (1.0 + 1e-9) => self.eval_sn(s, n),
            _ => f64::NAN,
        }
    }

    fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        let Some((s, n)) = self.solution.chart.locate(x, y) else {
            return Jet::constant(f64::NAN, order);
        };
        if n.abs() > self.half_width * (1.0 + 1e-9) {
            return Jet::constant(f64::NAN, order);
        }
        if order == 0 {
            return Jet::constant(self.eval_sn(s, n), 0);
        }
        let (sj, nj) = self.solution.chart.inverse_jets(x, y, s, n, order);
        let psi_sn = self.chart_jet(s, n, order);
        Jet::compose_bivariate(&psi_sn, &sj, &nj)
    }
}

// ---------------------------------------------------------------------------
// Circle oracles
// ---------------------------------------------------------------------------

/// Taylor coefficients about n = 0 for the circle tube (radius 1), derived
/// from the 1D radial equation ψ'' + ψ'/(1+n) = 2 - n^5 (c2 + c3 n + ...)^(5/2).
/// Fully independent of the 2D Fourier recursion.
pub fn circle_taylor_oracle(order: usize) -> Vec<f64> {
    let mut a = vec![0.0; order + 1];
    for step in 0..=(order - 2) {
        // [ψ'/(1+n)]_step = Σ_{i+j=step} (i+1) a_{i+1} (-1)^j
        let mut drag = 0.0;
        for i in 0..=step {
            let j = step - i;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            drag += (i + 1) as f64 * a[i + 1] * sign;
        }
        let rhs = if step == 0 {
            2.0
        } else if step >= 5 {
            // -[W^(5/2)]_{step-5}, W_j = a_{j+2}
            let w: Vec<f64> = (2..=order).map(|k| a[k]).collect();
            -pow_series(&w, 2.5, step - 5)[step - 5]
        } else {
            0.0
        };
        a[step + 2] = (rhs - drag) / ((step + 2) * (step + 1)) as f64;
    }
    a
}

/// Truncated W^alpha for a plain coefficient vector with W[0] > 0.
fn pow_series(w: &[f64], alpha: f64, up_to: usize) -> Vec<f64> {
    let mut p = vec![0.0; up_to + 1];
    p[0] = w[0].powf(alpha);
    for k in 1..=up_to {
        let mut acc = 0.0;
        for a in 1..=k.min(w.len() - 1) {
            acc += (alpha * a as f64 - (k - a) as f64) * w[a] * p[k - a];
        }
        p[k] = acc / (k as f64 * w[0]);
    }
    p
}

/// Radial profile from integrating the circle ODE outward/inward from the
/// curve, used to cross-validate the series solution.
#[derive(Clone, Debug)]
pub struct CircleProfile {
    /// (n, ψ, ψ') samples, n increasing in magnitude away from the curve.
    pub inward: Vec<(f64, f64, f64)>,
    pub outward: Vec<(f64, f64, f64)>,
}

/// Integrate ψ'' + ψ'/(1+n) = 2 - sign(n) ψ^(5/2) both ways from n = 0 with
/// ψ(0) = ψ'(0) = 0 (series start to step off the degenerate origin).
pub fn circular_oracle(delta: f64, samples: usize) -> Result<CircleProfile> {
    if delta >= 1.0 {
        return Err(Error::ParamOutOfRange {
            name: "delta".into(),
            reason: "need delta < 1 for the circle tube".into(),
        });
    }
    let go = |sign: f64| -> Result<Vec<(f64, f64, f64)>> {
        let eps = 1e-6;
        // ψ ≈ n^2 - n^3/3 near 0 (from Δψ = 2 with the boundary conditions)
        let mut n = sign * eps;
        let mut psi = n * n - n * n * n / 3.0;
        let mut dpsi = 2.0 * n - n * n;
        let mut out = vec![(0.0, 0.0, 0.0)];
        let rhs = |n: f64, y: [f64; 2]| -> [f64; 2] {
            [y[1], forcing(n, y[0]) - y[1] / (1.0 + n)]
        };
        for i in 0..samples {
            let target = sign * delta * (i as f64 + 1.0) / samples as f64;
            // integrate from n to target with RK4 substeps
            let sub = 32;
            let h = (target - n) / sub as f64;
            for _ in 0..sub {
                let y = [psi, dpsi];
                let k1 = rhs(n, y);
                let k2 = rhs(n + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
                let k3 = rhs(n + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
                let k4 = rhs(n + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
                psi += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
                dpsi += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
                n += h;
                if !psi.is_finite() {
                    return Err(Error::Integrator("circle oracle blew up".into()));
                }
            }
            out.push((n, psi, dpsi));
        }
        Ok(out)
    };
    Ok(CircleProfile { inward: go(-1.0)?, outward: go(1.0)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_chart_is_polar_offsets() {
        let curve = JordanCurve::build(&CurveSpec::circle(1.0), 256).unwrap();
        assert!((curve.length - TAU).abs() < 1e-10);
        assert!((curve.kappa_sup - 1.0).abs() < 1e-8);
        let chart = build_fermi_chart(curve, 0.3).unwrap();
        let (x, y) = chart.forward(0.0, 0.2);
        assert!((x - 1.2).abs() < 1e-10 && y.abs() < 1e-10);
        let (x, y) = chart.forward(TAU / 4.0, -0.1);
        assert!(x.abs() < 1e-9 && (y - 0.9).abs() < 1e-10);
    }

    #[test]
    fn ellipse_chart_roundtrip() {
        let curve = JordanCurve::build(&CurveSpec::ellipse(1.3, 0.8), 512).unwrap();
        let chart = build_fermi_chart(curve, 0.2).unwrap();
        let mut max_err: f64 = 0.0;
        for i in 0..64 {
            let s = chart.curve.length * i as f64 / 64.0;
            for j in 0..16 {
                let n = -0.19 + 0.38 * j as f64 / 15.0;
                let (x, y) = chart.forward(s, n);
                let (s2, n2) = chart.locate(x, y).expect("locate");
                let (x2, y2) = chart.forward(s2, n2);
                max_err = max_err.max((x - x2).hypot(y - y2));
            }
        }
        assert!(max_err <= 1e-9, "roundtrip error {max_err}");
    }

    #[test]
    fn too_wide_tube_rejected() {
        let curve = JordanCurve::build(&CurveSpec::ellipse(1.3, 0.8), 256).unwrap();
        // kappa_max = a/b^2 = 2.03; delta = 2 gives product > 0.5
        assert!(matches!(
            build_fermi_chart(curve, 2.0),
            Err(Error::TubeTooWide(_))
        ));
    }

    #[test]
    fn circle_taylor_oracle_matches_hand_values() {
        let a = circle_taylor_oracle(8);
        assert!((a[2] - 1.0).abs() < 1e-14);
        assert!((a[3] + 1.0 / 3.0).abs() < 1e-14);
        assert!((a[4] - 0.25).abs() < 1e-14);
        assert!((a[5] + 0.2).abs() < 1e-14);
        assert!((a[6] - 1.0 / 6.0).abs() < 1e-14);
        // first order touched by the forcing: 42 a7 + 6 = -1
        assert!((a[7] + 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn circle_series_matches_taylor_oracle() {
        let curve = JordanCurve::build(&CurveSpec::circle(1.0), 256).unwrap();
        let chart = build_fermi_chart(curve, 0.3).unwrap();
        let sol = solve_tube_series(&chart, (8, 1)).unwrap();
        let oracle = circle_taylor_oracle(8);
        for k in 0..=8 {
            for i in 0..sol.coeffs[k].len() {
                assert!(
                    (sol.coeffs[k][i] - oracle[k]).abs() <= 1e-10,
                    "c_{k}[{i}] = {} vs {}",
                    sol.coeffs[k][i],
                    oracle[k]
                );
            }
        }
        assert!(sol.residual.max_nonconstant_mode <= 1e-12);
    }

    #[test]
    fn c2_is_one_on_ellipse() {
        let curve = JordanCurve::build(&CurveSpec::ellipse(1.3, 0.8), 256).unwrap();
        let chart = build_fermi_chart(curve, 0.2).unwrap();
        let sol = solve_tube_series(&chart, (8, 32)).unwrap();
        for v in &sol.coeffs[2] {
            assert!((v - 1.0).abs() <= 1e-12, "c2 = {v}");
        }
        assert!(sol.coeffs[0].iter().all(|v| *v == 0.0));
        assert!(sol.coeffs[1].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn circle_series_cross_validates_with_rk_integration() {
        let curve = JordanCurve::build(&CurveSpec::circle(1.0), 256).unwrap();
        let chart = build_fermi_chart(curve, 0.3).unwrap();
        let sol = solve_tube_series(&chart, (12, 1)).unwrap();
        let field = export_field(Arc::new(sol));
        let profile = circular_oracle(0.3, 30).unwrap();
        for &(n, psi, _) in profile.inward.iter().chain(profile.outward.iter()) {
            if n.abs() > 0.11 || n == 0.0 {
                continue;
            }
            let series_val = field.eval_sn(0.0, n);
            assert!(
                (series_val - psi).abs() <= 1e-8,
                "n = {n}: series {series_val} vs ode {psi}"
            );
        }
        // ψ'' (0±) = 2 and positivity on both sides
        for prof in [&profile.inward, &profile.outward] {
            for &(n, psi, _) in prof.iter() {
                if n != 0.0 {
                    assert!(psi > 0.0, "psi({n}) = {psi}");
                }
            }
        }
    }

    #[test]
    fn exported_field_boundary_conditions() {
        let curve = JordanCurve::build(&CurveSpec::ellipse(1.3, 0.8), 256).unwrap();
        let chart = build_fermi_chart(curve, 0.2).unwrap();
        let sol = solve_tube_series(&chart, (8, 32)).unwrap();
        let field = export_field(Arc::new(sol));
        for i in 0..16 {
            let s = field.chart().curve.length * i as f64 / 16.0;
            let (x, y) = field.chart().forward(s, 0.0);
            let j = field.jet(x, y, 1);
            assert!(j.value().abs() <= 1e-13, "psi on curve: {}", j.value());
            assert!(j.partial(1, 0).abs() <= 1e-10 && j.partial(0, 1).abs() <= 1e-10);
        }
    }

    #[test]
    fn exported_jets_match_chart_evaluation() {
        let curve = JordanCurve::build(&CurveSpec::ellipse(1.3, 0.8), 256).unwrap();
        let chart = build_fermi_chart(curve, 0.2).unwrap();
        let sol = solve_tube_series(&chart, (10, 32)).unwrap();
        let field = export_field(Arc::new(sol));
        // compare ∂x ψ against a centered difference of eval
        let (x, y) = field.chart().forward(1.0, 0.08);
        let j = field.jet(x, y, 2);
        let h = 1e-5;
        let fd = (field.eval(x + h, y) - field.eval(x - h, y)) / (2.0 * h);
        assert!((j.partial(1, 0) - fd).abs() < 1e-7, "{} vs {}", j.partial(1, 0), fd);
        let fd2 = (field.eval(x, y + h) - 2.0 * field.eval(x, y) + field.eval(x, y - h)) / (h * h);
        assert!((j.partial(0, 2) - fd2).abs() < 1e-4, "{} vs {}", j.partial(0, 2), fd2);
    }
}
