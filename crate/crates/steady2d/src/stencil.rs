//! Finite-difference weights on arbitrary 1D node sets (Fornberg's
//! recursion). Used for grid interpolation and the grid operator schemes.

/// Weights for derivatives 0..=m_max at evaluation point `z` given `nodes`.
/// Returns `w[m][k]`: weight of `nodes[k]` for the m-th derivative.
pub fn fd_weights(z: f64, nodes: &[f64], m_max: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    assert!(n > m_max, "need more nodes than the derivative order");
    let mut w = vec![vec![0.0; n]; m_max + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    w[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m_max);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for m in (1..=mn).rev() {
                    w[m][i] = c1 * (m as f64 * w[m - 1][i - 1] - c5 * w[m][i - 1]) / c2;
                }
                w[0][i] = -c1 * c5 * w[0][i - 1] / c2;
            }
            for m in (1..=mn).rev() {
                w[m][j] = (c4 * w[m][j] - m as f64 * w[m - 1][j]) / c3;
            }
            w[0][j] = c4 * w[0][j] / c3;
        }
        c1 = c2;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_classic_central_weights() {
        let nodes: Vec<f64> = (-3..=3).map(|i| i as f64).collect();
        let w = fd_weights(0.0, &nodes, 2);
        // order-6 first derivative: [-1/60, 3/20, -3/4, 0, 3/4, -3/20, 1/60]
        let expect1 = [-1.0 / 60.0, 3.0 / 20.0, -0.75, 0.0, 0.75, -3.0 / 20.0, 1.0 / 60.0];
        for (a, b) in w[1].iter().zip(expect1.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // order-6 second derivative: [1/90, -3/20, 3/2, -49/18, 3/2, -3/20, 1/90]
        let expect2 = [1.0 / 90.0, -0.15, 1.5, -49.0 / 18.0, 1.5, -0.15, 1.0 / 90.0];
        for (a, b) in w[2].iter().zip(expect2.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn interpolation_weights_sum_to_one() {
        let nodes = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let w = fd_weights(2.3, &nodes, 0);
        let s: f64 = w[0].iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        // exact on degree-5 polynomials
        let f = |x: f64| 1.0 + x - 0.5 * x.powi(3) + 0.1 * x.powi(5);
        let v: f64 = w[0].iter().zip(nodes.iter()).map(|(w, x)| w * f(*x)).sum();
        assert!((v - f(2.3)).abs() < 1e-11);
    }

    #[test]
    fn one_sided_weights_differentiate_polynomials_exactly() {
        let nodes = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let w = fd_weights(0.0, &nodes, 2);
        let f = |x: f64| 2.0 - x + 3.0 * x.powi(2) + 0.25 * x.powi(4);
        let d2: f64 = w[2].iter().zip(nodes.iter()).map(|(w, x)| w * f(*x)).sum();
        // f'' at 0 = 6
        assert!((d2 - 6.0).abs() < 1e-10);
    }
}
