//! Gauss–Hermite quadrature for expectations under a univariate Gaussian.

use std::f64::consts::PI;

/// Nodes and weights for `∫ f(x) e^{-x²} dx ≈ Σ w_i f(x_i)`, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Roots of the degree-`n` Hermite polynomial found by Newton iteration on
    /// the orthonormal recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let pim4 = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            // nodes[i] holds the i-th largest root while iterating
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        nodes.reverse();
        weights.reverse();
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(X)]` for `X ~ N(mean, var)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, mean: f64, var: f64, f: F) -> f64 {
        let s = (2.0 * var.max(0.0)).sqrt();
        let total: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mean + s * x))
            .sum();
        total / PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [1, 2, 5, 20, 50] {
            let gh = GaussHermite::new(n);
            assert_relative_eq!(gh.weights.iter().sum::<f64>(), PI.sqrt(), max_relative = 1e-12);
            assert!(gh.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn three_point_rule() {
        let gh = GaussHermite::new(3);
        let r = 1.5f64.sqrt();
        assert_relative_eq!(gh.nodes[0], -r, epsilon = 1e-14);
        assert_relative_eq!(gh.nodes[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(gh.weights[1], 2.0 * PI.sqrt() / 3.0, epsilon = 1e-14);
        assert_relative_eq!(gh.weights[0], PI.sqrt() / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_moments() {
        let gh = GaussHermite::new(50);
        let (m, v) = (0.7, 2.3);
        assert_relative_eq!(gh.expect(m, v, |x| x), m, epsilon = 1e-12);
        assert_relative_eq!(gh.expect(m, v, |x| (x - m).powi(2)), v, max_relative = 1e-12);
        assert_relative_eq!(gh.expect(m, v, |x| (x - m).powi(4)), 3.0 * v * v, max_relative = 1e-11);
        assert_relative_eq!(gh.expect(m, v, f64::exp), (m + v / 2.0).exp(), max_relative = 1e-10);
    }
}
