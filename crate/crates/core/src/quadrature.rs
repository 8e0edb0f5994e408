//! Gauss-Jacobi and Gauss-Legendre rules built with the Golub-Welsch
//! eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss rule for `int_{-1}^{1} (1-x)^alpha (1+x)^beta f(x) dx`.
#[derive(Debug, Clone)]
pub struct GaussJacobi {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl GaussJacobi {
    /// # Panics
    /// If `n == 0` or either exponent is `<= -1`.
    pub fn new(n: usize, alpha: f64, beta: f64) -> Self {
        assert!(n > 0, "rule needs at least one node");
        assert!(alpha > -1.0 && beta > -1.0, "Jacobi exponents must exceed -1");

        let ab = alpha + beta;
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let k = i as f64;
            let diag = if i == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
            };
            jacobi[(i, i)] = diag;
            if i + 1 < n {
                let j = k + 1.0;
                let off2 = if i == 0 {
                    4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
                } else {
                    4.0 * j * (j + alpha) * (j + beta) * (j + ab)
                        / ((2.0 * j + ab).powi(2) * (2.0 * j + ab + 1.0) * (2.0 * j + ab - 1.0))
                };
                let off = off2.sqrt();
                jacobi[(i, i + 1)] = off;
                jacobi[(i + 1, i)] = off;
            }
        }

        let mu0 = 2f64.powf(ab + 1.0) * libm::tgamma(alpha + 1.0) * libm::tgamma(beta + 1.0)
            / libm::tgamma(ab + 2.0);
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self {
            nodes,
            weights,
            alpha,
            beta,
        }
    }

    pub fn legendre(n: usize) -> Self {
        Self::new(n, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int_a^b (b-x)^alpha (x-a)^beta f(x) dx`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let scale = half.powf(1.0 + self.alpha + self.beta);
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(a + half * (x + 1.0)))
            .sum();
        scale * sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = GaussJacobi::legendre(10);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(19));
        assert!((v / (2f64.powi(20) / 20.0) - 1.0).abs() < 1e-13);
        let w: f64 = rule.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_weight_moments() {
        // int_0^1 (x)^{-0.3} x^2 dx = 1/2.7
        let rule = GaussJacobi::new(8, 0.0, -0.3);
        let v = rule.integrate(0.0, 1.0, |x| x * x);
        assert!((v - 1.0 / 2.7).abs() < 1e-14);
        // int_0^2 (2-x)^{0.5} (x)^{-0.5} dx = pi
        let rule = GaussJacobi::new(5, 0.5, -0.5);
        assert!((rule.integrate(0.0, 2.0, |_| 1.0) - std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn beta_sum_edge_case() {
        // alpha + beta = -1 hits the special first off-diagonal entry
        let rule = GaussJacobi::new(6, -0.5, -0.5);
        let v = rule.integrate(-1.0, 1.0, |x| x * x);
        assert!((v - std::f64::consts::PI / 2.0).abs() < 1e-14);
    }
}
