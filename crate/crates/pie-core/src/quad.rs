//! Gauss–Legendre quadrature.
//!
//! A fixed 20-node rule per dimension is the workhorse of the independent test
//! oracles: it integrates univariate polynomials of degree ≤ 39 exactly, which
//! covers every kernel degree that appears in the operator algebra under the
//! default degree cap. The simulator reuses the same rules for collocation.

/// Number of nodes used by the test oracles.
pub const ORACLE_NODES: usize = 20;

/// A one-dimensional quadrature rule on an arbitrary interval.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// Gauss–Legendre rule with `n` nodes on `[a, b]`.
    ///
    /// Nodes are computed by Newton iteration on the Legendre polynomial with
    /// Chebyshev-based starting guesses; accurate to machine precision for the
    /// node counts used here.
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Initial guess (Abramowitz & Stegun 22.16.6).
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                // Legendre recurrence to get P_n(z) and P'_n(z).
                let mut p0 = 1.0;
                let mut p1 = 0.0;
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
                }
                pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / pp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            nodes[i] = z;
            weights[i] = w;
            nodes[n - 1 - i] = -z;
            weights[n - 1 - i] = w;
        }
        // Map from [-1, 1] to [a, b]; flip so nodes ascend.
        nodes.reverse();
        weights.reverse();
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for x in &mut nodes {
            *x = mid + half * *x;
        }
        for w in &mut weights {
            *w *= half;
        }
        QuadRule { nodes, weights }
    }

    /// 20-node oracle rule on `[a, b]`.
    pub fn oracle(a: f64, b: f64) -> Self {
        QuadRule::gauss_legendre(ORACLE_NODES, a, b)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate a scalar function sampled at the nodes.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Chebyshev–Gauss–Lobatto points on `[a, b]`, ascending (used by the simulator).
pub fn chebyshev_lobatto(n: usize, a: f64, b: f64) -> Vec<f64> {
    assert!(n >= 2);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (0..n)
        .map(|j| mid - half * (std::f64::consts::PI * j as f64 / (n as f64 - 1.0)).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_high_degree_polynomials() {
        // 20-node Gauss–Legendre is exact through degree 39.
        let rule = QuadRule::oracle(0.0, 1.0);
        for deg in [0usize, 1, 7, 20, 39] {
            let got = rule.integrate(|x| x.powi(deg as i32));
            let expect = 1.0 / (deg as f64 + 1.0);
            assert!((got - expect).abs() < 1e-13, "degree {deg}: {got} vs {expect}");
        }
    }

    #[test]
    fn interval_mapping() {
        let rule = QuadRule::oracle(-2.0, 3.0);
        let got = rule.integrate(|x| x * x);
        let expect = (3.0f64.powi(3) - (-2.0f64).powi(3)) / 3.0;
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_length() {
        let rule = QuadRule::gauss_legendre(7, 1.0, 4.0);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 3.0).abs() < 1e-13);
    }
}
