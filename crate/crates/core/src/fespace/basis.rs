//! Equispaced Lagrange basis of degree `r` on the reference triangle.

/// Local node order: the three vertices, then `r - 1` nodes on each edge
/// `v0 -> v1`, `v1 -> v2`, `v2 -> v0` (walking in that direction), then the
/// interior nodes.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    r: usize,
    /// Barycentric multi-index `(a0, a1, a2)`, `a0 + a1 + a2 = r`, of each
    /// local node; the node sits at `(a1 / r, a2 / r)`.
    alphas: Vec<[usize; 3]>,
}

impl LagrangeBasis {
    pub fn new(r: usize) -> Self {
        assert!(r >= 1);
        let mut alphas = vec![[r, 0, 0], [0, r, 0], [0, 0, r]];
        for s in 1..r {
            alphas.push([r - s, s, 0]);
        }
        for s in 1..r {
            alphas.push([0, r - s, s]);
        }
        for s in 1..r {
            alphas.push([s, 0, r - s]);
        }
        for a2 in 1..r {
            for a1 in 1..r - a2 {
                alphas.push([r - a1 - a2, a1, a2]);
            }
        }
        LagrangeBasis { r, alphas }
    }

    pub fn order(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[[usize; 3]] {
        &self.alphas
    }

    /// Local index of the node with multi-index `alpha`.
    pub fn index_of(&self, alpha: [usize; 3]) -> usize {
        self.alphas
            .iter()
            .position(|a| *a == alpha)
            .expect("multi-index of this degree")
    }

    /// Reference coordinates of local node `k`.
    pub fn node(&self, k: usize) -> [f64; 2] {
        let a = self.alphas[k];
        [a[1] as f64 / self.r as f64, a[2] as f64 / self.r as f64]
    }

    /// Values of all basis functions at `(xi, eta)`.
    pub fn values(&self, xi: f64, eta: f64) -> Vec<f64> {
        let lam = [1.0 - xi - eta, xi, eta];
        self.alphas
            .iter()
            .map(|a| (0..3).map(|c| self.factor(a[c], lam[c]).0).product())
            .collect()
    }

    /// Reference gradients `(d/dxi, d/deta)` of all basis functions.
    pub fn gradients(&self, xi: f64, eta: f64) -> Vec<[f64; 2]> {
        let lam = [1.0 - xi - eta, xi, eta];
        self.alphas
            .iter()
            .map(|a| {
                let f: Vec<(f64, f64)> = (0..3).map(|c| self.factor(a[c], lam[c])).collect();
                // d lambda / d xi = (-1, 1, 0), d lambda / d eta = (-1, 0, 1)
                let d0 = f[0].1 * f[1].0 * f[2].0;
                let d1 = f[0].0 * f[1].1 * f[2].0;
                let d2 = f[0].0 * f[1].0 * f[2].1;
                [d1 - d0, d2 - d0]
            })
            .collect()
    }

    /// `P_k(lambda) = prod_{l<k} (r lambda - l) / (l + 1)` and its derivative.
    fn factor(&self, k: usize, lambda: f64) -> (f64, f64) {
        let r = self.r as f64;
        let terms: Vec<f64> = (0..k)
            .map(|l| (r * lambda - l as f64) / (l as f64 + 1.0))
            .collect();
        let value = terms.iter().product();
        let mut deriv = 0.0;
        for m in 0..k {
            let mut d = r / (m as f64 + 1.0);
            for (l, t) in terms.iter().enumerate() {
                if l != m {
                    d *= t;
                }
            }
            deriv += d;
        }
        (value, deriv)
    }
}
