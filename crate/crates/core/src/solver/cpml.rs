//! Convolutional PML: graded coefficient profiles and auxiliary-field storage.

/// Graded CPML parameters for one grid axis.
///
/// `*_node` arrays are indexed by node `i`, `*_half` arrays by the half-step
/// position `i + 1/2`. Outside the absorbing slabs `b = 1`, `c = 0`, `κ⁻¹ = 1`.
#[derive(Debug, Clone)]
pub(crate) struct AxisProfile {
    pub lo: usize,
    pub hi: usize,
    pub n: usize,
    pub b_node: Vec<f32>,
    pub c_node: Vec<f32>,
    pub kinv_node: Vec<f32>,
    pub b_half: Vec<f32>,
    pub c_half: Vec<f32>,
    pub kinv_half: Vec<f32>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CpmlParams {
    pub order: f64,
    pub sigma_scale: f64,
    pub kappa_max: f64,
    pub alpha_max: f64,
}

impl CpmlParams {
    pub fn standard(omega: f64) -> Self {
        Self { order: 4.0, sigma_scale: 0.8, kappa_max: 1.0, alpha_max: 0.1 * omega }
    }
}

impl AxisProfile {
    /// `n` nodes, `lo`/`hi` absorbing cells on either side (cell units, c = 1).
    pub fn new(n: usize, lo: usize, hi: usize, dt: f64, p: CpmlParams) -> Self {
        let sigma_max = p.sigma_scale * (p.order + 1.0);
        let mut out = Self {
            lo,
            hi,
            n,
            b_node: vec![1.0; n],
            c_node: vec![0.0; n],
            kinv_node: vec![1.0; n],
            b_half: vec![1.0; n],
            c_half: vec![0.0; n],
            kinv_half: vec![1.0; n],
        };
        let depth = |x: f64| -> f64 {
            let inner_lo = lo as f64;
            let inner_hi = (n - 1 - hi) as f64;
            if lo > 0 && x < inner_lo {
                (inner_lo - x) / lo as f64
            } else if hi > 0 && x > inner_hi {
                (x - inner_hi) / hi as f64
            } else {
                0.0
            }
        };
        let coeffs = |d: f64| -> (f32, f32, f32) {
            if d <= 0.0 {
                return (1.0, 0.0, 1.0);
            }
            let g = d.powf(p.order);
            let sigma = sigma_max * g;
            let kappa = 1.0 + (p.kappa_max - 1.0) * g;
            let alpha = p.alpha_max * (1.0 - d);
            let b = (-(sigma / kappa + alpha) * dt).exp();
            let c = if sigma > 0.0 { sigma * (b - 1.0) / (sigma * kappa + kappa * kappa * alpha) } else { 0.0 };
            (b as f32, c as f32, (1.0 / kappa) as f32)
        };
        for i in 0..n {
            let (b, c, k) = coeffs(depth(i as f64));
            out.b_node[i] = b;
            out.c_node[i] = c;
            out.kinv_node[i] = k;
            let (b, c, k) = coeffs(depth(i as f64 + 0.5));
            out.b_half[i] = b;
            out.c_half[i] = c;
            out.kinv_half[i] = k;
        }
        out
    }

    /// Index ranges (along this axis) that lie in an absorbing slab.
    pub fn slabs(&self) -> [(usize, usize); 2] {
        let lo = (0, self.lo);
        let hi = if self.hi > 0 { (self.n - 1 - self.hi, self.n) } else { (self.n, self.n) };
        [lo, hi]
    }

    /// Number of slab positions for which auxiliary fields are stored.
    pub fn slab_len(&self) -> usize {
        self.lo + if self.hi > 0 { self.hi + 1 } else { 0 }
    }

    /// Slab-local index of array index `i`.
    #[inline]
    pub fn local(&self, i: usize) -> usize {
        if i < self.lo {
            i
        } else {
            self.lo + (i - (self.n - 1 - self.hi))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_graded_and_passive() {
        let p = AxisProfile::new(40, 10, 10, 0.5, CpmlParams::standard(0.3));
        // Interior untouched.
        for i in 11..28 {
            assert_eq!(p.b_node[i], 1.0);
            assert_eq!(p.c_node[i], 0.0);
        }
        // Decay strengthens towards the outer wall.
        assert!(p.b_node[1] < p.b_node[5]);
        assert!(p.b_node[38] < p.b_node[33]);
        for i in 0..40 {
            assert!(p.b_node[i] > 0.0 && p.b_node[i] <= 1.0);
            assert!(p.c_node[i] <= 0.0);
        }
        assert_eq!(p.slab_len(), 21);
        assert_eq!(p.local(29), 10);
        assert_eq!(p.local(39), 20);
    }
}
