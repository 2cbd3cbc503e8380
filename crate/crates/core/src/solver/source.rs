//! Pulsed soft dipole source.

/// Gaussian-modulated carrier `p(t) = exp(-((t - t0)/τ)²) cos(ω (t - t0))`.
///
/// The injected current is its exact time derivative, so the source carries
/// no DC component.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pulse {
    pub omega: f64,
    pub tau: f64,
    pub t0: f64,
}

impl Pulse {
    /// `bandwidth` is the relative half-width at which the spectrum falls to 1/e.
    pub fn new(omega: f64, bandwidth: f64) -> Self {
        let tau = 2.0 / (bandwidth * omega);
        Self { omega, tau, t0: 4.0 * tau }
    }

    #[cfg(test)]
    pub fn moment(&self, t: f64) -> f64 {
        let s = t - self.t0;
        (-(s / self.tau).powi(2)).exp() * (self.omega * s).cos()
    }

    /// `dp/dt`.
    pub fn current(&self, t: f64) -> f64 {
        let s = t - self.t0;
        let g = (-(s / self.tau).powi(2)).exp();
        g * (-2.0 * s / (self.tau * self.tau) * (self.omega * s).cos() - self.omega * (self.omega * s).sin())
    }

    /// Time after which the source is negligible.
    pub fn end(&self) -> f64 {
        self.t0 + 4.0 * self.tau
    }
}
