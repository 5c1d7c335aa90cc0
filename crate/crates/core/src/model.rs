//! The CIR model, its parameters and time grid.

use crate::error::{Error, Result};

/// Parameters of `dv = k(θ − v)dt + ξ√v dW` on `[0, horizon]`, started at `v0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    pub v0: f64,
    pub k: f64,
    pub theta: f64,
    pub xi: f64,
    pub horizon: f64,
}

/// Feller classification of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    /// `2kθ ≥ ξ²`: the process stays strictly positive.
    Inaccessible,
    Accessible,
}

impl CirParams {
    /// Builds and validates a parameter set.
    pub fn new(v0: f64, k: f64, theta: f64, xi: f64, horizon: f64) -> Result<Self> {
        CirParams {
            v0,
            k,
            theta,
            xi,
            horizon,
        }
        .validate()
    }

    /// Returns `self` if every field is finite and strictly positive.
    pub fn validate(self) -> Result<Self> {
        for (name, value) in [
            ("v0", self.v0),
            ("k", self.k),
            ("theta", self.theta),
            ("xi", self.xi),
            ("horizon", self.horizon),
        ] {
            if !value.is_finite() {
                return Err(Error::param(name, value, "must be finite"));
            }
            if value <= 0.0 {
                return Err(Error::param(name, value, "must be strictly positive"));
            }
        }
        Ok(self)
    }

    /// Feller ratio `ν = 2kθ/ξ²`.
    pub fn feller_ratio(&self) -> f64 {
        2.0 * self.k * self.theta / (self.xi * self.xi)
    }

    pub fn boundary_class(&self) -> BoundaryClass {
        if self.feller_ratio() >= 1.0 {
            BoundaryClass::Inaccessible
        } else {
            BoundaryClass::Accessible
        }
    }

    /// Returns a copy with `k` chosen so that the Feller ratio equals `nu`.
    pub fn with_feller_ratio(self, nu: f64) -> Result<Self> {
        CirParams {
            k: nu * self.xi * self.xi / (2.0 * self.theta),
            ..self
        }
        .validate()
    }

    /// Mean and variance of `v_{t+delta}` given `v_t = v`.
    ///
    /// These are the moments of the exact noncentral chi-squared transition
    /// and serve as an oracle; no scheme uses them.
    pub fn conditional_moments(&self, v: f64, delta: f64) -> (f64, f64) {
        let decay = (-self.k * delta).exp();
        // 1 − e^{−kΔ} without cancellation for small kΔ
        let one_minus = -(-self.k * delta).exp_m1();
        let xi2 = self.xi * self.xi;
        let mean = self.theta + (v - self.theta) * decay;
        let variance = v * (xi2 / self.k) * decay * one_minus
            + self.theta * (xi2 / (2.0 * self.k)) * one_minus * one_minus;
        (mean, variance)
    }
}

/// Equidistant grid `t_n = n·δt`, `n = 0..=N`, with `N·δt = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl Grid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param(
                "horizon",
                horizon,
                "must be finite and positive",
            ));
        }
        if steps == 0 {
            return Err(Error::InvalidSteps {
                steps,
                reason: "a grid needs at least one step",
            });
        }
        Ok(Grid {
            horizon,
            steps,
            dt: horizon / steps as f64,
        })
    }

    pub fn for_params(params: &CirParams, steps: usize) -> Result<Self> {
        Grid::new(params.horizon, steps)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Node `t_n`, computed as `n·δt` rather than by accumulation. The last
    /// node is pinned to the horizon.
    pub fn node(&self, n: usize) -> f64 {
        if n >= self.steps {
            self.horizon
        } else {
            n as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |n| self.node(n))
    }

    /// Same horizon, `factor` times as many steps.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        Grid::new(self.horizon, self.steps * factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn accepts_figure_parameters() {
        let p = CirParams::new(0.02, 2.0, 0.02, 0.8, 1.0).unwrap();
        assert_eq!(p.validate().unwrap(), p);
    }

    #[test]
    fn rejects_zero_v0() {
        let err = CirParams::new(0.0, 1.0, 1.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "v0", .. }));
    }

    #[test]
    fn rejects_negative_xi() {
        let err = CirParams::new(1.0, 1.0, 1.0, -0.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "xi", .. }));
    }

    #[test]
    fn rejects_non_finite() {
        let err = CirParams::new(1.0, f64::NAN, 1.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "k", .. }));
        let err = CirParams::new(1.0, 1.0, 1.0, 1.0, f64::INFINITY).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidParameter {
                name: "horizon",
                ..
            }
        ));
    }

    #[test]
    fn feller_ratio_values() {
        let p = CirParams::new(0.02, 2.0, 0.02, 0.8, 1.0).unwrap();
        assert_relative_eq!(p.feller_ratio(), 0.125, max_relative = 1e-14);
        let p = CirParams::new(0.02, 64.0, 0.02, 0.8, 1.0).unwrap();
        assert_relative_eq!(p.feller_ratio(), 4.0, max_relative = 1e-14);
        let p = CirParams::new(1.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(p.feller_ratio(), 1.0);
    }

    #[test]
    fn boundary_classes() {
        let p = CirParams::new(0.02, 64.0, 0.02, 0.8, 1.0).unwrap();
        assert_eq!(p.boundary_class(), BoundaryClass::Inaccessible);
        let p = CirParams::new(1.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(p.boundary_class(), BoundaryClass::Inaccessible);
        let p = CirParams::new(1.0, 0.5, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(p.feller_ratio(), 0.5);
        assert_eq!(p.boundary_class(), BoundaryClass::Accessible);
    }

    #[test]
    fn mean_is_stationary_at_theta() {
        let p = CirParams::new(0.02, 2.0, 0.02, 0.8, 1.0).unwrap();
        for delta in [1e-3, 0.5, 1.0, 10.0] {
            let (m, _) = p.conditional_moments(p.theta, delta);
            assert_relative_eq!(m, p.theta, max_relative = 1e-14);
        }
    }

    #[test]
    fn moments_are_continuous_at_zero_lag() {
        let p = CirParams::new(0.03, 2.0, 0.02, 0.8, 1.0).unwrap();
        let (m, v) = p.conditional_moments(p.v0, 1e-12);
        assert_relative_eq!(m, p.v0, max_relative = 1e-10);
        assert!(v < 1e-12);
    }

    #[test]
    fn mean_reverts_and_matches_euler_drift() {
        let p = CirParams::new(0.05, 3.0, 0.02, 0.5, 1.0).unwrap();
        let (m, _) = p.conditional_moments(p.v0, 50.0);
        assert_relative_eq!(m, p.theta, max_relative = 1e-12);
        // one-step Euler drift agrees to O(δ²)
        for delta in [1e-2, 1e-3, 1e-4] {
            let (m, _) = p.conditional_moments(p.v0, delta);
            let euler = p.v0 + p.k * (p.theta - p.v0) * delta;
            assert!((m - euler).abs() <= p.k * p.k * (p.v0 - p.theta).abs() * delta * delta);
        }
    }

    #[test]
    fn grid_nodes_are_exact() {
        let g = Grid::new(1.0, 1 << 20).unwrap();
        assert_eq!(g.node(g.steps()), 1.0);
        assert!((g.steps() as f64 * g.dt() - 1.0).abs() <= f64::EPSILON);
        let g = Grid::new(0.3, 7).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes.len(), 8);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*nodes.last().unwrap(), 0.3);
        assert!(Grid::new(1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn feller_ratio_scaling_invariance(
            k in 0.1f64..50.0, theta in 0.001f64..1.0, xi in 0.05f64..2.0, c in 0.01f64..100.0
        ) {
            let a = CirParams::new(0.02, k, theta, xi, 1.0).unwrap();
            let b = CirParams::new(0.02, c * k, theta, c.sqrt() * xi, 1.0).unwrap();
            prop_assert!((a.feller_ratio() - b.feller_ratio()).abs() <= 1e-12 * a.feller_ratio());
        }

        #[test]
        fn grid_last_node_is_horizon(t in 1e-3f64..100.0, n in 1usize..100_000) {
            let g = Grid::new(t, n).unwrap();
            prop_assert_eq!(g.node(n), t);
            prop_assert!((n as f64 * g.dt() - t).abs() <= t * f64::EPSILON);
        }
    }
}
