//! Gauss–Hermite averages over Gaussian velocity distributions.
//!
//! A body with peak velocity `u0` and velocity standard deviation `s` has the
//! amplitude weight `exp[-(u - u0)² / (4 s²)]`. Every wavegroup amplitude in
//! this crate is a product of averages of `exp[i (c u - a u²)]` over such
//! weights, where `c` collects the position dependence of the phase and `a`
//! the free evolution.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussHermite;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Node-doubling quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_axis: usize,
    pub max_nodes: usize,
    /// Absolute tolerance on a normalized (|value| <= 1) velocity average.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes_per_axis: 64, max_nodes: 512, tolerance: 1e-10 }
    }
}

impl QuadratureSpec {
    pub fn check(&self) -> Result<(), QuadratureError> {
        if self.nodes_per_axis < 8 {
            return Err(QuadratureError::TooFewNodes(self.nodes_per_axis));
        }
        if self.max_nodes < self.nodes_per_axis {
            return Err(QuadratureError::TooFewNodes(self.max_nodes));
        }
        if !(self.tolerance > 0.0) {
            return Err(QuadratureError::Tolerance(self.tolerance));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("quadrature needs at least 8 nodes per axis (got {0})")]
    TooFewNodes(usize),
    #[error("tolerance must be positive (got {0})")]
    Tolerance(f64),
    #[error(
        "velocity quadrature did not converge: {}",
        history.iter().map(|(n, d)| format!("{n} nodes: change {d:.3e}")).collect::<Vec<_>>().join(", ")
    )]
    NotConverged { history: Vec<(usize, f64)> },
}

type Rule = Arc<[(f64, f64)]>;

/// Nodes and weights for `∫ e^{-x²} f(x) dx / √π`, cached per order.
pub fn hermite_rule(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let norm = PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = GaussHermite::new(n)
        .expect("order >= 2")
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x, w / norm))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rule: Rule = pairs.into();
    cache.lock().unwrap().entry(n).or_insert(rule).clone()
}

/// A Gaussian velocity distribution of one body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityWeight {
    pub peak: f64,
    /// Standard deviation of the velocity probability density.
    pub spread: f64,
}

impl VelocityWeight {
    pub fn new(peak: f64, spread: f64) -> Self {
        VelocityWeight { peak, spread }
    }

    fn phase(&self, coef: f64, chirp: f64, u: f64) -> Complex64 {
        Complex64::from_polar(1.0, coef * u - chirp * u * u)
    }

    /// `|average|` computed from the Gaussian integral; used to skip points
    /// whose value is below tolerance anyway.
    pub fn magnitude(&self, coef: f64, chirp: f64) -> f64 {
        let beta = 2.0 * self.spread;
        let alpha = chirp * beta * beta;
        let b = beta * (coef - 2.0 * chirp * self.peak);
        let d = 1.0 + alpha * alpha;
        d.powf(-0.25) * (-b * b / (4.0 * d)).exp()
    }

    /// Fixed-order rule, no convergence check.
    pub fn average_with(&self, coef: f64, chirp: f64, n: usize) -> Complex64 {
        if self.spread == 0.0 {
            return self.phase(coef, chirp, self.peak);
        }
        let beta = 2.0 * self.spread;
        hermite_rule(n)
            .iter()
            .map(|&(x, w)| w * self.phase(coef, chirp, self.peak + beta * x))
            .sum()
    }

    /// Average of `exp[i (coef u - chirp u²)]`, doubling the node count until
    /// successive estimates agree to the tolerance.
    pub fn average(
        &self,
        coef: f64,
        chirp: f64,
        spec: &QuadratureSpec,
    ) -> Result<Complex64, QuadratureError> {
        if self.spread == 0.0 {
            return Ok(self.phase(coef, chirp, self.peak));
        }
        if self.magnitude(coef, chirp) < 1e-3 * spec.tolerance {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut n = spec.nodes_per_axis;
        let mut previous = self.average_with(coef, chirp, n);
        let mut history = Vec::new();
        while 2 * n <= spec.max_nodes {
            n *= 2;
            let current = self.average_with(coef, chirp, n);
            let change = (current - previous).norm();
            history.push((n, change));
            if change <= spec.tolerance {
                return Ok(current);
            }
            previous = current;
        }
        Err(QuadratureError::NotConverged { history })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form chirped Gaussian average, derived independently by
    /// completing the square.
    fn analytic(w: &VelocityWeight, coef: f64, chirp: f64) -> Complex64 {
        let beta = 2.0 * w.spread;
        let p = Complex64::new(1.0, chirp * beta * beta);
        let q = Complex64::new(0.0, beta * (coef - 2.0 * chirp * w.peak));
        let phase0 = Complex64::new(0.0, coef * w.peak - chirp * w.peak * w.peak);
        (q * q / (4.0 * p) + phase0).exp() / p.sqrt()
    }

    #[test]
    fn rule_integrates_moments() {
        for n in [8, 64, 512] {
            let rule = hermite_rule(n);
            let m0: f64 = rule.iter().map(|&(_, w)| w).sum();
            let m2: f64 = rule.iter().map(|&(x, w)| w * x * x).sum();
            assert!((m0 - 1.0).abs() < 1e-12, "n={n} m0={m0}");
            assert!((m2 - 0.5).abs() < 1e-12, "n={n} m2={m2}");
        }
    }

    #[test]
    fn matches_analytic_average() {
        let spec = QuadratureSpec::default();
        let w = VelocityWeight::new(6.2, 0.4);
        for &(coef, chirp) in &[(0.0, 0.0), (3.0, 0.0), (-11.0, 0.0), (2.0, 0.3), (5.0, -1.1)] {
            let got = w.average(coef, chirp, &spec).unwrap();
            let want = analytic(&w, coef, chirp);
            assert!((got - want).norm() < 1e-10, "{coef} {chirp}: {got} vs {want}");
            assert!((got.norm() - w.magnitude(coef, chirp)).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenstate_is_plane_wave() {
        let w = VelocityWeight::new(2.0, 0.0);
        let got = w.average(1.5, 0.25, &QuadratureSpec::default()).unwrap();
        assert!((got - Complex64::from_polar(1.0, 3.0 - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn far_tail_is_zero() {
        let w = VelocityWeight::new(0.0, 1.0);
        let got = w.average(500.0, 0.0, &QuadratureSpec::default()).unwrap();
        assert_eq!(got.norm(), 0.0);
    }

    #[test]
    fn non_convergence_reports_history() {
        let spec = QuadratureSpec { nodes_per_axis: 8, max_nodes: 16, tolerance: 1e-14 };
        let w = VelocityWeight::new(0.0, 1.0);
        match w.average(6.0, 0.0, &spec) {
            Err(QuadratureError::NotConverged { history }) => assert_eq!(history.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spec_checks() {
        assert!(QuadratureSpec { nodes_per_axis: 4, ..Default::default() }.check().is_err());
        assert!(QuadratureSpec::default().check().is_ok());
    }

    // Coefficients where the magnitude is above the early-exit floor. Beyond
    // that a fixed rule aliases once the phase advances ~2π per node spacing.
    #[test]
    fn convergence_monotone_beyond_32_nodes() {
        let w = VelocityWeight::new(0.0, 1.0);
        for coef in [1.0, 2.5, 4.0, 5.0] {
            let want = analytic(&w, coef, 0.0);
            let errors: Vec<f64> =
                [32, 64, 128, 256].iter().map(|&n| (w.average_with(coef, 0.0, n) - want).norm()).collect();
            for pair in errors.windows(2) {
                assert!(pair[1] <= pair[0].max(1e-13), "coef {coef}: {errors:?}");
            }
        }
    }

    #[test]
    fn doubling_never_accepts_an_aliased_value() {
        let spec = QuadratureSpec::default();
        for &(spread, chirp) in &[(1.0, 0.0), (0.5, 0.0), (1.0, 0.2), (0.3, -2.0)] {
            let w = VelocityWeight::new(1.7, spread);
            for i in 0..160 {
                let coef = -20.0 + 0.25 * i as f64;
                let got = w.average(coef, chirp, &spec).unwrap();
                let want = analytic(&w, coef, chirp);
                assert!((got - want).norm() < 1e-9, "{spread} {chirp} {coef}: {got} vs {want}");
            }
        }
    }
}
