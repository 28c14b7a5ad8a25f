//! Smooth stabilizing controller for the user queues and closed-form bounds
//! on its derivatives.
//!
//! Per station the controller is a logistic interpolation
//!
//! ```text
//! U(Q, c) = c - c_min/2 + W / (1 + b exp(-(Q - Q_target)))
//! W = beta_max - c_max + c_min/2 - N a
//! b = 2 (beta_max - c_max - N a) / c_min
//! ```
//!
//! which equals the arrival rate at the target queue, approaches
//! `c - c_min/2` for strongly underfull queues and
//! `c + beta_max - c_max - N a` for strongly overfull ones, and always stays
//! inside the realizable range `[c_min/2, beta_max - N a]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Parameters of the queue regulator.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulationParams {
    /// Lower bound on arrival rates.
    pub c_min: f64,
    /// Upper bound on arrival rates.
    pub c_max: f64,
    /// Aggregate delivery-rate ceiling, summed over players.
    pub beta_max: f64,
    /// Number of players.
    pub players: usize,
    /// Box margin `a` keeping rates strictly inside their boxes.
    pub margin: f64,
    /// Target queue length per station.
    pub q_target: DVector<f64>,
}

impl RegulationParams {
    /// Capacity headroom condition: `2 N a <= c_min < c_max < beta_max - N a`,
    /// with a strictly positive margin.
    pub fn validate(&self) -> Result<()> {
        let na = self.players as f64 * self.margin;
        if self.margin <= 0.0 {
            return Err(Error::AssumptionViolated(format!(
                "margin must be positive, got {}",
                self.margin
            )));
        }
        if !(2.0 * na <= self.c_min && self.c_min < self.c_max && self.c_max < self.beta_max - na)
        {
            return Err(Error::AssumptionViolated(format!(
                "need 2Na <= c_min < c_max < beta_max - Na, got N*a = {na}, c_min = {}, \
                 c_max = {}, beta_max = {}",
                self.c_min, self.c_max, self.beta_max
            )));
        }
        if self.q_target.iter().any(|&q| q < 0.0) {
            return Err(Error::AssumptionViolated(
                "target queue lengths must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Capacity slack `beta_max - c_max - N a`.
    pub fn headroom(&self) -> f64 {
        self.beta_max - self.c_max - self.players as f64 * self.margin
    }

    fn numerator(&self) -> f64 {
        self.headroom() + self.c_min / 2.0
    }

    fn slope(&self) -> f64 {
        2.0 * self.headroom() / self.c_min
    }

    /// Delivery target per station given queue lengths and arrival rates.
    pub fn control_target(&self, q: &DVector<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
        self.validate()?;
        self.check_dims(q, c)?;
        let w = self.numerator();
        let b = self.slope();
        Ok(DVector::from_fn(q.len(), |k, _| {
            let e = (-(q[k] - self.q_target[k])).exp();
            c[k] - self.c_min / 2.0 + w / (1.0 + b * e)
        }))
    }

    /// Jacobian of the controller with respect to the stacked state
    /// `(Q, c)`, plus the diagonal of the second derivative in `Q`.
    ///
    /// The Jacobian is `|S| x 2|S|`: the left block is the diagonal
    /// `dU/dQ > 0`, the right block is the identity (`dU/dc = 1` exactly);
    /// cross-station entries vanish.
    pub fn control_jacobian(
        &self,
        q: &DVector<f64>,
        c: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.validate()?;
        self.check_dims(q, c)?;
        let s = q.len();
        let w = self.numerator();
        let b = self.slope();
        let mut jac = DMatrix::zeros(s, 2 * s);
        let mut second = DVector::zeros(s);
        for k in 0..s {
            let e = (-(q[k] - self.q_target[k])).exp();
            let den = 1.0 + b * e;
            jac[(k, k)] = w * b * e / (den * den);
            jac[(k, s + k)] = 1.0;
            second[k] = w * b * e * (b * e - 1.0) / (den * den * den);
        }
        Ok((jac, second))
    }

    /// Closed-form uniform bounds on the first and second derivatives of the
    /// controller over all states with `Q >= 0`.
    pub fn derivative_bounds(&self, stations: usize) -> (f64, f64) {
        let w = self.numerator();
        let b = self.slope();
        let e_max = self.q_target.iter().cloned().fold(0.0f64, f64::max).exp();
        let den1 = (1.0 + b).powi(2);
        let d1 = stations as f64 * (1.0 + w * b * e_max / den1);
        let d2 =
            w * b / (1.0 + b).powi(4) * (1.0 + (b * e_max).powi(2)) * e_max;
        (d1, d2)
    }

    fn check_dims(&self, q: &DVector<f64>, c: &DVector<f64>) -> Result<()> {
        let s = self.q_target.len();
        if q.len() != s || c.len() != s {
            return Err(Error::DimensionMismatch {
                what: "controller state",
                expected: s,
                actual: q.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// c_min 2, c_max 3, beta_max 6, N 2, margin 0.5: headroom 2,
    /// numerator 3, slope 2.
    fn desk_params(q_target: f64, stations: usize) -> RegulationParams {
        RegulationParams {
            c_min: 2.0,
            c_max: 3.0,
            beta_max: 6.0,
            players: 2,
            margin: 0.5,
            q_target: DVector::from_element(stations, q_target),
        }
    }

    #[test]
    fn controller_equals_arrivals_at_the_target() {
        let p = desk_params(1.5, 3);
        let q = DVector::from_element(3, 1.5);
        let c = DVector::from_vec(vec![2.0, 2.5, 3.0]);
        let u = p.control_target(&q, &c).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(u[k], c[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn controller_limits_for_extreme_queues() {
        let p = desk_params(0.0, 1);
        let c = DVector::from_element(1, 2.5);
        // Q -> +inf: logistic term reaches its ceiling.
        let u_hi = p
            .control_target(&DVector::from_element(1, 60.0), &c)
            .unwrap();
        assert_abs_diff_eq!(u_hi[0], 2.5 - 3.0 + 6.0 - 1.0, epsilon = 1e-9);
        // Q - Q_target -> -inf: logistic term vanishes.
        let p2 = desk_params(60.0, 1);
        let u_lo = p2
            .control_target(&DVector::from_element(1, 0.0), &c)
            .unwrap();
        assert_abs_diff_eq!(u_lo[0], 2.5 - 1.0, epsilon = 1e-9);
    }

    #[test]
    fn jacobian_at_target_has_slope_two_thirds() {
        // |dU/dQ| = W b / (1 + b)^2 = 3 * 2 / 9 at the target queue; the
        // controller is increasing in Q, so the entry is positive.
        let p = desk_params(0.0, 1);
        let q = DVector::zeros(1);
        let c = DVector::from_element(1, 2.5);
        let (jac, _) = p.control_jacobian(&q, &c).unwrap();
        assert_abs_diff_eq!(jac[(0, 0)], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn arrival_sensitivity_is_exactly_one() {
        let p = desk_params(2.0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let q = DVector::from_fn(2, |_, _| rng.random_range(0.0..8.0));
            let c = DVector::from_fn(2, |_, _| rng.random_range(2.0..3.0));
            let (jac, _) = p.control_jacobian(&q, &c).unwrap();
            for k in 0..2 {
                assert_eq!(jac[(k, 2 + k)], 1.0);
                assert_eq!(jac[(0, 1)], 0.0);
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = desk_params(1.0, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-6;
        let h2 = 1e-4;
        for _ in 0..50 {
            let q = DVector::from_fn(3, |_, _| rng.random_range(0.0..5.0));
            let c = DVector::from_fn(3, |_, _| rng.random_range(2.0..3.0));
            let (jac, second) = p.control_jacobian(&q, &c).unwrap();
            for k in 0..3 {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[k] += h;
                qm[k] -= h;
                let up = p.control_target(&qp, &c).unwrap();
                let um = p.control_target(&qm, &c).unwrap();
                let fd = (up[k] - um[k]) / (2.0 * h);
                let rel = (jac[(k, k)] - fd).abs() / fd.abs().max(1e-12);
                assert!(rel <= 1e-6, "dU/dQ mismatch: {} vs {}", jac[(k, k)], fd);
                // Second difference needs a larger step against cancellation.
                qp[k] = q[k] + h2;
                qm[k] = q[k] - h2;
                let up2 = p.control_target(&qp, &c).unwrap();
                let um2 = p.control_target(&qm, &c).unwrap();
                let fd2 =
                    (up2[k] - 2.0 * p.control_target(&q, &c).unwrap()[k] + um2[k]) / (h2 * h2);
                assert!(
                    (second[k] - fd2).abs() <= 1e-5 * second[k].abs().max(1.0),
                    "d2U/dQ2 mismatch: {} vs {}",
                    second[k],
                    fd2
                );
            }
        }
    }

    #[test]
    fn derivative_bound_matches_hand_value() {
        // W b e^0 / (1 + b)^2 = 2/3, so D1 = 3 (1 + 2/3) = 5.
        let p = desk_params(0.0, 3);
        let (d1, _) = p.derivative_bounds(3);
        assert_abs_diff_eq!(d1, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn first_bound_scales_linearly_with_station_count() {
        let p = desk_params(0.0, 1);
        let (d1_one, _) = p.derivative_bounds(1);
        let (d1_four, _) = p.derivative_bounds(4);
        assert_abs_diff_eq!(d1_four, 4.0 * d1_one, epsilon = 1e-12);
    }

    #[test]
    fn sampled_derivatives_stay_below_the_bounds() {
        let p = desk_params(1.0, 3);
        let (d1, d2) = p.derivative_bounds(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let q = DVector::from_fn(3, |_, _| rng.random_range(0.0..12.0));
            let c = DVector::from_fn(3, |_, _| rng.random_range(2.0..3.0));
            let (jac, second) = p.control_jacobian(&q, &c).unwrap();
            let sn = jac.svd(false, false).singular_values[0];
            assert!(sn <= d1 + 1e-9, "|dU/dxi| = {sn} exceeds bound {d1}");
            let s2 = second.amax();
            assert!(s2 <= d2 + 1e-9, "|d2U/dQ2| = {s2} exceeds bound {d2}");
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = desk_params(1.0, 2);
        p.c_max = 6.0; // violates c_max < beta_max - Na
        assert!(matches!(
            p.control_target(&DVector::zeros(2), &DVector::from_element(2, 2.5)),
            Err(Error::AssumptionViolated(_))
        ));
    }

    #[test]
    fn range_and_sign_condition_hold_on_samples() {
        let p = desk_params(1.0, 3);
        let na = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let q = DVector::from_fn(3, |_, _| rng.random_range(0.0..10.0));
            let c = DVector::from_fn(3, |_, _| rng.random_range(2.0..3.0));
            let u = p.control_target(&q, &c).unwrap();
            for k in 0..3 {
                assert!(u[k] >= p.c_min / 2.0 - 1e-12);
                assert!(u[k] <= p.beta_max - na + 1e-12);
                let dev = q[k] - p.q_target[k];
                if dev.abs() > 1e-9 {
                    // u_hat = c - U must oppose the queue deviation.
                    assert!(dev * (c[k] - u[k]) < 0.0);
                }
            }
        }
    }
}
