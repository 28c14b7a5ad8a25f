//! Closed-loop constants ledger.
//!
//! Gathers every constant the convergence analysis needs for one scenario:
//! derivative bounds of the controller, residual bounds of the regularized
//! equilibrium, multiplier caps, the trajectory envelope, Lipschitz
//! estimates, the contraction factor of the coordinator, and the steady-state
//! queue-regulation band. All downstream checks read these values from the
//! ledger rather than recomputing them inline.

use nalgebra::DVector;
use serde::Serialize;

use crate::equilibrium::approximation_bounds;
use crate::error::{Error, Result};
use crate::game::multiplier_map;
use crate::sensitivity::{
    lipschitz_estimates, spectral_norm, target_sensitivity_rhs, StateRegion,
};

use super::scenario::Scenario;

/// Sample count for the empirical Lipschitz estimates.
pub const LIPSCHITZ_SAMPLES: usize = 10_000;

/// Every scenario constant used by the closed-loop guarantees.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsLedger {
    /// Strong-monotonicity modulus of the game map.
    pub rho_omega: f64,
    /// Smallest primal curvature across players.
    pub min_modulus: f64,
    /// Controller first-derivative bound.
    pub d_u1: f64,
    /// Controller second-derivative bound.
    pub d_u2: f64,
    /// Declared arrival-rate slope bound.
    pub delta_c: f64,
    /// Declared plant state-rate bound.
    pub delta_xi: f64,
    /// Prediction-term bound.
    pub delta_v: f64,
    /// Per-player cost span over the admissible box.
    pub delta: Vec<f64>,
    /// Coupling-residual bound at equilibrium.
    pub sigma_g: f64,
    /// Balance-residual bound at equilibrium.
    pub sigma_h: f64,
    /// Per-player delivery-gradient bound.
    pub delta_prime: Vec<f64>,
    /// Per-player transfer-gradient bound.
    pub delta_double_prime: Vec<f64>,
    /// Spectral norm of the constant target-sensitivity right-hand side.
    pub j_n_norm: f64,
    /// Coupling-multiplier cap.
    pub mu_cap: f64,
    /// Balance-multiplier cap.
    pub lambda_cap: f64,
    /// Drive bound on delivery rates.
    pub d_beta: f64,
    /// Drive bound on transfer rates.
    pub d_alpha: f64,
    /// Drive bound on coupling multipliers.
    pub d_mu: f64,
    /// Drive bound on balance multipliers.
    pub d_lambda: f64,
    /// Trajectory envelope, per player: delivery rates.
    pub beta_env: Vec<(f64, f64)>,
    /// Trajectory envelope, per player: transfer rates.
    pub alpha_env: Vec<(f64, f64)>,
    /// Trajectory envelope: coupling multipliers.
    pub mu_env: (f64, f64),
    /// Trajectory envelope: balance multipliers.
    pub lambda_env: (f64, f64),
    /// Closed-form game-map Lipschitz bound over the envelope (loose).
    pub l_omega_analytic: f64,
    /// Sampled game-map Lipschitz estimate; used in the contraction factor.
    pub l_omega: f64,
    /// Closed-form drift-map Lipschitz bound (diagnostic only; its barrier
    /// curvature terms blow up as the residual bounds shrink).
    pub l_j_analytic: f64,
    /// Sampled drift-map Lipschitz estimate; used in the contraction factor.
    pub l_j: f64,
    /// Contraction factor of the coordinator error dynamics.
    pub theta: f64,
    /// Whether `theta < 1`.
    pub contraction: bool,
    /// Steady-state queue band, lower-side width.
    pub delta_min: f64,
    /// Steady-state queue band, upper-side width.
    pub delta_max: f64,
}

impl ConstantsLedger {
    /// Steady-state queue-regulation radius `max(delta_min, delta_max)`.
    pub fn regulation_band(&self) -> f64 {
        self.delta_min.max(self.delta_max)
    }
}

/// Contraction factor
/// `sqrt(1 - g r + g^2 L^2 + (L_J D1 dxi)^2 + (1 + g L) L_J D1 dxi)`.
pub fn contraction_factor(
    gain: f64,
    rho_omega: f64,
    l_omega: f64,
    l_j: f64,
    d_u1: f64,
    delta_xi: f64,
) -> f64 {
    let drift = l_j * d_u1 * delta_xi;
    (1.0 - gain * rho_omega
        + gain * gain * l_omega * l_omega
        + drift * drift
        + (1.0 + gain * l_omega) * drift)
        .max(0.0)
        .sqrt()
}

/// Steady-state queue band `(delta_min, delta_max)` induced by a coupling
/// residual bound `sigma_g`.
pub fn regulation_band(
    sigma_g: f64,
    beta_max: f64,
    c_max: f64,
    c_min: f64,
    margin: f64,
    q_target_max: f64,
) -> Result<(f64, f64)> {
    let headroom = beta_max - c_max - margin;
    let ratio = 2.0 * sigma_g / headroom;
    let argument = 1.0 - ratio;
    if argument <= 0.0 {
        return Err(Error::DeltaMaxUndefined { argument });
    }
    let delta_max = -argument.ln();
    let delta_min = (1.0 + ratio * (1.0 + headroom / c_min * q_target_max.exp())).ln();
    Ok((delta_min, delta_max))
}

/// Largest value of an affine form `sum_j coeff_j x_j + constant` over a box.
fn sup_affine(coeffs: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, &c)| if c >= 0.0 { c * hi[j] } else { c * lo[j] })
        .sum()
}

/// Computes the full ledger for a scenario.
pub fn constants_ledger(scenario: &Scenario) -> Result<ConstantsLedger> {
    let game = &scenario.game;
    let reg = &scenario.regulation;
    let lay = *game.layout();
    let cfg = game.config();
    let (eps, tau) = (cfg.epsilon, cfg.tau);
    let s = lay.stations;
    let margin = cfg.margin;

    let rho_omega = game.monotonicity_modulus();
    let min_modulus = game.min_modulus();
    let (d_u1, d_u2) = reg.derivative_bounds(s);
    let delta_c = scenario.arrivals.rate_bound;
    let delta_xi = scenario.xi_rate_bound;

    let bounds = approximation_bounds(game.graph(), game.specs(), eps, tau, margin);
    let j_n_norm = spectral_norm(&target_sensitivity_rhs(game));
    let delta_v = j_n_norm * d_u1 * delta_xi / (eps * min_modulus);
    let mu_cap = multiplier_map(bounds.sigma_g, eps, tau) + delta_v;
    let lambda_cap = multiplier_map(bounds.sigma_h, eps, tau) + delta_v;

    // Drive bounds: the largest forcing each block of the projected dynamics
    // can see, from the gradient spans, the multiplier caps, and the largest
    // constraint values over the admissible boxes.
    let two_s = 2.0 * s as f64;
    let d_beta = game
        .specs()
        .iter()
        .map(|p| p.beta_gradient_sup(margin))
        .fold(0.0f64, f64::max)
        + two_s * (mu_cap + lambda_cap);
    let d_alpha = game
        .specs()
        .iter()
        .map(|p| p.alpha_gradient_sup(margin))
        .fold(0.0f64, f64::max)
        + two_s * lambda_cap;

    let sup_g = game
        .specs()
        .iter()
        .map(|p| p.beta_max - margin)
        .sum::<f64>()
        - reg.c_min / 2.0;
    let d_mu = sup_g + delta_v;

    let mut d_lambda: f64 = 0.0;
    for (i, spec) in game.specs().iter().enumerate() {
        let n_beta = lay.stations;
        let beta_lo = DVector::from_element(n_beta, margin);
        let beta_hi = DVector::from_element(n_beta, spec.beta_max - margin);
        let alpha_lo = DVector::from_element(lay.arcs, margin);
        let alpha_hi = DVector::from_element(lay.arcs, spec.alpha_max - margin);
        for l in 0..lay.balance_dim() {
            // h_l is affine in (beta, alpha); take its largest value over
            // the admissible box, componentwise.
            let row = game.balance_grad().row(i * lay.balance_dim() + l);
            let beta_coeffs = DVector::from_fn(n_beta, |k, _| row[lay.beta_pos(i, k)]);
            let alpha_coeffs = DVector::from_fn(lay.arcs, |e, _| row[lay.alpha_pos(i, e)]);
            let sup_h = sup_affine(&beta_coeffs, &beta_lo, &beta_hi)
                + sup_affine(&alpha_coeffs, &alpha_lo, &alpha_hi);
            d_lambda = d_lambda.max(sup_h);
        }
    }
    d_lambda += delta_v;

    // Trajectory envelope.
    let beta_env: Vec<(f64, f64)> = game
        .specs()
        .iter()
        .map(|p| {
            let edge = tau * p.beta_max / (2.0 * tau + d_beta * p.beta_max);
            (edge, p.beta_max - edge)
        })
        .collect();
    let alpha_env: Vec<(f64, f64)> = game
        .specs()
        .iter()
        .map(|p| {
            let edge = tau * p.alpha_max / (2.0 * tau + d_alpha * p.alpha_max);
            (edge, p.alpha_max - edge)
        })
        .collect();
    let mu_env = (tau / (eps + d_mu), mu_cap);
    let lambda_env = (tau / (eps + d_lambda), lambda_cap);

    let region = StateRegion {
        beta: beta_env.clone(),
        alpha: alpha_env.clone(),
        mu: mu_env,
        lambda: lambda_env,
    };
    let q_hi = reg.q_target.max() + 2.0;
    let q_lo = (reg.q_target.min() - 2.0).max(0.0);
    let lip = lipschitz_estimates(
        game,
        reg,
        &region,
        (q_lo, q_hi),
        bounds.sigma_g,
        bounds.sigma_h,
        LIPSCHITZ_SAMPLES,
        scenario.seed,
    )?;

    let theta = contraction_factor(
        cfg.gain,
        rho_omega,
        lip.l_omega_empirical,
        lip.l_j_empirical,
        d_u1,
        delta_xi,
    );
    let (delta_min, delta_max) = regulation_band(
        bounds.sigma_g,
        reg.beta_max,
        reg.c_max,
        reg.c_min,
        margin,
        reg.q_target.max(),
    )?;

    Ok(ConstantsLedger {
        rho_omega,
        min_modulus,
        d_u1,
        d_u2,
        delta_c,
        delta_xi,
        delta_v,
        delta: bounds.delta.clone(),
        sigma_g: bounds.sigma_g,
        sigma_h: bounds.sigma_h,
        delta_prime: bounds.delta_prime.clone(),
        delta_double_prime: bounds.delta_double_prime.clone(),
        j_n_norm,
        mu_cap,
        lambda_cap,
        d_beta,
        d_alpha,
        d_mu,
        d_lambda,
        beta_env,
        alpha_env,
        mu_env,
        lambda_env,
        l_omega_analytic: lip.l_omega_analytic,
        l_omega: lip.l_omega_empirical,
        l_j_analytic: lip.l_j_analytic,
        l_j: lip.l_j_empirical,
        theta,
        contraction: theta < 1.0,
        delta_min,
        delta_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::Scenario;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn drive_bounds_dominate_sampled_constraint_values() {
        let scenario =
            Scenario::from_toml_str(crate::harness::scenario::tests::SMALL_SCENARIO).unwrap();
        let ledger = constants_ledger(&scenario).unwrap();
        let game = &scenario.game;
        let reg = &scenario.regulation;
        let lay = *game.layout();
        let cfg = game.config();
        let na = reg.players as f64 * reg.margin;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let mut eta = nalgebra::DVector::zeros(lay.dim());
            for (i, spec) in game.specs().iter().enumerate() {
                for k in 0..lay.stations {
                    eta[lay.beta_pos(i, k)] =
                        rng.random_range(cfg.margin..spec.beta_max - cfg.margin);
                }
                for e in 0..lay.arcs {
                    eta[lay.alpha_pos(i, e)] =
                        rng.random_range(cfg.margin..spec.alpha_max - cfg.margin);
                }
            }
            let state = crate::game::GameState { eta };
            let zeta = nalgebra::DVector::from_fn(lay.stations, |_, _| {
                rng.random_range(reg.c_min / 2.0..reg.beta_max - na)
            });
            let coupling = game.coupling_values(&state, &zeta);
            for l in 0..lay.stations {
                assert!(coupling[l] <= ledger.d_mu - ledger.delta_v + 1e-12);
            }
            for i in 0..lay.players {
                let h = game.balance_values(i, &state);
                assert!(h.max() <= ledger.d_lambda - ledger.delta_v + 1e-12);
            }
        }
    }

    #[test]
    fn contraction_factor_hand_value() {
        // rho 1, L 1, gain 0.5, no drift: sqrt(0.75).
        let theta = contraction_factor(0.5, 1.0, 1.0, 0.0, 5.0, 0.0);
        assert_abs_diff_eq!(theta, 0.75f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn band_hand_values() {
        // ratio 0.1 gives delta_max = -ln 0.9.
        let sigma_g = 0.05;
        let (dmin, dmax) = regulation_band(sigma_g, 4.0, 2.9, 2.0, 0.1, 0.0).unwrap();
        assert_abs_diff_eq!(dmax, -(0.9f64.ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(dmin, (1.0f64 + 0.1 * (1.0 + 0.5)).ln(), epsilon = 1e-15);
    }

    #[test]
    fn zero_residual_gives_zero_band() {
        let (dmin, dmax) = regulation_band(0.0, 4.0, 2.9, 2.0, 0.1, 1.0).unwrap();
        assert_eq!(dmin, 0.0);
        assert_eq!(dmax, 0.0);
    }

    #[test]
    fn oversized_residual_is_flagged() {
        assert!(matches!(
            regulation_band(1.0, 4.0, 2.9, 2.0, 0.1, 1.0),
            Err(Error::DeltaMaxUndefined { .. })
        ));
    }
}
