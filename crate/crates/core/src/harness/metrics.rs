//! Tracking and averaging metrics over a finished trace.
//!
//! Running time averages use a cumulative Simpson rule on the uniform trace
//! grid (with a three-point end correction on odd prefixes), so smooth
//! integrands are reproduced to fourth order; long-horizon average gaps can
//! then be checked against closed forms at tight tolerance.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::game::GameState;
use crate::sensitivity::spectral_norm;

use super::runner::Trace;
use super::scenario::Scenario;

/// Cumulative integral of uniformly sampled values.
///
/// Even prefixes use composite Simpson; odd prefixes add the cubic-accurate
/// three-point rule over the trailing interval. Falls back to trapezoids if
/// fewer than three samples are present.
pub fn cumulative_integral(dt: f64, values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[1] = if n >= 3 {
        dt / 12.0 * (5.0 * values[0] + 8.0 * values[1] - values[2])
    } else {
        0.5 * dt * (values[0] + values[1])
    };
    for k in 2..n {
        if k % 2 == 0 {
            out[k] = out[k - 2] + dt / 3.0 * (values[k - 2] + 4.0 * values[k - 1] + values[k]);
        } else {
            out[k] = out[k - 1] + dt / 12.0 * (-values[k - 2] + 8.0 * values[k - 1] + 5.0 * values[k]);
        }
    }
    out
}

/// Running averages `(1/T) int_0^T f`, with the value at `t = 0` defined as
/// `f(0)`.
pub fn running_average(dt: f64, values: &[f64]) -> Vec<f64> {
    let integral = cumulative_integral(dt, values);
    integral
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            if k == 0 {
                values.first().copied().unwrap_or(0.0)
            } else {
                i / (k as f64 * dt)
            }
        })
        .collect()
}

/// Tracking and averaging summary of one closed-loop run.
#[derive(Debug, Clone)]
pub struct TrackingMetrics {
    /// Times of the oracle samples.
    pub times: Vec<f64>,
    /// Distance of the coordinator state to the sampled equilibrium.
    pub eta_error: Vec<f64>,
    /// Per-player delivery-rate tracking error at the samples.
    pub beta_error: Vec<Vec<f64>>,
    /// Per-player transfer-rate tracking error at the samples (applied,
    /// balance-projected rates against the equilibrium plan).
    pub alpha_error: Vec<Vec<f64>>,
    /// Asymptotic transfer-error allowance `|A| sigma_g`.
    pub alpha_error_bound: f64,
    /// Largest queue deviation from target over the trailing window.
    pub regulation_tail_error: f64,
    /// Running average of the realized player costs, on the oracle grid.
    pub realized_average: Vec<Vec<f64>>,
    /// Running average of the equilibrium player costs, on the oracle grid.
    pub equilibrium_average: Vec<Vec<f64>>,
    /// Componentwise gap between the two averages.
    pub average_gap: Vec<Vec<f64>>,
}

/// Computes tracking metrics; `tail` is the fraction of the horizon (from
/// the end) used for the regulation error supremum.
pub fn tracking_metrics(scenario: &Scenario, trace: &Trace, tail: f64) -> Result<TrackingMetrics> {
    let game = &scenario.game;
    let lay = *game.layout();
    if trace.records.is_empty() {
        return Err(Error::Misaligned("empty trace".into()));
    }
    let sample_dt = scenario.oracle_every as f64 * trace.dt;

    let mut times = Vec::with_capacity(trace.oracle.len());
    let mut eta_error = Vec::with_capacity(trace.oracle.len());
    let mut beta_error = vec![Vec::with_capacity(trace.oracle.len()); lay.players];
    let mut alpha_error = vec![Vec::with_capacity(trace.oracle.len()); lay.players];
    let mut realized = vec![Vec::with_capacity(trace.oracle.len()); lay.players];
    let mut equilibrium = vec![Vec::with_capacity(trace.oracle.len()); lay.players];

    let mut expected_step = 0usize;
    for sample in &trace.oracle {
        if sample.step != expected_step {
            return Err(Error::Misaligned(format!(
                "oracle sample at step {} but expected {}",
                sample.step, expected_step
            )));
        }
        expected_step += scenario.oracle_every;
        let rec = trace
            .records
            .get(sample.step)
            .ok_or_else(|| Error::Misaligned(format!("no record for step {}", sample.step)))?;
        let ne = GameState {
            eta: sample.eta.clone(),
        };
        times.push(rec.t);
        let state_eta = record_eta(game, rec);
        eta_error.push((&state_eta.eta - &ne.eta).norm());
        for i in 0..lay.players {
            let b = DVector::from_vec(rec.beta[i].clone());
            let a = DVector::from_vec(rec.alpha[i].clone());
            let nb = ne.beta(&lay, i);
            let na = ne.alpha(&lay, i);
            beta_error[i].push((b - nb).norm());
            alpha_error[i].push((a - &na).norm());
            realized[i].push(rec.cost[i]);
            equilibrium[i].push(game.player_cost(i, &ne.beta(&lay, i), &na)?);
        }
    }

    let bounds = crate::equilibrium::approximation_bounds(
        game.graph(),
        game.specs(),
        game.config().epsilon,
        game.config().tau,
        game.config().margin,
    );
    let alpha_error_bound = spectral_norm(game.graph().incidence()) * bounds.sigma_g;

    let tail_start = ((1.0 - tail.clamp(0.0, 1.0)) * (trace.records.len() - 1) as f64) as usize;
    let mut regulation_tail_error: f64 = 0.0;
    for rec in &trace.records[tail_start..] {
        for (k, &q) in rec.q.iter().enumerate() {
            regulation_tail_error =
                regulation_tail_error.max((q - scenario.regulation.q_target[k]).abs());
        }
    }

    let realized_average: Vec<Vec<f64>> = realized
        .iter()
        .map(|f| running_average(sample_dt, f))
        .collect();
    let equilibrium_average: Vec<Vec<f64>> = equilibrium
        .iter()
        .map(|g| running_average(sample_dt, g))
        .collect();
    let average_gap = realized_average
        .iter()
        .zip(&equilibrium_average)
        .map(|(f, g)| f.iter().zip(g).map(|(a, b)| (a - b).abs()).collect())
        .collect();

    Ok(TrackingMetrics {
        times,
        eta_error,
        beta_error,
        alpha_error,
        alpha_error_bound,
        regulation_tail_error,
        realized_average,
        equilibrium_average,
        average_gap,
    })
}

/// Rebuilds the flat coordinator state stored in a trace record.
fn record_eta(game: &crate::game::Game, rec: &super::runner::TraceRecord) -> GameState {
    let lay = *game.layout();
    let mut eta = DVector::zeros(lay.dim());
    for i in 0..lay.players {
        for k in 0..lay.stations {
            eta[lay.beta_pos(i, k)] = rec.beta[i][k];
        }
        for e in 0..lay.arcs {
            eta[lay.alpha_pos(i, e)] = rec.alpha[i][e];
        }
        for l in 0..lay.balance_dim() {
            eta[lay.lambda_pos(i, l)] = rec.lambda[i][l];
        }
    }
    for l in 0..lay.coupling_dim() {
        eta[lay.mu_pos(l)] = rec.mu[l];
    }
    GameState { eta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_series_have_zero_gap() {
        let dt = 0.01;
        let f: Vec<f64> = (0..1001).map(|k| (k as f64 * dt).sin()).collect();
        let fa = running_average(dt, &f);
        let ga = running_average(dt, &f);
        for (a, b) in fa.iter().zip(&ga) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn exponential_gap_matches_closed_form() {
        // f - g = exp(-t): gap of the running averages is (1 - exp(-T)) / T.
        let dt = 1e-3;
        for horizon in [1.0f64, 10.0] {
            let n = (horizon / dt).round() as usize;
            let f: Vec<f64> = (0..=n).map(|k| (-(k as f64) * dt).exp()).collect();
            let avg = running_average(dt, &f);
            let expected = (1.0 - (-horizon).exp()) / horizon;
            assert_abs_diff_eq!(avg[n], expected, epsilon = 1e-9);
        }
        // Spot value quoted at T = 10.
        let n = (10.0 / dt).round() as usize;
        let f: Vec<f64> = (0..=n).map(|k| (-(k as f64) * dt).exp()).collect();
        let avg = running_average(dt, &f);
        assert_abs_diff_eq!(avg[n], 0.0999954600, epsilon = 1e-8);
    }

    #[test]
    fn simpson_integral_is_fourth_order() {
        let dt = 1e-2;
        let n = 200;
        let f: Vec<f64> = (0..=n).map(|k| (k as f64 * dt).powi(3)).collect();
        let integral = cumulative_integral(dt, &f);
        // Simpson is exact on cubics (up to rounding).
        let t = n as f64 * dt;
        assert_abs_diff_eq!(integral[n], t.powi(4) / 4.0, epsilon = 1e-12);
        // Odd prefixes carry one quadratic end-correction, fourth order in
        // the step.
        let t = (n - 1) as f64 * dt;
        assert_abs_diff_eq!(integral[n - 1], t.powi(4) / 4.0, epsilon = 1e-8);
    }
}
