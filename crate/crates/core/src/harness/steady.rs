//! Joint steady state of the closed loop under constant arrivals: queue
//! levels at which the summed equilibrium deliveries reproduce the arrival
//! rates exactly, so both the plant and the coordinator are stationary.
//!
//! Used to construct scenarios that start on the invariant point (their
//! state-rate bound can then be declared tightly and verified on the trace).

use nalgebra::{DMatrix, DVector};

use crate::equilibrium::solve_ne_with;
use crate::error::{Error, Result};
use crate::game::{Game, GameState};
use crate::regulation::RegulationParams;
use crate::sensitivity::assemble_jacobians;

/// Solves for `(q, eta)` with `sum_i beta_i(U(q, c)) = c` by a damped Newton
/// iteration on the queue vector, using the equilibrium sensitivity for the
/// Jacobian. The returned state is the equilibrium at the fixed point with
/// its delivery block nudged so the summed rates match `c` to rounding.
pub fn closed_loop_fixed_point(
    game: &Game,
    regulation: &RegulationParams,
    c: &DVector<f64>,
) -> Result<(DVector<f64>, GameState)> {
    let lay = *game.layout();
    let s = lay.stations;
    let tol = 1e-13;

    let mut q = regulation.q_target.clone();
    let mut warm: Option<GameState> = None;
    let mut result = None;
    for _ in 0..60 {
        let zeta = regulation.control_target(&q, c)?;
        let ne = solve_ne_with(game, &zeta, warm.as_ref(), tol)?;
        let gap = ne.delivery_total(&lay) - c;
        if gap.amax() <= tol {
            result = Some(ne);
            break;
        }

        // d(total delivery)/dq = (sum of delivery rows of J) * diag(dU/dQ).
        let bundle = assemble_jacobians(game, &ne)?;
        let (du, _) = regulation.control_jacobian(&q, c)?;
        let mut m = DMatrix::zeros(s, s);
        for k in 0..s {
            for kp in 0..s {
                let mut sum = 0.0;
                for i in 0..lay.players {
                    sum += bundle.j[(lay.beta_pos(i, k), kp)];
                }
                m[(k, kp)] = sum * du[(kp, kp)];
            }
        }
        let step = m
            .lu()
            .solve(&gap)
            .ok_or(Error::SingularJm)?;
        let mut damping = 1.0;
        // Keep queues positive.
        for k in 0..s {
            if q[k] - damping * step[k] <= 0.0 {
                damping = damping.min(0.5 * q[k] / step[k].abs());
            }
        }
        q -= damping * step;
        warm = Some(ne);
    }
    let mut ne = result.ok_or(Error::NoConvergence {
        iterations: 60,
        residual: f64::NAN,
    })?;

    // Close the last rounding gap exactly: shift every player's delivery
    // block by an equal share of the residual.
    let gap = ne.delivery_total(&lay) - c;
    for k in 0..s {
        let share = gap[k] / lay.players as f64;
        for i in 0..lay.players {
            ne.eta[lay.beta_pos(i, k)] -= share;
        }
    }
    Ok((q, ne))
}
