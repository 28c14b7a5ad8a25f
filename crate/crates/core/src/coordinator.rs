//! The real-time coordinator: projected prediction-correction update of the
//! game state, plus its two projection operators.
//!
//! Each step moves the state toward the projection of
//! `eta - gain * F(eta) + v` onto the feasible box `K` (rate boxes with
//! margin, multiplier boxes `[0, cap]`), where `F` is the game map and `v`
//! the sensitivity-based prediction of the equilibrium motion. Applied
//! transfer rates additionally pass through the balance projection so the
//! vehicle stocks stay constant.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::game::{Game, GameState};
use crate::regulation::RegulationParams;
use crate::sensitivity::{assemble_jacobians, prediction_term};
use crate::topology::StationGraph;

const DYKSTRA_TOL: f64 = 1e-12;
const DYKSTRA_MAX_ITER: usize = 200_000;

/// Componentwise clamp onto `[lower, upper]`; idempotent and non-expansive.
pub fn box_project(x: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> Result<DVector<f64>> {
    if lower.len() != x.len() || upper.len() != x.len() {
        return Err(Error::DimensionMismatch {
            what: "box projection",
            expected: x.len(),
            actual: lower.len(),
        });
    }
    for j in 0..x.len() {
        if lower[j] > upper[j] {
            return Err(Error::BadBounds {
                index: j,
                lower: lower[j],
                upper: upper[j],
            });
        }
    }
    Ok(DVector::from_fn(x.len(), |j, _| x[j].clamp(lower[j], upper[j])))
}

/// Orthogonal projection of a proposed transfer plan onto the set of plans
/// that keep the player's vehicle stocks constant:
/// `{alpha : A alpha = b(beta), lo <= alpha <= hi}`.
///
/// Runs Dykstra's alternating projections between the box and the affine
/// set, returning the affine-side iterate, so the balance equation holds to
/// projection tolerance. Fails with `Infeasible` when the iteration cannot
/// close the gap (an empty intersection, i.e. a balance-capacity violation
/// for this `beta`).
pub fn balance_project(
    graph: &StationGraph,
    beta: &DVector<f64>,
    alpha_hat: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<DVector<f64>> {
    let d = graph.arc_count();
    if beta.len() != graph.station_count() || alpha_hat.len() != d {
        return Err(Error::DimensionMismatch {
            what: "balance projection",
            expected: d,
            actual: alpha_hat.len(),
        });
    }
    for j in 0..d {
        if lower[j] > upper[j] {
            return Err(Error::BadBounds {
                index: j,
                lower: lower[j],
                upper: upper[j],
            });
        }
    }
    let b = graph.balance_rhs(beta);
    let pinv = graph.incidence_pinv();
    let affine = |x: &DVector<f64>| -> DVector<f64> { x - pinv * (graph.incidence() * x - &b) };

    let mut x = affine(alpha_hat);
    let mut p = DVector::zeros(d); // box increment
    let mut q = DVector::zeros(d); // affine increment
    for _ in 0..DYKSTRA_MAX_ITER {
        let y_in = &x + &p;
        let y = DVector::from_fn(d, |j, _| y_in[j].clamp(lower[j], upper[j]));
        p = y_in - &y;
        let z_in = &y + &q;
        let next = affine(&z_in);
        q = z_in - &next;
        let gap = (&next - &y).amax();
        x = next;
        if gap <= DYKSTRA_TOL {
            return Ok(x);
        }
    }
    Err(Error::Infeasible(format!(
        "balance projection did not converge; residual gap {:.3e}",
        (&x + &p - &x).amax()
    )))
}

/// Single gradient-style correction toward the balance set:
/// `alpha_hat - A^T (A alpha_hat - b)`.
///
/// Diagnostic only. This is not a projection: it ignores the box, and the
/// incidence matrix has no orthonormal rows, so one step does not land on
/// the affine set (it reduces the residual when the step is contractive for
/// the graph at hand). `balance_project` is the production path.
pub fn balance_step_diagnostic(
    graph: &StationGraph,
    beta: &DVector<f64>,
    alpha_hat: &DVector<f64>,
) -> DVector<f64> {
    let b = graph.balance_rhs(beta);
    alpha_hat - graph.incidence().transpose() * (graph.incidence() * alpha_hat - b)
}

/// Lower and upper corners of the coordinator's feasible box `K`.
pub fn feasible_box(game: &Game) -> (DVector<f64>, DVector<f64>) {
    let lay = *game.layout();
    let cfg = game.config();
    let mut lo = DVector::zeros(lay.dim());
    let mut hi = DVector::zeros(lay.dim());
    for i in 0..lay.players {
        let spec = &game.specs()[i];
        for k in 0..lay.stations {
            lo[lay.beta_pos(i, k)] = cfg.margin;
            hi[lay.beta_pos(i, k)] = spec.beta_max - cfg.margin;
        }
        for e in 0..lay.arcs {
            lo[lay.alpha_pos(i, e)] = cfg.margin;
            hi[lay.alpha_pos(i, e)] = spec.alpha_max - cfg.margin;
        }
        for l in 0..lay.balance_dim() {
            hi[lay.lambda_pos(i, l)] = cfg.lambda_bound;
        }
    }
    for l in 0..lay.coupling_dim() {
        hi[lay.mu_pos(l)] = cfg.mu_bound;
    }
    (lo, hi)
}

/// One Euler step of the projected prediction-correction dynamics.
///
/// `q`, `c` are the plant state (from which the delivery target and its
/// Jacobian are derived) and `xi_dot` the stacked model derivative
/// `(dQ/dt, dc/dt)`.
pub fn coordinator_step(
    game: &Game,
    regulation: &RegulationParams,
    state: &GameState,
    q: &DVector<f64>,
    c: &DVector<f64>,
    xi_dot: &DVector<f64>,
    dt: f64,
) -> Result<GameState> {
    if dt <= 0.0 {
        return Err(Error::NegativeDt(dt));
    }
    let lay = *game.layout();
    if state.eta.len() != lay.dim() {
        return Err(Error::DimensionMismatch {
            what: "coordinator state",
            expected: lay.dim(),
            actual: state.eta.len(),
        });
    }
    if xi_dot.len() != 2 * lay.stations {
        return Err(Error::DimensionMismatch {
            what: "plant derivative",
            expected: 2 * lay.stations,
            actual: xi_dot.len(),
        });
    }

    let zeta = regulation.control_target(q, c)?;
    let descent = game.game_map(state, &zeta)?;
    let bundle = assemble_jacobians(game, state)?;
    let (du, _) = regulation.control_jacobian(q, c)?;
    let v = prediction_term(&bundle, &du, xi_dot)?;

    let bracket = &state.eta - game.config().gain * descent + v;
    let (lo, hi) = feasible_box(game);
    let projected = box_project(&bracket, &lo, &hi)?;
    Ok(GameState {
        eta: &state.eta + dt * (projected - &state.eta),
    })
}
