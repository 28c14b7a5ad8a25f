//! Reference equilibrium oracle for the regularized game and verification of
//! its approximation bounds.
//!
//! The unique equilibrium is the zero of the game map; the oracle runs a
//! damped Newton iteration on it (the Newton matrix is the sensitivity
//! system matrix), backtracking to stay strictly inside the barrier domain,
//! with a gradient-flow fallback when a Newton step stalls.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::game::{multiplier_map, Game, GameState, PlayerSpec};
use crate::qp;
use crate::sensitivity::assemble_system_matrix;
use crate::topology::StationGraph;

/// Infinity-norm residual demanded of the oracle.
pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_ITER: usize = 100_000;
const MAX_BACKTRACK: usize = 60;

/// Closed-form constants bounding how far the regularized equilibrium can
/// sit from the original constrained game.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationBounds {
    /// Per-player cost span over the margin box plus the barrier span.
    pub delta: Vec<f64>,
    /// Bound on the coupling-constraint residual.
    pub sigma_g: f64,
    /// Bound on the balance-constraint residual.
    pub sigma_h: f64,
    /// Per-player bound on the delivery-gradient magnitude at equilibrium.
    pub delta_prime: Vec<f64>,
    /// Per-player bound on the transfer-gradient magnitude at equilibrium.
    pub delta_double_prime: Vec<f64>,
}

/// Residual bound `sigma_G = max_i sqrt(N eps (delta_i + p tau))`.
pub fn sigma_g(players: usize, epsilon: f64, tau: f64, delta: &[f64], p: usize) -> f64 {
    delta
        .iter()
        .map(|&d| (players as f64 * epsilon * (d + p as f64 * tau)).sqrt())
        .fold(0.0, f64::max)
}

/// Residual bound `sigma_h = max_i sqrt(eps (delta_i + (p - 1) tau))`.
pub fn sigma_h(epsilon: f64, tau: f64, delta: &[f64], p: usize) -> f64 {
    delta
        .iter()
        .map(|&d| (epsilon * (d + (p as f64 - 1.0) * tau)).sqrt())
        .fold(0.0, f64::max)
}

/// Computes the approximation constants for a game instance.
pub fn approximation_bounds(
    graph: &StationGraph,
    specs: &[PlayerSpec],
    epsilon: f64,
    tau: f64,
    margin: f64,
) -> ApproximationBounds {
    let s = graph.station_count();
    let d = graph.arc_count();
    let p = 2 * s;
    let n = specs.len();
    let beta_max_total: f64 = specs.iter().map(|x| x.beta_max).sum();
    let alpha_max_total: f64 = specs.iter().map(|x| x.alpha_max).sum();
    let psi = |x: f64| (x / margin).ln();

    let delta: Vec<f64> = specs
        .iter()
        .map(|spec| {
            let (inf, sup) = spec.cost_extremes(s, d, margin);
            sup - inf + 2.0 * tau * (s as f64 * psi(beta_max_total) + d as f64 * psi(alpha_max_total))
        })
        .collect();
    let sg = sigma_g(n, epsilon, tau, &delta, p);
    let sh = sigma_h(epsilon, tau, &delta, p);
    let g_hi = multiplier_map(sg, epsilon, tau).max(multiplier_map(-sg, epsilon, tau));
    let h_hi = multiplier_map(sh, epsilon, tau).max(multiplier_map(-sh, epsilon, tau));

    let delta_prime: Vec<f64> = specs
        .iter()
        .map(|spec| spec.beta_gradient_sup(margin) + 2.0 * s as f64 * g_hi + 2.0 * s as f64 * h_hi)
        .collect();
    let delta_double_prime: Vec<f64> = specs
        .iter()
        .map(|spec| spec.alpha_gradient_sup(margin) + 2.0 * s as f64 * h_hi)
        .collect();

    ApproximationBounds {
        delta,
        sigma_g: sg,
        sigma_h: sh,
        delta_prime,
        delta_double_prime,
    }
}

/// Default interior start: deliveries split the target evenly, transfers sit
/// mid-box, multipliers at the zero-residual closed form.
pub fn default_start(game: &Game, zeta: &DVector<f64>) -> GameState {
    let lay = *game.layout();
    let cfg = game.config();
    let mut eta = DVector::zeros(lay.dim());
    let n = lay.players as f64;
    for (i, spec) in game.specs().iter().enumerate() {
        for k in 0..lay.stations {
            let share = (zeta[k] / n).clamp(0.05 * spec.beta_max, 0.95 * spec.beta_max);
            eta[lay.beta_pos(i, k)] = share;
        }
        for e in 0..lay.arcs {
            eta[lay.alpha_pos(i, e)] = 0.5 * spec.alpha_max;
        }
    }
    let g0 = multiplier_map(0.0, cfg.epsilon, cfg.tau);
    for l in 0..lay.coupling_dim() {
        eta[lay.mu_pos(l)] = g0;
    }
    for i in 0..lay.players {
        for l in 0..lay.balance_dim() {
            eta[lay.lambda_pos(i, l)] = g0;
        }
    }
    GameState { eta }
}

fn is_interior(game: &Game, eta: &DVector<f64>) -> bool {
    let lay = *game.layout();
    for (i, spec) in game.specs().iter().enumerate() {
        for k in 0..lay.stations {
            let b = eta[lay.beta_pos(i, k)];
            if b <= 0.0 || b >= spec.beta_max {
                return false;
            }
        }
        for e in 0..lay.arcs {
            let a = eta[lay.alpha_pos(i, e)];
            if a <= 0.0 || a >= spec.alpha_max {
                return false;
            }
        }
        for l in 0..lay.balance_dim() {
            if eta[lay.lambda_pos(i, l)] <= 0.0 {
                return false;
            }
        }
    }
    for l in 0..lay.coupling_dim() {
        if eta[lay.mu_pos(l)] <= 0.0 {
            return false;
        }
    }
    true
}

/// Solves for the unique equilibrium of the regularized game at target
/// `zeta`, to infinity-norm residual `RESIDUAL_TOL`.
pub fn solve_ne(game: &Game, zeta: &DVector<f64>, init: Option<&GameState>) -> Result<GameState> {
    solve_ne_with(game, zeta, init, RESIDUAL_TOL)
}

/// `solve_ne` with a caller-chosen residual tolerance (not below the
/// floating-point evaluation floor).
pub fn solve_ne_with(
    game: &Game,
    zeta: &DVector<f64>,
    init: Option<&GameState>,
    tol: f64,
) -> Result<GameState> {
    let tol = tol.max(1e-14);
    let mut state = match init {
        Some(s) => s.clone(),
        None => default_start(game, zeta),
    };
    if !is_interior(game, &state.eta) {
        return Err(Error::BoundaryState(
            "equilibrium solve started outside the barrier domain".into(),
        ));
    }

    let mut residual = game.game_map(&state, zeta)?;
    let mut res_norm = residual.amax();
    for _ in 0..MAX_ITER {
        if res_norm <= tol {
            return Ok(state);
        }
        let jm = assemble_system_matrix(game, &state)?;
        let direction = jm.lu().solve(&(-&residual)).ok_or(Error::SingularJm)?;

        let mut accepted = false;
        let mut step = 1.0;
        for _ in 0..MAX_BACKTRACK {
            let candidate = GameState {
                eta: &state.eta + step * &direction,
            };
            if is_interior(game, &candidate.eta) {
                let cand_res = game.game_map(&candidate, zeta)?;
                let cand_norm = cand_res.amax();
                if cand_norm < res_norm {
                    state = candidate;
                    residual = cand_res;
                    res_norm = cand_norm;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // Gradient-flow fallback: small explicit steps down the map.
            let mut h = 1e-3 / res_norm.max(1.0);
            let mut moved = false;
            for _ in 0..MAX_BACKTRACK {
                let candidate = GameState {
                    eta: &state.eta - h * &residual,
                };
                if is_interior(game, &candidate.eta) {
                    let cand_res = game.game_map(&candidate, zeta)?;
                    let cand_norm = cand_res.amax();
                    if cand_norm < res_norm {
                        state = candidate;
                        residual = cand_res;
                        res_norm = cand_norm;
                        moved = true;
                        break;
                    }
                }
                h *= 0.5;
            }
            if !moved {
                return Err(Error::LeftDomain);
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITER,
        residual: res_norm,
    })
}

/// How well the regularized equilibrium approximates the constrained game.
#[derive(Debug, Clone)]
pub struct ApproximationReport {
    pub bounds: ApproximationBounds,
    /// Largest coupling-constraint magnitude at the equilibrium.
    pub max_coupling: f64,
    /// Largest balance-constraint magnitude across players.
    pub max_balance: f64,
    pub mu_range: (f64, f64),
    pub lambda_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub alpha_range: (f64, f64),
    /// Coupling residual within `sigma_g` (slack 1e-9).
    pub coupling_ok: bool,
    /// Balance residual within `sigma_h` (slack 1e-9).
    pub balance_ok: bool,
    /// Multipliers inside the closed-form band.
    pub multiplier_ok: bool,
    /// Primal variables inside the interior box implied by the gradients.
    pub primal_box_ok: bool,
    /// Equilibrium cost within the barrier-induced margin of every feasible
    /// comparison point; `None` when the instance is too large to enumerate
    /// or no comparison point exists.
    pub suboptimality_ok: Option<bool>,
}

const SLACK: f64 = 1e-9;

/// Evaluates the approximation bounds at a solved equilibrium.
pub fn approximation_report(
    game: &Game,
    state: &GameState,
    zeta: &DVector<f64>,
) -> ApproximationReport {
    let lay = *game.layout();
    let cfg = game.config();
    let bounds = approximation_bounds(
        game.graph(),
        game.specs(),
        cfg.epsilon,
        cfg.tau,
        cfg.margin,
    );

    let coupling = game.coupling_values(state, zeta);
    let max_coupling = coupling.amax();
    let mut max_balance: f64 = 0.0;
    for i in 0..lay.players {
        max_balance = max_balance.max(game.balance_values(i, state).amax());
    }

    let mu = state.mu(&lay);
    let mu_range = (mu.min(), mu.max());
    let mut lambda_lo = f64::INFINITY;
    let mut lambda_hi = f64::NEG_INFINITY;
    let mut beta_lo = f64::INFINITY;
    let mut beta_hi = f64::NEG_INFINITY;
    let mut alpha_lo = f64::INFINITY;
    let mut alpha_hi = f64::NEG_INFINITY;
    for i in 0..lay.players {
        let lam = state.lambda(&lay, i);
        lambda_lo = lambda_lo.min(lam.min());
        lambda_hi = lambda_hi.max(lam.max());
        let beta = state.beta(&lay, i);
        beta_lo = beta_lo.min(beta.min());
        beta_hi = beta_hi.max(beta.max());
        let alpha = state.alpha(&lay, i);
        alpha_lo = alpha_lo.min(alpha.min());
        alpha_hi = alpha_hi.max(alpha.max());
    }

    let (eps, tau) = (cfg.epsilon, cfg.tau);
    let g_lo = multiplier_map(-bounds.sigma_g, eps, tau);
    let g_hi = multiplier_map(bounds.sigma_g, eps, tau);
    let h_lo = multiplier_map(-bounds.sigma_h, eps, tau);
    let h_hi = multiplier_map(bounds.sigma_h, eps, tau);
    let multiplier_ok = mu_range.0 >= g_lo - SLACK
        && mu_range.1 <= g_hi + SLACK
        && lambda_lo >= h_lo - SLACK
        && lambda_hi <= h_hi + SLACK;

    let mut primal_box_ok = true;
    for (i, spec) in game.specs().iter().enumerate() {
        let beta = state.beta(&lay, i);
        let alpha = state.alpha(&lay, i);
        let b_edge = tau * spec.beta_max / (2.0 * tau + bounds.delta_prime[i] * spec.beta_max);
        let a_edge =
            tau * spec.alpha_max / (2.0 * tau + bounds.delta_double_prime[i] * spec.alpha_max);
        for &b in beta.iter() {
            if b < b_edge - SLACK || b > spec.beta_max - b_edge + SLACK {
                primal_box_ok = false;
            }
        }
        for &a in alpha.iter() {
            if a < a_edge - SLACK || a > spec.alpha_max - a_edge + SLACK {
                primal_box_ok = false;
            }
        }
    }

    let suboptimality_ok = suboptimality_check(game, state, zeta);

    ApproximationReport {
        max_coupling,
        max_balance,
        mu_range,
        lambda_range: (lambda_lo, lambda_hi),
        beta_range: (beta_lo, beta_hi),
        alpha_range: (alpha_lo, alpha_hi),
        coupling_ok: max_coupling <= bounds.sigma_g + SLACK,
        balance_ok: max_balance <= bounds.sigma_h + SLACK,
        multiplier_ok,
        primal_box_ok,
        suboptimality_ok,
        bounds,
    }
}

/// Compares the equilibrium cost of each player against feasible deviations.
///
/// A feasible deviation must meet the coupling target exactly (the paired
/// inequalities force equality), which pins the deviating player's delivery
/// vector; candidate transfer plans come from a coarse grid projected onto
/// the balance set. Returns `None` when the arc count is too large for the
/// grid or no candidate is feasible.
fn suboptimality_check(game: &Game, state: &GameState, zeta: &DVector<f64>) -> Option<bool> {
    let lay = *game.layout();
    let cfg = game.config();
    if lay.arcs > 8 {
        return None;
    }
    let s = lay.stations;
    let d = lay.arcs;
    let margin_bound =
        cfg.tau * (lay.balance_dim() + lay.coupling_dim()) as f64;
    let mut any = false;
    let mut ok = true;
    let total = state.delivery_total(&lay);
    for (i, spec) in game.specs().iter().enumerate() {
        let beta_i = state.beta(&lay, i);
        let alpha_i = state.alpha(&lay, i);
        let f_eq = game.player_cost(i, &beta_i, &alpha_i).unwrap();
        let allowance = margin_bound
            + 2.0 * cfg.tau
                * (s as f64 * spec.beta_max.ln() + d as f64 * spec.alpha_max.ln());

        // Deviation delivery forced by the equality coupling.
        let beta_dev = DVector::from_fn(s, |k, _| zeta[k] - (total[k] - beta_i[k]));
        let inside = beta_dev
            .iter()
            .all(|&b| b >= cfg.margin && b <= spec.beta_max - cfg.margin);
        if !inside {
            continue;
        }
        let b = game.graph().balance_rhs(&beta_dev);
        let lo = DVector::from_element(d, cfg.margin);
        let hi = DVector::from_element(d, spec.alpha_max - cfg.margin);
        // Grid corners plus the midpoint as projection targets.
        let mut targets = vec![DVector::from_element(d, 0.5 * spec.alpha_max)];
        for corner in 0..(1usize << d) {
            let t = DVector::from_fn(d, |e, _| {
                if corner >> e & 1 == 1 {
                    hi[e]
                } else {
                    lo[e]
                }
            });
            targets.push(t);
        }
        for t in targets {
            if let Ok(Some(alpha_dev)) =
                qp::project_box_affine_exact(game.graph().incidence(), &b, &t, &lo, &hi)
            {
                any = true;
                let f_dev = game.player_cost(i, &beta_dev, &alpha_dev).unwrap();
                if f_eq > f_dev + allowance + SLACK {
                    ok = false;
                }
            }
        }
    }
    if any {
        Some(ok)
    } else {
        None
    }
}
