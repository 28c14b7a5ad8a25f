//! Shared helpers for the integration suites.

use std::path::PathBuf;

use modcoord_core::game::{Game, GameState};
use modcoord_core::harness::Scenario;
use nalgebra::DVector;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load(name: &str) -> Scenario {
    Scenario::from_file(scenario_path(name)).unwrap_or_else(|e| panic!("load {name}: {e}"))
}

/// Independent equilibrium oracle: fixed-step explicit integration of the
/// descent flow on the game map, with domain backtracking. For a strongly
/// monotone map the flow converges for steps below `2 rho / L^2`, so pass a
/// step suited to the instance. Entirely separate from the Newton path.
#[allow(dead_code)]
pub fn flow_oracle(
    game: &Game,
    zeta: &DVector<f64>,
    init: &GameState,
    mut step: f64,
    tol: f64,
) -> GameState {
    let mut state = init.clone();
    let mut residual = game.game_map(&state, zeta).expect("interior start");
    for _ in 0..2_000_000 {
        if residual.amax() <= tol {
            return state;
        }
        let candidate = GameState {
            eta: &state.eta - step * &residual,
        };
        match game.game_map(&candidate, zeta) {
            Ok(next) => {
                state = candidate;
                residual = next;
            }
            Err(_) => step *= 0.5,
        }
        assert!(step > 1e-12, "flow step collapsed");
        assert!(
            residual.amax() < 1e9,
            "flow diverged; step too large for this instance"
        );
    }
    panic!("flow oracle stalled at residual {:.3e}", residual.amax());
}
