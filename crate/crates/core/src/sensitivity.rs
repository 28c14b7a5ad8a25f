//! Parametric sensitivity of the regularized equilibrium: the block system
//! matrix, its constant right-hand side in the delivery target, and the
//! prediction term that feeds the coordinator.
//!
//! With `F` the game map, the equilibrium `eta(zeta)` satisfies
//! `F(eta, zeta) = 0`; differentiating gives
//! `d eta / d zeta = J = J_M^{-1} J_N` with `J_M = dF/deta` and
//! `J_N = -dF/dzeta`. `J_M` has the block form
//!
//! ```text
//! [ R1   R2^T  R3^T ]
//! [ -R2  R4    0    ]
//! [ -R3  0     R5   ]
//! ```
//!
//! whose off-diagonal blocks cancel in the quadratic form, so its symmetric
//! part is the positive diagonal `(R1, R4, R5)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{Game, GameState};
use crate::regulation::RegulationParams;

/// Assembled sensitivity blocks at a fixed interior state.
#[derive(Debug, Clone)]
pub struct SensitivityBundle {
    /// Diagonal of the primal curvature block, positive.
    pub r1: DVector<f64>,
    /// Coupling-constraint gradient, `m x n`, constant.
    pub r2: DMatrix<f64>,
    /// Stacked balance-constraint gradients, `(N p) x n`, constant.
    pub r3: DMatrix<f64>,
    /// Diagonal `eps + tau / mu^2`.
    pub r4: DVector<f64>,
    /// Diagonal `eps + tau / lambda^2`.
    pub r5: DVector<f64>,
    /// Full system matrix.
    pub j_m: DMatrix<f64>,
    /// Constant right-hand side `-dF/dzeta`, `dim x |S|`.
    pub j_n: DMatrix<f64>,
    /// Equilibrium sensitivity `J_M^{-1} J_N`.
    pub j: DMatrix<f64>,
}

/// System matrix `J_M` alone (shared with the equilibrium solver, whose
/// Newton matrix it is).
pub fn assemble_system_matrix(game: &Game, state: &GameState) -> Result<DMatrix<f64>> {
    let lay = *game.layout();
    let cfg = game.config();
    let (eps, tau) = (cfg.epsilon, cfg.tau);
    let n = lay.primal_dim();
    let m = lay.coupling_dim();
    let pp = lay.players * lay.balance_dim();

    let mut jm = DMatrix::zeros(lay.dim(), lay.dim());
    for i in 0..lay.players {
        let spec = &game.specs()[i];
        for k in 0..lay.stations {
            let idx = lay.beta_pos(i, k);
            let b = state.eta[idx];
            if b <= 0.0 || b >= spec.beta_max {
                return Err(Error::BoundaryState(format!("delivery rate {b}")));
            }
            jm[(idx, idx)] =
                spec.profit.modulus() + tau / (b * b) + tau / ((spec.beta_max - b) * (spec.beta_max - b));
        }
        for e in 0..lay.arcs {
            let idx = lay.alpha_pos(i, e);
            let a = state.eta[idx];
            if a <= 0.0 || a >= spec.alpha_max {
                return Err(Error::BoundaryState(format!("transfer rate {a}")));
            }
            jm[(idx, idx)] =
                spec.cost.modulus() + tau / (a * a) + tau / ((spec.alpha_max - a) * (spec.alpha_max - a));
        }
    }
    for l in 0..m {
        let idx = lay.mu_pos(l);
        let mu = state.eta[idx];
        if mu <= 0.0 {
            return Err(Error::BoundaryState(format!("coupling multiplier {mu}")));
        }
        jm[(idx, idx)] = eps + tau / (mu * mu);
    }
    for i in 0..lay.players {
        for l in 0..lay.balance_dim() {
            let idx = lay.lambda_pos(i, l);
            let lam = state.eta[idx];
            if lam <= 0.0 {
                return Err(Error::BoundaryState(format!("balance multiplier {lam}")));
            }
            jm[(idx, idx)] = eps + tau / (lam * lam);
        }
    }

    let r2 = game.coupling_grad();
    let r3 = game.balance_grad();
    for r in 0..m {
        for c in 0..n {
            jm[(n + r, c)] = -r2[(r, c)];
            jm[(c, n + r)] = r2[(r, c)];
        }
    }
    for r in 0..pp {
        for c in 0..n {
            jm[(n + m + r, c)] = -r3[(r, c)];
            jm[(c, n + m + r)] = r3[(r, c)];
        }
    }
    Ok(jm)
}

/// Constant matrix `J_N = -dF/dzeta`: the coupling rows carry `-I` over the
/// first station block and `+I` over the mirrored one.
pub fn target_sensitivity_rhs(game: &Game) -> DMatrix<f64> {
    let lay = *game.layout();
    let s = lay.stations;
    let mut jn = DMatrix::zeros(lay.dim(), s);
    for k in 0..s {
        jn[(lay.mu_pos(k), k)] = -1.0;
        jn[(lay.mu_pos(s + k), k)] = 1.0;
    }
    jn
}

/// Assembles all sensitivity blocks and solves for `J` by dense LU.
pub fn assemble_jacobians(game: &Game, state: &GameState) -> Result<SensitivityBundle> {
    let lay = *game.layout();
    let j_m = assemble_system_matrix(game, state)?;
    let j_n = target_sensitivity_rhs(game);
    let lu = j_m.clone().lu();
    let j = lu.solve(&j_n).ok_or(Error::SingularJm)?;

    let r1 = DVector::from_fn(lay.primal_dim(), |i, _| j_m[(i, i)]);
    let n = lay.primal_dim();
    let r4 = DVector::from_fn(lay.coupling_dim(), |l, _| j_m[(n + l, n + l)]);
    let m = lay.coupling_dim();
    let r5 = DVector::from_fn(lay.players * lay.balance_dim(), |l, _| {
        j_m[(n + m + l, n + m + l)]
    });
    Ok(SensitivityBundle {
        r1,
        r2: game.coupling_grad().clone(),
        r3: game.balance_grad().clone(),
        r4,
        r5,
        j_m,
        j_n,
        j,
    })
}

/// Prediction of the equilibrium drift, `v = J (dU/dxi) xi_dot`.
pub fn prediction_term(
    bundle: &SensitivityBundle,
    control_jacobian: &DMatrix<f64>,
    xi_dot: &DVector<f64>,
) -> Result<DVector<f64>> {
    if control_jacobian.ncols() != xi_dot.len() || control_jacobian.nrows() != bundle.j.ncols() {
        return Err(Error::DimensionMismatch {
            what: "prediction term",
            expected: control_jacobian.ncols(),
            actual: xi_dot.len(),
        });
    }
    Ok(&bundle.j * (control_jacobian * xi_dot))
}

/// The prediction split into the per-player primal parts, the operator part,
/// and the per-player multiplier parts.
#[derive(Debug, Clone)]
pub struct PredictionBlocks {
    pub primal: Vec<DVector<f64>>,
    pub coupling: DVector<f64>,
    pub dual: Vec<DVector<f64>>,
}

pub fn split_prediction(game: &Game, v: &DVector<f64>) -> PredictionBlocks {
    let lay = *game.layout();
    let primal = (0..lay.players)
        .map(|i| {
            DVector::from_fn(lay.per_player(), |j, _| v[i * lay.per_player() + j])
        })
        .collect();
    let coupling = DVector::from_fn(lay.coupling_dim(), |l, _| v[lay.mu_pos(l)]);
    let dual = (0..lay.players)
        .map(|i| DVector::from_fn(lay.balance_dim(), |l, _| v[lay.lambda_pos(i, l)]))
        .collect();
    PredictionBlocks {
        primal,
        coupling,
        dual,
    }
}

/// Componentwise box region of game states used for Lipschitz sampling.
#[derive(Debug, Clone)]
pub struct StateRegion {
    /// Per-player delivery-rate interval.
    pub beta: Vec<(f64, f64)>,
    /// Per-player transfer-rate interval.
    pub alpha: Vec<(f64, f64)>,
    pub mu: (f64, f64),
    pub lambda: (f64, f64),
}

impl StateRegion {
    pub fn sample(&self, game: &Game, rng: &mut ChaCha8Rng) -> GameState {
        let lay = *game.layout();
        let mut eta = DVector::zeros(lay.dim());
        for i in 0..lay.players {
            for k in 0..lay.stations {
                eta[lay.beta_pos(i, k)] = rng.random_range(self.beta[i].0..=self.beta[i].1);
            }
            for e in 0..lay.arcs {
                eta[lay.alpha_pos(i, e)] = rng.random_range(self.alpha[i].0..=self.alpha[i].1);
            }
            for l in 0..lay.balance_dim() {
                eta[lay.lambda_pos(i, l)] = rng.random_range(self.lambda.0..=self.lambda.1);
            }
        }
        for l in 0..lay.coupling_dim() {
            eta[lay.mu_pos(l)] = rng.random_range(self.mu.0..=self.mu.1);
        }
        GameState { eta }
    }
}

/// Analytic bounds and sampled difference-quotient maxima for the game map
/// and the predicted drift map.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzEstimates {
    pub l_omega_analytic: f64,
    pub l_omega_empirical: f64,
    pub l_j_analytic: f64,
    pub l_j_empirical: f64,
    pub rho_omega: f64,
}

/// Spectral norm via SVD.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values[0]
}

/// Computes the Lipschitz diagnostics over the given region.
///
/// The analytic game-map bound is `max diag(R1, R4, R5)` over the region
/// plus the spectral norm of the stacked constant constraint gradients. The
/// analytic drift bound follows the closed-form estimate built from the
/// curvature of the barrier diagonals (which blows up for small residual
/// bounds and is a diagnostic only); the empirical values are maxima of
/// difference quotients over `samples` sampled pairs.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_estimates(
    game: &Game,
    regulation: &RegulationParams,
    region: &StateRegion,
    q_range: (f64, f64),
    sigma_g: f64,
    sigma_h: f64,
    samples: usize,
    seed: u64,
) -> Result<LipschitzEstimates> {
    let lay = *game.layout();
    let cfg = game.config();
    let (eps, tau) = (cfg.epsilon, cfg.tau);
    let rho_omega = game.monotonicity_modulus();
    let min_modulus = game.min_modulus();

    // Analytic game-map bound.
    let mut diag_sup: f64 = 0.0;
    let mut curvature_sup: f64 = 0.0;
    for (i, spec) in game.specs().iter().enumerate() {
        let (blo, bhi) = region.beta[i];
        diag_sup = diag_sup.max(
            spec.profit.modulus() + tau / (blo * blo) + tau / ((spec.beta_max - bhi).powi(2)),
        );
        curvature_sup = curvature_sup
            .max(2.0 * tau * (1.0 / blo.powi(3) + 1.0 / (spec.beta_max - bhi).powi(3)));
        let (alo, ahi) = region.alpha[i];
        diag_sup = diag_sup.max(
            spec.cost.modulus() + tau / (alo * alo) + tau / ((spec.alpha_max - ahi).powi(2)),
        );
        curvature_sup = curvature_sup
            .max(2.0 * tau * (1.0 / alo.powi(3) + 1.0 / (spec.alpha_max - ahi).powi(3)));
    }
    diag_sup = diag_sup.max(eps + tau / (region.mu.0 * region.mu.0));
    diag_sup = diag_sup.max(eps + tau / (region.lambda.0 * region.lambda.0));

    let stacked = {
        let r2 = game.coupling_grad();
        let r3 = game.balance_grad();
        let mut b = DMatrix::zeros(r2.nrows() + r3.nrows(), lay.primal_dim());
        b.view_mut((0, 0), (r2.nrows(), lay.primal_dim())).copy_from(r2);
        b.view_mut((r2.nrows(), 0), (r3.nrows(), lay.primal_dim()))
            .copy_from(r3);
        b
    };
    let l_omega_analytic = diag_sup + spectral_norm(&stacked);

    let jn_norm = spectral_norm(&target_sensitivity_rhs(game));
    let (d_u1, d_u2) = regulation.derivative_bounds(lay.stations);
    let scale = eps * min_modulus;
    let m = lay.coupling_dim() as f64;
    let p = lay.balance_dim() as f64;
    let np = lay.players as f64 * p;
    let l_j_analytic = (curvature_sup.powi(2)
        + 4.0 * tau * tau * (m * m / sigma_g.powi(6) + np * np / sigma_h.powi(6)))
    .sqrt()
        * jn_norm
        * d_u1
        / (scale * scale)
        + jn_norm * d_u2 / scale;

    // Sampled difference quotients.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeta_mid = {
        let q_mid = DVector::from_element(lay.stations, 0.5 * (q_range.0 + q_range.1));
        let c_mid = DVector::from_element(
            lay.stations,
            0.5 * (regulation.c_min + regulation.c_max),
        );
        regulation.control_target(&q_mid, &c_mid)?
    };
    let mut l_omega_empirical: f64 = 0.0;
    let mut l_j_empirical: f64 = 0.0;
    for _ in 0..samples {
        let x = region.sample(game, &mut rng);
        let y = region.sample(game, &mut rng);
        let d_eta = (&x.eta - &y.eta).norm();
        if d_eta < 1e-12 {
            continue;
        }
        let fx = game.game_map(&x, &zeta_mid)?;
        let fy = game.game_map(&y, &zeta_mid)?;
        l_omega_empirical = l_omega_empirical.max((fx - fy).norm() / d_eta);

        let qx = DVector::from_fn(lay.stations, |_, _| rng.random_range(q_range.0..=q_range.1));
        let cx = DVector::from_fn(lay.stations, |_, _| {
            rng.random_range(regulation.c_min..=regulation.c_max)
        });
        let qy = DVector::from_fn(lay.stations, |_, _| rng.random_range(q_range.0..=q_range.1));
        let cy = DVector::from_fn(lay.stations, |_, _| {
            rng.random_range(regulation.c_min..=regulation.c_max)
        });
        let jx = assemble_jacobians(game, &x)?;
        let jy = assemble_jacobians(game, &y)?;
        let (dux, _) = regulation.control_jacobian(&qx, &cx)?;
        let (duy, _) = regulation.control_jacobian(&qy, &cy)?;
        let map_x = &jx.j * dux;
        let map_y = &jy.j * duy;
        let d_xi = (DVector::from_fn(lay.stations, |k, _| qx[k] - qy[k]).norm_squared()
            + DVector::from_fn(lay.stations, |k, _| cx[k] - cy[k]).norm_squared())
        .sqrt();
        let dist = (d_eta * d_eta + d_xi * d_xi).sqrt();
        if dist > 1e-12 {
            l_j_empirical = l_j_empirical.max(spectral_norm(&(map_x - map_y)) / dist);
        }
    }

    Ok(LipschitzEstimates {
        l_omega_analytic,
        l_omega_empirical,
        l_j_analytic,
        l_j_empirical,
        rho_omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameConfig, PlayerSpec, QuadraticCost, QuadraticProfit};
    use crate::topology::StationGraph;
    use approx::assert_abs_diff_eq;

    fn ring3() -> StationGraph {
        let stations = vec!["s1".to_string(), "s2".to_string(), "s3".to_string()];
        let mut edges = Vec::new();
        for (f, t) in [("s1", "s2"), ("s2", "s3"), ("s3", "s1")] {
            edges.push((f.to_string(), t.to_string(), 0.5));
            edges.push((t.to_string(), f.to_string(), 0.5));
        }
        StationGraph::build(&stations, &edges).unwrap()
    }

    fn game() -> Game {
        let spec = PlayerSpec {
            beta_max: 4.0,
            alpha_max: 6.0,
            profit: QuadraticProfit {
                linear: 4.0,
                quadratic: 1.0,
            },
            cost: QuadraticCost { quadratic: 1.0 },
        };
        let config = GameConfig {
            epsilon: 0.1,
            tau: 0.05,
            gain: 0.5,
            margin: 0.1,
            mu_bound: 10.0,
            lambda_bound: 10.0,
        };
        Game::new(ring3(), vec![spec.clone(), spec], config).unwrap()
    }

    fn interior_state(game: &Game, seed: u64) -> GameState {
        let lay = *game.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut eta = DVector::zeros(lay.dim());
        for i in 0..lay.players {
            for k in 0..lay.stations {
                eta[lay.beta_pos(i, k)] = rng.random_range(0.5..3.5);
            }
            for e in 0..lay.arcs {
                eta[lay.alpha_pos(i, e)] = rng.random_range(0.5..5.5);
            }
            for l in 0..lay.balance_dim() {
                eta[lay.lambda_pos(i, l)] = rng.random_range(0.3..3.0);
            }
        }
        for l in 0..lay.coupling_dim() {
            eta[lay.mu_pos(l)] = rng.random_range(0.3..3.0);
        }
        GameState { eta }
    }

    #[test]
    fn dual_diagonal_matches_formula() {
        // mu = (1, 1, ...), eps 0.1, tau 0.01: R4 entries 0.11.
        let g = game();
        let lay = *g.layout();
        let mut state = interior_state(&g, 1);
        for l in 0..lay.coupling_dim() {
            state.eta[lay.mu_pos(l)] = 1.0;
        }
        let cfg = GameConfig {
            epsilon: 0.1,
            tau: 0.01,
            ..g.config().clone()
        };
        let g2 = Game::new(ring3(), g.specs().to_vec(), cfg).unwrap();
        let bundle = assemble_jacobians(&g2, &state).unwrap();
        for l in 0..lay.coupling_dim() {
            assert_abs_diff_eq!(bundle.r4[l], 0.11, epsilon = 1e-12);
        }
    }

    #[test]
    fn coupling_gradient_is_sign_pattern() {
        let g = game();
        let lay = *g.layout();
        let r2 = g.coupling_grad();
        for i in 0..lay.players {
            for k in 0..lay.stations {
                assert_eq!(r2[(k, lay.beta_pos(i, k))], 1.0);
                assert_eq!(r2[(lay.stations + k, lay.beta_pos(i, k))], -1.0);
            }
            for e in 0..lay.arcs {
                assert_eq!(r2[(0, lay.alpha_pos(i, e))], 0.0);
            }
        }
    }

    #[test]
    fn system_matrix_matches_finite_difference_jacobian() {
        let g = game();
        let lay = *g.layout();
        let zeta = DVector::from_element(3, 2.5);
        let state = interior_state(&g, 7);
        let jm = assemble_system_matrix(&g, &state).unwrap();
        let h = 1e-6;
        for col in 0..lay.dim() {
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus.eta[col] += h;
            minus.eta[col] -= h;
            let fp = g.game_map(&plus, &zeta).unwrap();
            let fm = g.game_map(&minus, &zeta).unwrap();
            for row in 0..lay.dim() {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let rel = (jm[(row, col)] - fd).abs() / fd.abs().max(1.0);
                assert!(
                    rel <= 1e-6,
                    "J_M({row},{col}) = {} vs fd {}",
                    jm[(row, col)],
                    fd
                );
            }
        }
    }

    #[test]
    fn quadratic_form_reduces_to_diagonal_blocks() {
        // Skew off-diagonal blocks cancel exactly.
        let g = game();
        let lay = *g.layout();
        let state = interior_state(&g, 3);
        let bundle = assemble_jacobians(&g, &state).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let x = DVector::from_fn(lay.dim(), |_, _| rng.random_range(-1.0..1.0));
            let quad = x.dot(&(&bundle.j_m * &x));
            let n = lay.primal_dim();
            let m = lay.coupling_dim();
            let mut diag = 0.0;
            for i in 0..n {
                diag += bundle.r1[i] * x[i] * x[i];
            }
            for l in 0..m {
                diag += bundle.r4[l] * x[n + l] * x[n + l];
            }
            for l in 0..lay.players * lay.balance_dim() {
                diag += bundle.r5[l] * x[n + m + l] * x[n + m + l];
            }
            assert_abs_diff_eq!(quad, diag, epsilon = 1e-12 * quad.abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_part_spectrum_is_bounded_below_by_the_modulus() {
        // The off-diagonal blocks are skew, so the symmetric part is the
        // diagonal (R1, R4, R5); its smallest eigenvalue must dominate
        // min(min_i(rho_i, rho'_i), eps).
        let g = game();
        let floor = g.monotonicity_modulus();
        for seed in 0..10 {
            let state = interior_state(&g, seed);
            let jm = assemble_system_matrix(&g, &state).unwrap();
            let sym = 0.5 * (&jm + jm.transpose());
            let min_eig = sym
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(
                min_eig >= floor - 1e-9,
                "symmetric-part eigenvalue {min_eig} below {floor}"
            );
        }
    }

    #[test]
    fn system_matrix_is_nonsingular_on_samples() {
        let g = game();
        for seed in 0..10 {
            let state = interior_state(&g, seed);
            let jm = assemble_system_matrix(&g, &state).unwrap();
            let det = jm.lu().determinant();
            assert!(det.abs() > 1e-12, "near-singular system at seed {seed}");
        }
    }

    #[test]
    fn prediction_is_linear_in_the_state_rate() {
        let g = game();
        let state = interior_state(&g, 5);
        let bundle = assemble_jacobians(&g, &state).unwrap();
        let reg = RegulationParams {
            c_min: 2.0,
            c_max: 3.0,
            beta_max: 8.0,
            players: 2,
            margin: 0.1,
            q_target: DVector::from_element(3, 1.0),
        };
        let q = DVector::from_element(3, 1.2);
        let c = DVector::from_element(3, 2.5);
        let (du, _) = reg.control_jacobian(&q, &c).unwrap();
        let zero = prediction_term(&bundle, &du, &DVector::zeros(6)).unwrap();
        assert_eq!(zero.amax(), 0.0);
        let xi_dot = DVector::from_fn(6, |k, _| 0.1 * (k as f64 + 1.0));
        let v1 = prediction_term(&bundle, &du, &xi_dot).unwrap();
        let v2 = prediction_term(&bundle, &du, &(2.0 * &xi_dot)).unwrap();
        assert_abs_diff_eq!((2.0 * &v1 - v2).amax(), 0.0, epsilon = 1e-12);
        // Block split covers the whole vector.
        let blocks = split_prediction(&g, &v1);
        assert_eq!(blocks.primal.len(), 2);
        assert_eq!(blocks.coupling.len(), 6);
        assert_eq!(blocks.dual.len(), 2);
    }

    #[test]
    fn empirical_lipschitz_is_below_analytic() {
        let g = game();
        let reg = RegulationParams {
            c_min: 2.0,
            c_max: 3.0,
            beta_max: 8.0,
            players: 2,
            margin: 0.1,
            q_target: DVector::from_element(3, 1.0),
        };
        let region = StateRegion {
            beta: vec![(0.3, 3.7); 2],
            alpha: vec![(0.3, 5.7); 2],
            mu: (0.2, 5.0),
            lambda: (0.2, 5.0),
        };
        let est =
            lipschitz_estimates(&g, &reg, &region, (0.0, 4.0), 0.3, 0.2, 300, 11).unwrap();
        assert!(est.l_omega_empirical <= est.l_omega_analytic);
        assert!(est.l_j_empirical <= est.l_j_analytic);
        assert!(est.l_omega_empirical > 0.0);
        assert!(est.l_j_empirical > 0.0);
    }

    #[test]
    fn monotonicity_modulus_is_min_of_listed_constants() {
        let spec = PlayerSpec {
            beta_max: 4.0,
            alpha_max: 6.0,
            profit: QuadraticProfit {
                linear: 2.0,
                quadratic: 0.5,
            },
            cost: QuadraticCost { quadratic: 1.0 },
        };
        let config = GameConfig {
            epsilon: 0.5,
            tau: 0.05,
            gain: 0.5,
            margin: 0.1,
            mu_bound: 10.0,
            lambda_bound: 10.0,
        };
        let g = Game::new(ring3(), vec![spec], config).unwrap();
        // rho = 1, rho' = 2, eps = 0.5.
        assert_abs_diff_eq!(g.monotonicity_modulus(), 0.5);
    }
}
