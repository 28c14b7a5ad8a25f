//! The barrier-regularized fleet game.
//!
//! Each player chooses delivery rates `beta` (per station) and empty-vehicle
//! transfer rates `alpha` (per directed arc) to minimize transfer cost minus
//! delivery profit, coupled to the other players through the shared delivery
//! target and to its own vehicle stocks through the balance constraint. Both
//! constraint families are written as asymmetric inequality pairs
//! (`G[l] = -G[l + S]`, `h[l] = -h[l + S]`), relaxed by multipliers with a
//! quadratic regularization `eps` and a logarithmic barrier weighted by
//! `tau`. The resulting game is unconstrained with a strongly monotone map of
//! stacked partial gradients, so it has a unique equilibrium.
//!
//! The flat decision layout is `[z_1 .. z_N, mu, lambda_1 .. lambda_N]` with
//! `z_i = (beta_i, alpha_i)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::topology::StationGraph;

/// Strongly concave quadratic delivery profit `B(x) = linear x - quadratic x^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticProfit {
    pub linear: f64,
    pub quadratic: f64,
}

impl QuadraticProfit {
    pub fn value(&self, x: f64) -> f64 {
        self.linear * x - self.quadratic * x * x
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.linear - 2.0 * self.quadratic * x
    }

    /// Concavity modulus `-B'' = 2 quadratic`.
    pub fn modulus(&self) -> f64 {
        2.0 * self.quadratic
    }
}

/// Strongly convex quadratic transfer cost `C(x) = quadratic x^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost {
    pub quadratic: f64,
}

impl QuadraticCost {
    pub fn value(&self, x: f64) -> f64 {
        self.quadratic * x * x
    }

    pub fn derivative(&self, x: f64) -> f64 {
        2.0 * self.quadratic * x
    }

    /// Convexity modulus `C'' = 2 quadratic`.
    pub fn modulus(&self) -> f64 {
        2.0 * self.quadratic
    }
}

/// One player's box ceilings and cost data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerSpec {
    pub beta_max: f64,
    pub alpha_max: f64,
    pub profit: QuadraticProfit,
    pub cost: QuadraticCost,
}

impl PlayerSpec {
    pub fn validate(&self, margin: f64) -> Result<()> {
        if self.profit.modulus() <= 0.0 || self.cost.modulus() <= 0.0 {
            return Err(Error::AssumptionViolated(
                "profit and cost moduli must be positive".into(),
            ));
        }
        if !(margin > 0.0 && margin < 0.5 * self.beta_max && margin < 0.5 * self.alpha_max) {
            return Err(Error::AssumptionViolated(format!(
                "margin {margin} must lie in (0, min(beta_max, alpha_max)/2)"
            )));
        }
        Ok(())
    }

    /// `(inf, sup)` of the player cost over the margin box, exact for the
    /// quadratic family (separable, so componentwise extremes add).
    pub fn cost_extremes(&self, stations: usize, arcs: usize, margin: f64) -> (f64, f64) {
        let beta_term = quad_extremes(
            self.profit.quadratic,
            -self.profit.linear,
            margin,
            self.beta_max - margin,
        );
        let alpha_term = quad_extremes(self.cost.quadratic, 0.0, margin, self.alpha_max - margin);
        (
            stations as f64 * beta_term.0 + arcs as f64 * alpha_term.0,
            stations as f64 * beta_term.1 + arcs as f64 * alpha_term.1,
        )
    }

    /// `sup |df/dbeta|` over the margin box.
    pub fn beta_gradient_sup(&self, margin: f64) -> f64 {
        let lo = -self.profit.derivative(margin);
        let hi = -self.profit.derivative(self.beta_max - margin);
        lo.abs().max(hi.abs())
    }

    /// `sup |df/dalpha|` over the margin box.
    pub fn alpha_gradient_sup(&self, margin: f64) -> f64 {
        self.cost
            .derivative(self.alpha_max - margin)
            .abs()
            .max(self.cost.derivative(margin).abs())
    }
}

/// Extremes of `a2 x^2 + a1 x` over `[lo, hi]`.
fn quad_extremes(a2: f64, a1: f64, lo: f64, hi: f64) -> (f64, f64) {
    let f = |x: f64| a2 * x * x + a1 * x;
    let mut min = f(lo).min(f(hi));
    let mut max = f(lo).max(f(hi));
    if a2 != 0.0 {
        let vertex = -a1 / (2.0 * a2);
        if vertex > lo && vertex < hi {
            min = min.min(f(vertex));
            max = max.max(f(vertex));
        }
    }
    (min, max)
}

/// Regularization, barrier, and coordinator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    /// Quadratic dual regularization, positive.
    pub epsilon: f64,
    /// Barrier weight, positive.
    pub tau: f64,
    /// Coordinator gain (step scale of the gradient flow), positive.
    pub gain: f64,
    /// Box margin shared with the rate boxes.
    pub margin: f64,
    /// Ceiling of the operator multiplier box `M = [0, mu_bound]^m`.
    pub mu_bound: f64,
    /// Ceiling of the player multiplier boxes `[0, lambda_bound]^p`.
    pub lambda_bound: f64,
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("tau", self.tau),
            ("gain", self.gain),
            ("margin", self.margin),
            ("mu_bound", self.mu_bound),
            ("lambda_bound", self.lambda_bound),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::AssumptionViolated(format!(
                    "game parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Index layout of the flat decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub stations: usize,
    pub arcs: usize,
    pub players: usize,
}

impl Layout {
    /// Per-player primal dimension `|S| + |arcs|`.
    pub fn per_player(&self) -> usize {
        self.stations + self.arcs
    }

    /// Total primal dimension.
    pub fn primal_dim(&self) -> usize {
        self.players * self.per_player()
    }

    /// Coupling-constraint count `m = 2 |S|`.
    pub fn coupling_dim(&self) -> usize {
        2 * self.stations
    }

    /// Per-player balance-constraint count `p = 2 |S|`.
    pub fn balance_dim(&self) -> usize {
        2 * self.stations
    }

    /// Full dimension of `(z, mu, lambda)`.
    pub fn dim(&self) -> usize {
        self.primal_dim() + self.coupling_dim() + self.players * self.balance_dim()
    }

    pub fn beta_pos(&self, player: usize, station: usize) -> usize {
        player * self.per_player() + station
    }

    pub fn alpha_pos(&self, player: usize, arc: usize) -> usize {
        player * self.per_player() + self.stations + arc
    }

    pub fn mu_pos(&self, l: usize) -> usize {
        self.primal_dim() + l
    }

    pub fn lambda_pos(&self, player: usize, l: usize) -> usize {
        self.primal_dim() + self.coupling_dim() + player * self.balance_dim() + l
    }
}

/// Flat game state `(z, mu, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub eta: DVector<f64>,
}

impl GameState {
    pub fn zeros(layout: &Layout) -> Self {
        Self {
            eta: DVector::zeros(layout.dim()),
        }
    }

    pub fn beta(&self, layout: &Layout, player: usize) -> DVector<f64> {
        DVector::from_fn(layout.stations, |k, _| self.eta[layout.beta_pos(player, k)])
    }

    pub fn alpha(&self, layout: &Layout, player: usize) -> DVector<f64> {
        DVector::from_fn(layout.arcs, |e, _| self.eta[layout.alpha_pos(player, e)])
    }

    pub fn mu(&self, layout: &Layout) -> DVector<f64> {
        DVector::from_fn(layout.coupling_dim(), |l, _| self.eta[layout.mu_pos(l)])
    }

    pub fn lambda(&self, layout: &Layout, player: usize) -> DVector<f64> {
        DVector::from_fn(layout.balance_dim(), |l, _| {
            self.eta[layout.lambda_pos(player, l)]
        })
    }

    /// Total delivery rate per station.
    pub fn delivery_total(&self, layout: &Layout) -> DVector<f64> {
        let mut u = DVector::zeros(layout.stations);
        for i in 0..layout.players {
            for k in 0..layout.stations {
                u[k] += self.eta[layout.beta_pos(i, k)];
            }
        }
        u
    }
}

/// Which objective `lagrangian_value` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagrangianPart {
    /// Player `i`'s regularized Lagrangian.
    Player(usize),
    /// The operator objective over the coupling multiplier.
    Operator,
}

/// Logarithmic barrier `psi(s) = ln(s / margin)`, defined for `s > 0`.
pub fn barrier(s: f64, margin: f64) -> f64 {
    if s > 0.0 {
        (s / margin).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Closed-form regularized multiplier `g(s) = (s + sqrt(s^2 + 4 eps tau)) / (2 eps)`.
///
/// Strictly increasing, strictly convex for `tau > 0`, and the unique
/// positive root of `eps g - s - tau / g = 0`. With `tau = 0` it degenerates
/// to `max(s, 0) / eps`.
pub fn multiplier_map(s: f64, epsilon: f64, tau: f64) -> f64 {
    (s + (s * s + 4.0 * epsilon * tau).sqrt()) / (2.0 * epsilon)
}

/// Operator objective given precomputed coupling values:
/// `<mu, g> - eps/2 |mu|^2 + tau sum psi(mu)`.
///
/// Returns negative infinity outside the barrier domain (the operator
/// maximizes this).
pub fn dual_operator_value(
    coupling: &DVector<f64>,
    mu: &DVector<f64>,
    epsilon: f64,
    tau: f64,
    margin: f64,
) -> f64 {
    let mut value = mu.dot(coupling) - 0.5 * epsilon * mu.norm_squared();
    for &m in mu.iter() {
        if m <= 0.0 {
            return f64::NEG_INFINITY;
        }
        value += tau * barrier(m, margin);
    }
    value
}

/// The game instance: graph, players, parameters, and the cached constant
/// constraint gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    graph: StationGraph,
    specs: Vec<PlayerSpec>,
    config: GameConfig,
    layout: Layout,
    /// Gradient of the coupling constraints in the primal variables, `m x n`.
    coupling_grad: DMatrix<f64>,
    /// Stacked per-player balance-constraint gradients, `(N p) x n`,
    /// block-diagonal across players.
    balance_grad: DMatrix<f64>,
}

impl Game {
    pub fn new(graph: StationGraph, specs: Vec<PlayerSpec>, config: GameConfig) -> Result<Self> {
        config.validate()?;
        if specs.is_empty() {
            return Err(Error::AssumptionViolated("need at least one player".into()));
        }
        for spec in &specs {
            spec.validate(config.margin)?;
        }
        let b0 = specs[0].beta_max;
        if specs.iter().any(|s| (s.beta_max - b0).abs() > 1e-12) {
            return Err(Error::AssumptionViolated(
                "delivery ceilings beta_max must be identical across players".into(),
            ));
        }
        let layout = Layout {
            stations: graph.station_count(),
            arcs: graph.arc_count(),
            players: specs.len(),
        };
        let coupling_grad = build_coupling_grad(&layout);
        let balance_grad = build_balance_grad(&graph, &layout);
        Ok(Self {
            graph,
            specs,
            config,
            layout,
            coupling_grad,
            balance_grad,
        })
    }

    pub fn graph(&self) -> &StationGraph {
        &self.graph
    }

    pub fn specs(&self) -> &[PlayerSpec] {
        &self.specs
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// `m x n` coupling-constraint gradient (entries in `{-1, 0, +1}`).
    pub fn coupling_grad(&self) -> &DMatrix<f64> {
        &self.coupling_grad
    }

    /// `(N p) x n` stacked balance-constraint gradient.
    pub fn balance_grad(&self) -> &DMatrix<f64> {
        &self.balance_grad
    }

    /// Smallest primal convexity modulus across players.
    pub fn min_modulus(&self) -> f64 {
        self.specs
            .iter()
            .map(|s| s.profit.modulus().min(s.cost.modulus()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Strong-monotonicity modulus of the game map,
    /// `min(min_i(rho_i, rho'_i), eps)`.
    pub fn monotonicity_modulus(&self) -> f64 {
        self.min_modulus().min(self.config.epsilon)
    }

    /// Coupling values `G = [sum_i beta_i - zeta; zeta - sum_i beta_i]`.
    pub fn coupling_values(&self, state: &GameState, zeta: &DVector<f64>) -> DVector<f64> {
        let s = self.layout.stations;
        let total = state.delivery_total(&self.layout);
        let mut g = DVector::zeros(2 * s);
        for k in 0..s {
            g[k] = total[k] - zeta[k];
            g[s + k] = -g[k];
        }
        g
    }

    /// Balance values `h_i = [A alpha_i - b(beta_i); -(A alpha_i - b(beta_i))]`.
    pub fn balance_values(&self, player: usize, state: &GameState) -> DVector<f64> {
        let s = self.layout.stations;
        let beta = state.beta(&self.layout, player);
        let alpha = state.alpha(&self.layout, player);
        let residual = self.graph.incidence() * alpha - self.graph.balance_rhs(&beta);
        let mut h = DVector::zeros(2 * s);
        for k in 0..s {
            h[k] = residual[k];
            h[s + k] = -residual[k];
        }
        h
    }

    /// Player cost `f_i = sum_arcs C(alpha) - sum_stations B(beta)`.
    pub fn player_cost(&self, player: usize, beta: &DVector<f64>, alpha: &DVector<f64>) -> Result<f64> {
        if beta.len() != self.layout.stations || alpha.len() != self.layout.arcs {
            return Err(Error::DimensionMismatch {
                what: "player decision",
                expected: self.layout.per_player(),
                actual: beta.len() + alpha.len(),
            });
        }
        let spec = &self.specs[player];
        let cost: f64 = alpha.iter().map(|&a| spec.cost.value(a)).sum();
        let profit: f64 = beta.iter().map(|&b| spec.profit.value(b)).sum();
        Ok(cost - profit)
    }

    /// Regularized Lagrangian of one player, or the operator objective.
    ///
    /// Outside the barrier domain the value is an infinite sentinel with the
    /// sign of the violating side: `+inf` when a primal barrier argument is
    /// non-positive (the minimizing player), `-inf` when a multiplier is
    /// (the maximizing one).
    pub fn lagrangian_value(
        &self,
        part: LagrangianPart,
        state: &GameState,
        zeta: &DVector<f64>,
    ) -> f64 {
        let cfg = &self.config;
        match part {
            LagrangianPart::Operator => {
                let g = self.coupling_values(state, zeta);
                dual_operator_value(&g, &state.mu(&self.layout), cfg.epsilon, cfg.tau, cfg.margin)
            }
            LagrangianPart::Player(i) => {
                let spec = &self.specs[i];
                let beta = state.beta(&self.layout, i);
                let alpha = state.alpha(&self.layout, i);
                for &b in beta.iter() {
                    if b <= 0.0 || b >= spec.beta_max {
                        return f64::INFINITY;
                    }
                }
                for &a in alpha.iter() {
                    if a <= 0.0 || a >= spec.alpha_max {
                        return f64::INFINITY;
                    }
                }
                let mu = state.mu(&self.layout);
                let lambda = state.lambda(&self.layout, i);
                if mu.iter().any(|&x| x <= 0.0) || lambda.iter().any(|&x| x <= 0.0) {
                    return f64::NEG_INFINITY;
                }
                let f = self.player_cost(i, &beta, &alpha).expect("validated dims");
                let g = self.coupling_values(state, zeta);
                let h = self.balance_values(i, state);
                let mut value = f + mu.dot(&g) + lambda.dot(&h);
                for &b in beta.iter() {
                    value -= cfg.tau * (barrier(b, cfg.margin) + barrier(spec.beta_max - b, cfg.margin));
                }
                for &a in alpha.iter() {
                    value -= cfg.tau * (barrier(a, cfg.margin) + barrier(spec.alpha_max - a, cfg.margin));
                }
                value -= 0.5 * cfg.epsilon * (mu.norm_squared() + lambda.norm_squared());
                for &m in mu.iter() {
                    value += cfg.tau * barrier(m, cfg.margin);
                }
                for &l in lambda.iter() {
                    value += cfg.tau * barrier(l, cfg.margin);
                }
                value
            }
        }
    }

    /// Player `i`'s primal gradient block (the `z_i` rows of the game map).
    ///
    /// Requires `z_i` strictly inside its barrier domain; the multipliers
    /// enter linearly and may take any value.
    pub fn primal_gradient(
        &self,
        player: usize,
        state: &GameState,
        _zeta: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let lay = &self.layout;
        let s = lay.stations;
        let spec = &self.specs[player];
        let tau = self.config.tau;
        let beta = state.beta(lay, player);
        let alpha = state.alpha(lay, player);
        for &b in beta.iter() {
            if b <= 0.0 || b >= spec.beta_max {
                return Err(Error::BoundaryState(format!(
                    "delivery rate {b} outside (0, {})",
                    spec.beta_max
                )));
            }
        }
        for &a in alpha.iter() {
            if a <= 0.0 || a >= spec.alpha_max {
                return Err(Error::BoundaryState(format!(
                    "transfer rate {a} outside (0, {})",
                    spec.alpha_max
                )));
            }
        }
        let mu = state.mu(lay);
        let lambda = state.lambda(lay, player);
        // One-sided multipliers of the asymmetric pairs.
        let mu_net = DVector::from_fn(s, |k, _| mu[k] - mu[s + k]);
        let lambda_net = DVector::from_fn(s, |k, _| lambda[k] - lambda[s + k]);

        let mut grad = DVector::zeros(lay.per_player());
        for k in 0..s {
            let mut gk = -spec.profit.derivative(beta[k]) + mu_net[k];
            // d h_l / d beta_k = -delta_{lk} + a_{k l} for neighbors l of k.
            gk -= lambda_net[k];
            for &l in self.graph.neighbors(k) {
                gk += self.graph.fraction(k, l) * lambda_net[l];
            }
            gk += -tau / beta[k] + tau / (spec.beta_max - beta[k]);
            grad[k] = gk;
        }
        for (e, &(from, to)) in self.graph.arcs().iter().enumerate() {
            let mut ge = spec.cost.derivative(alpha[e]);
            ge += lambda_net[to] - lambda_net[from];
            ge += -tau / alpha[e] + tau / (spec.alpha_max - alpha[e]);
            grad[s + e] = ge;
        }
        Ok(grad)
    }

    /// The stacked game map: primal gradients, then the negated operator
    /// gradient, then the negated player multiplier gradients. Its zeros are
    /// exactly the equilibria of the regularized game.
    pub fn game_map(&self, state: &GameState, zeta: &DVector<f64>) -> Result<DVector<f64>> {
        let lay = &self.layout;
        if state.eta.len() != lay.dim() {
            return Err(Error::DimensionMismatch {
                what: "game state",
                expected: lay.dim(),
                actual: state.eta.len(),
            });
        }
        if zeta.len() != lay.stations {
            return Err(Error::DimensionMismatch {
                what: "delivery target",
                expected: lay.stations,
                actual: zeta.len(),
            });
        }
        let eps = self.config.epsilon;
        let tau = self.config.tau;
        let mut f = DVector::zeros(lay.dim());

        for i in 0..lay.players {
            let block = self.primal_gradient(i, state, zeta)?;
            let base = i * lay.per_player();
            for j in 0..lay.per_player() {
                f[base + j] = block[j];
            }
        }

        let g = self.coupling_values(state, zeta);
        let mu = state.mu(lay);
        for l in 0..lay.coupling_dim() {
            if mu[l] <= 0.0 {
                return Err(Error::BoundaryState(format!(
                    "coupling multiplier {} not strictly positive",
                    mu[l]
                )));
            }
            f[lay.mu_pos(l)] = eps * mu[l] - g[l] - tau / mu[l];
        }

        for i in 0..lay.players {
            let h = self.balance_values(i, state);
            let lambda = state.lambda(lay, i);
            for l in 0..lay.balance_dim() {
                if lambda[l] <= 0.0 {
                    return Err(Error::BoundaryState(format!(
                        "balance multiplier {} not strictly positive",
                        lambda[l]
                    )));
                }
                f[lay.lambda_pos(i, l)] = eps * lambda[l] - h[l] - tau / lambda[l];
            }
        }
        Ok(f)
    }

    /// Sampled lower estimate of the strong-monotonicity ratio
    /// `<F(x) - F(y), x - y> / |x - y|^2` over the relaxed box times the
    /// positive orthant. Pairs closer than 1e-10 are resampled.
    pub fn monotonicity_certificate(
        &self,
        zeta: &DVector<f64>,
        sample_count: usize,
        seed: u64,
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = f64::INFINITY;
        let mut taken = 0;
        while taken < sample_count {
            let x = self.sample_interior(&mut rng);
            let y = self.sample_interior(&mut rng);
            let diff = &x.eta - &y.eta;
            let n2 = diff.norm_squared();
            if n2 < 1e-20 {
                continue;
            }
            let fx = self.game_map(&x, zeta).expect("interior sample");
            let fy = self.game_map(&y, zeta).expect("interior sample");
            let ratio = (fx - fy).dot(&diff) / n2;
            best = best.min(ratio);
            taken += 1;
        }
        best
    }

    fn sample_interior(&self, rng: &mut ChaCha8Rng) -> GameState {
        let lay = &self.layout;
        let mut eta = DVector::zeros(lay.dim());
        for i in 0..lay.players {
            let spec = &self.specs[i];
            for k in 0..lay.stations {
                eta[lay.beta_pos(i, k)] = rng.random_range(0.0..spec.beta_max).max(1e-12);
            }
            for e in 0..lay.arcs {
                eta[lay.alpha_pos(i, e)] = rng.random_range(0.0..spec.alpha_max).max(1e-12);
            }
            for l in 0..lay.balance_dim() {
                eta[lay.lambda_pos(i, l)] =
                    rng.random_range(0.0..self.config.lambda_bound).max(1e-12);
            }
        }
        for l in 0..lay.coupling_dim() {
            eta[lay.mu_pos(l)] = rng.random_range(0.0..self.config.mu_bound).max(1e-12);
        }
        GameState { eta }
    }
}

fn build_coupling_grad(layout: &Layout) -> DMatrix<f64> {
    let s = layout.stations;
    let mut r2 = DMatrix::zeros(layout.coupling_dim(), layout.primal_dim());
    for i in 0..layout.players {
        for k in 0..s {
            r2[(k, layout.beta_pos(i, k))] = 1.0;
            r2[(s + k, layout.beta_pos(i, k))] = -1.0;
        }
    }
    r2
}

fn build_balance_grad(graph: &StationGraph, layout: &Layout) -> DMatrix<f64> {
    let s = layout.stations;
    let p = layout.balance_dim();
    let mut r3 = DMatrix::zeros(layout.players * p, layout.primal_dim());
    for i in 0..layout.players {
        let row0 = i * p;
        for l in 0..s {
            // d h_l / d beta: -1 on the own station, + routing fraction from
            // each neighbor into l.
            r3[(row0 + l, layout.beta_pos(i, l))] = -1.0;
            for &k in graph.neighbors(l) {
                r3[(row0 + l, layout.beta_pos(i, k))] = graph.fraction(k, l);
            }
            for (e, &(from, to)) in graph.arcs().iter().enumerate() {
                let val = if to == l {
                    1.0
                } else if from == l {
                    -1.0
                } else {
                    0.0
                };
                r3[(row0 + l, layout.alpha_pos(i, e))] = val;
            }
            // Mirror row of the asymmetric pair.
            for j in 0..layout.per_player() {
                let col = i * layout.per_player() + j;
                r3[(row0 + s + l, col)] = -r3[(row0 + l, col)];
            }
        }
    }
    r3
}
