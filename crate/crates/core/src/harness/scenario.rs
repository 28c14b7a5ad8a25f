//! Scenario definition, TOML serialization, and load-time validation.
//!
//! A scenario file is a single human-readable TOML document (see the repo
//! README for the schema). Loading rebuilds the runtime objects, derives the
//! multiplier caps from the closed-form constants, and verifies the model
//! assumptions: capacity headroom of the delivery ceilings, bounded arrival
//! variation, and feasibility of the balance set for every admissible
//! delivery vector (checked exactly at the vertices of the delivery box,
//! which suffices because the feasible set is convex).

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::equilibrium::approximation_bounds;
use crate::game::{
    multiplier_map, Game, GameConfig, GameState, PlayerSpec, QuadraticCost, QuadraticProfit,
};
use crate::plant::{ArrivalKind, ArrivalModel, PlantState};
use crate::qp;
use crate::regulation::RegulationParams;
use crate::topology::StationGraph;

/// A fully validated simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    /// Oracle sampling stride of the closed-loop runner, in steps.
    pub oracle_every: usize,
    /// Declared bound on the plant state rate `|dxi/dt|`, validated along
    /// every trace.
    pub xi_rate_bound: f64,
    pub game: Game,
    pub regulation: RegulationParams,
    pub arrivals: ArrivalModel,
    pub initial_plant: PlantState,
    pub initial_game: GameState,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    name: String,
    seed: u64,
    #[serde(default = "default_dt")]
    dt: f64,
    horizon: f64,
    #[serde(default = "default_oracle_every")]
    oracle_every: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi_rate_bound: Option<f64>,
    graph: GraphSection,
    arrivals: ArrivalsSection,
    players: Vec<PlayerSection>,
    game: GameSection,
    regulation: RegulationSection,
    initial: InitialSection,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_oracle_every() -> usize {
    100
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphSection {
    stations: Vec<String>,
    edges: Vec<EdgeSection>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeSection {
    from: String,
    to: String,
    fraction: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrivalsSection {
    c_min: f64,
    c_max: f64,
    rate_bound: f64,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    rates: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phase: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    breakpoints: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ramp: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlayerSection {
    beta_max: f64,
    alpha_max: f64,
    profit_linear: f64,
    profit_quadratic: f64,
    cost_quadratic: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GameSection {
    epsilon: f64,
    tau: f64,
    gain: f64,
    margin: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegulationSection {
    q_target: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InitialSection {
    q: Vec<f64>,
    c: Vec<f64>,
    v: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    mu: Vec<f64>,
    lambda: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::ParseError {
            path: "<document>".into(),
            message: e.to_string(),
        })?;
        let file: ScenarioFile =
            serde_path_to_error::deserialize(value).map_err(|e| classify_parse_error(&e))?;
        file.into_scenario()
    }

    pub fn to_toml_string(&self) -> String {
        let file = self.to_file();
        toml::to_string_pretty(&file).expect("scenario serialization")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    fn to_file(&self) -> ScenarioFile {
        let graph = self.game.graph();
        let lay = *self.game.layout();
        let edges = graph
            .arcs()
            .iter()
            .map(|&(f, t)| EdgeSection {
                from: graph.stations()[f].clone(),
                to: graph.stations()[t].clone(),
                fraction: graph.fraction(f, t),
            })
            .collect();
        let arrivals = match &self.arrivals.kind {
            ArrivalKind::Constant { rates } => ArrivalsSection {
                c_min: self.arrivals.c_min,
                c_max: self.arrivals.c_max,
                rate_bound: self.arrivals.rate_bound,
                kind: "constant".into(),
                rates: Some(rates.clone()),
                base: None,
                amplitude: None,
                omega: None,
                phase: None,
                breakpoints: None,
                levels: None,
                ramp: None,
            },
            ArrivalKind::Sinusoid {
                base,
                amplitude,
                omega,
                phase,
            } => ArrivalsSection {
                c_min: self.arrivals.c_min,
                c_max: self.arrivals.c_max,
                rate_bound: self.arrivals.rate_bound,
                kind: "sinusoid".into(),
                rates: None,
                base: Some(base.clone()),
                amplitude: Some(amplitude.clone()),
                omega: Some(omega.clone()),
                phase: Some(phase.clone()),
                breakpoints: None,
                levels: None,
                ramp: None,
            },
            ArrivalKind::Piecewise {
                breakpoints,
                levels,
                ramp,
            } => ArrivalsSection {
                c_min: self.arrivals.c_min,
                c_max: self.arrivals.c_max,
                rate_bound: self.arrivals.rate_bound,
                kind: "piecewise".into(),
                rates: None,
                base: None,
                amplitude: None,
                omega: None,
                phase: None,
                breakpoints: Some(breakpoints.clone()),
                levels: Some(levels.clone()),
                ramp: Some(*ramp),
            },
        };
        let players = self
            .game
            .specs()
            .iter()
            .map(|s| PlayerSection {
                beta_max: s.beta_max,
                alpha_max: s.alpha_max,
                profit_linear: s.profit.linear,
                profit_quadratic: s.profit.quadratic,
                cost_quadratic: s.cost.quadratic,
            })
            .collect();
        let cfg = self.game.config();
        let initial = InitialSection {
            q: self.initial_plant.q.iter().cloned().collect(),
            c: self.initial_plant.c.iter().cloned().collect(),
            v: self
                .initial_plant
                .v
                .iter()
                .map(|v| v.iter().cloned().collect())
                .collect(),
            beta: (0..lay.players)
                .map(|i| self.initial_game.beta(&lay, i).iter().cloned().collect())
                .collect(),
            alpha: (0..lay.players)
                .map(|i| self.initial_game.alpha(&lay, i).iter().cloned().collect())
                .collect(),
            mu: self.initial_game.mu(&lay).iter().cloned().collect(),
            lambda: (0..lay.players)
                .map(|i| self.initial_game.lambda(&lay, i).iter().cloned().collect())
                .collect(),
        };
        ScenarioFile {
            name: self.name.clone(),
            seed: self.seed,
            dt: self.dt,
            horizon: self.horizon,
            oracle_every: self.oracle_every,
            xi_rate_bound: Some(self.xi_rate_bound),
            graph: GraphSection {
                stations: graph.stations().to_vec(),
                edges,
            },
            arrivals,
            players,
            game: GameSection {
                epsilon: cfg.epsilon,
                tau: cfg.tau,
                gain: cfg.gain,
                margin: cfg.margin,
            },
            regulation: RegulationSection {
                q_target: self.regulation.q_target.iter().cloned().collect(),
            },
            initial,
        }
    }
}

fn classify_parse_error(e: &serde_path_to_error::Error<toml::de::Error>) -> Error {
    let path = e.path().to_string();
    let message = e.inner().to_string();
    if let Some(field) = message
        .split("missing field `")
        .nth(1)
        .and_then(|rest| rest.split('`').next())
    {
        let full = if path.is_empty() || path == "." {
            field.to_string()
        } else {
            format!("{path}.{field}")
        };
        return Error::MissingField(full);
    }
    Error::ParseError { path, message }
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        if self.dt <= 0.0 {
            return Err(Error::NegativeDt(self.dt));
        }
        if self.horizon <= 0.0 || self.oracle_every == 0 {
            return Err(Error::AssumptionViolated(
                "horizon must be positive and oracle_every at least 1".into(),
            ));
        }

        let edges: Vec<(String, String, f64)> = self
            .graph
            .edges
            .iter()
            .map(|e| (e.from.clone(), e.to.clone(), e.fraction))
            .collect();
        let graph = StationGraph::build(&self.graph.stations, &edges)?;
        let s = graph.station_count();

        let specs: Vec<PlayerSpec> = self
            .players
            .iter()
            .map(|p| PlayerSpec {
                beta_max: p.beta_max,
                alpha_max: p.alpha_max,
                profit: QuadraticProfit {
                    linear: p.profit_linear,
                    quadratic: p.profit_quadratic,
                },
                cost: QuadraticCost {
                    quadratic: p.cost_quadratic,
                },
            })
            .collect();
        if specs.is_empty() {
            return Err(Error::MissingField("players".into()));
        }

        let arrivals = self.arrivals.into_model(s)?;
        arrivals.validate(s)?;

        if self.regulation.q_target.len() != s {
            return Err(Error::DimensionMismatch {
                what: "q_target",
                expected: s,
                actual: self.regulation.q_target.len(),
            });
        }
        let regulation = RegulationParams {
            c_min: arrivals.c_min,
            c_max: arrivals.c_max,
            beta_max: specs.iter().map(|p| p.beta_max).sum(),
            players: specs.len(),
            margin: self.game.margin,
            q_target: DVector::from_vec(self.regulation.q_target.clone()),
        };
        regulation.validate()?;

        // Multiplier caps from the closed-form constants: the equilibrium
        // band plus the largest prediction drive.
        let bounds = approximation_bounds(
            &graph,
            &specs,
            self.game.epsilon,
            self.game.tau,
            self.game.margin,
        );
        let (d_u1, _) = regulation.derivative_bounds(s);
        let min_modulus = specs
            .iter()
            .map(|p| p.profit.modulus().min(p.cost.modulus()))
            .fold(f64::INFINITY, f64::min);
        let xi_rate_bound = match self.xi_rate_bound {
            Some(b) if b >= 0.0 => b,
            Some(b) => {
                return Err(Error::AssumptionViolated(format!(
                    "xi_rate_bound must be non-negative, got {b}"
                )))
            }
            None => default_xi_rate_bound(&regulation, &arrivals, s),
        };
        let jn_norm = 2.0f64.sqrt();
        let delta_v =
            jn_norm * d_u1 * xi_rate_bound / (self.game.epsilon * min_modulus);
        let mu_bound =
            multiplier_map(bounds.sigma_g, self.game.epsilon, self.game.tau) + delta_v;
        let lambda_bound =
            multiplier_map(bounds.sigma_h, self.game.epsilon, self.game.tau) + delta_v;

        let config = GameConfig {
            epsilon: self.game.epsilon,
            tau: self.game.tau,
            gain: self.game.gain,
            margin: self.game.margin,
            mu_bound,
            lambda_bound,
        };
        let game = Game::new(graph, specs, config)?;

        let initial_plant = self.initial.plant_state(&game)?;
        let initial_game = self.initial.game_state(&game)?;
        check_initial_conditions(&game, &arrivals, &initial_plant, &initial_game)?;
        check_balance_capacity(&game)?;

        Ok(Scenario {
            name: self.name,
            seed: self.seed,
            dt: self.dt,
            horizon: self.horizon,
            oracle_every: self.oracle_every,
            xi_rate_bound,
            game,
            regulation,
            arrivals,
            initial_plant,
            initial_game,
        })
    }
}

/// Conservative state-rate bound when the scenario does not declare one:
/// `sqrt(|S|) (delta_c + max |c - u|)` over the realizable control range.
fn default_xi_rate_bound(reg: &RegulationParams, arrivals: &ArrivalModel, s: usize) -> f64 {
    let na = reg.players as f64 * reg.margin;
    let max_gap = (arrivals.c_max - na).max(reg.beta_max - na - arrivals.c_min);
    (s as f64).sqrt() * (arrivals.rate_bound + max_gap)
}

impl ArrivalsSection {
    fn into_model(self, s: usize) -> Result<ArrivalModel> {
        let need = |field: Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
            field.ok_or_else(|| Error::MissingField(format!("arrivals.{name}")))
        };
        let kind = match self.kind.as_str() {
            "constant" => ArrivalKind::Constant {
                rates: need(self.rates, "rates")?,
            },
            "sinusoid" => ArrivalKind::Sinusoid {
                base: need(self.base, "base")?,
                amplitude: need(self.amplitude, "amplitude")?,
                omega: need(self.omega, "omega")?,
                phase: self.phase.unwrap_or_else(|| vec![0.0; s]),
            },
            "piecewise" => ArrivalKind::Piecewise {
                breakpoints: self.breakpoints.unwrap_or_default(),
                levels: self
                    .levels
                    .ok_or_else(|| Error::MissingField("arrivals.levels".into()))?,
                ramp: self
                    .ramp
                    .ok_or_else(|| Error::MissingField("arrivals.ramp".into()))?,
            },
            other => {
                return Err(Error::ParseError {
                    path: "arrivals.kind".into(),
                    message: format!("unknown arrival kind {other:?}"),
                })
            }
        };
        Ok(ArrivalModel {
            c_min: self.c_min,
            c_max: self.c_max,
            rate_bound: self.rate_bound,
            kind,
        })
    }
}

impl InitialSection {
    fn plant_state(&self, game: &Game) -> Result<PlantState> {
        let lay = *game.layout();
        let expect = |len: usize, what: &'static str| -> Result<()> {
            if len != lay.stations {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: lay.stations,
                    actual: len,
                });
            }
            Ok(())
        };
        expect(self.q.len(), "initial.q")?;
        expect(self.c.len(), "initial.c")?;
        if self.v.len() != lay.players {
            return Err(Error::DimensionMismatch {
                what: "initial.v",
                expected: lay.players,
                actual: self.v.len(),
            });
        }
        let v = self
            .v
            .iter()
            .map(|row| {
                expect(row.len(), "initial.v row")?;
                Ok(DVector::from_vec(row.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PlantState {
            q: DVector::from_vec(self.q.clone()),
            c: DVector::from_vec(self.c.clone()),
            v,
            t: 0.0,
        })
    }

    fn game_state(&self, game: &Game) -> Result<GameState> {
        let lay = *game.layout();
        if self.beta.len() != lay.players
            || self.alpha.len() != lay.players
            || self.lambda.len() != lay.players
        {
            return Err(Error::DimensionMismatch {
                what: "initial game state players",
                expected: lay.players,
                actual: self.beta.len(),
            });
        }
        if self.mu.len() != lay.coupling_dim() {
            return Err(Error::DimensionMismatch {
                what: "initial.mu",
                expected: lay.coupling_dim(),
                actual: self.mu.len(),
            });
        }
        let mut eta = DVector::zeros(lay.dim());
        for i in 0..lay.players {
            if self.beta[i].len() != lay.stations
                || self.alpha[i].len() != lay.arcs
                || self.lambda[i].len() != lay.balance_dim()
            {
                return Err(Error::DimensionMismatch {
                    what: "initial game state row",
                    expected: lay.stations,
                    actual: self.beta[i].len(),
                });
            }
            for k in 0..lay.stations {
                eta[lay.beta_pos(i, k)] = self.beta[i][k];
            }
            for e in 0..lay.arcs {
                eta[lay.alpha_pos(i, e)] = self.alpha[i][e];
            }
            for l in 0..lay.balance_dim() {
                eta[lay.lambda_pos(i, l)] = self.lambda[i][l];
            }
        }
        for l in 0..lay.coupling_dim() {
            eta[lay.mu_pos(l)] = self.mu[l];
        }
        Ok(GameState { eta })
    }
}

fn check_initial_conditions(
    game: &Game,
    arrivals: &ArrivalModel,
    plant: &PlantState,
    state: &GameState,
) -> Result<()> {
    let lay = *game.layout();
    let cfg = game.config();
    if plant.q.iter().any(|&q| q <= 0.0) {
        return Err(Error::AssumptionViolated(
            "initial queue lengths must be strictly positive".into(),
        ));
    }
    if plant
        .c
        .iter()
        .any(|&c| c < arrivals.c_min || c > arrivals.c_max)
    {
        return Err(Error::AssumptionViolated(
            "initial arrival rates must lie in [c_min, c_max]".into(),
        ));
    }
    if plant.v.iter().any(|v| v.iter().any(|&x| x <= 0.0)) {
        return Err(Error::AssumptionViolated(
            "initial vehicle stocks must be strictly positive".into(),
        ));
    }
    for (i, spec) in game.specs().iter().enumerate() {
        let beta = state.beta(&lay, i);
        let alpha = state.alpha(&lay, i);
        if beta
            .iter()
            .any(|&b| b < cfg.margin - 1e-12 || b > spec.beta_max - cfg.margin + 1e-12)
        {
            return Err(Error::AssumptionViolated(format!(
                "initial delivery rates of player {} leave the margin box",
                i + 1
            )));
        }
        if alpha
            .iter()
            .any(|&a| a < cfg.margin - 1e-12 || a > spec.alpha_max - cfg.margin + 1e-12)
        {
            return Err(Error::AssumptionViolated(format!(
                "initial transfer rates of player {} leave the margin box",
                i + 1
            )));
        }
        let lambda = state.lambda(&lay, i);
        if lambda
            .iter()
            .any(|&l| l <= 0.0 || l > cfg.lambda_bound + 1e-12)
        {
            return Err(Error::AssumptionViolated(format!(
                "initial balance multipliers of player {} leave (0, cap]",
                i + 1
            )));
        }
    }
    let mu = state.mu(&lay);
    if mu.iter().any(|&m| m <= 0.0 || m > cfg.mu_bound + 1e-12) {
        return Err(Error::AssumptionViolated(
            "initial coupling multipliers leave (0, cap]".into(),
        ));
    }
    Ok(())
}

/// Balance-capacity check: for every vertex of every player's delivery box
/// there must be an admissible transfer plan with zero net flow.
fn check_balance_capacity(game: &Game) -> Result<()> {
    let lay = *game.layout();
    let cfg = game.config();
    let graph = game.graph();
    let s = lay.stations;
    for (i, spec) in game.specs().iter().enumerate() {
        let lo = DVector::from_element(lay.arcs, cfg.margin);
        let hi = DVector::from_element(lay.arcs, spec.alpha_max - cfg.margin);
        for corner in 0..(1usize << s) {
            let beta = DVector::from_fn(s, |k, _| {
                if corner >> k & 1 == 1 {
                    spec.beta_max - cfg.margin
                } else {
                    cfg.margin
                }
            });
            let b = graph.balance_rhs(&beta);
            if !qp::box_affine_feasible(graph.incidence(), &b, &lo, &hi)? {
                return Err(Error::AssumptionViolated(format!(
                    "player {} cannot balance delivery vertex {:?} with admissible transfers",
                    i + 1,
                    beta.as_slice()
                )));
            }
        }
    }
    Ok(())
}
