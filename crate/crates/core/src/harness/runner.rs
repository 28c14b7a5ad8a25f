//! Closed-loop simulation: plant and coordinator stepped synchronously, with
//! balance-projected controls applied to the plant and periodic equilibrium
//! oracle samples stored alongside the trace.

use std::io::Write;

use nalgebra::DVector;

use crate::coordinator::{balance_project, coordinator_step};
use crate::equilibrium::solve_ne;
use crate::error::{Error, Result};
use crate::game::GameState;
use crate::plant::plant_step;

use super::scenario::Scenario;

/// One row of the simulation trace.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    /// Vehicle stocks, `v[player][station]`.
    pub v: Vec<Vec<f64>>,
    /// Aggregate applied delivery rate per station.
    pub u: Vec<f64>,
    /// Applied delivery rates, `beta[player][station]`.
    pub beta: Vec<Vec<f64>>,
    /// Applied (balance-projected) transfer rates, `alpha[player][arc]`.
    pub alpha: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    /// Distance to the sampled equilibrium, at oracle steps only.
    pub err_ne: Option<f64>,
    /// Largest coupling-constraint magnitude.
    pub err_coupling: f64,
    /// Largest post-projection balance residual across players.
    pub err_balance: f64,
    /// Instantaneous player cost of the applied controls.
    pub cost: Vec<f64>,
}

/// Equilibrium sample aligned to a trace step.
#[derive(Debug, Clone)]
pub struct OracleSample {
    pub step: usize,
    pub eta: DVector<f64>,
}

/// Full simulation output.
#[derive(Debug, Clone)]
pub struct Trace {
    pub dt: f64,
    pub records: Vec<TraceRecord>,
    pub oracle: Vec<OracleSample>,
}

impl Trace {
    /// CSV header matching `write_csv`.
    pub fn csv_header(scenario: &Scenario) -> String {
        let graph = scenario.game.graph();
        let lay = *scenario.game.layout();
        let mut cols = vec!["t".to_string()];
        let stations = graph.stations();
        cols.extend(stations.iter().map(|s| format!("Q_{s}")));
        cols.extend(stations.iter().map(|s| format!("c_{s}")));
        for i in 1..=lay.players {
            cols.extend(stations.iter().map(|s| format!("v_{i}_{s}")));
        }
        cols.extend(stations.iter().map(|s| format!("u_{s}")));
        for i in 1..=lay.players {
            cols.extend(stations.iter().map(|s| format!("beta_{i}_{s}")));
        }
        for i in 1..=lay.players {
            cols.extend(
                graph
                    .arcs()
                    .iter()
                    .map(|&(f, t)| format!("alpha_{i}_{}_{}", stations[f], stations[t])),
            );
        }
        cols.extend((1..=lay.coupling_dim()).map(|l| format!("mu_{l}")));
        for i in 1..=lay.players {
            cols.extend((1..=lay.balance_dim()).map(|l| format!("lambda_{i}_{l}")));
        }
        cols.push("err_ne".into());
        cols.push("err_G".into());
        cols.push("err_balance".into());
        cols.join(",")
    }

    /// Writes the trace as CSV with a header row. Floating-point values use
    /// the shortest round-trip representation, so identical runs produce
    /// byte-identical files.
    pub fn write_csv<W: Write>(&self, scenario: &Scenario, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::csv_header(scenario))?;
        let mut line = String::new();
        for rec in &self.records {
            line.clear();
            push_float(&mut line, rec.t);
            for block in [&rec.q, &rec.c] {
                for &x in block.iter() {
                    line.push(',');
                    push_float(&mut line, x);
                }
            }
            for v in &rec.v {
                for &x in v {
                    line.push(',');
                    push_float(&mut line, x);
                }
            }
            for &x in &rec.u {
                line.push(',');
                push_float(&mut line, x);
            }
            for b in &rec.beta {
                for &x in b {
                    line.push(',');
                    push_float(&mut line, x);
                }
            }
            for a in &rec.alpha {
                for &x in a {
                    line.push(',');
                    push_float(&mut line, x);
                }
            }
            for &x in &rec.mu {
                line.push(',');
                push_float(&mut line, x);
            }
            for lam in &rec.lambda {
                for &x in lam {
                    line.push(',');
                    push_float(&mut line, x);
                }
            }
            line.push(',');
            if let Some(e) = rec.err_ne {
                push_float(&mut line, e);
            }
            line.push(',');
            push_float(&mut line, rec.err_coupling);
            line.push(',');
            push_float(&mut line, rec.err_balance);
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, scenario: &Scenario) -> String {
        let mut buf = Vec::new();
        self.write_csv(scenario, &mut buf).expect("write to vec");
        String::from_utf8(buf).expect("csv is utf8")
    }
}

fn push_float(line: &mut String, x: f64) {
    use std::fmt::Write as _;
    write!(line, "{x:?}").expect("format float");
}

/// Runs the closed loop over the scenario horizon.
///
/// Each step: read the applied controls off the current coordinator state
/// (transfer rates balance-projected per player), record the trace row,
/// advance the coordinator with the model state rate, then advance the
/// plant. Produces `floor(horizon / dt) + 1` records; every `oracle_every`
/// steps the equilibrium oracle is solved (warm-started) and the distance
/// recorded.
pub fn run_closed_loop(scenario: &Scenario) -> Result<Trace> {
    let game = &scenario.game;
    let reg = &scenario.regulation;
    let graph = game.graph();
    let lay = *game.layout();
    let cfg = game.config();
    let dt = scenario.dt;
    let steps = (scenario.horizon / dt).floor() as usize;

    let mut plant = scenario.initial_plant.clone();
    let mut state = scenario.initial_game.clone();
    let mut warm: Option<GameState> = None;

    let mut records = Vec::with_capacity(steps + 1);
    let mut oracle = Vec::new();

    for step in 0..=steps {
        let t = step as f64 * dt;
        let zeta = reg.control_target(&plant.q, &plant.c)?;

        // Applied controls: deliveries as estimated, transfers projected
        // onto the balance set.
        let mut beta = Vec::with_capacity(lay.players);
        let mut alpha = Vec::with_capacity(lay.players);
        let mut err_balance: f64 = 0.0;
        for i in 0..lay.players {
            let spec = &game.specs()[i];
            let b = state.beta(&lay, i);
            let a_hat = state.alpha(&lay, i);
            let lo = DVector::from_element(lay.arcs, cfg.margin);
            let hi = DVector::from_element(lay.arcs, spec.alpha_max - cfg.margin);
            let a = balance_project(graph, &b, &a_hat, &lo, &hi)?;
            err_balance = err_balance
                .max(crate::plant::vehicle_balance_residual(graph, &b, &a).amax());
            beta.push(b);
            alpha.push(a);
        }
        let mut u = DVector::zeros(lay.stations);
        for b in &beta {
            u += b;
        }

        let err_coupling = game.coupling_values(&state, &zeta).amax();

        let err_ne = if step % scenario.oracle_every == 0 {
            let ne = solve_ne(game, &zeta, warm.as_ref())?;
            let err = (&state.eta - &ne.eta).norm();
            oracle.push(OracleSample {
                step,
                eta: ne.eta.clone(),
            });
            warm = Some(ne);
            Some(err)
        } else {
            None
        };

        let cost = (0..lay.players)
            .map(|i| game.player_cost(i, &beta[i], &alpha[i]))
            .collect::<Result<Vec<f64>>>()?;

        records.push(TraceRecord {
            t,
            q: plant.q.iter().cloned().collect(),
            c: plant.c.iter().cloned().collect(),
            v: plant.v.iter().map(|v| v.iter().cloned().collect()).collect(),
            u: u.iter().cloned().collect(),
            beta: beta.iter().map(|b| b.iter().cloned().collect()).collect(),
            alpha: alpha.iter().map(|a| a.iter().cloned().collect()).collect(),
            mu: state.mu(&lay).iter().cloned().collect(),
            lambda: (0..lay.players)
                .map(|i| state.lambda(&lay, i).iter().cloned().collect())
                .collect(),
            err_ne,
            err_coupling,
            err_balance,
            cost,
        });

        if step == steps {
            break;
        }

        // Model state rate fed to the prediction term.
        let q_dot = DVector::from_fn(lay.stations, |k, _| {
            let drift = plant.c[k] - u[k];
            if plant.q[k] > 0.0 || drift > 0.0 {
                drift
            } else {
                0.0
            }
        });
        let c_dot = scenario.arrivals.derivative(&plant.c, &plant.q, t);
        let mut xi_dot = DVector::zeros(2 * lay.stations);
        for k in 0..lay.stations {
            xi_dot[k] = q_dot[k];
            xi_dot[lay.stations + k] = c_dot[k];
        }
        let xi_rate = xi_dot.norm();
        if xi_rate > scenario.xi_rate_bound * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::AssumptionViolated(format!(
                "state rate {xi_rate:.6e} exceeds the declared bound {:.6e} at t = {t}",
                scenario.xi_rate_bound
            )));
        }

        state = coordinator_step(game, reg, &state, &plant.q, &plant.c, &xi_dot, dt)?;
        plant = plant_step(graph, &plant, &beta, &alpha, &scenario.arrivals, dt)?;
    }

    Ok(Trace {
        dt,
        records,
        oracle,
    })
}
