//! Physical layer: user queues, arrival-rate dynamics, and per-player
//! vehicle stocks, advanced with a fixed-step projected Euler scheme.
//!
//! Queue lengths follow `dQ = (c - u) dt` and are clamped at zero; arrival
//! rates follow a declared model saturated to `[c_min, c_max]`; vehicle
//! stocks follow the mass-conservation balance of delivery and transfer
//! rates, with an inflow-only branch at an empty station.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::topology::StationGraph;

/// State of the physical layer at a simulation instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    /// Queue length per station, users.
    pub q: DVector<f64>,
    /// Arrival rate per station, users per unit time.
    pub c: DVector<f64>,
    /// Vehicle count per player per station.
    pub v: Vec<DVector<f64>>,
    /// Simulation time.
    pub t: f64,
}

/// Arrival-rate model with declared bounds.
///
/// `rate_bound` is the declared bound on `|dc/dt|`; the derivative is clamped
/// to it, and saturated to zero whenever it would push a rate outside
/// `[c_min, c_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalModel {
    pub c_min: f64,
    pub c_max: f64,
    pub rate_bound: f64,
    pub kind: ArrivalKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalKind {
    /// Time-invariant rates.
    Constant { rates: Vec<f64> },
    /// `c(t) = base + amplitude * sin(omega t + phase)` per station,
    /// realized through its derivative.
    Sinusoid {
        base: Vec<f64>,
        amplitude: Vec<f64>,
        omega: Vec<f64>,
        phase: Vec<f64>,
    },
    /// Piecewise-constant target levels with rate-limited transitions: the
    /// rate ramps toward the level of the current segment at speed
    /// `(level - c) / ramp`, clamped to the declared rate bound.
    Piecewise {
        breakpoints: Vec<f64>,
        levels: Vec<Vec<f64>>,
        ramp: f64,
    },
}

impl ArrivalModel {
    /// Checks internal consistency and that the model range stays inside
    /// `[c_min, c_max]` with derivative bound `rate_bound`.
    pub fn validate(&self, stations: usize) -> Result<()> {
        if !(self.c_min > 0.0 && self.c_min < self.c_max) {
            return Err(Error::AssumptionViolated(format!(
                "arrival bounds must satisfy 0 < c_min < c_max, got [{}, {}]",
                self.c_min, self.c_max
            )));
        }
        if self.rate_bound < 0.0 {
            return Err(Error::AssumptionViolated(format!(
                "arrival rate bound must be non-negative, got {}",
                self.rate_bound
            )));
        }
        let check_len = |len: usize, what: &'static str| -> Result<()> {
            if len != stations {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: stations,
                    actual: len,
                });
            }
            Ok(())
        };
        let in_range = |x: f64| x >= self.c_min && x <= self.c_max;
        match &self.kind {
            ArrivalKind::Constant { rates } => {
                check_len(rates.len(), "constant arrival rates")?;
                if !rates.iter().all(|&r| in_range(r)) {
                    return Err(Error::AssumptionViolated(
                        "constant arrival rate outside [c_min, c_max]".into(),
                    ));
                }
            }
            ArrivalKind::Sinusoid {
                base,
                amplitude,
                omega,
                phase,
            } => {
                check_len(base.len(), "sinusoid base rates")?;
                check_len(amplitude.len(), "sinusoid amplitudes")?;
                check_len(omega.len(), "sinusoid frequencies")?;
                check_len(phase.len(), "sinusoid phases")?;
                for k in 0..stations {
                    if amplitude[k] < 0.0 || omega[k] < 0.0 {
                        return Err(Error::AssumptionViolated(
                            "sinusoid amplitude and frequency must be non-negative".into(),
                        ));
                    }
                    if !in_range(base[k] - amplitude[k]) || !in_range(base[k] + amplitude[k]) {
                        return Err(Error::AssumptionViolated(format!(
                            "sinusoid range at station {k} leaves [c_min, c_max]"
                        )));
                    }
                    if amplitude[k] * omega[k] > self.rate_bound + 1e-12 {
                        return Err(Error::AssumptionViolated(format!(
                            "sinusoid slope {} exceeds declared rate bound {}",
                            amplitude[k] * omega[k],
                            self.rate_bound
                        )));
                    }
                }
            }
            ArrivalKind::Piecewise {
                breakpoints,
                levels,
                ramp,
            } => {
                if *ramp <= 0.0 {
                    return Err(Error::AssumptionViolated(
                        "piecewise ramp time must be positive".into(),
                    ));
                }
                if levels.len() != breakpoints.len() + 1 {
                    return Err(Error::DimensionMismatch {
                        what: "piecewise levels (need breakpoints + 1 segments)",
                        expected: breakpoints.len() + 1,
                        actual: levels.len(),
                    });
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::AssumptionViolated(
                        "piecewise breakpoints must be strictly increasing".into(),
                    ));
                }
                for seg in levels {
                    check_len(seg.len(), "piecewise level row")?;
                    if !seg.iter().all(|&r| in_range(r)) {
                        return Err(Error::AssumptionViolated(
                            "piecewise level outside [c_min, c_max]".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn raw_derivative(&self, c: &DVector<f64>, t: f64) -> DVector<f64> {
        match &self.kind {
            ArrivalKind::Constant { rates } => DVector::zeros(rates.len()),
            ArrivalKind::Sinusoid {
                amplitude,
                omega,
                phase,
                ..
            } => DVector::from_fn(amplitude.len(), |k, _| {
                amplitude[k] * omega[k] * (omega[k] * t + phase[k]).cos()
            }),
            ArrivalKind::Piecewise {
                breakpoints,
                levels,
                ramp,
            } => {
                let seg = breakpoints.partition_point(|&b| b <= t);
                DVector::from_fn(c.len(), |k, _| (levels[seg][k] - c[k]) / ramp)
            }
        }
    }

    /// Arrival-rate derivative at `(c, q, t)`, clamped to the declared rate
    /// bound and saturated at the range boundary.
    ///
    /// The queue argument is part of the model interface (a general arrival
    /// law may be queue-aware); the built-in kinds ignore it.
    pub fn derivative(&self, c: &DVector<f64>, _q: &DVector<f64>, t: f64) -> DVector<f64> {
        let mut d = self.raw_derivative(c, t);
        for k in 0..d.len() {
            d[k] = d[k].clamp(-self.rate_bound, self.rate_bound);
            if (c[k] >= self.c_max && d[k] > 0.0) || (c[k] <= self.c_min && d[k] < 0.0) {
                d[k] = 0.0;
            }
        }
        d
    }
}

/// Net vehicle-flow residual `A alpha - b(beta)` for one player.
///
/// Zero exactly when the transfer plan keeps every interior vehicle stock
/// constant.
pub fn vehicle_balance_residual(
    graph: &StationGraph,
    beta: &DVector<f64>,
    alpha: &DVector<f64>,
) -> DVector<f64> {
    graph.incidence() * alpha - graph.balance_rhs(beta)
}

/// Advances the plant one explicit Euler step with the applied controls.
///
/// Queues integrate `c - u` (with `u` the summed delivery rates) and are
/// clamped at zero. Vehicle stocks integrate the balance residual at interior
/// points and the inflow terms only at an empty station, then clamp at zero.
pub fn plant_step(
    graph: &StationGraph,
    state: &PlantState,
    beta: &[DVector<f64>],
    alpha: &[DVector<f64>],
    model: &ArrivalModel,
    dt: f64,
) -> Result<PlantState> {
    if dt <= 0.0 {
        return Err(Error::NegativeDt(dt));
    }
    let s = graph.station_count();
    let d = graph.arc_count();
    if state.q.len() != s || state.c.len() != s {
        return Err(Error::DimensionMismatch {
            what: "plant state",
            expected: s,
            actual: state.q.len(),
        });
    }
    if beta.len() != state.v.len() || alpha.len() != state.v.len() {
        return Err(Error::DimensionMismatch {
            what: "player controls",
            expected: state.v.len(),
            actual: beta.len(),
        });
    }
    for (b, a) in beta.iter().zip(alpha) {
        if b.len() != s {
            return Err(Error::DimensionMismatch {
                what: "delivery rates",
                expected: s,
                actual: b.len(),
            });
        }
        if a.len() != d {
            return Err(Error::DimensionMismatch {
                what: "transfer rates",
                expected: d,
                actual: a.len(),
            });
        }
    }

    let u: DVector<f64> = beta.iter().fold(DVector::zeros(s), |acc, b| acc + b);

    let mut q = &state.q + dt * (&state.c - &u);
    q.apply(|x| *x = x.max(0.0));

    let cdot = model.derivative(&state.c, &state.q, state.t);
    let mut c = &state.c + dt * cdot;
    c.apply(|x| *x = x.clamp(model.c_min, model.c_max));

    let mut v = Vec::with_capacity(state.v.len());
    for (i, vi) in state.v.iter().enumerate() {
        let residual = vehicle_balance_residual(graph, &beta[i], &alpha[i]);
        let mut next = vi.clone();
        for k in 0..s {
            let vdot = if vi[k] > 0.0 {
                residual[k]
            } else {
                // Empty station: deliveries into k and transfer inflow only.
                let delivered: f64 = graph
                    .neighbors(k)
                    .iter()
                    .map(|&j| graph.fraction(j, k) * beta[i][j])
                    .sum();
                let transfer_in: f64 = graph
                    .arcs()
                    .iter()
                    .zip(alpha[i].iter())
                    .filter(|(&(_, to), _)| to == k)
                    .map(|(_, &a)| a)
                    .sum();
                delivered + transfer_in
            };
            next[k] = (vi[k] + dt * vdot).max(0.0);
        }
        v.push(next);
    }

    Ok(PlantState {
        q,
        c,
        v,
        t: state.t + dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn line2() -> StationGraph {
        let stations = vec!["s1".to_string(), "s2".to_string()];
        let edges = vec![
            ("s1".to_string(), "s2".to_string(), 1.0),
            ("s2".to_string(), "s1".to_string(), 1.0),
        ];
        StationGraph::build(&stations, &edges).unwrap()
    }

    fn ring3() -> StationGraph {
        let stations = vec!["s1".to_string(), "s2".to_string(), "s3".to_string()];
        let mut edges = Vec::new();
        for (f, t) in [("s1", "s2"), ("s2", "s3"), ("s3", "s1")] {
            edges.push((f.to_string(), t.to_string(), 0.5));
            edges.push((t.to_string(), f.to_string(), 0.5));
        }
        StationGraph::build(&stations, &edges).unwrap()
    }

    fn constant_model(s: usize, rate: f64) -> ArrivalModel {
        ArrivalModel {
            c_min: rate - 1.0,
            c_max: rate + 1.0,
            rate_bound: 0.0,
            kind: ArrivalKind::Constant {
                rates: vec![rate; s],
            },
        }
    }

    #[test]
    fn constant_model_has_zero_derivative() {
        let m = constant_model(3, 2.0);
        let c = DVector::from_element(3, 2.0);
        let q = DVector::zeros(3);
        for t in [0.0, 1.0, 17.5] {
            assert_eq!(m.derivative(&c, &q, t), DVector::zeros(3));
        }
    }

    #[test]
    fn sinusoid_derivative_is_analytic() {
        let m = ArrivalModel {
            c_min: 1.0,
            c_max: 5.0,
            rate_bound: 0.2,
            kind: ArrivalKind::Sinusoid {
                base: vec![3.0],
                amplitude: vec![0.5],
                omega: vec![0.4],
                phase: vec![0.0],
            },
        };
        m.validate(1).unwrap();
        let q = DVector::zeros(1);
        for t in [0.0, 0.7, 3.1] {
            let c = DVector::from_element(1, 3.0 + 0.5 * (0.4f64 * t).sin());
            let d = m.derivative(&c, &q, t);
            assert_abs_diff_eq!(d[0], 0.5 * 0.4 * (0.4f64 * t).cos(), epsilon = 1e-15);
        }
    }

    #[test]
    fn derivative_saturates_at_the_upper_bound() {
        let m = ArrivalModel {
            c_min: 1.0,
            c_max: 3.0,
            rate_bound: 1.0,
            kind: ArrivalKind::Piecewise {
                breakpoints: vec![],
                levels: vec![vec![3.0]],
                ramp: 0.1,
            },
        };
        // Raw derivative would be positive at c = c_max.
        let c = DVector::from_element(1, 3.0);
        let d = m.derivative(&c, &DVector::zeros(1), 0.0);
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn queue_takes_one_euler_step() {
        let g = line2();
        let state = PlantState {
            q: DVector::from_vec(vec![5.0, 5.0]),
            c: DVector::from_vec(vec![2.0, 2.0]),
            v: vec![DVector::from_element(2, 4.0)],
            t: 0.0,
        };
        let beta = vec![DVector::from_vec(vec![3.0, 2.0])];
        let alpha = vec![DVector::from_vec(vec![1.0, 1.0])];
        let m = constant_model(2, 2.0);
        let next = plant_step(&g, &state, &beta, &alpha, &m, 0.1).unwrap();
        assert_abs_diff_eq!(next.q[0], 4.9, epsilon = 1e-15);
        // u = c at the second station: queue unchanged.
        assert_abs_diff_eq!(next.q[1], 5.0, epsilon = 1e-15);
    }

    #[test]
    fn balanced_transfers_keep_vehicles_constant() {
        let g = ring3();
        // Uniform deliveries with uniform routing give b = 0; a circulation
        // (equal flow both ways on each edge) satisfies A alpha = 0.
        let beta = vec![DVector::from_element(3, 1.5)];
        let alpha = vec![DVector::from_element(6, 0.7)];
        let state = PlantState {
            q: DVector::from_element(3, 2.0),
            c: DVector::from_element(3, 2.0),
            v: vec![DVector::from_element(3, 5.0)],
            t: 0.0,
        };
        let m = constant_model(3, 2.0);
        let next = plant_step(&g, &state, &beta, &alpha, &m, 0.25).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(next.v[0][k], 5.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn balance_rhs_matches_hand_computation() {
        // Two stations, all users cross over: b = (b1 - b2, b2 - b1).
        let g = line2();
        let beta = DVector::from_vec(vec![2.0, 1.0]);
        let b = g.balance_rhs(&beta);
        assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_plan_has_zero_residual() {
        let g = ring3();
        let beta = DVector::from_element(3, 1.0);
        let alpha = DVector::from_element(6, 0.3);
        let r = vehicle_balance_residual(&g, &beta, &alpha);
        for k in 0..3 {
            assert_abs_diff_eq!(r[k], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn queue_clamps_at_zero_under_excess_delivery() {
        let g = line2();
        let state = PlantState {
            q: DVector::from_vec(vec![0.05, 0.0]),
            c: DVector::from_element(2, 2.0),
            v: vec![DVector::from_element(2, 4.0)],
            t: 0.0,
        };
        // Deliveries far above arrivals drive both queues down.
        let beta = vec![DVector::from_element(2, 3.0)];
        let alpha = vec![DVector::from_element(2, 1.0)];
        let m = constant_model(2, 2.0);
        let next = plant_step(&g, &state, &beta, &alpha, &m, 0.1).unwrap();
        assert_eq!(next.q[0], 0.0);
        assert_eq!(next.q[1], 0.0);
    }

    #[test]
    fn empty_station_only_receives_vehicles() {
        // At v = 0 the outflow terms are switched off; the stock can only
        // grow, and stays non-negative.
        let g = line2();
        let state = PlantState {
            q: DVector::from_element(2, 1.0),
            c: DVector::from_element(2, 2.0),
            v: vec![DVector::from_vec(vec![0.0, 3.0])],
            t: 0.0,
        };
        // Unbalanced plan draining station 1 hard.
        let beta = vec![DVector::from_vec(vec![2.5, 0.1])];
        let alpha = vec![DVector::from_vec(vec![3.0, 0.0])];
        let m = constant_model(2, 2.0);
        let next = plant_step(&g, &state, &beta, &alpha, &m, 0.1).unwrap();
        // Inflow at the empty station: delivered users 1 * 0.1 plus transfer 0.
        assert_abs_diff_eq!(next.v[0][0], 0.1 * 0.1, epsilon = 1e-15);
        assert!(next.v[0].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn negative_dt_is_rejected() {
        let g = line2();
        let state = PlantState {
            q: DVector::zeros(2),
            c: DVector::from_element(2, 2.0),
            v: vec![DVector::zeros(2)],
            t: 0.0,
        };
        let beta = vec![DVector::zeros(2)];
        let alpha = vec![DVector::zeros(2)];
        let m = constant_model(2, 2.0);
        assert!(matches!(
            plant_step(&g, &state, &beta, &alpha, &m, -0.1),
            Err(Error::NegativeDt(_))
        ));
    }

    proptest! {
        // The residual is affine in alpha with linear part A.
        #[test]
        fn residual_is_affine_in_alpha(
            alpha in proptest::collection::vec(0.0f64..5.0, 6),
            delta in proptest::collection::vec(-1.0f64..1.0, 6),
        ) {
            let g = ring3();
            let beta = DVector::from_vec(vec![1.0, 2.0, 0.5]);
            let a0 = DVector::from_vec(alpha);
            let dv = DVector::from_vec(delta);
            let lhs = vehicle_balance_residual(&g, &beta, &(&a0 + &dv))
                - vehicle_balance_residual(&g, &beta, &a0);
            let rhs = g.incidence() * dv;
            for k in 0..3 {
                prop_assert!((lhs[k] - rhs[k]).abs() < 1e-12);
            }
        }
    }
}
