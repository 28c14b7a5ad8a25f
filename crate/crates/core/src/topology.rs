//! Station graph, routing fractions, and the incidence matrix encoding
//! vehicle-flow conservation.
//!
//! The service graph is undirected and connected; every undirected edge is
//! represented by its two directed arcs, each carrying a routing fraction
//! `a[k][k']` (the share of users arriving at `k` who travel to `k'`). The
//! fractions leaving a station sum to one. The incidence matrix `A` has one
//! row per station and one column per directed arc: `-1` on the origin row,
//! `+1` on the destination row. Transfer-rate vectors are indexed by the same
//! arc ordering, so `A * alpha` is the net empty-vehicle inflow per station.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stochasticity tolerance for routing row sums. Stricter would reject
/// decimal inputs such as 0.1 + 0.9.
pub const ROUTING_TOL: f64 = 1e-12;

/// Immutable station graph with routing fractions and cached incidence data.
///
/// Stations are kept sorted by identifier and directed arcs sorted
/// lexicographically by (origin, destination), so matrices and traces are
/// reproducible for a given input set.
#[derive(Debug, Clone, PartialEq)]
pub struct StationGraph {
    stations: Vec<String>,
    arcs: Vec<(usize, usize)>,
    fractions: Vec<f64>,
    arc_index: BTreeMap<(usize, usize), usize>,
    neighbors: Vec<Vec<usize>>,
    incidence: DMatrix<f64>,
    incidence_pinv: DMatrix<f64>,
}

impl StationGraph {
    /// Builds and validates a graph from directed edges `(from, to, fraction)`.
    ///
    /// Requirements checked here: at least two distinct stations, no
    /// self-loops or duplicate arcs, a symmetric arc set, exit-stochastic
    /// routing rows, and connectivity.
    pub fn build(stations: &[String], edges: &[(String, String, f64)]) -> Result<Self> {
        let mut names: Vec<String> = stations.to_vec();
        names.sort();
        names.dedup();
        if names.len() < 2 {
            return Err(Error::InvalidEdge(format!(
                "need at least two distinct stations, got {}",
                names.len()
            )));
        }
        let index_of = |name: &str| -> Result<usize> {
            names
                .binary_search_by(|n| n.as_str().cmp(name))
                .map_err(|_| Error::InvalidEdge(format!("unknown station {name:?} in edge list")))
        };

        let mut arc_index = BTreeMap::new();
        let mut entries = Vec::with_capacity(edges.len());
        for (from, to, fraction) in edges {
            let f = index_of(from)?;
            let t = index_of(to)?;
            if f == t {
                return Err(Error::InvalidEdge(format!("self-loop at station {from:?}")));
            }
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::InvalidEdge(format!(
                    "routing fraction {fraction} on ({from}, {to}) is outside [0, 1]"
                )));
            }
            if arc_index.insert((f, t), 0usize).is_some() {
                return Err(Error::InvalidEdge(format!("duplicate edge ({from}, {to})")));
            }
            entries.push((f, t, *fraction));
        }

        // Symmetric closure of an undirected graph: every arc has its reverse.
        for &(f, t, _) in &entries {
            if !arc_index.contains_key(&(t, f)) {
                return Err(Error::AsymmetricEdges {
                    from: names[f].clone(),
                    to: names[t].clone(),
                });
            }
        }

        entries.sort_by_key(|&(f, t, _)| (f, t));
        let arcs: Vec<(usize, usize)> = entries.iter().map(|&(f, t, _)| (f, t)).collect();
        let fractions: Vec<f64> = entries.iter().map(|&(_, _, a)| a).collect();
        for (i, &(f, t)) in arcs.iter().enumerate() {
            *arc_index.get_mut(&(f, t)).unwrap() = i;
        }

        let s = names.len();
        let mut neighbors = vec![Vec::new(); s];
        for &(f, t) in &arcs {
            neighbors[f].push(t);
        }

        for (k, nbrs) in neighbors.iter().enumerate() {
            let sum: f64 = nbrs
                .iter()
                .map(|&t| fractions[arc_index[&(k, t)]])
                .sum();
            if (sum - 1.0).abs() > ROUTING_TOL {
                return Err(Error::NonStochasticRouting {
                    station: names[k].clone(),
                    sum,
                });
            }
        }

        // Connectivity by breadth-first search. An isolated station has an
        // empty routing row and is already rejected above, but a split graph
        // with locally stochastic rows is not.
        let mut seen = vec![false; s];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(k) = queue.pop() {
            for &t in &neighbors[k] {
                if !seen[t] {
                    seen[t] = true;
                    queue.push(t);
                }
            }
        }
        if seen.iter().any(|&v| !v) {
            return Err(Error::NotConnected);
        }

        let mut incidence = DMatrix::zeros(s, arcs.len());
        for (col, &(f, t)) in arcs.iter().enumerate() {
            incidence[(f, col)] = -1.0;
            incidence[(t, col)] = 1.0;
        }
        let incidence_pinv = incidence
            .clone()
            .svd(true, true)
            .pseudo_inverse(1e-12)
            .expect("SVD of incidence matrix");

        Ok(Self {
            stations: names,
            arcs,
            fractions,
            arc_index,
            neighbors,
            incidence,
            incidence_pinv,
        })
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    /// Number of directed arcs (twice the undirected edge count).
    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn stations(&self) -> &[String] {
        &self.stations
    }

    pub fn station_index(&self, name: &str) -> Option<usize> {
        self.stations.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    /// Directed arcs in column order of the incidence matrix.
    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    /// Out-neighbors of a station (equal to in-neighbors by symmetry).
    pub fn neighbors(&self, station: usize) -> &[usize] {
        &self.neighbors[station]
    }

    /// Routing fraction on the directed arc `(from, to)`; zero if absent.
    pub fn fraction(&self, from: usize, to: usize) -> f64 {
        self.arc_index
            .get(&(from, to))
            .map_or(0.0, |&i| self.fractions[i])
    }

    /// Station-by-arc incidence matrix.
    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    /// Pseudoinverse of the incidence matrix, cached for balance projections.
    pub fn incidence_pinv(&self) -> &DMatrix<f64> {
        &self.incidence_pinv
    }

    /// Net delivery imbalance `b[k] = beta[k] - sum_{k' in N_k} a[k'][k] beta[k']`.
    ///
    /// A transfer plan `alpha` keeps every vehicle stock constant exactly when
    /// `A alpha = b`.
    pub fn balance_rhs(&self, beta: &DVector<f64>) -> DVector<f64> {
        let s = self.station_count();
        let mut b = DVector::zeros(s);
        for k in 0..s {
            let inflow: f64 = self.neighbors[k]
                .iter()
                .map(|&j| self.fraction(j, k) * beta[j])
                .sum();
            b[k] = beta[k] - inflow;
        }
        b
    }
}
