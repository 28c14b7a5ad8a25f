//! Regenerates the scenario files under `scenarios/`.
//!
//! The ring3 acceptance scenario is anchored at the closed-loop steady
//! state: the queue level is solved so the summed equilibrium deliveries
//! match the constant arrivals exactly, the coordinator starts at the
//! equilibrium, the state-rate bound is declared from a measured
//! verification run, and the coordinator gain is picked to minimize the
//! contraction factor given the scenario's sampled Lipschitz estimates.
//!
//! Run with `cargo run --release -p modcoord-core --example gen_scenarios`.

use modcoord_core::harness::ledger::{constants_ledger, contraction_factor};
use modcoord_core::harness::steady::closed_loop_fixed_point;
use modcoord_core::harness::{run_closed_loop, Scenario, Trace};

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    std::fs::create_dir_all(&root).expect("create scenarios dir");

    write(&root, "line2.toml", LINE2.trim_start());
    write(&root, "ring4_sin.toml", RING4_SIN.trim_start());
    write(&root, "ring3_dynamic.toml", RING3_DYNAMIC.trim_start());
    gen_ring3_acceptance(&root);
}

fn write(root: &std::path::Path, name: &str, text: &str) {
    let path = root.join(name);
    std::fs::write(&path, text).expect("write scenario");
    // Must load cleanly.
    Scenario::from_file(&path).unwrap_or_else(|e| panic!("{name} invalid: {e}"));
    println!("wrote {}", path.display());
}

fn max_state_rate(trace: &Trace) -> f64 {
    // Constant arrivals: the state rate is the per-station delivery gap.
    let mut worst: f64 = 0.0;
    for rec in &trace.records {
        let sq: f64 = rec
            .c
            .iter()
            .zip(&rec.u)
            .map(|(c, u)| (c - u) * (c - u))
            .sum();
        worst = worst.max(sq.sqrt());
    }
    worst
}

fn gen_ring3_acceptance(root: &std::path::Path) {
    // Bootstrap scenario with placeholder initial state and loose rate bound.
    let boot = ring3_toml(1e-4, 1.0, 20.0, &Init::placeholder());
    let mut scenario = Scenario::from_toml_str(&boot).expect("bootstrap scenario");

    // Anchor on the closed-loop steady state.
    let c = scenario.initial_plant.c.clone();
    let (q_star, eta_star) =
        closed_loop_fixed_point(&scenario.game, &scenario.regulation, &c).expect("fixed point");
    println!("steady queues: {:?}", q_star.as_slice());
    scenario.initial_plant.q = q_star.clone();
    scenario.initial_game = eta_star.clone();

    // Measure the residual state rate on a short verification run, then
    // declare a bound with two orders of margin for the full horizon.
    scenario.horizon = 5.0;
    let trace = run_closed_loop(&scenario).expect("verification run");
    let measured = max_state_rate(&trace);
    let xi_bound = (measured * 100.0).max(1e-12);
    println!("measured state rate {measured:.3e}, declaring {xi_bound:.3e}");
    scenario.xi_rate_bound = xi_bound;

    // Pick the gain minimizing the contraction factor for the sampled
    // Lipschitz estimates: theta^2 is quadratic in the gain.
    let ledger = constants_ledger(&scenario).expect("ledger");
    let drift = ledger.l_j * ledger.d_u1 * xi_bound;
    let gain = ((ledger.rho_omega - ledger.l_omega * drift)
        / (2.0 * ledger.l_omega * ledger.l_omega))
        .max(1e-9);
    let theta = contraction_factor(
        gain,
        ledger.rho_omega,
        ledger.l_omega,
        ledger.l_j,
        ledger.d_u1,
        xi_bound,
    );
    println!(
        "L_Omega {:.4}, L_J {:.4}, gain {gain:.6e}, theta - 1 = {:.3e}",
        ledger.l_omega,
        ledger.l_j,
        theta - 1.0
    );
    assert!(theta < 1.0, "no contraction at the tuned gain");

    // Rebuild with the tuned gain and the production horizon.
    let init = Init::from_state(&scenario, &q_star);
    let text = ring3_toml(gain, xi_bound, 210.0, &init);
    let path = root.join("ring3_acceptance.toml");
    std::fs::write(&path, &text).expect("write ring3");
    let reloaded = Scenario::from_file(&path).expect("reload ring3");
    let ledger = constants_ledger(&reloaded).expect("ledger");
    assert!(ledger.contraction, "reloaded scenario lost contraction");
    println!(
        "wrote {} (theta = {:.12}, band = {:.4})",
        path.display(),
        ledger.theta,
        ledger.regulation_band()
    );
}

struct Init {
    q: [f64; 3],
    beta: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    mu: Vec<f64>,
    lambda: Vec<Vec<f64>>,
}

impl Init {
    fn placeholder() -> Self {
        Init {
            q: [1.0; 3],
            beta: vec![vec![1.25; 3]; 2],
            alpha: vec![vec![0.5; 6]; 2],
            mu: vec![1.0; 6],
            lambda: vec![vec![1.0; 6]; 2],
        }
    }

    fn from_state(scenario: &Scenario, q: &nalgebra::DVector<f64>) -> Self {
        let lay = *scenario.game.layout();
        let st = &scenario.initial_game;
        Init {
            q: [q[0], q[1], q[2]],
            beta: (0..lay.players)
                .map(|i| st.beta(&lay, i).iter().cloned().collect())
                .collect(),
            alpha: (0..lay.players)
                .map(|i| st.alpha(&lay, i).iter().cloned().collect())
                .collect(),
            mu: st.mu(&lay).iter().cloned().collect(),
            lambda: (0..lay.players)
                .map(|i| st.lambda(&lay, i).iter().cloned().collect())
                .collect(),
        }
    }
}

fn fmt_row(values: &[f64]) -> String {
    let inner: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    format!("[{}]", inner.join(", "))
}

fn fmt_rows(rows: &[Vec<f64>]) -> String {
    let inner: Vec<String> = rows.iter().map(|r| fmt_row(r)).collect();
    format!("[{}]", inner.join(", "))
}

fn ring3_toml(gain: f64, xi_bound: f64, horizon: f64, init: &Init) -> String {
    format!(
        r#"name = "ring3-acceptance"
seed = 42
dt = 0.001
horizon = {horizon:?}
oracle_every = 100
xi_rate_bound = {xi_bound:?}

[graph]
stations = ["s1", "s2", "s3"]

[[graph.edges]]
from = "s1"
to = "s2"
fraction = 0.5

[[graph.edges]]
from = "s2"
to = "s1"
fraction = 0.5

[[graph.edges]]
from = "s2"
to = "s3"
fraction = 0.5

[[graph.edges]]
from = "s3"
to = "s2"
fraction = 0.5

[[graph.edges]]
from = "s3"
to = "s1"
fraction = 0.5

[[graph.edges]]
from = "s1"
to = "s3"
fraction = 0.5

[arrivals]
c_min = 2.0
c_max = 3.0
rate_bound = 0.0
kind = "constant"
rates = [2.5, 2.5, 2.5]

[[players]]
beta_max = 3.0
alpha_max = 2.0
profit_linear = 2.0
profit_quadratic = 0.5
cost_quadratic = 0.5

[[players]]
beta_max = 3.0
alpha_max = 2.0
profit_linear = 2.0
profit_quadratic = 0.5
cost_quadratic = 0.5

[game]
epsilon = 0.001
tau = 0.001
gain = {gain:?}
margin = 0.01

[regulation]
q_target = [0.2, 0.2, 0.2]

[initial]
q = {q}
c = [2.5, 2.5, 2.5]
v = [[5.0, 5.0, 5.0], [5.0, 5.0, 5.0]]
beta = {beta}
alpha = {alpha}
mu = {mu}
lambda = {lambda}
"#,
        q = fmt_row(&init.q),
        beta = fmt_rows(&init.beta),
        alpha = fmt_rows(&init.alpha),
        mu = fmt_row(&init.mu),
        lambda = fmt_rows(&init.lambda),
    )
}

const LINE2: &str = r#"
name = "line2"
seed = 17
dt = 0.001
horizon = 5.0
oracle_every = 100

[graph]
stations = ["s1", "s2"]

[[graph.edges]]
from = "s1"
to = "s2"
fraction = 1.0

[[graph.edges]]
from = "s2"
to = "s1"
fraction = 1.0

[arrivals]
c_min = 2.0
c_max = 3.0
rate_bound = 0.0
kind = "constant"
rates = [2.4, 2.6]

[[players]]
beta_max = 3.0
alpha_max = 8.0
profit_linear = 2.0
profit_quadratic = 0.5
cost_quadratic = 0.5

[[players]]
beta_max = 3.0
alpha_max = 8.0
profit_linear = 3.0
profit_quadratic = 0.75
cost_quadratic = 0.4

[game]
epsilon = 0.01
tau = 0.01
gain = 0.5
margin = 0.05

[regulation]
q_target = [1.0, 1.5]

[initial]
q = [1.0, 1.5]
c = [2.4, 2.6]
v = [[5.0, 5.0], [5.0, 5.0]]
beta = [[1.25, 1.25], [1.25, 1.25]]
alpha = [[1.0, 1.0], [1.0, 1.0]]
mu = [1.0, 1.0, 1.0, 1.0]
lambda = [[1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 1.0]]
"#;

const RING4_SIN: &str = r#"
name = "ring4-sinusoid"
seed = 23
dt = 0.001
horizon = 20.0
oracle_every = 200

[graph]
stations = ["s1", "s2", "s3", "s4"]

[[graph.edges]]
from = "s1"
to = "s2"
fraction = 0.5

[[graph.edges]]
from = "s2"
to = "s1"
fraction = 0.5

[[graph.edges]]
from = "s2"
to = "s3"
fraction = 0.5

[[graph.edges]]
from = "s3"
to = "s2"
fraction = 0.5

[[graph.edges]]
from = "s3"
to = "s4"
fraction = 0.5

[[graph.edges]]
from = "s4"
to = "s3"
fraction = 0.5

[[graph.edges]]
from = "s4"
to = "s1"
fraction = 0.5

[[graph.edges]]
from = "s1"
to = "s4"
fraction = 0.5

[arrivals]
c_min = 2.0
c_max = 3.0
rate_bound = 0.15
kind = "sinusoid"
base = [2.5, 2.5, 2.5, 2.5]
amplitude = [0.3, 0.2, 0.25, 0.3]
omega = [0.5, 0.4, 0.3, 0.5]
phase = [0.0, 1.5707963267948966, 3.141592653589793, 0.7853981633974483]

[[players]]
beta_max = 2.0
alpha_max = 3.0
profit_linear = 1.5
profit_quadratic = 0.5
cost_quadratic = 0.5

[[players]]
beta_max = 2.0
alpha_max = 3.0
profit_linear = 2.0
profit_quadratic = 0.75
cost_quadratic = 0.6

[[players]]
beta_max = 2.0
alpha_max = 3.0
profit_linear = 1.8
profit_quadratic = 0.6
cost_quadratic = 0.45

[game]
epsilon = 0.01
tau = 0.01
gain = 0.5
margin = 0.05

[regulation]
q_target = [1.0, 1.0, 1.0, 1.0]

[initial]
q = [1.0, 1.0, 1.0, 1.0]
c = [2.5, 2.7, 2.5, 2.71]
v = [[5.0, 5.0, 5.0, 5.0], [5.0, 5.0, 5.0, 5.0], [5.0, 5.0, 5.0, 5.0]]
beta = [[0.8, 0.8, 0.8, 0.8], [0.8, 0.8, 0.8, 0.8], [0.8, 0.8, 0.8, 0.8]]
alpha = [[2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0], [2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0], [2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0]]
mu = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
lambda = [[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]]
"#;

const RING3_DYNAMIC: &str = r#"
name = "ring3-dynamic"
seed = 5
dt = 0.001
horizon = 60.0
oracle_every = 100

[graph]
stations = ["s1", "s2", "s3"]

[[graph.edges]]
from = "s1"
to = "s2"
fraction = 0.5

[[graph.edges]]
from = "s2"
to = "s1"
fraction = 0.5

[[graph.edges]]
from = "s2"
to = "s3"
fraction = 0.5

[[graph.edges]]
from = "s3"
to = "s2"
fraction = 0.5

[[graph.edges]]
from = "s3"
to = "s1"
fraction = 0.5

[[graph.edges]]
from = "s1"
to = "s3"
fraction = 0.5

[arrivals]
c_min = 2.0
c_max = 3.0
rate_bound = 0.0
kind = "constant"
rates = [2.5, 2.5, 2.5]

[[players]]
beta_max = 3.0
alpha_max = 4.0
profit_linear = 2.0
profit_quadratic = 0.5
cost_quadratic = 0.5

[[players]]
beta_max = 3.0
alpha_max = 4.0
profit_linear = 2.0
profit_quadratic = 0.5
cost_quadratic = 0.5

[game]
epsilon = 0.01
tau = 0.01
gain = 5.0
margin = 0.05

[regulation]
q_target = [1.0, 1.0, 1.0]

[initial]
q = [3.5, 3.2, 3.5]
c = [2.5, 2.5, 2.5]
v = [[5.0, 5.0, 5.0], [5.0, 5.0, 5.0]]
beta = [[1.25, 1.25, 1.25], [1.25, 1.25, 1.25]]
alpha = [[1.0, 1.0, 1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 1.0, 1.0, 1.0]]
mu = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
lambda = [[1.0, 1.0, 1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 1.0, 1.0, 1.0]]
"#;
