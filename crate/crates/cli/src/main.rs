//! Command-line front end: simulate scenarios, solve equilibria, emit the
//! constants ledger, and run the invariant suite.
//!
//! Exit codes: 0 on success, 2 on a model-assumption violation, 3 on a
//! numerical failure, 1 on I/O or input-format problems.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use modcoord_core::coordinator::balance_project;
use modcoord_core::equilibrium::{approximation_report, solve_ne};
use modcoord_core::error::Error;
use modcoord_core::game::{GameState, LagrangianPart};
use modcoord_core::harness::ledger::constants_ledger;
use modcoord_core::harness::metrics::running_average;
use modcoord_core::harness::runner::run_closed_loop;
use modcoord_core::harness::Scenario;
use modcoord_core::qp::project_box_affine_exact;
use modcoord_core::sensitivity::assemble_system_matrix;

#[derive(Parser)]
#[command(name = "modcoord", version, about = "Competitive mobility-on-demand coordination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the integration step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the simulation horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the oracle sampling stride (steps).
    #[arg(long)]
    oracle_every: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the closed loop and write the CSV trace.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the regularized equilibrium for a delivery target.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated per-station target; defaults to the controller
        /// value at the initial plant state.
        #[arg(long)]
        zeta: Option<String>,
        /// Optional output file (plain text); defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the constants ledger (TOML).
    Constants {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Optional output file; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite against a scenario.
    Check {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, Error> {
    let mut scenario = Scenario::from_file(&args.scenario)?;
    if let Some(dt) = args.dt {
        if dt <= 0.0 {
            return Err(Error::NegativeDt(dt));
        }
        scenario.dt = dt;
    }
    if let Some(h) = args.horizon {
        if h <= 0.0 {
            return Err(Error::AssumptionViolated(format!(
                "horizon must be positive, got {h}"
            )));
        }
        scenario.horizon = h;
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(k) = args.oracle_every {
        if k == 0 {
            return Err(Error::AssumptionViolated(
                "oracle_every must be at least 1".into(),
            ));
        }
        scenario.oracle_every = k;
    }
    Ok(scenario)
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { scenario, out } => {
            let scenario = load_scenario(&scenario)?;
            let trace = run_closed_loop(&scenario)?;
            let file = File::create(&out)?;
            trace.write_csv(&scenario, BufWriter::new(file))?;
            println!(
                "wrote {} records ({} oracle samples) to {}",
                trace.records.len(),
                trace.oracle.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { scenario, zeta, out } => {
            let scenario = load_scenario(&scenario)?;
            let text = oracle_report(&scenario, zeta.as_deref())?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Constants { scenario, out } => {
            let scenario = load_scenario(&scenario)?;
            let ledger = constants_ledger(&scenario)?;
            let text = toml::to_string_pretty(&ledger).expect("ledger serialization");
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { scenario } => {
            let scenario = load_scenario(&scenario)?;
            if run_checks(&scenario)? {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("error: one or more checks failed");
                Ok(ExitCode::from(3))
            }
        }
    }
}

fn parse_zeta(text: &str, stations: usize) -> Result<DVector<f64>, Error> {
    let values: Vec<f64> = text
        .split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|e| Error::ParseError {
                path: "zeta".into(),
                message: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    if values.len() != stations {
        return Err(Error::DimensionMismatch {
            what: "zeta",
            expected: stations,
            actual: values.len(),
        });
    }
    Ok(DVector::from_vec(values))
}

fn oracle_report(scenario: &Scenario, zeta: Option<&str>) -> Result<String, Error> {
    let game = &scenario.game;
    let reg = &scenario.regulation;
    let lay = *game.layout();
    let zeta = match zeta {
        Some(text) => {
            let z = parse_zeta(text, lay.stations)?;
            let na = reg.players as f64 * reg.margin;
            for &v in z.iter() {
                if v < reg.c_min / 2.0 || v > reg.beta_max - na {
                    return Err(Error::AssumptionViolated(format!(
                        "target {v} outside the realizable range [{}, {}]",
                        reg.c_min / 2.0,
                        reg.beta_max - na
                    )));
                }
            }
            z
        }
        None => reg.control_target(&scenario.initial_plant.q, &scenario.initial_plant.c)?,
    };
    let ne = solve_ne(game, &zeta, None)?;
    let residual = game.game_map(&ne, &zeta)?.amax();
    let report = approximation_report(game, &ne, &zeta);

    let mut out = String::new();
    use std::fmt::Write as _;
    writeln!(out, "target = {:?}", zeta.as_slice()).unwrap();
    writeln!(out, "residual = {residual:.3e}").unwrap();
    for i in 0..lay.players {
        writeln!(
            out,
            "player {} delivery = {:?}",
            i + 1,
            ne.beta(&lay, i).as_slice()
        )
        .unwrap();
        writeln!(
            out,
            "player {} transfer = {:?}",
            i + 1,
            ne.alpha(&lay, i).as_slice()
        )
        .unwrap();
    }
    writeln!(out, "coupling multipliers = {:?}", ne.mu(&lay).as_slice()).unwrap();
    writeln!(
        out,
        "max coupling residual = {:.6e} (bound {:.6e})",
        report.max_coupling, report.bounds.sigma_g
    )
    .unwrap();
    writeln!(
        out,
        "max balance residual = {:.6e} (bound {:.6e})",
        report.max_balance, report.bounds.sigma_h
    )
    .unwrap();
    writeln!(
        out,
        "bounds hold: coupling {} balance {} multipliers {} box {}",
        report.coupling_ok, report.balance_ok, report.multiplier_ok, report.primal_box_ok
    )
    .unwrap();
    Ok(out)
}

fn run_checks(scenario: &Scenario) -> Result<bool, Error> {
    let game = &scenario.game;
    let reg = &scenario.regulation;
    let lay = *game.layout();
    let mut all = true;
    let mut check = |name: &str, pass: bool| {
        println!("check {name}: {}", if pass { "PASS" } else { "FAIL" });
        all &= pass;
    };

    // Assumptions were re-verified during load.
    check("assumptions", true);

    let ledger = constants_ledger(scenario)?;
    println!(
        "  theta = {:.9} (contraction: {}), band = {:.4}",
        ledger.theta,
        ledger.contraction,
        ledger.regulation_band()
    );

    let zeta = reg.control_target(&scenario.initial_plant.q, &scenario.initial_plant.c)?;
    let certificate = game.monotonicity_certificate(&zeta, 10_000, scenario.seed);
    check(
        "monotonicity certificate",
        certificate >= game.monotonicity_modulus() - 1e-9,
    );

    // Gradient spot check against central differences.
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x9e3779b97f4a7c15);
    let h = 1e-5;
    let mut worst_grad: f64 = 0.0;
    for _ in 0..20 {
        let state = sample_interior(game, &mut rng);
        let map = game.game_map(&state, &zeta)?;
        for idx in 0..lay.dim() {
            let (part, sign) = classify(&lay, idx);
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus.eta[idx] += h;
            minus.eta[idx] -= h;
            let fd = sign
                * (game.lagrangian_value(part, &plus, &zeta)
                    - game.lagrangian_value(part, &minus, &zeta))
                / (2.0 * h);
            worst_grad = worst_grad.max((map[idx] - fd).abs() / fd.abs().max(1.0));
        }
    }
    check("game map gradients", worst_grad <= 1e-6);

    let mut worst_jac: f64 = 0.0;
    for _ in 0..2 {
        let state = sample_interior(game, &mut rng);
        let jm = assemble_system_matrix(game, &state)?;
        for col in 0..lay.dim() {
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus.eta[col] += h;
            minus.eta[col] -= h;
            let fp = game.game_map(&plus, &zeta)?;
            let fm = game.game_map(&minus, &zeta)?;
            for row in 0..lay.dim() {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                worst_jac = worst_jac.max((jm[(row, col)] - fd).abs() / fd.abs().max(1.0));
            }
        }
    }
    check("sensitivity system matrix", worst_jac <= 1e-6);

    let mut worst_proj: f64 = 0.0;
    for _ in 0..20 {
        let spec = &game.specs()[0];
        let cfg = game.config();
        let beta = DVector::from_fn(lay.stations, |_, _| {
            rng.random_range(cfg.margin..spec.beta_max - cfg.margin)
        });
        let alpha_hat =
            DVector::from_fn(lay.arcs, |_, _| rng.random_range(-1.0..spec.alpha_max + 1.0));
        let lo = DVector::from_element(lay.arcs, cfg.margin);
        let hi = DVector::from_element(lay.arcs, spec.alpha_max - cfg.margin);
        let fast = balance_project(game.graph(), &beta, &alpha_hat, &lo, &hi)?;
        if let Some(exact) = project_box_affine_exact(
            game.graph().incidence(),
            &game.graph().balance_rhs(&beta),
            &alpha_hat,
            &lo,
            &hi,
        )? {
            worst_proj = worst_proj.max((fast - exact).amax());
        }
    }
    check("balance projection vs exact", worst_proj <= 1e-8);

    let na = reg.players as f64 * reg.margin;
    let mut range_ok = true;
    for _ in 0..20_000 {
        let q = DVector::from_fn(lay.stations, |_, _| rng.random_range(0.0..10.0));
        let c = DVector::from_fn(lay.stations, |_, _| rng.random_range(reg.c_min..reg.c_max));
        let u = reg.control_target(&q, &c)?;
        for k in 0..lay.stations {
            range_ok &= u[k] >= reg.c_min / 2.0 - 1e-12 && u[k] <= reg.beta_max - na + 1e-12;
            let dev = q[k] - reg.q_target[k];
            if dev.abs() > 1e-9 {
                range_ok &= dev * (c[k] - u[k]) < 0.0;
            }
        }
    }
    check("controller range and sign", range_ok);

    let dt = 1e-3;
    let n = 10_000;
    let gap: Vec<f64> = (0..=n).map(|k| (-(k as f64) * dt).exp()).collect();
    let avg = running_average(dt, &gap);
    let expected = (1.0 - (-10.0f64).exp()) / 10.0;
    check("time averaging", (avg[n] - expected).abs() <= 1e-9);

    let round = Scenario::from_toml_str(&scenario.to_toml_string())?;
    check("scenario round trip", round == *scenario);

    Ok(all)
}

fn classify(lay: &modcoord_core::game::Layout, idx: usize) -> (LagrangianPart, f64) {
    if idx < lay.primal_dim() {
        (LagrangianPart::Player(idx / lay.per_player()), 1.0)
    } else if idx < lay.primal_dim() + lay.coupling_dim() {
        (LagrangianPart::Operator, -1.0)
    } else {
        let i = (idx - lay.primal_dim() - lay.coupling_dim()) / lay.balance_dim();
        (LagrangianPart::Player(i), -1.0)
    }
}

fn sample_interior(game: &modcoord_core::game::Game, rng: &mut ChaCha8Rng) -> GameState {
    let lay = *game.layout();
    let mut eta = DVector::zeros(lay.dim());
    for i in 0..lay.players {
        let spec = &game.specs()[i];
        for k in 0..lay.stations {
            eta[lay.beta_pos(i, k)] = rng.random_range(0.1..0.9) * spec.beta_max;
        }
        for e in 0..lay.arcs {
            eta[lay.alpha_pos(i, e)] = rng.random_range(0.1..0.9) * spec.alpha_max;
        }
        for l in 0..lay.balance_dim() {
            eta[lay.lambda_pos(i, l)] = rng.random_range(0.1..3.0);
        }
    }
    for l in 0..lay.coupling_dim() {
        eta[lay.mu_pos(l)] = rng.random_range(0.1..3.0);
    }
    GameState { eta }
}
