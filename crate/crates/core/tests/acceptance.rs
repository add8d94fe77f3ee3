//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{dense_solve, max_abs_diff, random_field};
use fracphase::energy::{modified_energy, original_energy, DiagnosticsRecord};
use fracphase::mms::{run_convergence, ConvergenceTable, REFERENCE_GRADING};
use fracphase::stepper::{apply_scheme_operator, SchemeOperator};
use fracphase::{initial, kernel_oracle, kernel_row, simulation, update_r, Grid, Model, ModelParams, StepOptions, Stepper, TimeMesh};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use statrs::function::gamma::gamma;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn random_mesh(rng: &mut impl Rng, max_steps: usize) -> TimeMesh {
    let steps = rng.gen_range(1..=max_steps);
    if rng.gen_bool(0.3) {
        let mut t = vec![0.0];
        for _ in 0..steps {
            t.push(t.last().unwrap() + rng.gen_range(0.01..1.0));
        }
        TimeMesh::from_points(t).unwrap()
    } else {
        TimeMesh::graded(rng.gen_range(0.1..3.0), steps, rng.gen_range(1.0..6.0)).unwrap()
    }
}

fn kernel_correctness() -> Verdict {
    let start = Instant::now();
    let mut rng = rand::rngs::StdRng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mesh = random_mesh(&mut rng, 32);
        let n = rng.gen_range(1..=mesh.steps());
        let alpha = rng.gen_range(0.05..0.95);
        let row = kernel_row(&mesh, n, alpha).unwrap();
        let oracle = kernel_oracle(&mesh, n, alpha).unwrap();
        for k in 1..=n {
            worst = worst.max(rel(row.weight(k), oracle.weight(k)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-10 && secs < 10.0,
        format!("50 random cases, max relative deviation {worst:.2e} (limit 1e-10), {secs:.2} s (limit 10 s)"),
    )
}

fn caputo_consistency() -> Verdict {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2);
    let mut linear: f64 = 0.0;
    for _ in 0..20 {
        let mesh = random_mesh(&mut rng, 40);
        let alpha = rng.gen_range(0.05..0.95);
        for n in 1..=mesh.steps() {
            let row = kernel_row(&mesh, n, alpha).unwrap();
            let discrete: f64 = (1..=n).map(|k| row.weight(k) * mesh.tau(k)).sum();
            let (a, b) = (mesh.t(n - 1), mesh.t(n));
            let exact = (b.powf(2.0 - alpha) - a.powf(2.0 - alpha)) / (gamma(3.0 - alpha) * (b - a));
            linear = linear.max(rel(discrete, exact));
        }
    }

    // u = t^2 on uniform meshes, error on the last interval of [0, 1]
    let steps = [16, 32, 64, 128, 256];
    let mut orders = Vec::new();
    for &alpha in &[0.3, 0.6, 0.9] {
        let errs: Vec<f64> = steps
            .iter()
            .map(|&n| {
                let mesh = TimeMesh::uniform(1.0, n).unwrap();
                let row = kernel_row(&mesh, n, alpha).unwrap();
                let discrete: f64 = (1..=n).map(|k| row.weight(k) * (mesh.t(k).powi(2) - mesh.t(k - 1).powi(2))).sum();
                let (a, b) = (mesh.t(n - 1), 1.0_f64);
                let exact = 2.0 * (b.powf(3.0 - alpha) - a.powf(3.0 - alpha)) / (gamma(4.0 - alpha) * (b - a));
                (discrete - exact).abs()
            })
            .collect();
        orders.extend(errs.windows(2).map(|w| (w[0] / w[1]).log2()));
    }
    let order_ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.1);
    let (lo, hi) = orders.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &o| (l.min(o), h.max(o)));
    verdict(
        linear <= 1e-10 && order_ok,
        format!("u=t max relative error {linear:.2e} (limit 1e-10); u=t^2 orders in [{lo:.3}, {hi:.3}] (need 2 +- 0.1)"),
    )
}

const ALPHAS: [f64; 4] = [0.3, 0.6, 0.9, 1.0];
const TABLE_STEPS: [usize; 4] = [8, 16, 32, 64];

struct Reference {
    phi_err: [[f64; 4]; 4],
    r_err: [[f64; 4]; 4],
    phi_order: [f64; 4],
    r_order: Option<[f64; 4]>,
}

// rows: alpha, columns: N = 8, 16, 32, 64
const AC_REFERENCE: Reference = Reference {
    phi_err: [
        [2.62e-3, 6.91e-4, 1.77e-4, 4.47e-5],
        [3.36e-4, 8.81e-5, 2.27e-5, 5.82e-6],
        [5.02e-5, 1.34e-5, 3.55e-6, 9.32e-7],
        [1.63e-5, 4.14e-6, 1.05e-6, 2.63e-7],
    ],
    r_err: [
        [8.75e-3, 2.46e-3, 6.48e-4, 1.66e-4],
        [1.24e-3, 3.20e-4, 8.16e-5, 2.07e-5],
        [2.18e-4, 5.54e-5, 1.41e-5, 3.57e-6],
        [7.93e-5, 1.93e-5, 4.75e-6, 1.17e-6],
    ],
    phi_order: [1.98, 1.97, 1.93, 1.99],
    r_order: None,
};

const CH_REFERENCE: Reference = Reference {
    phi_err: [
        [2.22e-2, 7.23e-3, 2.06e-3, 5.43e-4],
        [3.61e-3, 1.03e-3, 2.77e-4, 7.25e-5],
        [5.99e-4, 1.64e-4, 4.42e-5, 1.18e-5],
        [2.36e-4, 6.16e-5, 1.58e-5, 4.02e-6],
    ],
    r_err: [
        [4.42e-2, 2.42e-2, 8.13e-3, 2.32e-3],
        [1.51e-2, 4.38e-3, 1.17e-3, 3.02e-4],
        [3.26e-3, 8.30e-4, 2.11e-4, 5.35e-5],
        [1.44e-3, 3.41e-4, 8.16e-5, 1.97e-5],
    ],
    phi_order: [1.92, 1.93, 1.91, 1.97],
    r_order: Some([1.81, 1.95, 1.98, 2.05]),
};

fn table(model: Model) -> ConvergenceTable {
    let grid = Grid::square_pi(64).unwrap();
    let base = ModelParams::new(model, 0.5).unwrap();
    run_convergence(&base, &ALPHAS, &TABLE_STEPS, &REFERENCE_GRADING, &grid, StepOptions::default()).unwrap()
}

fn reproduce(model: Model, reference: &Reference) -> Verdict {
    let start = Instant::now();
    let table = table(model);
    let mut pass = true;
    let mut notes = Vec::new();
    let mut worst_ratio: f64 = 1.0;
    for (a, col) in table.columns.iter().enumerate() {
        for (i, row) in col.rows.iter().enumerate() {
            match row.errors {
                Some(e) => {
                    for (got, want) in [(e.phi, reference.phi_err[a][i]), (e.r, reference.r_err[a][i])] {
                        let ratio = (got / want).max(want / got);
                        worst_ratio = worst_ratio.max(ratio);
                        if !(ratio <= 3.0) {
                            pass = false;
                        }
                    }
                }
                None => {
                    pass = false;
                    notes.push(format!("alpha={} N={} failed: {}", col.alpha, row.steps, row.failure.as_deref().unwrap_or("?")));
                }
            }
        }
        let last = col.rows.last().unwrap();
        let phi_order = last.phi_order.unwrap_or(f64::NAN);
        let phi_ok = (phi_order - reference.phi_order[a]).abs() <= 0.15;
        let mut cell = format!("alpha={} phi order {:.2} (want {:.2})", col.alpha, phi_order, reference.phi_order[a]);
        pass &= phi_ok;
        if let Some(r_ref) = reference.r_order {
            let r_order = last.r_order.unwrap_or(f64::NAN);
            pass &= (r_order - r_ref[a]).abs() <= 0.2;
            cell.push_str(&format!(", r order {:.2} (want {:.2})", r_order, r_ref[a]));
        }
        notes.push(cell);
    }
    notes.push(format!("worst error ratio to reference {worst_ratio:.2} (limit 3)"));
    notes.push(format!("{:.1} s", start.elapsed().as_secs_f64()));
    verdict(pass, notes.join("; "))
}

/// Ellipse runs: T = 5, uniform mesh, 64^2 grid, N = 500.
const RUN_HORIZON: f64 = 5.0;
const RUN_STEPS: usize = 500;
const RUN_GRID: usize = 64;
const RUN_ALPHAS: [f64; 3] = [0.4, 0.7, 1.0];

struct Run {
    model: Model,
    alpha: f64,
    e0: f64,
    initial: DiagnosticsRecord,
    records: Vec<DiagnosticsRecord>,
    failure: Option<String>,
}

impl Run {
    fn label(&self) -> String {
        format!("{} alpha={}", self.model, self.alpha)
    }

    fn completed(&self) -> bool {
        self.failure.is_none() && self.records.len() == RUN_STEPS
    }

    fn failure_note(&self) -> String {
        format!(
            "{} stopped after {} of {} steps ({})",
            self.label(),
            self.records.len(),
            RUN_STEPS,
            self.failure.as_deref().unwrap_or("incomplete")
        )
    }
}

fn ellipse_run(model: Model, alpha: f64) -> Run {
    let grid = Grid::square_pi(RUN_GRID).unwrap();
    let params = ModelParams::new(model, alpha).unwrap();
    let mesh = TimeMesh::uniform(RUN_HORIZON, RUN_STEPS).unwrap();
    let stepper = Stepper::new(&grid, &mesh, params, StepOptions::default()).unwrap();
    let mut state = stepper.init_state(initial::ellipse(&grid, params.eps)).unwrap();
    let initial = simulation::initial_record(&grid, &state, &params).unwrap();
    let mut records = Vec::new();
    let failure = simulation::run(&stepper, &mut state, None, |_, rec| {
        records.push(*rec);
        Ok(())
    })
    .err()
    .map(|e| e.to_string());
    Run {
        model,
        alpha,
        e0: initial.energy,
        initial,
        records,
        failure,
    }
}

fn energy_bound(runs: &[Run]) -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for run in runs {
        let start_gap = rel(run.initial.modified_energy, run.e0);
        let limit = run.e0 * (1.0 + 1e-8);
        let worst = run.records.iter().map(|r| r.modified_energy).fold(f64::NEG_INFINITY, f64::max);
        let below = run.records.iter().all(|r| r.modified_energy <= limit);
        let ok = start_gap <= 1e-12 && below && run.completed();
        pass &= ok;
        if run.completed() {
            notes.push(format!("{} max E~/E0 {:.6} start gap {start_gap:.1e}", run.label(), worst / run.e0));
        } else {
            notes.push(run.failure_note());
        }
    }
    verdict(pass, notes.join("; "))
}

fn energy_identity(runs: &[Run]) -> Verdict {
    let tol = StepOptions::default().tol;
    let mut pass = true;
    let mut notes = Vec::new();
    for run in runs {
        let limit = 1e-9_f64.max(100.0 * tol * run.e0.abs());
        let worst = run.records.iter().map(|r| r.identity_residual).fold(0.0, f64::max);
        let ok = worst <= limit && run.completed();
        pass &= ok;
        if run.completed() {
            notes.push(format!("{} max residual {worst:.1e} (limit {limit:.1e})", run.label()));
        } else {
            notes.push(format!("{}, max residual {worst:.1e} before that", run.failure_note()));
        }
    }
    verdict(pass, notes.join("; "))
}

fn mass_conservation(runs: &[Run]) -> Verdict {
    let area = Grid::square_pi(RUN_GRID).unwrap().area();
    let limit = 1e-10 * area;
    let mut pass = true;
    let mut notes = Vec::new();
    for run in runs.iter().filter(|r| r.model == Model::CahnHilliard) {
        let worst = run
            .records
            .iter()
            .map(|r| (r.mass - run.initial.mass).abs())
            .fold(0.0, |m: f64, d| if d.is_nan() { f64::INFINITY } else { m.max(d) });
        pass &= worst <= limit && run.completed();
        if run.completed() {
            notes.push(format!("{} max mass change {worst:.1e} (limit {limit:.1e})", run.label()));
        } else {
            notes.push(format!("{}, max mass change {worst:.1e} before that", run.failure_note()));
        }
    }
    verdict(pass, notes.join("; "))
}

fn energy_gap_identity() -> Verdict {
    let grid = Grid::square_pi(32).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let model = if i % 2 == 0 { Model::AllenCahn } else { Model::CahnHilliard };
        let params = ModelParams::new(model, 0.5).unwrap();
        let phi = random_field(&grid, &mut rng, -1.5, 1.5);
        let r = random_field(&grid, &mut rng, -3.0, 1.0);
        let e = original_energy(&grid, &phi, &params).unwrap();
        let em = modified_energy(&grid, &phi, &r, &params).unwrap();
        let s = params.stabilization;
        let gap = phi.zip_map(&r, |p, r| r - (p * p - 1.0 - s)).unwrap();
        let square = 0.25 * grid.norm_l2(&gap).unwrap().powi(2);
        worst = worst.max(((e - em) - square).abs());
    }
    verdict(worst <= 1e-11, format!("20 random pairs, max |E - E~ - gap^2/4| {worst:.1e} (limit 1e-11)"))
}

fn drift_behaviour(runs: &[Run]) -> Verdict {
    let tail = RUN_STEPS / 5;
    let mut pass = true;
    let mut notes = Vec::new();
    for run in runs {
        if !run.completed() {
            pass = false;
            notes.push(run.failure_note());
            continue;
        }
        let drift: Vec<f64> = run.records.iter().map(|r| r.r_drift).collect();
        let bounded = drift.iter().all(|d| d.is_finite());
        let window = &drift[RUN_STEPS - tail - 1..];
        let rises = window.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12)).count();
        pass &= bounded && rises == 0;
        notes.push(format!(
            "{} max drift {:.2e}, final-20% drift {:.2e} -> {:.2e} with {rises} increases",
            run.label(),
            drift.iter().cloned().fold(0.0, f64::max),
            window[0],
            window[window.len() - 1]
        ));
    }
    verdict(pass, notes.join("; "))
}

fn equilibria() -> Verdict {
    let grid = Grid::square_pi(32).unwrap();
    let mesh = TimeMesh::graded(2.0, 100, 2.0).unwrap();
    let mut worst: f64 = 0.0;
    for model in [Model::AllenCahn, Model::CahnHilliard] {
        for &alpha in &[0.4, 1.0] {
            for value in [0.0, 1.0, -1.0] {
                let params = ModelParams::new(model, alpha).unwrap();
                let stepper = Stepper::new(&grid, &mesh, params, StepOptions::default()).unwrap();
                let mut state = stepper.init_state(grid.constant(value)).unwrap();
                for _ in 0..100 {
                    stepper.step(&mut state, None).unwrap();
                    worst = worst.max(state.phi.max_abs_diff(&grid.constant(value)).unwrap());
                }
            }
        }
    }
    verdict(worst <= 1e-12, format!("phi in {{0, 1, -1}}, both models, 100 steps, max deviation {worst:.1e} (limit 1e-12)"))
}

fn krylov_oracle() -> Verdict {
    let grid = Grid::square_pi(8).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for model in [Model::AllenCahn, Model::CahnHilliard] {
        for &alpha in &[0.3, 0.7, 1.0] {
            let params = ModelParams::new(model, alpha).unwrap();
            let mesh = TimeMesh::graded(0.5, 4, 2.0).unwrap();
            let stepper = Stepper::new(&grid, &mesh, params, StepOptions::default()).unwrap();
            let phi0 = random_field(&grid, &mut rng, -1.0, 1.0);
            let mut state = stepper.init_state(phi0.clone()).unwrap();
            let r_next = update_r(&state, &params);
            let b0 = stepper.kernel_row(1).unwrap().b0();
            let l_phi = apply_scheme_operator(&grid, &phi0, &r_next, b0, &params).unwrap();
            let rhs: Vec<f64> = phi0.values().iter().zip(l_phi.values()).map(|(p, l)| 2.0 * b0 * p - l).collect();
            let op = SchemeOperator::new(&grid, &r_next, b0, &params).unwrap();
            let direct = dense_solve(&op, &rhs);
            stepper.step(&mut state, None).unwrap();
            worst = worst.max(max_abs_diff(state.phi.values(), &direct));
        }
    }
    verdict(worst <= 1e-9, format!("8x8 grid, max |krylov - dense| {worst:.1e} (limit 1e-9)"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cases: Vec<(Model, f64)> = [Model::AllenCahn, Model::CahnHilliard]
        .iter()
        .flat_map(|&m| RUN_ALPHAS.iter().map(move |&a| (m, a)))
        .collect();
    let runs: Vec<Run> = cases.par_iter().map(|&(m, a)| ellipse_run(m, a)).collect();

    let results = [
        ("kernel correctness", kernel_correctness()),
        ("Caputo consistency", caputo_consistency()),
        ("Allen-Cahn convergence table", reproduce(Model::AllenCahn, &AC_REFERENCE)),
        ("Cahn-Hilliard convergence table", reproduce(Model::CahnHilliard, &CH_REFERENCE)),
        ("modified energy bound", energy_bound(&runs)),
        ("per-step energy identity", energy_identity(&runs)),
        ("Cahn-Hilliard mass conservation", mass_conservation(&runs)),
        ("completed-square energy gap", energy_gap_identity()),
        ("r-drift behaviour", drift_behaviour(&runs)),
        ("equilibria are fixed points", equilibria()),
        ("Krylov vs dense solve", krylov_oracle()),
    ];

    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {name}: {}", i + 1, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1} s)",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
