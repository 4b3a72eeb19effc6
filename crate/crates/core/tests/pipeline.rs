//! End-to-end oracles: channel statistics, radio map shape, initializer and
//! SCO behavior on the desk scenario with a reduced map.

mod common;

use common::{desk, expected_params, rel_err};
use irsplan::audit::audit_p3;
use irsplan::channel::draw_channel;
use irsplan::planner::{build_graph, select_initial, shortest_path, InitLabel, InitialSolution};
use irsplan::radiomap::{build_map, build_map_with_spread};
use irsplan::scenario::motion_energy;
use irsplan::sco::{self, PlanOutcome, ScoConfig};
use irsplan::snrmodel::{fit, fit_with, rate, FitMode, FitOptions, SnrModel};
use irsplan::{LinkClass, Position, Scenario};

fn small_model(s: &Scenario, seed: u64) -> SnrModel {
    let map = build_map(s, 50, 30, 50, seed).unwrap();
    fit(&map, s).unwrap()
}

#[test]
fn fading_has_unit_power_and_rayleigh_mean() {
    let s = desk();
    let q = Position::new(20.0, 20.0);
    let class = LinkClass::ALL[0];
    let draws = 10_000;
    let mut power = 0.0;
    let mut amp = 0.0;
    for seed in 0..draws {
        let d = draw_channel(q, &s, class, seed);
        power += d.fading_d_sq() / d.n() as f64;
        amp += d.fading_r_l1() / d.m() as f64;
    }
    let power = power / draws as f64;
    let amp = amp / draws as f64;
    assert!((power - 1.0).abs() < 0.05, "{power}");
    assert!((amp - std::f64::consts::PI.sqrt() / 2.0).abs() < 0.01, "{amp}");
}

#[test]
fn near_ap_beats_far_corner() {
    let s = desk();
    let map = build_map(&s, 50, 30, 50, 1).unwrap();
    // Cell centers at (25, 29) under the AP and (1, 29) in the far corner.
    let near = map.cell(25, 29).avg_opt_snr;
    let far = map.cell(0, 29).avg_opt_snr;
    assert!(near > far, "{near} <= {far}");
}

#[test]
fn doubling_draws_stays_within_three_standard_errors() {
    let s = desk();
    let (m1, sd) = build_map_with_spread(&s, 20, 12, 100, 4).unwrap();
    let m2 = build_map(&s, 20, 12, 200, 4).unwrap();
    let ok = m1
        .cells
        .iter()
        .zip(&m2.cells)
        .zip(&sd)
        .filter(|((a, b), sd)| (a.avg_opt_snr - b.avg_opt_snr).abs() < 3.0 * *sd / 10.0)
        .count();
    assert!(ok as f64 >= 0.99 * m1.cells.len() as f64, "{ok} of {}", m1.cells.len());
}

#[test]
fn obstacle_free_fit_is_near_the_analytic_expectation() {
    let mut s = desk().with_irs_elements(16);
    s.obstacles.clear();
    let map = build_map(&s, 50, 30, 200, 2).unwrap();
    let opts = FitOptions {
        mode: FitMode::Global,
        ..FitOptions::default()
    };
    let got = *fit_with(&map, &s, &opts).unwrap().params(LinkClass::ALL[0]);
    let want = expected_params(&s);
    assert!(rel_err(got.a, want.a) < 0.1, "{got:?} vs {want:?}");
    assert!(
        rel_err(got.nu, want.nu) < 0.1 && rel_err(got.mu, want.mu) < 0.1,
        "{got:?}"
    );
}

#[test]
fn max_rate_path_has_at_least_the_min_energy_rate() {
    let s = desk().with_irs_elements(0);
    let model = small_model(&s, 1);
    let mut rates = Vec::new();
    for label in [InitLabel::MinEnergy, InitLabel::MaxRate] {
        let g = build_graph(&s, &model, label, 1.0).unwrap();
        let traj = shortest_path(&g).unwrap();
        rates.push(audit_p3(&traj, &s, &model).rate);
    }
    assert!(rates[1] >= rates[0], "{rates:?}");
}

#[test]
fn halving_grid_spacing_never_raises_min_energy() {
    let s = desk();
    let model = small_model(&s, 1);
    let energy = |h: f64| {
        let g = build_graph(&s, &model, InitLabel::MinEnergy, h).unwrap();
        motion_energy(&shortest_path(&g).unwrap(), &s).unwrap()
    };
    let coarse = energy(1.0);
    let fine = energy(0.5);
    assert!(fine <= coarse * (1.0 + 1e-12), "{fine} > {coarse}");
}

#[test]
fn small_irs_high_rate_starts_from_max_rate() {
    let s = desk().with_irs_elements(0).with_r_min(2.5e9);
    let model = small_model(&s, 1);
    match select_initial(&s, &model, 1.0).unwrap() {
        InitialSolution::Feasible { label, .. } => assert_eq!(label, InitLabel::MaxRate),
        InitialSolution::Infeasible { .. } => panic!("expected a feasible max-rate start"),
    }
}

#[test]
fn sco_descends_and_stays_feasible() {
    let s = desk().with_irs_elements(0);
    let model = small_model(&s, 1);
    let config = ScoConfig::default();
    let PlanOutcome::Planned { label, run, .. } = sco::run(&s, &model, &config).unwrap() else {
        panic!("expected a plan");
    };
    assert_eq!(label, InitLabel::MaxRate);
    assert!(run.trace.is_monotone());
    assert!(run.trace.sco_iterations() <= config.n_it_max);
    assert!(run.audit.feasible(), "{:?}", run.audit.violations());
    let classes: Vec<_> = run.audit.classes.clone();
    let r = rate(&model, &classes, &run.trajectory, &s).unwrap();
    assert!(r >= s.r_min * (1.0 - 1e-6));
    // Reruns are identical apart from wall time.
    let PlanOutcome::Planned { run: again, .. } = sco::run(&s, &model, &config).unwrap() else {
        panic!("expected a plan");
    };
    assert_eq!(again.trajectory, run.trajectory);
    assert_eq!(again.trace.energies(), run.trace.energies());
}
