//! Conic solver against constructed optima, grid search and the P4 descent
//! property.

mod common;

use common::{grid_search_k2, k2_grid_bound, random_k2_instance};
use irsplan::audit::audit_with_classes;
use irsplan::scenario::motion_energy;
use irsplan::sco::linearize_obstacles;
use irsplan::snrmodel::{linearize_rate, rate, SnrModel, SnrParams};
use irsplan::socp::{assemble_p4, solve, Cone, ConicProblem, SolveStatus, SolverOptions};
use irsplan::{LinkClass, Position, ScenarioConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Builds a problem whose optimum is known by choosing a strictly
/// complementary primal-dual pair first and deriving `b`, `h` and `c` from it.
/// The number of variables is kept small enough that the optimal face is the
/// single point `x*`.
fn constructed_problem(rng: &mut ChaCha8Rng) -> (ConicProblem, DVector<f64>, f64) {
    let mut cones = vec![Cone::NonNeg(rng.random_range(1..4))];
    for _ in 0..rng.random_range(1..3) {
        cones.push(Cone::Soc(rng.random_range(2..5)));
    }
    let m: usize = cones.iter().map(|c| c.dim()).sum();
    let mut s = DVector::zeros(m);
    let mut z = DVector::zeros(m);
    let mut off = 0;
    let mut free = 0;
    for c in &cones {
        match *c {
            Cone::NonNeg(d) => {
                for i in off..off + d {
                    if rng.random_bool(0.3) {
                        s[i] = rng.random_range(0.5..2.0);
                        free += 1;
                    } else {
                        z[i] = rng.random_range(0.5..2.0);
                    }
                }
            }
            Cone::Soc(d) => {
                // Boundary pair (t, v) and (t', -t'/t v): s^T z = 0.
                let v: Vec<f64> = (1..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let t = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let tz = rng.random_range(0.5..2.0);
                free += 1;
                s[off] = t;
                z[off] = tz;
                for (i, vi) in v.iter().enumerate() {
                    s[off + 1 + i] = *vi;
                    z[off + 1 + i] = -tz / t * vi;
                }
            }
        }
        off += c.dim();
    }
    let n = rng.random_range(1..=m.saturating_sub(free).max(1));
    let p = rng.random_range(0..n);
    let a = DMatrix::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0));
    let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
    let b = &a * &x;
    let h = &g * &x + &s;
    let c = -(a.transpose() * &y + g.transpose() * &z);
    let opt = c.dot(&x);
    (ConicProblem { c, a, b, g, h, cones }, x, opt)
}

#[test]
fn constructed_optima_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut solved = 0;
    for _ in 0..200 {
        let (prob, x, opt) = constructed_problem(&mut rng);
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "{prob:?}");
        assert!(
            (sol.primal_cost - opt).abs() <= 1e-6 * opt.abs().max(1.0),
            "{} vs {opt}",
            sol.primal_cost
        );
        assert!(sol.primal_residual <= 1e-7 && sol.dual_residual <= 1e-7);
        // Iterates approach a boundary optimum at the square root of the gap.
        assert!((&sol.x - &x).amax() <= 1e-3 * x.amax().max(1.0), "{} vs {x}", sol.x);
        solved += 1;
    }
    assert_eq!(solved, 200);
}

#[test]
fn k2_subproblem_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let inst = random_k2_instance(&mut rng);
        let p4 = assemble_p4(
            &inst.scenario,
            &inst.linearization,
            &inst.cuts,
            &inst.prev,
            inst.trust_radius,
        )
        .unwrap();
        let sol = p4.solve(&SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let (grid, _) = grid_search_k2(&inst, 0.01).expect("previous waypoint is on the grid");
        let tol = (0.01 * grid).max(k2_grid_bound(&inst.scenario, 0.01 * std::f64::consts::SQRT_2));
        assert!((sol.objective - grid).abs() <= tol, "{} vs {grid}", sol.objective);
    }
}

#[test]
fn subproblem_never_worsens_a_feasible_anchor() {
    let mut s = ScenarioConfig::reference().build().unwrap();
    let m = SnrModel::uniform(
        SnrParams {
            a: 1e-6,
            b: 1e-6,
            c: 1e-6,
            nu: 2.0,
            mu: 2.0,
        },
        &s,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        // Straight line between the obstacle rows, perturbed.
        let k = s.k_slots;
        let prev: Vec<Position> = (0..=k)
            .map(|j| {
                let t = j as f64 / k as f64;
                let base = s.q_s * (1.0 - t) + s.q_d * t;
                if j == 0 || j == k {
                    base
                } else {
                    base + Position::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))
                }
            })
            .collect();
        let classes = vec![LinkClass::ALL[0]; k + 1];
        s.r_min = 0.9 * rate(&m, &classes, &prev, &s).unwrap();
        assert!(audit_with_classes(&prev, &classes, &s, &m).feasible());
        let lin = linearize_rate(&m, &classes, &prev, &s).unwrap();
        let cuts = linearize_obstacles(&prev, &s);
        let p4 = assemble_p4(&s, &lin, &cuts, &prev, 1.0).unwrap();
        let sol = p4.solve(&SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let e_prev = motion_energy(&prev, &s).unwrap();
        assert!(sol.objective <= e_prev * (1.0 + 1e-9), "{} > {e_prev}", sol.objective);
    }
}

#[test]
fn solver_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inst = random_k2_instance(&mut rng);
    let p4 = assemble_p4(
        &inst.scenario,
        &inst.linearization,
        &inst.cuts,
        &inst.prev,
        inst.trust_radius,
    )
    .unwrap();
    let a = solve(&p4.problem, &SolverOptions::default());
    let b = solve(&p4.problem, &SolverOptions::default());
    assert_eq!(a, b);
}
