//! Conic form of the per-iteration trajectory subproblem.
//!
//! Variables, in order: the free waypoints `q_1..q_{K-1}` (x, y pairs), step
//! lengths `t_1..t_K`, squared step lengths `u_1..u_K`, and distance
//! over-estimators `s_a,k`, `s_i,k` for each free waypoint whose rate slope on
//! that link is nonzero. Endpoints are constants.
//!
//! Constraints: `‖q_k − q_{k−1}‖ ≤ t_k ≤ D_max`; `‖q_k − q_{k−1}‖² ≤ u_k` as a
//! rotated cone; linearized obstacle half-planes; the linearized average rate
//! with `s` in place of the distances (valid because every slope is
//! nonpositive); `‖q_k − q_{j−1,k}‖ ≤ T`; `‖(q_k − q_a, z_r − z_a)‖ ≤ s_a,k`
//! and likewise for the IRS.

use super::{solve, Cone, ConicProblem, ProblemBuilder, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::scenario::{distances, Position, Scenario};
use crate::snrmodel::RateLinearization;

/// Affine obstacle constraint `normal · q_k ≥ rhs` on waypoint `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstacleCut {
    pub k: usize,
    pub obstacle: usize,
    pub normal: Position,
    pub rhs: f64,
}

impl ObstacleCut {
    pub fn value(&self, q: Position) -> f64 {
        self.normal.dot(q) - self.rhs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct P4Layout {
    pub k_slots: usize,
    /// Column of `t_k` is `t0 + k − 1`.
    pub t0: usize,
    /// Column of `u_k` is `u0 + k − 1`.
    pub u0: usize,
    /// Column of `s_a,k` for each waypoint (`None` for endpoints and zero slopes).
    pub s_a: Vec<Option<usize>>,
    pub s_i: Vec<Option<usize>>,
    pub n_vars: usize,
}

impl P4Layout {
    pub fn q(&self, k: usize) -> Option<(usize, usize)> {
        if k == 0 || k >= self.k_slots {
            None
        } else {
            Some((2 * (k - 1), 2 * (k - 1) + 1))
        }
    }
}

#[derive(Clone, Debug)]
pub struct P4 {
    pub problem: ConicProblem,
    pub layout: P4Layout,
    /// `K c3 Δt`, not part of the conic objective.
    pub objective_constant: f64,
    q_s: Position,
    q_d: Position,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemSolution {
    pub trajectory: Vec<Position>,
    /// Conic objective plus the constant idle term, joules.
    pub objective: f64,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}

type Row = (Vec<(usize, f64)>, f64);

/// Assembles the subproblem around `prev_traj` with trust radius `trust_radius`.
pub fn assemble_p4(
    scenario: &Scenario,
    linearization: &RateLinearization,
    cuts: &[ObstacleCut],
    prev_traj: &[Position],
    trust_radius: f64,
) -> Result<P4> {
    let k = scenario.k_slots;
    if prev_traj.len() != k + 1 {
        return Err(Error::Assembly(format!(
            "previous trajectory has {} waypoints, expected {}",
            prev_traj.len(),
            k + 1
        )));
    }
    if linearization.slots.len() != k + 1 {
        return Err(Error::Assembly(format!(
            "rate linearization has {} slots, expected {}",
            linearization.slots.len(),
            k + 1
        )));
    }
    if !(trust_radius >= 0.0) {
        return Err(Error::Assembly(format!(
            "trust radius must be nonnegative, got {trust_radius}"
        )));
    }
    if let Some(c) = cuts.iter().find(|c| c.k == 0 || c.k >= k) {
        return Err(Error::Assembly(format!("obstacle cut on fixed waypoint {}", c.k)));
    }

    let nq = 2 * k.saturating_sub(1);
    let t0 = nq;
    let u0 = t0 + k;
    let mut next = u0 + k;
    let mut s_a = vec![None; k + 1];
    let mut s_i = vec![None; k + 1];
    for j in 1..k {
        let g = linearization.slots[j].grad;
        if g[0] < 0.0 {
            s_a[j] = Some(next);
            next += 1;
        }
        if g[1] < 0.0 {
            s_i[j] = Some(next);
            next += 1;
        }
    }
    let layout = P4Layout {
        k_slots: k,
        t0,
        u0,
        s_a,
        s_i,
        n_vars: next,
    };
    let mut b = ProblemBuilder::new(next);
    let dt = scenario.delta_t;
    let e = &scenario.energy;
    for j in 1..=k {
        b.set_cost(u0 + j - 1, e.c1 / dt);
        b.set_cost(t0 + j - 1, e.c2);
    }

    // Coefficients of waypoint j's coordinate `axis` in `h − G x`:
    // constant waypoints go to h, free ones contribute −coef to G.
    let point_term = |j: usize, axis: usize, coef: f64, row: &mut Row| match layout.q(j) {
        Some(cols) => {
            let col = if axis == 0 { cols.0 } else { cols.1 };
            row.0.push((col, -coef));
        }
        None => {
            let p = if j == 0 { scenario.q_s } else { scenario.q_d };
            row.1 += coef * if axis == 0 { p.x } else { p.y };
        }
    };

    // Step bounds.
    let rows: Vec<Row> = (1..=k).map(|j| (vec![(t0 + j - 1, 1.0)], scenario.d_max())).collect();
    b.cone(Cone::NonNeg(k), rows);

    // Obstacle half-planes: normal·q − rhs ≥ 0.
    if !cuts.is_empty() {
        let rows: Vec<Row> = cuts
            .iter()
            .map(|c| {
                let mut r: Row = (Vec::new(), -c.rhs);
                point_term(c.k, 0, c.normal.x, &mut r);
                point_term(c.k, 1, c.normal.y, &mut r);
                r
            })
            .collect();
        b.cone(Cone::NonNeg(rows.len()), rows);
    }

    // Linearized average rate ≥ r_min, scaled by 1/B_w:
    // Σ_k (−g_k/B_w)·s_k ≤ Σ_k (value_k − g_k·d0_k)/B_w − (K+1) r_min/B_w.
    let bw = scenario.radio.bandwidth_hz;
    let mut rate_row: Row = (Vec::new(), -((k + 1) as f64) * scenario.r_min / bw);
    for (j, slot) in linearization.slots.iter().enumerate() {
        let free = j > 0 && j < k;
        if free {
            rate_row.1 += slot.offset() / bw;
            if let Some(col) = layout.s_a[j] {
                rate_row.0.push((col, -slot.grad[0] / bw));
            }
            if let Some(col) = layout.s_i[j] {
                rate_row.0.push((col, -slot.grad[1] / bw));
            }
        } else {
            let q = if j == 0 { scenario.q_s } else { scenario.q_d };
            let (d_a, d_i) = distances(q, scenario);
            rate_row.1 += slot.at_distances(d_a, d_i) / bw;
        }
    }
    b.cone(Cone::NonNeg(1), vec![rate_row]);

    // Step cones (t; Δ) and rotated cones ((u+1)/2; Δ; (u−1)/2).
    for j in 1..=k {
        let delta = |axis: usize| {
            let mut r: Row = (Vec::new(), 0.0);
            point_term(j, axis, 1.0, &mut r);
            point_term(j - 1, axis, -1.0, &mut r);
            r
        };
        let t = t0 + j - 1;
        let u = u0 + j - 1;
        b.cone(Cone::Soc(3), vec![(vec![(t, -1.0)], 0.0), delta(0), delta(1)]);
        b.cone(
            Cone::Soc(4),
            vec![(vec![(u, -0.5)], 0.5), delta(0), delta(1), (vec![(u, -0.5)], -0.5)],
        );
    }

    // Trust region on free waypoints.
    for (j, &p) in prev_traj.iter().enumerate().take(k).skip(1) {
        let (cx, cy) = layout.q(j).expect("free waypoint");
        if trust_radius > 0.0 {
            b.cone(
                Cone::Soc(3),
                vec![
                    (vec![], trust_radius),
                    (vec![(cx, -1.0)], -p.x),
                    (vec![(cy, -1.0)], -p.y),
                ],
            );
        } else {
            b.equality(vec![(cx, 1.0)], p.x);
            b.equality(vec![(cy, 1.0)], p.y);
        }
    }

    // Distance over-estimators.
    for j in 1..k {
        let (cx, cy) = layout.q(j).expect("free waypoint");
        let links = [
            (layout.s_a[j], scenario.ap_pos, scenario.z_r - scenario.z_a),
            (layout.s_i[j], scenario.irs_pos, scenario.z_r - scenario.z_i),
        ];
        for (col, anchor, dz) in links {
            if let Some(col) = col {
                b.cone(
                    Cone::Soc(4),
                    vec![
                        (vec![(col, -1.0)], 0.0),
                        (vec![(cx, -1.0)], -anchor.x),
                        (vec![(cy, -1.0)], -anchor.y),
                        (vec![], dz),
                    ],
                );
            }
        }
    }

    Ok(P4 {
        problem: b.build()?,
        layout,
        objective_constant: k as f64 * e.c3 * dt,
        q_s: scenario.q_s,
        q_d: scenario.q_d,
    })
}

impl P4 {
    pub fn trajectory(&self, x: &nalgebra::DVector<f64>) -> Vec<Position> {
        let k = self.layout.k_slots;
        (0..=k)
            .map(|j| match self.layout.q(j) {
                Some((cx, cy)) => Position::new(x[cx], x[cy]),
                None if j == 0 => self.q_s,
                None => self.q_d,
            })
            .collect()
    }

    pub fn solve(&self, opts: &SolverOptions) -> SubproblemSolution {
        let sol = solve(&self.problem, opts);
        SubproblemSolution {
            trajectory: self.trajectory(&sol.x),
            objective: sol.primal_cost + self.objective_constant,
            status: sol.status,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            gap: sol.gap,
            iterations: sol.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{motion_energy, LinkClass, ScenarioConfig};
    use crate::snrmodel::{linearize_rate, SnrModel, SnrParams};

    fn setup(k: usize) -> (Scenario, SnrModel) {
        let mut s = ScenarioConfig::reference().build().unwrap();
        s.obstacles.clear();
        s.k_slots = k;
        s.q_s = Position::new(20.0, 15.0);
        s.q_d = Position::new(22.0, 15.0);
        s.r_min = 0.0;
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
        (s, m)
    }

    fn lin(s: &Scenario, m: &SnrModel, traj: &[Position]) -> RateLinearization {
        linearize_rate(m, &vec![LinkClass::ALL[0]; traj.len()], traj, s).unwrap()
    }

    #[test]
    fn free_midpoint_is_segment_midpoint() {
        let (s, m) = setup(2);
        let prev = vec![s.q_s, Position::new(21.0, 15.8), s.q_d];
        let p4 = assemble_p4(&s, &lin(&s, &m, &prev), &[], &prev, 5.0).unwrap();
        let sol = p4.solve(&SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let mid = sol.trajectory[1];
        assert!((mid.x - 21.0).abs() < 1e-3 && (mid.y - 15.0).abs() < 1e-3, "{mid:?}");
        let e = motion_energy(&sol.trajectory, &s).unwrap();
        assert!((sol.objective - e).abs() < 1e-5 * e);
    }

    #[test]
    fn zero_trust_radius_keeps_previous() {
        let (s, m) = setup(3);
        let prev = vec![s.q_s, Position::new(20.5, 15.5), Position::new(21.5, 15.2), s.q_d];
        let p4 = assemble_p4(&s, &lin(&s, &m, &prev), &[], &prev, 0.0).unwrap();
        let sol = p4.solve(&SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        for (a, b) in sol.trajectory.iter().zip(&prev) {
            assert!(a.distance(*b) < 1e-7);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_assembly_error() {
        let (s, m) = setup(3);
        let prev = vec![s.q_s, s.q_d];
        let l = lin(&s, &m, &prev);
        assert!(matches!(assemble_p4(&s, &l, &[], &prev, 1.0), Err(Error::Assembly(_))));
    }
}
