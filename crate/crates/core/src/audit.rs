//! Independent feasibility checker for complete trajectories.
//!
//! Recomputes step lengths, endpoint errors, obstacle quadratics, motion
//! energy and the fitted-model average rate from the raw scenario data,
//! without going through the helpers the optimizer uses.

use serde::Serialize;

use crate::scenario::{los_class, LinkClass, Position, Scenario};
use crate::snrmodel::SnrModel;

pub const STEP_TOL: f64 = 1e-6;
pub const MARGIN_TOL: f64 = 1e-6;
pub const RATE_REL_TOL: f64 = 1e-6;
pub const ENDPOINT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub waypoints: usize,
    pub expected_waypoints: usize,
    /// Largest distance of the first/last waypoint from the start/goal.
    pub endpoint_error: f64,
    pub max_step: f64,
    pub d_max: f64,
    /// Smallest obstacle quadratic over all waypoints and obstacles.
    pub min_obstacle_margin: f64,
    pub d_s: f64,
    /// Average rate under the fitted model with the true visibility classes.
    pub rate: f64,
    pub r_min: f64,
    pub energy: f64,
    pub classes: Vec<LinkClass>,
}

impl AuditReport {
    pub fn length_ok(&self) -> bool {
        self.waypoints == self.expected_waypoints
    }

    pub fn endpoints_ok(&self) -> bool {
        self.endpoint_error <= ENDPOINT_TOL
    }

    pub fn steps_ok(&self) -> bool {
        self.max_step <= self.d_max + STEP_TOL
    }

    pub fn obstacles_ok(&self) -> bool {
        self.min_obstacle_margin >= self.d_s - MARGIN_TOL
    }

    pub fn rate_ok(&self) -> bool {
        self.rate >= self.r_min * (1.0 - RATE_REL_TOL)
    }

    pub fn feasible(&self) -> bool {
        self.length_ok() && self.endpoints_ok() && self.steps_ok() && self.obstacles_ok() && self.rate_ok()
    }

    /// Largest constraint violation, each normalized to its own scale
    /// (meters for steps and endpoints, level units for obstacles, relative
    /// for the rate). Zero when every constraint holds.
    pub fn max_violation(&self) -> f64 {
        let mut v: f64 = 0.0;
        v = v.max(self.endpoint_error);
        v = v.max(self.max_step - self.d_max);
        v = v.max(self.d_s - self.min_obstacle_margin);
        if self.r_min > 0.0 {
            v = v.max((self.r_min - self.rate) / self.r_min);
        }
        if !self.length_ok() {
            v = f64::INFINITY;
        }
        v.max(0.0)
    }

    /// Names of the violated constraints, empty when feasible.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.length_ok() {
            out.push("length");
        }
        if !self.endpoints_ok() {
            out.push("endpoints");
        }
        if !self.steps_ok() {
            out.push("step");
        }
        if !self.obstacles_ok() {
            out.push("obstacle");
        }
        if !self.rate_ok() {
            out.push("rate");
        }
        out
    }
}

fn gap(a: Position, b: Position) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

fn height_gap(a: Position, b: Position, dz: f64) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Quadratic form evaluated by solving `P x = e` (Cramer) instead of using
/// the stored inverse.
fn quad_form(shape: &[[f64; 2]; 2], e: Position) -> f64 {
    let det = shape[0][0] * shape[1][1] - shape[0][1] * shape[1][0];
    let x0 = (e.x * shape[1][1] - shape[0][1] * e.y) / det;
    let x1 = (shape[0][0] * e.y - shape[1][0] * e.x) / det;
    e.x * x0 + e.y * x1
}

/// Audits a trajectory against the original planning constraints, using the
/// visibility class of each waypoint for the rate.
pub fn audit_p3(traj: &[Position], scenario: &Scenario, model: &SnrModel) -> AuditReport {
    let classes: Vec<LinkClass> = traj.iter().map(|&q| los_class(q, scenario)).collect();
    audit_with_classes(traj, &classes, scenario, model)
}

pub fn audit_with_classes(
    traj: &[Position],
    classes: &[LinkClass],
    scenario: &Scenario,
    model: &SnrModel,
) -> AuditReport {
    let n = traj.len();
    let endpoint_error = if n == 0 {
        f64::INFINITY
    } else {
        gap(traj[0], scenario.q_s).max(gap(traj[n - 1], scenario.q_d))
    };
    let dt = scenario.delta_t;
    let e = &scenario.energy;
    let mut max_step: f64 = 0.0;
    let mut energy = 0.0;
    for w in traj.windows(2) {
        let l = gap(w[1], w[0]);
        max_step = max_step.max(l);
        energy += e.c1 * (l / dt) * (l / dt) * dt + e.c2 * (l / dt) * dt + e.c3 * dt;
    }
    let mut min_margin = f64::INFINITY;
    for &q in traj {
        for o in &scenario.obstacles {
            let c = o.center();
            min_margin = min_margin.min(quad_form(o.shape(), Position::new(q.x - c.x, q.y - c.y)));
        }
    }
    let scale = scenario.radio.p_t / scenario.radio.noise_power;
    let mut total = 0.0;
    for (&q, class) in traj.iter().zip(classes) {
        let p = model.params(*class);
        let d_a = height_gap(q, scenario.ap_pos, scenario.z_r - scenario.z_a);
        let d_i = height_gap(q, scenario.irs_pos, scenario.z_r - scenario.z_i);
        let snr = scale
            * (p.a * d_i.powf(-p.nu) + p.b * d_i.powf(-p.nu / 2.0) * d_a.powf(-p.mu / 2.0) + p.c * d_a.powf(-p.mu));
        total += scenario.radio.bandwidth_hz * (1.0 + snr).log2();
    }
    let rate = if n == 0 { 0.0 } else { total / n as f64 };
    AuditReport {
        waypoints: n,
        expected_waypoints: scenario.k_slots + 1,
        endpoint_error,
        max_step,
        d_max: scenario.d_max(),
        min_obstacle_margin: min_margin,
        d_s: scenario.d_s,
        rate,
        r_min: scenario.r_min,
        energy,
        classes: classes.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{motion_energy, ScenarioConfig};
    use crate::snrmodel::{rate, SnrParams};

    #[test]
    fn agrees_with_library_evaluations() {
        let s = ScenarioConfig::reference().build().unwrap();
        let m = SnrModel::uniform(
            SnrParams {
                a: 1e-6,
                b: 2e-7,
                c: 3e-6,
                nu: 2.1,
                mu: 2.4,
            },
            &s,
        );
        let traj: Vec<Position> = (0..=s.k_slots)
            .map(|k| s.q_s + (s.q_d - s.q_s) * (k as f64 / s.k_slots as f64))
            .collect();
        let a = audit_p3(&traj, &s, &m);
        let e = motion_energy(&traj, &s).unwrap();
        assert!(((a.energy - e) / e).abs() < 1e-12);
        let r = rate(&m, &a.classes, &traj, &s).unwrap();
        assert!(((a.rate - r) / r).abs() < 1e-12);
        let o = &s.obstacles[0];
        let direct = traj.iter().map(|q| o.margin(*q)).fold(f64::INFINITY, f64::min);
        assert!(a.min_obstacle_margin <= direct + 1e-12);
        assert_eq!(a.endpoint_error, 0.0);
    }

    #[test]
    fn flags_each_violation() {
        let s = ScenarioConfig::reference().build().unwrap().with_r_min(1e12);
        let m = SnrModel::uniform(SnrParams::zero(2.0, 2.0), &s);
        let mut traj = vec![s.q_s; s.k_slots + 1];
        traj[1] = s.obstacles[0].center();
        let a = audit_p3(&traj, &s, &m);
        let v = a.violations();
        assert!(v.contains(&"endpoints") && v.contains(&"step") && v.contains(&"obstacle") && v.contains(&"rate"));
        assert!(!a.feasible());
        assert!(a.max_violation() > 0.0);
    }
}
