//! Successive convex optimization of the trajectory.
//!
//! Each iteration freezes the per-slot visibility classes at the incumbent,
//! replaces the rate and obstacle constraints by their tangents there, solves
//! the conic subproblem inside a trust region and audits the result against
//! the original constraints.

use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::audit::{audit_p3, AuditReport};
use crate::error::{Error, Result};
use crate::planner::{select_initial, CandidateReport, InitLabel, InitialSolution};
use crate::scenario::{motion_energy, trajectory_classes, Position, Scenario};
use crate::snrmodel::{linearize_rate, SnrModel};
use crate::socp::{assemble_p4, ObstacleCut, SolveStatus, SolverOptions};

/// Smallest trust radius tried after subproblem failures, meters.
pub const MIN_TRUST_RADIUS: f64 = 0.05;
/// Trust-radius halvings per iteration before giving up.
pub const MAX_RETRIES: usize = 5;
/// Slack on the monotone-descent check, joules.
pub const DESCENT_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ScoConfig {
    /// Relative energy improvement below which the loop stops.
    pub epsilon: f64,
    pub n_it_max: usize,
    /// Per-waypoint displacement bound between iterates, meters.
    pub trust_radius: f64,
    pub solver: SolverOptions,
    /// Spacing of the initializer's grid, meters.
    pub grid_spacing: f64,
}

impl Default for ScoConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            n_it_max: 100,
            trust_radius: 1.0,
            solver: SolverOptions::default(),
            grid_spacing: crate::planner::DEFAULT_GRID_SPACING,
        }
    }
}

impl ScoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::config(
                "sco.epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        if self.n_it_max < 1 {
            return Err(Error::config("sco.n_it_max", "must be at least 1"));
        }
        if !(self.trust_radius > 0.0) || !self.trust_radius.is_finite() {
            return Err(Error::config(
                "sco.trust_radius",
                format!("must be positive, got {}", self.trust_radius),
            ));
        }
        if !(self.grid_spacing > 0.0) {
            return Err(Error::config(
                "sco.grid_spacing",
                format!("must be positive, got {}", self.grid_spacing),
            ));
        }
        Ok(())
    }
}

/// What happened to the subproblem solution of one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    /// The initial trajectory (iteration 0).
    Initial,
    /// Subproblem solved, audit passed, energy did not increase.
    Accepted,
    /// Subproblem solved and audited but its energy exceeded the incumbent's;
    /// the incumbent was kept.
    KeptIncumbent,
    /// Every retry produced a trajectory failing the audit; the incumbent was
    /// kept and the loop stopped.
    AuditFailed,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Initial => "initial",
            StepStatus::Accepted => "accepted",
            StepStatus::KeptIncumbent => "kept-incumbent",
            StepStatus::AuditFailed => "audit-failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScoIteration {
    pub iteration: usize,
    /// Incumbent after this iteration.
    pub trajectory: Vec<Position>,
    pub energy: f64,
    pub status: StepStatus,
    /// Energy of the subproblem solution, when one was obtained.
    pub candidate_energy: Option<f64>,
    pub trust_radius: f64,
    pub retries: usize,
    pub solver_iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub audit: AuditReport,
    pub wall_time: Duration,
}

impl ScoIteration {
    /// `(E_{j−1} − E_j) / E_{j−1}` relative to the previous entry's energy.
    pub fn improvement(&self, prev_energy: f64) -> f64 {
        (prev_energy - self.energy) / prev_energy
    }
}

#[derive(Clone, Debug, Default)]
pub struct ScoTrace {
    pub iterations: Vec<ScoIteration>,
}

impl ScoTrace {
    pub fn energies(&self) -> Vec<f64> {
        self.iterations.iter().map(|it| it.energy).collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.iterations
            .windows(2)
            .all(|w| w[1].energy <= w[0].energy + DESCENT_SLACK)
    }

    pub fn last(&self) -> Option<&ScoIteration> {
        self.iterations.last()
    }

    /// Number of subproblem iterations (entries after the initial one).
    pub fn sco_iterations(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug)]
pub struct ScoRun {
    pub trajectory: Vec<Position>,
    pub energy: f64,
    pub audit: AuditReport,
    pub trace: ScoTrace,
}

/// Result of the full pipeline: initialization followed by SCO.
#[derive(Clone, Debug)]
pub enum PlanOutcome {
    Planned {
        label: InitLabel,
        run: ScoRun,
        candidates: Vec<CandidateReport>,
    },
    /// Neither initial candidate satisfies the constraints.
    Infeasible { candidates: Vec<CandidateReport> },
}

/// Tangent half-planes of every obstacle quadratic at every free waypoint:
/// `f(q₀) + ∇f(q₀)·(q − q₀) ≥ d_s`.
pub fn linearize_obstacles(prev_traj: &[Position], scenario: &Scenario) -> Vec<ObstacleCut> {
    let k = prev_traj.len().saturating_sub(1);
    let mut cuts = Vec::with_capacity(k.saturating_sub(1) * scenario.obstacles.len());
    for (j, &q0) in prev_traj.iter().enumerate().take(k).skip(1) {
        for (o, obs) in scenario.obstacles.iter().enumerate() {
            let normal = obs.margin_gradient(q0);
            cuts.push(ObstacleCut {
                k: j,
                obstacle: o,
                normal,
                rhs: scenario.d_s - obs.margin(q0) + normal.dot(q0),
            });
        }
    }
    cuts
}

/// Selects an initial solution and runs SCO from it.
pub fn run(scenario: &Scenario, model: &SnrModel, config: &ScoConfig) -> Result<PlanOutcome> {
    config.validate()?;
    match select_initial(scenario, model, config.grid_spacing)? {
        InitialSolution::Infeasible { candidates } => Ok(PlanOutcome::Infeasible { candidates }),
        InitialSolution::Feasible {
            trajectory,
            label,
            candidates,
        } => {
            info!("initial solution {label}");
            let run = optimize(scenario, model, config, &trajectory)?;
            Ok(PlanOutcome::Planned { label, run, candidates })
        }
    }
}

enum Attempt {
    Solved { traj: Vec<Position>, audit: AuditReport },
    AuditFailed(String),
    SolverFailed(String),
}

/// Runs SCO from a feasible trajectory.
pub fn optimize(scenario: &Scenario, model: &SnrModel, config: &ScoConfig, initial: &[Position]) -> Result<ScoRun> {
    config.validate()?;
    let started = Instant::now();
    let audit0 = audit_p3(initial, scenario, model);
    if !audit0.feasible() {
        return Err(Error::InvalidTrajectory(format!(
            "initial trajectory violates {}",
            audit0.violations().join(", ")
        )));
    }
    let mut incumbent = initial.to_vec();
    let mut energy = motion_energy(&incumbent, scenario)?;
    let mut trace = ScoTrace::default();
    trace.iterations.push(ScoIteration {
        iteration: 0,
        trajectory: incumbent.clone(),
        energy,
        status: StepStatus::Initial,
        candidate_energy: None,
        trust_radius: config.trust_radius,
        retries: 0,
        solver_iterations: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        gap: 0.0,
        audit: audit0.clone(),
        wall_time: started.elapsed(),
    });
    let mut audit = audit0;

    for j in 1..=config.n_it_max {
        let classes = trajectory_classes(&incumbent, scenario);
        let lin = linearize_rate(model, &classes, &incumbent, scenario)?;
        let cuts = linearize_obstacles(&incumbent, scenario);

        let mut radius = config.trust_radius;
        let mut retries = 0;
        let mut stats;
        let mut objective;
        let attempt = loop {
            let p4 = assemble_p4(scenario, &lin, &cuts, &incumbent, radius)?;
            let sol = p4.solve(&config.solver);
            stats = (sol.iterations, sol.primal_residual, sol.dual_residual, sol.gap);
            objective = sol.objective;
            let outcome = if sol.status == SolveStatus::Optimal {
                let a = audit_p3(&sol.trajectory, scenario, model);
                if a.feasible() {
                    Attempt::Solved {
                        traj: sol.trajectory,
                        audit: a,
                    }
                } else {
                    Attempt::AuditFailed(format!("audit failed: {}", a.violations().join(", ")))
                }
            } else {
                Attempt::SolverFailed(format!("solver status {}", sol.status.as_str()))
            };
            match outcome {
                Attempt::Solved { .. } => break outcome,
                Attempt::AuditFailed(ref r) | Attempt::SolverFailed(ref r) if retries < MAX_RETRIES => {
                    warn!("iteration {j}: {r} at trust radius {radius}; retrying");
                    retries += 1;
                    radius = (radius / 2.0).max(MIN_TRUST_RADIUS);
                }
                _ => break outcome,
            }
        };
        let (solver_iterations, primal_residual, dual_residual, gap) = stats;
        let mut entry = ScoIteration {
            iteration: j,
            trajectory: Vec::new(),
            energy,
            status: StepStatus::Accepted,
            candidate_energy: None,
            trust_radius: radius,
            retries,
            solver_iterations,
            primal_residual,
            dual_residual,
            gap,
            audit: audit.clone(),
            wall_time: Duration::ZERO,
        };
        let prev_energy = energy;
        match attempt {
            Attempt::SolverFailed(reason) => {
                return Err(Error::Subproblem {
                    iteration: j,
                    reason,
                    trace: Box::new(trace),
                });
            }
            Attempt::AuditFailed(reason) => {
                warn!("iteration {j}: {reason}; keeping the incumbent");
                entry.status = StepStatus::AuditFailed;
                entry.trajectory = incumbent.clone();
                entry.wall_time = started.elapsed();
                trace.iterations.push(entry);
                break;
            }
            Attempt::Solved { traj, audit: a } => {
                let e = motion_energy(&traj, scenario)?;
                entry.candidate_energy = Some(e);
                if e <= energy {
                    incumbent = traj;
                    energy = e;
                    audit = a;
                    entry.energy = e;
                    entry.audit = audit.clone();
                } else {
                    debug!("iteration {j}: candidate energy {e} above incumbent {energy}");
                    entry.status = StepStatus::KeptIncumbent;
                }
            }
        }
        debug!(
            "iteration {j}: energy {energy:.6} J (subproblem {objective:.6} J), trust radius {radius}, {} IPM iterations",
            solver_iterations
        );
        entry.trajectory = incumbent.clone();
        entry.wall_time = started.elapsed();
        trace.iterations.push(entry);
        if (prev_energy - energy).abs() / prev_energy <= config.epsilon {
            break;
        }
    }
    Ok(ScoRun {
        trajectory: incumbent,
        energy,
        audit,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Obstacle, ScenarioConfig};
    use crate::snrmodel::SnrParams;

    fn open(k: usize) -> (Scenario, SnrModel) {
        let mut s = ScenarioConfig::reference().build().unwrap();
        s.obstacles.clear();
        s.r_min = 0.0;
        s.k_slots = k;
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

    #[test]
    fn identity_obstacle_cut() {
        let (mut s, _) = open(2);
        s.obstacles = vec![Obstacle::new(Position::new(0.0, 0.0), [[1.0, 0.0], [0.0, 1.0]], 2.0).unwrap()];
        let q0 = Position::new(2.0, 0.0);
        let cuts = linearize_obstacles(&[s.q_s, q0, s.q_d], &s);
        assert_eq!(cuts.len(), 1);
        let c = cuts[0];
        // 4 + 4 (x − 2) ≥ d_s  ⇔  x ≥ (d_s + 4) / 4
        assert!((c.normal.x - 4.0).abs() < 1e-15 && c.normal.y == 0.0);
        assert!((c.rhs / c.normal.x - (s.d_s + 4.0) / 4.0).abs() < 1e-15);
        assert!(c.value(q0) + s.d_s - (4.0) < 1e-12);
    }

    #[test]
    fn open_field_converges_to_equal_steps() {
        let (s, m) = open(12);
        // Detour through a point off the straight line.
        let mid = Position::new(25.0, 20.0);
        let init: Vec<Position> = (0..=12)
            .map(|k| {
                let t = k as f64 / 12.0;
                if t <= 0.5 {
                    s.q_s + (mid - s.q_s) * (2.0 * t)
                } else {
                    mid + (s.q_d - mid) * (2.0 * t - 1.0)
                }
            })
            .collect();
        let cfg = ScoConfig {
            epsilon: 1e-9,
            ..Default::default()
        };
        let run = optimize(&s, &m, &cfg, &init).unwrap();
        assert!(run.trace.is_monotone());
        let len = s.q_s.distance(s.q_d) / 12.0;
        let optimum = 12.0 * crate::scenario::step_energy(len, &s);
        assert!(
            (run.energy - optimum).abs() / optimum < 1e-3,
            "{} vs {optimum}",
            run.energy
        );
    }

    #[test]
    fn infeasible_initial_is_rejected() {
        let (s, m) = open(2);
        let init = vec![s.q_s, s.q_s, s.q_d];
        assert!(matches!(
            optimize(&s, &m, &ScoConfig::default(), &init),
            Err(Error::InvalidTrajectory(_))
        ));
    }
}
