//! Static problem data: geometry, obstacles, link visibility, the motion
//! energy model and radio constants. Everything in here is immutable once
//! built and all operations are pure.

mod config;
mod geometry;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{ObstacleConfig, ScenarioConfig};
pub use geometry::{Mat2, Obstacle, Position, Workspace};

use crate::error::{Error, Result};

/// Coefficients of the DC-motor energy model `c1 v^2 dt + c2 v dt + c3 dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// J·s/m²
    pub c1: f64,
    /// J/m
    pub c2: f64,
    /// W
    pub c3: f64,
}

/// Radio constants, all in linear SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Transmit power in watts.
    pub p_t: f64,
    /// Noise power σ² in watts.
    pub noise_power: f64,
    pub bandwidth_hz: f64,
    /// Linear path gain at the 1 m reference distance.
    pub rho: f64,
    /// Extra linear gain on the IRS–AP link; 1.0 reproduces `γ = sqrt(ρ d_ia^-2)`.
    pub irs_link_gain: f64,
    /// AP antennas (N).
    pub n_antennas: usize,
    /// IRS elements (M).
    pub m_elements: usize,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
}

impl RadioParams {
    /// `p_t / σ²`
    pub fn snr_scale(&self) -> f64 {
        self.p_t / self.noise_power
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub workspace: Workspace,
    pub ap_pos: Position,
    pub irs_pos: Position,
    pub z_r: f64,
    pub z_a: f64,
    pub z_i: f64,
    pub obstacles: Vec<Obstacle>,
    /// Number of slots K; trajectories hold K + 1 waypoints.
    pub k_slots: usize,
    pub delta_t: f64,
    pub v_max: f64,
    /// Dimensionless obstacle level (>= 1).
    pub d_s: f64,
    pub energy: EnergyModel,
    pub radio: RadioParams,
    pub q_s: Position,
    pub q_d: Position,
    /// Minimum average rate, bits/s.
    pub r_min: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let ws = &self.workspace;
        if !(ws.x_max > ws.x_min && ws.y_max > ws.y_min) {
            return bad("workspace rectangle is empty".into());
        }
        if self.k_slots < 1 {
            return bad("K must be at least 1".into());
        }
        if !(self.delta_t > 0.0) || !(self.v_max > 0.0) {
            return bad("delta_t and v_max must be positive".into());
        }
        if !(self.d_s >= 1.0) {
            return bad(format!("d_s must be >= 1, got {}", self.d_s));
        }
        let e = &self.energy;
        if !(e.c1 >= 0.0 && e.c2 >= 0.0 && e.c3 >= 0.0) {
            return bad("energy coefficients must be nonnegative".into());
        }
        let r = &self.radio;
        if !(r.p_t >= 0.0 && r.noise_power > 0.0 && r.bandwidth_hz > 0.0 && r.rho > 0.0) {
            return bad("radio powers, bandwidth and path gain must be positive".into());
        }
        if !(r.irs_link_gain > 0.0) {
            return bad("IRS link gain must be positive".into());
        }
        if r.n_antennas < 1 {
            return bad("the AP needs at least one antenna".into());
        }
        if !(self.r_min >= 0.0) {
            return bad("r_min must be nonnegative".into());
        }
        for (name, q) in [("start", self.q_s), ("goal", self.q_d)] {
            if !q.is_finite() {
                return bad(format!("{name} position is not finite"));
            }
            for (i, o) in self.obstacles.iter().enumerate() {
                let m = o.margin(q);
                if m < self.d_s {
                    return bad(format!(
                        "{name} position violates obstacle {i} margin ({m:.4} < {})",
                        self.d_s
                    ));
                }
            }
        }
        Ok(())
    }

    /// Maximum per-slot travel distance.
    pub fn d_max(&self) -> f64 {
        self.v_max * self.delta_t
    }

    /// 3D distance between the IRS and the AP.
    pub fn d_ia(&self) -> f64 {
        (self.z_a - self.z_i).hypot(self.irs_pos.distance(self.ap_pos))
    }

    /// Stable identifier of every numeric field except the rate target, used
    /// to tie radio maps and models to the scenario they were built for.
    pub fn hash(&self) -> String {
        let text = toml::to_string(&self.with_r_min(0.0)).expect("scenario serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn with_irs_elements(&self, m: usize) -> Self {
        let mut s = self.clone();
        s.radio.m_elements = m;
        s
    }

    pub fn with_r_min(&self, r_min: f64) -> Self {
        let mut s = self.clone();
        s.r_min = r_min;
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Visibility {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Los => "LOS",
            Visibility::Nlos => "NLOS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "LOS" => Some(Visibility::Los),
            "NLOS" => Some(Visibility::Nlos),
            _ => None,
        }
    }
}

/// Visibility of the AP and of the IRS from one robot position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkClass {
    pub ap: Visibility,
    pub irs: Visibility,
}

impl LinkClass {
    pub const ALL: [LinkClass; 4] = [
        LinkClass::new(Visibility::Los, Visibility::Los),
        LinkClass::new(Visibility::Nlos, Visibility::Los),
        LinkClass::new(Visibility::Los, Visibility::Nlos),
        LinkClass::new(Visibility::Nlos, Visibility::Nlos),
    ];

    pub const fn new(ap: Visibility, irs: Visibility) -> Self {
        Self { ap, irs }
    }

    pub fn index(self) -> usize {
        (self.ap == Visibility::Nlos) as usize + 2 * (self.irs == Visibility::Nlos) as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

impl fmt::Display for LinkClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AP_{}/IRS_{}", self.ap.as_str(), self.irs.as_str())
    }
}

/// Per-slot motion energy of a step of length `len`.
pub fn step_energy(len: f64, scenario: &Scenario) -> f64 {
    let e = &scenario.energy;
    let dt = scenario.delta_t;
    e.c1 * len * len / dt + e.c2 * len + e.c3 * dt
}

/// Total motion energy of a K-slot trajectory, in joules.
pub fn motion_energy(traj: &[Position], scenario: &Scenario) -> Result<f64> {
    if traj.len() != scenario.k_slots + 1 {
        return Err(Error::InvalidTrajectory(format!(
            "expected {} waypoints, got {}",
            scenario.k_slots + 1,
            traj.len()
        )));
    }
    Ok(traj
        .windows(2)
        .map(|w| step_energy(w[1].distance(w[0]), scenario))
        .sum())
}

pub fn obstacle_margin(q: Position, o: &Obstacle) -> f64 {
    o.margin(q)
}

/// Robot-to-AP and robot-to-IRS 3D distances.
pub fn distances(q: Position, scenario: &Scenario) -> (f64, f64) {
    let d_a = (scenario.z_r - scenario.z_a).hypot(q.distance(scenario.ap_pos));
    let d_i = (scenario.z_r - scenario.z_i).hypot(q.distance(scenario.irs_pos));
    (d_a, d_i)
}

pub fn los_class(q: Position, scenario: &Scenario) -> LinkClass {
    let visible = |target: Position, z: f64| {
        if scenario
            .obstacles
            .iter()
            .any(|o| o.blocks_segment(q, scenario.z_r, target, z))
        {
            Visibility::Nlos
        } else {
            Visibility::Los
        }
    };
    LinkClass {
        ap: visible(scenario.ap_pos, scenario.z_a),
        irs: visible(scenario.irs_pos, scenario.z_i),
    }
}

pub fn trajectory_classes(traj: &[Position], scenario: &Scenario) -> Vec<LinkClass> {
    traj.iter().map(|&q| los_class(q, scenario)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_scenario() -> Scenario {
        ScenarioConfig::reference().build().unwrap()
    }

    #[test]
    fn stationary_trajectory_costs_only_idle_power() {
        let mut s = test_scenario();
        s.q_d = s.q_s;
        let traj = vec![s.q_s; s.k_slots + 1];
        let e = motion_energy(&traj, &s).unwrap();
        assert!((e - 30.0 * 14.77).abs() < 1e-9, "{e}");
    }

    #[test]
    fn single_full_step() {
        let mut s = test_scenario();
        s.k_slots = 1;
        let traj = [Position::new(0.0, 0.0), Position::new(3.0, 0.0)];
        let e = motion_energy(&traj, &s).unwrap();
        assert!((e - 128.29).abs() < 1e-9, "{e}");
    }

    #[test]
    fn wrong_length_is_rejected() {
        let s = test_scenario();
        let traj = vec![s.q_s; 3];
        assert!(matches!(motion_energy(&traj, &s), Err(Error::InvalidTrajectory(_))));
    }

    #[test]
    fn distances_include_heights() {
        let s = test_scenario();
        let (d_a, _) = distances(s.ap_pos, &s);
        assert!((d_a - 4.5).abs() < 1e-12);
        let (_, d_i) = distances(Position::new(25.0, 15.0), &s);
        assert!((d_i - 229f64.sqrt()).abs() < 1e-12);
        let (l, _) = distances(Position::new(20.0, 20.0), &s);
        let (r, _) = distances(Position::new(30.0, 20.0), &s);
        assert!((l - r).abs() < 1e-12);
    }

    #[test]
    fn empty_obstacle_set_is_all_los() {
        let mut s = test_scenario();
        s.obstacles.clear();
        let c = los_class(Position::new(3.0, 3.0), &s);
        assert_eq!(c, LinkClass::new(Visibility::Los, Visibility::Los));
    }

    #[test]
    fn class_index_round_trips() {
        for (i, c) in LinkClass::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(LinkClass::from_index(i), *c);
        }
    }

    #[test]
    fn validate_rejects_start_inside_obstacle() {
        let mut s = test_scenario();
        s.q_s = s.obstacles[0].center();
        assert!(matches!(s.validate(), Err(Error::InvalidScenario(_))));
    }
}
