//! TOML scenario configuration. Interface units: meters, dBm for powers, dB
//! for gains and losses, Gbps for rates. Everything is converted to linear SI
//! units when the [`Scenario`] is built.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EnergyModel, Obstacle, Position, RadioParams, Scenario, Workspace};
use crate::error::{Error, Result};

const REFERENCE: &str = include_str!("../../configs/desk.toml");
const PAPER_LITERAL: &str = include_str!("../../configs/paper.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub workspace: WorkspaceConfig,
    pub geometry: GeometryConfig,
    pub motion: MotionConfig,
    pub radio: RadioConfig,
    pub qos: QosConfig,
    #[serde(default, rename = "obstacle")]
    pub obstacles: Vec<ObstacleConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub ap: [f64; 2],
    pub irs: [f64; 2],
    pub z_robot: f64,
    pub z_ap: f64,
    pub z_irs: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    pub slots: usize,
    pub slot_duration_s: f64,
    pub v_max: f64,
    pub safety_level: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub path_loss_db: f64,
    #[serde(default)]
    pub irs_link_gain_db: f64,
    pub ap_antennas: usize,
    pub irs_elements: usize,
    #[serde(default = "default_los")]
    pub los_exponent: f64,
    #[serde(default = "default_nlos")]
    pub nlos_exponent: f64,
}

fn default_los() -> f64 {
    2.0
}

fn default_nlos() -> f64 {
    4.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosConfig {
    pub r_min_gbps: f64,
}

/// Either explicit axis lengths (+ rotation) or a raw shape matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub center: [f64; 2],
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<[[f64; 2]; 2]>,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl ScenarioConfig {
    /// The calibrated desk-scale scenario shipped with the crate.
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE).expect("bundled desk config parses")
    }

    /// Same layout with the link budget exactly as printed (68 dB reference
    /// loss on every link, 20 dBm / -80 dBm).
    pub fn paper_literal() -> Self {
        Self::from_toml_str(PAPER_LITERAL).expect("bundled paper config parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .and_then(|r| text.get(r))
                .map(|s| s.trim().to_string())
                .unwrap_or_else(|| "<document>".to_string());
            Error::config(key, e.message().to_string())
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build(&self) -> Result<Scenario> {
        let ws = Workspace {
            x_min: self.workspace.x[0],
            x_max: self.workspace.x[1],
            y_min: self.workspace.y[0],
            y_max: self.workspace.y[1],
        };
        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for (i, o) in self.obstacles.iter().enumerate() {
            let key = format!("obstacle[{i}]");
            let center = Position::from(o.center);
            let built = match (o.shape, o.length, o.width) {
                (Some(shape), None, None) => Obstacle::new(center, shape, o.height),
                (None, Some(l), Some(w)) => {
                    Obstacle::ellipse(center, l, w, o.rotation_deg.unwrap_or(0.0).to_radians(), o.height)
                }
                _ => return Err(Error::config(key, "give either `shape` or both `length` and `width`")),
            };
            obstacles.push(built.map_err(|e| Error::config(&key, e.to_string()))?);
        }
        let m = &self.motion;
        let r = &self.radio;
        let scenario = Scenario {
            workspace: ws,
            ap_pos: self.geometry.ap.into(),
            irs_pos: self.geometry.irs.into(),
            z_r: self.geometry.z_robot,
            z_a: self.geometry.z_ap,
            z_i: self.geometry.z_irs,
            obstacles,
            k_slots: m.slots,
            delta_t: m.slot_duration_s,
            v_max: m.v_max,
            d_s: m.safety_level,
            energy: EnergyModel {
                c1: m.c1,
                c2: m.c2,
                c3: m.c3,
            },
            radio: RadioParams {
                p_t: dbm_to_watts(r.tx_power_dbm),
                noise_power: dbm_to_watts(r.noise_power_dbm),
                bandwidth_hz: r.bandwidth_hz,
                rho: db_to_linear(-r.path_loss_db),
                irs_link_gain: db_to_linear(r.irs_link_gain_db),
                n_antennas: r.ap_antennas,
                m_elements: r.irs_elements,
                los_exponent: r.los_exponent,
                nlos_exponent: r.nlos_exponent,
            },
            q_s: self.geometry.start.into(),
            q_d: self.geometry.goal.into(),
            r_min: self.qos.r_min_gbps * 1e9,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions() {
        assert!((db_to_linear(-68.0) - 10f64.powf(-6.8)).abs() < 1e-22);
        assert!((dbm_to_watts(20.0) - 0.1).abs() < 1e-15);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-25);
    }

    #[test]
    fn bundled_configs_build() {
        let s = ScenarioConfig::reference().build().unwrap();
        assert_eq!(s.k_slots, 30);
        assert_eq!(s.d_max(), 3.0);
        let p = ScenarioConfig::paper_literal().build().unwrap();
        assert!((p.radio.rho - 10f64.powf(-6.8)).abs() < 1e-22);
        assert!((p.radio.p_t - 0.1).abs() < 1e-15);
        assert_eq!(p.radio.irs_link_gain, 1.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut text = ScenarioConfig::reference().to_toml_string();
        text = text.replace("[motion]\n", "[motion]\nwarp_drive = 3\n");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("warp_drive"), "{err}");
    }

    #[test]
    fn config_text_round_trips() {
        let c = ScenarioConfig::reference();
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.build().unwrap().hash(), back.build().unwrap().hash());
    }

    #[test]
    fn obstacle_needs_a_shape() {
        let mut c = ScenarioConfig::reference();
        c.obstacles[0].length = None;
        let err = c.build().unwrap_err();
        assert!(err.to_string().contains("obstacle[0]"), "{err}");
    }
}
