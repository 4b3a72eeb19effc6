//! Parametric SNR model `(A d_i^-ν + B d_i^-ν/2 d_a^-μ/2 + C d_a^-μ) p_t/σ²`,
//! the average rate it induces, the rate's first and second derivatives with
//! respect to the distances, and the per-slot tangent linearization used by
//! the trajectory optimizer.

mod file;
mod fit;

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{distances, LinkClass, Position, Scenario, Visibility};

pub use fit::{fit, fit_with, FitMode, FitOptions};

/// Nonnegative model parameters for one link class. Gains are in linear
/// channel-gain units (before the `p_t/σ²` factor).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub nu: f64,
    pub mu: f64,
}

impl SnrParams {
    pub fn zero(nu: f64, mu: f64) -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            nu,
            mu,
        }
    }

    /// Nominal exponents for a class: LOS/NLOS exponents of the IRS (ν) and
    /// AP (μ) links.
    pub fn nominal_exponents(class: LinkClass, scenario: &Scenario) -> (f64, f64) {
        let e = |v| match v {
            Visibility::Los => scenario.radio.los_exponent,
            Visibility::Nlos => scenario.radio.nlos_exponent,
        };
        (e(class.irs), e(class.ap))
    }

    pub fn is_nonnegative(&self) -> bool {
        [self.a, self.b, self.c, self.nu, self.mu]
            .iter()
            .all(|v| *v >= 0.0 && v.is_finite())
    }

    /// Model channel gain without the `p_t/σ²` factor.
    pub fn gain(&self, d_a: f64, d_i: f64) -> f64 {
        let ti = d_i.powf(-0.5 * self.nu);
        let ta = d_a.powf(-0.5 * self.mu);
        self.a * ti * ti + self.b * ti * ta + self.c * ta * ta
    }
}

/// Per-class fit result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassFit {
    pub params: SnrParams,
    /// Euclidean norm of the log(1+SNR) residuals over the class's cells.
    pub residual_norm: f64,
    pub points: usize,
    pub iterations: usize,
    /// Set when the class had too few cells and copies another class's fit.
    pub inherited_from: Option<LinkClass>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnrModel {
    pub mode: FitMode,
    /// Indexed by [`LinkClass::index`]. In global mode all four are equal.
    pub classes: [ClassFit; 4],
    pub scenario_hash: String,
}

impl SnrModel {
    /// Model using the same parameters for every class.
    pub fn uniform(params: SnrParams, scenario: &Scenario) -> Self {
        let fit = ClassFit {
            params,
            residual_norm: 0.0,
            points: 0,
            iterations: 0,
            inherited_from: None,
        };
        Self {
            mode: FitMode::Global,
            classes: [fit.clone(), fit.clone(), fit.clone(), fit],
            scenario_hash: scenario.hash(),
        }
    }

    pub fn params(&self, class: LinkClass) -> &SnrParams {
        &self.classes[class.index()].params
    }
}

fn check_distances(d_a: f64, d_i: f64) -> Result<()> {
    if !(d_a > 0.0 && d_i > 0.0) || !d_a.is_finite() || !d_i.is_finite() {
        return Err(Error::Domain(format!(
            "distances must be positive and finite, got d_a={d_a}, d_i={d_i}"
        )));
    }
    Ok(())
}

/// Estimated linear SNR at distances `(d_a, d_i)` for the given class.
pub fn snr_hat(model: &SnrModel, class: LinkClass, d_a: f64, d_i: f64, scenario: &Scenario) -> Result<f64> {
    check_distances(d_a, d_i)?;
    Ok(model.params(class).gain(d_a, d_i) * scenario.radio.snr_scale())
}

/// Single-slot rate `B_w log2(1 + snr_hat)` in bits/s.
pub fn slot_rate(model: &SnrModel, class: LinkClass, d_a: f64, d_i: f64, scenario: &Scenario) -> Result<f64> {
    let s = snr_hat(model, class, d_a, d_i, scenario)?;
    Ok(scenario.radio.bandwidth_hz * s.ln_1p() / LN_2)
}

/// Rate at a planar position.
pub fn rate_at(model: &SnrModel, class: LinkClass, q: Position, scenario: &Scenario) -> Result<f64> {
    let (d_a, d_i) = distances(q, scenario);
    slot_rate(model, class, d_a, d_i, scenario)
}

/// Average rate over the K+1 waypoints of a trajectory, in bits/s.
pub fn rate(model: &SnrModel, classes: &[LinkClass], traj: &[Position], scenario: &Scenario) -> Result<f64> {
    if traj.len() != scenario.k_slots + 1 || classes.len() != traj.len() {
        return Err(Error::InvalidTrajectory(format!(
            "expected {} waypoints and classes, got {} and {}",
            scenario.k_slots + 1,
            traj.len(),
            classes.len()
        )));
    }
    let mut total = 0.0;
    for (q, c) in traj.iter().zip(classes) {
        total += rate_at(model, *c, *q, scenario)?;
    }
    Ok(total / traj.len() as f64)
}

/// Monomial terms of the scaled SNR and their partial derivatives.
struct Terms {
    /// scaled SNR S
    s: f64,
    /// dS/dd_a, dS/dd_i
    grad: [f64; 2],
    /// [[S_aa, S_ai], [S_ai, S_ii]]
    hess: [[f64; 2]; 2],
}

fn terms(p: &SnrParams, d_a: f64, d_i: f64, scale: f64) -> Terms {
    let (nu, mu) = (p.nu, p.mu);
    let ti = d_i.powf(-0.5 * nu);
    let ta = d_a.powf(-0.5 * mu);
    let ta_term = p.a * scale * ti * ti;
    let cross = p.b * scale * ti * ta;
    let tc_term = p.c * scale * ta * ta;
    let s = ta_term + cross + tc_term;
    let ds_da = (-0.5 * mu * cross - mu * tc_term) / d_a;
    let ds_di = (-nu * ta_term - 0.5 * nu * cross) / d_i;
    let s_aa = (0.5 * mu * (0.5 * mu + 1.0) * cross + mu * (mu + 1.0) * tc_term) / (d_a * d_a);
    let s_ii = (nu * (nu + 1.0) * ta_term + 0.5 * nu * (0.5 * nu + 1.0) * cross) / (d_i * d_i);
    let s_ai = 0.25 * nu * mu * cross / (d_a * d_i);
    Terms {
        s,
        grad: [ds_da, ds_di],
        hess: [[s_aa, s_ai], [s_ai, s_ii]],
    }
}

/// `[∂r/∂d_a, ∂r/∂d_i]` of the single-slot rate, bits/s per meter.
pub fn rate_gradient(model: &SnrModel, class: LinkClass, d_a: f64, d_i: f64, scenario: &Scenario) -> Result<[f64; 2]> {
    check_distances(d_a, d_i)?;
    let t = terms(model.params(class), d_a, d_i, scenario.radio.snr_scale());
    let f = scenario.radio.bandwidth_hz / (LN_2 * (1.0 + t.s));
    Ok([t.grad[0] * f, t.grad[1] * f])
}

/// Hessian of the single-slot rate with respect to `(d_a, d_i)`.
pub fn rate_hessian_distances(
    model: &SnrModel,
    class: LinkClass,
    d_a: f64,
    d_i: f64,
    scenario: &Scenario,
) -> Result<[[f64; 2]; 2]> {
    check_distances(d_a, d_i)?;
    let t = terms(model.params(class), d_a, d_i, scenario.radio.snr_scale());
    let k = scenario.radio.bandwidth_hz / LN_2;
    let one = 1.0 + t.s;
    let mut h = [[0.0; 2]; 2];
    for (r, row) in h.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = k * (t.hess[r][c] / one - t.grad[r] * t.grad[c] / (one * one));
        }
    }
    Ok(h)
}

/// Tangent of one slot's rate in distance space at an expansion point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotLinearization {
    pub class: LinkClass,
    pub d_a0: f64,
    pub d_i0: f64,
    /// Rate at the expansion point, bits/s.
    pub value: f64,
    /// `[∂r/∂d_a, ∂r/∂d_i]` at the expansion point; both nonpositive.
    pub grad: [f64; 2],
}

impl SlotLinearization {
    pub fn at_distances(&self, d_a: f64, d_i: f64) -> f64 {
        self.value + self.grad[0] * (d_a - self.d_a0) + self.grad[1] * (d_i - self.d_i0)
    }

    pub fn at(&self, q: Position, scenario: &Scenario) -> f64 {
        let (d_a, d_i) = distances(q, scenario);
        self.at_distances(d_a, d_i)
    }

    /// `value - g·d0`: the constant of the affine form in distances.
    pub fn offset(&self) -> f64 {
        self.value - self.grad[0] * self.d_a0 - self.grad[1] * self.d_i0
    }

    /// Gradient with respect to the planar position.
    pub fn position_gradient(&self, q: Position, scenario: &Scenario) -> Position {
        let (d_a, d_i) = distances(q, scenario);
        (q - scenario.ap_pos) * (self.grad[0] / d_a) + (q - scenario.irs_pos) * (self.grad[1] / d_i)
    }

    /// Hessian with respect to the planar position; negative semidefinite
    /// because both distance slopes are nonpositive and distances are convex.
    pub fn position_hessian(&self, q: Position, scenario: &Scenario) -> [[f64; 2]; 2] {
        let (d_a, d_i) = distances(q, scenario);
        let part = |e: Position, d: f64, g: f64| {
            let d3 = d * d * d;
            [
                [g * (d * d - e.x * e.x) / d3, -g * e.x * e.y / d3],
                [-g * e.x * e.y / d3, g * (d * d - e.y * e.y) / d3],
            ]
        };
        let a = part(q - scenario.ap_pos, d_a, self.grad[0]);
        let i = part(q - scenario.irs_pos, d_i, self.grad[1]);
        [
            [a[0][0] + i[0][0], a[0][1] + i[0][1]],
            [a[1][0] + i[1][0], a[1][1] + i[1][1]],
        ]
    }
}

/// Per-slot linearization of the average rate around an expansion trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct RateLinearization {
    pub slots: Vec<SlotLinearization>,
}

impl RateLinearization {
    /// Linearized average rate of a trajectory.
    pub fn average(&self, traj: &[Position], scenario: &Scenario) -> f64 {
        let total: f64 = self.slots.iter().zip(traj).map(|(s, q)| s.at(*q, scenario)).sum();
        total / self.slots.len() as f64
    }
}

/// Builds the tangent of every slot's rate at `expansion_traj`, using the
/// given per-slot classes.
pub fn linearize_rate(
    model: &SnrModel,
    classes: &[LinkClass],
    expansion_traj: &[Position],
    scenario: &Scenario,
) -> Result<RateLinearization> {
    if classes.len() != expansion_traj.len() {
        return Err(Error::InvalidTrajectory(format!(
            "{} classes for {} waypoints",
            classes.len(),
            expansion_traj.len()
        )));
    }
    let slots = expansion_traj
        .iter()
        .zip(classes)
        .map(|(&q, &class)| {
            let (d_a0, d_i0) = distances(q, scenario);
            Ok(SlotLinearization {
                class,
                d_a0,
                d_i0,
                value: slot_rate(model, class, d_a0, d_i0, scenario)?,
                grad: rate_gradient(model, class, d_a0, d_i0, scenario)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateLinearization { slots })
}
