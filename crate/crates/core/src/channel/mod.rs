//! Stochastic channel realizations and the closed-form joint AP/IRS
//! beamformer.
//!
//! The IRS–AP hop is a rank-one LOS channel `G = sqrt(NM) γ ã b̃^T`; robot
//! links are i.i.d. Rayleigh scaled by distance-based path loss whose exponent
//! depends on the link's visibility class.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scenario::{distances, LinkClass, Position, Scenario, Visibility};

/// One realization of the robot–IRS, robot–AP and IRS–AP channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraw {
    /// Small-scale fading of the robot–IRS link (h̃_r), length M.
    pub fading_r: Vec<Complex64>,
    /// Small-scale fading of the robot–AP link (h̃_d), length N.
    pub fading_d: Vec<Complex64>,
    /// IRS array response, unit norm, length M.
    pub a_tilde: Vec<Complex64>,
    /// AP array response, unit norm, length N.
    pub b_tilde: Vec<Complex64>,
    /// IRS–AP gain γ.
    pub gamma: Complex64,
    pub rho: f64,
    /// Path-loss exponent of the robot–IRS link.
    pub nu: f64,
    /// Path-loss exponent of the robot–AP link.
    pub mu: f64,
    pub d_a: f64,
    pub d_i: f64,
}

impl ChannelDraw {
    pub fn n(&self) -> usize {
        self.fading_d.len()
    }

    pub fn m(&self) -> usize {
        self.fading_r.len()
    }

    fn amp_r(&self) -> f64 {
        (self.rho * self.d_i.powf(-self.nu)).sqrt()
    }

    fn amp_d(&self) -> f64 {
        (self.rho * self.d_a.powf(-self.mu)).sqrt()
    }

    /// Robot–IRS channel `h_r = sqrt(ρ d_i^-ν) h̃_r`.
    pub fn h_r(&self) -> Vec<Complex64> {
        let a = self.amp_r();
        self.fading_r.iter().map(|h| h * a).collect()
    }

    /// Robot–AP channel `h_d = sqrt(ρ d_a^-μ) h̃_d`.
    pub fn h_d(&self) -> Vec<Complex64> {
        let a = self.amp_d();
        self.fading_d.iter().map(|h| h * a).collect()
    }

    /// `‖h̃_r‖₁`
    pub fn fading_r_l1(&self) -> f64 {
        self.fading_r.iter().map(|h| h.norm()).sum()
    }

    /// `‖h̃_d‖₂²`
    pub fn fading_d_sq(&self) -> f64 {
        self.fading_d.iter().map(|h| h.norm_sqr()).sum()
    }

    /// `b̃^T h̃_d`
    pub fn direct_projection(&self) -> Complex64 {
        self.b_tilde.iter().zip(&self.fading_d).map(|(b, h)| b * h).sum()
    }
}

/// IRS phase configuration and AP combiner.
#[derive(Clone, Debug, PartialEq)]
pub struct Beamformer {
    /// Per-element phases θ̂_m in `[0, 2π)`.
    pub phases: Vec<f64>,
    /// Combining vector w, `‖w‖₂ <= 1`.
    pub combiner: Vec<Complex64>,
    /// Common IRS phase α in `[0, 2π)`.
    pub global_phase: f64,
}

impl Beamformer {
    /// Diagonal of `Φ = e^{jα} diag(e^{jθ̂_m})`.
    pub fn reflection(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .map(|&t| Complex64::from_polar(1.0, t + self.global_phase))
            .collect()
    }
}

pub(crate) fn wrap_phase(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Half-wavelength ULA response with direction cosine `u` along the array axis.
pub fn ula_response(dim: usize, u: f64) -> Vec<Complex64> {
    if dim == 0 {
        return Vec::new();
    }
    let scale = 1.0 / (dim as f64).sqrt();
    (0..dim)
        .map(|n| Complex64::from_polar(scale, PI * n as f64 * u))
        .collect()
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Deterministic, position-independent part of a draw: array responses and γ.
#[derive(Clone, Debug)]
pub struct StaticLink {
    a_tilde: Vec<Complex64>,
    b_tilde: Vec<Complex64>,
    gamma: Complex64,
}

impl StaticLink {
    pub fn new(scenario: &Scenario) -> Self {
        let d_ia = scenario.d_ia();
        // Both arrays lie along the x axis (the walls they are mounted on).
        let u_irs = (scenario.ap_pos.x - scenario.irs_pos.x) / d_ia;
        let u_ap = (scenario.irs_pos.x - scenario.ap_pos.x) / d_ia;
        let r = &scenario.radio;
        let gamma = (r.rho * r.irs_link_gain / (d_ia * d_ia)).sqrt();
        Self {
            a_tilde: ula_response(r.m_elements, u_irs),
            b_tilde: ula_response(r.n_antennas, u_ap),
            gamma: Complex64::new(gamma, 0.0),
        }
    }
}

pub fn path_loss_exponent(v: Visibility, scenario: &Scenario) -> f64 {
    match v {
        Visibility::Los => scenario.radio.los_exponent,
        Visibility::Nlos => scenario.radio.nlos_exponent,
    }
}

/// Draws one realization using the given generator.
pub fn draw_channel_with<R: Rng + ?Sized>(
    rng: &mut R,
    link: &StaticLink,
    q: Position,
    scenario: &Scenario,
    class: LinkClass,
) -> ChannelDraw {
    let (d_a, d_i) = distances(q, scenario);
    let fading_r = (0..scenario.radio.m_elements).map(|_| complex_gaussian(rng)).collect();
    let fading_d = (0..scenario.radio.n_antennas).map(|_| complex_gaussian(rng)).collect();
    ChannelDraw {
        fading_r,
        fading_d,
        a_tilde: link.a_tilde.clone(),
        b_tilde: link.b_tilde.clone(),
        gamma: link.gamma,
        rho: scenario.radio.rho,
        nu: path_loss_exponent(class.irs, scenario),
        mu: path_loss_exponent(class.ap, scenario),
        d_a,
        d_i,
    }
}

/// Draws one realization, deterministic in `seed`.
pub fn draw_channel(q: Position, scenario: &Scenario, class: LinkClass, seed: u64) -> ChannelDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_channel_with(&mut rng, &StaticLink::new(scenario), q, scenario, class)
}

/// Scalar `h_r^H Φ ã` for a given reflection diagonal.
fn reflected_sum(h_r: &[Complex64], reflection: &[Complex64], a: &[Complex64]) -> Complex64 {
    h_r.iter()
        .zip(reflection)
        .zip(a)
        .map(|((h, p), a)| h.conj() * p * a)
        .sum()
}

/// Row vector `h_r^H Φ G + h_d^H` with `G = sqrt(NM) γ ã b̃^T`.
fn effective_channel(draw: &ChannelDraw, reflection: &[Complex64]) -> Vec<Complex64> {
    let n = draw.n();
    let m = draw.m();
    let h_d = draw.h_d();
    let refl = if m == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        reflected_sum(&draw.h_r(), reflection, &draw.a_tilde) * draw.gamma * ((n * m) as f64).sqrt()
    };
    draw.b_tilde
        .iter()
        .zip(&h_d)
        .map(|(b, h)| refl * b + h.conj())
        .collect()
}

/// Closed-form optimal IRS phases, common phase and combiner.
pub fn optimal_beamformer(draw: &ChannelDraw) -> Result<Beamformer> {
    let gamma_abs = draw.gamma.norm();
    // g_m = |γ| conj(h̃_r,m) ã_m; each reflected term is rotated onto the real axis.
    let phases: Vec<f64> = draw
        .fading_r
        .iter()
        .zip(&draw.a_tilde)
        .map(|(h, a)| wrap_phase(-(h.conj() * a * gamma_abs).arg()))
        .collect();
    let proj = draw.direct_projection();
    let global_phase = if draw.m() == 0 {
        0.0
    } else {
        // Align the reflected path (phase arg γ after θ̂) with b̃^T h̃_d.
        wrap_phase(-proj.arg() - draw.gamma.arg())
    };
    let reflection: Vec<Complex64> = phases
        .iter()
        .map(|&t| Complex64::from_polar(1.0, t + global_phase))
        .collect();
    let x = effective_channel(draw, &reflection);
    let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    let combiner = x.iter().map(|v| v.conj() / norm).collect();
    Ok(Beamformer {
        phases,
        combiner,
        global_phase,
    })
}

/// Received SNR `|(h_r^H Φ G + h_d^H) w|² p_t / σ²` for an arbitrary beamformer.
pub fn snr(draw: &ChannelDraw, bf: &Beamformer, scenario: &Scenario) -> f64 {
    let x = effective_channel(draw, &bf.reflection());
    let y: Complex64 = x.iter().zip(&bf.combiner).map(|(a, w)| a * w).sum();
    y.norm_sqr() * scenario.radio.snr_scale()
}

/// Optimal SNR from draw statistics,
/// `(A d_i^-ν + B d_i^-ν/2 d_a^-μ/2 + C d_a^-μ) p_t/σ²`.
pub fn optimal_snr_closed_form(draw: &ChannelDraw, d_a: f64, d_i: f64, scenario: &Scenario) -> f64 {
    let n = draw.n() as f64;
    let rho = draw.rho;
    let c = rho * draw.fading_d_sq();
    let mut s = c * d_a.powf(-draw.mu);
    if draw.m() > 0 {
        let g = draw.gamma.norm();
        let l1 = draw.fading_r_l1();
        let a = n * rho * g * g * l1 * l1;
        let b = 2.0 * n.sqrt() * rho * g * l1 * draw.direct_projection().norm();
        s += a * d_i.powf(-draw.nu) + b * d_i.powf(-0.5 * draw.nu) * d_a.powf(-0.5 * draw.mu);
    }
    s * scenario.radio.snr_scale()
}
