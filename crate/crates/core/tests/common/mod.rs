//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::TAU;

use irsplan::channel::ChannelDraw;
use irsplan::scenario::{distances, motion_energy, Obstacle};
use irsplan::sco::linearize_obstacles;
use irsplan::snrmodel::{linearize_rate, RateLinearization, SnrModel, SnrParams};
use irsplan::socp::ObstacleCut;
use irsplan::{LinkClass, Position, Scenario, ScenarioConfig};
use num_complex::Complex64;
use rand::Rng;

pub fn desk() -> Scenario {
    ScenarioConfig::reference().build().unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Best SNR over every combination of `levels` uniformly spaced phases per
/// IRS element, with the combiner matched to the resulting channel. The IRS
/// to AP channel is formed explicitly as `sqrt(NM) γ ã b̃^T`.
pub fn phase_grid_snr(draw: &ChannelDraw, levels: usize, snr_scale: f64) -> f64 {
    let n = draw.n();
    let m = draw.m();
    let h_d = draw.h_d();
    let h_r = draw.h_r();
    let scale = ((n * m) as f64).sqrt();
    let direct: Vec<Complex64> = h_d.iter().map(|h| h.conj()).collect();
    // Row m of h_r^H diag(φ) G without φ: conj(h_r,m) G[m, :].
    let rows: Vec<Vec<Complex64>> = (0..m)
        .map(|i| {
            (0..n)
                .map(|j| h_r[i].conj() * draw.gamma * scale * draw.a_tilde[i] * draw.b_tilde[j])
                .collect()
        })
        .collect();
    let phasors: Vec<Complex64> = (0..levels)
        .map(|l| Complex64::from_polar(1.0, TAU * l as f64 / levels as f64))
        .collect();
    fn descend(rows: &[Vec<Complex64>], phasors: &[Complex64], x: &[Complex64], best: &mut f64) {
        match rows.split_first() {
            None => *best = best.max(x.iter().map(|v| v.norm_sqr()).sum()),
            Some((row, rest)) => {
                let mut y = x.to_vec();
                for p in phasors {
                    for ((yj, xj), r) in y.iter_mut().zip(x).zip(row) {
                        *yj = xj + p * r;
                    }
                    descend(rest, phasors, &y, best);
                }
            }
        }
    }
    let mut best = 0.0f64;
    descend(&rows, &phasors, &direct, &mut best);
    best * snr_scale
}

/// Second-order bound on how far the grid optimum can fall below the true
/// optimum: a phase error of at most π/levels on each element scales that
/// element's contribution by at least cos(π/levels).
pub fn phase_grid_allowance(levels: usize) -> f64 {
    1.0 - (std::f64::consts::PI / levels as f64).cos().powi(2)
}

/// Central difference of a scalar function of two variables.
pub fn fd_gradient(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> [f64; 2] {
    [
        (f(x + h, y) - f(x - h, y)) / (2.0 * h),
        (f(x, y + h) - f(x, y - h)) / (2.0 * h),
    ]
}

pub fn fd_hessian(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> [[f64; 2]; 2] {
    let fxx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
    let fyy = (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
    let fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
    [[fxx, fxy], [fxy, fyy]]
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym_eigen(m: [[f64; 2]; 2]) -> [f64; 2] {
    let tr = m[0][0] + m[1][1];
    let diff = 0.5 * (m[0][0] - m[1][1]);
    let r = (diff * diff + m[0][1] * m[0][1]).sqrt();
    [0.5 * tr - r, 0.5 * tr + r]
}

pub fn random_params<R: Rng>(rng: &mut R) -> SnrParams {
    SnrParams {
        a: 10f64.powf(rng.random_range(-8.0..-5.0)),
        b: 10f64.powf(rng.random_range(-8.0..-5.0)),
        c: 10f64.powf(rng.random_range(-8.0..-5.0)),
        nu: rng.random_range(2.0..4.5),
        mu: rng.random_range(2.0..4.5),
    }
}

/// One K=2 subproblem: a single free waypoint between fixed endpoints.
pub struct K2Instance {
    pub scenario: Scenario,
    pub linearization: RateLinearization,
    pub cuts: Vec<ObstacleCut>,
    pub prev: Vec<Position>,
    pub trust_radius: f64,
}

pub fn random_k2_instance<R: Rng>(rng: &mut R) -> K2Instance {
    let mut s = desk();
    s.k_slots = 2;
    let d_max = s.d_max();
    loop {
        let q_s = Position::new(rng.random_range(5.0..45.0), rng.random_range(5.0..25.0));
        let ang = rng.random_range(0.0..TAU);
        let len = rng.random_range(0.5..1.8 * d_max);
        let q_d = q_s + Position::new(ang.cos(), ang.sin()) * len;
        let mid = (q_s + q_d) * 0.5 + Position::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if mid.distance(q_s) > d_max || mid.distance(q_d) > d_max {
            continue;
        }
        let n_obs = rng.random_range(0..=2);
        let obstacles: Vec<Obstacle> = (0..n_obs)
            .map(|_| {
                let c = mid + Position::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
                Obstacle::ellipse(
                    c,
                    rng.random_range(1.0..5.0),
                    rng.random_range(1.0..4.0),
                    rng.random_range(0.0..3.2),
                    2.0,
                )
                .unwrap()
            })
            .collect();
        if obstacles.iter().any(|o| o.margin(mid) < s.d_s) {
            continue;
        }
        s.q_s = q_s;
        s.q_d = q_d;
        s.obstacles = obstacles;
        let prev = vec![q_s, mid, q_d];
        let model = SnrModel::uniform(random_params(rng), &s);
        let classes: Vec<LinkClass> = (0..3).map(|_| LinkClass::from_index(rng.random_range(0..4))).collect();
        let lin = linearize_rate(&model, &classes, &prev, &s).unwrap();
        s.r_min = lin.average(&prev, &s) * rng.random_range(0.99..1.0);
        let cuts = linearize_obstacles(&prev, &s);
        return K2Instance {
            scenario: s,
            linearization: lin,
            cuts,
            prev,
            trust_radius: rng.random_range(0.3..1.0),
        };
    }
}

/// Exhaustive search of the subproblem over a square lattice of spacing `h`
/// covering the trust disk. Returns the best energy and the point.
pub fn grid_search_k2(inst: &K2Instance, h: f64) -> Option<(f64, Position)> {
    let s = &inst.scenario;
    let p = inst.prev[1];
    let t = inst.trust_radius;
    let n = (t / h).ceil() as i64;
    let d_max = s.d_max();
    let mut best: Option<(f64, Position)> = None;
    for i in -n..=n {
        for j in -n..=n {
            let q = p + Position::new(i as f64 * h, j as f64 * h);
            if q.distance(p) > t || q.distance(s.q_s) > d_max || q.distance(s.q_d) > d_max {
                continue;
            }
            if inst.cuts.iter().any(|c| c.value(q) < 0.0) {
                continue;
            }
            let traj = [s.q_s, q, s.q_d];
            let r: f64 = inst
                .linearization
                .slots
                .iter()
                .zip(&traj)
                .map(|(sl, q)| {
                    let (d_a, d_i) = distances(*q, s);
                    sl.at_distances(d_a, d_i)
                })
                .sum::<f64>()
                / 3.0;
            if r < s.r_min {
                continue;
            }
            let e = motion_energy(&traj, s).unwrap();
            if best.is_none_or(|(b, _)| e < b) {
                best = Some((e, q));
            }
        }
    }
    best
}

/// Largest change of the K=2 energy when the free waypoint moves by `dist`
/// inside the region allowed by the step bounds.
pub fn k2_grid_bound(s: &Scenario, dist: f64) -> f64 {
    let e = &s.energy;
    let slope = 2.0 * e.c1 * s.d_max() / s.delta_t + e.c2;
    2.0 * slope * dist
}

/// Expected fitted parameters of an obstacle-free map under Rayleigh fading,
/// from `E|h| = sqrt(π)/2` and `E|h|² = 1` for unit complex Gaussians.
pub fn expected_params(s: &Scenario) -> SnrParams {
    let n = s.radio.n_antennas as f64;
    let m = s.radio.m_elements as f64;
    let rho = s.radio.rho;
    let g = (rho * s.radio.irs_link_gain / s.d_ia().powi(2)).sqrt();
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    SnrParams {
        a: n * rho * g * g * (m * (m - 1.0) * quarter_pi + m),
        b: 2.0 * n.sqrt() * rho * g * m * quarter_pi,
        c: rho * n,
        nu: s.radio.los_exponent,
        mu: s.radio.los_exponent,
    }
}
