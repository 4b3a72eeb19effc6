//! Nonlinear least-squares fit of the SNR model to a radio map.
//!
//! Residuals are `ln(1 + model) - ln(1 + map)` per cell. All five parameters
//! are optimized as squares of free variables so they stay nonnegative, with a
//! Levenberg–Marquardt iteration scaled by the diagonal of `J^T J`.

use nalgebra::{DMatrix, DVector, Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use super::{ClassFit, SnrModel, SnrParams};
use crate::error::{Error, Result};
use crate::radiomap::RadioMap;
use crate::scenario::{distances, LinkClass, Scenario, Visibility};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Independent parameters for each (AP, IRS) visibility class.
    PerClass,
    /// One parameter set for the whole map.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub mode: FitMode,
    pub max_iter: usize,
    /// Largest allowed cosine between the residual vector and any Jacobian column.
    pub gtol: f64,
    /// Relative cost reduction below which a step counts as converged.
    pub ftol: f64,
    /// Relative (scaled) step size below which the iteration stops.
    pub xtol: f64,
    /// Classes with fewer cells copy the nearest populated class.
    pub min_class_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: FitMode::PerClass,
            max_iter: 500,
            gtol: 1e-10,
            ftol: 1e-14,
            xtol: 1e-12,
            min_class_points: 20,
        }
    }
}

/// One fitting sample: distances and the (already `p_t/σ²`-scaled) SNR.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Sample {
    pub d_a: f64,
    pub d_i: f64,
    pub y: f64,
}

pub fn fit(map: &RadioMap, scenario: &Scenario) -> Result<SnrModel> {
    fit_with(map, scenario, &FitOptions::default())
}

pub fn fit_with(map: &RadioMap, scenario: &Scenario, opts: &FitOptions) -> Result<SnrModel> {
    let scale = scenario.radio.snr_scale();
    let mut buckets: [Vec<Sample>; 4] = Default::default();
    for cell in &map.cells {
        let (d_a, d_i) = distances(cell.center, scenario);
        let bucket = match opts.mode {
            FitMode::PerClass => cell.class.index(),
            FitMode::Global => 0,
        };
        buckets[bucket].push(Sample {
            d_a,
            d_i,
            y: cell.avg_opt_snr,
        });
    }
    let unscale = |mut f: ClassFit| {
        if scale > 0.0 {
            f.params.a /= scale;
            f.params.b /= scale;
            f.params.c /= scale;
        }
        f
    };
    let classes = match opts.mode {
        FitMode::Global => {
            let class = LinkClass::new(Visibility::Los, Visibility::Los);
            let (nu, mu) = SnrParams::nominal_exponents(class, scenario);
            let f = unscale(fit_samples(&buckets[0], nu, mu, opts, class)?);
            [f.clone(), f.clone(), f.clone(), f]
        }
        FitMode::PerClass => {
            let mut fitted: [Option<ClassFit>; 4] = Default::default();
            for class in LinkClass::ALL {
                let samples = &buckets[class.index()];
                if samples.len() >= opts.min_class_points {
                    let (nu, mu) = SnrParams::nominal_exponents(class, scenario);
                    fitted[class.index()] = Some(unscale(fit_samples(samples, nu, mu, opts, class)?));
                }
            }
            let populated: Vec<LinkClass> = LinkClass::ALL
                .into_iter()
                .filter(|c| fitted[c.index()].is_some())
                .collect();
            LinkClass::ALL.map(|class| {
                if let Some(f) = &fitted[class.index()] {
                    return f.clone();
                }
                let points = buckets[class.index()].len();
                match nearest_class(class, &populated) {
                    Some(src) => {
                        log::warn!(
                            "class {class} has {points} cells (< {}); using the fit of {src}",
                            opts.min_class_points
                        );
                        let mut f = fitted[src.index()].clone().expect("populated class");
                        f.points = points;
                        f.iterations = 0;
                        f.inherited_from = Some(src);
                        f
                    }
                    None => {
                        log::warn!("no class has enough cells to fit; using zero gains for {class}");
                        let (nu, mu) = SnrParams::nominal_exponents(class, scenario);
                        ClassFit {
                            params: SnrParams::zero(nu, mu),
                            residual_norm: 0.0,
                            points,
                            iterations: 0,
                            inherited_from: None,
                        }
                    }
                }
            })
        }
    };
    Ok(SnrModel {
        mode: opts.mode,
        classes,
        scenario_hash: scenario.hash(),
    })
}

/// Populated class differing in the fewest link visibilities; ties go to the
/// lower class index.
fn nearest_class(class: LinkClass, populated: &[LinkClass]) -> Option<LinkClass> {
    populated
        .iter()
        .copied()
        .min_by_key(|c| ((c.ap != class.ap) as usize + (c.irs != class.irs) as usize, c.index()))
}

/// Model value and Jacobian row for one sample with respect to
/// `(A, B, C, ν, μ)`, given scaled gains.
fn model_row(p: &[f64; 5], s: &Sample) -> (f64, [f64; 5]) {
    let [a, b, c, nu, mu] = *p;
    let ti = s.d_i.powf(-0.5 * nu);
    let ta = s.d_a.powf(-0.5 * mu);
    let fa = ti * ti;
    let fb = ti * ta;
    let fc = ta * ta;
    let v = a * fa + b * fb + c * fc;
    let ln_i = s.d_i.ln();
    let ln_a = s.d_a.ln();
    let d_nu = -ln_i * (a * fa + 0.5 * b * fb);
    let d_mu = -ln_a * (0.5 * b * fb + c * fc);
    (v, [fa, fb, fc, d_nu, d_mu])
}

fn residuals(p: &[f64; 5], samples: &[Sample]) -> Vec<f64> {
    samples
        .iter()
        .map(|s| model_row(p, s).0.ln_1p() - s.y.ln_1p())
        .collect()
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn to_params(x: &Vector5<f64>) -> [f64; 5] {
    [x[0] * x[0], x[1] * x[1], x[2] * x[2], x[3] * x[3], x[4] * x[4]]
}

/// Linear warm start for the gains with the exponents frozen: weighted
/// nonnegative least squares over all support subsets of `{A, B, C}`.
pub(crate) fn warm_start_gains(samples: &[Sample], nu: f64, mu: f64) -> [f64; 3] {
    let rows: Vec<([f64; 3], f64, f64)> = samples
        .iter()
        .map(|s| {
            let (_, j) = model_row(&[0.0, 0.0, 0.0, nu, mu], s);
            let w = 1.0 / (1.0 + s.y);
            ([j[0], j[1], j[2]], s.y, w)
        })
        .collect();
    let mut best: Option<([f64; 3], f64)> = None;
    for mask in 1u8..8 {
        let idx: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
        let m = DMatrix::from_fn(rows.len(), idx.len(), |r, c| rows[r].0[idx[c]] * rows[r].2);
        let rhs = DVector::from_fn(rows.len(), |r, _| rows[r].1 * rows[r].2);
        // Column scaling keeps the normal system well conditioned.
        let norms: Vec<f64> = (0..idx.len())
            .map(|c| m.column(c).norm().max(f64::MIN_POSITIVE))
            .collect();
        let ms = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] / norms[c]);
        let Ok(sol) = ms.clone().svd(true, true).solve(&rhs, 1e-14) else {
            continue;
        };
        let mut g = [0.0; 3];
        let mut ok = true;
        for (c, &i) in idx.iter().enumerate() {
            g[i] = sol[c] / norms[c];
            ok &= g[i] >= 0.0;
        }
        if !ok {
            continue;
        }
        let res = (&ms * &sol - &rhs).norm_squared();
        if best.is_none_or(|(_, r)| res < r) {
            best = Some((g, res));
        }
    }
    let mut g = best.map(|b| b.0).unwrap_or([0.0; 3]);
    let floor = 1e-9 * g.iter().cloned().fold(0.0, f64::max);
    for v in &mut g {
        *v = v.max(floor);
    }
    g
}

/// Exponent starting points tried besides the nominal pair.
const EXPONENT_STARTS: [f64; 3] = [2.0, 3.25, 4.5];

/// Runs Levenberg–Marquardt from the nominal exponents and from a small grid
/// of other exponent pairs, keeping the lowest residual. The square-root
/// parametrization has stationary points wherever a gain is zero, so a single
/// start can stall with a gain pinned at the floor.
pub(crate) fn fit_samples(
    samples: &[Sample],
    nu0: f64,
    mu0: f64,
    opts: &FitOptions,
    class: LinkClass,
) -> Result<ClassFit> {
    if samples.iter().all(|s| s.y <= 0.0) {
        return Ok(ClassFit {
            params: SnrParams::zero(nu0, mu0),
            residual_norm: 0.0,
            points: samples.len(),
            iterations: 0,
            inherited_from: None,
        });
    }
    let mut starts = vec![(nu0, mu0)];
    for &nu in &EXPONENT_STARTS {
        for &mu in &EXPONENT_STARTS {
            if (nu, mu) != (nu0, mu0) {
                starts.push((nu, mu));
            }
        }
    }
    let mut best: Option<ClassFit> = None;
    let mut first_err = None;
    for (nu, mu) in starts {
        match fit_from(samples, nu, mu, opts, class) {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.residual_norm < b.residual_norm) {
                    best = Some(f);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(f), _) => Ok(f),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one start"),
    }
}

fn fit_from(samples: &[Sample], nu0: f64, mu0: f64, opts: &FitOptions, class: LinkClass) -> Result<ClassFit> {
    let points = samples.len();
    let g0 = warm_start_gains(samples, nu0, mu0);
    let mut x = Vector5::new(g0[0].sqrt(), g0[1].sqrt(), g0[2].sqrt(), nu0.sqrt(), mu0.sqrt());
    let mut r = residuals(&to_params(&x), samples);
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let p = to_params(&x);
        // Jacobian with respect to the square-root variables.
        let mut jtj = Matrix5::<f64>::zeros();
        let mut jtr = Vector5::<f64>::zeros();
        for (s, ri) in samples.iter().zip(&r) {
            let (v, row) = model_row(&p, s);
            let inv = 1.0 / (1.0 + v);
            let j = Vector5::from_fn(|k, _| 2.0 * x[k] * row[k] * inv);
            jtj += j * j.transpose();
            jtr += j * *ri;
        }
        let rnorm = (2.0 * cost).sqrt();
        if rnorm <= 1e-300 {
            converged = true;
            break;
        }
        let cosine = (0..5)
            .map(|k| {
                let col = jtj[(k, k)].sqrt();
                if col > 0.0 {
                    jtr[k].abs() / (col * rnorm)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if cosine <= opts.gtol {
            converged = true;
            break;
        }
        let d = Vector5::from_fn(|k, _| jtj[(k, k)].max(1e-300).sqrt());
        let scaled = Matrix5::from_fn(|i, j| jtj[(i, j)] / (d[i] * d[j]));
        let g = Vector5::from_fn(|k, _| jtr[k] / d[k]);
        let mut accepted = false;
        while lambda < 1e20 {
            let m = scaled + Matrix5::identity() * lambda;
            let Some(chol) = m.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step_s = -chol.solve(&g);
            let step = step_s.component_div(&d);
            let x_new = x + step;
            let r_new = residuals(&to_params(&x_new), samples);
            let cost_new = cost_of(&r_new);
            let predicted = -(g.dot(&step_s) + 0.5 * step_s.dot(&(scaled * step_s)));
            if cost_new.is_finite() && cost_new < cost {
                let actual = cost - cost_new;
                let ratio = if predicted > 0.0 { actual / predicted } else { 0.0 };
                lambda *= (1.0 - (2.0 * ratio - 1.0).powi(3)).max(1.0 / 3.0);
                let xs = x.component_mul(&d).norm();
                let small_f = actual <= opts.ftol * cost && predicted <= opts.ftol * cost;
                let small_x = step_s.norm() <= opts.xtol * (xs + opts.xtol);
                x = x_new;
                r = r_new;
                cost = cost_new;
                accepted = true;
                if small_f || small_x {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction left at machine precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let p = to_params(&x);
    let params = SnrParams {
        a: p[0],
        b: p[1],
        c: p[2],
        nu: p[3],
        mu: p[4],
    };
    if !converged {
        return Err(Error::FitFailure {
            class,
            iterations,
            best: params,
        });
    }
    Ok(ClassFit {
        params,
        residual_norm: (2.0 * cost).sqrt(),
        points,
        iterations,
        inherited_from: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(p: [f64; 5]) -> Vec<Sample> {
        let mut out = Vec::new();
        for i in 0..15 {
            for j in 0..12 {
                let d_a = 1.0 + 2.5 * i as f64;
                let d_i = 1.5 + 3.0 * j as f64;
                let y = model_row(&p, &Sample { d_a, d_i, y: 0.0 }).0;
                out.push(Sample { d_a, d_i, y });
            }
        }
        out
    }

    const LOS: LinkClass = LinkClass::new(Visibility::Los, Visibility::Los);

    #[test]
    fn recovers_exact_parameters() {
        let truth = [1e9, 1e8, 1e9, 2.0, 2.0];
        let f = fit_samples(&synthetic(truth), 2.0, 2.0, &FitOptions::default(), LOS).unwrap();
        let got = [f.params.a, f.params.b, f.params.c, f.params.nu, f.params.mu];
        for (g, t) in got.iter().zip(&truth) {
            assert!(((g - t) / t).abs() < 1e-3, "{got:?}");
        }
    }

    #[test]
    fn starts_away_from_true_exponents() {
        let truth = [3e8, 2e8, 5e8, 2.4, 3.1];
        let f = fit_samples(&synthetic(truth), 4.5, 2.0, &FitOptions::default(), LOS).unwrap();
        let got = [f.params.a, f.params.b, f.params.c, f.params.nu, f.params.mu];
        for (g, t) in got.iter().zip(&truth) {
            assert!(((g - t) / t).abs() < 1e-2, "{got:?}");
        }
    }

    #[test]
    fn zero_cross_term_stays_small() {
        let truth = [1e9, 0.0, 1e9, 2.0, 2.0];
        let f = fit_samples(&synthetic(truth), 2.0, 2.0, &FitOptions::default(), LOS).unwrap();
        assert!(f.params.b <= 1e-6 * f.params.a, "{:?}", f.params);
    }

    #[test]
    fn all_zero_data_gives_zero_gains() {
        let s: Vec<Sample> = synthetic([0.0, 0.0, 0.0, 2.0, 2.0]);
        let f = fit_samples(&s, 2.0, 4.5, &FitOptions::default(), LOS).unwrap();
        assert_eq!((f.params.a, f.params.b, f.params.c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn warm_start_is_exact_with_true_exponents() {
        let truth = [2e8, 5e7, 7e8, 2.0, 4.5];
        let g = warm_start_gains(&synthetic(truth), 2.0, 4.5);
        for (a, b) in g.iter().zip(&truth[..3]) {
            assert!(((a - b) / b).abs() < 1e-6, "{g:?}");
        }
    }

    #[test]
    fn nearest_class_prefers_one_link_difference() {
        let ll = LinkClass::ALL[0];
        let nn = LinkClass::ALL[3];
        let nl = LinkClass::ALL[1];
        assert_eq!(nearest_class(nn, &[ll, nl]), Some(nl));
        assert_eq!(nearest_class(nn, &[ll]), Some(ll));
        assert_eq!(nearest_class(nn, &[]), None);
    }
}
