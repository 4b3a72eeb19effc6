//! Cone algebra: Jordan products, scaling, step lengths.

use nalgebra::{DVector, DVectorView, DVectorViewMut};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    /// `n` nonnegative scalars.
    NonNeg(usize),
    /// `{(t, v) : ‖v‖ ≤ t}` of total dimension `n`.
    Soc(usize),
}

impl Cone {
    pub fn dim(self) -> usize {
        match self {
            Cone::NonNeg(n) | Cone::Soc(n) => n,
        }
    }

    /// Contribution to the barrier degree.
    pub fn degree(self) -> usize {
        match self {
            Cone::NonNeg(n) => n,
            Cone::Soc(_) => 1,
        }
    }
}

/// Nesterov–Todd scaling for one cone block.
#[derive(Clone, Debug)]
pub(crate) enum Scaling {
    /// `W = diag(w)`
    Diag(DVector<f64>),
    /// `W = η (2 v v^T − J)`, `J = diag(1, −1, …, −1)`.
    Soc { eta: f64, w: DVector<f64> },
}

fn soc_residual(x: &DVectorView<f64>) -> f64 {
    let t = x[0];
    let v = x.rows(1, x.len() - 1).norm();
    (t - v) * (t + v)
}

impl Scaling {
    pub(crate) fn new(cone: Cone, s: DVectorView<f64>, z: DVectorView<f64>) -> Self {
        match cone {
            Cone::NonNeg(n) => Scaling::Diag(DVector::from_fn(n, |i, _| (s[i] / z[i]).sqrt())),
            Cone::Soc(n) => {
                let ns = soc_residual(&s).max(f64::MIN_POSITIVE).sqrt();
                let nz = soc_residual(&z).max(f64::MIN_POSITIVE).sqrt();
                let sb = s / ns;
                let zb = z / nz;
                let gamma = ((1.0 + sb.dot(&zb)) / 2.0).sqrt();
                // NT point w̄ = (s̄ + J z̄) / 2γ, stored as the hyperbolic
                // Householder vector (w̄ + e) / sqrt(2 (w̄_0 + 1)).
                let mut w = DVector::zeros(n);
                w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                for i in 1..n {
                    w[i] = (sb[i] - zb[i]) / (2.0 * gamma);
                }
                let norm = (2.0 * (w[0] + 1.0)).sqrt();
                w[0] += 1.0;
                w /= norm;
                Scaling::Soc {
                    eta: (ns / nz).sqrt(),
                    w,
                }
            }
        }
    }

    /// `y = W x`
    pub(crate) fn apply(&self, x: DVectorView<f64>, mut y: DVectorViewMut<f64>) {
        match self {
            Scaling::Diag(d) => y.copy_from(&x.component_mul(d)),
            Scaling::Soc { eta, w } => {
                // (2 w w^T − J) x = 2 (w·x) w − J x
                let wx = w.dot(&x);
                y[0] = eta * (2.0 * wx * w[0] - x[0]);
                for i in 1..x.len() {
                    y[i] = eta * (2.0 * wx * w[i] + x[i]);
                }
            }
        }
    }

    /// `y = W^{-1} x`
    pub(crate) fn apply_inv(&self, x: DVectorView<f64>, mut y: DVectorViewMut<f64>) {
        match self {
            Scaling::Diag(d) => y.copy_from(&x.component_div(d)),
            Scaling::Soc { eta, w } => {
                // W^{-1} = (2 J w w^T J − J) / η
                let jw_x = w[0] * x[0] - w.rows(1, w.len() - 1).dot(&x.rows(1, x.len() - 1));
                y[0] = (2.0 * jw_x * w[0] - x[0]) / eta;
                for i in 1..x.len() {
                    y[i] = (-2.0 * jw_x * w[i] + x[i]) / eta;
                }
            }
        }
    }
}

/// Jordan product `u ∘ v`.
pub(crate) fn jordan(cone: Cone, u: DVectorView<f64>, v: DVectorView<f64>, mut out: DVectorViewMut<f64>) {
    match cone {
        Cone::NonNeg(_) => out.copy_from(&u.component_mul(&v)),
        Cone::Soc(n) => {
            out[0] = u.dot(&v);
            for i in 1..n {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
    }
}

/// Solves `λ ∘ x = v` for `x`.
pub(crate) fn jordan_div(cone: Cone, lambda: DVectorView<f64>, v: DVectorView<f64>, mut out: DVectorViewMut<f64>) {
    match cone {
        Cone::NonNeg(_) => out.copy_from(&v.component_div(&lambda)),
        Cone::Soc(n) => {
            let l1v1 = lambda.rows(1, n - 1).dot(&v.rows(1, n - 1));
            let det = soc_residual(&lambda);
            let x0 = (lambda[0] * v[0] - l1v1) / det;
            out[0] = x0;
            for i in 1..n {
                out[i] = (v[i] - x0 * lambda[i]) / lambda[0];
            }
        }
    }
}

/// Largest `α ≥ 0` with `x + α d` in the cone (`f64::INFINITY` if unbounded).
pub(crate) fn max_step(cone: Cone, x: DVectorView<f64>, d: DVectorView<f64>) -> f64 {
    match cone {
        Cone::NonNeg(n) => (0..n)
            .filter(|&i| d[i] < 0.0)
            .map(|i| -x[i] / d[i])
            .fold(f64::INFINITY, f64::min),
        Cone::Soc(n) => {
            let x1 = x.rows(1, n - 1);
            let d1 = d.rows(1, n - 1);
            let a = d[0] * d[0] - d1.norm_squared();
            let b = x[0] * d[0] - x1.dot(&d1);
            let c = soc_residual(&x).max(0.0);
            if a < 0.0 || b < 0.0 {
                let disc = (b * b - a * c).max(0.0);
                let alpha = c / (-b + disc.sqrt());
                // x0 + α d0 must stay nonnegative as well.
                if d[0] < 0.0 {
                    alpha.min(-x[0] / d[0])
                } else {
                    alpha
                }
            } else {
                f64::INFINITY
            }
        }
    }
}

/// `inf { α : x + α e ∈ cone }` where `e` is the cone identity.
pub(crate) fn identity_shift(cone: Cone, x: DVectorView<f64>) -> f64 {
    match cone {
        Cone::NonNeg(n) => (0..n).map(|i| -x[i]).fold(f64::NEG_INFINITY, f64::max),
        Cone::Soc(n) => x.rows(1, n - 1).norm() - x[0],
    }
}

/// Adds `α e` to `x`.
pub(crate) fn add_identity(cone: Cone, mut x: DVectorViewMut<f64>, alpha: f64) {
    match cone {
        Cone::NonNeg(n) => {
            for i in 0..n {
                x[i] += alpha;
            }
        }
        Cone::Soc(_) => x[0] += alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_the_same_point() {
        let cone = Cone::Soc(4);
        let s = v(&[3.0, 1.0, -0.5, 0.7]);
        let z = v(&[2.0, -0.3, 0.9, 0.1]);
        let w = Scaling::new(cone, s.as_view(), z.as_view());
        let mut wz = DVector::zeros(4);
        let mut winv_s = DVector::zeros(4);
        w.apply(z.as_view(), wz.as_view_mut());
        w.apply_inv(s.as_view(), winv_s.as_view_mut());
        assert!((wz - winv_s).norm() < 1e-12);
        let mut back = DVector::zeros(4);
        let mut tmp = DVector::zeros(4);
        w.apply(s.as_view(), tmp.as_view_mut());
        w.apply_inv(tmp.as_view(), back.as_view_mut());
        assert!((back - s).norm() < 1e-12);
    }

    #[test]
    fn jordan_division_inverts_product() {
        let cone = Cone::Soc(3);
        let l = v(&[2.0, 0.5, -0.8]);
        let x = v(&[0.3, -1.0, 4.0]);
        let mut p = DVector::zeros(3);
        jordan(cone, l.as_view(), x.as_view(), p.as_view_mut());
        let mut back = DVector::zeros(3);
        jordan_div(cone, l.as_view(), p.as_view(), back.as_view_mut());
        assert!((back - x).norm() < 1e-12);
    }

    #[test]
    fn step_to_boundary() {
        let cone = Cone::Soc(3);
        let x = v(&[1.0, 0.0, 0.0]);
        let d = v(&[0.0, 1.0, 0.0]);
        assert!((max_step(cone, x.as_view(), d.as_view()) - 1.0).abs() < 1e-12);
        let inside = v(&[1.0, 0.1, 0.0]);
        assert_eq!(max_step(cone, x.as_view(), inside.as_view()), f64::INFINITY);
        let nn = Cone::NonNeg(2);
        assert!((max_step(nn, v(&[1.0, 2.0]).as_view(), v(&[-2.0, -1.0]).as_view()) - 0.5).abs() < 1e-15);
        let shift = identity_shift(cone, v(&[0.5, 3.0, 4.0]).as_view());
        assert!((shift - 4.5).abs() < 1e-12);
    }
}
