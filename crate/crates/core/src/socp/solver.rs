//! Primal-dual interior-point method for [`ConicProblem`].

use nalgebra::{DMatrix, DVector};

use super::cone::{add_identity, identity_shift, jordan, jordan_div, max_step, Cone, Scaling};
use super::ConicProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

const INFEASIBILITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Bound on the relative primal, dual and gap residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations without residual progress before giving up.
    pub stall_iters: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            stall_iters: 20,
            step_fraction: 0.99,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SocpSolution {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub s: DVector<f64>,
    pub iterations: usize,
    pub primal_cost: f64,
    pub dual_cost: f64,
    /// `max(‖Ax − b‖ / max(1, ‖b‖), ‖Gx + s − h‖ / max(1, ‖h‖))`
    pub primal_residual: f64,
    /// `‖A^T y + G^T z + c‖ / max(1, ‖c‖)`
    pub dual_residual: f64,
    /// `s^T z / max(1, |c^T x|)`
    pub gap: f64,
    /// For infeasible problems: `‖A^T y + G^T z‖ / −(h^T z + b^T y)` of the
    /// normalized dual ray.
    pub certificate_residual: Option<f64>,
}

struct Blocks {
    cones: Vec<(Cone, usize)>,
}

impl Blocks {
    fn new(cones: &[Cone]) -> Self {
        let mut off = 0;
        let cones = cones
            .iter()
            .map(|&c| {
                let r = (c, off);
                off += c.dim();
                r
            })
            .collect();
        Self { cones }
    }
}

/// Factored reduced KKT system for one scaling.
enum Kkt {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Kkt {
    fn factor(h: DMatrix<f64>, a: &DMatrix<f64>) -> Option<Self> {
        let n = h.nrows();
        let p = a.nrows();
        if p == 0 {
            if let Some(c) = h.clone().cholesky() {
                return Some(Kkt::Chol(c));
            }
            let reg = 1e-12 * h.diagonal().amax().max(1.0);
            let hr = h + DMatrix::identity(n, n) * reg;
            return hr.cholesky().map(Kkt::Chol);
        }
        let mut k = DMatrix::zeros(n + p, n + p);
        k.view_mut((0, 0), (n, n)).copy_from(&h);
        k.view_mut((0, n), (n, p)).copy_from(&a.transpose());
        k.view_mut((n, 0), (p, n)).copy_from(a);
        let lu = k.lu();
        if lu.is_invertible() {
            Some(Kkt::Lu(lu))
        } else {
            None
        }
    }

    fn solve(&self, rx: &DVector<f64>, ry: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        match self {
            Kkt::Chol(c) => Some((c.solve(rx), DVector::zeros(0))),
            Kkt::Lu(lu) => {
                let n = rx.len();
                let mut rhs = DVector::zeros(n + ry.len());
                rhs.rows_mut(0, n).copy_from(rx);
                rhs.rows_mut(n, ry.len()).copy_from(ry);
                let sol = lu.solve(&rhs)?;
                Some((sol.rows(0, n).into_owned(), sol.rows(n, ry.len()).into_owned()))
            }
        }
    }
}

struct Newton<'a> {
    prob: &'a ConicProblem,
    blocks: &'a Blocks,
    scalings: Vec<Scaling>,
    /// `W^{-1} G`
    gs: DMatrix<f64>,
    lambda: DVector<f64>,
    kkt: Kkt,
}

impl<'a> Newton<'a> {
    fn new(prob: &'a ConicProblem, blocks: &'a Blocks, s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let m = s.len();
        let n = prob.n_vars();
        let mut scalings = Vec::with_capacity(blocks.cones.len());
        let mut lambda = DVector::zeros(m);
        let mut gs = DMatrix::zeros(m, n);
        for &(cone, off) in &blocks.cones {
            let d = cone.dim();
            let w = Scaling::new(cone, s.rows(off, d), z.rows(off, d));
            w.apply(z.rows(off, d), lambda.rows_mut(off, d));
            for j in 0..n {
                let col = prob.g.view((off, j), (d, 1));
                if col.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let src = col.column(0).into_owned();
                w.apply_inv(src.as_view(), gs.view_mut((off, j), (d, 1)).column_mut(0));
            }
            scalings.push(w);
        }
        let h = gs.tr_mul(&gs);
        let kkt = Kkt::factor(h, &prob.a)?;
        Some(Self {
            prob,
            blocks,
            scalings,
            gs,
            lambda,
            kkt,
        })
    }

    /// Solves the linearized system
    /// `A^T dy + G^T dz = bx, A dx = by, G dx + ds = bz, λ∘(W dz + W^{-1} ds) = bs`.
    #[allow(clippy::type_complexity)]
    fn solve(
        &self,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &DVector<f64>,
        bs: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
        let m = bz.len();
        // r̂ = W^{-1} bz − λ \ bs
        let mut rhat = DVector::zeros(m);
        let mut tmp = DVector::zeros(m);
        for (&(cone, off), w) in self.blocks.cones.iter().zip(&self.scalings) {
            let d = cone.dim();
            w.apply_inv(bz.rows(off, d), rhat.rows_mut(off, d));
            jordan_div(cone, self.lambda.rows(off, d), bs.rows(off, d), tmp.rows_mut(off, d));
        }
        rhat -= &tmp;
        let rx = bx + self.gs.tr_mul(&rhat);
        let (dx, dy) = self.kkt.solve(&rx, by)?;
        // dz = W^{-1} (W^{-1} G dx − r̂)
        let v = &self.gs * &dx - &rhat;
        let mut dz = DVector::zeros(m);
        for (&(cone, off), w) in self.blocks.cones.iter().zip(&self.scalings) {
            let d = cone.dim();
            w.apply_inv(v.rows(off, d), dz.rows_mut(off, d));
        }
        let ds = bz - &self.prob.g * &dx;
        if dx.iter().chain(dz.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        Some((dx, dy, dz, ds))
    }

    /// `W^{-1} ds` and `W dz` in the scaled space.
    fn scaled(&self, ds: &DVector<f64>, dz: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let m = ds.len();
        let mut a = DVector::zeros(m);
        let mut b = DVector::zeros(m);
        for (&(cone, off), w) in self.blocks.cones.iter().zip(&self.scalings) {
            let d = cone.dim();
            w.apply_inv(ds.rows(off, d), a.rows_mut(off, d));
            w.apply(dz.rows(off, d), b.rows_mut(off, d));
        }
        (a, b)
    }
}

fn step_length(blocks: &Blocks, s: &DVector<f64>, ds: &DVector<f64>, z: &DVector<f64>, dz: &DVector<f64>) -> f64 {
    blocks
        .cones
        .iter()
        .map(|&(c, off)| {
            let d = c.dim();
            max_step(c, s.rows(off, d), ds.rows(off, d)).min(max_step(c, z.rows(off, d), dz.rows(off, d)))
        })
        .fold(f64::INFINITY, f64::min)
}

fn push_into_cone(blocks: &Blocks, v: &mut DVector<f64>) {
    let shift = blocks
        .cones
        .iter()
        .map(|&(c, off)| identity_shift(c, v.rows(off, c.dim())))
        .fold(f64::NEG_INFINITY, f64::max);
    if shift >= 0.0 {
        for &(c, off) in &blocks.cones {
            add_identity(c, v.rows_mut(off, c.dim()), 1.0 + shift);
        }
    }
}

fn identity_vector(blocks: &Blocks, m: usize) -> DVector<f64> {
    let mut e = DVector::zeros(m);
    for &(c, off) in &blocks.cones {
        add_identity(c, e.rows_mut(off, c.dim()), 1.0);
    }
    e
}

struct Residuals {
    rx: DVector<f64>,
    ry: DVector<f64>,
    rz: DVector<f64>,
    pres: f64,
    dres: f64,
    gap: f64,
    pcost: f64,
    dcost: f64,
}

fn residuals(p: &ConicProblem, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, s: &DVector<f64>) -> Residuals {
    let rx = p.a.tr_mul(y) + p.g.tr_mul(z) + &p.c;
    let ry = &p.a * x - &p.b;
    let rz = &p.g * x + s - &p.h;
    let pcost = p.c.dot(x);
    let dcost = -p.h.dot(z) - p.b.dot(y);
    let pres = (ry.norm() / p.b.norm().max(1.0)).max(rz.norm() / p.h.norm().max(1.0));
    let dres = rx.norm() / p.c.norm().max(1.0);
    let gap = s.dot(z) / pcost.abs().max(1.0);
    Residuals {
        rx,
        ry,
        rz,
        pres,
        dres,
        gap,
        pcost,
        dcost,
    }
}

/// Relative violation of the Farkas system `A^T y + G^T z = 0`,
/// `h^T z + b^T y < 0` by the current (normalized) dual iterate, if the
/// iterate points in an infeasibility direction at all.
fn farkas_residual(prob: &ConicProblem, y: &DVector<f64>, z: &DVector<f64>) -> Option<f64> {
    let scale = y.amax().max(z.amax());
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let (y, z) = (y / scale, z / scale);
    let denom = -(prob.h.dot(&z) + prob.b.dot(&y));
    if !(denom > 0.0) {
        return None;
    }
    let ray = (prob.a.tr_mul(&y) + prob.g.tr_mul(&z)).norm();
    Some(ray * prob.c.norm().max(1.0) / denom)
}

/// Solves the problem. Deterministic: identical input gives identical iterates.
pub fn solve(prob: &ConicProblem, opts: &SolverOptions) -> SocpSolution {
    let n = prob.n_vars();
    let p = prob.a.nrows();
    let m = prob.cone_rows();
    let blocks = Blocks::new(&prob.cones);
    let degree: usize = prob.cones.iter().map(|c| c.degree()).sum();

    let fail = |status, iterations| SocpSolution {
        status,
        x: DVector::zeros(n),
        y: DVector::zeros(p),
        z: DVector::zeros(m),
        s: DVector::zeros(m),
        iterations,
        primal_cost: f64::NAN,
        dual_cost: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        certificate_residual: None,
    };

    // Starting point from two least-squares problems with identity scaling.
    let ones_s = identity_vector(&blocks, m);
    let Some(init) = Newton::new(prob, &blocks, &ones_s, &ones_s) else {
        return fail(SolveStatus::MaxIter, 0);
    };
    let zero_m = DVector::zeros(m);
    // min ‖s‖ s.t. Gx + s = h, Ax = b
    let Some((x0, _, _, s0)) = init.solve(&DVector::zeros(n), &prob.b, &prob.h, &zero_m) else {
        return fail(SolveStatus::MaxIter, 0);
    };
    // min ‖z‖ s.t. G^T z + A^T y + c = 0
    let Some((_, y0, z0, _)) = init.solve(&(-&prob.c), &DVector::zeros(p), &zero_m, &zero_m) else {
        return fail(SolveStatus::MaxIter, 0);
    };
    let (mut x, mut y) = (x0, y0);
    let mut s = s0;
    let mut z = z0;
    push_into_cone(&blocks, &mut s);
    push_into_cone(&blocks, &mut z);
    let e = ones_s;

    let mut best_merit = f64::INFINITY;
    let mut since_best = 0;
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIter;
    let mut res = residuals(prob, &x, &y, &z, &s);
    loop {
        if res.pres <= opts.tol && res.dres <= opts.tol && res.gap <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        let merit = res.pres.max(res.dres).max(res.gap);
        if merit < 0.9 * best_merit {
            best_merit = merit;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if farkas_residual(prob, &y, &z).is_some_and(|r| r <= INFEASIBILITY_TOL) {
            status = SolveStatus::Infeasible;
            break;
        }
        if since_best >= opts.stall_iters || iterations >= opts.max_iter {
            break;
        }
        let Some(newton) = Newton::new(prob, &blocks, &s, &z) else {
            break;
        };
        let mu = s.dot(&z) / degree.max(1) as f64;
        let lambda = newton.lambda.clone();
        let mut ll = DVector::zeros(m);
        for &(c, off) in &blocks.cones {
            let d = c.dim();
            jordan(c, lambda.rows(off, d), lambda.rows(off, d), ll.rows_mut(off, d));
        }
        // Predictor.
        let bx = -&res.rx;
        let by = -&res.ry;
        let bz = -&res.rz;
        let Some((_, _, dz_a, ds_a)) = newton.solve(&bx, &by, &bz, &(-&ll)) else {
            break;
        };
        let alpha_a = step_length(&blocks, &s, &ds_a, &z, &dz_a).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3);
        // Corrector with second-order term.
        let (sa, za) = newton.scaled(&ds_a, &dz_a);
        let mut cross = DVector::zeros(m);
        for &(c, off) in &blocks.cones {
            let d = c.dim();
            jordan(c, sa.rows(off, d), za.rows(off, d), cross.rows_mut(off, d));
        }
        let bs = -&ll - cross + &e * (sigma * mu);
        let Some((dx, dy, dz, ds)) = newton.solve(&bx, &by, &bz, &bs) else {
            break;
        };
        let alpha = (opts.step_fraction * step_length(&blocks, &s, &ds, &z, &dz)).min(1.0);
        x += &dx * alpha;
        y += &dy * alpha;
        z += &dz * alpha;
        s += &ds * alpha;
        iterations += 1;
        res = residuals(prob, &x, &y, &z, &s);
    }

    let certificate_residual = farkas_residual(prob, &y, &z);
    if status != SolveStatus::Optimal && certificate_residual.is_some_and(|r| r <= INFEASIBILITY_TOL) {
        status = SolveStatus::Infeasible;
    }
    SocpSolution {
        status,
        primal_cost: res.pcost,
        dual_cost: res.dcost,
        primal_residual: res.pres,
        dual_residual: res.dres,
        gap: res.gap,
        x,
        y,
        z,
        s,
        iterations,
        certificate_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::super::ProblemBuilder;
    use super::*;

    #[test]
    fn distance_to_point() {
        // min t s.t. ‖v − v0‖ ≤ t
        let v0 = [1.5, -2.0];
        let mut b = ProblemBuilder::new(3);
        b.set_cost(0, 1.0);
        b.cone(
            Cone::Soc(3),
            vec![
                (vec![(0, -1.0)], 0.0),
                (vec![(1, -1.0)], -v0[0]),
                (vec![(2, -1.0)], -v0[1]),
            ],
        );
        let sol = solve(&b.build().unwrap(), &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.x[0].abs() < 1e-6, "{}", sol.x[0]);
        assert!((sol.x[1] - v0[0]).abs() < 1e-4 && (sol.x[2] - v0[1]).abs() < 1e-4);
    }

    #[test]
    fn small_lp() {
        // min −x − y s.t. x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0 → (1.6, 1.2)
        let mut b = ProblemBuilder::new(2);
        b.set_cost(0, -1.0);
        b.set_cost(1, -1.0);
        b.cone(
            Cone::NonNeg(4),
            vec![
                (vec![(0, 1.0), (1, 2.0)], 4.0),
                (vec![(0, 3.0), (1, 1.0)], 6.0),
                (vec![(0, -1.0)], 0.0),
                (vec![(1, -1.0)], 0.0),
            ],
        );
        let sol = solve(&b.build().unwrap(), &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.6).abs() < 1e-7 && (sol.x[1] - 1.2).abs() < 1e-7);
    }

    #[test]
    fn equality_constrained() {
        // min t s.t. ‖(x, y)‖ ≤ t, x + y = 2 → x = y = 1, t = √2
        let mut b = ProblemBuilder::new(3);
        b.set_cost(0, 1.0);
        b.equality(vec![(1, 1.0), (2, 1.0)], 2.0);
        b.cone(
            Cone::Soc(3),
            vec![(vec![(0, -1.0)], 0.0), (vec![(1, -1.0)], 0.0), (vec![(2, -1.0)], 0.0)],
        );
        let sol = solve(&b.build().unwrap(), &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 2f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn detects_infeasibility() {
        // x ≥ 1 and x ≤ 0
        let mut b = ProblemBuilder::new(1);
        b.set_cost(0, 1.0);
        b.cone(Cone::NonNeg(2), vec![(vec![(0, -1.0)], -1.0), (vec![(0, 1.0)], 0.0)]);
        let sol = solve(&b.build().unwrap(), &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible, "{sol:?}");
        assert!(sol.certificate_residual.unwrap() < 1e-6);
    }

    #[test]
    fn infeasible_cone_intersection() {
        // ‖(x, 1)‖ ≤ 0.5 has no solution.
        let mut b = ProblemBuilder::new(1);
        b.set_cost(0, 1.0);
        b.cone(Cone::Soc(3), vec![(vec![], 0.5), (vec![(0, -1.0)], 0.0), (vec![], 1.0)]);
        let sol = solve(&b.build().unwrap(), &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible, "{sol:?}");
    }
}
