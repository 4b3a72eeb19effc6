//! Second-order cone programming.
//!
//! Problems have the standard form
//!
//! ```text
//! minimize    c^T x
//! subject to  A x = b
//!             G x + s = h,  s ∈ K
//! ```
//!
//! where `K` is a product of nonnegative orthants and second-order cones
//! `{(t, v) : ‖v‖ ≤ t}`. [`solve`] is an infeasible-start primal-dual
//! interior-point method with Nesterov–Todd scaling and Mehrotra
//! predictor-corrector steps.

mod cbf;
mod cone;
mod p4;
mod solver;

pub use cbf::{to_cbf_string, write_cbf};
pub use cone::Cone;
pub use p4::{assemble_p4, ObstacleCut, P4Layout, SubproblemSolution, P4};
pub use solver::{solve, SocpSolution, SolveStatus, SolverOptions};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProblem {
    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn cone_rows(&self) -> usize {
        self.cones.iter().map(|c| c.dim()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        let m = self.cone_rows();
        let bad = |msg: String| Err(Error::Assembly(msg));
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return bad(format!(
                "equality block is {}x{} with {} right-hand sides for {n} variables",
                self.a.nrows(),
                self.a.ncols(),
                self.b.len()
            ));
        }
        if self.g.ncols() != n || self.g.nrows() != m || self.h.len() != m {
            return bad(format!(
                "cone block is {}x{} with {} right-hand sides; cones need {m} rows",
                self.g.nrows(),
                self.g.ncols(),
                self.h.len()
            ));
        }
        if self.cones.iter().any(|c| c.dim() == 0) {
            return bad("empty cone".into());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(self.c.as_slice())
            || !finite(self.a.as_slice())
            || !finite(self.b.as_slice())
            || !finite(self.g.as_slice())
            || !finite(self.h.as_slice())
        {
            return bad("non-finite problem data".into());
        }
        Ok(())
    }
}

/// Incremental builder that appends cone blocks row by row.
#[derive(Clone, Debug)]
pub struct ProblemBuilder {
    n: usize,
    c: Vec<f64>,
    eq_rows: Vec<(Vec<(usize, f64)>, f64)>,
    cone_rows: Vec<(Vec<(usize, f64)>, f64)>,
    cones: Vec<Cone>,
}

impl ProblemBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            c: vec![0.0; n],
            eq_rows: Vec::new(),
            cone_rows: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn set_cost(&mut self, j: usize, v: f64) {
        self.c[j] = v;
    }

    /// `Σ coef·x = rhs`
    pub fn equality(&mut self, coefs: Vec<(usize, f64)>, rhs: f64) {
        self.eq_rows.push((coefs, rhs));
    }

    /// Adds a cone whose member is `h - G x`, one `(G row, h entry)` per row.
    pub fn cone(&mut self, cone: Cone, rows: Vec<(Vec<(usize, f64)>, f64)>) {
        debug_assert_eq!(cone.dim(), rows.len());
        self.cones.push(cone);
        self.cone_rows.extend(rows);
    }

    pub fn build(self) -> Result<ConicProblem> {
        let n = self.n;
        let fill = |rows: &[(Vec<(usize, f64)>, f64)]| -> Result<(DMatrix<f64>, DVector<f64>)> {
            let mut m = DMatrix::zeros(rows.len(), n);
            let mut v = DVector::zeros(rows.len());
            for (i, (coefs, rhs)) in rows.iter().enumerate() {
                for &(j, c) in coefs {
                    if j >= n {
                        return Err(Error::Assembly(format!("column {j} out of range ({n} variables)")));
                    }
                    m[(i, j)] += c;
                }
                v[i] = *rhs;
            }
            Ok((m, v))
        };
        let (a, b) = fill(&self.eq_rows)?;
        let (g, h) = fill(&self.cone_rows)?;
        let p = ConicProblem {
            c: DVector::from_vec(self.c),
            a,
            b,
            g,
            h,
            cones: self.cones,
        };
        p.validate()?;
        Ok(p)
    }
}
