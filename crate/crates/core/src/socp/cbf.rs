//! Export to the Conic Benchmark Format (CBF, version 3) so a problem can be
//! cross-checked with external solvers.
//!
//! Equalities become an `L=` block with rows `A x − b`; the cone rows become
//! `h − G x` in `L+` and `Q` blocks, in problem order.

use std::fmt::Write as _;
use std::path::Path;

use super::{Cone, ConicProblem};
use crate::error::{Error, Result};

pub fn to_cbf_string(p: &ConicProblem) -> String {
    let n = p.n_vars();
    let eq = p.a.nrows();
    let m = p.cone_rows();
    let mut out = String::new();
    out.push_str("# irsplan conic subproblem\nVER\n3\n\nOBJSENSE\nMIN\n\n");
    let _ = writeln!(out, "VAR\n{n} 1\nF {n}\n");
    let mut blocks: Vec<(&str, usize)> = Vec::new();
    if eq > 0 {
        blocks.push(("L=", eq));
    }
    for c in &p.cones {
        match *c {
            Cone::NonNeg(d) => blocks.push(("L+", d)),
            Cone::Soc(d) => blocks.push(("Q", d)),
        }
    }
    let _ = writeln!(out, "CON\n{} {}", eq + m, blocks.len());
    for (name, d) in &blocks {
        let _ = writeln!(out, "{name} {d}");
    }
    out.push('\n');

    let obj: Vec<(usize, f64)> =
        p.c.iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
    let _ = writeln!(out, "OBJACOORD\n{}", obj.len());
    for (j, v) in obj {
        let _ = writeln!(out, "{j} {v:e}");
    }
    out.push('\n');

    let mut acoord = Vec::new();
    let mut bcoord = Vec::new();
    for i in 0..eq {
        for j in 0..n {
            if p.a[(i, j)] != 0.0 {
                acoord.push((i, j, p.a[(i, j)]));
            }
        }
        if p.b[i] != 0.0 {
            bcoord.push((i, -p.b[i]));
        }
    }
    for i in 0..m {
        for j in 0..n {
            if p.g[(i, j)] != 0.0 {
                acoord.push((eq + i, j, -p.g[(i, j)]));
            }
        }
        if p.h[i] != 0.0 {
            bcoord.push((eq + i, p.h[i]));
        }
    }
    let _ = writeln!(out, "ACOORD\n{}", acoord.len());
    for (i, j, v) in acoord {
        let _ = writeln!(out, "{i} {j} {v:e}");
    }
    out.push('\n');
    let _ = writeln!(out, "BCOORD\n{}", bcoord.len());
    for (i, v) in bcoord {
        let _ = writeln!(out, "{i} {v:e}");
    }
    out
}

pub fn write_cbf(p: &ConicProblem, path: &Path) -> Result<()> {
    std::fs::write(path, to_cbf_string(p)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::super::ProblemBuilder;
    use super::*;

    #[test]
    fn small_problem_layout() {
        let mut b = ProblemBuilder::new(2);
        b.set_cost(0, 1.0);
        b.equality(vec![(1, 1.0)], 2.0);
        b.cone(Cone::Soc(2), vec![(vec![(0, -1.0)], 0.0), (vec![(1, -1.0)], 3.0)]);
        let text = to_cbf_string(&b.build().unwrap());
        assert!(text.contains("CON\n3 2\nL= 1\nQ 2\n"), "{text}");
        assert!(text.contains("ACOORD\n3\n0 1 1e0\n1 0 1e0\n2 1 1e0\n"), "{text}");
        assert!(text.contains("BCOORD\n2\n0 -2e0\n2 3e0"), "{text}");
    }
}
