//! Second-order cone form of a [`QcqpProblem`].
//!
//! Variables are `z = [x_0, .., x_{S-1}, a]` where `x_s = [Re q_s; Im q_s]`
//! and `q_s = p_s / sigma` with `sigma = sqrt(P_t)`, so the power ball is the
//! unit ball whatever the SNR. Constraints use the `s = b - A z` convention.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{Expr, QcqpProblem};
use crate::linalg::{psd_factor, real_embedding, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    SecondOrder,
    Nonnegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub dim: usize,
}

/// `min 1/2 z'Pz + q'z + c0  s.t.  b - A z in K`.
#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub num_vars: usize,
    /// Upper-triangular entries of `P`.
    pub p: Vec<(usize, usize, f64)>,
    pub q: Vec<f64>,
    pub constant: f64,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<ConeBlock>,
    pub scale: f64,
    pub alloc_offset: usize,
}

/// Real-embedded, scaled pieces of an [`Expr`].
struct RealExpr {
    /// `x' M x` blocks per stream, already summed.
    quad: BTreeMap<usize, DMatrix<f64>>,
    /// Dense linear coefficients over `z`.
    lin: Vec<f64>,
    constant: f64,
}

fn embed(expr: &Expr, problem: &QcqpProblem, scale: f64, n: usize) -> RealExpr {
    let nt = problem.nt;
    let mut sums: BTreeMap<usize, CMatrix> = BTreeMap::new();
    for (s, m) in &expr.quad {
        *sums.entry(*s).or_insert_with(|| CMatrix::zeros(nt, nt)) += m;
    }
    let quad = sums
        .into_iter()
        .map(|(s, m)| (s, real_embedding(&m) * (scale * scale)))
        .collect();
    let mut lin = vec![0.0; n];
    for (s, l) in &expr.lin {
        let off = 2 * nt * s;
        for i in 0..nt {
            lin[off + i] += scale * l[i].re;
            lin[off + nt + i] += scale * l[i].im;
        }
    }
    let off = 2 * nt * problem.num_streams;
    for (a, c) in &expr.alloc {
        lin[off + a] += c;
    }
    RealExpr {
        quad,
        lin,
        constant: expr.constant,
    }
}

pub fn reformulate_to_cones(problem: &QcqpProblem) -> ConeProgram {
    let nt = problem.nt;
    let nx = 2 * nt * problem.num_streams;
    let n = nx + problem.num_allocs;
    let scale = if problem.power > 0.0 { problem.power.sqrt() } else { 1.0 };

    let obj = embed(&problem.objective, problem, scale, n);
    let mut p = Vec::new();
    for (s, m) in &obj.quad {
        let off = 2 * nt * s;
        for j in 0..2 * nt {
            for i in 0..=j {
                let v = 2.0 * m[(i, j)];
                if v != 0.0 {
                    p.push((off + i, off + j, v));
                }
            }
        }
    }

    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let push_row = |a: &mut Vec<(usize, usize, f64)>, b: &mut Vec<f64>, coefs: &[(usize, f64)], rhs: f64| {
        let r = b.len();
        a.extend(coefs.iter().filter(|(_, v)| *v != 0.0).map(|&(j, v)| (r, j, v)));
        b.push(rhs);
    };

    for c in &problem.constraints {
        let e = embed(&c.expr, problem, scale, n);
        let d = c.rhs - e.constant;
        let lin: Vec<(usize, f64)> = e.lin.iter().copied().enumerate().collect();
        let factors: Vec<(usize, DMatrix<f64>)> = e
            .quad
            .iter()
            .map(|(s, m)| (*s, psd_factor(m)))
            .filter(|(_, l)| l.nrows() > 0)
            .collect();
        if factors.is_empty() {
            push_row(&mut a, &mut b, &lin, d);
            cones.push(ConeBlock {
                kind: ConeKind::Nonnegative,
                dim: 1,
            });
            continue;
        }
        // ||L z||^2 <= d - c'z as a standard cone of dimension rows + 2
        let half: Vec<(usize, f64)> = lin.iter().map(|&(j, v)| (j, 0.5 * v)).collect();
        push_row(&mut a, &mut b, &half, 0.5 * (d + 1.0));
        push_row(&mut a, &mut b, &half, 0.5 * (d - 1.0));
        let mut rows = 0;
        for (s, l) in &factors {
            let off = 2 * nt * s;
            for r in 0..l.nrows() {
                let coefs: Vec<(usize, f64)> = (0..l.ncols()).map(|j| (off + j, -l[(r, j)])).collect();
                push_row(&mut a, &mut b, &coefs, 0.0);
                rows += 1;
            }
        }
        cones.push(ConeBlock {
            kind: ConeKind::SecondOrder,
            dim: rows + 2,
        });
    }

    // power ball ||x|| <= sqrt(P_t) / scale
    push_row(&mut a, &mut b, &[], problem.power.max(0.0).sqrt() / scale);
    for j in 0..nx {
        push_row(&mut a, &mut b, &[(j, -1.0)], 0.0);
    }
    cones.push(ConeBlock {
        kind: ConeKind::SecondOrder,
        dim: nx + 1,
    });

    if problem.num_allocs > 0 {
        for (i, &ub) in problem.alloc_upper.iter().enumerate() {
            push_row(&mut a, &mut b, &[(nx + i, 1.0)], ub);
        }
        cones.push(ConeBlock {
            kind: ConeKind::Nonnegative,
            dim: problem.num_allocs,
        });
    }

    ConeProgram {
        num_vars: n,
        p,
        q: obj.lin,
        constant: obj.constant,
        a,
        b,
        cones,
        scale,
        alloc_offset: nx,
    }
}
