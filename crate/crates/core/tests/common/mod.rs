//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsma_opt::linalg::{CMatrix, CVector, C64};
use rsma_opt::qcqp::{Constraint, Expr, QcqpProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(r: &mut ChaCha8Rng) -> C64 {
    // Box-Muller, unit variance per complex entry
    let u1: f64 = r.gen_range(1e-12..1.0);
    let u2: f64 = r.gen();
    let m = (-u1.ln()).sqrt();
    C64::new(m * (std::f64::consts::TAU * u2).cos(), m * (std::f64::consts::TAU * u2).sin())
}

pub fn random_vector(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CVector {
    CVector::from_fn(n, |_, _| cgauss(r) * scale)
}

/// `B B^H + shift I` with `B` of size `n x n`.
pub fn random_psd(r: &mut ChaCha8Rng, n: usize, scale: f64, shift: f64) -> CMatrix {
    let b = CMatrix::from_fn(n, n, |_, _| cgauss(r) * scale);
    &b * b.adjoint() + CMatrix::identity(n, n) * C64::new(shift, 0.0)
}

/// Small convex instance with a strictly feasible origin. Every allocation
/// variable has a positive objective weight and is bounded below by at least
/// one constraint.
pub fn random_problem(seed: u64) -> QcqpProblem {
    let mut r = rng(seed);
    let nt = r.gen_range(1..=3);
    let streams = r.gen_range(1..=3);
    let allocs = r.gen_range(0..=2);
    let power = r.gen_range(0.5..10.0);
    let mut p = QcqpProblem::new(streams, nt, allocs, power);
    let mut obj = Expr::default();
    for s in 0..streams {
        obj.quad.push((s, random_psd(&mut r, nt, 0.7, 0.05)));
        obj.lin.push((s, random_vector(&mut r, nt, 1.5)));
    }
    for a in 0..allocs {
        obj.alloc.push((a, r.gen_range(0.5..2.0)));
    }
    obj.constant = r.gen_range(-1.0..1.0);
    p.objective = obj;
    let extra = r.gen_range(0..=2);
    for c in 0..(allocs + extra) {
        let mut e = Expr::default();
        for s in 0..streams {
            if r.gen_bool(0.7) {
                e.quad.push((s, random_psd(&mut r, nt, 0.6, 0.0)));
            }
            if r.gen_bool(0.5) {
                e.lin.push((s, random_vector(&mut r, nt, 0.8)));
            }
        }
        if c < allocs {
            e.alloc.push((c, -1.0));
        } else if allocs > 0 && r.gen_bool(0.5) {
            e.alloc.push((r.gen_range(0..allocs), -1.0));
        }
        p.constraints.push(Constraint {
            expr: e,
            rhs: r.gen_range(0.3..3.0),
            label: format!("c{c}"),
        });
    }
    p
}

/// Gradient of an expression: complex `2 A p + l` per stream and the
/// allocation coefficients.
fn grad(e: &Expr, p: &[CVector], gp: &mut [CVector], gx: &mut [f64], scale: f64) {
    let f = C64::new(scale, 0.0);
    for (s, m) in &e.quad {
        gp[*s] += (m * &p[*s]) * (f * 2.0);
    }
    for (s, l) in &e.lin {
        gp[*s] += l * f;
    }
    for (i, c) in &e.alloc {
        gx[*i] += c * scale;
    }
}

fn project(prob: &QcqpProblem, p: &mut [CVector], x: &mut [f64]) {
    let pw: f64 = p.iter().map(|v| v.norm_squared()).sum();
    if pw > prob.power {
        let f = C64::new((prob.power / pw).sqrt(), 0.0);
        p.iter_mut().for_each(|v| *v *= f);
    }
    for (xi, u) in x.iter_mut().zip(&prob.alloc_upper) {
        *xi = xi.min(*u);
    }
}

fn aug_value(prob: &QcqpProblem, p: &[CVector], x: &[f64], lam: &[f64], rho: f64) -> f64 {
    let mut v = prob.objective.eval(p, x);
    for (c, l) in prob.constraints.iter().zip(lam) {
        let g = (c.expr.eval(p, x) - c.rhs + l / rho).max(0.0);
        v += 0.5 * rho * g * g;
    }
    v
}

fn aug_grad(prob: &QcqpProblem, p: &[CVector], x: &[f64], lam: &[f64], rho: f64) -> (Vec<CVector>, Vec<f64>) {
    let mut gp: Vec<CVector> = p.iter().map(|v| CVector::zeros(v.len())).collect();
    let mut gx = vec![0.0; x.len()];
    grad(&prob.objective, p, &mut gp, &mut gx, 1.0);
    for (c, l) in prob.constraints.iter().zip(lam) {
        let g = (c.expr.eval(p, x) - c.rhs + l / rho).max(0.0);
        if g > 0.0 {
            grad(&c.expr, p, &mut gp, &mut gx, rho * g);
        }
    }
    (gp, gx)
}

fn inner_product(ap: &[CVector], ax: &[f64], bp: &[CVector], bx: &[f64]) -> f64 {
    let a: f64 = ap.iter().zip(bp).map(|(u, v)| u.iter().zip(v.iter()).map(|(s, t)| (s.conj() * t).re).sum::<f64>()).sum();
    a + ax.iter().zip(bx).map(|(s, t)| s * t).sum::<f64>()
}

/// FISTA with backtracking and adaptive restart on the augmented Lagrangian.
fn minimize_inner(prob: &QcqpProblem, p: &mut Vec<CVector>, x: &mut Vec<f64>, lam: &[f64], rho: f64, iters: usize) {
    let mut step: f64 = 1.0;
    let (mut yp, mut yx) = (p.clone(), x.clone());
    let mut t: f64 = 1.0;
    let mut last = aug_value(prob, p, x, lam, rho);
    for _ in 0..iters {
        let fy = aug_value(prob, &yp, &yx, lam, rho);
        let (gp, gx) = aug_grad(prob, &yp, &yx, lam, rho);
        let (np, nx) = loop {
            let mut np: Vec<CVector> = yp.iter().zip(&gp).map(|(v, g)| v - g * C64::new(step, 0.0)).collect();
            let mut nx: Vec<f64> = yx.iter().zip(&gx).map(|(v, g)| v - step * g).collect();
            project(prob, &mut np, &mut nx);
            let dp: Vec<CVector> = np.iter().zip(&yp).map(|(a, b)| a - b).collect();
            let dx: Vec<f64> = nx.iter().zip(&yx).map(|(a, b)| a - b).collect();
            let quad = fy + inner_product(&gp, &gx, &dp, &dx) + inner_product(&dp, &dx, &dp, &dx) / (2.0 * step);
            if aug_value(prob, &np, &nx, lam, rho) <= quad + 1e-15 || step < 1e-14 {
                break (np, nx);
            }
            step *= 0.5;
        };
        let f_new = aug_value(prob, &np, &nx, lam, rho);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        if f_new > last {
            // restart momentum
            t = 1.0;
            yp = p.clone();
            yx = x.clone();
            continue;
        }
        let beta = (t - 1.0) / t_next;
        yp = np.iter().zip(p.iter()).map(|(a, b)| a + (a - b) * C64::new(beta, 0.0)).collect();
        yx = nx.iter().zip(x.iter()).map(|(a, b)| a + beta * (a - b)).collect();
        let moved = inner_product(
            &np.iter().zip(p.iter()).map(|(a, b)| a - b).collect::<Vec<_>>(),
            &nx.iter().zip(x.iter()).map(|(a, b)| a - b).collect::<Vec<_>>(),
            &np.iter().zip(p.iter()).map(|(a, b)| a - b).collect::<Vec<_>>(),
            &nx.iter().zip(x.iter()).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        *p = np;
        *x = nx;
        last = f_new;
        t = t_next;
        step *= 1.5;
        if moved < 1e-26 {
            break;
        }
    }
}

pub struct OracleSolution {
    pub precoders: Vec<CVector>,
    pub allocations: Vec<f64>,
    pub objective: f64,
    pub violation: f64,
}

/// Augmented Lagrangian outer loop around projected-gradient inner solves.
pub fn oracle_solve(prob: &QcqpProblem) -> OracleSolution {
    let mut p: Vec<CVector> = (0..prob.num_streams).map(|_| CVector::zeros(prob.nt)).collect();
    let mut x = vec![0.0; prob.num_allocs];
    let mut lam = vec![0.0; prob.constraints.len()];
    let mut rho = 10.0;
    let mut prev_viol = f64::INFINITY;
    for _ in 0..60 {
        minimize_inner(prob, &mut p, &mut x, &lam, rho, 4000);
        let g: Vec<f64> = prob.constraints.iter().map(|c| c.expr.eval(&p, &x) - c.rhs).collect();
        let viol = g.iter().fold(0.0_f64, |a, v| a.max(*v));
        let slack = g
            .iter()
            .zip(&lam)
            .map(|(gi, li)| (gi.max(-li / rho)).abs())
            .fold(0.0_f64, f64::max);
        for (l, gi) in lam.iter_mut().zip(&g) {
            *l = (*l + rho * gi).max(0.0);
        }
        if slack < 1e-10 {
            break;
        }
        if viol > 0.25 * prev_viol {
            rho = (rho * 5.0).min(1e8);
        }
        prev_viol = viol;
    }
    OracleSolution {
        objective: prob.objective.eval(&p, &x),
        violation: prob.max_violation(&p, &x),
        precoders: p,
        allocations: x,
    }
}
