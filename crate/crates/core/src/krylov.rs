//! Krylov solvers on [`Field`]s: restarted GMRES, BiCGSTAB, preconditioned CG, a Lanczos
//! approximation of `exp(-itH)v`, and Lanczos/Arnoldi eigenvalue estimates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::lattice::Field;

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual `‖b - Ax‖/‖b‖`, recomputed from the returned iterate.
    pub residual: f64,
    pub extrapolation_steps: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 600,
            restart: 60,
        }
    }
}

impl KrylovOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

const ONE: C64 = C64::new(1.0, 0.0);

fn relative_residual(a: &dyn Fn(&Field) -> Field, x: &Field, b: &Field, bn: f64) -> (Field, f64) {
    let r = b - &a(x);
    let n = r.norm() / bn;
    (r, n)
}

/// Right-preconditioned restarted GMRES for `A x = b`; `m` approximates `A⁻¹`.
pub fn gmres(
    a: &dyn Fn(&Field) -> Field,
    m: &dyn Fn(&Field) -> Field,
    b: &Field,
    x0: Option<Field>,
    opts: KrylovOptions,
) -> (Field, SolveReport) {
    let grid = *b.grid();
    let bn = b.norm();
    if bn == 0.0 {
        return (
            Field::zeros(grid),
            SolveReport {
                converged: true,
                ..Default::default()
            },
        );
    }
    let mut x = x0.unwrap_or_else(|| Field::zeros(grid));
    let mut total = 0;
    let (mut r, mut rel) = relative_residual(a, &x, b, bn);
    while rel > opts.tol && total < opts.max_iter {
        let beta = r.norm();
        let mut v: Vec<Field> = vec![r.scaled(C64::new(1.0 / beta, 0.0))];
        let mut z: Vec<Field> = Vec::new();
        let mut hcols: Vec<Vec<C64>> = Vec::new();
        let mut cs: Vec<C64> = Vec::new();
        let mut sn: Vec<C64> = Vec::new();
        let mut g = vec![C64::new(beta, 0.0)];
        let mut k = 0;
        while k < opts.restart && total < opts.max_iter {
            let zk = m(&v[k]);
            let mut w = a(&zk);
            z.push(zk);
            let mut h = vec![C64::default(); k + 2];
            for _pass in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = vi.inner(&w);
                    h[i] += c;
                    w.axpy(-c, vi);
                }
            }
            let hn = w.norm();
            h[k + 1] = C64::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * h[i] + sn[i].conj() * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let (c, s) = givens(h[k], h[k + 1]);
            h[k] = c.conj() * h[k] + s.conj() * h[k + 1];
            h[k + 1] = C64::default();
            cs.push(c);
            sn.push(s);
            let gk = g[k];
            g.push(-s * gk);
            g[k] = c.conj() * gk;
            hcols.push(h);
            k += 1;
            total += 1;
            if g[k].norm() / bn <= 0.5 * opts.tol || hn == 0.0 {
                break;
            }
            v.push(w.scaled(C64::new(1.0 / hn, 0.0)));
        }
        let mut y = vec![C64::default(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hcols[j][i] * y[j];
            }
            y[i] = s / hcols[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.axpy(*yi, zi);
        }
        let next = relative_residual(a, &x, b, bn);
        r = next.0;
        rel = next.1;
    }
    (
        x,
        SolveReport {
            iterations: total,
            residual: rel,
            extrapolation_steps: 0,
            converged: rel <= opts.tol,
        },
    )
}

/// Complex Givens rotation zeroing `b` against `a`.
fn givens(a: C64, b: C64) -> (C64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (ONE, C64::default());
    }
    if an == 0.0 {
        return (C64::default(), ONE);
    }
    let r = (an * an + bn * bn).sqrt();
    let c = a / r;
    let s = b / r;
    (c, s)
}

/// Right-preconditioned BiCGSTAB.
pub fn bicgstab(
    a: &dyn Fn(&Field) -> Field,
    m: &dyn Fn(&Field) -> Field,
    b: &Field,
    x0: Option<Field>,
    opts: KrylovOptions,
) -> (Field, SolveReport) {
    let grid = *b.grid();
    let bn = b.norm();
    if bn == 0.0 {
        return (
            Field::zeros(grid),
            SolveReport {
                converged: true,
                ..Default::default()
            },
        );
    }
    let mut x = x0.unwrap_or_else(|| Field::zeros(grid));
    let (mut r, mut rel) = relative_residual(a, &x, b, bn);
    let mut iters = 0;
    let mut best = (x.clone(), rel);
    'outer: while rel > opts.tol && iters < opts.max_iter {
        let r_hat = r.clone();
        let mut rho = ONE;
        let mut alpha = ONE;
        let mut omega = ONE;
        let mut v = Field::zeros(grid);
        let mut p = Field::zeros(grid);
        while iters < opts.max_iter {
            iters += 1;
            let rho_new = r_hat.inner(&r);
            if rho_new.norm() < 1e-300 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            // p = r + β(p - ωv)
            let mut np = r.clone();
            let mut t = p.clone();
            t.axpy(-omega, &v);
            np.axpy(beta, &t);
            p = np;
            let y = m(&p);
            v = a(&y);
            let denom = r_hat.inner(&v);
            if denom.norm() < 1e-300 {
                break;
            }
            alpha = rho / denom;
            x.axpy(alpha, &y);
            let mut s = r.clone();
            s.axpy(-alpha, &v);
            if s.norm() / bn <= 0.5 * opts.tol {
                let next = relative_residual(a, &x, b, bn);
                r = next.0;
                rel = next.1;
                if rel < best.1 {
                    best = (x.clone(), rel);
                }
                if rel <= opts.tol {
                    break 'outer;
                }
                continue 'outer;
            }
            let zs = m(&s);
            let t = a(&zs);
            let tt = t.inner(&t);
            if tt.norm() == 0.0 {
                break;
            }
            omega = t.inner(&s) / tt;
            x.axpy(omega, &zs);
            r = s;
            r.axpy(-omega, &t);
            rel = r.norm() / bn;
            if rel <= 0.5 * opts.tol {
                break;
            }
        }
        let next = relative_residual(a, &x, b, bn);
        r = next.0;
        rel = next.1;
        if rel < best.1 {
            best = (x.clone(), rel);
        }
        if rel > 0.99 * best.1 && rel > opts.tol && iters >= opts.max_iter / 2 {
            break;
        }
    }
    if rel > best.1 {
        x = best.0;
        rel = best.1;
    }
    (
        x,
        SolveReport {
            iterations: iters,
            residual: rel,
            extrapolation_steps: 0,
            converged: rel <= opts.tol,
        },
    )
}

/// Preconditioned conjugate gradients for Hermitian positive definite `A`.
pub fn pcg(
    a: &dyn Fn(&Field) -> Field,
    m: &dyn Fn(&Field) -> Field,
    b: &Field,
    x0: Option<Field>,
    opts: KrylovOptions,
) -> (Field, SolveReport) {
    let grid = *b.grid();
    let bn = b.norm();
    if bn == 0.0 {
        return (
            Field::zeros(grid),
            SolveReport {
                converged: true,
                ..Default::default()
            },
        );
    }
    let mut x = x0.unwrap_or_else(|| Field::zeros(grid));
    let (mut r, mut rel) = relative_residual(a, &x, b, bn);
    let mut z = m(&r);
    let mut p = z.clone();
    let mut rz = r.inner(&z);
    let mut iters = 0;
    while rel > opts.tol && iters < opts.max_iter {
        iters += 1;
        let ap = a(&p);
        let alpha = rz / p.inner(&ap);
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        rel = r.norm() / bn;
        if rel <= opts.tol {
            break;
        }
        z = m(&r);
        let rz_new = r.inner(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        let mut np = z.clone();
        np.axpy(beta, &p);
        p = np;
    }
    let (_, rel) = relative_residual(a, &x, b, bn);
    (
        x,
        SolveReport {
            iterations: iters,
            residual: rel,
            extrapolation_steps: 0,
            converged: rel <= opts.tol,
        },
    )
}

/// `exp(-i t H) v` for Hermitian `H` by short-iterative Lanczos with adaptive substeps.
///
/// Each substep builds a Krylov basis of dimension at most `dim`, exponentiates the tridiagonal
/// projection exactly and accepts the step when the standard a-posteriori estimate
/// `β_m |e_mᵀ exp(-iτT) e_1|` is below `tol·τ/|t|`.
pub fn lanczos_expm(
    h: &dyn Fn(&Field) -> Field,
    v: &Field,
    t: f64,
    dim: usize,
    tol: f64,
) -> Result<Field, String> {
    let vn = v.norm();
    if vn == 0.0 || t == 0.0 {
        return Ok(v.clone());
    }
    let mut out = v.clone();
    let mut done = 0.0;
    let total = t.abs();
    let sign = t.signum();
    let mut tau = total;
    while done < total {
        let (basis, alpha, beta) = lanczos_basis(h, &out, dim);
        let m = alpha.len();
        let tri = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tri);
        let norm_out = out.norm();
        let coeffs = |s: f64| -> DVector<C64> {
            DVector::from_fn(m, |i, _| {
                (0..m)
                    .map(|k| {
                        let q = eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)];
                        C64::from_polar(q, -s * sign * eig.eigenvalues[k])
                    })
                    .sum()
            })
        };
        // the basis is exhausted when beta_m vanishes; then every step is exact
        let exhausted = m < dim || beta.len() < m;
        let err_of = |c: &DVector<C64>| {
            if exhausted {
                0.0
            } else {
                beta[m - 1].abs() * c[m - 1].norm()
            }
        };
        let mut step = tau.min(total - done);
        let mut c = coeffs(step);
        // shrink until the error estimate fits the budget, then grow while it still fits
        while err_of(&c) > tol * step / total {
            step *= 0.5;
            if step < total * 1e-12 {
                return Err(format!("Lanczos step size underflow at t = {done}"));
            }
            c = coeffs(step);
        }
        while step < total - done {
            let longer = (2.0 * step).min(total - done);
            let cl = coeffs(longer);
            if err_of(&cl) > tol * longer / total {
                break;
            }
            step = longer;
            c = cl;
        }
        let mut next = Field::zeros(*out.grid());
        for (ci, qi) in c.iter().zip(&basis) {
            next.axpy(*ci * norm_out, qi);
        }
        out = next;
        done += step;
        tau = step;
    }
    Ok(out)
}

/// Smallest eigenpair of a Hermitian operator by Lanczos with full reorthogonalisation.
/// Stops when the Ritz residual `β_m |e_mᵀ y|` falls below `tol·max(1, |θ|)`; returns
/// `(θ, x, residual)`.
pub fn lanczos_smallest(
    a: &dyn Fn(&Field) -> Field,
    v0: &Field,
    max_dim: usize,
    tol: f64,
) -> (f64, Field, f64) {
    let mut q = vec![v0.scaled(C64::new(1.0 / v0.norm(), 0.0))];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best = (f64::INFINITY, DVector::<f64>::zeros(1), f64::INFINITY);
    for j in 0..max_dim {
        let mut w = a(&q[j]);
        alpha.push(q[j].inner(&w).re);
        for _ in 0..2 {
            for qi in &q {
                let c = qi.inner(&w);
                w.axpy(-c, qi);
            }
        }
        let b = w.norm();
        let m = alpha.len();
        let tri = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tri);
        let k = (0..m)
            .min_by(|x, y| eig.eigenvalues[*x].total_cmp(&eig.eigenvalues[*y]))
            .unwrap_or(0);
        let theta = eig.eigenvalues[k];
        let y = eig.eigenvectors.column(k).into_owned();
        let res = b * y[m - 1].abs();
        best = (theta, y, res);
        if res <= tol * theta.abs().max(1.0) || b <= 1e-14 * theta.abs().max(1.0) {
            break;
        }
        beta.push(b);
        q.push(w.scaled(C64::new(1.0 / b, 0.0)));
    }
    let (theta, y, res) = best;
    let mut x = Field::zeros(*v0.grid());
    for (yi, qi) in y.iter().zip(&q) {
        x.axpy(C64::new(*yi, 0.0), qi);
    }
    (theta, x, res)
}

/// Ritz values of a general operator from `dim` Arnoldi steps.
pub fn arnoldi_ritz(a: &dyn Fn(&Field) -> Field, v0: &Field, dim: usize) -> Vec<C64> {
    let mut v = vec![v0.scaled(C64::new(1.0 / v0.norm(), 0.0))];
    let mut hess = DMatrix::<C64>::zeros(dim + 1, dim);
    let mut m = dim;
    for j in 0..dim {
        let mut w = a(&v[j]);
        for _ in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = vi.inner(&w);
                hess[(i, j)] += c;
                w.axpy(-c, vi);
            }
        }
        let b = w.norm();
        hess[(j + 1, j)] = C64::new(b, 0.0);
        if b <= 1e-14 * hess[(j, j)].norm().max(1.0) {
            m = j + 1;
            break;
        }
        v.push(w.scaled(C64::new(1.0 / b, 0.0)));
    }
    let square = hess.view((0, 0), (m, m)).into_owned();
    square
        .schur()
        .eigenvalues()
        .map(|e| e.iter().copied().collect())
        .unwrap_or_default()
}

/// Orthonormal Lanczos basis (with full reorthogonalisation) and the tridiagonal coefficients.
/// `beta[i]` couples `q_i` and `q_{i+1}`; its last entry is the residual coupling.
fn lanczos_basis(
    h: &dyn Fn(&Field) -> Field,
    v: &Field,
    dim: usize,
) -> (Vec<Field>, Vec<f64>, Vec<f64>) {
    let mut q = vec![v.scaled(C64::new(1.0 / v.norm(), 0.0))];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let scale = 1e-13;
    for j in 0..dim {
        let mut w = h(&q[j]);
        let a = q[j].inner(&w).re;
        alpha.push(a);
        for _ in 0..2 {
            for qi in &q {
                let c = qi.inner(&w);
                w.axpy(-c, qi);
            }
        }
        let b = w.norm();
        beta.push(b);
        if b <= scale * a.abs().max(1.0) {
            beta.pop();
            break;
        }
        if j + 1 < dim {
            q.push(w.scaled(C64::new(1.0 / b, 0.0)));
        }
    }
    (q, alpha, beta)
}
