use alloc::vec::Vec;

use super::{dot, norm2, CsrMatrix, Ilu0};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target `||A x - b|| <= tol ||b||`.
    pub tol: f64,
    /// Defaults to `10 n`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    Jacobi,
    /// Incomplete LU without fill-in.
    #[default]
    Ilu0,
}

enum Applied {
    Jacobi(Vec<f64>),
    Ilu(Ilu0),
}

impl Applied {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Applied::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = di * ri;
                }
            }
            Applied::Ilu(ilu) => ilu.apply(r, z),
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iter: None,
            preconditioner: Preconditioner::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative 2-norm residual of the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` with right-preconditioned BiCGStab, starting from `x0`
/// (zero when absent). Convergence is always confirmed on the true residual
/// `b - A x`; when the recurrence drifts the iteration restarts from the
/// current iterate.
pub fn solve(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::param("solve needs a square matrix"));
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if !b.iter().all(|v| v.is_finite()) {
        return Err(Error::param("right-hand side is not finite"));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x0.len(),
            })
        }
        Some(x0) => x0.to_vec(),
        None => alloc::vec![0.0; n],
    };
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                final_residual: 0.0,
                converged: true,
            },
        ));
    }
    let target = opts.tol * bnorm;

    let jacobi = || {
        Applied::Jacobi(
            a.diagonal()
                .into_iter()
                .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        )
    };
    // A zero pivot in the incomplete factors falls back to Jacobi.
    let precond = match opts.preconditioner {
        Preconditioner::Jacobi => jacobi(),
        Preconditioner::Ilu0 => Ilu0::new(a).map(Applied::Ilu).unwrap_or_else(|_| jacobi()),
    };

    let mut r = alloc::vec![0.0; n];
    let residual = |x: &[f64], r: &mut [f64]| {
        a.spmv_unchecked(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm2(r)
    };
    let mut rnorm = residual(&x, &mut r);
    let mut iterations = 0;
    let report = |iterations, rnorm: f64| SolveReport {
        iterations,
        final_residual: rnorm / bnorm,
        converged: rnorm <= target,
    };
    if rnorm <= target {
        return Ok((x, report(0, rnorm)));
    }

    let mut r_hat = r.clone();
    let mut p = alloc::vec![0.0; n];
    let mut v = alloc::vec![0.0; n];
    let mut p_hat = alloc::vec![0.0; n];
    let mut s = alloc::vec![0.0; n];
    let mut s_hat = alloc::vec![0.0; n];
    let mut t = alloc::vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut restart = false;

    while iterations < max_iter {
        if restart {
            rnorm = residual(&x, &mut r);
            if rnorm <= target {
                return Ok((x, report(iterations, rnorm)));
            }
            r_hat.copy_from_slice(&r);
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            restart = false;
        }
        iterations += 1;

        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            restart = true;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.apply(&p, &mut p_hat);
        a.spmv_unchecked(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 || !denom.is_finite() {
            restart = true;
            continue;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= target {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            restart = true;
            continue;
        }
        precond.apply(&s, &mut s_hat);
        a.spmv_unchecked(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rnorm = norm2(&r);
        if rnorm <= target || omega == 0.0 || !omega.is_finite() {
            restart = true;
        }
    }

    rnorm = residual(&x, &mut r);
    let rep = report(iterations, rnorm);
    if rep.converged {
        Ok((x, rep))
    } else {
        Err(Error::LinearSolver(rep))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;
    use rand::Rng;

    #[test]
    fn identity_solves_immediately() {
        let b = vec![1.0, -4.0, 2.5, 0.0];
        let (x, rep) = solve(&CsrMatrix::identity(4), &b, None, &SolverOptions::default()).unwrap();
        assert_eq!(x, b);
        assert!(rep.iterations <= 1 && rep.converged);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let (x, rep) = solve(
            &a,
            &[0.0, 0.0],
            Some(&[5.0, 5.0]),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn failure_is_reported() {
        // Singular system with an inconsistent right-hand side.
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let err = solve(
            &a,
            &[1.0, 2.0],
            None,
            &SolverOptions {
                tol: 1e-12,
                max_iter: Some(50),
                ..SolverOptions::default()
            },
        )
        .unwrap_err();
        match err {
            Error::LinearSolver(rep) => assert!(!rep.converged && rep.final_residual > 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn random_diagonally_dominant_systems() {
        let mut r = rng::stream(17);
        for case in 0..100 {
            let n = r.gen_range(1..=500);
            let mut trip = Vec::new();
            for i in 0..n {
                let mut off = 0.0;
                for _ in 0..4 {
                    let j = r.gen_range(0..n);
                    if j != i {
                        let v: f64 = r.gen_range(-1.0..1.0);
                        off += v.abs();
                        trip.push((i, j, v));
                    }
                }
                trip.push((i, i, off + r.gen_range(0.1..2.0)));
            }
            let a = CsrMatrix::from_triplets(n, n, &trip).unwrap();
            let b: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            for preconditioner in [Preconditioner::Jacobi, Preconditioner::Ilu0] {
                let opts = SolverOptions {
                    tol: 1e-12,
                    max_iter: None,
                    preconditioner,
                };
                let (x, rep) =
                    solve(&a, &b, None, &opts).unwrap_or_else(|e| panic!("case {case}: {e}"));
                let ax = a.spmv(&x).unwrap();
                let res = norm2(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>());
                assert!(res <= 1e-12 * norm2(&b), "case {case}: {res}");
                assert!(rep.converged && rep.final_residual <= 1e-12);
            }
        }
    }
}
