//! Preconditioned CG for the condensed SPD system and restarted GCR for the
//! saddle-point baseline. Both stop on the true residual `||b - A x_k||`
//! relative to `||b - A x_0||` with `x_0 = 0`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{CsrMatrix, LinalgError, Preconditioner};

/// Convergence record of one Krylov solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub preconditioner: String,
    pub n: usize,
    pub nnz: usize,
    pub nit: usize,
    pub converged: bool,
    pub rel_residual_final: f64,
    pub rel_residual_history: Vec<f64>,
    pub t_sol_s: f64,
    pub t_con_s: Option<f64>,
    pub t_tot_s: Option<f64>,
    #[serde(default)]
    pub stagnated: bool,
}

/// Tolerance and iteration cap shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub tol: f64,
    pub maxit: usize,
}

impl StopRule {
    pub const DEFAULT: Self = Self { tol: 1e-8, maxit: 2000 };

    pub fn new(tol: f64, maxit: usize) -> Result<Self, LinalgError> {
        if !(tol > 0.0 && tol < 1.0) || maxit == 0 {
            return Err(LinalgError::Config(format!(
                "tolerance must lie in (0, 1) and maxit >= 1 (got {tol}, {maxit})"
            )));
        }
        Ok(Self { tol, maxit })
    }
}

impl Default for StopRule {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual_norm(a: &CsrMatrix, b: &[f64], x: &[f64], scratch: &mut [f64]) -> f64 {
    a.spmv_into(x, scratch).expect("dimensions checked on entry");
    b.iter()
        .zip(scratch.iter())
        .map(|(bi, ai)| (bi - ai) * (bi - ai))
        .sum::<f64>()
        .sqrt()
}

fn check_square(a: &CsrMatrix, b: &[f64], op: &'static str) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() || b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch {
            op,
            expected: (a.nrows(), a.ncols()),
            found: (b.len(), 1),
        });
    }
    Ok(())
}

fn trivial_report(method: &str, pc: &dyn Preconditioner, a: &CsrMatrix, start: Instant) -> SolveReport {
    SolveReport {
        method: method.into(),
        preconditioner: pc.name(),
        n: a.nrows(),
        nnz: a.nnz(),
        nit: 0,
        converged: true,
        rel_residual_final: 0.0,
        rel_residual_history: vec![1.0],
        t_sol_s: start.elapsed().as_secs_f64(),
        t_con_s: None,
        t_tot_s: None,
        stagnated: false,
    }
}

/// Preconditioned conjugate gradients.
///
/// Returns [`LinalgError::Indefinite`] if a search direction with
/// non-positive curvature shows up, which for the condensed system means the
/// operator handed in was not SPD.
pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    pc: &dyn Preconditioner,
    stop: StopRule,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    check_square(a, b, "cg")?;
    let start = Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let r0 = norm(b);
    if r0 == 0.0 {
        return Ok((x, trivial_report("cg", pc, a, start)));
    }

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut history = vec![1.0];
    let mut rel = 1.0;
    let mut nit = 0;

    while nit < stop.maxit && rel > stop.tol {
        if !(rz > 0.0) {
            return Err(LinalgError::PreconditionerNotSpd { iteration: nit });
        }
        a.spmv_into(&p, &mut q)?;
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(LinalgError::Indefinite { iteration: nit, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        nit += 1;
        rel = true_residual_norm(a, b, &x, &mut scratch) / r0;
        history.push(rel);
        if rel <= stop.tol {
            break;
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let report = SolveReport {
        method: "cg".into(),
        preconditioner: pc.name(),
        n,
        nnz: a.nnz(),
        nit,
        converged: rel <= stop.tol,
        rel_residual_final: rel,
        rel_residual_history: history,
        t_sol_s: start.elapsed().as_secs_f64(),
        t_con_s: None,
        t_tot_s: None,
        stagnated: false,
    };
    Ok((x, report))
}

/// Restarted generalized conjugate residuals with right preconditioning.
///
/// The search directions are `A`-orthogonalized images of `M^{-1} r`, so a
/// preconditioner that changes between applications is tolerated. If a full
/// restart cycle brings no residual decrease the run stops and the report is
/// flagged `stagnated`.
pub fn gcr(
    a: &CsrMatrix,
    b: &[f64],
    pc: &dyn Preconditioner,
    stop: StopRule,
    restart: usize,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    check_square(a, b, "gcr")?;
    if restart == 0 {
        return Err(LinalgError::Config("GCR restart length must be positive".into()));
    }
    let start = Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let r0 = norm(b);
    if r0 == 0.0 {
        return Ok((x, trivial_report("gcr", pc, a, start)));
    }

    let mut r = b.to_vec();
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(restart);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(restart);
    let mut scratch = vec![0.0; n];
    let mut history = vec![1.0];
    let mut rel = 1.0;
    let mut cycle_start = 1.0;
    let mut nit = 0;
    let mut stagnated = false;

    // set after a step that made no progress, e.g. when r is orthogonal to
    // A M^{-1} r; the next direction is then grown from the last image
    let mut seed_from_image = false;

    while nit < stop.maxit && rel > stop.tol {
        let mut z = vec![0.0; n];
        match images.last() {
            Some(img) if seed_from_image => pc.apply(img, &mut z),
            _ => pc.apply(&r, &mut z),
        }
        let mut q = a.spmv(&z)?;
        for (d, img) in dirs.iter().zip(&images) {
            let beta = dot(&q, img);
            for i in 0..n {
                q[i] -= beta * img[i];
                z[i] -= beta * d[i];
            }
        }
        let qn = norm(&q);
        nit += 1;
        if qn > 0.0 && qn.is_finite() {
            q.iter_mut().for_each(|v| *v /= qn);
            z.iter_mut().for_each(|v| *v /= qn);
            let alpha = dot(&r, &q);
            seed_from_image = alpha.abs() <= f64::EPSILON * norm(&r);
            for i in 0..n {
                x[i] += alpha * z[i];
                r[i] -= alpha * q[i];
            }
            dirs.push(z);
            images.push(q);
        } else {
            seed_from_image = false;
        }
        rel = true_residual_norm(a, b, &x, &mut scratch) / r0;
        history.push(rel);
        if dirs.len() == restart || qn == 0.0 || !qn.is_finite() {
            if rel >= cycle_start {
                stagnated = true;
                break;
            }
            cycle_start = rel;
            dirs.clear();
            images.clear();
            seed_from_image = false;
            // refresh the recurrence residual at every restart
            a.spmv_into(&x, &mut scratch)?;
            for i in 0..n {
                r[i] = b[i] - scratch[i];
            }
        }
    }

    let report = SolveReport {
        method: "gcr".into(),
        preconditioner: pc.name(),
        n,
        nnz: a.nnz(),
        nit,
        converged: rel <= stop.tol,
        rel_residual_final: rel,
        rel_residual_history: history,
        t_sol_s: start.elapsed().as_secs_f64(),
        t_con_s: None,
        t_tot_s: None,
        stagnated,
    };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{make_preconditioner, PreconditionerKind, PreconditionerTarget};

    fn laplacian_2d(m: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize| i * m + j;
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..m {
                t.push((idx(i, j), idx(i, j), 4.0));
                if i > 0 {
                    t.push((idx(i, j), idx(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((idx(i, j), idx(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, m * m, &t).unwrap()
    }

    fn pc(kind: PreconditionerKind, a: &CsrMatrix) -> Box<dyn Preconditioner> {
        make_preconditioner(kind, PreconditionerTarget::Matrix(a)).unwrap()
    }

    #[test]
    fn cg_identity_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let (x, rep) = cg(&a, &b, &*pc(PreconditionerKind::None, &a), StopRule::DEFAULT).unwrap();
        assert_eq!(rep.nit, 1);
        assert!(rep.converged);
        assert_eq!(x, b);
        assert_eq!(rep.rel_residual_history[0], 1.0);
    }

    #[test]
    fn cg_laplacian_with_jacobi() {
        let a = laplacian_2d(32);
        let b = vec![1.0; a.nrows()];
        let (x, rep) = cg(&a, &b, &*pc(PreconditionerKind::Jacobi, &a), StopRule::DEFAULT).unwrap();
        assert!(rep.converged);
        assert!(rep.nit < 200, "nit = {}", rep.nit);
        let r: Vec<f64> = a.spmv(&x).unwrap().iter().zip(&b).map(|(p, q)| q - p).collect();
        assert!(norm(&r) / norm(&b) <= 1e-8);
        // no blow-up of the relative residual between consecutive iterations
        for w in rep.rel_residual_history.windows(2) {
            assert!(w[1] <= 10.0 * w[0]);
        }
    }

    #[test]
    fn cg_detects_indefinite_matrix() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        let err = cg(&a, &[0.0, 1.0], &*pc(PreconditionerKind::None, &a), StopRule::DEFAULT);
        assert!(matches!(err, Err(LinalgError::Indefinite { .. })));
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let a = laplacian_2d(3);
        let (x, rep) = cg(&a, &[0.0; 9], &*pc(PreconditionerKind::None, &a), StopRule::DEFAULT).unwrap();
        assert!(rep.converged && rep.nit == 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gcr_swap_matrix() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let (x, rep) =
            gcr(&a, &[1.0, 0.0], &*pc(PreconditionerKind::None, &a), StopRule::DEFAULT, 50).unwrap();
        assert!(rep.converged);
        assert!(x[0].abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gcr_agrees_with_cg_on_spd() {
        let a = laplacian_2d(10);
        let b: Vec<f64> = (0..100).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let p = pc(PreconditionerKind::Jacobi, &a);
        let (xc, _) = cg(&a, &b, &*p, StopRule::DEFAULT).unwrap();
        let (xg, rg) = gcr(&a, &b, &*p, StopRule::DEFAULT, 50).unwrap();
        assert!(rg.converged);
        let scale = xc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in xc.iter().zip(&xg) {
            assert!((u - v).abs() <= 1e-7 * scale);
        }
    }

    #[test]
    fn solvers_are_deterministic() {
        let a = laplacian_2d(12);
        let b = vec![1.0; 144];
        let p = pc(PreconditionerKind::SSOR_DEFAULT, &a);
        let (x1, r1) = cg(&a, &b, &*p, StopRule::DEFAULT).unwrap();
        let (x2, r2) = cg(&a, &b, &*p, StopRule::DEFAULT).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(r1.rel_residual_history, r2.rel_residual_history);
        let (g1, s1) = gcr(&a, &b, &*p, StopRule::DEFAULT, 10).unwrap();
        let (g2, s2) = gcr(&a, &b, &*p, StopRule::DEFAULT, 10).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(s1.rel_residual_history, s2.rel_residual_history);
    }

    #[test]
    fn maxit_cap_reports_non_convergence() {
        let a = laplacian_2d(16);
        let b = vec![1.0; 256];
        let stop = StopRule::new(1e-12, 3).unwrap();
        let (_, rep) = cg(&a, &b, &*pc(PreconditionerKind::None, &a), stop).unwrap();
        assert_eq!(rep.nit, 3);
        assert!(!rep.converged);
        assert_eq!(rep.rel_residual_history.len(), 4);
    }

    #[test]
    fn stop_rule_validation() {
        assert!(StopRule::new(0.0, 10).is_err());
        assert!(StopRule::new(1.0, 10).is_err());
        assert!(StopRule::new(1e-8, 0).is_err());
    }
}
