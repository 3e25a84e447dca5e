//! Preconditioners: Jacobi, symmetric SOR, nodal block Jacobi and a SIMPLE
//! block preconditioner for two-by-two saddle-point matrices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dense::{DenseLu, DenseMatrix};
use super::{CsrMatrix, LinalgError};

/// Applies `z = M^{-1} r`.
pub trait Preconditioner: Send + Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    None,
    Jacobi,
    Ssor { omega: f64 },
    BlockJacobi { block: usize },
    Simple,
}

impl PreconditionerKind {
    pub const SSOR_DEFAULT: Self = Self::Ssor { omega: 1.0 };
    pub const BLOCK_JACOBI_DEFAULT: Self = Self::BlockJacobi { block: 2 };

    /// Short label matching the command-line spelling.
    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Jacobi => "jac",
            Self::Ssor { .. } => "ssor",
            Self::BlockJacobi { .. } => "bjac",
            Self::Simple => "simple",
        }
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PreconditionerKind {
    type Err = LinalgError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "jac" | "jacobi" => Ok(Self::Jacobi),
            "ssor" | "sor" => Ok(Self::SSOR_DEFAULT),
            "bjac" | "block_jacobi" => Ok(Self::BLOCK_JACOBI_DEFAULT),
            "simple" => Ok(Self::Simple),
            other => Err(LinalgError::Config(format!("unknown preconditioner `{other}`"))),
        }
    }
}

/// What a preconditioner is built for: a plain matrix, or a saddle-point
/// matrix whose first `n_primal` unknowns form the stiffness block.
#[derive(Debug, Clone, Copy)]
pub enum PreconditionerTarget<'a> {
    Matrix(&'a CsrMatrix),
    Saddle { matrix: &'a CsrMatrix, n_primal: usize },
}

impl<'a> PreconditionerTarget<'a> {
    fn matrix(&self) -> &'a CsrMatrix {
        match *self {
            Self::Matrix(a) => a,
            Self::Saddle { matrix, .. } => matrix,
        }
    }
}

pub fn make_preconditioner(
    kind: PreconditionerKind,
    target: PreconditionerTarget<'_>,
) -> Result<Box<dyn Preconditioner>, LinalgError> {
    let a = target.matrix();
    if a.nrows() != a.ncols() {
        return Err(LinalgError::Structure("preconditioner needs a square matrix".into()));
    }
    Ok(match kind {
        PreconditionerKind::None => Box::new(IdentityPreconditioner),
        PreconditionerKind::Jacobi => match target {
            PreconditionerTarget::Matrix(a) => Box::new(Jacobi::new(a)?),
            PreconditionerTarget::Saddle { matrix, n_primal } => {
                Box::new(Jacobi::for_saddle(matrix, n_primal)?)
            }
        },
        PreconditionerKind::Ssor { omega } => Box::new(Ssor::new(a, omega)?),
        PreconditionerKind::BlockJacobi { block } => Box::new(BlockJacobi::new(a, block)?),
        PreconditionerKind::Simple => match target {
            PreconditionerTarget::Saddle { matrix, n_primal } => {
                Box::new(Simple::new(matrix, n_primal, Simple::DEFAULT_INNER)?)
            }
            PreconditionerTarget::Matrix(_) => {
                return Err(LinalgError::Config(
                    "SIMPLE requires a saddle-point block structure".into(),
                ))
            }
        },
    })
}

fn checked_diagonal(a: &CsrMatrix) -> Result<Vec<f64>, LinalgError> {
    let d = a.diagonal();
    match d.iter().position(|&v| v == 0.0) {
        Some(row) => Err(LinalgError::ZeroDiagonal { row }),
        None => Ok(d),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
    fn name(&self) -> String {
        "none".into()
    }
}

#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self, LinalgError> {
        let d = checked_diagonal(a)?;
        Ok(Self { inv_diag: d.iter().map(|v| 1.0 / v).collect() })
    }

    /// Diagonal scaling of the stiffness rows; multiplier rows, whose
    /// diagonal block is structurally zero, are passed through unscaled.
    pub fn for_saddle(a: &CsrMatrix, n_primal: usize) -> Result<Self, LinalgError> {
        let d = a.diagonal();
        let mut inv_diag = Vec::with_capacity(d.len());
        for (i, &v) in d.iter().enumerate() {
            if i < n_primal {
                if v == 0.0 {
                    return Err(LinalgError::ZeroDiagonal { row: i });
                }
                inv_diag.push(1.0 / v);
            } else {
                inv_diag.push(if v == 0.0 { 1.0 } else { 1.0 / v });
            }
        }
        Ok(Self { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
    fn name(&self) -> String {
        "jac".into()
    }
}

/// One symmetric SOR sweep: `M = (D/w + L) (D/w)^{-1} (D/w + U) * w/(2-w)`.
#[derive(Debug, Clone)]
pub struct Ssor {
    a: CsrMatrix,
    diag: Vec<f64>,
    omega: f64,
}

impl Ssor {
    pub fn new(a: &CsrMatrix, omega: f64) -> Result<Self, LinalgError> {
        if !(omega > 0.0 && omega < 2.0) {
            return Err(LinalgError::Config(format!("SSOR relaxation {omega} outside (0, 2)")));
        }
        let diag = checked_diagonal(a)?;
        Ok(Self { a: a.clone(), diag, omega })
    }
}

impl Preconditioner for Ssor {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let w = self.omega;
        // forward: (D + wL) y = r
        for i in 0..n {
            let (cols, vals) = self.a.row(i);
            let mut s = r[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j >= i {
                    break;
                }
                s -= w * v * z[j];
            }
            z[i] = s / self.diag[i];
        }
        // middle: scale by D
        for i in 0..n {
            z[i] *= self.diag[i];
        }
        // backward: (D + wU) z = D y
        for i in (0..n).rev() {
            let (cols, vals) = self.a.row(i);
            let mut s = z[i];
            for (&j, &v) in cols.iter().zip(vals).rev() {
                if j <= i {
                    break;
                }
                s -= w * v * z[j];
            }
            z[i] = s / self.diag[i];
        }
        let scale = w * (2.0 - w);
        z.iter_mut().for_each(|v| *v *= scale);
    }
    fn name(&self) -> String {
        format!("ssor(omega={})", self.omega)
    }
}

/// Exact inverses of consecutive diagonal blocks (last block may be short).
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    block: usize,
    factors: Vec<DenseLu>,
}

impl BlockJacobi {
    pub fn new(a: &CsrMatrix, block: usize) -> Result<Self, LinalgError> {
        if block == 0 {
            return Err(LinalgError::Config("block size must be positive".into()));
        }
        checked_diagonal(a)?;
        let n = a.nrows();
        let mut factors = Vec::with_capacity(n.div_ceil(block));
        for start in (0..n).step_by(block) {
            let end = (start + block).min(n);
            let sub = a.submatrix(start..end, start..end);
            let lu = DenseLu::factor(DenseMatrix::from_csr(&sub)?).map_err(|_| {
                LinalgError::Singular { index: start }
            })?;
            factors.push(lu);
        }
        Ok(Self { block, factors })
    }
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (k, lu) in self.factors.iter().enumerate() {
            let start = k * self.block;
            let end = (start + self.block).min(r.len());
            let x = lu.solve(&r[start..end]).expect("block size fixed at construction");
            z[start..end].copy_from_slice(&x);
        }
    }
    fn name(&self) -> String {
        format!("bjac(block={})", self.block)
    }
}

/// SIMPLE block preconditioner for `[[K, G^T], [G, 0]]`.
///
/// Uses `S = -G diag(K)^{-1} G^T` as the Schur complement approximation and
/// a fixed number of Jacobi-preconditioned CG steps for both inner solves.
/// Because the inner solves are truncated the operator is not exactly linear,
/// so it should be paired with a flexible outer method such as GCR.
#[derive(Debug, Clone)]
pub struct Simple {
    k: CsrMatrix,
    g: CsrMatrix,
    gt: CsrMatrix,
    k_inv_diag: Vec<f64>,
    // stored as -S, which is positive semidefinite
    neg_schur: CsrMatrix,
    neg_schur_inv_diag: Vec<f64>,
    inner: usize,
}

impl Simple {
    pub const DEFAULT_INNER: usize = 20;

    pub fn new(a: &CsrMatrix, n_primal: usize, inner: usize) -> Result<Self, LinalgError> {
        let n = a.nrows();
        if n_primal == 0 || n_primal >= n {
            return Err(LinalgError::Config("SIMPLE needs both primal and dual unknowns".into()));
        }
        let k = a.submatrix(0..n_primal, 0..n_primal);
        let g = a.submatrix(n_primal..n, 0..n_primal);
        let gt = g.transpose();
        let k_diag = checked_diagonal(&k)?;
        let k_inv_diag: Vec<f64> = k_diag.iter().map(|v| 1.0 / v).collect();
        let scaled_gt = {
            let trip: Vec<_> = gt.triplets().map(|(i, j, v)| (i, j, v * k_inv_diag[i])).collect();
            CsrMatrix::from_triplets(gt.nrows(), gt.ncols(), &trip)?
        };
        let neg_schur = g.matmul(&scaled_gt)?;
        let neg_schur_inv_diag = checked_diagonal(&neg_schur)
            .map_err(|_| LinalgError::Config("constraint rows without coupling".into()))?
            .iter()
            .map(|v| 1.0 / v)
            .collect();
        Ok(Self { k, g, gt, k_inv_diag, neg_schur, neg_schur_inv_diag, inner })
    }

    fn inner_cg(a: &CsrMatrix, inv_diag: &[f64], b: &[f64], steps: usize) -> Vec<f64> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut q = vec![0.0; n];
        for _ in 0..steps {
            if rz <= 0.0 {
                break;
            }
            a.spmv_into(&p, &mut q).expect("square inner block");
            let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
            if pq <= 0.0 {
                break;
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }
}

impl Preconditioner for Simple {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let np = self.k.nrows();
        let (ru, rl) = r.split_at(np);
        // predictor: K u* = r_u
        let u_star = Self::inner_cg(&self.k, &self.k_inv_diag, ru, self.inner);
        // S dl = r_l - G u*  <=>  (-S) dl = G u* - r_l
        let gu = self.g.spmv(&u_star).expect("conformal blocks");
        let rhs: Vec<f64> = gu.iter().zip(rl).map(|(a, b)| a - b).collect();
        let dl = Self::inner_cg(&self.neg_schur, &self.neg_schur_inv_diag, &rhs, self.inner);
        // corrector: u = u* - diag(K)^{-1} G^T dl
        let gtl = self.gt.spmv(&dl).expect("conformal blocks");
        for i in 0..np {
            z[i] = u_star[i] - self.k_inv_diag[i] * gtl[i];
        }
        z[np..].copy_from_slice(&dl);
    }
    fn name(&self) -> String {
        format!("simple(inner={})", self.inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd() -> CsrMatrix {
        CsrMatrix::from_dense(&[
            vec![4.0, -1.0, 0.0, 0.5],
            vec![-1.0, 5.0, -2.0, 0.0],
            vec![0.0, -2.0, 6.0, -1.0],
            vec![0.5, 0.0, -1.0, 3.0],
        ])
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn jacobi_on_identity_is_identity() {
        let p = make_preconditioner(
            PreconditionerKind::Jacobi,
            PreconditionerTarget::Matrix(&CsrMatrix::identity(3)),
        )
        .unwrap();
        let mut z = vec![0.0; 3];
        p.apply(&[1.0, 2.0, 3.0], &mut z);
        assert_eq!(z, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_diagonal_rejected() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 0.0]]);
        for kind in [
            PreconditionerKind::Jacobi,
            PreconditionerKind::SSOR_DEFAULT,
            PreconditionerKind::BLOCK_JACOBI_DEFAULT,
        ] {
            let err = make_preconditioner(kind, PreconditionerTarget::Matrix(&a)).err();
            assert!(matches!(err, Some(LinalgError::ZeroDiagonal { row: 1 })), "{kind}");
        }
    }

    #[test]
    fn saddle_jacobi_passes_multiplier_rows_through() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 0.0]]);
        let p = make_preconditioner(
            PreconditionerKind::Jacobi,
            PreconditionerTarget::Saddle { matrix: &a, n_primal: 1 },
        )
        .unwrap();
        let mut z = vec![0.0; 2];
        p.apply(&[2.0, 3.0], &mut z);
        assert_eq!(z, vec![1.0, 3.0]);
    }

    #[test]
    fn ssor_matches_explicit_formula() {
        // omega = 1: z = (D+U)^{-1} D (D+L)^{-1} r, checked densely
        let a = spd();
        let d = a.to_dense();
        let p = Ssor::new(&a, 1.0).unwrap();
        let r = [1.0, -2.0, 0.5, 3.0];
        let mut z = vec![0.0; 4];
        p.apply(&r, &mut z);
        // apply M = (D+L) D^{-1} (D+U) to z and expect r back
        let mut t = [0.0; 4];
        for i in 0..4 {
            t[i] = (i..4).map(|j| d[i][j] * z[j]).sum::<f64>();
        }
        for i in 0..4 {
            t[i] /= d[i][i];
        }
        let back: Vec<f64> = (0..4).map(|i| (0..=i).map(|j| d[i][j] * t[j]).sum()).collect();
        for i in 0..4 {
            assert!((back[i] - r[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn symmetric_preconditioners_are_self_adjoint() {
        let a = spd();
        let x = [0.3, -1.2, 2.0, 0.7];
        let y = [1.1, 0.4, -0.6, 2.5];
        for kind in [
            PreconditionerKind::Jacobi,
            PreconditionerKind::Ssor { omega: 1.3 },
            PreconditionerKind::BlockJacobi { block: 2 },
            PreconditionerKind::BlockJacobi { block: 3 },
        ] {
            let p = make_preconditioner(kind, PreconditionerTarget::Matrix(&a)).unwrap();
            let (mut px, mut py) = (vec![0.0; 4], vec![0.0; 4]);
            p.apply(&x, &mut px);
            p.apply(&y, &mut py);
            assert!((dot(&px, &y) - dot(&x, &py)).abs() < 1e-13, "{kind}");
        }
    }

    #[test]
    fn block_jacobi_inverts_block_diagonal_exactly() {
        let a = CsrMatrix::from_dense(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0],
            vec![0.0, 0.0, 4.0],
        ]);
        let p = BlockJacobi::new(&a, 2).unwrap();
        let mut z = vec![0.0; 3];
        p.apply(&[3.0, 4.0, 8.0], &mut z);
        assert!((z[0] - 1.0).abs() < 1e-15 && (z[1] - 1.0).abs() < 1e-15);
        assert_eq!(z[2], 2.0);
    }

    #[test]
    fn simple_requires_saddle_target() {
        let err = make_preconditioner(PreconditionerKind::Simple, PreconditionerTarget::Matrix(&spd()));
        assert!(err.is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("jac".parse::<PreconditionerKind>().unwrap(), PreconditionerKind::Jacobi);
        assert_eq!("ssor".parse::<PreconditionerKind>().unwrap(), PreconditionerKind::SSOR_DEFAULT);
        assert_eq!(
            "bjac".parse::<PreconditionerKind>().unwrap(),
            PreconditionerKind::BlockJacobi { block: 2 }
        );
        assert!("amg".parse::<PreconditionerKind>().is_err());
    }
}
