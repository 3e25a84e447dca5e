//! Exact elimination of slave displacements and multipliers.
//!
//! Per surface, `D P = M` is solved with a scalar Thomas algorithm (every
//! nodal block of the mortar matrices is a scalar times the identity). The
//! operator `F = C T` maps the saddle system to the reduced unknowns
//! (free, master): `A_hat = F A F^T`, `b_hat = F b`. After solving, slave
//! displacements are `P d_master` and multipliers come from the slave rows
//! of the original system through a transposed Thomas solve.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elasticity::NDIM;
use crate::krylov::{sparse_triple_product, CsrMatrix, LinalgError};
use crate::system::{Part, SaddleSystem};

/// Pivots below this fraction of `max |D|` are treated as singular.
pub const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CondenseError {
    #[error("singular pivot {value:e} at row {index} of surface {surface}")]
    SingularPivot { surface: usize, index: usize, value: f64 },
    #[error("mortar matrix of surface {0} is not tridiagonal")]
    NotTridiagonal(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Scalar tridiagonal matrix: `sub[i] = D[i+1][i]`, `diag[i] = D[i][i]`,
/// `sup[i] = D[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn from_csr(d: &CsrMatrix) -> Option<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return None;
        }
        let mut t = Self { sub: vec![0.0; n.saturating_sub(1)], diag: vec![0.0; n], sup: vec![0.0; n.saturating_sub(1)] };
        for (i, j, v) in d.triplets() {
            match j as isize - i as isize {
                0 => t.diag[i] = v,
                1 => t.sup[i] = v,
                -1 => t.sub[j] = v,
                _ if v != 0.0 => return None,
                _ => {}
            }
        }
        Some(t)
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.len();
        let mut trip = Vec::with_capacity(3 * n);
        for i in 0..n {
            trip.push((i, i, self.diag[i]));
            if i + 1 < n {
                trip.push((i, i + 1, self.sup[i]));
                trip.push((i + 1, i, self.sub[i]));
            }
        }
        CsrMatrix::from_triplets(n, n, &trip).expect("indices in range")
    }

    /// Row-major `self * x` for `x` with `width` columns.
    pub fn apply(&self, x: &[f64], width: usize) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n * width];
        for i in 0..n {
            for c in 0..width {
                let mut v = self.diag[i] * x[i * width + c];
                if i > 0 {
                    v += self.sub[i - 1] * x[(i - 1) * width + c];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[(i + 1) * width + c];
                }
                y[i * width + c] = v;
            }
        }
        y
    }
}

/// `D = L U` with unit-lower bidiagonal `L` (multipliers `l`) and upper
/// bidiagonal `U` (pivots `u`, superdiagonal `sup`).
#[derive(Debug, Clone, PartialEq)]
pub struct ThomasFactors {
    /// `l[i]` multiplies row `i` against row `i - 1`; `l[0]` is unused.
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub sup: Vec<f64>,
}

pub fn thomas_factor(d: &Tridiagonal, surface: usize) -> Result<ThomasFactors, CondenseError> {
    let n = d.len();
    if n == 0 {
        return Err(CondenseError::Dimension("empty tridiagonal system".into()));
    }
    let scale = d
        .diag
        .iter()
        .chain(&d.sub)
        .chain(&d.sup)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = PIVOT_TOL * scale;
    let mut l = vec![0.0; n];
    let mut u = vec![0.0; n];
    u[0] = d.diag[0];
    for i in 0..n {
        if i > 0 {
            l[i] = d.sub[i - 1] / u[i - 1];
            u[i] = d.diag[i] - l[i] * d.sup[i - 1];
        }
        if !(u[i].abs() > tiny) {
            return Err(CondenseError::SingularPivot { surface, index: i, value: u[i] });
        }
    }
    Ok(ThomasFactors { l, u, sup: d.sup.clone() })
}

impl ThomasFactors {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Rebuilds `L U` as a tridiagonal matrix.
    pub fn reconstruct(&self) -> Tridiagonal {
        let n = self.len();
        let mut t = Tridiagonal { sub: vec![0.0; n - 1], diag: vec![0.0; n], sup: self.sup.clone() };
        for i in 0..n {
            t.diag[i] = self.u[i] + if i > 0 { self.l[i] * self.sup[i - 1] } else { 0.0 };
            if i > 0 {
                t.sub[i - 1] = self.l[i] * self.u[i - 1];
            }
        }
        t
    }

    /// Solves `D X = B` in place; `b` is row-major with `width` columns.
    pub fn solve(&self, b: &mut [f64], width: usize) {
        let n = self.len();
        for i in 1..n {
            let (prev, cur) = b.split_at_mut(i * width);
            let prev = &prev[(i - 1) * width..];
            for c in 0..width {
                cur[c] -= self.l[i] * prev[c];
            }
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                let (cur, next) = b.split_at_mut((i + 1) * width);
                for c in 0..width {
                    cur[i * width + c] -= self.sup[i] * next[c];
                }
            }
            for c in 0..width {
                b[i * width + c] /= self.u[i];
            }
        }
    }

    /// Solves `D^T X = B` in place via `U^T` then `L^T` sweeps.
    pub fn solve_transpose(&self, b: &mut [f64], width: usize) {
        let n = self.len();
        for i in 0..n {
            if i > 0 {
                let (prev, cur) = b.split_at_mut(i * width);
                let prev = &prev[(i - 1) * width..];
                for c in 0..width {
                    cur[c] -= self.sup[i - 1] * prev[c];
                }
            }
            for c in 0..width {
                b[i * width + c] /= self.u[i];
            }
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let (cur, next) = b.split_at_mut((i + 1) * width);
            for c in 0..width {
                cur[i * width + c] -= self.l[i + 1] * next[c];
            }
        }
    }
}

/// Factors and the scalar `P = D^{-1} M` of one surface.
#[derive(Debug, Clone)]
pub struct SurfaceElimination {
    pub factors: ThomasFactors,
    /// `n_slave x n_master`, scalar.
    pub p: CsrMatrix,
}

/// Solves `D P = M` for one surface.
pub fn eliminate_surface(surface: usize, d: &CsrMatrix, m: &CsrMatrix) -> Result<SurfaceElimination, CondenseError> {
    let tri = Tridiagonal::from_csr(d).ok_or(CondenseError::NotTridiagonal(surface))?;
    if m.nrows() != tri.len() {
        return Err(CondenseError::Dimension(format!("surface {surface}: D and M row counts differ")));
    }
    let factors = thomas_factor(&tri, surface)?;
    let width = m.ncols();
    let mut rhs = vec![0.0; m.nrows() * width];
    for (i, j, v) in m.triplets() {
        rhs[i * width + j] = v;
    }
    factors.solve(&mut rhs, width);
    let trip: Vec<_> = rhs
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(k, &v)| (k / width, k % width, v))
        .collect();
    let p = CsrMatrix::from_triplets(m.nrows(), width, &trip)?;
    Ok(SurfaceElimination { factors, p })
}

/// Wall-clock split of the condensation step, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CondenseTimings {
    /// Thomas factor/solve for all surfaces.
    pub thomas_s: f64,
    /// Building `T`, `C` and `F`.
    pub operators_s: f64,
    /// Triple product `F A F^T`.
    pub triple_product_s: f64,
    /// Everything else (right-hand side, bookkeeping).
    pub other_s: f64,
    pub total_s: f64,
}

/// `P`, `T`, `C` and `F` in the global (free, master, slave, multiplier)
/// ordering.
#[derive(Debug, Clone)]
pub struct EliminationOperators {
    pub surfaces: Vec<SurfaceElimination>,
    /// Global `|slave| x |master|` DOF matrix.
    pub p: CsrMatrix,
    pub t: CsrMatrix,
    pub c: CsrMatrix,
    pub f: CsrMatrix,
}

/// Thread count for per-surface work, from `MC_THREADS` when set.
fn surface_pool() -> Option<rayon::ThreadPool> {
    let n: usize = std::env::var("MC_THREADS").ok()?.trim().parse().ok()?;
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()
}

fn solve_surfaces(saddle: &SaddleSystem) -> Result<Vec<SurfaceElimination>, CondenseError> {
    let work = || {
        saddle
            .mortars
            .par_iter()
            .enumerate()
            .map(|(k, pair)| eliminate_surface(k, &pair.d, &pair.m))
            .collect::<Result<Vec<_>, _>>()
    };
    match surface_pool() {
        Some(pool) => pool.install(work),
        None => work(),
    }
}

/// Assembles `T = I + E`, where `E` holds `P^T` in the (master rows, slave
/// columns) block, the row selector `C` onto (free, master) and `F = C T`.
pub fn build_elimination(
    saddle: &SaddleSystem,
    surfaces: Vec<SurfaceElimination>,
) -> Result<EliminationOperators, CondenseError> {
    let map = &saddle.dofmap;
    let n = map.n_total();
    let (mr, sr) = (map.range(Part::Master), map.range(Part::Slave));
    if surfaces.len() != map.n_surfaces() {
        return Err(CondenseError::Dimension("one elimination per surface expected".into()));
    }
    let mut p_trip = Vec::new();
    for (k, (elim, pair)) in surfaces.iter().zip(&saddle.mortars).enumerate() {
        let s0 = map.surface_slave_range(k).start - sr.start;
        for (i, j, v) in elim.p.triplets() {
            let col = map.dof(pair.master_body, pair.master_nodes[j], 0) - mr.start;
            for c in 0..NDIM {
                p_trip.push((s0 + NDIM * i + c, col + c, v));
            }
        }
    }
    let p = CsrMatrix::from_triplets(sr.len(), mr.len(), &p_trip)?;

    let mut t_trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
    for (i, j, v) in p.triplets() {
        t_trip.push((mr.start + j, sr.start + i, v));
    }
    let t = CsrMatrix::from_triplets(n, n, &t_trip)?;
    let nr = mr.end;
    let c_trip: Vec<_> = (0..nr).map(|i| (i, i, 1.0)).collect();
    let c = CsrMatrix::from_triplets(nr, n, &c_trip)?;
    let f = c.matmul(&t)?;
    Ok(EliminationOperators { surfaces, p, t, c, f })
}

/// Reduced SPD system on (free, master) unknowns.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub a_hat: CsrMatrix,
    pub b_hat: Vec<f64>,
    pub ops: EliminationOperators,
    pub timings: CondenseTimings,
}

/// Full condensation: Thomas solves, operators and triple product.
pub fn condense(saddle: &SaddleSystem) -> Result<CondensedSystem, CondenseError> {
    let start = Instant::now();
    let surfaces = solve_surfaces(saddle)?;
    let t_thomas = start.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let ops = build_elimination(saddle, surfaces)?;
    let t_ops = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let a_hat = sparse_triple_product(&ops.f, &saddle.a)?;
    let t_triple = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let b_hat = ops.f.spmv(&saddle.b)?;
    let t_other = t0.elapsed().as_secs_f64();

    let timings = CondenseTimings {
        thomas_s: t_thomas,
        operators_s: t_ops,
        triple_product_s: t_triple,
        other_s: t_other,
        total_s: start.elapsed().as_secs_f64(),
    };
    Ok(CondensedSystem { a_hat, b_hat, ops, timings })
}

/// The reduced matrix from its block formula:
/// `[[K_NN, K_NM + K_NS P], [sym, K_MM + K_MS P + P^T K_SM + P^T K_SS P]]`.
pub fn condense_explicit(saddle: &SaddleSystem, p: &CsrMatrix) -> Result<CsrMatrix, CondenseError> {
    let blk = |r, c| saddle.block(r, c);
    let (k_nn, k_nm, k_ns) = (blk(Part::Free, Part::Free), blk(Part::Free, Part::Master), blk(Part::Free, Part::Slave));
    let (k_mm, k_ms, k_ss) = (blk(Part::Master, Part::Master), blk(Part::Master, Part::Slave), blk(Part::Slave, Part::Slave));
    let pt = p.transpose();
    let upper = k_nm.add_scaled(1.0, &k_ns.matmul(p)?, 1.0)?;
    let k_ms_p = k_ms.matmul(p)?;
    let mm = k_mm
        .add_scaled(1.0, &k_ms_p, 1.0)?
        .add_scaled(1.0, &k_ms_p.transpose(), 1.0)?
        .add_scaled(1.0, &pt.matmul(&k_ss)?.matmul(p)?, 1.0)?;
    let nn = k_nn.nrows();
    let total = nn + mm.nrows();
    Ok(CsrMatrix::from_blocks(
        total,
        total,
        &[(0, 0, &k_nn), (0, nn, &upper), (nn, 0, &upper.transpose()), (nn, nn, &mm)],
    )?)
}

/// Expands a reduced solution to the full saddle unknown vector.
pub fn recover(x_hat: &[f64], saddle: &SaddleSystem, ops: &EliminationOperators) -> Result<Vec<f64>, CondenseError> {
    let map = &saddle.dofmap;
    let (mr, sr, lr) = (map.range(Part::Master), map.range(Part::Slave), map.range(Part::Multiplier));
    if x_hat.len() != mr.end {
        return Err(CondenseError::Dimension(format!(
            "reduced solution has {} entries, expected {}",
            x_hat.len(),
            mr.end
        )));
    }
    let mut x = vec![0.0; map.n_total()];
    x[..mr.end].copy_from_slice(x_hat);
    let d_s = ops.p.spmv(&x_hat[mr.clone()])?;
    x[sr.clone()].copy_from_slice(&d_s);

    // slave rows: K_S,disp d + D^T lambda = f_S
    let k_s = saddle.a.submatrix(sr.clone(), 0..sr.end);
    let kd = k_s.spmv(&x[..sr.end])?;
    for (k, elim) in ops.surfaces.iter().enumerate() {
        let srange = map.surface_slave_range(k);
        let off = srange.start - sr.start;
        let mut r: Vec<f64> = (0..srange.len()).map(|i| saddle.b[srange.start + i] - kd[off + i]).collect();
        elim.factors.solve_transpose(&mut r, NDIM);
        let lrange = map.surface_multiplier_range(k);
        x[lrange].copy_from_slice(&r);
    }
    debug_assert_eq!(lr.end, x.len());
    Ok(x)
}
