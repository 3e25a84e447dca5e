//! Segment-based mortar integration on straight interfaces.
//!
//! Slave and master nodes are parameterized by arc length along the shared
//! interface line, which realizes the slave-to-master map. Multipliers use
//! the slave trace basis, so `D[j][k] = int N_j N_k` and
//! `M[j][l] = int N_j (N_l of master)` over the slave surface. Both are
//! stored as scalar matrices; the nodal blocks are these scalars times the
//! 2x2 identity.

use serde::{Deserialize, Serialize};

use crate::krylov::CsrMatrix;
use crate::mesh::{Line, Mesh2D, Point, SurfaceSpec, GEOMETRY_TOL};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MortarError {
    #[error("contact search failed: {0}")]
    ContactSearch(String),
    #[error("geometry error: {0}")]
    Geometry(String),
}

/// A piece of one slave element that maps into a single master element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MortarSegment {
    pub slave_element: usize,
    pub master_element: usize,
    pub a: f64,
    pub b: f64,
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum QuadratureRule {
    #[default]
    Gauss2,
    Gauss4,
}

impl QuadratureRule {
    pub fn points(&self) -> &'static [(f64, f64)] {
        const G2: [(f64, f64); 2] = [(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)];
        const G4: [(f64, f64); 4] = [
            (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
            (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        ];
        match self {
            Self::Gauss2 => &G2,
            Self::Gauss4 => &G4,
        }
    }
}

fn parameters(points: &[Point], line: &Line, side: &str) -> Result<Vec<f64>, MortarError> {
    if points.len() < 2 {
        return Err(MortarError::Geometry(format!("{side} side needs at least two nodes")));
    }
    let t: Vec<f64> = points.iter().map(|&p| line.parameter(p)).collect();
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MortarError::Geometry(format!(
            "{side} node parameters are not strictly increasing along the interface"
        )));
    }
    Ok(t)
}

/// Splits the slave parameter range at every master node parameter.
///
/// The master side must cover the slave side; partial overlap is rejected.
pub fn project_segments(slave: &[Point], master: &[Point], line: &Line) -> Result<Vec<MortarSegment>, MortarError> {
    let ts = parameters(slave, line, "slave")?;
    let tm = parameters(master, line, "master")?;
    let (s0, s1) = (ts[0], *ts.last().unwrap());
    let (m0, m1) = (tm[0], *tm.last().unwrap());
    let tol = GEOMETRY_TOL * (s1 - s0).abs().max(m1 - m0).max(1.0);
    if m1 <= s0 + tol || m0 >= s1 - tol {
        return Err(MortarError::ContactSearch("slave and master sides do not overlap".into()));
    }
    if m0 > s0 + tol || m1 < s1 - tol {
        return Err(MortarError::ContactSearch(format!(
            "master side [{m0}, {m1}] does not cover slave side [{s0}, {s1}]"
        )));
    }

    let mut breaks: Vec<f64> = ts.clone();
    breaks.extend(tm.iter().copied().filter(|&t| t > s0 + tol && t < s1 - tol));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|b, a| *b - *a <= tol);

    let mut segments = Vec::with_capacity(breaks.len());
    let (mut se, mut me) = (0, 0);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        while se + 2 < ts.len() && ts[se + 1] <= mid {
            se += 1;
        }
        while me + 2 < tm.len() && tm[me + 1] <= mid {
            me += 1;
        }
        segments.push(MortarSegment { slave_element: se, master_element: me, a, b });
    }
    Ok(segments)
}

/// Scalar mortar matrices of one surface.
#[derive(Debug, Clone, PartialEq)]
pub struct MortarPair {
    pub surface: usize,
    pub slave_body: usize,
    pub master_body: usize,
    pub slave_nodes: Vec<usize>,
    pub master_nodes: Vec<usize>,
    /// `n_slave x n_slave`
    pub d: CsrMatrix,
    /// `n_slave x n_master`
    pub m: CsrMatrix,
}

fn linear_shape(t: f64, t0: f64, t1: f64) -> [f64; 2] {
    let xi = (t - t0) / (t1 - t0);
    [1.0 - xi, xi]
}

/// Integrates `D` and `M` for surface number `surface` of a model.
pub fn assemble_mortar(
    surface: usize,
    spec: &SurfaceSpec,
    bodies: &[Mesh2D],
    rule: QuadratureRule,
) -> Result<MortarPair, MortarError> {
    let body = |b: usize| {
        bodies.get(b).ok_or_else(|| MortarError::ContactSearch(format!("no body {b}")))
    };
    let (smesh, mmesh) = (body(spec.slave_body)?, body(spec.master_body)?);
    let coords = |mesh: &Mesh2D, ids: &[usize]| -> Result<Vec<Point>, MortarError> {
        ids.iter()
            .map(|&v| {
                mesh.nodes().get(v).copied().ok_or_else(|| {
                    MortarError::ContactSearch(format!("surface node {v} missing from its body"))
                })
            })
            .collect()
    };
    let sp = coords(smesh, &spec.slave_nodes)?;
    let mp = coords(mmesh, &spec.master_nodes)?;
    let segments = project_segments(&sp, &mp, &spec.line)?;
    let ts: Vec<f64> = sp.iter().map(|&p| spec.line.parameter(p)).collect();
    let tm: Vec<f64> = mp.iter().map(|&p| spec.line.parameter(p)).collect();

    let (ns, nm) = (sp.len(), mp.len());
    let mut d_trip = Vec::with_capacity(4 * segments.len());
    let mut m_trip = Vec::with_capacity(4 * segments.len());
    for seg in &segments {
        let (se, me) = (seg.slave_element, seg.master_element);
        let half = 0.5 * (seg.b - seg.a);
        for &(xi, w) in rule.points() {
            let t = seg.a + half * (xi + 1.0);
            let ns_val = linear_shape(t, ts[se], ts[se + 1]);
            let nm_val = linear_shape(t, tm[me], tm[me + 1]);
            for (j, phi) in ns_val.iter().enumerate() {
                for (k, n) in ns_val.iter().enumerate().skip(j) {
                    let v = w * half * phi * n;
                    d_trip.push((se + j, se + k, v));
                    if k != j {
                        d_trip.push((se + k, se + j, v));
                    }
                }
                for (l, n) in nm_val.iter().enumerate() {
                    m_trip.push((se + j, me + l, w * half * phi * n));
                }
            }
        }
    }
    let build = |rows, cols, trip: &[(usize, usize, f64)]| {
        CsrMatrix::from_triplets(rows, cols, trip).map_err(|e| MortarError::Geometry(e.to_string()))
    };
    Ok(MortarPair {
        surface,
        slave_body: spec.slave_body,
        master_body: spec.master_body,
        slave_nodes: spec.slave_nodes.clone(),
        master_nodes: spec.master_nodes.clone(),
        d: build(ns, ns, &d_trip)?,
        m: build(ns, nm, &m_trip)?,
    })
}

/// Result of a tridiagonal-structure check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TridiagonalCheck {
    pub is_tridiagonal: bool,
    /// Nonzero entries `(j, k)` with `|j - k| > 1`.
    pub offending: Vec<(usize, usize)>,
}

/// Checks that every nonzero of `d` sits within one position of the
/// diagonal. `block` is the number of scalar rows per node (1 for the
/// scalar mortar matrices, 2 for their expanded form).
pub fn verify_tridiagonal(d: &CsrMatrix, block: usize) -> TridiagonalCheck {
    let block = block.max(1);
    let offending: Vec<(usize, usize)> = d
        .triplets()
        .filter(|&(i, j, v)| v != 0.0 && (i / block).abs_diff(j / block) > 1)
        .map(|(i, j, _)| (i, j))
        .collect();
    TridiagonalCheck { is_tridiagonal: offending.is_empty(), offending }
}
