//! Global DOF partitioning and assembly of the tied-contact saddle-point
//! system `[[K, G^T], [G, 0]]`.
//!
//! Unknowns are ordered as interior/free nodes, master contact nodes, slave
//! contact nodes, multipliers. Within the slave and multiplier ranges the
//! surfaces are concatenated in model order and each surface's nodes follow
//! its spatial order.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elasticity::{assemble_body, BodySystem, ElasticityError, NDIM};
use crate::krylov::CsrMatrix;
use crate::mesh::ContactModel;
use crate::mortar::{assemble_mortar, MortarError, MortarPair, QuadratureRule};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("internal consistency error: {0}")]
    Consistency(String),
}

/// One of the four unknown groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Part {
    /// Nodes not on any contact surface.
    Free,
    Master,
    Slave,
    Multiplier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum NodeRole {
    Free,
    Master,
    Slave,
}

/// Maps body-local nodes to global DOFs and records the partition ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofMap {
    /// `node_base[body][node]` is the global DOF of the x component.
    node_base: Vec<Vec<usize>>,
    free: Range<usize>,
    master: Range<usize>,
    slave: Range<usize>,
    multiplier: Range<usize>,
    /// Per surface: first global slave DOF and first multiplier DOF.
    surface_slave_start: Vec<usize>,
    surface_multiplier_start: Vec<usize>,
    surface_slave_count: Vec<usize>,
}

impl DofMap {
    pub fn dof(&self, body: usize, node: usize, component: usize) -> usize {
        self.node_base[body][node] + component
    }

    pub fn node_base(&self, body: usize) -> &[usize] {
        &self.node_base[body]
    }

    pub fn range(&self, part: Part) -> Range<usize> {
        match part {
            Part::Free => self.free.clone(),
            Part::Master => self.master.clone(),
            Part::Slave => self.slave.clone(),
            Part::Multiplier => self.multiplier.clone(),
        }
    }

    pub fn n_displacement(&self) -> usize {
        self.slave.end
    }

    pub fn n_total(&self) -> usize {
        self.multiplier.end
    }

    pub fn n_surfaces(&self) -> usize {
        self.surface_slave_count.len()
    }

    /// Global slave DOFs of surface `k`.
    pub fn surface_slave_range(&self, k: usize) -> Range<usize> {
        let s = self.surface_slave_start[k];
        s..s + NDIM * self.surface_slave_count[k]
    }

    /// Global multiplier DOFs of surface `k`.
    pub fn surface_multiplier_range(&self, k: usize) -> Range<usize> {
        let s = self.surface_multiplier_start[k];
        s..s + NDIM * self.surface_slave_count[k]
    }

    pub fn body_count(&self) -> usize {
        self.node_base.len()
    }
}

/// Splits all nodes into free, master and slave sets and numbers the DOFs.
pub fn partition_dofs(model: &ContactModel) -> Result<DofMap, SystemError> {
    let mut role: Vec<Vec<NodeRole>> =
        model.bodies.iter().map(|b| vec![NodeRole::Free; b.node_count()]).collect();
    for (k, s) in model.surfaces.iter().enumerate() {
        for &v in &s.slave_nodes {
            match role[s.slave_body][v] {
                NodeRole::Free => role[s.slave_body][v] = NodeRole::Slave,
                NodeRole::Slave => {
                    return Err(SystemError::Unsupported(format!(
                        "node {v} of body {} is a slave node of more than one surface (surface {k})",
                        s.slave_body
                    )))
                }
                NodeRole::Master => {
                    return Err(SystemError::Unsupported(format!(
                        "node {v} of body {} is both slave and master",
                        s.slave_body
                    )))
                }
            }
        }
    }
    for s in &model.surfaces {
        for &v in &s.master_nodes {
            match role[s.master_body][v] {
                NodeRole::Slave => {
                    return Err(SystemError::Unsupported(format!(
                        "node {v} of body {} is both slave and master",
                        s.master_body
                    )))
                }
                _ => role[s.master_body][v] = NodeRole::Master,
            }
        }
    }

    let mut node_base: Vec<Vec<usize>> =
        model.bodies.iter().map(|b| vec![usize::MAX; b.node_count()]).collect();
    let mut next = 0;
    for (b, roles) in role.iter().enumerate() {
        for (v, r) in roles.iter().enumerate() {
            if *r == NodeRole::Free {
                node_base[b][v] = next;
                next += NDIM;
            }
        }
    }
    let free = 0..next;
    for s in &model.surfaces {
        for &v in &s.master_nodes {
            if node_base[s.master_body][v] == usize::MAX {
                node_base[s.master_body][v] = next;
                next += NDIM;
            }
        }
    }
    let master = free.end..next;
    let mut surface_slave_start = Vec::new();
    let mut surface_slave_count = Vec::new();
    for s in &model.surfaces {
        surface_slave_start.push(next);
        surface_slave_count.push(s.slave_nodes.len());
        for &v in &s.slave_nodes {
            node_base[s.slave_body][v] = next;
            next += NDIM;
        }
    }
    let slave = master.end..next;
    let surface_multiplier_start: Vec<usize> =
        surface_slave_start.iter().map(|&s| s - slave.start + slave.end).collect();
    let multiplier = slave.end..slave.end + slave.len();
    Ok(DofMap {
        node_base,
        free,
        master,
        slave,
        multiplier,
        surface_slave_start,
        surface_multiplier_start,
        surface_slave_count,
    })
}

/// The assembled saddle-point problem together with its ingredients.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub dofmap: DofMap,
    pub mortars: Vec<MortarPair>,
}

impl SaddleSystem {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_displacement(&self) -> usize {
        self.dofmap.n_displacement()
    }

    pub fn block(&self, rows: Part, cols: Part) -> CsrMatrix {
        self.a.submatrix(self.dofmap.range(rows), self.dofmap.range(cols))
    }

    /// Multiplier rows restricted to displacement columns (`G`).
    pub fn constraint_matrix(&self) -> CsrMatrix {
        self.a.submatrix(self.dofmap.range(Part::Multiplier), 0..self.n_displacement())
    }

    /// Displacement block `K`.
    pub fn stiffness(&self) -> CsrMatrix {
        let n = self.n_displacement();
        self.a.submatrix(0..n, 0..n)
    }

    /// `||G d||_2` for a displacement vector.
    pub fn constraint_residual(&self, d: &[f64]) -> f64 {
        let g = self.constraint_matrix();
        g.spmv(&d[..self.n_displacement()]).map(|v| norm(&v)).unwrap_or(f64::INFINITY)
    }

    /// `||A x - b||_2 / ||b||_2` (absolute norm when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.a.spmv(x).expect("solution length matches the system");
        let r: f64 = ax.iter().zip(&self.b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let nb = norm(&self.b);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scatters body blocks and mortar matrices into the global saddle system.
/// Multiplier rows read `[0, -M, D]` over (free, master, slave) columns and
/// the multiplier right-hand side is zero.
pub fn assemble_saddle(
    model: &ContactModel,
    bodies: &[BodySystem],
    mortars: &[MortarPair],
    dofmap: DofMap,
) -> Result<SaddleSystem, SystemError> {
    if bodies.len() != model.bodies.len() || dofmap.body_count() != model.bodies.len() {
        return Err(SystemError::Consistency("body count mismatch".into()));
    }
    if mortars.len() != model.surfaces.len() || dofmap.n_surfaces() != model.surfaces.len() {
        return Err(SystemError::Consistency("surface count mismatch".into()));
    }
    let n = dofmap.n_total();
    let mut b = vec![0.0; n];
    let mut trip = Vec::new();
    for sys in bodies {
        let base = dofmap.node_base(sys.body);
        if sys.k.nrows() != NDIM * base.len() || sys.f.len() != sys.k.nrows() {
            return Err(SystemError::Consistency(format!("body {} block has wrong size", sys.body)));
        }
        let global = |local: usize| base[local / NDIM] + local % NDIM;
        for (i, j, v) in sys.k.triplets() {
            trip.push((global(i), global(j), v));
        }
        for (i, &v) in sys.f.iter().enumerate() {
            b[global(i)] += v;
        }
    }
    for (k, (spec, pair)) in model.surfaces.iter().zip(mortars).enumerate() {
        if pair.d.nrows() != spec.slave_nodes.len() || pair.m.ncols() != spec.master_nodes.len() {
            return Err(SystemError::Consistency(format!("surface {k} mortar size mismatch")));
        }
        let lam0 = dofmap.surface_multiplier_range(k).start;
        let mut push = |row_node: usize, col: usize, v: f64| {
            for c in 0..NDIM {
                let (r, cc) = (lam0 + NDIM * row_node + c, col + c);
                trip.push((r, cc, v));
                trip.push((cc, r, v));
            }
        };
        for (j, l, v) in pair.d.triplets() {
            push(j, dofmap.dof(spec.slave_body, spec.slave_nodes[l], 0), v);
        }
        for (j, l, v) in pair.m.triplets() {
            push(j, dofmap.dof(spec.master_body, spec.master_nodes[l], 0), -v);
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &trip).map_err(|e| SystemError::Consistency(e.to_string()))?;
    Ok(SaddleSystem { a, b, dofmap, mortars: mortars.to_vec() })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Elasticity(#[from] ElasticityError),
    #[error(transparent)]
    Mortar(#[from] MortarError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Runs body assembly, mortar integration and saddle assembly for `model`.
/// Bodies and surfaces are processed in parallel.
pub fn build_saddle(model: &ContactModel, rule: QuadratureRule) -> Result<SaddleSystem, BuildError> {
    let dofmap = partition_dofs(model)?;
    let bodies = (0..model.bodies.len())
        .into_par_iter()
        .map(|b| assemble_body(model, b))
        .collect::<Result<Vec<_>, _>>()?;
    let mortars = model
        .surfaces
        .par_iter()
        .enumerate()
        .map(|(k, s)| assemble_mortar(k, s, &model.bodies, rule))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_saddle(model, &bodies, &mortars, dofmap)?)
}

/// Displacements of every body node, `[body][node] -> (ux, uy)`.
pub fn nodal_displacements(dofmap: &DofMap, x: &[f64]) -> Vec<Vec<[f64; 2]>> {
    (0..dofmap.body_count())
        .map(|b| dofmap.node_base(b).iter().map(|&g| [x[g], x[g + 1]]).collect())
        .collect()
}

/// Part membership counts, handy for reports.
pub fn part_sizes(dofmap: &DofMap) -> BTreeMap<Part, usize> {
    [Part::Free, Part::Master, Part::Slave, Part::Multiplier]
        .into_iter()
        .map(|p| (p, dofmap.range(p).len()))
        .collect()
}
