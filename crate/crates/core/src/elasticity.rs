//! Linear P1 plane-strain elasticity: element and body stiffness, edge
//! loads and symmetric Dirichlet elimination.

use std::collections::{BTreeMap, BTreeSet};

use crate::krylov::CsrMatrix;
use crate::mesh::{signed_area, ContactModel, Material, Mesh2D, Point};

/// Displacement components per node.
pub const NDIM: usize = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ElasticityError {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Plane-strain constitutive matrix acting on (exx, eyy, gxy).
pub fn constitutive_matrix(material: &Material) -> [[f64; 3]; 3] {
    let (e, nu) = (material.youngs_modulus, material.poisson_ratio);
    let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    [
        [c * (1.0 - nu), c * nu, 0.0],
        [c * nu, c * (1.0 - nu), 0.0],
        [0.0, 0.0, c * (1.0 - 2.0 * nu) / 2.0],
    ]
}

/// Element stiffness `area * B^T D B` with DOF order
/// `[u0x, u0y, u1x, u1y, u2x, u2y]`.
pub fn element_stiffness(p: &[Point; 3], material: &Material) -> Result<[[f64; 6]; 6], ElasticityError> {
    material.validate().map_err(|e| ElasticityError::InvalidArgument(e.to_string()))?;
    let area = signed_area(p);
    let scale = p.iter().flat_map(|q| q.iter()).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if !(area.abs() > 1e-14 * scale * scale) {
        return Err(ElasticityError::Geometry(format!("degenerate triangle (area {area:e})")));
    }
    // shape-function gradients times 2*area
    let mut bx = [0.0; 3];
    let mut by = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        bx[i] = p[j][1] - p[k][1];
        by[i] = p[k][0] - p[j][0];
    }
    let inv = 1.0 / (2.0 * area);
    let mut b = [[0.0; 6]; 3];
    for i in 0..3 {
        b[0][2 * i] = bx[i] * inv;
        b[1][2 * i + 1] = by[i] * inv;
        b[2][2 * i] = by[i] * inv;
        b[2][2 * i + 1] = bx[i] * inv;
    }
    let d = constitutive_matrix(material);
    let mut db = [[0.0; 6]; 3];
    for r in 0..3 {
        for c in 0..6 {
            db[r][c] = (0..3).map(|k| d[r][k] * b[k][c]).sum();
        }
    }
    let a = area.abs();
    let mut ke = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in i..6 {
            let v = a * (0..3).map(|k| b[k][i] * db[k][j]).sum::<f64>();
            ke[i][j] = v;
            ke[j][i] = v;
        }
    }
    Ok(ke)
}

/// Body stiffness in body-local numbering (`dof = 2 * node + component`).
pub fn assemble_stiffness(mesh: &Mesh2D, material: &Material) -> Result<CsrMatrix, ElasticityError> {
    let n = NDIM * mesh.node_count();
    let mut trip = Vec::with_capacity(36 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let ke = element_stiffness(&mesh.triangle_coords(t), material)?;
        let dofs: Vec<usize> = tri.iter().flat_map(|&v| [NDIM * v, NDIM * v + 1]).collect();
        for (a, &ga) in dofs.iter().enumerate() {
            for (b, &gb) in dofs.iter().enumerate() {
                trip.push((ga, gb, ke[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip).map_err(|e| ElasticityError::Config(e.to_string()))
}

/// Consistent loads for constant tractions on tagged edges: each edge of
/// length `L` gives `t * L / 2` to both endpoints.
pub fn assemble_loads(mesh: &Mesh2D, tractions: &[(&str, [f64; 2])]) -> Result<Vec<f64>, ElasticityError> {
    let mut f = vec![0.0; NDIM * mesh.node_count()];
    for &(tag, t) in tractions {
        if !mesh.has_tag(tag) {
            return Err(ElasticityError::InvalidArgument(format!("no boundary edge tagged `{tag}`")));
        }
        for e in mesh.edges_with_tag(tag) {
            let (pa, pb) = (mesh.nodes()[e.a], mesh.nodes()[e.b]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            for v in [e.a, e.b] {
                for c in 0..NDIM {
                    f[NDIM * v + c] += 0.5 * len * t[c];
                }
            }
        }
    }
    Ok(f)
}

/// Stiffness and load of one body, in body-local DOF numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct BodySystem {
    pub body: usize,
    pub k: CsrMatrix,
    pub f: Vec<f64>,
}

/// Prescribed value for a single body-local DOF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofConstraint {
    pub dof: usize,
    pub value: f64,
}

/// Symmetric elimination: constrained rows and columns are zeroed, the
/// diagonal set to one and the moved column contributions subtracted from
/// the load. DOFs in `protected` (contact-surface DOFs) cannot be
/// constrained.
pub fn apply_dirichlet(
    system: &mut BodySystem,
    constraints: &[DofConstraint],
    protected: &BTreeSet<usize>,
) -> Result<(), ElasticityError> {
    let n = system.k.nrows();
    let mut fixed: BTreeMap<usize, f64> = BTreeMap::new();
    for c in constraints {
        if c.dof >= n {
            return Err(ElasticityError::InvalidArgument(format!("DOF {} out of range", c.dof)));
        }
        if !c.value.is_finite() {
            return Err(ElasticityError::InvalidArgument(format!("non-finite value on DOF {}", c.dof)));
        }
        if protected.contains(&c.dof) {
            return Err(ElasticityError::Config(format!(
                "DOF {} lies on a contact surface and cannot carry a Dirichlet condition",
                c.dof
            )));
        }
        if let Some(prev) = fixed.insert(c.dof, c.value) {
            if prev != c.value {
                return Err(ElasticityError::Config(format!(
                    "conflicting prescribed values {prev} and {} on DOF {}",
                    c.value, c.dof
                )));
            }
        }
    }
    if fixed.is_empty() {
        return Ok(());
    }
    let mut trip = Vec::with_capacity(system.k.nnz());
    for (i, j, v) in system.k.triplets() {
        match (fixed.get(&i), fixed.get(&j)) {
            (None, None) => trip.push((i, j, v)),
            (None, Some(&g)) => system.f[i] -= v * g,
            _ => {}
        }
    }
    for (&dof, &g) in &fixed {
        trip.push((dof, dof, 1.0));
        system.f[dof] = g;
    }
    system.k = CsrMatrix::from_triplets(n, n, &trip).map_err(|e| ElasticityError::Config(e.to_string()))?;
    Ok(())
}

/// Turns the model's tagged Dirichlet data for `body` into per-DOF
/// constraints. Nodes on any contact surface are skipped: their
/// displacement is determined through the tie, and the endpoints of a
/// contact surface frequently also touch a supported edge.
pub fn resolve_dirichlet(model: &ContactModel, body: usize) -> Vec<DofConstraint> {
    let mesh = &model.bodies[body];
    let contact = model.contact_nodes().remove(&body).unwrap_or_default();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for spec in model.dirichlet.iter().filter(|d| d.body == body) {
        for v in mesh.tagged_nodes(&spec.tag) {
            if contact.contains(&v) || !seen.insert(v) {
                continue;
            }
            let u = spec.value.value_at(mesh.nodes()[v]);
            for c in 0..NDIM {
                out.push(DofConstraint { dof: NDIM * v + c, value: u[c] });
            }
        }
    }
    out
}

/// Stiffness, loads and boundary conditions of one body of `model`.
pub fn assemble_body(model: &ContactModel, body: usize) -> Result<BodySystem, ElasticityError> {
    let mesh = model
        .bodies
        .get(body)
        .ok_or_else(|| ElasticityError::InvalidArgument(format!("no body {body}")))?;
    let k = assemble_stiffness(mesh, &model.materials[body])?;
    let loads: Vec<(&str, [f64; 2])> = model
        .tractions
        .iter()
        .filter(|t| t.body == body)
        .map(|t| (t.tag.as_str(), t.traction))
        .collect();
    let f = assemble_loads(mesh, &loads)?;
    let mut system = BodySystem { body, k, f };
    let protected: BTreeSet<usize> = model
        .contact_nodes()
        .remove(&body)
        .unwrap_or_default()
        .into_iter()
        .flat_map(|v| [NDIM * v, NDIM * v + 1])
        .collect();
    apply_dirichlet(&mut system, &resolve_dirichlet(model, body), &protected)?;
    Ok(system)
}

/// Rigid-body modes (x translation, y translation, rotation) sampled at the
/// nodes of `mesh`.
pub fn rigid_body_modes(mesh: &Mesh2D) -> [Vec<f64>; 3] {
    let n = mesh.node_count();
    let mut modes = [vec![0.0; NDIM * n], vec![0.0; NDIM * n], vec![0.0; NDIM * n]];
    for (v, p) in mesh.nodes().iter().enumerate() {
        modes[0][NDIM * v] = 1.0;
        modes[1][NDIM * v + 1] = 1.0;
        modes[2][NDIM * v] = -p[1];
        modes[2][NDIM * v + 1] = p[0];
    }
    modes
}
