//! Structured triangular meshes, the three benchmark contact models and
//! ordering of contact-surface nodes along straight interfaces.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// Relative geometric tolerance for on-line and coincidence checks; it is
/// scaled by the domain diameter.
pub const GEOMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("mesh parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: String,
}

/// Triangle mesh with tagged boundary edges. Triangles are counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh2D {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
}

pub fn signed_area(p: &[Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

impl Mesh2D {
    /// Validates indices, orientation and that every boundary edge is an
    /// edge of exactly one triangle.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let n = nodes.len();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(MeshError::Topology(format!("triangle {t} references a missing node")));
            }
            let area = signed_area(&tri.map(|v| nodes[v]));
            if !(area > 0.0) {
                return Err(MeshError::Geometry(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for e in &boundary_edges {
            if e.a >= n || e.b >= n {
                return Err(MeshError::Topology(format!("edge {}-{} out of range", e.a, e.b)));
            }
            if edge_count.get(&(e.a.min(e.b), e.a.max(e.b))) != Some(&1) {
                return Err(MeshError::Topology(format!(
                    "boundary edge {}-{} is not on exactly one triangle",
                    e.a, e.b
                )));
            }
        }
        Ok(Self { nodes, triangles, boundary_edges })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.nodes[v])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| signed_area(&self.triangle_coords(t))).sum()
    }

    pub fn edges_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a BoundaryEdge> + 'a {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.edges_with_tag(tag).next().is_some()
    }

    /// Sorted, deduplicated nodes touched by edges carrying `tag`.
    pub fn tagged_nodes(&self, tag: &str) -> BTreeSet<usize> {
        self.edges_with_tag(tag).flat_map(|e| [e.a, e.b]).collect()
    }

    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.nodes {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    /// Plain-text export: `NODES`, `TRIANGLES` and `EDGES` sections.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "NODES {}", self.nodes.len()).unwrap();
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(s, "{i} {} {}", p[0], p[1]).unwrap();
        }
        writeln!(s, "TRIANGLES {}", self.triangles.len()).unwrap();
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(s, "{i} {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        writeln!(s, "EDGES {}", self.boundary_edges.len()).unwrap();
        for e in &self.boundary_edges {
            writeln!(s, "{} {} {}", e.a, e.b, e.tag).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, MeshError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut section = |name: &str| -> Result<Vec<Vec<String>>, MeshError> {
            let head = lines.next().ok_or_else(|| MeshError::Parse(format!("missing {name}")))?;
            let mut parts = head.split_whitespace();
            if parts.next() != Some(name) {
                return Err(MeshError::Parse(format!("expected {name} section, got `{head}`")));
            }
            let count: usize = parts
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| MeshError::Parse(format!("bad {name} count")))?;
            (0..count)
                .map(|_| {
                    lines
                        .next()
                        .map(|l| l.split_whitespace().map(str::to_owned).collect())
                        .ok_or_else(|| MeshError::Parse(format!("truncated {name} section")))
                })
                .collect()
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| MeshError::Parse(format!("bad number `{s}`")));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| MeshError::Parse(format!("bad index `{s}`")));

        let nodes = section("NODES")?
            .iter()
            .map(|f| match f.as_slice() {
                [_, x, y] => Ok([num(x)?, num(y)?]),
                _ => Err(MeshError::Parse("node line needs `id x y`".into())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let triangles = section("TRIANGLES")?
            .iter()
            .map(|f| match f.as_slice() {
                [_, a, b, c] => Ok([idx(a)?, idx(b)?, idx(c)?]),
                _ => Err(MeshError::Parse("triangle line needs `id a b c`".into())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let edges = section("EDGES")?
            .iter()
            .map(|f| match f.as_slice() {
                [a, b, tag] => Ok(BoundaryEdge { a: idx(a)?, b: idx(b)?, tag: tag.clone() }),
                _ => Err(MeshError::Parse("edge line needs `a b tag`".into())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(nodes, triangles, edges)
    }
}

/// Structured `nx x ny` grid over a rectangle, each cell cut along its
/// lower-left to upper-right diagonal. Boundary edges are tagged `bottom`,
/// `right`, `top` and `left` and run counter-clockwise.
pub fn generate_rect_mesh(
    origin: Point,
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
) -> Result<Mesh2D, MeshError> {
    if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(MeshError::InvalidArgument(format!(
            "rectangle dimensions must be positive (got {width} x {height})"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidArgument("cell counts must be at least 1".into()));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([
                origin[0] + width * i as f64 / nx as f64,
                origin[1] + height * j as f64 / ny as f64,
            ]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (n0, n1, n2, n3) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([n0, n1, n2]);
            triangles.push([n0, n2, n3]);
        }
    }
    let mut edges = Vec::with_capacity(2 * (nx + ny));
    let mut push = |a, b, tag: &str| edges.push(BoundaryEdge { a, b, tag: tag.into() });
    for i in 0..nx {
        push(id(i, 0), id(i + 1, 0), "bottom");
    }
    for j in 0..ny {
        push(id(nx, j), id(nx, j + 1), "right");
    }
    for i in (0..nx).rev() {
        push(id(i + 1, ny), id(i, ny), "top");
    }
    for j in (0..ny).rev() {
        push(id(0, j + 1), id(0, j), "left");
    }
    Mesh2D::new(nodes, triangles, edges)
}

/// Straight interface line through `point` with unit direction `dir`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub point: Point,
    pub dir: Point,
}

impl Line {
    pub fn new(point: Point, dir: Point) -> Result<Self, MeshError> {
        let len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        if !(len > 0.0) || !len.is_finite() {
            return Err(MeshError::InvalidArgument("line direction must be nonzero".into()));
        }
        Ok(Self { point, dir: [dir[0] / len, dir[1] / len] })
    }

    /// Arc-length coordinate of the orthogonal projection of `p`.
    pub fn parameter(&self, p: Point) -> f64 {
        (p[0] - self.point[0]) * self.dir[0] + (p[1] - self.point[1]) * self.dir[1]
    }

    pub fn distance(&self, p: Point) -> f64 {
        ((p[0] - self.point[0]) * self.dir[1] - (p[1] - self.point[1]) * self.dir[0]).abs()
    }
}

/// Nodes of the edges tagged `tag`, ordered by arc length along `line`.
/// Consecutive output nodes are connected by a tagged edge.
pub fn extract_surface_nodes(mesh: &Mesh2D, tag: &str, line: &Line) -> Result<Vec<usize>, MeshError> {
    let tagged = mesh.tagged_nodes(tag);
    if tagged.is_empty() {
        return Err(MeshError::InvalidArgument(format!("no boundary edge tagged `{tag}`")));
    }
    let tol = GEOMETRY_TOL * mesh.diameter().max(f64::MIN_POSITIVE);
    let mut keyed = Vec::with_capacity(tagged.len());
    for &v in &tagged {
        let p = mesh.nodes()[v];
        let d = line.distance(p);
        if d > tol {
            return Err(MeshError::Geometry(format!(
                "node {v} is {d:e} off the interface line"
            )));
        }
        keyed.push((line.parameter(p), v));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in keyed.windows(2) {
        if w[1].0 - w[0].0 <= tol {
            return Err(MeshError::Geometry(format!(
                "nodes {} and {} coincide along the interface",
                w[0].1, w[1].1
            )));
        }
    }
    let adjacent: BTreeSet<(usize, usize)> = mesh
        .edges_with_tag(tag)
        .map(|e| (e.a.min(e.b), e.a.max(e.b)))
        .collect();
    for w in keyed.windows(2) {
        let (a, b) = (w[0].1, w[1].1);
        if !adjacent.contains(&(a.min(b), a.max(b))) {
            return Err(MeshError::Topology(format!(
                "surface `{tag}` is disconnected between nodes {a} and {b}"
            )));
        }
    }
    Ok(keyed.into_iter().map(|(_, v)| v).collect())
}

/// Plane-strain isotropic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl Material {
    /// E = 20 N/m^2, nu = 0.3, as used by all benchmark models.
    pub const BENCHMARK: Self = Self { youngs_modulus: 20.0, poisson_ratio: 0.3 };

    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.youngs_modulus > 0.0) || !self.youngs_modulus.is_finite() {
            return Err(MeshError::InvalidArgument("Young's modulus must be positive".into()));
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return Err(MeshError::InvalidArgument("Poisson ratio must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Prescribed displacement on a tagged boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prescribed {
    Constant([f64; 2]),
    /// `u(x) = gradient * x + offset`
    Affine { gradient: [[f64; 2]; 2], offset: [f64; 2] },
}

impl Prescribed {
    pub fn value_at(&self, p: Point) -> [f64; 2] {
        match *self {
            Self::Constant(v) => v,
            Self::Affine { gradient: g, offset: c } => [
                g[0][0] * p[0] + g[0][1] * p[1] + c[0],
                g[1][0] * p[0] + g[1][1] * p[1] + c[1],
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletSpec {
    pub body: usize,
    pub tag: String,
    pub value: Prescribed,
}

/// Constant traction (force per unit length) on a tagged boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractionSpec {
    pub body: usize,
    pub tag: String,
    pub traction: [f64; 2],
}

/// One tied interface: spatially ordered slave and master node lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub slave_body: usize,
    pub master_body: usize,
    pub slave_nodes: Vec<usize>,
    pub master_nodes: Vec<usize>,
    pub line: Line,
}

impl SurfaceSpec {
    /// Resolves both sides from boundary tags.
    pub fn from_tags(
        bodies: &[Mesh2D],
        slave: (usize, &str),
        master: (usize, &str),
        line: Line,
    ) -> Result<Self, MeshError> {
        for body in [slave.0, master.0] {
            if body >= bodies.len() {
                return Err(MeshError::InvalidArgument(format!("no body {body}")));
            }
        }
        Ok(Self {
            slave_body: slave.0,
            master_body: master.0,
            slave_nodes: extract_surface_nodes(&bodies[slave.0], slave.1, &line)?,
            master_nodes: extract_surface_nodes(&bodies[master.0], master.1, &line)?,
            line,
        })
    }
}

/// Bodies, interfaces, materials and boundary conditions of a tied-contact
/// problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactModel {
    pub bodies: Vec<Mesh2D>,
    pub surfaces: Vec<SurfaceSpec>,
    pub materials: Vec<Material>,
    pub dirichlet: Vec<DirichletSpec>,
    pub tractions: Vec<TractionSpec>,
}

impl ContactModel {
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.materials.len() != self.bodies.len() {
            return Err(MeshError::InvalidArgument("one material per body required".into()));
        }
        for m in &self.materials {
            m.validate()?;
        }
        let mut pairs = BTreeSet::new();
        for (k, s) in self.surfaces.iter().enumerate() {
            if s.slave_body >= self.bodies.len() || s.master_body >= self.bodies.len() {
                return Err(MeshError::InvalidArgument(format!("surface {k}: unknown body")));
            }
            if s.slave_body == s.master_body {
                return Err(MeshError::InvalidArgument(format!("surface {k}: self contact")));
            }
            if !pairs.insert((s.slave_body, s.master_body)) {
                return Err(MeshError::InvalidArgument(format!(
                    "surface {k}: duplicate (slave, master) pair"
                )));
            }
            if s.slave_nodes.len() < 2 || s.master_nodes.len() < 2 {
                return Err(MeshError::InvalidArgument(format!(
                    "surface {k}: each side needs at least two nodes"
                )));
            }
        }
        for d in &self.dirichlet {
            self.check_tag(d.body, &d.tag)?;
        }
        for t in &self.tractions {
            self.check_tag(t.body, &t.tag)?;
        }
        Ok(())
    }

    fn check_tag(&self, body: usize, tag: &str) -> Result<(), MeshError> {
        match self.bodies.get(body) {
            Some(mesh) if mesh.has_tag(tag) => Ok(()),
            Some(_) => Err(MeshError::InvalidArgument(format!("body {body} has no tag `{tag}`"))),
            None => Err(MeshError::InvalidArgument(format!("no body {body}"))),
        }
    }

    /// Nodes of each body that sit on the slave or master side of any
    /// surface, keyed by body.
    pub fn contact_nodes(&self) -> BTreeMap<usize, BTreeSet<usize>> {
        let mut out: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for s in &self.surfaces {
            out.entry(s.slave_body).or_default().extend(&s.slave_nodes);
            out.entry(s.master_body).or_default().extend(&s.master_nodes);
        }
        out
    }

    pub fn total_nodes(&self) -> usize {
        self.bodies.iter().map(Mesh2D::node_count).sum()
    }
}

/// Cells per unit length on slave bodies for a given master resolution.
pub fn slave_resolution(resolution: usize, mismatch: f64) -> Result<usize, MeshError> {
    if resolution == 0 {
        return Err(MeshError::InvalidArgument("resolution must be at least 1".into()));
    }
    if !(mismatch > 0.0) || !mismatch.is_finite() {
        return Err(MeshError::InvalidArgument(format!("mismatch must be positive (got {mismatch})")));
    }
    let n = (resolution as f64 * mismatch).round();
    if n < 1.0 {
        return Err(MeshError::InvalidArgument(format!(
            "mismatch {mismatch} leaves fewer than two slave surface nodes"
        )));
    }
    Ok(n as usize)
}

/// Builds benchmark model 1, 2 or 3 out of unit squares.
///
/// * Model 1: three bodies in a row, middle one master; left side of the
///   left body fixed, rightward traction 10 on the right side of the right body.
/// * Model 2: same layout; bottoms fixed, downward traction 10 on every top.
/// * Model 3: two stacked bodies, top one master; bottom of the lower body
///   fixed, downward traction 1 on the top of the upper body.
///
/// Master bodies are meshed with `resolution` cells per unit length, slave
/// bodies with `round(resolution * mismatch)`.
pub fn build_contact_model(model_id: u8, resolution: usize, mismatch: f64) -> Result<ContactModel, MeshError> {
    let ns = slave_resolution(resolution, mismatch)?;
    let nm = resolution;
    let square = |x0: f64, y0: f64, n: usize| generate_rect_mesh([x0, y0], 1.0, 1.0, n, n);
    let vertical = |x: f64| Line::new([x, 0.0], [0.0, 1.0]);
    let fixed = |body: usize, tag: &str| DirichletSpec {
        body,
        tag: tag.into(),
        value: Prescribed::Constant([0.0, 0.0]),
    };
    let load = |body: usize, tag: &str, traction: [f64; 2]| TractionSpec {
        body,
        tag: tag.into(),
        traction,
    };

    let (bodies, surfaces, dirichlet, tractions) = match model_id {
        1 | 2 => {
            let bodies = vec![square(0.0, 0.0, ns)?, square(1.0, 0.0, nm)?, square(2.0, 0.0, ns)?];
            let surfaces = vec![
                SurfaceSpec::from_tags(&bodies, (0, "right"), (1, "left"), vertical(1.0)?)?,
                SurfaceSpec::from_tags(&bodies, (2, "left"), (1, "right"), vertical(2.0)?)?,
            ];
            if model_id == 1 {
                (bodies, surfaces, vec![fixed(0, "left")], vec![load(2, "right", [10.0, 0.0])])
            } else {
                (
                    bodies,
                    surfaces,
                    (0..3).map(|b| fixed(b, "bottom")).collect(),
                    (0..3).map(|b| load(b, "top", [0.0, -10.0])).collect(),
                )
            }
        }
        3 => {
            let bodies = vec![square(0.0, 0.0, ns)?, square(0.0, 1.0, nm)?];
            let surfaces = vec![SurfaceSpec::from_tags(
                &bodies,
                (0, "top"),
                (1, "bottom"),
                Line::new([0.0, 1.0], [1.0, 0.0])?,
            )?];
            (bodies, surfaces, vec![fixed(0, "bottom")], vec![load(1, "top", [0.0, -1.0])])
        }
        other => {
            return Err(MeshError::InvalidArgument(format!(
                "unknown model id {other} (expected 1, 2 or 3)"
            )))
        }
    };
    let materials = vec![Material::BENCHMARK; bodies.len()];
    let model = ContactModel { bodies, surfaces, materials, dirichlet, tractions };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_grid() {
        let m = generate_rect_mesh([0.0, 0.0], 1.0, 1.0, 1, 1).unwrap();
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.triangles().len(), 2);
        assert_eq!(m.boundary_edges().len(), 4);
    }

    #[test]
    fn two_by_one_area() {
        let m = generate_rect_mesh([0.0, 0.0], 2.0, 1.0, 2, 1).unwrap();
        assert_eq!(m.node_count(), 6);
        assert_eq!(m.triangles().len(), 4);
        assert_eq!(m.total_area(), 2.0);
    }

    #[test]
    fn refined_unit_square_area() {
        let m = generate_rect_mesh([0.0, 0.0], 1.0, 1.0, 4, 4).unwrap();
        assert!((m.total_area() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            generate_rect_mesh([0.0, 0.0], 0.0, 1.0, 1, 1),
            Err(MeshError::InvalidArgument(_))
        ));
        assert!(generate_rect_mesh([0.0, 0.0], 1.0, -1.0, 1, 1).is_err());
        assert!(generate_rect_mesh([0.0, 0.0], 1.0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn mesh_validation_catches_clockwise_triangle() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            Mesh2D::new(nodes, vec![[0, 2, 1]], vec![]),
            Err(MeshError::Geometry(_))
        ));
    }

    #[test]
    fn mesh_validation_catches_interior_boundary_edge() {
        let m = generate_rect_mesh([0.0, 0.0], 1.0, 1.0, 1, 1).unwrap();
        // the diagonal 0-3 is shared by both triangles
        let mut edges = m.boundary_edges().to_vec();
        edges.push(BoundaryEdge { a: 0, b: 3, tag: "x".into() });
        assert!(matches!(
            Mesh2D::new(m.nodes().to_vec(), m.triangles().to_vec(), edges),
            Err(MeshError::Topology(_))
        ));
    }

    fn strip(xs: &[f64]) -> Mesh2D {
        // a row of quads whose top nodes carry the given x coordinates,
        // numbered in the given (possibly scrambled) order
        let n = xs.len();
        let mut nodes: Vec<Point> = xs.iter().map(|&x| [x, 1.0]).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        for &k in &order {
            nodes.push([xs[k], 0.0]);
        }
        let bottom = |r: usize| n + r;
        let mut tris = Vec::new();
        let mut edges = Vec::new();
        for r in 0..n - 1 {
            let (tl, tr) = (order[r], order[r + 1]);
            tris.push([bottom(r), bottom(r + 1), tr]);
            tris.push([bottom(r), tr, tl]);
            edges.push(BoundaryEdge { a: tr, b: tl, tag: "top".into() });
            edges.push(BoundaryEdge { a: bottom(r), b: bottom(r + 1), tag: "bottom".into() });
        }
        Mesh2D::new(nodes, tris, edges).unwrap()
    }

    #[test]
    fn surface_nodes_sorted_by_coordinate() {
        let m = strip(&[0.5, 0.0, 1.0]);
        let line = Line::new([0.0, 1.0], [1.0, 0.0]).unwrap();
        assert_eq!(extract_surface_nodes(&m, "top", &line).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn surface_ordering_is_idempotent() {
        let m = strip(&[0.0, 0.5, 1.0]);
        let line = Line::new([0.0, 1.0], [1.0, 0.0]).unwrap();
        assert_eq!(extract_surface_nodes(&m, "top", &line).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn scrambled_five_node_surface_is_restored() {
        // spatial position k holds global node number {4,1,5,2,3}[k] (1-based)
        let numbering = [4usize, 1, 5, 2, 3];
        let mut xs = vec![0.0; 5];
        for (pos, &id) in numbering.iter().enumerate() {
            xs[id - 1] = pos as f64 * 0.25;
        }
        let m = strip(&xs);
        let line = Line::new([0.0, 1.0], [1.0, 0.0]).unwrap();
        let order = extract_surface_nodes(&m, "top", &line).unwrap();
        assert_eq!(order, numbering.iter().map(|id| id - 1).collect::<Vec<_>>());
    }

    #[test]
    fn off_line_node_is_geometry_error() {
        let m = generate_rect_mesh([0.0, 0.0], 1.0, 1.0, 2, 2).unwrap();
        let slanted = Line::new([0.0, 1.0], [1.0, 0.1]).unwrap();
        assert!(matches!(extract_surface_nodes(&m, "top", &slanted), Err(MeshError::Geometry(_))));
    }

    #[test]
    fn disconnected_surface_is_topology_error() {
        let m = generate_rect_mesh([0.0, 0.0], 1.0, 1.0, 3, 1).unwrap();
        let mut edges = m.boundary_edges().to_vec();
        // retag the two outer top edges only, leaving a gap in the middle
        for (k, e) in edges.iter_mut().filter(|e| e.tag == "top").enumerate() {
            if k != 1 {
                e.tag = "gap".into();
            }
        }
        let m = Mesh2D::new(m.nodes().to_vec(), m.triangles().to_vec(), edges).unwrap();
        let line = Line::new([0.0, 1.0], [1.0, 0.0]).unwrap();
        assert!(matches!(extract_surface_nodes(&m, "gap", &line), Err(MeshError::Topology(_))));
    }

    #[test]
    fn missing_tag_is_invalid_argument() {
        let m = generate_rect_mesh([0.0, 0.0], 1.0, 1.0, 1, 1).unwrap();
        let line = Line::new([0.0, 1.0], [1.0, 0.0]).unwrap();
        assert!(matches!(
            extract_surface_nodes(&m, "contact", &line),
            Err(MeshError::InvalidArgument(_))
        ));
    }

    #[test]
    fn model_three_matching() {
        let m = build_contact_model(3, 2, 1.0).unwrap();
        assert_eq!(m.bodies.len(), 2);
        assert_eq!(m.surfaces.len(), 1);
        let s = &m.surfaces[0];
        assert_eq!(s.slave_nodes.len(), s.master_nodes.len());
        for (a, b) in s.slave_nodes.iter().zip(&s.master_nodes) {
            let (p, q) = (m.bodies[0].nodes()[*a], m.bodies[1].nodes()[*b]);
            assert!((p[0] - q[0]).abs() <= 1e-14 && (p[1] - q[1]).abs() <= 1e-14);
        }
    }

    #[test]
    fn model_one_non_matching() {
        let m = build_contact_model(1, 2, 1.5).unwrap();
        assert_eq!(m.bodies.len(), 3);
        assert_eq!(m.surfaces.len(), 2);
        for s in &m.surfaces {
            assert!(s.slave_nodes.len() > s.master_nodes.len());
            assert_eq!(s.master_body, 1);
        }
        assert_eq!(m.materials[0], Material { youngs_modulus: 20.0, poisson_ratio: 0.3 });
    }

    #[test]
    fn model_two_every_body_supported() {
        for res in [1, 3] {
            let m = build_contact_model(2, res, 1.0).unwrap();
            for b in 0..3 {
                assert!(m.dirichlet.iter().any(|d| d.body == b));
            }
        }
    }

    #[test]
    fn unknown_model_rejected() {
        assert!(matches!(build_contact_model(4, 2, 1.0), Err(MeshError::InvalidArgument(_))));
        assert!(build_contact_model(1, 0, 1.0).is_err());
        assert!(build_contact_model(1, 2, 0.0).is_err());
        assert!(build_contact_model(1, 2, 0.1).is_err());
    }

    #[test]
    fn text_round_trip_is_byte_identical() {
        let m = generate_rect_mesh([0.1, -0.3], 1.7, 0.9, 3, 2).unwrap();
        let text = m.to_text();
        let back = Mesh2D::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
        assert!(text.starts_with("NODES 12\n0 0.1 -0.3\n"));
    }
}
