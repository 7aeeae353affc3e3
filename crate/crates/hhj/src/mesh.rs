//! Conforming triangulations with newest-vertex-bisection refinement.
//!
//! A [`Mesh`] is immutable after construction; refinement returns a new
//! mesh. Every edge carries a fixed unit normal (outward on the boundary)
//! and the counterclockwise tangent obtained by rotating the normal by
//! +90 degrees. Element and edge geometry is precomputed.

use std::collections::HashMap;
use std::io::Write;

use crate::{HhjError, Result};

/// A point of the plate midsurface.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Rotation by +90 degrees (counterclockwise).
    pub fn rot90(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn midpoint(self, o: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }

    pub fn dist(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }
}

/// Boundary condition class of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryLabel {
    Clamped,
    SimplySupported,
    Free,
    Interior,
}

#[derive(Debug, Clone)]
pub struct Triangle {
    /// Vertex indices in counterclockwise order.
    pub v: [usize; 3],
    /// Local index of the refinement edge (edge `k` is opposite vertex `k`).
    pub refine_edge: u8,
    /// Bisection depth since the initial mesh.
    pub generation: u32,
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoint vertex indices, `v[0] < v[1]`.
    pub v: [usize; 2],
    /// Fixed unit normal; outward for boundary edges.
    pub normal: Point2,
    /// Unit tangent, `normal` rotated by +90 degrees.
    pub tangent: Point2,
    pub label: BoundaryLabel,
    /// Triangle on the `+normal` side, if any.
    pub tri_plus: Option<usize>,
    /// Triangle on the `-normal` side, if any.
    pub tri_minus: Option<usize>,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.label != BoundaryLabel::Interior
    }

    pub fn midpoint_of(&self, vertices: &[Point2]) -> Point2 {
        vertices[self.v[0]].midpoint(vertices[self.v[1]])
    }
}

/// Built-in computational domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainName {
    /// `[-1,1]^2` minus `[0,1] x [-1,0]`.
    LShape,
    /// `[0,1]^2`.
    UnitSquare,
}

/// Built-in boundary labelings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcScheme {
    /// Every boundary edge clamped.
    AllClamped,
    /// The two reentrant segments of the L-shape free, the rest simply
    /// supported.
    LShapeMixed,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// `tri_edges[t][k]` is the global edge opposite local vertex `k`.
    pub tri_edges: Vec<[usize; 3]>,
    /// Triangles incident to each vertex, ascending.
    pub vertex_tris: Vec<Vec<usize>>,
    pub boundary_vertex: Vec<bool>,
    area: Vec<f64>,
    h_t: Vec<f64>,
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh from positively oriented triangles.
    ///
    /// `labeler` is consulted for each boundary edge (given its two
    /// endpoints). Refinement edges are initialized to the longest edge of
    /// each triangle, ties broken by the smallest opposite-vertex index.
    pub fn from_triangles(
        vertices: Vec<Point2>,
        tris: Vec<[usize; 3]>,
        labeler: &dyn Fn(Point2, Point2) -> BoundaryLabel,
    ) -> Result<Mesh> {
        let tagged = tris
            .into_iter()
            .map(|v| Triangle {
                v,
                refine_edge: 0,
                generation: 0,
            })
            .collect();
        let mut mesh = Mesh::assemble(vertices, tagged, labeler)?;
        for t in 0..mesh.triangles.len() {
            mesh.triangles[t].refine_edge = mesh.longest_edge_local(t);
        }
        Ok(mesh)
    }

    fn longest_edge_local(&self, t: usize) -> u8 {
        let tri = &self.triangles[t];
        let mut best = 0usize;
        let mut best_len = -1.0f64;
        for k in 0..3 {
            let a = self.vertices[tri.v[(k + 1) % 3]];
            let b = self.vertices[tri.v[(k + 2) % 3]];
            let len = a.dist(b);
            let better = len > best_len + 1e-14 * (1.0 + best_len)
                || ((len - best_len).abs() <= 1e-14 * (1.0 + best_len)
                    && tri.v[k] < tri.v[best]);
            if better {
                best = k;
                best_len = len;
            }
        }
        best as u8
    }

    /// Core constructor: derives edges, adjacency, geometry, and labels.
    fn assemble(
        vertices: Vec<Point2>,
        triangles: Vec<Triangle>,
        labeler: &dyn Fn(Point2, Point2) -> BoundaryLabel,
    ) -> Result<Mesh> {
        for p in &vertices {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(HhjError::InvalidInput("non-finite vertex".into()));
            }
        }
        let nv = vertices.len();
        let nt = triangles.len();
        let mut area = Vec::with_capacity(nt);
        for (t, tri) in triangles.iter().enumerate() {
            for &vi in &tri.v {
                if vi >= nv {
                    return Err(HhjError::InvalidInput(format!(
                        "triangle {t} references vertex {vi} out of range"
                    )));
                }
            }
            let [a, b, c] = tri.v.map(|i| vertices[i]);
            let signed = 0.5 * b.sub(a).cross(c.sub(a));
            if signed <= 0.0 {
                return Err(HhjError::DegenerateGeometry(format!(
                    "triangle {t} has non-positive signed area {signed:.3e}"
                )));
            }
            area.push(signed);
        }

        // Edge table in first-encounter order (triangle index, then local
        // edge 0,1,2) so that construction is deterministic.
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_verts: Vec<(usize, usize)> = Vec::new();
        let mut incident: Vec<Vec<usize>> = Vec::new();
        let mut tri_edges = vec![[0usize; 3]; nt];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let key = sorted_pair(tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edge_verts.push(key);
                    incident.push(Vec::new());
                    edge_verts.len() - 1
                });
                incident[e].push(t);
                tri_edges[t][k] = e;
            }
        }

        let mut edges = Vec::with_capacity(edge_verts.len());
        for (e, &(a, b)) in edge_verts.iter().enumerate() {
            let inc = &incident[e];
            if inc.len() > 2 {
                return Err(HhjError::InvalidInput(format!(
                    "edge ({a},{b}) shared by {} triangles",
                    inc.len()
                )));
            }
            let pa = vertices[a];
            let pb = vertices[b];
            let dir = pb.sub(pa);
            let length = dir.norm();
            if length == 0.0 {
                return Err(HhjError::DegenerateGeometry(format!(
                    "zero-length edge ({a},{b})"
                )));
            }
            let mut tangent = dir.scale(1.0 / length);
            // tangent = normal rotated by +90 deg  =>  normal = tangent rotated by -90 deg
            let mut normal = Point2::new(tangent.y, -tangent.x);
            let mid = pa.midpoint(pb);
            let side = |t: usize| -> f64 {
                let tv = triangles[t].v;
                let centroid = vertices[tv[0]]
                    .add(vertices[tv[1]])
                    .add(vertices[tv[2]])
                    .scale(1.0 / 3.0);
                normal.dot(centroid.sub(mid))
            };
            let (label, tri_plus, tri_minus);
            if inc.len() == 1 {
                // Boundary: force the normal outward.
                if side(inc[0]) > 0.0 {
                    normal = normal.scale(-1.0);
                    tangent = tangent.scale(-1.0);
                }
                label = labeler(pa, pb);
                if label == BoundaryLabel::Interior {
                    return Err(HhjError::InvalidInput(format!(
                        "labeler returned Interior for boundary edge ({a},{b})"
                    )));
                }
                tri_plus = None;
                tri_minus = Some(inc[0]);
            } else {
                label = BoundaryLabel::Interior;
                let (s0, s1) = (side(inc[0]), side(inc[1]));
                if s0 > 0.0 && s1 < 0.0 {
                    tri_plus = Some(inc[0]);
                    tri_minus = Some(inc[1]);
                } else if s0 < 0.0 && s1 > 0.0 {
                    tri_plus = Some(inc[1]);
                    tri_minus = Some(inc[0]);
                } else {
                    return Err(HhjError::DegenerateGeometry(format!(
                        "triangles {} and {} lie on the same side of edge ({a},{b})",
                        inc[0], inc[1]
                    )));
                }
            }
            edges.push(Edge {
                v: [a, b],
                normal,
                tangent,
                label,
                tri_plus,
                tri_minus,
                length,
            });
        }

        let mut vertex_tris = vec![Vec::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &vi in &tri.v {
                vertex_tris[vi].push(t);
            }
        }
        let mut boundary_vertex = vec![false; nv];
        for e in &edges {
            if e.is_boundary() {
                boundary_vertex[e.v[0]] = true;
                boundary_vertex[e.v[1]] = true;
            }
        }

        let h_t = area.iter().map(|a| a.sqrt()).collect();
        Ok(Mesh {
            vertices,
            triangles,
            edges,
            tri_edges,
            vertex_tris,
            boundary_vertex,
            area,
            h_t,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.area[t]
    }

    /// Mesh size of an element, `h_T = area(T)^(1/2)`.
    pub fn h_t(&self, t: usize) -> f64 {
        self.h_t[t]
    }

    pub fn h_max(&self) -> f64 {
        self.h_t.iter().cloned().fold(0.0, f64::max)
    }

    pub fn h_e(&self, e: usize) -> f64 {
        self.edges[e].length
    }

    pub fn tri_points(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].v.map(|i| self.vertices[i])
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.tri_points(t);
        a.add(b).add(c).scale(1.0 / 3.0)
    }

    /// Sign `s` such that `s * normal(e)` is the outward normal of
    /// triangle `t` on its local edge `k`.
    pub fn outward_sign(&self, t: usize, k: usize) -> f64 {
        let e = &self.edges[self.tri_edges[t][k]];
        if e.tri_minus == Some(t) {
            1.0
        } else {
            -1.0
        }
    }

    /// Barycentric coordinates of `x` in triangle `t`.
    pub fn barycentric(&self, t: usize, x: Point2) -> [f64; 3] {
        let [a, b, c] = self.tri_points(t);
        let full = 2.0 * self.area[t];
        let l0 = b.sub(x).cross(c.sub(x)) / full;
        let l1 = c.sub(x).cross(a.sub(x)) / full;
        let l2 = a.sub(x).cross(b.sub(x)) / full;
        [l0, l1, l2]
    }

    /// Gradients of the barycentric coordinates (constant per element).
    pub fn bary_grads(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.tri_points(t);
        let full = 2.0 * self.area[t];
        // grad lambda_k is the inward rotation of the opposite edge vector
        [
            c.sub(b).rot90().scale(1.0 / full),
            a.sub(c).rot90().scale(1.0 / full),
            b.sub(a).rot90().scale(1.0 / full),
        ]
    }

    pub fn point_at(&self, t: usize, bary: [f64; 3]) -> Point2 {
        let [a, b, c] = self.tri_points(t);
        a.scale(bary[0]).add(b.scale(bary[1])).add(c.scale(bary[2]))
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.tri_points(t);
            for k in 0..3 {
                let u = p[(k + 1) % 3].sub(p[k]);
                let v = p[(k + 2) % 3].sub(p[k]);
                let angle = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
                min = min.min(angle);
            }
        }
        min
    }

    /// Local index of vertex `v` in triangle `t`.
    pub fn local_vertex(&self, t: usize, v: usize) -> Option<usize> {
        self.triangles[t].v.iter().position(|&w| w == v)
    }

    /// All triangles sharing at least a vertex with `t`, including `t`.
    pub fn element_neighborhood(&self, t: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &vi in &self.triangles[t].v {
            out.extend_from_slice(&self.vertex_tris[vi]);
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn ring(&self, z: usize) -> Vec<usize> {
        self.vertex_tris[z].clone()
    }

    fn add_layer(&self, patch: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &t in patch {
            out.extend(self.element_neighborhood(t));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn patch_edge_connected(&self, patch: &[usize]) -> bool {
        if patch.is_empty() {
            return true;
        }
        let inside: std::collections::HashSet<usize> = patch.iter().cloned().collect();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![patch[0]];
        seen.insert(patch[0]);
        while let Some(t) = stack.pop() {
            for k in 0..3 {
                let e = &self.edges[self.tri_edges[t][k]];
                for other in [e.tri_plus, e.tri_minus].into_iter().flatten() {
                    if other != t && inside.contains(&other) && seen.insert(other) {
                        stack.push(other);
                    }
                }
            }
        }
        seen.len() == patch.len()
    }

    /// Vertices directly connected to `z` by an edge, ascending.
    pub fn vertex_neighbors(&self, z: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &t in &self.vertex_tris[z] {
            for &w in &self.triangles[t].v {
                if w != z {
                    out.push(w);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Recovery patch around vertex `z`.
    ///
    /// Interior vertices get their first ring enlarged by `extra_layers`
    /// rings. A boundary vertex adopts the patch of a directly connected
    /// interior vertex when one exists (smallest index), and otherwise the
    /// patch of the nearest interior vertex found by breadth-first search
    /// over edges, extended so that the result stays edge-connected and
    /// contains `z`.
    pub fn vertex_patch(&self, z: usize, extra_layers: usize) -> Result<Vec<usize>> {
        if z >= self.n_vertices() {
            return Err(HhjError::InvalidInput(format!("vertex {z} out of range")));
        }
        if !self.boundary_vertex[z] {
            let mut patch = self.ring(z);
            for _ in 0..extra_layers {
                patch = self.add_layer(&patch);
            }
            return Ok(patch);
        }
        // Case 2: directly connected interior vertex (smallest index).
        if let Some(&zp) = self
            .vertex_neighbors(z)
            .iter()
            .find(|&&w| !self.boundary_vertex[w])
        {
            return self.vertex_patch(zp, extra_layers);
        }
        // Case 3: breadth-first search for the nearest interior vertex,
        // remembering the path so connecting rings can be inserted.
        let nv = self.n_vertices();
        let mut prev = vec![usize::MAX; nv];
        let mut dist = vec![usize::MAX; nv];
        dist[z] = 0;
        let mut queue = std::collections::VecDeque::from([z]);
        let mut found = None;
        'bfs: while let Some(v) = queue.pop_front() {
            // Neighbors ascend, so ties resolve to the smallest index.
            for w in self.vertex_neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    prev[w] = v;
                    if !self.boundary_vertex[w] {
                        found = Some(w);
                        break 'bfs;
                    }
                    queue.push_back(w);
                }
            }
        }
        let zp = found.ok_or_else(|| {
            HhjError::InvalidInput("mesh has no interior vertices".into())
        })?;
        let mut patch = self.vertex_patch(zp, extra_layers)?;
        patch.extend(self.ring(z));
        patch.sort_unstable();
        patch.dedup();
        if !self.patch_edge_connected(&patch) {
            let mut v = prev[zp];
            while v != usize::MAX && v != z {
                patch.extend(self.ring(v));
                v = prev[v];
            }
            patch.sort_unstable();
            patch.dedup();
        }
        Ok(patch)
    }

    /// Edges of the triangles in `patch`, each once, ascending.
    pub fn patch_edges(&self, patch: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &t in patch {
            out.extend_from_slice(&self.tri_edges[t]);
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Plain-text dump: `nv nt ne`, vertex, triangle, and edge lines.
    pub fn write_dump<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "{} {} {}",
            self.n_vertices(),
            self.n_triangles(),
            self.n_edges()
        )?;
        for p in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", p.x, p.y)?;
        }
        for tri in &self.triangles {
            writeln!(w, "{} {} {} {}", tri.v[0], tri.v[1], tri.v[2], tri.refine_edge)?;
        }
        for e in &self.edges {
            let lbl = match e.label {
                BoundaryLabel::Clamped => "clamped",
                BoundaryLabel::SimplySupported => "simply_supported",
                BoundaryLabel::Free => "free",
                BoundaryLabel::Interior => "interior",
            };
            writeln!(w, "{} {} {}", e.v[0], e.v[1], lbl)?;
        }
        Ok(())
    }
}

/// Builds one of the built-in initial triangulations.
///
/// Each grid cell of size `1/n0` is split along the diagonal running from
/// its lower-right to its upper-left corner.
pub fn build_domain(name: DomainName, n0: usize, bc: BcScheme) -> Result<Mesh> {
    if n0 < 1 {
        return Err(HhjError::InvalidInput("n0 must be >= 1".into()));
    }
    let (cells_x, cells_y, origin, skip): (usize, usize, Point2, fn(f64, f64) -> bool) = match name
    {
        DomainName::UnitSquare => (n0, n0, Point2::new(0.0, 0.0), |_, _| false),
        // Skip cells inside the removed quadrant [0,1] x [-1,0].
        DomainName::LShape => (2 * n0, 2 * n0, Point2::new(-1.0, -1.0), |cx, cy| {
            cx > 0.0 && cy < 0.0
        }),
    };
    if name == DomainName::UnitSquare && bc == BcScheme::LShapeMixed {
        return Err(HhjError::InvalidInput(
            "LShapeMixed labeling applies to the L-shape only".into(),
        ));
    }
    let h = 1.0 / n0 as f64;
    let mut vertex_id: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut tris = Vec::new();
    let mut vid = |i: i64, j: i64, vertices: &mut Vec<Point2>| -> usize {
        *vertex_id.entry((i, j)).or_insert_with(|| {
            vertices.push(Point2::new(origin.x + i as f64 * h, origin.y + j as f64 * h));
            vertices.len() - 1
        })
    };
    for j in 0..cells_y {
        for i in 0..cells_x {
            let cx = origin.x + (i as f64 + 0.5) * h;
            let cy = origin.y + (j as f64 + 0.5) * h;
            if skip(cx, cy) {
                continue;
            }
            let (i, j) = (i as i64, j as i64);
            let v00 = vid(i, j, &mut vertices);
            let v10 = vid(i + 1, j, &mut vertices);
            let v01 = vid(i, j + 1, &mut vertices);
            let v11 = vid(i + 1, j + 1, &mut vertices);
            tris.push([v00, v10, v01]);
            tris.push([v10, v11, v01]);
        }
    }
    let labeler: Box<dyn Fn(Point2, Point2) -> BoundaryLabel> = match bc {
        BcScheme::AllClamped => Box::new(|_, _| BoundaryLabel::Clamped),
        BcScheme::LShapeMixed => Box::new(|a: Point2, b: Point2| {
            let tol = 1e-12;
            let on_vertical = a.x.abs() < tol
                && b.x.abs() < tol
                && a.y <= tol
                && b.y <= tol
                && a.y >= -1.0 - tol
                && b.y >= -1.0 - tol;
            let on_horizontal = a.y.abs() < tol
                && b.y.abs() < tol
                && a.x >= -tol
                && b.x >= -tol
                && a.x <= 1.0 + tol
                && b.x <= 1.0 + tol;
            if on_vertical || on_horizontal {
                BoundaryLabel::Free
            } else {
                BoundaryLabel::SimplySupported
            }
        }),
    };
    Mesh::from_triangles(vertices, tris, labeler.as_ref())
}

/// Bisects the marked triangles at their refinement edges and closes the
/// mesh by further bisections until it is conforming.
pub fn refine_nvb(mesh: &Mesh, marked: &[usize]) -> Result<Mesh> {
    for &t in marked {
        if t >= mesh.n_triangles() {
            return Err(HhjError::InvalidInput(format!(
                "marked triangle {t} out of range"
            )));
        }
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }

    let nt = mesh.n_triangles();
    let mut cut = vec![false; mesh.n_edges()];
    for &t in marked {
        cut[mesh.tri_edges[t][mesh.triangles[t].refine_edge as usize]] = true;
    }
    // Closure: a triangle with any cut edge must have its refinement edge cut.
    loop {
        let mut changed = false;
        for t in 0..nt {
            let re = mesh.tri_edges[t][mesh.triangles[t].refine_edge as usize];
            if !cut[re] && mesh.tri_edges[t].iter().any(|&e| cut[e]) {
                cut[re] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Midpoints of cut edges, appended in edge-index order.
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: Vec<Option<usize>> = vec![None; mesh.n_edges()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        if cut[e] {
            vertices.push(edge.midpoint_of(&mesh.vertices));
            midpoint[e] = Some(vertices.len() - 1);
        }
    }

    // Boundary labels are inherited by the halves of a bisected edge.
    let mut boundary_labels: HashMap<(usize, usize), BoundaryLabel> = HashMap::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let [a, b] = edge.v;
        if let Some(m) = midpoint[e] {
            boundary_labels.insert(sorted_pair(a, m), edge.label);
            boundary_labels.insert(sorted_pair(m, b), edge.label);
        } else {
            boundary_labels.insert((a, b), edge.label);
        }
    }

    // Midpoint lookup by (sorted) original edge endpoints; child refinement
    // edges are always original edges, so depth is at most two.
    let edge_mid: HashMap<(usize, usize), usize> = mesh
        .edges
        .iter()
        .zip(&midpoint)
        .filter_map(|(edge, m)| m.map(|m| (sorted_pair(edge.v[0], edge.v[1]), m)))
        .collect();

    let mut out: Vec<Triangle> = Vec::new();
    fn bisect(
        v: [usize; 3],
        re: u8,
        gen: u32,
        edge_mid: &HashMap<(usize, usize), usize>,
        out: &mut Vec<Triangle>,
    ) {
        let p = v[re as usize];
        let a = v[(re as usize + 1) % 3];
        let b = v[(re as usize + 2) % 3];
        match edge_mid.get(&sorted_pair(a, b)) {
            None => out.push(Triangle {
                v,
                refine_edge: re,
                generation: gen,
            }),
            Some(&m) => {
                // Children keep the new vertex opposite their refinement edge.
                bisect([a, m, p], 1, gen + 1, edge_mid, out);
                bisect([m, b, p], 0, gen + 1, edge_mid, out);
            }
        }
    }
    for tri in &mesh.triangles {
        bisect(tri.v, tri.refine_edge, tri.generation, &edge_mid, &mut out);
    }

    // Label lookup by endpoint indices; Mesh::assemble hands us points, so
    // map points back to indices through the exact coordinate bits.
    let index_of: HashMap<(u64, u64), usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, p)| ((p.x.to_bits(), p.y.to_bits()), i))
        .collect();
    let label_fn = move |a: Point2, b: Point2| -> BoundaryLabel {
        let ia = index_of[&(a.x.to_bits(), a.y.to_bits())];
        let ib = index_of[&(b.x.to_bits(), b.y.to_bits())];
        *boundary_labels
            .get(&sorted_pair(ia, ib))
            .expect("boundary edge of refined mesh must descend from a labeled edge")
    };
    Mesh::assemble(vertices, out, &label_fn)
}

/// Two full bisection sweeps; quadruples the element count.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let all: Vec<usize> = (0..mesh.n_triangles()).collect();
    let once = refine_nvb(mesh, &all)?;
    let all: Vec<usize> = (0..once.n_triangles()).collect();
    refine_nvb(&once, &all)
}
