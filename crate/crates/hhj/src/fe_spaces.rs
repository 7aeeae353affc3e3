//! Discrete spaces of the lowest-order HHJ pair.
//!
//! The moment space stores one scalar per edge: the (single-valued)
//! normal-normal trace of the piecewise-constant symmetric tensor field.
//! The element tensor is reconstructed on demand from the three edge
//! values, which makes normal-normal continuity structural. Deflections
//! are continuous P1 or P2 Lagrange fields; the bubble space consists of
//! P2 midside basis functions on interior and free edges.

use crate::mesh::{BoundaryLabel, Mesh, Point2};
use crate::quadrature::EdgeRule;
use crate::{HhjError, Result};

/// Symmetric 2x2 tensor (s21 = s12 by construction).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl SymTensor2 {
    pub fn new(s11: f64, s12: f64, s22: f64) -> Self {
        Self { s11, s12, s22 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn trace(self) -> f64 {
        self.s11 + self.s22
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.s11 + o.s11, self.s12 + o.s12, self.s22 + o.s22)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.s11 - o.s11, self.s12 - o.s12, self.s22 - o.s22)
    }

    pub fn scale(self, a: f64) -> Self {
        Self::new(a * self.s11, a * self.s12, a * self.s22)
    }

    /// Frobenius inner product (the off-diagonal entry counts twice).
    pub fn frob_inner(self, o: Self) -> f64 {
        self.s11 * o.s11 + 2.0 * self.s12 * o.s12 + self.s22 * o.s22
    }

    pub fn frob_norm_sq(self) -> f64 {
        self.frob_inner(self)
    }

    /// n^T S n
    pub fn nn(self, n: Point2) -> f64 {
        n.x * n.x * self.s11 + 2.0 * n.x * n.y * self.s12 + n.y * n.y * self.s22
    }

    /// n^T S t
    pub fn nt(self, n: Point2, t: Point2) -> f64 {
        n.x * t.x * self.s11 + (n.x * t.y + n.y * t.x) * self.s12 + n.y * t.y * self.s22
    }

    /// sym(a b^T + b a^T) = a b^T + b a^T
    pub fn sym_outer(a: Point2, b: Point2) -> Self {
        Self::new(2.0 * a.x * b.x, a.x * b.y + a.y * b.x, 2.0 * a.y * b.y)
    }
}

/// Unique constant symmetric tensor with prescribed normal-normal values
/// on three pairwise non-parallel unit normals.
pub fn reconstruct_tensor(normals: [Point2; 3], nn_values: [f64; 3]) -> Result<SymTensor2> {
    let mut m = nalgebra::Matrix3::<f64>::zeros();
    for (k, n) in normals.iter().enumerate() {
        m[(k, 0)] = n.x * n.x;
        m[(k, 1)] = 2.0 * n.x * n.y;
        m[(k, 2)] = n.y * n.y;
    }
    let rhs = nalgebra::Vector3::new(nn_values[0], nn_values[1], nn_values[2]);
    let lu = m.lu();
    let sol = lu.solve(&rhs).ok_or_else(|| {
        HhjError::DegenerateGeometry("parallel normals in tensor reconstruction".into())
    })?;
    Ok(SymTensor2::new(sol[0], sol[1], sol[2]))
}

/// HHJ moment field: one normal-normal value per edge.
#[derive(Debug, Clone)]
pub struct MomentField {
    pub edge_values: Vec<f64>,
}

impl MomentField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            edge_values: vec![0.0; mesh.n_edges()],
        }
    }

    /// Constant tensor of element `t` reconstructed from its edge values.
    pub fn element_tensor(&self, mesh: &Mesh, t: usize) -> Result<SymTensor2> {
        let edges = mesh.tri_edges[t];
        let normals = edges.map(|e| mesh.edges[e].normal);
        let values = edges.map(|e| self.edge_values[e]);
        reconstruct_tensor(normals, values)
    }

    pub fn element_tensors(&self, mesh: &Mesh) -> Result<Vec<SymTensor2>> {
        (0..mesh.n_triangles())
            .map(|t| self.element_tensor(mesh, t))
            .collect()
    }

    pub fn l2_norm(&self, mesh: &Mesh) -> Result<f64> {
        let mut acc = 0.0;
        for t in 0..mesh.n_triangles() {
            acc += mesh.area(t) * self.element_tensor(mesh, t)?.frob_norm_sq();
        }
        Ok(acc.sqrt())
    }
}

/// Continuous piecewise-polynomial scalar field.
///
/// Degree 1 stores one coefficient per vertex; degree 2 appends one
/// midside coefficient per edge (node order: vertices, then edges).
#[derive(Debug, Clone)]
pub struct DeflectionField {
    pub degree: u8,
    pub coeffs: Vec<f64>,
}

impl DeflectionField {
    pub fn zeros(mesh: &Mesh, degree: u8) -> Self {
        assert!(degree == 1 || degree == 2);
        let n = match degree {
            1 => mesh.n_vertices(),
            _ => mesh.n_vertices() + mesh.n_edges(),
        };
        Self {
            degree,
            coeffs: vec![0.0; n],
        }
    }

    pub fn value(&self, mesh: &Mesh, t: usize, x: Point2) -> f64 {
        let tri = &mesh.triangles[t];
        let l = mesh.barycentric(t, x);
        match self.degree {
            1 => (0..3).map(|k| self.coeffs[tri.v[k]] * l[k]).sum(),
            _ => {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += self.coeffs[tri.v[k]] * l[k] * (2.0 * l[k] - 1.0);
                }
                for k in 0..3 {
                    let e = mesh.tri_edges[t][k];
                    let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                    acc += self.coeffs[mesh.n_vertices() + e] * 4.0 * l[a] * l[b];
                }
                acc
            }
        }
    }

    pub fn gradient(&self, mesh: &Mesh, t: usize, x: Point2) -> Point2 {
        let tri = &mesh.triangles[t];
        let g = mesh.bary_grads(t);
        match self.degree {
            1 => {
                let mut acc = Point2::default();
                for k in 0..3 {
                    acc = acc.add(g[k].scale(self.coeffs[tri.v[k]]));
                }
                acc
            }
            _ => {
                let l = mesh.barycentric(t, x);
                let mut acc = Point2::default();
                for k in 0..3 {
                    acc = acc.add(g[k].scale(self.coeffs[tri.v[k]] * (4.0 * l[k] - 1.0)));
                }
                for k in 0..3 {
                    let e = mesh.tri_edges[t][k];
                    let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                    let c = self.coeffs[mesh.n_vertices() + e];
                    acc = acc.add(g[a].scale(4.0 * c * l[b])).add(g[b].scale(4.0 * c * l[a]));
                }
                acc
            }
        }
    }

    /// Element Hessian; constant per element (zero for degree 1).
    pub fn hessian(&self, mesh: &Mesh, t: usize) -> SymTensor2 {
        if self.degree == 1 {
            return SymTensor2::zero();
        }
        let tri = &mesh.triangles[t];
        let g = mesh.bary_grads(t);
        let mut acc = SymTensor2::zero();
        for k in 0..3 {
            acc = acc.add(SymTensor2::sym_outer(g[k], g[k]).scale(2.0 * self.coeffs[tri.v[k]]));
        }
        for k in 0..3 {
            let e = mesh.tri_edges[t][k];
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            acc = acc.add(
                SymTensor2::sym_outer(g[a], g[b]).scale(4.0 * self.coeffs[mesh.n_vertices() + e]),
            );
        }
        acc
    }

    /// H1 seminorm over the mesh.
    pub fn h1_seminorm(&self, mesh: &Mesh, rule: &crate::quadrature::TriangleRule) -> f64 {
        let mut acc = 0.0;
        for t in 0..mesh.n_triangles() {
            acc += rule.integrate(mesh, t, |x| {
                let g = self.gradient(mesh, t, x);
                g.dot(g)
            });
        }
        acc.sqrt()
    }
}

/// Edge-bubble coefficients (P2 midside functions on admissible edges).
#[derive(Debug, Clone)]
pub struct BubbleField {
    pub coeffs: Vec<f64>,
}

/// Degree-of-freedom maps for all discrete spaces on one mesh.
#[derive(Debug, Clone)]
pub struct SpaceSet {
    /// Moment DOF per edge; `None` on simply supported and free edges.
    pub sigma_dof: Vec<Option<usize>>,
    pub n_sigma: usize,
    /// P1 deflection DOF per vertex; `None` on the closure of the clamped
    /// and simply supported boundary.
    pub u1_dof: Vec<Option<usize>>,
    pub n_u1: usize,
    /// Bubble DOF per edge; `None` on clamped and simply supported edges.
    pub bubble_dof: Vec<Option<usize>>,
    pub n_bubbles: usize,
    pub vertex_constrained: Vec<bool>,
    pub edge_constrained_sigma: Vec<bool>,
}

impl SpaceSet {
    /// Coordinates of the P2 nodes (vertices, then edge midpoints).
    pub fn p2_node_coords(&self, mesh: &Mesh) -> Vec<Point2> {
        let mut out = mesh.vertices.clone();
        out.extend(mesh.edges.iter().map(|e| e.midpoint_of(&mesh.vertices)));
        out
    }
}

pub fn build_spaces(mesh: &Mesh) -> SpaceSet {
    let ne = mesh.n_edges();
    let nv = mesh.n_vertices();
    let mut edge_constrained_sigma = vec![false; ne];
    let mut vertex_constrained = vec![false; nv];
    let mut bubble_excluded = vec![false; ne];
    for (e, edge) in mesh.edges.iter().enumerate() {
        match edge.label {
            BoundaryLabel::SimplySupported => {
                edge_constrained_sigma[e] = true;
                bubble_excluded[e] = true;
                vertex_constrained[edge.v[0]] = true;
                vertex_constrained[edge.v[1]] = true;
            }
            BoundaryLabel::Clamped => {
                bubble_excluded[e] = true;
                vertex_constrained[edge.v[0]] = true;
                vertex_constrained[edge.v[1]] = true;
            }
            BoundaryLabel::Free => {
                edge_constrained_sigma[e] = true;
            }
            BoundaryLabel::Interior => {}
        }
    }
    let mut sigma_dof = vec![None; ne];
    let mut n_sigma = 0;
    for e in 0..ne {
        if !edge_constrained_sigma[e] {
            sigma_dof[e] = Some(n_sigma);
            n_sigma += 1;
        }
    }
    let mut u1_dof = vec![None; nv];
    let mut n_u1 = 0;
    for v in 0..nv {
        if !vertex_constrained[v] {
            u1_dof[v] = Some(n_u1);
            n_u1 += 1;
        }
    }
    let mut bubble_dof = vec![None; ne];
    let mut n_bubbles = 0;
    for e in 0..ne {
        if !bubble_excluded[e] {
            bubble_dof[e] = Some(n_bubbles);
            n_bubbles += 1;
        }
    }
    SpaceSet {
        sigma_dof,
        n_sigma,
        u1_dof,
        n_u1,
        bubble_dof,
        n_bubbles,
        vertex_constrained,
        edge_constrained_sigma,
    }
}

/// Modified Lagrange interpolation.
///
/// Degree 1 matches point values at vertices. Degree 2 additionally
/// matches the mean of the function over each edge.
pub fn interpolate_ih(
    mesh: &Mesh,
    v: &dyn Fn(Point2) -> f64,
    degree: u8,
    edge_rule: &EdgeRule,
) -> DeflectionField {
    assert!(degree == 1 || degree == 2);
    let mut field = DeflectionField::zeros(mesh, degree);
    for (i, p) in mesh.vertices.iter().enumerate() {
        field.coeffs[i] = v(*p);
    }
    if degree == 2 {
        for (e, edge) in mesh.edges.iter().enumerate() {
            let a = mesh.vertices[edge.v[0]];
            let b = mesh.vertices[edge.v[1]];
            let mean = edge_rule.integrate(a, b, v) / edge.length;
            // midside coefficient from the edge-mean matching condition
            let va = field.coeffs[edge.v[0]];
            let vb = field.coeffs[edge.v[1]];
            field.coeffs[mesh.n_vertices() + e] = 1.5 * mean - 0.25 * (va + vb);
        }
    }
    field
}

/// Interpolation into the moment space: per unconstrained edge the mean of
/// the normal-normal trace; constrained edges are set to zero.
pub fn interpolate_pih(
    mesh: &Mesh,
    spaces: &SpaceSet,
    tau: &dyn Fn(Point2) -> SymTensor2,
    edge_rule: &EdgeRule,
) -> MomentField {
    let mut field = MomentField::zeros(mesh);
    for (e, edge) in mesh.edges.iter().enumerate() {
        if spaces.edge_constrained_sigma[e] {
            continue;
        }
        let a = mesh.vertices[edge.v[0]];
        let b = mesh.vertices[edge.v[1]];
        let n = edge.normal;
        field.edge_values[e] = edge_rule.integrate(a, b, |x| tau(x).nn(n)) / edge.length;
    }
    field
}

/// Values, gradients, and Hessians of the local P2 Lagrange basis at `x`.
/// Node order: vertices 0..3, then midside nodes of local edges 0..3
/// (edge `k` opposite vertex `k`).
pub fn p2_basis(mesh: &Mesh, t: usize, x: Point2) -> ([f64; 6], [Point2; 6], [SymTensor2; 6]) {
    let l = mesh.barycentric(t, x);
    let g = mesh.bary_grads(t);
    let mut values = [0.0; 6];
    let mut grads = [Point2::default(); 6];
    let mut hess = [SymTensor2::zero(); 6];
    for k in 0..3 {
        values[k] = l[k] * (2.0 * l[k] - 1.0);
        grads[k] = g[k].scale(4.0 * l[k] - 1.0);
        hess[k] = SymTensor2::sym_outer(g[k], g[k]).scale(2.0);
    }
    for k in 0..3 {
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        values[3 + k] = 4.0 * l[a] * l[b];
        grads[3 + k] = g[a].scale(4.0 * l[b]).add(g[b].scale(4.0 * l[a]));
        hess[3 + k] = SymTensor2::sym_outer(g[a], g[b]).scale(4.0);
    }
    (values, grads, hess)
}

/// Values and gradients of the local P1 basis at `x`.
pub fn p1_basis(mesh: &Mesh, t: usize, x: Point2) -> ([f64; 3], [Point2; 3]) {
    (mesh.barycentric(t, x), mesh.bary_grads(t))
}
