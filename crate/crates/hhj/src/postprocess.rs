//! Recovery operators: the conforming postprocessed deflection, the
//! least-squares nodal moment recovery, and the edge-averaging baseline.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{apply_m, MaterialParams};
use crate::fe_spaces::{DeflectionField, MomentField, SpaceSet, SymTensor2};
use crate::linalg::{cg_jacobi, CsrMatrix};
use crate::mesh::{Mesh, Point2};
use crate::{HhjError, Result};

/// Continuous piecewise-linear tensor field given by one tensor per vertex.
#[derive(Debug, Clone)]
pub struct NodalTensorField {
    pub tensors: Vec<SymTensor2>,
}

impl NodalTensorField {
    pub fn eval(&self, mesh: &Mesh, t: usize, x: Point2) -> SymTensor2 {
        let l = mesh.barycentric(t, x);
        let v = mesh.triangles[t].v;
        self.tensors[v[0]]
            .scale(l[0])
            .add(self.tensors[v[1]].scale(l[1]))
            .add(self.tensors[v[2]].scale(l[2]))
    }
}

/// Elementwise linear tensor field interpolating one tensor per edge
/// midpoint (stored per triangle in local edge order).
#[derive(Debug, Clone)]
pub struct PiecewiseLinearTensorField {
    pub midpoint_tensors: Vec<[SymTensor2; 3]>,
}

impl PiecewiseLinearTensorField {
    pub fn eval(&self, mesh: &Mesh, t: usize, x: Point2) -> SymTensor2 {
        let l = mesh.barycentric(t, x);
        let m = &self.midpoint_tensors[t];
        // linear basis on the midpoint triangle: mu_k = 1 - 2 lambda_k
        let mut acc = SymTensor2::zero();
        for k in 0..3 {
            acc = acc.add(m[k].scale(1.0 - 2.0 * l[k]));
        }
        acc
    }
}

/// Solves the edge-bubble problem
/// `(M hess w, hess v) = (sigma_h - M hess u_h, hess v)` for all bubbles
/// `v` and returns `u_h* = u_h + w` as a P2 field. Vertex coefficients of
/// the result are bit-identical to `u_h`.
pub fn build_uhstar(
    mesh: &Mesh,
    spaces: &SpaceSet,
    sigma_h: &MomentField,
    u_h: &DeflectionField,
    mat: &MaterialParams,
    cg_tol: f64,
) -> Result<DeflectionField> {
    assert_eq!(u_h.degree, 1);
    let nb = spaces.n_bubbles;

    // Embed u_h into P2: midside coefficient of a linear field is the
    // average of its endpoint values.
    let mut star = DeflectionField::zeros(mesh, 2);
    star.coeffs[..mesh.n_vertices()].copy_from_slice(&u_h.coeffs);
    for (e, edge) in mesh.edges.iter().enumerate() {
        star.coeffs[mesh.n_vertices() + e] =
            0.5 * (u_h.coeffs[edge.v[0]] + u_h.coeffs[edge.v[1]]);
    }
    if nb == 0 {
        return Ok(star);
    }

    // Bubble Hessians are constant per element: hess(4 la lb) with the
    // barycentric product of the edge endpoints.
    let bubble_hessian = |t: usize, k: usize| -> SymTensor2 {
        let g = mesh.bary_grads(t);
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        SymTensor2::sym_outer(g[a], g[b]).scale(4.0)
    };

    let mut trips = Vec::new();
    let mut rhs = vec![0.0; nb];
    for t in 0..mesh.n_triangles() {
        let area = mesh.area(t);
        let sigma_t = sigma_h.element_tensor(mesh, t)?;
        // hess u_h = 0 for P1, so the right side reduces to (sigma_h, hess v)
        for k in 0..3 {
            let Some(i) = spaces.bubble_dof[mesh.tri_edges[t][k]] else {
                continue;
            };
            let h_k = bubble_hessian(t, k);
            rhs[i] += area * sigma_t.frob_inner(h_k);
            let m_hk = apply_m(h_k, mat);
            for l in 0..3 {
                let Some(j) = spaces.bubble_dof[mesh.tri_edges[t][l]] else {
                    continue;
                };
                trips.push((i, j, area * m_hk.frob_inner(bubble_hessian(t, l))));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(nb, nb, &trips);
    let max_iter = 10 * (nb as f64).sqrt() as usize + 100;
    // converge an order below the requested orthogonality residual
    let w = cg_jacobi(&stiffness, &rhs, 0.05 * cg_tol, max_iter)?;

    for (e, dof) in spaces.bubble_dof.iter().enumerate() {
        if let Some(i) = dof {
            star.coeffs[mesh.n_vertices() + e] += w[*i];
        }
    }
    Ok(star)
}

/// One local least-squares fit: rows sample the normal-normal trace of a
/// linear symmetric tensor at patch edge midpoints.
#[derive(Debug, Clone)]
pub struct PatchLs {
    pub vertex: usize,
    pub triangles: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub coefficients: Option<DVector<f64>>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl PatchLs {
    pub fn rank_ratio(&self) -> f64 {
        if self.sigma_max == 0.0 {
            0.0
        } else {
            self.sigma_min / self.sigma_max
        }
    }

    /// Fitted tensor evaluated at a point.
    pub fn fitted_at(&self, p: Point2) -> Option<SymTensor2> {
        let c = self.coefficients.as_ref()?;
        Some(SymTensor2::new(
            c[0] + c[1] * p.x + c[2] * p.y,
            c[3] + c[4] * p.x + c[5] * p.y,
            c[6] + c[7] * p.x + c[8] * p.y,
        ))
    }
}

/// Assembles (and optionally solves) the patch least-squares problem for
/// vertex `z` with the given number of extra patch layers.
pub fn build_patch_ls(
    mesh: &Mesh,
    sigma_h: &MomentField,
    z: usize,
    extra_layers: usize,
) -> Result<PatchLs> {
    let triangles = mesh.vertex_patch(z, extra_layers)?;
    let edges = mesh.patch_edges(&triangles);
    let n = edges.len();
    let mut matrix = DMatrix::<f64>::zeros(n, 9);
    let mut rhs = DVector::<f64>::zeros(n);
    for (row, &e) in edges.iter().enumerate() {
        let edge = &mesh.edges[e];
        let nrm = edge.normal;
        let m = edge.midpoint_of(&mesh.vertices);
        let (n1, n2) = (nrm.x, nrm.y);
        matrix[(row, 0)] = n1 * n1;
        matrix[(row, 1)] = n1 * n1 * m.x;
        matrix[(row, 2)] = n1 * n1 * m.y;
        matrix[(row, 3)] = 2.0 * n1 * n2;
        matrix[(row, 4)] = 2.0 * n1 * n2 * m.x;
        matrix[(row, 5)] = 2.0 * n1 * n2 * m.y;
        matrix[(row, 6)] = n2 * n2;
        matrix[(row, 7)] = n2 * n2 * m.x;
        matrix[(row, 8)] = n2 * n2 * m.y;
        rhs[row] = sigma_h.edge_values[e];
    }
    if n < 9 {
        return Ok(PatchLs {
            vertex: z,
            triangles,
            matrix,
            rhs,
            coefficients: None,
            sigma_min: 0.0,
            sigma_max: 1.0,
        });
    }
    let svd = matrix.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let sigma_min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let coefficients = svd.solve(&rhs, 0.0).ok();
    Ok(PatchLs {
        vertex: z,
        triangles,
        matrix,
        rhs,
        coefficients,
        sigma_min,
        sigma_max,
    })
}

/// Least-squares moment recovery. Each vertex value is the evaluation at
/// the vertex of the linear symmetric tensor that best fits the moment
/// normal-normal data on its patch. Rank-deficient patches are enlarged a
/// layer at a time up to `max_layers`.
pub fn recover_rh(
    mesh: &Mesh,
    sigma_h: &MomentField,
    rank_tol: f64,
    max_layers: usize,
) -> Result<NodalTensorField> {
    let mut tensors = Vec::with_capacity(mesh.n_vertices());
    for z in 0..mesh.n_vertices() {
        let mut fitted = None;
        let mut last_ratio = 0.0;
        for layers in 0..=max_layers {
            let patch = build_patch_ls(mesh, sigma_h, z, layers)?;
            last_ratio = patch.rank_ratio();
            if patch.coefficients.is_some() && last_ratio > rank_tol {
                fitted = patch.fitted_at(mesh.vertices[z]);
                break;
            }
        }
        match fitted {
            Some(t) => tensors.push(t),
            None => {
                let patch = mesh.vertex_patch(z, max_layers)?;
                let coords: Vec<String> = patch
                    .iter()
                    .flat_map(|&t| mesh.triangles[t].v)
                    .map(|v| format!("({:.3},{:.3})", mesh.vertices[v].x, mesh.vertices[v].y))
                    .collect();
                return Err(HhjError::RankDeficientPatch {
                    vertex: z,
                    detail: format!(
                        "rank ratio {last_ratio:.3e} after {max_layers} enlargements; patch vertices {}",
                        coords.join(" ")
                    ),
                });
            }
        }
    }
    Ok(NodalTensorField { tensors })
}

/// Edge-averaging recovery: per edge the mean of the adjacent element
/// tensors, per element the linear interpolant of its three edge-midpoint
/// averages.
pub fn recover_kh(mesh: &Mesh, sigma_h: &MomentField) -> Result<PiecewiseLinearTensorField> {
    let tensors = sigma_h.element_tensors(mesh)?;
    let mut edge_avg = vec![SymTensor2::zero(); mesh.n_edges()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        let mut acc = SymTensor2::zero();
        let mut count = 0.0;
        for t in [edge.tri_plus, edge.tri_minus].into_iter().flatten() {
            acc = acc.add(tensors[t]);
            count += 1.0;
        }
        edge_avg[e] = acc.scale(1.0 / count);
    }
    let midpoint_tensors = (0..mesh.n_triangles())
        .map(|t| mesh.tri_edges[t].map(|e| edge_avg[e]))
        .collect();
    Ok(PiecewiseLinearTensorField { midpoint_tensors })
}
