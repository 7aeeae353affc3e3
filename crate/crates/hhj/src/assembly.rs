//! Material operators, bilinear forms, and the mixed saddle-point solve.
//!
//! The discrete system couples the edge-based moment space with P1
//! deflections:
//!
//! ```text
//!   a(sigma_h, tau_h) + b_h(tau_h, u_h) = 0          for all tau_h,
//!   b_h(sigma_h, v_h)                   = -(f, v_h)  for all v_h,
//! ```
//!
//! with `a(s, t) = (Minv s, t)` and
//! `b_h(t, v) = (-t, hess_h v) + <t_nn, dn v>_elementwise`. For
//! piecewise-constant moments and P1 deflections the volume term of `b_h`
//! vanishes and assembly reduces to edge integrals of `dn v`.

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::fe_spaces::{DeflectionField, MomentField, SpaceSet, SymTensor2};
use crate::linalg::{norm_inf, CsrMatrix};
use crate::mesh::{Mesh, Point2};
use crate::quadrature::{EdgeRule, ElementRules, TriangleRule};
use crate::{HhjError, Result};

/// Plate material: `bending_factor = E d^3 / 12` and the Poisson ratio.
#[derive(Debug, Clone, Copy)]
pub struct MaterialParams {
    pub bending_factor: f64,
    pub nu: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            bending_factor: 1.0,
            nu: 0.3,
        }
    }
}

impl MaterialParams {
    pub fn new(bending_factor: f64, nu: f64) -> Result<Self> {
        if !(bending_factor > 0.0) || !(0.0..0.5).contains(&nu) {
            return Err(HhjError::InvalidInput(format!(
                "invalid material: factor {bending_factor}, nu {nu}"
            )));
        }
        Ok(Self { bending_factor, nu })
    }
}

/// Moment operator `M tau = factor/(1-nu^2) ((1-nu) tau + nu tr(tau) I)`.
pub fn apply_m(tau: SymTensor2, mat: &MaterialParams) -> SymTensor2 {
    let c = mat.bending_factor / (1.0 - mat.nu * mat.nu);
    let tr = mat.nu * tau.trace();
    SymTensor2::new(
        c * ((1.0 - mat.nu) * tau.s11 + tr),
        c * (1.0 - mat.nu) * tau.s12,
        c * ((1.0 - mat.nu) * tau.s22 + tr),
    )
}

/// Inverse operator `Minv tau = 1/factor ((1+nu) tau - nu tr(tau) I)`.
pub fn apply_minv(tau: SymTensor2, mat: &MaterialParams) -> SymTensor2 {
    let c = 1.0 / mat.bending_factor;
    let tr = mat.nu * tau.trace();
    SymTensor2::new(
        c * ((1.0 + mat.nu) * tau.s11 - tr),
        c * (1.0 + mat.nu) * tau.s12,
        c * ((1.0 + mat.nu) * tau.s22 - tr),
    )
}

/// Per-element tensors of the three local moment basis functions (unit
/// normal-normal value on one local edge, zero on the others).
pub fn local_sigma_basis(mesh: &Mesh, t: usize) -> Result<[SymTensor2; 3]> {
    let normals = mesh.tri_edges[t].map(|e| mesh.edges[e].normal);
    Ok([
        crate::fe_spaces::reconstruct_tensor(normals, [1.0, 0.0, 0.0])?,
        crate::fe_spaces::reconstruct_tensor(normals, [0.0, 1.0, 0.0])?,
        crate::fe_spaces::reconstruct_tensor(normals, [0.0, 0.0, 1.0])?,
    ])
}

/// Assembles `A[i][j] = (Minv tau_i, tau_j)` on the free moment DOFs.
/// Constant tensors make one-point quadrature exact.
pub fn assemble_a(mesh: &Mesh, spaces: &SpaceSet, mat: &MaterialParams) -> Result<CsrMatrix> {
    let mut trips = Vec::new();
    for t in 0..mesh.n_triangles() {
        let basis = local_sigma_basis(mesh, t)?;
        let area = mesh.area(t);
        for k in 0..3 {
            let Some(i) = spaces.sigma_dof[mesh.tri_edges[t][k]] else {
                continue;
            };
            let minv_k = apply_minv(basis[k], mat);
            for l in 0..3 {
                let Some(j) = spaces.sigma_dof[mesh.tri_edges[t][l]] else {
                    continue;
                };
                trips.push((i, j, area * minv_k.frob_inner(basis[l])));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(spaces.n_sigma, spaces.n_sigma, &trips))
}

/// Assembles `B[j][i] = b_h(tau_i, v_j)` for P1 deflections. With the
/// volume term vanishing this is a sum of `h_e (grad v . n_out)` edge
/// contributions per element.
pub fn assemble_b(mesh: &Mesh, spaces: &SpaceSet) -> CsrMatrix {
    let mut trips = Vec::new();
    for t in 0..mesh.n_triangles() {
        let grads = mesh.bary_grads(t);
        for k in 0..3 {
            let e = mesh.tri_edges[t][k];
            let Some(i) = spaces.sigma_dof[e] else { continue };
            let n_out = mesh.edges[e].normal.scale(mesh.outward_sign(t, k));
            let h_e = mesh.edges[e].length;
            for v in 0..3 {
                let Some(j) = spaces.u1_dof[mesh.triangles[t].v[v]] else {
                    continue;
                };
                trips.push((j, i, h_e * grads[v].dot(n_out)));
            }
        }
    }
    CsrMatrix::from_triplets(spaces.n_u1, spaces.n_sigma, &trips)
}

/// The same matrix through the integration-by-parts identity
/// `b_h(tau, v) = (div tau, grad v) - <tau_nt, dt v>`; for constant
/// element tensors only the twisting edge term survives. Kept as an
/// independent cross-check of the primal assembly.
pub fn assemble_b_alt(mesh: &Mesh, spaces: &SpaceSet) -> Result<CsrMatrix> {
    let mut trips = Vec::new();
    for t in 0..mesh.n_triangles() {
        let grads = mesh.bary_grads(t);
        let basis = local_sigma_basis(mesh, t)?;
        for k in 0..3 {
            let e = mesh.tri_edges[t][k];
            let h_e = mesh.edges[e].length;
            let s = mesh.outward_sign(t, k);
            let n_out = mesh.edges[e].normal.scale(s);
            let t_ccw = n_out.rot90();
            for l in 0..3 {
                let Some(i) = spaces.sigma_dof[mesh.tri_edges[t][l]] else {
                    continue;
                };
                let tau_nt = basis[l].nt(n_out, t_ccw);
                for v in 0..3 {
                    let Some(j) = spaces.u1_dof[mesh.triangles[t].v[v]] else {
                        continue;
                    };
                    trips.push((j, i, -h_e * tau_nt * grads[v].dot(t_ccw)));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(spaces.n_u1, spaces.n_sigma, &trips))
}

/// Load vector entries `(f, v_j)` by triangle quadrature. The quadrature
/// degree may be raised on selected elements (e.g. near a singular
/// corner) through `rules`.
pub fn assemble_load(
    mesh: &Mesh,
    spaces: &SpaceSet,
    f: &dyn Fn(Point2) -> f64,
    rules: &ElementRules,
) -> Vec<f64> {
    let mut load = vec![0.0; spaces.n_u1];
    for t in 0..mesh.n_triangles() {
        let rule = rules.rule(t);
        for v in 0..3 {
            let Some(j) = spaces.u1_dof[mesh.triangles[t].v[v]] else {
                continue;
            };
            load[j] += rule.integrate(mesh, t, |x| {
                let l = mesh.barycentric(t, x);
                f(x) * l[v]
            });
        }
    }
    load
}

/// The assembled saddle-point blocks; the full system reads
/// `[[A, B^T], [B, 0]] [sigma; u] = [0; -load]`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub load: Vec<f64>,
}

impl SaddleSystem {
    pub fn n_sigma(&self) -> usize {
        self.a.nrows
    }

    pub fn n_u(&self) -> usize {
        self.b.nrows
    }

    /// Residuals of both equation blocks for a given discrete pair.
    pub fn residuals(&self, sigma: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ns = self.n_sigma();
        let nu = self.n_u();
        let mut r1 = vec![0.0; ns];
        self.a.matvec(sigma, &mut r1);
        let mut btu = vec![0.0; ns];
        self.b.matvec_transpose(u, &mut btu);
        for i in 0..ns {
            r1[i] += btu[i];
        }
        let mut r2 = vec![0.0; nu];
        self.b.matvec(sigma, &mut r2);
        for j in 0..nu {
            r2[j] += self.load[j];
        }
        (r1, r2)
    }
}

pub fn assemble_system(
    mesh: &Mesh,
    spaces: &SpaceSet,
    mat: &MaterialParams,
    f: &dyn Fn(Point2) -> f64,
    rules: &ElementRules,
) -> Result<SaddleSystem> {
    Ok(SaddleSystem {
        a: assemble_a(mesh, spaces, mat)?,
        b: assemble_b(mesh, spaces),
        load: assemble_load(mesh, spaces, f, rules),
    })
}

/// Direct sparse solve of the full block system. The factorization is an
/// unsymmetric sparse LU with pivoting; the residual infinity norm is
/// checked against `tol * (1 + |load|_inf)`.
pub fn solve_saddle(
    mesh: &Mesh,
    spaces: &SpaceSet,
    system: &SaddleSystem,
    tol: f64,
) -> Result<(MomentField, DeflectionField)> {
    let ns = system.n_sigma();
    let nu = system.n_u();
    let n = ns + nu;
    let mut trips: Vec<(usize, usize, f64)> =
        Vec::with_capacity(system.a.nnz() + 2 * system.b.nnz());
    for (i, j, v) in system.a.triplets() {
        trips.push((i, j, v));
    }
    for (j, i, v) in system.b.triplets() {
        trips.push((ns + j, i, v)); // B
        trips.push((i, ns + j, v)); // B^T
    }
    let sparse = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| HhjError::SingularSystem(format!("matrix build failed: {e:?}")))?;
    let lu = sparse.sp_lu().map_err(|e| {
        HhjError::SingularSystem(format!(
            "sparse LU failed ({e:?}); n_sigma = {ns}, n_u = {nu}"
        ))
    })?;
    let mut rhs = faer::Mat::<f64>::zeros(n, 1);
    for j in 0..nu {
        rhs[(ns + j, 0)] = -system.load[j];
    }
    let sol = lu.solve(&rhs);
    let sigma: Vec<f64> = (0..ns).map(|i| sol[(i, 0)]).collect();
    let u: Vec<f64> = (0..nu).map(|j| sol[(ns + j, 0)]).collect();

    let (r1, r2) = system.residuals(&sigma, &u);
    let residual = norm_inf(&r1).max(norm_inf(&r2));
    let threshold = tol * (1.0 + norm_inf(&system.load));
    if residual > threshold {
        return Err(HhjError::ResidualTooLarge {
            residual,
            tol: threshold,
        });
    }

    let mut moment = MomentField::zeros(mesh);
    for (e, dof) in spaces.sigma_dof.iter().enumerate() {
        if let Some(i) = dof {
            moment.edge_values[e] = sigma[*i];
        }
    }
    let mut deflection = DeflectionField::zeros(mesh, 1);
    for (v, dof) in spaces.u1_dof.iter().enumerate() {
        if let Some(j) = dof {
            deflection.coeffs[v] = u[*j];
        }
    }
    Ok((moment, deflection))
}

/// b_h(tau_h, v) for a discrete moment field and an arbitrary piecewise-H2
/// test function given by gradient and Hessian evaluators. Used by the
/// commuting-identity checks.
pub fn bh_moment_function(
    mesh: &Mesh,
    tau: &MomentField,
    grad_v: &dyn Fn(Point2) -> Point2,
    hess_v: &dyn Fn(Point2) -> SymTensor2,
    tri_rule: &TriangleRule,
    edge_rule: &EdgeRule,
) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let tensor = tau.element_tensor(mesh, t)?;
        acc -= tri_rule.integrate(mesh, t, |x| tensor.frob_inner(hess_v(x)));
        for k in 0..3 {
            let e = mesh.tri_edges[t][k];
            let edge = &mesh.edges[e];
            let n_out = edge.normal.scale(mesh.outward_sign(t, k));
            let a = mesh.vertices[edge.v[0]];
            let b = mesh.vertices[edge.v[1]];
            acc += edge_rule.integrate(a, b, |x| tau.edge_values[e] * grad_v(x).dot(n_out));
        }
    }
    Ok(acc)
}

/// b_h(tau_h, v_h) for discrete arguments (P1 or P2 deflection).
pub fn bh_moment_deflection(
    mesh: &Mesh,
    tau: &MomentField,
    v: &DeflectionField,
    edge_rule: &EdgeRule,
) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let tensor = tau.element_tensor(mesh, t)?;
        if v.degree == 2 {
            acc -= mesh.area(t) * tensor.frob_inner(v.hessian(mesh, t));
        }
        for k in 0..3 {
            let e = mesh.tri_edges[t][k];
            let edge = &mesh.edges[e];
            let n_out = edge.normal.scale(mesh.outward_sign(t, k));
            let a = mesh.vertices[edge.v[0]];
            let b = mesh.vertices[edge.v[1]];
            acc += edge_rule.integrate(a, b, |x| {
                tau.edge_values[e] * v.gradient(mesh, t, x).dot(n_out)
            });
        }
    }
    Ok(acc)
}
