//! Gauss quadrature on triangles and edges.
//!
//! Triangle rules are conical products of a Gauss-Jacobi(1,0) rule with a
//! Gauss-Legendre rule (both generated by Golub-Welsch), exact for the
//! requested polynomial degree. Weights are area-normalized: they sum to 1
//! and `integral = area * sum(w_k * f(x_k))`.

use nalgebra::DMatrix;

use crate::mesh::{Mesh, Point2};

#[derive(Debug, Clone)]
pub struct TriangleRule {
    /// Barycentric coordinates of the quadrature points.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to 1.
    pub weights: Vec<f64>,
    pub degree: usize,
}

#[derive(Debug, Clone)]
pub struct EdgeRule {
    /// Points on the unit interval [0, 1].
    pub points: Vec<f64>,
    /// Weights summing to 1.
    pub weights: Vec<f64>,
}

/// Nodes and weights of a Gauss rule from its Jacobi-matrix recurrence
/// coefficients (Golub-Welsch). `mu0` is the total mass of the weight.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
    }
    for i in 0..n - 1 {
        j[(i, i + 1)] = offdiag[i];
        j[(i + 1, i)] = offdiag[i];
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let q0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * q0 * q0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// n-point Gauss-Legendre rule on [0, 1]; weights sum to 1.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            (k * k / (4.0 * k * k - 1.0)).sqrt()
        })
        .collect();
    let (nodes, weights) = golub_welsch(&diag, &offdiag, 2.0);
    (
        nodes.into_iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights.into_iter().map(|w| 0.5 * w).collect(),
    )
}

/// n-point Gauss-Jacobi rule for the weight (1-s) on [0, 1]; weights sum
/// to 1/2.
fn gauss_jacobi10_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // Jacobi(alpha=1, beta=0) on [-1, 1]:
    //   a_0 = -1/3, a_k = -1 / ((2k+1)(2k+3))
    //   b_k^2 = k(k+1) / (2k+1)^2
    //   mu_0 = 2
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            let k = k as f64;
            -1.0 / ((2.0 * k + 1.0) * (2.0 * k + 3.0))
        })
        .collect();
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            (k * (k + 1.0)).sqrt() / (2.0 * k + 1.0)
        })
        .collect();
    let (nodes, weights) = golub_welsch(&diag, &offdiag, 2.0);
    (
        nodes.into_iter().map(|x| 0.5 * (x + 1.0)).collect(),
        // ds and the (1-s)/2 weight factor each contribute 1/2
        weights.into_iter().map(|w| 0.25 * w).collect(),
    )
}

/// Triangle rule exact for polynomials of total degree <= `degree`.
pub fn triangle_rule(degree: usize) -> TriangleRule {
    let degree = degree.max(1);
    let n = degree / 2 + 1; // conical product is exact to degree 2n-1
    let (s_nodes, s_weights) = gauss_jacobi10_01(n);
    let (t_nodes, t_weights) = gauss_legendre_01(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (si, swi) in s_nodes.iter().zip(&s_weights) {
        for (tj, twj) in t_nodes.iter().zip(&t_weights) {
            // reference coordinates x = s, y = t (1 - s)
            let x = *si;
            let y = tj * (1.0 - si);
            points.push([1.0 - x - y, x, y]);
            weights.push(2.0 * swi * twj); // reference area 1/2 -> sum 1
        }
    }
    TriangleRule {
        points,
        weights,
        degree,
    }
}

/// n-point Gauss-Legendre rule on the unit interval.
pub fn edge_rule(n: usize) -> EdgeRule {
    let (points, weights) = gauss_legendre_01(n);
    EdgeRule { points, weights }
}

/// Per-element quadrature selection: a base rule everywhere, optionally a
/// higher-degree rule on elements touching a singular corner.
#[derive(Debug, Clone)]
pub struct ElementRules {
    base: TriangleRule,
    special: Option<(Vec<bool>, TriangleRule)>,
}

impl ElementRules {
    pub fn uniform(degree: usize) -> Self {
        Self {
            base: triangle_rule(degree),
            special: None,
        }
    }

    /// Raises the degree to `corner_degree` on elements with a vertex at
    /// `corner`.
    pub fn with_corner(
        mesh: &Mesh,
        degree: usize,
        corner: Point2,
        corner_degree: usize,
    ) -> Self {
        let mask: Vec<bool> = (0..mesh.n_triangles())
            .map(|t| {
                mesh.tri_points(t)
                    .iter()
                    .any(|p| p.dist(corner) < 1e-12)
            })
            .collect();
        Self {
            base: triangle_rule(degree),
            special: Some((mask, triangle_rule(corner_degree.max(degree)))),
        }
    }

    pub fn rule(&self, t: usize) -> &TriangleRule {
        match &self.special {
            Some((mask, rule)) if mask[t] => rule,
            _ => &self.base,
        }
    }

    pub fn base_degree(&self) -> usize {
        self.base.degree
    }
}

impl TriangleRule {
    /// Integrates `f` over triangle `t` of `mesh`.
    pub fn integrate(&self, mesh: &Mesh, t: usize, mut f: impl FnMut(Point2) -> f64) -> f64 {
        let area = mesh.area(t);
        let mut acc = 0.0;
        for (bary, w) in self.points.iter().zip(&self.weights) {
            acc += w * f(mesh.point_at(t, *bary));
        }
        area * acc
    }
}

impl EdgeRule {
    /// Integrates `f` along the segment from `a` to `b`.
    pub fn integrate(&self, a: Point2, b: Point2, mut f: impl FnMut(Point2) -> f64) -> f64 {
        let len = b.sub(a).norm();
        let mut acc = 0.0;
        for (t, w) in self.points.iter().zip(&self.weights) {
            acc += w * f(a.add(b.sub(a).scale(*t)));
        }
        len * acc
    }
}
