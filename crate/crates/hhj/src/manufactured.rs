//! Manufactured problems with exact derivatives.
//!
//! Solutions are sums of terms `weight * p(x, y) * r^mu * trig(kappa *
//! theta)` with polynomial `p`; this shape is closed under partial
//! differentiation away from the origin, so gradients, Hessians, and the
//! load (a fourth-order derivative) are computed term-wise and exactly.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::assembly::{apply_m, MaterialParams};
use crate::fe_spaces::SymTensor2;
use crate::mesh::{BcScheme, DomainName, Point2};
use crate::{HhjError, Result};

/// Angular factor of a term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trig {
    One,
    Cos(f64),
    Sin(f64),
}

/// Polynomial in (x, y): exponent pair -> coefficient.
pub type Poly = BTreeMap<(u32, u32), f64>;

fn poly_from(terms: &[(u32, u32, f64)]) -> Poly {
    let mut p = Poly::new();
    for &(a, b, c) in terms {
        if c != 0.0 {
            *p.entry((a, b)).or_insert(0.0) += c;
        }
    }
    p
}

fn poly_mul_axis(p: &Poly, axis: usize) -> Poly {
    // multiply by x or y
    p.iter()
        .map(|(&(a, b), &c)| {
            if axis == 0 {
                ((a + 1, b), c)
            } else {
                ((a, b + 1), c)
            }
        })
        .collect()
}

fn poly_diff(p: &Poly, axis: usize) -> Poly {
    let mut out = Poly::new();
    for (&(a, b), &c) in p {
        match axis {
            0 if a > 0 => {
                *out.entry((a - 1, b)).or_insert(0.0) += a as f64 * c;
            }
            1 if b > 0 => {
                *out.entry((a, b - 1)).or_insert(0.0) += b as f64 * c;
            }
            _ => {}
        }
    }
    out
}

fn poly_eval(p: &Poly, x: f64, y: f64) -> f64 {
    let mut acc = 0.0;
    for (&(a, b), &c) in p {
        acc += c * x.powi(a as i32) * y.powi(b as i32);
    }
    acc
}

/// One product term of an expression.
#[derive(Debug, Clone)]
pub struct ExprTerm {
    pub weight: f64,
    pub poly: Poly,
    /// Radial exponent: factor r^mu.
    pub mu: f64,
    pub trig: Trig,
}

/// Sum of product terms.
#[derive(Debug, Clone, Default)]
pub struct Expr {
    pub terms: Vec<ExprTerm>,
}

impl Expr {
    pub fn polynomial(terms: &[(u32, u32, f64)]) -> Expr {
        Expr {
            terms: vec![ExprTerm {
                weight: 1.0,
                poly: poly_from(terms),
                mu: 0.0,
                trig: Trig::One,
            }],
        }
    }

    /// Evaluate at `p`; terms with `mu != 0` or an angular part require
    /// `r > 0`. The polar angle is measured counterclockwise in [0, 2 pi).
    pub fn eval(&self, p: Point2) -> f64 {
        let r2 = p.x * p.x + p.y * p.y;
        let r = r2.sqrt();
        let theta = {
            let t = p.y.atan2(p.x);
            if t < 0.0 {
                t + 2.0 * PI
            } else {
                t
            }
        };
        let mut acc = 0.0;
        for term in &self.terms {
            let mut v = term.weight * poly_eval(&term.poly, p.x, p.y);
            if v == 0.0 {
                continue;
            }
            if term.mu != 0.0 {
                v *= r.powf(term.mu);
            }
            v *= match term.trig {
                Trig::One => 1.0,
                Trig::Cos(k) => (k * theta).cos(),
                Trig::Sin(k) => (k * theta).sin(),
            };
            acc += v;
        }
        acc
    }

    /// Exact partial derivative along `axis` (0 = x, 1 = y).
    ///
    /// Uses `dr/dx = x/r`, `dtheta/dx = -y/r^2`, `dtheta/dy = x/r^2` and
    /// polynomial rules; valid away from r = 0.
    pub fn differentiate(&self, axis: usize) -> Expr {
        let mut out: Vec<ExprTerm> = Vec::new();
        for term in &self.terms {
            // product rule piece 1: polynomial factor
            let dp = poly_diff(&term.poly, axis);
            if !dp.is_empty() {
                out.push(ExprTerm {
                    weight: term.weight,
                    poly: dp,
                    mu: term.mu,
                    trig: term.trig,
                });
            }
            // piece 2: radial factor, d(r^mu) = mu * (x or y) * r^(mu-2)
            if term.mu != 0.0 {
                out.push(ExprTerm {
                    weight: term.weight * term.mu,
                    poly: poly_mul_axis(&term.poly, axis),
                    mu: term.mu - 2.0,
                    trig: term.trig,
                });
            }
            // piece 3: angular factor
            match term.trig {
                Trig::One => {}
                Trig::Cos(k) => {
                    // d cos(k theta) = -k sin(k theta) dtheta
                    let (sign, other_axis) = if axis == 0 { (1.0, 1) } else { (-1.0, 0) };
                    out.push(ExprTerm {
                        weight: term.weight * k * sign,
                        poly: poly_mul_axis(&term.poly, other_axis),
                        mu: term.mu - 2.0,
                        trig: Trig::Sin(k),
                    });
                }
                Trig::Sin(k) => {
                    // d sin(k theta) = k cos(k theta) dtheta
                    let (sign, other_axis) = if axis == 0 { (-1.0, 1) } else { (1.0, 0) };
                    out.push(ExprTerm {
                        weight: term.weight * k * sign,
                        poly: poly_mul_axis(&term.poly, other_axis),
                        mu: term.mu - 2.0,
                        trig: Trig::Cos(k),
                    });
                }
            }
        }
        let mut expr = Expr { terms: out };
        expr.merge();
        expr
    }

    /// Merge terms with identical radial and angular factors.
    fn merge(&mut self) {
        let mut groups: BTreeMap<(u64, u8, u64), Poly> = BTreeMap::new();
        for term in &self.terms {
            let (kind, kappa) = match term.trig {
                Trig::One => (0u8, 0.0),
                Trig::Cos(k) => (1, k),
                Trig::Sin(k) => (2, k),
            };
            let key = (term.mu.to_bits(), kind, kappa.to_bits());
            let entry = groups.entry(key).or_default();
            for (&e, &c) in &term.poly {
                *entry.entry(e).or_insert(0.0) += term.weight * c;
            }
        }
        self.terms = groups
            .into_iter()
            .filter_map(|((mu_bits, kind, kappa_bits), poly)| {
                let poly: Poly = poly.into_iter().filter(|(_, c)| *c != 0.0).collect();
                if poly.is_empty() {
                    return None;
                }
                let kappa = f64::from_bits(kappa_bits);
                let trig = match kind {
                    0 => Trig::One,
                    1 => Trig::Cos(kappa),
                    _ => Trig::Sin(kappa),
                };
                Some(ExprTerm {
                    weight: 1.0,
                    poly,
                    mu: f64::from_bits(mu_bits),
                    trig,
                })
            })
            .collect();
    }

    pub fn laplacian(&self) -> Expr {
        let mut out = self.differentiate(0).differentiate(0);
        out.terms
            .extend(self.differentiate(1).differentiate(1).terms);
        out.merge();
        out
    }
}

/// Exact solution bundle: the deflection and its derivatives up to second
/// order, all as term expressions.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub u: Expr,
    pub grad: [Expr; 2],
    pub hess: [Expr; 3], // uxx, uxy, uyy
}

impl ExactSolution {
    fn from_u(u: Expr) -> Self {
        let ux = u.differentiate(0);
        let uy = u.differentiate(1);
        let hess = [
            ux.differentiate(0),
            ux.differentiate(1),
            uy.differentiate(1),
        ];
        Self {
            u,
            grad: [ux, uy],
            hess,
        }
    }

    pub fn eval_u(&self, p: Point2) -> f64 {
        self.u.eval(p)
    }

    pub fn eval_grad(&self, p: Point2) -> Point2 {
        Point2::new(self.grad[0].eval(p), self.grad[1].eval(p))
    }

    pub fn eval_hess(&self, p: Point2) -> SymTensor2 {
        SymTensor2::new(self.hess[0].eval(p), self.hess[1].eval(p), self.hess[2].eval(p))
    }

    /// Exact moment field `sigma = M hess(u)`.
    pub fn moment(&self, p: Point2, mat: &MaterialParams) -> SymTensor2 {
        apply_m(self.eval_hess(p), mat)
    }
}

/// Transverse load.
#[derive(Debug, Clone)]
pub enum Load {
    Constant(f64),
    Expr(Expr),
}

impl Load {
    pub fn eval(&self, p: Point2) -> f64 {
        match self {
            Load::Constant(c) => *c,
            Load::Expr(e) => e.eval(p),
        }
    }
}

/// A benchmark problem: domain, boundary labels, material, load, and
/// (when available) the exact solution.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub domain: DomainName,
    pub bc: BcScheme,
    pub default_n0: usize,
    pub material: MaterialParams,
    pub load: Load,
    pub exact: Option<ExactSolution>,
    /// Corner where derivatives of the exact solution blow up; elements
    /// touching it get higher quadrature degrees.
    pub singular_corner: Option<Point2>,
}

impl ProblemSpec {
    pub fn exact(&self) -> Result<&ExactSolution> {
        self.exact.as_ref().ok_or_else(|| {
            HhjError::ExactSolutionUnavailable(format!("problem {}", self.name))
        })
    }
}

/// Corner-singularity exponent of the clamped plate on the 270-degree
/// sector.
pub const LSHAPE_GAMMA: f64 = 0.544483736782464;

/// Clamped L-shape with a singular exact solution
/// `u = (x^2 - 1)^2 (y^2 - 1)^2 r^(1+gamma) g(theta)`.
pub fn problem1() -> ProblemSpec {
    let gamma = LSHAPE_GAMMA;
    let omega = 1.5 * PI;
    let gm = gamma - 1.0;
    let gp = gamma + 1.0;
    // g(theta) = a * (cos(gm theta) - cos(gp theta))
    //          - (sin(gm theta)/gm - sin(gp theta)/gp) * d
    let a = (gm * omega).sin() / gm - (gp * omega).sin() / gp;
    let d = (gm * omega).cos() - (gp * omega).cos();

    // (x^2-1)^2 (y^2-1)^2 expanded
    let mut cutoff: Vec<(u32, u32, f64)> = Vec::new();
    let quartic = [(0u32, 1.0f64), (2, -2.0), (4, 1.0)];
    for &(px, cx) in &quartic {
        for &(py, cy) in &quartic {
            cutoff.push((px, py, cx * cy));
        }
    }
    let poly = poly_from(&cutoff);
    let mu = 1.0 + gamma;
    let u = Expr {
        terms: vec![
            ExprTerm {
                weight: a,
                poly: poly.clone(),
                mu,
                trig: Trig::Cos(gm),
            },
            ExprTerm {
                weight: -a,
                poly: poly.clone(),
                mu,
                trig: Trig::Cos(gp),
            },
            ExprTerm {
                weight: -d / gm,
                poly: poly.clone(),
                mu,
                trig: Trig::Sin(gm),
            },
            ExprTerm {
                weight: d / gp,
                poly,
                mu,
                trig: Trig::Sin(gp),
            },
        ],
    };
    let material = MaterialParams::default();
    let exact = ExactSolution::from_u(u);
    // div div M hess u = factor/(1-nu^2) * biharmonic(u) for constant
    // coefficients
    let mut f = exact.u.laplacian().laplacian();
    let scale = material.bending_factor / (1.0 - material.nu * material.nu);
    for t in f.terms.iter_mut() {
        t.weight *= scale;
    }
    ProblemSpec {
        name: "lshape-clamped",
        domain: DomainName::LShape,
        bc: BcScheme::AllClamped,
        default_n0: 2,
        material,
        load: Load::Expr(f),
        exact: Some(exact),
        singular_corner: Some(Point2::new(0.0, 0.0)),
    }
}

/// L-shape with free reentrant edges, simply supported elsewhere, under
/// the constant load f = 10; no closed-form solution.
pub fn problem2() -> ProblemSpec {
    ProblemSpec {
        name: "lshape-mixed",
        domain: DomainName::LShape,
        bc: BcScheme::LShapeMixed,
        default_n0: 2,
        material: MaterialParams::default(),
        load: Load::Constant(10.0),
        exact: None,
        singular_corner: None,
    }
}

/// Clamped unit square with the polynomial solution
/// `u = x^2 (x-1)^2 y^2 (y-1)^2`.
pub fn problem3() -> ProblemSpec {
    // x^2 (x-1)^2 = x^4 - 2 x^3 + x^2, same in y
    let quartic = [(2u32, 1.0f64), (3, -2.0), (4, 1.0)];
    let mut terms = Vec::new();
    for &(px, cx) in &quartic {
        for &(py, cy) in &quartic {
            terms.push((px, py, cx * cy));
        }
    }
    let u = Expr::polynomial(&terms);
    let material = MaterialParams::default();
    let exact = ExactSolution::from_u(u);
    let mut f = exact.u.laplacian().laplacian();
    let scale = material.bending_factor / (1.0 - material.nu * material.nu);
    for t in f.terms.iter_mut() {
        t.weight *= scale;
    }
    ProblemSpec {
        name: "square-smooth",
        domain: DomainName::UnitSquare,
        bc: BcScheme::AllClamped,
        default_n0: 8,
        material,
        load: Load::Expr(f),
        exact: Some(exact),
        singular_corner: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(e: &Expr, p: Point2, h: f64) -> Point2 {
        Point2::new(
            (e.eval(Point2::new(p.x + h, p.y)) - e.eval(Point2::new(p.x - h, p.y))) / (2.0 * h),
            (e.eval(Point2::new(p.x, p.y + h)) - e.eval(Point2::new(p.x, p.y - h))) / (2.0 * h),
        )
    }

    fn interior_points_lshape(n: usize, seed: u64) -> Vec<Point2> {
        use rand::prelude::*;
        let mut rng = StdRng::seed_from_u64(seed);
        let mut out = Vec::new();
        while out.len() < n {
            let x: f64 = rng.gen_range(-0.95..0.95);
            let y: f64 = rng.gen_range(-0.95..0.95);
            let inside = !(x >= -0.02 && y <= 0.02); // keep clear of the slit
            if inside && (x.abs() > 0.05 || y.abs() > 0.05) {
                out.push(Point2::new(x, y));
            }
        }
        out
    }

    #[test]
    fn radial_term_derivative_matches_fd() {
        // single term r^mu, no polynomial, no angular part
        let mu = 1.7;
        let e = Expr {
            terms: vec![ExprTerm {
                weight: 1.0,
                poly: poly_from(&[(0, 0, 1.0)]),
                mu,
                trig: Trig::One,
            }],
        };
        let dx = e.differentiate(0);
        for p in [Point2::new(0.4, 0.2), Point2::new(-0.3, 0.6)] {
            let fd = fd_grad(&e, p, 1e-6);
            assert!((dx.eval(p) - fd.x).abs() < 1e-8);
        }
    }

    #[test]
    fn polynomial_terms_differentiate_exactly() {
        let e = Expr::polynomial(&[(2, 1, 3.0), (0, 3, -1.0)]);
        let dx = e.differentiate(0);
        let dy = e.differentiate(1);
        let p = Point2::new(1.3, -0.7);
        assert!((dx.eval(p) - 6.0 * p.x * p.y).abs() < 1e-12);
        assert!((dy.eval(p) - (3.0 * p.x * p.x - 3.0 * p.y * p.y)).abs() < 1e-12);
    }

    #[test]
    fn harmonic_identity_for_trig_terms() {
        // r^k cos(k theta) is harmonic
        for k in [0.7, 1.3, 2.0] {
            let e = Expr {
                terms: vec![ExprTerm {
                    weight: 1.0,
                    poly: poly_from(&[(0, 0, 1.0)]),
                    mu: k,
                    trig: Trig::Cos(k),
                }],
            };
            let lap = e.laplacian();
            for p in [Point2::new(0.3, 0.4), Point2::new(-0.5, 0.1)] {
                assert!(lap.eval(p).abs() < 1e-10, "k = {k}: {}", lap.eval(p));
            }
        }
    }

    #[test]
    fn problem1_boundary_traces_vanish() {
        let p1 = problem1();
        let exact = p1.exact().unwrap();
        // 200 samples along the L-shape boundary, clear of the corner itself
        let mut samples = Vec::new();
        for i in 1..50 {
            let t = i as f64 / 50.0;
            samples.push((Point2::new(t, 0.0), Point2::new(0.0, -1.0))); // reentrant horizontal
            samples.push((Point2::new(0.0, -t), Point2::new(1.0, 0.0))); // reentrant vertical
            samples.push((Point2::new(1.0, t), Point2::new(1.0, 0.0))); // outer right
            samples.push((Point2::new(-1.0 + 2.0 * t, 1.0), Point2::new(0.0, 1.0))); // top
        }
        let mut worst: f64 = 0.0;
        for (p, n) in samples {
            let u = exact.eval_u(p).abs();
            let dn = exact.eval_grad(p).dot(n).abs();
            worst = worst.max(u).max(dn);
        }
        assert!(worst <= 1e-9, "boundary trace {worst:.3e}");
    }

    #[test]
    fn problem1_value_and_outer_edge() {
        let p1 = problem1();
        let exact = p1.exact().unwrap();
        // u vanishes along x = 1 through the cutoff factor
        for y in [0.1, 0.5, 0.9] {
            assert!(exact.eval_u(Point2::new(1.0, y)).abs() < 1e-12);
        }
        // near the corner u stays finite and tends to zero
        assert!(exact.eval_u(Point2::new(1e-6, 1e-6)).abs() < 1e-8);
    }

    #[test]
    fn problem1_derivative_chain_matches_finite_differences() {
        let p1 = problem1();
        let exact = p1.exact().unwrap();
        let pts = interior_points_lshape(50, 41);
        for p in pts {
            let near_corner = p.norm() < 0.05;
            let (h, tol) = if near_corner { (1e-4, 1e-3) } else { (1e-4, 1e-5) };

            let fd = fd_grad(&exact.u, p, h);
            let g = exact.eval_grad(p);
            let scale = 1.0 + g.norm();
            assert!(
                g.sub(fd).norm() <= tol * scale,
                "grad mismatch at ({}, {}): {:?} vs {:?}",
                p.x,
                p.y,
                g,
                fd
            );

            let hxx = fd_grad(&exact.grad[0], p, h);
            let hyy = fd_grad(&exact.grad[1], p, h);
            let hess = exact.eval_hess(p);
            let hscale = 1.0 + hess.frob_norm_sq().sqrt();
            assert!((hess.s11 - hxx.x).abs() <= tol * hscale);
            assert!((hess.s12 - hxx.y).abs() <= tol * hscale);
            assert!((hess.s22 - hyy.y).abs() <= tol * hscale);
        }
    }

    #[test]
    fn problem1_load_matches_fd_bilaplacian_of_hessian_trace() {
        let p1 = problem1();
        let exact = p1.exact().unwrap();
        let trace = |p: Point2| {
            let h = exact.eval_hess(p);
            h.s11 + h.s22
        };
        let scale = 1.0 / (1.0 - 0.3 * 0.3);
        for p in interior_points_lshape(20, 97) {
            let near_corner = p.norm() < 0.05;
            let tol = if near_corner { 1e-3 } else { 1e-5 };
            let h = 1e-4;
            let lap = (trace(Point2::new(p.x + h, p.y))
                + trace(Point2::new(p.x - h, p.y))
                + trace(Point2::new(p.x, p.y + h))
                + trace(Point2::new(p.x, p.y - h))
                - 4.0 * trace(p))
                / (h * h);
            let f = p1.load.eval(p);
            let want = scale * lap;
            assert!(
                (f - want).abs() <= tol * (1.0 + want.abs()),
                "f mismatch at ({}, {}): {f} vs {want}",
                p.x,
                p.y
            );
        }
    }

    #[test]
    fn problem2_has_load_but_no_exact_solution() {
        let p2 = problem2();
        assert!((p2.load.eval(Point2::new(0.3, 0.7)) - 10.0).abs() < 1e-15);
        assert!(matches!(
            p2.exact(),
            Err(HhjError::ExactSolutionUnavailable(_))
        ));
        assert_eq!(p2.bc, BcScheme::LShapeMixed);
    }

    #[test]
    fn problem3_values_and_clamped_compatibility() {
        let p3 = problem3();
        let exact = p3.exact().unwrap();
        let got = exact.eval_u(Point2::new(0.5, 0.5));
        assert!((got - 1.0 / 256.0).abs() < 1e-15);
        for y in [0.2, 0.5, 0.8] {
            for x in [0.0, 1.0] {
                assert!(exact.eval_u(Point2::new(x, y)).abs() < 1e-15);
                assert!(exact.eval_grad(Point2::new(x, y)).x.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn problem3_load_is_quartic_polynomial() {
        let p3 = problem3();
        let Load::Expr(f) = &p3.load else {
            panic!("expected expression load");
        };
        for term in &f.terms {
            assert_eq!(term.mu, 0.0);
            assert!(matches!(term.trig, Trig::One));
            for (&(a, b), _) in &term.poly {
                assert!(a + b <= 4, "degree {} {}", a, b);
            }
        }
        // hand expansion: biharmonic of g(x) g(y) with g = t^2 (t-1)^2 is
        // g''''(x) g(y) + 2 g''(x) g''(y) + g(x) g''''(y), g'''' = 24.
        let g = |t: f64| t * t * (t - 1.0) * (t - 1.0);
        let gdd = |t: f64| 12.0 * t * t - 12.0 * t + 2.0;
        let scale = 1.0 / (1.0 - 0.09);
        for (x, y) in [(0.5, 0.5), (0.25, 0.75), (0.1, 0.3), (1.0 / 3.0, 2.0 / 3.0)] {
            let want = scale * (24.0 * g(y) + 2.0 * gdd(x) * gdd(y) + 24.0 * g(x));
            let got = f.eval(Point2::new(x, y));
            assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn problem3_bilaplacian_matches_fd() {
        let p3 = problem3();
        let exact = p3.exact().unwrap();
        let p = Point2::new(0.5, 0.5);
        let h = 1e-3;
        let lap_u = |p: Point2| {
            let hs = exact.eval_hess(p);
            hs.s11 + hs.s22
        };
        let fd = (lap_u(Point2::new(p.x + h, p.y))
            + lap_u(Point2::new(p.x - h, p.y))
            + lap_u(Point2::new(p.x, p.y + h))
            + lap_u(Point2::new(p.x, p.y - h))
            - 4.0 * lap_u(p))
            / (h * h);
        let want = fd / (1.0 - 0.09);
        let got = p3.load.eval(p);
        assert!((got - want).abs() < 1e-6 * (1.0 + want.abs()));
    }

    #[test]
    fn problem3_grad_hess_fd_consistency() {
        use rand::prelude::*;
        let p3 = problem3();
        let exact = p3.exact().unwrap();
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let p = Point2::new(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
            let h = 1e-4;
            let fd = fd_grad(&exact.u, p, h);
            assert!(exact.eval_grad(p).sub(fd).norm() < 1e-5 * (1.0 + fd.norm()));
            let hxx = fd_grad(&exact.grad[0], p, h);
            let hess = exact.eval_hess(p);
            assert!((hess.s11 - hxx.x).abs() < 1e-5 * (1.0 + hxx.x.abs()));
            assert!((hess.s12 - hxx.y).abs() < 1e-5 * (1.0 + hxx.y.abs()));
        }
    }
}
