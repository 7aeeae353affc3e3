// split interior vs boundary error for ring-min-norm and vertex-layer recoveries
use hhj::assembly::*;
use hhj::estimators::{FnTensor, TensorField};
use hhj::fe_spaces::{build_spaces, MomentField, SymTensor2};
use hhj::manufactured::problem3;
use hhj::mesh::{build_domain, refine_uniform, BcScheme, DomainName, Mesh, Point2};
use hhj::postprocess::{recover_rh, NodalTensorField};
use hhj::quadrature::{triangle_rule, ElementRules};
use nalgebra::{DMatrix, DVector};

fn recover_minnorm(mesh: &Mesh, sigma: &MomentField) -> NodalTensorField {
    let mut tensors = Vec::new();
    for z in 0..mesh.n_vertices() {
        let patch = mesh.vertex_patch(z, 0).unwrap();
        let edges = mesh.patch_edges(&patch);
        let n = edges.len();
        let mut a = DMatrix::<f64>::zeros(n, 9);
        let mut d = DVector::<f64>::zeros(n);
        for (row, &e) in edges.iter().enumerate() {
            let edge = &mesh.edges[e];
            let nrm = edge.normal;
            let m = mesh.vertices[edge.v[0]].midpoint(mesh.vertices[edge.v[1]]);
            let (n1, n2) = (nrm.x, nrm.y);
            let vals = [n1*n1, n1*n1*m.x, n1*n1*m.y, 2.0*n1*n2, 2.0*n1*n2*m.x, 2.0*n1*n2*m.y, n2*n2, n2*n2*m.x, n2*n2*m.y];
            for (c, v) in vals.into_iter().enumerate() { a[(row, c)] = v; }
            d[row] = sigma.edge_values[e];
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let c = svd.solve(&d, 1e-10 * smax).unwrap();
        let p = mesh.vertices[z];
        tensors.push(SymTensor2::new(
            c[0] + c[1]*p.x + c[2]*p.y,
            c[3] + c[4]*p.x + c[5]*p.y,
            c[6] + c[7]*p.x + c[8]*p.y,
        ));
    }
    NodalTensorField { tensors }
}

fn split(mesh: &Mesh, star: &dyn TensorField, exact: &dyn TensorField) -> (f64, f64) {
    let rule = triangle_rule(6);
    let mut int_sq = 0.0;
    let mut bnd_sq = 0.0;
    for t in 0..mesh.n_triangles() {
        let v = rule.integrate(mesh, t, |x| {
            exact.eval(mesh, t, x).sub(star.eval(mesh, t, x)).frob_norm_sq()
        });
        if mesh.triangles[t].v.iter().any(|&z| mesh.boundary_vertex[z]) {
            bnd_sq += v;
        } else {
            int_sq += v;
        }
    }
    (int_sq, bnd_sq)
}

fn main() {
    let p3 = problem3();
    let exact = p3.exact().unwrap();
    let paper: [f64; 4] = [1.615e-2, 4.977e-3, 1.289e-3, 3.241e-4];
    let mut mesh = build_domain(DomainName::UnitSquare, 8, BcScheme::AllClamped).unwrap();
    for level in 0..4 {
        let spaces = build_spaces(&mesh);
        let rules = ElementRules::uniform(6);
        let f = |x: Point2| p3.load.eval(x);
        let system = assemble_system(&mesh, &spaces, &p3.material, &f, &rules).unwrap();
        let (sigma, _u) = solve_saddle(&mesh, &spaces, &system, 1e-9).unwrap();
        let sigma_exact = FnTensor(|x| exact.moment(x, &p3.material));

        let star_v = recover_rh(&mesh, &sigma, 1e-8, 3).unwrap();
        let (iv, bv) = split(&mesh, &star_v, &sigma_exact);
        let star_m = recover_minnorm(&mesh, &sigma);
        let (im, bm) = split(&mesh, &star_m, &sigma_exact);
        let req_v = (paper[level].powi(2) - iv).max(0.0).sqrt();
        let req_m = (paper[level].powi(2) - im).max(0.0).sqrt();
        println!("N = {:<6}", mesh.n_triangles());
        println!("  vertexlayer: total {:.4e} int {:.4e} bnd {:.4e} | required-bnd {:.4e}",
                 (iv+bv).sqrt(), iv.sqrt(), bv.sqrt(), req_v);
        println!("  ringminnorm: total {:.4e} int {:.4e} bnd {:.4e} | required-bnd {:.4e}",
                 (im+bm).sqrt(), im.sqrt(), bm.sqrt(), req_m);
        mesh = refine_uniform(&mesh).unwrap();
    }
}
