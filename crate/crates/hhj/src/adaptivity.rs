//! The Solve-Estimate-Mark-Refine loop with Doerfler marking.

use crate::assembly::{assemble_system, solve_saddle};
use crate::estimators::{
    data_oscillation, error_u_2h, error_u_h1, eta_indicator, moment_l2_distance, zeta_indicator,
    ElementTensors, ErrorReport, FnTensor, IndicatorField,
};
use crate::fe_spaces::{build_spaces, interpolate_pih};
use crate::manufactured::ProblemSpec;
use crate::mesh::{build_domain, refine_nvb, Mesh};
use crate::postprocess::{build_uhstar, recover_kh, recover_rh};
use crate::quadrature::{edge_rule, ElementRules};
use crate::{HhjError, Result};

/// Which indicator drives marking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Eta,
    Zeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineMode {
    Adaptive,
    Uniform,
}

#[derive(Debug, Clone)]
pub struct AfemConfig {
    pub problem: ProblemSpec,
    pub estimator: Estimator,
    /// Doerfler marking fraction.
    pub theta: f64,
    pub mode: RefineMode,
    pub max_loops: usize,
    pub max_elements: usize,
    /// Initial subdivision; 0 picks the problem default.
    pub n0: usize,
    pub solver_tol: f64,
    pub cg_tol: f64,
    pub quad_degree: usize,
    /// Quadrature degree on elements touching the singular corner.
    pub corner_quad_degree: usize,
    /// Rank tolerance and enlargement cap of the moment recovery.
    pub recovery_rank_tol: f64,
    pub recovery_max_layers: usize,
}

impl AfemConfig {
    pub fn new(problem: ProblemSpec) -> Self {
        Self {
            problem,
            estimator: Estimator::Eta,
            theta: 0.6,
            mode: RefineMode::Adaptive,
            max_loops: 10,
            max_elements: usize::MAX,
            n0: 0,
            solver_tol: 1e-9,
            cg_tol: 1e-10,
            quad_degree: 6,
            corner_quad_degree: 10,
            recovery_rank_tol: 1e-8,
            recovery_max_layers: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(HhjError::InvalidInput(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if self.max_loops < 1 {
            return Err(HhjError::InvalidInput("max_loops must be >= 1".into()));
        }
        Ok(())
    }

    fn element_rules(&self, mesh: &Mesh) -> ElementRules {
        match self.problem.singular_corner {
            Some(corner) => {
                ElementRules::with_corner(mesh, self.quad_degree, corner, self.corner_quad_degree)
            }
            None => ElementRules::uniform(self.quad_degree),
        }
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone)]
pub struct ConvergenceRecord {
    pub loop_index: usize,
    pub n_elements: usize,
    pub dof_sigma: usize,
    pub dof_u: usize,
    pub h_max: f64,
    pub report: ErrorReport,
}

#[derive(Debug, Clone)]
pub struct MarkResult {
    pub marked: Vec<usize>,
    /// Set when every indicator is zero: nothing left to refine.
    pub converged: bool,
}

/// Doerfler marking: the shortest descending prefix carrying the fraction
/// `theta` of the total squared indicator. Ties break toward smaller
/// element ids; the greedy prefix has minimal cardinality.
pub fn mark_dorfler(indicators: &IndicatorField, theta: f64) -> MarkResult {
    let mut order: Vec<usize> = (0..indicators.per_element.len()).collect();
    order.sort_by(|&a, &b| {
        indicators.per_element[b]
            .partial_cmp(&indicators.per_element[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    // total accumulated in the same order as the prefix sums so that
    // theta = 1 selects exactly the nonzero indicators
    let total_sq: f64 = order
        .iter()
        .map(|&t| indicators.per_element[t] * indicators.per_element[t])
        .sum();
    if total_sq == 0.0 {
        return MarkResult {
            marked: Vec::new(),
            converged: true,
        };
    }
    let target = theta * total_sq;
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for &t in &order {
        if acc >= target {
            break;
        }
        let v = indicators.per_element[t];
        if v == 0.0 {
            break;
        }
        acc += v * v;
        marked.push(t);
    }
    marked.sort_unstable();
    MarkResult {
        marked,
        converged: false,
    }
}

/// Result of a full adaptive run. `error` carries the first failure, with
/// the records collected so far.
#[derive(Debug)]
pub struct AfemRun {
    pub records: Vec<ConvergenceRecord>,
    pub error: Option<HhjError>,
}

/// Runs the Solve-Estimate-Mark-Refine loop. The observer sees each mesh
/// with its record (for snapshots).
pub fn afem_loop(
    config: &AfemConfig,
    mut observer: Option<&mut dyn FnMut(usize, &Mesh, &ConvergenceRecord)>,
) -> AfemRun {
    let mut records = Vec::new();
    let error = (|| -> Result<()> {
        config.validate()?;
        let n0 = if config.n0 == 0 {
            config.problem.default_n0
        } else {
            config.n0
        };
        let mut mesh = build_domain(config.problem.domain, n0, config.problem.bc)?;
        for loop_index in 0..config.max_loops {
            let record = run_single_loop(config, &mesh, loop_index)?;
            let indicators = record.1;
            let record = record.0;
            if let Some(obs) = observer.as_mut() {
                obs(loop_index, &mesh, &record);
            }
            let n = record.n_elements;
            records.push(record);
            if loop_index + 1 == config.max_loops || n >= config.max_elements {
                break;
            }
            match config.mode {
                RefineMode::Uniform => {
                    mesh = crate::mesh::refine_uniform(&mesh)?;
                }
                RefineMode::Adaptive => {
                    let mark = mark_dorfler(&indicators, config.theta);
                    if mark.converged {
                        break;
                    }
                    mesh = refine_nvb(&mesh, &mark.marked)?;
                }
            }
        }
        Ok(())
    })()
    .err();
    AfemRun { records, error }
}

/// Solve + estimate + measure on one mesh; returns the record and the
/// marking indicator.
fn run_single_loop(
    config: &AfemConfig,
    mesh: &Mesh,
    loop_index: usize,
) -> Result<(ConvergenceRecord, IndicatorField)> {
    let problem = &config.problem;
    let mat = &problem.material;
    let spaces = build_spaces(mesh);
    let rules = config.element_rules(mesh);
    let f = |x| problem.load.eval(x);

    let system = assemble_system(mesh, &spaces, mat, &f, &rules)?;
    let (sigma_h, u_h) = solve_saddle(mesh, &spaces, &system, config.solver_tol)?;
    let u_star = build_uhstar(mesh, &spaces, &sigma_h, &u_h, mat, config.cg_tol)?;
    let sigma_star = recover_rh(
        mesh,
        &sigma_h,
        config.recovery_rank_tol,
        config.recovery_max_layers,
    )?;

    let eta = eta_indicator(mesh, &sigma_h, &u_star, &f, mat, &rules)?;
    let zeta = zeta_indicator(mesh, &sigma_h, &sigma_star, &u_h, &u_star)?;

    let mut report = ErrorReport {
        eta_total: eta.total(),
        zeta_total: zeta.total(),
        oscillation: data_oscillation(mesh, &f, &rules),
        ..Default::default()
    };

    if let Ok(exact) = problem.exact() {
        let sigma_exact = FnTensor(|x| exact.moment(x, mat));
        let sigma_elem = ElementTensors::from_moment(mesh, &sigma_h)?;
        report.moment_l2 = Some(moment_l2_distance(mesh, &sigma_exact, &sigma_elem, &rules));
        report.u_2h = Some(error_u_2h(mesh, &|x| exact.eval_hess(x), &u_star, &rules));
        report.u_h1 = Some(error_u_h1(mesh, &|x| exact.eval_grad(x), &u_h, &rules));
        report.ustar_h1 = Some(error_u_h1(mesh, &|x| exact.eval_grad(x), &u_star, &rules));
        let erule = edge_rule(3);
        let pih = interpolate_pih(mesh, &spaces, &|x| exact.moment(x, mat), &erule);
        let pih_elem = ElementTensors::from_moment(mesh, &pih)?;
        report.pih_closeness = Some(moment_l2_distance(mesh, &pih_elem, &sigma_elem, &rules));
        report.rh_error = Some(moment_l2_distance(mesh, &sigma_exact, &sigma_star, &rules));
        let kh = recover_kh(mesh, &sigma_h)?;
        report.kh_error = Some(moment_l2_distance(mesh, &sigma_exact, &kh, &rules));
    }
    report.finalize();

    let indicators = match config.estimator {
        Estimator::Eta => eta,
        Estimator::Zeta => zeta,
    };
    Ok((
        ConvergenceRecord {
            loop_index,
            n_elements: mesh.n_triangles(),
            dof_sigma: spaces.n_sigma,
            dof_u: spaces.n_u1,
            h_max: mesh.h_max(),
            report,
        },
        indicators,
    ))
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn fit_order(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(HhjError::InvalidInput(
            "order fit needs at least two points".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        return Err(HhjError::InvalidInput("degenerate abscissae in order fit".into()));
    }
    Ok(num / den)
}

/// Abscissa for order fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitAgainst {
    /// Maximum element size h (Table-style orders, positive for decay).
    H,
    /// Element count N (adaptive rates, negative for decay).
    N,
}

/// Fits the convergence order of a record column after skipping the first
/// `skip` rows.
pub fn fit_records(
    records: &[ConvergenceRecord],
    column: &dyn Fn(&ConvergenceRecord) -> Option<f64>,
    against: FitAgainst,
    skip: usize,
) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in records.iter().skip(skip) {
        if let Some(y) = column(record) {
            if y > 0.0 {
                xs.push(match against {
                    FitAgainst::H => record.h_max,
                    FitAgainst::N => record.n_elements as f64,
                });
                ys.push(y);
            }
        }
    }
    fit_order(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manufactured::{problem2, problem3};

    #[test]
    fn dorfler_takes_dominant_element() {
        let ind = IndicatorField {
            per_element: vec![3.0, 2.0, 1.0],
        };
        let mark = mark_dorfler(&ind, 0.6);
        assert_eq!(mark.marked, vec![0]); // 9 >= 0.6 * 14
        assert!(!mark.converged);
    }

    #[test]
    fn dorfler_theta_one_marks_all_nonzero() {
        let ind = IndicatorField {
            per_element: vec![1.0, 0.0, 2.0, 0.5, 0.0],
        };
        let mark = mark_dorfler(&ind, 1.0);
        assert_eq!(mark.marked, vec![0, 2, 3]);
    }

    #[test]
    fn dorfler_equal_indicators() {
        for n in [5usize, 10, 16] {
            let ind = IndicatorField {
                per_element: vec![1.0; n],
            };
            let mark = mark_dorfler(&ind, 0.6);
            assert_eq!(mark.marked.len(), (0.6 * n as f64).ceil() as usize);
        }
    }

    #[test]
    fn dorfler_zero_indicators_signal_convergence() {
        let ind = IndicatorField {
            per_element: vec![0.0; 4],
        };
        let mark = mark_dorfler(&ind, 0.6);
        assert!(mark.converged);
        assert!(mark.marked.is_empty());
    }

    #[test]
    fn dorfler_matches_bruteforce_minimal_cardinality() {
        use rand::prelude::*;
        let mut rng = StdRng::seed_from_u64(37);
        for _case in 0..60 {
            let n = rng.gen_range(1..=12);
            let per_element: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.15) {
                        0.0
                    } else {
                        rng.gen_range(0.0..2.0)
                    }
                })
                .collect();
            let theta = rng.gen_range(0.05..1.0f64);
            let ind = IndicatorField {
                per_element: per_element.clone(),
            };
            let total: f64 = per_element.iter().map(|v| v * v).sum();
            let mark = mark_dorfler(&ind, theta);
            if total == 0.0 {
                assert!(mark.converged);
                continue;
            }
            // brute force: smallest subset cardinality meeting the target
            let target = theta * total;
            let mut best = usize::MAX;
            for mask in 0u32..(1 << n) {
                let sum: f64 = (0..n)
                    .filter(|k| mask & (1 << k) != 0)
                    .map(|k| per_element[k] * per_element[k])
                    .sum();
                // replicate the greedy comparison: accumulate until >= target
                if sum >= target - 1e-12 * total {
                    best = best.min(mask.count_ones() as usize);
                }
            }
            assert_eq!(
                mark.marked.len(),
                best,
                "theta {theta}, indicators {per_element:?}"
            );
            let marked_sum: f64 = mark
                .marked
                .iter()
                .map(|&k| per_element[k] * per_element[k])
                .sum();
            assert!(marked_sum >= target - 1e-12 * total);
        }
    }

    #[test]
    fn fit_order_exact_slopes() {
        let h = [1.0, 0.5, 0.25];
        assert!((fit_order(&h, &[1.0, 0.5, 0.25]).unwrap() - 1.0).abs() < 1e-12);
        assert!((fit_order(&h, &[1.0, 0.25, 0.0625]).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_order(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn single_loop_produces_one_record() {
        let mut config = AfemConfig::new(problem3());
        config.max_loops = 1;
        config.quad_degree = 4;
        let run = afem_loop(&config, None);
        assert!(run.error.is_none(), "{:?}", run.error);
        assert_eq!(run.records.len(), 1);
        let rec = &run.records[0];
        assert_eq!(rec.n_elements, 128);
        assert!(rec.report.moment_l2.unwrap() > 0.0);
        assert!(rec.report.e_h.is_some());
    }

    #[test]
    fn validation_rejects_bad_config() {
        let mut config = AfemConfig::new(problem2());
        config.theta = 0.0;
        assert!(config.validate().is_err());
        let mut config = AfemConfig::new(problem2());
        config.max_loops = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn problem2_records_have_no_exact_errors() {
        let mut config = AfemConfig::new(problem2());
        config.max_loops = 2;
        config.quad_degree = 4;
        let run = afem_loop(&config, None);
        assert!(run.error.is_none(), "{:?}", run.error);
        assert_eq!(run.records.len(), 2);
        for rec in &run.records {
            assert!(rec.report.moment_l2.is_none());
            assert!(rec.report.e_h.is_none());
            assert!(rec.report.eta_total > 0.0);
            assert!(rec.report.zeta_total > 0.0);
        }
        // N grows
        assert!(run.records[1].n_elements > run.records[0].n_elements);
    }

    #[test]
    fn uniform_mode_quadruples_elements() {
        let mut config = AfemConfig::new(problem3());
        config.mode = RefineMode::Uniform;
        config.max_loops = 3;
        config.quad_degree = 4;
        let run = afem_loop(&config, None);
        assert!(run.error.is_none(), "{:?}", run.error);
        let ns: Vec<usize> = run.records.iter().map(|r| r.n_elements).collect();
        assert_eq!(ns, vec![128, 512, 2048]);
    }

    #[test]
    fn afem_loop_is_deterministic() {
        let mut config = AfemConfig::new(problem3());
        config.max_loops = 3;
        config.quad_degree = 4;
        let a = afem_loop(&config, None);
        let b = afem_loop(&config, None);
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.n_elements, y.n_elements);
            assert_eq!(
                x.report.moment_l2.unwrap().to_bits(),
                y.report.moment_l2.unwrap().to_bits()
            );
            assert_eq!(x.report.eta_total.to_bits(), y.report.eta_total.to_bits());
        }
    }
}
