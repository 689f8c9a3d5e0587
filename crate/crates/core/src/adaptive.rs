//! Dörfler marking, the solve–estimate–mark–refine loop and the monitors
//! recorded along the way.

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;

use crate::assembly::{assemble_saddle, solve_saddle, SaddleSystem, SolverKind};
use crate::error::{Error, Result};
use crate::estimator::{estimate_gradients, EstimatorReport, JumpMode, LoadData};
use crate::mesh::{nesting_sets, overlap_constant, refinement_ratio, NestingSets, Point, Triangulation};
use crate::norms::exact_errors;
use crate::problem::{ExactSolution, LoadFunction};
use crate::quadrature::dunavant6;
use crate::spaces::{div, frobenius2, grad_sub, DiscreteSolution, Grad};

/// Reduction factor of the estimator under one bisection, `1 - 2^{-1/2}`.
pub const RHO: f64 = 1.0 - FRAC_1_SQRT_2;

/// Slack allowed in the reduction inequalities.
pub const REDUCTION_SLACK: f64 = 1e-9;

/// Minimal Dörfler set: elements sorted by `η_K²` descending (ties by
/// ascending id), shortest prefix carrying a `θ` share of the total.
pub fn dorfler_mark(eta2: &[f64], theta: f64) -> Result<Vec<usize>> {
    check_theta(theta)?;
    let total: f64 = eta2.iter().sum();
    if !(total > 0.0) {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..eta2.len()).collect();
    order.sort_by(|&a, &b| eta2[b].total_cmp(&eta2[a]).then(a.cmp(&b)));
    let target = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for k in order {
        marked.push(k);
        acc += eta2[k];
        if acc >= target {
            break;
        }
    }
    debug_assert!(acc - eta2[*marked.last().unwrap()] < target);
    Ok(marked)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::param("theta", format!("must lie in (0, 1), got {theta}")));
    }
    Ok(())
}

/// Run parameters of the adaptive loop.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveParams {
    pub theta: f64,
    /// Stop once `η < eps`.
    pub eps: f64,
    pub mu: f64,
    /// Weight of the volume term in `η̃² = β₁ Σ h_K²‖g‖² + η²`.
    pub beta1: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Largest admissible number of elements.
    pub dof_cap: usize,
    /// Optional hard limit on the number of solves.
    pub max_iter: Option<usize>,
    pub solver: SolverKind,
    pub jump_mode: JumpMode,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        AdaptiveParams {
            theta: 0.3,
            eps: 1e-3,
            mu: 1.0,
            beta1: 1.0,
            gamma1: 1.0,
            gamma2: 1.0,
            dof_cap: 200_000,
            max_iter: None,
            solver: SolverKind::Direct,
            jump_mode: JumpMode::Difference,
        }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        for (name, v) in [
            ("eps", self.eps),
            ("mu", self.mu),
            ("beta1", self.beta1),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.dof_cap == 0 {
            return Err(Error::param("dof-cap", "must be positive"));
        }
        if self.max_iter == Some(0) {
            return Err(Error::param("max-iter", "must be positive"));
        }
        Ok(())
    }
}

/// Checks comparing an iterate with its predecessor.
#[derive(Clone, Debug, PartialEq)]
pub struct StepChecks {
    /// `η²(u_{k-1}, T_k)`
    pub est_lhs: f64,
    /// `η²(u_{k-1}, T_{k-1}) - ρ η²(u_{k-1}, T_{k-1} \ T_k)`
    pub est_rhs: f64,
    /// `Σ_{T_k} h²‖g‖²`
    pub vol_lhs: f64,
    /// `Σ_{T_{k-1}} h²‖g‖² - ρ Σ_{refined} h²‖g‖²`
    pub vol_rhs: f64,
    /// `|M_{k-1,k}|`
    pub neighborhood: usize,
    /// `|T_{k-1} \ T_k|`
    pub refined: usize,
    /// `max_K |η_K(u_k) - η_K(u_{k-1})| / ‖∇(u_k - u_{k-1})‖_{ω_K}`
    pub continuity: f64,
    /// `(‖∇(u_k - u_{k-1})‖ + ‖p_k - p_{k-1}‖) / η(u_{k-1}, M)`
    pub discrete_reliability: f64,
    /// `sup_v Res_{k-1}(v) / ((Σ_{refined} h²‖g‖²)^{1/2} ‖∇_k v‖)` over the
    /// fine CR space. It bounds the velocity quasi-orthogonality ratio.
    pub residual_bound: f64,
    /// Velocity quasi-orthogonality constant, with an exact solution.
    pub qo_velocity: Option<f64>,
    /// Pressure quasi-orthogonality constant, with an exact solution.
    pub qo_pressure: Option<f64>,
}

impl StepChecks {
    pub fn estimator_reduction_holds(&self) -> bool {
        self.est_lhs <= self.est_rhs + REDUCTION_SLACK
    }

    pub fn volume_reduction_holds(&self) -> bool {
        self.vol_lhs <= self.vol_rhs + REDUCTION_SLACK
    }
}

/// One row of the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub iter: usize,
    pub nelems: usize,
    /// Velocity plus pressure unknowns.
    pub ndofs: usize,
    pub eta2: f64,
    pub eta_tilde2: f64,
    pub osc2: f64,
    pub vol2: f64,
    pub nmarked: usize,
    /// Refinement ratio against the previous mesh; 1 on the first mesh.
    pub gamma: f64,
    pub err_u2: Option<f64>,
    pub err_p2: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    /// `max_K |div u_K|`
    pub div_max: f64,
    pub grad_norm: f64,
    /// `max_j |Res(φ_j)|`
    pub galerkin_max: f64,
    pub solver_residual: f64,
    pub marked_centroids: Vec<Point>,
    pub checks: Option<StepChecks>,
}

impl StepRecord {
    /// Discrete divergence and Galerkin identity at machine level.
    pub fn solve_is_exact(&self) -> bool {
        self.div_max <= 1e-10 * (1.0 + self.grad_norm) && self.galerkin_max <= 1e-10
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    DofCap,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct AdaptiveTrace {
    pub records: Vec<StepRecord>,
    pub stop: StopReason,
    /// Overlap constant of the initial mesh.
    pub kappa: usize,
    pub initial_elements: usize,
}

impl AdaptiveTrace {
    pub fn truncated(&self) -> bool {
        self.stop == StopReason::DofCap
    }

    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("a trace has at least one record")
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub trace: AdaptiveTrace,
    pub mesh: Triangulation,
    pub solution: DiscreteSolution,
    pub report: EstimatorReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Strategy {
    Dorfler(f64),
    Uniform,
}

/// Adaptive loop: solve, estimate, mark, bisect until `η < eps`, the
/// element cap would be exceeded, or `max_iter` solves were done.
pub fn anfem(t0: &Triangulation, g: &LoadFunction, params: &AdaptiveParams) -> Result<AdaptiveRun> {
    params.validate()?;
    run(t0, g, params, Strategy::Dorfler(params.theta))
}

/// Same loop and monitors, but every element is bisected in every step.
pub fn uniform_refinement(t0: &Triangulation, g: &LoadFunction, params: &AdaptiveParams) -> Result<AdaptiveRun> {
    params.validate()?;
    run(t0, g, params, Strategy::Uniform)
}

struct Previous {
    tri: Triangulation,
    sol: DiscreteSolution,
    report: EstimatorReport,
    grads: Vec<Grad>,
    lambda: Option<f64>,
}

fn run(t0: &Triangulation, g: &LoadFunction, params: &AdaptiveParams, strategy: Strategy) -> Result<AdaptiveRun> {
    let kappa = overlap_constant(t0);
    let exact = g.exact();
    let mut tri = t0.clone();
    let mut prev: Option<Previous> = None;
    let mut records = Vec::new();
    loop {
        let sys = assemble_saddle(&tri, g, params.mu)?;
        let sol = solve_saddle(&tri, &sys, params.solver)?;
        let coeffs = sys.space.coefficients(&sol.velocity)?;
        let galerkin_max = sys
            .momentum_residual(&coeffs, &sol.pressure)
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        let grads = sol.velocity_gradients(&tri);
        let div_max = grads.iter().fold(0.0f64, |m, gk| m.max(div(gk).abs()));
        let grad_norm = grads
            .iter()
            .zip(tri.areas())
            .map(|(gk, a)| a * frobenius2(gk))
            .sum::<f64>()
            .sqrt();

        let data = LoadData::new(&tri, g);
        let report = estimate_gradients(&tri, &grads, &data, params.jump_mode);
        let eta2 = report.eta2_total();
        let eta_tilde2 = report.modified_eta2(params.beta1)?;

        let (err_u2, err_p2, lambda) = match exact {
            Some(ex) => {
                let e = exact_errors(&tri, &sol, ex)?;
                let lambda = e.velocity2 + params.gamma1 * e.pressure2 + params.gamma2 * eta_tilde2;
                (Some(e.velocity2), Some(e.pressure2), Some(lambda))
            }
            None => (None, None, None),
        };

        let (gamma, checks, alpha) = match &prev {
            None => (1.0, None, None),
            Some(p) => {
                let nest = nesting_sets(&p.tri, &tri)?;
                let checks = step_checks(p, &tri, &sys, &sol, &grads, &report, &data, &nest, exact, params)?;
                let alpha = match (lambda, p.lambda) {
                    (Some(l), Some(lp)) if lp > 0.0 => Some(l / lp),
                    _ => None,
                };
                (refinement_ratio(&p.tri, &tri)?, Some(checks), alpha)
            }
        };

        let iter = records.len();
        let mut record = StepRecord {
            iter,
            nelems: tri.num_elements(),
            ndofs: sys.space.dim() + tri.num_elements(),
            eta2,
            eta_tilde2,
            osc2: report.osc2_total(),
            vol2: report.vol2_total(),
            nmarked: 0,
            gamma,
            err_u2,
            err_p2,
            lambda,
            alpha,
            div_max,
            grad_norm,
            galerkin_max,
            solver_residual: sol.residual,
            marked_centroids: Vec::new(),
            checks,
        };

        let stop = if eta2.sqrt() < params.eps {
            Some(StopReason::Converged)
        } else if params.max_iter.is_some_and(|m| iter + 1 >= m) {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if let Some(stop) = stop {
            records.push(record);
            return Ok(AdaptiveRun {
                trace: AdaptiveTrace {
                    records,
                    stop,
                    kappa,
                    initial_elements: t0.num_elements(),
                },
                mesh: tri,
                solution: sol,
                report,
            });
        }

        let marked = match strategy {
            Strategy::Dorfler(theta) => dorfler_mark(&report.eta2, theta)?,
            Strategy::Uniform => (0..tri.num_elements()).collect(),
        };
        record.nmarked = marked.len();
        record.marked_centroids = marked.iter().map(|&k| tri.centroid(k)).collect();
        let next = match strategy {
            Strategy::Uniform => tri.bisect_all()?,
            Strategy::Dorfler(_) => tri.bisect(&marked)?,
        };
        records.push(record);
        if next.num_elements() > params.dof_cap {
            return Ok(AdaptiveRun {
                trace: AdaptiveTrace {
                    records,
                    stop: StopReason::DofCap,
                    kappa,
                    initial_elements: t0.num_elements(),
                },
                mesh: tri,
                solution: sol,
                report,
            });
        }
        prev = Some(Previous {
            tri,
            sol,
            report,
            grads,
            lambda,
        });
        tri = next;
    }
}

#[allow(clippy::too_many_arguments)]
fn step_checks(
    p: &Previous,
    tri: &Triangulation,
    sys: &SaddleSystem,
    sol: &DiscreteSolution,
    grads: &[Grad],
    report: &EstimatorReport,
    data: &LoadData,
    nest: &NestingSets,
    exact: Option<&ExactSolution>,
    params: &AdaptiveParams,
) -> Result<StepChecks> {
    let nf = tri.num_elements();
    // coarse solution seen on the fine mesh
    let frozen: Vec<Grad> = nest.fine_ancestor.iter().map(|&k| p.grads[k]).collect();
    let frozen_report = estimate_gradients(tri, &frozen, data, params.jump_mode);

    let refined_eta2 = p.report.eta2_set(&nest.refined);
    let refined_vol2 = p.report.vol2_set(&nest.refined);
    let est_lhs = frozen_report.eta2_total();
    let est_rhs = p.report.eta2_total() - RHO * refined_eta2;
    let vol_lhs = report.vol2_total();
    let vol_rhs = p.report.vol2_total() - RHO * refined_vol2;

    let diff2: Vec<f64> = (0..nf)
        .map(|t| tri.area(t) * frobenius2(&grad_sub(&grads[t], &frozen[t])))
        .collect();
    let dgrad = diff2.iter().sum::<f64>().sqrt();
    let dp = (0..nf)
        .map(|t| tri.area(t) * (sol.pressure[t] - p.sol.pressure[nest.fine_ancestor[t]]).powi(2))
        .sum::<f64>()
        .sqrt();

    let mut continuity: f64 = 0.0;
    for t in 0..nf {
        let mut patch = diff2[t];
        for e in tri.element_edges(t) {
            for s in tri.edges()[e].elements() {
                if s != t {
                    patch += diff2[s];
                }
            }
        }
        let d = (report.eta[t] - frozen_report.eta[t]).abs();
        if patch > 0.0 {
            continuity = continuity.max(d / patch.sqrt());
        }
    }

    let eta_m = p.report.eta2_set(&nest.neighborhood).sqrt();
    let discrete_reliability = if dgrad + dp == 0.0 {
        0.0
    } else if eta_m > 0.0 {
        (dgrad + dp) / eta_m
    } else {
        f64::INFINITY
    };

    let coarse_sigma = p.sol.stress(&p.tri);
    let frozen_sigma: Vec<Grad> = nest.fine_ancestor.iter().map(|&k| coarse_sigma[k]).collect();
    let residual_bound = sys.residual_dual_norm(tri, &frozen_sigma)? / refined_vol2.sqrt();

    let (qo_velocity, qo_pressure) = match exact {
        Some(ex) => {
            let (num_v, num_p, err_u2, err_p2) = quasi_orthogonality_terms(tri, sol, grads, &frozen, p, nest, ex);
            let cv = num_v.abs() / (err_u2.sqrt() * refined_vol2.sqrt());
            let cp = num_p.abs() / ((refined_vol2.sqrt() + dgrad) * err_p2.sqrt());
            (Some(cv), Some(cp))
        }
        None => (None, None),
    };

    Ok(StepChecks {
        est_lhs,
        est_rhs,
        vol_lhs,
        vol_rhs,
        neighborhood: nest.neighborhood.len(),
        refined: nest.refined.len(),
        continuity,
        discrete_reliability,
        residual_bound,
        qo_velocity,
        qo_pressure,
    })
}

/// `a(u - u_k, u_k - u_{k-1})`, `(p - p_k, p_k - p_{k-1})` and the two
/// squared errors of the current iterate.
fn quasi_orthogonality_terms(
    tri: &Triangulation,
    sol: &DiscreteSolution,
    grads: &[Grad],
    frozen: &[Grad],
    p: &Previous,
    nest: &NestingSets,
    ex: &ExactSolution,
) -> (f64, f64, f64, f64) {
    let rule = dunavant6();
    let parts: Vec<[f64; 4]> = (0..tri.num_elements())
        .into_par_iter()
        .map(|t| {
            let gd = grad_sub(&grads[t], &frozen[t]);
            let pd = sol.pressure[t] - p.sol.pressure[nest.fine_ancestor[t]];
            let mut s = [0.0; 4];
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let x = tri.map_point(t, *b);
                let e = grad_sub(&(ex.grad_u)(x), &grads[t]);
                let ep = (ex.p)(x) - sol.pressure[t];
                s[0] += w * (e[0][0] * gd[0][0] + e[0][1] * gd[0][1] + e[1][0] * gd[1][0] + e[1][1] * gd[1][1]);
                s[1] += w * ep * pd;
                s[2] += w * frobenius2(&e);
                s[3] += w * ep * ep;
            }
            s.map(|v| v * tri.area(t))
        })
        .collect();
    let s = parts
        .iter()
        .fold([0.0; 4], |a, q| [a[0] + q[0], a[1] + q[1], a[2] + q[2], a[3] + q[3]]);
    (sol.mu * s[0], s[1], s[2], s[3])
}

/// Step ratios `α_k = Λ_k / Λ_{k-1}` of a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionSummary {
    pub ratios: Vec<f64>,
    pub max: f64,
    pub geometric_mean: f64,
}

/// Collects the step ratios; stops at the first step where `Λ_{k-1} = 0`.
pub fn contraction_monitor(trace: &AdaptiveTrace) -> Result<ContractionSummary> {
    let mut ratios = Vec::new();
    for w in trace.records.windows(2) {
        let (Some(a), Some(b)) = (w[0].lambda, w[1].lambda) else {
            return Err(Error::InsufficientData("the trace carries no exact errors".into()));
        };
        if a == 0.0 {
            break;
        }
        ratios.push(b / a);
    }
    if ratios.is_empty() {
        return Err(Error::InsufficientData("need at least two iterations".into()));
    }
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let geometric_mean = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    Ok(ContractionSummary {
        ratios,
        max,
        geometric_mean,
    })
}

/// `(‖∇(u_f - u_c)‖ + ‖p_f - p_c‖) / η(u_c, M)` for two nested solves.
pub fn discrete_reliability_check(
    coarse: &Triangulation,
    coarse_sol: &DiscreteSolution,
    fine: &Triangulation,
    fine_sol: &DiscreteSolution,
    g: &LoadFunction,
) -> Result<f64> {
    coarse_sol.velocity.ensure_on(coarse)?;
    fine_sol.velocity.ensure_on(fine)?;
    let nest = nesting_sets(coarse, fine)?;
    let cg = coarse_sol.velocity_gradients(coarse);
    let fg = fine_sol.velocity_gradients(fine);
    let mut dg = 0.0;
    let mut dp = 0.0;
    for (t, &k) in nest.fine_ancestor.iter().enumerate() {
        dg += fine.area(t) * frobenius2(&grad_sub(&fg[t], &cg[k]));
        dp += fine.area(t) * (fine_sol.pressure[t] - coarse_sol.pressure[k]).powi(2);
    }
    let num = dg.sqrt() + dp.sqrt();
    let report = estimate_gradients(coarse, &cg, &LoadData::new(coarse, g), JumpMode::Difference);
    let eta_m = report.eta2_set(&nest.neighborhood).sqrt();
    if num == 0.0 {
        Ok(0.0)
    } else if eta_m > 0.0 {
        Ok(num / eta_m)
    } else {
        Err(Error::InsufficientData(
            "solutions differ but the estimator vanishes on the refined neighbourhood".into(),
        ))
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least two points, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Slope of `log(η + osc)` against `log(#T_k - #T_0)` over the trailing
/// half of the trace.
pub fn rate_fit(trace: &AdaptiveTrace) -> Result<f64> {
    let recs = &trace.records;
    if recs.len() < 5 {
        return Err(Error::InsufficientData(format!("need at least 5 iterations, got {}", recs.len())));
    }
    let n0 = trace.initial_elements;
    let (x, y): (Vec<f64>, Vec<f64>) = recs[recs.len() / 2..]
        .iter()
        .filter(|r| r.nelems > n0)
        .map(|r| (((r.nelems - n0) as f64).ln(), (r.eta2.sqrt() + r.osc2.sqrt()).ln()))
        .unzip();
    fit_slope(&x, &y)
}

/// Outcome of one run in the marking-parameter sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdRow {
    pub theta: f64,
    pub iterations: usize,
    pub final_elements: usize,
    pub final_eta: f64,
    /// Mean of `|M_k| / #T_k` over the marking steps.
    pub marked_fraction: f64,
    pub contraction: Option<f64>,
    pub rate: Option<f64>,
}

/// Runs the loop once per `θ` and tabulates convergence, contraction and
/// rate. Nothing is asserted.
pub fn marking_threshold_table(
    t0: &Triangulation,
    g: &LoadFunction,
    params: &AdaptiveParams,
    thetas: &[f64],
) -> Result<Vec<ThresholdRow>> {
    thetas
        .iter()
        .map(|&theta| {
            let p = AdaptiveParams { theta, ..params.clone() };
            let run = anfem(t0, g, &p)?;
            let recs = &run.trace.records;
            let steps: Vec<&StepRecord> = recs.iter().filter(|r| r.nmarked > 0).collect();
            let marked_fraction = if steps.is_empty() {
                0.0
            } else {
                steps.iter().map(|r| r.nmarked as f64 / r.nelems as f64).sum::<f64>() / steps.len() as f64
            };
            Ok(ThresholdRow {
                theta,
                iterations: recs.len(),
                final_elements: run.trace.last().nelems,
                final_eta: run.trace.last().eta2.sqrt(),
                marked_fraction,
                contraction: contraction_monitor(&run.trace).ok().map(|c| c.geometric_mean),
                rate: rate_fit(&run.trace).ok(),
            })
        })
        .collect()
}

/// Median distance from `point` of the marked-element centroids, per
/// marking step.
pub fn marked_distance_medians(trace: &AdaptiveTrace, point: Point) -> Vec<f64> {
    trace
        .records
        .iter()
        .filter(|r| !r.marked_centroids.is_empty())
        .map(|r| {
            let mut d: Vec<f64> = r
                .marked_centroids
                .iter()
                .map(|c| ((c[0] - point[0]).powi(2) + (c[1] - point[1]).powi(2)).sqrt())
                .collect();
            d.sort_by(f64::total_cmp);
            let m = d.len();
            if m % 2 == 1 {
                d[m / 2]
            } else {
                0.5 * (d[m / 2 - 1] + d[m / 2])
            }
        })
        .collect()
}
