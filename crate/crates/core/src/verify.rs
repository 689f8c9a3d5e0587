//! Property suites behind `afem verify`.
//!
//! Each suite runs a handful of named checks and records pass/fail with a
//! short numeric detail. The mutation mode swaps the edge jump for the sum
//! of the one-sided traces, which the estimator suite must catch.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptive::{anfem, contraction_monitor, AdaptiveParams, AdaptiveRun};
use crate::counterexample::{self, DEFAULT_SIZES};
use crate::error::{Error, Result};
use crate::estimator::JumpMode;
use crate::mesh::{builders, Point, Triangulation};
use crate::problem::LoadFunction;
use crate::quadrature::segment_mean;
use crate::spaces::{FineFunction, SpaceKind};
use crate::transfer::{
    conservative_interpolation, interpolate_discrete, mixed_prolongation, naive_prolongation, nodal_averaging,
    prolongation_constant, refine_region, restriction, Prolongation,
};

pub const VERIFY_SCHEMA: &str = "# afem-verify v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Operators,
    Estimator,
    QuasiOrthogonality,
    Counterexample,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Operators,
        Suite::Estimator,
        Suite::QuasiOrthogonality,
        Suite::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Operators => "operators",
            Suite::Estimator => "estimator",
            Suite::QuasiOrthogonality => "quasi-orthogonality",
            Suite::Counterexample => "counterexample",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
            Error::param("suite", format!("unknown suite `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Use the summed jump instead of the difference.
    pub mutate: bool,
    /// Random fields per mesh in the conservative-interpolation check.
    pub fields: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            mutate: false,
            fields: 100,
        }
    }
}

impl VerifyOptions {
    fn jump_mode(&self) -> JumpMode {
        if self.mutate {
            JumpMode::Sum
        } else {
            JumpMode::Difference
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn suite_passed(&self, suite: Suite) -> bool {
        self.checks.iter().filter(|c| c.suite == suite).all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{VERIFY_SCHEMA}")?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["suite", "check", "status", "detail"])?;
        for c in &self.checks {
            out.write_record([c.suite.name(), c.name, if c.passed { "PASS" } else { "FAIL" }, &c.detail])?;
        }
        out.flush()?;
        Ok(())
    }

    fn push(&mut self, suite: Suite, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check {
            suite,
            name,
            passed,
            detail,
        });
    }
}

pub fn run_suites(suites: &[Suite], opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    for &suite in suites {
        match suite {
            Suite::Operators => operators(&mut report, opts)?,
            Suite::Estimator => estimator(&mut report, opts)?,
            Suite::QuasiOrthogonality => quasi_orthogonality(&mut report, opts)?,
            Suite::Counterexample => counterexample_suite(&mut report)?,
        }
    }
    Ok(report)
}

/// Sum of a few random plane waves in each component.
#[derive(Clone, Debug)]
pub struct SmoothField {
    waves: Vec<[f64; 5]>,
}

impl SmoothField {
    pub fn random(rng: &mut impl Rng) -> Self {
        let waves = (0..6)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    if rng.random_bool(0.5) { 1.0 } else { 0.0 },
                ]
            })
            .collect();
        SmoothField { waves }
    }

    pub fn eval(&self, x: Point) -> [f64; 2] {
        let mut out = [0.0; 2];
        for w in &self.waves {
            out[w[4] as usize] += w[0] * (w[1] * x[0] + w[2] * x[1] + w[3]).sin();
        }
        out
    }
}

/// Three meshes of different character: structured, graded towards the
/// re-entrant corner, and randomly bisected.
pub fn sample_meshes(rng: &mut impl Rng) -> Result<Vec<Triangulation>> {
    let square = builders::unit_square(4)?;
    let mut lshape = builders::lshape().refine_uniform(2)?;
    for _ in 0..4 {
        let near: Vec<usize> = (0..lshape.num_elements())
            .filter(|&k| {
                let c = lshape.centroid(k);
                c[0].hypot(c[1]) < 0.3
            })
            .collect();
        lshape = lshape.bisect(&near)?;
    }
    let mut random = builders::unit_square(2)?;
    for _ in 0..5 {
        let marked: Vec<usize> = (0..random.num_elements()).filter(|_| rng.random_bool(0.3)).collect();
        random = random.bisect(&marked)?;
    }
    Ok(vec![square, lshape, random])
}

fn random_cr(tri: &Triangulation, rng: &mut impl Rng) -> FineFunction {
    let mut v = FineFunction::zeros(tri, SpaceKind::CrouzeixRaviart);
    for (e, edge) in tri.edges().iter().enumerate() {
        if !edge.is_boundary() {
            v.values[e] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        }
    }
    v
}

fn max_diff(a: &FineFunction, b: &FineFunction) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs()))
        .fold(0.0, f64::max)
}

/// Coarse elements whose centroid lies in the quadrant `[0, 1/2]²`.
pub fn quadrant_region(tri: &Triangulation) -> Vec<usize> {
    (0..tri.num_elements())
        .filter(|&k| tri.centroid(k).iter().all(|&c| (0.0..=0.5).contains(&c)))
        .collect()
}

/// `J` constants on `region` refined `1..=depth` times.
pub fn mixed_constants(coarse: &Triangulation, region: &[usize], depth: usize) -> Result<Vec<f64>> {
    (1..=depth)
        .map(|d| prolongation_constant(coarse, &refine_region(coarse, region, d)?, Prolongation::Mixed))
        .collect()
}

fn operators(report: &mut VerifyReport, opts: &VerifyOptions) -> Result<()> {
    let suite = Suite::Operators;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let meshes = sample_meshes(&mut rng)?;

    let mut worst: f64 = 0.0;
    for tri in &meshes {
        let verts = tri.vertices();
        for _ in 0..opts.fields {
            let field = SmoothField::random(&mut rng);
            let pi = conservative_interpolation(tri, |x| field.eval(x));
            for k in 0..tri.num_elements() {
                for (i, &e) in tri.element_edges(k).iter().enumerate() {
                    let ends = tri.edges()[e].vertices;
                    let exact = segment_mean(verts[ends[0]], verts[ends[1]], 16, |x| field.eval(x));
                    let got = pi.edge_mean(tri, k, i);
                    worst = worst.max((got[0] - exact[0]).abs()).max((got[1] - exact[1]).abs());
                }
            }
        }
    }
    report.push(suite, "conservative-edge-means", worst <= 1e-12, format!("max deviation {worst:e}"));

    let coarse = &meshes[0];
    let v = random_cr(coarse, &mut rng);
    let same = interpolate_discrete(coarse, &v)?;
    report.push(suite, "interpolation-fixes-cr", same == v, String::new());

    let fine = coarse.bisect(&quadrant_region(coarse))?.bisect_all()?;
    let back = restriction(&fine, &naive_prolongation(coarse, &v, &fine)?, coarse)?;
    let d = max_diff(&back, &v);
    report.push(suite, "restriction-inverts-naive", d <= 1e-12, format!("max deviation {d:e}"));

    let j = mixed_prolongation(coarse, &v, coarse)?;
    report.push(suite, "mixed-identity-without-refinement", j == v, String::new());

    let mut p1 = FineFunction::zeros(coarse, SpaceKind::P1);
    let boundary = boundary_vertices(coarse);
    for (z, val) in p1.values.iter_mut().enumerate() {
        if !boundary[z] {
            *val = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        }
    }
    let avg = nodal_averaging(coarse, &interpolate_discrete(coarse, &p1)?)?;
    let d = max_diff(&avg, &p1);
    report.push(suite, "averaging-reproduces-p1", d <= 1e-12, format!("max deviation {d:e}"));

    let consts = mixed_constants(coarse, &quadrant_region(coarse), 4)?;
    let finite = consts.iter().all(|c| c.is_finite());
    let drift = consts.iter().cloned().fold(0.0, f64::max) / consts.iter().cloned().fold(f64::INFINITY, f64::min);
    report.push(
        suite,
        "mixed-constant-depth-robust",
        finite && drift <= 2.0,
        format!("constants {consts:?}, drift {drift:.3}"),
    );
    Ok(())
}

fn boundary_vertices(tri: &Triangulation) -> Vec<bool> {
    let mut b = vec![false; tri.num_vertices()];
    for e in tri.edges().iter().filter(|e| e.is_boundary()) {
        b[e.vertices[0]] = true;
        b[e.vertices[1]] = true;
    }
    b
}

fn adaptive_run(t0: &Triangulation, g: &LoadFunction, iterations: usize, opts: &VerifyOptions) -> Result<AdaptiveRun> {
    let params = AdaptiveParams {
        theta: 0.3,
        eps: 1e-12,
        max_iter: Some(iterations),
        jump_mode: opts.jump_mode(),
        ..AdaptiveParams::default()
    };
    anfem(t0, g, &params)
}

fn estimator(report: &mut VerifyReport, opts: &VerifyOptions) -> Result<()> {
    let suite = Suite::Estimator;
    let run = adaptive_run(&builders::lshape(), &LoadFunction::lshape_singular(1.0), 12, opts)?;
    let recs = &run.trace.records;
    let checks: Vec<_> = recs.iter().filter_map(|r| r.checks.as_ref()).collect();

    let worst_est = checks
        .iter()
        .map(|c| c.est_lhs - c.est_rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    report.push(
        suite,
        "estimator-reduction",
        checks.iter().all(|c| c.estimator_reduction_holds()),
        format!("max lhs - rhs {worst_est:e} over {} steps", checks.len()),
    );
    let worst_vol = checks
        .iter()
        .map(|c| c.vol_lhs - c.vol_rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    report.push(
        suite,
        "volume-reduction",
        checks.iter().all(|c| c.volume_reduction_holds()),
        format!("max lhs - rhs {worst_vol:e}"),
    );
    let exact = recs.iter().all(|r| r.solve_is_exact());
    let div = recs.iter().map(|r| r.div_max).fold(0.0, f64::max);
    let gal = recs.iter().map(|r| r.galerkin_max).fold(0.0, f64::max);
    report.push(
        suite,
        "divergence-free-and-galerkin",
        exact,
        format!("max |div| {div:e}, max |Res(phi)| {gal:e}"),
    );
    let cont = checks.iter().map(|c| c.continuity).fold(0.0, f64::max);
    let rel = checks.iter().map(|c| c.discrete_reliability).fold(0.0, f64::max);
    report.push(
        suite,
        "continuity-and-discrete-reliability-finite",
        cont.is_finite() && rel.is_finite(),
        format!("max continuity {cont:.3}, max reliability ratio {rel:.3}"),
    );
    Ok(())
}

fn quasi_orthogonality(report: &mut VerifyReport, opts: &VerifyOptions) -> Result<()> {
    let suite = Suite::QuasiOrthogonality;
    let run = adaptive_run(&builders::unit_square(2)?, &LoadFunction::smooth1(1.0), 12, opts)?;
    let checks: Vec<_> = run.trace.records.iter().filter_map(|r| r.checks.as_ref()).collect();
    let qv: Vec<f64> = checks.iter().filter_map(|c| c.qo_velocity).collect();
    let qp: Vec<f64> = checks.iter().filter_map(|c| c.qo_pressure).collect();
    let finite = qv.len() == checks.len()
        && qp.len() == checks.len()
        && qv.iter().chain(&qp).all(|c| c.is_finite())
        && checks.iter().all(|c| c.residual_bound.is_finite());
    report.push(
        suite,
        "constants-finite",
        finite,
        format!(
            "velocity max {:.4}, pressure max {:.4}",
            qv.iter().cloned().fold(0.0, f64::max),
            qp.iter().cloned().fold(0.0, f64::max)
        ),
    );
    // |a(u - u_k, u_k - u_{k-1})| equals |Res_{k-1}(Π_k u - u_k)|, so the
    // dual norm of the coarse residual bounds the velocity constant.
    let bounded = checks
        .iter()
        .all(|c| c.qo_velocity.is_some_and(|q| q <= c.residual_bound * (1.0 + 1e-8) + 1e-12));
    let bound_max = checks.iter().map(|c| c.residual_bound).fold(0.0, f64::max);
    report.push(
        suite,
        "velocity-bounded-by-residual",
        bounded,
        format!("max residual bound {bound_max:.4}"),
    );
    let c = contraction_monitor(&run.trace)?;
    report.push(
        suite,
        "lambda-contracts",
        c.geometric_mean < 0.95,
        format!("geometric mean {:.4}, max {:.4}", c.geometric_mean, c.max),
    );
    Ok(())
}

fn counterexample_suite(report: &mut VerifyReport) -> Result<()> {
    let suite = Suite::Counterexample;
    let study = counterexample::scaling_study(&DEFAULT_SIZES)?;
    let worst = study
        .rows
        .iter()
        .map(|r| (r.boundary_sum - r.closed_form).abs())
        .fold(0.0, f64::max);
    report.push(suite, "closed-form", worst <= 1e-10, format!("max deviation {worst:e}"));
    let bounded = study.rows.iter().all(|r| r.grad_norm_sq < 4.0 * r.n as f64);
    report.push(suite, "gradient-bound", bounded, String::new());
    report.push(
        suite,
        "sqrt-n-growth",
        (0.4..=0.6).contains(&study.exponent),
        format!("exponent {:.4}", study.exponent),
    );

    let family = counterexample::build_family(5)?;
    let pair = counterexample::build_test_pair(&family);
    let half = family.n as f64 / 2.0;
    let segments = counterexample::segments(&family, &pair);
    let flux_ok = segments
        .iter()
        .all(|s| (s.mean_normal_derivative.abs() - half).abs() < 1e-12 || s.mean_normal_derivative == 0.0)
        && segments.iter().filter(|s| s.mean_normal_derivative != 0.0).count() == family.n - 1;
    report.push(suite, "segment-fluxes", flux_ok, format!("{} segments", segments.len()));
    Ok(())
}
