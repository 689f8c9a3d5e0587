//! CSV writers. The first line of every file names its schema and version,
//! e.g. `# afem-trace v1`, so downstream scripts can refuse files they do
//! not understand.

use std::io::Write;

use crate::adaptive::AdaptiveTrace;
use crate::counterexample::ScalingStudy;
use crate::error::Result;
use crate::estimator::EstimatorReport;
use crate::mesh::Triangulation;
use crate::spaces::DiscreteSolution;

pub const TRACE_SCHEMA: &str = "# afem-trace v1";
pub const SOLUTION_SCHEMA: &str = "# afem-solution v1";
pub const ESTIMATOR_SCHEMA: &str = "# afem-estimator v1";
pub const COUNTEREXAMPLE_SCHEMA: &str = "# afem-counterexample v1";

pub const TRACE_COLUMNS: [&str; 13] = [
    "iter", "nelems", "ndofs", "eta2", "eta_tilde2", "osc2", "vol2", "nmarked", "gamma", "err_u2", "err_p2", "Lambda",
    "alpha",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn with_schema<W: Write>(mut w: W, schema: &str) -> Result<csv::Writer<W>> {
    writeln!(w, "{schema}")?;
    Ok(csv::Writer::from_writer(w))
}

pub fn write_trace<W: Write>(w: W, trace: &AdaptiveTrace) -> Result<()> {
    let mut out = with_schema(w, TRACE_SCHEMA)?;
    out.write_record(TRACE_COLUMNS)?;
    for r in &trace.records {
        out.write_record([
            r.iter.to_string(),
            r.nelems.to_string(),
            r.ndofs.to_string(),
            r.eta2.to_string(),
            r.eta_tilde2.to_string(),
            r.osc2.to_string(),
            r.vol2.to_string(),
            r.nmarked.to_string(),
            r.gamma.to_string(),
            opt(r.err_u2),
            opt(r.err_p2),
            opt(r.lambda),
            opt(r.alpha),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per element: centroid, velocity at the centroid, pressure.
pub fn write_solution<W: Write>(w: W, tri: &Triangulation, sol: &DiscreteSolution) -> Result<()> {
    sol.velocity.ensure_on(tri)?;
    let mut out = with_schema(w, SOLUTION_SCHEMA)?;
    out.write_record(["element", "x", "y", "ux", "uy", "p"])?;
    let third = 1.0 / 3.0;
    for k in 0..tri.num_elements() {
        let c = tri.centroid(k);
        let u = sol.velocity.eval(tri, k, [third; 3]);
        out.write_record([
            k.to_string(),
            c[0].to_string(),
            c[1].to_string(),
            u[0].to_string(),
            u[1].to_string(),
            sol.pressure[k].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_estimator<W: Write>(w: W, tri: &Triangulation, report: &EstimatorReport) -> Result<()> {
    let mut out = with_schema(w, ESTIMATOR_SCHEMA)?;
    out.write_record(["element", "x", "y", "volume", "jump", "eta"])?;
    for k in 0..report.len() {
        let c = tri.centroid(k);
        out.write_record([
            k.to_string(),
            c[0].to_string(),
            c[1].to_string(),
            report.volume[k].to_string(),
            report.jump[k].to_string(),
            report.eta[k].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// The table of the scaling study followed by a `# exponent=` line.
pub fn write_counterexample<W: Write>(w: W, study: &ScalingStudy) -> Result<()> {
    let mut out = with_schema(w, COUNTEREXAMPLE_SCHEMA)?;
    out.write_record(["N", "boundary_sum", "grad_norm_sq", "C", "closed_form"])?;
    for r in &study.rows {
        out.write_record([
            r.n.to_string(),
            r.boundary_sum.to_string(),
            r.grad_norm_sq.to_string(),
            r.constant.to_string(),
            r.closed_form.to_string(),
        ])?;
    }
    out.flush()?;
    let mut w = out.into_inner().map_err(|e| e.into_error())?;
    writeln!(w, "# exponent={}", study.exponent)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexample::{scaling_study, DEFAULT_SIZES};

    #[test]
    fn counterexample_table_layout() {
        let study = scaling_study(&DEFAULT_SIZES).unwrap();
        let mut buf = Vec::new();
        write_counterexample(&mut buf, &study).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], COUNTEREXAMPLE_SCHEMA);
        assert_eq!(lines[1], "N,boundary_sum,grad_norm_sq,C,closed_form");
        assert!(lines[2].starts_with("5,2.4"));
        assert_eq!(lines.len(), 2 + DEFAULT_SIZES.len() + 1);
        assert!(lines.last().unwrap().starts_with("# exponent=0.4"));
    }
}
