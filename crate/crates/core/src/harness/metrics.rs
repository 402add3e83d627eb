use std::io::Write;

use crate::error::Result;
use crate::linalg::{operator_norm, residual_projection, ColumnIndexSet, DenseMatrix};
use crate::solvers::Termination;
use crate::synth::ProblemInstance;

pub const CSV_HEADER: [&str; 16] = [
    "solver",
    "d",
    "n",
    "r",
    "alpha",
    "sigma",
    "seed",
    "mu",
    "residual_fro",
    "residual_op",
    "subspace_dist",
    "support_precision",
    "support_recall",
    "iterations",
    "wall_ms",
    "termination",
];

/// One CSV row: a solver run scored against the instance's ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub solver: String,
    pub d: usize,
    pub n: usize,
    pub r: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub seed: u64,
    pub mu: f64,
    /// `‖(I - UUᵀ) L*‖_F`.
    pub residual_fro: f64,
    /// `‖(I - UUᵀ) L*‖₂`.
    pub residual_op: f64,
    /// `‖(I - UUᵀ) U*‖_F` against the top-`r` left factor of `L*`.
    pub subspace_dist: f64,
    pub support_precision: f64,
    pub support_recall: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub termination: String,
}

impl MetricsRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.solver.clone(),
            self.d.to_string(),
            self.n.to_string(),
            self.r.to_string(),
            self.alpha.to_string(),
            self.sigma.to_string(),
            self.seed.to_string(),
            self.mu.to_string(),
            self.residual_fro.to_string(),
            self.residual_op.to_string(),
            self.subspace_dist.to_string(),
            self.support_precision.to_string(),
            self.support_recall.to_string(),
            self.iterations.to_string(),
            format!("{:.3}", self.wall_ms),
            self.termination.clone(),
        ]
    }
}

/// `(precision, recall)` of `estimated` against `truth`. An empty estimate
/// has precision 1; an empty truth has recall 1.
pub fn support_scores(estimated: &ColumnIndexSet, truth: &ColumnIndexSet) -> (f64, f64) {
    let hits = estimated.intersection_len(truth) as f64;
    let ratio = |den: usize| if den == 0 { 1.0 } else { hits / den as f64 };
    (ratio(estimated.len()), ratio(truth.len()))
}

#[allow(clippy::too_many_arguments)]
pub fn compute(
    solver: &str,
    inst: &ProblemInstance,
    u: &DenseMatrix,
    support: &ColumnIndexSet,
    iterations: usize,
    wall_ms: f64,
    termination: Termination,
) -> Result<MetricsRow> {
    let residual = residual_projection(u, &inst.l_star)?;
    let subspace_dist = residual_projection(u, &inst.true_basis()?)?.frobenius_norm();
    let (support_precision, support_recall) = support_scores(support, &inst.true_support);
    let p = &inst.params;
    Ok(MetricsRow {
        solver: solver.to_string(),
        d: p.d,
        n: p.n,
        r: p.r,
        alpha: p.alpha,
        sigma: p.noise_sigma,
        seed: p.seed,
        mu: inst.measured_mu,
        residual_fro: residual.frobenius_norm(),
        residual_op: operator_norm(&residual),
        subspace_dist,
        support_precision,
        support_recall,
        iterations,
        wall_ms,
        termination: termination.as_str().to_string(),
    })
}

/// Writes the header followed by one line per row.
pub fn write_csv<W: Write>(w: W, rows: &[MetricsRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        out.write_record(row.record())?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_recall_edges() {
        let e = ColumnIndexSet::empty();
        let t = ColumnIndexSet::new(vec![1, 2]);
        assert_eq!(support_scores(&e, &e), (1.0, 1.0));
        assert_eq!(support_scores(&e, &t), (1.0, 0.0));
        assert_eq!(
            support_scores(&ColumnIndexSet::new(vec![2, 5]), &t),
            (0.5, 0.5)
        );
    }

    #[test]
    fn header_line() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "solver,d,n,r,alpha,sigma,seed,mu,residual_fro,residual_op,subspace_dist,\
             support_precision,support_recall,iterations,wall_ms,termination\n"
        );
    }
}
