//! Certificate artifacts written by `solve` and replayed by `certify`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sddcp::matrix::trace_inner;
use sddcp::{CpProblem, Decomposition, EmbeddedGraph, SchemeRun, Sense, SymMatrix};

use crate::error::{CliError, CliResult};

pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub instance: String,
    pub sense: Sense,
    pub value: f64,
    pub x: SymMatrix,
    pub graph: EmbeddedGraph,
    pub decomposition: Decomposition,
}

impl Certificate {
    /// Certificate for the best iterate of a run, if there is one.
    pub fn from_run(instance: &str, run: &SchemeRun, weight_floor: f64) -> CliResult<Option<Self>> {
        let Some(best) = &run.best else { return Ok(None) };
        let decomposition = run.certificate(weight_floor)?.unwrap_or_default();
        Ok(Some(Certificate {
            instance: instance.to_string(),
            sense: run.trace.sense,
            value: best.outcome.primal_value,
            x: best.outcome.x.clone(),
            graph: best.graph.clone(),
            decomposition,
        }))
    }

    pub fn to_json(&self) -> CliResult<String> {
        Ok(serde_json::to_string_pretty(self).map_err(sddcp::Error::from)?)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Malformed { what: "certificate", msg: e.to_string() })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Replays the certificate invariants against `p`.
pub fn certify(cert: &Certificate, p: &CpProblem) -> CliResult<Vec<Check>> {
    let n = p.n();
    if cert.x.dim() != n || cert.graph.n() != n {
        return Err(CliError::Malformed {
            what: "certificate",
            msg: format!("dimension {} does not match the instance dimension {n}", cert.x.dim()),
        });
    }
    let d = &cert.decomposition;
    let t = cert.graph.vertex_count();
    if let Some(&(i, _)) = d.vertex_atoms.iter().find(|(i, _)| *i >= t) {
        return Err(CliError::Malformed {
            what: "certificate",
            msg: format!("vertex atom {i} out of range for {t} vertices"),
        });
    }
    if let Some(a) = d.segment_atoms.iter().find(|a| a.point.point.len() != n) {
        return Err(CliError::Malformed {
            what: "certificate",
            msg: format!("segment point on edge {:?} has length {}", a.edge, a.point.point.len()),
        });
    }

    let negative = |x: f64| x.is_nan() || x < 0.0;
    let mut negatives = d.vertex_atoms.iter().filter(|(_, l)| negative(*l)).count();
    negatives += d.segment_atoms.iter().filter(|a| negative(a.gamma)).count();
    negatives += d.segment_atoms.iter().filter(|a| a.point.point.iter().any(|&x| negative(x))).count();
    let nonneg = Check {
        name: "nonnegativity",
        pass: negatives == 0,
        detail: format!(
            "{} vertex atoms, {} segment atoms, {negatives} with a negative weight or entry",
            d.vertex_atoms.len(),
            d.segment_atoms.len()
        ),
    };

    let rebuilt = d.reconstruct(&cert.graph);
    let mut diff = rebuilt.clone();
    diff.add_scaled(-1.0, &cert.x)?;
    let err = diff.frobenius_norm();
    let limit = CERTIFY_TOL * (1.0 + cert.x.frobenius_norm());
    let recon = Check {
        name: "reconstruction",
        pass: err <= limit,
        detail: format!("‖Σ atoms - X‖ = {err:.3e} (limit {limit:.3e})"),
    };

    let residual = p.equality_residual(&rebuilt)?;
    let scale = 1.0 + p.constraints.iter().fold(0.0f64, |m, (_, b)| m.max(b.abs()));
    let equalities = Check {
        name: "equality residuals",
        pass: residual <= CERTIFY_TOL * scale,
        detail: format!("max |tr(A_i X) - b_i| = {residual:.3e} (limit {:.3e})", CERTIFY_TOL * scale),
    };

    let objective = trace_inner(&p.objective, &rebuilt)?;
    let obj_err = (objective - cert.value).abs();
    let obj_limit = CERTIFY_TOL * (1.0 + cert.value.abs());
    let value = Check {
        name: "objective value",
        pass: obj_err <= obj_limit,
        detail: format!("tr(C X) = {objective:.9}, reported {:.9}", cert.value),
    };

    Ok(vec![nonneg, recon, equalities, value])
}
