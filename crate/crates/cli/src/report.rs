//! Per-run reports, reference bounds and batch summaries.

use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use sddcp::oracles::{relative_gap, sqp_oracle, stable_set_oracle, SQP_ORACLE_LIMIT, STABLE_SET_ORACLE_LIMIT};
use sddcp::{build_dnn_program, solve, Sense, SolveOptions};

use crate::error::{CliError, CliResult};
use crate::source::{Loaded, Structure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Dnn,
    Oracle,
    None,
}

impl FromStr for ReferenceKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "dnn" => Ok(ReferenceKind::Dnn),
            "oracle" => Ok(ReferenceKind::Oracle),
            "none" => Ok(ReferenceKind::None),
            _ => Err(CliError::Usage(format!("unknown reference '{s}', expected dnn, oracle or none"))),
        }
    }
}

/// The bound the scheme value is compared against.
///
/// `Ok(None)` means the reference solve did not reach optimality.
pub fn reference_value(kind: ReferenceKind, inst: &Loaded, opts: &SolveOptions) -> CliResult<Option<f64>> {
    match kind {
        ReferenceKind::None => Ok(None),
        ReferenceKind::Dnn => {
            let out = solve(&build_dnn_program(&inst.problem)?, opts)?;
            Ok(out.is_optimal().then_some(out.primal_value))
        }
        ReferenceKind::Oracle => match &inst.structure {
            Structure::Sqp(q) => Ok(Some(sqp_oracle(q, SQP_ORACLE_LIMIT)?.value)),
            Structure::StableSet(g) => Ok(Some(stable_set_oracle(g, STABLE_SET_ORACLE_LIMIT)?.value)),
            Structure::General => Err(CliError::Usage("no exact oracle exists for general instances".into())),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance: String,
    pub strategy: String,
    /// Number of solves performed.
    pub iterations: usize,
    pub best_value: Option<f64>,
    pub reference_kind: ReferenceKind,
    pub reference: Option<f64>,
    /// Nonnegative distance between the scheme bound and the reference.
    pub gap: Option<f64>,
    pub gap_absolute: bool,
    pub seconds: f64,
    pub termination: String,
    pub optimal: bool,
}

impl RunReport {
    /// Fills in the gap from the best value and the reference.
    pub fn with_gap(mut self, sense: Sense) -> Self {
        if let (Some(v), Some(r)) = (self.best_value, self.reference) {
            let gap = match sense {
                Sense::Minimize => relative_gap(v, r),
                Sense::Maximize => relative_gap(r, v),
            };
            self.gap = Some(gap.value);
            self.gap_absolute = gap.absolute;
        }
        self
    }

    pub fn human(&self) -> String {
        let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
        let reference = match self.reference_kind {
            ReferenceKind::None => String::new(),
            kind => format!("  reference ({}) {}", kind_name(kind), num(self.reference)),
        };
        let gap = self.gap.map(|g| format!("  gap {g:.4e}")).unwrap_or_default();
        format!(
            "{}  {}  value {}{reference}{gap}  solves {}  time {:.2}s  [{}]",
            self.instance,
            self.strategy,
            num(self.best_value),
            self.iterations,
            self.seconds,
            self.termination
        )
    }
}

fn kind_name(kind: ReferenceKind) -> &'static str {
    match kind {
        ReferenceKind::Dnn => "dnn",
        ReferenceKind::Oracle => "oracle",
        ReferenceKind::None => "none",
    }
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(mut out: W, reports: &[RunReport]) -> CliResult<()> {
    for r in reports {
        let line = serde_json::to_string(r).map_err(sddcp::Error::from)?;
        writeln!(out, "{line}").map_err(|e| CliError::io("<report>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> CliResult<Vec<RunReport>> {
    let mut reports = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::io("<report>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line)
            .map_err(|e| CliError::Malformed { what: "report", msg: format!("line {}: {e}", i + 1) })?;
        reports.push(r);
    }
    Ok(reports)
}

pub fn write_csv<W: Write>(out: W, reports: &[RunReport]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io("<report>", e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub instances: usize,
    pub solved: usize,
    pub mean_seconds: f64,
    pub mean_gap: Option<f64>,
}

/// Means per strategy, in order of first appearance.
pub fn summarize(reports: &[RunReport]) -> Vec<StrategySummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in reports {
        if !names.contains(&r.strategy.as_str()) {
            names.push(&r.strategy);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let rs: Vec<&RunReport> = reports.iter().filter(|r| r.strategy == name).collect();
            let gaps: Vec<f64> = rs.iter().filter_map(|r| r.gap).collect();
            StrategySummary {
                strategy: name.to_string(),
                instances: rs.len(),
                solved: rs.iter().filter(|r| r.optimal).count(),
                mean_seconds: rs.iter().map(|r| r.seconds).sum::<f64>() / rs.len() as f64,
                mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(out: W, summary: &[StrategySummary]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in summary {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| CliError::io("<summary>", e))?;
    Ok(())
}

/// `value / reference` per run, the data behind a ratio histogram.
pub fn write_ratios_csv<W: Write>(out: W, reports: &[RunReport]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance", "strategy", "ratio"])?;
    for r in reports {
        if let (Some(v), Some(reference)) = (r.best_value, r.reference) {
            if reference != 0.0 {
                w.write_record([r.instance.clone(), r.strategy.clone(), format!("{:.12e}", v / reference)])?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io("<ratios>", e))?;
    Ok(())
}
