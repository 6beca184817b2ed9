use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::dataio::ResultRecord;
use crate::geometry::{position_error, rotation_error_deg, CameraPose};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("query '{0}' has no ground truth")]
    MissingGroundTruth(String),
    #[error("ground-truth query '{0}' has no result")]
    MissingResult(String),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
}

impl EvalError {
    /// Both id-alignment variants.
    pub fn is_id_mismatch(&self) -> bool {
        matches!(
            self,
            EvalError::MissingGroundTruth(_) | EvalError::MissingResult(_)
        )
    }
}

/// Ordered `(position, rotation in degrees)` thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet(Vec<(f64, f64)>);

impl ThresholdSet {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self, EvalError> {
        if pairs.is_empty() {
            return Err(EvalError::InvalidThresholds("empty".into()));
        }
        if pairs
            .iter()
            .any(|(p, r)| !(*p > 0.0 && *r > 0.0 && p.is_finite() && r.is_finite()))
        {
            return Err(EvalError::InvalidThresholds("components must be positive".into()));
        }
        Ok(Self(pairs))
    }

    /// Parses `"0.25,2;0.5,5;5,10"`.
    pub fn parse(s: &str) -> Result<Self, EvalError> {
        let bad = || EvalError::InvalidThresholds(format!("cannot parse '{s}'"));
        let pairs = s
            .split(';')
            .map(|p| {
                let (a, b) = p.split_once(',').ok_or_else(bad)?;
                Ok((
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                ))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(pairs)
    }

    /// (0.25 m, 2°) / (0.5 m, 5°) / (5 m, 10°).
    pub fn outdoor() -> Self {
        Self(vec![(0.25, 2.0), (0.5, 5.0), (5.0, 10.0)])
    }

    /// (0.05 m, 5°).
    pub fn indoor() -> Self {
        Self(vec![(0.05, 5.0)])
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.0
    }

    /// Column label such as `0.25m,2°`.
    pub fn label(&self, i: usize) -> String {
        let (p, r) = self.0[i];
        format!("{p}m,{r}°")
    }
}

impl Default for ThresholdSet {
    fn default() -> Self {
        Self::outdoor()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryEvaluation {
    pub id: String,
    /// `+∞` for failed queries.
    pub pos_err: f64,
    pub rot_err_deg: f64,
    /// One flag per threshold.
    pub success: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub thresholds: ThresholdSet,
    pub queries: Vec<QueryEvaluation>,
    /// Fraction of queries within each threshold.
    pub recalls: Vec<f64>,
    /// Median position error over all queries, failures included as `+∞`.
    pub mpe: f64,
    pub moe: f64,
}

/// Lower-middle element of the sorted values, `+∞` when empty.
fn lower_median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return f64::INFINITY;
    }
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Per-query errors, recalls and medians.
///
/// The ids in `results` and `gt` must coincide. Failed queries count as
/// `+∞` error, so they never satisfy a threshold and they enter the medians.
pub fn evaluate(
    results: &[ResultRecord],
    gt: &HashMap<String, CameraPose>,
    thresholds: &ThresholdSet,
) -> Result<EvaluationReport, EvalError> {
    let ids: HashSet<&str> = results.iter().map(|r| r.query_id.as_str()).collect();
    if let Some(missing) = gt.keys().filter(|k| !ids.contains(k.as_str())).min() {
        return Err(EvalError::MissingResult(missing.clone()));
    }
    let queries: Vec<QueryEvaluation> = results
        .iter()
        .map(|r| {
            let g = gt
                .get(&r.query_id)
                .ok_or_else(|| EvalError::MissingGroundTruth(r.query_id.clone()))?;
            let (pos_err, rot_err_deg) = match &r.pose {
                Some(p) => (position_error(p, g), rotation_error_deg(p, g)),
                None => (f64::INFINITY, f64::INFINITY),
            };
            Ok(QueryEvaluation {
                id: r.query_id.clone(),
                pos_err,
                rot_err_deg,
                success: thresholds
                    .pairs()
                    .iter()
                    .map(|(tp, tr)| pos_err <= *tp && rot_err_deg <= *tr)
                    .collect(),
            })
        })
        .collect::<Result<_, EvalError>>()?;
    let n = queries.len();
    let recalls = (0..thresholds.pairs().len())
        .map(|i| {
            if n == 0 {
                0.0
            } else {
                queries.iter().filter(|q| q.success[i]).count() as f64 / n as f64
            }
        })
        .collect();
    Ok(EvaluationReport {
        thresholds: thresholds.clone(),
        mpe: lower_median(queries.iter().map(|q| q.pos_err)),
        moe: lower_median(queries.iter().map(|q| q.rot_err_deg)),
        queries,
        recalls,
    })
}

fn fmt_error(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        format!("{v:.decimals$}")
    } else {
        "inf".into()
    }
}

/// Text table and CSV mirror, one row per labelled report.
///
/// Recall columns follow the thresholds of the first report, printed as
/// `a / b / c` percentages with one decimal. A threshold missing from a
/// later report shows as `-`. MPE is printed with three decimals, MOE with two.
pub fn emit_table(reports: &[(String, EvaluationReport)]) -> (String, String) {
    let Some((_, first)) = reports.first() else {
        return (String::new(), String::new());
    };
    let columns = first.thresholds.pairs();
    let labels: Vec<String> = (0..columns.len()).map(|i| first.thresholds.label(i)).collect();
    let recall_header = labels.join(" / ");

    let rows: Vec<(String, Vec<String>, String, String)> = reports
        .iter()
        .map(|(label, r)| {
            let cells = columns
                .iter()
                .map(|c| {
                    r.thresholds
                        .pairs()
                        .iter()
                        .position(|t| t == c)
                        .map_or("-".into(), |i| format!("{:.1}", r.recalls[i] * 100.0))
                })
                .collect();
            (label.clone(), cells, fmt_error(r.mpe, 3), fmt_error(r.moe, 2))
        })
        .collect();

    let recall_cells: Vec<String> = rows.iter().map(|r| r.1.join(" / ")).collect();
    let w0 = rows.iter().map(|r| r.0.chars().count()).chain([6]).max().unwrap();
    let w1 = recall_cells
        .iter()
        .map(|c| c.chars().count())
        .chain([recall_header.chars().count()])
        .max()
        .unwrap();
    let w2 = rows.iter().map(|r| r.2.len()).chain([5]).max().unwrap();
    let w3 = rows.iter().map(|r| r.3.len()).chain([7]).max().unwrap();

    let mut text = String::new();
    writeln!(
        text,
        "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}",
        "method", recall_header, "MPE", "MOE [°]"
    )
    .unwrap();
    writeln!(text, "{}", "-".repeat(w0 + w1 + w2 + w3 + 6)).unwrap();
    for (row, cells) in rows.iter().zip(&recall_cells) {
        writeln!(
            text,
            "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}",
            row.0, cells, row.2, row.3
        )
        .unwrap();
    }

    let mut csv = String::from("method");
    for (p, r) in columns {
        write!(csv, ",recall_{p}m_{r}deg").unwrap();
    }
    csv.push_str(",mpe,moe_deg\n");
    for row in &rows {
        writeln!(csv, "{},{},{},{}", row.0, row.1.join(","), row.2, row.3).unwrap();
    }
    (text, csv)
}
