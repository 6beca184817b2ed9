use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{fmt_real, io_error, read_bytes, unwritable, valid_id, write_bytes, DataError};
use crate::geometry::CameraPose;

/// Column names of the results CSV. The last seven hold the estimated pose.
pub const RESULTS_HEADER: [&str; 12] = [
    "query_id",
    "pos_err_m",
    "rot_err_deg",
    "num_inliers",
    "status",
    "qw",
    "qx",
    "qy",
    "qz",
    "tx",
    "ty",
    "tz",
];

const SUCCESS: &str = "success";
const FAILURE: &str = "failure";

/// One query row. Errors are empty until evaluated against ground truth and `+∞` for failures.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub query_id: String,
    pub pos_err_m: Option<f64>,
    pub rot_err_deg: Option<f64>,
    pub num_inliers: usize,
    /// `None` when the query was not localized.
    pub pose: Option<CameraPose>,
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

pub fn write_results(records: &[ResultRecord], path: &Path) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| unwritable(path, e.to_string());
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in records {
        if !valid_id(&r.query_id) || r.query_id.contains(',') || r.query_id.contains('"') {
            return Err(unwritable(path, format!("invalid query id '{}'", r.query_id)));
        }
        let mut row = vec![
            r.query_id.clone(),
            opt_real(r.pos_err_m),
            opt_real(r.rot_err_deg),
            r.num_inliers.to_string(),
        ];
        match &r.pose {
            Some(p) => {
                let q = p.quaternion();
                let t = p.translation;
                row.push(SUCCESS.into());
                row.extend([q.w, q.i, q.j, q.k, t.x, t.y, t.z].map(fmt_real));
            }
            None => {
                row.push(FAILURE.into());
                row.extend(std::iter::repeat_n(String::new(), 7));
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| unwritable(path, e.to_string()))?;
    write_bytes(path, &bytes)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>, DataError> {
    let bytes = read_bytes(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes.as_slice());
    let parse_err = |line: u64, message: String| DataError::Parse {
        path: path.to_owned(),
        line: line as usize,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().ne(RESULTS_HEADER) {
        return Err(parse_err(
            1,
            format!("expected header '{}'", RESULTS_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::Io(io) => io_error(path, io),
                kind => parse_err(line, format!("{kind:?}")),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |m: String| parse_err(line, m);
        let id = &rec[0];
        if !valid_id(id) {
            return Err(err(format!("invalid query id '{id}'")));
        }
        if !seen.insert(id.to_owned()) {
            return Err(err(format!("duplicate query id '{id}'")));
        }
        let real = |i: usize| -> Result<f64, DataError> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| err(format!("{}: invalid real '{}'", RESULTS_HEADER[i], &rec[i])))
        };
        let opt = |i: usize| {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                real(i).map(Some)
            }
        };
        let num_inliers = rec[3]
            .parse::<usize>()
            .map_err(|_| err(format!("num_inliers: invalid integer '{}'", &rec[3])))?;
        let pose = match &rec[4] {
            SUCCESS => {
                let v: Vec<f64> = (5..12)
                    .map(|i| {
                        real(i).and_then(|v| {
                            if v.is_finite() {
                                Ok(v)
                            } else {
                                Err(err(format!("{}: not finite", RESULTS_HEADER[i])))
                            }
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let q = Quaternion::new(v[0], v[1], v[2], v[3]);
                if (q.norm() - 1.0).abs() > 1e-6 {
                    return Err(err("quaternion is not unit".into()));
                }
                Some(CameraPose::from_quaternion(
                    &UnitQuaternion::from_quaternion(q),
                    Vector3::new(v[4], v[5], v[6]),
                ))
            }
            FAILURE => {
                if (5..12).any(|i| !rec[i].is_empty()) {
                    return Err(err("failed query has pose columns".into()));
                }
                None
            }
            other => {
                return Err(err(format!(
                    "status must be '{SUCCESS}' or '{FAILURE}', found '{other}'"
                )))
            }
        };
        out.push(ResultRecord {
            query_id: id.to_owned(),
            pos_err_m: opt(1)?,
            rot_err_deg: opt(2)?,
            num_inliers,
            pose,
        });
    }
    Ok(out)
}
