use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{fmt_real, read_text, unwritable, valid_id, write_bytes, DataError, TextReader};
use crate::geometry::{CameraPose, Intrinsics};
use crate::scene::{ReferenceImage, SceneDatabase};

pub const SCENE_HEADER: &str = "SCENE v1";
/// Placeholder for an absent optional path.
const NO_PATH: &str = "-";
/// Largest accepted deviation of a stored quaternion from unit norm.
const QUATERNION_NORM_TOL: f64 = 1e-6;

/// Reads a scene file.
///
/// After the header, one record per line:
/// `id fx fy cx cy width height qw qx qy qz tx ty tz [raster|-] [labelmap]`.
/// The quaternion is the scalar-first world-to-camera rotation.
pub fn read_scene(path: &Path) -> Result<SceneDatabase, DataError> {
    let text = read_text(path)?;
    let mut r = TextReader::new(path, &text)?;
    r.expect_header(SCENE_HEADER)?;
    let mut db = SceneDatabase::new();
    while let Some((n, _, f)) = r.next_line() {
        r.check_fields(n, &f, 14..=16)?;
        let id = r.id(n, f[0])?;
        let real = |i: usize, name: &str| r.real(n, name, f[i]);
        let k = Intrinsics::new(
            real(1, "fx")?,
            real(2, "fy")?,
            real(3, "cx")?,
            real(4, "cy")?,
            r.integer(n, "width", f[5])?,
            r.integer(n, "height", f[6])?,
        );
        let q = Quaternion::new(real(7, "qw")?, real(8, "qx")?, real(9, "qy")?, real(10, "qz")?);
        if (q.norm() - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(r.error(n, format!("quaternion norm {} is not 1", q.norm())));
        }
        let t = Vector3::new(real(11, "tx")?, real(12, "ty")?, real(13, "tz")?);
        let path_field =
            |i: usize| -> Option<PathBuf> { f.get(i).filter(|p| **p != NO_PATH).map(PathBuf::from) };
        if f.len() == 16 && f[15] == NO_PATH {
            return Err(r.error(n, "trailing placeholder path"));
        }
        let image = ReferenceImage {
            id: id.to_owned(),
            intrinsics: k,
            pose: CameraPose::from_quaternion(&UnitQuaternion::from_quaternion(q), t),
            quaternion: q,
            raster: path_field(14),
            labelmap: path_field(15),
        };
        db.push(image).map_err(|e| r.error(n, e))?;
    }
    Ok(db)
}

fn path_token(out: &Path, p: &Path) -> Result<String, DataError> {
    let s = p
        .to_str()
        .ok_or_else(|| unwritable(out, format!("non UTF-8 path {}", p.display())))?;
    if !valid_id(s) || s == NO_PATH {
        return Err(unwritable(out, format!("path '{s}' cannot be stored")));
    }
    Ok(s.to_owned())
}

pub fn write_scene(db: &SceneDatabase, path: &Path) -> Result<(), DataError> {
    let mut s = format!("{SCENE_HEADER}\n");
    for im in db.images() {
        if !valid_id(&im.id) {
            return Err(unwritable(path, format!("invalid id '{}'", im.id)));
        }
        let k = &im.intrinsics;
        let q = &im.quaternion;
        let t = &im.pose.translation;
        let reals = [k.fx, k.fy, k.cx, k.cy];
        let pose = [q.w, q.i, q.j, q.k, t.x, t.y, t.z];
        if reals.iter().chain(&pose).any(|v| !v.is_finite()) {
            return Err(unwritable(path, format!("non-finite value in '{}'", im.id)));
        }
        let mut line = im.id.clone();
        for v in &reals[..4] {
            write!(line, " {}", fmt_real(*v)).unwrap();
        }
        write!(line, " {} {}", k.width, k.height).unwrap();
        for v in &pose {
            write!(line, " {}", fmt_real(*v)).unwrap();
        }
        match (&im.raster, &im.labelmap) {
            (None, None) => {}
            (Some(r), None) => write!(line, " {}", path_token(path, r)?).unwrap(),
            (r, Some(l)) => {
                let r = r
                    .as_deref()
                    .map_or(Ok(NO_PATH.to_owned()), |r| path_token(path, r))?;
                write!(line, " {r} {}", path_token(path, l)?).unwrap();
            }
        }
        s.push_str(&line);
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}
