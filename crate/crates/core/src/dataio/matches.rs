use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{fmt_real, read_text, unwritable, valid_id, write_bytes, DataError, TextReader};
use crate::geometry::Point2;
use crate::pipeline::{Match, MatchSet};
use crate::scene::SceneDatabase;

pub const MATCHES_HEADER: &str = "MATCHES v1";

/// Image id to `(width, height)`, used to bounds-check match coordinates.
pub type ImageSizes = HashMap<String, (u32, u32)>;

pub fn image_sizes<'a>(dbs: impl IntoIterator<Item = &'a SceneDatabase>) -> ImageSizes {
    dbs.into_iter()
        .flat_map(|db| db.images())
        .map(|im| (im.id.clone(), (im.intrinsics.width, im.intrinsics.height)))
        .collect()
}

fn in_bounds(p: &Point2, (w, h): (u32, u32)) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= w as f64 && p.y <= h as f64
}

/// Reads a matches file: the header, then blocks of `PAIR id_a id_b n`
/// followed by `n` lines `x_a y_a x_b y_b confidence`.
///
/// With `sizes`, both ids must be known and every coordinate must lie inside
/// its image.
pub fn read_matches(path: &Path, sizes: Option<&ImageSizes>) -> Result<Vec<MatchSet>, DataError> {
    let text = read_text(path)?;
    let mut r = TextReader::new(path, &text)?;
    r.expect_header(MATCHES_HEADER)?;
    let mut sets = Vec::new();
    while let Some((n, _, f)) = r.next_line() {
        r.check_fields(n, &f, 4..=4)?;
        if f[0] != "PAIR" {
            return Err(r.error(n, format!("expected 'PAIR', found '{}'", f[0])));
        }
        let (id_a, id_b) = (r.id(n, f[1])?, r.id(n, f[2])?);
        let count: usize = r.integer(n, "count", f[3])?;
        if count > r.remaining() {
            return Err(r.error(
                n,
                format!(
                    "pair {id_a}/{id_b} claims {count} matches but only {} lines follow",
                    r.remaining()
                ),
            ));
        }
        let bounds = match sizes {
            Some(s) => {
                let get = |id: &str| {
                    s.get(id)
                        .copied()
                        .ok_or_else(|| r.error(n, format!("unknown image '{id}'")))
                };
                Some((get(id_a)?, get(id_b)?))
            }
            None => None,
        };
        let mut matches = Vec::with_capacity(count);
        for _ in 0..count {
            let (m, _, f) = r.next_line().expect("count checked against remaining lines");
            r.check_fields(m, &f, 5..=5)?;
            let v: Vec<f64> = f
                .iter()
                .zip(["x_a", "y_a", "x_b", "y_b", "confidence"])
                .map(|(field, name)| r.real(m, name, field))
                .collect::<Result<_, _>>()?;
            let mt = Match::new(v[0], v[1], v[2], v[3], v[4]);
            if mt.confidence < 0.0 {
                return Err(r.error(m, format!("pair {id_a}/{id_b}: negative confidence")));
            }
            if let Some((ba, bb)) = bounds {
                if !in_bounds(&mt.a, ba) {
                    return Err(r.error(
                        m,
                        format!("pair {id_a}/{id_b}: ({}, {}) outside {id_a}", v[0], v[1]),
                    ));
                }
                if !in_bounds(&mt.b, bb) {
                    return Err(r.error(
                        m,
                        format!("pair {id_a}/{id_b}: ({}, {}) outside {id_b}", v[2], v[3]),
                    ));
                }
            }
            matches.push(mt);
        }
        sets.push(MatchSet::new(id_a, id_b, matches));
    }
    Ok(sets)
}

pub fn write_matches(sets: &[MatchSet], path: &Path) -> Result<(), DataError> {
    let mut s = format!("{MATCHES_HEADER}\n");
    for set in sets {
        if !valid_id(&set.id_a) || !valid_id(&set.id_b) {
            return Err(unwritable(
                path,
                format!("invalid id in pair {}/{}", set.id_a, set.id_b),
            ));
        }
        writeln!(s, "PAIR {} {} {}", set.id_a, set.id_b, set.len()).unwrap();
        for m in &set.matches {
            let v = [m.a.x, m.a.y, m.b.x, m.b.y, m.confidence];
            if v.iter().any(|x| !x.is_finite()) || m.confidence < 0.0 {
                return Err(unwritable(
                    path,
                    format!("invalid match in pair {}/{}", set.id_a, set.id_b),
                ));
            }
            let fields: Vec<String> = v.iter().map(|x| fmt_real(*x)).collect();
            s.push_str(&fields.join(" "));
            s.push('\n');
        }
    }
    write_bytes(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        write_matches(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "MATCHES v1\n");
        assert!(read_matches(&p, None).unwrap().is_empty());
    }

    #[test]
    fn round_trip_and_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let sets = vec![
            MatchSet::new(
                "q",
                "r1",
                vec![
                    Match::new(1.5, 2.25, 3.0, 4.0, 0.9),
                    Match::new(0.1, 0.2, 0.3, 0.4, 1.0 / 3.0),
                ],
            ),
            MatchSet::new("q", "r2", vec![]),
        ];
        let (p1, p2) = (dir.path().join("a"), dir.path().join("b"));
        write_matches(&sets, &p1).unwrap();
        let back = read_matches(&p1, None).unwrap();
        assert_eq!(back, sets);
        write_matches(&back, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        let mut sizes = ImageSizes::new();
        sizes.insert("q".into(), (10, 10));
        sizes.insert("r1".into(), (2, 10));
        sizes.insert("r2".into(), (10, 10));
        let err = read_matches(&p1, Some(&sizes)).unwrap_err();
        let msg = err.to_string();
        assert_eq!(err.position(), Some(3));
        assert!(msg.contains("q/r1") && msg.contains("outside r1"), "{msg}");
        sizes.insert("r1".into(), (10, 10));
        assert_eq!(read_matches(&p1, Some(&sizes)).unwrap(), sets);
    }
}
