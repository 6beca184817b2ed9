use std::collections::BTreeMap;

use super::MatchSet;
use crate::geometry::Point2;

pub const DEFAULT_QUANTIZATION_PX: f64 = 2.0;

/// Reference observations sharing one quantized query keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub query_px: Point2,
    /// `(reference id, reference pixel)`, distinct ids, in input order.
    pub observations: Vec<(String, Point2)>,
}

/// Groups matches whose query endpoints fall into the same grid cell.
///
/// Within a cell the most confident match per reference is kept. The track's
/// query pixel is the confidence-weighted mean of the kept query endpoints.
/// Tracks seeing fewer than two references are dropped.
pub fn build_tracks(query_matches: &[MatchSet], quantization_px: f64) -> Vec<Track> {
    // cell -> per-set best (set index, match index)
    let mut cells: BTreeMap<(i64, i64), BTreeMap<usize, usize>> = BTreeMap::new();
    for (s, set) in query_matches.iter().enumerate() {
        for (i, m) in set.matches.iter().enumerate() {
            let key = (
                (m.a.x / quantization_px).floor() as i64,
                (m.a.y / quantization_px).floor() as i64,
            );
            let slot = cells.entry(key).or_default();
            match slot.get(&s) {
                Some(&j) if set.matches[j].confidence >= m.confidence => {}
                _ => {
                    slot.insert(s, i);
                }
            }
        }
    }

    let mut tracks = Vec::new();
    for members in cells.values() {
        // Several sets may name the same reference; keep the most confident.
        let mut by_ref: Vec<(usize, usize)> = Vec::new();
        for (&s, &i) in members {
            let id = &query_matches[s].id_b;
            let conf = query_matches[s].matches[i].confidence;
            match by_ref.iter_mut().find(|(t, _)| query_matches[*t].id_b == *id) {
                Some(slot) if query_matches[slot.0].matches[slot.1].confidence < conf => *slot = (s, i),
                Some(_) => {}
                None => by_ref.push((s, i)),
            }
        }
        if by_ref.len() < 2 {
            continue;
        }
        let total: f64 = by_ref
            .iter()
            .map(|&(s, i)| query_matches[s].matches[i].confidence)
            .sum();
        let mut acc = nalgebra::Vector2::zeros();
        for &(s, i) in &by_ref {
            let m = &query_matches[s].matches[i];
            acc += m.a.coords * if total > 0.0 { m.confidence } else { 1.0 };
        }
        let denom = if total > 0.0 { total } else { by_ref.len() as f64 };
        tracks.push(Track {
            query_px: Point2::from(acc / denom),
            observations: by_ref
                .iter()
                .map(|&(s, i)| (query_matches[s].id_b.clone(), query_matches[s].matches[i].b))
                .collect(),
        });
    }
    tracks
}
