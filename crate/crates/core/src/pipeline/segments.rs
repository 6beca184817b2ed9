use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{Match, MatchSet};
use crate::geometry::Point2;
use crate::raster::LabelMap;

pub const DEFAULT_MIN_AREA_PX: usize = 100;
pub const DEFAULT_DILATION_PX: u32 = 5;
pub const MIN_SEGMENT_IOU: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStats {
    pub label: u32,
    pub area: usize,
    /// Mean of member pixel coordinates.
    pub centroid: Point2,
    /// Indices of keypoints inside the dilated segment, ascending.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPair {
    pub label_q: u32,
    pub label_r: u32,
    pub iou: f64,
}

/// Per-segment statistics and keypoint membership.
///
/// Label 0 and segments smaller than `min_area_px` are skipped. A keypoint
/// (rounded to its pixel) belongs to every segment whose mask dilated by a
/// `(2 d + 1)²` square contains it. Output is sorted by label.
pub fn assign_keypoints_to_segments(
    labels: &LabelMap,
    keypoints: &[Point2],
    dilation_px: u32,
    min_area_px: usize,
) -> Vec<SegmentStats> {
    let (w, h) = (labels.width() as i64, labels.height() as i64);
    let mut acc: BTreeMap<u32, (usize, f64, f64)> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels.get(x as u32, y as u32);
            if l == 0 {
                continue;
            }
            let e = acc.entry(l).or_insert((0, 0.0, 0.0));
            e.0 += 1;
            e.1 += x as f64;
            e.2 += y as f64;
        }
    }
    let mut stats: BTreeMap<u32, SegmentStats> = acc
        .into_iter()
        .filter(|(_, (area, _, _))| *area >= min_area_px.max(1))
        .map(|(label, (area, sx, sy))| {
            (
                label,
                SegmentStats {
                    label,
                    area,
                    centroid: Point2::new(sx / area as f64, sy / area as f64),
                    members: Vec::new(),
                },
            )
        })
        .collect();

    let d = dilation_px as i64;
    let mut found = BTreeSet::new();
    for (i, kp) in keypoints.iter().enumerate() {
        let (cx, cy) = (kp.x.round() as i64, kp.y.round() as i64);
        found.clear();
        for y in (cy - d).max(0)..=(cy + d).min(h - 1) {
            for x in (cx - d).max(0)..=(cx + d).min(w - 1) {
                found.insert(labels.get(x as u32, y as u32));
            }
        }
        for l in &found {
            if let Some(s) = stats.get_mut(l) {
                s.members.push(i);
            }
        }
    }
    stats.into_values().collect()
}

/// `links / (|q| + |r| - links)`, where `links` counts keypoints shared by both member lists.
pub fn segment_iou(q: &SegmentStats, r: &SegmentStats) -> f64 {
    let links = sorted_intersection(&q.members, &r.members);
    let union = q.members.len() + r.members.len() - links;
    if union == 0 {
        0.0
    } else {
        links as f64 / union as f64
    }
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// One-to-one segment pairing by descending IoU.
///
/// Members of `stats_q` and `stats_r` are indices into the same match list
/// (query endpoints and reference endpoints respectively), so a match links
/// the segments containing its two endpoints. Pairs below [`MIN_SEGMENT_IOU`]
/// are dropped. Ties are resolved by ascending `(label_q, label_r)`.
pub fn match_segments(stats_q: &[SegmentStats], stats_r: &[SegmentStats]) -> Vec<SegmentPair> {
    let mut owner_r: HashMap<usize, Vec<usize>> = HashMap::new();
    for (j, s) in stats_r.iter().enumerate() {
        for &m in &s.members {
            owner_r.entry(m).or_default().push(j);
        }
    }
    let mut candidates = Vec::new();
    for q in stats_q {
        let mut links: BTreeMap<usize, usize> = BTreeMap::new();
        for m in &q.members {
            for &j in owner_r.get(m).into_iter().flatten() {
                *links.entry(j).or_default() += 1;
            }
        }
        for (j, l) in links {
            let r = &stats_r[j];
            let iou = l as f64 / (q.members.len() + r.members.len() - l) as f64;
            if iou >= MIN_SEGMENT_IOU {
                candidates.push(SegmentPair {
                    label_q: q.label,
                    label_r: r.label,
                    iou,
                });
            }
        }
    }
    greedy_one_to_one(candidates)
}

pub(crate) fn greedy_one_to_one(mut candidates: Vec<SegmentPair>) -> Vec<SegmentPair> {
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.label_q.cmp(&b.label_q))
            .then(a.label_r.cmp(&b.label_r))
    });
    let mut used_q = BTreeSet::new();
    let mut used_r = BTreeSet::new();
    let mut out = Vec::new();
    for c in candidates {
        if used_q.contains(&c.label_q) || used_r.contains(&c.label_r) {
            continue;
        }
        used_q.insert(c.label_q);
        used_r.insert(c.label_r);
        out.push(c);
    }
    out
}

/// One match per segment pair between the two segment centroids, with confidence = IoU.
pub fn segment_centroid_matches(
    pairs: &[SegmentPair],
    stats_q: &[SegmentStats],
    stats_r: &[SegmentStats],
    id_q: &str,
    id_r: &str,
) -> MatchSet {
    let matches = pairs
        .iter()
        .filter_map(|p| {
            let q = stats_q.iter().find(|s| s.label == p.label_q)?;
            let r = stats_r.iter().find(|s| s.label == p.label_r)?;
            Some(Match {
                a: q.centroid,
                b: r.centroid,
                confidence: p.iou,
            })
        })
        .collect();
    MatchSet::new(id_q, id_r, matches)
}
