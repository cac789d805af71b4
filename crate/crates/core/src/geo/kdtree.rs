use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{covering_box, haversine_m, BoundingBox, GeoPoint};
use crate::Result;

/// Maximum number of points scanned linearly at a leaf.
pub const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoHit {
    pub doc_id: String,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusResult {
    /// Ascending by distance, ties by doc id.
    pub hits: Vec<GeoHit>,
    /// The search box was cut at ±180° longitude; points beyond it were not considered.
    pub antimeridian_clamped: bool,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    point: GeoPoint,
    doc: u32,
}

impl Entry {
    fn coord(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.point.lat_deg
        } else {
            self.point.lon_deg
        }
    }
}

/// Static 2-d KD-tree over (lat, lon) stored as an implicit balanced tree:
/// the node covering `[lo, hi)` keeps its median at `(lo + hi) / 2`, split
/// axis alternating lat/lon with depth.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    entries: Vec<Entry>,
    doc_ids: Vec<String>,
}

impl SpatialIndex {
    pub fn build<I, S>(points: I) -> Self
    where
        I: IntoIterator<Item = (S, GeoPoint)>,
        S: Into<String>,
    {
        let mut doc_ids = Vec::new();
        let mut entries = Vec::new();
        for (id, point) in points {
            entries.push(Entry {
                point,
                doc: doc_ids.len() as u32,
            });
            doc_ids.push(id.into());
        }
        let n = entries.len();
        sort_node(&mut entries, 0, n, 0);
        SpatialIndex { entries, doc_ids }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every entry whose coordinates fall inside `bbox`, in tree order.
    pub fn range(&self, bbox: &BoundingBox) -> Vec<(&str, GeoPoint)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, self.entries.len(), 0usize)];
        while let Some((lo, hi, axis)) = stack.pop() {
            if hi <= lo {
                continue;
            }
            if hi - lo <= LEAF_SIZE {
                out.extend(
                    self.entries[lo..hi]
                        .iter()
                        .filter(|e| bbox.contains(e.point))
                        .map(|e| (self.doc_ids[e.doc as usize].as_str(), e.point)),
                );
                continue;
            }
            let mid = (lo + hi) / 2;
            let e = &self.entries[mid];
            if bbox.contains(e.point) {
                out.push((self.doc_ids[e.doc as usize].as_str(), e.point));
            }
            let (min, max) = if axis == 0 {
                (bbox.lat_min, bbox.lat_max)
            } else {
                (bbox.lon_min, bbox.lon_max)
            };
            let c = e.coord(axis);
            if min <= c {
                stack.push((lo, mid, 1 - axis));
            }
            if max >= c {
                stack.push((mid + 1, hi, 1 - axis));
            }
        }
        out
    }

    /// Rectangular prefilter on a covering box, then an exact haversine
    /// filter keeping `distance <= radius_m`.
    pub fn radius_query(&self, center: GeoPoint, radius_m: f64) -> Result<RadiusResult> {
        let bbox = covering_box(center, radius_m)?;
        let mut hits: Vec<GeoHit> = self
            .range(&bbox)
            .into_iter()
            .filter_map(|(id, p)| {
                let d = haversine_m(center, p);
                (d <= radius_m).then(|| GeoHit {
                    doc_id: id.to_string(),
                    distance_m: d,
                })
            })
            .collect();
        hits.sort_by(|a, b| {
            a.distance_m
                .total_cmp(&b.distance_m)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        Ok(RadiusResult {
            hits,
            antimeridian_clamped: bbox.crosses_antimeridian,
        })
    }
}

fn sort_node(entries: &mut [Entry], lo: usize, hi: usize, axis: usize) {
    if hi - lo <= LEAF_SIZE {
        return;
    }
    let mid = (lo + hi) / 2;
    entries[lo..hi].select_nth_unstable_by(mid - lo, |a, b| {
        a.coord(axis).partial_cmp(&b.coord(axis)).unwrap_or(Ordering::Equal)
    });
    sort_node(entries, lo, mid, 1 - axis);
    sort_node(entries, mid + 1, hi, 1 - axis);
}
