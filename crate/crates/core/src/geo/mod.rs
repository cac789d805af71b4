//! Spherical distance, bounding boxes and a KD-tree for radius queries.

mod kdtree;

use serde::{Deserialize, Serialize};

pub use kdtree::{GeoHit, RadiusResult, SpatialIndex, LEAF_SIZE};

use crate::{Error, Result};

/// Mean Earth radius used for every distance in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Metres per degree of latitude used by the bounding-box formula.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

/// Lower clamp for cos(latitude) in the longitude delta.
const MIN_COS_LAT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !lat_deg.is_finite() || !(-90.0..=90.0).contains(&lat_deg) {
            return Err(Error::invalid(format!("latitude {lat_deg} outside [-90, 90]")));
        }
        if !lon_deg.is_finite() || !(-180.0..=180.0).contains(&lon_deg) {
            return Err(Error::invalid(format!("longitude {lon_deg} outside [-180, 180]")));
        }
        Ok(GeoPoint { lat_deg, lon_deg })
    }
}

/// Great-circle distance in metres (haversine form).
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat_deg.to_radians(), b.lat_deg.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Point reached by travelling `distance_m` from `start` along the initial
/// `bearing_rad` (clockwise from north) on the sphere.
pub fn destination(start: GeoPoint, bearing_rad: f64, distance_m: f64) -> GeoPoint {
    let d = distance_m / EARTH_RADIUS_M;
    let (phi, lam) = (start.lat_deg.to_radians(), start.lon_deg.to_radians());
    let phi2 = (phi.sin() * d.cos() + phi.cos() * d.sin() * bearing_rad.cos())
        .clamp(-1.0, 1.0)
        .asin();
    let lam2 = lam + (bearing_rad.sin() * d.sin() * phi.cos()).atan2(d.cos() - phi.sin() * phi2.sin());
    let mut lon = lam2.to_degrees();
    if !(-180.0..=180.0).contains(&lon) {
        lon = (lon + 540.0).rem_euclid(360.0) - 180.0;
    }
    GeoPoint {
        lat_deg: phi2.to_degrees().clamp(-90.0, 90.0),
        lon_deg: lon,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    /// The unclamped longitude range ran past ±180°.
    pub crosses_antimeridian: bool,
}

impl BoundingBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.lat_min..=self.lat_max).contains(&p.lat_deg) && (self.lon_min..=self.lon_max).contains(&p.lon_deg)
    }

    fn from_deltas(center: GeoPoint, dlat: f64, dlon: f64) -> Self {
        let lon_min = center.lon_deg - dlon;
        let lon_max = center.lon_deg + dlon;
        BoundingBox {
            lat_min: (center.lat_deg - dlat).max(-90.0),
            lat_max: (center.lat_deg + dlat).min(90.0),
            lon_min: lon_min.max(-180.0),
            lon_max: lon_max.min(180.0),
            crosses_antimeridian: lon_min < -180.0 || lon_max > 180.0,
        }
    }
}

fn check_radius(radius_m: f64) -> Result<()> {
    if radius_m.is_finite() && radius_m > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("radius_m must be positive, got {radius_m}")))
    }
}

/// Δlat = R / 111320 and Δlon = R / (111320 · cos φ) around `center`.
pub fn bounding_box(center: GeoPoint, radius_m: f64) -> Result<BoundingBox> {
    check_radius(radius_m)?;
    let dlat = radius_m / METERS_PER_DEGREE;
    let cos = center.lat_deg.to_radians().cos().max(MIN_COS_LAT);
    let dlon = radius_m / (METERS_PER_DEGREE * cos);
    Ok(BoundingBox::from_deltas(center, dlat, dlon))
}

/// A box guaranteed to contain every point within `radius_m` of `center`.
///
/// The 111 320 m/degree box alone is slightly too small on a sphere of
/// radius [`EARTH_RADIUS_M`] (one degree there is ~111 195 m) and ignores
/// that a circle reaches its widest longitude poleward of its centre. This
/// takes the union with the exact spherical-cap extent so the KD-tree
/// prefilter never drops a point the haversine filter would keep.
pub fn covering_box(center: GeoPoint, radius_m: f64) -> Result<BoundingBox> {
    let formula = bounding_box(center, radius_m)?;
    let delta = radius_m / EARTH_RADIUS_M;
    // ~1 cm of slack for rounding at the circle boundary
    let pad = 1e-7;
    let dlat_cap = delta.to_degrees();
    let phi = center.lat_deg.to_radians();
    let reaches_pole = center.lat_deg.abs() + dlat_cap >= 90.0;
    let dlon_cap = if delta >= std::f64::consts::PI || reaches_pole {
        360.0
    } else {
        let s = delta.sin() / phi.cos();
        if s >= 1.0 {
            360.0
        } else {
            s.asin().to_degrees()
        }
    };
    let dlat = (center.lat_deg - formula.lat_min).max(dlat_cap) + pad;
    let dlon = (center.lon_deg - formula.lon_min).max(formula.lon_max - center.lon_deg);
    let dlon = dlon.max(dlon_cap) + pad;
    let mut b = BoundingBox::from_deltas(center, dlat, dlon);
    if dlon_cap >= 360.0 {
        // pole inside the circle: every longitude is reachable, nothing is clamped away
        b.crosses_antimeridian = false;
        b.lon_min = -180.0;
        b.lon_max = 180.0;
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    /// Spherical law of cosines, independent of the haversine route.
    fn law_of_cosines_m(a: GeoPoint, b: GeoPoint) -> f64 {
        let (p1, p2) = (a.lat_deg.to_radians(), b.lat_deg.to_radians());
        let dl = (b.lon_deg - a.lon_deg).to_radians();
        let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
        EARTH_RADIUS_M * c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn identity_and_antipode() {
        let a = p(55.7963, 49.1088);
        assert_eq!(haversine_m(a, a), 0.0);
        let d = haversine_m(p(0.0, 0.0), p(0.0, 180.0));
        assert!((d - 20_015_086.8).abs() < 1.0, "{d}");
    }

    #[test]
    fn kazan_meridian_arc_matches_oracle() {
        let (a, b) = (p(55.7963, 49.1088), p(55.6000, 49.1088));
        let d = haversine_m(a, b);
        // pure meridian arc: R · Δφ
        let arc = EARTH_RADIUS_M * (55.7963f64 - 55.6).to_radians();
        assert!((d - law_of_cosines_m(a, b)).abs() < 0.5);
        assert!((d - arc).abs() < 1e-6, "{d} vs {arc}");
        assert!((d - 21_827.564_100).abs() < 1e-3, "{d}");
    }

    #[test]
    fn symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = p(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0));
            let b = p(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0));
            assert_eq!(haversine_m(a, b), haversine_m(b, a));
        }
    }

    #[test]
    fn box_deltas() {
        let b = bounding_box(p(0.0, 0.0), 111_320.0).unwrap();
        assert!((b.lat_max - 1.0).abs() < 1e-12 && (b.lon_max - 1.0).abs() < 1e-12);
        let b = bounding_box(p(60.0, 0.0), 111_320.0).unwrap();
        assert!((b.lat_max - 61.0).abs() < 1e-12);
        assert!((b.lon_max - 2.0).abs() < 1e-9, "{}", b.lon_max);
        let b = bounding_box(p(55.8, 49.1), 50_000.0).unwrap();
        assert!((b.lat_max - 55.8 - 0.449155).abs() < 1e-6);
    }

    #[test]
    fn box_rejects_non_positive_radius() {
        assert!(bounding_box(p(0.0, 0.0), 0.0).unwrap_err().is_invalid_argument());
        assert!(covering_box(p(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn box_clamps_latitude_and_flags_antimeridian() {
        let b = bounding_box(p(89.9, 179.9), 50_000.0).unwrap();
        assert_eq!(b.lat_max, 90.0);
        assert!(b.crosses_antimeridian);
        assert_eq!(b.lon_max, 180.0);
    }

    #[test]
    fn covering_box_is_sound_up_to_80_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let c = p(rng.gen_range(-80.0..=80.0), rng.gen_range(-160.0..=160.0));
            let r = rng.gen_range(1_000.0..200_000.0);
            let b = covering_box(c, r).unwrap();
            // walk the circle boundary
            for k in 0..360 {
                let bearing = (k as f64).to_radians();
                let q = destination(c, bearing, r * (1.0 - 1e-9));
                assert!(haversine_m(c, q) <= r);
                assert!(b.contains(q), "{c:?} r={r} bearing {k}: {q:?} outside {b:?}");
            }
        }
    }
}
