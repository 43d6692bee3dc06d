//! Great-circle primitives on a spherical earth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sphere radius used for every distance in the pipeline, in meters.
pub const EARTH_RADIUS_M: f64 = 6_378_000.0;

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoPoint {
    /// Builds a point, rejecting out-of-range or non-finite coordinates.
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        let p = GeoPoint { lat_deg, lon_deg };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat_deg.is_finite() || !(-90.0..=90.0).contains(&self.lat_deg) {
            return Err(Error::Domain(format!(
                "latitude {} outside [-90, 90]",
                self.lat_deg
            )));
        }
        if !self.lon_deg.is_finite() || !(-180.0..=180.0).contains(&self.lon_deg) {
            return Err(Error::Domain(format!(
                "longitude {} outside [-180, 180]",
                self.lon_deg
            )));
        }
        Ok(())
    }

    /// Unit vector in earth-centered coordinates.
    pub(crate) fn to_unit_vector(self) -> [f64; 3] {
        let (lat, lon) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }

    pub(crate) fn from_unit_vector(v: [f64; 3]) -> Self {
        let lat = v[2].clamp(-1.0, 1.0).asin();
        let lon = v[1].atan2(v[0]);
        GeoPoint {
            lat_deg: lat.to_degrees(),
            lon_deg: lon.to_degrees(),
        }
    }
}

/// Spherical earth model. Only the fixed radius is supported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    pub radius_m: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel {
            radius_m: EARTH_RADIUS_M,
        }
    }
}

/// Haversine great-circle distance between `a` and `b`, in meters.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint, earth: EarthModel) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    Ok(haversine_unchecked(a, b, earth.radius_m))
}

/// Haversine distance without coordinate validation. Callers must have
/// validated both points already (traces validate on construction).
pub(crate) fn haversine_unchecked(a: GeoPoint, b: GeoPoint, radius_m: f64) -> f64 {
    let phi1 = a.lat_deg.to_radians();
    let phi2 = b.lat_deg.to_radians();
    let dphi = phi2 - phi1;
    let dpsi = (b.lon_deg - a.lon_deg).to_radians();

    let s_phi = (dphi / 2.0).sin();
    let s_psi = (dpsi / 2.0).sin();
    let h = s_phi * s_phi + phi1.cos() * phi2.cos() * s_psi * s_psi;
    // rounding can push h a hair above 1 for antipodal points
    2.0 * radius_m * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Point reached by travelling `distance_m` from `origin` along the initial
/// great-circle bearing `bearing_deg` (clockwise from north).
pub fn destination(
    origin: GeoPoint,
    bearing_deg: f64,
    distance_m: f64,
    earth: EarthModel,
) -> GeoPoint {
    let delta = distance_m / earth.radius_m;
    let theta = bearing_deg.to_radians();
    let phi1 = origin.lat_deg.to_radians();
    let lambda1 = origin.lon_deg.to_radians();

    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
    let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
    let y = theta.sin() * delta.sin() * phi1.cos();
    let x = delta.cos() - phi1.sin() * sin_phi2;
    let lambda2 = lambda1 + y.atan2(x);

    GeoPoint {
        lat_deg: phi2.to_degrees(),
        lon_deg: wrap_lon(lambda2.to_degrees()),
    }
}

pub(crate) fn wrap_lon(lon_deg: f64) -> f64 {
    let mut lon = (lon_deg + 180.0).rem_euclid(360.0) - 180.0;
    if lon == -180.0 && lon_deg > 0.0 {
        lon = 180.0;
    }
    lon
}

/// Rotation of the sphere carrying `from` onto `to`. Applying the same
/// rotation to a sequence of points preserves every pairwise distance.
#[derive(Debug, Clone, Copy)]
pub struct SphereRotation {
    m: [[f64; 3]; 3],
}

impl SphereRotation {
    pub fn between(from: GeoPoint, to: GeoPoint) -> Self {
        let a = from.to_unit_vector();
        let b = to.to_unit_vector();
        let axis = cross(a, b);
        let s = norm(axis);
        let c = dot(a, b);
        if s < 1e-300 {
            return SphereRotation { m: IDENTITY };
        }
        let k = [axis[0] / s, axis[1] / s, axis[2] / s];
        // Rodrigues: R = I + sin(t) K + (1 - cos(t)) K^2
        let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
        let kx2 = matmul(kx, kx);
        let mut m = IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += s * kx[i][j] + (1.0 - c) * kx2[i][j];
            }
        }
        SphereRotation { m }
    }

    pub fn apply(&self, p: GeoPoint) -> GeoPoint {
        let v = p.to_unit_vector();
        let mut out = [0.0; 3];
        for (i, row) in self.m.iter().enumerate() {
            out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
        GeoPoint::from_unit_vector(out)
    }
}

const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn matmul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn identical_points_are_zero_apart() {
        let a = p(37.393, -122.077);
        assert_eq!(
            haversine_distance(a, a, EarthModel::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn antipodal_equator_is_half_circumference() {
        let d = haversine_distance(p(0.0, 0.0), p(0.0, 180.0), EarthModel::default()).unwrap();
        let expected = PI * 6_378_000.0;
        assert!((d - expected).abs() / expected < 1e-9, "{d} vs {expected}");
    }

    #[test]
    fn meridian_displacement_matches_arc_length() {
        let a = p(37.3930, -122.077);
        let b = p(37.3939, -122.077);
        let oracle = (37.3939f64 - 37.3930).to_radians() * 6_378_000.0;
        let d = haversine_distance(a, b, EarthModel::default()).unwrap();
        assert!((d - oracle).abs() / oracle < 1e-9, "{d} vs {oracle}");
    }

    #[test]
    fn rejects_bad_coordinates() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        let bad = GeoPoint {
            lat_deg: 0.0,
            lon_deg: f64::INFINITY,
        };
        assert!(haversine_distance(bad, p(0.0, 0.0), EarthModel::default()).is_err());
    }

    #[test]
    fn destination_travels_requested_distance() {
        let o = p(37.39, -122.08);
        for bearing in [0.0, 45.0, 90.0, 200.0, 359.0] {
            let q = destination(o, bearing, 120.0, EarthModel::default());
            let d = haversine_distance(o, q, EarthModel::default()).unwrap();
            assert!((d - 120.0).abs() < 1e-6, "bearing {bearing}: {d}");
        }
    }

    #[test]
    fn rotation_preserves_distances() {
        let from = p(37.39, -122.08);
        let to = destination(from, 77.0, 150.0, EarthModel::default());
        let rot = SphereRotation::between(from, to);
        let moved = rot.apply(from);
        assert!(haversine_unchecked(moved, to, EARTH_RADIUS_M) < 1e-6);

        let a = p(37.3905, -122.0811);
        let b = p(37.39052, -122.08108);
        let before = haversine_unchecked(a, b, EARTH_RADIUS_M);
        let after = haversine_unchecked(rot.apply(a), rot.apply(b), EARTH_RADIUS_M);
        assert!((before - after).abs() < 1e-6, "{before} vs {after}");
    }

    #[test]
    fn wraps_longitude() {
        assert_eq!(wrap_lon(190.0), -170.0);
        assert_eq!(wrap_lon(-190.0), 170.0);
        assert_eq!(wrap_lon(180.0), 180.0);
        assert_eq!(wrap_lon(12.5), 12.5);
    }
}
