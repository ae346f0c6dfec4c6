//! Geodesy on a spherical Earth and optical link feasibility.
//!
//! Distances combine the haversine surface arc (on a sphere lifted to the
//! mean altitude of the two endpoints) with the altitude difference.
//! Line of sight only accounts for Earth curvature; terrain is not modeled.

use thiserror::Error;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Minimum height above the sphere used for line-of-sight checks.
pub const MIN_EYE_HEIGHT_M: f64 = 2.0;

const MIN_ALTITUDE_M: f64 = -500.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} is not finite")]
    Longitude(f64),
    #[error("altitude {0} m must be finite and >= -500")]
    Altitude(f64),
    #[error("max_range_km must be positive and finite, got {0}")]
    Range(f64),
}

/// Location triple a node announces after deployment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPosition {
    latitude_deg: f64,
    longitude_deg: f64,
    altitude_m: f64,
}

impl GeoPosition {
    /// Longitude is normalized into `[-180, 180)`.
    pub fn new(latitude_deg: f64, longitude_deg: f64, altitude_m: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&latitude_deg) {
            return Err(GeoError::Latitude(latitude_deg));
        }
        if !longitude_deg.is_finite() {
            return Err(GeoError::Longitude(longitude_deg));
        }
        if !altitude_m.is_finite() || altitude_m < MIN_ALTITUDE_M {
            return Err(GeoError::Altitude(altitude_m));
        }
        let mut lon = longitude_deg;
        if !(-180.0..180.0).contains(&lon) {
            lon = (lon + 180.0).rem_euclid(360.0) - 180.0;
            // rem_euclid can round up to exactly 360 for tiny negative inputs
            if lon >= 180.0 {
                lon -= 360.0;
            }
        }
        Ok(Self {
            latitude_deg,
            longitude_deg: lon,
            altitude_m,
        })
    }

    pub fn latitude_deg(&self) -> f64 {
        self.latitude_deg
    }

    pub fn longitude_deg(&self) -> f64 {
        self.longitude_deg
    }

    pub fn altitude_m(&self) -> f64 {
        self.altitude_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFeasibilityParams {
    pub max_range_km: f64,
    pub earth_radius_km: f64,
    pub require_los: bool,
}

impl Default for LinkFeasibilityParams {
    fn default() -> Self {
        Self {
            max_range_km: 144.0,
            earth_radius_km: EARTH_RADIUS_KM,
            require_los: true,
        }
    }
}

impl LinkFeasibilityParams {
    pub fn validate(&self) -> Result<(), GeoError> {
        if self.max_range_km.is_finite() && self.max_range_km > 0.0 {
            Ok(())
        } else {
            Err(GeoError::Range(self.max_range_km))
        }
    }
}

/// Central angle between two positions in radians (haversine form).
pub fn central_angle(a: &GeoPosition, b: &GeoPosition) -> f64 {
    let lat1 = a.latitude_deg.to_radians();
    let lat2 = b.latitude_deg.to_radians();
    let dlat = lat2 - lat1;
    let dlon = (b.longitude_deg - a.longitude_deg).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * h.sqrt().min(1.0).asin()
}

/// Channel distance in km between two nodes, using the default Earth radius.
pub fn geodesic_distance(a: &GeoPosition, b: &GeoPosition) -> f64 {
    geodesic_distance_with_radius(a, b, EARTH_RADIUS_KM)
}

pub fn geodesic_distance_with_radius(a: &GeoPosition, b: &GeoPosition, earth_radius_km: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mean_alt_km = (a.altitude_m + b.altitude_m) / 2000.0;
    let surface = (earth_radius_km + mean_alt_km) * central_angle(a, b);
    let dalt = (a.altitude_m - b.altitude_m) / 1000.0;
    surface.hypot(dalt)
}

/// True iff the straight segment between the two (elevated) endpoints stays
/// on or above the sphere.
///
/// Endpoints below [`MIN_EYE_HEIGHT_M`] are raised to it, which keeps the
/// sea-level case non-degenerate and the check monotone in altitude.
pub fn line_of_sight(a: &GeoPosition, b: &GeoPosition, params: &LinkFeasibilityParams) -> bool {
    let r = params.earth_radius_km;
    let r1 = r + a.altitude_m.max(MIN_EYE_HEIGHT_M) / 1000.0;
    let r2 = r + b.altitude_m.max(MIN_EYE_HEIGHT_M) / 1000.0;
    let theta = central_angle(a, b);

    // Work in the plane through the Earth's center and both endpoints.
    let (p1x, p1y) = (r1, 0.0);
    let (p2x, p2y) = (r2 * theta.cos(), r2 * theta.sin());
    let (dx, dy) = (p2x - p1x, p2y - p1y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return true;
    }
    // Closest point on the segment to the origin.
    let t = (-(p1x * dx + p1y * dy) / len2).clamp(0.0, 1.0);
    let (cx, cy) = (p1x + t * dx, p1y + t * dy);
    cx.hypot(cy) >= r
}

/// Whether the ATP procedure can acquire a link between the two positions.
pub fn link_feasible(a: &GeoPosition, b: &GeoPosition, params: &LinkFeasibilityParams) -> bool {
    geodesic_distance_with_radius(a, b, params.earth_radius_km) <= params.max_range_km
        && (!params.require_los || line_of_sight(a, b, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pos(lat: f64, lon: f64, alt: f64) -> GeoPosition {
        GeoPosition::new(lat, lon, alt).unwrap()
    }

    #[test]
    fn identical_positions_are_zero_apart() {
        let p = pos(10.0, 20.0, 100.0);
        assert_eq!(geodesic_distance(&p, &p), 0.0);
    }

    #[test]
    fn one_degree_on_the_equator() {
        // R * pi / 180 with R = 6371 km.
        let d = geodesic_distance(&pos(0.0, 0.0, 0.0), &pos(0.0, 1.0, 0.0));
        assert!((d - 111.194_926_644_558_73).abs() < 1e-9, "{d}");
    }

    #[test]
    fn pure_altitude_leg() {
        let d = geodesic_distance(&pos(0.0, 0.0, 0.0), &pos(0.0, 0.0, 1000.0));
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn position_validation() {
        assert!(matches!(GeoPosition::new(90.1, 0.0, 0.0), Err(GeoError::Latitude(_))));
        assert!(matches!(GeoPosition::new(0.0, f64::NAN, 0.0), Err(GeoError::Longitude(_))));
        assert!(matches!(GeoPosition::new(0.0, 0.0, -501.0), Err(GeoError::Altitude(_))));
        assert_eq!(pos(0.0, 180.0, 0.0).longitude_deg(), -180.0);
        assert_eq!(pos(0.0, 190.0, 0.0).longitude_deg(), -170.0);
        assert_eq!(pos(0.0, -180.0, 0.0).longitude_deg(), -180.0);
    }

    #[test]
    fn los_short_hop_at_sea_level() {
        let p = LinkFeasibilityParams::default();
        // ~1.1 km
        assert!(line_of_sight(&pos(0.0, 0.0, 0.0), &pos(0.0, 0.01, 0.0), &p));
    }

    #[test]
    fn los_blocked_at_200_km_sea_level() {
        let p = LinkFeasibilityParams::default();
        let lon = 200.0 / 111.194_926_644_558_73;
        assert!(!line_of_sight(&pos(0.0, 0.0, 0.0), &pos(0.0, lon, 0.0), &p));
    }

    #[test]
    fn los_low_to_mountain_150_km() {
        // Horizon oracle: sqrt(2 R h) summed = 5.048 + 195.5 km > 150 km.
        let p = LinkFeasibilityParams::default();
        let lon = 150.0 / 111.194_926_644_558_73;
        assert!(line_of_sight(&pos(0.0, 0.0, 0.0), &pos(0.0, lon, 3000.0), &p));
    }

    #[test]
    fn feasibility_examples() {
        let p = LinkFeasibilityParams::default();
        let deg_per_km = 1.0 / 111.194_926_644_558_73;
        assert!(link_feasible(&pos(0.0, 0.0, 500.0), &pos(0.0, 10.0 * deg_per_km, 500.0), &p));
        assert!(!link_feasible(&pos(0.0, 0.0, 9000.0), &pos(0.0, 150.0 * deg_per_km, 9000.0), &p));
        // 100 km at sea level: in range, blocked by curvature.
        let a = pos(0.0, 0.0, 0.0);
        let b = pos(0.0, 100.0 * deg_per_km, 0.0);
        assert!(!link_feasible(&a, &b, &p));
        let no_los = LinkFeasibilityParams { require_los: false, ..p };
        assert!(link_feasible(&a, &b, &no_los));
    }

    fn arb_pos() -> impl Strategy<Value = GeoPosition> {
        (-90.0..=90.0f64, -180.0..180.0f64, -500.0..9000.0f64)
            .prop_map(|(la, lo, al)| GeoPosition::new(la, lo, al).unwrap())
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in arb_pos(), b in arb_pos()) {
            prop_assert_eq!(geodesic_distance(&a, &b), geodesic_distance(&b, &a));
            prop_assert!(geodesic_distance(&a, &b) >= 0.0);
        }

        #[test]
        fn feasibility_symmetric_and_monotone_in_range(
            a in arb_pos(), b in arb_pos(), r1 in 1.0..500.0f64, r2 in 1.0..500.0f64,
        ) {
            let (small, large) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let ps = LinkFeasibilityParams { max_range_km: small, ..Default::default() };
            let pl = LinkFeasibilityParams { max_range_km: large, ..Default::default() };
            prop_assert_eq!(link_feasible(&a, &b, &ps), link_feasible(&b, &a, &ps));
            if link_feasible(&a, &b, &ps) {
                prop_assert!(link_feasible(&a, &b, &pl));
            }
        }

        #[test]
        fn los_monotone_in_altitude(
            lat in -60.0..60.0f64, lon in -10.0..10.0f64, dlon in 0.0..3.0f64,
            h1 in -500.0..5000.0f64, h2 in -500.0..5000.0f64, raise in 0.0..3000.0f64,
        ) {
            let p = LinkFeasibilityParams::default();
            let a = GeoPosition::new(lat, lon, h1).unwrap();
            let b = GeoPosition::new(lat, lon + dlon, h2).unwrap();
            let a_up = GeoPosition::new(lat, lon, h1 + raise).unwrap();
            prop_assert_eq!(line_of_sight(&a, &b, &p), line_of_sight(&b, &a, &p));
            if line_of_sight(&a, &b, &p) {
                prop_assert!(line_of_sight(&a_up, &b, &p));
            }
        }
    }
}
