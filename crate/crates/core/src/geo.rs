//! Great-circle distances and distance-threshold transfer graphs.

use crate::error::{Error, Result};
use crate::network::{AdjacencyGraph, Location};

/// Mean Earth radius used for all distances, in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

fn check_coordinate(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
        return Err(Error::invalid(format!("latitude {lat} outside [-90, 90]")));
    }
    if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
        return Err(Error::invalid(format!("longitude {lon} outside [-180, 180]")));
    }
    Ok(())
}

/// Haversine distance between two `(latitude, longitude)` points in degrees.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    check_coordinate(a.0, a.1)?;
    check_coordinate(b.0, b.1)?;
    let (lat1, lat2) = (a.0.to_radians(), b.0.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.1 - a.1).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    // clamp guards asin against h drifting just above 1 for antipodes
    Ok(2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin())
}

fn location_distance(a: &Location, b: &Location) -> Result<f64> {
    haversine_km((a.latitude, a.longitude), (b.latitude, b.longitude))
}

/// Pairwise distances in kilometres, row-major by location order.
pub fn distance_matrix(locations: &[Location]) -> Result<Vec<Vec<f64>>> {
    let n = locations.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = location_distance(&locations[i], &locations[j])?;
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    Ok(out)
}

/// Undirected graph joining every distinct pair no further apart than
/// `max_distance_km`. Locations with invalid coordinates get no edges.
pub fn build_adjacency(locations: &[Location], max_distance_km: f64) -> AdjacencyGraph {
    let n = locations.len();
    let mut graph = AdjacencyGraph::empty(n);
    if max_distance_km.is_nan() || max_distance_km < 0.0 {
        return graph;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if let Ok(d) = location_distance(&locations[i], &locations[j]) {
                if d <= max_distance_km + 1e-9 {
                    graph.set(i, j, true);
                }
            }
        }
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn loc(id: &str, lat: f64, lon: f64) -> Location {
        Location {
            id: id.into(),
            name: id.into(),
            latitude: lat,
            longitude: lon,
        }
    }

    #[test]
    fn identical_points_are_zero_apart() {
        let d = haversine_km((40.7128, -74.0060), (40.7128, -74.0060)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn new_york_to_baltimore() {
        // independent values: 272.55 km spherical, 272.87 km on the WGS84 ellipsoid
        let d = haversine_km((40.7128, -74.0060), (39.2904, -76.6122)).unwrap();
        assert!((d - 271.0).abs() <= 2.0, "{d}");
        assert!((d - 272.552).abs() <= 0.01, "{d}");
    }

    #[test]
    fn antipodes_reach_half_circumference() {
        let d = haversine_km((0.0, 0.0), (0.0, 180.0)).unwrap();
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1.0);
        let d = haversine_km((90.0, 0.0), (-90.0, 0.0)).unwrap();
        assert!((d - 20015.0).abs() < 1.0);
    }

    #[test]
    fn rejects_out_of_range_coordinates() {
        assert!(haversine_km((91.0, 0.0), (0.0, 0.0)).is_err());
        assert!(haversine_km((0.0, 0.0), (0.0, -180.5)).is_err());
    }

    #[test]
    fn zero_threshold_has_no_edges() {
        let locs = vec![loc("a", 0.0, 0.0), loc("b", 0.0, 0.0), loc("c", 1.0, 1.0)];
        // co-located a and b are still joined at distance 0
        let g = build_adjacency(&locs, 0.0);
        assert!(!g.allows(0, 2));
        assert!(!g.allows(0, 0));
        let apart = vec![loc("a", 0.0, 0.0), loc("c", 1.0, 1.0)];
        assert_eq!(build_adjacency(&apart, 0.0).edge_count(), 0);
    }

    #[test]
    fn infinite_threshold_is_complete() {
        let locs = vec![loc("a", 10.0, 10.0), loc("b", -30.0, 100.0), loc("c", 60.0, -120.0)];
        let g = build_adjacency(&locs, f64::INFINITY);
        assert_eq!(g.edge_count(), 6);
        for i in 0..3 {
            assert!(!g.allows(i, i));
        }
    }

    #[test]
    fn collinear_points_threshold() {
        // along the equator one degree of longitude is R * pi / 180 km
        let km_per_deg = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        let locs = vec![
            loc("a", 0.0, 0.0),
            loc("b", 0.0, 100.0 / km_per_deg),
            loc("c", 0.0, 250.0 / km_per_deg),
        ];
        let g = build_adjacency(&locs, 150.0);
        assert!(g.allows(0, 1) && g.allows(1, 0));
        assert!(g.allows(1, 2) && g.allows(2, 1));
        assert!(!g.allows(0, 2) && !g.allows(2, 0));
    }

    fn coord() -> impl Strategy<Value = (f64, f64)> {
        (-90.0f64..=90.0, -180.0f64..=180.0)
    }

    proptest! {
        #[test]
        fn haversine_is_symmetric_and_triangular(a in coord(), b in coord(), c in coord()) {
            let ab = haversine_km(a, b).unwrap();
            let ba = haversine_km(b, a).unwrap();
            let bc = haversine_km(b, c).unwrap();
            let ac = haversine_km(a, c).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn adjacency_symmetric_without_loops(
            pts in proptest::collection::vec(coord(), 0..8),
            threshold in 0.0f64..5000.0,
        ) {
            let locs: Vec<_> = pts.iter().enumerate()
                .map(|(k, &(la, lo))| loc(&k.to_string(), la, lo))
                .collect();
            let g = build_adjacency(&locs, threshold);
            for i in 0..locs.len() {
                prop_assert!(!g.allows(i, i));
                for j in 0..locs.len() {
                    prop_assert_eq!(g.allows(i, j), g.allows(j, i));
                }
            }
        }
    }
}
