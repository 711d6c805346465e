use std::collections::HashSet;
use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use pyroseason::hexgrid::{cell_count, CellGeometry, CellId, GeoPoint, HexGrid, AUTHALIC_RADIUS_KM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type V = [f64; 3];

fn xyz(p: GeoPoint) -> V {
    let (la, lo) = (p.lat.to_radians(), p.lon.to_radians());
    [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
}

fn cross(a: V, b: V) -> V {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Winding angle of the boundary around `p`: about 2π inside, π on an edge,
/// 0 outside.
fn winding(geo: &CellGeometry, p: GeoPoint) -> f64 {
    let v = xyz(p);
    let ring: Vec<V> = geo.boundary.iter().map(|&q| xyz(q)).collect();
    let mut total = 0.0;
    for i in 0..ring.len() {
        let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
        let y = dot(v, cross(a, b));
        let x = dot(a, b) - dot(a, v) * dot(b, v);
        total += y.atan2(x);
    }
    total
}

fn covers(geo: &CellGeometry, p: GeoPoint) -> bool {
    winding(geo, p) > PI - 1e-6
}

fn strictly_inside(geo: &CellGeometry, p: GeoPoint) -> bool {
    winding(geo, p) > 2.0 * PI - 1e-6
}

fn uniform_point(rng: &mut impl Rng) -> GeoPoint {
    let z: f64 = rng.random_range(-1.0..1.0);
    let lon: f64 = rng.random_range(-180.0..180.0);
    GeoPoint::new(z.asin().to_degrees(), lon).unwrap()
}

/// Oracle area: planar-projection-free spherical excess of the fan from the
/// first vertex, using the L'Huilier formula.
fn lhuilier_area(geo: &CellGeometry) -> f64 {
    let ring: Vec<V> = geo.boundary.iter().map(|&q| xyz(q)).collect();
    let side = |a: V, b: V| dot(a, b).clamp(-1.0, 1.0).acos();
    let mut e = 0.0;
    for i in 1..ring.len() - 1 {
        let (a, b, c) = (ring[0], ring[i], ring[i + 1]);
        let (x, y, z) = (side(b, c), side(a, c), side(a, b));
        let s = (x + y + z) / 2.0;
        let t = (s / 2.0).tan() * ((s - x) / 2.0).tan() * ((s - y) / 2.0).tan() * ((s - z) / 2.0).tan();
        e += 4.0 * t.max(0.0).sqrt().atan();
    }
    e * AUTHALIC_RADIUS_KM * AUTHALIC_RADIUS_KM
}

fn sphere_km2() -> f64 {
    4.0 * PI * AUTHALIC_RADIUS_KM * AUTHALIC_RADIUS_KM
}

#[test]
fn random_points_lie_in_their_cell_r8() {
    let g = HexGrid::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let p = uniform_point(&mut rng);
        let c = g.latlon_to_cell(p);
        assert!(covers(&g.cell_geometry(c).unwrap(), p), "{p:?} -> {c}");
    }
}

#[test]
fn partition_at_resolution_6() {
    let g = HexGrid::new(6).unwrap();
    let geos: Vec<CellGeometry> = g.cells().map(|c| g.cell_geometry(c).unwrap()).collect();
    let centers: Vec<V> = geos.iter().map(|geo| xyz(geo.center)).collect();
    // Cells at r6 are ~300 km across; anything further than 5° cannot contain p.
    let near = 5f64.to_radians().cos();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100_000 {
        let p = uniform_point(&mut rng);
        let c = g.latlon_to_cell(p);
        let v = xyz(p);
        assert!(covers(&geos[c.index() as usize], p), "{p:?} -> {c}");
        for (i, geo) in geos.iter().enumerate() {
            if i as u64 != c.index() && dot(centers[i], v) > near {
                assert!(!strictly_inside(geo, p), "{p:?} also inside {i}");
            }
        }
    }
}

#[test]
fn exhaustive_membership_at_low_resolution() {
    let g = HexGrid::new(2).unwrap();
    let geos: Vec<CellGeometry> = g.cells().map(|c| g.cell_geometry(c).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let p = uniform_point(&mut rng);
        let c = g.latlon_to_cell(p);
        let inside: Vec<usize> = (0..geos.len()).filter(|&i| strictly_inside(&geos[i], p)).collect();
        assert_eq!(inside, vec![c.index() as usize], "{p:?}");
    }
}

#[test]
fn shared_corner_goes_to_smallest_index() {
    let g = HexGrid::new(3).unwrap();
    let geos: Vec<CellGeometry> = g.cells().map(|c| g.cell_geometry(c).unwrap()).collect();
    let mut checked = 0;
    for (i, geo) in geos.iter().enumerate().step_by(7) {
        for &corner in &geo.boundary {
            let owners: Vec<usize> = (0..geos.len())
                .filter(|&j| geos[j].boundary.contains(&corner))
                .collect();
            assert!(owners.contains(&i));
            assert_eq!(owners.len(), 3, "corner {corner:?} shared by {owners:?}");
            let got = g.latlon_to_cell(corner).index() as usize;
            assert_eq!(got, owners[0], "corner {corner:?} owners {owners:?}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn north_and_south_poles_are_unique() {
    for r in 0..=10 {
        let g = HexGrid::new(r).unwrap();
        for lat in [90.0, -90.0] {
            let ids: HashSet<CellId> = (-180..180)
                .map(|lon| g.latlon_to_cell(GeoPoint::new(lat, f64::from(lon) + 0.25).unwrap()))
                .collect();
            assert_eq!(ids.len(), 1, "r{r} lat {lat}");
        }
    }
}

#[test]
fn centers_map_back_to_their_cell() {
    for r in 0..=5 {
        let g = HexGrid::new(r).unwrap();
        for c in g.cells() {
            let center = g.cell_geometry(c).unwrap().center;
            assert_eq!(g.latlon_to_cell(center), c);
        }
    }
    let g = HexGrid::new(8).unwrap();
    for i in (0..g.cell_count()).step_by(97) {
        let c = g.cell(i).unwrap();
        assert_eq!(g.latlon_to_cell(g.cell_center(c).unwrap()), c);
    }
}

#[test]
fn resolution_8_hexagons_match_reported_area() {
    let g = HexGrid::new(8).unwrap();
    assert_eq!(g.cell_count(), 65_612);
    let (mut sum, mut n) = (0.0, 0);
    for c in g.cells().filter(|c| !c.is_pentagon()) {
        let a = g.cell_geometry(c).unwrap().area_km2;
        assert!((a / 7774.0 - 1.0).abs() < 0.01, "{c}: {a}");
        sum += a;
        n += 1;
    }
    assert!((sum / n as f64 / 7774.0 - 1.0).abs() < 0.01);
}

#[test]
fn areas_partition_the_sphere() {
    for r in 0..=6 {
        let g = HexGrid::new(r).unwrap();
        let total: f64 = g.cells().map(|c| g.cell_geometry(c).unwrap().area_km2).sum();
        let tol = if r == 2 { 1e-3 } else { 1e-6 };
        assert!((total / sphere_km2() - 1.0).abs() < tol, "r{r}: {total}");
    }
}

#[test]
fn area_matches_independent_formula() {
    let g = HexGrid::new(5).unwrap();
    for c in g.cells().step_by(13) {
        let geo = g.cell_geometry(c).unwrap();
        let oracle = lhuilier_area(&geo);
        assert!((geo.area_km2 / oracle - 1.0).abs() < 1e-8, "{c}");
    }
}

#[test]
fn hexagon_uniformity_and_pentagon_ratio() {
    for r in 0..=8 {
        let g = HexGrid::new(r).unwrap();
        let (mut lo, mut hi, mut sum, mut n) = (f64::MAX, 0f64, 0.0, 0);
        let mut pent = Vec::new();
        for c in g.cells() {
            let a = lhuilier_area(&g.cell_geometry(c).unwrap());
            if c.is_pentagon() {
                pent.push(a);
            } else {
                lo = lo.min(a);
                hi = hi.max(a);
                sum += a;
                n += 1;
            }
        }
        assert_eq!(pent.len(), 12);
        if n > 0 {
            assert!(hi / lo <= 1.02, "r{r}: {}", hi / lo);
            let mean = sum / n as f64;
            for a in pent {
                assert!((a / mean / (5.0 / 6.0) - 1.0).abs() < 0.02, "r{r}: {}", a / mean);
            }
        }
    }
}

#[test]
fn exactly_twelve_pentagons_and_convex_rings() {
    for r in 0..=6 {
        let g = HexGrid::new(r).unwrap();
        let mut five = 0;
        for c in g.cells() {
            let geo = g.cell_geometry(c).unwrap();
            match geo.boundary.len() {
                5 => five += 1,
                6 => {}
                k => panic!("{c} has {k} corners"),
            }
            assert_eq!(geo.boundary.len() == 5, c.is_pentagon());
            // Every turn is to the left, so the ring is convex and simple.
            let ring: Vec<V> = geo.boundary.iter().map(|&q| xyz(q)).collect();
            let k = ring.len();
            for i in 0..k {
                let (a, b, c2) = (ring[i], ring[(i + 1) % k], ring[(i + 2) % k]);
                assert!(dot(cross(a, b), c2) > 0.0, "{c} turns right at {i}");
            }
        }
        assert_eq!(five, 12);
    }
}

#[test]
fn dense_sample_hits_every_cell() {
    let g = HexGrid::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seen: HashSet<CellId> = (0..100_000).map(|_| g.latlon_to_cell(uniform_point(&mut rng))).collect();
    assert_eq!(seen.len() as u64, cell_count(3).unwrap());
}

#[test]
fn construction_and_lookup_are_deterministic() {
    let a = HexGrid::new(7).unwrap();
    let b = HexGrid::new(7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2_000 {
        let p = uniform_point(&mut rng);
        let c = a.latlon_to_cell(p);
        assert_eq!(c, a.latlon_to_cell(p));
        assert_eq!(c, b.latlon_to_cell(p));
        let (ga, gb) = (a.cell_geometry(c).unwrap(), b.cell_geometry(c).unwrap());
        assert_eq!(ga.boundary, gb.boundary);
        assert_eq!(ga.area_km2.to_bits(), gb.area_km2.to_bits());
    }
}

#[test]
fn invalid_ids_are_rejected() {
    let g = HexGrid::new(2).unwrap();
    assert!(g.cell(92).is_err());
    let other = HexGrid::new(3).unwrap().cell(5).unwrap();
    assert!(g.cell_geometry(other).is_err());
    assert!(HexGrid::new(16).is_err());
}

fn grid(r: i64) -> &'static HexGrid {
    static GRIDS: OnceLock<Vec<HexGrid>> = OnceLock::new();
    &GRIDS.get_or_init(|| (0..=9).map(|r| HexGrid::new(r).unwrap()).collect())[r as usize]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn any_point_is_covered_by_its_cell(lat in -90.0f64..=90.0, lon in -180.0f64..180.0, r in 0i64..=9) {
        let g = grid(r);
        let p = GeoPoint::new(lat, lon).unwrap();
        let c = g.latlon_to_cell(p);
        prop_assert!(c.index() < g.cell_count());
        prop_assert!(covers(&g.cell_geometry(c).unwrap(), p));
        prop_assert_eq!(c, g.latlon_to_cell(p));
    }

    #[test]
    fn longitude_wraps(lat in -89.0f64..89.0, lon in -180.0f64..180.0) {
        let a = GeoPoint::new(lat, lon).unwrap();
        let b = GeoPoint::new(lat, lon + 360.0).unwrap();
        prop_assert!((a.lon - b.lon).abs() < 1e-9);
        prop_assert!((-180.0..180.0).contains(&b.lon));
    }
}
