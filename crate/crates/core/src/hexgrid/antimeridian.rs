//! Longitude/latitude rings for map formats that cannot wrap around the
//! antimeridian.

use super::CellGeometry;

/// A closed ring of `[lon, lat]` positions (first position repeated last).
pub type LonLatRing = Vec<[f64; 2]>;

impl CellGeometry {
    /// Boundary as one or two counterclockwise `[lon, lat]` rings with every
    /// longitude in `[-180, 180]`. A cell straddling the antimeridian is cut
    /// into a western and an eastern piece; a cell covering a pole becomes a
    /// band closed along the pole's latitude.
    pub fn lonlat_rings(&self) -> Vec<LonLatRing> {
        let mut pts: Vec<[f64; 2]> = Vec::with_capacity(self.boundary.len());
        for p in &self.boundary {
            let mut lon = p.lon;
            if let Some(prev) = pts.last() {
                while lon - prev[0] > 180.0 {
                    lon -= 360.0;
                }
                while lon - prev[0] < -180.0 {
                    lon += 360.0;
                }
            }
            pts.push([lon, p.lat]);
        }
        let first = pts[0];
        let mut closing = first[0];
        let last = pts[pts.len() - 1][0];
        while closing - last > 180.0 {
            closing -= 360.0;
        }
        while closing - last < -180.0 {
            closing += 360.0;
        }
        let winding = closing - first[0];

        if winding.abs() > 180.0 {
            return vec![polar_band(&pts, winding > 0.0)];
        }

        let (lo, hi) = pts
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
        let shift = if hi > 180.0 {
            -360.0
        } else if lo < -180.0 {
            360.0
        } else {
            return vec![close(pts)];
        };
        // Cut at the meridian that the unwrapped ring crosses.
        let cut = if shift < 0.0 { 180.0 } else { -180.0 };
        let west = clip(&pts, cut, false);
        let east = clip(&pts, cut, true);
        let (inner, outer) = if shift < 0.0 { (west, east) } else { (east, west) };
        let outer: Vec<[f64; 2]> = outer.into_iter().map(|p| [p[0] + shift, p[1]]).collect();
        [inner, outer]
            .into_iter()
            .filter(|r| r.len() >= 3)
            .map(close)
            .collect()
    }
}

fn close(mut ring: Vec<[f64; 2]>) -> LonLatRing {
    let first = ring[0];
    ring.push(first);
    ring
}

/// Sutherland-Hodgman clip against `lon <= cut` (or `lon >= cut` when
/// `keep_east`).
fn clip(pts: &[[f64; 2]], cut: f64, keep_east: bool) -> Vec<[f64; 2]> {
    let inside = |p: &[f64; 2]| if keep_east { p[0] >= cut } else { p[0] <= cut };
    let mut out = Vec::with_capacity(pts.len() + 2);
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        let (ia, ib) = (inside(&a), inside(&b));
        if ia {
            out.push(a);
        }
        if ia != ib {
            let t = (cut - a[0]) / (b[0] - a[0]);
            out.push([cut, a[1] + t * (b[1] - a[1])]);
        }
    }
    out.dedup();
    out
}

/// Ring for a cell enclosing a pole: follow the boundary once around in
/// longitude from -180 to 180, then close along the pole.
fn polar_band(pts: &[[f64; 2]], north: bool) -> LonLatRing {
    // Mirror southern cells so longitudes always increase along the ring.
    let sign = if north { 1.0 } else { -1.0 };
    let base: Vec<[f64; 2]> = pts.iter().map(|p| [sign * p[0], p[1]]).collect();
    let shift = ((-180.0 - base[0][0]) / 360.0).ceil() * 360.0;
    let mut lap: Vec<[f64; 2]> = Vec::with_capacity(2 * base.len() + 1);
    for k in 0..2 {
        let dx = shift + 360.0 * f64::from(k);
        lap.extend(base.iter().map(|p| [p[0] + dx, p[1]]));
    }
    lap.push([base[0][0] + shift + 720.0, base[0][1]]);

    // The lap spans at least [180, 540]; take that window.
    let (lo, hi) = (180.0, 540.0);
    let mut ring: Vec<[f64; 2]> = Vec::with_capacity(base.len() + 4);
    for w in lap.windows(2) {
        let (a, b) = (w[0], w[1]);
        for edge in [lo, hi] {
            if a[0] < edge && b[0] >= edge {
                let t = (edge - a[0]) / (b[0] - a[0]);
                ring.push([edge, a[1] + t * (b[1] - a[1])]);
            }
        }
        if b[0] > lo && b[0] < hi {
            ring.push(b);
        }
    }
    let mut ring: Vec<[f64; 2]> = ring.into_iter().map(|p| [sign * (p[0] - 360.0), p[1]]).collect();
    let pole = if north { 90.0 } else { -90.0 };
    ring.push([sign * 180.0, pole]);
    ring.push([-sign * 180.0, pole]);
    close(ring)
}

#[cfg(test)]
mod tests {
    use super::super::{GeoPoint, HexGrid};

    fn ring_area(r: &[[f64; 2]]) -> f64 {
        r.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>() / 2.0
    }

    #[test]
    fn rings_stay_in_range_and_ccw() {
        for res in 0..=4 {
            let g = HexGrid::new(res).unwrap();
            for c in g.cells() {
                let geo = g.cell_geometry(c).unwrap();
                let rings = geo.lonlat_rings();
                assert!(!rings.is_empty() && rings.len() <= 2, "{c}");
                for r in &rings {
                    assert_eq!(r.first(), r.last());
                    assert!(r.len() >= 4, "{c} {r:?}");
                    for p in r {
                        assert!((-180.0..=180.0).contains(&p[0]), "{c} {r:?}");
                        assert!((-90.0..=90.0).contains(&p[1]));
                    }
                    assert!(ring_area(r) > 0.0, "{c} not ccw: {r:?}");
                }
            }
        }
    }

    #[test]
    fn pole_cells_become_bands() {
        let g = HexGrid::new(3).unwrap();
        for lat in [90.0, -90.0] {
            let c = g.latlon_to_cell(GeoPoint::new(lat, 0.0).unwrap());
            let rings = g.cell_geometry(c).unwrap().lonlat_rings();
            assert_eq!(rings.len(), 1);
            let r = &rings[0];
            assert!(r.iter().any(|p| p[1] == lat));
            assert!(r.iter().any(|p| p[0] == -180.0) && r.iter().any(|p| p[0] == 180.0));
        }
    }
}
