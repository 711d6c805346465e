//! Equal-area hexagonal discretization of the sphere.
//!
//! The grid is an icosahedral aperture-3 hexagon grid on the Snyder equal-area
//! projection (the ISEA3H family): resolution `r` has `10·3^r + 2` cells, twelve
//! of which (centered on the icosahedron vertices) are pentagons. Cell indices
//! are this crate's own enumeration: the twelve pentagons first, then the cells
//! centered on icosahedron edges, then face interiors.
//!
//! Cell polygons are the great-circle polygons through the projected hexagon
//! corners. Near the icosahedron vertices and face centers the corners are
//! nudged so that every hexagon has the same area and every pentagon five
//! sixths of it (see `relax`). [`HexGrid::latlon_to_cell`] tests membership against exactly these
//! polygons, so every point lies inside (or on the boundary of) the polygon of
//! the cell it is assigned to, and the polygons partition the sphere.

mod antimeridian;
mod icosahedron;
mod lattice;
mod relax;
mod snyder;
mod vec3;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use icosahedron::Icosahedron;
use lattice::{FacePoint, Lattice};
use snyder::Snyder;
use vec3::Vec3;

pub use antimeridian::LonLatRing;
pub use icosahedron::{VERTEX0_LAT, VERTEX0_LON};

/// Radius of the authalic sphere, km.
pub const AUTHALIC_RADIUS_KM: f64 = 6371.0072;
/// Finest supported resolution.
pub const MAX_RESOLUTION: u8 = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("resolution {0} is outside 0..={MAX_RESOLUTION}")]
    Resolution(i64),
    #[error("cell index {index} is out of range for resolution {resolution}")]
    CellIndex { resolution: u8, index: u64 },
    #[error("cell {0} belongs to a different resolution than this grid")]
    ResolutionMismatch(CellId),
    #[error("invalid coordinate (lat {lat}, lon {lon})")]
    Coordinate { lat: f64, lon: f64 },
    #[error("malformed cell id {0:?}")]
    Parse(String),
}

/// Number of cells at `resolution`: `10·3^resolution + 2`.
pub fn cell_count(resolution: i64) -> Result<u64, GridError> {
    if !(0..=i64::from(MAX_RESOLUTION)).contains(&resolution) {
        return Err(GridError::Resolution(resolution));
    }
    Ok(10 * 3u64.pow(resolution as u32) + 2)
}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Validates latitude and wraps longitude into `[-180, 180)`.
    pub fn new(lat: f64, lon: f64) -> Result<Self, GridError> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GridError::Coordinate { lat, lon });
        }
        Ok(Self {
            lat,
            lon: wrap_lon(lon),
        })
    }

    pub(crate) fn to_vec3(self) -> Vec3 {
        if self.lat >= 90.0 {
            return [0.0, 0.0, 1.0];
        }
        if self.lat <= -90.0 {
            return [0.0, 0.0, -1.0];
        }
        let (sl, cl) = self.lat.to_radians().sin_cos();
        let (so, co) = self.lon.to_radians().sin_cos();
        [cl * co, cl * so, sl]
    }

    pub(crate) fn from_vec3(v: Vec3) -> Self {
        let lat = v[2].atan2(v[0].hypot(v[1])).to_degrees();
        let lon = v[1].atan2(v[0]).to_degrees();
        Self {
            lat: lat.clamp(-90.0, 90.0),
            lon: wrap_lon(lon),
        }
    }
}

fn wrap_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        return lon;
    }
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        -180.0
    } else {
        w
    }
}

/// A cell address: resolution and index in `[0, cell_count(resolution))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    resolution: u8,
    index: u64,
}

impl CellId {
    pub fn new(resolution: u8, index: u64) -> Result<Self, GridError> {
        let count = cell_count(i64::from(resolution))?;
        if index >= count {
            return Err(GridError::CellIndex { resolution, index });
        }
        Ok(Self { resolution, index })
    }

    pub fn resolution(&self) -> u8 {
        self.resolution
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// The twelve cells centered on icosahedron vertices.
    pub fn is_pentagon(&self) -> bool {
        self.index < 12
    }
}

/// Formats as `resolution:index`, e.g. `8:40213`.
impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.resolution, self.index)
    }
}

impl FromStr for CellId {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, i) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| GridError::Parse(s.to_owned()))?;
        let r: u8 = r.parse().map_err(|_| GridError::Parse(s.to_owned()))?;
        let i: u64 = i.parse().map_err(|_| GridError::Parse(s.to_owned()))?;
        CellId::new(r, i)
    }
}

/// Polygon and area of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub center: GeoPoint,
    /// Corners counterclockwise seen from outside; the ring is implicitly closed.
    pub boundary: Vec<GeoPoint>,
    pub area_km2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Containment {
    Outside,
    Boundary,
    Inside,
}

/// The grid at one resolution. Immutable after construction.
#[derive(Debug, Clone)]
pub struct HexGrid {
    resolution: u8,
    ico: Icosahedron,
    snyder: Snyder,
    lattice: Lattice,
    corner_overrides: HashMap<FacePoint, Vec3>,
}

impl HexGrid {
    pub fn new(resolution: i64) -> Result<Self, GridError> {
        cell_count(resolution)?;
        let resolution = resolution as u8;
        let mut grid = Self {
            resolution,
            ico: Icosahedron::new(),
            snyder: Snyder::new(),
            lattice: Lattice::new(resolution),
            corner_overrides: HashMap::new(),
        };
        grid.corner_overrides = grid.relax_corners();
        Ok(grid)
    }

    pub fn resolution(&self) -> u8 {
        self.resolution
    }

    pub fn cell_count(&self) -> u64 {
        self.lattice.count()
    }

    pub fn cell(&self, index: u64) -> Result<CellId, GridError> {
        CellId::new(self.resolution, index)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.cell_count()).map(|index| CellId {
            resolution: self.resolution,
            index,
        })
    }

    /// The cell whose polygon contains `p`. Points on a shared edge go to the
    /// cell with the smaller index.
    pub fn latlon_to_cell(&self, p: GeoPoint) -> CellId {
        let v = p.to_vec3();
        let candidates = self.candidates(v);

        let mut best: Option<u64> = None;
        let mut on_boundary = false;
        for &index in &candidates {
            match self.containment(index, v) {
                Containment::Inside if !on_boundary => {
                    best = Some(index);
                    break;
                }
                Containment::Inside | Containment::Boundary => {
                    best = Some(best.map_or(index, |b| b.min(index)));
                    on_boundary = true;
                }
                Containment::Outside => {}
            }
        }
        // Candidates are ordered by planar distance, so the first hit is the
        // projected hexagon itself or a direct neighbour.
        let index = best.unwrap_or_else(|| {
            debug_assert!(false, "no candidate polygon contains {p:?}");
            candidates[0]
        });
        CellId {
            resolution: self.resolution,
            index,
        }
    }

    pub fn cell_geometry(&self, c: CellId) -> Result<CellGeometry, GridError> {
        self.check(c)?;
        let (center, boundary) = self.polygon(c.index);
        let corners: Vec<Vec3> = boundary.iter().map(|p| p.to_vec3()).collect();
        let mut area = 0.0;
        for i in 0..corners.len() {
            let j = (i + 1) % corners.len();
            area += vec3::triangle_area(center, corners[i], corners[j]);
        }
        Ok(CellGeometry {
            center: GeoPoint::from_vec3(center),
            boundary,
            area_km2: area * AUTHALIC_RADIUS_KM * AUTHALIC_RADIUS_KM,
        })
    }

    /// Cell center without computing the polygon.
    pub fn cell_center(&self, c: CellId) -> Result<GeoPoint, GridError> {
        self.check(c)?;
        let p = self.lattice.point_of(&self.ico, c.index);
        Ok(GeoPoint::from_vec3(self.face_point_vec(p)))
    }

    fn check(&self, c: CellId) -> Result<(), GridError> {
        if c.resolution != self.resolution {
            return Err(GridError::ResolutionMismatch(c));
        }
        if c.index >= self.cell_count() {
            return Err(GridError::CellIndex {
                resolution: c.resolution,
                index: c.index,
            });
        }
        Ok(())
    }

    fn face_point_vec(&self, p: FacePoint) -> Vec3 {
        let m = self.lattice.m as f64;
        let w = p.bary.map(|x| x as f64 / m);
        let xy = self.snyder.barycentric_to_plane(w);
        self.snyder.inverse(&self.ico.faces[p.face], xy)
    }

    /// Position of a canonical corner: the projected hexagon corner unless the
    /// area relaxation moved it.
    fn corner_vec(&self, q: FacePoint) -> Vec3 {
        match self.corner_overrides.get(&q) {
            Some(&v) => v,
            None => self.face_point_vec(q),
        }
    }

    /// Cell centers near `v`, nearest (in the projection plane) first.
    fn candidates(&self, v: Vec3) -> Vec<u64> {
        let face = self.ico.face_of(v);
        let xy = self.snyder.forward(&self.ico.faces[face], v);
        let m = self.lattice.m;
        let w = self.snyder.barycentric(xy).map(|x| x * m as f64);
        let base = [w[0].floor() as i64, w[1].floor() as i64];

        let mut near: Vec<(f64, [i64; 3])> = Vec::with_capacity(32);
        for da in -3..=4 {
            for db in -3..=4 {
                let a = base[0] + da;
                let b = base[1] + db;
                let bary = [a, b, m - a - b];
                if !self.lattice.is_center(bary) {
                    continue;
                }
                let d2: f64 = (0..3).map(|j| (w[j] - bary[j] as f64).powi(2)).sum();
                near.push((d2, bary));
            }
        }
        near.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut out: Vec<u64> = Vec::with_capacity(12);
        for (_, bary) in near {
            let Some(p) = self.lattice.unfold(&self.ico, FacePoint { face, bary }) else {
                continue;
            };
            let p = self.lattice.canonical(&self.ico, p);
            let index = self.lattice.index_of(&self.ico, p);
            if !out.contains(&index) {
                out.push(index);
                if out.len() == 12 {
                    break;
                }
            }
        }
        out
    }

    /// Canonical corner points of a cell, counterclockwise from outside.
    fn corner_points(&self, center: FacePoint) -> Vec<FacePoint> {
        let offsets = self.lattice.corner_offsets();
        let nonzero = center.bary.iter().filter(|&&x| x != 0).count();
        if nonzero == 1 {
            let local = center.bary.iter().position(|&x| x != 0).unwrap();
            let v = self.ico.faces[center.face].vertices[local];
            let mut pts: Vec<FacePoint> = Vec::with_capacity(10);
            for f in self.ico.faces_around(v) {
                let mut bary = [0; 3];
                bary[self.ico.local_index(f, v).unwrap()] = self.lattice.m;
                for o in offsets {
                    let q = [bary[0] + o[0], bary[1] + o[1], bary[2] + o[2]];
                    if q.iter().all(|&x| x >= 0) {
                        let p = self.lattice.canonical(&self.ico, FacePoint { face: f, bary: q });
                        if !pts.contains(&p) {
                            pts.push(p);
                        }
                    }
                }
            }
            let c = self.ico.vertices[v];
            let (e1, e2) = tangent_frame(c);
            let mut keyed: Vec<(f64, FacePoint)> = pts
                .into_iter()
                .map(|p| {
                    let q = self.face_point_vec(p);
                    (vec3::dot(q, e2).atan2(vec3::dot(q, e1)), p)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            keyed.into_iter().map(|(_, p)| p).collect()
        } else {
            offsets
                .iter()
                .map(|o| {
                    let q = FacePoint {
                        face: center.face,
                        bary: [
                            center.bary[0] + o[0],
                            center.bary[1] + o[1],
                            center.bary[2] + o[2],
                        ],
                    };
                    let q = self
                        .lattice
                        .unfold(&self.ico, q)
                        .expect("hexagon corners never lie beyond an icosahedron vertex");
                    self.lattice.canonical(&self.ico, q)
                })
                .collect()
        }
    }

    /// Center and corners. Corners are rounded to lat/lon once, and both the
    /// published boundary and membership tests use the rounded values.
    fn polygon(&self, index: u64) -> (Vec3, Vec<GeoPoint>) {
        let center = self.lattice.point_of(&self.ico, index);
        let corners = self
            .corner_points(center)
            .into_iter()
            .map(|p| GeoPoint::from_vec3(self.corner_vec(p)))
            .collect();
        (self.face_point_vec(center), corners)
    }

    fn containment(&self, index: u64, v: Vec3) -> Containment {
        let corners: Vec<Vec3> = self.polygon(index).1.into_iter().map(GeoPoint::to_vec3).collect();
        let mut state = Containment::Inside;
        for i in 0..corners.len() {
            let j = (i + 1) % corners.len();
            let s = orientation(corners[i], corners[j], v);
            if s < 0.0 {
                return Containment::Outside;
            }
            if s == 0.0 {
                state = Containment::Boundary;
            }
        }
        state
    }
}

/// Exact sign of `det[a, b, v]`, positive when `v` is left of the arc a→b.
/// Exactness makes the sign antisymmetric in `a, b`, so adjacent cells never
/// both claim or both reject a point.
fn orientation(a: Vec3, b: Vec3, v: Vec3) -> f64 {
    let c = |p: Vec3| robust::Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    };
    robust::orient3d(c(a), c(b), c(v), c([0.0; 3]))
}

fn tangent_frame(c: Vec3) -> (Vec3, Vec3) {
    let helper = if c[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let e1 = vec3::normalize(vec3::sub(helper, vec3::scale(c, vec3::dot(helper, c))));
    (e1, vec3::cross(c, e1))
}
