//! Icosahedron orientation, faces and face adjacency.
//!
//! One vertex sits at 58.28252559°N 11.25°E and its neighbour lies due north of it
//! (azimuth 0), the usual orientation for ISEA grids. Faces are stored with their
//! vertices counterclockwise as seen from outside the sphere.

use super::vec3::{self, Vec3};

/// Latitude of the reference vertex, degrees.
pub const VERTEX0_LAT: f64 = 58.282_525_588_538_99;
/// Longitude of the reference vertex, degrees.
pub const VERTEX0_LON: f64 = 11.25;

#[derive(Debug, Clone)]
pub(crate) struct Face {
    /// Global vertex ids, counterclockwise from outside.
    pub vertices: [usize; 3],
    pub center: Vec3,
    /// Tangent unit vector at `center` pointing toward `vertices[0]`.
    pub e1: Vec3,
    /// `center × e1`; rotating `e1` toward `e2` is counterclockwise from outside.
    pub e2: Vec3,
    /// `neighbors[j]` shares the edge opposite local vertex `j`.
    pub neighbors: [usize; 3],
}

#[derive(Debug, Clone)]
pub(crate) struct Icosahedron {
    pub vertices: [Vec3; 12],
    pub faces: Vec<Face>,
    /// The 30 edges as sorted `(u, w)` vertex pairs, in ascending order.
    pub edges: Vec<(usize, usize)>,
}

impl Icosahedron {
    pub fn new() -> Self {
        let vertices = oriented_vertices();
        let triples = face_triples();
        let mut faces: Vec<Face> = triples
            .iter()
            .map(|&t| {
                let mut t = t;
                let [a, b, c] = t.map(|i| vertices[i]);
                if vec3::dot(a, vec3::cross(b, c)) < 0.0 {
                    t.swap(1, 2);
                }
                let center = vec3::normalize(vec3::add(vec3::add(a, b), c));
                let v0 = vertices[t[0]];
                let e1 = vec3::normalize(vec3::sub(v0, vec3::scale(center, vec3::dot(v0, center))));
                let e2 = vec3::cross(center, e1);
                Face {
                    vertices: t,
                    center,
                    e1,
                    e2,
                    neighbors: [usize::MAX; 3],
                }
            })
            .collect();

        for f in 0..faces.len() {
            for j in 0..3 {
                let u = faces[f].vertices[(j + 1) % 3];
                let w = faces[f].vertices[(j + 2) % 3];
                let other = (0..faces.len())
                    .find(|&g| g != f && faces[g].vertices.contains(&u) && faces[g].vertices.contains(&w))
                    .expect("icosahedron edge is shared by two faces");
                faces[f].neighbors[j] = other;
            }
        }

        let mut edges: Vec<(usize, usize)> = faces
            .iter()
            .flat_map(|f| {
                let v = f.vertices;
                [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])]
            })
            .map(|(u, w)| (u.min(w), u.max(w)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        debug_assert_eq!(edges.len(), 30);

        Self {
            vertices,
            faces,
            edges,
        }
    }

    /// Index of the face whose spherical triangle contains `p`.
    ///
    /// Face triangles coincide with the spherical Voronoi regions of the face
    /// centers, so the nearest center wins.
    pub fn face_of(&self, p: Vec3) -> usize {
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, f) in self.faces.iter().enumerate() {
            let d = vec3::dot(f.center, p);
            if d > best_dot {
                best_dot = d;
                best = i;
            }
        }
        best
    }

    /// Local index (0..3) of global vertex `v` in face `f`, if present.
    pub fn local_index(&self, f: usize, v: usize) -> Option<usize> {
        self.faces[f].vertices.iter().position(|&x| x == v)
    }

    /// Faces incident to vertex `v`, ascending.
    pub fn faces_around(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(move |&f| self.faces[f].vertices.contains(&v))
    }

    /// Position of edge `(u, w)` in [`Icosahedron::edges`].
    pub fn edge_index(&self, u: usize, w: usize) -> usize {
        let key = (u.min(w), u.max(w));
        self.edges
            .binary_search(&key)
            .expect("vertices are adjacent")
    }
}

fn oriented_vertices() -> [Vec3; 12] {
    let ring_lat = 0.5f64.atan();
    let mut base = [[0.0; 3]; 12];
    base[0] = [0.0, 0.0, 1.0];
    base[11] = [0.0, 0.0, -1.0];
    for k in 0..5 {
        let upper_lon = (180.0 + 72.0 * k as f64).to_radians();
        let lower_lon = (216.0 + 72.0 * k as f64).to_radians();
        base[1 + k] = [
            ring_lat.cos() * upper_lon.cos(),
            ring_lat.cos() * upper_lon.sin(),
            ring_lat.sin(),
        ];
        base[6 + k] = [
            ring_lat.cos() * lower_lon.cos(),
            ring_lat.cos() * lower_lon.sin(),
            -ring_lat.sin(),
        ];
    }

    // Tilt the pole down to the reference latitude, then spin to its longitude.
    // The upper-ring vertex at longitude 180 ends up due north of vertex 0.
    let colat = (90.0 - VERTEX0_LAT).to_radians();
    let lon = VERTEX0_LON.to_radians();
    let (sc, cc) = colat.sin_cos();
    let (sl, cl) = lon.sin_cos();
    base.map(|[x, y, z]| {
        let x1 = cc * x + sc * z;
        let z1 = -sc * x + cc * z;
        vec3::normalize([cl * x1 - sl * y, sl * x1 + cl * y, z1])
    })
}

fn face_triples() -> Vec<[usize; 3]> {
    let up = |k: usize| 1 + k % 5;
    let lo = |k: usize| 6 + k % 5;
    let mut t = Vec::with_capacity(20);
    for k in 0..5 {
        t.push([0, up(k), up(k + 1)]);
    }
    for k in 0..5 {
        t.push([up(k), lo(k), up(k + 1)]);
    }
    for k in 0..5 {
        t.push([lo(k), lo(k + 1), up(k + 1)]);
    }
    for k in 0..5 {
        t.push([11, lo(k + 1), lo(k)]);
    }
    t
}
