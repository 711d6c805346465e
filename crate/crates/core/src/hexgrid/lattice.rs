//! Integer barycentric lattice of cell centers and cell corners.
//!
//! At resolution `r` every face is measured in units of `1/M`, `M = 3^(⌊r/2⌋+1)`.
//! Cell centers at even resolutions are the points whose three coordinates are
//! multiples of 3; at odd resolutions (the 30°-rotated hexagons) they are the
//! points whose coordinates are congruent mod 3. Cell corners are the centroids
//! of the center lattice's triangles and are integral in the same units.
//!
//! A point on a shared edge or at an icosahedron vertex has several face-local
//! representations; [`Lattice::canonical`] picks the one in the lowest-numbered
//! face so that shared corners are computed bit-identically by every cell.

use super::icosahedron::Icosahedron;

/// A face-local integer barycentric point, coordinates summing to `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct FacePoint {
    pub face: usize,
    pub bary: [i64; 3],
}

#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    pub m: i64,
    /// Class II (odd resolution) lattice.
    pub rotated: bool,
    /// Lattice steps per icosahedron edge.
    pub steps: i64,
    /// `row_offset[a]` = interior cells of a face with first coordinate `< a`.
    row_offset: Vec<u64>,
    pub per_face: u64,
}

/// Count of `b ∈ [0, x]` with `b ≡ rho (mod 3)`.
fn count_upto(x: i64, rho: i64) -> i64 {
    if x < rho {
        0
    } else {
        (x - rho) / 3 + 1
    }
}

impl Lattice {
    pub fn new(resolution: u8) -> Self {
        let m = 3i64.pow(u32::from(resolution / 2) + 1);
        let rotated = resolution % 2 == 1;
        let mut row_offset = Vec::with_capacity(m as usize + 2);
        let mut acc = 0u64;
        for a in 0..=m {
            row_offset.push(acc);
            acc += Self::row_len(m, rotated, a);
        }
        row_offset.push(acc);
        Self {
            m,
            rotated,
            steps: m / 3,
            row_offset,
            per_face: acc,
        }
    }

    fn row_len(m: i64, rotated: bool, a: i64) -> u64 {
        if a < 1 || a > m - 2 || (!rotated && a % 3 != 0) {
            return 0;
        }
        let rho = a % 3;
        (count_upto(m - a - 1, rho) - count_upto(0, rho)) as u64
    }

    pub fn is_center(&self, b: [i64; 3]) -> bool {
        let r = b.map(|x| x.rem_euclid(3));
        if self.rotated {
            r[0] == r[1] && r[1] == r[2]
        } else {
            r == [0, 0, 0]
        }
    }

    /// Offsets from a center to the corners of its hexagon, counterclockwise.
    pub fn corner_offsets(&self) -> [[i64; 3]; 6] {
        if self.rotated {
            [
                [1, 0, -1],
                [0, 1, -1],
                [-1, 1, 0],
                [-1, 0, 1],
                [0, -1, 1],
                [1, -1, 0],
            ]
        } else {
            [
                [2, -1, -1],
                [1, 1, -2],
                [-1, 2, -1],
                [-2, 1, 1],
                [-1, -1, 2],
                [1, -2, 1],
            ]
        }
    }

    /// Moves a point with one negative coordinate into the neighbouring face
    /// across that edge. Returns `None` when the point lies beyond a vertex.
    pub fn unfold(&self, ico: &Icosahedron, p: FacePoint) -> Option<FacePoint> {
        let neg: Vec<usize> = (0..3).filter(|&j| p.bary[j] < 0).collect();
        match neg.as_slice() {
            [] => Some(p),
            [j] => {
                let j = *j;
                let face = &ico.faces[p.face];
                let nf = face.neighbors[j];
                let x = p.bary[j];
                let out: [i64; 3] = std::array::from_fn(|k| {
                    let gv = ico.faces[nf].vertices[k];
                    match face.vertices.iter().position(|&v| v == gv) {
                        Some(local) => p.bary[local] + x,
                        None => -x,
                    }
                });
                if out.iter().any(|&c| c < 0) {
                    None
                } else {
                    Some(FacePoint {
                        face: nf,
                        bary: out,
                    })
                }
            }
            _ => None,
        }
    }

    /// Canonical representation of a point with non-negative coordinates.
    pub fn canonical(&self, ico: &Icosahedron, p: FacePoint) -> FacePoint {
        let face = &ico.faces[p.face];
        let nonzero: Vec<usize> = (0..3).filter(|&j| p.bary[j] != 0).collect();
        match nonzero.len() {
            1 => {
                let v = face.vertices[nonzero[0]];
                let f = ico.faces_around(v).next().unwrap();
                let mut bary = [0; 3];
                bary[ico.local_index(f, v).unwrap()] = self.m;
                FacePoint { face: f, bary }
            }
            2 => {
                let zero = (0..3).find(|&j| p.bary[j] == 0).unwrap();
                let nf = face.neighbors[zero];
                if nf > p.face {
                    return p;
                }
                let mut bary = [0; 3];
                for &j in &nonzero {
                    let k = ico.local_index(nf, face.vertices[j]).unwrap();
                    bary[k] = p.bary[j];
                }
                FacePoint { face: nf, bary }
            }
            _ => p,
        }
    }

    pub fn count(&self) -> u64 {
        12 + 30 * (self.steps as u64 - 1) + 20 * self.per_face
    }

    /// Global index of a canonical center.
    pub fn index_of(&self, ico: &Icosahedron, p: FacePoint) -> u64 {
        let face = &ico.faces[p.face];
        let nonzero: Vec<usize> = (0..3).filter(|&j| p.bary[j] != 0).collect();
        let edge_base = 12u64;
        let interior_base = edge_base + 30 * (self.steps as u64 - 1);
        match nonzero.len() {
            1 => face.vertices[nonzero[0]] as u64,
            2 => {
                let (j0, j1) = (nonzero[0], nonzero[1]);
                let (u, w) = (face.vertices[j0], face.vertices[j1]);
                let (lo, lo_coord) = if u < w { (u, p.bary[j0]) } else { (w, p.bary[j1]) };
                let hi = u.max(w);
                let t = (self.m - lo_coord) / 3;
                edge_base + ico.edge_index(lo, hi) as u64 * (self.steps as u64 - 1) + (t as u64 - 1)
            }
            _ => {
                let [a, b, _] = p.bary;
                let rho = a % 3;
                let rank = self.row_offset[a as usize]
                    + (count_upto(b - 1, rho) - count_upto(0, rho)) as u64;
                interior_base + p.face as u64 * self.per_face + rank
            }
        }
    }

    /// Canonical center for a global index (which must be `< count()`).
    pub fn point_of(&self, ico: &Icosahedron, index: u64) -> FacePoint {
        let edge_base = 12u64;
        let per_edge = self.steps as u64 - 1;
        let interior_base = edge_base + 30 * per_edge;
        if index < edge_base {
            let v = index as usize;
            let f = ico.faces_around(v).next().unwrap();
            let mut bary = [0; 3];
            bary[ico.local_index(f, v).unwrap()] = self.m;
            FacePoint { face: f, bary }
        } else if index < interior_base {
            let e = ((index - edge_base) / per_edge) as usize;
            let t = ((index - edge_base) % per_edge) as i64 + 1;
            let (u, w) = ico.edges[e];
            let f = ico
                .faces_around(u)
                .find(|&f| ico.faces[f].vertices.contains(&w))
                .unwrap();
            let mut bary = [0; 3];
            bary[ico.local_index(f, u).unwrap()] = self.m - 3 * t;
            bary[ico.local_index(f, w).unwrap()] = 3 * t;
            FacePoint { face: f, bary }
        } else {
            let k = index - interior_base;
            let face = (k / self.per_face) as usize;
            let rank = k % self.per_face;
            // Last row whose offset is <= rank.
            let a = self.row_offset.partition_point(|&o| o <= rank) - 1;
            let a = a as i64;
            let rho = a % 3;
            let first = if rho == 0 { 3 } else { rho };
            let b = first + 3 * (rank - self.row_offset[a as usize]) as i64;
            FacePoint {
                face,
                bary: [a, b, self.m - a - b],
            }
        }
    }
}
