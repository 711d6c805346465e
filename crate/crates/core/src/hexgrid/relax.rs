//! Equal-area relaxation of cell corners around the icosahedron vertices and
//! face centers.
//!
//! Cells are published as great-circle polygons, while the projection maps
//! straight planar edges to curves. Away from the 32 singular points the two
//! agree to well under a percent; close to them the curvature changes cell
//! areas by several percent. Corners within a few rings of each singular point
//! are moved (minimum-norm Gauss-Newton) until every cell in the patch has its
//! nominal area. Corners on the patch rim stay fixed, so cells outside keep
//! their projected shape.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

use super::lattice::FacePoint;
use super::vec3::{self, Vec3};
use super::{tangent_frame, HexGrid};

const RINGS: usize = 3;
const MAX_ITER: usize = 30;
const TOL: f64 = 1e-12;

impl HexGrid {
    pub(super) fn relax_corners(&self) -> HashMap<FacePoint, Vec3> {
        let mut patches: Vec<BTreeSet<u64>> = self
            .singular_seeds()
            .into_iter()
            .map(|seed| self.rings(seed, RINGS))
            .collect();

        // Merge overlapping patches so every corner is relaxed exactly once.
        let mut merged: Vec<BTreeSet<u64>> = Vec::new();
        while let Some(mut p) = patches.pop() {
            loop {
                let before = p.len();
                patches.retain(|q| {
                    if q.is_disjoint(&p) {
                        true
                    } else {
                        p.extend(q.iter().copied());
                        false
                    }
                });
                merged.retain(|q| {
                    if q.is_disjoint(&p) {
                        true
                    } else {
                        p.extend(q.iter().copied());
                        false
                    }
                });
                if p.len() == before {
                    break;
                }
            }
            merged.push(p);
        }
        merged.sort();

        let mut out = HashMap::new();
        for patch in &merged {
            self.relax_patch(patch, &mut out);
        }
        out
    }

    /// Cells holding or touching each icosahedron vertex and face center.
    fn singular_seeds(&self) -> Vec<Vec<u64>> {
        let m = self.lattice.m;
        let mut seeds: Vec<Vec<u64>> = (0..12).map(|v| vec![v]).collect();
        for face in 0..self.ico.faces.len() {
            if m % 3 != 0 {
                continue;
            }
            let p = FacePoint {
                face,
                bary: [m / 3; 3],
            };
            if self.lattice.is_center(p.bary) {
                seeds.push(vec![self.lattice.index_of(&self.ico, p)]);
            } else {
                seeds.push(self.corner_cells(p));
            }
        }
        seeds
    }

    /// Indices of the three cells meeting at a corner.
    fn corner_cells(&self, q: FacePoint) -> Vec<u64> {
        let mut out = Vec::with_capacity(3);
        for o in self.lattice.corner_offsets() {
            let bary = [q.bary[0] - o[0], q.bary[1] - o[1], q.bary[2] - o[2]];
            if !self.lattice.is_center(bary) {
                continue;
            }
            if let Some(p) = self.lattice.unfold(&self.ico, FacePoint { face: q.face, bary }) {
                let p = self.lattice.canonical(&self.ico, p);
                let i = self.lattice.index_of(&self.ico, p);
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        out
    }

    fn cell_corners(&self, index: u64) -> Vec<FacePoint> {
        self.corner_points(self.lattice.point_of(&self.ico, index))
    }

    fn rings(&self, seed: Vec<u64>, rings: usize) -> BTreeSet<u64> {
        let mut set: BTreeSet<u64> = seed.iter().copied().collect();
        let mut frontier = seed;
        for _ in 0..rings {
            let mut next = Vec::new();
            for &c in &frontier {
                for q in self.cell_corners(c) {
                    for n in self.corner_cells(q) {
                        if set.insert(n) {
                            next.push(n);
                        }
                    }
                }
            }
            frontier = next;
        }
        set
    }

    fn relax_patch(&self, patch: &BTreeSet<u64>, out: &mut HashMap<FacePoint, Vec3>) {
        let cells: Vec<u64> = patch.iter().copied().collect();
        let centers: Vec<Vec3> = cells
            .iter()
            .map(|&c| self.face_point_vec(self.lattice.point_of(&self.ico, c)))
            .collect();
        let corners: Vec<Vec<FacePoint>> = cells.iter().map(|&c| self.cell_corners(c)).collect();

        let mut incidence: BTreeMap<FacePoint, Vec<usize>> = BTreeMap::new();
        for (row, cs) in corners.iter().enumerate() {
            for &q in cs {
                incidence.entry(q).or_default().push(row);
            }
        }
        let mut pos: HashMap<FacePoint, Vec3> =
            incidence.keys().map(|&q| (q, self.face_point_vec(q))).collect();
        let movable: Vec<(FacePoint, Vec<usize>)> = incidence
            .into_iter()
            .filter(|(_, rows)| rows.len() == 3)
            .collect();
        if movable.is_empty() {
            return;
        }
        let frames: Vec<(Vec3, Vec3)> = movable.iter().map(|(q, _)| tangent_frame(pos[q])).collect();

        let unit = 4.0 * std::f64::consts::PI / (self.cell_count() - 2) as f64;
        let nominal: Vec<f64> = cells
            .iter()
            .map(|&c| if c < 12 { 5.0 / 6.0 } else { 1.0 })
            .collect();

        let area = |row: usize, pos: &HashMap<FacePoint, Vec3>| -> f64 {
            let cs = &corners[row];
            let mut a = 0.0;
            for i in 0..cs.len() {
                let j = (i + 1) % cs.len();
                a += vec3::triangle_area(centers[row], pos[&cs[i]], pos[&cs[j]]);
            }
            a / unit
        };

        let total: f64 = (0..cells.len()).map(|r| area(r, &pos)).sum();
        let scale = total / nominal.iter().sum::<f64>();
        let target: Vec<f64> = nominal.iter().map(|t| t * scale).collect();

        let n = cells.len();
        let h = 1e-4 * unit.sqrt();
        for _ in 0..MAX_ITER {
            let resid = DVector::from_iterator(n, (0..n).map(|r| area(r, &pos) - target[r]));
            if resid.amax() < TOL {
                break;
            }
            // Each column of the Jacobian has at most three nonzeros.
            let mut cols: Vec<[(usize, f64); 3]> = Vec::with_capacity(2 * movable.len());
            for (k, (q, rows)) in movable.iter().enumerate() {
                let p0 = pos[q];
                for e in [frames[k].0, frames[k].1] {
                    let mut col = [(0, 0.0); 3];
                    for (slot, &row) in rows.iter().enumerate() {
                        pos.insert(*q, vec3::normalize(vec3::add(p0, vec3::scale(e, h))));
                        let plus = area(row, &pos);
                        pos.insert(*q, vec3::normalize(vec3::sub(p0, vec3::scale(e, h))));
                        let minus = area(row, &pos);
                        col[slot] = (row, (plus - minus) / (2.0 * h));
                    }
                    pos.insert(*q, p0);
                    cols.push(col);
                }
            }
            let mut jjt = DMatrix::<f64>::zeros(n, n);
            for col in &cols {
                for &(a, x) in col {
                    for &(b, y) in col {
                        jjt[(a, b)] += x * y;
                    }
                }
            }
            for i in 0..n {
                jjt[(i, i)] += 1e-9;
            }
            let Some(chol) = jjt.cholesky() else {
                break;
            };
            let y = chol.solve(&resid);
            for (k, (q, _)) in movable.iter().enumerate() {
                let step = |c: usize| -> f64 { cols[c].iter().map(|&(r, x)| x * y[r]).sum() };
                let (du, dv) = (-step(2 * k), -step(2 * k + 1));
                let p = pos[q];
                let moved = vec3::add(p, vec3::add(vec3::scale(frames[k].0, du), vec3::scale(frames[k].1, dv)));
                pos.insert(*q, vec3::normalize(moved));
            }
        }

        for (q, _) in movable {
            out.insert(q, pos[&q]);
        }
    }
}
