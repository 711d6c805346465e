//! Snyder equal-area projection of one icosahedron face onto a planar
//! equilateral triangle.
//!
//! Planar coordinates are face-local: origin at the face center, the image of
//! local vertex 0 on the positive x axis and vertex 1 at 120°. Everything works
//! on the unit sphere; the plane triangle has the same area as the spherical
//! face (π/5).

use std::f64::consts::{FRAC_PI_3, PI};

use super::icosahedron::Face;
use super::vec3::{self, Vec3};

const SECTOR: f64 = 2.0 * FRAC_PI_3;
/// Angle at a face vertex between an edge and the arc to the face center.
const G: f64 = PI / 5.0;
/// cot 30°.
const COT_THETA: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Snyder {
    tan_g: f64,
    cos_g: f64,
    /// Scaled sphere radius R'.
    r_prime: f64,
    /// Planar distance from face center to a vertex.
    pub vertex_radius: f64,
}

impl Snyder {
    pub fn new() -> Self {
        // cos g = cot(36°) · cot(60°) for the icosahedron.
        let cos_g = (1.0 / G.tan()) / 3f64.sqrt();
        let g = cos_g.acos();
        let tan_g = g.tan();
        // Planar triangle area (3√3/4)·d² equals the face area π/5.
        let vertex_radius = (4.0 * PI / (15.0 * 3f64.sqrt())).sqrt();
        Self {
            tan_g,
            cos_g,
            r_prime: vertex_radius / tan_g,
            vertex_radius,
        }
    }

    #[cfg(test)]
    pub fn vertex_arc(&self) -> f64 {
        self.cos_g.acos()
    }

    /// Project a unit vector lying in (or very near) `face` to planar coordinates.
    pub fn forward(&self, face: &Face, p: Vec3) -> [f64; 2] {
        let z = vec3::angle(face.center, p);
        if z < 1e-15 {
            return [0.0, 0.0];
        }
        let az = vec3::dot(p, face.e2)
            .atan2(vec3::dot(p, face.e1))
            .rem_euclid(2.0 * PI);
        let sector = ((az / SECTOR).floor() as i32).clamp(0, 2);
        let az_r = (az - sector as f64 * SECTOR).clamp(0.0, SECTOR);

        let (sin_az, cos_az) = az_r.sin_cos();
        let q = self.tan_g.atan2(cos_az + sin_az * COT_THETA);
        let h = (sin_az * G.sin() * self.cos_g - cos_az * G.cos())
            .clamp(-1.0, 1.0)
            .acos();
        let area = az_r + G + h - PI;
        let rp2 = self.r_prime * self.r_prime;
        let az_p = (2.0 * area).atan2(rp2 * self.tan_g * self.tan_g - 2.0 * area * COT_THETA);
        let d_p = self.r_prime * self.tan_g / (az_p.cos() + az_p.sin() * COT_THETA);
        let f = d_p / (2.0 * self.r_prime * (q / 2.0).sin());
        let rho = 2.0 * self.r_prime * f * (z / 2.0).sin();
        let theta = az_p + sector as f64 * SECTOR;
        [rho * theta.cos(), rho * theta.sin()]
    }

    /// Inverse of [`Snyder::forward`].
    pub fn inverse(&self, face: &Face, xy: [f64; 2]) -> Vec3 {
        let rho = xy[0].hypot(xy[1]);
        if rho < 1e-15 {
            return face.center;
        }
        let az_p_full = xy[1].atan2(xy[0]).rem_euclid(2.0 * PI);
        let sector = ((az_p_full / SECTOR).floor() as i32).clamp(0, 2);
        let az_p = (az_p_full - sector as f64 * SECTOR).clamp(0.0, SECTOR);

        let (sin_azp, cos_azp) = az_p.sin_cos();
        let rp2 = self.r_prime * self.r_prime;
        let area =
            rp2 * self.tan_g * self.tan_g * sin_azp / (2.0 * (cos_azp + sin_azp * COT_THETA));

        // Azimuth whose spherical sub-triangle has the same area.
        let c = PI + area - G;
        let num = c.cos() + G.cos();
        let den = G.sin() * self.cos_g - c.sin();
        let base = num.atan2(den);
        let az = [base, base + PI, base - PI]
            .into_iter()
            .min_by(|a, b| {
                distance_to_range(*a, SECTOR)
                    .total_cmp(&distance_to_range(*b, SECTOR))
            })
            .unwrap()
            .clamp(0.0, SECTOR);

        let (sin_az, cos_az) = az.sin_cos();
        let q = self.tan_g.atan2(cos_az + sin_az * COT_THETA);
        let d_p = self.r_prime * self.tan_g / (cos_azp + sin_azp * COT_THETA);
        let f = d_p / (2.0 * self.r_prime * (q / 2.0).sin());
        let z = 2.0 * (rho / (2.0 * self.r_prime * f)).clamp(-1.0, 1.0).asin();

        let theta = az + sector as f64 * SECTOR;
        let dir = vec3::add(
            vec3::scale(face.e1, theta.cos()),
            vec3::scale(face.e2, theta.sin()),
        );
        vec3::normalize(vec3::add(
            vec3::scale(face.center, z.cos()),
            vec3::scale(dir, z.sin()),
        ))
    }

    /// Planar position of local vertex `j`.
    pub fn vertex_xy(&self, j: usize) -> [f64; 2] {
        let t = j as f64 * SECTOR;
        [self.vertex_radius * t.cos(), self.vertex_radius * t.sin()]
    }

    /// Barycentric coordinates (summing to 1) of a planar point.
    pub fn barycentric(&self, xy: [f64; 2]) -> [f64; 3] {
        let d2 = self.vertex_radius * self.vertex_radius;
        let mut out = [0.0; 3];
        for (j, o) in out.iter_mut().enumerate() {
            let v = self.vertex_xy(j);
            *o = 1.0 / 3.0 + 2.0 / 3.0 * (xy[0] * v[0] + xy[1] * v[1]) / d2;
        }
        out
    }

    /// Planar point for barycentric coordinates summing to 1.
    pub fn barycentric_to_plane(&self, w: [f64; 3]) -> [f64; 2] {
        let mut xy = [0.0, 0.0];
        for (j, wj) in w.iter().enumerate() {
            let v = self.vertex_xy(j);
            xy[0] += wj * v[0];
            xy[1] += wj * v[1];
        }
        xy
    }
}

fn distance_to_range(x: f64, hi: f64) -> f64 {
    if x < 0.0 {
        -x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}
