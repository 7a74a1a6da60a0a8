use serde::{Deserialize, Serialize};

/// World-frame vector in metres (or m/s, m/s² where noted). z is up.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Direction the ring travels along its cable.
pub fn cable_axis() -> Vec3 {
    Vec3::x()
}

/// Direction the drone approaches the ring plane; also the ring's symmetry axis.
pub fn approach_axis() -> Vec3 {
    Vec3::y()
}

/// "Left" as seen by a drone flying along [`approach_axis`] with z up.
pub fn left_axis() -> Vec3 {
    Vec3::z().cross(&approach_axis())
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// An oriented plane: all points `p` with `(p - point) · normal = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub point: Vec3,
    /// Unit normal.
    pub normal: Vec3,
}

impl Plane {
    pub fn new(point: Vec3, normal: Vec3) -> Self {
        Self {
            point,
            normal: normal.normalize(),
        }
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.point).dot(&self.normal)
    }

    /// Intersection of the ray `origin + s * dir`, `s > 0`, with the plane.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3) -> Option<Vec3> {
        let denom = dir.dot(&self.normal);
        if denom.abs() < 1e-12 {
            return None;
        }
        let s = (self.point - origin).dot(&self.normal) / denom;
        (s > 0.0).then(|| origin + dir * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_is_minus_x() {
        assert_eq!(left_axis(), -Vec3::x());
    }

    #[test]
    fn ray_hits_plane() {
        let plane = Plane::new(Vec3::new(0.0, 2.0, 0.0), Vec3::y());
        let hit = plane
            .intersect_ray(&Vec3::new(1.0, 0.0, 1.0), &Vec3::new(0.0, 1.0, 0.5))
            .unwrap();
        assert!((hit - Vec3::new(1.0, 2.0, 2.0)).norm() < 1e-12);
        assert!(plane
            .intersect_ray(&Vec3::new(1.0, 0.0, 1.0), &Vec3::new(0.0, -1.0, 0.0))
            .is_none());
    }
}
