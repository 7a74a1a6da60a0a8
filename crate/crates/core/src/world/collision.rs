use serde::{Deserialize, Serialize};

use super::{DroneState, RingState};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub collided: bool,
    pub time: f64,
    /// Distance from the drone's centre to the torus surface, m.
    pub closest_distance: f64,
}

/// Distance from `p` to the surface of a torus with centre `center`, unit
/// symmetry axis `axis`, major radius `major` and tube radius `minor`.
/// Negative inside the tube.
pub fn torus_surface_distance(p: &Vec3, center: &Vec3, axis: &Vec3, major: f64, minor: f64) -> f64 {
    let q = p - center;
    let h = q.dot(axis);
    let radial = (q - axis * h).norm();
    ((radial - major).powi(2) + h * h).sqrt() - minor
}

/// Collided iff the drone's bounding sphere touches the ring's torus.
pub fn check_collision(drone: &DroneState, ring: &RingState, drone_radius: f64, time: f64) -> CollisionReport {
    let d = torus_surface_distance(
        &drone.position,
        &ring.center(),
        &ring.axis(),
        ring.ring_radius,
        ring.tube_radius,
    );
    CollisionReport {
        collided: d <= drone_radius,
        time,
        closest_distance: d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ring::Cable;

    fn ring() -> RingState {
        RingState {
            cable: Cable { y: 2.0, z: 1.8 },
            pivot_position: 2.5,
            drive_velocity: 0.0,
            prev_drive_velocity: 0.0,
            pendulum_angle: 0.0,
            pendulum_rate: 0.0,
            suspension_length: 0.5,
            ring_radius: 0.35,
            tube_radius: 0.02,
            damping: 0.1,
        }
    }

    #[test]
    fn centre_of_ring_is_clear() {
        let r = ring();
        let d = DroneState::at_rest(r.center());
        let rep = check_collision(&d, &r, 0.15, 0.0);
        assert!(!rep.collided);
        assert!((rep.closest_distance - 0.33).abs() < 1e-12);
    }

    #[test]
    fn on_tube_axis_collides() {
        let r = ring();
        let d = DroneState::at_rest(r.center() + Vec3::new(0.35, 0.0, 0.0));
        let rep = check_collision(&d, &r, 0.15, 0.0);
        assert!(rep.collided);
        assert!((rep.closest_distance + 0.02).abs() < 1e-12);
    }

    #[test]
    fn far_from_plane_is_clear() {
        let r = ring();
        let d = DroneState::at_rest(r.center() + Vec3::new(0.35, 2.0, 0.0));
        assert!(!check_collision(&d, &r, 0.15, 0.0).collided);
    }
}
