use serde::{Deserialize, Serialize};

use super::RingState;
use crate::geometry::Plane;
use crate::Vec3;

/// Pinhole camera. Image coordinates are continuous: pixel `(i, j)` covers
/// `[i, i+1) x [j, j+1)` and has its centre at `(i + 0.5, j + 0.5)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub position: Vec3,
    pub right: Vec3,
    pub down: Vec3,
    pub forward: Vec3,
    pub focal_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    /// Camera at `position` looking at `target` with world z as up; the
    /// principal point is the image centre.
    pub fn look_at(position: Vec3, target: Vec3, focal_px: f64, width: usize, height: usize) -> Self {
        Self::look_at_rolled(position, target, 0.0, focal_px, width, height)
    }

    /// As [`look_at`](Self::look_at), with the image rotated by `roll` rad
    /// about the optical axis.
    pub fn look_at_rolled(position: Vec3, target: Vec3, roll: f64, focal_px: f64, width: usize, height: usize) -> Self {
        let forward = (target - position).normalize();
        let level_right = forward.cross(&Vec3::z()).normalize();
        let level_down = forward.cross(&level_right);
        let (s, c) = roll.sin_cos();
        let right = level_right * c + level_down * s;
        let down = forward.cross(&right);
        Self {
            position,
            right,
            down,
            forward,
            focal_px,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.width > 0 && self.height > 0 && self.focal_px > 0.0 && self.focal_px.is_finite()
    }

    /// Depth of `p` along the optical axis.
    pub fn depth(&self, p: &Vec3) -> f64 {
        (p - self.position).dot(&self.forward)
    }

    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        let q = p - self.position;
        let z = q.dot(&self.forward);
        if z <= 1e-6 {
            return None;
        }
        Some((
            self.cx + self.focal_px * q.dot(&self.right) / z,
            self.cy + self.focal_px * q.dot(&self.down) / z,
        ))
    }

    /// Un-normalised ray direction through image point `(u, v)`, scaled so
    /// that its component along the optical axis is 1.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        self.forward + self.right * ((u - self.cx) / self.focal_px) + self.down * ((v - self.cy) / self.focal_px)
    }

    pub fn back_project(&self, u: f64, v: f64, plane: &Plane) -> Option<Vec3> {
        plane.intersect_ray(&self.position, &self.ray(u, v))
    }
}

/// Row-major grayscale image.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl IntensityImage {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Intensity-weighted centroid of pixels brighter than `threshold`.
    pub fn bright_centroid(&self, threshold: f64) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for y in 0..self.height {
            for x in 0..self.width {
                let w = self.get(x, y) - threshold;
                if w > 0.0 {
                    sx += w * (x as f64 + 0.5);
                    sy += w * (y as f64 + 0.5);
                    sw += w;
                }
            }
        }
        (sw > 0.0).then(|| (sx / sw, sy / sw))
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    pub fn area(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.x1 - self.x0) * (self.y1 - self.y0)
        }
    }

    pub fn union(a: Option<Rect>, b: Option<Rect>) -> Option<Rect> {
        match (a, b) {
            (Some(a), Some(b)) => Some(Rect {
                x0: a.x0.min(b.x0),
                y0: a.y0.min(b.y0),
                x1: a.x1.max(b.x1),
                y1: a.y1.max(b.y1),
            }),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSettings {
    pub ring_intensity: f64,
    pub background: f64,
    /// Adds a fixed sinusoidal texture to the background.
    pub textured_background: bool,
    /// Standard deviation of the optical blur across the ring edges, px.
    pub edge_blur_px: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            ring_intensity: 1.0,
            background: 0.05,
            textured_background: false,
            edge_blur_px: 0.0,
        }
    }
}

impl RenderSettings {
    fn background_at(&self, x: usize, y: usize) -> f64 {
        if self.textured_background {
            self.background * (1.0 + 0.4 * (0.21 * x as f64).sin() * (0.17 * y as f64).sin())
        } else {
            self.background
        }
    }
}

/// Fraction of a pixel footprint of width `footprint` centred at radial
/// distance `radial` that overlaps the annulus `[inner, outer]`.
fn annulus_coverage(radial: f64, footprint: f64, inner: f64, outer: f64) -> f64 {
    let lo = (radial - 0.5 * footprint).max(inner);
    let hi = (radial + 0.5 * footprint).min(outer);
    ((hi - lo) / footprint).clamp(0.0, 1.0)
}

/// Annulus profile seen through a blur of standard deviation `blur` (same
/// units as `radial`), with logistic edges of matching variance.
fn blurred_coverage(radial: f64, blur: f64, inner: f64, outer: f64) -> f64 {
    // logistic scale with the same standard deviation as the blur
    let s = blur * 3f64.sqrt() / std::f64::consts::PI;
    let edge = |z: f64| 1.0 / (1.0 + (-z / s).exp());
    (edge(radial - inner) - edge(radial - outer)).clamp(0.0, 1.0)
}

fn render_pixel(camera: &CameraModel, ring: &RingState, settings: &RenderSettings, x: usize, y: usize) -> f64 {
    let bg = settings.background_at(x, y);
    let center = ring.center();
    let plane = Plane::new(center, ring.axis());
    let dir = camera.ray(x as f64 + 0.5, y as f64 + 0.5);
    let Some(hit) = plane.intersect_ray(&camera.position, &dir) else {
        return bg;
    };
    let depth = camera.depth(&hit);
    let footprint = depth / camera.focal_px;
    let radial = (hit - center).norm();
    let (inner, outer) = (ring.ring_radius - ring.tube_radius, ring.ring_radius + ring.tube_radius);
    let cov = if settings.edge_blur_px > 0.0 {
        let blur = (settings.edge_blur_px.powi(2) + 1.0 / 12.0).sqrt() * footprint;
        blurred_coverage(radial, blur, inner, outer)
    } else {
        annulus_coverage(radial, footprint, inner, outer)
    };
    bg + (settings.ring_intensity - bg) * cov
}

/// Pixel rectangle guaranteed to contain the ring's image, or `None` when
/// the ring is out of view.
pub fn ring_pixel_bounds(camera: &CameraModel, ring: &RingState, settings: &RenderSettings) -> Option<Rect> {
    let c = ring.center();
    let axis = ring.axis();
    let a = axis.cross(&Vec3::z()).normalize();
    let b = axis.cross(&a);
    let ext = ring.ring_radius + ring.tube_radius;
    let mut min = (f64::MAX, f64::MAX);
    let mut max = (f64::MIN, f64::MIN);
    for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let corner = c + a * (sa * ext) + b * (sb * ext);
        let (u, v) = camera.project(&corner)?;
        min = (min.0.min(u), min.1.min(v));
        max = (max.0.max(u), max.1.max(v));
    }
    let margin = 2.0 + 8.0 * settings.edge_blur_px.max(0.0);
    let x0 = (min.0 - margin).floor().max(0.0);
    let y0 = (min.1 - margin).floor().max(0.0);
    let x1 = (max.0 + margin).ceil().min(camera.width as f64);
    let y1 = (max.1 + margin).ceil().min(camera.height as f64);
    let r = Rect {
        x0: x0 as usize,
        y0: y0 as usize,
        x1: x1.max(0.0) as usize,
        y1: y1.max(0.0) as usize,
    };
    (!r.is_empty()).then_some(r)
}

fn render_rect(image: &mut IntensityImage, camera: &CameraModel, ring: &RingState, settings: &RenderSettings, rect: Rect) {
    for y in rect.y0..rect.y1 {
        for x in rect.x0..rect.x1 {
            let v = render_pixel(camera, ring, settings, x, y);
            image.set(x, y, v);
        }
    }
}

/// Full-frame render of the ring as seen from the tripod camera.
pub fn render_intensity(ring: &RingState, camera: &CameraModel, settings: &RenderSettings) -> IntensityImage {
    let mut image = IntensityImage::filled(camera.width, camera.height, settings.background);
    if settings.textured_background {
        for y in 0..camera.height {
            for x in 0..camera.width {
                image.set(x, y, settings.background_at(x, y));
            }
        }
    }
    if let Some(rect) = ring_pixel_bounds(camera, ring, settings) {
        render_rect(&mut image, camera, ring, settings, rect);
    }
    image
}

/// Incremental renderer: re-renders only the union of the ring's previous and
/// current bounds, which is pixel-identical to a full render.
#[derive(Clone, Debug)]
pub struct SceneRenderer {
    pub camera: CameraModel,
    pub settings: RenderSettings,
    image: IntensityImage,
    last: Option<Rect>,
}

impl SceneRenderer {
    pub fn new(camera: CameraModel, settings: RenderSettings, ring: &RingState) -> Self {
        let image = render_intensity(ring, &camera, &settings);
        Self {
            last: ring_pixel_bounds(&camera, ring, &settings),
            camera,
            settings,
            image,
        }
    }

    pub fn image(&self) -> &IntensityImage {
        &self.image
    }

    /// Renders `ring` and returns the rectangle of pixels that may have changed.
    pub fn update(&mut self, ring: &RingState) -> Option<Rect> {
        let now = ring_pixel_bounds(&self.camera, ring, &self.settings);
        let dirty = Rect::union(self.last, now);
        if let Some(rect) = dirty {
            // pixels that fall outside the ring's current bounds revert to background
            for y in rect.y0..rect.y1 {
                for x in rect.x0..rect.x1 {
                    let inside = now.is_some_and(|n| x >= n.x0 && x < n.x1 && y >= n.y0 && y < n.y1);
                    let v = if inside {
                        render_pixel(&self.camera, ring, &self.settings, x, y)
                    } else {
                        self.settings.background_at(x, y)
                    };
                    self.image.set(x, y, v);
                }
            }
        }
        self.last = now;
        dirty
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ring::Cable;

    fn ring_at(x: f64) -> RingState {
        RingState {
            cable: Cable { y: 2.0, z: 1.8 },
            pivot_position: x,
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

    fn camera() -> CameraModel {
        CameraModel::look_at(Vec3::new(2.5, 3.9, 1.3), Vec3::new(2.5, 2.0, 1.3), 150.0, 346, 260)
    }

    #[test]
    fn basis_is_right_handed_image_frame() {
        let c = camera();
        assert!((c.right - (-Vec3::x())).norm() < 1e-12);
        assert!((c.down - (-Vec3::z())).norm() < 1e-12);
    }

    #[test]
    fn project_and_back_project_roundtrip() {
        let c = camera();
        let p = Vec3::new(1.7, 2.0, 1.05);
        let (u, v) = c.project(&p).unwrap();
        let plane = Plane::new(Vec3::new(0.0, 2.0, 0.0), Vec3::y());
        let q = c.back_project(u, v, &plane).unwrap();
        assert!((p - q).norm() < 1e-12);
    }

    #[test]
    fn ring_out_of_view_renders_background() {
        let c = camera();
        let img = render_intensity(&ring_at(40.0), &c, &RenderSettings::default());
        assert!(img.data.iter().all(|&v| v == 0.05));
    }

    #[test]
    fn centred_ring_projects_to_principal_point() {
        let c = camera();
        let r = ring_at(2.5);
        assert!((r.center() - Vec3::new(2.5, 2.0, 1.3)).norm() < 1e-12);
        let img = render_intensity(&r, &c, &RenderSettings::default());
        let (u, v) = img.bright_centroid(0.05).unwrap();
        assert!((u - c.cx).abs() <= 0.5 && (v - c.cy).abs() <= 0.5, "{u} {v}");
    }

    #[test]
    fn renders_are_deterministic_and_incremental_matches_full() {
        let c = camera();
        let s = RenderSettings {
            textured_background: true,
            ..RenderSettings::default()
        };
        let mut r = ring_at(2.0);
        let mut inc = SceneRenderer::new(c, s, &r);
        for k in 0..50 {
            r.pivot_position += 0.013 * k as f64;
            r.pendulum_angle = 0.01 * k as f64;
            inc.update(&r);
        }
        let full = render_intensity(&r, &c, &s);
        assert_eq!(inc.image(), &full);
        assert_eq!(render_intensity(&r, &c, &s), full);
    }
}
