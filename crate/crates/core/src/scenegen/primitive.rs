//! Geometric primitives and uniform surface sampling.
//!
//! Each shape is defined in a local frame centred on its bounding box, with
//! the vertical axis along `z`. Sampling picks a surface patch with
//! probability proportional to its closed-form area, then draws a point
//! uniformly on that patch:
//!
//! | kind     | patches and areas                                          |
//! |----------|------------------------------------------------------------|
//! | cuboid   | 6 faces: `2·xy`, `2·xz`, `2·yz`                             |
//! | cylinder | side `2πrh`, two caps `πr²`                                 |
//! | sphere   | single patch `4πr²` (Archimedes: uniform `z`, uniform angle) |
//! | cone     | side `πr·sqrt(r²+h²)`, base `πr²`                           |
//! | torus    | single patch `4π²Rr`, tube angle by rejection on `R + r·cosθ` |
//! | pyramid  | base `xy`, two faces `½·x·sqrt(h²+(y/2)²)`, two `½·y·sqrt(h²+(x/2)²)` |

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng64;

/// The six primitive families. A cube is a cuboid with equal sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Cuboid,
    Cylinder,
    Sphere,
    Cone,
    Torus,
    Pyramid,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 6] = [
        PrimitiveKind::Cuboid,
        PrimitiveKind::Cylinder,
        PrimitiveKind::Sphere,
        PrimitiveKind::Cone,
        PrimitiveKind::Torus,
        PrimitiveKind::Pyramid,
    ];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Shape and dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Cuboid { size: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
    Sphere { radius: f64 },
    Cone { radius: f64, height: f64 },
    Torus { major_radius: f64, minor_radius: f64 },
    Pyramid { base: [f64; 2], height: f64 },
}

impl Shape {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Shape::Cuboid { .. } => PrimitiveKind::Cuboid,
            Shape::Cylinder { .. } => PrimitiveKind::Cylinder,
            Shape::Sphere { .. } => PrimitiveKind::Sphere,
            Shape::Cone { .. } => PrimitiveKind::Cone,
            Shape::Torus { .. } => PrimitiveKind::Torus,
            Shape::Pyramid { .. } => PrimitiveKind::Pyramid,
        }
    }

    fn dims(&self) -> Vec<f64> {
        match *self {
            Shape::Cuboid { size } => size.to_vec(),
            Shape::Cylinder { radius, height } | Shape::Cone { radius, height } => vec![radius, height],
            Shape::Sphere { radius } => vec![radius],
            Shape::Torus {
                major_radius,
                minor_radius,
            } => vec![major_radius, minor_radius],
            Shape::Pyramid { base, height } => vec![base[0], base[1], height],
        }
    }

    /// Multiplies every dimension by `factor`.
    pub fn scaled(&self, factor: f64) -> Shape {
        match *self {
            Shape::Cuboid { size } => Shape::Cuboid {
                size: size.map(|s| s * factor),
            },
            Shape::Cylinder { radius, height } => Shape::Cylinder {
                radius: radius * factor,
                height: height * factor,
            },
            Shape::Sphere { radius } => Shape::Sphere {
                radius: radius * factor,
            },
            Shape::Cone { radius, height } => Shape::Cone {
                radius: radius * factor,
                height: height * factor,
            },
            Shape::Torus {
                major_radius,
                minor_radius,
            } => Shape::Torus {
                major_radius: major_radius * factor,
                minor_radius: minor_radius * factor,
            },
            Shape::Pyramid { base, height } => Shape::Pyramid {
                base: base.map(|b| b * factor),
                height: height * factor,
            },
        }
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Shape::Cuboid { size: [x, y, z] } => 2.0 * (x * y + x * z + y * z),
            Shape::Cylinder { radius: r, height: h } => TAU * r * h + 2.0 * PI * r * r,
            Shape::Sphere { radius: r } => 4.0 * PI * r * r,
            Shape::Cone { radius: r, height: h } => PI * r * (r * r + h * h).sqrt() + PI * r * r,
            Shape::Torus {
                major_radius: big,
                minor_radius: small,
            } => 4.0 * PI * PI * big * small,
            Shape::Pyramid { base: [x, y], height: h } => {
                x * y + x * (h * h + y * y / 4.0).sqrt() + y * (h * h + x * x / 4.0).sqrt()
            }
        }
    }

    /// One point drawn uniformly (by area) from the surface, in local coordinates.
    pub fn sample_surface(&self, rng: &mut Rng64) -> [f64; 3] {
        match *self {
            Shape::Cuboid { size: [x, y, z] } => {
                let areas = [y * z, y * z, x * z, x * z, x * y, x * y];
                let face = pick_weighted(rng, &areas);
                let (hx, hy, hz) = (x / 2.0, y / 2.0, z / 2.0);
                let u = rng.random_range(-1.0..=1.0);
                let v = rng.random_range(-1.0..=1.0);
                match face {
                    0 => [-hx, u * hy, v * hz],
                    1 => [hx, u * hy, v * hz],
                    2 => [u * hx, -hy, v * hz],
                    3 => [u * hx, hy, v * hz],
                    4 => [u * hx, v * hy, -hz],
                    _ => [u * hx, v * hy, hz],
                }
            }
            Shape::Cylinder { radius: r, height: h } => {
                let areas = [TAU * r * h, PI * r * r, PI * r * r];
                match pick_weighted(rng, &areas) {
                    0 => {
                        let phi = rng.random_range(0.0..TAU);
                        [r * phi.cos(), r * phi.sin(), rng.random_range(-h / 2.0..=h / 2.0)]
                    }
                    cap => {
                        let (px, py) = disk_point(rng, r);
                        [px, py, if cap == 1 { -h / 2.0 } else { h / 2.0 }]
                    }
                }
            }
            Shape::Sphere { radius: r } => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let phi = rng.random_range(0.0..TAU);
                let rho = (1.0 - z * z).max(0.0).sqrt();
                [r * rho * phi.cos(), r * rho * phi.sin(), r * z]
            }
            Shape::Cone { radius: r, height: h } => {
                let slant = (r * r + h * h).sqrt();
                let areas = [PI * r * slant, PI * r * r];
                if pick_weighted(rng, &areas) == 0 {
                    // fraction of the way from apex to base; lateral area grows linearly in it
                    let f = rng.random::<f64>().sqrt();
                    let phi = rng.random_range(0.0..TAU);
                    [f * r * phi.cos(), f * r * phi.sin(), h / 2.0 - f * h]
                } else {
                    let (px, py) = disk_point(rng, r);
                    [px, py, -h / 2.0]
                }
            }
            Shape::Torus {
                major_radius: big,
                minor_radius: small,
            } => {
                let theta = loop {
                    let t = rng.random_range(0.0..TAU);
                    let accept: f64 = rng.random();
                    if accept * (big + small) <= big + small * t.cos() {
                        break t;
                    }
                };
                let phi = rng.random_range(0.0..TAU);
                let rho = big + small * theta.cos();
                [rho * phi.cos(), rho * phi.sin(), small * theta.sin()]
            }
            Shape::Pyramid { base: [x, y], height: h } => {
                let slant_x = (h * h + y * y / 4.0).sqrt();
                let slant_y = (h * h + x * x / 4.0).sqrt();
                let areas = [x * y, 0.5 * x * slant_x, 0.5 * x * slant_x, 0.5 * y * slant_y, 0.5 * y * slant_y];
                let (hx, hy, hz) = (x / 2.0, y / 2.0, h / 2.0);
                let apex = [0.0, 0.0, hz];
                match pick_weighted(rng, &areas) {
                    0 => [
                        rng.random_range(-hx..=hx),
                        rng.random_range(-hy..=hy),
                        -hz,
                    ],
                    1 => triangle_point(rng, [-hx, -hy, -hz], [hx, -hy, -hz], apex),
                    2 => triangle_point(rng, [-hx, hy, -hz], [hx, hy, -hz], apex),
                    3 => triangle_point(rng, [-hx, -hy, -hz], [-hx, hy, -hz], apex),
                    _ => triangle_point(rng, [hx, -hy, -hz], [hx, hy, -hz], apex),
                }
            }
        }
    }
}

fn pick_weighted(rng: &mut Rng64, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return i;
        }
        target -= w;
    }
    weights.len() - 1
}

fn disk_point(rng: &mut Rng64, r: f64) -> (f64, f64) {
    let rho = r * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..TAU);
    (rho * phi.cos(), rho * phi.sin())
}

fn triangle_point(rng: &mut Rng64, a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [f64; 3] {
    let s = rng.random::<f64>().sqrt();
    let t: f64 = rng.random();
    let (wa, wb, wc) = (1.0 - s, s * (1.0 - t), s * t);
    [0, 1, 2].map(|i| wa * a[i] + wb * b[i] + wc * c[i])
}

/// A posed primitive with a point budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    #[serde(flatten)]
    pub shape: Shape,
    /// Position of the shape's centre, meters.
    #[serde(default)]
    pub translation: [f64; 3],
    /// Rotation about the vertical axis, radians.
    #[serde(default)]
    pub yaw: f64,
    pub point_budget: usize,
}

impl PrimitiveSpec {
    pub fn new(shape: Shape, translation: [f64; 3], yaw: f64, point_budget: usize) -> Self {
        Self {
            shape,
            translation,
            yaw,
            point_budget,
        }
    }

    pub fn kind(&self) -> PrimitiveKind {
        self.shape.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.shape.dims().iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::Config(format!(
                "{:?} dimension must be finite and > 0, got {d}",
                self.kind()
            )));
        }
        if self.point_budget == 0 {
            return Err(Error::Config("primitive point budget must be > 0".into()));
        }
        if !(self.translation.iter().all(|t| t.is_finite()) && self.yaw.is_finite()) {
            return Err(Error::Config("primitive pose must be finite".into()));
        }
        Ok(())
    }
}

/// Rotates `p` by `yaw` about the vertical axis, then translates.
pub fn pose_point(p: [f64; 3], yaw: f64, translation: [f64; 3]) -> [f64; 3] {
    let (s, c) = yaw.sin_cos();
    [
        c * p[0] - s * p[1] + translation[0],
        s * p[0] + c * p[1] + translation[1],
        p[2] + translation[2],
    ]
}

/// Samples `spec.point_budget` surface points and poses them.
pub fn sample_primitive(spec: &PrimitiveSpec, rng: &mut Rng64) -> Result<Vec<[f64; 3]>> {
    spec.validate()?;
    Ok((0..spec.point_budget)
        .map(|_| pose_point(spec.shape.sample_surface(rng), spec.yaw, spec.translation))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;

    fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    #[test]
    fn sphere_points_lie_on_surface() {
        let center = [1.0, -2.0, 0.5];
        let spec = PrimitiveSpec::new(Shape::Sphere { radius: 1.0 }, center, 0.3, 10_000);
        let pts = sample_primitive(&spec, &mut seeded_rng(3)).unwrap();
        assert_eq!(pts.len(), 10_000);
        for p in pts {
            assert!((dist(p, center) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn torus_points_lie_on_tube() {
        let spec = PrimitiveSpec::new(
            Shape::Torus {
                major_radius: 1.0,
                minor_radius: 0.25,
            },
            [0.0; 3],
            0.0,
            5_000,
        );
        for p in sample_primitive(&spec, &mut seeded_rng(4)).unwrap() {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let d = ((rho - 1.0).powi(2) + p[2] * p[2]).sqrt();
            assert!((d - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn cuboid_face_counts_follow_areas() {
        let (x, y, z) = (2.0, 1.0, 0.5);
        let n = 20_000usize;
        let spec = PrimitiveSpec::new(Shape::Cuboid { size: [x, y, z] }, [0.0; 3], 0.0, n);
        let pts = sample_primitive(&spec, &mut seeded_rng(5)).unwrap();
        // counts per axis pair: faces normal to x, y, z
        let mut counts = [0usize; 3];
        for p in &pts {
            let on = [
                (p[0].abs() - x / 2.0).abs() < 1e-12,
                (p[1].abs() - y / 2.0).abs() < 1e-12,
                (p[2].abs() - z / 2.0).abs() < 1e-12,
            ];
            assert!(on.iter().any(|&b| b), "point off every face: {p:?}");
            let axis = on.iter().position(|&b| b).unwrap();
            counts[axis] += 1;
        }
        let areas = [2.0 * y * z, 2.0 * x * z, 2.0 * x * y];
        let total: f64 = areas.iter().sum();
        for (c, a) in counts.iter().zip(areas) {
            let p = a / total;
            let mean = n as f64 * p;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - mean).abs() < 3.0 * sigma, "{c} vs {mean} ± {sigma}");
        }
    }

    #[test]
    fn cylinder_and_cone_stay_within_bounds() {
        let mut rng = seeded_rng(6);
        let cyl = Shape::Cylinder { radius: 0.5, height: 2.0 };
        let cone = Shape::Cone { radius: 0.5, height: 1.0 };
        for _ in 0..2000 {
            let p = cyl.sample_surface(&mut rng);
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(rho <= 0.5 + 1e-12 && p[2].abs() <= 1.0 + 1e-12);
            assert!((rho - 0.5).abs() < 1e-12 || (p[2].abs() - 1.0).abs() < 1e-12);

            let q = cone.sample_surface(&mut rng);
            let rho = (q[0] * q[0] + q[1] * q[1]).sqrt();
            // side: rho = r * (h/2 - z) / h ; base: z = -h/2
            let side = (rho - 0.5 * (0.5 - q[2])).abs() < 1e-12;
            let base = (q[2] + 0.5).abs() < 1e-12 && rho <= 0.5 + 1e-12;
            assert!(side || base, "{q:?}");
        }
    }

    #[test]
    fn pyramid_points_on_faces() {
        let shape = Shape::Pyramid { base: [1.0, 2.0], height: 1.5 };
        let mut rng = seeded_rng(8);
        for _ in 0..2000 {
            let p = shape.sample_surface(&mut rng);
            assert!(p[2] >= -0.75 - 1e-12 && p[2] <= 0.75 + 1e-12);
            // inside the pyramid's footprint at that height
            let f = (0.75 - p[2]) / 1.5;
            assert!(p[0].abs() <= 0.5 * f + 1e-12 && p[1].abs() <= 1.0 * f + 1e-12);
        }
    }

    #[test]
    fn invalid_dimensions_rejected() {
        let spec = PrimitiveSpec::new(Shape::Cylinder { radius: 0.0, height: 1.0 }, [0.0; 3], 0.0, 10);
        assert!(sample_primitive(&spec, &mut seeded_rng(0)).is_err());
        let spec = PrimitiveSpec::new(Shape::Sphere { radius: 1.0 }, [0.0; 3], 0.0, 0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn surface_areas_match_closed_forms() {
        let cube = Shape::Cuboid { size: [1.0, 1.0, 1.0] };
        assert!((cube.surface_area() - 6.0).abs() < 1e-12);
        let s = Shape::Sphere { radius: 2.0 };
        assert!((s.surface_area() - 16.0 * PI).abs() < 1e-12);
    }
}
