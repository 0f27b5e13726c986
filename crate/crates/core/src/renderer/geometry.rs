use serde::{Deserialize, Serialize};

use crate::raymarch::Ray;
use crate::vec3::Vec3;

type V = Vec3<f64>;

/// Scene surface shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry {
    Sphere {
        center: V,
        radius: f64,
    },
    Box {
        min: V,
        max: V,
    },
    /// Infinite plane through `point`.
    Plane {
        point: V,
        normal: V,
    },
    /// Triangle list; each triangle is three vertices.
    Mesh {
        triangles: Vec<[V; 3]>,
    },
}

/// Nearest hit with `t` in `(t_min, t_max)` and its geometric normal (not
/// yet oriented toward the ray).
pub(crate) fn intersect(
    geometry: &Geometry,
    ray: &Ray<f64>,
    t_min: f64,
    t_max: f64,
) -> Option<(f64, V)> {
    match geometry {
        Geometry::Sphere { center, radius } => {
            let oc = ray.origin - *center;
            let b = ray.dir.dot(oc);
            let c = oc.length_squared() - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            [-b - s, -b + s]
                .into_iter()
                .find(|&t| t > t_min && t < t_max)
                .map(|t| (t, (ray.at(t) - *center) / *radius))
        }
        Geometry::Box { min, max } => {
            let mut best: Option<(f64, V)> = None;
            for a in 0..3 {
                let d = ray.dir[a];
                if d == 0.0 {
                    continue;
                }
                for (face, sign) in [(min[a], -1.0), (max[a], 1.0)] {
                    let t = (face - ray.origin[a]) / d;
                    if !(t > t_min && t < t_max) || best.is_some_and(|(bt, _)| bt <= t) {
                        continue;
                    }
                    let p = ray.at(t);
                    let inside = (0..3)
                        .filter(|&b| b != a)
                        .all(|b| p[b] >= min[b] && p[b] <= max[b]);
                    if inside {
                        let mut n = [0.0; 3];
                        n[a] = sign;
                        best = Some((t, Vec3::from(n)));
                    }
                }
            }
            best
        }
        Geometry::Plane { point, normal } => {
            let n = normal.normalized();
            let denom = ray.dir.dot(n);
            if denom == 0.0 {
                return None;
            }
            let t = (*point - ray.origin).dot(n) / denom;
            (t > t_min && t < t_max).then_some((t, n))
        }
        Geometry::Mesh { triangles } => {
            let mut best: Option<(f64, V)> = None;
            for tri in triangles {
                let limit = best.map_or(t_max, |(t, _)| t);
                if let Some(hit) = intersect_triangle(tri, ray, t_min, limit) {
                    best = Some(hit);
                }
            }
            best
        }
    }
}

fn intersect_triangle(tri: &[V; 3], ray: &Ray<f64>, t_min: f64, t_max: f64) -> Option<(f64, V)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > t_min && t < t_max).then(|| (t, e1.cross(e2).normalized()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ray(o: [f64; 3], d: [f64; 3]) -> Ray<f64> {
        Ray::infinite(Vec3::from(o), Vec3::from(d).normalized())
    }

    #[test]
    fn shapes_hit_where_expected() {
        let r = ray([0.0, 0.0, 5.0], [0.0, 0.0, -1.0]);
        let sphere = Geometry::Sphere {
            center: Vec3::zero(),
            radius: 1.0,
        };
        let (t, n) = intersect(&sphere, &r, 0.0, f64::INFINITY).unwrap();
        assert!((t - 4.0).abs() < 1e-12 && (n.z - 1.0).abs() < 1e-12);
        let b = Geometry::Box {
            min: Vec3::splat(-1.0),
            max: Vec3::splat(1.0),
        };
        let (t, n) = intersect(&b, &r, 0.0, f64::INFINITY).unwrap();
        assert!((t - 4.0).abs() < 1e-12 && n.z == 1.0);
        let plane = Geometry::Plane {
            point: Vec3::zero(),
            normal: Vec3::lit(0.0, 0.0, 2.0),
        };
        let (t, _) = intersect(&plane, &r, 0.0, f64::INFINITY).unwrap();
        assert!((t - 5.0).abs() < 1e-12);
        assert!(intersect(&plane, &r, 0.0, 4.0).is_none());
        let mesh = Geometry::Mesh {
            triangles: vec![[
                Vec3::lit(-1.0, -1.0, 1.0),
                Vec3::lit(1.0, -1.0, 1.0),
                Vec3::lit(0.0, 1.0, 1.0),
            ]],
        };
        let (t, n) = intersect(&mesh, &r, 0.0, f64::INFINITY).unwrap();
        assert!((t - 4.0).abs() < 1e-12 && n.z.abs() == 1.0);
        let miss = ray([3.0, 3.0, 5.0], [0.0, 0.0, -1.0]);
        for g in [sphere, b, mesh] {
            assert!(intersect(&g, &miss, 0.0, f64::INFINITY).is_none());
        }
    }
}
