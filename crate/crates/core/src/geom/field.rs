//! Signed distance fields. Sign convention everywhere: positive inside,
//! negative outside, zero on the surface.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Step used for central-difference gradients.
pub const GRADIENT_STEP: f64 = 1e-3;

/// Read-only signed distance sampler. Implementations must be safe to call
/// concurrently from parallel grid evaluation.
pub trait ScalarField: Send + Sync {
    fn sample(&self, p: &Point3<f64>) -> f64;

    /// Central differences unless the field knows its gradient analytically.
    fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        let h = GRADIENT_STEP;
        let d = |axis: usize| {
            let mut e = Vector3::zeros();
            e[axis] = h;
            (self.sample(&(p + e)) - self.sample(&(p - e))) / (2.0 * h)
        };
        Vector3::new(d(0), d(1), d(2))
    }

    /// Lattice spacing for grid-backed fields; `None` for analytic ones.
    fn voxel_size(&self) -> Option<f64> {
        None
    }

    /// Samples `origin + i·step·x̂` into `out[i]`. Where the true value
    /// exceeds `band[i]` in magnitude the result may be any value of the
    /// same sign beyond `band[i]`.
    fn sample_row(&self, origin: &Point3<f64>, step: f64, band: &[f64], out: &mut [f64]) {
        debug_assert_eq!(band.len(), out.len());
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.sample(&(origin + Vector3::new(i as f64 * step, 0.0, 0.0)));
        }
    }
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        (**self).sample(p)
    }
    fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        (**self).gradient(p)
    }
    fn voxel_size(&self) -> Option<f64> {
        (**self).voxel_size()
    }
    fn sample_row(&self, origin: &Point3<f64>, step: f64, band: &[f64], out: &mut [f64]) {
        (**self).sample_row(origin, step, band, out)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Box<F> {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        (**self).sample(p)
    }
    fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        (**self).gradient(p)
    }
    fn voxel_size(&self) -> Option<f64> {
        (**self).voxel_size()
    }
}

impl<F: ScalarField + ?Sized> ScalarField for std::sync::Arc<F> {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        (**self).sample(p)
    }
    fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        (**self).gradient(p)
    }
    fn voxel_size(&self) -> Option<f64> {
        (**self).voxel_size()
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        Self { min, max }
    }

    /// The normalized model box [-1, 1]³.
    pub fn unit() -> Self {
        Self::new(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0))
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }
}

/// Sphere of radius `radius` around `center`.
#[derive(Debug, Clone, Copy)]
pub struct SphereField {
    pub center: Point3<f64>,
    pub radius: f64,
}

impl SphereField {
    pub fn new(center: Point3<f64>, radius: f64) -> Self {
        Self { center, radius }
    }
}

impl ScalarField for SphereField {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        self.radius - (p - self.center).norm()
    }
    fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        let d = p - self.center;
        let n = d.norm();
        if n > 0.0 {
            -d / n
        } else {
            Vector3::zeros()
        }
    }
}

/// Axis-aligned ellipsoid. Distance is the first-order estimate
/// `k0 (k0 - 1) / k1` (exact on the axes, sign-correct everywhere).
#[derive(Debug, Clone, Copy)]
pub struct EllipsoidField {
    pub center: Point3<f64>,
    pub radii: Vector3<f64>,
}

impl EllipsoidField {
    pub fn new(center: Point3<f64>, radii: Vector3<f64>) -> Self {
        Self { center, radii }
    }
}

impl ScalarField for EllipsoidField {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        let d = p - self.center;
        let k0 = d.component_div(&self.radii).norm();
        let k1 = d.component_div(&self.radii.component_mul(&self.radii)).norm();
        if k1 == 0.0 {
            return self.radii.min();
        }
        -k0 * (k0 - 1.0) / k1
    }
}

/// Capsule around segment `a`–`b`.
#[derive(Debug, Clone, Copy)]
pub struct CapsuleField {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
    pub radius: f64,
}

impl ScalarField for CapsuleField {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        let ab = self.b - self.a;
        let t = ((p - self.a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        self.radius - (p - (self.a + ab * t)).norm()
    }
}

/// Axis-aligned box SDF.
#[derive(Debug, Clone, Copy)]
pub struct BoxField {
    pub center: Point3<f64>,
    pub half: Vector3<f64>,
}

impl ScalarField for BoxField {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        let q = (p - self.center).abs() - self.half;
        let outside = q.sup(&Vector3::zeros()).norm();
        let inside = q.max().min(0.0);
        -(outside + inside)
    }
}

/// The same value everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub f64);

impl ScalarField for ConstantField {
    fn sample(&self, _: &Point3<f64>) -> f64 {
        self.0
    }
    fn gradient(&self, _: &Point3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }
}

/// Uniform scalar lattice of `(resolution + 1)³` samples covering
/// `resolution³` cells, sampled by trilinear interpolation. Queries outside
/// the lattice are clamped to its boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub resolution: usize,
    pub origin: Point3<f64>,
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl GridField {
    /// Lattice over `bounds` with a cubic cell; `bounds` must be a cube.
    pub fn lattice(resolution: usize, bounds: Aabb) -> Self {
        let spacing = bounds.extent().max() / resolution as f64;
        let n = resolution + 1;
        Self {
            resolution,
            origin: bounds.min,
            spacing,
            values: vec![0.0; n * n * n],
        }
    }

    /// Samples `field` at every lattice point.
    pub fn from_field<F: ScalarField + ?Sized>(field: &F, resolution: usize, bounds: Aabb) -> Self {
        use rayon::prelude::*;
        let mut g = Self::lattice(resolution, bounds);
        let n = g.points_per_axis();
        let (origin, h) = (g.origin, g.spacing);
        g.values.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
            for j in 0..n {
                for i in 0..n {
                    let p = origin + Vector3::new(i as f64, j as f64, k as f64) * h;
                    slab[j * n + i] = field.sample(&p);
                }
            }
        });
        g
    }

    pub fn points_per_axis(&self) -> usize {
        self.resolution + 1
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.points_per_axis();
        (k * n + j) * n + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        self.origin + Vector3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(
            self.origin,
            self.origin + Vector3::repeat(self.spacing * self.resolution as f64),
        )
    }

    pub fn same_lattice(&self, other: &GridField) -> bool {
        self.resolution == other.resolution && self.origin == other.origin && self.spacing == other.spacing
    }
}

/// Cell coordinates and fractional offsets for trilinear lookup.
#[inline]
pub(crate) fn cell_coords(
    origin: &Point3<f64>,
    spacing: f64,
    resolution: usize,
    p: &Point3<f64>,
) -> ([usize; 3], [f64; 3]) {
    let mut cell = [0usize; 3];
    let mut frac = [0f64; 3];
    for a in 0..3 {
        let u = ((p[a] - origin[a]) / spacing).clamp(0.0, resolution as f64);
        let c = (u.floor() as usize).min(resolution - 1);
        cell[a] = c;
        frac[a] = u - c as f64;
    }
    (cell, frac)
}

#[inline]
pub(crate) fn trilerp(c: [f64; 8], f: [f64; 3]) -> f64 {
    let [fx, fy, fz] = f;
    let x00 = c[0] + (c[1] - c[0]) * fx;
    let x10 = c[2] + (c[3] - c[2]) * fx;
    let x01 = c[4] + (c[5] - c[4]) * fx;
    let x11 = c[6] + (c[7] - c[6]) * fx;
    let y0 = x00 + (x10 - x00) * fy;
    let y1 = x01 + (x11 - x01) * fy;
    y0 + (y1 - y0) * fz
}

impl ScalarField for GridField {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        let ([i, j, k], f) = cell_coords(&self.origin, self.spacing, self.resolution, p);
        let c = [
            self.at(i, j, k),
            self.at(i + 1, j, k),
            self.at(i, j + 1, k),
            self.at(i + 1, j + 1, k),
            self.at(i, j, k + 1),
            self.at(i + 1, j, k + 1),
            self.at(i, j + 1, k + 1),
            self.at(i + 1, j + 1, k + 1),
        ];
        trilerp(c, f)
    }

    fn voxel_size(&self) -> Option<f64> {
        Some(self.spacing)
    }
}

/// Positive-inside union: per-lattice maximum.
pub fn field_union(a: &GridField, b: &GridField) -> Result<GridField> {
    if !a.same_lattice(b) {
        return Err(Error::LatticeMismatch(format!(
            "res {} origin {:?} spacing {} vs res {} origin {:?} spacing {}",
            a.resolution, a.origin, a.spacing, b.resolution, b.origin, b.spacing
        )));
    }
    let values = a.values.iter().zip(&b.values).map(|(x, y)| x.max(*y)).collect();
    Ok(GridField { values, ..a.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sphere_sign_and_gradient() {
        let s = SphereField::new(Point3::origin(), 0.5);
        assert!(s.sample(&Point3::origin()) > 0.0);
        assert!(s.sample(&Point3::new(0.9, 0.0, 0.0)) < 0.0);
        let g = s.gradient(&Point3::new(0.3, 0.0, 0.0));
        assert!((g - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn numeric_gradient_is_unit_for_distance_fields() {
        let fields: Vec<Box<dyn ScalarField>> = vec![
            Box::new(CapsuleField {
                a: Point3::new(-0.3, 0.0, 0.0),
                b: Point3::new(0.3, 0.1, 0.0),
                radius: 0.2,
            }),
            Box::new(BoxField {
                center: Point3::origin(),
                half: Vector3::new(0.3, 0.4, 0.5),
            }),
            Box::new(EllipsoidField::new(Point3::origin(), Vector3::new(0.5, 0.5, 0.5))),
        ];
        let probes = [
            Point3::new(0.61, 0.05, 0.02),
            Point3::new(-0.1, 0.7, 0.1),
            Point3::new(0.2, -0.2, 0.75),
        ];
        for f in &fields {
            for p in &probes {
                let g = f.gradient(p).norm();
                assert!((g - 1.0).abs() < 0.1, "gradient norm {g}");
            }
        }
    }

    #[test]
    fn grid_reproduces_lattice_values() {
        let s = SphereField::new(Point3::new(0.1, 0.0, -0.1), 0.5);
        let g = GridField::from_field(&s, 16, Aabb::unit());
        for (i, j, k) in [(0, 0, 0), (3, 7, 9), (16, 16, 16), (8, 8, 8)] {
            assert_eq!(g.sample(&g.point(i, j, k)), g.at(i, j, k));
        }
    }

    #[test]
    fn union_rejects_mismatched_lattices() {
        let a = GridField::lattice(8, Aabb::unit());
        let b = GridField::lattice(16, Aabb::unit());
        assert!(matches!(field_union(&a, &b), Err(Error::LatticeMismatch(_))));
    }

    #[test]
    fn union_is_idempotent() {
        let s = SphereField::new(Point3::origin(), 0.4);
        let g = GridField::from_field(&s, 12, Aabb::unit());
        assert_eq!(field_union(&g, &g).unwrap(), g);
    }

    proptest! {
        #[test]
        fn grid_sampling_is_continuous(x in -0.99f64..0.99, y in -0.99f64..0.99, z in -0.99f64..0.99) {
            let s = SphereField::new(Point3::origin(), 0.5);
            let g = GridField::from_field(&s, 10, Aabb::unit());
            let p = Point3::new(x, y, z);
            let eps = 1e-9;
            let a = g.sample(&p);
            let b = g.sample(&(p + Vector3::new(eps, eps, eps)));
            // Lipschitz bound of the lattice values is ~1, so tiny moves give tiny changes.
            prop_assert!((a - b).abs() < 1e-7);
        }

        #[test]
        fn union_commutes_and_associates(c1 in -0.5f64..0.5, c2 in -0.5f64..0.5, c3 in -0.5f64..0.5) {
            let mk = |c: f64, r: f64| GridField::from_field(&SphereField::new(Point3::new(c, -c * 0.5, 0.0), r), 8, Aabb::unit());
            let (a, b, c) = (mk(c1, 0.3), mk(c2, 0.4), mk(c3, 0.2));
            prop_assert_eq!(field_union(&a, &b).unwrap(), field_union(&b, &a).unwrap());
            let l = field_union(&field_union(&a, &b).unwrap(), &c).unwrap();
            let r = field_union(&a, &field_union(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(l, r);
        }
    }
}
