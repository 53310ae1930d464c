//! Parametric synthetic roofs with exact ground truth, and the sparsity and
//! noise perturbations used for robustness runs.
//!
//! Every archetype is built in a frame where `x` is centred on 0, the
//! footprint starts at `y = 0` and the eaves sit at `z = 0` (a flat roof sits
//! at `z = ridge_height`). Clouds are sampled uniformly over the planar roof
//! faces, area weighted, from a seeded generator.

use std::fmt;
use std::str::FromStr;

use nalgebra::Point3;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::io::{PointCloud, Wireframe};

/// Smallest cloud a roof spec may request.
pub const MIN_POINT_COUNT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Archetype {
    Flat,
    Gable,
    Hip,
    Pyramid,
    LGable,
}

impl Archetype {
    pub const ALL: [Archetype; 5] = [Self::Flat, Self::Gable, Self::Hip, Self::Pyramid, Self::LGable];

    pub fn name(self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::Gable => "gable",
            Self::Hip => "hip",
            Self::Pyramid => "pyramid",
            Self::LGable => "l_gable",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown archetype `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoofSpec {
    pub archetype: Archetype,
    /// Footprint extent along `x`.
    pub width: f64,
    /// Footprint extent along `y` (for `l_gable`, the main wing's depth).
    pub depth: f64,
    pub ridge_height: f64,
    pub point_count: usize,
    pub seed: u64,
}

impl RoofSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidSpec(m));
        if !(self.width > 0.0 && self.width.is_finite()) || !(self.depth > 0.0 && self.depth.is_finite()) {
            return fail(format!("footprint {}x{} must be positive and finite", self.width, self.depth));
        }
        if !(self.ridge_height >= 0.0 && self.ridge_height.is_finite()) {
            return fail(format!("ridge height {} must be non-negative", self.ridge_height));
        }
        if self.point_count < MIN_POINT_COUNT {
            return fail(format!("point count {} is below {MIN_POINT_COUNT}", self.point_count));
        }
        if self.archetype != Archetype::Flat && self.ridge_height == 0.0 {
            return fail(format!("{} needs a positive ridge height", self.archetype));
        }
        if matches!(self.archetype, Archetype::Hip | Archetype::LGable) && self.width <= self.depth {
            return fail(format!(
                "{} needs width > depth, got {}x{}",
                self.archetype, self.width, self.depth
            ));
        }
        Ok(())
    }
}

/// Planar roof faces (convex polygons) plus the analytic wireframe.
struct Roof {
    faces: Vec<Vec<Point3<f64>>>,
    wireframe: Wireframe,
}

fn build(spec: &RoofSpec) -> Roof {
    let (w, d, h) = (spec.width, spec.depth, spec.ridge_height);
    let (x0, x1) = (-w / 2.0, w / 2.0);
    let p = Point3::new;
    let (corners, wires, faces): (Vec<Point3<f64>>, Vec<(usize, usize)>, Vec<Vec<usize>>) = match spec.archetype {
        Archetype::Flat => (
            vec![p(x0, 0.0, h), p(x1, 0.0, h), p(x1, d, h), p(x0, d, h)],
            vec![(0, 1), (1, 2), (2, 3), (3, 0)],
            vec![vec![0, 1, 2, 3]],
        ),
        Archetype::Gable => (
            vec![
                p(x0, 0.0, 0.0),
                p(x1, 0.0, 0.0),
                p(x1, d, 0.0),
                p(x0, d, 0.0),
                p(x0, d / 2.0, h),
                p(x1, d / 2.0, h),
            ],
            vec![(0, 1), (2, 3), (1, 2), (3, 0), (4, 5), (0, 4), (3, 4), (1, 5), (2, 5)],
            vec![vec![0, 1, 5, 4], vec![4, 5, 2, 3]],
        ),
        Archetype::Hip => (
            vec![
                p(x0, 0.0, 0.0),
                p(x1, 0.0, 0.0),
                p(x1, d, 0.0),
                p(x0, d, 0.0),
                p(x0 + d / 2.0, d / 2.0, h),
                p(x1 - d / 2.0, d / 2.0, h),
            ],
            vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (0, 4), (3, 4), (1, 5), (2, 5)],
            vec![vec![0, 1, 5, 4], vec![4, 5, 2, 3], vec![3, 0, 4], vec![1, 2, 5]],
        ),
        Archetype::Pyramid => (
            vec![p(x0, 0.0, 0.0), p(x1, 0.0, 0.0), p(x1, d, 0.0), p(x0, d, 0.0), p(0.0, d / 2.0, h)],
            vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 4), (1, 4), (2, 4), (3, 4)],
            vec![vec![0, 1, 4], vec![1, 2, 4], vec![2, 3, 4], vec![3, 0, 4]],
        ),
        Archetype::LGable => {
            // Main wing along x over [x0, x1] x [0, d]; a cross wing of the
            // same depth runs along y over [x1 - d, x1] x [0, 2d]. The main
            // ridge dies into the cross wing's west slope at `j`.
            let xv = x1 - d;
            let c = x1 - d / 2.0;
            let top = 2.0 * d;
            (
                vec![
                    p(x0, 0.0, 0.0),      // 0
                    p(xv, 0.0, 0.0),      // 1 valley foot on the south eave
                    p(x1, 0.0, 0.0),      // 2
                    p(x1, top, 0.0),      // 3
                    p(xv, top, 0.0),      // 4
                    p(xv, d, 0.0),        // 5 reflex corner, valley foot
                    p(x0, d, 0.0),        // 6
                    p(x0, d / 2.0, h),    // 7 main ridge, west end
                    p(c, d / 2.0, h),     // 8 ridge junction
                    p(c, 0.0, h),         // 9 cross ridge, south end
                    p(c, top, h),         // 10 cross ridge, north end
                ],
                vec![
                    // eaves and gable bases along the outline
                    (0, 1),
                    (1, 2),
                    (2, 3),
                    (3, 4),
                    (4, 5),
                    (5, 6),
                    (6, 0),
                    // rakes
                    (0, 7),
                    (6, 7),
                    (1, 9),
                    (2, 9),
                    (4, 10),
                    (3, 10),
                    // ridges
                    (7, 8),
                    (9, 8),
                    (8, 10),
                    // valleys
                    (1, 8),
                    (5, 8),
                ],
                vec![
                    vec![0, 1, 8, 7],
                    vec![7, 8, 5, 6],
                    vec![1, 9, 8],
                    vec![8, 10, 4, 5],
                    vec![9, 2, 3, 10],
                ],
            )
        }
    };
    let faces = faces.iter().map(|f| f.iter().map(|&i| corners[i]).collect()).collect();
    let wireframe = Wireframe::new(corners, wires).expect("archetype wireframes are valid");
    Roof { faces, wireframe }
}

/// Exact ground-truth wireframe for a spec.
pub fn ground_truth(spec: &RoofSpec) -> Result<Wireframe> {
    spec.validate()?;
    Ok(build(spec).wireframe)
}

/// Samples `spec.point_count` points uniformly over the roof surface and
/// returns them with the analytic wireframe.
pub fn generate_roof(spec: &RoofSpec) -> Result<(PointCloud, Wireframe)> {
    spec.validate()?;
    let roof = build(spec);
    let triangles: Vec<[Point3<f64>; 3]> = roof
        .faces
        .iter()
        .flat_map(|f| (1..f.len() - 1).map(move |i| [f[0], f[i], f[i + 1]]))
        .collect();
    let areas: Vec<f64> = triangles.iter().map(|[a, b, c]| (b - a).cross(&(c - a)).norm()).collect();
    let pick = WeightedIndex::new(&areas).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points = (0..spec.point_count)
        .map(|_| {
            let [a, b, c] = triangles[pick.sample(&mut rng)];
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                (u, v) = (1.0 - u, 1.0 - v);
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect();
    Ok((PointCloud { points }, roof.wireframe))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbSpec {
    /// Fraction of points removed around a random anchor, in `[0, 1)`.
    pub sparsity_fraction: f64,
    /// Standard deviation of the per-coordinate Gaussian offset, in cloud units.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        Self { sparsity_fraction: 0.05, noise_sigma: 0.0, seed: 0 }
    }
}

/// Removes a seeded random anchor and its nearest neighbours, exactly
/// `ceil(sparsity_fraction * N)` points in total. Surviving points keep
/// their relative order.
pub fn perturb_sparsity(cloud: &PointCloud, spec: &PerturbSpec) -> Result<PointCloud> {
    let n = cloud.len();
    let f = spec.sparsity_fraction;
    if !(0.0..1.0).contains(&f) {
        return Err(Error::InvalidPerturbation(format!("sparsity fraction {f} outside [0, 1)")));
    }
    let remove = (f * n as f64).ceil() as usize;
    if remove < 1 {
        return Err(Error::InvalidPerturbation(format!(
            "sparsity fraction {f} removes no points from a cloud of {n}"
        )));
    }
    if n - remove.min(n) < 3 {
        return Err(Error::InvalidPerturbation(format!(
            "removing {remove} of {n} points leaves fewer than 3"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let anchor = cloud.points[rng.random_range(0..n)];
    let mut order: Vec<(f64, usize)> =
        cloud.points.iter().enumerate().map(|(i, p)| ((p - anchor).norm(), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut keep = vec![true; n];
    for &(_, i) in &order[..remove] {
        keep[i] = false;
    }
    let points = cloud.points.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
    Ok(PointCloud { points })
}

/// Adds independent zero-mean Gaussian noise to every coordinate.
pub fn perturb_noise(cloud: &PointCloud, spec: &PerturbSpec) -> Result<PointCloud> {
    let sigma = spec.noise_sigma;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidPerturbation(format!("noise sigma {sigma} must be non-negative")));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidPerturbation(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let dx = normal.sample(&mut rng);
            let dy = normal.sample(&mut rng);
            let dz = normal.sample(&mut rng);
            Point3::new(p.x + dx, p.y + dy, p.z + dz)
        })
        .collect();
    Ok(PointCloud { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::evaluate;

    fn spec(archetype: Archetype) -> RoofSpec {
        RoofSpec { archetype, width: 20.0, depth: 10.0, ridge_height: 5.0, point_count: 2000, seed: 9 }
    }

    fn distance_to_nearest_face(roof: &Roof, q: &Point3<f64>) -> f64 {
        roof.faces
            .iter()
            .map(|f| {
                let n = (f[1] - f[0]).cross(&(f[2] - f[0])).normalize();
                (q - f[0]).dot(&n).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn flat_roof_corners() {
        let s = RoofSpec { archetype: Archetype::Flat, width: 10.0, depth: 10.0, ridge_height: 3.0, point_count: 400, seed: 1 };
        let (cloud, gt) = generate_roof(&s).unwrap();
        assert_eq!(cloud.len(), 400);
        assert_eq!(gt.corners.len(), 4);
        assert_eq!(gt.wires.len(), 4);
        assert!(gt.corners.iter().all(|c| c.z == 3.0));
        assert!(cloud.points.iter().all(|p| p.z == 3.0 && p.x.abs() <= 5.0 && (0.0..=10.0).contains(&p.y)));
    }

    #[test]
    fn gable_ridge_endpoints() {
        let gt = ground_truth(&spec(Archetype::Gable)).unwrap();
        assert_eq!((gt.corners.len(), gt.wires.len()), (6, 9));
        let ridge = gt.wires.iter().find(|&&(a, b)| gt.corners[a].z == 5.0 && gt.corners[b].z == 5.0).unwrap();
        let (a, b) = (gt.corners[ridge.0], gt.corners[ridge.1]);
        assert_eq!((a.x, a.y, b.x, b.y), (-10.0, 5.0, 10.0, 5.0));
    }

    #[test]
    fn archetype_sizes() {
        let expect = [(Archetype::Flat, 4, 4), (Archetype::Gable, 6, 9), (Archetype::Hip, 6, 9), (Archetype::Pyramid, 5, 8)];
        for (a, c, w) in expect {
            let gt = ground_truth(&spec(a)).unwrap();
            assert_eq!((gt.corners.len(), gt.wires.len()), (c, w), "{a}");
        }
        let l = ground_truth(&spec(Archetype::LGable)).unwrap();
        assert!(l.corners.len() >= 10);
    }

    #[test]
    fn samples_lie_on_faces() {
        for a in Archetype::ALL {
            let s = spec(a);
            let roof = build(&s);
            let (cloud, _) = generate_roof(&s).unwrap();
            let worst = cloud.points.iter().map(|q| distance_to_nearest_face(&roof, q)).fold(0.0, f64::max);
            assert!(worst <= 1e-12, "{a}: {worst}");
        }
    }

    #[test]
    fn generation_is_seeded() {
        for a in Archetype::ALL {
            assert_eq!(generate_roof(&spec(a)).unwrap(), generate_roof(&spec(a)).unwrap());
        }
        let mut other = spec(Archetype::Gable);
        other.seed += 1;
        assert_ne!(generate_roof(&other).unwrap().0, generate_roof(&spec(Archetype::Gable)).unwrap().0);
    }

    #[test]
    fn ground_truth_self_evaluates_perfectly() {
        for a in Archetype::ALL {
            let gt = ground_truth(&spec(a)).unwrap();
            let r = evaluate(&gt, &gt, 2.0).unwrap();
            assert_eq!(r.values(), [0.0, 0.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0], "{a}");
        }
    }

    #[test]
    fn l_gable_has_interior_corner() {
        let gt = ground_truth(&spec(Archetype::LGable)).unwrap();
        // every corner strictly inside the hull of the others' bounding
        // outline: the reflex outline corner and the ridge junction
        let strictly_inside = |q: &Point3<f64>| {
            let xs = gt.corners.iter().map(|c| c.x);
            let ys = gt.corners.iter().map(|c| c.y);
            let (xmin, xmax) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
            let (ymin, ymax) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
            // hull of the L outline: the rectangle minus the triangle cut at
            // the north-west, bounded by the segment (x0, d) -> (xv, 2d)
            let (x0, d, xv) = (-10.0, 10.0, 0.0);
            let side = (xv - x0) * (q.y - d) - (2.0 * d - d) * (q.x - x0);
            q.x > xmin && q.x < xmax && q.y > ymin && q.y < ymax && side < 0.0
        };
        assert!(gt.corners.iter().any(strictly_inside));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec(Archetype::Hip);
        s.width = 8.0;
        assert!(matches!(generate_roof(&s), Err(Error::InvalidSpec(_))));
        let mut s = spec(Archetype::Gable);
        s.point_count = 10;
        assert!(generate_roof(&s).is_err());
        s.point_count = 1000;
        s.ridge_height = 0.0;
        assert!(generate_roof(&s).is_err());
        assert!("dome".parse::<Archetype>().is_err());
        assert_eq!("l_gable".parse::<Archetype>().unwrap(), Archetype::LGable);
    }

    fn grid_cloud(n: usize) -> PointCloud {
        PointCloud { points: (0..n).map(|i| Point3::new(i as f64, (i * 7 % 13) as f64, 0.0)).collect() }
    }

    #[test]
    fn sparsity_removes_nearest_ball() {
        let cloud = grid_cloud(100);
        let ps = PerturbSpec { sparsity_fraction: 0.05, noise_sigma: 0.0, seed: 4 };
        let out = perturb_sparsity(&cloud, &ps).unwrap();
        assert_eq!(out.len(), 95);
        let removed: Vec<&Point3<f64>> = cloud.points.iter().filter(|p| !out.points.contains(p)).collect();
        assert_eq!(removed.len(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let anchor = cloud.points[rng.random_range(0..100)];
        assert!(removed.contains(&&anchor));
        let max_removed = removed.iter().map(|p| (*p - anchor).norm()).fold(0.0, f64::max);
        let min_kept = out.points.iter().map(|p| (p - anchor).norm()).fold(f64::INFINITY, f64::min);
        assert!(max_removed <= min_kept);
        assert_eq!(perturb_sparsity(&cloud, &ps).unwrap(), out);
    }

    #[test]
    fn sparsity_preconditions() {
        let cloud = grid_cloud(100);
        let zero = PerturbSpec { sparsity_fraction: 0.0, ..Default::default() };
        assert!(matches!(perturb_sparsity(&cloud, &zero), Err(Error::InvalidPerturbation(_))));
        let most = PerturbSpec { sparsity_fraction: 0.98, ..Default::default() };
        assert!(perturb_sparsity(&cloud, &most).is_err());
        let ok = PerturbSpec { sparsity_fraction: 0.97, ..Default::default() };
        assert_eq!(perturb_sparsity(&cloud, &ok).unwrap().len(), 3);
    }

    #[test]
    fn zero_noise_is_identity() {
        let cloud = grid_cloud(50);
        let ps = PerturbSpec { sparsity_fraction: 0.05, noise_sigma: 0.0, seed: 1 };
        assert_eq!(perturb_noise(&cloud, &ps).unwrap(), cloud);
    }

    #[test]
    fn unit_noise_statistics() {
        let cloud = PointCloud { points: vec![Point3::origin(); 10_000] };
        let ps = PerturbSpec { sparsity_fraction: 0.05, noise_sigma: 1.0, seed: 77 };
        let out = perturb_noise(&cloud, &ps).unwrap();
        for axis in 0..3 {
            let v: Vec<f64> = out.points.iter().map(|p| p[axis]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            assert!((var.sqrt() - 1.0).abs() < 0.05, "axis {axis}: {}", var.sqrt());
        }
        assert_eq!(perturb_noise(&cloud, &ps).unwrap(), out);
        let bad = PerturbSpec { noise_sigma: -1.0, ..ps };
        assert!(perturb_noise(&cloud, &bad).is_err());
    }
}
