mod common;

use common::{cross, empty_circumcircle_triples, in_circumcircle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roofgraph::{triangulate, DelaunayGraph, PointCloud};

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let coords: Vec<[f64; 3]> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    PointCloud::from_xyz(&coords).unwrap()
}

fn xy(g: &DelaunayGraph, v: usize) -> [f64; 2] {
    [g.points[v].x, g.points[v].y]
}

/// Gift wrapping over strictly extreme points; returns the hull cycle.
fn gift_wrap(points: &[[f64; 2]]) -> Vec<usize> {
    let start = (0..points.len())
        .min_by(|&a, &b| points[a].partial_cmp(&points[b]).unwrap())
        .unwrap();
    let mut hull = vec![start];
    let mut current = start;
    loop {
        let mut candidate = (current + 1) % points.len();
        for i in 0..points.len() {
            if i == current {
                continue;
            }
            let c = cross(points[current], points[candidate], points[i]);
            let farther = {
                let d = |p: [f64; 2]| (p[0] - points[current][0]).powi(2) + (p[1] - points[current][1]).powi(2);
                d(points[i]) > d(points[candidate])
            };
            if c < 0.0 || (c == 0.0 && farther) {
                candidate = i;
            }
        }
        if candidate == start {
            break;
        }
        hull.push(candidate);
        current = candidate;
    }
    hull
}

fn polygon_area(points: &[[f64; 2]], cycle: &[usize]) -> f64 {
    let n = cycle.len();
    (0..n)
        .map(|i| {
            let (p, q) = (points[cycle[i]], points[cycle[(i + 1) % n]]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

fn assert_structure(g: &DelaunayGraph) {
    assert_eq!(g.euler_characteristic(), 1);
    for ef in &g.edge_faces {
        assert!((1..=2).contains(&ef.count()));
    }
    for (f, fe) in g.faces.iter().zip(&g.face_edges) {
        for i in 0..3 {
            let [a, b] = g.edges[fe[i]];
            let (u, w) = (f[(i + 1) % 3], f[(i + 2) % 3]);
            assert_eq!([a, b], [u.min(w), u.max(w)]);
        }
        let area = cross(xy(g, f[0]), xy(g, f[1]), xy(g, f[2]));
        assert!(area > 0.0, "face {f:?} not counter-clockwise");
    }
}

#[test]
fn brute_force_empty_circumcircle_small_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..200 {
        let n = rng.random_range(4..=12);
        let cloud = random_cloud(&mut rng, n);
        let g = triangulate(&cloud, 0.0).unwrap();
        assert_structure(&g);

        let pts: Vec<[f64; 2]> = (0..n).map(|v| xy(&g, v)).collect();
        let expected = empty_circumcircle_triples(&pts);
        let mut actual: Vec<[usize; 3]> = g
            .faces
            .iter()
            .map(|f| {
                let mut s = *f;
                s.sort_unstable();
                s
            })
            .collect();
        actual.sort_unstable();
        assert_eq!(actual, expected, "trial {trial}");
    }
}

#[test]
fn boundary_matches_gift_wrapped_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.random_range(5..=60);
        let cloud = random_cloud(&mut rng, n);
        let g = triangulate(&cloud, 0.0).unwrap();
        let pts: Vec<[f64; 2]> = (0..g.vertex_count()).map(|v| xy(&g, v)).collect();
        let hull = gift_wrap(&pts);
        let mut expected: Vec<[usize; 2]> = (0..hull.len())
            .map(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                [a.min(b), a.max(b)]
            })
            .collect();
        expected.sort_unstable();
        let actual: Vec<[usize; 2]> = g.boundary_edges().iter().map(|&e| g.edges[e]).collect();
        assert_eq!(actual, expected);
    }
}

#[test]
fn ordering_is_deterministic_and_invariant_to_similarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let cloud = random_cloud(&mut rng, 200);
        let g1 = triangulate(&cloud, 0.0).unwrap();
        let g2 = triangulate(&cloud, 0.0).unwrap();
        assert_eq!(g1, g2);

        let moved = PointCloud {
            points: cloud
                .points
                .iter()
                .map(|p| nalgebra::Point3::new(p.x * 37.5 + 1000.0, p.y * 37.5 - 250.0, p.z * 37.5))
                .collect(),
        };
        let g3 = triangulate(&moved, 0.0).unwrap();
        assert_eq!(g1.edges, g3.edges);
        assert_eq!(g1.faces, g3.faces);
    }
}

#[test]
fn large_cloud_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cloud = random_cloud(&mut rng, 10_000);
    let g = triangulate(&cloud, 0.0).unwrap();
    assert_structure(&g);
    assert_eq!(g.vertex_count(), 10_000);
    let hull = g.boundary_edges().len();
    assert_eq!(g.faces.len(), 2 * 10_000 - hull - 2);
}

fn grid_points() -> impl Strategy<Value = Vec<(i8, i8, i8)>> {
    prop::collection::vec((-4i8..=4, -4i8..=4, -3i8..=3), 3..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // Integer lattices are full of collinear and cocircular subsets.
    #[test]
    fn degenerate_lattices_triangulate_cleanly(raw in grid_points()) {
        let coords: Vec<[f64; 3]> = raw.iter().map(|&(x, y, z)| [f64::from(x), f64::from(y), f64::from(z)]).collect();
        let cloud = PointCloud::from_xyz(&coords).unwrap();
        let Ok(g) = triangulate(&cloud, 0.0) else {
            // only legitimate failure: fewer than 3 distinct or all collinear
            let mut distinct: Vec<(i8, i8)> = raw.iter().map(|&(x, y, _)| (x, y)).collect();
            distinct.sort_unstable();
            distinct.dedup();
            let collinear = distinct.len() < 3 || distinct[2..].iter().all(|&c| {
                let (a, b) = (distinct[0], distinct[1]);
                (i32::from(b.0) - i32::from(a.0)) * (i32::from(c.1) - i32::from(a.1))
                    == (i32::from(b.1) - i32::from(a.1)) * (i32::from(c.0) - i32::from(a.0))
            });
            prop_assert!(collinear);
            return Ok(());
        };
        assert_structure(&g);
        let pts: Vec<[f64; 2]> = (0..g.vertex_count()).map(|v| xy(&g, v)).collect();
        for f in &g.faces {
            for d in 0..g.vertex_count() {
                if f.contains(&d) {
                    continue;
                }
                prop_assert!(in_circumcircle(pts[f[0]], pts[f[1]], pts[f[2]], pts[d]) <= 1e-9);
            }
        }
        let face_area: f64 = g.faces.iter().map(|f| cross(pts[f[0]], pts[f[1]], pts[f[2]]) / 2.0).sum();
        let hull = gift_wrap(&pts);
        prop_assert!((face_area - polygon_area(&pts, &hull)).abs() < 1e-9);
        // merged duplicates keep the highest z
        for (i, p) in cloud.points.iter().enumerate() {
            let v = g.remap[i];
            prop_assert_eq!((g.points[v].x, g.points[v].y), (p.x, p.y));
            prop_assert!(g.points[v].z >= p.z);
        }
        prop_assert_eq!(triangulate(&cloud, 0.0).unwrap(), g);
    }
}
