use std::f64::consts::PI;

use nalgebra::Point3;
use roofgraph::io::normalize_to_range;
use roofgraph::reconstruct::{
    accepts_wire, corner_score_sampling, enumerate_wire_candidates, reconstruct_with_params, select_corners, CornerMethod,
    CornerSet, WireCandidate, WireMethod,
};
use roofgraph::synth::{generate_roof, Archetype, RoofSpec};
use roofgraph::{evaluate, reconstruct, score_graph, triangulate, Error, PointCloud, ReconstructionParams, ScoredGraph};

fn roof(archetype: Archetype, point_count: usize, seed: u64) -> (PointCloud, roofgraph::Wireframe) {
    let (width, depth, ridge_height) = match archetype {
        Archetype::Flat => (256.0, 160.0, 20.0),
        Archetype::Pyramid => (256.0, 200.0, 60.0),
        Archetype::LGable => (256.0, 96.0, 40.0),
        _ => (256.0, 128.0, 48.0),
    };
    generate_roof(&RoofSpec { archetype, width, depth, ridge_height, point_count, seed }).unwrap()
}

fn nms_params() -> ReconstructionParams {
    ReconstructionParams { corner_method: CornerMethod::Nms, wire_method: WireMethod::PathScore, ..Default::default() }
}

fn normalized_scored(cloud: &PointCloud) -> ScoredGraph {
    let (n, _) = normalize_to_range(cloud).unwrap();
    score_graph(triangulate(&n, 1e-9).unwrap(), &n).unwrap()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull by the monotone chain method.
fn hull(points: &[Point3<f64>]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = points.iter().map(|q| [q.x, q.y]).collect();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    let mut h: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = h.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while h.len() >= start + 2 && cross(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
                h.pop();
            }
            h.push(q);
        }
        h.pop();
    }
    h
}

/// Distance by which `q` lies outside the convex polygon `h` (0 inside).
fn outside_by(h: &[[f64; 2]], q: [f64; 2]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..h.len() {
        let (a, b) = (h[i], h[(i + 1) % h.len()]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        worst = worst.max(-cross(a, b, q) / len);
    }
    worst
}

#[test]
fn nms_selection_invariants() {
    let (cloud, _) = roof(Archetype::Hip, 4000, 3);
    let sg = normalized_scored(&cloud);
    let params = nms_params();
    let sampled = corner_score_sampling(&sg, params.k).unwrap();
    let corners = select_corners(&sg, &sampled, &params);
    assert!(corners.len() <= sampled.len() && sampled.len() <= params.k);
    assert!(!corners.is_empty());

    let h = hull(&sg.graph.points);
    for c in &corners.positions {
        assert!(outside_by(&h, [c.x, c.y]) <= 1e-9, "corner {c:?} outside the hull");
    }

    let candidates = enumerate_wire_candidates(&sg, &corners);
    let m = corners.len();
    assert_eq!(candidates.len(), m * (m - 1) / 2);
    let mut previous: Option<Vec<(usize, usize)>> = None;
    for threshold in [0.51, 0.55, 0.62, 0.7, 0.8, 0.9, 0.99] {
        let p = ReconstructionParams { wire_scale_threshold: threshold, ..params };
        let wires = roofgraph::reconstruct::select_wires(&sg, &candidates, &corners, &p);
        assert!(wires.iter().all(|w| candidates.iter().any(|c| c.endpoints == *w)));
        if let Some(prev) = &previous {
            assert!(wires.iter().all(|w| prev.contains(w)), "raising the threshold added a wire");
        }
        previous = Some(wires);
    }
}

#[test]
fn pipeline_is_deterministic() {
    let (cloud, _) = roof(Archetype::LGable, 6000, 11);
    for params in [ReconstructionParams::default(), nms_params()] {
        let a = reconstruct(&cloud, &params).unwrap();
        let b = reconstruct(&cloud, &params).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn candidates_cover_every_corner_pair_with_either_selector() {
    let (cloud, _) = roof(Archetype::Gable, 5000, 4);
    for params in [ReconstructionParams::default(), nms_params()] {
        let r = reconstruct_with_params(&cloud, &params).unwrap();
        let m = r.wireframe.corners.len();
        assert_eq!(r.candidates.len(), m * (m.saturating_sub(1)) / 2);
        for w in &r.wireframe.wires {
            assert!(r.candidates.iter().any(|c| c.endpoints == *w));
        }
    }
}

#[test]
fn dense_flat_rectangle_gives_its_four_corners() {
    let (cloud, gt) = roof(Archetype::Flat, 20_000, 1);
    let pred = reconstruct(&cloud, &ReconstructionParams::default()).unwrap();
    assert_eq!(pred.corners.len(), 4);
    assert_eq!(pred.wires.len(), 4);
    let (_, t) = normalize_to_range(&cloud).unwrap();
    let r = evaluate(&t.apply_wireframe(&pred), &t.apply_wireframe(&gt), 2.0).unwrap();
    assert_eq!((r.cf1, r.ef1), (100.0, 100.0));
}

#[test]
fn dense_gable_gives_six_corners_and_the_ridge() {
    let (cloud, gt) = roof(Archetype::Gable, 20_000, 2);
    let pred = reconstruct(&cloud, &ReconstructionParams::default()).unwrap();
    assert_eq!(pred.corners.len(), 6);
    let (_, t) = normalize_to_range(&cloud).unwrap();
    let (pn, gn) = (t.apply_wireframe(&pred), t.apply_wireframe(&gt));
    let r = evaluate(&pn, &gn, 2.0).unwrap();
    assert_eq!(r.cf1, 100.0);
    // ridge ends are the two ground-truth corners above the eaves
    let top = gn.corners.iter().map(|c| c.z).fold(f64::MIN, f64::max);
    let ends: Vec<usize> = (0..6).filter(|&i| gn.corners[i].z == top).collect();
    let m = roofgraph::metrics::match_corners(&pn.corners, &gn.corners, 2.0).unwrap();
    let to_pred = |g: usize| m.pairs.iter().find(|p| p.gt == g).unwrap().pred;
    let (a, b) = (to_pred(ends[0]), to_pred(ends[1]));
    assert!(pn.wires.contains(&(a.min(b), a.max(b))));
}

/// A lattice gable 20 wide and 10 deep whose ridge row carries vertices,
/// slope 1 on both sides.
fn lattice_gable() -> ScoredGraph {
    let mut coords = Vec::new();
    for j in 0..=10 {
        for i in 0..=20 {
            let y = j as f64;
            coords.push([i as f64, y, 5.0 - (y - 5.0).abs()]);
        }
    }
    let cloud = PointCloud::from_xyz(&coords).unwrap();
    score_graph(triangulate(&cloud, 0.0).unwrap(), &cloud).unwrap()
}

#[test]
fn ridge_candidate_accepted_and_flat_diagonal_rejected() {
    let sg = lattice_gable();
    let params = nms_params();
    // ridge ends one step in from the gable walls, and a flat diagonal on
    // one slope
    let corners = CornerSet::snapped_to(
        &sg,
        vec![
            Point3::new(1.0, 5.0, 5.0),
            Point3::new(19.0, 5.0, 5.0),
            Point3::new(3.0, 1.0, 1.0),
            Point3::new(9.0, 3.0, 3.0),
        ],
    );
    let candidates = enumerate_wire_candidates(&sg, &corners);
    let ridge = candidates.iter().find(|c| c.endpoints == (0, 1)).unwrap();
    assert!(ridge.path.iter().all(|&v| sg.graph.points[v].y == 5.0));
    assert!((ridge.path_score.unwrap() - PI / 2.0).abs() < 1e-9);
    assert!((ridge.scale_factor.unwrap() - 0.827_897).abs() < 1e-6);
    assert!(accepts_wire(&sg, ridge, &corners, &params));

    let diagonal = candidates.iter().find(|c| c.endpoints == (2, 3)).unwrap();
    assert!(diagonal.path_score.unwrap() < 1e-6);
    assert!(diagonal.scale_factor.unwrap() < params.wire_scale_threshold);
    assert!(!accepts_wire(&sg, diagonal, &corners, &params));
}

#[test]
fn candidate_without_path_is_rejected() {
    let sg = lattice_gable();
    let corners = CornerSet::snapped_to(&sg, vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.0, 0.0)]);
    let candidates = enumerate_wire_candidates(&sg, &corners);
    assert_eq!(candidates.len(), 1);
    assert!(candidates[0].path_score.is_none() && candidates[0].path.is_empty());
    assert!(!accepts_wire(&sg, &candidates[0], &corners, &nms_params()));

    let lone = WireCandidate { endpoints: (0, 1), snapped_vertices: (0, 5), path_score: None, scale_factor: None, path: vec![] };
    assert!(!accepts_wire(&sg, &lone, &corners, &nms_params()));
}

#[test]
fn no_corners_gives_an_empty_wireframe() {
    // flat hexagon around a centre point: hull vertices score 2π/3, the
    // centre 0, so a threshold above 2π/3 keeps nothing
    let mut coords = vec![[0.0, 0.0, 0.0]];
    coords.extend((0..6).map(|i| {
        let a = i as f64 * PI / 3.0;
        [10.0 * a.cos(), 10.0 * a.sin(), 0.0]
    }));
    let cloud = PointCloud::from_xyz(&coords).unwrap();
    let params = ReconstructionParams { corner_threshold: 0.9 * PI, ..nms_params() };
    let w = reconstruct(&cloud, &params).unwrap();
    assert!(w.corners.is_empty() && w.wires.is_empty());
}

#[test]
fn collapsed_cloud_surfaces_triangulation_error() {
    let cloud = PointCloud::from_xyz(&[[1.0, 1.0, 0.0], [1.0, 1.0, 2.0], [1.0, 1.0, 5.0]]).unwrap();
    assert!(matches!(reconstruct(&cloud, &ReconstructionParams::default()), Err(Error::Triangulation(_))));
}

#[test]
fn planar_corners_stay_near_the_hull() {
    for (i, archetype) in Archetype::ALL.into_iter().enumerate() {
        let (cloud, _) = roof(archetype, 8000, 40 + i as u64);
        let params = ReconstructionParams::default();
        let r = reconstruct_with_params(&cloud, &params).unwrap();
        let (n, _) = normalize_to_range(&cloud).unwrap();
        let h = hull(&n.points);
        for c in &r.normalized.corners {
            // corners are intersections of fitted outline lines, so they
            // may sit beyond the outermost samples where the sampled
            // outline cuts across a corner
            let out = outside_by(&h, [c.x, c.y]);
            assert!(out <= params.max_corner_shift, "{archetype}: corner {c:?} is {out} outside");
        }
    }
}
