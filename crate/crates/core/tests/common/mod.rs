//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::Point3;
use roofgraph::ScoredGraph;

pub fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Circumcircle test in plain floating point, independent of the library's
/// predicates: positive when `d` is inside the circle through `a, b, c`.
pub fn in_circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let orient = cross(a, b, c);
    let row = |p: [f64; 2]| {
        let (x, y) = (p[0] - d[0], p[1] - d[1]);
        [x, y, x * x + y * y]
    };
    let (r0, r1, r2) = (row(a), row(b), row(c));
    let det = r0[0] * (r1[1] * r2[2] - r2[1] * r1[2]) - r0[1] * (r1[0] * r2[2] - r2[0] * r1[2])
        + r0[2] * (r1[0] * r2[1] - r2[0] * r1[1]);
    det * orient.signum()
}

/// Every non-degenerate triple of `points` whose circumcircle contains no
/// other point, each sorted, in lexicographic order. O(n^4).
pub fn empty_circumcircle_triples(points: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let n = points.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let (pa, pb, pc) = (points[a], points[b], points[c]);
                if cross(pa, pb, pc).abs() < 1e-14 {
                    continue;
                }
                let empty =
                    (0..n).filter(|&d| d != a && d != b && d != c).all(|d| in_circumcircle(pa, pb, pc, points[d]) < 0.0);
                if empty {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

fn edge_len(sg: &ScoredGraph, u: usize, v: usize) -> f64 {
    (sg.graph.points[u] - sg.graph.points[v]).norm()
}

/// Every simple path from `from` to `to`, with its length.
pub fn all_simple_paths(sg: &ScoredGraph, from: usize, to: usize) -> Vec<(f64, Vec<usize>)> {
    fn walk(sg: &ScoredGraph, to: usize, path: &mut Vec<usize>, len: f64, out: &mut Vec<(f64, Vec<usize>)>) {
        let cur = *path.last().unwrap();
        if cur == to {
            out.push((len, path.clone()));
            return;
        }
        for (w, _) in sg.graph.neighbors(cur) {
            if !path.contains(&w) {
                path.push(w);
                walk(sg, to, path, len + edge_len(sg, cur, w), out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(sg, to, &mut vec![from], 0.0, &mut out);
    out
}

/// Shortest length between two vertices and the lexicographically smallest
/// path among those within the tie tolerance of it.
pub fn expected_shortest_path(sg: &ScoredGraph, from: usize, to: usize) -> (f64, Vec<usize>) {
    let paths = all_simple_paths(sg, from, to);
    let best = paths.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let tie = 1e-9 * best.max(1.0);
    let path = paths.iter().filter(|p| p.0 <= best + tie).map(|p| &p.1).min().unwrap().clone();
    (best, path)
}

/// Best (cardinality, total distance) over every partial assignment of
/// `pred` to `gt` using pairs within `threshold`.
pub fn brute_force_assignment(pred: &[Point3<f64>], gt: &[Point3<f64>], threshold: f64) -> (usize, f64) {
    fn go(i: usize, pred: &[Point3<f64>], gt: &[Point3<f64>], t: f64, used: &mut Vec<bool>, count: usize, cost: f64, best: &mut (usize, f64)) {
        if i == pred.len() {
            if count > best.0 || (count == best.0 && cost < best.1) {
                *best = (count, cost);
            }
            return;
        }
        go(i + 1, pred, gt, t, used, count, cost, best);
        for j in 0..gt.len() {
            let d = (pred[i] - gt[j]).norm();
            if !used[j] && d <= t {
                used[j] = true;
                go(i + 1, pred, gt, t, used, count + 1, cost + d, best);
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0.0);
    go(0, pred, gt, threshold, &mut vec![false; gt.len()], 0, 0.0, &mut best);
    best
}
