//! Lifted 2.5D Delaunay graph.
//!
//! The triangulation is computed on the `(x, y)` projection of the cloud and
//! `z` is carried along, which gives every edge at most two adjacent faces.
//! Construction is Bowyer-Watson incremental insertion over ghost triangles
//! (one per convex hull edge, sharing a vertex at infinity), driven by the
//! adaptive-precision `orient2d`/`incircle` predicates. Points are inserted
//! in Hilbert-curve order so the point-location walk stays short.
//!
//! Cocircular configurations admit several valid triangulations; a final flip
//! pass makes every cocircular quad use the diagonal through its lowest
//! vertex index, so the output depends only on the input, not on insertion
//! order.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::Point3;
use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};
use crate::io::PointCloud;

/// Default merge radius for points sharing an `(x, y)` location.
pub const DEFAULT_XY_EPSILON: f64 = 1e-9;

/// Faces whose projected doubled area is at or below this are dropped.
pub const MIN_DOUBLE_AREA: f64 = 1e-12;

const GHOST: u32 = u32::MAX;
const DEAD: u32 = u32::MAX - 1;
const NONE: u32 = u32::MAX;

/// The one or two faces adjacent to an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeFaces {
    pub first: usize,
    pub second: Option<usize>,
}

impl EdgeFaces {
    pub fn count(&self) -> usize {
        1 + usize::from(self.second.is_some())
    }
}

/// Vertices, edges and faces of the lifted triangulation with adjacency.
///
/// Graph vertices are the cloud points that survived `(x, y)` merging, in
/// ascending order of their cloud index; without merges vertex `i` is cloud
/// point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaunayGraph {
    /// Positions of the graph vertices.
    pub points: Vec<Point3<f64>>,
    /// Cloud index of the point kept for each graph vertex.
    pub source_index: Vec<usize>,
    /// Graph vertex for each cloud index.
    pub remap: Vec<usize>,
    /// Sorted `(u, v)` pairs with `u < v`.
    pub edges: Vec<[usize; 2]>,
    /// Counter-clockwise in `(x, y)`, lowest index first, sorted.
    pub faces: Vec<[usize; 3]>,
    /// Edge indices of each face; entry `i` is the edge opposite `faces[f][i]`.
    pub face_edges: Vec<[usize; 3]>,
    pub edge_faces: Vec<EdgeFaces>,
    vertex_edge_offsets: Vec<usize>,
    vertex_edge_list: Vec<usize>,
}

impl DelaunayGraph {
    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    /// Number of points in the cloud the graph was built from.
    pub fn source_len(&self) -> usize {
        self.remap.len()
    }

    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.vertex_edge_list[self.vertex_edge_offsets[v]..self.vertex_edge_offsets[v + 1]]
    }

    pub fn other_end(&self, edge: usize, v: usize) -> usize {
        let [a, b] = self.edges[edge];
        if a == v {
            b
        } else {
            a
        }
    }

    /// `(neighbor, edge)` pairs around `v`, in ascending neighbor order.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.incident_edges(v).iter().map(move |&e| (self.other_end(e, v), e))
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let key = [u.min(v), u.max(v)];
        self.edges.binary_search(&key).ok()
    }

    pub fn is_boundary(&self, edge: usize) -> bool {
        self.edge_faces[edge].second.is_none()
    }

    /// Edges with exactly one adjacent face.
    pub fn boundary_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.is_boundary(e)).collect()
    }

    /// Vertices that belong to at least one edge.
    pub fn connected_vertex_count(&self) -> usize {
        (0..self.vertex_count()).filter(|&v| !self.incident_edges(v).is_empty()).count()
    }

    /// `V - E + F` over connected vertices and interior faces; 1 for a
    /// triangulated disk.
    pub fn euler_characteristic(&self) -> i64 {
        self.connected_vertex_count() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Dumps the triangulation as an OBJ mesh (`v` and `f` records).
    pub fn write_obj_mesh<W: Write>(&self, mut writer: W) -> Result<()> {
        for p in &self.points {
            writeln!(writer, "v {} {} {}", p.x, p.y, p.z)?;
        }
        for f in &self.faces {
            writeln!(writer, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }

    fn from_faces(
        points: Vec<Point3<f64>>,
        source_index: Vec<usize>,
        remap: Vec<usize>,
        mut faces: Vec<[usize; 3]>,
    ) -> Self {
        for f in faces.iter_mut() {
            let m = (0..3).min_by_key(|&i| f[i]).unwrap_or(0);
            f.rotate_left(m);
        }
        faces.sort_unstable();

        let mut edges: Vec<[usize; 2]> = faces
            .iter()
            .flat_map(|f| {
                (0..3).map(move |i| {
                    let (a, b) = (f[(i + 1) % 3], f[(i + 2) % 3]);
                    [a.min(b), a.max(b)]
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();

        let mut edge_faces: Vec<Option<EdgeFaces>> = vec![None; edges.len()];
        let mut face_edges = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            let mut fe = [0usize; 3];
            for (i, slot) in fe.iter_mut().enumerate() {
                let (a, b) = (f[(i + 1) % 3], f[(i + 2) % 3]);
                let e = edges
                    .binary_search(&[a.min(b), a.max(b)])
                    .expect("face edge present in edge list");
                *slot = e;
                edge_faces[e] = Some(match edge_faces[e] {
                    None => EdgeFaces { first: fi, second: None },
                    Some(ef) => EdgeFaces { first: ef.first, second: Some(fi) },
                });
            }
            face_edges.push(fe);
        }
        let edge_faces = edge_faces
            .into_iter()
            .map(|ef| ef.expect("every edge comes from a face"))
            .collect();

        let n = points.len();
        let mut degree = vec![0usize; n + 1];
        for e in &edges {
            degree[e[0] + 1] += 1;
            degree[e[1] + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut cursor = offsets.clone();
        let mut list = vec![0usize; offsets[n]];
        for (ei, e) in edges.iter().enumerate() {
            for &v in e {
                list[cursor[v]] = ei;
                cursor[v] += 1;
            }
        }
        // Edges are sorted, so each vertex's list is already ordered by edge
        // index; reorder by neighbor index for a stable traversal order.
        for v in 0..n {
            let slice = &mut list[offsets[v]..offsets[v + 1]];
            slice.sort_unstable_by_key(|&e| {
                let [a, b] = edges[e];
                if a == v {
                    b
                } else {
                    a
                }
            });
        }

        Self {
            points,
            source_index,
            remap,
            edges,
            faces,
            face_edges,
            edge_faces,
            vertex_edge_offsets: offsets,
            vertex_edge_list: list,
        }
    }
}

/// Merges points whose `(x, y)` lie within `xy_epsilon`, keeping the highest.
///
/// Returns `(kept cloud indices ascending, remap cloud index -> graph vertex)`.
fn merge_coincident(cloud: &PointCloud, xy_epsilon: f64) -> (Vec<usize>, Vec<usize>) {
    let n = cloud.len();
    // cluster representative (first member) for each point
    let mut rep_of = vec![usize::MAX; n];
    if xy_epsilon > 0.0 {
        let cell = |v: f64| (v / xy_epsilon).floor() as i64;
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in cloud.points.iter().enumerate() {
            let (cx, cy) = (cell(p.x), cell(p.y));
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(reps) = grid.get(&(cx + dx, cy + dy)) {
                        for &r in reps {
                            let q = &cloud.points[r];
                            let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
                            if d2 <= xy_epsilon * xy_epsilon && found.is_none_or(|f| r < f) {
                                found = Some(r);
                            }
                        }
                    }
                    if found.is_some() && dx == 1 && dy == 1 {
                        break 'search;
                    }
                }
            }
            match found {
                Some(r) => rep_of[i] = r,
                None => {
                    rep_of[i] = i;
                    grid.entry((cx, cy)).or_default().push(i);
                }
            }
        }
    } else {
        let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
        for (i, p) in cloud.points.iter().enumerate() {
            let key = ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits());
            rep_of[i] = *seen.entry(key).or_insert(i);
        }
    }

    // winner per cluster: maximum z, lowest index on ties
    let mut winner: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let w = winner.entry(rep_of[i]).or_insert(i);
        if cloud.points[i].z > cloud.points[*w].z {
            *w = i;
        }
    }
    let mut kept: Vec<usize> = winner.values().copied().collect();
    kept.sort_unstable();
    let mut vertex_of_winner = HashMap::with_capacity(kept.len());
    for (v, &i) in kept.iter().enumerate() {
        vertex_of_winner.insert(i, v);
    }
    let remap = (0..n).map(|i| vertex_of_winner[&winner[&rep_of[i]]]).collect();
    (kept, remap)
}

fn hilbert_index(order: u32, mut x: u32, mut y: u32) -> u64 {
    let n = 1u32 << order;
    let mut d = 0u64;
    let mut s = n >> 1;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += u64::from(s) * u64::from(s) * u64::from((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s >>= 1;
    }
    d
}

fn hilbert_order(pts: &[Coord<f64>]) -> Vec<usize> {
    const BITS: u32 = 16;
    let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in pts {
        lo_x = lo_x.min(p.x);
        lo_y = lo_y.min(p.y);
        hi_x = hi_x.max(p.x);
        hi_y = hi_y.max(p.y);
    }
    let span = (hi_x - lo_x).max(hi_y - lo_y).max(f64::MIN_POSITIVE);
    let max_cell = f64::from((1u32 << BITS) - 1);
    let mut keyed: Vec<(u64, usize)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let qx = ((p.x - lo_x) / span * max_cell).round() as u32;
            let qy = ((p.y - lo_y) / span * max_cell).round() as u32;
            (hilbert_index(BITS, qx, qy), i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [u32; 3],
    n: [u32; 3],
}

impl Tri {
    fn is_ghost(&self) -> bool {
        self.v.contains(&GHOST)
    }

    fn is_dead(&self) -> bool {
        self.v[0] == DEAD
    }

    fn index_of_neighbor(&self, t: u32) -> usize {
        (0..3).find(|&i| self.n[i] == t).expect("neighbor link is symmetric")
    }
}

struct Mesh<'a> {
    pts: &'a [Coord<f64>],
    tris: Vec<Tri>,
    free: Vec<u32>,
    // cavity membership, valid when equal to `epoch`
    stamp: Vec<u32>,
    epoch: u32,
    walk_rotation: usize,
}

impl<'a> Mesh<'a> {
    fn pt(&self, v: u32) -> Coord<f64> {
        self.pts[v as usize]
    }

    fn alloc(&mut self, tri: Tri) -> u32 {
        match self.free.pop() {
            Some(slot) => {
                self.tris[slot as usize] = tri;
                slot
            }
            None => {
                self.tris.push(tri);
                self.stamp.push(0);
                (self.tris.len() - 1) as u32
            }
        }
    }

    fn seed(&mut self, a: u32, b: u32, c: u32) -> u32 {
        let real = [a, b, c];
        let t0 = self.alloc(Tri { v: real, n: [NONE; 3] });
        // ghost across the edge opposite real[i] has the reversed hull edge
        let mut ghosts = [0u32; 3];
        for i in 0..3 {
            let (u, w) = (real[(i + 1) % 3], real[(i + 2) % 3]);
            ghosts[i] = self.alloc(Tri { v: [w, u, GHOST], n: [NONE, NONE, t0] });
            self.tris[t0 as usize].n[i] = ghosts[i];
        }
        // ghost (w, u, G): edge (u, G) is opposite w, edge (G, w) is opposite u
        for i in 0..3 {
            let g = ghosts[i];
            let [w, u, _] = self.tris[g as usize].v;
            for j in 0..3 {
                if j == i {
                    continue;
                }
                let h = ghosts[j];
                let [w2, u2, _] = self.tris[h as usize].v;
                if w2 == u {
                    self.tris[g as usize].n[0] = h;
                }
                if u2 == w {
                    self.tris[g as usize].n[1] = h;
                }
            }
        }
        t0
    }

    /// Ghost triangle rotated so the vertex at infinity comes last.
    fn ghost_edge(&self, t: &Tri) -> (u32, u32) {
        let g = t.v.iter().position(|&v| v == GHOST).expect("ghost triangle");
        (t.v[(g + 1) % 3], t.v[(g + 2) % 3])
    }

    fn in_conflict(&self, t: &Tri, p: Coord<f64>) -> bool {
        if t.is_ghost() {
            let (x, y) = self.ghost_edge(t);
            let (px, py) = (self.pt(x), self.pt(y));
            let o = orient2d(px, py, p);
            if o > 0.0 {
                return true;
            }
            if o < 0.0 {
                return false;
            }
            let along = (p.x - px.x) * (py.x - px.x) + (p.y - px.y) * (py.y - px.y);
            let back = (p.x - py.x) * (px.x - py.x) + (p.y - py.y) * (px.y - py.y);
            along > 0.0 && back > 0.0
        } else {
            incircle(self.pt(t.v[0]), self.pt(t.v[1]), self.pt(t.v[2]), p) > 0.0
        }
    }

    fn locate(&mut self, start: u32, p: Coord<f64>) -> u32 {
        let mut cur = start;
        if self.tris[cur as usize].is_ghost() {
            let t = self.tris[cur as usize];
            let g = t.v.iter().position(|&v| v == GHOST).unwrap_or(0);
            cur = t.n[g];
        }
        loop {
            let t = self.tris[cur as usize];
            if t.is_ghost() {
                return cur;
            }
            self.walk_rotation = (self.walk_rotation + 1) % 3;
            let mut next = None;
            for k in 0..3 {
                let i = (k + self.walk_rotation) % 3;
                let (a, b) = (t.v[(i + 1) % 3], t.v[(i + 2) % 3]);
                if orient2d(self.pt(a), self.pt(b), p) < 0.0 {
                    next = Some(t.n[i]);
                    break;
                }
            }
            match next {
                Some(n) => cur = n,
                None => return cur,
            }
        }
    }

    fn insert(
        &mut self,
        v: u32,
        start: u32,
        cavity: &mut Vec<u32>,
        boundary: &mut Vec<(u32, u32, u32, usize)>,
    ) -> u32 {
        let p = self.pt(v);
        let seed = self.locate(start, p);
        self.epoch += 1;
        cavity.clear();
        boundary.clear();
        cavity.push(seed);
        self.stamp[seed as usize] = self.epoch;
        let mut head = 0;
        while head < cavity.len() {
            let t_idx = cavity[head];
            head += 1;
            let t = self.tris[t_idx as usize];
            for i in 0..3 {
                let nb = t.n[i];
                if self.stamp[nb as usize] == self.epoch {
                    continue;
                }
                let nt = self.tris[nb as usize];
                if self.in_conflict(&nt, p) {
                    self.stamp[nb as usize] = self.epoch;
                    cavity.push(nb);
                } else {
                    let (a, b) = (t.v[(i + 1) % 3], t.v[(i + 2) % 3]);
                    boundary.push((a, b, nb, nt.index_of_neighbor(t_idx)));
                }
            }
        }

        for &t in cavity.iter() {
            self.tris[t as usize].v = [DEAD; 3];
            self.free.push(t);
        }

        // (start vertex, new triangle) for each boundary edge
        let mut created: Vec<(u32, u32)> = Vec::with_capacity(boundary.len());
        let mut last_real = NONE;
        for &(a, b, outside, outside_slot) in boundary.iter() {
            let t = self.alloc(Tri { v: [a, b, v], n: [NONE, NONE, outside] });
            self.tris[outside as usize].n[outside_slot] = t;
            created.push((a, t));
            if a != GHOST && b != GHOST {
                last_real = t;
            }
        }
        created.sort_unstable();
        for k in 0..created.len() {
            let t = created[k].1;
            let b = self.tris[t as usize].v[1];
            // edge (b, v) is shared with the new triangle starting at b
            let at = created
                .binary_search_by_key(&b, |&(s, _)| s)
                .expect("cavity boundary is a closed cycle");
            let next = created[at].1;
            self.tris[t as usize].n[0] = next;
            self.tris[next as usize].n[1] = t;
        }
        if last_real == NONE {
            created[0].1
        } else {
            last_real
        }
    }

    /// Flips cocircular quads so their diagonal passes through the lowest
    /// vertex index of the quad.
    fn canonicalize_ties(&mut self) {
        let mut stack: Vec<u32> = (0..self.tris.len() as u32).collect();
        let mut budget = 16 * self.tris.len() + 64;
        while let Some(t_idx) = stack.pop() {
            if budget == 0 {
                break;
            }
            let t = self.tris[t_idx as usize];
            if t.is_dead() || t.is_ghost() {
                continue;
            }
            for i in 0..3 {
                let nb_idx = t.n[i];
                let nb = self.tris[nb_idx as usize];
                if nb.is_ghost() {
                    continue;
                }
                let a = t.v[i];
                let (b, c) = (t.v[(i + 1) % 3], t.v[(i + 2) % 3]);
                let j = nb.index_of_neighbor(t_idx);
                let d = nb.v[j];
                let lowest = a.min(b).min(c).min(d);
                if lowest == b || lowest == c {
                    continue;
                }
                if incircle(self.pt(a), self.pt(b), self.pt(c), self.pt(d)) != 0.0 {
                    continue;
                }
                let (pa, pb, pc, pd) = (self.pt(a), self.pt(b), self.pt(c), self.pt(d));
                if orient2d(pa, pb, pd) <= 0.0 || orient2d(pa, pd, pc) <= 0.0 {
                    continue;
                }
                budget -= 1;
                self.flip(t_idx, i, nb_idx, j);
                stack.push(t_idx);
                stack.push(nb_idx);
                break;
            }
        }
    }

    /// Replaces diagonal (b, c) of triangles t = (a, b, c) and nb = (d, c, b)
    /// with (a, d).
    fn flip(&mut self, t_idx: u32, i: usize, nb_idx: u32, j: usize) {
        let t = self.tris[t_idx as usize];
        let nb = self.tris[nb_idx as usize];
        let a = t.v[i];
        let b = t.v[(i + 1) % 3];
        let c = t.v[(i + 2) % 3];
        let d = nb.v[j];
        // outer neighbors
        let n_ab = t.n[(i + 2) % 3]; // opposite c
        let n_ca = t.n[(i + 1) % 3]; // opposite b
        let n_dc = nb.n[(j + 2) % 3]; // nb = (d, c, b): opposite b is edge (d, c)
        let n_bd = nb.n[(j + 1) % 3]; // opposite c is edge (b, d)
        debug_assert_eq!(nb.v[(j + 1) % 3], c);
        // new t = (a, b, d), new nb = (a, d, c)
        self.tris[t_idx as usize] = Tri { v: [a, b, d], n: [n_bd, nb_idx, n_ab] };
        self.tris[nb_idx as usize] = Tri { v: [a, d, c], n: [n_dc, n_ca, t_idx] };
        self.relink(n_bd, nb_idx, t_idx);
        self.relink(n_ca, t_idx, nb_idx);
    }

    fn relink(&mut self, tri: u32, old: u32, new: u32) {
        let t = &mut self.tris[tri as usize];
        for k in 0..3 {
            if t.n[k] == old {
                t.n[k] = new;
                return;
            }
        }
    }
}

/// Builds the lifted Delaunay graph of `cloud`.
///
/// Points whose `(x, y)` lie within `xy_epsilon` of an earlier point are
/// merged into one vertex carrying the highest of their `z` values.
pub fn triangulate(cloud: &PointCloud, xy_epsilon: f64) -> Result<DelaunayGraph> {
    if cloud.is_empty() {
        return Err(Error::Triangulation("empty point cloud".into()));
    }
    let (kept, remap) = merge_coincident(cloud, xy_epsilon);
    if kept.len() < 3 {
        return Err(Error::Triangulation(format!(
            "need at least 3 distinct (x, y) locations, found {}",
            kept.len()
        )));
    }
    if kept.len() >= NONE as usize - 2 {
        return Err(Error::Triangulation("too many points".into()));
    }
    let points: Vec<Point3<f64>> = kept.iter().map(|&i| cloud.points[i]).collect();
    let pts: Vec<Coord<f64>> = points.iter().map(|p| Coord { x: p.x, y: p.y }).collect();

    let order = hilbert_order(&pts);
    let a = order[0];
    let b = order[1];
    let Some(ci) = order[2..]
        .iter()
        .position(|&c| orient2d(pts[a], pts[b], pts[c]) != 0.0)
        .map(|k| k + 2)
    else {
        return Err(Error::Triangulation("all points are collinear in (x, y)".into()));
    };
    let c = order[ci];

    let mut mesh = Mesh {
        pts: &pts,
        tris: Vec::with_capacity(4 * pts.len()),
        free: Vec::new(),
        stamp: Vec::with_capacity(4 * pts.len()),
        epoch: 0,
        walk_rotation: 0,
    };
    let (a, b, c) = (a as u32, b as u32, c as u32);
    let mut last = if orient2d(pts[a as usize], pts[b as usize], pts[c as usize]) > 0.0 {
        mesh.seed(a, b, c)
    } else {
        mesh.seed(a, c, b)
    };

    let mut cavity = Vec::new();
    let mut boundary = Vec::new();
    for (k, &v) in order.iter().enumerate() {
        if k == 0 || k == 1 || k == ci {
            continue;
        }
        last = mesh.insert(v as u32, last, &mut cavity, &mut boundary);
    }
    mesh.canonicalize_ties();

    let faces: Vec<[usize; 3]> = mesh
        .tris
        .iter()
        .filter(|t| !t.is_dead() && !t.is_ghost())
        .filter(|t| {
            let [p, q, r] = t.v.map(|v| pts[v as usize]);
            (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x) > MIN_DOUBLE_AREA
        })
        .map(|t| t.v.map(|v| v as usize))
        .collect();
    if faces.is_empty() {
        return Err(Error::Triangulation("no non-degenerate faces".into()));
    }
    Ok(DelaunayGraph::from_faces(points, kept, remap, faces))
}
