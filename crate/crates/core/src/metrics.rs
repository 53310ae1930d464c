//! Wireframe evaluation: corner matching, corner and edge precision/recall,
//! average corner offset and wireframe edit distance.
//!
//! Corners are matched by an optimal one-to-one assignment restricted to
//! pairs within a distance threshold: the matching has maximum cardinality
//! and, among those, minimum total distance. Precision, recall and F1 are
//! reported as percentages.
//!
//! Wireframe edit distance (WED) is the cost of turning the prediction into
//! the ground truth, normalized by total ground-truth wire length:
//!
//! ```text
//! WED = (Σ matched corner offsets + Σ |missed gt wires| + Σ |spurious pred wires|) / Σ |gt wires|
//! ```
//!
//! When the ground truth has zero total wire length the raw numerator is
//! returned instead (0 if the prediction has no wires).

use std::collections::HashSet;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{Error, Result};
use crate::io::Wireframe;

/// Corner match radius in normalized (0-256) units.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub gt: usize,
    pub distance: f64,
}

/// One-to-one pairing of predicted and ground-truth corners.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerMatching {
    /// Sorted by predicted index.
    pub pairs: Vec<MatchedPair>,
    pub threshold: f64,
}

impl CornerMatching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.distance).sum()
    }

    /// Ground-truth partner of each predicted corner.
    pub fn pred_to_gt(&self, pred_count: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; pred_count];
        for p in &self.pairs {
            map[p.pred] = Some(p.gt);
        }
        map
    }
}

/// Maximum-cardinality, minimum-distance matching among pairs no farther
/// apart than `threshold`.
pub fn match_corners(pred: &[Point3<f64>], gt: &[Point3<f64>], threshold: f64) -> Result<CornerMatching> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::Contract(format!("match threshold must be positive, got {threshold}")));
    }
    let n = pred.len().max(gt.len());
    if pred.is_empty() || gt.is_empty() {
        return Ok(CornerMatching { pairs: Vec::new(), threshold });
    }
    // every admissible pair earns a bonus larger than any achievable
    // distance total, so cardinality dominates and distance breaks ties
    let bonus = 2.0 * threshold * (n as f64 + 1.0) + 1.0;
    let mut costs = vec![vec![0.0; n]; n];
    let mut distances = vec![vec![f64::INFINITY; gt.len()]; pred.len()];
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let d = (p - g).norm();
            distances[i][j] = d;
            if d <= threshold {
                costs[i][j] = d - bonus;
            }
        }
    }
    let assignment = assignment::solve(&costs);
    let pairs = assignment
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < pred.len() && j < gt.len() && distances[i][j] <= threshold)
        .map(|(i, &j)| MatchedPair { pred: i, gt: j, distance: distances[i][j] })
        .collect();
    Ok(CornerMatching { pairs, threshold })
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerMetrics {
    pub cp: f64,
    pub cr: f64,
    pub cf1: f64,
    pub aco: f64,
}

pub fn corner_metrics(matching: &CornerMatching, pred_count: usize, gt_count: usize) -> CornerMetrics {
    let matched = matching.len();
    let cp = percent(matched, pred_count);
    let cr = percent(matched, gt_count);
    let aco = if matched == 0 { 0.0 } else { matching.total_distance() / matched as f64 };
    CornerMetrics { cp, cr, cf1: f1(cp, cr), aco }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeMetrics {
    pub ep: f64,
    pub er: f64,
    pub ef1: f64,
    /// Indices into the predicted wire list that hit a ground-truth wire.
    #[serde(skip)]
    pub true_positive_pred: Vec<usize>,
    /// Indices into the ground-truth wire list that were credited.
    #[serde(skip)]
    pub credited_gt: Vec<usize>,
}

/// A predicted wire counts when both ends are matched and their partners
/// form a ground-truth wire; each ground-truth wire is credited once.
pub fn edge_metrics(
    pred_wires: &[(usize, usize)],
    gt_wires: &[(usize, usize)],
    matching: &CornerMatching,
    pred_count: usize,
) -> EdgeMetrics {
    let partner = matching.pred_to_gt(pred_count);
    let gt_index: std::collections::HashMap<(usize, usize), usize> =
        gt_wires.iter().enumerate().map(|(k, &(a, b))| ((a.min(b), a.max(b)), k)).collect();
    let mut credited = HashSet::new();
    let mut true_positive_pred = Vec::new();
    for (k, &(a, b)) in pred_wires.iter().enumerate() {
        let (Some(ga), Some(gb)) = (partner[a], partner[b]) else {
            continue;
        };
        if let Some(&g) = gt_index.get(&(ga.min(gb), ga.max(gb))) {
            if credited.insert(g) {
                true_positive_pred.push(k);
            }
        }
    }
    let tp = true_positive_pred.len();
    let ep = percent(tp, pred_wires.len());
    let er = percent(tp, gt_wires.len());
    let mut credited_gt: Vec<usize> = credited.into_iter().collect();
    credited_gt.sort_unstable();
    EdgeMetrics { ep, er, ef1: f1(ep, er), true_positive_pred, credited_gt }
}

pub fn wireframe_edit_distance(pred: &Wireframe, gt: &Wireframe, matching: &CornerMatching) -> f64 {
    let edges = edge_metrics(&pred.wires, &gt.wires, matching, pred.corners.len());
    let tp_pred: HashSet<usize> = edges.true_positive_pred.iter().copied().collect();
    let hit_gt: HashSet<usize> = edges.credited_gt.iter().copied().collect();

    let moves = matching.total_distance();
    let deletions: f64 = (0..gt.wires.len())
        .filter(|k| !hit_gt.contains(k))
        .map(|k| gt.wire_length(gt.wires[k]))
        .sum();
    let insertions: f64 = (0..pred.wires.len())
        .filter(|k| !tp_pred.contains(k))
        .map(|k| pred.wire_length(pred.wires[k]))
        .sum();
    let numerator = moves + deletions + insertions;
    let total = gt.total_wire_length();
    if total > 0.0 {
        numerator / total
    } else if pred.wires.is_empty() {
        0.0
    } else {
        numerator
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchDiagnostics {
    pub pred_corners: usize,
    pub gt_corners: usize,
    pub matched_corners: usize,
    pub pred_wires: usize,
    pub gt_wires: usize,
    pub matched_wires: usize,
}

/// The eight wireframe metrics for one prediction/ground-truth pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub wed: f64,
    pub aco: f64,
    pub cp: f64,
    pub cr: f64,
    pub cf1: f64,
    pub ep: f64,
    pub er: f64,
    pub ef1: f64,
    pub diagnostics: MatchDiagnostics,
}

impl EvalReport {
    /// The metric values in report order: wed, aco, cp, cr, cf1, ep, er, ef1.
    pub fn values(&self) -> [f64; 8] {
        [self.wed, self.aco, self.cp, self.cr, self.cf1, self.ep, self.er, self.ef1]
    }

    pub const KEYS: [&'static str; 8] = ["wed", "aco", "cp", "cr", "cf1", "ep", "er", "ef1"];
}

pub fn evaluate(pred: &Wireframe, gt: &Wireframe, threshold: f64) -> Result<EvalReport> {
    let matching = match_corners(&pred.corners, &gt.corners, threshold)?;
    let corners = corner_metrics(&matching, pred.corners.len(), gt.corners.len());
    let edges = edge_metrics(&pred.wires, &gt.wires, &matching, pred.corners.len());
    let wed = wireframe_edit_distance(pred, gt, &matching);
    Ok(EvalReport {
        wed,
        aco: corners.aco,
        cp: corners.cp,
        cr: corners.cr,
        cf1: corners.cf1,
        ep: edges.ep,
        er: edges.er,
        ef1: edges.ef1,
        diagnostics: MatchDiagnostics {
            pred_corners: pred.corners.len(),
            gt_corners: gt.corners.len(),
            matched_corners: matching.len(),
            pred_wires: pred.wires.len(),
            gt_wires: gt.wires.len(),
            matched_wires: edges.true_positive_pred.len(),
        },
    })
}
