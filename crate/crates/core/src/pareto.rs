//! Bi-objective Pareto utilities under joint maximization.

use serde::{Deserialize, Serialize};

/// A pair of objective values, both to be maximized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub f1: f64,
    pub f2: f64,
}

impl ObjectivePoint {
    pub const fn new(f1: f64, f2: f64) -> Self {
        Self { f1, f2 }
    }

    /// `self` is at least as good in both objectives and strictly better in one.
    pub fn dominates(&self, other: &Self) -> bool {
        self.f1 >= other.f1 && self.f2 >= other.f2 && (self.f1 > other.f1 || self.f2 > other.f2)
    }

    pub fn is_finite(&self) -> bool {
        self.f1.is_finite() && self.f2.is_finite()
    }
}

impl From<(f64, f64)> for ObjectivePoint {
    fn from((f1, f2): (f64, f64)) -> Self {
        Self { f1, f2 }
    }
}

/// Indices of the maximal points, in ascending index order. Exact
/// duplicates of a maximal point are all kept.
pub fn nondominated(points: &[ObjectivePoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pb.f1.total_cmp(&pa.f1).then(pb.f2.total_cmp(&pa.f2)).then(a.cmp(&b))
    });

    let mut keep = Vec::new();
    // Best f2 among points with strictly larger f1 than the current group.
    let mut best_f2 = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let f1 = points[order[i]].f1;
        let group_top = points[order[i]].f2;
        let mut j = i;
        while j < order.len() && points[order[j]].f1 == f1 {
            let p = &points[order[j]];
            if p.f2 == group_top && p.f2 > best_f2 {
                keep.push(order[j]);
            }
            j += 1;
        }
        best_f2 = best_f2.max(group_top);
        i = j;
    }
    keep.sort_unstable();
    keep
}

/// Splits points into successive nondominated layers.
pub fn nondominated_layers(points: &[ObjectivePoint]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut layers = Vec::new();
    while !remaining.is_empty() {
        let sub: Vec<ObjectivePoint> = remaining.iter().map(|&i| points[i]).collect();
        let front = nondominated(&sub);
        let layer: Vec<usize> = front.iter().map(|&k| remaining[k]).collect();
        let mut in_front = vec![false; remaining.len()];
        for &k in &front {
            in_front[k] = true;
        }
        remaining = remaining
            .into_iter()
            .zip(in_front)
            .filter_map(|(i, f)| (!f).then_some(i))
            .collect();
        layers.push(layer);
    }
    layers
}

/// Area of the union of boxes `[ref, p]`. Points at or below the
/// reference in either coordinate add nothing.
pub fn hypervolume_2d(points: &[ObjectivePoint], reference: ObjectivePoint) -> f64 {
    let mut pts: Vec<ObjectivePoint> = points
        .iter()
        .filter(|p| p.f1 > reference.f1 && p.f2 > reference.f2)
        .copied()
        .collect();
    pts.sort_by(|a, b| b.f1.total_cmp(&a.f1).then(b.f2.total_cmp(&a.f2)));
    let mut area = 0.0;
    let mut ceiling = reference.f2;
    for p in pts {
        if p.f2 > ceiling {
            area += (p.f1 - reference.f1) * (p.f2 - ceiling);
            ceiling = p.f2;
        }
    }
    area
}

/// Greedy hypervolume-maximizing selection of `min(q, n)` indices.
/// Each step takes the largest marginal gain; ties go to the lowest index.
pub fn greedy_hv_subset(points: &[ObjectivePoint], reference: ObjectivePoint, q: usize) -> Vec<usize> {
    let target = q.min(points.len());
    let mut selected: Vec<usize> = Vec::with_capacity(target);
    let mut chosen = vec![false; points.len()];
    let mut current: Vec<ObjectivePoint> = Vec::with_capacity(target + 1);
    while selected.len() < target {
        let base = hypervolume_2d(&current, reference);
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if chosen[i] {
                continue;
            }
            current.push(*p);
            let gain = hypervolume_2d(&current, reference) - base;
            current.pop();
            if best.map_or(true, |(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, _) = best.expect("target never exceeds the number of points");
        chosen[i] = true;
        selected.push(i);
        current.push(points[i]);
    }
    selected
}

/// A nondominated set sorted by ascending `f1` (hence descending `f2`),
/// together with its hypervolume reference point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    points: Vec<ObjectivePoint>,
    reference: ObjectivePoint,
}

impl ParetoFront {
    /// Builds the front of an arbitrary point set.
    pub fn from_points(points: &[ObjectivePoint], reference: ObjectivePoint) -> Self {
        let mut front: Vec<ObjectivePoint> = nondominated(points).into_iter().map(|i| points[i]).collect();
        front.sort_by(|a, b| a.f1.total_cmp(&b.f1).then(b.f2.total_cmp(&a.f2)));
        front.dedup();
        Self {
            points: front,
            reference,
        }
    }

    pub fn empty(reference: ObjectivePoint) -> Self {
        Self {
            points: Vec::new(),
            reference,
        }
    }

    pub fn points(&self) -> &[ObjectivePoint] {
        &self.points
    }

    pub fn reference(&self) -> ObjectivePoint {
        self.reference
    }

    pub fn hypervolume(&self) -> f64 {
        hypervolume_2d(&self.points, self.reference)
    }

    pub fn with_point(&self, p: ObjectivePoint) -> Self {
        let mut pts = self.points.clone();
        pts.push(p);
        Self::from_points(&pts, self.reference)
    }
}
