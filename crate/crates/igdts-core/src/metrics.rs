//! Tracking quality metrics: center location error, overlap rate and
//! per-sequence summaries.

use crate::error::{Error, Result};

/// Axis-aligned box with real-valued (sub-pixel) coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2D {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Box2D {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Euclidean distance between box centers.
pub fn center_location_error(a: &Box2D, b: &Box2D) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// Intersection-over-union of two axis-aligned boxes; disjoint pairs score 0.
pub fn overlap_rate(a: &Box2D, b: &Box2D) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    let inter = ix.max(0.0) * iy.max(0.0);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Per-frame metrics and their arithmetic means for one sequence.
///
/// The first (initialization) frame is included in the averages.
#[derive(Debug, Clone)]
pub struct SequenceReport {
    pub cle: Vec<f64>,
    pub overlap: Vec<f64>,
    pub mean_cle: f64,
    pub mean_overlap: f64,
    pub n_frames: usize,
}

impl SequenceReport {
    /// Per-frame table: header `frame,cle,overlap`, frames 1-based.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("frame,cle,overlap\n");
        for (i, (c, o)) in self.cle.iter().zip(&self.overlap).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, c, o));
        }
        out
    }

    /// Summary lines, emitted separately from the per-frame table.
    pub fn summary_csv(&self) -> String {
        format!("mean_cle,{}\nmean_overlap,{}\n", self.mean_cle, self.mean_overlap)
    }
}

/// Scores tracked boxes against ground truth, frame by frame.
///
/// Ground truth may be longer than the results (the excess is ignored with a
/// warning); it must not be shorter.
pub fn summarize(tracked: &[Box2D], truth: &[Box2D]) -> Result<SequenceReport> {
    if tracked.is_empty() {
        return Err(Error::dims("cannot summarize an empty result list".to_string()));
    }
    if truth.len() < tracked.len() {
        return Err(Error::dims(format!(
            "ground truth has {} boxes but results cover {} frames",
            truth.len(),
            tracked.len()
        )));
    }
    if truth.len() > tracked.len() {
        log::warn!(
            "ground truth has {} extra rows beyond the {} tracked frames; ignoring them",
            truth.len() - tracked.len(),
            tracked.len()
        );
    }
    let cle: Vec<f64> = tracked
        .iter()
        .zip(truth)
        .map(|(t, g)| center_location_error(t, g))
        .collect();
    let overlap: Vec<f64> = tracked
        .iter()
        .zip(truth)
        .map(|(t, g)| overlap_rate(t, g))
        .collect();
    let n = tracked.len();
    Ok(SequenceReport {
        mean_cle: cle.iter().sum::<f64>() / n as f64,
        mean_overlap: overlap.iter().sum::<f64>() / n as f64,
        cle,
        overlap,
        n_frames: n,
    })
}
