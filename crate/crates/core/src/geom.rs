//! Axis-aligned boxes in controller input space.

use serde::{Deserialize, Serialize};

/// An axis-aligned hyperrectangle `[lows[i], highs[i]]` in any dimension.
///
/// Most of the library works with closed boxes; the half-open ownership
/// convention for partition cells is applied by the tree queries, not here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lows: Vec<f64>,
    pub highs: Vec<f64>,
}

impl Rect {
    pub fn new(lows: Vec<f64>, highs: Vec<f64>) -> Self {
        assert_eq!(lows.len(), highs.len(), "bound vectors must match");
        Rect { lows, highs }
    }

    pub fn dim(&self) -> usize {
        self.lows.len()
    }

    pub fn width(&self, d: usize) -> f64 {
        self.highs[d] - self.lows[d]
    }

    pub fn midpoint(&self, d: usize) -> f64 {
        0.5 * (self.lows[d] + self.highs[d])
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim()).map(|d| self.midpoint(d)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    /// Index of the widest dimension (lowest index wins ties).
    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        for d in 1..self.dim() {
            if self.width(d) > self.width(best) {
                best = d;
            }
        }
        best
    }

    /// Closed-box membership.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(d, &v)| v >= self.lows[d] && v <= self.highs[d])
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        (0..self.dim()).all(|d| other.lows[d] >= self.lows[d] && other.highs[d] <= self.highs[d])
    }

    /// Closed intersection, `None` when the boxes are disjoint.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let mut lows = Vec::with_capacity(self.dim());
        let mut highs = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let lo = self.lows[d].max(other.lows[d]);
            let hi = self.highs[d].min(other.highs[d]);
            if lo > hi {
                return None;
            }
            lows.push(lo);
            highs.push(hi);
        }
        Some(Rect { lows, highs })
    }

    /// Overlap test used to define the next-cell sets: the intersection must
    /// have positive width in every dimension where `query` has positive
    /// width, and may merely touch in dimensions where `query` is degenerate.
    pub fn overlaps_query(&self, query: &Rect) -> bool {
        for d in 0..self.dim() {
            let lo = self.lows[d].max(query.lows[d]);
            let hi = self.highs[d].min(query.highs[d]);
            if query.lows[d] < query.highs[d] {
                if lo >= hi {
                    return false;
                }
            } else if lo > hi {
                return false;
            }
        }
        true
    }

    /// Strictly positive-measure overlap in every dimension.
    pub fn overlaps_open(&self, other: &Rect) -> bool {
        (0..self.dim()).all(|d| {
            self.lows[d].max(other.lows[d]) < self.highs[d].min(other.highs[d])
        })
    }

    /// Corner by index: bit `d` of `idx` selects the high bound of dimension
    /// `d`, so dimension 0 varies fastest and corner 0 is all lows.
    pub fn corner(&self, idx: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                if idx >> d & 1 == 0 {
                    self.lows[d]
                } else {
                    self.highs[d]
                }
            })
            .collect()
    }

    /// Uniform sample inside the closed box.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                if self.lows[d] == self.highs[d] {
                    self.lows[d]
                } else {
                    rng.gen_range(self.lows[d]..=self.highs[d])
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_order_is_lexicographic() {
        let r = Rect::new(vec![0.0, 10.0], vec![1.0, 20.0]);
        assert_eq!(r.corner(0), vec![0.0, 10.0]);
        assert_eq!(r.corner(1), vec![1.0, 10.0]);
        assert_eq!(r.corner(2), vec![0.0, 20.0]);
        assert_eq!(r.corner(3), vec![1.0, 20.0]);
    }

    #[test]
    fn degenerate_query_counts_face_sharing() {
        let cell = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let face = Rect::new(vec![1.0, 0.2], vec![1.0, 0.8]);
        assert!(cell.overlaps_query(&face));
        // A positive-width query that merely touches the face does not count.
        let touch = Rect::new(vec![1.0, 0.2], vec![2.0, 0.8]);
        assert!(!cell.overlaps_query(&touch));
    }

    #[test]
    fn intersect_disjoint_is_none() {
        let a = Rect::new(vec![0.0], vec![1.0]);
        let b = Rect::new(vec![2.0], vec![3.0]);
        assert!(a.intersect(&b).is_none());
        assert_eq!(
            a.intersect(&Rect::new(vec![0.5], vec![4.0])),
            Some(Rect::new(vec![0.5], vec![1.0]))
        );
    }
}
