//! Per-feature histograms over fixed bin edges.

use rand::Rng;

use super::impurity::Moments;

/// `T + 1` increasing edges spanning a node's observed feature range. The
/// `T - 1` interior edges are the candidate thresholds; a point goes left
/// of threshold `edges[i]` when its value is `< edges[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEdges {
    edges: Vec<f64>,
    uniform: bool,
}

impl BinEdges {
    /// `T` equal-width bins over `[lo, hi]`; `None` for a constant feature.
    pub fn equal_width(lo: f64, hi: f64, bins: usize) -> Option<Self> {
        if !(hi > lo) || bins == 0 {
            return None;
        }
        let w = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + w * i as f64).collect();
        edges[bins] = hi;
        Some(Self {
            edges,
            uniform: true,
        })
    }

    /// `T - 1` interior edges drawn uniformly in `(lo, hi)`.
    pub fn random(lo: f64, hi: f64, bins: usize, rng: &mut impl Rng) -> Option<Self> {
        if !(hi > lo) || bins == 0 {
            return None;
        }
        let mut edges = Vec::with_capacity(bins + 1);
        edges.push(lo);
        edges.extend((1..bins).map(|_| rng.random_range(lo..hi)));
        edges.push(hi);
        edges[1..bins].sort_by(f64::total_cmp);
        Some(Self {
            edges,
            uniform: false,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Threshold value for edge index `i` in `1..T`.
    pub fn threshold(&self, i: usize) -> f64 {
        self.edges[i]
    }

    /// Bin of `x`: the number of interior edges `<= x`.
    #[inline]
    pub fn bin(&self, x: f64) -> usize {
        let t = self.n_bins();
        if self.uniform {
            let (lo, hi) = (self.edges[0], self.edges[t]);
            let raw = ((x - lo) / (hi - lo) * t as f64).floor();
            let mut b = if raw.is_nan() || raw < 0.0 {
                0
            } else {
                (raw as usize).min(t - 1)
            };
            // floating-point guard against the stored edges
            while b > 0 && x < self.edges[b] {
                b -= 1;
            }
            while b + 1 < t && x >= self.edges[b + 1] {
                b += 1;
            }
            b
        } else {
            self.edges[1..t].partition_point(|&e| e <= x)
        }
    }
}

/// Class counts (`width = K`) or count and power sums (`width = 5`) per bin.
#[derive(Debug, Clone)]
pub struct FeatureHistogram {
    pub feature: usize,
    pub edges: BinEdges,
    width: usize,
    cells: Vec<f64>,
    inserted: u64,
}

impl FeatureHistogram {
    pub fn for_classes(feature: usize, edges: BinEdges, n_classes: usize) -> Self {
        Self::with_width(feature, edges, n_classes)
    }

    pub fn for_regression(feature: usize, edges: BinEdges) -> Self {
        Self::with_width(feature, edges, 5)
    }

    fn with_width(feature: usize, edges: BinEdges, width: usize) -> Self {
        let cells = vec![0.0; edges.n_bins() * width];
        Self {
            feature,
            edges,
            width,
            cells,
            inserted: 0,
        }
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    #[inline]
    pub fn insert_class(&mut self, x: f64, label: usize) {
        let b = self.edges.bin(x);
        self.cells[b * self.width + label] += 1.0;
        self.inserted += 1;
    }

    #[inline]
    pub fn insert_value(&mut self, x: f64, y: f64) {
        let b = self.edges.bin(x);
        let c = &mut self.cells[b * 5..b * 5 + 5];
        let y2 = y * y;
        c[0] += 1.0;
        c[1] += y;
        c[2] += y2;
        c[3] += y2 * y;
        c[4] += y2 * y2;
        self.inserted += 1;
    }

    pub fn bin_cells(&self, b: usize) -> &[f64] {
        &self.cells[b * self.width..(b + 1) * self.width]
    }

    /// Cumulative class counts left of each threshold `1..T`, plus the
    /// total counts.
    pub fn class_scan(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut acc = vec![0.0; self.width];
        let mut lefts = Vec::with_capacity(self.edges.n_bins().saturating_sub(1));
        for b in 0..self.edges.n_bins() {
            if b > 0 {
                lefts.push(acc.clone());
            }
            for (a, c) in acc.iter_mut().zip(self.bin_cells(b)) {
                *a += c;
            }
        }
        (lefts, acc)
    }

    /// Cumulative moments left of each threshold `1..T`, plus the totals.
    pub fn moment_scan(&self) -> (Vec<Moments>, Moments) {
        let mut acc = Moments::default();
        let mut lefts = Vec::with_capacity(self.edges.n_bins().saturating_sub(1));
        for b in 0..self.edges.n_bins() {
            if b > 0 {
                lefts.push(acc);
            }
            let c = self.bin_cells(b);
            acc.add(&Moments {
                n: c[0],
                sum: c[1],
                sumsq: c[2],
                sum3: c[3],
                sum4: c[4],
            });
        }
        (lefts, acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn equal_width_bins_match_edges() {
        let e = BinEdges::equal_width(0.0, 1.0, 10).unwrap();
        assert_eq!(e.bin(0.0), 0);
        assert_eq!(e.bin(1.0), 9);
        assert_eq!(e.bin(0.35), 3);
        for i in 1..10 {
            let t = e.threshold(i);
            assert_eq!(e.bin(t), i);
            assert_eq!(e.bin(t - 1e-12), i - 1);
        }
        assert!(BinEdges::equal_width(2.0, 2.0, 10).is_none());
    }

    #[test]
    fn random_edges_are_sorted_and_binary_searched() {
        let mut rng = stream(1, 0);
        let e = BinEdges::random(-1.0, 1.0, 8, &mut rng).unwrap();
        assert!(e.edges().windows(2).all(|w| w[0] <= w[1]));
        for i in 1..8 {
            assert!(e.bin(e.threshold(i)) >= i);
        }
        assert_eq!(e.bin(-1.0), 0);
        assert_eq!(e.bin(1.0), 7);
    }

    #[test]
    fn scans_conserve_counts() {
        let e = BinEdges::equal_width(0.0, 4.0, 4).unwrap();
        let mut h = FeatureHistogram::for_classes(0, e, 2);
        for (x, y) in [(0.5, 0), (1.5, 1), (2.5, 1), (3.5, 0), (3.9, 1)] {
            h.insert_class(x, y);
        }
        let (lefts, total) = h.class_scan();
        assert_eq!(total, vec![2.0, 3.0]);
        assert_eq!(lefts, vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        assert_eq!(h.inserted(), 5);
    }
}
