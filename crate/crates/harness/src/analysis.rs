//! Binned performance against mean deviation.

use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub mean_performance: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedU {
    /// Populated bins only, in increasing d̄ order.
    pub bins: Vec<Bin>,
    /// Index into `bins` of the highest mean performance (first on ties).
    pub argmax: usize,
    /// Every d̄ was identical, so there is a single bin.
    pub degenerate: bool,
}

impl InvertedU {
    pub fn peak(&self) -> &Bin {
        &self.bins[self.argmax]
    }

    /// The peak is neither the lowest nor the highest populated bin.
    pub fn is_interior(&self) -> bool {
        !self.degenerate && self.argmax > 0 && self.argmax + 1 < self.bins.len()
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("d_bar_lo,d_bar_hi,mean_performance,count,argmax\n");
        for (i, b) in self.bins.iter().enumerate() {
            s.push_str(&format!(
                "{:.4},{:.4},{:.4},{},{}\n",
                b.lo,
                b.hi,
                b.mean_performance,
                b.count,
                if i == self.argmax { "*" } else { "" }
            ));
        }
        s
    }
}

/// Bins `(d̄, performance)` pairs into `bins` equal-width bins over the
/// observed d̄ range. Empty bins are dropped.
pub fn inverted_u(points: &[(f64, f64)], bins: usize) -> Result<InvertedU, HarnessError> {
    if bins == 0 {
        return Err(HarnessError::Analysis("bin count must be positive".into()));
    }
    if points.iter().any(|(d, p)| !d.is_finite() || !p.is_finite()) {
        return Err(HarnessError::Analysis("non-finite point".into()));
    }
    let first = points.first().ok_or_else(|| HarnessError::Analysis("no round records to analyse".into()))?;
    let lo = points.iter().map(|p| p.0).fold(first.0, f64::min);
    let hi = points.iter().map(|p| p.0).fold(first.0, f64::max);
    if lo == hi {
        log::warn!("every round has d_bar = {lo}; the table has a single bin");
        let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
        return Ok(InvertedU {
            bins: vec![Bin { lo, hi, mean_performance: mean, count: points.len() }],
            argmax: 0,
            degenerate: true,
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut sums = vec![(0.0, 0usize); bins];
    for &(d, p) in points {
        let k = (((d - lo) / width) as usize).min(bins - 1);
        sums[k].0 += p;
        sums[k].1 += 1;
    }
    let table: Vec<Bin> = sums
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(k, &(sum, count))| Bin {
            lo: lo + k as f64 * width,
            hi: if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width },
            mean_performance: sum / count as f64,
            count,
        })
        .collect();
    if table.len() < 2 {
        return Err(HarnessError::Analysis("need at least two populated bins".into()));
    }
    let mut argmax = 0;
    for (i, b) in table.iter().enumerate() {
        if b.mean_performance > table[argmax].mean_performance {
            argmax = i;
        }
    }
    Ok(InvertedU { bins: table, argmax, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_quadratic_peaks_at_three() {
        let pts: Vec<(f64, f64)> = (0..=600).map(|i| i as f64 / 100.0).map(|d| (d, -(d - 3.0).powi(2) + 10.0)).collect();
        let t = inverted_u(&pts, 7).unwrap();
        let peak = t.peak();
        assert!(peak.lo <= 3.0 && 3.0 <= peak.hi, "{peak:?}");
        assert!(t.is_interior());
        assert_eq!(t.bins.iter().map(|b| b.count).sum::<usize>(), pts.len());
    }

    #[test]
    fn zero_deviation_corpus_is_one_bin() {
        let pts = vec![(0.0, 1.0), (0.0, 0.5), (0.0, 0.0)];
        let t = inverted_u(&pts, 8).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.bins.len(), 1);
        assert_eq!(t.bins[0].mean_performance, 0.5);
        assert!(!t.is_interior());
    }

    #[test]
    fn monotone_data_peaks_at_an_edge() {
        let pts: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, i as f64)).collect();
        let t = inverted_u(&pts, 5).unwrap();
        assert_eq!(t.argmax, t.bins.len() - 1);
        assert!(!t.is_interior());
    }

    #[test]
    fn rejects_empty_and_zero_bins() {
        assert!(inverted_u(&[], 4).is_err());
        assert!(inverted_u(&[(0.0, 1.0), (1.0, 0.0)], 0).is_err());
        assert!(inverted_u(&[(0.0, 1.0), (1.0, 0.0)], 1).is_err());
    }
}
