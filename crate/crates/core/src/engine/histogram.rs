use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BIN_COUNT: usize = 20;

/// Binned score distribution with the example ids in each bin.
///
/// Bins are `[e_j, e_{j+1})` except the last, which is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

/// Uniform edges spanning all given score sets. Degenerate spans (all values
/// equal) collapse to one unit-wide bin centred on the value.
pub fn shared_edges(score_sets: &[&[f64]], bin_count: usize) -> Result<Vec<f64>> {
    if bin_count == 0 {
        return Err(Error::Precondition("bin_count must be at least 1".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for set in score_sets {
        for &s in *set {
            if !s.is_finite() {
                return Err(Error::Precondition(format!("non-finite score {s}")));
            }
            lo = lo.min(s);
            hi = hi.max(s);
            any = true;
        }
    }
    if !any {
        return Err(Error::Precondition("histogram of no scores".into()));
    }
    if lo == hi {
        return Ok(vec![lo - 0.5, lo + 0.5]);
    }
    let width = (hi - lo) / bin_count as f64;
    let mut edges: Vec<f64> = (0..bin_count).map(|j| lo + j as f64 * width).collect();
    edges.push(hi);
    Ok(edges)
}

/// Histogram over `[min, max]`, or over `edges` when supplied.
pub fn histogram(scores: &[f64], bin_count: usize, edges: Option<&[f64]>) -> Result<ScoreHistogram> {
    if scores.is_empty() {
        return Err(Error::Precondition("histogram of no scores".into()));
    }
    let bin_edges = match edges {
        Some(e) => {
            if e.len() < 2 || e.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                return Err(Error::Precondition(
                    "shared edges must be strictly ascending with at least two entries".into(),
                ));
            }
            e.to_vec()
        }
        None => shared_edges(&[scores], bin_count)?,
    };
    let bins = bin_edges.len() - 1;
    let (lo, hi) = (bin_edges[0], bin_edges[bins]);
    let interior = &bin_edges[1..bins];
    let mut counts = vec![0usize; bins];
    let mut members = vec![Vec::new(); bins];
    for (id, &s) in scores.iter().enumerate() {
        if !(s >= lo && s <= hi) {
            return Err(Error::Range(format!(
                "score {s} of example {id} lies outside [{lo}, {hi}]"
            )));
        }
        let bin = interior.partition_point(|&e| e <= s);
        counts[bin] += 1;
        members[bin].push(id);
    }
    Ok(ScoreHistogram {
        bin_edges,
        counts,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_closed_last_bin() {
        let h = histogram(&[0.0, 0.5, 1.0], 2, None).unwrap();
        assert_eq!(h.bin_edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(h.counts, vec![1, 2]);
        assert_eq!(h.members, vec![vec![0], vec![1, 2]]);
    }

    #[test]
    fn constant_scores_make_one_centred_bin() {
        let h = histogram(&[2.0, 2.0, 2.0], 20, None).unwrap();
        assert_eq!(h.bin_edges, vec![1.5, 2.5]);
        assert_eq!(h.counts, vec![3]);
    }

    #[test]
    fn shared_edges_cover_both_sides() {
        let a = [-1.0, 0.0, 0.2];
        let b = [0.5, 3.0];
        let edges = shared_edges(&[&a, &b], 4).unwrap();
        let ha = histogram(&a, 4, Some(&edges)).unwrap();
        let hb = histogram(&b, 4, Some(&edges)).unwrap();
        assert_eq!(ha.bin_edges, hb.bin_edges);
        assert_eq!(ha.counts.iter().sum::<usize>(), 3);
        assert_eq!(hb.counts.iter().sum::<usize>(), 2);
        assert_eq!(*edges.last().unwrap(), 3.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(histogram(&[], 3, None), Err(Error::Precondition(_))));
        assert!(matches!(histogram(&[1.0], 0, None), Err(Error::Precondition(_))));
        assert!(matches!(histogram(&[5.0], 1, Some(&[0.0, 1.0])), Err(Error::Range(_))));
        assert!(histogram(&[0.5], 1, Some(&[1.0, 0.0])).is_err());
    }
}
