use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores for one test query: per checkpoint and median-aggregated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceScores {
    pub method_id: String,
    pub per_checkpoint: BTreeMap<u32, Vec<f64>>,
    pub aggregated: Vec<f64>,
}

impl InfluenceScores {
    pub fn from_checkpoints(method_id: &str, per_checkpoint: BTreeMap<u32, Vec<f64>>) -> Result<Self> {
        let vectors: Vec<&[f64]> = per_checkpoint.values().map(Vec::as_slice).collect();
        let aggregated = aggregate_median(&vectors)?;
        Ok(InfluenceScores {
            method_id: method_id.to_string(),
            per_checkpoint,
            aggregated,
        })
    }
}

/// Element-wise median across checkpoints. Even counts take the mean of the
/// two middle values.
pub fn aggregate_median<V: AsRef<[f64]>>(per_checkpoint: &[V]) -> Result<Vec<f64>> {
    let first = per_checkpoint
        .first()
        .ok_or_else(|| Error::Precondition("median of zero checkpoints".into()))?;
    let n = first.as_ref().len();
    if let Some(bad) = per_checkpoint.iter().find(|v| v.as_ref().len() != n) {
        return Err(Error::Shape(format!(
            "checkpoint score vectors differ in length ({n} vs {})",
            bad.as_ref().len()
        )));
    }
    let m = per_checkpoint.len();
    let mut column = Vec::with_capacity(m);
    Ok((0..n)
        .map(|k| {
            column.clear();
            column.extend(per_checkpoint.iter().map(|v| v.as_ref()[k]));
            column.sort_by(f64::total_cmp);
            if m % 2 == 1 {
                column[m / 2]
            } else {
                (column[m / 2 - 1] + column[m / 2]) / 2.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_checkpoint_is_identity() {
        let v = vec![3.0, -1.0, 0.25];
        assert_eq!(aggregate_median(std::slice::from_ref(&v)).unwrap(), v);
    }

    #[test]
    fn odd_and_even_counts() {
        let odd = aggregate_median(&[vec![-1.0], vec![5.0], vec![2.0]]).unwrap();
        assert_eq!(odd, vec![2.0]);
        let even = aggregate_median(&[vec![1.0], vec![2.0], vec![10.0], vec![100.0]]).unwrap();
        assert_eq!(even, vec![6.0]);
    }

    #[test]
    fn empty_and_ragged_inputs() {
        let none: [Vec<f64>; 0] = [];
        assert!(matches!(aggregate_median(&none), Err(Error::Precondition(_))));
        assert!(matches!(
            aggregate_median(&[vec![1.0], vec![1.0, 2.0]]),
            Err(Error::Shape(_))
        ));
    }
}
