use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K_DISPLAY: usize = 2;
pub const MAX_K_DISPLAY: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    /// Highest scores first.
    pub top: Vec<usize>,
    /// Lowest scores first.
    pub bottom: Vec<usize>,
}

/// Top-k and bottom-k example ids. Ties go to the lower example id.
pub fn rank_points(scores: &[f64], k: usize) -> Result<Ranking> {
    let cap = MAX_K_DISPLAY.min(scores.len());
    if k == 0 || k > cap {
        return Err(Error::Range(format!("k = {k} outside 1..={cap}")));
    }
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    ids.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let top = ids[..k].to_vec();
    ids.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let bottom = ids[..k].to_vec();
    Ok(Ranking { top, bottom })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_prefer_lower_id() {
        let r = rank_points(&[0.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(r.top, vec![0]);
        assert_eq!(r.bottom, vec![0]);
    }

    #[test]
    fn orders_both_ends() {
        let r = rank_points(&[0.3, -2.0, 5.0, 0.3, 1.0], 2).unwrap();
        assert_eq!(r.top, vec![2, 4]);
        assert_eq!(r.bottom, vec![1, 0]);
    }

    #[test]
    fn k_bounds() {
        let scores = vec![0.0; 20];
        assert!(rank_points(&scores, 10).is_ok());
        assert!(matches!(rank_points(&scores, 11), Err(Error::Range(_))));
        assert!(matches!(rank_points(&scores, 0), Err(Error::Range(_))));
        assert!(matches!(rank_points(&[1.0, 2.0], 3), Err(Error::Range(_))));
    }
}
