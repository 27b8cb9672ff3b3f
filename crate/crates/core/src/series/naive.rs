use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaiveForecast {
    pub values: Vec<f64>,
    /// Season actually used.
    pub season: usize,
    /// True when the history was shorter than the requested season and the
    /// forecast fell back to last-value carry-forward.
    pub fallback: bool,
}

/// Repeats the most recent same-phase observation.
///
/// Step `h` (1-based) takes `history[T - season + (h - 1) % season]`. Missing
/// (non-finite) history entries are skipped by stepping back whole seasons.
pub fn seasonal_naive(history: &[f64], season: usize, horizon: usize) -> NaiveForecast {
    let n = history.len();
    let (season, fallback) = if season >= 1 && n >= season { (season, false) } else { (1, true) };
    let mut values = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let mut idx = n as isize - season as isize + (h % season) as isize;
        while idx >= 0 && !history[idx as usize].is_finite() {
            idx -= season as isize;
        }
        let v = if idx >= 0 {
            history[idx as usize]
        } else {
            history.iter().rev().copied().find(|v| v.is_finite()).unwrap_or(f64::NAN)
        };
        values.push(v);
    }
    NaiveForecast { values, season, fallback }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent phase lookup: walk back from the end to the latest index
    /// with the same phase as the target step.
    fn phase_oracle(history: &[f64], season: usize, horizon: usize) -> Vec<f64> {
        let n = history.len();
        (0..horizon)
            .map(|h| {
                let target = n + h;
                (0..n).rev().find(|&i| (target - i) % season == 0).map(|i| history[i]).unwrap()
            })
            .collect()
    }

    #[test]
    fn periodic_repetition() {
        let f = seasonal_naive(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0], 3, 4);
        assert_eq!(f.values, vec![1.0, 2.0, 3.0, 1.0]);
        assert!(!f.fallback);
    }

    #[test]
    fn carry_forward() {
        assert_eq!(seasonal_naive(&[5.0], 1, 3).values, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn index_formula_matches_oracle() {
        let hist = [1.0, 2.0, 3.0, 4.0];
        let f = seasonal_naive(&hist, 2, 2);
        assert_eq!(f.values, vec![3.0, 4.0]);
        assert_eq!(f.values, phase_oracle(&hist, 2, 2));
    }

    #[test]
    fn short_history_falls_back() {
        let f = seasonal_naive(&[1.0, 2.0], 24, 3);
        assert!(f.fallback);
        assert_eq!(f.season, 1);
        assert_eq!(f.values, vec![2.0; 3]);
    }

    #[test]
    fn skips_missing_same_phase() {
        let f = seasonal_naive(&[1.0, 2.0, 3.0, f64::NAN], 2, 2);
        assert_eq!(f.values, vec![3.0, 2.0]);
    }

    proptest! {
        #[test]
        fn output_is_periodic(
            hist in prop::collection::vec(-100.0f64..100.0, 1..200),
            season in 1usize..30,
            horizon in 1usize..120,
        ) {
            prop_assume!(hist.len() >= season);
            let f = seasonal_naive(&hist, season, horizon);
            for h in season..horizon {
                prop_assert_eq!(f.values[h], f.values[h - season]);
            }
            prop_assert_eq!(f.values, phase_oracle(&hist, season, horizon));
        }
    }
}
