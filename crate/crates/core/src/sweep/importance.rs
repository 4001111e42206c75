//! Hyperparameter importance as the range of per-level mean accuracies.

use std::collections::BTreeMap;

use super::config::SweepConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LevelMean {
    pub level: String,
    pub mean_accuracy: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Importance {
    pub hyperparameter: &'static str,
    /// Largest minus smallest level mean; 0 for a single level.
    pub score: f64,
    pub levels: Vec<LevelMean>,
}

fn level_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        _ => a.cmp(b),
    }
}

fn groups(rows: &[(SweepConfig, f64)], col: usize) -> BTreeMap<String, Vec<f64>> {
    let mut g: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (c, acc) in rows {
        g.entry(c.columns()[col].1.clone()).or_default().push(*acc);
    }
    g
}

/// Scores every grid column by the spread of its level means, highest
/// first, ties broken by name.
pub fn rank_importance(rows: &[(SweepConfig, f64)]) -> Result<Vec<Importance>> {
    if rows.is_empty() {
        return Err(Error::invalid("no results to rank"));
    }
    let names = rows[0].0.columns().map(|(k, _)| k);
    let mut out = Vec::new();
    for (col, name) in names.into_iter().enumerate() {
        let mut levels: Vec<LevelMean> = groups(rows, col)
            .into_iter()
            .map(|(level, accs)| {
                // sum in a fixed order so the result is independent of row order
                let mut sorted = accs.clone();
                sorted.sort_by(f64::total_cmp);
                LevelMean {
                    level,
                    mean_accuracy: sorted.iter().sum::<f64>() / sorted.len() as f64,
                    count: sorted.len(),
                }
            })
            .collect();
        levels.sort_by(|a, b| level_order(&a.level, &b.level));
        let max = levels
            .iter()
            .map(|l| l.mean_accuracy)
            .fold(f64::MIN, f64::max);
        let min = levels
            .iter()
            .map(|l| l.mean_accuracy)
            .fold(f64::MAX, f64::min);
        out.push(Importance {
            hyperparameter: name,
            score: if levels.len() > 1 { max - min } else { 0.0 },
            levels,
        });
    }
    if out.iter().all(|i| i.levels.len() < 2) {
        return Err(Error::invalid(
            "all configurations are identical; nothing to rank",
        ));
    }
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.hyperparameter.cmp(b.hyperparameter))
    });
    Ok(out)
}

/// Pairs of columns whose levels determine each other one-to-one across the
/// grid, so their effects cannot be separated.
pub fn aliased_pairs(configs: &[SweepConfig]) -> Vec<(&'static str, &'static str)> {
    if configs.is_empty() {
        return Vec::new();
    }
    let names = configs[0].columns().map(|(k, _)| k);
    let cols: Vec<Vec<String>> = configs
        .iter()
        .map(|c| c.columns().map(|(_, v)| v).to_vec())
        .collect();
    let determines = |a: usize, b: usize| {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        cols.iter()
            .all(|row| *map.entry(row[a].as_str()).or_insert(row[b].as_str()) == row[b])
    };
    let distinct = |a: usize| {
        let mut v: Vec<&str> = cols.iter().map(|r| r[a].as_str()).collect();
        v.sort();
        v.dedup();
        v.len()
    };
    let mut out = Vec::new();
    for a in 0..names.len() {
        for b in a + 1..names.len() {
            if distinct(a) > 1 && determines(a, b) && determines(b, a) {
                out.push((names[a], names[b]));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::grid::default_grid;
    use proptest::prelude::*;

    const ACC: [f64; 9] = [
        42.18, 51.11, 52.27, 53.19, 51.17, 56.25, 53.12, 56.25, 57.81,
    ];

    fn table() -> Vec<(SweepConfig, f64)> {
        default_grid().into_iter().zip(ACC).collect()
    }

    fn find<'a>(r: &'a [Importance], name: &str) -> &'a Importance {
        r.iter().find(|i| i.hyperparameter == name).unwrap()
    }

    #[test]
    fn published_accuracies() {
        let r = rank_importance(&table()).unwrap();
        let act = find(&r, "ActFun");
        let mean = |lv: &str| {
            act.levels
                .iter()
                .find(|l| l.level == lv)
                .unwrap()
                .mean_accuracy
        };
        // independent arithmetic over the table column
        let sig = (42.18 + 51.11 + 52.27 + 53.19 + 51.17) / 5.0;
        let tanh = (56.25 + 53.12 + 56.25 + 57.81) / 4.0;
        assert!((mean("sigmoid") - sig).abs() < 1e-12);
        assert!((mean("tanh") - tanh).abs() < 1e-12);
        assert!((act.score - (tanh - sig)).abs() < 1e-12);
        let lyrs = find(&r, "Lyrs");
        let lv: Vec<(&str, f64)> = lyrs
            .levels
            .iter()
            .map(|l| (l.level.as_str(), l.mean_accuracy))
            .collect();
        assert_eq!(lv[0].0, "1");
        assert!((lv[0].1 - (51.11 + 52.27 + 53.19 + 51.17) / 4.0).abs() < 1e-12);
        assert!((lv[1].1 - (42.18 + 56.25 + 53.12 + 56.25) / 4.0).abs() < 1e-12);
        assert!((lv[2].1 - 57.81).abs() < 1e-12);
        assert_eq!(r[0].hyperparameter, "BchSz");
    }

    #[test]
    fn single_level_scores_zero_and_ranks_last() {
        let mut rows = table();
        let first = rows[0].0.seq_len;
        for (c, _) in &mut rows {
            c.seq_len = first;
        }
        let r = rank_importance(&rows).unwrap();
        assert_eq!(find(&r, "SqLn").score, 0.0);
        assert_eq!(r.last().unwrap().score, 0.0);
    }

    #[test]
    fn identical_configs_rejected() {
        let c = default_grid()[0].clone();
        assert!(rank_importance(&[(c.clone(), 50.0), (c, 60.0)]).is_err());
        assert!(rank_importance(&[]).is_err());
    }

    #[test]
    fn dropout_aliases_activation() {
        let pairs = aliased_pairs(&default_grid());
        assert!(pairs.contains(&("ActFun", "DropOut")), "{pairs:?}");
    }

    proptest! {
        #[test]
        fn order_and_shift_invariant(perm in Just((0..9).collect::<Vec<usize>>()).prop_shuffle(), shift in -40.0f64..40.0) {
            let base = rank_importance(&table()).unwrap();
            let t = table();
            let shuffled: Vec<_> = perm.iter().map(|&i| (t[i].0.clone(), t[i].1 + shift)).collect();
            let r = rank_importance(&shuffled).unwrap();
            for a in &base {
                let b = find(&r, a.hyperparameter);
                prop_assert!((a.score - b.score).abs() < 1e-9);
            }
        }
    }
}
