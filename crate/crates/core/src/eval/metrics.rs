use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// gain = grade
    #[default]
    Linear,
    /// gain = 2^grade - 1
    Exponential,
}

impl Gain {
    fn of(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// nDCG at `cutoff` with `log2(rank + 1)` discounts. Zero when no document
/// has a positive grade.
pub fn ndcg_at<D: Eq + Hash>(ranking: &[D], grades: &HashMap<D, u32>, cutoff: usize, gain: Gain) -> f64 {
    assert!(cutoff >= 1, "nDCG cutoff must be at least 1");
    let dcg: f64 = ranking
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(i, d)| gain.of(grades.get(d).copied().unwrap_or(0)) / discount(i + 1))
        .sum();
    let mut ideal: Vec<u32> = grades.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(i, &g)| gain.of(g) / discount(i + 1))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Fraction of relevant documents (grade ≥ `rel_threshold`) found in the top
/// `cutoff`. `None` when the query has no relevant documents.
pub fn recall_at<D: Eq + Hash>(
    ranking: &[D],
    grades: &HashMap<D, u32>,
    cutoff: usize,
    rel_threshold: u32,
) -> Option<f64> {
    assert!(cutoff >= 1, "recall cutoff must be at least 1");
    let relevant = grades.values().filter(|&&g| g >= rel_threshold).count();
    if relevant == 0 {
        return None;
    }
    let found = ranking
        .iter()
        .take(cutoff)
        .filter(|d| grades.get(d).is_some_and(|&g| g >= rel_threshold))
        .count();
    Some(found as f64 / relevant as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Ndcg(usize),
    Recall(usize),
}

impl Metric {
    /// Parses `ndcg@10`, `recall@50`, or `recall@c` (with `c` = `budget`).
    pub fn parse(s: &str, budget: Option<usize>) -> Result<Self, EvalError> {
        let bad = || EvalError::Metric(s.to_string());
        let (name, cut) = s.trim().split_once('@').ok_or_else(bad)?;
        let cutoff = match cut {
            "c" => budget.ok_or_else(|| EvalError::Metric(format!("{s}: cutoff `c` needs a budget")))?,
            n => n.parse().map_err(|_| bad())?,
        };
        if cutoff == 0 {
            return Err(bad());
        }
        match name.to_ascii_lowercase().as_str() {
            "ndcg" => Ok(Metric::Ndcg(cutoff)),
            "recall" => Ok(Metric::Recall(cutoff)),
            _ => Err(bad()),
        }
    }

    pub fn parse_list(s: &str, budget: Option<usize>) -> Result<Vec<Self>, EvalError> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| Metric::parse(p, budget))
            .collect()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Ndcg(k) => write!(f, "ndcg@{k}"),
            Metric::Recall(k) => write!(f, "recall@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::parse(s, None)
    }
}
