//! Dominance and fast non-dominated sorting over `(RU, PW)` costs.

use serde::{Deserialize, Serialize};

use super::model::Cost;

/// `a` is no worse on both objectives and strictly better on one.
pub fn dominates(a: &Cost, b: &Cost) -> bool {
    a.ru >= b.ru && a.pw <= b.pw && (a.ru > b.ru || a.pw < b.pw)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParetoFronts {
    /// Indices per front, best front first, ascending within a front.
    pub fronts: Vec<Vec<usize>>,
    /// 1-based front of each point.
    pub rank: Vec<usize>,
}

/// Peels fronts using per-point domination sets and domination counts.
pub fn pareto_fronts(costs: &[Cost]) -> ParetoFronts {
    let n = costs.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dom_count = vec![0usize; n];
    for p in 0..n {
        for q in 0..n {
            if dominates(&costs[p], &costs[q]) {
                dominated_by_me[p].push(q);
            } else if dominates(&costs[q], &costs[p]) {
                dom_count[p] += 1;
            }
        }
    }
    let mut rank = vec![0usize; n];
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&p| dom_count[p] == 0).collect();
    while !current.is_empty() {
        let r = fronts.len() + 1;
        let mut next = Vec::new();
        for &p in &current {
            rank[p] = r;
            for &q in &dominated_by_me[p] {
                dom_count[q] -= 1;
                if dom_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    ParetoFronts { fronts, rank }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(ru: f64, pw: f64) -> Cost {
        Cost { ru, pw }
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&c(0.7, 100.0), &c(0.6, 120.0)));
        assert!(!dominates(&c(0.7, 100.0), &c(0.7, 100.0)));
        assert!(!dominates(&c(0.7, 100.0), &c(0.8, 90.0)));
        assert!(dominates(&c(0.8, 90.0), &c(0.7, 100.0)));
        assert!(!dominates(&c(0.7, 100.0), &c(0.8, 110.0)));
        assert!(!dominates(&c(0.8, 110.0), &c(0.7, 100.0)));
    }

    #[test]
    fn single_and_chain() {
        let f = pareto_fronts(&[c(0.5, 10.0)]);
        assert_eq!(f.fronts, vec![vec![0]]);
        assert_eq!(f.rank, vec![1]);
        let f = pareto_fronts(&[c(0.1, 30.0), c(0.9, 10.0), c(0.5, 20.0)]);
        assert_eq!(f.fronts, vec![vec![1], vec![2], vec![0]]);
        assert_eq!(f.rank, vec![3, 1, 2]);
        assert!(pareto_fronts(&[]).fronts.is_empty());
    }
}
