//! Derivative-free minimization: compass (pattern) search with step halving,
//! and deterministic multistart on top of it.

use crate::parallel::{map_slice, Execution};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOptions {
    pub initial_step: f64,
    /// Search stops once the step falls below this.
    pub min_step: f64,
    /// A sweep must improve by more than this to count as progress.
    pub improvement_tol: f64,
    pub max_evals: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.5,
            min_step: 1e-9,
            improvement_tol: 1e-10,
            max_evals: 2_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// False if the evaluation budget ran out first.
    pub converged: bool,
}

/// Minimizes `f` from `x0` by Hooke–Jeeves pattern search.
///
/// Each iteration polls `±step` along every coordinate. A successful poll is
/// followed by pattern moves along the net displacement for as long as they
/// keep improving. After an iteration that improves by less than
/// `improvement_tol` the step is halved; the search ends when the step drops
/// below `min_step`.
pub fn compass_search<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &SearchOptions) -> SearchResult {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1;
    let mut step = opts.initial_step;
    if x.is_empty() {
        return SearchResult { x, value: fx, evals, converged: true };
    }
    let explore = |base: &mut Vec<f64>, fbase: &mut f64, step: f64, evals: &mut usize| {
        for k in 0..base.len() {
            for dir in [1.0, -1.0] {
                let old = base[k];
                base[k] = old + dir * step;
                let trial = f(base);
                *evals += 1;
                if trial < *fbase {
                    *fbase = trial;
                    break;
                }
                base[k] = old;
            }
        }
    };
    while step >= opts.min_step {
        if evals >= opts.max_evals {
            return SearchResult { x, value: fx, evals, converged: false };
        }
        let start = fx;
        let prev = x.clone();
        explore(&mut x, &mut fx, step, &mut evals);
        if fx < start {
            let mut anchor = prev;
            loop {
                let mut probe: Vec<f64> = x.iter().zip(&anchor).map(|(a, b)| 2.0 * a - b).collect();
                let mut fp = f(&probe);
                evals += 1;
                explore(&mut probe, &mut fp, step, &mut evals);
                if fp < fx && evals < opts.max_evals {
                    anchor = std::mem::replace(&mut x, probe);
                    fx = fp;
                } else {
                    break;
                }
            }
        }
        if start - fx <= opts.improvement_tol {
            step *= 0.5;
        }
    }
    SearchResult { x, value: fx, evals, converged: true }
}

/// Result of a multistart run: every local result plus the winner.
#[derive(Clone, Debug)]
pub struct Multistart {
    pub runs: Vec<SearchResult>,
    /// Lowest value; ties go to the earliest start.
    pub best: usize,
}

impl Multistart {
    pub fn best(&self) -> &SearchResult {
        &self.runs[self.best]
    }
}

pub fn multistart<F>(f: F, starts: &[Vec<f64>], opts: &SearchOptions, exec: Execution) -> Multistart
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    assert!(!starts.is_empty(), "multistart needs at least one start");
    let runs = map_slice(starts, exec, |x0| compass_search(&f, x0, opts));
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value < runs[best].value {
            best = i;
        }
    }
    Multistart { runs, best }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.25).powi(2);
        let r = compass_search(f, &[5.0, 5.0], &SearchOptions { initial_step: 1.0, ..Default::default() });
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 0.25).abs() < 1e-6);
        assert!(r.value < 1e-12);
    }

    #[test]
    fn rosenbrock_gets_close() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = compass_search(f, &[-1.2, 1.0], &SearchOptions::default());
        assert!(r.value < 1e-6, "{}", r.value);
    }

    #[test]
    fn multistart_picks_global_and_breaks_ties_by_index() {
        let f = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + 0.1 * (x[0] - 1.0).powi(2);
        let starts = vec![vec![-2.0], vec![2.0], vec![0.5]];
        let m = multistart(f, &starts, &SearchOptions::default(), Execution::Parallel);
        assert!((m.best().x[0] - 1.0).abs() < 1e-4);
        assert!((m.runs[0].x[0] + 1.0).abs() < 0.1);

        let flat = |_: &[f64]| 0.0;
        let m = multistart(flat, &starts, &SearchOptions::default(), Execution::Sequential);
        assert_eq!(m.best, 0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum();
        let opts = SearchOptions { max_evals: 10, ..Default::default() };
        assert!(!compass_search(f, &[3.0, 3.0, 3.0], &opts).converged);
    }
}
