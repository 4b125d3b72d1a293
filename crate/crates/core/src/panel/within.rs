//! Group demeaning for one or two fixed-effect dimensions.

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

/// One fixed-effect dimension: the level of every observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeDimension {
    pub ids: Vec<usize>,
    pub levels: usize,
}

impl FeDimension {
    /// Dense level ids from arbitrary keys, numbered in sorted key order.
    pub fn from_keys<K: Ord + Clone>(keys: &[K]) -> Self {
        let mut sorted: Vec<K> = keys.to_vec();
        sorted.sort();
        sorted.dedup();
        let ids = keys
            .iter()
            .map(|k| sorted.binary_search(k).expect("key present"))
            .collect();
        FeDimension {
            ids,
            levels: sorted.len(),
        }
    }

    /// Subtract level means in place; returns the largest mean removed.
    fn demean(&self, col: &mut [f64], sums: &mut Vec<f64>, counts: &mut Vec<f64>) -> f64 {
        sums.clear();
        sums.resize(self.levels, 0.0);
        counts.clear();
        counts.resize(self.levels, 0.0);
        for (v, &g) in col.iter().zip(&self.ids) {
            sums[g] += v;
            counts[g] += 1.0;
        }
        let mut max_change = 0.0f64;
        for (s, c) in sums.iter_mut().zip(counts.iter()) {
            if *c > 0.0 {
                *s /= c;
                max_change = max_change.max(s.abs());
            }
        }
        for (v, &g) in col.iter_mut().zip(&self.ids) {
            *v -= sums[g];
        }
        max_change
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemeanOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for DemeanOptions {
    fn default() -> Self {
        DemeanOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

/// Project `col` off the fixed effects in `dims`.
///
/// One dimension is an exact single pass. Two or more dimensions alternate
/// demeaning until a full sweep removes less than `tolerance` in absolute
/// terms. Returns the number of sweeps.
pub fn demean_column(col: &mut [f64], dims: &[FeDimension], opts: DemeanOptions) -> Result<usize> {
    for d in dims {
        assert_eq!(
            d.ids.len(),
            col.len(),
            "fixed-effect ids must cover every observation"
        );
    }
    let mut sums = Vec::new();
    let mut counts = Vec::new();
    match dims {
        [] => Ok(0),
        [single] => {
            single.demean(col, &mut sums, &mut counts);
            Ok(1)
        }
        _ => {
            let mut last = f64::INFINITY;
            for sweep in 1..=opts.max_sweeps {
                last = dims
                    .iter()
                    .map(|d| d.demean(col, &mut sums, &mut counts))
                    .fold(0.0, f64::max);
                if last < opts.tolerance {
                    return Ok(sweep);
                }
            }
            Err(Error::NoConvergence {
                sweeps: opts.max_sweeps,
                last_change: last,
            })
        }
    }
}

/// Number of connected components of the bipartite graph linking levels of
/// two dimensions that share an observation.
pub fn connected_components(a: &FeDimension, b: &FeDimension) -> usize {
    let n = a.levels + b.levels;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (&i, &j) in a.ids.iter().zip(&b.ids) {
        let (x, y) = (find(&mut parent, i), find(&mut parent, a.levels + j));
        if x != y {
            parent[x] = y;
        }
    }
    let used_a: std::collections::BTreeSet<usize> = a.ids.iter().copied().collect();
    let used_b: std::collections::BTreeSet<usize> = b.ids.iter().map(|j| a.levels + j).collect();
    let mut roots: Vec<usize> = used_a
        .into_iter()
        .chain(used_b)
        .map(|i| find(&mut parent, i))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}
