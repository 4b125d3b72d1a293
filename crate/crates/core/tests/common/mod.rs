//! Brute-force dummy-variable regression used as a test oracle.

#![allow(dead_code)]

use std::collections::BTreeMap;

use adpress::panel::PanelObservation;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct OracleFit {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
}

fn levels<'a>(keys: impl Iterator<Item = &'a str>) -> BTreeMap<&'a str, usize> {
    let mut m = BTreeMap::new();
    for k in keys {
        let n = m.len();
        m.entry(k).or_insert(n);
    }
    m
}

/// OLS of `y` on the regressors plus explicit group and period dummies,
/// solved from the normal equations, with the cluster sandwich built
/// observation by observation. Clusters are (source, entity) pairs; group
/// dummies nested in them are left out of the small-sample parameter count.
pub fn dummy_ols(
    rows: &[PanelObservation],
    y: impl Fn(&PanelObservation) -> f64,
    regressors: &[&dyn Fn(&PanelObservation) -> f64],
    group: bool,
    time: bool,
) -> OracleFit {
    let gkeys: Vec<String> = rows
        .iter()
        .map(|r| format!("{}\u{1f}{}", r.source, r.entity))
        .collect();
    let groups = levels(gkeys.iter().map(String::as_str));
    let periods = levels(rows.iter().map(|r| r.period.as_str()));
    let p = regressors.len();
    let g_cols = if group { groups.len() } else { 0 };
    // With group dummies present, one period dummy is redundant.
    let t_cols = if time {
        periods.len() - usize::from(group)
    } else {
        0
    };
    let intercept = usize::from(!group && !time);
    let k = p + g_cols + t_cols + intercept;
    let n = rows.len();
    let mut x = DMatrix::<f64>::zeros(n, k);
    for (i, r) in rows.iter().enumerate() {
        for (j, f) in regressors.iter().enumerate() {
            x[(i, j)] = f(r);
        }
        if group {
            x[(i, p + groups[gkeys[i].as_str()])] = 1.0;
        }
        if time {
            let t = periods[r.period.as_str()];
            if !group {
                x[(i, p + t)] = 1.0;
            } else if t > 0 {
                x[(i, p + g_cols + t - 1)] = 1.0;
            }
        }
        if intercept == 1 {
            x[(i, k - 1)] = 1.0;
        }
    }
    let yv = DVector::from_iterator(n, rows.iter().map(&y));
    let xtx_inv = (x.transpose() * &x)
        .try_inverse()
        .expect("oracle design invertible");
    let b = &xtx_inv * (x.transpose() * &yv);
    let u = &yv - &x * &b;

    let mut meat = DMatrix::<f64>::zeros(k, k);
    for g in groups.values() {
        let mut s = DVector::<f64>::zeros(k);
        for i in 0..n {
            if groups[gkeys[i].as_str()] == *g {
                s += x.row(i).transpose() * u[i];
            }
        }
        meat += &s * s.transpose();
    }
    let gn = groups.len() as f64;
    let k_eff = (k - g_cols) as f64;
    let scale = gn / (gn - 1.0) * (n as f64 - 1.0) / (n as f64 - k_eff);
    let v = &xtx_inv * meat * &xtx_inv * scale;
    OracleFit {
        beta: (0..p).map(|j| b[j]).collect(),
        se: (0..p).map(|j| v[(j, j)].sqrt()).collect(),
    }
}

/// Random unbalanced panel whose group × period graph is connected:
/// every group is observed in the first period.
pub fn random_panel(
    seed: u64,
    max_groups: usize,
    max_periods: usize,
    with_popularity: bool,
) -> Vec<PanelObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = rng.random_range(3..=max_groups);
    let periods = rng.random_range(3..=max_periods);
    let sources = rng.random_range(1..=4);
    let mut rows = Vec::new();
    for g in 0..groups {
        let a: f64 = rng.random_range(-5.0..5.0);
        for t in 0..periods {
            if t > 0 && rng.random_bool(0.25) {
                continue;
            }
            let x: f64 = rng.random_range(0.0..3.0) + 0.2 * a.abs();
            let mean = 20.0 + a + (t % 5) as f64 + 0.7 * x;
            let count = (mean + rng.random_range(-4.0..4.0)).round().max(0.0) as u64;
            rows.push(PanelObservation {
                entity: format!("E{}", g / sources),
                source: format!("S{}", g % sources),
                period: format!("P{t:02}"),
                weighted_ad_ratio: x,
                sentiment_total: 0,
                article_count: count,
                popularity: with_popularity.then(|| rng.random_range(0.0..100.0)),
            });
        }
    }
    rows
}
