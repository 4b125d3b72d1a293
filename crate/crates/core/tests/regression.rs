mod common;

use adpress::panel::{fit, Dependent, FixedEffectSet, PanelObservation, RegressionSpec};
use common::{dummy_ols, random_panel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FE_SETS: [FixedEffectSet; 4] = [
    FixedEffectSet::NONE,
    FixedEffectSet::GROUP,
    FixedEffectSet::TIME,
    FixedEffectSet::BOTH,
];

fn war(r: &PanelObservation) -> f64 {
    r.weighted_ad_ratio
}

fn pop(r: &PanelObservation) -> f64 {
    r.popularity.unwrap()
}

fn count(r: &PanelObservation) -> f64 {
    r.article_count as f64
}

#[test]
fn within_estimates_match_dummy_variables() {
    for seed in 0..20 {
        let with_pop = seed % 2 == 1;
        let rows = random_panel(seed, 12, 10, with_pop);
        for fe in FE_SETS {
            let mut spec = RegressionSpec::new(Dependent::ArticleCount, fe);
            spec.popularity = with_pop;
            let got = fit(&spec, &rows).unwrap();
            let regs: Vec<&dyn Fn(&PanelObservation) -> f64> = if with_pop {
                vec![&war, &pop]
            } else {
                vec![&war]
            };
            let want = dummy_ols(&rows, count, &regs, fe.group, fe.time);
            for (j, c) in got.coefficients.iter().enumerate() {
                assert!(
                    (c.estimate - want.beta[j]).abs() < 1e-8,
                    "seed {seed} {fe} β{j}"
                );
                assert!(
                    (c.std_error - want.se[j]).abs() < 1e-8,
                    "seed {seed} {fe} se{j}"
                );
            }
        }
    }
}

#[test]
fn fe_free_data_matches_plain_ols() {
    // No group or period structure: pooled fit equals the intercept-only dummy oracle.
    let mut rows = random_panel(99, 10, 8, false);
    for (i, r) in rows.iter_mut().enumerate() {
        r.article_count = (3.0 + 2.0 * r.weighted_ad_ratio + (i % 3) as f64).round() as u64;
    }
    let got = fit(
        &RegressionSpec::new(Dependent::ArticleCount, FixedEffectSet::NONE),
        &rows,
    )
    .unwrap();
    let want = dummy_ols(&rows, count, &[&war], false, false);
    assert!((got.coefficients[0].estimate - want.beta[0]).abs() < 1e-10);
    assert!(got.intercept.is_some());
}

#[test]
fn scaling_the_regressor() {
    let rows = random_panel(5, 15, 12, false);
    for fe in FE_SETS {
        let spec = RegressionSpec::new(Dependent::ArticleCount, fe);
        let base = fit(&spec, &rows).unwrap();
        for c in [0.01, 3.0, 250.0] {
            let scaled: Vec<_> = rows
                .iter()
                .cloned()
                .map(|mut r| {
                    r.weighted_ad_ratio *= c;
                    r
                })
                .collect();
            let s = fit(&spec, &scaled).unwrap();
            let (b0, b1) = (&base.coefficients[0], &s.coefficients[0]);
            assert!(
                (b1.estimate * c - b0.estimate).abs() < 1e-9 * b0.estimate.abs().max(1.0),
                "{fe} c={c}"
            );
            assert!(
                (b1.t_stat - b0.t_stat).abs() < 1e-9 * b0.t_stat.abs().max(1.0),
                "{fe} c={c}"
            );
        }
    }
}

#[test]
fn shifting_the_outcome() {
    let rows = random_panel(6, 15, 12, false);
    for fe in FE_SETS {
        let spec = RegressionSpec::new(Dependent::ArticleCount, fe);
        let base = fit(&spec, &rows).unwrap();
        let shifted: Vec<_> = rows
            .iter()
            .cloned()
            .map(|mut r| {
                r.article_count += 17;
                r
            })
            .collect();
        let s = fit(&spec, &shifted).unwrap();
        assert!(
            (s.coefficients[0].estimate - base.coefficients[0].estimate).abs() < 1e-10,
            "{fe}"
        );
        match (&base.intercept, &s.intercept) {
            (Some(a), Some(b)) => assert!((b.estimate - a.estimate - 17.0).abs() < 1e-9),
            (None, None) => {}
            _ => panic!("intercept presence changed"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn row_order_is_irrelevant(seed in 0u64..1000, shuffle in 0u64..1000) {
        let rows = random_panel(seed, 8, 8, false);
        let mut perm = rows.clone();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        for fe in FE_SETS {
            let spec = RegressionSpec::new(Dependent::ArticleCount, fe);
            prop_assert_eq!(fit(&spec, &rows).unwrap(), fit(&spec, &perm).unwrap());
        }
    }
}
