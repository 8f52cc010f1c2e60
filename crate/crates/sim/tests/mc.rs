use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rofmimo::mc::{controlled, Estimate, Features, LimitSummary, FEATURES};
use rofmimo_core::asymptotics::substituted_draw;
use rofmimo_core::channel::complex_normal;
use rofmimo_core::combiners::CombinerKind;
use rofmimo_core::linalg::CMat;
use rofmimo_core::sysconfig::LinkBudget;

fn random_h(b: usize, u: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMat::from_fn(b, u, |_, _| complex_normal(&mut rng, 1.0))
}

const NO_COV: [[f64; FEATURES]; FEATURES] = [[0.0; FEATURES]; FEATURES];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summary_matches_direct_substitution(b in 1usize..=8, u in 1usize..=4, seed in any::<u64>(), ed in 0.0f64..3.0) {
        let h = random_h(b, u, seed);
        let link = LinkBudget::new(0.8, 0.1, ed);
        for kind in [CombinerKind::Mr, CombinerKind::Zf, CombinerKind::Lmmse] {
            if kind == CombinerKind::Zf && u > b {
                prop_assert!(LimitSummary::new(kind, &h).is_none());
                continue;
            }
            let fast = LimitSummary::new(kind, &h).unwrap().substituted(&link);
            let direct = substituted_draw(kind, &h, &link).unwrap().0;
            prop_assert!((fast - direct).abs() <= 1e-9 * direct, "{kind:?}: {fast} vs {direct}");
        }
    }
}

#[test]
fn exact_linear_relation_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let values: Vec<Option<(f64, Features)>> = (0..200)
        .map(|_| {
            let f: Features = [rng.random(), rng.random(), rng.random()];
            Some((2.0 + 3.0 * f[0] - 0.5 * f[2], f))
        })
        .collect();
    let mu = [0.5, 0.5, 0.5];
    let est = controlled(&values, &mu, &NO_COV, 1_000_000);
    assert!((est.mean - (2.0 + 1.5 - 0.25)).abs() < 1e-9, "{est:?}");
    assert!(est.std_err < 1e-9);
}

#[test]
fn small_samples_fall_back_to_the_plain_mean() {
    let values = vec![Some((1.0, [0.1, 0.2, 0.3])), None, Some((3.0, [0.3, 0.1, 0.0]))];
    let est = controlled(&values, &[0.0; FEATURES], &NO_COV, 10);
    assert_eq!(est, Estimate::from_values(&[Some(1.0), None, Some(3.0)]));
    assert_eq!((est.mean, est.n, est.discarded), (2.0, 2, 1));
}

#[test]
fn controlled_mean_is_consistent_and_tighter() {
    // X = F0 + noise with E[X] = 1: the adjusted mean must sit within a few
    // standard errors of 1 and beat the plain estimate.
    let mut hits = 0;
    for seed in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<Option<(f64, Features)>> = (0..300)
            .map(|_| {
                let f0 = 2.0 * rng.random::<f64>();
                let noise = 0.1 * (rng.random::<f64>() - 0.5);
                Some((f0 + noise, [f0, rng.random(), rng.random()]))
            })
            .collect();
        let est = controlled(&values, &[1.0, 0.5, 0.5], &NO_COV, usize::MAX);
        let plain = Estimate::from_values(&values.iter().map(|v| v.map(|x| x.0)).collect::<Vec<_>>());
        assert!(est.std_err < plain.std_err / 5.0);
        if (est.mean - 1.0).abs() <= 3.0 * est.std_err {
            hits += 1;
        }
    }
    assert!(hits >= 37, "{hits}/40 within 3 se");
}
