use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rofmimo_core::asymptotics::{
    check_domination, lemma1_numeric_check, lmmse_limit_draw, mrzf_limit_draw, substituted_draw, LAG_ZERO_DISTORTION,
};
use rofmimo_core::bussgang::{linearize_with, FlatKernel};
use rofmimo_core::channel::{complex_normal, ChannelRealization};
use rofmimo_core::combiners::{draw_lmmse_trace, draw_terms, CombinerKind};
use rofmimo_core::linalg::CMat;
use rofmimo_core::sysconfig::{DerivedGrid, LinkBudget};

fn random_h(b: usize, u: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMat::from_fn(b, u, |_, _| complex_normal(&mut rng, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lag_ladder(b in 1usize..=4, seed in any::<u64>(), ed_db in 0.0f64..10.0) {
        let h = random_h(b, 1, seed);
        let link = LinkBudget::new(1.0, 0.1, 0.1 * 10f64.powf(ed_db / 10.0));
        let report = lemma1_numeric_check(&h, &link, 9, 100, &[4, 8, 16, 32, 64, 128, 256, 512]).unwrap();
        prop_assert!(report.lag_zero_exact());
        prop_assert!(report.peak_bounded());
        prop_assert!(report.bounds_hold());
        let from = report.decaying_from().unwrap();
        prop_assert!(report.decreasing_from(from));
        prop_assert_eq!(report.ladder[0].lag_zero_range.0, LAG_ZERO_DISTORTION);
    }

    #[test]
    fn dominations_hold(b in 1usize..=8, s in prop::sample::select(vec![1usize, 3, 9]), o in 4usize..=48, seed in any::<u64>(), ed_db in -10.0f64..20.0) {
        let grid = DerivedGrid::new(s, o, 101).unwrap();
        let link = LinkBudget::new(1.0, 0.1, 0.1 * 10f64.powf(ed_db / 10.0));
        let check = check_domination(&random_h(b, 1, seed), &link, &grid).unwrap();
        prop_assert!(check.all(), "{:?}", check);
    }

    #[test]
    fn single_ue_substitution_is_the_limit(b in 1usize..=8, seed in any::<u64>(), ed in 0.0f64..3.0) {
        let h = random_h(b, 1, seed);
        let link = LinkBudget::new(0.7, 0.1, ed);
        let zf = substituted_draw(CombinerKind::Zf, &h, &link).unwrap().0;
        let lmmse = substituted_draw(CombinerKind::Lmmse, &h, &link).unwrap().0;
        let zf_limit = mrzf_limit_draw(&h, &link).unwrap();
        prop_assert!((zf - zf_limit).abs() <= 1e-12 * zf_limit);
        prop_assert!((lmmse - lmmse_limit_draw(&h, &link)).abs() <= 1e-12);
    }
}

#[test]
fn finite_window_approaches_the_limit() {
    let link = LinkBudget::new(1.0, 0.05, 0.2);
    let ch = ChannelRealization::Flat(random_h(3, 1, 17));
    let h = ch.flat().unwrap();
    let zf_limit = mrzf_limit_draw(h, &link).unwrap();
    let lmmse_limit = lmmse_limit_draw(h, &link);
    let mut last = (f64::INFINITY, f64::INFINITY);
    for o in [16usize, 64, 256, 1024] {
        let kernel = FlatKernel::new(&DerivedGrid::new(5, o, 101).unwrap());
        let lin = linearize_with(&kernel, &ch, &link).unwrap();
        let zf = (draw_terms(CombinerKind::Zf, &ch, &lin, &link).unwrap().total() - zf_limit).abs() / zf_limit;
        let lmmse = (draw_lmmse_trace(&ch, &lin, &link).unwrap() - lmmse_limit).abs() / lmmse_limit;
        assert!(zf < last.0 && lmmse < last.1, "O = {o}: {zf} {lmmse}");
        last = (zf, lmmse);
    }
    assert!(last.0 < 0.01 && last.1 < 0.01, "{last:?}");
}
