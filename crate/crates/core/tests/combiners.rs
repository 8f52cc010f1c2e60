use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rofmimo_core::bussgang::{linearize_with, FlatKernel};
use rofmimo_core::channel::{complex_normal, ChannelRealization};
use rofmimo_core::combiners::{
    build_combiner, draw_lmmse_trace, draw_terms, mse_terms_explicit, zf_filter, CombinerKind,
};
use rofmimo_core::linalg::CMat;
use rofmimo_core::sysconfig::{DerivedGrid, LinkBudget};

fn random_h(b: usize, u: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMat::from_fn(b, u, |_, _| complex_normal(&mut rng, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_ue_mr_and_zf_are_identical(b in 1usize..=6, o in 3usize..=12, seed in any::<u64>(), ed in 0.0f64..2.0) {
        let kernel = FlatKernel::new(&DerivedGrid::new(3, o, 101).unwrap());
        let link = LinkBudget::new(1.0, 0.1, ed);
        let ch = ChannelRealization::Flat(random_h(b, 1, seed));
        let lin = linearize_with(&kernel, &ch, &link).unwrap();
        let mr = draw_terms(CombinerKind::Mr, &ch, &lin, &link).unwrap();
        let zf = draw_terms(CombinerKind::Zf, &ch, &lin, &link).unwrap();
        prop_assert_eq!(mr, zf);
    }

    #[test]
    fn lmmse_is_never_worse(b in 2usize..=6, u in 1usize..=2, o in 3usize..=12, seed in any::<u64>(), ed in 0.0f64..2.0) {
        let kernel = FlatKernel::new(&DerivedGrid::new(3, o, 101).unwrap());
        let link = LinkBudget::new(1.0, 0.1, ed);
        let ch = ChannelRealization::Flat(random_h(b, u, seed));
        let lin = linearize_with(&kernel, &ch, &link).unwrap();
        let lmmse = draw_lmmse_trace(&ch, &lin, &link).unwrap();
        for kind in [CombinerKind::Mr, CombinerKind::Zf] {
            let other = draw_terms(kind, &ch, &lin, &link).unwrap().total();
            prop_assert!(lmmse <= other * (1.0 + 1e-12), "{lmmse} > {other}");
        }
    }

    #[test]
    fn zf_inverts_the_channel(b in 1usize..=8, seed in any::<u64>()) {
        let u = 1 + (seed as usize) % b;
        let h = random_h(b, u, seed);
        let fh = zf_filter(&h).unwrap() * &h;
        prop_assert!((fh - CMat::identity(u, u)).iter().all(|x| x.norm() < 1e-9));
    }

    #[test]
    fn closed_forms_match_the_explicit_mse(b in 2usize..=5, o in 3usize..=8, seed in any::<u64>(), ed in 0.01f64..2.0) {
        let u = 2;
        let kernel = FlatKernel::new(&DerivedGrid::new(3, o, 101).unwrap());
        let link = LinkBudget::new(1.0, 0.1, ed);
        let ch = ChannelRealization::Flat(random_h(b, u, seed));
        let h = ch.flat().unwrap().clone();
        let lin = linearize_with(&kernel, &ch, &link).unwrap();
        for kind in [CombinerKind::Mr, CombinerKind::Zf, CombinerKind::Lmmse] {
            let comb = build_combiner(kind, &ch, &lin, &link).unwrap();
            let mut explicit = 0.0;
            for (a, ce) in comb.per_bin.iter().zip(&lin.spectrum.per_bin) {
                explicit += mse_terms_explicit(a, &lin.gain, &h, ce, &link).total();
            }
            explicit /= link.es * (u * lin.spectrum.per_bin.len()) as f64;
            let closed = match kind {
                CombinerKind::Lmmse => draw_lmmse_trace(&ch, &lin, &link).unwrap(),
                _ => draw_terms(kind, &ch, &lin, &link).unwrap().total(),
            };
            prop_assert!((explicit - closed).abs() <= 1e-8 * closed, "{kind:?}: {explicit} vs {closed}");
        }
    }
}
