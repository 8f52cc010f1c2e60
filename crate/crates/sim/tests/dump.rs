use proptest::prelude::*;
use rofmimo::config::ScenarioConfig;
use rofmimo::dump::{
    decode_frame, decode_linearization, encode_frame, encode_linearization, load_topology, read_bytes, save_topology,
    topology_from_toml, topology_to_toml, write_bytes,
};
use rofmimo::scenario::Scenario;
use rofmimo_core::bussgang::{linearize_with, FlatKernel};
use rofmimo_core::channel::{ChannelRealization, PathLoss, UePlacement};
use rofmimo_core::linalg::RMat;
use rofmimo_core::montecarlo::{trial_rng, ChannelSource, Domain, RayleighSource};
use rofmimo_core::oracle::synthesize_frame;
use rofmimo_core::sysconfig::{DerivedGrid, LinkBudget};

fn draw(b: usize, u: usize, seed: u64) -> ChannelRealization {
    RayleighSource::new(PathLoss::from_gains(RMat::from_element(b, u, 1.0)), seed).draw(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frames_round_trip(b in 1usize..=4, u in 1usize..=3, s in prop::sample::select(vec![1usize, 3, 5]), o in 3usize..=6, seed in any::<u64>()) {
        let grid = DerivedGrid::new(s, o, 101).unwrap();
        let link = LinkBudget::new(1.0, 0.1, 0.3);
        let frame = synthesize_frame(&draw(b, u, seed), &link, &grid, &mut trial_rng(seed, Domain::Waveform, 0));
        prop_assert_eq!(decode_frame(&encode_frame(&frame)).unwrap(), frame);
    }

    #[test]
    fn linearizations_round_trip(b in 1usize..=4, s in prop::sample::select(vec![1usize, 3, 5]), o in 3usize..=6, seed in any::<u64>()) {
        let grid = DerivedGrid::new(s, o, 101).unwrap();
        let link = LinkBudget::new(1.0, 0.1, 0.3);
        let lin = linearize_with(&FlatKernel::new(&grid), &draw(b, 1, seed), &link).unwrap();
        let back = decode_linearization(&encode_linearization(&lin)).unwrap();
        prop_assert_eq!(back.gain, lin.gain);
        prop_assert_eq!(back.spectrum.per_bin, lin.spectrum.per_bin);
    }
}

#[test]
fn corrupt_dumps_are_rejected() {
    let grid = DerivedGrid::new(3, 4, 101).unwrap();
    let lin = linearize_with(&FlatKernel::new(&grid), &draw(2, 1, 1), &LinkBudget::new(1.0, 0.1, 0.3)).unwrap();
    let bytes = encode_linearization(&lin);
    assert!(decode_linearization(&bytes[..bytes.len() - 3]).is_err());
    assert!(decode_frame(&bytes).is_err());
    let mut wrong_version = bytes.clone();
    wrong_version[4] = 9;
    assert!(decode_linearization(&wrong_version).is_err());
    let mut trailing = bytes;
    trailing.push(0);
    assert!(decode_linearization(&trailing).is_err());
}

#[test]
fn topology_files_round_trip() {
    let sc = Scenario::from_config(&ScenarioConfig::default());
    let topo = sc
        .ap_grid(16)
        .unwrap()
        .with_ues(sc.ues(4, UePlacement::UniformRandom, 3, 0).unwrap());
    assert_eq!(topology_from_toml(&topology_to_toml(&topo).unwrap()).unwrap(), topo);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("topology.toml");
    save_topology(&path, &topo).unwrap();
    assert_eq!(load_topology(&path).unwrap(), topo);
    write_bytes(&dir.path().join("x.bin"), &[1, 2, 3]).unwrap();
    assert_eq!(read_bytes(&dir.path().join("x.bin")).unwrap(), vec![1, 2, 3]);
    assert!(load_topology(&dir.path().join("missing.toml")).is_err());
}
