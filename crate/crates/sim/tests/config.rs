use rofmimo::config::{Config, Grid};
use rofmimo::SimError;

#[test]
fn shipped_preset_file_is_the_default() {
    let text = include_str!("../../../configs/paper-v.toml");
    let cfg = Config::from_toml(text).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg, Config::default());
}

#[test]
fn round_trips_through_toml() {
    let cfg = Config::default();
    let back = Config::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
}

#[test]
fn partial_files_fill_defaults() {
    let cfg = Config::from_toml("[run]\nseed = 7\n[dither]\naps = [16]\ned_db = [-4.0, -2.0]\n").unwrap();
    assert_eq!(cfg.run.seed, 7);
    assert_eq!(cfg.run.trials, Config::default().run.trials);
    assert_eq!(cfg.dither.aps, vec![16]);
    assert_eq!(cfg.dither.ed_db.values(), vec![-4.0, -2.0]);
    cfg.validate().unwrap();
}

#[test]
fn hash_tracks_content() {
    let mut cfg = Config::default();
    let h = cfg.hash().unwrap();
    assert_eq!(h.len(), 16);
    cfg.run.seed += 1;
    assert_ne!(cfg.hash().unwrap(), h);
}

#[test]
fn unknown_fields_are_rejected() {
    assert!(Config::from_toml("[run]\nseeds = 3\n").is_err());
    assert!(Config::from_toml("[nonsense]\n").is_err());
}

#[test]
fn ranges_are_inclusive() {
    assert_eq!(Grid::range(-2.0, 2.0, 1.0).values(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    assert_eq!(Grid::range(-0.3, 0.3, 0.1).values().len(), 7);
    let g: Config = Config::from_toml("[fronthaul]\ned_db = { start = -1.0, stop = 1.0, step = 0.5 }\n").unwrap();
    assert_eq!(g.fronthaul.ed_db.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
}

#[test]
fn validation_catches_bad_sweeps() {
    let bad = [
        "preset = \"other\"\n",
        "[run]\ntrials = 1\n",
        "[dither]\ned_db = [0.0, 0.0]\n",
        "[fronthaul]\nfronthaul_gbps = [86.4, 43.2]\n",
        "[dither]\naps = []\n",
        "[availability]\nfading_min = 16\nfading_max = 8\n",
        "[pilots]\nues = 4\ncounts = [2, 8]\n",
    ];
    for text in bad {
        let cfg = Config::from_toml(text).unwrap();
        assert!(matches!(cfg.validate(), Err(SimError::Config(_))), "accepted {text:?}");
    }
}
