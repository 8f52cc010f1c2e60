use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use rofmimo::config::Config;
use rofmimo::dump::{encode_frame, encode_linearization, save_topology, write_bytes};
use rofmimo::experiments::{first_point, run, ExperimentKind, SweepSpec};
use rofmimo::output;
use rofmimo::parallel::Runner;
use rofmimo::scenario::Scenario;
use rofmimo::SimResult;
use rofmimo_core::bussgang::FlatKernel;
use rofmimo_core::channel::path_loss;
use rofmimo_core::montecarlo::{trial_rng, ChannelSource, Domain, RayleighSource};
use rofmimo_core::oracle::synthesize_frame;

/// EVM experiments for distributed MIMO with dithered 1-bit radio-over-fiber
/// fronthaul.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// TOML configuration; the paper-v preset when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// dither | fronthaul | availability | pilots
    #[arg(long)]
    experiment: ExperimentKind,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides run.trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Also write the topology, linearization and one waveform frame of the
    /// first sweep point into this directory.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

fn dump_first(spec: &SweepSpec, dir: &Path) -> SimResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| rofmimo::SimError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let sc: &Scenario = &spec.scenario;
    let (aps, ues, placement, rate, ed_db) = first_point(spec);
    let topo = sc.ap_grid(aps)?.with_ues(sc.ues(ues, placement, spec.seed, 0)?);
    save_topology(&dir.join("topology.toml"), &topo)?;
    let grid = sc.grid(aps, ues, rate)?;
    let link = sc.link(aps, ed_db);
    let channel = RayleighSource::new(path_loss(&topo), spec.seed).draw(0);
    let lin = FlatKernel::new(&grid).linearize(channel.flat().expect("flat draws"), &link)?;
    write_bytes(&dir.join("linearization.bin"), &encode_linearization(&lin))?;
    let frame = synthesize_frame(&channel, &link, &grid, &mut trial_rng(spec.seed, Domain::Waveform, 0));
    write_bytes(&dir.join("frame.bin"), &encode_frame(&frame))
}

fn main_inner(args: Args) -> SimResult<()> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.run.trials = t;
    }
    let spec = SweepSpec::from_config(&cfg, args.experiment)?;
    let runner = Runner::new(args.jobs)?;
    if let Some(dir) = &args.dump_dir {
        dump_first(&spec, dir)?;
    }
    let meta = format!(
        "rofmimo experiment={} config_hash={} seed={} trials={}",
        args.experiment,
        cfg.hash()?,
        cfg.run.seed,
        cfg.run.trials
    );
    let mut out = output::create(&args.out, &meta)?;
    run(&spec, &runner, &mut |rows| out.write(rows))?;
    out.finish()?;
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
