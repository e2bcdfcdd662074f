//! Single-binary front end: every run resolves a configuration from
//! defaults, an optional JSON file, and flags (flags win), executes one
//! subcommand, prints a one-line summary, and stamps each artifact with a
//! provenance header naming the config hash.
//!
//! Exit codes: 0 success, 1 domain or I/O failure inside the pipeline,
//! 2 configuration problems (including usage errors, which clap already
//! reports with code 2).

mod config;
mod run;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{Resolved, SharedFlags};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "geolorenz", version, about = "Geometric Lorenz toolkit", propagate_version = true)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Shared {
    /// Flat JSON file with the shared keys; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Branch exponent of the interval map, in (0, 1)
    #[arg(long, global = true)]
    model_alpha: Option<f64>,
    /// Expansion factor of the interval map
    #[arg(long, global = true)]
    model_theta: Option<f64>,
    /// Gap-refinement depth of the staged construction
    #[arg(long, global = true)]
    k: Option<u32>,
    /// Iterate cap per stage of the staged construction
    #[arg(long, global = true)]
    m_cap: Option<u32>,
    /// Exclusion radius around the singularity (direct construction)
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Word depth of the direct construction
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Orbit length for spectrum sampling
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Number of random seeds for spectrum sampling
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Generator seed; fixed seed means bit-identical artifacts
    #[arg(long, global = true)]
    rng_seed: Option<u64>,
    /// Worker threads (0 = hardware parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Artifact output path
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
}

impl Shared {
    fn flags(&self) -> SharedFlags {
        SharedFlags {
            config: self.config.clone(),
            model_alpha: self.model_alpha,
            model_theta: self.model_theta,
            k: self.k,
            m_cap: self.m_cap,
            delta: self.delta,
            depth: self.depth,
            horizon: self.horizon,
            seeds: self.seeds,
            rng_seed: self.rng_seed,
            threads: self.threads,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the classical Lorenz system and write the point cloud
    Ode {
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 0.005)]
        dt: f64,
        /// Leading steps discarded before collection
        #[arg(long, default_value_t = 10_000)]
        transient: usize,
        /// Integration steps per retained point
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 10.0)]
        a: f64,
        #[arg(long, default_value_t = 28.0)]
        r: f64,
        #[arg(long, default_value_t = 8.0 / 3.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        #[arg(long, default_value_t = 1.0)]
        y0: f64,
        #[arg(long, default_value_t = 1.0)]
        z0: f64,
    },
    /// Iterate the section return map and write the section orbit
    Geo {
        #[arg(long, default_value_t = 0.3)]
        x0: f64,
        #[arg(long, default_value_t = 0.1)]
        y0: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Validate the interval map and exercise its expansion machinery
    MapCheck {
        /// Random subintervals pushed through the almost-onto algorithm
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Minimum length of a sampled subinterval
        #[arg(long, default_value_t = 1e-3)]
        min_len: f64,
        /// Bins of the invariant-density approximation
        #[arg(long, default_value_t = 1024)]
        bins: usize,
    },
    /// Build a branch system over the base interval and write it as JSON
    Cantor {
        #[arg(long, value_enum, default_value_t = CantorMode::Direct)]
        mode: CantorMode,
        /// Measure bins (staged mode only)
        #[arg(long, default_value_t = 256)]
        bins: usize,
        /// Per-gap piece budget (staged mode only)
        #[arg(long, default_value_t = 256)]
        budget: usize,
    },
    /// Dimension estimators
    #[command(subcommand)]
    Dim(DimCmd),
    /// Sample the orbit-functional spectrum of a section observable
    SpectraDyn {
        /// Section observable: x, y, const:V, or quad:a,b,c,d,e,f
        #[arg(long, default_value = "x")]
        obs: String,
        #[arg(long, value_enum, default_value_t = FunctionalArg::Sup)]
        functional: FunctionalArg,
    },
    /// Continued-fraction spectra
    #[command(subcommand)]
    SpectraCf(CfCmd),
    /// Summarize the artifacts present in a directory
    Report {
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum DimCmd {
    /// Box-count slope of a 3D cloud file
    #[command(name = "box")]
    BoxCount {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Rungs on the dyadic scale ladder
        #[arg(long, default_value_t = 12)]
        scales: usize,
    },
    /// Certified dimension bounds of a stored branch system
    D1 {
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
    },
    /// Transverse box count inside a thin slab of a section orbit
    Slab {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Relative slab width around the median first coordinate
        #[arg(long, default_value_t = 0.02)]
        width: f64,
    },
}

#[derive(Subcommand)]
enum CfCmd {
    /// Enumerate the smallest periodic spectrum values
    Head {
        #[arg(long, default_value_t = 4)]
        max_period: usize,
        #[arg(long, default_value_t = 2)]
        alphabet_max: u32,
    },
    /// Verify sum coverage of the digit-bounded Cantor set interval
    Hall {
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
    },
    /// Evaluate one continued-fraction word and its spectrum value
    Value {
        /// Word such as "[2;(2,1)]" or "[0;(1,2)]"
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 60)]
        terms: usize,
    },
    /// Print the boundary constant of the spectrum ray
    Freiman,
}

#[derive(Clone, Copy, ValueEnum)]
enum CantorMode {
    Direct,
    Theorem,
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionalArg {
    /// Sup over the whole orbit segment
    Sup,
    /// Sup over the trailing window only
    Tail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let resolved = match Resolved::merge(&cli.shared.flags()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if resolved.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(resolved.threads)
            .build_global()
        {
            eprintln!("config error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run::execute(&cli.cmd, &resolved) {
        Ok(()) => ExitCode::SUCCESS,
        Err(run::RunError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(run::RunError::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
