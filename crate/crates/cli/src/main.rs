use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavetank_core::harness::{
    load_config, run_bar, run_convergence, run_simulation, run_streamfn, BarConfig, ConvergenceConfig, MgBenchConfig,
    SimulationConfig, StreamFnConfig,
};
use wavetank_core::Result;

/// Spectral element free-surface wave tank.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Override the output directory given in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a simulation from a config file.
    Simulate { config: PathBuf },
    /// One-step spectral convergence study against stream-function waves.
    Converge { config: PathBuf },
    /// Harmonic generation over a submerged bar.
    Bar { config: PathBuf },
    /// Pressure-solver iteration table and scaling sweeps.
    MgBench { config: PathBuf },
    /// Solve a stream-function wave and dump its coefficients and profile.
    Streamfn { spec: PathBuf },
}

macro_rules! with_out {
    ($cfg:expr, $out:expr) => {
        if let Some(d) = $out {
            $cfg.output.dir = d.clone();
        }
    };
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Simulate { config } => {
            let mut cfg: SimulationConfig = load_config(config)?;
            with_out!(cfg, &cli.out);
            let out = run_simulation(&cfg)?;
            let s = &out.summary;
            println!(
                "{} steps of {:.4e} s to t = {:.4} s, {} dof, {} tol {:.0e}",
                s.steps, s.dt, s.t_end, s.dof, s.method, s.tolerance
            );
            println!(
                "iterations mean {:.2} max {}; max divergence ratio {:.3e}; energy drift {:.3e}",
                s.mean_iterations, s.max_iterations, s.max_divergence_ratio, s.energy_drift
            );
            println!("outputs in {}", cfg.output.dir.display());
        }
        Cmd::Converge { config } => {
            let mut cfg: ConvergenceConfig = load_config(config)?;
            with_out!(cfg, &cli.out);
            let out = run_convergence(&cfg)?;
            for v in &out.verdicts {
                println!(
                    "kh={:<7.4} steepness={:<4} decaying={} max_ratio={:.3} mean_ratio={:.3} plateau={:.2e} {}",
                    v.kh,
                    v.steepness,
                    v.decaying,
                    v.max_ratio,
                    v.mean_ratio,
                    v.plateau,
                    if v.pass { "PASS" } else { "FAIL" }
                );
            }
            println!("outputs in {}", cfg.output.dir.display());
        }
        Cmd::Bar { config } => {
            let mut cfg: BarConfig = load_config(config)?;
            with_out!(cfg, &cli.out);
            let out = run_bar(&cfg)?;
            println!("period {:.4} s, {} steps", out.period, out.run.summary.steps);
            for h in &out.harmonics {
                println!(
                    "gauge {} x={:<5} a1={:.3e} higher={:.4} fundamental={:.4}",
                    h.gauge, h.x, h.amplitudes[0], h.higher_fraction, h.fundamental_fraction
                );
            }
            println!("outputs in {}", cfg.output.dir.display());
        }
        Cmd::MgBench { config } => {
            let mut cfg: MgBenchConfig = load_config(config)?;
            with_out!(cfg, &cli.out);
            let out = wavetank_core::harness::mg_benchmark(&cfg)?;
            for r in &out.rows {
                println!(
                    "{:<9} nx={:<4} px={:<3} dof={:<7} {:<9} tol={:.0e} its={:.1} (max {}) t={:.4e} s",
                    r.study, r.nx, r.px, r.dof, r.method, r.tolerance, r.iterations, r.max_iterations, r.wall_time
                );
            }
            for f in &out.fits {
                println!(
                    "{:<9} {:<9} alpha={:.3} iterations {:.1}..{:.1}",
                    f.study, f.method, f.alpha, f.min_iterations, f.max_iterations
                );
            }
            println!("outputs in {}", cfg.output.dir.display());
        }
        Cmd::Streamfn { spec } => {
            let mut cfg: StreamFnConfig = load_config(spec)?;
            with_out!(cfg, &cli.out);
            let s = run_streamfn(&cfg)?;
            println!(
                "N={} k={:.8} L={:.6} T={:.6} c={:.8} surface residual {:.2e}",
                s.n_sf, s.wavenumber, s.length, s.period, s.celerity, s.surface_residual
            );
            println!("outputs in {}", cfg.output.dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
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
