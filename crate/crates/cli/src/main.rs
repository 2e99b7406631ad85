//! `textscape` command-line driver.

use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use textscape::demo::make_demo;
use textscape::pipeline::{run_pipeline, DumpFlags, PipelineConfig};

#[derive(Parser)]
#[command(name = "textscape", version, about = "Scene-text image synthesis from 3D meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a pipeline config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dump_gbuffer: bool,
        #[arg(long)]
        dump_regions: bool,
        #[arg(long)]
        dump_decals: bool,
    },
    /// Serve the preview and anchor API for one scene.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Listen on all interfaces instead of localhost only.
        #[arg(long)]
        public: bool,
    },
    /// Write the procedural demo scenes, corpus, font and configs.
    MakeDemoScene {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate {
            config,
            seed,
            dump_gbuffer,
            dump_regions,
            dump_decals,
        } => {
            let (mut cfg, base) =
                PipelineConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let dump = DumpFlags {
                gbuffer: dump_gbuffer,
                regions: dump_regions,
                decals: dump_decals,
            };
            let manifest = run_pipeline(&cfg, &base, dump)?;
            println!(
                "wrote {} samples to {} ({} anchors skipped)",
                manifest.records.len(),
                base.join(&cfg.output_dir).display(),
                manifest.skipped.len()
            );
        }
        Command::Serve { scene, port, public } => {
            let ip = if public {
                Ipv4Addr::UNSPECIFIED
            } else {
                Ipv4Addr::LOCALHOST
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(textscape_cli::serve(&scene, SocketAddr::from((ip, port))))?;
        }
        Command::MakeDemoScene { out } => {
            let paths = make_demo(&out)?;
            println!("room scene:   {}", paths.room_scene.display());
            println!("street scene: {}", paths.street_scene.display());
            println!(
                "configs:      {} {}",
                paths.room_config.display(),
                paths.street_config.display()
            );
        }
    }
    Ok(())
}
