use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use nora_core::chat::SimulatedConference;
use nora_core::clock::system_clock;
use nora_core::config::PlatformConfig;
use nora_core::store::FileStore;
use nora_core::Language;
use nora_gateway::http::{serve, AppState};
use nora_gateway::platform::Services;
use nora_gateway::push::WsHub;
use nora_gateway::simulate::{self, Script, SimulationOptions};
use nora_gateway::speech::Passthrough;
use nora_gateway::{GatewayError, GatewayResult, Platform};

#[derive(Parser)]
#[command(name = "noractl", version, about = "Run and exercise the Nora well-being coach")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP and WebSocket API.
    Serve {
        /// Platform config (TOML). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Data directory; overrides the config.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Listen port; overrides the config. 0 picks a free port.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Drive scripted sessions and a chat swarm in-process and print a JSON
    /// report of invariant checks. Exits non-zero on any violation.
    Simulate {
        /// Answer script (TOML); the shipped script when omitted.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 14)]
        days: u32,
        #[arg(long, default_value_t = 3)]
        users: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score one utterance and print the affect scores as JSON.
    Score {
        #[arg(long)]
        text: String,
        #[arg(long, default_value = "en")]
        lang: Language,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> GatewayResult<PlatformConfig> {
    match path {
        Some(p) => Ok(PlatformConfig::load(p)?),
        None => Ok(PlatformConfig::default()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn run_serve(config: Option<PathBuf>, data: Option<PathBuf>, port: Option<u16>, host: String) -> GatewayResult<()> {
    let mut cfg = load_config(config.as_ref())?;
    if let Some(d) = data {
        cfg.data_dir = d;
    }
    if let Some(p) = port {
        cfg.port = p;
    }
    let store = Arc::new(FileStore::open_platform(&cfg.data_dir)?);
    let hub = Arc::new(WsHub::new());
    let services = Services {
        store,
        push: hub.clone(),
        conference: Arc::new(SimulatedConference::new()),
        speech: Arc::new(Passthrough),
        clock: system_clock(),
    };
    let platform = Arc::new(Platform::new(cfg.clone(), services)?);
    let rt = tokio::runtime::Runtime::new().map_err(io_error)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host.as_str(), cfg.port)).await.map_err(io_error)?;
        let addr = listener.local_addr().map_err(io_error)?;
        println!("listening on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve(listener, AppState { platform, hub }, shutdown).await.map_err(io_error)
    })
}

fn io_error(e: std::io::Error) -> GatewayError {
    GatewayError::new(nora_core::ErrorKind::Storage, e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve {
            config,
            data,
            port,
            host,
        } => run_serve(config, data, port, host).map(|_| ExitCode::SUCCESS),
        Command::Simulate {
            script,
            days,
            users,
            config,
        } => (|| {
            let cfg = load_config(config.as_ref())?;
            let script = match script {
                Some(p) => Script::parse(
                    &std::fs::read_to_string(&p).map_err(|e| GatewayError::invalid(format!("{}: {e}", p.display())))?,
                )?,
                None => Script::shipped(),
            };
            let report = simulate::run(&cfg, &SimulationOptions { days, users, script })?;
            println!("{}", json(&report));
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        })(),
        Command::Score { text, lang, config } => (|| {
            let cfg = load_config(config.as_ref())?;
            let platform = Platform::new(cfg, Services::default())?;
            println!("{}", json(&platform.score(&text, lang)?));
            Ok(ExitCode::SUCCESS)
        })(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(2)
        }
    }
}
