use std::path::PathBuf;

use clap::Parser;
use dramaturg_service::ServiceConfig;

/// Serve play sessions over HTTP.
#[derive(Parser)]
#[command(name = "dramaturg-serve", version)]
struct Args {
    /// TOML service config; environment variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bind address, overriding config and environment.
    #[arg(long)]
    bind: Option<String>,
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut config = match ServiceConfig::load(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dramaturg-serve: {e}");
            std::process::exit(2);
        }
    };
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    if let Err(e) = dramaturg_service::serve(config).await {
        eprintln!("dramaturg-serve: {e}");
        std::process::exit(1);
    }
}
