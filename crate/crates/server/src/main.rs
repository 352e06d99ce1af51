use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use foodrec_core::analysis::write_metrics_csv;
use foodrec_core::{classify_estimate, mean_error_rate, EstimateClass, EvaluationRecord};
use foodrec_server::ServerConfig;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "foodrec-server", version, about = "Food-record study server")]
struct Cli {
    /// TOML configuration file. FOODREC_* environment variables override it.
    #[arg(long, short, env = "FOODREC_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve,
    /// Compute the mean error rate of energy estimates and write per-record
    /// metrics as CSV.
    Evaluate {
        /// CSV with columns occasion_id,groundtruth_kcal,estimated_kcal,estimator_id.
        records: PathBuf,
        /// Relative band around the groundtruth counted as exact.
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
        /// Metrics CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve => serve(cli.config),
        Command::Evaluate {
            records,
            tolerance,
            out,
        } => evaluate(&records, tolerance, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn serve(config_path: Option<PathBuf>) -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stdout)
        .init();
    let config = ServerConfig::load(config_path.as_deref())?;
    let (app, _service) = foodrec_server::build(&config)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((config.bind, config.port))
            .await
            .with_context(|| format!("cannot bind {}:{}", config.bind, config.port))?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        foodrec_server::serve(listener, app, async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await?;
        Ok(())
    })
}

fn evaluate(path: &PathBuf, tolerance: f64, out: Option<PathBuf>) -> anyhow::Result<()> {
    anyhow::ensure!(
        tolerance >= 0.0 && tolerance.is_finite(),
        "tolerance must be a non-negative number"
    );
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let records: Vec<EvaluationRecord> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("malformed records in {}", path.display()))?;
    let rate = mean_error_rate(&records)?;
    let (mut over, mut under, mut exact) = (0, 0, 0);
    for r in &records {
        match classify_estimate(r, tolerance) {
            EstimateClass::Over => over += 1,
            EstimateClass::Under => under += 1,
            EstimateClass::Exact => exact += 1,
        }
    }
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(&p)?);
            write_metrics_csv(&records, tolerance, &mut w)?;
            w.flush()?;
        }
        None => write_metrics_csv(&records, tolerance, std::io::stdout().lock())?,
    }
    eprintln!(
        "records: {}  mean error rate: {rate:.4}%  over: {over}  under: {under}  exact: {exact}",
        records.len()
    );
    Ok(())
}
