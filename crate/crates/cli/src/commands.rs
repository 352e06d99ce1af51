use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use foodrec_core::api::PredictionStatus;
use foodrec_core::FoodDatabase;

use crate::capture::{capture, MetadataFlags};
use crate::client::Client;
use crate::error::{CliError, EXIT_OK};
use crate::review::{transcript, Dialog};
use crate::session::{CachedFoodList, Session, UploadedDraft};

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:8080";

#[derive(Debug, Parser)]
#[command(
    name = "mfr",
    version,
    about = "Command-line food record: capture meal images, upload them and review the results"
)]
pub struct Cli {
    /// Server base URL. Remembered in the session once given.
    #[arg(long, env = "MFR_SERVER", global = true)]
    pub server: Option<String>,
    /// Participant bearer token.
    #[arg(long, env = "MFR_TOKEN", global = true, hide_env_values = true)]
    pub token: Option<String>,
    /// Directory holding the session file.
    #[arg(long, env = "MFR_STATE_DIR", global = true)]
    pub state_dir: Option<PathBuf>,
    /// Participant id. Remembered in the session once given.
    #[arg(long, env = "MFR_PARTICIPANT", global = true)]
    pub participant: Option<String>,
    /// Study id. Remembered in the session once given.
    #[arg(long, env = "MFR_STUDY", global = true)]
    pub study: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Queue a before/after image pair with its metadata.
    Capture(CaptureArgs),
    /// Upload every queued pair.
    Sync,
    /// Review the predictions for an uploaded occasion.
    Review(ReviewArgs),
    /// List queued drafts and uploaded occasions.
    Status,
    /// Print the pre-loaded food list.
    Foods(FoodsArgs),
}

#[derive(Debug, Args)]
pub struct CaptureArgs {
    pub before: PathBuf,
    pub after: PathBuf,
    /// Capture time (RFC 3339). Defaults to the before image's modification time.
    #[arg(long)]
    pub time: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lat: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lon: Option<f64>,
    /// Camera angle from horizontal, degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub pose: Option<f64>,
    /// A fiducial marker is visible in the images.
    #[arg(long)]
    pub fiducial: bool,
    /// Millimetres per pixel derived from the fiducial marker.
    #[arg(long)]
    pub fiducial_scale: Option<f64>,
    /// EXIF tag as KEY=VALUE; repeatable.
    #[arg(long, value_name = "KEY=VALUE")]
    pub exif: Vec<String>,
    /// JSON metadata file; flags take precedence over its fields.
    #[arg(long, value_name = "FILE")]
    pub metadata: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReviewArgs {
    pub occasion_id: String,
    /// Read answers from this file instead of the terminal, one per line.
    #[arg(long, value_name = "FILE")]
    pub answers: Option<PathBuf>,
    /// Seconds to wait for the server's predictions.
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
    /// Milliseconds between polls.
    #[arg(long, default_value_t = 1000)]
    pub poll_interval: u64,
}

#[derive(Debug, Args)]
pub struct FoodsArgs {
    /// Only print items matching this query.
    #[arg(long)]
    pub search: Option<String>,
}

pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

fn default_state_dir() -> PathBuf {
    std::env::var_os("HOME")
        .map(|h| PathBuf::from(h).join(".mfr"))
        .unwrap_or_else(|| PathBuf::from(".mfr"))
}

/// Runs one command and returns the process exit code. Errors are printed
/// to `io.err`.
pub fn run(cli: Cli, io: &mut Io<'_>) -> u8 {
    match dispatch(cli, io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            if let CliError::Api(body) = &e {
                if let Some(details) = &body.details {
                    let _ = writeln!(io.err, "details: {details}");
                }
            }
            e.exit_code()
        }
    }
}

struct Context {
    session: Session,
    token: Option<String>,
}

impl Context {
    fn server(&self) -> String {
        self.session
            .state
            .server_url
            .clone()
            .unwrap_or_else(|| DEFAULT_SERVER.to_owned())
    }

    fn client(&self) -> Result<Client, CliError> {
        let token = self
            .token
            .as_deref()
            .ok_or_else(|| CliError::Usage("no token: pass --token or set MFR_TOKEN".into()))?;
        Client::new(&self.server(), token)
    }

    fn participant(&self) -> Result<String, CliError> {
        self.session.state.participant_id.clone().ok_or_else(|| {
            CliError::Usage("no participant id: pass --participant or set MFR_PARTICIPANT".into())
        })
    }

    fn study(&self) -> Result<String, CliError> {
        self.session
            .state
            .study_id
            .clone()
            .ok_or_else(|| CliError::Usage("no study id: pass --study or set MFR_STUDY".into()))
    }
}

fn dispatch(cli: Cli, io: &mut Io<'_>) -> Result<u8, CliError> {
    let dir = cli.state_dir.clone().unwrap_or_else(default_state_dir);
    let mut session = Session::open(&dir)?;
    let state = &mut session.state;
    let mut changed = false;
    for (slot, given) in [
        (&mut state.server_url, cli.server),
        (&mut state.participant_id, cli.participant),
        (&mut state.study_id, cli.study),
    ] {
        if let Some(v) = given {
            if slot.as_ref() != Some(&v) {
                *slot = Some(v);
                changed = true;
            }
        }
    }
    if changed {
        session.save()?;
    }
    let mut ctx = Context {
        session,
        token: cli.token,
    };
    match cli.command {
        Command::Capture(args) => cmd_capture(&mut ctx, args, io),
        Command::Sync => cmd_sync(&mut ctx, io),
        Command::Review(args) => cmd_review(ctx, args, io),
        Command::Status => cmd_status(&ctx, io),
        Command::Foods(args) => cmd_foods(&mut ctx, args, io),
    }
}

fn cmd_capture(ctx: &mut Context, args: CaptureArgs, io: &mut Io<'_>) -> Result<u8, CliError> {
    let flags = MetadataFlags {
        time: args.time,
        lat: args.lat,
        lon: args.lon,
        pose: args.pose,
        fiducial: args.fiducial,
        fiducial_scale: args.fiducial_scale,
        exif: args.exif,
        metadata_file: args.metadata,
    };
    let captured = capture(&args.before, &args.after, &flags)?;
    if let Some(notice) = &captured.notice {
        writeln!(io.err, "{notice}")?;
    }
    let id = captured.draft.draft_id.clone();
    ctx.session.state.queue.push(captured.draft);
    ctx.session.save()?;
    writeln!(io.out, "queued draft {id}")?;
    Ok(EXIT_OK)
}

/// Brings the cached food list in line with the server's. Returns whether
/// the cache was replaced.
fn refresh_foods(ctx: &mut Context, client: &Client) -> Result<bool, CliError> {
    let current = client.food_hash()?;
    if ctx.session.state.food_list.as_ref().map(|c| &c.hash) == Some(&current.hash) {
        return Ok(false);
    }
    let list = client.foods()?;
    let db = FoodDatabase::from_items(list.items.clone())
        .map_err(|e| CliError::Protocol(format!("food list: {e}")))?;
    if db.content_hash() != list.hash {
        return Err(CliError::Protocol(
            "food list does not match its hash".into(),
        ));
    }
    ctx.session.state.food_list = Some(CachedFoodList {
        hash: list.hash,
        items: list.items,
    });
    ctx.session.save()?;
    Ok(true)
}

fn cmd_sync(ctx: &mut Context, io: &mut Io<'_>) -> Result<u8, CliError> {
    if ctx.session.state.queue.is_empty() {
        writeln!(io.out, "nothing to sync")?;
        return Ok(EXIT_OK);
    }
    let client = ctx.client()?;
    let participant = ctx.participant()?;
    let study = ctx.study()?;
    if let Err(e) = refresh_foods(ctx, &client) {
        writeln!(io.err, "warning: food list not refreshed: {e}")?;
    }

    let mut worst = EXIT_OK;
    let drafts = ctx.session.state.queue.clone();
    let mut uploaded = 0;
    for draft in &drafts {
        let result = client.upload(
            &participant,
            &study,
            &draft.metadata,
            &draft.before_path,
            &draft.after_path,
            &draft.idempotency_key,
        );
        match result {
            Ok(resp) => {
                let state = &mut ctx.session.state;
                state.queue.retain(|d| d.draft_id != draft.draft_id);
                state.uploaded.push(UploadedDraft {
                    draft_id: draft.draft_id.clone(),
                    occasion_id: resp.occasion_id.clone(),
                    uploaded_at: Utc::now(),
                });
                ctx.session.save()?;
                uploaded += 1;
                let note = if resp.duplicate {
                    " (already on server)"
                } else {
                    ""
                };
                writeln!(
                    io.out,
                    "draft {} -> occasion {}{note}",
                    draft.draft_id, resp.occasion_id
                )?;
                if let Some(report) = resp.analysis.and_then(|a| a.error) {
                    writeln!(
                        io.err,
                        "warning: analysis of {} failed: {} ({})",
                        resp.occasion_id, report.code, report.message
                    )?;
                }
            }
            Err(e) => {
                if let Some(d) = ctx
                    .session
                    .state
                    .queue
                    .iter_mut()
                    .find(|d| d.draft_id == draft.draft_id)
                {
                    d.last_error = Some(e.to_string());
                }
                ctx.session.save()?;
                writeln!(io.err, "draft {} not uploaded: {e}", draft.draft_id)?;
                worst = worst.max(e.exit_code());
            }
        }
    }
    writeln!(
        io.out,
        "uploaded {uploaded}, still queued {}",
        ctx.session.state.queue.len()
    )?;
    Ok(worst)
}

fn cmd_review(mut ctx: Context, args: ReviewArgs, io: &mut Io<'_>) -> Result<u8, CliError> {
    let client = ctx.client()?;
    if let Err(e) = refresh_foods(&mut ctx, &client) {
        if ctx.session.state.food_list.is_none() {
            return Err(e);
        }
        writeln!(io.err, "warning: using the cached food list: {e}")?;
    }
    let foods = ctx
        .session
        .state
        .food_database()
        .unwrap_or_else(|| FoodDatabase::from_items(Vec::new()).expect("empty list"));
    // The session is not needed while the participant answers.
    drop(ctx);

    let started = Instant::now();
    let window = Duration::from_secs(args.timeout);
    let predictions = loop {
        let p = client.predictions(&args.occasion_id)?;
        if p.status == PredictionStatus::Ready {
            break p;
        }
        if started.elapsed() >= window {
            return Err(CliError::Timeout {
                occasion: args.occasion_id,
                waited: window,
            });
        }
        std::thread::sleep(
            Duration::from_millis(args.poll_interval).min(window.saturating_sub(started.elapsed())),
        );
    };
    writeln!(
        io.out,
        "occasion {}: {} prediction(s)",
        predictions.occasion_id,
        predictions.predictions.len()
    )?;

    let review = match &args.answers {
        Some(path) => {
            let file =
                std::fs::File::open(path).map_err(|_| CliError::FileNotFound(path.clone()))?;
            let mut reader = BufReader::new(file);
            Dialog::new(&mut reader, io.out).run(&predictions.predictions, &foods)?
        }
        None => Dialog::new(io.stdin, io.out).run(&predictions.predictions, &foods)?,
    };
    let resp = client.review(&args.occasion_id, &review)?;
    for line in transcript(&review) {
        writeln!(io.out, "{line}")?;
    }
    for food in &resp.confirmed {
        writeln!(
            io.out,
            "confirmed {} at {},{}",
            food.label, food.pin.x_px, food.pin.y_px
        )?;
    }
    writeln!(
        io.out,
        "occasion {}: {} (version {})",
        resp.occasion_id, resp.state, resp.version
    )?;
    Ok(EXIT_OK)
}

fn row(
    out: &mut dyn Write,
    kind: &str,
    id: &str,
    state: &str,
    detail: &str,
) -> std::io::Result<()> {
    writeln!(out, "{kind:<9} {id:<36}  {state:<20} {detail}").and_then(|_| out.flush())
}

fn cmd_status(ctx: &Context, io: &mut Io<'_>) -> Result<u8, CliError> {
    let state = &ctx.session.state;
    let remote = match (&state.participant_id, &ctx.token) {
        (Some(pid), Some(_)) => match ctx.client().and_then(|c| c.participant_occasions(pid)) {
            Ok(list) => Some(list.occasions),
            Err(e) => {
                writeln!(
                    io.err,
                    "warning: server unavailable, showing local state only: {e}"
                )?;
                None
            }
        },
        _ => {
            if !state.uploaded.is_empty() {
                writeln!(
                    io.err,
                    "warning: no token or participant id, showing local state only"
                )?;
            }
            None
        }
    };

    row(io.out, "KIND", "ID", "STATE", "DETAIL")?;
    for d in &state.queue {
        let detail = d
            .last_error
            .as_deref()
            .map(|e| format!("last attempt: {e}"))
            .unwrap_or_else(|| d.before_path.display().to_string());
        row(io.out, "draft", &d.draft_id, "queued", &detail)?;
    }
    match remote {
        Some(occasions) => {
            for o in &occasions {
                let draft = state
                    .uploaded
                    .iter()
                    .find(|u| u.occasion_id == o.occasion_id)
                    .map(|u| format!("draft {}", u.draft_id))
                    .unwrap_or_default();
                row(
                    io.out,
                    "occasion",
                    o.occasion_id.as_str(),
                    &o.state.to_string(),
                    &draft,
                )?;
            }
            for u in &state.uploaded {
                if !occasions.iter().any(|o| o.occasion_id == u.occasion_id) {
                    row(
                        io.out,
                        "occasion",
                        u.occasion_id.as_str(),
                        "missing on server",
                        "",
                    )?;
                }
            }
        }
        None => {
            for u in &state.uploaded {
                let detail = format!("draft {}", u.draft_id);
                row(
                    io.out,
                    "occasion",
                    u.occasion_id.as_str(),
                    "unknown",
                    &detail,
                )?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_foods(ctx: &mut Context, args: FoodsArgs, io: &mut Io<'_>) -> Result<u8, CliError> {
    let refreshed = ctx.client().and_then(|c| refresh_foods(ctx, &c));
    if let Err(e) = refreshed {
        if ctx.session.state.food_list.is_none() {
            return Err(e);
        }
        writeln!(io.err, "warning: showing the cached food list: {e}")?;
    }
    let db = ctx
        .session
        .state
        .food_database()
        .ok_or_else(|| CliError::Local("cached food list is unusable".into()))?;
    let items: Vec<_> = match &args.search {
        Some(q) => db.search(q),
        None => db.items().iter().collect(),
    };
    for item in items {
        let kcal = item
            .energy_kcal_per_100g
            .map(|k| k.to_string())
            .unwrap_or_default();
        writeln!(io.out, "{}\t{}\t{kcal}", item.code.as_str(), item.name)?;
    }
    Ok(EXIT_OK)
}
