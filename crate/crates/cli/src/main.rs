use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uxsim_core::persona::generate_batch;
use uxsim_core::{BatchOptions, DemographicSpec, Persona, PersonaError, PromptSet};
use uxsim_llm::{Gateway, HttpProvider, MockProvider, ProviderConfig};
use uxsim_study::{ExportFormat, Gateways, RunStatus, RunStore, StudyConfig, StudyRunner};
use uxsim_web::cdp::{CdpConfig, CdpFactory, ChromeLauncher};
use uxsim_web::{BrowserFactory, HeadlessFactory};

#[derive(Parser)]
#[command(name = "uxsim", version, about = "Simulated usability studies with persona-driven agents")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory holding study runs.
    #[arg(long, global = true, env = "UXSIM_STORE", default_value = "runs")]
    store: PathBuf,
    /// Scripted replies instead of a live model (one rule file per module).
    #[arg(long, global = true, env = "UXSIM_MOCK_DIR")]
    mock_dir: Option<PathBuf>,
    /// Prompt template overrides, one file per prompt kind.
    #[arg(long, global = true)]
    prompts: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = BrowserKind::Headless)]
    browser: BrowserKind,
    /// DevTools websocket of a running browser; without it a browser is launched per session.
    #[arg(long, global = true)]
    cdp_url: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BrowserKind {
    Headless,
    Cdp,
}

#[derive(Subcommand)]
enum Command {
    /// Persona batches.
    Persona {
        #[command(subcommand)]
        command: PersonaCommand,
    },
    /// Running and exporting studies.
    Study {
        #[command(subcommand)]
        command: StudyCommand,
    },
    /// Serves the JSON API (and optionally a static viewer build).
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Serves the bundled demo shop.
    FixtureShop {
        #[arg(long, default_value = "127.0.0.1:8700")]
        addr: SocketAddr,
    },
}

#[derive(Subcommand)]
enum PersonaCommand {
    Generate {
        /// Demographic spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Example persona sheet; the built-in example when omitted.
        #[arg(long)]
        seed_persona: Option<PathBuf>,
        #[arg(short = 'n', long = "count")]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        /// Personas generated concurrently.
        #[arg(long, default_value_t = 1)]
        window: usize,
    },
}

#[derive(Subcommand)]
enum StudyCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    Export {
        run_id: String,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Also copy the export here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

type Failure = Box<dyn std::error::Error>;

fn fail(msg: impl Into<String>) -> Failure {
    msg.into().into()
}

fn mock_provider(dir: &Path) -> Result<MockProvider, Failure> {
    MockProvider::from_script_dir(dir).map_err(|e| fail(format!("mock scripts in {}: {e}", dir.display())))
}

fn live_gateway() -> Result<Arc<Gateway>, Failure> {
    let cfg = ProviderConfig::from_env().ok_or_else(|| {
        fail(format!("no model configured: set {} (or pass --mock-dir)", ProviderConfig::ENDPOINT_ENV))
    })?;
    let provider = Arc::new(HttpProvider::new(&cfg));
    Ok(Arc::new(Gateway::new(provider, cfg)?))
}

impl Common {
    fn gateways(&self) -> Result<Gateways, Failure> {
        let Some(dir) = self.mock_dir.clone() else {
            return Ok(Gateways::shared(live_gateway()?));
        };
        let personas = Arc::new(Gateway::mock(Arc::new(mock_provider(&dir)?)));
        // Each session gets its own script cursors.
        Ok(Gateways::per_session(personas, move |_, _| {
            let p = MockProvider::from_script_dir(&dir).expect("scripts loaded once already");
            Arc::new(Gateway::mock(Arc::new(p)))
        }))
    }

    fn browsers(&self) -> Result<Arc<dyn BrowserFactory>, Failure> {
        Ok(match (self.browser, &self.cdp_url) {
            (BrowserKind::Headless, _) => Arc::new(HeadlessFactory::default()),
            (BrowserKind::Cdp, Some(ws)) => Arc::new(CdpFactory::Connect { ws_url: ws.clone(), config: CdpConfig::default() }),
            (BrowserKind::Cdp, None) => {
                let l = ChromeLauncher::discover().ok_or_else(|| fail("no Chrome found: set UXSIM_CHROME or pass --cdp-url"))?;
                Arc::new(CdpFactory::Launch(l))
            }
        })
    }

    fn prompt_set(&self) -> Result<PromptSet, Failure> {
        Ok(match &self.prompts {
            Some(dir) => PromptSet::with_overrides(dir)?,
            None => PromptSet::default(),
        })
    }

    fn runner(&self) -> Result<StudyRunner, Failure> {
        let store = RunStore::open(&self.store).map_err(|e| fail(e.to_string()))?;
        Ok(StudyRunner::new(store, self.gateways()?, self.browsers()?).with_prompts(self.prompt_set()?))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

async fn persona_generate(
    common: &Common,
    spec: &Path,
    seed_persona: Option<&Path>,
    n: usize,
    out: &Path,
    rng_seed: u64,
    window: usize,
) -> Result<ExitCode, Failure> {
    let spec: DemographicSpec = serde_json::from_str(&read(spec)?).map_err(|e| fail(format!("spec: {e}")))?;
    let seed = match seed_persona {
        Some(p) => Persona::parse(&read(p)?)?,
        None => Persona::example(),
    };
    let gateway = match &common.mock_dir {
        Some(dir) => Arc::new(Gateway::mock(Arc::new(mock_provider(dir)?))),
        None => live_gateway()?,
    };
    let prompts = common.prompt_set()?;
    let (batch, failed) = match generate_batch(&gateway, &prompts, &spec, &seed, n, rng_seed, BatchOptions { window }).await {
        Ok(b) => (b, 0),
        Err(PersonaError::Incomplete { failed, batch }) => (*batch, failed),
        Err(e) => return Err(e.into()),
    };
    batch.write_dir(out)?;
    println!("{} of {n} personas written to {}", batch.personas.len(), out.display());
    if failed > 0 {
        eprintln!("{failed} persona(s) failed; see manifest.json");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

async fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let common = &cli.common;
    match cli.command {
        Command::Persona { command: PersonaCommand::Generate { spec, seed_persona, n, out, rng_seed, window } } => {
            persona_generate(common, &spec, seed_persona.as_deref(), n, &out, rng_seed, window).await
        }
        Command::Study { command: StudyCommand::Run { config } } => {
            let config = StudyConfig::load(&config)?;
            let runner = common.runner()?;
            let run = runner.run_study(config).await?;
            let finished = run.sessions.iter().filter(|s| s.status == uxsim_study::SessionStatus::Terminated).count();
            println!("{}", run.run_id);
            eprintln!("{:?}: {finished} of {} sessions terminated normally", run.status, run.sessions.len());
            if let Some(e) = &run.error {
                eprintln!("error: {e}");
            }
            Ok(if run.status == RunStatus::Completed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Study { command: StudyCommand::Export { run_id, format, out } } => {
            let format: ExportFormat = format.parse()?;
            let store = RunStore::open(&common.store).map_err(|e| fail(e.to_string()))?;
            let (path, bytes) = store.export(&run_id, format)?;
            if let Some(out) = out {
                std::fs::write(&out, &bytes).map_err(|e| fail(format!("{}: {e}", out.display())))?;
            }
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { addr, static_dir } => {
            let runner = Arc::new(common.runner()?);
            uxsim_study::serve(runner, addr, static_dir).await?;
            Ok(ExitCode::SUCCESS)
        }
        Command::FixtureShop { addr } => {
            let shop = uxsim_fixture_shop::spawn_on(addr).await?;
            println!("{}", shop.url("/"));
            tokio::signal::ctrl_c().await?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
