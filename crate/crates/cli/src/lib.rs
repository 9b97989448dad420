//! Subcommands of the `gamma-osdp` experiment driver.
//!
//! Every subcommand that writes files also writes `manifest.json` into its
//! output directory. `replay` re-runs a manifest into a fresh directory and
//! compares the outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub mod gen;
pub mod omc;
pub mod osdp;
pub mod similarity;
pub mod verify;

/// Online semi-definite programming experiments.
#[derive(Debug, Parser)]
#[command(name = "gamma-osdp", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a planted biclustered instance with clique side-information graphs.
    GenBicluster(gen::GenBiclusterArgs),
    /// Generate a clique-partition graph and its labels.
    GenCliques(gen::GenCliquesArgs),
    /// Mistake-driven matrix completion on a generated instance.
    OmcRun(omc::OmcRunArgs),
    /// OSDP regret run against the best fixed decision in hindsight.
    OsdpRun(osdp::OsdpRunArgs),
    /// Mistake-driven similarity prediction on a graph.
    SimilarityRun(similarity::SimilarityRunArgs),
    /// Run the randomized property suites.
    Verify(verify::VerifyArgs),
    /// Re-run a manifest and compare its outputs byte for byte.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenBicluster(_) => "gen-bicluster",
            Command::GenCliques(_) => "gen-cliques",
            Command::OmcRun(_) => "omc-run",
            Command::OsdpRun(_) => "osdp-run",
            Command::SimilarityRun(_) => "similarity-run",
            Command::Verify(_) => "verify",
            Command::Replay(_) => "replay",
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        match self {
            Command::GenBicluster(a) => Some(&a.out_dir),
            Command::GenCliques(a) => Some(&a.out_dir),
            Command::OmcRun(a) => Some(&a.out_dir),
            Command::OsdpRun(a) => Some(&a.out_dir),
            Command::SimilarityRun(a) => Some(&a.out_dir),
            Command::Verify(a) => a.out_dir.as_deref(),
            Command::Replay(_) => None,
        }
    }

    fn set_out_dir(&mut self, dir: PathBuf) -> Result<()> {
        match self {
            Command::GenBicluster(a) => a.out_dir = dir,
            Command::GenCliques(a) => a.out_dir = dir,
            Command::OmcRun(a) => a.out_dir = dir,
            Command::OsdpRun(a) => a.out_dir = dir,
            Command::SimilarityRun(a) => a.out_dir = dir,
            Command::Verify(a) => a.out_dir = Some(dir),
            Command::Replay(_) => bail!(UsageError("a replay manifest cannot be replayed".into())),
        }
        Ok(())
    }

    /// Makes input paths absolute so a manifest can be replayed from anywhere.
    fn resolve_inputs(&mut self) -> Result<()> {
        fn abs(p: &mut PathBuf) -> Result<()> {
            *p = fs::canonicalize(&*p).with_context(|| format!("cannot open {}", p.display()))?;
            Ok(())
        }
        match self {
            Command::OmcRun(a) => abs(&mut a.instance_dir),
            Command::OsdpRun(a) => a.gamma_file.as_mut().map_or(Ok(()), abs),
            Command::SimilarityRun(a) => {
                abs(&mut a.graph)?;
                abs(&mut a.labels)
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Invalid arguments discovered after parsing; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// 2 for usage and parameter errors, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<gamma_osdp::Error>() {
            if matches!(err, gamma_osdp::Error::InvalidParameter(_) | gamma_osdp::Error::Spec(_)) {
                return 2;
            }
        }
    }
    1
}

/// What a subcommand reports back to the dispatcher.
pub struct RunRecord {
    pub params: serde_json::Value,
    pub totals: serde_json::Value,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    /// Text printed on standard output.
    pub stdout: String,
    pub exit: u8,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub command: Command,
    pub params: serde_json::Value,
    pub outputs: Vec<String>,
    pub totals: serde_json::Value,
    pub duration_secs: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Runs a subcommand and returns its exit status.
pub fn run(command: Command) -> Result<u8> {
    let (rec, _) = execute(command)?;
    print!("{}", rec.stdout);
    Ok(rec.exit)
}

fn execute(mut command: Command) -> Result<(RunRecord, Option<PathBuf>)> {
    if let Command::Replay(a) = &command {
        return Ok((replay(a)?, None));
    }
    command.resolve_inputs()?;
    if let Some(dir) = command.out_dir() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let start = Instant::now();
    let rec = match &command {
        Command::GenBicluster(a) => gen::gen_bicluster(a)?,
        Command::GenCliques(a) => gen::gen_cliques(a)?,
        Command::OmcRun(a) => omc::omc_run(a)?,
        Command::OsdpRun(a) => osdp::osdp_run(a)?,
        Command::SimilarityRun(a) => similarity::similarity_run(a)?,
        Command::Verify(a) => verify::verify(a)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    log::info!("{} finished in {:.3?}", command.name(), start.elapsed());
    let out_dir = command.out_dir().map(Path::to_path_buf);
    if let Some(dir) = &out_dir {
        let manifest = RunManifest {
            subcommand: command.name().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            params: rec.params.clone(),
            outputs: rec.outputs.clone(),
            totals: rec.totals.clone(),
            duration_secs: start.elapsed().as_secs_f64(),
            command,
        };
        write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    }
    Ok((rec, out_dir))
}

fn replay(a: &ReplayArgs) -> Result<RunRecord> {
    let text = fs::read_to_string(&a.manifest).with_context(|| format!("cannot read {}", a.manifest.display()))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).with_context(|| format!("{} is not a run manifest", a.manifest.display()))?;
    let src_dir = a.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    if fs::canonicalize(&src_dir).ok() == fs::canonicalize(&a.out_dir).ok() {
        bail!(UsageError("replay output directory must differ from the manifest's".into()));
    }
    let mut command = manifest.command;
    command.set_out_dir(a.out_dir.clone())?;
    let (rec, _) = execute(command)?;
    let mut stdout = String::new();
    let mut mismatches = 0;
    for name in &manifest.outputs {
        let old = fs::read(src_dir.join(name)).with_context(|| format!("missing original output {name}"))?;
        let new = fs::read(a.out_dir.join(name)).with_context(|| format!("replay did not produce {name}"))?;
        let same = old == new;
        mismatches += usize::from(!same);
        stdout.push_str(&format!("{} {name}\n", if same { "identical" } else { "DIFFERS" }));
    }
    if rec.outputs != manifest.outputs {
        mismatches += 1;
        stdout.push_str("DIFFERS output file list\n");
    }
    stdout.push_str(&format!("replay {}: {} of {} outputs identical\n", manifest.subcommand, manifest.outputs.len() - mismatches.min(manifest.outputs.len()), manifest.outputs.len()));
    Ok(RunRecord {
        params: serde_json::Value::Null,
        totals: serde_json::json!({ "mismatches": mismatches }),
        outputs: Vec::new(),
        stdout,
        exit: if mismatches == 0 { 0 } else { 1 },
    })
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Seed of replica `r`; replica 0 keeps the base seed.
pub fn derive_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Options shared by the runs that support independent replicas.
#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct ReplicaArgs {
    /// Independent replicas, each with a seed derived from --seed.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    /// Worker threads for the replicas.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl ReplicaArgs {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.replicas == 0 || self.jobs == 0 {
            bail!(UsageError("--replicas and --jobs must be at least 1".into()));
        }
        Ok(())
    }

    /// Trace file name of replica `r`.
    pub(crate) fn trace_name(&self, r: usize) -> String {
        if self.replicas == 1 {
            "trace.csv".into()
        } else {
            format!("trace_{r}.csv")
        }
    }
}

/// Runs `f(r)` for every replica on up to `jobs` threads; results come back in replica order.
pub(crate) fn run_replicas<T: Send>(
    replicas: usize,
    jobs: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    let jobs = jobs.clamp(1, replicas.max(1));
    if jobs == 1 {
        return (0..replicas).map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..replicas).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::Relaxed);
                if r >= replicas {
                    break;
                }
                let out = f(r);
                slots.lock().expect("no panics while holding the lock")[r] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|o| o.expect("every replica ran"))
        .collect()
}
