use std::path::PathBuf;

use anyhow::Result;
use gamma_osdp::verify::{run, Fault, Suite, VerifyOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{write_text, RunRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteArg {
    Linalg,
    Osdp,
    Omc,
    Similarity,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::Linalg => Suite::Linalg,
            SuiteArg::Osdp => Suite::Osdp,
            SuiteArg::Omc => Suite::Omc,
            SuiteArg::Similarity => Suite::Similarity,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    pub suite: SuiteArg,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report to `<dir>/report.txt`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Test fixture: perturb the regularizer gradient so the suites must fail.
    #[arg(long, hide = true)]
    #[serde(default)]
    pub inject_fault: bool,
}

pub fn verify(a: &VerifyArgs) -> Result<RunRecord> {
    let opts = VerifyOptions {
        trials: a.trials,
        seed: a.seed,
        fault: a.inject_fault.then_some(Fault::GradientScale),
    };
    let report = run(a.suite.into(), &opts)?;
    let text = report.to_string();
    let mut outputs = Vec::new();
    if let Some(dir) = &a.out_dir {
        write_text(&dir.join("report.txt"), &text)?;
        outputs.push("report.txt".into());
    }
    Ok(RunRecord {
        params: serde_json::to_value(a)?,
        totals: json!({ "properties": report.results.len(), "failed": report.failures() }),
        outputs,
        stdout: text,
        exit: if report.passed() { 0 } else { 1 },
    })
}
