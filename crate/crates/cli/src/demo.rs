use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use attributor_core::service::{
    AttributeOptions, AttributionConfig, AttributionService, ProviderSpec, WorkspaceConfig,
};
use attributor_core::toy::scenario::Scenario;
use attributor_core::toy::{init_workspace, TrainConfig, CORPUS_FILE, MODEL_DIR};

use crate::output;

pub struct DemoOptions<'a> {
    pub scenario: &'a str,
    pub seed: u64,
    pub workspace: &'a Path,
    pub subprocess: bool,
    pub force: bool,
    pub attribution: AttributionConfig,
    pub port: u16,
}

/// Build the scenario workspace, preprocess, and attribute its query.
pub fn run(opts: &DemoOptions<'_>, out: &mut impl Write) -> anyhow::Result<()> {
    let scenario = Scenario::by_name(opts.scenario, opts.seed)
        .with_context(|| format!("unknown scenario {:?} (expected disaster or finance)", opts.scenario))?;
    let ws = opts.workspace;
    if ws.join(attributor_core::service::CONFIG_FILE).exists() {
        if !opts.force {
            bail!(attributor_core::Error::Precondition(format!(
                "{} already holds a workspace; pass --force to rebuild it",
                ws.display()
            )));
        }
        for sub in ["store", "sessions", "tmp", MODEL_DIR] {
            let p = ws.join(sub);
            if p.exists() {
                std::fs::remove_dir_all(&p).with_context(|| format!("removing {}", p.display()))?;
            }
        }
    }
    let train = TrainConfig { seed: opts.seed, ..TrainConfig::default() };
    let (mut config, run) = init_workspace(
        ws,
        &scenario.corpus,
        scenario.vocabulary(),
        train,
        opts.attribution.clone(),
    )?;
    writeln!(
        out,
        "scenario {}: {} documents, {} checkpoints, final epoch loss {:.4}",
        scenario.name,
        scenario.corpus.len(),
        run.checkpoints.len(),
        run.epoch_losses.last().copied().unwrap_or(f64::NAN)
    )?;
    if opts.subprocess {
        config = subprocess_config(config, ws)?;
        config.save(ws)?;
    }

    let service = AttributionService::with_config(ws, config)?;
    let report = service.preprocess(false)?;
    writeln!(out, "{} pairs computed", report.computed_pairs)?;
    let session = service.create_session(&scenario.prompt, Some(&scenario.generated), None)?;
    writeln!(out, "session {}", session.session_id)?;

    let options = AttributeOptions::default();
    let (top, score) = match &scenario.edited {
        Some(edited) => {
            let cmp = service.compare(&session.session_id, edited, None, None, &options)?;
            output::comparison(out, &cmp)?;
            output::write_json(&ws.join("demo_comparison.json"), &cmp)?;
            (cmp.edited.positive[0].example_id, cmp.edited.positive[0].score)
        }
        None => {
            let r = service.attribute(&session.session_id, Some(&scenario.query_indices), &options)?;
            output::attribution(out, &r)?;
            output::write_json(&ws.join("demo_attribution.json"), &r)?;
            (r.positive[0].example_id, r.positive[0].score)
        }
    };
    writeln!(
        out,
        "top positive example #{top} (score {score:+.6e}); planted example #{}{}",
        scenario.planted_id,
        if top == scenario.planted_id { " recovered" } else { " not recovered" }
    )?;
    writeln!(
        out,
        "next: attributor serve --workspace {} --port {}  then open http://127.0.0.1:{}/",
        ws.display(),
        opts.port,
        opts.port
    )?;
    Ok(())
}

/// Point the workspace at `attributor toy-provider` run as a child process.
fn subprocess_config(mut config: WorkspaceConfig, ws: &Path) -> anyhow::Result<WorkspaceConfig> {
    let exe = std::env::current_exe().context("locating the attributor executable")?;
    let abs = std::path::absolute(ws)?;
    config.provider = ProviderSpec::Command {
        argv: vec![
            exe.display().to_string(),
            "toy-provider".into(),
            "--model-dir".into(),
            abs.join(MODEL_DIR).display().to_string(),
            "--corpus-file".into(),
            abs.join(CORPUS_FILE).display().to_string(),
        ],
    };
    Ok(config)
}
