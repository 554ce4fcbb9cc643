use std::collections::BTreeSet;

use emodist::LabelSpace;

use crate::config::PipelineConfig;
use crate::workspace::Workspace;
use crate::{PipelineError, RunOptions, Stage};

mod calibrate;
mod dists;
mod evaluate;
mod ingest;
mod report;
mod sample;
mod stats;
mod transparency;

pub(crate) struct Ctx<'a> {
    pub config: &'a PipelineConfig,
    pub space: LabelSpace,
    pub ws: Workspace,
    pub options: &'a RunOptions,
}

/// Run `stages` in pipeline order. An empty set does nothing.
pub fn run_pipeline(
    config: &PipelineConfig,
    stages: &BTreeSet<Stage>,
    options: &RunOptions,
) -> Result<(), PipelineError> {
    if stages.is_empty() {
        log::info!("no stages selected");
        return Ok(());
    }
    config.validate()?;
    let mut ctx = Ctx {
        config,
        space: config.label_space()?,
        ws: Workspace::open(&config.output_dir, config.seed, &config.hash(), config.base_dir.as_deref())?,
        options,
    };
    for &stage in stages {
        log::info!("stage {stage}");
        ctx.ws.begin(stage);
        match stage {
            Stage::Ingest => ingest::run(&mut ctx)?,
            Stage::Sample => sample::run(&mut ctx)?,
            Stage::Dists => dists::run(&mut ctx)?,
            Stage::Evaluate => evaluate::run(&mut ctx)?,
            Stage::Transparency => transparency::run(&mut ctx)?,
            Stage::Calibrate => calibrate::run(&mut ctx)?,
            Stage::Stats => stats::run(&mut ctx)?,
            Stage::Report => report::run(&mut ctx)?,
        }
        ctx.ws.finish()?;
    }
    Ok(())
}
