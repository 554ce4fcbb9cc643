//! Collect LLM responses into the per-model stores.

use std::collections::HashMap;
use std::time::Duration;

use emodist::corpus::Vad;
use emodist::dist::human_distribution;
use emodist::sampler::{collect, ChatBackend, MockBackend, Planted, Task};
use emodist::seed::SeedHasher;
use emodist::{CategoricalDistribution, LabelSpace, TextRecord};

use super::ingest::{self, CoreText};
use super::Ctx;
use crate::config::{BackendKind, ModelConfig, MockConfig};
use crate::http::HttpBackend;
use crate::{PipelineError, Stage};

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let categorical: Vec<TextRecord> = ctx
        .ws
        .read_jsonl::<CoreText>(ingest::CATEGORICAL, Stage::Ingest)?
        .into_iter()
        .map(|c| c.record)
        .collect();
    let vad: Option<Vec<TextRecord>> = match ctx.config.corpus.vad {
        Some(_) => Some(
            ctx.ws
                .read_jsonl::<CoreText>(ingest::VAD, Stage::Ingest)?
                .into_iter()
                .map(|c| c.record)
                .collect(),
        ),
        None => None,
    };
    let seed = ctx.ws.stage_seed(Stage::Sample);

    for model in &ctx.config.models {
        let mut tasks = vec![(Task::Categorical, &categorical, ctx.config.categorical_store(model))];
        if let Some(vad) = &vad {
            tasks.push((Task::Vad, vad, ctx.config.vad_store(model)));
        }
        for (task, texts, store) in tasks {
            let backend: Box<dyn ChatBackend> = match model.backend {
                BackendKind::Store => {
                    log::info!("{}: store-backed, not sampling", model.name);
                    break;
                }
                BackendKind::Mock => {
                    let model_seed = SeedHasher::new(seed, &model.name).str(task_name(task)).finish();
                    Box::new(mock_backend(model_seed, &model.mock, texts, task, &ctx.space)?)
                }
                BackendKind::Http => Box::new(http_backend(model, ctx.options.base_url.as_deref())?),
            };
            if let Some(parent) = store.parent() {
                std::fs::create_dir_all(parent)?;
            }
            let summary = collect(texts, task, &model.name, backend.as_ref(), &ctx.config.sampler, &ctx.space, &store)
                .map_err(|e| PipelineError::stage(Stage::Sample, format!("{}: {e}", model.name)))?;
            log::info!(
                "{} {}: {} planned, {} skipped, {} calls, {} backend failures",
                model.name,
                task_name(task),
                summary.planned,
                summary.skipped,
                summary.backend_calls,
                summary.backend_failures
            );
            ctx.ws.register(&store)?;
        }
    }
    Ok(())
}

pub(crate) fn task_name(task: Task) -> &'static str {
    match task {
        Task::Categorical => "categorical",
        Task::Vad => "vad",
    }
}

fn http_backend(model: &ModelConfig, override_url: Option<&str>) -> Result<HttpBackend, PipelineError> {
    let url = override_url.or(model.base_url.as_deref()).ok_or_else(|| {
        PipelineError::Config(format!("{}: no base_url in the config and no --base-url flag", model.name))
    })?;
    Ok(HttpBackend::from_env(
        url,
        model.api_model.clone(),
        &model.api_key_env,
        Duration::from_secs(model.timeout_secs),
    ))
}

/// Mock answers drawn from the human annotations, with `mix` of the mass
/// moved to the `lean` label (or spread uniformly). VAD answers are the
/// human mean pulled toward the scale midpoint by `mix`.
fn mock_backend(
    seed: u64,
    cfg: &MockConfig,
    texts: &[TextRecord],
    task: Task,
    space: &LabelSpace,
) -> Result<MockBackend, PipelineError> {
    let target = match &cfg.lean {
        Some(l) => CategoricalDistribution::point_mass(space.len(), space.index_of(l).expect("validated label")),
        None => CategoricalDistribution::uniform(space.len()),
    };
    let mid = (Vad::MIN + Vad::MAX) / 2.0;
    let mut planted = HashMap::new();
    for t in texts {
        let p = match task {
            Task::Categorical => {
                let Some(ann) = t.categorical() else { continue };
                let human = human_distribution(ann, space).map_err(|e| PipelineError::stage(Stage::Sample, e))?;
                let mixed = human
                    .probs()
                    .iter()
                    .zip(target.probs())
                    .map(|(h, g)| (1.0 - cfg.mix) * h + cfg.mix * g)
                    .collect();
                Planted::Distribution(CategoricalDistribution::from_weights_or_uniform(mixed))
            }
            Task::Vad => {
                let Some(mean) = t.vad().and_then(|a| a.mean()) else { continue };
                Planted::Vad(Vad::from_dims(mean.dims().map(|x| mid + (1.0 - cfg.mix) * (x - mid))))
            }
        };
        planted.insert(t.text_id.clone(), p);
    }
    Ok(MockBackend::new(seed, space.clone(), planted, cfg.garbage_rate))
}
