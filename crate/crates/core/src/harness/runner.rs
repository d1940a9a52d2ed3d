//! Builds models from a [`RunConfig`], runs chains in parallel, and writes
//! the samples CSV and the JSON summary.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::harness::cli::{CoinName, ModelName, PriorName, RunConfig, SamplerName, Variant};
use crate::harness::diagnostics::{
    compare_summaries, summarize_batches, Comparison, PosteriorSummary,
};
use crate::model::Model;
use crate::models::data::{load_bools, load_reals};
use crate::models::{
    relabel_by_location, BallDeterministic, BallParams, BallPrior, BallStochastic, ConstantCoin,
    FairCoin, GmmData, GmmDeterministic, GmmStochastic, MarkovCoin, SurveyBlackbox, SurveyData,
    SurveyDeterministic, SurveyStochastic,
};
use crate::rng::RngStream;
use crate::samplers::{
    run_chain, HmcConfig, RunLength, SampleBatch, SamplerConfig, SamplerKind, SghmcConfig,
};

/// Answers used when the survey is run without `--data`.
pub const DEFAULT_SURVEY_YES: usize = 15;
pub const DEFAULT_SURVEY_NO: usize = 5;

/// A model ready to sample, with its default starting point.
pub struct BuiltModel {
    pub model: Box<dyn Model>,
    pub init: Vec<f64>,
    /// Mixture samples are relabeled before summarizing.
    pub relabel: bool,
}

fn survey_data(cfg: &RunConfig) -> Result<SurveyData> {
    match &cfg.data {
        Some(p) => SurveyData::new(load_bools(p)?),
        None => SurveyData::counts(DEFAULT_SURVEY_YES, DEFAULT_SURVEY_NO),
    }
}

pub fn build_model(cfg: &RunConfig) -> Result<BuiltModel> {
    let uniform = cfg.prior == PriorName::Uniform;
    let (model, init, relabel): (Box<dyn Model>, Vec<f64>, bool) = match cfg.model {
        ModelName::Survey => {
            let data = survey_data(cfg)?;
            let model: Box<dyn Model> = match cfg.variant {
                Variant::Stochastic => Box::new(SurveyStochastic {
                    data,
                    theta_prior: uniform,
                }),
                Variant::Deterministic => Box::new(SurveyDeterministic {
                    data,
                    theta_prior: uniform,
                }),
                Variant::Blackbox => match cfg.coin {
                    CoinName::Fair => Box::new(SurveyBlackbox {
                        data,
                        coins: FairCoin,
                        theta_prior: uniform,
                    }),
                    CoinName::Honest => Box::new(SurveyBlackbox {
                        data,
                        coins: ConstantCoin(true),
                        theta_prior: uniform,
                    }),
                    CoinName::Markov => Box::new(SurveyBlackbox {
                        data,
                        coins: MarkovCoin::new(cfg.coin_stay)?,
                        theta_prior: uniform,
                    }),
                },
            };
            (model, vec![0.0], false)
        }
        ModelName::Ball => {
            let params = BallParams::new(cfg.vw, cfg.vs, cfg.distance)?;
            let prior = match cfg.prior {
                PriorName::Flat => BallPrior::Flat,
                PriorName::Uniform => BallPrior::UniformSin2Alpha,
                PriorName::Angle => BallPrior::AngleNormal,
            };
            let model: Box<dyn Model> = match cfg.variant {
                Variant::Deterministic => Box::new(BallDeterministic { params, prior }),
                _ => Box::new(BallStochastic { params, prior }),
            };
            (model, vec![0.0], false)
        }
        ModelName::Gmm => {
            let path = cfg
                .data
                .as_ref()
                .ok_or_else(|| Error::Usage("gmm requires --data".into()))?;
            let data = GmmData::new(load_reals(path)?, cfg.n_comp)?;
            let init = data.initial_point();
            let model: Box<dyn Model> = match cfg.variant {
                Variant::Deterministic => Box::new(GmmDeterministic::new(data)),
                _ => Box::new(GmmStochastic::new(data)),
            };
            (model, init, true)
        }
    };
    let init = match &cfg.init {
        Some(x) => {
            if x.len() != model.dimension() {
                return Err(Error::Usage(format!(
                    "--init has {} values, the model has {} parameters",
                    x.len(),
                    model.dimension()
                )));
            }
            x.clone()
        }
        None => init,
    };
    Ok(BuiltModel {
        model,
        init,
        relabel,
    })
}

pub fn sampler_config(cfg: &RunConfig) -> Result<SamplerConfig> {
    let kind = cfg.sampler_kind();
    Ok(match kind {
        SamplerKind::Hmc => {
            SamplerConfig::Hmc(HmcConfig::new(cfg.step_size, cfg.n_leapfrog, cfg.mass)?)
        }
        k => SamplerConfig::Sghmc(SghmcConfig::new(
            cfg.step_size,
            cfg.n_leapfrog,
            cfg.friction,
            cfg.mass,
            EstimatorConfig::new(k.semantics(), cfg.n_draws())?,
        )?),
    })
}

/// Everything a `run` produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub batches: Vec<SampleBatch>,
    pub summary: PosteriorSummary,
    pub seconds: f64,
}

/// Runs `cfg.chains` chains, chain `i` on stream `i` of `cfg.seed`.
pub fn run_chains(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let built = build_model(cfg)?;
    let sampler = sampler_config(cfg)?;
    let len = RunLength::new(cfg.samples, cfg.burnin, cfg.thin)?;
    let start = Instant::now();
    let model: &dyn Model = built.model.as_ref();
    let results: Vec<Result<SampleBatch>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|chain| {
                let init = &built.init;
                let sampler = &sampler;
                let len = &len;
                s.spawn(move || {
                    let mut rng = RngStream::with_stream(cfg.seed, chain as u64);
                    run_chain(model, sampler, init, len, &mut rng)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Numerical("chain thread panicked".into())))
            })
            .collect()
    });
    let seconds = start.elapsed().as_secs_f64();
    let batches = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = if built.relabel {
        summarize_batches(&batches, relabel_by_location)?
    } else {
        summarize_batches(&batches, <[f64]>::to_vec)?
    };
    Ok(RunOutput {
        batches,
        summary,
        seconds,
    })
}

/// The summary document written as `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryDoc {
    pub model: ModelName,
    pub variant: Variant,
    pub sampler: SamplerName,
    pub seed: u64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub ess: Vec<f64>,
    pub mcse: Vec<f64>,
    pub divergences: usize,
    pub accept_rate: Option<f64>,
    pub seconds: Option<f64>,
}

fn sampler_name(k: SamplerKind) -> SamplerName {
    match k {
        SamplerKind::Hmc => SamplerName::Hmc,
        SamplerKind::Sghmc => SamplerName::Sghmc,
        SamplerKind::Mhmc => SamplerName::Mhmc,
    }
}

impl SummaryDoc {
    pub fn new(cfg: &RunConfig, out: &RunOutput) -> Self {
        let s = &out.summary;
        Self {
            model: cfg.model,
            variant: cfg.variant,
            sampler: sampler_name(cfg.sampler_kind()),
            seed: cfg.seed,
            mean: s.mean.clone(),
            sd: s.sd.clone(),
            ess: s.ess.clone(),
            mcse: s.mcse.clone(),
            divergences: s.divergences,
            accept_rate: s.accept_rate,
            seconds: cfg.timing.then_some(out.seconds),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Samples CSV: `chain,iter,logp,x0,...`, where `iter` counts sampler steps
/// including burn-in.
pub fn write_samples<W: Write>(w: W, batches: &[SampleBatch], len: &RunLength) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim = batches.first().map_or(0, SampleBatch::dimension);
    let mut header = vec!["chain".to_owned(), "iter".to_owned(), "logp".to_owned()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    out.write_record(&header)?;
    for (chain, b) in batches.iter().enumerate() {
        for (k, (x, logp)) in b.samples.iter().zip(&b.logps).enumerate() {
            let iter = len.burnin + (k + 1) * len.thin;
            let mut row = vec![chain.to_string(), iter.to_string(), format!("{logp:?}")];
            row.extend(x.iter().map(|v| format!("{v:?}")));
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Runs `cfg` and writes `samples.csv` and `summary.json` under `cfg.out`
/// when given. Returns the summary document.
pub fn execute_run(cfg: &RunConfig) -> Result<SummaryDoc> {
    let out = run_chains(cfg)?;
    let doc = SummaryDoc::new(cfg, &out);
    if let Some(dir) = &cfg.out {
        write_outputs(dir, cfg, &out, &doc)?;
    }
    Ok(doc)
}

fn write_outputs(dir: &Path, cfg: &RunConfig, out: &RunOutput, doc: &SummaryDoc) -> Result<()> {
    fs::create_dir_all(dir)?;
    let len = RunLength::new(cfg.samples, cfg.burnin, cfg.thin)?;
    let file = fs::File::create(dir.join("samples.csv"))?;
    write_samples(std::io::BufWriter::new(file), &out.batches, &len)?;
    fs::write(dir.join("summary.json"), doc.to_json()?)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub stochastic: SummaryDoc,
    pub deterministic: SummaryDoc,
    pub comparison: Comparison,
}

/// Samples the stochastic variant with its own sampler and the deterministic
/// variant with HMC, then compares posterior means.
pub fn execute_compare(cfg: &RunConfig) -> Result<CompareReport> {
    let st_cfg = cfg.stochastic_counterpart();
    let det_cfg = cfg.deterministic_counterpart();
    let st = run_chains(&st_cfg)?;
    let det = run_chains(&det_cfg)?;
    let comparison = compare_summaries(&st.summary, &det.summary)?;
    let report = CompareReport {
        stochastic: SummaryDoc::new(&st_cfg, &st),
        deterministic: SummaryDoc::new(&det_cfg, &det),
        comparison,
    };
    if let Some(dir) = &cfg.out {
        write_outputs(&dir.join("stochastic"), &st_cfg, &st, &report.stochastic)?;
        write_outputs(
            &dir.join("deterministic"),
            &det_cfg,
            &det,
            &report.deterministic,
        )?;
        let mut s = serde_json::to_string_pretty(&report)?;
        s.push('\n');
        fs::write(dir.join("compare.json"), s)?;
    }
    Ok(report)
}
