use std::fs;
use std::io::Write;

use irand_core::inference::{
    did_regression_estimate, did_reorganized_estimate, irand_estimate, pooled_estimate,
    IrandConfig, Tail,
};
use irand_core::matching::MatchingOptions;
use irand_core::mediation::{categorize, mediation_reports, Engine, MediationSpec};
use irand_core::panel::{load_panel, write_panel, TwoPointPanel, VariableKind, VariableSchema};
use irand_core::simulation::{
    run_mse_experiment, DgpConfig, Design, EstimatorKind, ExperimentConfig, MseSurface,
};
use irand_core::subsample::Strategy;
use irand_core::synth::{bundled_summary, load_summary, synthesize_panel, SynthOptions};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_name, RunConfig};
use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 0;

/// Text written to stdout, or to `--output` when given.
pub struct Output {
    pub body: String,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn emit(cfg: &RunConfig, body: String) -> Result<Output, CliError> {
    match &cfg.output {
        Some(path) => {
            fs::write(path, &body)?;
            Ok(Output { body: String::new() })
        }
        None => Ok(Output { body }),
    }
}

fn parse_kinds(cfg: &RunConfig) -> Result<Vec<(String, VariableKind)>, CliError> {
    cfg.kinds
        .iter()
        .flatten()
        .map(|entry| {
            let (name, kind) = entry
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--kind expects name=kind, got `{entry}`")))?;
            Ok((name.to_string(), parse_name(kind, "variable kind")?))
        })
        .collect()
}

fn schema_from(cfg: &RunConfig, with_mediator: bool) -> Result<VariableSchema, CliError> {
    let treatment = cfg.require(&cfg.treatment, "treatment")?;
    let outcome = cfg.require(&cfg.outcome, "outcome")?;
    let confounders: Vec<&str> = cfg.confounders.iter().flatten().map(String::as_str).collect();
    let mut schema = VariableSchema::new(treatment, &confounders, outcome);
    if with_mediator {
        schema = schema.with_mediator(cfg.require(&cfg.mediator, "mediator")?);
    }
    for (name, kind) in parse_kinds(cfg)? {
        schema = schema.with_kind(&name, kind);
    }
    Ok(schema)
}

fn read_input(cfg: &RunConfig, schema: VariableSchema) -> Result<TwoPointPanel, CliError> {
    let input = cfg.require(&cfg.input, "input")?;
    Ok(load_panel(input, schema)?)
}

fn tail_of(cfg: &RunConfig, needed: bool) -> Result<Tail, CliError> {
    match &cfg.tail {
        Some(t) => Ok(t.parse()?),
        None if needed => Err(CliError::Usage(
            "--tail is required for permutation-based estimators (lower, upper or two_sided)".into(),
        )),
        None => Ok(Tail::default()),
    }
}

fn irand_config(cfg: &RunConfig, tail: Tail) -> Result<IrandConfig, CliError> {
    let defaults = IrandConfig::default();
    let strategy: Strategy = match &cfg.strategy {
        Some(s) => parse_name(s, "strategy")?,
        None => defaults.strategy,
    };
    Ok(IrandConfig {
        m: cfg.m.unwrap_or(defaults.m),
        s: cfg.s.unwrap_or(defaults.s),
        tail,
        strategy,
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
        matching: MatchingOptions::default(),
    })
}

/// Fills in the defaults a command actually used so the echo is complete.
fn echo_irand(cfg: &RunConfig, ic: &IrandConfig) -> RunConfig {
    RunConfig {
        m: Some(ic.m),
        s: Some(ic.s),
        seed: Some(ic.seed),
        tail: Some(tail_name(ic.tail).into()),
        strategy: Some(
            match ic.strategy {
                Strategy::MinOverlap => "min_overlap",
                Strategy::IndependentUniform => "independent_uniform",
            }
            .into(),
        ),
        ..cfg.clone()
    }
}

fn tail_name(t: Tail) -> &'static str {
    match t {
        Tail::Lower => "lower",
        Tail::Upper => "upper",
        Tail::TwoSided => "two_sided",
    }
}

pub fn estimate(cfg: &RunConfig) -> Result<Output, CliError> {
    let estimator = cfg.estimator.clone().unwrap_or_else(|| "irand".into());
    let permutation_based = matches!(estimator.as_str(), "irand" | "pooled" | "did_reorganized");
    let wants_test = cfg.s != Some(0);
    let tail = tail_of(cfg, permutation_based && wants_test)?;
    let ic = irand_config(cfg, tail)?;
    let schema = schema_from(cfg, false)?;
    let panel = read_input(cfg, schema)?;
    let spec = panel.schema().analysis_spec();

    let report: Value = match estimator.as_str() {
        "irand" => serde_json::to_value(irand_estimate(&panel, &spec, &ic)?),
        "pooled" => serde_json::to_value(pooled_estimate(&panel, &spec, ic.s, tail, ic.seed, &ic.matching)?),
        "did_regression" => serde_json::to_value(did_regression_estimate(&panel, &spec)?),
        "did_reorganized" => serde_json::to_value(did_reorganized_estimate(
            &panel, &spec, ic.s, tail, ic.seed, &ic.matching,
        )?),
        other => return Err(CliError::Usage(format!("unknown estimator `{other}`"))),
    }
    .map_err(irand_core::Error::from)?;

    let mut echo = echo_irand(cfg, &ic);
    echo.estimator = Some(estimator.clone());
    let out = json!({
        "command": "estimate",
        "estimator": estimator,
        "config": echo,
        "n_individuals": panel.n_individuals(),
        "report": report,
    });
    emit(cfg, to_json(&out))
}

pub fn mediate(cfg: &RunConfig) -> Result<Output, CliError> {
    let tail = tail_of(cfg, cfg.s != Some(0))?;
    let ic = irand_config(cfg, tail)?;
    let engine: Engine = match &cfg.engine {
        Some(e) => parse_name(e, "engine")?,
        None => Engine::Irand,
    };
    let mut schema = schema_from(cfg, true)?;
    let mut treatment = schema.treatment_column.clone();
    if cfg.cuts.is_some() {
        // Declared ordinal so raw non-binary values load; categorized below.
        schema.variable_kinds.insert(treatment.clone(), VariableKind::Ordinal);
    }
    let mut panel = read_input(cfg, schema)?;
    if let Some(cuts) = &cfg.cuts {
        let name = format!("{treatment}_category");
        panel = categorize(&panel, &treatment, cuts, &name)?;
        let mut s = panel.schema().clone();
        s.treatment_column = name.clone();
        panel = panel.with_schema(s)?;
        treatment = name;
    }
    let spec = MediationSpec {
        treatment,
        outcome: panel.schema().outcome_column.clone(),
        confounders: panel.schema().confounder_columns.clone(),
        mediator: cfg.require(&cfg.mediator, "mediator")?.clone(),
        engine,
        config: ic,
    };
    let reports = mediation_reports(&panel, &spec)?;
    let mut echo = echo_irand(cfg, &ic);
    echo.engine = Some(match engine {
        Engine::Irand => "irand".into(),
        Engine::Pooled => "pooled".into(),
    });
    let out = json!({
        "command": "mediate",
        "config": echo,
        "n_individuals": panel.n_individuals(),
        "reports": reports,
    });
    emit(cfg, to_json(&out))
}

pub fn synth(cfg: &RunConfig) -> Result<(Output, String), CliError> {
    let summary = match &cfg.summary {
        Some(p) => load_summary(p)?,
        None => bundled_summary(),
    };
    let n = cfg.n.unwrap_or(256);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let mut opts = SynthOptions::new(n, seed);
    opts.missingness = cfg.missingness.unwrap_or(false);
    if let Some(t) = &cfg.treatment {
        opts.treatment_column = Some(t.clone());
    }
    let panel = synthesize_panel(&summary, &opts)?;
    let mut csv = Vec::new();
    write_panel(&panel, &mut csv)?;
    let csv = String::from_utf8(csv).expect("csv is utf-8");
    let echo = RunConfig {
        n: Some(n),
        seed: Some(seed),
        missingness: Some(opts.missingness),
        treatment: opts.treatment_column.clone(),
        ..cfg.clone()
    };
    let summary_json = to_json(&json!({
        "command": "synth",
        "config": echo,
        "individuals": panel.n_individuals(),
        "rows": 2 * panel.n_individuals(),
        "variables": panel.variables(),
    }));
    match &cfg.output {
        Some(path) => {
            fs::write(path, csv)?;
            Ok((Output { body: summary_json }, String::new()))
        }
        // The panel goes to stdout, the summary to stderr.
        None => Ok((Output { body: csv }, summary_json)),
    }
}

fn estimator_kind(name: &str, m: usize, strategy: Strategy) -> Result<EstimatorKind, CliError> {
    Ok(match name {
        "irand" => EstimatorKind::Irand { m, strategy },
        "pooled" => EstimatorKind::Pooled,
        "did_regression" => EstimatorKind::DidRegression,
        "did_reorganized" => EstimatorKind::DidReorganized,
        other => return Err(CliError::Usage(format!("unknown estimator `{other}`"))),
    })
}

/// `mse(other) - mse(irand)` per cell, for every non-irand estimator.
fn comparisons(surface: &MseSurface) -> Vec<Value> {
    surface
        .cells
        .iter()
        .filter(|c| c.estimator != "irand")
        .filter_map(|c| {
            let base = surface.cell(c.n, c.sigma, "irand")?;
            Some(json!({
                "n": c.n,
                "sigma": c.sigma,
                "estimator": c.estimator,
                "mse_minus_irand": c.mse - base.mse,
            }))
        })
        .collect()
}

pub fn bench(cfg: &RunConfig) -> Result<Output, CliError> {
    let design: Design = parse_name(cfg.design.as_deref().unwrap_or("lcd_like"), "design")?;
    let mut dgp = match design {
        Design::LcdLike => DgpConfig::lcd_like(0, 0.0, 0),
        Design::BmiLike => DgpConfig::bmi_like(0, 0.0, 0),
    };
    if let Some(rho) = cfg.rho {
        dgp.rho = rho;
    }
    if let Some(drift) = cfg.drift {
        dgp.drift = drift;
    }
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let replicates = cfg.replicates.unwrap_or(200);
    let m = cfg.m.unwrap_or(50);
    let strategy: Strategy = match &cfg.strategy {
        Some(s) => parse_name(s, "strategy")?,
        None => Strategy::MinOverlap,
    };
    let mut exp = ExperimentConfig::new(dgp, replicates, seed);
    if let Some(g) = &cfg.grid_n {
        exp.grid_n = g.clone();
    }
    if let Some(g) = &cfg.grid_sigma {
        exp.grid_sigma = g.clone();
    }
    let names: Vec<String> = cfg
        .estimators
        .clone()
        .unwrap_or_else(|| vec!["irand".into(), "pooled".into(), "did_regression".into()]);
    exp.estimators = names
        .iter()
        .map(|n| estimator_kind(n, m, strategy))
        .collect::<Result<_, _>>()?;

    let surface = run_mse_experiment(&exp)?;
    let dir = cfg.require(&cfg.output, "output")?;
    fs::create_dir_all(dir)?;
    let mut csv = Vec::new();
    surface.write_csv(&mut csv)?;
    fs::write(dir.join("mse_surface.csv"), csv)?;

    let echo = RunConfig {
        design: Some(design.to_string()),
        seed: Some(seed),
        replicates: Some(replicates),
        m: Some(m),
        grid_n: Some(exp.grid_n.clone()),
        grid_sigma: Some(exp.grid_sigma.clone()),
        estimators: Some(names),
        rho: Some(exp.dgp.rho),
        drift: Some(exp.dgp.drift),
        ..cfg.clone()
    };
    let failures: usize = surface.cells.iter().map(|c| c.failures).sum();
    let full = json!({
        "command": "bench",
        "config": echo,
        "surface": surface,
        "comparisons": comparisons(&surface),
        "failures": failures,
    });
    fs::write(dir.join("mse_surface.json"), to_json(&full))?;
    let brief = json!({
        "command": "bench",
        "config": echo,
        "cells": surface.cells.len(),
        "failures": failures,
        "csv": dir.join("mse_surface.csv"),
        "json": dir.join("mse_surface.json"),
    });
    Ok(Output { body: to_json(&brief) })
}

pub fn write_stdout(body: &str) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(body.as_bytes())?;
    out.flush()
}
