//! Total, direct and indirect effects of a treatment that acts partly through a mediator.
//!
//! The total effect adjusts for the confounders only; the direct effect adds the
//! mediator to the adjustment set; the indirect effect is their difference. Both
//! runs share the subsample plan, the analysed rows and the permutation streams,
//! so the difference is taken per subsample and per shuffle.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{irand_with_plan, mean, permuted_ates, IrandConfig, PermutationResult, Tail};
use crate::matching::{matching_ate_units, prepare_units_with};
use crate::panel::{pool, AnalysisSpec, TwoPointPanel, VariableKind};
use crate::subsample::{draw_subsamples, SubsamplePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Irand,
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationSpec {
    pub treatment: String,
    pub outcome: String,
    pub confounders: Vec<String>,
    pub mediator: String,
    pub engine: Engine,
    /// For the pooled engine only `s`, `tail`, `seed` and `matching` apply.
    pub config: IrandConfig,
}

impl MediationSpec {
    pub fn new(treatment: &str, confounders: &[&str], mediator: &str, outcome: &str) -> Self {
        MediationSpec {
            treatment: treatment.into(),
            outcome: outcome.into(),
            confounders: confounders.iter().map(|s| s.to_string()).collect(),
            mediator: mediator.into(),
            engine: Engine::Irand,
            config: IrandConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.confounders.contains(&self.mediator) {
            return Err(Error::InvalidSchema(format!(
                "mediator `{}` is also listed as a confounder",
                self.mediator
            )));
        }
        if self.mediator == self.treatment || self.mediator == self.outcome {
            return Err(Error::InvalidSchema(format!(
                "mediator `{}` must differ from treatment and outcome",
                self.mediator
            )));
        }
        if self.engine == Engine::Irand {
            self.config.validate()?;
        }
        Ok(())
    }

    /// Adjustment set of the total effect.
    pub fn total_spec(&self) -> AnalysisSpec {
        AnalysisSpec {
            treatment: self.treatment.clone(),
            confounders: self.confounders.clone(),
            outcome: self.outcome.clone(),
        }
    }

    /// Adjustment set of the direct effect: confounders plus the mediator.
    pub fn direct_spec(&self) -> AnalysisSpec {
        let mut confounders = self.confounders.clone();
        confounders.push(self.mediator.clone());
        AnalysisSpec {
            treatment: self.treatment.clone(),
            confounders,
            outcome: self.outcome.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleEffect {
    pub index: usize,
    pub ate: Option<f64>,
    pub p_value: Option<f64>,
    pub p_value_conservative: Option<f64>,
    #[serde(skip)]
    pub null_distribution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    /// Mean over completed subsamples (the single estimate for the pooled engine).
    pub ate: f64,
    pub p_value: Option<f64>,
    pub p_value_conservative: Option<f64>,
    pub completed: usize,
    pub per_subsample: Vec<SubsampleEffect>,
    /// Identifies the subsample plan and permutation streams behind the estimate.
    pub plan_fingerprint: u64,
}

impl EffectEstimate {
    fn from_parts(per_subsample: Vec<SubsampleEffect>, plan_fingerprint: u64) -> Result<Self> {
        let ates: Vec<f64> = per_subsample.iter().filter_map(|s| s.ate).collect();
        if ates.is_empty() {
            return Err(Error::EmptyData("no subsample produced an estimate".into()));
        }
        let ps: Vec<f64> = per_subsample.iter().filter_map(|s| s.p_value).collect();
        let pcs: Vec<f64> = per_subsample.iter().filter_map(|s| s.p_value_conservative).collect();
        Ok(EffectEstimate {
            ate: mean(&ates),
            p_value: (!ps.is_empty()).then(|| mean(&ps)),
            p_value_conservative: (!pcs.is_empty()).then(|| mean(&pcs)),
            completed: ates.len(),
            per_subsample,
            plan_fingerprint,
        })
    }

    /// Keeps only the subsamples listed in `keep`, re-averaging.
    fn restricted(&self, keep: &[bool]) -> Result<Self> {
        let per = self
            .per_subsample
            .iter()
            .zip(keep)
            .map(|(s, &k)| {
                if k {
                    s.clone()
                } else {
                    SubsampleEffect {
                        index: s.index,
                        ate: None,
                        p_value: None,
                        p_value_conservative: None,
                        null_distribution: Vec::new(),
                    }
                }
            })
            .collect();
        EffectEstimate::from_parts(per, self.plan_fingerprint)
    }
}

fn fingerprint(engine: Engine, plan: Option<&SubsamplePlan>, config: &IrandConfig) -> u64 {
    let mut h = DefaultHasher::new();
    (engine as u8).hash(&mut h);
    if let Some(p) = plan {
        p.assignments.hash(&mut h);
    }
    config.seed.hash(&mut h);
    config.s.hash(&mut h);
    h.finish()
}

fn from_report(report: crate::inference::IrandReport, fp: u64) -> Result<EffectEstimate> {
    let per = report
        .per_subsample
        .into_iter()
        .map(|r| SubsampleEffect {
            index: r.index,
            ate: r.ate,
            p_value: r.p_value,
            p_value_conservative: r.p_value_conservative,
            null_distribution: r.null_distribution,
        })
        .collect();
    EffectEstimate::from_parts(per, fp)
}

fn effect_with_plan(
    panel: &TwoPointPanel,
    spec: &MediationSpec,
    analysis: &AnalysisSpec,
    plan: Option<&SubsamplePlan>,
) -> Result<EffectEstimate> {
    // Both runs use exactly the rows where the mediator is observed.
    let also = [spec.mediator.clone()];
    let config = &spec.config;
    match (spec.engine, plan) {
        (Engine::Irand, Some(plan)) => {
            let report = irand_with_plan(panel, analysis, plan, config, &also)?;
            from_report(report, fingerprint(Engine::Irand, Some(plan), config))
        }
        (Engine::Irand, None) => Err(Error::PlanMismatch),
        (Engine::Pooled, _) => {
            let units = prepare_units_with(&pool(panel), analysis, &also)?;
            let est = matching_ate_units(&units, &config.matching)?;
            let perm = if config.s > 0 {
                let null = permuted_ates(&units, config.s, config.seed, 0, &config.matching)?;
                Some(PermutationResult::from_null(est.ate, config.tail, null))
            } else {
                None
            };
            let per = vec![SubsampleEffect {
                index: 0,
                ate: Some(est.ate),
                p_value: perm.as_ref().map(|p| p.p_value),
                p_value_conservative: perm.as_ref().map(|p| p.p_value_conservative),
                null_distribution: perm.map(|p| p.null_distribution).unwrap_or_default(),
            }];
            EffectEstimate::from_parts(per, fingerprint(Engine::Pooled, None, config))
        }
    }
}

fn draw_plan(panel: &TwoPointPanel, spec: &MediationSpec) -> Result<Option<SubsamplePlan>> {
    match spec.engine {
        Engine::Irand => Ok(Some(draw_subsamples(
            panel.n_individuals(),
            spec.config.m,
            spec.config.strategy,
            spec.config.seed,
        )?)),
        Engine::Pooled => Ok(None),
    }
}

/// Effect of the treatment on the outcome adjusting for the confounders only.
pub fn total_effect(panel: &TwoPointPanel, spec: &MediationSpec) -> Result<EffectEstimate> {
    spec.validate()?;
    let plan = draw_plan(panel, spec)?;
    effect_with_plan(panel, spec, &spec.total_spec(), plan.as_ref())
}

/// Effect of the treatment on the outcome adjusting for the confounders and the mediator.
pub fn direct_effect(panel: &TwoPointPanel, spec: &MediationSpec) -> Result<EffectEstimate> {
    spec.validate()?;
    let plan = draw_plan(panel, spec)?;
    effect_with_plan(panel, spec, &spec.direct_spec(), plan.as_ref())
}

/// `total - direct` per subsample, with the null built from paired shuffles.
///
/// Subsamples where either input failed are left empty.
pub fn indirect_effect(total: &EffectEstimate, direct: &EffectEstimate, tail: Tail) -> Result<EffectEstimate> {
    if total.plan_fingerprint != direct.plan_fingerprint
        || total.per_subsample.len() != direct.per_subsample.len()
    {
        return Err(Error::PlanMismatch);
    }
    let per = total
        .per_subsample
        .iter()
        .zip(&direct.per_subsample)
        .map(|(t, d)| {
            let (Some(ta), Some(da)) = (t.ate, d.ate) else {
                return SubsampleEffect {
                    index: t.index,
                    ate: None,
                    p_value: None,
                    p_value_conservative: None,
                    null_distribution: Vec::new(),
                };
            };
            let observed = ta - da;
            let null: Vec<f64> = t
                .null_distribution
                .iter()
                .zip(&d.null_distribution)
                .map(|(a, b)| a - b)
                .collect();
            if null.is_empty() {
                return SubsampleEffect {
                    index: t.index,
                    ate: Some(observed),
                    p_value: None,
                    p_value_conservative: None,
                    null_distribution: null,
                };
            }
            let r = PermutationResult::from_null(observed, tail, null);
            SubsampleEffect {
                index: t.index,
                ate: Some(observed),
                p_value: Some(r.p_value),
                p_value_conservative: Some(r.p_value_conservative),
                null_distribution: r.null_distribution,
            }
        })
        .collect();
    EffectEstimate::from_parts(per, total.plan_fingerprint)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub column: String,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub index: usize,
    pub total: Option<f64>,
    pub direct: Option<f64>,
    pub indirect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationReport {
    pub spec: MediationSpec,
    /// Set when the treatment is one pairwise contrast of an ordinal variable.
    pub contrast: Option<Contrast>,
    pub total: EffectEstimate,
    pub direct: EffectEstimate,
    pub indirect: EffectEstimate,
    pub per_subsample: Vec<DecompositionRow>,
    /// Subsamples dropped because the total or direct run failed on them.
    pub skipped: usize,
}

/// Runs total and direct effects on a shared plan and decomposes them.
///
/// Aggregates cover the subsamples where both runs succeeded, and the aggregate
/// indirect effect is set to `total.ate - direct.ate`.
pub fn mediation_report(panel: &TwoPointPanel, spec: &MediationSpec) -> Result<MediationReport> {
    spec.validate()?;
    let plan = draw_plan(panel, spec)?;
    let (total, direct) = rayon::join(
        || effect_with_plan(panel, spec, &spec.total_spec(), plan.as_ref()),
        || effect_with_plan(panel, spec, &spec.direct_spec(), plan.as_ref()),
    );
    let (total, direct) = (total?, direct?);
    let keep: Vec<bool> = total
        .per_subsample
        .iter()
        .zip(&direct.per_subsample)
        .map(|(t, d)| t.ate.is_some() && d.ate.is_some())
        .collect();
    let skipped = keep.iter().filter(|k| !**k).count();
    let total = total.restricted(&keep)?;
    let direct = direct.restricted(&keep)?;
    let mut indirect = indirect_effect(&total, &direct, spec.config.tail)?;
    indirect.ate = total.ate - direct.ate;

    let per_subsample = total
        .per_subsample
        .iter()
        .zip(&direct.per_subsample)
        .zip(&indirect.per_subsample)
        .map(|((t, d), i)| DecompositionRow {
            index: t.index,
            total: t.ate,
            direct: d.ate,
            indirect: i.ate,
        })
        .collect();
    Ok(MediationReport {
        spec: spec.clone(),
        contrast: None,
        total,
        direct,
        indirect,
        per_subsample,
        skipped,
    })
}

/// Sorted distinct observed values of `column`.
pub fn observed_levels(panel: &TwoPointPanel, column: &str) -> Result<Vec<f64>> {
    let c = panel.column_index(column)?;
    let mut levels: Vec<f64> = panel
        .individuals()
        .iter()
        .flat_map(|ind| ind.values.iter().filter_map(move |row| row[c]))
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    Ok(levels)
}

/// Adds a column giving the number of `cuts` at or below each value (0..=cuts.len()).
pub fn categorize(panel: &TwoPointPanel, column: &str, cuts: &[f64], name: &str) -> Result<TwoPointPanel> {
    if cuts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("cut points must be strictly increasing".into()));
    }
    let c = panel.column_index(column)?;
    let cuts = cuts.to_vec();
    panel.with_column(name, VariableKind::Ordinal, move |row| {
        row[c].map(|v| cuts.iter().filter(|&&k| k <= v).count() as f64)
    })
}

/// Name of the binary column coding `low -> 0`, `high -> 1` for `column`.
pub fn contrast_column_name(column: &str, low: f64, high: f64) -> String {
    format!("{column}[{low}->{high}]")
}

/// Adds a binary column that is 0 at `low`, 1 at `high` and missing elsewhere, and
/// makes it the panel's treatment.
pub fn contrast_panel(panel: &TwoPointPanel, column: &str, low: f64, high: f64) -> Result<TwoPointPanel> {
    let c = panel.column_index(column)?;
    let name = contrast_column_name(column, low, high);
    let with = panel.with_column(&name, VariableKind::Binary, move |row| match row[c] {
        Some(v) if v == low => Some(0.0),
        Some(v) if v == high => Some(1.0),
        _ => None,
    })?;
    let mut schema = with.schema().clone();
    schema.treatment_column = name;
    with.with_schema(schema)
}

/// One report per pair of adjacent levels of an ordinal treatment, sharing one plan.
pub fn ordinal_mediation_reports(panel: &TwoPointPanel, spec: &MediationSpec) -> Result<Vec<MediationReport>> {
    let levels = observed_levels(panel, &spec.treatment)?;
    if levels.len() < 2 {
        return Err(Error::EmptyData(format!("treatment `{}` has fewer than two levels", spec.treatment)));
    }
    levels
        .windows(2)
        .map(|w| {
            let cp = contrast_panel(panel, &spec.treatment, w[0], w[1])?;
            let sub = MediationSpec {
                treatment: contrast_column_name(&spec.treatment, w[0], w[1]),
                ..spec.clone()
            };
            let mut report = mediation_report(&cp, &sub)?;
            report.contrast = Some(Contrast { column: spec.treatment.clone(), low: w[0], high: w[1] });
            Ok(report)
        })
        .collect()
}

/// Dispatches on the declared kind of the treatment column.
pub fn mediation_reports(panel: &TwoPointPanel, spec: &MediationSpec) -> Result<Vec<MediationReport>> {
    if panel.schema().kind(&spec.treatment) == VariableKind::Ordinal {
        ordinal_mediation_reports(panel, spec)
    } else {
        mediation_report(panel, spec).map(|r| vec![r])
    }
}
