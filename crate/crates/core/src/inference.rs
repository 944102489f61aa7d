//! The subsampling estimator with within-subsample permutation tests, plus the
//! pooled and difference-in-differences baselines.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{
    matching_ate_units, prepare_units, prepare_units_with, AteEstimate, MatchingDiagnostics,
    MatchingOptions, Units,
};
use crate::panel::{
    difference, pool, reorganize_did, select_subsample, AnalysisSpec, CrossSection,
    TwoPointPanel,
};
use crate::rng::{stream, Domain};
use crate::subsample::{draw_subsamples, Strategy, SubsamplePlan};

/// Direction in which a permuted effect counts as at least as extreme as the observed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Permuted effect strictly below the observed one.
    #[default]
    Lower,
    /// Permuted effect strictly above the observed one.
    Upper,
    /// Permuted effect strictly larger in magnitude.
    TwoSided,
}

impl Tail {
    pub fn beats(self, permuted: f64, observed: f64) -> bool {
        match self {
            Tail::Lower => permuted < observed,
            Tail::Upper => permuted > observed,
            Tail::TwoSided => permuted.abs() > observed.abs(),
        }
    }
}

impl std::str::FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(Tail::Lower),
            "upper" => Ok(Tail::Upper),
            "two_sided" => Ok(Tail::TwoSided),
            other => Err(Error::InvalidConfig(format!("unknown tail `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub observed: f64,
    pub tail: Tail,
    pub n_permutations: usize,
    pub exceed_count: usize,
    /// `exceed_count / n_permutations`.
    pub p_value: f64,
    /// `(exceed_count + 1) / (n_permutations + 1)`.
    pub p_value_conservative: f64,
    #[serde(skip)]
    pub null_distribution: Vec<f64>,
}

impl PermutationResult {
    pub fn from_null(observed: f64, tail: Tail, null: Vec<f64>) -> Self {
        let exceed_count = null.iter().filter(|&&v| tail.beats(v, observed)).count();
        let s = null.len();
        PermutationResult {
            observed,
            tail,
            n_permutations: s,
            exceed_count,
            p_value: exceed_count as f64 / s as f64,
            p_value_conservative: (exceed_count + 1) as f64 / (s + 1) as f64,
            null_distribution: null,
        }
    }
}

/// Treatment vector for shuffle `s` of subsample `m`.
pub(crate) fn shuffled_treatment(base: &[bool], seed: u64, m: usize, s: usize) -> Vec<bool> {
    let mut t = base.to_vec();
    let mut rng = stream(seed, Domain::Permutation, m as u64, s as u64);
    t.shuffle(&mut rng);
    t
}

fn with_treatment(units: &Units, treatment: Vec<bool>) -> Units {
    Units { treatment, ..units.clone() }
}

/// Matching ATEs under `s_count` uniform shuffles of the treatment column.
pub(crate) fn permuted_ates(
    units: &Units,
    s_count: usize,
    seed: u64,
    m: usize,
    opts: &MatchingOptions,
) -> Result<Vec<f64>> {
    let n_treated = units.n_treated();
    (0..s_count)
        .into_par_iter()
        .map(|s| {
            let t = shuffled_treatment(&units.treatment, seed, m, s);
            debug_assert_eq!(t.iter().filter(|&&v| v).count(), n_treated);
            matching_ate_units(&with_treatment(units, t), opts).map(|e| e.ate)
        })
        .collect()
}

/// Permutation p-value for an observed matching ATE on prepared units.
pub fn permutation_test_units(
    units: &Units,
    observed_ate: f64,
    s_count: usize,
    tail: Tail,
    seed: u64,
    opts: &MatchingOptions,
) -> Result<PermutationResult> {
    if s_count == 0 {
        return Err(Error::InvalidConfig("permutation count must be at least 1".into()));
    }
    let null = permuted_ates(units, s_count, seed, 0, opts)?;
    Ok(PermutationResult::from_null(observed_ate, tail, null))
}

/// Shuffles the treatment column `s_count` times (confounders and outcomes fixed)
/// and reports how often the re-estimated ATE beats `observed_ate`.
pub fn permutation_test(
    cs: &CrossSection,
    spec: &AnalysisSpec,
    observed_ate: f64,
    s_count: usize,
    tail: Tail,
    seed: u64,
    opts: &MatchingOptions,
) -> Result<PermutationResult> {
    let units = prepare_units(cs, spec)?;
    permutation_test_units(&units, observed_ate, s_count, tail, seed, opts)
}

/// Visits every placement of the treated labels over the units.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Permutation p-value by full enumeration of distinct treatment arrangements.
///
/// Every arrangement with the observed number of treated units is equally
/// likely under uniform shuffling, so this is the exact limit of
/// [`permutation_test`]. Only sensible for small samples.
pub fn exact_permutation_test(
    cs: &CrossSection,
    spec: &AnalysisSpec,
    observed_ate: f64,
    tail: Tail,
    opts: &MatchingOptions,
) -> Result<PermutationResult> {
    let units = prepare_units(cs, spec)?;
    let n = units.len();
    if n > 24 {
        return Err(Error::InvalidConfig(format!("{n} units is too many to enumerate")));
    }
    let k = units.n_treated();
    let mut null = Vec::new();
    let mut err = None;
    for_each_combination(n, k, |chosen| {
        if err.is_some() {
            return;
        }
        let mut t = vec![false; n];
        for &i in chosen {
            t[i] = true;
        }
        match matching_ate_units(&with_treatment(&units, t), opts) {
            Ok(e) => null.push(e.ate),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(PermutationResult::from_null(observed_ate, tail, null))
}

// ---------------------------------------------------------------------------
// Subsampling estimator

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrandConfig {
    /// Number of subsamples.
    pub m: usize,
    /// Shuffles per subsample; 0 skips the permutation test.
    pub s: usize,
    pub tail: Tail,
    pub strategy: Strategy,
    pub seed: u64,
    pub matching: MatchingOptions,
}

impl Default for IrandConfig {
    fn default() -> Self {
        IrandConfig {
            m: 500,
            s: 500,
            tail: Tail::Lower,
            strategy: Strategy::MinOverlap,
            seed: 0,
            matching: MatchingOptions::default(),
        }
    }
}

impl IrandConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleResult {
    pub index: usize,
    pub ate: Option<f64>,
    pub p_value: Option<f64>,
    pub p_value_conservative: Option<f64>,
    pub n_units: usize,
    pub diagnostics: Option<MatchingDiagnostics>,
    pub balance_pass: Option<bool>,
    /// Why the subsample was skipped.
    pub error: Option<String>,
    #[serde(skip)]
    pub null_distribution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrandReport {
    pub config: IrandConfig,
    pub analysis: AnalysisSpec,
    pub mean_ate: f64,
    pub mean_p_value: Option<f64>,
    pub mean_p_value_conservative: Option<f64>,
    pub completed: usize,
    pub skipped: usize,
    pub per_subsample: Vec<SubsampleResult>,
}

impl IrandReport {
    pub fn ates(&self) -> Vec<f64> {
        self.per_subsample.iter().filter_map(|r| r.ate).collect()
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs one subsample: matching ATE, then (if `s > 0`) its permutation test.
fn run_subsample(
    units: Result<Units>,
    index: usize,
    config: &IrandConfig,
) -> SubsampleResult {
    let attempt = units.and_then(|units| {
        let est = matching_ate_units(&units, &config.matching)?;
        let perm = if config.s > 0 {
            let null = permuted_ates(&units, config.s, config.seed, index, &config.matching)?;
            Some(PermutationResult::from_null(est.ate, config.tail, null))
        } else {
            None
        };
        Ok((est, perm))
    });
    match attempt {
        Ok((est, perm)) => SubsampleResult {
            index,
            ate: Some(est.ate),
            p_value: perm.as_ref().map(|p| p.p_value),
            p_value_conservative: perm.as_ref().map(|p| p.p_value_conservative),
            n_units: est.n_units,
            balance_pass: Some(est.balance.pass),
            diagnostics: Some(est.diagnostics),
            error: None,
            null_distribution: perm.map(|p| p.null_distribution).unwrap_or_default(),
        },
        Err(e) => SubsampleResult {
            index,
            ate: None,
            p_value: None,
            p_value_conservative: None,
            n_units: 0,
            diagnostics: None,
            balance_pass: None,
            error: Some(e.to_string()),
            null_distribution: Vec::new(),
        },
    }
}

/// Runs the estimator over an existing plan. `also_required` lists extra
/// columns a row must have to be used, so that runs sharing a plan also share units.
pub fn irand_with_plan(
    panel: &TwoPointPanel,
    spec: &AnalysisSpec,
    plan: &SubsamplePlan,
    config: &IrandConfig,
    also_required: &[String],
) -> Result<IrandReport> {
    config.validate()?;
    let per_subsample: Vec<SubsampleResult> = plan
        .assignments
        .par_iter()
        .enumerate()
        .map(|(m, assignment)| {
            let units = select_subsample(panel, assignment, m)
                .and_then(|cs| prepare_units_with(&cs, spec, also_required));
            run_subsample(units, m, config)
        })
        .collect();
    aggregate(per_subsample, spec, config)
}

fn aggregate(
    per_subsample: Vec<SubsampleResult>,
    spec: &AnalysisSpec,
    config: &IrandConfig,
) -> Result<IrandReport> {
    let ates: Vec<f64> = per_subsample.iter().filter_map(|r| r.ate).collect();
    if ates.is_empty() {
        let first = per_subsample
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Error::EmptyData(format!("every subsample failed; first error: {first}")));
    }
    let ps: Vec<f64> = per_subsample.iter().filter_map(|r| r.p_value).collect();
    let pcs: Vec<f64> = per_subsample.iter().filter_map(|r| r.p_value_conservative).collect();
    Ok(IrandReport {
        config: *config,
        analysis: spec.clone(),
        mean_ate: mean(&ates),
        mean_p_value: (!ps.is_empty()).then(|| mean(&ps)),
        mean_p_value_conservative: (!pcs.is_empty()).then(|| mean(&pcs)),
        completed: ates.len(),
        skipped: per_subsample.len() - ates.len(),
        per_subsample,
    })
}

/// Draws `config.m` subsamples and averages their matching ATEs and permutation p-values.
pub fn irand_estimate(
    panel: &TwoPointPanel,
    spec: &AnalysisSpec,
    config: &IrandConfig,
) -> Result<IrandReport> {
    config.validate()?;
    let plan = draw_subsamples(panel.n_individuals(), config.m, config.strategy, config.seed)?;
    irand_with_plan(panel, spec, &plan, config, &[])
}

// ---------------------------------------------------------------------------
// Baselines

/// A single matching estimate with an optional permutation p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestedEstimate {
    pub estimate: AteEstimate,
    pub permutation: Option<PermutationResult>,
}

impl TestedEstimate {
    pub fn ate(&self) -> f64 {
        self.estimate.ate
    }

    pub fn p_value(&self) -> Option<f64> {
        self.permutation.as_ref().map(|p| p.p_value)
    }
}

/// Matching on the pooled cross-section, both time points as separate units.
pub fn pooled_estimate(
    panel: &TwoPointPanel,
    spec: &AnalysisSpec,
    s_count: usize,
    tail: Tail,
    seed: u64,
    opts: &MatchingOptions,
) -> Result<TestedEstimate> {
    let units = prepare_units(&pool(panel), spec)?;
    let estimate = matching_ate_units(&units, opts)?;
    let permutation = if s_count > 0 {
        Some(permutation_test_units(&units, estimate.ate, s_count, tail, seed, opts)?)
    } else {
        None
    };
    Ok(TestedEstimate { estimate, permutation })
}

/// Condition numbers above this mark the differenced design as collinear.
pub const COLLINEARITY_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidRegression {
    /// Coefficient on the treatment change.
    pub delta_hat: f64,
    pub coefficient_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Classical OLS standard errors; absent for rank-deficient designs.
    pub std_errors: Option<Vec<f64>>,
    pub condition_number: f64,
    pub collinear: bool,
    pub rank: usize,
    pub n_used: usize,
    pub dropped: usize,
    pub residual_variance: Option<f64>,
}

/// Least squares of the outcome change on the treatment and confounder changes,
/// without an intercept. Rank-deficient designs get the minimum-norm solution.
pub fn did_regression_estimate(panel: &TwoPointPanel, spec: &AnalysisSpec) -> Result<DidRegression> {
    let d = difference(panel, spec)?;
    if d.is_empty() {
        return Err(Error::EmptyData("no individual has complete values at both times".into()));
    }
    let n = d.len();
    let p = 1 + d.confounders.len();
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { d.dt[i] } else { d.dx[i][j - 1] });
    let y = DVector::from_column_slice(&d.dy);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let cutoff = smax * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let beta = if smax == 0.0 {
        DVector::zeros(p)
    } else {
        svd.solve(&y, cutoff)
            .map_err(|e| Error::InvalidConfig(format!("least squares failed: {e}")))?
    };
    let collinear = condition_number > COLLINEARITY_CONDITION;
    let (std_errors, residual_variance) = if !collinear && n > p {
        let resid = &y - &x * &beta;
        let s2 = resid.norm_squared() / (n - p) as f64;
        let xtx_inv = (x.transpose() * &x).try_inverse();
        let se = xtx_inv.map(|inv| (0..p).map(|j| (s2 * inv[(j, j)]).sqrt()).collect());
        (se, Some(s2))
    } else {
        (None, None)
    };
    let mut coefficient_names = vec![format!("d_{}", spec.treatment)];
    coefficient_names.extend(d.confounders.iter().map(|c| format!("d_{c}")));
    Ok(DidRegression {
        delta_hat: beta[0],
        coefficient_names,
        coefficients: beta.iter().copied().collect(),
        std_errors,
        condition_number,
        collinear,
        rank,
        n_used: n,
        dropped: d.dropped,
        residual_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReorganizedEstimate {
    pub estimate: AteEstimate,
    pub permutation: Option<PermutationResult>,
    /// Individuals left out because a change or baseline confounder was missing.
    pub dropped_individuals: usize,
}

/// Matching on the stacked treatment/control images. The null distribution
/// comes from swapping each individual's two image labels with probability 1/2.
pub fn did_reorganized_estimate(
    panel: &TwoPointPanel,
    spec: &AnalysisSpec,
    s_count: usize,
    tail: Tail,
    seed: u64,
    opts: &MatchingOptions,
) -> Result<ReorganizedEstimate> {
    let mut cs = reorganize_did(panel, spec)?;
    // Keep only individuals whose two images are both complete.
    let complete = |r: &crate::panel::CrossRow| r.values.iter().all(Option::is_some);
    let n_before = cs.rows.len() / 2;
    cs.rows = cs
        .rows
        .chunks(2)
        .filter(|pair| pair.iter().all(complete))
        .flatten()
        .cloned()
        .collect();
    let dropped_individuals = n_before - cs.rows.len() / 2;
    let units = prepare_units(&cs, spec)?;
    let estimate = matching_ate_units(&units, opts)?;
    let permutation = if s_count > 0 {
        let null: Vec<f64> = (0..s_count)
            .into_par_iter()
            .map(|s| {
                let mut rng = stream(seed, Domain::Permutation, 0, s as u64);
                let mut t = units.treatment.clone();
                for pair in t.chunks_mut(2) {
                    if rng.random::<bool>() {
                        pair.swap(0, 1);
                    }
                }
                matching_ate_units(&with_treatment(&units, t), opts).map(|e| e.ate)
            })
            .collect::<Result<_>>()?;
        Some(PermutationResult::from_null(estimate.ate, tail, null))
    } else {
        None
    };
    Ok(ReorganizedEstimate { estimate, permutation, dropped_individuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{read_panel, VariableSchema};

    fn small_cs() -> (CrossSection, AnalysisSpec) {
        let text = "id,time,T,X,Y\n\
            1,0,0,0.1,1.0\n1,1,1,0.1,2.5\n\
            2,0,0,0.9,0.2\n2,1,1,0.8,1.9\n\
            3,0,0,0.4,0.7\n3,1,1,0.5,3.1\n\
            4,0,0,0.3,0.4\n4,1,1,0.2,1.2\n";
        let p = read_panel(text.as_bytes(), VariableSchema::new("T", &["X"], "Y")).unwrap();
        let cs = select_subsample(&p, &[0, 1, 0, 1], 0).unwrap();
        (cs, p.schema().analysis_spec())
    }

    #[test]
    fn combinations_are_enumerated_once() {
        let mut seen = Vec::new();
        for_each_combination(5, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 10);
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 10);
        let mut count = 0;
        for_each_combination(3, 0, |_| count += 1);
        assert_eq!(count, 1);
        count = 0;
        for_each_combination(3, 3, |_| count += 1);
        assert_eq!(count, 1);
    }

    #[test]
    fn exact_test_on_four_units_enumerates_six_arrangements() {
        let (cs, spec) = small_cs();
        let opts = MatchingOptions::default();
        let units = prepare_units(&cs, &spec).unwrap();
        let obs = matching_ate_units(&units, &opts).unwrap().ate;
        let exact = exact_permutation_test(&cs, &spec, obs, Tail::Upper, &opts).unwrap();
        assert_eq!(exact.n_permutations, 6);

        // Independent enumeration over the same arrangements.
        let mut count = 0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                let mut t = vec![false; 4];
                t[a] = true;
                t[b] = true;
                let u = Units { treatment: t, ..units.clone() };
                if matching_ate_units(&u, &opts).unwrap().ate > obs {
                    count += 1;
                }
            }
        }
        assert_eq!(exact.exceed_count, count);
        assert_eq!(exact.p_value, count as f64 / 6.0);
    }

    #[test]
    fn dominant_observed_effect_gives_zero_p() {
        let (cs, spec) = small_cs();
        let opts = MatchingOptions::default();
        let r = permutation_test(&cs, &spec, 1e9, 50, Tail::Upper, 3, &opts).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert_eq!(r.p_value_conservative, 1.0 / 51.0);
        let r = permutation_test(&cs, &spec, -1e9, 50, Tail::TwoSided, 3, &opts).unwrap();
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn shuffles_preserve_group_sizes_and_are_reproducible() {
        let base = vec![true, false, false, true, false, true, false];
        for s in 0..50 {
            let t = shuffled_treatment(&base, 11, 2, s);
            assert_eq!(t.iter().filter(|&&v| v).count(), 3);
            assert_eq!(t, shuffled_treatment(&base, 11, 2, s));
        }
    }

    #[test]
    fn tails() {
        assert!(Tail::Lower.beats(-1.0, 0.0));
        assert!(!Tail::Lower.beats(0.0, 0.0));
        assert!(Tail::Upper.beats(1.0, 0.0));
        assert!(Tail::TwoSided.beats(-2.0, 1.0));
        assert!(!Tail::TwoSided.beats(-1.0, 1.0));
        assert_eq!("two_sided".parse::<Tail>().unwrap(), Tail::TwoSided);
        assert!("sideways".parse::<Tail>().is_err());
    }

    #[test]
    fn single_subsample_reduces_to_one_matching_run() {
        let text = "id,time,T,X,Y\n\
            1,0,0,0.1,1.0\n1,1,1,0.1,2.5\n\
            2,0,0,0.9,0.2\n2,1,1,0.8,1.9\n\
            3,0,0,0.4,0.7\n3,1,1,0.5,3.1\n\
            4,0,0,0.3,0.4\n4,1,1,0.2,1.2\n\
            5,0,0,0.6,0.1\n5,1,1,0.7,2.2\n";
        let p = read_panel(text.as_bytes(), VariableSchema::new("T", &["X"], "Y")).unwrap();
        let spec = p.schema().analysis_spec();
        let config = IrandConfig { m: 1, s: 30, seed: 4, ..IrandConfig::default() };
        let report = irand_estimate(&p, &spec, &config).unwrap();
        let plan = draw_subsamples(5, 1, config.strategy, config.seed).unwrap();
        let cs = select_subsample(&p, &plan.assignments[0], 0).unwrap();
        let units = prepare_units(&cs, &spec).unwrap();
        let est = matching_ate_units(&units, &config.matching).unwrap();
        let perm =
            permutation_test_units(&units, est.ate, 30, config.tail, config.seed, &config.matching)
                .unwrap();
        assert_eq!(report.mean_ate, est.ate);
        assert_eq!(report.mean_p_value, Some(perm.p_value));
    }

    #[test]
    fn all_zero_plan_matches_baseline_cross_section() {
        let text = "id,time,T,X,Y\n\
            1,0,1,0.1,1.0\n1,1,1,0.1,2.5\n\
            2,0,0,0.9,0.2\n2,1,1,0.8,1.9\n\
            3,0,1,0.4,0.7\n3,1,0,0.5,3.1\n\
            4,0,0,0.3,0.4\n4,1,1,0.2,1.2\n";
        let p = read_panel(text.as_bytes(), VariableSchema::new("T", &["X"], "Y")).unwrap();
        let spec = p.schema().analysis_spec();
        let plan = SubsamplePlan {
            n_individuals: 4,
            strategy: Strategy::MinOverlap,
            seed: 0,
            assignments: vec![vec![0; 4]],
        };
        let config = IrandConfig { m: 1, s: 0, ..IrandConfig::default() };
        let report = irand_with_plan(&p, &spec, &plan, &config, &[]).unwrap();
        let baseline = select_subsample(&p, &[0; 4], 0).unwrap();
        let direct = crate::matching::matching_ate(&baseline, &spec, &config.matching).unwrap();
        assert_eq!(report.mean_ate, direct.ate);
        assert_eq!(report.mean_p_value, None);
    }

    #[test]
    fn failing_subsamples_are_skipped_and_counted() {
        // Individual 1 is treated at both times, so an all-follow-up subsample has no controls.
        let text = "id,time,T,X,Y\n1,0,0,0.1,1\n1,1,1,0.2,2\n2,0,0,0.3,1\n2,1,1,0.5,3\n";
        let p = read_panel(text.as_bytes(), VariableSchema::new("T", &["X"], "Y")).unwrap();
        let spec = p.schema().analysis_spec();
        let plan = SubsamplePlan {
            n_individuals: 2,
            strategy: Strategy::MinOverlap,
            seed: 0,
            assignments: vec![vec![1, 1], vec![0, 1], vec![1, 0]],
        };
        let config = IrandConfig { m: 3, s: 0, ..IrandConfig::default() };
        let report = irand_with_plan(&p, &spec, &plan, &config, &[]).unwrap();
        assert_eq!(report.completed, 2);
        assert_eq!(report.skipped, 1);
        assert!(report.per_subsample[0].error.is_some());
        let ates = report.ates();
        assert_eq!(report.mean_ate, (ates[0] + ates[1]) / 2.0);
    }

    #[test]
    fn did_regression_closed_form_with_zero_confounder_change() {
        let text = "id,time,T,X,Y\n1,0,0,2,0\n1,1,1,2,1\n2,0,0,3,5\n2,1,1,3,6\n3,0,0,1,1\n3,1,1,1,2\n";
        let p = read_panel(text.as_bytes(), VariableSchema::new("T", &["X"], "Y")).unwrap();
        let r = did_regression_estimate(&p, &p.schema().analysis_spec()).unwrap();
        assert!((r.delta_hat - 1.0).abs() < 1e-12);
        assert!(r.collinear);
        assert_eq!(r.rank, 1);
        assert_eq!(r.coefficients[1], 0.0);
    }

    #[test]
    fn did_regression_flags_exact_collinearity() {
        // The confounder change equals the treatment change for everyone.
        let text = "id,time,T,X,Y\n1,0,0,0,0\n1,1,1,1,2\n2,0,0,5,1\n2,1,1,6,3\n";
        let p = read_panel(text.as_bytes(), VariableSchema::new("T", &["X"], "Y")).unwrap();
        let r = did_regression_estimate(&p, &p.schema().analysis_spec()).unwrap();
        assert!(r.collinear);
        // Minimum-norm solution splits the effect evenly.
        assert!((r.delta_hat - 1.0).abs() < 1e-9);
        assert!((r.coefficients[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reorganized_constant_change_recovers_constant() {
        let text = "id,time,T,X,Y\n1,0,0,0.3,1\n1,1,1,0.3,3.5\n2,0,0,0.7,2\n2,1,1,0.9,4.5\n3,0,0,0.1,0\n3,1,1,0.2,2.5\n";
        let p = read_panel(text.as_bytes(), VariableSchema::new("T", &["X"], "Y")).unwrap();
        let opts = MatchingOptions::default();
        let r = did_reorganized_estimate(&p, &p.schema().analysis_spec(), 20, Tail::Upper, 1, &opts)
            .unwrap();
        assert_eq!(r.estimate.ate, 2.5);
        let perm = r.permutation.unwrap();
        assert_eq!(perm.n_permutations, 20);
        assert!(perm.p_value >= 0.0 && perm.p_value <= 1.0);

        let zero = "id,time,T,X,Y\n1,0,0,0.3,1\n1,1,1,0.3,1\n2,0,0,0.7,2\n2,1,1,0.9,2\n";
        let p = read_panel(zero.as_bytes(), VariableSchema::new("T", &["X"], "Y")).unwrap();
        let r = did_reorganized_estimate(&p, &p.schema().analysis_spec(), 0, Tail::Upper, 1, &opts)
            .unwrap();
        assert_eq!(r.estimate.ate, 0.0);
    }
}
