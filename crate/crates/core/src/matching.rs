//! Nearest-neighbour propensity matching and the matching ATE estimator.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{AnalysisSpec, CrossSection, VariableKind};
use crate::propensity::{
    check_balance, fit_logistic, predict_propensity, BalanceReport, FitOptions, PropensityModel,
};

/// `matched[i]` lists the opposite-group units matched to unit `i`, nearest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSet {
    pub matched: Vec<Vec<usize>>,
    pub k: usize,
    pub with_replacement: bool,
}

/// For every unit, the `k` opposite-group units closest in score, with replacement.
///
/// Distance is `|e_i - e_j|`; equal distances go to the lower unit index.
pub fn match_nearest(scores: &[f64], treatment: &[bool], k: usize) -> Result<MatchSet> {
    if scores.len() != treatment.len() {
        return Err(Error::LengthMismatch { expected: scores.len(), got: treatment.len() });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite score {bad}")));
    }
    let mut groups: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &t) in treatment.iter().enumerate() {
        groups[t as usize].push(i);
    }
    if groups[1].is_empty() {
        return Err(Error::EmptyGroup("treated"));
    }
    if groups[0].is_empty() {
        return Err(Error::EmptyGroup("control"));
    }
    for g in &mut groups {
        g.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    }

    let mut matched = Vec::with_capacity(scores.len());
    let mut tied: Vec<usize> = Vec::new();
    for (i, &t) in treatment.iter().enumerate() {
        let pool = &groups[usize::from(!t)];
        let si = scores[i];
        let want = k.min(pool.len());
        let mut out = Vec::with_capacity(want);
        // Left side holds scores below si, right side scores at or above it.
        // Distances grow monotonically outward on both sides.
        let split = pool.partition_point(|&j| scores[j] < si);
        let mut left = split;
        let mut right = split;
        while out.len() < want {
            let dl = (left > 0).then(|| si - scores[pool[left - 1]]);
            let dr = (right < pool.len()).then(|| scores[pool[right]] - si);
            let d = match (dl, dr) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => break,
            };
            tied.clear();
            while left > 0 && si - scores[pool[left - 1]] == d {
                left -= 1;
                tied.push(pool[left]);
            }
            while right < pool.len() && scores[pool[right]] - si == d {
                tied.push(pool[right]);
                right += 1;
            }
            tied.sort_unstable();
            let take = (want - out.len()).min(tied.len());
            out.extend_from_slice(&tied[..take]);
        }
        matched.push(out);
    }
    Ok(MatchSet { matched, k, with_replacement: true })
}

/// `(1/n) sum_i s_i (Y_i - mean_{j in J_i} Y_j)` with `s_i = +1` for treated and `-1` for controls.
pub fn estimate_ate(outcomes: &[f64], treatment: &[bool], matches: &MatchSet) -> f64 {
    let n = outcomes.len();
    let mut total = 0.0;
    for i in 0..n {
        let js = &matches.matched[i];
        let imputed = js.iter().map(|&j| outcomes[j]).sum::<f64>() / js.len() as f64;
        let diff = outcomes[i] - imputed;
        total += if treatment[i] { diff } else { -diff };
    }
    total / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingOptions {
    pub k: usize,
    /// Neighbour count for the single re-match when the first pass is unbalanced.
    pub retry_k: Option<usize>,
    pub fit: FitOptions,
}

impl Default for MatchingOptions {
    fn default() -> Self {
        MatchingOptions { k: 1, retry_k: Some(3), fit: FitOptions::default() }
    }
}

/// Numeric arrays extracted from a cross-section for one analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Units {
    pub ids: Vec<Arc<str>>,
    pub covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
    pub treatment: Vec<bool>,
    pub outcome: Vec<f64>,
    /// Rows left out for a missing treatment, outcome or confounder.
    pub dropped_rows: usize,
    /// Covariates left out because they are constant over the kept rows.
    pub constant_covariates: Vec<String>,
}

impl Units {
    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&t| t).count()
    }
}

/// Pulls treatment, outcome and encoded confounders out of a cross-section,
/// dropping rows with any of them missing.
pub fn prepare_units(cs: &CrossSection, spec: &AnalysisSpec) -> Result<Units> {
    prepare_units_with(cs, spec, &[])
}

/// Like [`prepare_units`], but rows must also be complete in `also_required`.
pub fn prepare_units_with(
    cs: &CrossSection,
    spec: &AnalysisSpec,
    also_required: &[String],
) -> Result<Units> {
    let t = cs.column_index(&spec.treatment)?;
    let y = cs.column_index(&spec.outcome)?;
    let xs = spec
        .confounders
        .iter()
        .map(|c| cs.column_index(c))
        .collect::<Result<Vec<_>>>()?;
    let extra = also_required
        .iter()
        .map(|c| cs.column_index(c))
        .collect::<Result<Vec<_>>>()?;
    let needed: Vec<usize> = [t, y]
        .into_iter()
        .chain(xs.iter().copied())
        .chain(extra)
        .collect();

    let kept: Vec<usize> = (0..cs.rows.len())
        .filter(|&r| needed.iter().all(|&c| cs.rows[r].values[c].is_some()))
        .collect();
    let dropped_rows = cs.rows.len() - kept.len();

    let mut treatment = Vec::with_capacity(kept.len());
    for &r in &kept {
        let v = cs.rows[r].values[t].unwrap();
        if v != 0.0 && v != 1.0 {
            return Err(Error::NonBinaryTreatment { column: spec.treatment.clone(), value: v });
        }
        treatment.push(v == 1.0);
    }
    let outcome: Vec<f64> = kept.iter().map(|&r| cs.rows[r].values[y].unwrap()).collect();

    // Encode confounders column by column.
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, &c) in spec.confounders.iter().zip(&xs) {
        let raw: Vec<f64> = kept.iter().map(|&r| cs.rows[r].values[c].unwrap()).collect();
        if cs.schema().kind(name) == VariableKind::Categorical {
            let mut levels = raw.clone();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            for level in levels.iter().skip(1) {
                let col = raw.iter().map(|&v| if v == *level { 1.0 } else { 0.0 }).collect();
                columns.push((format!("{name}={level}"), col));
            }
        } else {
            columns.push((name.clone(), raw));
        }
    }
    let mut covariate_names = Vec::new();
    let mut constant_covariates = Vec::new();
    let mut kept_cols = Vec::new();
    for (name, col) in columns {
        if col.iter().all(|&v| v == col[0]) {
            constant_covariates.push(name);
        } else {
            covariate_names.push(name);
            kept_cols.push(col);
        }
    }
    let covariates = (0..kept.len())
        .map(|i| kept_cols.iter().map(|c| c[i]).collect())
        .collect();

    Ok(Units {
        ids: kept.iter().map(|&r| cs.rows[r].id.clone()).collect(),
        covariates,
        covariate_names,
        treatment,
        outcome,
        dropped_rows,
        constant_covariates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingDiagnostics {
    pub propensity_converged: bool,
    pub propensity_iterations: usize,
    pub dropped_rows: usize,
    pub constant_covariates: Vec<String>,
    pub balance_retry_applied: bool,
    /// Balance still failed after the retry.
    pub balance_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub ate: f64,
    pub n_units: usize,
    pub n_treated: usize,
    pub n_control: usize,
    /// Neighbour count behind the reported estimate.
    pub k: usize,
    pub balance: BalanceReport,
    pub propensity: PropensityModel,
    pub diagnostics: MatchingDiagnostics,
}

/// Propensity fit, scoring and the matching ATE with the balance retry, on prepared units.
pub fn matching_ate_units(units: &Units, opts: &MatchingOptions) -> Result<AteEstimate> {
    let n_treated = units.n_treated();
    if n_treated == 0 {
        return Err(Error::EmptyGroup("treated"));
    }
    if n_treated == units.len() {
        return Err(Error::EmptyGroup("control"));
    }
    let model = fit_logistic(&units.covariates, &units.treatment, &opts.fit)?;
    let scores = predict_propensity(&model, &units.covariates)?;

    let run = |k: usize| -> Result<(f64, BalanceReport)> {
        let matches = match_nearest(&scores, &units.treatment, k)?;
        let ate = estimate_ate(&units.outcome, &units.treatment, &matches);
        let balance =
            check_balance(&units.covariates, &units.covariate_names, &units.treatment, &matches);
        Ok((ate, balance))
    };
    let (mut ate, mut balance) = run(opts.k)?;
    let mut k = opts.k;
    let mut retried = false;
    if !balance.pass {
        if let Some(rk) = opts.retry_k.filter(|&rk| rk != opts.k) {
            (ate, balance) = run(rk)?;
            k = rk;
            retried = true;
        }
    }
    Ok(AteEstimate {
        ate,
        n_units: units.len(),
        n_treated,
        n_control: units.len() - n_treated,
        k,
        diagnostics: MatchingDiagnostics {
            propensity_converged: model.converged,
            propensity_iterations: model.iterations,
            dropped_rows: units.dropped_rows,
            constant_covariates: units.constant_covariates.clone(),
            balance_retry_applied: retried,
            balance_failed: !balance.pass,
        },
        balance,
        propensity: model,
    })
}

/// The full matching pipeline on a cross-section.
pub fn matching_ate(
    cs: &CrossSection,
    spec: &AnalysisSpec,
    opts: &MatchingOptions,
) -> Result<AteEstimate> {
    let units = prepare_units(cs, spec)?;
    matching_ate_units(&units, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive nearest-neighbour search.
    fn brute_matches(scores: &[f64], treatment: &[bool], k: usize) -> Vec<Vec<usize>> {
        (0..scores.len())
            .map(|i| {
                let mut c: Vec<(f64, usize)> = (0..scores.len())
                    .filter(|&j| treatment[j] != treatment[i])
                    .map(|j| ((scores[i] - scores[j]).abs(), j))
                    .collect();
                c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                c.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect()
    }

    #[test]
    fn four_unit_hand_example() {
        // A, B treated; C, D control.
        let scores = [0.7, 0.4, 0.6, 0.3];
        let t = [true, true, false, false];
        let m = match_nearest(&scores, &t, 1).unwrap();
        assert_eq!(m.matched, vec![vec![2], vec![3], vec![0], vec![1]]);
        let ate = estimate_ate(&[3.0, 2.0, 1.0, 0.0], &t, &m);
        assert_eq!(ate, 2.0);
    }

    #[test]
    fn forced_match_between_two_units() {
        let m = match_nearest(&[0.2, 0.9], &[true, false], 1).unwrap();
        assert_eq!(m.matched, vec![vec![1], vec![0]]);
        let m = match_nearest(&[0.2, 0.9], &[true, false], 3).unwrap();
        assert_eq!(m.matched, vec![vec![1], vec![0]]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let t = [false, true, true, false, true, false];
        let m = match_nearest(&[0.5; 6], &t, 1).unwrap();
        for (i, js) in m.matched.iter().enumerate() {
            assert_eq!(js, &vec![if t[i] { 0 } else { 1 }]);
        }
    }

    #[test]
    fn ate_trivial_cases() {
        let t = [true, false, true, false, false];
        let scores = [0.1, 0.3, 0.35, 0.9, 0.5];
        let m = match_nearest(&scores, &t, 1).unwrap();
        assert_eq!(estimate_ate(&[4.0; 5], &t, &m), 0.0);
        let y: Vec<f64> = t.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        assert_eq!(estimate_ate(&y, &t, &m), 1.0);
    }

    #[test]
    fn empty_group_rejected() {
        assert!(matches!(match_nearest(&[0.1, 0.2], &[true, true], 1), Err(Error::EmptyGroup(_))));
    }

    proptest! {
        #[test]
        fn agrees_with_exhaustive_search(
            raw in prop::collection::vec((0u8..6, any::<bool>()), 2..14),
            k in 1usize..4,
        ) {
            // Coarse scores force plenty of exact ties.
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 7.0).collect();
            let mut t: Vec<bool> = raw.iter().map(|(_, b)| *b).collect();
            t[0] = true;
            t[1] = false;
            let m = match_nearest(&scores, &t, k).unwrap();
            prop_assert_eq!(m.matched, brute_matches(&scores, &t, k));
        }

        #[test]
        fn monotone_score_transform_keeps_matches(
            raw in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..30),
        ) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s).collect();
            let mut t: Vec<bool> = raw.iter().map(|(_, b)| *b).collect();
            t[0] = true;
            t[1] = false;
            // An affine map preserves distance order exactly only up to rounding,
            // so use a power of two scale.
            let scaled: Vec<f64> = scores.iter().map(|s| s * 4.0).collect();
            prop_assert_eq!(
                match_nearest(&scores, &t, 1).unwrap(),
                match_nearest(&scaled, &t, 1).unwrap()
            );
        }

        #[test]
        fn outcome_shift_and_scale(
            raw in prop::collection::vec((0.0f64..1.0, any::<bool>(), -5.0f64..5.0), 2..30),
            c in -10.0f64..10.0,
        ) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let mut t: Vec<bool> = raw.iter().map(|r| r.1).collect();
            t[0] = true;
            t[1] = false;
            let y: Vec<f64> = raw.iter().map(|r| r.2).collect();
            let m = match_nearest(&scores, &t, 2).unwrap();
            let base = estimate_ate(&y, &t, &m);
            let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
            prop_assert!((estimate_ate(&shifted, &t, &m) - base).abs() < 1e-9);
            let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
            prop_assert!((estimate_ate(&scaled, &t, &m) - c * base).abs() < 1e-9);
        }
    }
}
