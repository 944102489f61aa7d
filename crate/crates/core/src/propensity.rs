//! Propensity scores by ridge-penalized logistic regression, and covariate balance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::MatchSet;

/// Scores are clamped to `[SCORE_EPS, 1 - SCORE_EPS]`.
pub const SCORE_EPS: f64 = 1e-12;

/// Matched samples are balanced when every |standardized difference| is below this.
pub const BALANCE_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Convergence when the largest coefficient change falls below this.
    pub tolerance: f64,
    /// L2 penalty on the slopes (the intercept is not penalized).
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 100,
            tolerance: 1e-8,
            ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_abs_score_logit: f64,
    /// Penalized log-likelihood after each accepted step, starting from the zero model.
    pub objective_trace: Vec<f64>,
}

impl PropensityModel {
    /// Fails with [`Error::DidNotConverge`] when the fit stopped at the iteration cap.
    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::DidNotConverge { iterations: self.iterations })
        }
    }

    pub fn linear_predictor(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.slopes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.slopes.len(),
                got: row.len(),
            });
        }
        Ok(self.intercept + row.iter().zip(&self.slopes).map(|(x, b)| x * b).sum::<f64>())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn design_matrix(x: &[Vec<f64>], p: usize) -> Result<DMatrix<f64>> {
    for row in x {
        if row.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: row.len() });
        }
    }
    Ok(DMatrix::from_fn(x.len(), p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] }))
}

fn penalized_loglik(xm: &DMatrix<f64>, t: &[bool], beta: &DVector<f64>, ridge: f64) -> f64 {
    let eta = xm * beta;
    let ll: f64 = eta
        .iter()
        .zip(t)
        .map(|(&e, &ti)| if ti { e - softplus(e) } else { -softplus(e) })
        .sum();
    let penalty: f64 = beta.iter().skip(1).map(|b| b * b).sum();
    ll - 0.5 * ridge * penalty
}

/// Maximizes the ridge-penalized binomial log-likelihood by iteratively
/// reweighted least squares with step halving.
pub fn fit_logistic(x: &[Vec<f64>], t: &[bool], opts: &FitOptions) -> Result<PropensityModel> {
    if x.len() != t.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: t.len() });
    }
    if x.is_empty() {
        return Err(Error::EmptyData("no rows to fit".into()));
    }
    let n_treated = t.iter().filter(|&&v| v).count();
    if n_treated == 0 || n_treated == t.len() {
        return Err(Error::SingleClass);
    }
    let p = x[0].len();
    let xm = design_matrix(x, p)?;
    let k = p + 1;
    let mut beta = DVector::<f64>::zeros(k);
    let mut objective = penalized_loglik(&xm, t, &beta, opts.ridge);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;
    let yv = DVector::from_iterator(t.len(), t.iter().map(|&v| if v { 1.0 } else { 0.0 }));

    while iterations < opts.max_iterations {
        iterations += 1;
        let eta = &xm * &beta;
        let prob = eta.map(sigmoid);
        let w = prob.map(|q| (q * (1.0 - q)).max(1e-300));
        let mut grad = xm.tr_mul(&(&yv - &prob));
        let mut hess = xm.tr_mul(&DMatrix::from_fn(xm.nrows(), k, |i, j| xm[(i, j)] * w[i]));
        for j in 1..k {
            grad[j] -= opts.ridge * beta[j];
            hess[(j, j)] += opts.ridge;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => match hess.clone().pseudo_inverse(1e-12) {
                Ok(pinv) => pinv * &grad,
                Err(_) => break,
            },
        };

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &beta + &step * scale;
            let obj = penalized_loglik(&xm, t, &cand, opts.ridge);
            if obj >= objective {
                accepted = Some((cand, obj));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, obj)) = accepted else {
            // No ascent direction left at working precision.
            converged = step.amax() * scale < opts.tolerance.max(1e-12) || step.amax() < 1e-6;
            break;
        };
        let change = (&cand - &beta).amax();
        beta = cand;
        objective = obj;
        trace.push(objective);
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }

    let max_abs_score_logit = (&xm * &beta).amax();
    Ok(PropensityModel {
        intercept: beta[0],
        slopes: beta.iter().skip(1).copied().collect(),
        converged,
        iterations,
        max_abs_score_logit,
        objective_trace: trace,
    })
}

/// Inverse-logit of the linear predictor, clamped away from 0 and 1.
pub fn predict_propensity(model: &PropensityModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    x.iter()
        .map(|row| {
            model
                .linear_predictor(row)
                .map(|z| sigmoid(z).clamp(SCORE_EPS, 1.0 - SCORE_EPS))
        })
        .collect()
}

fn weighted_mean_sd(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let wsum: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / wsum;
    let ss: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum();
    let sd = if wsum > 1.0 { (ss / (wsum - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

fn smd_from_moments(mean_t: f64, sd_t: f64, mean_c: f64) -> Result<f64> {
    let diff = mean_t - mean_c;
    if sd_t > 0.0 {
        Ok(diff / sd_t)
    } else if diff == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::ZeroVariance)
    }
}

/// `(mean_treated - mean_control) / sd_treated`, with the sample sd of the treated group.
pub fn standardized_mean_difference(treated: &[f64], control: &[f64]) -> Result<f64> {
    if treated.is_empty() {
        return Err(Error::EmptyGroup("treated"));
    }
    if control.is_empty() {
        return Err(Error::EmptyGroup("control"));
    }
    let (mt, st) = weighted_mean_sd(treated, &vec![1.0; treated.len()]);
    let (mc, _) = weighted_mean_sd(control, &vec![1.0; control.len()]);
    smd_from_moments(mt, st, mc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub covariates: Vec<String>,
    /// Standardized differences before matching.
    pub raw_differences: Vec<f64>,
    /// Standardized differences on the matched sample.
    pub standardized_differences: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
}

impl BalanceReport {
    pub fn max_abs_difference(&self) -> f64 {
        self.standardized_differences
            .iter()
            .fold(0.0, |acc, d| acc.max(d.abs()))
    }
}

fn smd_or_inf(mean_t: f64, sd_t: f64, mean_c: f64) -> f64 {
    smd_from_moments(mean_t, sd_t, mean_c).unwrap_or(if mean_t > mean_c {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    })
}

/// Standardized differences on the matched sample.
///
/// Each unit contributes its own value to its group's side and the mean of its
/// matches to the other side, so match multiplicity acts as a weight. A
/// degenerate covariate (zero treated-side spread) counts as 0 when the two
/// sides agree and as an infinite difference otherwise.
pub fn check_balance(
    covariates: &[Vec<f64>],
    names: &[String],
    treatment: &[bool],
    matches: &MatchSet,
) -> BalanceReport {
    let n = treatment.len();
    let p = names.len();
    let mut raw = Vec::with_capacity(p);
    let mut matched = Vec::with_capacity(p);
    for k in 0..p {
        let col: Vec<f64> = covariates.iter().map(|r| r[k]).collect();

        let (tv, cv): (Vec<(f64, bool)>, Vec<(f64, bool)>) =
            col.iter().copied().zip(treatment.iter().copied()).partition(|(_, t)| *t);
        let tv: Vec<f64> = tv.into_iter().map(|(v, _)| v).collect();
        let cv: Vec<f64> = cv.into_iter().map(|(v, _)| v).collect();
        let (mt, st) = weighted_mean_sd(&tv, &vec![1.0; tv.len()]);
        let (mc, _) = weighted_mean_sd(&cv, &vec![1.0; cv.len()]);
        raw.push(smd_or_inf(mt, st, mc));

        let mut t_vals = Vec::with_capacity(2 * n);
        let mut t_w = Vec::with_capacity(2 * n);
        let mut c_vals = Vec::with_capacity(2 * n);
        let mut c_w = Vec::with_capacity(2 * n);
        for i in 0..n {
            let (own_v, own_w, other_v, other_w) = if treatment[i] {
                (&mut t_vals, &mut t_w, &mut c_vals, &mut c_w)
            } else {
                (&mut c_vals, &mut c_w, &mut t_vals, &mut t_w)
            };
            own_v.push(col[i]);
            own_w.push(1.0);
            let js = &matches.matched[i];
            let w = 1.0 / js.len() as f64;
            for &j in js {
                other_v.push(col[j]);
                other_w.push(w);
            }
        }
        let (mt, st) = weighted_mean_sd(&t_vals, &t_w);
        let (mc, _) = weighted_mean_sd(&c_vals, &c_w);
        matched.push(smd_or_inf(mt, st, mc));
    }
    let pass = matched.iter().all(|d| d.abs() < BALANCE_THRESHOLD);
    BalanceReport {
        covariates: names.to_vec(),
        raw_differences: raw,
        standardized_differences: matched,
        threshold: BALANCE_THRESHOLD,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::rng::{stream, Domain};

    fn model(intercept: f64, slopes: Vec<f64>) -> PropensityModel {
        PropensityModel {
            intercept,
            slopes,
            converged: true,
            iterations: 0,
            max_abs_score_logit: 0.0,
            objective_trace: vec![],
        }
    }

    #[test]
    fn closed_form_predictions() {
        let rows = vec![vec![0.3], vec![-2.0]];
        assert_eq!(predict_propensity(&model(0.0, vec![0.0]), &rows).unwrap(), vec![0.5, 0.5]);
        let logit_09 = (0.9f64 / 0.1).ln();
        for s in predict_propensity(&model(logit_09, vec![0.0]), &rows).unwrap() {
            assert!((s - 0.9).abs() < 1e-15);
        }
        let s = predict_propensity(&model(0.0, vec![1.0]), &[vec![0.5]]).unwrap();
        assert!((s[0] - 1.0 / (1.0 + (-0.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn predictions_stay_inside_unit_interval() {
        let s = predict_propensity(&model(0.0, vec![1.0]), &[vec![1e6], vec![-1e6]]).unwrap();
        assert_eq!(s, vec![1.0 - SCORE_EPS, SCORE_EPS]);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let err = predict_propensity(&model(0.0, vec![1.0]), &[vec![1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(fit_logistic(&x, &[true, true], &FitOptions::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn null_model_is_near_zero() {
        let mut rng = stream(1, Domain::Outcome, 0, 0);
        let n = 2000;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.sample::<f64, _>(StandardNormal)]).collect();
        let t: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let m = fit_logistic(&x, &t, &FitOptions::default()).unwrap();
        assert!(m.converged);
        // Standard errors are about 2/sqrt(n) = 0.045 for both coefficients.
        assert!(m.intercept.abs() < 0.09, "{m:?}");
        assert!(m.slopes[0].abs() < 0.09, "{m:?}");
    }

    /// Plain Newton iteration on the penalized objective, run to a tight tolerance.
    fn newton_oracle(x: &[f64], t: &[bool], ridge: f64) -> (f64, f64) {
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for _ in 0..500 {
            let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, -ridge * b, 0.0, 0.0, ridge);
            for (&xi, &ti) in x.iter().zip(t) {
                let p = 1.0 / (1.0 + (-(a + b * xi)).exp());
                let r = if ti { 1.0 } else { 0.0 } - p;
                let w = p * (1.0 - p);
                ga += r;
                gb += r * xi;
                haa += w;
                hab += w * xi;
                hbb += w * xi * xi;
            }
            let det = haa * hbb - hab * hab;
            let da = (hbb * ga - hab * gb) / det;
            let db = (haa * gb - hab * ga) / det;
            a += da;
            b += db;
            if da.abs().max(db.abs()) < 1e-13 {
                break;
            }
        }
        (a, b)
    }

    #[test]
    fn separable_data_gives_finite_monotone_fit() {
        let xs: Vec<f64> = (-5..=5).filter(|&v| v != 0).map(|v| v as f64 / 2.0).collect();
        let t: Vec<bool> = xs.iter().map(|&v| v > 0.0).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        let opts = FitOptions { ridge: 0.1, ..FitOptions::default() };
        let m = fit_logistic(&rows, &t, &opts).unwrap();
        assert!(m.converged);
        assert!(m.intercept.is_finite() && m.slopes[0].is_finite() && m.slopes[0] > 0.0);
        let (a, b) = newton_oracle(&xs, &t, 0.1);
        assert!((m.intercept - a).abs() < 1e-6 && (m.slopes[0] - b).abs() < 1e-6);
        let s = predict_propensity(&m, &rows).unwrap();
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn score_equation_holds_at_optimum() {
        let mut rng = stream(2, Domain::Outcome, 0, 0);
        let n = 300;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal), rng.random::<f64>()])
            .collect();
        let t: Vec<bool> = x
            .iter()
            .map(|r| rng.random::<f64>() < 1.0 / (1.0 + (-(0.3 + r[0] - r[1])).exp()))
            .collect();
        let opts = FitOptions { ridge: 0.5, ..FitOptions::default() };
        let m = fit_logistic(&x, &t, &opts).unwrap();
        let e = predict_propensity(&m, &x).unwrap();
        let mut g = [0.0; 3];
        for i in 0..n {
            let r = if t[i] { 1.0 } else { 0.0 } - e[i];
            g[0] += r;
            g[1] += r * x[i][0];
            g[2] += r * x[i][1];
        }
        assert!(g[0].abs() < 1e-6);
        assert!((g[1] - opts.ridge * m.slopes[0]).abs() < 1e-6);
        assert!((g[2] - opts.ridge * m.slopes[1]).abs() < 1e-6);
        assert!(m.objective_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn refit_is_bit_identical() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.37).sin()]).collect();
        let t: Vec<bool> = (0..50).map(|i| (i * 7) % 3 == 0).collect();
        let a = fit_logistic(&x, &t, &FitOptions::default()).unwrap();
        let b = fit_logistic(&x, &t, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn smd_closed_forms() {
        assert_eq!(standardized_mean_difference(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let v = standardized_mean_difference(&[2.0, 4.0], &[1.0, 1.0]).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            standardized_mean_difference(&[2.0, 2.0], &[1.0]),
            Err(Error::ZeroVariance)
        ));
        assert_eq!(standardized_mean_difference(&[2.0, 2.0], &[2.0]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn smd_shift_and_scale(
            t in prop::collection::vec(-10.0f64..10.0, 2..20),
            c in prop::collection::vec(-10.0f64..10.0, 1..20),
            shift in -50.0f64..50.0,
            scale in 0.1f64..10.0,
        ) {
            let Ok(base) = standardized_mean_difference(&t, &c) else { return Ok(()); };
            let ts: Vec<f64> = t.iter().map(|v| v + shift).collect();
            let cs: Vec<f64> = c.iter().map(|v| v + shift).collect();
            let shifted = standardized_mean_difference(&ts, &cs).unwrap();
            prop_assert!((shifted - base).abs() < 1e-6 * (1.0 + base.abs()));
            let tm: Vec<f64> = t.iter().map(|v| v * scale).collect();
            let cm: Vec<f64> = c.iter().map(|v| v * scale).collect();
            let scaled = standardized_mean_difference(&tm, &cm).unwrap();
            prop_assert!((scaled - base).abs() < 1e-9 * (1.0 + base.abs()));
        }

        #[test]
        fn predictions_monotone_in_positive_coefficient(
            b0 in -3.0f64..3.0, b1 in 0.0f64..5.0, b2 in -5.0f64..5.0,
            x1 in -5.0f64..5.0, dx in 0.0f64..5.0, x2 in -5.0f64..5.0,
        ) {
            let m = model(b0, vec![b1, b2]);
            let s = predict_propensity(&m, &[vec![x1, x2], vec![x1 + dx, x2]]).unwrap();
            prop_assert!(s[0] <= s[1]);
            prop_assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
