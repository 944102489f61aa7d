//! Data-generating processes for two-point panels and the Monte-Carlo MSE harness.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    did_regression_estimate, did_reorganized_estimate, irand_estimate, pooled_estimate,
    IrandConfig, Tail,
};
use crate::matching::MatchingOptions;
use crate::panel::{AnalysisSpec, Individual, TwoPointPanel, VariableKind, VariableSchema};
use crate::rng::{derive_seed, stream, Domain};
use crate::subsample::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Treatment is the time indicator: everyone untreated at baseline, treated at follow-up.
    LcdLike,
    /// Treatment is a noisy threshold of a time-indicator confounder.
    BmiLike,
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lcd_like" => Ok(Design::LcdLike),
            "bmi_like" => Ok(Design::BmiLike),
            other => Err(Error::InvalidConfig(format!("unknown design `{other}`"))),
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Design::LcdLike => "lcd_like",
            Design::BmiLike => "bmi_like",
        })
    }
}

/// Parameters of `Y = alpha + T*delta + X.beta + eps` with autocorrelated confounders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub alpha: f64,
    /// One weight per confounder: one for `lcd_like`, two for `bmi_like`.
    pub beta: Vec<f64>,
    pub delta: f64,
    pub sigma: f64,
    /// Correlation between a confounder's baseline and follow-up values.
    pub rho: f64,
    /// Shift added to the follow-up confounder.
    pub drift: f64,
    pub design: Design,
    pub seed: u64,
}

impl DgpConfig {
    /// Time-aligned design with a fixed confounder.
    pub fn lcd_like(n: usize, sigma: f64, seed: u64) -> Self {
        DgpConfig {
            n,
            alpha: 0.0,
            beta: vec![-1.0],
            delta: 1.0,
            sigma,
            rho: 1.0,
            drift: 0.0,
            design: Design::LcdLike,
            seed,
        }
    }

    /// Time-misaligned design: drifting age-like confounder plus a time indicator.
    pub fn bmi_like(n: usize, sigma: f64, seed: u64) -> Self {
        DgpConfig {
            n,
            alpha: 0.0,
            beta: vec![-1.0, 1.0],
            delta: 1.0,
            sigma,
            rho: 0.99,
            drift: 1.0 / 12.0,
            design: Design::BmiLike,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidConfig("sigma must be non-negative".into()));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::InvalidConfig("rho must lie in [-1, 1]".into()));
        }
        let want = match self.design {
            Design::LcdLike => 1,
            Design::BmiLike => 2,
        };
        if self.beta.len() != want {
            return Err(Error::InvalidConfig(format!(
                "{} design needs {want} beta weights, got {}",
                self.design,
                self.beta.len()
            )));
        }
        Ok(())
    }
}

/// `[x0, x1]` per individual, with `x1 = rho*x0 + sqrt(1-rho^2)*xi + drift`.
pub fn generate_confounders(n: usize, rho: f64, drift: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::InvalidConfig("rho must lie in [-1, 1]".into()));
    }
    let mut rng = stream(seed, Domain::Confounders, 0, 0);
    let innov = (1.0 - rho * rho).sqrt();
    Ok((0..n)
        .map(|_| {
            let x0: f64 = rng.sample(StandardNormal);
            let xi: f64 = rng.sample(StandardNormal);
            [x0, rho * x0 + innov * xi + drift]
        })
        .collect())
}

/// Treatment at both time points for `n` individuals.
pub fn assign_treatment(design: Design, n: usize, seed: u64) -> Vec<[bool; 2]> {
    match design {
        Design::LcdLike => vec![[false, true]; n],
        Design::BmiLike => {
            let mut rng = stream(seed, Domain::Treatment, 0, 0);
            (0..n)
                .map(|_| {
                    [0.0, 1.0].map(|indicator: f64| {
                        let noise: f64 = rng.sample(StandardNormal);
                        indicator + noise > 0.0
                    })
                })
                .collect()
        }
    }
}

/// `alpha + T*delta + x.beta + N(0, sigma^2)`; `x[i][t]` holds individual `i`'s confounders at time `t`.
pub fn generate_outcomes(
    treatment: &[[bool; 2]],
    x: &[[Vec<f64>; 2]],
    config: &DgpConfig,
) -> Vec<[f64; 2]> {
    let mut rng = stream(config.seed, Domain::Outcome, 0, 0);
    treatment
        .iter()
        .zip(x)
        .map(|(t, xi)| {
            [0, 1].map(|k| {
                let eps: f64 = rng.sample(StandardNormal);
                let xb: f64 = xi[k].iter().zip(&config.beta).map(|(a, b)| a * b).sum();
                config.alpha + if t[k] { config.delta } else { 0.0 } + xb + config.sigma * eps
            })
        })
        .collect()
}

fn assemble(
    schema: VariableSchema,
    variables: Vec<String>,
    rows: impl Iterator<Item = [Vec<f64>; 2]>,
) -> Result<TwoPointPanel> {
    let individuals = rows
        .enumerate()
        .map(|(i, [a, b])| Individual {
            id: Arc::from((i + 1).to_string()),
            values: [
                a.into_iter().map(Some).collect(),
                b.into_iter().map(Some).collect(),
            ],
        })
        .collect();
    TwoPointPanel::new(schema, variables, individuals)
}

/// Simulated panel with columns `T`, `X1` (and `X2` for `bmi_like`), `Y`.
pub fn simulate_panel(config: &DgpConfig) -> Result<TwoPointPanel> {
    config.validate()?;
    let x1 = generate_confounders(config.n, config.rho, config.drift, config.seed)?;
    let treatment = assign_treatment(config.design, config.n, config.seed);
    let x: Vec<[Vec<f64>; 2]> = x1
        .iter()
        .map(|&[a, b]| match config.design {
            Design::LcdLike => [vec![a], vec![b]],
            Design::BmiLike => [vec![a, 0.0], vec![b, 1.0]],
        })
        .collect();
    let y = generate_outcomes(&treatment, &x, config);

    let (schema, variables) = match config.design {
        Design::LcdLike => (
            VariableSchema::new("T", &["X1"], "Y"),
            vec!["T".to_string(), "X1".into(), "Y".into()],
        ),
        Design::BmiLike => (
            VariableSchema::new("T", &["X1", "X2"], "Y").with_kind("X2", VariableKind::Binary),
            vec!["T".to_string(), "X1".into(), "X2".into(), "Y".into()],
        ),
    };
    let rows = (0..config.n).map(|i| {
        [0, 1].map(|k| {
            let mut row = vec![if treatment[i][k] { 1.0 } else { 0.0 }];
            row.extend_from_slice(&x[i][k]);
            row.push(y[i][k]);
            row
        })
    });
    assemble(schema, variables, rows)
}

/// Linear mediation model on a time-aligned panel:
/// `M = eta*T + zeta*X + N(0, mediator_sigma^2)`, `Y = delta*T + gamma*M + beta*X + N(0, sigma^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationDgp {
    pub n: usize,
    pub delta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub beta: f64,
    pub zeta: f64,
    pub sigma: f64,
    pub mediator_sigma: f64,
    pub seed: u64,
}

impl MediationDgp {
    pub fn total_effect(&self) -> f64 {
        self.delta + self.gamma * self.eta
    }
}

/// Columns `T`, `X1`, `M`, `Y`; `M` is declared as the mediator.
pub fn simulate_mediation_panel(dgp: &MediationDgp) -> Result<TwoPointPanel> {
    if dgp.n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let x = generate_confounders(dgp.n, 1.0, 0.0, dgp.seed)?;
    let mut rng = stream(dgp.seed, Domain::Mediator, 0, 0);
    let rows: Vec<[Vec<f64>; 2]> = x
        .iter()
        .map(|xi| {
            [0usize, 1].map(|t| {
                let tv = t as f64;
                let nu: f64 = rng.sample(StandardNormal);
                let eps: f64 = rng.sample(StandardNormal);
                let m = dgp.eta * tv + dgp.zeta * xi[t] + dgp.mediator_sigma * nu;
                let y = dgp.delta * tv + dgp.gamma * m + dgp.beta * xi[t] + dgp.sigma * eps;
                vec![tv, xi[t], m, y]
            })
        })
        .collect();
    let schema = VariableSchema::new("T", &["X1"], "Y").with_mediator("M");
    let variables = vec!["T".to_string(), "X1".into(), "M".into(), "Y".into()];
    assemble(schema, variables, rows.into_iter())
}

/// Order-sensitive fingerprint of every cell in a panel.
pub fn panel_digest(panel: &TwoPointPanel) -> u64 {
    let mut h = DefaultHasher::new();
    panel.variables().hash(&mut h);
    for ind in panel.individuals() {
        ind.id.hash(&mut h);
        for row in &ind.values {
            for v in row {
                v.map(f64::to_bits).hash(&mut h);
            }
        }
    }
    h.finish()
}

// ---------------------------------------------------------------------------
// MSE harness

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimatorKind {
    Irand { m: usize, strategy: Strategy },
    Pooled,
    DidRegression,
    DidReorganized,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Irand { .. } => "irand",
            EstimatorKind::Pooled => "pooled",
            EstimatorKind::DidRegression => "did_regression",
            EstimatorKind::DidReorganized => "did_reorganized",
        }
    }

    /// Point estimate of the treatment effect on `panel`.
    pub fn estimate(&self, panel: &TwoPointPanel, spec: &AnalysisSpec, seed: u64) -> Result<f64> {
        let opts = MatchingOptions::default();
        match *self {
            EstimatorKind::Irand { m, strategy } => {
                let config = IrandConfig { m, s: 0, tail: Tail::Lower, strategy, seed, matching: opts };
                irand_estimate(panel, spec, &config).map(|r| r.mean_ate)
            }
            EstimatorKind::Pooled => {
                pooled_estimate(panel, spec, 0, Tail::Lower, seed, &opts).map(|r| r.estimate.ate)
            }
            EstimatorKind::DidRegression => did_regression_estimate(panel, spec).map(|r| r.delta_hat),
            EstimatorKind::DidReorganized => {
                did_reorganized_estimate(panel, spec, 0, Tail::Lower, seed, &opts)
                    .map(|r| r.estimate.ate)
            }
        }
    }
}

/// The three estimators compared in the default experiments.
pub fn default_estimators() -> Vec<EstimatorKind> {
    vec![
        EstimatorKind::Irand { m: 50, strategy: Strategy::MinOverlap },
        EstimatorKind::Pooled,
        EstimatorKind::DidRegression,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Template for every cell; `n`, `sigma` and `seed` are overwritten per cell and replicate.
    pub dgp: DgpConfig,
    pub grid_n: Vec<usize>,
    pub grid_sigma: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub replicates: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpConfig, replicates: usize, seed: u64) -> Self {
        ExperimentConfig {
            dgp,
            grid_n: vec![50, 100, 200, 400],
            grid_sigma: vec![0.25, 0.5, 1.0, 2.0],
            estimators: default_estimators(),
            replicates,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCell {
    pub design: Design,
    pub n: usize,
    pub sigma: f64,
    pub estimator: String,
    pub mse: f64,
    pub bias: f64,
    /// Population variance of the replicate estimates.
    pub variance: f64,
    pub replicates: usize,
    pub failures: usize,
    pub estimates: Vec<f64>,
    /// Digest of the panel each estimate was computed on.
    pub panel_digests: Vec<u64>,
}

impl MseCell {
    fn from_estimates(
        design: Design,
        n: usize,
        sigma: f64,
        estimator: &str,
        truth: f64,
        results: Vec<(u64, Option<f64>)>,
    ) -> Self {
        let failures = results.iter().filter(|r| r.1.is_none()).count();
        let (panel_digests, estimates): (Vec<u64>, Vec<f64>) =
            results.into_iter().filter_map(|(d, e)| e.map(|e| (d, e))).unzip();
        let r = estimates.len() as f64;
        let (mse, bias, variance) = if estimates.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = estimates.iter().sum::<f64>() / r;
            let mse = estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / r;
            let variance = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / r;
            (mse, mean - truth, variance)
        };
        MseCell {
            design,
            n,
            sigma,
            estimator: estimator.to_string(),
            mse,
            bias,
            variance,
            replicates: estimates.len(),
            failures,
            estimates,
            panel_digests,
        }
    }

    /// Monte-Carlo standard error of the mean estimate.
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.replicates as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseSurface {
    pub config: ExperimentConfig,
    pub cells: Vec<MseCell>,
}

impl MseSurface {
    pub fn cell(&self, n: usize, sigma: f64, estimator: &str) -> Option<&MseCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.sigma == sigma && c.estimator == estimator)
    }

    /// Plot-ready rows: design, n, sigma, estimator, mse, bias, variance, replicates.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["design", "n", "sigma", "estimator", "mse", "bias", "variance", "replicates"])?;
        for c in &self.cells {
            w.write_record([
                c.design.to_string(),
                c.n.to_string(),
                c.sigma.to_string(),
                c.estimator.clone(),
                c.mse.to_string(),
                c.bias.to_string(),
                c.variance.to_string(),
                c.replicates.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every estimator on the same simulated panels for each `(n, sigma)` cell.
pub fn run_mse_experiment(config: &ExperimentConfig) -> Result<MseSurface> {
    if config.replicates < 2 {
        return Err(Error::InvalidConfig("at least two replicates are needed".into()));
    }
    if config.estimators.is_empty() {
        return Err(Error::InvalidConfig("no estimators requested".into()));
    }
    let mut cells_spec = Vec::new();
    for &n in &config.grid_n {
        for &sigma in &config.grid_sigma {
            let mut dgp = config.dgp.clone();
            dgp.n = n;
            dgp.sigma = sigma;
            dgp.validate()?;
            cells_spec.push(dgp);
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells_spec.len())
        .flat_map(|c| (0..config.replicates).map(move |r| (c, r)))
        .collect();

    // results[job][estimator] = (digest, estimate)
    let results: Vec<Vec<(u64, Option<f64>)>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut dgp = cells_spec[c].clone();
            dgp.seed = derive_seed(config.seed, Domain::Replicate, c as u64, r as u64);
            let panel = match simulate_panel(&dgp) {
                Ok(p) => p,
                Err(_) => return vec![(0, None); config.estimators.len()],
            };
            let spec = panel.schema().analysis_spec();
            config
                .estimators
                .iter()
                .map(|est| {
                    let digest = panel_digest(&panel);
                    (digest, est.estimate(&panel, &spec, dgp.seed).ok())
                })
                .collect()
        })
        .collect();

    let mut cells = Vec::new();
    for (c, dgp) in cells_spec.iter().enumerate() {
        let rows = &results[c * config.replicates..(c + 1) * config.replicates];
        for (e, est) in config.estimators.iter().enumerate() {
            let per_rep: Vec<(u64, Option<f64>)> = rows.iter().map(|r| r[e]).collect();
            cells.push(MseCell::from_estimates(
                dgp.design,
                dgp.n,
                dgp.sigma,
                est.name(),
                dgp.delta,
                per_rep,
            ));
        }
    }
    Ok(MseSurface { config: config.clone(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_confounder_is_copied_exactly() {
        let x = generate_confounders(100, 1.0, 0.0, 3).unwrap();
        assert!(x.iter().all(|v| v[0] == v[1]));
    }

    #[test]
    fn autocorrelation_and_drift() {
        let n = 100_000;
        let x = generate_confounders(n, 0.99, 1.0 / 12.0, 5).unwrap();
        let nf = n as f64;
        let m0 = x.iter().map(|v| v[0]).sum::<f64>() / nf;
        let m1 = x.iter().map(|v| v[1]).sum::<f64>() / nf;
        let cov = x.iter().map(|v| (v[0] - m0) * (v[1] - m1)).sum::<f64>() / nf;
        let s0 = (x.iter().map(|v| (v[0] - m0).powi(2)).sum::<f64>() / nf).sqrt();
        let s1 = (x.iter().map(|v| (v[1] - m1).powi(2)).sum::<f64>() / nf).sqrt();
        assert!((cov / (s0 * s1) - 0.99).abs() < 0.002);
        let drift = x.iter().map(|v| v[1] - v[0]).sum::<f64>() / nf;
        // sd of a single difference is about 0.14.
        assert!((drift - 1.0 / 12.0).abs() < 3.0 * 0.15 / nf.sqrt());
    }

    #[test]
    fn uncorrelated_confounder_times() {
        let n = 20_000;
        let x = generate_confounders(n, 0.0, 0.0, 6).unwrap();
        let nf = n as f64;
        let r = x.iter().map(|v| v[0] * v[1]).sum::<f64>() / nf;
        assert!(r.abs() < 3.0 / nf.sqrt());
    }

    #[test]
    fn rejects_bad_rho() {
        assert!(generate_confounders(3, 1.5, 0.0, 1).is_err());
    }

    #[test]
    fn lcd_treatment_equals_time() {
        assert!(assign_treatment(Design::LcdLike, 10, 1).iter().all(|t| *t == [false, true]));
        let p = simulate_panel(&DgpConfig::lcd_like(20, 1.0, 2)).unwrap();
        let t = p.column_index("T").unwrap();
        for i in 0..p.n_individuals() {
            assert_eq!(p.value(i, 0, t), Some(0.0));
            assert_eq!(p.value(i, 1, t), Some(1.0));
        }
    }

    #[test]
    fn bmi_treatment_rates() {
        let n = 40_000;
        let t = assign_treatment(Design::BmiLike, n, 9);
        let nf = n as f64;
        let p0 = t.iter().filter(|v| v[0]).count() as f64 / nf;
        let p1 = t.iter().filter(|v| v[1]).count() as f64 / nf;
        let phi1 = 0.841_344_746_068_543;
        assert!((p0 - 0.5).abs() < 4.0 * (0.25 / nf).sqrt());
        assert!((p1 - phi1).abs() < 4.0 * (phi1 * (1.0 - phi1) / nf).sqrt());
    }

    #[test]
    fn noiseless_outcome_closed_form() {
        let cfg = DgpConfig { sigma: 0.0, ..DgpConfig::lcd_like(1, 0.0, 1) };
        let y = generate_outcomes(&[[true, true]], &[[vec![2.0], vec![0.5]]], &cfg);
        assert_eq!(y[0], [-1.0, 0.5]);
    }

    #[test]
    fn two_confounder_outcomes_match_hand_rows() {
        let cfg = DgpConfig { sigma: 0.0, ..DgpConfig::bmi_like(3, 0.0, 1) };
        let t = [[false, true], [true, true], [false, false]];
        let x = [
            [vec![0.5, 0.0], vec![0.6, 1.0]],
            [vec![-1.0, 0.0], vec![-0.9, 1.0]],
            [vec![2.0, 0.0], vec![2.1, 1.0]],
        ];
        let y = generate_outcomes(&t, &x, &cfg);
        // Y = T - X1 + X2
        assert_eq!(y[0], [-0.5, 1.0 - 0.6 + 1.0]);
        assert_eq!(y[1], [1.0 + 1.0, 1.0 + 0.9 + 1.0]);
        assert_eq!(y[2], [-2.0, -2.1 + 1.0]);
    }

    #[test]
    fn centered_confounder_term_has_mean_near_zero() {
        let p = simulate_panel(&DgpConfig::lcd_like(50_000, 1.0, 8)).unwrap();
        let x = p.column_index("X1").unwrap();
        let n = p.n_individuals() as f64;
        let g = (0..p.n_individuals()).map(|i| -p.value(i, 0, x).unwrap()).sum::<f64>() / n;
        assert!(g.abs() < 4.0 / n.sqrt());
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = simulate_panel(&DgpConfig::bmi_like(30, 0.5, 77)).unwrap();
        let b = simulate_panel(&DgpConfig::bmi_like(30, 0.5, 77)).unwrap();
        assert_eq!(a, b);
        assert_eq!(panel_digest(&a), panel_digest(&b));
        let c = simulate_panel(&DgpConfig::bmi_like(30, 0.5, 78)).unwrap();
        assert_ne!(panel_digest(&a), panel_digest(&c));
    }

    #[test]
    fn beta_length_checked() {
        let cfg = DgpConfig { beta: vec![1.0], ..DgpConfig::bmi_like(3, 0.0, 1) };
        assert!(simulate_panel(&cfg).is_err());
    }

    #[test]
    fn small_experiment_has_consistent_cells() {
        let mut cfg = ExperimentConfig::new(DgpConfig::lcd_like(0, 0.0, 0), 4, 1);
        cfg.grid_n = vec![20];
        cfg.grid_sigma = vec![0.5, 1.0];
        cfg.estimators = vec![
            EstimatorKind::Irand { m: 5, strategy: Strategy::MinOverlap },
            EstimatorKind::Pooled,
            EstimatorKind::DidRegression,
            EstimatorKind::DidReorganized,
        ];
        let s = run_mse_experiment(&cfg).unwrap();
        assert_eq!(s.cells.len(), 8);
        for c in &s.cells {
            assert_eq!(c.replicates + c.failures, 4);
            assert!((c.mse - (c.bias * c.bias + c.variance)).abs() < 1e-10);
        }
        // Every estimator saw the same panel in each replicate.
        for sigma in [0.5, 1.0] {
            let digests: Vec<&Vec<u64>> = ["irand", "pooled", "did_regression", "did_reorganized"]
                .iter()
                .map(|e| &s.cell(20, sigma, e).unwrap().panel_digests)
                .collect();
            assert!(digests.windows(2).all(|w| w[0] == w[1]));
        }
        assert_eq!(run_mse_experiment(&cfg).unwrap(), s);
        let mut csv = Vec::new();
        s.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("design,n,sigma,estimator,mse,bias,variance,replicates\n"));
    }

    #[test]
    fn experiment_needs_two_replicates() {
        let cfg = ExperimentConfig::new(DgpConfig::lcd_like(0, 0.0, 0), 1, 1);
        assert!(run_mse_experiment(&cfg).is_err());
    }
}
