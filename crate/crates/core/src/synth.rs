//! Synthetic two-point panels drawn to match per-visit summary statistics.
//!
//! Each variable gets one standard-normal latent per individual and visit; the two
//! visits' latents are correlated by the variable's `rho`. Latents are mapped to
//! values through a truncated normal (continuous), a threshold (binary) or a
//! rounded normal (ordinal) whose parameters reproduce the requested moments.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::panel::{Individual, TwoPointPanel, VariableKind, VariableSchema};
use crate::rng::{stream, Domain};

/// Summary statistics bundled with the crate: the nutrition study cohort at its two visits.
pub const BUNDLED_SUMMARY: &str = include_str!("../data/table6_summary.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// Non-missing observations; drives missingness when enabled.
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub kind: VariableKind,
    /// Baseline and follow-up moments.
    pub moments: [Moments; 2],
    /// Latent correlation between the two visits.
    pub rho: f64,
}

impl VariableSummary {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidSummary { variable: self.name.clone(), reason };
        for (t, m) in self.moments.iter().enumerate() {
            if !(m.sd >= 0.0) {
                return Err(bad(format!("sd < 0 at time {t}")));
            }
            if !(m.min <= m.max) {
                return Err(bad(format!("min > max at time {t}")));
            }
            if !(m.min <= m.mean && m.mean <= m.max) {
                return Err(bad(format!("mean outside [min, max] at time {t}")));
            }
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(bad("rho outside [-1, 1]".into()));
        }
        if self.kind == VariableKind::Categorical {
            return Err(bad("categorical variables cannot be synthesized from moments".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct SummaryRow {
    variable: String,
    kind: VariableKind,
    time: u8,
    count: usize,
    mean: f64,
    sd: f64,
    min: f64,
    max: f64,
    rho: Option<f64>,
}

/// Parses `variable,kind,time,count,mean,sd,min,max[,rho]` rows; `#` lines are comments.
/// A missing `rho` defaults to 0.
pub fn read_summary<R: Read>(reader: R) -> Result<Vec<VariableSummary>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut order: Vec<String> = Vec::new();
    let mut parts: BTreeMap<String, (VariableKind, [Option<Moments>; 2], [f64; 2])> =
        BTreeMap::new();
    for row in rdr.deserialize() {
        let row: SummaryRow = row?;
        let bad = |reason: &str| Error::InvalidSummary {
            variable: row.variable.clone(),
            reason: reason.into(),
        };
        if row.time > 1 {
            return Err(bad("time must be 0 or 1"));
        }
        let entry = parts.entry(row.variable.clone()).or_insert_with(|| {
            order.push(row.variable.clone());
            (row.kind, [None, None], [0.0; 2])
        });
        if entry.0 != row.kind {
            return Err(bad("kind differs between times"));
        }
        let slot = &mut entry.1[row.time as usize];
        if slot.is_some() {
            return Err(bad("time listed twice"));
        }
        *slot = Some(Moments {
            count: row.count,
            mean: row.mean,
            sd: row.sd,
            min: row.min,
            max: row.max,
        });
        entry.2[row.time as usize] = row.rho.unwrap_or(0.0);
    }
    order
        .into_iter()
        .map(|name| {
            let (kind, m, rho) = parts.remove(&name).expect("recorded");
            let missing = || Error::InvalidSummary {
                variable: name.clone(),
                reason: "needs one row per time".into(),
            };
            if rho[0] != rho[1] {
                return Err(Error::InvalidSummary { variable: name, reason: "rho differs between times".into() });
            }
            let s = VariableSummary {
                moments: [m[0].ok_or_else(missing)?, m[1].ok_or_else(missing)?],
                name,
                kind,
                rho: rho[0],
            };
            s.validate()?;
            Ok(s)
        })
        .collect()
}

pub fn load_summary(path: impl AsRef<Path>) -> Result<Vec<VariableSummary>> {
    read_summary(std::fs::File::open(path)?)
}

pub fn bundled_summary() -> Vec<VariableSummary> {
    read_summary(BUNDLED_SUMMARY.as_bytes()).expect("bundled summary is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub n: usize,
    pub seed: u64,
    /// Blank out values so each visit keeps about `count / max count` of its observations.
    pub missingness: bool,
    /// Name of an added binary column equal to the visit index, or `None` to skip it.
    pub treatment_column: Option<String>,
    /// Schema of the result; the default uses the treatment column, `Gender` and `Age`
    /// as confounders and `T2D` as outcome.
    pub schema: Option<VariableSchema>,
}

impl SynthOptions {
    pub fn new(n: usize, seed: u64) -> Self {
        SynthOptions { n, seed, missingness: false, treatment_column: Some("LCD".into()), schema: None }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Mean and sd of `N(mu, s^2)` truncated to `[a, b]`.
fn truncated_moments(mu: f64, s: f64, a: f64, b: f64) -> (f64, f64) {
    let n = std_normal();
    let (al, be) = ((a - mu) / s, (b - mu) / s);
    let z = n.cdf(be) - n.cdf(al);
    if z < 1e-300 {
        // All mass beyond one bound.
        let edge = if mu < a { a } else { b };
        return (edge, 0.0);
    }
    let (pa, pb) = (n.pdf(al), n.pdf(be));
    let r = (pa - pb) / z;
    let var = s * s * (1.0 + (al * pa - be * pb) / z - r * r);
    (mu + s * r, var.max(0.0).sqrt())
}

/// Mean and sd of `clamp(round(N(mu, s^2)), lo, hi)` over integer levels.
fn rounded_moments(mu: f64, s: f64, lo: i64, hi: i64) -> (f64, f64) {
    let n = std_normal();
    let (mut m1, mut m2) = (0.0, 0.0);
    for k in lo..=hi {
        let upper = if k == hi { 1.0 } else { n.cdf((k as f64 + 0.5 - mu) / s) };
        let lower = if k == lo { 0.0 } else { n.cdf((k as f64 - 0.5 - mu) / s) };
        let p = (upper - lower).max(0.0);
        m1 += p * k as f64;
        m2 += p * (k * k) as f64;
    }
    (m1, (m2 - m1 * m1).max(0.0).sqrt())
}

/// Finds parent `(mu, s)` whose transformed moments match `(mean, sd)`.
fn solve_parent(mean: f64, sd: f64, moments: impl Fn(f64, f64) -> (f64, f64), span: f64) -> (f64, f64) {
    let (mut mu, mut s) = (mean, sd.max(1e-12));
    let tol = 1e-10 * span.max(1e-12);
    let s_cap = 1e3 * span.max(sd);
    let resid = |mu: f64, s: f64| {
        let (m, d) = moments(mu, s);
        (m - mean, d - sd)
    };
    for _ in 0..500 {
        let (rm, rd) = resid(mu, s);
        if rm.abs() < tol && rd.abs() < tol {
            break;
        }
        // Newton step on a forward-difference Jacobian.
        let h_mu = 1e-6 * s.max(1.0);
        let h_s = 1e-6 * s;
        let (a1, c1) = resid(mu + h_mu, s);
        let (a2, c2) = resid(mu, s + h_s);
        let (j11, j21) = ((a1 - rm) / h_mu, (c1 - rd) / h_mu);
        let (j12, j22) = ((a2 - rm) / h_s, (c2 - rd) / h_s);
        let det = j11 * j22 - j12 * j21;
        let base = rm * rm + rd * rd;
        let mut accepted = false;
        if det.abs() > 1e-300 {
            let dmu = (j22 * rm - j12 * rd) / det;
            let ds = (j11 * rd - j21 * rm) / det;
            let mut step = 1.0;
            for _ in 0..30 {
                let (nmu, ns) = (mu - step * dmu, s - step * ds);
                if ns > 0.0 && ns <= s_cap {
                    let (em, ed) = resid(nmu, ns);
                    if em * em + ed * ed < base {
                        mu = nmu;
                        s = ns;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
        }
        if !accepted {
            // Fixed-point fallback: shift the location, rescale the spread.
            let (m, d) = moments(mu, s);
            mu += mean - m;
            s = if d > 0.0 { (s * sd / d).min(s_cap) } else { s * 2.0 };
        }
    }
    (mu, s)
}

enum Mapper {
    Constant(f64),
    Binary { cut: f64 },
    Truncated { mu: f64, s: f64, fa: f64, fb: f64, lo: f64, hi: f64 },
    Rounded { mu: f64, s: f64, lo: f64, hi: f64 },
}

impl Mapper {
    fn new(kind: VariableKind, m: &Moments) -> Self {
        if m.sd == 0.0 || m.min == m.max {
            return Mapper::Constant(m.mean);
        }
        let n = std_normal();
        match kind {
            VariableKind::Binary => {
                let p = m.mean.clamp(0.0, 1.0);
                if p <= 0.0 || p >= 1.0 {
                    return Mapper::Constant(p.round());
                }
                Mapper::Binary { cut: n.inverse_cdf(1.0 - p) }
            }
            VariableKind::Ordinal => {
                let (lo, hi) = (m.min.round() as i64, m.max.round() as i64);
                let (mu, s) = solve_parent(m.mean, m.sd, |mu, s| rounded_moments(mu, s, lo, hi), m.max - m.min);
                Mapper::Rounded { mu, s, lo: lo as f64, hi: hi as f64 }
            }
            VariableKind::Continuous | VariableKind::Categorical => {
                let (mu, s) =
                    solve_parent(m.mean, m.sd, |mu, s| truncated_moments(mu, s, m.min, m.max), m.max - m.min);
                Mapper::Truncated {
                    mu,
                    s,
                    fa: n.cdf((m.min - mu) / s),
                    fb: n.cdf((m.max - mu) / s),
                    lo: m.min,
                    hi: m.max,
                }
            }
        }
    }

    fn map(&self, z: f64) -> f64 {
        match *self {
            Mapper::Constant(v) => v,
            Mapper::Binary { cut } => f64::from(u8::from(z > cut)),
            // Adding 0.0 turns a rounded -0 into 0.
            Mapper::Rounded { mu, s, lo, hi } => (mu + s * z).round().clamp(lo, hi) + 0.0,
            Mapper::Truncated { mu, s, fa, fb, lo, hi } => {
                let n = std_normal();
                let u = fa + n.cdf(z) * (fb - fa);
                let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                (mu + s * n.inverse_cdf(u)).clamp(lo, hi)
            }
        }
    }
}

/// Draws `options.n` individuals whose per-visit marginals follow `summary`.
pub fn synthesize_panel(summary: &[VariableSummary], options: &SynthOptions) -> Result<TwoPointPanel> {
    if options.n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    for s in summary {
        s.validate()?;
    }
    let max_count = summary
        .iter()
        .flat_map(|s| s.moments.iter().map(|m| m.count))
        .max()
        .unwrap_or(0)
        .max(1);

    let n = options.n;
    // columns[v][i] = (baseline, follow-up)
    let mut columns: Vec<Vec<[Option<f64>; 2]>> = Vec::with_capacity(summary.len());
    for (v, s) in summary.iter().enumerate() {
        let mappers = [Mapper::new(s.kind, &s.moments[0]), Mapper::new(s.kind, &s.moments[1])];
        let innov = (1.0 - s.rho * s.rho).sqrt();
        let mut latent = stream(options.seed, Domain::Synthesis, v as u64, 0);
        let mut gaps = stream(options.seed, Domain::Synthesis, v as u64, 1);
        let keep = s.moments.map(|m| m.count as f64 / max_count as f64);
        let col = (0..n)
            .map(|_| {
                let z0: f64 = latent.sample(StandardNormal);
                let xi: f64 = latent.sample(StandardNormal);
                let z = [z0, s.rho * z0 + innov * xi];
                let u: f64 = gaps.random();
                [0, 1].map(|t| {
                    (!options.missingness || u < keep[t]).then(|| mappers[t].map(z[t]))
                })
            })
            .collect();
        columns.push(col);
    }

    let mut variables: Vec<String> = Vec::new();
    if let Some(t) = &options.treatment_column {
        variables.push(t.clone());
    }
    variables.extend(summary.iter().map(|s| s.name.clone()));

    let individuals = (0..n)
        .map(|i| Individual {
            id: Arc::from((i + 1).to_string()),
            values: [0, 1].map(|t| {
                let mut row = Vec::with_capacity(variables.len());
                if options.treatment_column.is_some() {
                    row.push(Some(t as f64));
                }
                row.extend(columns.iter().map(|c| c[i][t]));
                row
            }),
        })
        .collect();

    let schema = match &options.schema {
        Some(s) => s.clone(),
        None => default_schema(summary, options.treatment_column.as_deref())?,
    };
    TwoPointPanel::new(schema, variables, individuals)
}

fn default_schema(summary: &[VariableSummary], treatment: Option<&str>) -> Result<VariableSchema> {
    let treatment = treatment.ok_or_else(|| {
        Error::InvalidConfig("a schema is required when no treatment column is added".into())
    })?;
    let mut schema = VariableSchema::new(treatment, &["Gender", "Age"], "T2D");
    for s in summary {
        schema = schema.with_kind(&s.name, s.kind);
    }
    Ok(schema)
}
