//! Two-point panels and the one-row-per-unit views derived from them.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Binary,
    Ordinal,
    Continuous,
    /// Unordered levels; one-hot encoded with the first level dropped when used as a confounder.
    Categorical,
}

/// Column roles for a two-point panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub id_column: String,
    pub time_column: String,
    pub treatment_column: String,
    pub confounder_columns: Vec<String>,
    pub mediator_column: Option<String>,
    pub outcome_column: String,
    #[serde(default)]
    pub variable_kinds: BTreeMap<String, VariableKind>,
}

impl VariableSchema {
    /// Schema with `id`/`time` key columns and a binary treatment.
    pub fn new(treatment: &str, confounders: &[&str], outcome: &str) -> Self {
        let mut variable_kinds = BTreeMap::new();
        variable_kinds.insert(treatment.to_string(), VariableKind::Binary);
        VariableSchema {
            id_column: "id".into(),
            time_column: "time".into(),
            treatment_column: treatment.into(),
            confounder_columns: confounders.iter().map(|s| s.to_string()).collect(),
            mediator_column: None,
            outcome_column: outcome.into(),
            variable_kinds,
        }
    }

    pub fn with_mediator(mut self, mediator: &str) -> Self {
        self.mediator_column = Some(mediator.into());
        self
    }

    pub fn with_kind(mut self, column: &str, kind: VariableKind) -> Self {
        self.variable_kinds.insert(column.into(), kind);
        self
    }

    pub fn kind(&self, column: &str) -> VariableKind {
        self.variable_kinds
            .get(column)
            .copied()
            .unwrap_or(VariableKind::Continuous)
    }

    /// Every variable column the schema names, in role order.
    pub fn role_columns(&self) -> Vec<&str> {
        let mut cols = vec![self.treatment_column.as_str()];
        cols.extend(self.confounder_columns.iter().map(String::as_str));
        if let Some(m) = &self.mediator_column {
            cols.push(m);
        }
        cols.push(&self.outcome_column);
        cols
    }

    pub fn validate(&self) -> Result<()> {
        let mut all = vec![self.id_column.as_str(), self.time_column.as_str()];
        all.extend(self.role_columns());
        for (i, a) in all.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::InvalidSchema("empty column name".into()));
            }
            if all[i + 1..].contains(a) {
                return Err(Error::InvalidSchema(format!("column `{a}` appears in two roles")));
            }
        }
        if !matches!(
            self.kind(&self.treatment_column),
            VariableKind::Binary | VariableKind::Ordinal
        ) {
            return Err(Error::InvalidSchema(format!(
                "treatment `{}` must be declared binary or ordinal",
                self.treatment_column
            )));
        }
        if matches!(
            self.variable_kinds.get(&self.time_column),
            Some(k) if *k != VariableKind::Binary
        ) {
            return Err(Error::InvalidSchema("time must be binary".into()));
        }
        Ok(())
    }

    pub fn analysis_spec(&self) -> AnalysisSpec {
        AnalysisSpec {
            treatment: self.treatment_column.clone(),
            confounders: self.confounder_columns.clone(),
            outcome: self.outcome_column.clone(),
        }
    }
}

/// Which columns an estimator uses as treatment, confounders and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    pub treatment: String,
    pub confounders: Vec<String>,
    pub outcome: String,
}

impl AnalysisSpec {
    pub fn new(treatment: &str, confounders: &[&str], outcome: &str) -> Self {
        AnalysisSpec {
            treatment: treatment.into(),
            confounders: confounders.iter().map(|s| s.to_string()).collect(),
            outcome: outcome.into(),
        }
    }
}

/// One individual's baseline (index 0) and follow-up (index 1) values.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: Arc<str>,
    pub values: [Vec<Option<f64>>; 2],
}

/// Baseline/follow-up observations, exactly one row per individual and time point.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointPanel {
    schema: Arc<VariableSchema>,
    variables: Vec<String>,
    individuals: Vec<Individual>,
}

impl TwoPointPanel {
    /// Builds a panel, checking the schema, column presence and treatment coding.
    pub fn new(
        schema: VariableSchema,
        variables: Vec<String>,
        individuals: Vec<Individual>,
    ) -> Result<Self> {
        schema.validate()?;
        for col in schema.role_columns() {
            if !variables.iter().any(|v| v == col) {
                return Err(Error::MissingColumn(col.to_string()));
            }
        }
        let mut seen = HashMap::with_capacity(individuals.len());
        for ind in &individuals {
            if seen.insert(ind.id.clone(), ()).is_some() {
                return Err(Error::DuplicateTimePoint { id: ind.id.to_string(), time: 0 });
            }
            for row in &ind.values {
                if row.len() != variables.len() {
                    return Err(Error::InvalidSchema(format!(
                        "individual `{}` has {} values for {} columns",
                        ind.id,
                        row.len(),
                        variables.len()
                    )));
                }
            }
        }
        let panel = TwoPointPanel {
            schema: Arc::new(schema),
            variables,
            individuals,
        };
        if panel.schema.kind(&panel.schema.treatment_column) == VariableKind::Binary {
            panel.check_binary(&panel.schema.treatment_column.clone())?;
        }
        Ok(panel)
    }

    pub fn schema(&self) -> &VariableSchema {
        &self.schema
    }

    pub(crate) fn schema_arc(&self) -> Arc<VariableSchema> {
        self.schema.clone()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn n_individuals(&self) -> usize {
        self.individuals.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Value of `column` for individual `i` at `time`.
    pub fn value(&self, i: usize, time: u8, column: usize) -> Option<f64> {
        self.individuals[i].values[time as usize][column]
    }

    /// Returns a copy carrying a different schema over the same data.
    pub fn with_schema(&self, schema: VariableSchema) -> Result<Self> {
        TwoPointPanel::new(schema, self.variables.clone(), self.individuals.clone())
    }

    /// Adds a derived column computed from each row.
    pub fn with_column<F>(&self, name: &str, kind: VariableKind, f: F) -> Result<Self>
    where
        F: Fn(&[Option<f64>]) -> Option<f64>,
    {
        if self.variables.iter().any(|v| v == name) {
            return Err(Error::InvalidSchema(format!("column `{name}` already exists")));
        }
        let mut variables = self.variables.clone();
        variables.push(name.to_string());
        let individuals = self
            .individuals
            .iter()
            .map(|ind| {
                let values = [0, 1].map(|t| {
                    let mut row = ind.values[t].clone();
                    let v = f(&row);
                    row.push(v);
                    row
                });
                Individual { id: ind.id.clone(), values }
            })
            .collect();
        let schema = (*self.schema).clone().with_kind(name, kind);
        TwoPointPanel::new(schema, variables, individuals)
    }

    fn check_binary(&self, column: &str) -> Result<()> {
        let c = self.column_index(column)?;
        for ind in &self.individuals {
            for row in &ind.values {
                if let Some(v) = row[c] {
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::NonBinaryTreatment {
                            column: column.to_string(),
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// How a cross-section was derived from its panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum Provenance {
    Pooled,
    Subsample(usize),
    DidReorganized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossRow {
    pub id: Arc<str>,
    /// Source time point. In reorganized data, 1 marks the treatment image.
    pub time: u8,
    pub values: Vec<Option<f64>>,
}

/// A one-observation-per-unit table.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub(crate) schema: Arc<VariableSchema>,
    pub variables: Vec<String>,
    pub rows: Vec<CrossRow>,
    pub provenance: Provenance,
}

impl CrossSection {
    pub fn schema(&self) -> &VariableSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Keeps rows whose `column` holds one of the two levels, recoding them to 0 (`low`) and 1 (`high`).
    pub fn restrict_to_contrast(&self, column: &str, low: f64, high: f64) -> Result<CrossSection> {
        let c = self.column_index(column)?;
        let rows = self
            .rows
            .iter()
            .filter_map(|r| match r.values[c] {
                Some(v) if v == low || v == high => {
                    let mut r = r.clone();
                    r.values[c] = Some(if v == high { 1.0 } else { 0.0 });
                    Some(r)
                }
                _ => None,
            })
            .collect();
        Ok(CrossSection {
            schema: self.schema.clone(),
            variables: self.variables.clone(),
            rows,
            provenance: self.provenance,
        })
    }
}

/// Treats each individual-time pair as a separate unit.
pub fn pool(panel: &TwoPointPanel) -> CrossSection {
    let mut rows = Vec::with_capacity(2 * panel.n_individuals());
    for ind in panel.individuals() {
        for t in 0..2u8 {
            rows.push(CrossRow {
                id: ind.id.clone(),
                time: t,
                values: ind.values[t as usize].clone(),
            });
        }
    }
    CrossSection {
        schema: panel.schema_arc(),
        variables: panel.variables.clone(),
        rows,
        provenance: Provenance::Pooled,
    }
}

/// Takes, for every individual, the row at the time point chosen by `assignment`.
pub fn select_subsample(
    panel: &TwoPointPanel,
    assignment: &[u8],
    index: usize,
) -> Result<CrossSection> {
    if assignment.len() != panel.n_individuals() {
        return Err(Error::LengthMismatch {
            expected: panel.n_individuals(),
            got: assignment.len(),
        });
    }
    let rows = panel
        .individuals()
        .iter()
        .zip(assignment)
        .map(|(ind, &t)| {
            let t = u8::from(t != 0);
            CrossRow {
                id: ind.id.clone(),
                time: t,
                values: ind.values[t as usize].clone(),
            }
        })
        .collect();
    Ok(CrossSection {
        schema: panel.schema_arc(),
        variables: panel.variables.clone(),
        rows,
        provenance: Provenance::Subsample(index),
    })
}

/// Follow-up minus baseline for the treatment, outcome and confounders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferencedData {
    pub ids: Vec<Arc<str>>,
    pub confounders: Vec<String>,
    pub dy: Vec<f64>,
    pub dt: Vec<f64>,
    /// `dx[i][k]`: change in confounder `k` for individual `i`.
    pub dx: Vec<Vec<f64>>,
    /// Baseline confounder values.
    pub x0: Vec<Vec<f64>>,
    /// Individuals left out because a needed value was missing at either time.
    pub dropped: usize,
}

impl DifferencedData {
    pub fn len(&self) -> usize {
        self.dy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dy.is_empty()
    }
}

pub fn difference(panel: &TwoPointPanel, spec: &AnalysisSpec) -> Result<DifferencedData> {
    let t = panel.column_index(&spec.treatment)?;
    let y = panel.column_index(&spec.outcome)?;
    let xs = spec
        .confounders
        .iter()
        .map(|c| panel.column_index(c))
        .collect::<Result<Vec<_>>>()?;
    let mut out = DifferencedData {
        ids: Vec::new(),
        confounders: spec.confounders.clone(),
        dy: Vec::new(),
        dt: Vec::new(),
        dx: Vec::new(),
        x0: Vec::new(),
        dropped: 0,
    };
    let needed: Vec<usize> = [t, y].into_iter().chain(xs.iter().copied()).collect();
    for ind in panel.individuals() {
        let [b, f] = &ind.values;
        if needed.iter().any(|&c| b[c].is_none() || f[c].is_none()) {
            out.dropped += 1;
            continue;
        }
        let d = |c: usize| f[c].unwrap() - b[c].unwrap();
        out.ids.push(ind.id.clone());
        out.dy.push(d(y));
        out.dt.push(d(t));
        out.dx.push(xs.iter().map(|&c| d(c)).collect());
        out.x0.push(xs.iter().map(|&c| b[c].unwrap()).collect());
    }
    Ok(out)
}

/// Stacks a treatment image (changes in treatment and outcome, baseline confounders)
/// over a control image (zero treatment, zero outcome, baseline confounders) for each individual.
pub fn reorganize_did(panel: &TwoPointPanel, spec: &AnalysisSpec) -> Result<CrossSection> {
    let t = panel.column_index(&spec.treatment)?;
    let y = panel.column_index(&spec.outcome)?;
    let xs = spec
        .confounders
        .iter()
        .map(|c| panel.column_index(c))
        .collect::<Result<Vec<_>>>()?;
    let mut variables = vec![spec.treatment.clone(), spec.outcome.clone()];
    variables.extend(spec.confounders.iter().cloned());
    let mut rows = Vec::with_capacity(2 * panel.n_individuals());
    for ind in panel.individuals() {
        let [b, f] = &ind.values;
        let diff = |c: usize| match (b[c], f[c]) {
            (Some(v0), Some(v1)) => Some(v1 - v0),
            _ => None,
        };
        let x0: Vec<Option<f64>> = xs.iter().map(|&c| b[c]).collect();
        let mut treated = vec![diff(t), diff(y)];
        treated.extend(x0.iter().copied());
        let mut control = vec![Some(0.0), Some(0.0)];
        control.extend(x0);
        rows.push(CrossRow { id: ind.id.clone(), time: 1, values: treated });
        rows.push(CrossRow { id: ind.id.clone(), time: 0, values: control });
    }
    Ok(CrossSection {
        schema: panel.schema_arc(),
        variables,
        rows,
        provenance: Provenance::DidReorganized,
    })
}

// ---------------------------------------------------------------------------
// Delimited text I/O

fn parse_cell(column: &str, raw: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::NonNumericVariable {
            column: column.to_string(),
            value: s.to_string(),
        }),
    }
}

/// Reads a long-format panel: one row per (id, time) pair, header required.
pub fn read_panel<R: Read>(reader: R, schema: VariableSchema) -> Result<TwoPointPanel> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = find(&schema.id_column)?;
    let time_col = find(&schema.time_column)?;
    for col in schema.role_columns() {
        find(col)?;
    }
    let var_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != id_col && i != time_col)
        .collect();
    let variables: Vec<String> = var_cols.iter().map(|&i| headers[i].clone()).collect();

    let mut order: Vec<Arc<str>> = Vec::new();
    let mut slots: HashMap<Arc<str>, [Option<Vec<Option<f64>>>; 2]> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let id: Arc<str> = Arc::from(record.get(id_col).unwrap_or("").trim());
        let time_raw = record.get(time_col).unwrap_or("").trim();
        let time = match time_raw.parse::<f64>() {
            Ok(v) if v == 0.0 => 0u8,
            Ok(v) if v == 1.0 => 1u8,
            _ => return Err(Error::InvalidTime(time_raw.to_string())),
        };
        let values = var_cols
            .iter()
            .map(|&c| parse_cell(&headers[c], record.get(c).unwrap_or("")))
            .collect::<Result<Vec<_>>>()?;
        let entry = slots.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            [None, None]
        });
        if entry[time as usize].is_some() {
            return Err(Error::DuplicateTimePoint { id: id.to_string(), time });
        }
        entry[time as usize] = Some(values);
    }
    let mut individuals = Vec::with_capacity(order.len());
    for id in order {
        match slots.remove(&id) {
            Some([Some(b), Some(f)]) => individuals.push(Individual { id, values: [b, f] }),
            _ => return Err(Error::OrphanIndividual(id.to_string())),
        }
    }
    TwoPointPanel::new(schema, variables, individuals)
}

pub fn load_panel(path: impl AsRef<Path>, schema: VariableSchema) -> Result<TwoPointPanel> {
    read_panel(File::open(path)?, schema)
}

/// Writes the panel in the format [`read_panel`] accepts. Values use the shortest
/// representation that parses back to the same bits.
pub fn write_panel<W: Write>(panel: &TwoPointPanel, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let schema = panel.schema();
    let mut header = vec![schema.id_column.clone(), schema.time_column.clone()];
    header.extend(panel.variables.iter().cloned());
    w.write_record(&header)?;
    for ind in panel.individuals() {
        for t in 0..2usize {
            let mut rec = vec![ind.id.to_string(), t.to_string()];
            rec.extend(
                ind.values[t]
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_panel(panel: &TwoPointPanel, path: impl AsRef<Path>) -> Result<()> {
    let mut f = File::create(path)?;
    write_panel(panel, &mut f)?;
    f.flush()?;
    Ok(())
}
