//! Subsample plans: which time point each individual contributes to each subsample.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Every entry is an independent fair coin.
    IndependentUniform,
    /// Each individual's time points are split as evenly as possible across the
    /// subsamples, in a random order per individual.
    #[default]
    MinOverlap,
}

/// `assignments[m][i]` is the time point (0 or 1) individual `i` contributes to subsample `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsamplePlan {
    pub n_individuals: usize,
    pub strategy: Strategy,
    pub seed: u64,
    #[serde(serialize_with = "ser_bits", deserialize_with = "de_bits")]
    pub assignments: Vec<Vec<u8>>,
}

impl SubsamplePlan {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Number of individuals sharing the same time point in subsamples `a` and `b`.
    pub fn common_observations(&self, a: usize, b: usize) -> usize {
        self.assignments[a]
            .iter()
            .zip(&self.assignments[b])
            .filter(|(x, y)| x == y)
            .count()
    }
}

fn ser_bits<S: Serializer>(v: &[Vec<u8>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let strings: Vec<String> = v
        .iter()
        .map(|a| a.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect())
        .collect();
    strings.serialize(s)
}

fn de_bits<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<u8>>, D::Error> {
    let strings = Vec::<String>::deserialize(d)?;
    strings
        .iter()
        .map(|s| {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(serde::de::Error::custom(format!(
                        "assignment character `{other}` is not 0 or 1"
                    ))),
                })
                .collect()
        })
        .collect()
}

pub fn draw_subsamples(
    n_individuals: usize,
    m: usize,
    strategy: Strategy,
    seed: u64,
) -> Result<SubsamplePlan> {
    if m == 0 {
        return Err(Error::InvalidConfig("subsample count must be at least 1".into()));
    }
    if n_individuals == 0 {
        return Err(Error::EmptyData("panel has no individuals".into()));
    }
    let assignments = match strategy {
        Strategy::IndependentUniform => (0..m)
            .map(|k| {
                let mut rng = stream(seed, Domain::SubsamplePlan, k as u64, 0);
                (0..n_individuals).map(|_| u8::from(rng.random::<bool>())).collect()
            })
            .collect(),
        Strategy::MinOverlap => {
            let mut plan = vec![vec![0u8; n_individuals]; m];
            let mut column = vec![0u8; m];
            for i in 0..n_individuals {
                let mut rng = stream(seed, Domain::SubsampleColumn, i as u64, 0);
                // With odd m the surplus time point is itself a coin flip.
                let ones = if m % 2 == 1 && rng.random::<bool>() { m / 2 + 1 } else { m / 2 };
                for (k, slot) in column.iter_mut().enumerate() {
                    *slot = u8::from(k < ones);
                }
                column.shuffle(&mut rng);
                for (k, &v) in column.iter().enumerate() {
                    plan[k][i] = v;
                }
            }
            plan
        }
    };
    Ok(SubsamplePlan {
        n_individuals,
        strategy,
        seed,
        assignments,
    })
}
