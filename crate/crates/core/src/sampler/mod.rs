//! Samplers and the sample sets they produce.

mod anneal;
mod exhaustive;
mod external;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::QuboModel;

pub use anneal::{anneal_chain, simulated_anneal, AnnealSchedule, ChainResult};
pub use exhaustive::{exhaustive_solve, exhaustive_solve_with, ExhaustiveLimits, EXHAUSTIVE_VARIABLE_CAP};
pub use external::ExternalSampler;

/// Energies produced by a sampler must be reproduced by the model within this.
pub const ENERGY_TOLERANCE: f64 = 1e-9;
/// Imported records whose reported energy is further off than this are rejected.
pub const IMPORT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("{n} free variables exceed the exhaustive cap of {cap}")]
    TooManyVariables { n: usize, cap: usize },
    #[error("more than {0} minimum-energy assignments")]
    TooManyMinima(usize),
    #[error("invalid annealing schedule: {0}")]
    Schedule(String),
    #[error("sample has {got} bits, model has {expected}")]
    Length { expected: usize, got: usize },
    #[error("malformed bitstring {0:?}")]
    Bitstring(String),
    #[error("external sampler failed: {0}")]
    External(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub bits: Vec<bool>,
    pub energy: f64,
    pub multiplicity: u64,
}

/// Energy histogram over equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyHistogram {
    pub low: f64,
    pub high: f64,
    pub counts: Vec<u64>,
}

impl EnergyHistogram {
    pub fn new(low: f64, high: f64, bins: usize) -> Self {
        Self { low, high, counts: vec![0; bins.max(1)] }
    }

    pub fn bin_of(&self, energy: f64) -> usize {
        let n = self.counts.len();
        if !(self.high > self.low) {
            return 0;
        }
        let x = ((energy - self.low) / (self.high - self.low) * n as f64).floor();
        (x.max(0.0) as usize).min(n - 1)
    }

    pub fn add(&mut self, energy: f64, weight: u64) {
        let b = self.bin_of(energy);
        self.counts[b] += weight;
    }

    pub fn merge(&mut self, other: &EnergyHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub sampler: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<AnnealSchedule>,
    /// Energies of every assignment (exhaustive only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<EnergyHistogram>,
    /// Lowest energy strictly above the minimum (exhaustive only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub rejected: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

fn is_zero(x: &usize) -> bool {
    *x == 0
}

/// Records sorted by ascending energy, ties broken by bitstring.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub num_vars: usize,
    pub model_ref: String,
    pub records: Vec<SampleRecord>,
    pub metadata: SampleMetadata,
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn bits_from_str(s: &str) -> Result<Vec<bool>, SamplerError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(SamplerError::Bitstring(s.to_string())),
        })
        .collect()
}

fn record_order(a: &SampleRecord, b: &SampleRecord) -> Ordering {
    a.energy.total_cmp(&b.energy).then_with(|| a.bits.cmp(&b.bits))
}

impl SampleSet {
    /// Aggregates raw samples: duplicates merge into multiplicities and every
    /// energy is evaluated by the model.
    pub fn from_samples(
        model: &QuboModel,
        samples: impl IntoIterator<Item = Vec<bool>>,
        metadata: SampleMetadata,
    ) -> Result<Self, SamplerError> {
        let mut counts: BTreeMap<Vec<bool>, u64> = BTreeMap::new();
        for s in samples {
            if s.len() != model.num_vars() {
                return Err(SamplerError::Length { expected: model.num_vars(), got: s.len() });
            }
            *counts.entry(s).or_insert(0) += 1;
        }
        let mut records: Vec<SampleRecord> = counts
            .into_iter()
            .map(|(bits, multiplicity)| SampleRecord { energy: model.energy_unchecked(&bits), bits, multiplicity })
            .collect();
        records.sort_by(record_order);
        Ok(Self { num_vars: model.num_vars(), model_ref: model.fingerprint(), records, metadata })
    }

    pub fn total_samples(&self) -> u64 {
        self.records.iter().map(|r| r.multiplicity).sum()
    }

    pub fn lowest_energy(&self) -> Option<f64> {
        self.records.first().map(|r| r.energy)
    }

    /// Records within `tol` of the lowest energy.
    pub fn ground_states(&self, tol: f64) -> impl Iterator<Item = &SampleRecord> {
        let low = self.lowest_energy().unwrap_or(0.0);
        self.records.iter().take_while(move |r| r.energy <= low + tol)
    }

    /// Checks ordering and that every energy matches the model.
    pub fn verify(&self, model: &QuboModel) -> Result<(), String> {
        for w in self.records.windows(2) {
            if record_order(&w[0], &w[1]) != Ordering::Less {
                return Err("records are not strictly sorted".into());
            }
        }
        for r in &self.records {
            let e = model.energy(&r.bits).map_err(|e| e.to_string())?;
            if (e - r.energy).abs() > ENERGY_TOLERANCE {
                return Err(format!("energy {} does not match recomputed {}", r.energy, e));
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> SampleSetDocument {
        SampleSetDocument {
            model_ref: self.model_ref.clone(),
            num_vars: self.num_vars,
            records: self
                .records
                .iter()
                .map(|r| RecordDocument { bits: bits_to_string(&r.bits), energy: r.energy, multiplicity: r.multiplicity })
                .collect(),
            metadata: self.metadata.clone(),
            config: None,
        }
    }

    /// Reads a document produced elsewhere. Energies are recomputed; records
    /// whose reported energy is off by more than [`IMPORT_TOLERANCE`] are
    /// dropped and counted in `metadata.rejected`.
    pub fn import(doc: &SampleSetDocument, model: &QuboModel) -> Result<Self, SamplerError> {
        let mut samples = Vec::new();
        let mut rejected = 0;
        for r in &doc.records {
            let bits = bits_from_str(&r.bits)?;
            if bits.len() != model.num_vars() {
                return Err(SamplerError::Length { expected: model.num_vars(), got: bits.len() });
            }
            if (model.energy_unchecked(&bits) - r.energy).abs() > IMPORT_TOLERANCE {
                rejected += 1;
                continue;
            }
            samples.extend(std::iter::repeat_n(bits, r.multiplicity as usize));
        }
        let mut metadata = doc.metadata.clone();
        metadata.rejected += rejected;
        Self::from_samples(model, samples, metadata)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDocument {
    pub bits: String,
    pub energy: f64,
    pub multiplicity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSetDocument {
    #[serde(default)]
    pub model_ref: String,
    #[serde(default)]
    pub num_vars: usize,
    pub records: Vec<RecordDocument>,
    #[serde(default)]
    pub metadata: SampleMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// Limits handed to a sampler alongside the model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Budget {
    /// Number of independent reads (restarts for annealing).
    pub reads: Option<usize>,
    /// Refuse models with more free variables than this.
    pub max_variables: Option<usize>,
}

/// Uniform front for every backend.
pub trait Sampler {
    fn name(&self) -> &str;
    fn solve(&self, model: &QuboModel, budget: &Budget) -> Result<SampleSet, SamplerError>;
}

fn check_size(model: &QuboModel, budget: &Budget) -> Result<(), SamplerError> {
    match budget.max_variables {
        Some(cap) if model.num_vars() > cap => Err(SamplerError::TooManyVariables { n: model.num_vars(), cap }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct ExhaustiveSampler {
    pub limits: ExhaustiveLimits,
}


impl Sampler for ExhaustiveSampler {
    fn name(&self) -> &str {
        "exhaustive"
    }

    fn solve(&self, model: &QuboModel, budget: &Budget) -> Result<SampleSet, SamplerError> {
        check_size(model, budget)?;
        exhaustive_solve_with(model, &self.limits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSampler {
    pub schedule: AnnealSchedule,
}

impl Sampler for AnnealSampler {
    fn name(&self) -> &str {
        "sa"
    }

    fn solve(&self, model: &QuboModel, budget: &Budget) -> Result<SampleSet, SamplerError> {
        check_size(model, budget)?;
        let mut schedule = self.schedule;
        if let Some(reads) = budget.reads {
            schedule.restarts = reads;
        }
        simulated_anneal(model, &schedule)
    }
}
