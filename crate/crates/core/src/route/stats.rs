use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::feasibility::{check_feasibility, CheckMode, CheckOptions};
use super::plan::{decode, RoutePlan};
use super::leg_cost;
use crate::instance::Instance;
use crate::qubo::VariableCatalogue;
use crate::sampler::{bits_to_string, EnergyHistogram, SampleSet};

const HISTOGRAM_BINS: usize = 16;

/// Outcome for one distinct sampled bitstring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub bits: String,
    pub energy: f64,
    pub multiplicity: u64,
    pub decoded: bool,
    pub feasible: bool,
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub mode: CheckMode,
    pub total_samples: u64,
    pub feasible_count: u64,
    pub feasible_rate: f64,
    pub best_energy: Option<f64>,
    pub best_feasible_energy: Option<f64>,
    pub best_feasible_cost: Option<f64>,
    pub best_feasible_plan: Option<RoutePlan>,
    pub energy_histogram: EnergyHistogram,
    #[serde(skip)]
    pub rows: Vec<SampleRow>,
}

impl SolveStats {
    /// One row per distinct sample: `energy,multiplicity,feasible,cost`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy,multiplicity,decoded,feasible,cost\n");
        for r in &self.rows {
            let cost = r.cost.map(|c| c.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", r.energy, r.multiplicity, r.decoded, r.feasible, cost));
        }
        out
    }
}

/// Decodes and checks every record. Rates are weighted by multiplicity.
pub fn stats(samples: &SampleSet, cat: &VariableCatalogue, inst: &Instance, opts: &CheckOptions) -> SolveStats {
    let checked: Vec<(SampleRow, Option<RoutePlan>)> = samples
        .records
        .par_iter()
        .map(|r| {
            let (decoded, plan) = match decode(&r.bits, cat) {
                Ok(p) => (true, Some(p)),
                Err(_) => (false, None),
            };
            let feasible = plan.as_ref().is_some_and(|p| check_feasibility(p, inst, opts).is_feasible());
            let cost = plan.as_ref().filter(|_| feasible).map(|p| leg_cost(p, inst));
            let row = SampleRow {
                bits: bits_to_string(&r.bits),
                energy: r.energy,
                multiplicity: r.multiplicity,
                decoded,
                feasible,
                cost,
            };
            (row, plan.filter(|_| feasible))
        })
        .collect();

    let total_samples: u64 = checked.iter().map(|(r, _)| r.multiplicity).sum();
    let feasible_count: u64 = checked.iter().filter(|(r, _)| r.feasible).map(|(r, _)| r.multiplicity).sum();
    let energies = || checked.iter().map(|(r, _)| r.energy);
    let low = energies().fold(f64::INFINITY, f64::min);
    let high = energies().fold(f64::NEG_INFINITY, f64::max);
    let mut histogram = if checked.is_empty() {
        EnergyHistogram::new(0.0, 0.0, HISTOGRAM_BINS)
    } else {
        EnergyHistogram::new(low, high, HISTOGRAM_BINS)
    };
    for (r, _) in &checked {
        histogram.add(r.energy, r.multiplicity);
    }

    let best_feasible = checked
        .iter()
        .filter(|(r, _)| r.feasible)
        .min_by(|(a, _), (b, _)| {
            a.cost
                .unwrap_or(f64::INFINITY)
                .total_cmp(&b.cost.unwrap_or(f64::INFINITY))
                .then(a.energy.total_cmp(&b.energy))
                .then_with(|| a.bits.cmp(&b.bits))
        });
    let best_feasible_energy = checked.iter().filter(|(r, _)| r.feasible).map(|(r, _)| r.energy).reduce(f64::min);

    SolveStats {
        mode: opts.mode,
        total_samples,
        feasible_count,
        feasible_rate: if total_samples == 0 { 0.0 } else { feasible_count as f64 / total_samples as f64 },
        best_energy: (!checked.is_empty()).then_some(low),
        best_feasible_energy,
        best_feasible_cost: best_feasible.and_then(|(r, _)| r.cost),
        best_feasible_plan: best_feasible.and_then(|(_, p)| p.clone()),
        energy_histogram: histogram,
        rows: checked.into_iter().map(|(r, _)| r).collect(),
    }
}
