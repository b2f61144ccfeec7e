//! Exact enumeration of all assignments.
//!
//! The top few variables split the search into independent chunks; inside a
//! chunk the remaining variables follow a Gray code so each step costs one
//! flip. Incremental energies only select candidates, which are then
//! re-evaluated exactly.

use rayon::prelude::*;

use super::{EnergyHistogram, SampleMetadata, SampleSet, SamplerError, ENERGY_TOLERANCE};
use crate::qubo::QuboModel;

pub const EXHAUSTIVE_VARIABLE_CAP: usize = 25;
const CANDIDATE_WINDOW: f64 = 1e-6;
const PREFIX_BITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveLimits {
    pub max_variables: usize,
    pub max_minima: usize,
    pub histogram_bins: usize,
}

impl Default for ExhaustiveLimits {
    fn default() -> Self {
        Self { max_variables: EXHAUSTIVE_VARIABLE_CAP, max_minima: 1 << 20, histogram_bins: 32 }
    }
}

struct Tracker {
    best: f64,
    candidates: Vec<(f64, u64)>,
    above: Option<(f64, u64)>,
    histogram: EnergyHistogram,
    overflow: bool,
    cap: usize,
}

impl Tracker {
    fn new(histogram: EnergyHistogram, cap: usize) -> Self {
        Self { best: f64::INFINITY, candidates: Vec::new(), above: None, histogram, overflow: false, cap }
    }

    fn note_above(&mut self, e: f64, mask: u64) {
        if self.above.is_none_or(|(a, _)| e < a) {
            self.above = Some((e, mask));
        }
    }

    fn observe(&mut self, e: f64, mask: u64) {
        if e < self.best {
            self.best = e;
            let limit = e + CANDIDATE_WINDOW;
            let mut dropped = None::<(f64, u64)>;
            self.candidates.retain(|&(c, m)| {
                let keep = c <= limit;
                if !keep && dropped.is_none_or(|(d, _)| c < d) {
                    dropped = Some((c, m));
                }
                keep
            });
            if let Some((c, m)) = dropped {
                self.note_above(c, m);
            }
            self.candidates.push((e, mask));
        } else if e <= self.best + CANDIDATE_WINDOW {
            if self.candidates.len() >= self.cap {
                self.overflow = true;
                return;
            }
            self.candidates.push((e, mask));
        } else {
            self.note_above(e, mask);
        }
    }

    fn absorb(&mut self, other: Tracker) {
        self.overflow |= other.overflow;
        self.histogram.merge(&other.histogram);
        for (e, m) in other.candidates {
            self.observe(e, m);
        }
        if let Some((e, m)) = other.above {
            self.observe(e, m);
        }
    }
}

fn mask_bits(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

fn energy_bounds(model: &QuboModel) -> (f64, f64) {
    let mut low = model.constant();
    let mut high = model.constant();
    for &l in model.linear().iter().chain(model.quadratic().iter().map(|(_, _, q)| q)) {
        if l < 0.0 {
            low += l;
        } else {
            high += l;
        }
    }
    (low, high)
}

pub fn exhaustive_solve(model: &QuboModel) -> Result<SampleSet, SamplerError> {
    exhaustive_solve_with(model, &ExhaustiveLimits::default())
}

/// Every minimum-energy assignment, plus a histogram over all `2^n`
/// assignments and the next energy level above the minimum.
pub fn exhaustive_solve_with(model: &QuboModel, limits: &ExhaustiveLimits) -> Result<SampleSet, SamplerError> {
    let n = model.num_vars();
    let cap = limits.max_variables.min(62);
    if n > cap {
        return Err(SamplerError::TooManyVariables { n, cap });
    }
    let (low, high) = energy_bounds(model);
    let blank = EnergyHistogram::new(low, high, limits.histogram_bins);
    let prefix = n.min(PREFIX_BITS);
    let inner = n - prefix;

    let trackers: Vec<Tracker> = (0u64..1 << prefix)
        .into_par_iter()
        .map(|p| {
            let mut t = Tracker::new(blank.clone(), limits.max_minima);
            let mut mask = p << inner;
            let mut bits = mask_bits(mask, n);
            let mut e = model.energy_unchecked(&bits);
            t.observe(e, mask);
            t.histogram.add(e, 1);
            for k in 1u64..1 << inner {
                let i = k.trailing_zeros() as usize;
                e += model.flip_delta(&bits, i);
                bits[i] = !bits[i];
                mask ^= 1 << i;
                t.observe(e, mask);
                t.histogram.add(e, 1);
                if t.overflow {
                    break;
                }
            }
            t
        })
        .collect();

    let mut all = Tracker::new(blank, limits.max_minima);
    for t in trackers {
        all.absorb(t);
    }
    if all.overflow {
        return Err(SamplerError::TooManyMinima(limits.max_minima));
    }

    let exact = |m: u64| model.energy_unchecked(&mask_bits(m, n));
    let rechecked: Vec<(f64, u64)> = all.candidates.iter().map(|&(_, m)| (exact(m), m)).collect();
    let min = rechecked.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let mut next = all.above.map(|(_, m)| exact(m));
    let mut minima = Vec::new();
    for &(e, m) in &rechecked {
        if e <= min + ENERGY_TOLERANCE {
            minima.push(mask_bits(m, n));
        } else if next.is_none_or(|x| e < x) {
            next = Some(e);
        }
    }
    let metadata = SampleMetadata {
        sampler: "exhaustive".into(),
        histogram: Some(all.histogram),
        next_energy: next,
        ..SampleMetadata::default()
    };
    SampleSet::from_samples(model, minima, metadata)
}
