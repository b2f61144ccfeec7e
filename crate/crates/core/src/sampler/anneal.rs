//! Single-flip Metropolis annealing with a geometric inverse-temperature ramp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SampleMetadata, SampleSet, SamplerError};
use crate::qubo::QuboModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl AnnealSchedule {
    /// Default ramp `0.1 / lambda -> 10 / lambda`, so acceptance rates do not
    /// depend on the overall scale of the Hamiltonian.
    pub fn for_lambda(lambda: f64, sweeps: usize, restarts: usize, seed: u64) -> Self {
        Self { sweeps, beta_start: 0.1 / lambda, beta_end: 10.0 / lambda, restarts, seed }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::Schedule(m.to_string()));
        if self.sweeps == 0 {
            return bad("sweeps must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.beta_start > 0.0 && self.beta_start.is_finite()) || !(self.beta_end.is_finite()) {
            return bad("inverse temperatures must be positive and finite");
        }
        if self.beta_start >= self.beta_end {
            return bad("beta_start must be below beta_end");
        }
        Ok(())
    }

    /// Inverse temperature used during sweep `s` (0-based).
    pub fn beta(&self, s: usize) -> f64 {
        if self.sweeps == 1 {
            return self.beta_end;
        }
        let frac = s as f64 / (self.sweeps - 1) as f64;
        self.beta_start * (self.beta_end / self.beta_start).powf(frac)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub bits: Vec<bool>,
    pub energy: f64,
    /// Best-so-far energy after each sweep, when requested.
    pub trace: Vec<f64>,
}

/// Runs restart `r` of the schedule, seeded with `seed + r`.
pub fn anneal_chain(model: &QuboModel, schedule: &AnnealSchedule, r: usize, trace: bool) -> ChainResult {
    let n = model.num_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed.wrapping_add(r as u64));
    let mut bits: Vec<bool> = (0..n).map(|_| rng.gen::<bool>()).collect();
    // field[i]: energy change of setting bit i from 0 to 1 given the others
    let mut field: Vec<f64> = model.linear().to_vec();
    for &(i, j, q) in model.quadratic() {
        if bits[j] {
            field[i] += q;
        }
        if bits[i] {
            field[j] += q;
        }
    }
    let mut energy = model.energy_unchecked(&bits);
    let mut best = bits.clone();
    let mut best_energy = energy;
    let mut history = Vec::new();
    for s in 0..schedule.sweeps {
        let beta = schedule.beta(s);
        for i in 0..n {
            let delta = if bits[i] { -field[i] } else { field[i] };
            let accept = delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp();
            if !accept {
                continue;
            }
            bits[i] = !bits[i];
            energy += delta;
            let sign = if bits[i] { 1.0 } else { -1.0 };
            for (j, q) in model.neighbours(i) {
                field[j] += sign * q;
            }
            if energy < best_energy {
                best_energy = energy;
                best.copy_from_slice(&bits);
            }
        }
        if trace {
            history.push(best_energy);
        }
    }
    let exact = model.energy_unchecked(&best);
    ChainResult { bits: best, energy: exact, trace: history }
}

/// Independent chains, one per restart, each reporting its best state.
pub fn simulated_anneal(model: &QuboModel, schedule: &AnnealSchedule) -> Result<SampleSet, SamplerError> {
    schedule.validate()?;
    let chains: Vec<Vec<bool>> = (0..schedule.restarts)
        .into_par_iter()
        .map(|r| anneal_chain(model, schedule, r, false).bits)
        .collect();
    let metadata = SampleMetadata {
        sampler: "sa".into(),
        seed: Some(schedule.seed),
        schedule: Some(*schedule),
        ..SampleMetadata::default()
    };
    SampleSet::from_samples(model, chains, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_a_single_reward() {
        let m = QuboModel::from_terms(1, 0.0, &[(0, -1.0)], &[]).unwrap();
        let s = simulated_anneal(&m, &AnnealSchedule::for_lambda(1.0, 10, 3, 0)).unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].bits, vec![true]);
        assert_eq!(s.records[0].multiplicity, 3);
    }

    #[test]
    fn same_seed_same_samples() {
        let m = QuboModel::from_terms(4, 0.0, &[(0, -1.0), (3, 0.5)], &[(0, 1, 2.0), (1, 2, -1.0), (2, 3, -1.0)]).unwrap();
        let sched = AnnealSchedule::for_lambda(2.0, 50, 16, 42);
        assert_eq!(simulated_anneal(&m, &sched).unwrap(), simulated_anneal(&m, &sched).unwrap());
    }

    #[test]
    fn geometric_ramp_hits_both_ends() {
        let s = AnnealSchedule { sweeps: 3, beta_start: 0.1, beta_end: 10.0, restarts: 1, seed: 0 };
        assert!((s.beta(0) - 0.1).abs() < 1e-15);
        assert!((s.beta(1) - 1.0).abs() < 1e-12);
        assert!((s.beta(2) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        let base = AnnealSchedule::for_lambda(1.0, 10, 1, 0);
        assert!(AnnealSchedule { sweeps: 0, ..base }.validate().is_err());
        assert!(AnnealSchedule { restarts: 0, ..base }.validate().is_err());
        assert!(AnnealSchedule { beta_start: 5.0, beta_end: 1.0, ..base }.validate().is_err());
        assert!(AnnealSchedule { beta_start: 0.0, ..base }.validate().is_err());
    }

    #[test]
    fn trace_never_increases() {
        let m = QuboModel::from_terms(5, 0.0, &[(0, 1.0), (2, -2.0)], &[(0, 1, -3.0), (1, 4, 2.0), (3, 4, -1.0)]).unwrap();
        let c = anneal_chain(&m, &AnnealSchedule::for_lambda(1.0, 40, 1, 9), 0, true);
        assert_eq!(c.trace.len(), 40);
        assert!(c.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((c.energy - c.trace[39]).abs() < 1e-9);
    }
}
