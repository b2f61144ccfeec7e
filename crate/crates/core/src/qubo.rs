//! Logical qubits, their flat indexing, and the QUBO model itself.
//!
//! Every logical qubit `x_{tau,a|c}^{(i)}` (optionally carrying an
//! arrival/departure phase) gets a *raw id* in a fixed mixed-radix order:
//! vehicle outermost, then interval, city, phase, and the capacity
//! components innermost. Some qubits are pinned by boundary conditions or
//! windows; the remaining *free* qubits are numbered densely in raw order and
//! are the only variables a sampler ever sees.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{capacity_vectors, Instance};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown variable {0}")]
    UnknownKey(String),
    #[error("raw id {0} out of range")]
    UnknownId(usize),
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("variable {key} is fixed to {existing} and cannot be fixed to {requested}")]
    FixConflict { key: String, existing: u8, requested: u8 },
    #[error("window ({0}, {1}, {2}) references an invalid index")]
    BadWindow(usize, usize, usize),
    #[error("malformed model document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Plain,
    Arrival,
    Departure,
}

impl Phase {
    /// The "hermitian conjugate": arrival and departure swap, plain stays.
    pub fn conjugate(self) -> Phase {
        match self {
            Phase::Plain => Phase::Plain,
            Phase::Arrival => Phase::Departure,
            Phase::Departure => Phase::Arrival,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Plain => "PLAIN",
            Phase::Arrival => "ARRIVAL",
            Phase::Departure => "DEPARTURE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariableKey {
    pub vehicle: usize,
    pub tau: usize,
    pub city: usize,
    pub phase: Phase,
    pub capacity: Vec<i64>,
}

impl VariableKey {
    pub fn plain(vehicle: usize, tau: usize, city: usize) -> Self {
        Self { vehicle, tau, city, phase: Phase::Plain, capacity: Vec::new() }
    }

    pub fn new(vehicle: usize, tau: usize, city: usize, phase: Phase, capacity: Vec<i64>) -> Self {
        Self { vehicle, tau, city, phase, capacity }
    }
}

impl fmt::Display for VariableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x[i={},tau={},a={}", self.vehicle, self.tau, self.city)?;
        if self.phase != Phase::Plain {
            write!(f, ",{}", self.phase)?;
        }
        if !self.capacity.is_empty() {
            write!(f, ",c={:?}", self.capacity)?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Free(usize),
    Fixed(bool),
}

#[derive(Debug, Clone)]
struct VehicleBlock {
    offset: usize,
    lower: Vec<i64>,
    radices: Vec<usize>,
    states: Vec<Vec<i64>>,
}

impl VehicleBlock {
    fn capacity_index(&self, c: &[i64]) -> Option<usize> {
        if c.len() != self.lower.len() {
            return None;
        }
        let mut idx = 0;
        for ((&v, &q), &r) in c.iter().zip(&self.lower).zip(&self.radices) {
            let off = v - q;
            if off < 0 || off as usize >= r {
                return None;
            }
            idx = idx * r + off as usize;
        }
        Some(idx)
    }
}

/// Bijection between logical qubits and flat indices.
#[derive(Debug, Clone)]
pub struct VariableCatalogue {
    horizon: usize,
    cities: usize,
    phases: Vec<Phase>,
    blocks: Vec<VehicleBlock>,
    keys: Vec<VariableKey>,
    slots: Vec<Slot>,
    free: Vec<usize>,
    lookup: HashMap<VariableKey, usize>,
}

impl VariableCatalogue {
    /// Enumerates every key of the instance with nothing fixed yet.
    pub fn enumerate(inst: &Instance) -> Self {
        let phases = if inst.model_kind.has_states() {
            vec![Phase::Arrival, Phase::Departure]
        } else {
            vec![Phase::Plain]
        };
        let horizon = inst.horizon();
        let cities = inst.city_count();
        let mut blocks = Vec::with_capacity(inst.vehicles.len());
        let mut keys = Vec::new();
        for v in &inst.vehicles {
            let states = capacity_vectors(&v.capacity_lower, &v.capacity_upper);
            let block = VehicleBlock {
                offset: keys.len(),
                lower: v.capacity_lower.clone(),
                radices: v
                    .capacity_lower
                    .iter()
                    .zip(&v.capacity_upper)
                    .map(|(q, big_q)| (big_q - q + 1) as usize)
                    .collect(),
                states,
            };
            for tau in 1..=horizon {
                for city in 1..=cities {
                    for &phase in &phases {
                        for c in &block.states {
                            keys.push(VariableKey::new(v.id, tau, city, phase, c.clone()));
                        }
                    }
                }
            }
            blocks.push(block);
        }
        let lookup = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let slots = (0..keys.len()).map(Slot::Free).collect();
        let free = (0..keys.len()).collect();
        Self { horizon, cities, phases, blocks, keys, slots, free, lookup }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn city_count(&self) -> usize {
        self.cities
    }

    pub fn vehicle_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn is_stateful(&self) -> bool {
        self.phases.len() == 2
    }

    pub fn capacity_states(&self, vehicle: usize) -> &[Vec<i64>] {
        &self.blocks[vehicle - 1].states
    }

    /// Total number of keys, fixed or free.
    pub fn total_keys(&self) -> usize {
        self.keys.len()
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn fixed_count(&self, value: bool) -> usize {
        self.slots.iter().filter(|s| **s == Slot::Fixed(value)).count()
    }

    pub fn key(&self, raw: usize) -> &VariableKey {
        &self.keys[raw]
    }

    pub fn slot(&self, raw: usize) -> Slot {
        self.slots[raw]
    }

    pub fn raw_of(&self, key: &VariableKey) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    /// Raw id from components; `None` when out of range or out of capacity bounds.
    pub fn id(&self, vehicle: usize, tau: usize, city: usize, phase: Phase, capacity: &[i64]) -> Option<usize> {
        if vehicle == 0 || vehicle > self.blocks.len() || tau == 0 || tau > self.horizon || city == 0 || city > self.cities {
            return None;
        }
        let p = self.phases.iter().position(|&x| x == phase)?;
        let block = &self.blocks[vehicle - 1];
        let cidx = block.capacity_index(capacity)?;
        let per_phase = block.states.len();
        Some(block.offset + (((tau - 1) * self.cities + (city - 1)) * self.phases.len() + p) * per_phase + cidx)
    }

    /// Raw ids of every key sharing `(vehicle, tau, city)`.
    pub fn ids_at(&self, vehicle: usize, tau: usize, city: usize) -> std::ops::Range<usize> {
        let block = &self.blocks[vehicle - 1];
        let width = self.phases.len() * block.states.len();
        let start = block.offset + ((tau - 1) * self.cities + (city - 1)) * width;
        start..start + width
    }

    pub fn free_index(&self, key: &VariableKey) -> Option<usize> {
        match self.slots[self.raw_of(key)?] {
            Slot::Free(i) => Some(i),
            Slot::Fixed(_) => None,
        }
    }

    pub fn free_key(&self, index: usize) -> &VariableKey {
        &self.keys[self.free[index]]
    }

    pub fn free_raw(&self, index: usize) -> usize {
        self.free[index]
    }

    /// Fixed keys with their values, in raw order.
    pub fn fixed(&self) -> impl Iterator<Item = (&VariableKey, bool)> {
        self.keys.iter().zip(&self.slots).filter_map(|(k, s)| match s {
            Slot::Fixed(v) => Some((k, *v)),
            Slot::Free(_) => None,
        })
    }

    /// Pins a batch of raw ids. Fixing an already-fixed key to the same value is a no-op.
    pub fn fix_all(&mut self, assignments: impl IntoIterator<Item = (usize, bool)>) -> Result<(), ModelError> {
        for (raw, value) in assignments {
            if raw >= self.keys.len() {
                return Err(ModelError::UnknownId(raw));
            }
            match self.slots[raw] {
                Slot::Fixed(v) if v != value => {
                    return Err(ModelError::FixConflict {
                        key: self.keys[raw].to_string(),
                        existing: v as u8,
                        requested: value as u8,
                    })
                }
                _ => self.slots[raw] = Slot::Fixed(value),
            }
        }
        self.reindex();
        Ok(())
    }

    fn reindex(&mut self) {
        self.free.clear();
        for (raw, slot) in self.slots.iter_mut().enumerate() {
            if let Slot::Free(_) = slot {
                *slot = Slot::Free(self.free.len());
                self.free.push(raw);
            }
        }
    }

    /// Value of a raw key under an assignment of the free variables.
    pub fn value(&self, raw: usize, bits: &[bool]) -> bool {
        match self.slots[raw] {
            Slot::Free(i) => bits[i],
            Slot::Fixed(v) => v,
        }
    }
}

/// Enumerates all keys and applies the boundary conditions and windows of the
/// instance: the start key of each vehicle is pinned to 1, every other key at
/// `tau = 1` to 0, windowed triples to 0, and (when an end city is set) keys
/// from which the end can no longer be reached to 0.
pub fn build_catalogue(inst: &Instance) -> Result<VariableCatalogue, ModelError> {
    let mut cat = VariableCatalogue::enumerate(inst);
    let start_phase = if inst.model_kind.has_states() { Phase::Departure } else { Phase::Plain };
    let mut pins = Vec::new();
    for v in &inst.vehicles {
        let start = cat
            .id(v.id, 1, v.start_city, start_phase, v.initial())
            .ok_or_else(|| ModelError::UnknownKey(format!("start of vehicle {}", v.id)))?;
        for city in 1..=inst.city_count() {
            for raw in cat.ids_at(v.id, 1, city) {
                pins.push((raw, raw == start));
            }
        }
    }
    cat.fix_all(pins)?;
    crate::hamiltonian::apply_windows(&mut cat, &inst.windows)?;

    let t = inst.horizon();
    let mut unreachable = Vec::new();
    for v in &inst.vehicles {
        let Some(end) = v.end_city else { continue };
        for tau in 1..=t {
            for city in (1..=inst.city_count()).filter(|&c| c != end) {
                let too_late = match inst.travel_time(tau, city, end) {
                    Some(n) => tau + n > t,
                    None => true,
                };
                if too_late {
                    unreachable.extend(cat.ids_at(v.id, tau, city).map(|r| (r, false)));
                }
            }
        }
    }
    cat.fix_all(unreachable)?;
    Ok(cat)
}

// ---------------------------------------------------------------------------
// Models

/// Accumulates coefficients, folding fixed variables in as they arrive.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    catalogue: Option<Arc<VariableCatalogue>>,
    n: usize,
    constant: f64,
    linear: Vec<f64>,
    quadratic: HashMap<(usize, usize), f64>,
    penalty_scale: Option<f64>,
    xi: f64,
}

impl ModelBuilder {
    pub fn for_catalogue(catalogue: Arc<VariableCatalogue>) -> Self {
        let n = catalogue.free_count();
        Self {
            catalogue: Some(catalogue),
            n,
            constant: 0.0,
            linear: vec![0.0; n],
            quadratic: HashMap::new(),
            penalty_scale: None,
            xi: 0.0,
        }
    }

    /// A model over `n` anonymous variables.
    pub fn plain(n: usize) -> Self {
        Self {
            catalogue: None,
            n,
            constant: 0.0,
            linear: vec![0.0; n],
            quadratic: HashMap::new(),
            penalty_scale: None,
            xi: 0.0,
        }
    }

    pub fn set_penalty_scale(&mut self, lambda: f64) -> &mut Self {
        self.penalty_scale = Some(lambda);
        self
    }

    /// Uniform linear reward `-xi` on every free variable, applied at finalization.
    pub fn set_xi(&mut self, xi: f64) -> &mut Self {
        self.xi = xi;
        self
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    pub fn add_linear_free(&mut self, i: usize, coeff: f64) {
        self.linear[i] += coeff;
    }

    pub fn add_quadratic_free(&mut self, i: usize, j: usize, coeff: f64) {
        if i == j {
            self.linear[i] += coeff;
        } else {
            let key = if i < j { (i, j) } else { (j, i) };
            *self.quadratic.entry(key).or_insert(0.0) += coeff;
        }
    }

    fn catalogue(&self) -> &VariableCatalogue {
        self.catalogue.as_deref().expect("builder has no catalogue")
    }

    pub fn add_linear_raw(&mut self, raw: usize, coeff: f64) -> Result<(), ModelError> {
        let slot = *self.catalogue().slots.get(raw).ok_or(ModelError::UnknownId(raw))?;
        match slot {
            Slot::Free(i) => self.linear[i] += coeff,
            Slot::Fixed(true) => self.constant += coeff,
            Slot::Fixed(false) => {}
        }
        Ok(())
    }

    pub fn add_quadratic_raw(&mut self, a: usize, b: usize, coeff: f64) -> Result<(), ModelError> {
        let cat = self.catalogue();
        let sa = *cat.slots.get(a).ok_or(ModelError::UnknownId(a))?;
        let sb = *cat.slots.get(b).ok_or(ModelError::UnknownId(b))?;
        match (sa, sb) {
            (Slot::Fixed(false), _) | (_, Slot::Fixed(false)) => {}
            (Slot::Fixed(true), Slot::Fixed(true)) => self.constant += coeff,
            (Slot::Fixed(true), Slot::Free(j)) | (Slot::Free(j), Slot::Fixed(true)) => self.linear[j] += coeff,
            (Slot::Free(i), Slot::Free(j)) => self.add_quadratic_free(i, j, coeff),
        }
        Ok(())
    }

    fn resolve(&self, key: &VariableKey) -> Result<usize, ModelError> {
        self.catalogue().raw_of(key).ok_or_else(|| ModelError::UnknownKey(key.to_string()))
    }

    pub fn add_linear(&mut self, key: &VariableKey, coeff: f64) -> Result<(), ModelError> {
        let raw = self.resolve(key)?;
        self.add_linear_raw(raw, coeff)
    }

    pub fn add_quadratic(&mut self, k1: &VariableKey, k2: &VariableKey, coeff: f64) -> Result<(), ModelError> {
        let a = self.resolve(k1)?;
        let b = self.resolve(k2)?;
        self.add_quadratic_raw(a, b, coeff)
    }

    /// Current accumulated quadratic coefficient between two free indices.
    pub fn quadratic_coefficient(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.quadratic.get(&key).copied().unwrap_or(0.0)
    }

    pub fn linear_coefficient(&self, i: usize) -> f64 {
        self.linear[i]
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn finalize(mut self) -> QuboModel {
        if self.xi != 0.0 {
            for l in &mut self.linear {
                *l -= self.xi;
            }
        }
        let mut quadratic: Vec<(usize, usize, f64)> = self
            .quadratic
            .into_iter()
            .filter(|&(_, q)| q != 0.0)
            .map(|((i, j), q)| (i, j, q))
            .collect();
        quadratic.sort_by_key(|a| (a.0, a.1));
        QuboModel::assemble(self.catalogue, self.n, self.constant, self.linear, quadratic, self.penalty_scale)
    }
}

/// Finalized, immutable QUBO: `constant + sum l_i x_i + sum_{i<j} Q_ij x_i x_j`.
#[derive(Debug, Clone)]
pub struct QuboModel {
    catalogue: Option<Arc<VariableCatalogue>>,
    n: usize,
    constant: f64,
    linear: Vec<f64>,
    quadratic: Vec<(usize, usize, f64)>,
    penalty_scale: Option<f64>,
    // symmetric adjacency in CSR form
    offsets: Vec<usize>,
    neighbours: Vec<usize>,
    weights: Vec<f64>,
}

impl QuboModel {
    fn assemble(
        catalogue: Option<Arc<VariableCatalogue>>,
        n: usize,
        constant: f64,
        linear: Vec<f64>,
        quadratic: Vec<(usize, usize, f64)>,
        penalty_scale: Option<f64>,
    ) -> Self {
        let mut degree = vec![0usize; n];
        for &(i, j, _) in &quadratic {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut cursor = offsets.clone();
        let mut neighbours = vec![0usize; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for &(i, j, q) in &quadratic {
            neighbours[cursor[i]] = j;
            weights[cursor[i]] = q;
            cursor[i] += 1;
            neighbours[cursor[j]] = i;
            weights[cursor[j]] = q;
            cursor[j] += 1;
        }
        Self { catalogue, n, constant, linear, quadratic, penalty_scale, offsets, neighbours, weights }
    }

    /// Builds a model directly from coefficient lists; duplicate pairs are summed.
    pub fn from_terms(
        n: usize,
        constant: f64,
        linear: &[(usize, f64)],
        quadratic: &[(usize, usize, f64)],
    ) -> Result<Self, ModelError> {
        let mut b = ModelBuilder::plain(n);
        b.add_constant(constant);
        for &(i, c) in linear {
            if i >= n {
                return Err(ModelError::UnknownId(i));
            }
            b.add_linear_free(i, c);
        }
        for &(i, j, c) in quadratic {
            if i >= n || j >= n {
                return Err(ModelError::UnknownId(i.max(j)));
            }
            b.add_quadratic_free(i, j, c);
        }
        Ok(b.finalize())
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Upper-triangular entries `(i, j, Q_ij)` with `i < j`, sorted.
    pub fn quadratic(&self) -> &[(usize, usize, f64)] {
        &self.quadratic
    }

    pub fn catalogue(&self) -> Option<&Arc<VariableCatalogue>> {
        self.catalogue.as_ref()
    }

    pub fn penalty_scale(&self) -> Option<f64> {
        self.penalty_scale
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.neighbours[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn energy(&self, bits: &[bool]) -> Result<f64, ModelError> {
        if bits.len() != self.n {
            return Err(ModelError::LengthMismatch { expected: self.n, got: bits.len() });
        }
        Ok(self.energy_unchecked(bits))
    }

    pub(crate) fn energy_unchecked(&self, bits: &[bool]) -> f64 {
        let mut e = self.constant;
        for (l, &b) in self.linear.iter().zip(bits) {
            if b {
                e += l;
            }
        }
        for &(i, j, q) in &self.quadratic {
            if bits[i] && bits[j] {
                e += q;
            }
        }
        e
    }

    /// Energy change from flipping bit `i`.
    pub fn flip_delta(&self, bits: &[bool], i: usize) -> f64 {
        let mut field = self.linear[i];
        for (j, q) in self.neighbours(i) {
            if bits[j] {
                field += q;
            }
        }
        if bits[i] {
            -field
        } else {
            field
        }
    }

    /// Stable content fingerprint, used to tie sample sets to their model.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for byte in x.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.n as u64);
        eat(self.constant.to_bits());
        for l in &self.linear {
            eat(l.to_bits());
        }
        for &(i, j, q) in &self.quadratic {
            eat(i as u64);
            eat(j as u64);
            eat(q.to_bits());
        }
        format!("{h:016x}")
    }

    /// Spin form via `x = (1 + s) / 2`.
    pub fn to_ising(&self) -> IsingModel {
        let mut h: Vec<f64> = self.linear.iter().map(|l| l / 2.0).collect();
        let mut offset = self.constant + self.linear.iter().sum::<f64>() / 2.0;
        let mut coupling = Vec::with_capacity(self.quadratic.len());
        for &(i, j, q) in &self.quadratic {
            h[i] += q / 4.0;
            h[j] += q / 4.0;
            offset += q / 4.0;
            coupling.push((i, j, q / 4.0));
        }
        IsingModel { h, coupling, offset }
    }

    pub fn to_document(&self) -> ModelDocument {
        let variables = self.catalogue.as_ref().map(|cat| {
            (0..self.n)
                .map(|i| {
                    let k = cat.free_key(i);
                    VariableRow {
                        index: i,
                        vehicle: k.vehicle,
                        tau: k.tau,
                        city: k.city,
                        capacity: k.capacity.clone(),
                        state: k.phase,
                    }
                })
                .collect()
        });
        ModelDocument {
            n_vars: self.n,
            constant: self.constant,
            linear: self
                .linear
                .iter()
                .enumerate()
                .filter(|(_, &l)| l != 0.0)
                .map(|(i, &l)| (i, l))
                .collect(),
            quadratic: self.quadratic.clone(),
            variables: variables.unwrap_or_default(),
            penalty_scale: self.penalty_scale,
            fingerprint: self.fingerprint(),
            config: None,
        }
    }

    /// Rebuilds a coefficient-only model from an export document.
    pub fn from_document(doc: &ModelDocument) -> Result<Self, ModelError> {
        if doc.quadratic.iter().any(|&(i, j, _)| i >= j) {
            return Err(ModelError::Document("quadratic entries must satisfy i < j".into()));
        }
        let mut m = Self::from_terms(doc.n_vars, doc.constant, &doc.linear, &doc.quadratic)?;
        m.penalty_scale = doc.penalty_scale;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub coupling: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl IsingModel {
    /// Energy over spins `s_i = +1/-1`, including the offset.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let mut e = self.offset;
        for (h, &s) in self.h.iter().zip(spins) {
            e += h * s as f64;
        }
        for &(i, j, jv) in &self.coupling {
            e += jv * (spins[i] as f64) * (spins[j] as f64);
        }
        e
    }
}

/// Free-variable description row of the model export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRow {
    pub index: usize,
    pub vehicle: usize,
    pub tau: usize,
    pub city: usize,
    pub capacity: Vec<i64>,
    pub state: Phase,
}

/// Interchange document consumed by out-of-process samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n_vars: usize,
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub variables: Vec<VariableRow>,
    #[serde(default)]
    pub penalty_scale: Option<f64>,
    #[serde(default)]
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_instance;
    use serde_json::json;

    fn instance(kind: &str, m: usize, t: usize, n: usize, k: usize) -> Instance {
        let slices = t - 1;
        let mut doc = json!({
            "index_base": 1,
            "grid": {"T": t, "unit_minutes": 10.0},
            "cities": (1..=n).map(|c| format!("c{c}")).collect::<Vec<_>>(),
            "vehicles": (0..k).map(|_| if m > 0 { json!({"start": 1, "q": vec![0; m], "Q": vec![1; m]}) } else { json!({"start": 1}) }).collect::<Vec<_>>(),
            "costs": vec![vec![vec![Some(1.0); n]; n]; slices],
            "durations": vec![vec![vec![Some(1); n]; n]; slices],
            "model_kind": kind,
            "capacity_dims": m,
        });
        if m > 0 {
            doc["variations"] = json!(vec![vec![vec![Some(vec![0; m]); n]; n]; slices]);
        }
        if kind.contains("SVRP") {
            doc["stay_durations"] = json!(vec![vec![1; n]; slices]);
        }
        parse_instance(&doc.to_string()).unwrap()
    }

    #[test]
    fn key_counts_follow_the_product_formula() {
        assert_eq!(VariableCatalogue::enumerate(&instance("TS_VRP", 0, 2, 2, 1)).total_keys(), 4);
        assert_eq!(VariableCatalogue::enumerate(&instance("TS_MCVRP", 1, 2, 2, 1)).total_keys(), 8);
        assert_eq!(VariableCatalogue::enumerate(&instance("TS_VRP", 0, 8, 7, 3)).total_keys(), 168);
        assert_eq!(VariableCatalogue::enumerate(&instance("TS_SVRP", 0, 3, 2, 1)).total_keys(), 12);
    }

    #[test]
    fn minimal_catalogue_fixes_the_start() {
        let cat = build_catalogue(&instance("TS_VRP", 0, 2, 2, 1)).unwrap();
        assert_eq!(cat.total_keys(), 4);
        assert_eq!(cat.fixed_count(true), 1);
        assert_eq!(cat.fixed_count(false), 1);
        assert_eq!(cat.free_count(), 2);
        assert_eq!(cat.free_key(0), &VariableKey::plain(1, 2, 1));
    }

    #[test]
    fn raw_order_is_mixed_radix() {
        let inst = instance("TS_MCSVRP", 2, 3, 3, 2);
        let cat = VariableCatalogue::enumerate(&inst);
        for raw in 0..cat.total_keys() {
            let k = cat.key(raw).clone();
            assert_eq!(cat.id(k.vehicle, k.tau, k.city, k.phase, &k.capacity), Some(raw));
        }
        // capacity innermost, then phase, then city
        assert_eq!(cat.key(0).capacity, vec![0, 0]);
        assert_eq!(cat.key(1).capacity, vec![0, 1]);
        assert_eq!(cat.key(4).phase, Phase::Departure);
        assert_eq!(cat.key(8).city, 2);
    }

    #[test]
    fn repeated_quadratic_terms_accumulate() {
        let mut b = ModelBuilder::plain(2);
        b.add_quadratic_free(0, 1, 0.5);
        b.add_quadratic_free(1, 0, 0.5);
        assert_eq!(b.quadratic_coefficient(0, 1), 1.0);
        let m = b.finalize();
        assert_eq!(m.quadratic(), &[(0, 1, 1.0)]);
    }

    #[test]
    fn fixed_variables_fold_at_add_time() {
        let inst = instance("TS_VRP", 0, 3, 2, 1);
        let cat = Arc::new(build_catalogue(&inst).unwrap());
        let start = VariableKey::plain(1, 1, 1);
        let off = VariableKey::plain(1, 1, 2);
        let free = VariableKey::plain(1, 2, 2);
        let fi = cat.free_index(&free).unwrap();

        let mut b = ModelBuilder::for_catalogue(cat.clone());
        b.add_quadratic(&start, &free, 3.0).unwrap();
        assert_eq!(b.linear_coefficient(fi), 3.0);
        b.add_quadratic(&off, &free, 7.0).unwrap();
        assert_eq!(b.linear_coefficient(fi), 3.0);
        b.add_quadratic(&start, &start, 2.0).unwrap();
        assert_eq!(b.constant(), 2.0);
        let bogus = VariableKey::plain(1, 9, 1);
        assert!(matches!(b.add_linear(&bogus, 1.0), Err(ModelError::UnknownKey(_))));
    }

    #[test]
    fn self_pairs_and_zeros_do_not_survive_finalization() {
        let mut b = ModelBuilder::plain(3);
        b.add_quadratic_free(1, 1, 2.0);
        b.add_quadratic_free(0, 2, 1.0);
        b.add_quadratic_free(2, 0, -1.0);
        let m = b.finalize();
        assert!(m.quadratic().is_empty());
        assert_eq!(m.linear()[1], 2.0);
    }

    #[test]
    fn energy_examples() {
        let m = QuboModel::from_terms(2, 1.5, &[(0, -1.0)], &[]).unwrap();
        assert_eq!(m.energy(&[false, false]).unwrap(), 1.5);
        assert_eq!(m.energy(&[true, false]).unwrap(), 0.5);
        assert!(matches!(m.energy(&[true]), Err(ModelError::LengthMismatch { .. })));
    }

    #[test]
    fn ising_examples() {
        let empty = QuboModel::from_terms(1, 2.0, &[], &[]).unwrap().to_ising();
        assert_eq!(empty.h, vec![0.0]);
        assert!(empty.coupling.is_empty());
        assert_eq!(empty.offset, 2.0);
        let single = QuboModel::from_terms(1, 0.0, &[(0, 3.0)], &[]).unwrap().to_ising();
        assert_eq!(single.h, vec![1.5]);
        assert_eq!(single.offset, 1.5);
    }

    #[test]
    fn xi_applies_to_every_free_linear_term() {
        let mut b = ModelBuilder::plain(2);
        b.set_xi(0.5);
        b.add_linear_free(0, 1.0);
        let m = b.finalize();
        assert_eq!(m.linear(), &[0.5, -0.5]);
    }

    #[test]
    fn export_round_trips_coefficients() {
        let m = QuboModel::from_terms(3, 0.25, &[(0, -1.0), (2, 2.0)], &[(0, 1, 0.5), (1, 2, -3.0)]).unwrap();
        let doc = m.to_document();
        let text = serde_json::to_string(&doc).unwrap();
        let back = QuboModel::from_document(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.fingerprint(), m.fingerprint());
    }
}
