//! Construction of the routing Hamiltonians as QUBO models.
//!
//! Builders first emit a *term list* over raw catalogue ids (before fixed
//! variables are eliminated), then fold it into a [`QuboModel`]. Penalties
//! form a set: each forbidden pair carries exactly `+lambda` no matter how
//! many constraint families forbid it. Cost terms accumulate. A pair that is
//! both penalized and rewarded keeps only the penalty.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{CostSeries, Instance, ModelKind, WindowSet};
use crate::qubo::{build_catalogue, ModelBuilder, ModelError, Phase, QuboModel, VariableCatalogue};

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("penalty weight lambda must be positive, got {0}")]
    Lambda(f64),
    #[error("baseline shift delta must be non-negative, got {0}")]
    Delta(f64),
    #[error("scale rho must be positive, got {0}")]
    Rho(f64),
    #[error("cost series is empty")]
    NoCosts,
    #[error("instance does not fit this builder: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `lambda` (penalty), `mu` (cost shift), `rho` (cost scale) and the optional
/// baseline shift `delta`. A cost entry `d` becomes the coefficient
/// `(d - mu) / rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParameters {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub delta: f64,
    /// Set when every cost entry is equal; all cost coefficients then become `-(lambda + delta)`.
    pub degenerate: bool,
}

impl PenaltyParameters {
    pub fn new(lambda: f64, mu: f64, rho: f64, delta: f64) -> Result<Self, BuildError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(BuildError::Lambda(lambda));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(BuildError::Rho(rho));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(BuildError::Delta(delta));
        }
        Ok(Self { lambda, mu, rho, delta, degenerate: false })
    }

    pub fn cost_coefficient(&self, d: f64) -> f64 {
        if self.degenerate {
            -(self.lambda + self.delta)
        } else {
            (d - self.mu) / self.rho
        }
    }
}

/// `(d_min, d_max)` over every off-diagonal entry.
pub fn cost_range(costs: &CostSeries) -> Option<(f64, f64)> {
    costs.entries().fold(None, |acc, (_, _, _, d)| match acc {
        None => Some((d, d)),
        Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
    })
}

/// `mu = d_max`, `rho = (d_max - d_min) / lambda`.
pub fn standard_parameters(costs: &CostSeries, lambda: f64) -> Result<PenaltyParameters, BuildError> {
    shifted_parameters(costs, lambda, 0.0, None)
}

/// Focused-range variant: `mu` is the focus maximum (default `d_max`) and
/// `rho = (mu - d_min) / (lambda + delta)`, so the cheapest leg gets
/// `-(lambda + delta)` and legs above the focus turn positive.
pub fn shifted_parameters(
    costs: &CostSeries,
    lambda: f64,
    delta: f64,
    focus_max: Option<f64>,
) -> Result<PenaltyParameters, BuildError> {
    let (lo, hi) = cost_range(costs).ok_or(BuildError::NoCosts)?;
    parameters_from_range(lo, hi, lambda, delta, focus_max)
}

/// Parameters for an instance. Two-state models include the zero-cost stay
/// among the cost entries, so `d_min` is 0 for them.
pub fn instance_parameters(
    inst: &Instance,
    lambda: f64,
    delta: f64,
    focus_max: Option<f64>,
) -> Result<PenaltyParameters, BuildError> {
    let (mut lo, hi) = cost_range(&inst.costs).ok_or(BuildError::NoCosts)?;
    if inst.model_kind.has_states() {
        lo = lo.min(0.0);
    }
    parameters_from_range(lo, hi, lambda, delta, focus_max)
}

fn parameters_from_range(
    lo: f64,
    hi: f64,
    lambda: f64,
    delta: f64,
    focus_max: Option<f64>,
) -> Result<PenaltyParameters, BuildError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(BuildError::Lambda(lambda));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(BuildError::Delta(delta));
    }
    let mu = focus_max.unwrap_or(hi);
    if mu <= lo {
        return Ok(PenaltyParameters { lambda, mu, rho: lambda, delta, degenerate: true });
    }
    PenaltyParameters::new(lambda, mu, (mu - lo) / (lambda + delta), delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Skip cross-vehicle exclusions at cities that are some vehicle's start or end.
    pub exempt_depots: bool,
    /// Uniform linear reward on every free variable.
    pub xi: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { exempt_depots: true, xi: 0.0 }
    }
}

/// Origin of a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Cost of an exact-duration travel leg.
    Travel,
    /// Arrival with a capacity status other than `c + B`.
    TransitionMismatch,
    /// Arrival before the leg duration has elapsed.
    EarlyArrival,
    /// Two capacity statuses for the same vehicle, interval, city and phase.
    CapacityStatus,
    /// Two cities for one vehicle in the same interval.
    SameTime,
    /// Same city at two different intervals (one vehicle or two).
    Revisit,
    /// Same city in the same interval for two vehicles.
    SharedCity,
    /// Any move after reaching the end city.
    EndRule,
    /// Cost of an exact-duration stay.
    Stay,
    /// Stay that changes the capacity status.
    StayMismatch,
    /// Departure before the stay duration has elapsed.
    EarlyDeparture,
    /// A second departure while still travelling.
    DepartureOverlap,
    /// A second arrival while still staying.
    ArrivalOverlap,
    /// Arrival and departure at the same city and interval.
    PhaseExclusion,
}

impl Family {
    pub const ALL: [Family; 14] = [
        Family::Travel,
        Family::TransitionMismatch,
        Family::EarlyArrival,
        Family::CapacityStatus,
        Family::SameTime,
        Family::Revisit,
        Family::SharedCity,
        Family::EndRule,
        Family::Stay,
        Family::StayMismatch,
        Family::EarlyDeparture,
        Family::DepartureOverlap,
        Family::ArrivalOverlap,
        Family::PhaseExclusion,
    ];

    pub fn is_penalty(self) -> bool {
        !matches!(self, Family::Travel | Family::Stay)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Travel => "travel_cost",
            Family::TransitionMismatch => "capacity_transition",
            Family::EarlyArrival => "early_arrival",
            Family::CapacityStatus => "capacity_status",
            Family::SameTime => "same_time",
            Family::Revisit => "revisit",
            Family::SharedCity => "shared_city",
            Family::EndRule => "end_rule",
            Family::Stay => "stay_cost",
            Family::StayMismatch => "stay_capacity",
            Family::EarlyDeparture => "early_departure",
            Family::DepartureOverlap => "departure_overlap",
            Family::ArrivalOverlap => "arrival_overlap",
            Family::PhaseExclusion => "phase_exclusion",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One quadratic term over raw catalogue ids, `first < second`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub first: usize,
    pub second: usize,
    pub coeff: f64,
    pub family: Family,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermList {
    terms: Vec<Term>,
}

impl TermList {
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn count(&self, family: Family) -> usize {
        self.terms.iter().filter(|t| t.family == family).count()
    }

    pub fn counts(&self) -> BTreeMap<Family, usize> {
        let mut out = BTreeMap::new();
        for t in &self.terms {
            *out.entry(t.family).or_insert(0) += 1;
        }
        out
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&Term> {
        let key = (a.min(b), a.max(b));
        self.terms
            .binary_search_by(|t| (t.first, t.second).cmp(&key))
            .ok()
            .map(|i| &self.terms[i])
    }

    /// `(cost part, penalty part)` of the energy for a full raw assignment.
    pub fn split_energy(&self, value: impl Fn(usize) -> bool) -> (f64, f64) {
        let mut cost = 0.0;
        let mut penalty = 0.0;
        for t in &self.terms {
            if value(t.first) && value(t.second) {
                if t.family.is_penalty() {
                    penalty += t.coeff;
                } else {
                    cost += t.coeff;
                }
            }
        }
        (cost, penalty)
    }

    /// Penalty terms that are active under a full raw assignment.
    pub fn active_penalties(&self, value: impl Fn(usize) -> bool) -> Vec<Term> {
        self.terms
            .iter()
            .filter(|t| t.family.is_penalty() && value(t.first) && value(t.second))
            .copied()
            .collect()
    }
}

/// A model together with everything needed to interpret it.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: QuboModel,
    pub catalogue: Arc<VariableCatalogue>,
    pub terms: TermList,
    pub params: PenaltyParameters,
    pub options: BuildOptions,
    pub kind: ModelKind,
}

impl BuiltModel {
    /// `(cost part, penalty part)` for an assignment of the free variables.
    pub fn split_energy(&self, bits: &[bool]) -> (f64, f64) {
        self.terms.split_energy(|raw| self.catalogue.value(raw, bits))
    }
}

/// Pins every key of each forbidden `(vehicle, tau, city)` triple to 0.
pub fn apply_windows(cat: &mut VariableCatalogue, windows: &WindowSet) -> Result<(), ModelError> {
    let mut pins = Vec::new();
    for &(v, tau, city) in &windows.forbidden {
        if v == 0 || v > cat.vehicle_count() || tau == 0 || tau > cat.horizon() || city == 0 || city > cat.city_count() {
            return Err(ModelError::BadWindow(v, tau, city));
        }
        pins.extend(cat.ids_at(v, tau, city).map(|r| (r, false)));
    }
    cat.fix_all(pins)
}

fn require(cond: bool, msg: &str) -> Result<(), BuildError> {
    if cond {
        Ok(())
    } else {
        Err(BuildError::Mismatch(msg.to_string()))
    }
}

pub fn build_ts_vrp(inst: &Instance, params: &PenaltyParameters) -> Result<BuiltModel, BuildError> {
    require(inst.model_kind == ModelKind::TsVrp, "expected model kind TS_VRP")?;
    require(inst.capacity_dims == 0, "TS_VRP takes no capacity dimensions")?;
    build_model(inst, params, &BuildOptions::default())
}

pub fn build_ts_mcvrp(inst: &Instance, params: &PenaltyParameters) -> Result<BuiltModel, BuildError> {
    require(inst.model_kind == ModelKind::TsMcvrp, "expected model kind TS_MCVRP")?;
    require(inst.variations.is_some(), "variations are required")?;
    build_model(inst, params, &BuildOptions::default())
}

pub fn build_ts_svrp(inst: &Instance, params: &PenaltyParameters) -> Result<BuiltModel, BuildError> {
    require(inst.model_kind == ModelKind::TsSvrp, "expected model kind TS_SVRP")?;
    require(inst.durations.stay.is_some(), "stay durations are required")?;
    build_model(inst, params, &BuildOptions::default())
}

/// Also accepts a two-state instance without capacities, in which case the
/// result coincides with [`build_ts_svrp`].
pub fn build_ts_mcsvrp(inst: &Instance, params: &PenaltyParameters) -> Result<BuiltModel, BuildError> {
    require(inst.model_kind.has_states(), "expected a two-state model kind")?;
    require(inst.durations.stay.is_some(), "stay durations are required")?;
    require(inst.capacity_dims == 0 || inst.variations.is_some(), "variations are required")?;
    build_model(inst, params, &BuildOptions::default())
}

/// Builds whichever Hamiltonian the instance's model kind calls for.
pub fn build_model(inst: &Instance, params: &PenaltyParameters, opts: &BuildOptions) -> Result<BuiltModel, BuildError> {
    let cat = Arc::new(build_catalogue(inst)?);
    build_with_catalogue(inst, cat, params, opts)
}

pub fn build_with_catalogue(
    inst: &Instance,
    cat: Arc<VariableCatalogue>,
    params: &PenaltyParameters,
    opts: &BuildOptions,
) -> Result<BuiltModel, BuildError> {
    if inst.model_kind.has_states() {
        require(inst.durations.stay.is_some(), "stay durations are required")?;
    }
    require(inst.capacity_dims == 0 || inst.variations.is_some(), "variations are required")?;
    let terms = term_list(inst, &cat, params, opts);
    let mut builder = ModelBuilder::for_catalogue(cat.clone());
    builder.set_penalty_scale(params.lambda).set_xi(opts.xi);
    for t in terms.terms() {
        builder.add_quadratic_raw(t.first, t.second, t.coeff)?;
    }
    Ok(BuiltModel {
        model: builder.finalize(),
        catalogue: cat,
        terms,
        params: *params,
        options: *opts,
        kind: inst.model_kind,
    })
}

struct Emitter {
    lambda: f64,
    penalties: HashMap<(usize, usize), Family>,
    costs: HashMap<(usize, usize), (f64, Family)>,
    /// Pairs governed by a stay block; same-city exclusions leave them alone.
    stay_pairs: HashSet<(usize, usize)>,
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Emitter {
    fn penalty(&mut self, a: Option<usize>, b: Option<usize>, family: Family) {
        if let (Some(a), Some(b)) = (a, b) {
            if a != b {
                self.penalties.entry(ordered(a, b)).or_insert(family);
            }
        }
    }

    fn cost(&mut self, a: Option<usize>, b: Option<usize>, coeff: f64, family: Family) {
        if let (Some(a), Some(b)) = (a, b) {
            let e = self.costs.entry(ordered(a, b)).or_insert((0.0, family));
            e.0 += coeff;
        }
    }

    fn finish(self) -> TermList {
        let mut terms: Vec<Term> = self
            .penalties
            .iter()
            .map(|(&(first, second), &family)| Term { first, second, coeff: self.lambda, family })
            .collect();
        terms.extend(
            self.costs
                .iter()
                .filter(|(k, _)| !self.penalties.contains_key(k))
                .map(|(&(first, second), &(coeff, family))| Term { first, second, coeff, family }),
        );
        terms.sort_by_key(|a| (a.first, a.second));
        TermList { terms }
    }
}

fn shifted(c: &[i64], b: &[i64]) -> Vec<i64> {
    c.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// The full pre-elimination term list for the instance's model kind.
pub fn term_list(inst: &Instance, cat: &VariableCatalogue, params: &PenaltyParameters, opts: &BuildOptions) -> TermList {
    let mut em = Emitter {
        lambda: params.lambda,
        penalties: HashMap::new(),
        costs: HashMap::new(),
        stay_pairs: HashSet::new(),
    };
    if cat.is_stateful() {
        two_state_blocks(inst, cat, params, &mut em);
    } else {
        travel_block(inst, cat, params, &mut em);
    }
    let stay_pairs = std::mem::take(&mut em.stay_pairs);
    exclusion_pairs(inst, cat, opts, |a, b, family| {
        if family == Family::Revisit && stay_pairs.contains(&ordered(a, b)) {
            return;
        }
        em.penalty(Some(a), Some(b), family);
    });
    em.finish()
}

fn travel_block(inst: &Instance, cat: &VariableCatalogue, params: &PenaltyParameters, em: &mut Emitter) {
    let t = inst.horizon();
    let n = inst.city_count();
    let p = Phase::Plain;
    for v in &inst.vehicles {
        let i = v.id;
        let caps = cat.capacity_states(i);
        for tau in 1..t {
            for b in 1..=n {
                for a in (1..=n).filter(|&a| a != b) {
                    if v.end_city == Some(b) {
                        for dt in 1..=t - tau {
                            for c in caps {
                                for c2 in caps {
                                    em.penalty(cat.id(i, tau + dt, a, p, c2), cat.id(i, tau, b, p, c), Family::EndRule);
                                }
                            }
                        }
                        continue;
                    }
                    let dur = inst.durations.travel(tau, b, a);
                    let coeff = params.cost_coefficient(inst.costs.get(tau, b, a));
                    let var = inst.variation(tau, b, a);
                    for c in caps {
                        let from = cat.id(i, tau, b, p, c);
                        let target = shifted(c, var);
                        let reachable = v.within_bounds(&target);
                        if tau + dur <= t {
                            for c2 in caps {
                                let to = cat.id(i, tau + dur, a, p, c2);
                                if reachable && *c2 == target {
                                    em.cost(to, from, coeff, Family::Travel);
                                } else {
                                    em.penalty(to, from, Family::TransitionMismatch);
                                }
                            }
                        }
                        for dt in (1..dur).filter(|dt| tau + dt <= t) {
                            for c2 in caps {
                                em.penalty(cat.id(i, tau + dt, a, p, c2), from, Family::EarlyArrival);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn two_state_blocks(inst: &Instance, cat: &VariableCatalogue, params: &PenaltyParameters, em: &mut Emitter) {
    use Phase::{Arrival as A, Departure as D};
    let t = inst.horizon();
    let n = inst.city_count();
    let stay_coeff = params.cost_coefficient(0.0);
    for v in &inst.vehicles {
        let i = v.id;
        let caps = cat.capacity_states(i);
        for tau in 1..t {
            // travelling: departure at b, arrival at a
            for b in 1..=n {
                for a in (1..=n).filter(|&a| a != b) {
                    if v.end_city == Some(b) {
                        for dt in 1..=t - tau {
                            for c in caps {
                                for c2 in caps {
                                    em.penalty(cat.id(i, tau + dt, a, A, c2), cat.id(i, tau, b, D, c), Family::EndRule);
                                }
                            }
                        }
                        continue;
                    }
                    let dur = inst.durations.travel(tau, b, a);
                    let coeff = params.cost_coefficient(inst.costs.get(tau, b, a));
                    let var = inst.variation(tau, b, a);
                    for c in caps {
                        let from = cat.id(i, tau, b, D, c);
                        let target = shifted(c, var);
                        let reachable = v.within_bounds(&target);
                        if tau + dur <= t {
                            for c2 in caps {
                                let to = cat.id(i, tau + dur, a, A, c2);
                                if reachable && *c2 == target {
                                    em.cost(to, from, coeff, Family::Travel);
                                } else {
                                    em.penalty(to, from, Family::TransitionMismatch);
                                }
                            }
                        }
                        for dt in 1..=dur.min(t - tau) {
                            for c2 in caps {
                                if dt < dur {
                                    em.penalty(cat.id(i, tau + dt, a, A, c2), from, Family::EarlyArrival);
                                }
                                em.penalty(cat.id(i, tau + dt, a, D, c2), from, Family::DepartureOverlap);
                            }
                        }
                    }
                }
            }
            // staying: arrival at a, departure from a
            for a in 1..=n {
                if v.end_city == Some(a) {
                    for dt in 1..=t - tau {
                        for c in caps {
                            let arrive = cat.id(i, tau, a, A, c);
                            for c2 in caps {
                                em.penalty(cat.id(i, tau + dt, a, D, c2), arrive, Family::EndRule);
                                for b in (1..=n).filter(|&b| b != a) {
                                    em.penalty(cat.id(i, tau + dt, b, A, c2), arrive, Family::EndRule);
                                }
                            }
                        }
                    }
                    continue;
                }
                let stay = inst.durations.stay(tau, a).unwrap_or(1);
                for c in caps {
                    let arrive = cat.id(i, tau, a, A, c);
                    if tau + stay <= t {
                        for c2 in caps {
                            let depart = cat.id(i, tau + stay, a, D, c2);
                            if let (Some(x), Some(y)) = (depart, arrive) {
                                em.stay_pairs.insert(ordered(x, y));
                            }
                            if c2 == c {
                                em.cost(depart, arrive, stay_coeff, Family::Stay);
                            } else {
                                em.penalty(depart, arrive, Family::StayMismatch);
                            }
                        }
                    }
                    for dt in 1..=stay.min(t - tau) {
                        for c2 in caps {
                            if dt < stay {
                                em.penalty(cat.id(i, tau + dt, a, D, c2), arrive, Family::EarlyDeparture);
                            }
                            for b in (1..=n).filter(|&b| b != a) {
                                em.penalty(cat.id(i, tau + dt, b, A, c2), arrive, Family::ArrivalOverlap);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Every exclusion pair of the instance, in emission order, labelled by
/// family. For two-state models each pair is emitted together with its
/// conjugate (arrival and departure swapped on both members).
pub fn exclusion_pairs(inst: &Instance, cat: &VariableCatalogue, opts: &BuildOptions, mut emit: impl FnMut(usize, usize, Family)) {
    let t = inst.horizon();
    let n = inst.city_count();
    let k = inst.vehicles.len();
    let phases = cat.phases().to_vec();
    let depots = inst.depots();
    let exempt = |city: usize| opts.exempt_depots && depots.contains(&city);
    let pair = |x: Option<usize>, y: Option<usize>, family: Family, emit: &mut dyn FnMut(usize, usize, Family)| {
        if let (Some(x), Some(y)) = (x, y) {
            if x != y {
                emit(x, y, family);
                let kx = cat.key(x);
                let ky = cat.key(y);
                if kx.phase != Phase::Plain {
                    let cx = cat.id(kx.vehicle, kx.tau, kx.city, kx.phase.conjugate(), &kx.capacity);
                    let cy = cat.id(ky.vehicle, ky.tau, ky.city, ky.phase.conjugate(), &ky.capacity);
                    if let (Some(cx), Some(cy)) = (cx, cy) {
                        if ordered(cx, cy) != ordered(x, y) {
                            emit(cx, cy, family);
                        }
                    }
                }
            }
        }
    };
    let emit: &mut dyn FnMut(usize, usize, Family) = &mut emit;

    for v in &inst.vehicles {
        let i = v.id;
        let caps = cat.capacity_states(i);
        for tau in 1..=t {
            for a in 1..=n {
                // arrival and departure at the same place and time
                if phases.len() == 2 {
                    for c in caps {
                        for c2 in caps {
                            pair(cat.id(i, tau, a, Phase::Arrival, c), cat.id(i, tau, a, Phase::Departure, c2), Family::PhaseExclusion, emit);
                        }
                    }
                }
                // one capacity status per (vehicle, interval, city, phase)
                for &p in &phases {
                    for (x, c) in caps.iter().enumerate() {
                        for c2 in &caps[..x] {
                            pair(cat.id(i, tau, a, p, c2), cat.id(i, tau, a, p, c), Family::CapacityStatus, emit);
                        }
                    }
                }
                // one city per interval
                for b in a + 1..=n {
                    for &p in &phases {
                        for &p2 in &phases {
                            for c in caps {
                                for c2 in caps {
                                    pair(cat.id(i, tau, a, p, c), cat.id(i, tau, b, p2, c2), Family::SameTime, emit);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    for i in 1..=k {
        for j in i..=k {
            let caps_i = cat.capacity_states(i);
            let caps_j = cat.capacity_states(j);
            for a in 1..=n {
                if i != j && exempt(a) {
                    continue;
                }
                for tau in 1..=t {
                    for tau2 in 1..=t {
                        let family = if tau == tau2 {
                            if i == j {
                                continue;
                            }
                            Family::SharedCity
                        } else {
                            Family::Revisit
                        };
                        for &p in &phases {
                            for &p2 in &phases {
                                for c in caps_i {
                                    for c2 in caps_j {
                                        pair(cat.id(i, tau, a, p, c), cat.id(j, tau2, a, p2, c2), family, emit);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{parse_instance, LegTable};
    use crate::qubo::VariableKey;
    use serde_json::json;

    fn costs(values: &[f64]) -> CostSeries {
        let mut it = values.iter().cycle();
        LegTable::from_fn(1, 3, |_, _, _| *it.next().unwrap())
    }

    #[test]
    fn standard_parameter_examples() {
        let p = standard_parameters(&costs(&[10.0, 4.0, 7.0]), 2.0).unwrap();
        assert_eq!(p.mu, 10.0);
        assert_eq!(p.rho, 3.0);
        assert_eq!(p.cost_coefficient(4.0), -2.0);
        assert_eq!(p.cost_coefficient(10.0), 0.0);
        let flat = standard_parameters(&costs(&[7.0]), 1.0).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.rho, 1.0);
        assert_eq!(flat.cost_coefficient(7.0), -1.0);
        assert_eq!(standard_parameters(&costs(&[1.0]), 0.0), Err(BuildError::Lambda(0.0)));
    }

    #[test]
    fn shifted_parameters_widen_the_range() {
        let p = shifted_parameters(&costs(&[10.0, 4.0, 7.0]), 2.0, 1.0, Some(7.0)).unwrap();
        assert_eq!(p.cost_coefficient(4.0), -3.0);
        assert_eq!(p.cost_coefficient(7.0), 0.0);
        assert!(p.cost_coefficient(10.0) > 0.0);
    }

    fn two_city(kind: &str) -> Instance {
        let mut doc = json!({
            "index_base": 1,
            "grid": {"T": 2, "unit_minutes": 15.0},
            "cities": ["depot", "c2"],
            "vehicles": [{"start": 1}],
            "costs": [[[null, 5.0], [5.0, null]]],
            "durations": [[[null, 1], [1, null]]],
            "model_kind": kind,
            "capacity_dims": 0,
        });
        if kind == "TS_SVRP" {
            doc["stay_durations"] = json!([[1, 1]]);
        }
        parse_instance(&doc.to_string()).unwrap()
    }

    #[test]
    fn smallest_instance_folds_to_a_single_reward() {
        let inst = two_city("TS_VRP");
        let params = standard_parameters(&inst.costs, 1.0).unwrap();
        assert!(params.degenerate);
        let built = build_ts_vrp(&inst, &params).unwrap();
        let cat = &built.catalogue;
        let x22 = cat.free_index(&VariableKey::plain(1, 2, 2)).unwrap();
        let x21 = cat.free_index(&VariableKey::plain(1, 2, 1)).unwrap();
        let m = &built.model;
        assert_eq!(m.linear()[x22], -1.0);
        // returning to the start is a revisit
        assert_eq!(m.linear()[x21], 1.0);
        assert_eq!(m.quadratic(), &[(x21.min(x22), x21.max(x22), 1.0)]);
        assert_eq!(m.constant(), 0.0);
    }

    #[test]
    fn early_arrival_count_matches_duration() {
        let doc = json!({
            "index_base": 1,
            "grid": {"T": 5, "unit_minutes": 10.0},
            "cities": ["a", "b"],
            "vehicles": [{"start": 1}],
            "costs": vec![[[None, Some(1.0)], [Some(2.0), None]]; 4],
            "durations": vec![[[None, Some(1)], [Some(3), None]]; 4],
            "model_kind": "TS_VRP",
            "capacity_dims": 0,
        });
        let inst = parse_instance(&doc.to_string()).unwrap();
        let params = standard_parameters(&inst.costs, 1.0).unwrap();
        let cat = VariableCatalogue::enumerate(&inst);
        let terms = term_list(&inst, &cat, &params, &BuildOptions::default());
        // leg 1 -> 2 departing at tau = 1 has n = 3
        let from = cat.id(1, 1, 1, Phase::Plain, &[]).unwrap();
        let early: Vec<_> = terms
            .terms()
            .iter()
            .filter(|t| t.family == Family::EarlyArrival && (t.first == from || t.second == from))
            .collect();
        assert_eq!(early.len(), 2);
    }

    #[test]
    fn stay_pairs_carry_the_stay_cost() {
        let inst = two_city("TS_SVRP");
        let params = instance_parameters(&inst, 2.0, 0.0, None).unwrap();
        let cat = VariableCatalogue::enumerate(&inst);
        let terms = term_list(&inst, &cat, &params, &BuildOptions::default());
        let a = cat.id(1, 1, 2, Phase::Arrival, &[]).unwrap();
        let d = cat.id(1, 2, 2, Phase::Departure, &[]).unwrap();
        let t = terms.get(a, d).unwrap();
        assert_eq!(t.family, Family::Stay);
        assert_eq!(t.coeff, -2.0);
        let d1 = cat.id(1, 1, 2, Phase::Departure, &[]).unwrap();
        assert_eq!(terms.get(a, d1).unwrap().coeff, 2.0);
    }

    #[test]
    fn window_on_start_conflicts() {
        let inst = two_city("TS_VRP");
        let mut cat = VariableCatalogue::enumerate(&inst);
        let start = cat.id(1, 1, 1, Phase::Plain, &[]).unwrap();
        cat.fix_all([(start, true)]).unwrap();
        let mut w = WindowSet::default();
        w.forbid(1, 1, 1);
        assert!(matches!(apply_windows(&mut cat, &w), Err(ModelError::FixConflict { .. })));
        let mut bad = WindowSet::default();
        bad.forbid(2, 1, 1);
        assert!(matches!(apply_windows(&mut cat, &bad), Err(ModelError::BadWindow(2, 1, 1))));
    }
}
