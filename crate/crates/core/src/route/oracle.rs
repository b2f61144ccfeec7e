//! Depth-first enumeration of every feasible plan.
//!
//! Each vehicle's timelines are generated on their own: exact-duration legs,
//! legs stretched past a window-closed arrival slot, and (for two-state
//! models) exact stays. Timelines are grouped by the set of cities they
//! claim, and one timeline per vehicle is combined so that claims are
//! disjoint and every customer is covered.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::feasibility::{end_reachable, pair_rule};
use super::plan::{Event, RoutePlan, VehicleRoute};
use crate::hamiltonian::PenaltyParameters;
use crate::instance::{Instance, Vehicle};
use crate::qubo::Phase;

const TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Objective {
    /// Sum of `d` over travel legs.
    RouteCost,
    /// `(d - mu) / rho` per exact leg and `-mu / rho` per exact stay.
    Shifted(PenaltyParameters),
}

impl Objective {
    fn leg(&self, d: f64, exact: bool) -> f64 {
        match self {
            Objective::RouteCost => d,
            Objective::Shifted(p) if exact => p.cost_coefficient(d),
            Objective::Shifted(_) => 0.0,
        }
    }

    fn stay(&self) -> f64 {
        match self {
            Objective::RouteCost => 0.0,
            Objective::Shifted(p) => p.cost_coefficient(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_timelines: usize,
    pub max_plans: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_timelines: 2_000_000, max_plans: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub objective: Objective,
    pub exempt_depots: bool,
    pub limits: OracleLimits,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { objective: Objective::RouteCost, exempt_depots: true, limits: OracleLimits::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Optimal objective value; `None` when no feasible plan exists.
    pub best: Option<f64>,
    /// Every optimal plan, sorted.
    pub plans: Vec<RoutePlan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("vehicle {vehicle} has more than {cap} timelines")]
    TooManyTimelines { vehicle: usize, cap: usize },
    #[error("more than {0} optimal plans")]
    TooManyPlans(usize),
    #[error("the oracle handles at most 64 cities")]
    TooManyCities,
}

#[derive(Debug, Clone)]
struct Timeline {
    events: Vec<Event>,
    value: f64,
}

/// Best timelines per claimed-city mask.
type Groups = BTreeMap<u64, (f64, Vec<Timeline>)>;

struct Search<'a> {
    inst: &'a Instance,
    v: &'a Vehicle,
    opts: &'a OracleOptions,
    exempt: u64,
    groups: Groups,
    count: usize,
}

impl Search<'_> {
    fn slot_open(&self, tau: usize, city: usize) -> bool {
        tau >= 2 && !self.inst.windows.is_forbidden(self.v.id, tau, city) && end_reachable(self.inst, self.v, tau, city)
    }

    fn compatible(&self, events: &[Event], next: &Event) -> bool {
        events.iter().all(|e| pair_rule(self.inst, self.v, e, next).is_none())
    }

    fn record(&mut self, events: &[Event], value: f64) -> Result<(), OracleError> {
        self.count += 1;
        if self.count > self.opts.limits.max_timelines {
            return Err(OracleError::TooManyTimelines { vehicle: self.v.id, cap: self.opts.limits.max_timelines });
        }
        let claimed = events.iter().fold(0u64, |m, e| m | 1 << (e.city - 1)) & !self.exempt;
        let entry = self.groups.entry(claimed).or_insert((f64::INFINITY, Vec::new()));
        if value < entry.0 - TIE {
            entry.0 = value;
            entry.1.retain(|t| t.value <= value + TIE);
        }
        if value <= entry.0 + TIE {
            entry.1.push(Timeline { events: events.to_vec(), value });
        }
        Ok(())
    }

    fn extend(&mut self, events: &mut Vec<Event>, visited: u64, value: f64) -> Result<(), OracleError> {
        let inst = self.inst;
        let stateful = inst.model_kind.has_states();
        let end = self.v.end_city;
        let last = events.last().expect("timelines start with the start event").clone();
        let finished = match end {
            None => true,
            Some(e) => last.city == e && (!stateful || last.state == Phase::Arrival),
        };
        if finished {
            self.record(events, value)?;
        }
        if end == Some(last.city) && (!stateful || last.state == Phase::Arrival) {
            return Ok(());
        }
        let t = inst.horizon();
        if last.state != Phase::Arrival {
            for a in (1..=inst.city_count()).filter(|&a| a != last.city && visited >> (a - 1) & 1 == 0) {
                let Some(n) = inst.travel_time(last.tau, last.city, a) else { continue };
                let target: Vec<i64> =
                    last.capacity.iter().zip(inst.variation(last.tau, last.city, a)).map(|(c, b)| c + b).collect();
                if !self.v.within_bounds(&target) {
                    continue;
                }
                let exact = last.tau + n;
                if exact > t {
                    continue;
                }
                let arrivals: Vec<usize> = if self.slot_open(exact, a) {
                    vec![exact]
                } else if inst.windows.is_forbidden(self.v.id, exact, a) {
                    (exact + 1..=t).filter(|&tau| self.slot_open(tau, a)).collect()
                } else {
                    Vec::new()
                };
                let d = inst.costs.get(last.tau, last.city, a);
                let state = if stateful { Phase::Arrival } else { Phase::Plain };
                for tau in arrivals {
                    let next = Event::new(tau, a, state, target.clone());
                    if !self.compatible(events, &next) {
                        continue;
                    }
                    events.push(next);
                    self.extend(events, visited | 1 << (a - 1), value + self.opts.objective.leg(d, tau == exact))?;
                    events.pop();
                }
            }
        } else if let Some(stay) = inst.stay_time(last.tau, last.city) {
            let tau = last.tau + stay;
            if tau <= t && self.slot_open(tau, last.city) {
                let next = Event::new(tau, last.city, Phase::Departure, last.capacity.clone());
                if self.compatible(events, &next) {
                    events.push(next);
                    self.extend(events, visited, value + self.opts.objective.stay())?;
                    events.pop();
                }
            }
        }
        Ok(())
    }
}

fn vehicle_groups(inst: &Instance, v: &Vehicle, opts: &OracleOptions, exempt: u64) -> Result<Groups, OracleError> {
    let state = if inst.model_kind.has_states() { Phase::Departure } else { Phase::Plain };
    let start = Event::new(1, v.start_city, state, v.initial().to_vec());
    let mut search = Search { inst, v, opts, exempt, groups: BTreeMap::new(), count: 0 };
    if inst.windows.is_forbidden(v.id, 1, v.start_city) {
        return Ok(search.groups);
    }
    let mut events = vec![start];
    search.extend(&mut events, 1 << (v.start_city - 1), 0.0)?;
    Ok(search.groups)
}

/// All optimal plans under the chosen objective.
pub fn enumerate_optimal_routes(inst: &Instance, opts: &OracleOptions) -> Result<OracleResult, OracleError> {
    if inst.city_count() > 64 {
        return Err(OracleError::TooManyCities);
    }
    let exempt = if opts.exempt_depots {
        inst.depots().iter().fold(0u64, |m, c| m | 1 << (c - 1))
    } else {
        0
    };
    let customers = inst.customers().iter().fold(0u64, |m, c| m | 1 << (c - 1));
    let groups: Vec<Vec<(u64, f64, Vec<Timeline>)>> = inst
        .vehicles
        .iter()
        .map(|v| {
            vehicle_groups(inst, v, opts, exempt)
                .map(|g| g.into_iter().map(|(mask, (value, tl))| (mask, value, tl)).collect())
        })
        .collect::<Result<_, _>>()?;

    let mut best = f64::INFINITY;
    let mut winners: Vec<Vec<usize>> = Vec::new();
    let mut choice = Vec::with_capacity(groups.len());
    combine(&groups, 0, 0, 0.0, customers, &mut choice, &mut best, &mut winners);
    if winners.is_empty() {
        return Ok(OracleResult { best: None, plans: Vec::new() });
    }
    winners.retain(|w| total(&groups, w) <= best + TIE);

    let mut plans = Vec::new();
    for w in &winners {
        let mut partial: Vec<Vec<VehicleRoute>> = vec![Vec::new()];
        for (vi, &gi) in w.iter().enumerate() {
            let timelines = &groups[vi][gi].2;
            if partial.len() * timelines.len() > opts.limits.max_plans {
                return Err(OracleError::TooManyPlans(opts.limits.max_plans));
            }
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    timelines.iter().map(move |t| {
                        let mut p = p.clone();
                        p.push(VehicleRoute { vehicle: vi + 1, events: t.events.clone() });
                        p
                    })
                })
                .collect();
        }
        plans.extend(partial.into_iter().map(|routes| RoutePlan { routes }));
        if plans.len() > opts.limits.max_plans {
            return Err(OracleError::TooManyPlans(opts.limits.max_plans));
        }
    }
    plans.sort();
    plans.dedup();
    Ok(OracleResult { best: Some(best), plans })
}

fn total(groups: &[Vec<(u64, f64, Vec<Timeline>)>], choice: &[usize]) -> f64 {
    choice.iter().enumerate().map(|(vi, &gi)| groups[vi][gi].1).sum()
}

#[allow(clippy::too_many_arguments)]
fn combine(
    groups: &[Vec<(u64, f64, Vec<Timeline>)>],
    vi: usize,
    used: u64,
    value: f64,
    customers: u64,
    choice: &mut Vec<usize>,
    best: &mut f64,
    winners: &mut Vec<Vec<usize>>,
) {
    if vi == groups.len() {
        if used & customers != customers {
            return;
        }
        if value < *best - TIE {
            *best = value;
            winners.retain(|w| total(groups, w) <= value + TIE);
        }
        if value <= *best + TIE {
            winners.push(choice.clone());
        }
        return;
    }
    for (gi, (mask, v, _)) in groups[vi].iter().enumerate() {
        if mask & used != 0 {
            continue;
        }
        choice.push(gi);
        combine(groups, vi + 1, used | mask, value + v, customers, choice, best, winners);
        choice.pop();
    }
}
