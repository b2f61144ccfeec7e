use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{Phase, Slot, VariableCatalogue, VariableKey};

/// One set qubit: vehicle is at `city` in interval `tau`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub tau: usize,
    pub city: usize,
    pub state: Phase,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub capacity: Vec<i64>,
}

impl Event {
    pub fn plain(tau: usize, city: usize) -> Self {
        Self { tau, city, state: Phase::Plain, capacity: Vec::new() }
    }

    pub fn new(tau: usize, city: usize, state: Phase, capacity: Vec<i64>) -> Self {
        Self { tau, city, state, capacity }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tau={} city={}", self.tau, self.city)?;
        if self.state != Phase::Plain {
            write!(f, " {}", self.state)?;
        }
        if !self.capacity.is_empty() {
            write!(f, " c={:?}", self.capacity)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VehicleRoute {
    pub vehicle: usize,
    pub events: Vec<Event>,
}

/// Per-vehicle timelines, one route per vehicle in id order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoutePlan {
    pub routes: Vec<VehicleRoute>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegKind {
    Travel,
    Stay,
}

/// Movement between two consecutive events of one vehicle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    pub vehicle: usize,
    pub kind: LegKind,
    pub from: usize,
    pub to: usize,
    pub depart: usize,
    pub arrive: usize,
}

/// A stop at a city, possibly with an explicit stay span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub city: usize,
    pub arrive: Option<usize>,
    pub depart: Option<usize>,
}

impl RoutePlan {
    pub fn route(&self, vehicle: usize) -> Option<&VehicleRoute> {
        self.routes.iter().find(|r| r.vehicle == vehicle)
    }

    pub fn event_count(&self) -> usize {
        self.routes.iter().map(|r| r.events.len()).sum()
    }

    /// Travel legs (between different cities) and stays (same city, arrival
    /// then departure) of consecutive events.
    pub fn legs(&self) -> Vec<Leg> {
        let mut out = Vec::new();
        for r in &self.routes {
            for w in r.events.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let kind = if a.city == b.city && a.state == Phase::Arrival && b.state == Phase::Departure {
                    LegKind::Stay
                } else if a.city != b.city && a.state != Phase::Arrival && b.state != Phase::Departure {
                    LegKind::Travel
                } else {
                    continue;
                };
                out.push(Leg { vehicle: r.vehicle, kind, from: a.city, to: b.city, depart: a.tau, arrive: b.tau });
            }
        }
        out
    }

    /// Per-vehicle visits; an arrival followed by a departure at the same city merges into one.
    pub fn visits(&self) -> BTreeMap<usize, Vec<Visit>> {
        let mut out = BTreeMap::new();
        for r in &self.routes {
            let mut visits: Vec<Visit> = Vec::new();
            for e in &r.events {
                match e.state {
                    Phase::Plain => visits.push(Visit { city: e.city, arrive: Some(e.tau), depart: None }),
                    Phase::Arrival => visits.push(Visit { city: e.city, arrive: Some(e.tau), depart: None }),
                    Phase::Departure => match visits.last_mut() {
                        Some(v) if v.city == e.city && v.depart.is_none() && v.arrive.is_some() => v.depart = Some(e.tau),
                        _ => visits.push(Visit { city: e.city, arrive: None, depart: Some(e.tau) }),
                    },
                }
            }
            out.insert(r.vehicle, visits);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans always serialize")
    }
}

/// Two or more set qubits for one vehicle in one interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clash {
    pub vehicle: usize,
    pub tau: usize,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("MULTI_CITY_SAME_TIME: {}", describe(.clashes))]
pub struct DecodeError {
    pub clashes: Vec<Clash>,
}

fn describe(clashes: &[Clash]) -> String {
    clashes
        .iter()
        .map(|c| format!("vehicle {} at tau={} has {} events", c.vehicle, c.tau, c.events.len()))
        .collect::<Vec<_>>()
        .join("; ")
}

fn event_of(key: &VariableKey) -> Event {
    Event::new(key.tau, key.city, key.phase, key.capacity.clone())
}

/// Turns every set qubit (fixed or free) into an event.
pub fn decode(bits: &[bool], cat: &VariableCatalogue) -> Result<RoutePlan, DecodeError> {
    let mut routes: Vec<VehicleRoute> =
        (1..=cat.vehicle_count()).map(|vehicle| VehicleRoute { vehicle, events: Vec::new() }).collect();
    for raw in 0..cat.total_keys() {
        if cat.value(raw, bits) {
            let key = cat.key(raw);
            routes[key.vehicle - 1].events.push(event_of(key));
        }
    }
    let mut clashes = Vec::new();
    for r in &routes {
        let mut i = 0;
        while i < r.events.len() {
            let mut j = i + 1;
            while j < r.events.len() && r.events[j].tau == r.events[i].tau {
                j += 1;
            }
            if j - i > 1 {
                clashes.push(Clash { vehicle: r.vehicle, tau: r.events[i].tau, events: r.events[i..j].to_vec() });
            }
            i = j;
        }
    }
    if clashes.is_empty() {
        Ok(RoutePlan { routes })
    } else {
        Err(DecodeError { clashes })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("vehicle {vehicle}: event {event} has no qubit")]
    UnknownEvent { vehicle: usize, event: Event },
    #[error("vehicle {vehicle}: event {event} sits on a qubit pinned to 0")]
    PinnedOff { vehicle: usize, event: Event },
    #[error("qubit {0} is pinned to 1 but the plan lacks it")]
    MissingPinned(String),
}

/// Inverse of [`decode`]: the free-variable assignment realizing a plan.
pub fn encode(plan: &RoutePlan, cat: &VariableCatalogue) -> Result<Vec<bool>, EncodeError> {
    let mut bits = vec![false; cat.free_count()];
    let mut raw_set = vec![false; cat.total_keys()];
    for r in &plan.routes {
        for e in &r.events {
            let raw = cat
                .id(r.vehicle, e.tau, e.city, e.state, &e.capacity)
                .ok_or_else(|| EncodeError::UnknownEvent { vehicle: r.vehicle, event: e.clone() })?;
            raw_set[raw] = true;
            match cat.slot(raw) {
                Slot::Free(i) => bits[i] = true,
                Slot::Fixed(true) => {}
                Slot::Fixed(false) => return Err(EncodeError::PinnedOff { vehicle: r.vehicle, event: e.clone() }),
            }
        }
    }
    for raw in 0..cat.total_keys() {
        if cat.slot(raw) == Slot::Fixed(true) && !raw_set[raw] {
            return Err(EncodeError::MissingPinned(cat.key(raw).to_string()));
        }
    }
    Ok(bits)
}
