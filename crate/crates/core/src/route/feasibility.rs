//! Feasibility of a plan, checked against the instance rather than the QUBO.
//!
//! Every violation says whether the Hamiltonian penalizes it. Penalized
//! violations are exactly the pairwise rules the penalty terms encode; the
//! remaining ones (late arrivals, unvisited customers, a route that stops
//! short of its end city, events on pinned qubits) carry no penalty and show
//! up only as missing rewards.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::plan::{Event, RoutePlan};
use crate::instance::{Instance, Vehicle};
use crate::qubo::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    /// Every travel leg must take exactly its duration.
    Strict,
    /// Longer legs are accepted when a window blocks the exact arrival slot.
    WindowTolerant,
}

impl CheckMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckMode::Strict => "strict",
            CheckMode::WindowTolerant => "window-tolerant",
        }
    }
}

impl fmt::Display for CheckMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strict" => Ok(CheckMode::Strict),
            "window-tolerant" => Ok(CheckMode::WindowTolerant),
            _ => Err(format!("unknown check mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub mode: CheckMode,
    pub exempt_depots: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { mode: CheckMode::WindowTolerant, exempt_depots: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    Revisit,
    MultiCitySameTime,
    SharedCityAcrossVehicles,
    EarlyArrival,
    LateArrival,
    CapacityTransition,
    CapacityBounds,
    Window,
    Start,
    End,
    StateTransition,
    StayDuration,
    UnvisitedCity,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Revisit => "REVISIT",
            ViolationKind::MultiCitySameTime => "MULTI_CITY_SAME_TIME",
            ViolationKind::SharedCityAcrossVehicles => "SHARED_CITY_ACROSS_VEHICLES",
            ViolationKind::EarlyArrival => "EARLY_ARRIVAL",
            ViolationKind::LateArrival => "LATE_ARRIVAL",
            ViolationKind::CapacityTransition => "CAPACITY_TRANSITION",
            ViolationKind::CapacityBounds => "CAPACITY_BOUNDS",
            ViolationKind::Window => "WINDOW",
            ViolationKind::Start => "START",
            ViolationKind::End => "END",
            ViolationKind::StateTransition => "STATE_TRANSITION",
            ViolationKind::StayDuration => "STAY_DURATION",
            ViolationKind::UnvisitedCity => "UNVISITED_CITY",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<usize>,
    pub detail: String,
    /// Whether the Hamiltonian puts a penalty on this configuration.
    pub penalized: bool,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.vehicle {
            Some(v) => write!(f, "{} (vehicle {}): {}", self.kind, v, self.detail),
            None => write!(f, "{}: {}", self.kind, self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub mode: CheckMode,
    pub violations: Vec<Violation>,
    pub passes_strict: bool,
    pub passes_window_tolerant: bool,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_penalized(&self) -> bool {
        self.violations.iter().any(|v| v.penalized)
    }

    pub fn kinds(&self) -> BTreeSet<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }
}

fn violation(kind: ViolationKind, vehicle: usize, penalized: bool, detail: String) -> Violation {
    Violation { kind, vehicle: Some(vehicle), detail, penalized }
}

fn add(c: &[i64], b: &[i64]) -> Vec<i64> {
    c.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Whether the exact arrival slot of a leg is closed by a window.
pub fn window_forced(inst: &Instance, vehicle: usize, depart: usize, from: usize, to: usize) -> bool {
    match inst.travel_time(depart, from, to) {
        Some(n) => depart + n <= inst.horizon() && inst.windows.is_forbidden(vehicle, depart + n, to),
        None => false,
    }
}

/// Whether the vehicle could still reach its end city from `(tau, city)`.
pub fn end_reachable(inst: &Instance, v: &Vehicle, tau: usize, city: usize) -> bool {
    match v.end_city {
        Some(e) if e != city => match inst.travel_time(tau, city, e) {
            Some(n) => tau + n <= inst.horizon(),
            None => false,
        },
        _ => true,
    }
}

fn capacity_follows(v: &Vehicle, from: &[i64], to: &[i64], change: &[i64]) -> bool {
    let target = add(from, change);
    v.within_bounds(&target) && to == target.as_slice()
}

/// The penalized rule, if any, broken by two events of one vehicle with `e1` strictly earlier.
pub fn pair_rule(inst: &Instance, v: &Vehicle, e1: &Event, e2: &Event) -> Option<Violation> {
    use Phase::{Arrival as A, Departure as D};
    use ViolationKind as K;
    debug_assert!(e1.tau < e2.tau);
    let stateful = inst.model_kind.has_states();
    let end = v.end_city;
    let gap = e2.tau - e1.tau;
    let i = v.id;
    if e1.city == e2.city {
        let a = e1.city;
        if stateful && e1.state == A && e2.state == D && end != Some(a) {
            let stay = inst.durations.stay(e1.tau, a).unwrap_or(1);
            if gap != stay {
                return Some(violation(
                    K::StayDuration,
                    i,
                    true,
                    format!("stay at city {a} from tau={} lasts {gap}, expected {stay}", e1.tau),
                ));
            }
            if e1.capacity != e2.capacity {
                return Some(violation(
                    K::CapacityTransition,
                    i,
                    true,
                    format!("load changes from {:?} to {:?} while staying at city {a}", e1.capacity, e2.capacity),
                ));
            }
            return None;
        }
        if stateful && e1.state == A && end == Some(a) {
            return Some(violation(K::End, i, true, format!("event at tau={} after reaching end city {a}", e2.tau)));
        }
        return Some(violation(K::Revisit, i, true, format!("city {a} at tau={} and tau={}", e1.tau, e2.tau)));
    }
    let (b, a) = (e1.city, e2.city);
    let n = inst.durations.travel(e1.tau, b, a);
    let travel = |e1: &Event, e2: &Event| -> Option<Violation> {
        if end == Some(b) {
            return Some(violation(K::End, i, true, format!("leaves end city {b} at tau={}", e1.tau)));
        }
        if gap < n {
            return Some(violation(
                K::EarlyArrival,
                i,
                true,
                format!("city {b} at tau={} to city {a} at tau={} takes {n}", e1.tau, e2.tau),
            ));
        }
        if gap == n && !capacity_follows(v, &e1.capacity, &e2.capacity, inst.variation(e1.tau, b, a)) {
            return Some(violation(
                K::CapacityTransition,
                i,
                true,
                format!(
                    "leg {b}->{a} at tau={} turns load {:?} into {:?}, expected {:?}",
                    e1.tau,
                    e1.capacity,
                    e2.capacity,
                    add(&e1.capacity, inst.variation(e1.tau, b, a))
                ),
            ));
        }
        None
    };
    if !stateful {
        return travel(e1, e2);
    }
    match (e1.state, e2.state) {
        (D, A) => travel(e1, e2),
        (D, D) if end != Some(b) && gap <= n => Some(violation(
            K::StateTransition,
            i,
            true,
            format!("departs city {a} at tau={} while still travelling from city {b}", e2.tau),
        )),
        (A, A) if end == Some(b) => {
            Some(violation(K::End, i, true, format!("arrives at city {a} after reaching end city {b}")))
        }
        (A, A) if gap <= inst.durations.stay(e1.tau, b).unwrap_or(1) => Some(violation(
            K::StateTransition,
            i,
            true,
            format!("arrives at city {a} at tau={} while still staying at city {b}", e2.tau),
        )),
        _ => None,
    }
}

/// Checks a plan against every routing rule of the instance.
pub fn check_feasibility(plan: &RoutePlan, inst: &Instance, opts: &CheckOptions) -> FeasibilityReport {
    use ViolationKind as K;
    let stateful = inst.model_kind.has_states();
    let t = inst.horizon();
    let n_cities = inst.city_count();
    let mut out: Vec<Violation> = Vec::new();
    let mut strict_only: Vec<Violation> = Vec::new();
    let mut seen = BTreeSet::new();

    for r in &plan.routes {
        if r.vehicle == 0 || r.vehicle > inst.vehicles.len() || !seen.insert(r.vehicle) {
            out.push(Violation {
                kind: K::Start,
                vehicle: Some(r.vehicle),
                detail: "unknown or repeated vehicle".into(),
                penalized: false,
            });
            continue;
        }
        let v = inst.vehicle(r.vehicle);
        let i = v.id;
        let mut events = r.events.clone();
        if events.iter().any(|e| e.tau == 0 || e.tau > t || e.city == 0 || e.city > n_cities) {
            out.push(violation(K::Start, i, false, "event outside the time grid or city range".into()));
            continue;
        }
        events.sort();
        events.dedup();
        for w in events.windows(2) {
            if w[0].tau == w[1].tau {
                out.push(violation(K::MultiCitySameTime, i, true, format!("{} and {}", w[0], w[1])));
            }
        }

        for e in &events {
            let phase_ok = if stateful { e.state != Phase::Plain } else { e.state == Phase::Plain };
            if !phase_ok {
                out.push(violation(K::StateTransition, i, false, format!("{e} has the wrong kind of state")));
            }
            if !v.within_bounds(&e.capacity) {
                out.push(violation(K::CapacityBounds, i, false, format!("{e} outside capacity bounds")));
            }
            if inst.windows.is_forbidden(i, e.tau, e.city) {
                out.push(violation(K::Window, i, false, format!("{e} lies in a forbidden window")));
            }
            if !end_reachable(inst, v, e.tau, e.city) {
                out.push(violation(K::End, i, false, format!("end city cannot be reached from {e}")));
            }
        }

        let start_phase = if stateful { Phase::Departure } else { Phase::Plain };
        let start = Event::new(1, v.start_city, start_phase, v.initial().to_vec());
        if events.first() != Some(&start) {
            out.push(violation(K::Start, i, false, format!("route must begin with {start}")));
        }

        let mut flagged = BTreeSet::new();
        for x in 0..events.len() {
            for y in x + 1..events.len() {
                if events[x].tau == events[y].tau {
                    continue;
                }
                if let Some(viol) = pair_rule(inst, v, &events[x], &events[y]) {
                    flagged.insert((x, y));
                    out.push(viol);
                }
            }
        }

        for x in 0..events.len().saturating_sub(1) {
            let (e1, e2) = (&events[x], &events[x + 1]);
            if e1.tau == e2.tau || flagged.contains(&(x, x + 1)) {
                continue;
            }
            let travel_pair = e1.city != e2.city && (!stateful || (e1.state == Phase::Departure && e2.state == Phase::Arrival));
            if travel_pair {
                let n = inst.durations.travel(e1.tau, e1.city, e2.city);
                let gap = e2.tau - e1.tau;
                if gap > n {
                    if !capacity_follows(v, &e1.capacity, &e2.capacity, inst.variation(e1.tau, e1.city, e2.city)) {
                        out.push(violation(
                            K::CapacityTransition,
                            i,
                            false,
                            format!("late leg {}->{} at tau={} carries load {:?} to {:?}", e1.city, e2.city, e1.tau, e1.capacity, e2.capacity),
                        ));
                    }
                    let detail = format!("city {} at tau={} to city {} at tau={} takes {n}", e1.city, e1.tau, e2.city, e2.tau);
                    if window_forced(inst, i, e1.tau, e1.city, e2.city) {
                        strict_only.push(violation(K::LateArrival, i, false, format!("{detail} (exact slot closed by a window)")));
                    } else {
                        out.push(violation(K::LateArrival, i, false, detail));
                    }
                }
                continue;
            }
            if stateful && e1.city != e2.city {
                let detail = match (e1.state, e2.state) {
                    (Phase::Arrival, Phase::Departure) => format!("departs city {} without arriving there", e2.city),
                    (Phase::Arrival, Phase::Arrival) => format!("arrives at city {} without leaving city {}", e2.city, e1.city),
                    (Phase::Departure, Phase::Departure) => format!("departs city {} without arriving there", e2.city),
                    _ => continue,
                };
                out.push(violation(K::StateTransition, i, false, detail));
            }
        }

        if let Some(end) = v.end_city {
            let last = events.last();
            let ok = last.is_some_and(|e| e.city == end && (!stateful || e.state == Phase::Arrival));
            if !ok {
                out.push(violation(K::End, i, false, format!("route does not finish at end city {end}")));
            }
        }
    }
    for vehicle in 1..=inst.vehicles.len() {
        if !seen.contains(&vehicle) {
            out.push(violation(K::Start, vehicle, false, "vehicle missing from plan".into()));
        }
    }

    let depots = inst.depots();
    let routes: Vec<_> = plan.routes.iter().filter(|r| r.vehicle >= 1 && r.vehicle <= inst.vehicles.len()).collect();
    for x in 0..routes.len() {
        for y in x + 1..routes.len() {
            let cities_x: BTreeSet<usize> = routes[x].events.iter().map(|e| e.city).collect();
            let cities_y: BTreeSet<usize> = routes[y].events.iter().map(|e| e.city).collect();
            for &c in cities_x.intersection(&cities_y) {
                if opts.exempt_depots && depots.contains(&c) {
                    continue;
                }
                out.push(Violation {
                    kind: K::SharedCityAcrossVehicles,
                    vehicle: None,
                    detail: format!("city {c} used by vehicles {} and {}", routes[x].vehicle, routes[y].vehicle),
                    penalized: true,
                });
            }
        }
    }

    let visited: BTreeSet<usize> = plan
        .routes
        .iter()
        .flat_map(|r| r.events.iter())
        .filter(|e| e.state != Phase::Departure)
        .map(|e| e.city)
        .collect();
    for c in inst.customers() {
        if !visited.contains(&c) {
            out.push(Violation { kind: K::UnvisitedCity, vehicle: None, detail: format!("city {c} is never visited"), penalized: false });
        }
    }

    let passes_window_tolerant = out.is_empty();
    let passes_strict = passes_window_tolerant && strict_only.is_empty();
    if opts.mode == CheckMode::Strict {
        out.extend(strict_only);
    }
    FeasibilityReport { mode: opts.mode, violations: out, passes_strict, passes_window_tolerant }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_instance;
    use crate::route::plan::VehicleRoute;
    use serde_json::json;

    fn line(t: usize, n: usize, dur: usize, windows: serde_json::Value) -> Instance {
        let doc = json!({
            "index_base": 1,
            "grid": {"T": t, "unit_minutes": 10.0},
            "cities": (1..=n).map(|c| format!("c{c}")).collect::<Vec<_>>(),
            "vehicles": [{"start": 1}],
            "costs": vec![vec![vec![Some(1.0); n]; n]; t - 1],
            "durations": vec![vec![vec![Some(dur); n]; n]; t - 1],
            "windows": windows,
            "model_kind": "TS_VRP",
            "capacity_dims": 0,
        });
        parse_instance(&doc.to_string()).unwrap()
    }

    fn plan(events: &[(usize, usize)]) -> RoutePlan {
        RoutePlan {
            routes: vec![VehicleRoute { vehicle: 1, events: events.iter().map(|&(t, c)| Event::plain(t, c)).collect() }],
        }
    }

    fn kinds(p: &RoutePlan, inst: &Instance, mode: CheckMode) -> BTreeSet<ViolationKind> {
        check_feasibility(p, inst, &CheckOptions { mode, ..CheckOptions::default() }).kinds()
    }

    #[test]
    fn exact_route_is_feasible() {
        let inst = line(4, 3, 1, json!([]));
        let r = check_feasibility(&plan(&[(1, 1), (2, 2), (3, 3)]), &inst, &CheckOptions::default());
        assert!(r.is_feasible(), "{:?}", r.violations);
        assert!(r.passes_strict);
    }

    #[test]
    fn revisit_is_reported() {
        let inst = line(6, 3, 1, json!([]));
        let k = kinds(&plan(&[(1, 1), (2, 2), (3, 3), (5, 2)]), &inst, CheckMode::WindowTolerant);
        assert!(k.contains(&ViolationKind::Revisit));
    }

    #[test]
    fn early_arrival_is_reported() {
        let inst = line(4, 2, 2, json!([]));
        let k = kinds(&plan(&[(1, 1), (2, 2)]), &inst, CheckMode::WindowTolerant);
        assert!(k.contains(&ViolationKind::EarlyArrival));
    }

    #[test]
    fn late_arrival_depends_on_windows_and_mode() {
        let free = line(4, 2, 1, json!([]));
        let p = plan(&[(1, 1), (3, 2)]);
        assert!(kinds(&p, &free, CheckMode::WindowTolerant).contains(&ViolationKind::LateArrival));
        let blocked = line(4, 2, 1, json!([{"vehicle": 1, "tau": 2, "city": 2}]));
        let tolerant = check_feasibility(&p, &blocked, &CheckOptions::default());
        assert!(tolerant.is_feasible());
        assert!(!tolerant.passes_strict);
        assert!(kinds(&p, &blocked, CheckMode::Strict).contains(&ViolationKind::LateArrival));
    }

    #[test]
    fn unvisited_customer_and_start() {
        let inst = line(4, 3, 1, json!([]));
        let k = kinds(&plan(&[(1, 2), (2, 1)]), &inst, CheckMode::WindowTolerant);
        assert!(k.contains(&ViolationKind::Start));
        assert!(k.contains(&ViolationKind::UnvisitedCity));
    }

    #[test]
    fn mode_parses() {
        assert_eq!("strict".parse::<CheckMode>().unwrap(), CheckMode::Strict);
        assert_eq!("window-tolerant".parse::<CheckMode>().unwrap(), CheckMode::WindowTolerant);
        assert!("lenient".parse::<CheckMode>().is_err());
    }
}
