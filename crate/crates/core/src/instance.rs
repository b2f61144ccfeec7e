//! Problem description: time grid, fleet, time-dependent cost/duration
//! matrices, capacity variations and windows.
//!
//! Cities, vehicles and intervals are 1-based throughout, both in the file
//! format and in the public accessors. Matrix accessors take `(tau, from, to)`;
//! in the file the dense arrays are laid out `[tau-1][to-1][from-1]`
//! (arrival city first), matching the `d_ab` convention where `a` is the
//! destination and `b` the origin.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed instance document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid instance: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("duration must be >= 1 (raw value {0})")]
    NegativeDuration(f64),
    #[error("unit of time-division must be positive, got {0}")]
    BadUnit(f64),
    #[error("priority weight must lie in the open interval (0, 1), got {0}")]
    PriorityWeight(f64),
    #[error("city {0} out of range")]
    CityOutOfRange(usize),
}

/// Which of the four Hamiltonians the instance is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "TS_VRP")]
    TsVrp,
    #[serde(rename = "TS_MCVRP")]
    TsMcvrp,
    #[serde(rename = "TS_SVRP")]
    TsSvrp,
    #[serde(rename = "TS_MCSVRP")]
    TsMcsvrp,
}

impl ModelKind {
    pub fn has_states(self) -> bool {
        matches!(self, ModelKind::TsSvrp | ModelKind::TsMcsvrp)
    }

    pub fn has_capacity(self) -> bool {
        matches!(self, ModelKind::TsMcvrp | ModelKind::TsMcsvrp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TsVrp => "TS_VRP",
            ModelKind::TsMcvrp => "TS_MCVRP",
            ModelKind::TsSvrp => "TS_SVRP",
            ModelKind::TsMcsvrp => "TS_MCSVRP",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "TS_VRP" => Ok(ModelKind::TsVrp),
            "TS_MCVRP" => Ok(ModelKind::TsMcvrp),
            "TS_SVRP" => Ok(ModelKind::TsSvrp),
            "TS_MCSVRP" => Ok(ModelKind::TsMcsvrp),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    /// `T`: intervals are numbered `1..=T`.
    pub interval_count: usize,
    pub unit_minutes: f64,
    pub origin_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    pub start_city: usize,
    pub end_city: Option<usize>,
    pub type_tag: Option<String>,
    pub capacity_lower: Vec<i64>,
    pub capacity_upper: Vec<i64>,
    /// Load at departure from the start city; defaults to `capacity_lower`.
    pub initial_load: Option<Vec<i64>>,
}

impl Vehicle {
    pub fn initial(&self) -> &[i64] {
        self.initial_load.as_deref().unwrap_or(&self.capacity_lower)
    }

    /// Number of capacity vectors `q <= c <= Q`.
    pub fn capacity_states(&self) -> usize {
        self.capacity_lower
            .iter()
            .zip(&self.capacity_upper)
            .map(|(q, big_q)| (big_q - q + 1).max(0) as usize)
            .product()
    }

    pub fn within_bounds(&self, c: &[i64]) -> bool {
        c.len() == self.capacity_lower.len()
            && c.iter()
                .zip(self.capacity_lower.iter().zip(&self.capacity_upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// Dense `(tau, from, to)` table over departure intervals `1..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegTable<V> {
    slices: usize,
    cities: usize,
    data: Vec<V>,
}

impl<V: Copy + Default> LegTable<V> {
    pub fn filled(slices: usize, cities: usize, value: V) -> Self {
        Self {
            slices,
            cities,
            data: vec![value; slices * cities * cities],
        }
    }

    pub fn from_fn(slices: usize, cities: usize, mut f: impl FnMut(usize, usize, usize) -> V) -> Self {
        let mut data = Vec::with_capacity(slices * cities * cities);
        for tau in 1..=slices {
            for from in 1..=cities {
                for to in 1..=cities {
                    data.push(if from == to { V::default() } else { f(tau, from, to) });
                }
            }
        }
        Self { slices, cities, data }
    }

    fn offset(&self, tau: usize, from: usize, to: usize) -> usize {
        debug_assert!(tau >= 1 && tau <= self.slices, "tau {tau} out of 1..={}", self.slices);
        ((tau - 1) * self.cities + (from - 1)) * self.cities + (to - 1)
    }

    pub fn get(&self, tau: usize, from: usize, to: usize) -> V {
        self.data[self.offset(tau, from, to)]
    }

    pub fn set(&mut self, tau: usize, from: usize, to: usize, value: V) {
        let o = self.offset(tau, from, to);
        self.data[o] = value;
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn cities(&self) -> usize {
        self.cities
    }

    /// Off-diagonal entries as `(tau, from, to, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, V)> + '_ {
        let n = self.cities;
        (1..=self.slices).flat_map(move |tau| {
            (1..=n).flat_map(move |from| {
                (1..=n)
                    .filter(move |&to| to != from)
                    .map(move |to| (tau, from, to, self.get(tau, from, to)))
            })
        })
    }
}

/// `d_ab^(tau)`: cost of the leg `from -> to` departing at `tau`.
pub type CostSeries = LegTable<f64>;

/// Travel durations in intervals plus optional per-city stay durations.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationSeries {
    pub travel: LegTable<u32>,
    /// `n_a^(tau)` indexed `(tau-1) * N + (a-1)`; only two-state models use it.
    pub stay: Option<Vec<u32>>,
}

impl DurationSeries {
    pub fn travel(&self, tau: usize, from: usize, to: usize) -> usize {
        self.travel.get(tau, from, to) as usize
    }

    pub fn stay(&self, tau: usize, city: usize) -> Option<usize> {
        let n = self.travel.cities();
        self.stay
            .as_ref()
            .map(|s| s[(tau - 1) * n + (city - 1)] as usize)
    }
}

/// Signed capacity change `B_ab^(tau)` for each leg, one entry per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationSeries {
    dims: usize,
    cities: usize,
    slices: usize,
    data: Vec<i64>,
}

impl VariationSeries {
    pub fn from_fn(
        slices: usize,
        cities: usize,
        dims: usize,
        mut f: impl FnMut(usize, usize, usize) -> Vec<i64>,
    ) -> Self {
        let mut data = Vec::with_capacity(slices * cities * cities * dims);
        for tau in 1..=slices {
            for from in 1..=cities {
                for to in 1..=cities {
                    if from == to {
                        data.extend(std::iter::repeat_n(0, dims));
                    } else {
                        let v = f(tau, from, to);
                        assert_eq!(v.len(), dims, "variation vector length");
                        data.extend(v);
                    }
                }
            }
        }
        Self { dims, cities, slices, data }
    }

    pub fn get(&self, tau: usize, from: usize, to: usize) -> &[i64] {
        let o = (((tau - 1) * self.cities + (from - 1)) * self.cities + (to - 1)) * self.dims;
        &self.data[o..o + self.dims]
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
}

/// Forbidden `(vehicle, tau, city)` triples; their qubits are pinned to 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WindowSet {
    pub forbidden: BTreeSet<(usize, usize, usize)>,
}

impl WindowSet {
    pub fn forbid(&mut self, vehicle: usize, tau: usize, city: usize) {
        self.forbidden.insert((vehicle, tau, city));
    }

    pub fn is_forbidden(&self, vehicle: usize, tau: usize, city: usize) -> bool {
        self.forbidden.contains(&(vehicle, tau, city))
    }
}

/// How travel times were given in the source document. Kept so that
/// serialization reproduces the document exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeSource {
    Minutes { travel: LegTable<f64>, stay: Option<Vec<f64>> },
    Intervals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub grid: TimeGrid,
    pub cities: Vec<String>,
    pub vehicles: Vec<Vehicle>,
    pub costs: CostSeries,
    pub durations: DurationSeries,
    pub variations: Option<VariationSeries>,
    pub windows: WindowSet,
    pub model_kind: ModelKind,
    pub capacity_dims: usize,
    time_source: TimeSource,
}

impl Instance {
    pub fn horizon(&self) -> usize {
        self.grid.interval_count
    }

    pub fn city_count(&self) -> usize {
        self.cities.len()
    }

    pub fn vehicle(&self, id: usize) -> &Vehicle {
        &self.vehicles[id - 1]
    }

    /// Cities that are some vehicle's start or end.
    pub fn depots(&self) -> BTreeSet<usize> {
        self.vehicles
            .iter()
            .flat_map(|v| std::iter::once(v.start_city).chain(v.end_city))
            .collect()
    }

    pub fn customers(&self) -> Vec<usize> {
        let depots = self.depots();
        (1..=self.city_count()).filter(|c| !depots.contains(c)).collect()
    }

    /// Travel duration for a leg, `None` when departing at or after `T`.
    pub fn travel_time(&self, tau: usize, from: usize, to: usize) -> Option<usize> {
        (tau < self.horizon()).then(|| self.durations.travel(tau, from, to))
    }

    pub fn stay_time(&self, tau: usize, city: usize) -> Option<usize> {
        if tau < self.horizon() {
            self.durations.stay(tau, city)
        } else {
            None
        }
    }

    pub fn variation(&self, tau: usize, from: usize, to: usize) -> &[i64] {
        match &self.variations {
            Some(v) => v.get(tau, from, to),
            None => &[],
        }
    }

    /// Returns a copy with the cost series replaced (e.g. after [`apply_priority`]).
    pub fn with_costs(&self, costs: CostSeries) -> Instance {
        let mut out = self.clone();
        out.costs = costs;
        out
    }

    pub fn with_model_kind(&self, kind: ModelKind) -> Result<Instance, InstanceError> {
        let mut doc = self.to_document();
        doc.model_kind = kind;
        if !kind.has_states() {
            doc.stay_minutes = None;
            doc.stay_durations = None;
        }
        if !kind.has_capacity() {
            doc.variations = None;
            doc.capacity_dims = 0;
            for v in &mut doc.vehicles {
                v.lower.clear();
                v.upper.clear();
                v.initial = None;
            }
        }
        Instance::from_document(doc)
    }

    pub fn from_document(doc: InstanceDocument) -> Result<Instance, InstanceError> {
        let inst = assemble(doc)?;
        let report = validate_instance(&inst);
        if report.errors.is_empty() {
            Ok(inst)
        } else {
            Err(InstanceError::Invalid(report.errors))
        }
    }

    pub fn to_document(&self) -> InstanceDocument {
        let n = self.city_count();
        let slices = self.horizon() - 1;
        let dense_f = |t: &LegTable<f64>| -> Vec<Vec<Vec<Option<f64>>>> {
            (1..=slices)
                .map(|tau| {
                    (1..=n)
                        .map(|to| {
                            (1..=n)
                                .map(|from| (from != to).then(|| t.get(tau, from, to)))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        };
        let (raw_minutes, durations, stay_minutes, stay_durations) = match &self.time_source {
            TimeSource::Minutes { travel, stay } => (
                Some(dense_f(travel)),
                None,
                stay.as_ref().map(|s| s.chunks(n).map(|c| c.to_vec()).collect()),
                None,
            ),
            TimeSource::Intervals => {
                let t = &self.durations.travel;
                let dense: Vec<Vec<Vec<Option<u32>>>> = (1..=slices)
                    .map(|tau| {
                        (1..=n)
                            .map(|to| {
                                (1..=n)
                                    .map(|from| (from != to).then(|| t.get(tau, from, to)))
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                (
                    None,
                    Some(dense),
                    None,
                    self.durations
                        .stay
                        .as_ref()
                        .map(|s| s.chunks(n).map(|c| c.to_vec()).collect()),
                )
            }
        };
        let variations = self.variations.as_ref().map(|v| {
            (1..=slices)
                .map(|tau| {
                    (1..=n)
                        .map(|to| {
                            (1..=n)
                                .map(|from| (from != to).then(|| v.get(tau, from, to).to_vec()))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        });
        InstanceDocument {
            index_base: 1,
            grid: GridDocument {
                intervals: self.grid.interval_count,
                unit_minutes: self.grid.unit_minutes,
                origin: self.grid.origin_label.clone(),
            },
            cities: self.cities.clone(),
            vehicles: self
                .vehicles
                .iter()
                .map(|v| VehicleDocument {
                    start: v.start_city,
                    end: v.end_city,
                    type_tag: v.type_tag.clone(),
                    lower: v.capacity_lower.clone(),
                    upper: v.capacity_upper.clone(),
                    initial: v.initial_load.clone(),
                })
                .collect(),
            costs: dense_f(&self.costs),
            raw_minutes,
            durations,
            stay_minutes,
            stay_durations,
            variations,
            windows: self
                .windows
                .forbidden
                .iter()
                .map(|&(vehicle, tau, city)| WindowDocument { vehicle, tau, city })
                .collect(),
            model_kind: self.model_kind,
            capacity_dims: self.capacity_dims,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("instance serializes")
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDocument {
    #[serde(rename = "T")]
    pub intervals: usize,
    pub unit_minutes: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleDocument {
    pub start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub type_tag: Option<String>,
    #[serde(default, rename = "q")]
    pub lower: Vec<i64>,
    #[serde(default, rename = "Q")]
    pub upper: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowDocument {
    pub vehicle: usize,
    pub tau: usize,
    pub city: usize,
}

/// On-disk JSON layout of an [`Instance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub index_base: u32,
    pub grid: GridDocument,
    pub cities: Vec<String>,
    pub vehicles: Vec<VehicleDocument>,
    pub costs: Vec<Vec<Vec<Option<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_minutes: Option<Vec<Vec<Vec<Option<f64>>>>>,
    /// Travel durations already expressed in intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub durations: Option<Vec<Vec<Vec<Option<u32>>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stay_minutes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stay_durations: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variations: Option<Vec<Vec<Vec<Option<Vec<i64>>>>>>,
    #[serde(default)]
    pub windows: Vec<WindowDocument>,
    pub model_kind: ModelKind,
    #[serde(default)]
    pub capacity_dims: usize,
}

pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let doc: InstanceDocument = serde_json::from_str(text)?;
    Instance::from_document(doc)
}

/// Structural conversion; semantic checks live in [`validate_instance`].
fn assemble(doc: InstanceDocument) -> Result<Instance, InstanceError> {
    let mut errors = Vec::new();
    if doc.index_base != 1 {
        errors.push(format!("index_base must be 1, got {}", doc.index_base));
    }
    let t = doc.grid.intervals;
    let n = doc.cities.len();
    if t < 2 {
        errors.push(format!("grid.T must be >= 2, got {t}"));
    }
    if n < 2 {
        errors.push(format!("need at least 2 cities, got {n}"));
    }
    if !(doc.grid.unit_minutes > 0.0 && doc.grid.unit_minutes.is_finite()) {
        errors.push(format!("unit_minutes must be positive, got {}", doc.grid.unit_minutes));
    }
    if !errors.is_empty() {
        return Err(InstanceError::Invalid(errors));
    }
    let slices = t - 1;

    let dense = |name: &str, arr: &Vec<Vec<Vec<Option<f64>>>>, errors: &mut Vec<String>| {
        let mut table = LegTable::filled(slices, n, 0.0);
        if arr.len() != slices {
            errors.push(format!("{name}: expected {slices} interval slices, got {}", arr.len()));
            return table;
        }
        for (ti, slice) in arr.iter().enumerate() {
            if slice.len() != n || slice.iter().any(|row| row.len() != n) {
                errors.push(format!("{name}[{}]: expected a {n}x{n} matrix", ti + 1));
                continue;
            }
            for (ai, row) in slice.iter().enumerate() {
                for (bi, v) in row.iter().enumerate() {
                    if ai == bi {
                        continue;
                    }
                    match v {
                        Some(x) => table.set(ti + 1, bi + 1, ai + 1, *x),
                        None => errors.push(format!(
                            "{name}: missing entry for tau={} from={} to={}",
                            ti + 1,
                            bi + 1,
                            ai + 1
                        )),
                    }
                }
            }
        }
        table
    };

    let costs = dense("costs", &doc.costs, &mut errors);

    let (time_source, travel) = match (&doc.raw_minutes, &doc.durations) {
        (Some(raw), None) => {
            let raw = dense("raw_minutes", raw, &mut errors);
            let stay = doc.stay_minutes.as_ref().map(|s| {
                if s.len() != slices || s.iter().any(|r| r.len() != n) {
                    errors.push(format!("stay_minutes: expected {slices}x{n} entries"));
                }
                s.iter().flatten().copied().collect::<Vec<f64>>()
            });
            if doc.stay_durations.is_some() {
                errors.push("stay_durations cannot be combined with raw_minutes".into());
            }
            let travel = match discretize_durations(&raw, doc.grid.unit_minutes) {
                Ok(d) => d,
                Err(e) => {
                    errors.push(e.to_string());
                    LegTable::filled(slices, n, 1)
                }
            };
            (TimeSource::Minutes { travel: raw, stay }, travel)
        }
        (None, Some(ints)) => {
            let mut table = LegTable::filled(slices, n, 1u32);
            if ints.len() != slices {
                errors.push(format!("durations: expected {slices} interval slices"));
            } else {
                for (ti, slice) in ints.iter().enumerate() {
                    if slice.len() != n || slice.iter().any(|row| row.len() != n) {
                        errors.push(format!("durations[{}]: expected a {n}x{n} matrix", ti + 1));
                        continue;
                    }
                    for (ai, row) in slice.iter().enumerate() {
                        for (bi, v) in row.iter().enumerate() {
                            if ai == bi {
                                continue;
                            }
                            match v {
                                Some(0) => errors.push(format!(
                                    "duration must be >= 1 (tau={} from={} to={})",
                                    ti + 1,
                                    bi + 1,
                                    ai + 1
                                )),
                                Some(x) => table.set(ti + 1, bi + 1, ai + 1, *x),
                                None => errors.push(format!(
                                    "durations: missing entry for tau={} from={} to={}",
                                    ti + 1,
                                    bi + 1,
                                    ai + 1
                                )),
                            }
                        }
                    }
                }
            }
            if doc.stay_minutes.is_some() {
                errors.push("stay_minutes cannot be combined with interval durations".into());
            }
            (TimeSource::Intervals, table)
        }
        (Some(_), Some(_)) => {
            errors.push("give exactly one of raw_minutes or durations, not both".into());
            (TimeSource::Intervals, LegTable::filled(slices, n, 1))
        }
        (None, None) => {
            errors.push("missing travel times: raw_minutes or durations required".into());
            (TimeSource::Intervals, LegTable::filled(slices, n, 1))
        }
    };

    let stay = match (&time_source, &doc.stay_durations) {
        (TimeSource::Minutes { stay: Some(s), .. }, _) => Some(
            s.iter()
                .map(|&m| match ceil_intervals(m, doc.grid.unit_minutes) {
                    Ok(v) => v,
                    Err(e) => {
                        errors.push(format!("stay_minutes: {e}"));
                        1
                    }
                })
                .collect::<Vec<u32>>(),
        ),
        (TimeSource::Intervals, Some(s)) => {
            if s.len() != slices || s.iter().any(|r| r.len() != n) {
                errors.push(format!("stay_durations: expected {slices}x{n} entries"));
            }
            let flat: Vec<u32> = s.iter().flatten().copied().collect();
            if flat.contains(&0) {
                errors.push("stay duration must be >= 1".into());
            }
            Some(flat)
        }
        _ => None,
    };
    if let Some(s) = &stay {
        if s.len() != slices * n {
            errors.push("stay durations have the wrong shape".into());
        }
    }

    let m = doc.capacity_dims;
    let variations = doc.variations.as_ref().map(|arr| {
        let mut data = vec![0i64; slices * n * n * m];
        if arr.len() != slices {
            errors.push(format!("variations: expected {slices} interval slices"));
        } else {
            for (ti, slice) in arr.iter().enumerate() {
                if slice.len() != n || slice.iter().any(|row| row.len() != n) {
                    errors.push(format!("variations[{}]: expected a {n}x{n} matrix", ti + 1));
                    continue;
                }
                for (ai, row) in slice.iter().enumerate() {
                    for (bi, v) in row.iter().enumerate() {
                        if ai == bi {
                            continue;
                        }
                        match v {
                            Some(vec) if vec.len() == m => {
                                let o = ((ti * n + bi) * n + ai) * m;
                                data[o..o + m].copy_from_slice(vec);
                            }
                            Some(vec) => errors.push(format!(
                                "variations: entry tau={} from={} to={} has {} components, expected {m}",
                                ti + 1,
                                bi + 1,
                                ai + 1,
                                vec.len()
                            )),
                            None => errors.push(format!(
                                "variations: missing entry for tau={} from={} to={}",
                                ti + 1,
                                bi + 1,
                                ai + 1
                            )),
                        }
                    }
                }
            }
        }
        VariationSeries { dims: m, cities: n, slices, data }
    });

    let vehicles = doc
        .vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| Vehicle {
            id: i + 1,
            start_city: v.start,
            end_city: v.end,
            type_tag: v.type_tag.clone(),
            capacity_lower: v.lower.clone(),
            capacity_upper: v.upper.clone(),
            initial_load: v.initial.clone(),
        })
        .collect();

    let mut windows = WindowSet::default();
    for w in &doc.windows {
        windows.forbid(w.vehicle, w.tau, w.city);
    }

    if !errors.is_empty() {
        return Err(InstanceError::Invalid(errors));
    }

    Ok(Instance {
        grid: TimeGrid {
            interval_count: t,
            unit_minutes: doc.grid.unit_minutes,
            origin_label: doc.grid.origin.clone(),
        },
        cities: doc.cities,
        vehicles,
        costs,
        durations: DurationSeries { travel, stay },
        variations,
        windows,
        model_kind: doc.model_kind,
        capacity_dims: m,
        time_source,
    })
}

// ---------------------------------------------------------------------------
// Operations

fn ceil_intervals(raw: f64, unit: f64) -> Result<u32, InstanceError> {
    if !(unit > 0.0 && unit.is_finite()) {
        return Err(InstanceError::BadUnit(unit));
    }
    if raw.is_nan() || raw < 0.0 || raw.is_infinite() {
        return Err(InstanceError::NegativeDuration(raw));
    }
    Ok(((raw / unit).ceil() as u32).max(1))
}

/// `n = max(1, ceil(raw / unit))` for every leg.
pub fn discretize_durations(
    raw_minutes: &LegTable<f64>,
    unit_minutes: f64,
) -> Result<LegTable<u32>, InstanceError> {
    let mut out = LegTable::filled(raw_minutes.slices(), raw_minutes.cities(), 1u32);
    for (tau, from, to, raw) in raw_minutes.entries() {
        out.set(tau, from, to, ceil_intervals(raw, unit_minutes)?);
    }
    Ok(out)
}

/// Scales the cost of every leg arriving at one of `targets` by `weight`.
pub fn apply_priority(
    costs: &CostSeries,
    weight: f64,
    targets: &BTreeSet<usize>,
) -> Result<CostSeries, InstanceError> {
    if !(weight > 0.0 && weight < 1.0) {
        return Err(InstanceError::PriorityWeight(weight));
    }
    if let Some(&bad) = targets.iter().find(|&&c| c == 0 || c > costs.cities()) {
        return Err(InstanceError::CityOutOfRange(bad));
    }
    let mut out = costs.clone();
    for (tau, from, to, d) in costs.entries() {
        if targets.contains(&to) {
            out.set(tau, from, to, weight * d);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    pub fn is_legal(&self) -> bool {
        self.errors.is_empty()
    }
}

pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let errors = &mut report.errors;
    let t = inst.horizon();
    let n = inst.city_count();
    let m = inst.capacity_dims;
    let kind = inst.model_kind;

    if inst.vehicles.is_empty() {
        errors.push("need at least one vehicle".into());
    }
    if kind.has_capacity() && m == 0 {
        errors.push(format!("{kind} requires capacity_dims >= 1"));
    }
    if !kind.has_capacity() && m > 0 {
        errors.push(format!("{kind} does not take capacity dimensions (capacity_dims = {m})"));
    }
    match (&inst.variations, m) {
        (None, m) if m >= 1 => errors.push("variations are required when capacity_dims >= 1".into()),
        (Some(_), 0) => errors.push("variations given but capacity_dims is 0".into()),
        _ => {}
    }
    if kind.has_states() && inst.durations.stay.is_none() {
        errors.push(format!("{kind} requires stay durations"));
    }
    if !kind.has_states() && inst.durations.stay.is_some() {
        errors.push(format!("{kind} does not use stay durations"));
    }

    for (tau, from, to, d) in inst.costs.entries() {
        if !d.is_finite() || d < 0.0 {
            errors.push(format!("cost tau={tau} from={from} to={to} must be finite and >= 0, got {d}"));
        }
    }

    for v in &inst.vehicles {
        let id = v.id;
        if v.start_city == 0 || v.start_city > n {
            errors.push(format!("vehicle {id}: start city {} out of range", v.start_city));
        }
        if let Some(e) = v.end_city {
            if e == 0 || e > n {
                errors.push(format!("vehicle {id}: end city {e} out of range"));
            } else if e == v.start_city {
                errors.push(format!(
                    "vehicle {id}: end city equals start city; a return to the start is excluded by the revisit penalty"
                ));
            }
        }
        if v.capacity_lower.len() != m || v.capacity_upper.len() != m {
            errors.push(format!("vehicle {id}: capacity bounds must have {m} components"));
        } else {
            for (dim, (q, big_q)) in v.capacity_lower.iter().zip(&v.capacity_upper).enumerate() {
                if q > big_q {
                    errors.push(format!("vehicle {id}: q_{} = {q} exceeds Q_{} = {big_q}", dim + 1, dim + 1));
                }
            }
            if let Some(init) = &v.initial_load {
                if !v.within_bounds(init) {
                    errors.push(format!("vehicle {id}: initial load {init:?} outside bounds"));
                }
            }
        }
    }

    for &(vehicle, tau, city) in &inst.windows.forbidden {
        if vehicle == 0 || vehicle > inst.vehicles.len() || tau == 0 || tau > t || city == 0 || city > n {
            errors.push(format!("window ({vehicle}, {tau}, {city}) references an invalid index"));
        }
    }

    if !report.errors.is_empty() {
        return report;
    }

    let warnings = &mut report.warnings;
    for v in &inst.vehicles {
        if inst.windows.is_forbidden(v.id, 1, v.start_city) {
            warnings.push(format!("vehicle {}: start conflicts with window", v.id));
        }
        if let Some(e) = v.end_city {
            if (2..=t).all(|tau| inst.windows.is_forbidden(v.id, tau, e)) {
                warnings.push(format!("vehicle {}: end conflicts with window", v.id));
            }
            if 1 + inst.durations.travel(1, v.start_city, e) > t {
                warnings.push(format!("vehicle {}: end city cannot be reached within the horizon", v.id));
            }
        }
    }

    for city in inst.customers() {
        let open = inst
            .vehicles
            .iter()
            .any(|v| (2..=t).any(|tau| !inst.windows.is_forbidden(v.id, tau, city)));
        if !open {
            warnings.push(format!("city {city} unvisitable: every slot is closed by windows"));
        }
    }

    if let Some(var) = &inst.variations {
        for city in inst.customers() {
            let reachable = inst.vehicles.iter().any(|v| {
                let states = capacity_vectors(&v.capacity_lower, &v.capacity_upper);
                (1..t).any(|tau| {
                    (1..=n).filter(|&b| b != city).any(|b| {
                        tau + inst.durations.travel(tau, b, city) <= t
                            && states.iter().any(|c| {
                                let next: Vec<i64> =
                                    c.iter().zip(var.get(tau, b, city)).map(|(x, d)| x + d).collect();
                                v.within_bounds(&next)
                            })
                    })
                })
            });
            if !reachable {
                warnings.push(format!("city {city} unreachable under capacity bounds"));
            }
        }
    }

    // A two-hop path whose total equals (or undercuts) the direct duration makes
    // the non-adjacent pair of arrivals interact in the Hamiltonian.
    let mut shortcut = None;
    'outer: for tau in 1..t {
        for a in 1..=n {
            for b in (1..=n).filter(|&b| b != a) {
                let mid = tau + inst.durations.travel(tau, a, b);
                if mid >= t {
                    continue;
                }
                for c in (1..=n).filter(|&c| c != a && c != b) {
                    let two_hop = mid - tau + inst.durations.travel(mid, b, c);
                    if inst.durations.travel(tau, a, c) >= two_hop {
                        shortcut = Some((tau, a, b, c));
                        break 'outer;
                    }
                }
            }
        }
    }
    if let Some((tau, a, b, c)) = shortcut {
        warnings.push(format!(
            "durations are not strictly sub-additive (tau={tau}: {a}->{b}->{c} is not slower than {a}->{c}); \
             non-consecutive arrivals may interact"
        ));
    }
    let _ = kind;
    report
}

/// All integer vectors `lower <= c <= upper`, last component varying fastest.
pub fn capacity_vectors(lower: &[i64], upper: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(lower.len())];
    for (q, big_q) in lower.iter().zip(upper) {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (*q..=*big_q).map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> serde_json::Value {
        json!({
            "index_base": 1,
            "grid": {"T": 2, "unit_minutes": 20.0},
            "cities": ["depot", "shop"],
            "vehicles": [{"start": 1}],
            "costs": [[[null, 5.0], [5.0, null]]],
            "raw_minutes": [[[null, 25.0], [25.0, null]]],
            "model_kind": "TS_VRP",
        })
    }

    #[test]
    fn minimal_instance_parses() {
        let inst = parse_instance(&minimal().to_string()).unwrap();
        assert_eq!(inst.vehicles.len(), 1);
        assert_eq!(inst.city_count(), 2);
        assert_eq!(inst.durations.travel(1, 1, 2), 2);
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn zero_duration_is_rejected() {
        let mut doc = minimal();
        doc.as_object_mut().unwrap().remove("raw_minutes");
        doc["durations"] = json!([[[null, 0], [1, null]]]);
        let err = parse_instance(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("duration must be >= 1"), "{err}");
    }

    #[test]
    fn capacity_kind_without_variations_is_rejected() {
        let mut doc = minimal();
        doc["model_kind"] = json!("TS_MCVRP");
        doc["capacity_dims"] = json!(1);
        doc["vehicles"] = json!([{"start": 1, "q": [0], "Q": [1]}]);
        let err = parse_instance(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("variations are required"), "{err}");
    }

    #[test]
    fn missing_entry_is_an_error() {
        let mut doc = minimal();
        doc["costs"] = json!([[[null, null], [5.0, null]]]);
        let err = parse_instance(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("missing entry"), "{err}");
    }

    #[test]
    fn lower_bound_above_upper_is_rejected() {
        let mut doc = minimal();
        doc["model_kind"] = json!("TS_MCVRP");
        doc["capacity_dims"] = json!(1);
        doc["vehicles"] = json!([{"start": 1, "q": [2], "Q": [1]}]);
        doc["variations"] = json!([[[null, [0]], [[0], null]]]);
        let err = parse_instance(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("exceeds"), "{err}");
    }

    #[test]
    fn index_base_must_be_one() {
        let mut doc = minimal();
        doc["index_base"] = json!(0);
        assert!(parse_instance(&doc.to_string()).is_err());
    }

    #[test]
    fn discretization_examples() {
        let raw = LegTable::from_fn(1, 2, |_, from, _| [25.0, 20.0][from - 1]);
        let n = discretize_durations(&raw, 20.0).unwrap();
        assert_eq!(n.get(1, 1, 2), 2);
        assert_eq!(n.get(1, 2, 1), 1);
        let zero = LegTable::filled(1, 2, 0.0);
        assert_eq!(discretize_durations(&zero, 20.0).unwrap().get(1, 1, 2), 1);
        let neg = LegTable::from_fn(1, 2, |_, _, _| -1.0);
        assert!(discretize_durations(&neg, 20.0).is_err());
    }

    #[test]
    fn priority_scales_only_targeted_arrivals() {
        let costs = LegTable::from_fn(1, 3, |_, _, _| 10.0);
        let out = apply_priority(&costs, 0.5, &BTreeSet::from([3])).unwrap();
        assert_eq!(out.get(1, 2, 3), 5.0);
        assert_eq!(out.get(1, 3, 2), 10.0);
        assert_eq!(apply_priority(&costs, 0.5, &BTreeSet::new()).unwrap(), costs);
        assert!(apply_priority(&costs, 1.0, &BTreeSet::new()).is_err());
        assert!(apply_priority(&costs, 0.0, &BTreeSet::new()).is_err());
    }

    #[test]
    fn start_window_conflict_warns() {
        let mut doc = minimal();
        doc["windows"] = json!([{"vehicle": 1, "tau": 1, "city": 1}]);
        let inst = parse_instance(&doc.to_string()).unwrap();
        let report = validate_instance(&inst);
        assert!(report.is_legal());
        assert!(report.warnings.iter().any(|w| w.contains("start conflicts with window")));
    }

    #[test]
    fn capacity_unreachable_city_warns() {
        // Every leg into city 3 removes two units from a vehicle that never holds more than one.
        let doc = json!({
            "index_base": 1,
            "grid": {"T": 3, "unit_minutes": 10.0},
            "cities": ["d", "a", "b"],
            "vehicles": [{"start": 1, "q": [0], "Q": [1]}],
            "costs": vec![vec![vec![Some(1.0); 3]; 3]; 2],
            "durations": vec![vec![vec![Some(1); 3]; 3]; 2],
            "variations": (0..2).map(|_| (1..=3).map(|to| (1..=3).map(|_from| {
                if to == 3 { Some(vec![-2]) } else { Some(vec![0]) }
            }).collect::<Vec<_>>()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "model_kind": "TS_MCVRP",
            "capacity_dims": 1,
        });
        let inst = parse_instance(&doc.to_string()).unwrap();
        let report = validate_instance(&inst);
        assert_eq!(
            report
                .warnings
                .iter()
                .filter(|w| w.contains("unreachable under capacity bounds"))
                .count(),
            1,
            "{report:?}"
        );
    }

    #[test]
    fn capacity_vectors_enumerate_in_mixed_radix_order() {
        let v = capacity_vectors(&[0, 1], &[1, 3]);
        assert_eq!(v.len(), 6);
        assert_eq!(v[0], vec![0, 1]);
        assert_eq!(v[1], vec![0, 2]);
        assert_eq!(v[5], vec![1, 3]);
        assert_eq!(capacity_vectors(&[], &[]), vec![Vec::<i64>::new()]);
    }
}
