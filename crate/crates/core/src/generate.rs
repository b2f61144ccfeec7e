//! Programmatic construction of instances, including random ones for tests
//! and benchmarks.

use rand::Rng;

use crate::qubo::build_catalogue;

use crate::instance::{
    GridDocument, Instance, InstanceDocument, InstanceError, ModelKind, VehicleDocument, WindowDocument,
};

type LegFn<T> = Box<dyn Fn(usize, usize, usize) -> T>;

/// Fills an instance document from closures and validates it.
pub struct InstanceBuilder {
    kind: ModelKind,
    horizon: usize,
    cities: Vec<String>,
    unit_minutes: f64,
    capacity_dims: usize,
    vehicles: Vec<VehicleDocument>,
    windows: Vec<WindowDocument>,
    cost: LegFn<f64>,
    duration: LegFn<u32>,
    stay: Box<dyn Fn(usize, usize) -> u32>,
    variation: Option<LegFn<Vec<i64>>>,
}

impl InstanceBuilder {
    pub fn new(kind: ModelKind, horizon: usize, cities: usize) -> Self {
        Self {
            kind,
            horizon,
            cities: (1..=cities).map(|c| format!("city{c}")).collect(),
            unit_minutes: 15.0,
            capacity_dims: 0,
            vehicles: Vec::new(),
            windows: Vec::new(),
            cost: Box::new(|_, _, _| 1.0),
            duration: Box::new(|_, _, _| 1),
            stay: Box::new(|_, _| 1),
            variation: None,
        }
    }

    pub fn labels(mut self, labels: &[&str]) -> Self {
        self.cities = labels.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn unit_minutes(mut self, unit: f64) -> Self {
        self.unit_minutes = unit;
        self
    }

    pub fn vehicle(mut self, start: usize, end: Option<usize>) -> Self {
        self.vehicles.push(VehicleDocument { start, end, type_tag: None, lower: Vec::new(), upper: Vec::new(), initial: None });
        self
    }

    pub fn capacitated_vehicle(mut self, start: usize, end: Option<usize>, q: Vec<i64>, big_q: Vec<i64>, initial: Option<Vec<i64>>) -> Self {
        self.capacity_dims = q.len();
        self.vehicles.push(VehicleDocument { start, end, type_tag: None, lower: q, upper: big_q, initial });
        self
    }

    /// `d` for the leg `from -> to` departing at `tau`.
    pub fn costs(mut self, f: impl Fn(usize, usize, usize) -> f64 + 'static) -> Self {
        self.cost = Box::new(f);
        self
    }

    pub fn durations(mut self, f: impl Fn(usize, usize, usize) -> u32 + 'static) -> Self {
        self.duration = Box::new(f);
        self
    }

    pub fn stays(mut self, f: impl Fn(usize, usize) -> u32 + 'static) -> Self {
        self.stay = Box::new(f);
        self
    }

    pub fn variations(mut self, f: impl Fn(usize, usize, usize) -> Vec<i64> + 'static) -> Self {
        self.variation = Some(Box::new(f));
        self
    }

    pub fn forbid(mut self, vehicle: usize, tau: usize, city: usize) -> Self {
        self.windows.push(WindowDocument { vehicle, tau, city });
        self
    }

    /// Closes `city` for every vehicle outside `open` (inclusive interval range).
    pub fn time_window(mut self, city: usize, open: std::ops::RangeInclusive<usize>) -> Self {
        for vehicle in 1..=self.vehicles.len() {
            for tau in 1..=self.horizon {
                if !open.contains(&tau) {
                    self.windows.push(WindowDocument { vehicle, tau, city });
                }
            }
        }
        self
    }

    pub fn document(&self) -> InstanceDocument {
        let n = self.cities.len();
        let slices = self.horizon.saturating_sub(1);
        // file layout: [tau-1][to-1][from-1]
        fn dense<T>(slices: usize, n: usize, f: impl Fn(usize, usize, usize) -> T) -> Vec<Vec<Vec<Option<T>>>> {
            (1..=slices)
                .map(|tau| {
                    (1..=n)
                        .map(|to| (1..=n).map(|from| (from != to).then(|| f(tau, from, to))).collect())
                        .collect()
                })
                .collect()
        }
        InstanceDocument {
            index_base: 1,
            grid: GridDocument { intervals: self.horizon, unit_minutes: self.unit_minutes, origin: None },
            cities: self.cities.clone(),
            vehicles: self.vehicles.clone(),
            costs: dense(slices, n, &self.cost),
            raw_minutes: None,
            durations: Some(dense(slices, n, &self.duration)),
            stay_minutes: None,
            stay_durations: self
                .kind
                .has_states()
                .then(|| (1..=slices).map(|tau| (1..=n).map(|a| (self.stay)(tau, a)).collect()).collect()),
            variations: self.variation.as_ref().map(|f| dense(slices, n, f)),
            windows: self.windows.clone(),
            model_kind: self.kind,
            capacity_dims: self.capacity_dims,
        }
    }

    pub fn build(&self) -> Result<Instance, InstanceError> {
        Instance::from_document(self.document())
    }
}

/// A delivery day: one depot, six customers with time windows, three
/// vehicles and two hours split into 15-minute intervals. Costs are travel
/// minutes between fixed positions, 20% slower during intervals 3 to 5.
/// Every leg fits in one interval. The windows close several exact arrival
/// slots, so good plans include legs that wait for a window to open.
pub fn windowed_delivery_instance() -> Instance {
    const POSITIONS: [(f64, f64); 7] = [(0.0, 0.0), (3.0, 4.0), (6.0, 1.0), (-4.0, 3.0), (-6.0, -2.0), (2.0, -6.0), (7.0, -4.0)];
    const WINDOWS: [(usize, usize, usize); 6] = [(2, 5, 8), (3, 2, 6), (4, 2, 7), (5, 7, 8), (6, 4, 8), (7, 7, 8)];
    let minutes = |tau: usize, from: usize, to: usize| {
        let (p, q) = (POSITIONS[from - 1], POSITIONS[to - 1]);
        let rush = if (3..=5).contains(&tau) { 1.2 } else { 1.0 };
        ((p.0 - q.0).hypot(p.1 - q.1) * rush * 10.0).round() / 10.0
    };
    let mut b = InstanceBuilder::new(ModelKind::TsVrp, 8, 7)
        .labels(&["depot", "c1", "c2", "c3", "c4", "c5", "c6"])
        .unit_minutes(15.0)
        .vehicle(1, None)
        .vehicle(1, None)
        .vehicle(1, None)
        .costs(minutes)
        .time_window(1, 1..=1);
    for (city, open, close) in WINDOWS {
        b = b.time_window(city, open..=close);
    }
    b.build().expect("reference instance is valid")
}

/// Size limits for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub kind: ModelKind,
    pub max_cities: usize,
    pub max_horizon: usize,
    pub max_vehicles: usize,
    pub max_duration: u32,
    pub max_cost: f64,
    /// Probability of closing each `(vehicle, tau, city)` triple.
    pub window_density: f64,
}

impl RandomSpec {
    pub fn small(kind: ModelKind) -> Self {
        Self { kind, max_cities: 6, max_horizon: 6, max_vehicles: 2, max_duration: 3, max_cost: 20.0, window_density: 0.1 }
    }
}

/// A valid random instance within the given limits.
pub fn random_instance(rng: &mut impl Rng, spec: &RandomSpec) -> Instance {
    loop {
        let n = rng.gen_range(2..=spec.max_cities.max(2));
        let t = rng.gen_range(2..=spec.max_horizon.max(2));
        let k = rng.gen_range(1..=spec.max_vehicles.max(1));
        let mut b = InstanceBuilder::new(spec.kind, t, n).unit_minutes(10.0);
        let m = if spec.kind.has_capacity() { rng.gen_range(1..=2) } else { 0 };
        for _ in 0..k {
            let start = rng.gen_range(1..=n);
            let end = if rng.gen_bool(0.3) {
                let e = rng.gen_range(1..=n);
                (e != start).then_some(e)
            } else {
                None
            };
            if m > 0 {
                let q: Vec<i64> = (0..m).map(|_| rng.gen_range(-1..=0)).collect();
                let big_q: Vec<i64> = q.iter().map(|x| x + rng.gen_range(0..=2)).collect();
                b = b.capacitated_vehicle(start, end, q, big_q, None);
            } else {
                b = b.vehicle(start, end);
            }
        }
        let slices = t - 1;
        let costs: Vec<f64> = (0..slices * n * n)
            .map(|_| if rng.gen_bool(0.5) { rng.gen_range(0..=spec.max_cost as i64) as f64 } else { rng.gen_range(0.0..spec.max_cost) })
            .collect();
        let durations: Vec<u32> = (0..slices * n * n).map(|_| rng.gen_range(1..=spec.max_duration.max(1))).collect();
        let stays: Vec<u32> = (0..slices * n).map(|_| rng.gen_range(1..=2)).collect();
        let variations: Vec<Vec<i64>> = (0..slices * n * n).map(|_| (0..m).map(|_| rng.gen_range(-1..=1)).collect()).collect();
        let idx = move |tau: usize, from: usize, to: usize| ((tau - 1) * n + (from - 1)) * n + (to - 1);
        b = b
            .costs(move |tau, from, to| costs[idx(tau, from, to)])
            .durations(move |tau, from, to| durations[idx(tau, from, to)])
            .stays(move |tau, a| stays[(tau - 1) * n + (a - 1)]);
        if m > 0 {
            b = b.variations(move |tau, from, to| variations[idx(tau, from, to)].clone());
        }
        for v in 1..=k {
            for tau in 2..=t {
                for a in 1..=n {
                    if rng.gen_bool(spec.window_density) {
                        b = b.forbid(v, tau, a);
                    }
                }
            }
        }
        if let Ok(inst) = b.build() {
            if build_catalogue(&inst).is_ok() {
                return inst;
            }
        }
    }
}
