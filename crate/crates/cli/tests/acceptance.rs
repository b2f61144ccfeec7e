//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any of them fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsvrp_core::generate::{random_instance, windowed_delivery_instance, InstanceBuilder, RandomSpec};
use tsvrp_core::hamiltonian::{build_model, instance_parameters, BuildOptions, BuiltModel};
use tsvrp_core::instance::{Instance, ModelKind};

use tsvrp_core::route::{
    check_feasibility, decode, enumerate_optimal_routes, shifted_cost, stats, window_forced, CheckOptions, LegKind, Objective, OracleOptions,
    RoutePlan,
};
use tsvrp_core::qubo::QuboModel;
use tsvrp_core::sampler::{exhaustive_solve, simulated_anneal, AnnealSchedule, SampleSet};

const ENERGY_TOL: f64 = 1e-9;
const MAX_FREE: usize = 22;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Designed instances
//
// City 1 is the only depot and every vehicle starts there. Customer legs
// cost 11..=15 and legs back into the depot cost 20, so every useful leg
// earns a reward and covering all customers beats returning. The cheapest
// entry, 0, sits on a leg leaving a customer at tau = 1, which no route can
// use; useful rewards therefore stay below lambda / 2 and an extra event
// never pays for the penalty it triggers. Travel durations satisfy
// max < 2 * min, so no two non-consecutive events are ever one leg apart.

fn leg_costs(rng: &mut ChaCha8Rng, slices: usize, n: usize) -> impl Fn(usize, usize, usize) -> f64 + 'static {
    let table: Vec<f64> = (0..slices * n * n).map(|_| rng.gen_range(11..=15) as f64).collect();
    move |tau, from, to| match (tau, from, to) {
        (_, _, 1) => 20.0,
        (1, 2, _) => 0.0,
        _ => table[((tau - 1) * n + from - 1) * n + to - 1],
    }
}

fn vrp_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // one vehicle, unit durations
    for (n, t) in [(4, 4), (4, 4), (5, 5), (5, 5), (4, 5)] {
        let costs = leg_costs(&mut rng, t - 1, n);
        out.push(InstanceBuilder::new(ModelKind::TsVrp, t, n).vehicle(1, None).costs(costs).build().unwrap());
    }
    // two vehicles sharing the depot
    for _ in 0..2 {
        let costs = leg_costs(&mut rng, 2, 4);
        out.push(InstanceBuilder::new(ModelKind::TsVrp, 3, 4).vehicle(1, None).vehicle(1, None).costs(costs).build().unwrap());
    }
    // durations of 2 or 3 intervals
    for _ in 0..2 {
        let costs = leg_costs(&mut rng, 6, 3);
        let dur: Vec<u32> = (0..6 * 9).map(|_| rng.gen_range(2..=3)).collect();
        out.push(
            InstanceBuilder::new(ModelKind::TsVrp, 7, 3)
                .vehicle(1, None)
                .costs(costs)
                .durations(move |tau, from, to| dur[((tau - 1) * 3 + from - 1) * 3 + to - 1])
                .build()
                .unwrap(),
        );
    }
    // a window closes the exact arrival slot, forcing a longer leg
    let costs = leg_costs(&mut rng, 4, 3);
    out.push(InstanceBuilder::new(ModelKind::TsVrp, 5, 3).vehicle(1, None).costs(costs).forbid(1, 2, 2).forbid(1, 2, 3).build().unwrap());
    // a customer that opens late
    let costs = leg_costs(&mut rng, 4, 4);
    out.push(InstanceBuilder::new(ModelKind::TsVrp, 5, 4).vehicle(1, None).costs(costs).time_window(2, 4..=5).build().unwrap());
    out
}

fn mcvrp_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // pickups of one unit, capacity two
    for _ in 0..2 {
        let costs = leg_costs(&mut rng, 2, 3);
        out.push(
            InstanceBuilder::new(ModelKind::TsMcvrp, 3, 3)
                .capacitated_vehicle(1, None, vec![0], vec![2], None)
                .costs(costs)
                .variations(|_, _, to| vec![if to == 1 { -1 } else { 1 }])
                .build()
                .unwrap(),
        );
    }
    // the direct leg to customer 3 loads two units, so 1 -> 3 -> 2 overflows
    for _ in 0..2 {
        let costs = leg_costs(&mut rng, 2, 3);
        out.push(
            InstanceBuilder::new(ModelKind::TsMcvrp, 3, 3)
                .capacitated_vehicle(1, None, vec![0], vec![2], None)
                .costs(costs)
                .variations(|_, from, to| vec![match (from, to) {
                    (_, 1) => -2,
                    (1, 3) => 2,
                    _ => 1,
                }])
                .build()
                .unwrap(),
        );
    }
    // deliveries from a full vehicle
    let costs = leg_costs(&mut rng, 3, 3);
    out.push(
        InstanceBuilder::new(ModelKind::TsMcvrp, 4, 3)
            .capacitated_vehicle(1, None, vec![0], vec![1], Some(vec![1]))
            .costs(costs)
            .variations(|_, from, to| vec![if from == 1 && to != 1 { -1 } else { 0 }])
            .build()
            .unwrap(),
    );
    out
}

fn svrp_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..3 {
        let costs = leg_costs(&mut rng, 3, 3);
        out.push(InstanceBuilder::new(ModelKind::TsSvrp, 4, 3).vehicle(1, None).costs(costs).build().unwrap());
    }
    // stays of one or two intervals, fixed per city: a stay that shrinks
    // over time lets a second, later arrival share the departure for free
    for _ in 0..2 {
        let costs = leg_costs(&mut rng, 4, 3);
        let stays: Vec<u32> = (0..3).map(|_| rng.gen_range(1..=2)).collect();
        out.push(
            InstanceBuilder::new(ModelKind::TsSvrp, 5, 3)
                .vehicle(1, None)
                .costs(costs)
                .stays(move |_, a| stays[a - 1])
                .time_window(1, 1..=1)
                .build()
                .unwrap(),
        );
    }
    // two-state with a separate end depot
    let costs = leg_costs(&mut rng, 4, 3);
    out.push(InstanceBuilder::new(ModelKind::TsSvrp, 5, 3).vehicle(1, Some(3)).costs(move |tau, from, to| if to == 3 { 2.0 } else { costs(tau, from, to) }).time_window(1, 1..=1).build().unwrap());
    out
}

struct Solved {
    inst: Instance,
    built: BuiltModel,
    samples: SampleSet,
}

fn solve_designed() -> Result<Vec<Solved>, String> {
    let mut all = Vec::new();
    for inst in vrp_instances().into_iter().chain(mcvrp_instances()).chain(svrp_instances()) {
        let params = instance_parameters(&inst, 1.0, 0.0, None).map_err(|e| e.to_string())?;
        let built = build_model(&inst, &params, &BuildOptions::default()).map_err(|e| e.to_string())?;
        let n = built.model.num_vars();
        ensure(n <= MAX_FREE, || format!("{:?} instance has {n} free variables", inst.model_kind))?;
        let samples = exhaustive_solve(&built.model).map_err(|e| e.to_string())?;
        all.push(Solved { inst, built, samples });
    }
    Ok(all)
}

fn ground_plans(s: &Solved) -> Result<Vec<(RoutePlan, f64)>, String> {
    s.samples
        .ground_states(ENERGY_TOL)
        .map(|r| decode(&r.bits, &s.built.catalogue).map(|p| (p, r.energy)).map_err(|e| e.to_string()))
        .collect()
}

// ---------------------------------------------------------------------------
// Criteria

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let kinds = [ModelKind::TsVrp, ModelKind::TsMcvrp, ModelKind::TsSvrp, ModelKind::TsMcsvrp];
    let lambda = 3.0;
    let mut checked = 0usize;
    for i in 0..100 {
        let inst = random_instance(&mut rng, &RandomSpec::small(kinds[i % kinds.len()]));
        let params = instance_parameters(&inst, lambda, 0.0, None).map_err(|e| e.to_string())?;
        let built = build_model(&inst, &params, &BuildOptions::default()).map_err(|e| e.to_string())?;
        for t in built.terms.terms() {
            if t.family.is_penalty() {
                ensure((t.coeff - lambda).abs() <= 1e-12, || format!("instance {i}: penalty {} on {:?}", t.coeff, t.family))?;
            } else {
                ensure(t.coeff >= -lambda - 1e-12 && t.coeff <= 1e-12, || {
                    format!("instance {i}: cost coefficient {} on {:?}", t.coeff, t.family)
                })?;
            }
            checked += 1;
        }
    }
    Ok(format!("100 instances, {checked} terms"))
}

fn criterion_2(solved: &[Solved]) -> Outcome {
    ensure(solved.len() >= 20, || format!("only {} instances", solved.len()))?;
    for (i, s) in solved.iter().enumerate() {
        let opts = OracleOptions { objective: Objective::Shifted(s.built.params), ..OracleOptions::default() };
        let oracle = enumerate_optimal_routes(&s.inst, &opts).map_err(|e| e.to_string())?;
        let ground = ground_plans(s).map_err(|e| format!("instance {i}: {e}"))?;
        let from_energy: BTreeSet<RoutePlan> = ground.iter().map(|(p, _)| p.clone()).collect();
        let from_oracle: BTreeSet<RoutePlan> = oracle.plans.iter().cloned().collect();
        ensure(from_energy == from_oracle, || {
            format!(
                "instance {i} ({:?}): {} ground states vs {} oracle plans\nground: {:?}\noracle: {:?}",
                s.inst.model_kind,
                from_energy.len(),
                from_oracle.len(),
                from_energy.iter().next(),
                from_oracle.iter().next()
            )
        })?;
        for (p, e) in &ground {
            let expected = shifted_cost(p, &s.inst, &s.built.params);
            ensure((e - expected).abs() <= ENERGY_TOL, || format!("instance {i}: energy {e} vs leg sum {expected}"))?;
        }
        let best = oracle.best.unwrap_or(f64::NAN);
        ensure((ground[0].1 - best).abs() <= ENERGY_TOL, || format!("instance {i}: energy {} vs oracle {best}", ground[0].1))?;
    }
    let kinds: BTreeSet<&str> = solved.iter().map(|s| s.inst.model_kind.as_str()).collect();
    Ok(format!("{} instances ({})", solved.len(), kinds.into_iter().collect::<Vec<_>>().join(", ")))
}

fn criterion_3(solved: &[Solved]) -> Outcome {
    for (i, s) in solved.iter().enumerate() {
        let min = s.samples.lowest_energy().ok_or("no samples")?;
        let next = s.samples.metadata.next_energy;
        ensure(next.is_none_or(|n| n > min + ENERGY_TOL), || format!("instance {i}: no gap above the minimum"))?;
        // the exhaustive set holds every assignment at the minimum, so all
        // others are strictly higher; each minimum must decode and be feasible
        for r in s.samples.ground_states(ENERGY_TOL) {
            let plan = decode(&r.bits, &s.built.catalogue).map_err(|e| format!("instance {i}: {e}"))?;
            let report = check_feasibility(&plan, &s.inst, &CheckOptions::default());
            ensure(report.violations.is_empty(), || format!("instance {i}: ground state has {:?}", report.kinds()))?;
        }
    }
    Ok(format!("{} instances fully enumerated", solved.len()))
}

fn criterion_4() -> Outcome {
    let inst = windowed_delivery_instance();
    let params = instance_parameters(&inst, 1.0, 0.0, None).map_err(|e| e.to_string())?;
    let built = build_model(&inst, &params, &BuildOptions::default()).map_err(|e| e.to_string())?;
    let schedule = AnnealSchedule::for_lambda(1.0, 1000, 10_000, 2024);
    let samples = simulated_anneal(&built.model, &schedule).map_err(|e| e.to_string())?;
    let s = stats(&samples, &built.catalogue, &inst, &CheckOptions::default());
    let oracle = enumerate_optimal_routes(&inst, &OracleOptions::default()).map_err(|e| e.to_string())?;
    let optimum = oracle.best.ok_or("oracle found no feasible plan")?;
    let best = s.best_feasible_cost.ok_or("no feasible sample")?;
    ensure(s.feasible_rate > 0.25, || format!("feasible rate {}", s.feasible_rate))?;
    ensure((best - optimum).abs() <= ENERGY_TOL, || format!("best feasible cost {best}, oracle optimum {optimum}"))?;
    let plan = s.best_feasible_plan.as_ref().ok_or("no feasible plan")?;
    let detours: Vec<String> = plan
        .legs()
        .iter()
        .filter(|l| l.kind == LegKind::Travel)
        .filter(|l| l.arrive - l.depart > inst.durations.travel(l.depart, l.from, l.to))
        .filter(|l| window_forced(&inst, l.vehicle, l.depart, l.from, l.to))
        .map(|l| format!("{}->{} departing {} arriving {}", inst.cities[l.from - 1], inst.cities[l.to - 1], l.depart, l.arrive))
        .collect();
    ensure(!detours.is_empty(), || "best plan has no window-forced detour".into())?;
    Ok(format!(
        "{} free variables, feasible rate {:.4}, best cost {best} = oracle {optimum}, detour {}",
        built.model.num_vars(),
        s.feasible_rate,
        detours[0]
    ))
}

fn criterion_5(solved: &[Solved]) -> Outcome {
    let mut trajectories = 0;
    for (i, s) in solved.iter().enumerate().filter(|(_, s)| s.inst.model_kind == ModelKind::TsMcvrp) {
        for (plan, _) in ground_plans(s)? {
            for route in &plan.routes {
                let v = s.inst.vehicle(route.vehicle);
                for e in &route.events {
                    ensure(v.within_bounds(&e.capacity), || format!("instance {i}: load {:?} out of bounds", e.capacity))?;
                }
                for w in route.events.windows(2) {
                    let b = s.inst.variation(w[0].tau, w[0].city, w[1].city);
                    let expected: Vec<i64> = w[0].capacity.iter().zip(b).map(|(c, b)| c + b).collect();
                    ensure(w[1].capacity == expected, || {
                        format!("instance {i}: load {:?} -> {:?}, expected {:?}", w[0].capacity, w[1].capacity, expected)
                    })?;
                }
                trajectories += 1;
            }
        }
    }
    ensure(trajectories > 0, || "no capacitated ground states".into())?;
    Ok(format!("{trajectories} trajectories"))
}

fn criterion_6(solved: &[Solved]) -> Outcome {
    let mut stays = 0;
    for (i, s) in solved.iter().enumerate().filter(|(_, s)| s.inst.model_kind == ModelKind::TsSvrp) {
        for (plan, _) in ground_plans(s)? {
            for route in &plan.routes {
                for w in route.events.windows(2) {
                    ensure(w[0].state != w[1].state, || format!("instance {i}: two {:?} events in a row", w[0].state))?;
                }
            }
            for leg in plan.legs().iter().filter(|l| l.kind == LegKind::Stay) {
                let n = s.inst.stay_time(leg.depart, leg.from);
                ensure(n == Some(leg.arrive - leg.depart), || format!("instance {i}: stay {leg:?} against {n:?}"))?;
                stays += 1;
            }
        }
    }
    ensure(stays > 0, || "no stays in any ground state".into())?;
    Ok(format!("{stays} stays"))
}


fn random_terms(rng: &mut ChaCha8Rng, n: usize) -> (f64, Vec<(usize, f64)>, Vec<(usize, usize, f64)>) {
    let constant = rng.gen_range(-2.0..2.0);
    let linear = (0..n).filter_map(|i| rng.gen_bool(0.7).then(|| (i, rng.gen_range(-3.0..3.0)))).collect();
    let mut quadratic = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.4) {
                quadratic.push((i, j, rng.gen_range(-3.0..3.0)));
            }
        }
    }
    (constant, linear, quadratic)
}

/// Straight double loop over a dense upper-triangular matrix.
fn naive_energy(n: usize, terms: &(f64, Vec<(usize, f64)>, Vec<(usize, usize, f64)>), bits: &[bool]) -> f64 {
    let mut q = vec![vec![0.0; n]; n];
    for &(i, c) in &terms.1 {
        q[i][i] += c;
    }
    for &(i, j, c) in &terms.2 {
        q[i][j] += c;
    }
    let mut e = terms.0;
    for i in 0..n {
        for j in i..n {
            if bits[i] && bits[j] {
                e += q[i][j];
            }
        }
    }
    e
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = rng.gen_range(1..=40);
        let terms = random_terms(&mut rng, n);
        let model = QuboModel::from_terms(n, terms.0, &terms.1, &terms.2).map_err(|e| e.to_string())?;
        let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let fast = model.energy(&bits).map_err(|e| e.to_string())?;
        let slow = naive_energy(n, &terms, &bits);
        worst = worst.max((fast - slow).abs());
        ensure((fast - slow).abs() <= 1e-12, || format!("pair {k}: {fast} vs {slow}"))?;
    }
    let mut assignments = 0;
    for m in 0..10 {
        let n = rng.gen_range(1..=10);
        let terms = random_terms(&mut rng, n);
        let model = QuboModel::from_terms(n, terms.0, &terms.1, &terms.2).map_err(|e| e.to_string())?;
        let ising = model.to_ising();
        for mask in 0u32..1 << n {
            let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let spins: Vec<i8> = bits.iter().map(|&b| if b { 1 } else { -1 }).collect();
            let (q, s) = (model.energy(&bits).map_err(|e| e.to_string())?, ising.energy(&spins));
            ensure((q - s).abs() <= 1e-12, || format!("model {m}, assignment {mask:b}: {q} vs ising {s}"))?;
            assignments += 1;
        }
    }
    Ok(format!("1000 random pairs (max deviation {worst:e}), {assignments} Ising assignments"))
}

fn run_solve(dir: &std::path::Path, instance: &std::path::Path, tag: &str) -> Result<Vec<Vec<u8>>, String> {
    let out = dir.join(tag);
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_tsvrp"))
        .arg("solve")
        .arg("--instance")
        .arg(instance)
        .args(["--sampler", "sa", "--sweeps", "300", "--restarts", "200", "--seed", "99", "--lambda", "2"])
        .arg("--out")
        .arg(&out)
        .env_remove("TSVRP_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.code().is_some_and(|c| c <= 1), || {
        format!("solve failed: {}", String::from_utf8_lossy(&status.stderr))
    })?;
    ["samples.json", "stats.json", "stats.csv"]
        .iter()
        .map(|suffix| std::fs::read(dir.join(format!("{tag}.{suffix}"))).map_err(|e| e.to_string()))
        .collect()
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let instance = dir.path().join("instance.json");
    std::fs::write(&instance, windowed_delivery_instance().to_json()).map_err(|e| e.to_string())?;
    let first = run_solve(dir.path(), &instance, "run")?;
    let second = run_solve(dir.path(), &instance, "run")?;
    ensure(first == second, || "outputs differ between runs".into())?;
    let bytes: usize = first.iter().map(Vec::len).sum();
    Ok(format!("samples, stats and csv identical ({bytes} bytes)"))
}

fn report(id: usize, title: &str, start: Instant, limit: Duration, outcome: Outcome) -> bool {
    let elapsed = start.elapsed();
    let outcome = outcome.and_then(|m| {
        if elapsed > limit {
            Err(format!("{m}; took {elapsed:.1?}, limit {limit:?}"))
        } else {
            Ok(m)
        }
    });
    match outcome {
        Ok(m) => {
            println!("criterion {id} PASS  {title}: {m} [{elapsed:.2?}]");
            true
        }
        Err(m) => {
            println!("criterion {id} FAIL  {title}: {m} [{elapsed:.2?}]");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    let t = Instant::now();
    ok &= report(1, "parameter-policy range", t, Duration::from_secs(10), criterion_1());

    let t = Instant::now();
    let solved = solve_designed();
    let on_solved = |f: fn(&[Solved]) -> Outcome| solved.as_ref().map_err(Clone::clone).and_then(|s| f(s));
    let c2 = on_solved(criterion_2);
    let c3 = on_solved(criterion_3);
    ok &= report(2, "exhaustive oracle equivalence", t, Duration::from_secs(120), c2);
    ok &= report(3, "ground-state feasibility separation", t, Duration::from_secs(120), c3);

    let t = Instant::now();
    ok &= report(4, "windowed delivery run", t, Duration::from_secs(300), criterion_4());
    let t = Instant::now();
    ok &= report(5, "capacity trajectories", t, Duration::from_secs(60), on_solved(criterion_5));
    let t = Instant::now();
    ok &= report(6, "two-state transitions", t, Duration::from_secs(60), on_solved(criterion_6));
    let t = Instant::now();
    ok &= report(7, "energy evaluation consistency", t, Duration::from_secs(60), criterion_7());
    let t = Instant::now();
    ok &= report(8, "determinism", t, Duration::from_secs(120), criterion_8());

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
