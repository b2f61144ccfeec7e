//! Decoding bitstrings into route plans, checking them against the
//! instance, and a brute-force optimum for comparison.

mod feasibility;
mod oracle;
mod plan;
mod stats;

use thiserror::Error;

use crate::hamiltonian::PenaltyParameters;
use crate::instance::Instance;

pub use feasibility::{
    check_feasibility, end_reachable, pair_rule, window_forced, CheckMode, CheckOptions, FeasibilityReport, Violation,
    ViolationKind,
};
pub use oracle::{enumerate_optimal_routes, Objective, OracleError, OracleLimits, OracleOptions, OracleResult};
pub use plan::{decode, encode, Clash, DecodeError, EncodeError, Event, Leg, LegKind, RoutePlan, VehicleRoute, Visit};
pub use stats::{stats, SampleRow, SolveStats};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("plan is infeasible: {}", .0.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InfeasiblePlan(pub FeasibilityReport);

/// Sum of `d` over the travel legs of a plan, charged at each leg's departure interval.
pub fn leg_cost(plan: &RoutePlan, inst: &Instance) -> f64 {
    plan.legs()
        .iter()
        .filter(|l| l.kind == LegKind::Travel && l.depart < inst.horizon())
        .map(|l| inst.costs.get(l.depart, l.from, l.to))
        .sum()
}

/// [`leg_cost`] of a plan that passes the window-tolerant check.
pub fn route_cost(plan: &RoutePlan, inst: &Instance) -> Result<f64, InfeasiblePlan> {
    let report = check_feasibility(plan, inst, &CheckOptions::default());
    if report.is_feasible() {
        Ok(leg_cost(plan, inst))
    } else {
        Err(InfeasiblePlan(report))
    }
}

/// The energy a plan is expected to have: `(d - mu) / rho` per exact travel
/// leg and `(0 - mu) / rho` per exact stay. Legs stretched by a window earn nothing.
pub fn shifted_cost(plan: &RoutePlan, inst: &Instance, params: &PenaltyParameters) -> f64 {
    let mut total = 0.0;
    for l in plan.legs() {
        if l.depart >= inst.horizon() {
            continue;
        }
        match l.kind {
            LegKind::Travel => {
                if l.arrive - l.depart == inst.durations.travel(l.depart, l.from, l.to) {
                    total += params.cost_coefficient(inst.costs.get(l.depart, l.from, l.to));
                }
            }
            LegKind::Stay => {
                if Some(l.arrive - l.depart) == inst.durations.stay(l.depart, l.from) {
                    total += params.cost_coefficient(0.0);
                }
            }
        }
    }
    total
}
