//! Comparison schemes. Each one is the joint pipeline with blocks switched
//! off or pinned, so results stay directly comparable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::orchestrator::{bisection_solve, BcdOptions, Pipeline, SolveError, SolveOutcome};
use crate::scenario::{centroid, Point, Scenario};
use crate::scheduling::SlotRule;
use crate::trajectory::TrajectorySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    Joint,
    StaticUav,
    EqualPower,
    Orthogonal,
    UpperBound,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::Joint,
        SchemeId::StaticUav,
        SchemeId::EqualPower,
        SchemeId::Orthogonal,
        SchemeId::UpperBound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Joint => "joint",
            SchemeId::StaticUav => "static_uav",
            SchemeId::EqualPower => "equal_power",
            SchemeId::Orthogonal => "orthogonal",
            SchemeId::UpperBound => "upper_bound",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str() == key)
            .ok_or_else(|| {
                let names: Vec<_> = SchemeId::ALL.iter().map(|id| id.as_str()).collect();
                format!("unknown scheme '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// `⌊MT/(δL)⌋`: every slot of every UAV used, split evenly.
pub fn upper_bound(scenario: &Scenario) -> usize {
    scenario.max_task_count()
}

/// Hover points of the static scheme: the device centroid of each UAV's
/// cluster group.
pub fn static_positions(scenario: &Scenario) -> Vec<Point> {
    let (ll, mm) = (scenario.num_clusters(), scenario.num_uavs);
    let groups: Vec<Vec<usize>> = if mm == 2 && ll == 6 {
        vec![vec![0, 1, 5], vec![2, 3, 4]]
    } else {
        (0..mm).map(|m| (0..ll).filter(|l| l % mm == m).collect()).collect()
    };
    groups
        .iter()
        .map(|g| centroid(g.iter().flat_map(|&l| scenario.clusters[l].devices.iter().map(|d| d.position))))
        .collect()
}

pub fn pipeline_for(scenario: &Scenario, scheme: SchemeId) -> Pipeline {
    let mut p = Pipeline::default();
    match scheme {
        SchemeId::Joint | SchemeId::UpperBound => {}
        SchemeId::StaticUav => {
            p.optimize_trajectory = false;
            p.pinned = Some(TrajectorySet::hover(&static_positions(scenario), scenario.num_slots()));
        }
        SchemeId::EqualPower => p.optimize_power = false,
        SchemeId::Orthogonal => p.slot_rule = SlotRule::Orthogonal,
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeOutcome {
    pub scheme: SchemeId,
    pub d_star: usize,
    pub upper_bound: usize,
    /// Absent for the analytic upper bound.
    pub solve: Option<SolveOutcome>,
}

pub fn run_scheme(scenario: &Scenario, scheme: SchemeId, opts: &BcdOptions) -> Result<SchemeOutcome, SolveError> {
    let bound = upper_bound(scenario);
    if scheme == SchemeId::UpperBound {
        return Ok(SchemeOutcome {
            scheme,
            d_star: bound,
            upper_bound: bound,
            solve: None,
        });
    }
    let out = bisection_solve(scenario, &pipeline_for(scenario, scheme), opts)?;
    Ok(SchemeOutcome {
        scheme,
        d_star: out.d_star,
        upper_bound: bound,
        solve: Some(out),
    })
}

pub fn static_uav_solve(scenario: &Scenario, opts: &BcdOptions) -> Result<SolveOutcome, SolveError> {
    bisection_solve(scenario, &pipeline_for(scenario, SchemeId::StaticUav), opts)
}

pub fn equal_power_solve(scenario: &Scenario, opts: &BcdOptions) -> Result<SolveOutcome, SolveError> {
    bisection_solve(scenario, &pipeline_for(scenario, SchemeId::EqualPower), opts)
}

pub fn orthogonal_solve(scenario: &Scenario, opts: &BcdOptions) -> Result<SolveOutcome, SolveError> {
    bisection_solve(scenario, &pipeline_for(scenario, SchemeId::Orthogonal), opts)
}
