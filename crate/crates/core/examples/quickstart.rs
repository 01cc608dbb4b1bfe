//! Solves a small three-cluster instance and checks the plan.
//!
//! `cargo run --release --example quickstart -- [uavs] [power_w] [duration_s]`

use aircomp_core::benchmarks::{run_scheme, SchemeId};
use aircomp_core::orchestrator::BcdOptions;
use aircomp_core::scenario::generate_desk_scenario;
use aircomp_core::scheduling::SlotRule;
use aircomp_core::verify::{verify_outcome, Tolerances};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let uavs: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(1);
    let power: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.8);
    let duration: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30.0);
    let scenario = generate_desk_scenario(duration, uavs, power, 1).expect("valid scenario");
    for scheme in SchemeId::ALL {
        let out = run_scheme(&scenario, scheme, &BcdOptions::default()).expect("solve");
        let check = out.solve.as_ref().map(|s| {
            let rule = if scheme == SchemeId::Orthogonal { SlotRule::Orthogonal } else { SlotRule::PerUav };
            verify_outcome(&scenario, s, rule, &Tolerances::default()).ok()
        });
        println!(
            "{:<12} D* = {:>3} / {:>3}  verified: {}",
            scheme.as_str(),
            out.d_star,
            out.upper_bound,
            check.map_or("n/a".into(), |ok| ok.to_string())
        );
    }
}
