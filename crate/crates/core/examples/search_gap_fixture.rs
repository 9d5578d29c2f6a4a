//! Searches random two-state problems for one whose optimal failure
//! probability stays strictly above `2 sqrt(eta1 eta2) F` although every
//! canonical pair sits in the middle region, then prints it as a problem file.
//!
//! Usage: cargo run -p udisc-core --example search_gap_fixture [seed]

use udisc_core::bounds::{total_upper_bound, Region};
use udisc_core::canonical::canonical_pair;
use udisc_core::format::ProblemFile;
use udisc_core::random;
use udisc_core::sdp::{solve_states, SolveOptions, Status};
use udisc_core::UDProblem;

fn main() {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2024u64);
    let mut rng = random::rng(seed);
    let opts = SolveOptions::default();
    for attempt in 0..500 {
        let rho1 = random::density(&mut rng, 4, 2);
        let rho2 = random::density(&mut rng, 4, 2);
        let (eta1, eta2) = (0.5, 0.5);
        let pair = canonical_pair(&rho1, &rho2).expect("canonical pair");
        let Ok(report) = total_upper_bound(eta1, eta2, &pair) else {
            continue;
        };
        if !report.per_pair.iter().all(|p| p.region == Region::Middle) {
            continue;
        }
        let problem = UDProblem::new(vec![rho1.clone(), rho2.clone()], vec![eta1, eta2]).unwrap();
        let (_, sol) = solve_states(&problem, &opts).unwrap();
        if sol.status != Status::Optimal {
            continue;
        }
        let floor = 2.0 * (eta1 * eta2).sqrt() * pair.fidelity();
        let excess = sol.q_star - floor;
        let r = &pair.r_vectors;
        let gram = &r.adjoint() * r;
        let skew = gram[(0, 1)].norm();
        if excess > 1e-2 && skew > 1e-3 {
            eprintln!(
                "attempt {attempt}: Q* = {:.10}, floor = {floor:.10}, excess = {excess:.3e}, |<r1|r2>| = {skew:.3e}",
                sol.q_star
            );
            let file = ProblemFile::from_states(&[rho1, rho2], &[eta1, eta2]);
            println!("{}", serde_json::to_string_pretty(&file).unwrap());
            return;
        }
    }
    eprintln!("no fixture found");
    std::process::exit(1);
}
