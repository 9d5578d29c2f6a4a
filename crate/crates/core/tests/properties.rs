use proptest::prelude::*;

use udisc_core::bounds::{
    pair_bound, table1_bounds, total_upper_bound, total_upper_bound_gram, RankTwoAngles,
};
use udisc_core::canonical::{
    canonical_pair, fidelity, gram_canonical, reduce_two_state_problem, reduced_gram,
};
use udisc_core::gram::{apply_unitary_freedom, build_block_gram, BlockGram};
use udisc_core::numerics::ComplexMatrix;
use udisc_core::random;
use udisc_core::sdp::{formulate, solve, solve_states, SolveOptions, Status};
use udisc_core::synthesis::{extract_povm, realize, verify_outputs};
use udisc_core::UDProblem;

fn solve_p(x: BlockGram, priors: &[f64]) -> f64 {
    let sol = solve(&formulate(x, priors).unwrap(), &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    sol.p_star
}

fn random_pair(seed: u64, dim: usize, r1: usize, r2: usize) -> UDProblem {
    let mut rng = random::rng(seed);
    let a = random::density(&mut rng, dim, r1.min(dim));
    let b = random::density(&mut rng, dim, r2.min(dim));
    let (e1, e2) = random::priors_pair(&mut rng, 0.05);
    UDProblem::new(vec![a, b], vec![e1, e2]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pair_bound_is_continuous_and_bounded(
        r in 0.05f64..1.0, s in 0.05f64..1.0, frac in 0.0f64..1.0, eta1 in 0.01f64..0.99,
    ) {
        let f = frac * (r * s).sqrt();
        let (_, p) = pair_bound(eta1, 1.0 - eta1, r, s, f).unwrap();
        prop_assert!(p >= -1e-15);
        prop_assert!(p <= eta1 * r + (1.0 - eta1) * s + 1e-15);
        if f > 0.0 {
            for x in [f / r, s / f] {
                let e2 = 1.0 / (1.0 + x * x);
                let e1 = 1.0 - e2;
                let (_, a) = pair_bound(e1, e2, r, s, f).unwrap();
                let lo = x * (1.0 - 1e-9);
                let l2 = 1.0 / (1.0 + lo * lo);
                let (_, b) = pair_bound(1.0 - l2, l2, r, s, f).unwrap();
                prop_assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn table1_columns_dominate(c1 in 0.01f64..0.98, gap in 0.0f64..1.0, x in 0.0f64..20.0) {
        let c2 = c1 + gap * (0.99 - c1);
        let a = RankTwoAngles::from_cosines(c1, c2).unwrap();
        let e = table1_bounds(a, x).unwrap();
        prop_assert!(e.p <= e.p_ra + 1e-12);
        prop_assert!(e.p <= e.p_ru + 1e-12);
        if e.region == 3 {
            prop_assert!((e.p - e.p_ra).abs() < 1e-12 && (e.p - e.p_ru).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_cosines_make_columns_equal(cv in 0.01f64..0.99, x in 0.0f64..20.0) {
        let e = table1_bounds(RankTwoAngles::from_cosines(cv, cv).unwrap(), x).unwrap();
        prop_assert!((e.p - e.p_ra).abs() < 1e-12 && (e.p - e.p_ru).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed in any::<u64>(), dim in 2usize..5, r1 in 1usize..4, r2 in 1usize..4) {
        let p = random_pair(seed, dim, r1, r2);
        let (a, b) = (&p.states()[0], &p.states()[1]);
        let fab = fidelity(a, b).unwrap();
        let fba = fidelity(b, a).unwrap();
        prop_assert!((fab - fba).abs() < 1e-10);
        prop_assert!((-1e-12..=1.0 + 1e-10).contains(&fab));
        prop_assert!((fidelity(a, a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn canonical_values_survive_unitary_freedom(seed in any::<u64>(), dim in 2usize..5) {
        let p = random_pair(seed, dim, 2, 2);
        let x = build_block_gram(&p.spectral_ensembles().unwrap()).unwrap();
        let mut rng = random::rng(seed ^ 0x5eed);
        let us: Vec<ComplexMatrix> = x.blocks().iter().map(|&n| random::unitary(&mut rng, n)).collect();
        let g0 = gram_canonical(&x).unwrap();
        let g1 = gram_canonical(&apply_unitary_freedom(&x, &us).unwrap()).unwrap();
        for (a, b) in g0.f.iter().zip(&g1.f) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pure_pair_matches_closed_form(r in 0.1f64..1.0, s in 0.1f64..1.0, frac in 0.0f64..0.99, eta1 in 0.05f64..0.95) {
        let f = frac * (r * s).sqrt();
        let x = BlockGram::new(vec![1, 1], ComplexMatrix::from_real_rows(&[&[r, f], &[f, s]])).unwrap();
        let p = solve_p(x, &[eta1, 1.0 - eta1]);
        let (_, closed) = pair_bound(eta1, 1.0 - eta1, r, s, f).unwrap();
        prop_assert!((p - closed).abs() < 1e-6, "{} vs {}", p, closed);
    }

    #[test]
    fn optimum_is_bounded(seed in any::<u64>(), dim in 2usize..5, r1 in 1usize..3, r2 in 1usize..3) {
        let p = random_pair(seed, dim, r1, r2);
        let (sdp, sol) = solve_states(&p, &SolveOptions::default()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!(sol.p_star <= 1.0 + 1e-8);
        prop_assert!((sol.p_star + sol.q_star - 1.0).abs() < 1e-10);
        let g = gram_canonical(sdp.x()).unwrap();
        if g.t > 0 {
            let bound = total_upper_bound_gram(p.priors()[0], p.priors()[1], &g).unwrap();
            prop_assert!(sol.p_star <= bound.full_bound + 1e-8);
        }
    }

    #[test]
    fn more_coupling_never_helps(seed in any::<u64>(), dim in 2usize..4, lam in 0.0f64..1.0) {
        let p = random_pair(seed, dim, 1 + (seed % 2) as usize, 2);
        let x = build_block_gram(&p.spectral_ensembles().unwrap()).unwrap();
        let n1 = x.blocks()[0];
        let scaled = |l: f64| {
            let mut m = x.matrix().clone();
            for i in 0..x.dim() {
                for j in 0..x.dim() {
                    if (i < n1) != (j < n1) {
                        m[(i, j)] *= l;
                    }
                }
            }
            BlockGram::new(x.blocks().to_vec(), m).unwrap()
        };
        let lo = solve_p(scaled(lam), p.priors());
        let hi = solve_p(scaled(1.0), p.priors());
        prop_assert!(hi <= lo + 1e-7, "P(1) = {} > P({}) = {}", hi, lam, lo);
    }

    #[test]
    fn reduction_is_exact(seed in any::<u64>(), dim in 2usize..5, r1 in 1usize..4, r2 in 1usize..4) {
        let p = random_pair(seed, dim, r1, r2);
        let (a, b) = (&p.states()[0], &p.states()[1]);
        let (e1, e2) = (p.priors()[0], p.priors()[1]);
        let (_, full) = solve_states(&p, &SolveOptions::default()).unwrap();
        let red = reduce_two_state_problem(a, b, e1, e2).unwrap();
        let lifted = match &red.reduced {
            Some(q) => red.lift(solve_states(q, &SolveOptions::default()).unwrap().1.p_star),
            None => red.leftover,
        };
        prop_assert!((lifted - full.p_star).abs() < 1e-6, "{} vs {}", lifted, full.p_star);
    }

    #[test]
    fn reduced_optimum_below_pair_bound(seed in any::<u64>(), dim in 2usize..5) {
        let p = random_pair(seed, dim, 2, 2);
        let pair = canonical_pair(&p.states()[0], &p.states()[1]).unwrap();
        if pair.t > 0 {
            let (e1, e2) = (p.priors()[0], p.priors()[1]);
            let opt = solve_p(reduced_gram(&pair).unwrap(), &[e1, e2]);
            let rep = total_upper_bound(e1, e2, &pair).unwrap();
            prop_assert!(opt <= rep.total + 1e-8);
        }
    }

    #[test]
    fn realization_round_trip(seed in any::<u64>(), dim in 2usize..4, n in 2usize..4) {
        let mut rng = random::rng(seed);
        let states = (0..n).map(|k| random::density(&mut rng, dim, 1 + k % 2)).collect();
        let problem = UDProblem::new(states, vec![1.0 / n as f64; n]).unwrap();
        let ens = problem.spectral_ensembles().unwrap();
        let (sdp, sol) = solve_states(&problem, &SolveOptions::default()).unwrap();
        let real = realize(sdp.x(), &sol.y, &ens).unwrap();
        let report = verify_outputs(&real);
        prop_assert!(report.pass, "{:?}", report);
        let povm = extract_povm(&real).unwrap();
        let p = povm.success_probability(problem.states(), problem.priors());
        prop_assert!((p - sol.p_star).abs() < 1e-7);
    }
}
