use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn unit2() -> Vec<SubcarrierStats> {
    vec![SubcarrierStats::unit(); 2]
}

fn random_stats(rng: &mut ChaCha8Rng, width: usize) -> Vec<SubcarrierStats> {
    (0..width)
        .map(|_| SubcarrierStats {
            mu1: rng.random_range(0.5..5.0),
            mu2: rng.random_range(0.5..5.0),
            eta1: rng.random_range(0.5..5.0),
            eta2: rng.random_range(0.5..5.0),
        })
        .collect()
}

#[test]
fn feasibility_examples() {
    let c = SystemConfig { psi_th: 1.0, pt_max: 1e-9, pr_max: 1e-9, ..SystemConfig::default() };
    assert!(feasibility_check(&unit2(), &c).unwrap().feasible);
    let tiny = SystemConfig { pt_max: 1e-9, ..SystemConfig::default() };
    assert!(!feasibility_check(&unit2(), &tiny).unwrap().feasible);
    let f = feasibility_check(&unit2(), &SystemConfig::default()).unwrap();
    assert!(f.feasible, "{f:?}");
    assert!(f.achieved_outage < 1e-3);
}

#[test]
fn infeasible_problem_is_reported() {
    let c = SystemConfig { pt_max: 1.0, pr_max: 1.0, ..SystemConfig::default() };
    assert!(matches!(solve(&unit2(), &c, 0.1), Err(Error::Infeasible { .. })));
    assert_eq!(solve(&unit2(), &c, 0.1).unwrap_err().kind(), crate::ErrorKind::Infeasible);
}

#[test]
fn unconstrained_outage_gives_zero_power() {
    let c = SystemConfig { psi_th: 1.0, ..SystemConfig::default() };
    let r = solve(&unit2(), &c, 0.05).unwrap();
    assert_eq!(r.total_power, 0.0);
    assert_eq!(r.allocation, PowerAllocation::zeros(2));
    let b = brute_force_reference(&unit2(), &c, 2).unwrap();
    assert_eq!(b.total_power, 0.0);
}

#[test]
fn only_full_power_feasible_on_two_point_grid() {
    let c = SystemConfig::default();
    let b = brute_force_reference(&unit2(), &c, 2).unwrap();
    assert_eq!(b.allocation, PowerAllocation::uniform(2, 5000.0, 5000.0));
}

#[test]
fn identical_subcarriers_give_mirror_symmetric_optimum() {
    let c = SystemConfig::default();
    let r = solve(&unit2(), &c, 0.02).unwrap();
    let a = &r.allocation;
    let mirrored = a.permuted(&[1, 0]);
    // Either symmetric, or the mirror image ties and loses the lexicographic
    // tie-break.
    if a != &mirrored {
        let mirrored_outage = allocation_outage(&unit2(), &c, &mirrored).unwrap();
        assert!(mirrored_outage <= c.psi_th);
        assert_eq!(mirrored.total_power(), r.total_power);
        let key = |x: &PowerAllocation| [x.pt.clone(), x.pr.clone()].concat();
        assert!(key(a) < key(&mirrored));
    }
}

#[test]
fn matches_flat_grid_on_unit_stats() {
    let c = SystemConfig::default();
    for g in [3, 4, 6, 9, 12] {
        let grid = SearchGrid::log_spaced(&c, g, DEFAULT_FLOOR_RATIO).unwrap();
        let fast = Oracle::default().solve_on_grid(&unit2(), &c, &grid).unwrap();
        let flat = brute_force_reference(&unit2(), &c, g).unwrap();
        assert_eq!(fast.allocation, flat.allocation, "g = {g}");
        assert_eq!(fast.total_power.to_bits(), flat.total_power.to_bits());
    }
}

#[test]
fn matches_flat_grid_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = SystemConfig::default();
    for _ in 0..20 {
        let stats = random_stats(&mut rng, 2);
        if !feasibility_check(&stats, &c).unwrap().feasible {
            continue;
        }
        for g in [5, 8, 11] {
            let grid = SearchGrid::log_spaced(&c, g, DEFAULT_FLOOR_RATIO).unwrap();
            let fast = Oracle::default().solve_on_grid(&stats, &c, &grid).unwrap();
            let flat = brute_force_on_grid(&stats, &c, &grid).unwrap();
            assert_eq!(fast.allocation, flat.allocation, "{stats:?} g = {g}");
        }
    }
}

#[test]
fn sap_averaged_mode_matches_flat_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = SystemConfig { outage_mode: OutageMode::SapAveraged, ..SystemConfig::default() };
    for _ in 0..4 {
        let stats = random_stats(&mut rng, 4);
        let grid = SearchGrid::log_spaced(&c, 4, DEFAULT_FLOOR_RATIO).unwrap();
        let fast = Oracle::default().solve_on_grid(&stats, &c, &grid).unwrap();
        let flat = brute_force_on_grid(&stats, &c, &grid).unwrap();
        assert_eq!(fast.allocation, flat.allocation);
    }
}

#[test]
fn swapping_subcarriers_swaps_the_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = SystemConfig::default();
    for _ in 0..5 {
        let stats = random_stats(&mut rng, 2);
        if !feasibility_check(&stats, &c).unwrap().feasible {
            continue;
        }
        let swapped: Vec<_> = stats.iter().rev().copied().collect();
        let r = solve(&stats, &c, 0.02).unwrap();
        let rs = solve(&swapped, &c, 0.02).unwrap();
        assert_eq!(r.total_power, rs.total_power);
        if r.allocation.permuted(&[1, 0]) != rs.allocation {
            // only a tie may break equivariance
            let other = r.allocation.permuted(&[1, 0]);
            assert!(allocation_outage(&swapped, &c, &other).unwrap() <= c.psi_th);
        }
    }
}

#[test]
fn finer_resolution_never_costs_more_than_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = SystemConfig::default();
    let stats = loop {
        let s = random_stats(&mut rng, 2);
        if feasibility_check(&s, &c).unwrap().feasible {
            break s;
        }
    };
    let coarse = solve(&stats, &c, 0.05).unwrap();
    let fine = solve(&stats, &c, 0.01).unwrap();
    let grid = SearchGrid::for_delta(&c, 0.05, DEFAULT_FLOOR_RATIO).unwrap();
    assert!(fine.total_power <= coarse.total_power + resolution_bound(coarse.total_power, &grid, 2));
}

#[test]
fn evaluations_within_budget() {
    let c = SystemConfig::default();
    for delta in [0.2, 0.05, 0.01] {
        let grid = SearchGrid::for_delta(&c, delta, DEFAULT_FLOOR_RATIO).unwrap();
        let r = solve(&unit2(), &c, delta).unwrap();
        let budget = evaluation_budget(2, &grid, OracleOptions::default().coarse_intervals);
        assert!(r.evaluations <= budget, "{} > {budget}", r.evaluations);
        assert!(r.evaluations > 0);
    }
}

#[test]
fn evaluation_cap_is_enforced() {
    let oracle = Oracle::new(OracleOptions { max_evaluations: 50, ..OracleOptions::default() });
    let err = oracle.solve(&unit2(), &SystemConfig::default(), 0.01).unwrap_err();
    assert!(matches!(err, Error::BudgetExceeded { cap: 50, .. }));
}

#[test]
fn brute_force_point_cap() {
    let c = SystemConfig::default();
    assert!(matches!(brute_force_reference(&unit2(), &c, 13), Err(Error::BudgetExceeded { .. })));
}

#[test]
fn result_invariants() {
    let c = SystemConfig::default();
    let r = solve(&unit2(), &c, 0.01).unwrap();
    assert!(r.feasible);
    assert!(r.achieved_outage <= c.psi_th);
    assert_eq!(r.total_power, r.allocation.total_power());
    r.allocation.validate(&c).unwrap();
    assert_eq!(r.accuracy, 0.01);
    let again = solve(&unit2(), &c, 0.01).unwrap();
    assert_eq!(r, again);
}

#[test]
fn wrong_stats_width_rejected() {
    let c = SystemConfig::default();
    assert!(matches!(solve(&[SubcarrierStats::unit()], &c, 0.1), Err(Error::ShapeMismatch { .. })));
}
