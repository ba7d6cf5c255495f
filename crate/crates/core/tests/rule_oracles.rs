mod common;

use anticipation::dynamics::{closed_form_dynamics, verify_dynamics};
use anticipation::experiments::seeded_rng;
use anticipation::learners::{
    hla_delta, hla_two_agent_delta, la_delta, lola_delta, naive_delta, Hla, Lola, LookAhead, Naive,
};
use anticipation::{CoordinationGame, PayoffTensor, PolicyMode, UpdateRule};
use common::{all_close, close, policy, random_blocks, random_game};
use rand::Rng;

fn flat(b: &[Vec<f64>]) -> Vec<f64> {
    b.concat()
}

#[test]
fn lola_matches_exact_second_order_expansion() {
    let mut rng = seeded_rng(11);
    for actions in [2, 3] {
        for _ in 0..25 {
            let game = random_game(&mut rng, 2, actions);
            let mode = common::natural_mode(&game);
            let blocks = random_blocks(&mut rng, &game, mode);
            let eta = rng.random_range(0.05..1.5);
            let p = policy(mode, &blocks);
            let (expected, shaping) = common::lola_taylor(&game, mode, &blocks, eta);
            let lola = lola_delta(&game, &p, eta).unwrap();
            let la = la_delta(&game, &p, eta).unwrap();
            assert!(all_close(&lola.flat(), &flat(&expected), 1e-10));
            let la_expected: Vec<f64> = flat(&expected)
                .iter()
                .zip(flat(&shaping))
                .map(|(l, s)| l - s)
                .collect();
            assert!(all_close(&la.flat(), &la_expected, 1e-10));
        }
    }
}

#[test]
fn look_ahead_rules_match_composed_finite_differences() {
    let mut rng = seeded_rng(12);
    for actions in [2, 3] {
        for _ in 0..20 {
            let game = random_game(&mut rng, 2, actions);
            let mode = common::natural_mode(&game);
            let blocks = random_blocks(&mut rng, &game, mode);
            let eta = rng.random_range(0.05..1.5);
            let p = policy(mode, &blocks);
            let la = common::look_ahead(&game, mode, &blocks, eta, false);
            let lola = common::look_ahead(&game, mode, &blocks, eta, true);
            assert!(all_close(
                &la_delta(&game, &p, eta).unwrap().flat(),
                &flat(&la),
                1e-6
            ));
            assert!(all_close(
                &lola_delta(&game, &p, eta).unwrap().flat(),
                &flat(&lola),
                1e-6
            ));
        }
    }
}

#[test]
fn closed_forms_bridge_the_rules() {
    let mut rng = seeded_rng(13);
    for _ in 0..5 {
        let g = rng.random_range(0.1..10.0);
        let eta = rng.random_range(0.1..2.0);
        let game =
            CoordinationGame::two_action_with_regret(g, Some(rng.random_range(0.1..5.0))).unwrap();
        let rules: Vec<Box<dyn UpdateRule>> = vec![
            Box::new(Naive::new(eta).unwrap()),
            Box::new(LookAhead::new(eta).unwrap()),
            Box::new(Lola::new(eta).unwrap()),
            Box::new(Hla::new(eta, None).unwrap()),
            Box::new(Hla::new(eta, Some(vec![1, 0])).unwrap()),
        ];
        for rule in &rules {
            let residual = verify_dynamics(rule.as_ref(), &game, 100, &mut rng).unwrap();
            let scale = closed_form_dynamics(rule.as_ref(), g).unwrap().b[0]
                .abs()
                .max(1.0);
            assert!(
                residual < 1e-9 * scale,
                "{} residual {residual}",
                rule.name()
            );
        }
    }
}

#[test]
fn anticipation_vanishes_as_eta_shrinks() {
    let mut rng = seeded_rng(14);
    for eta in [1e-6, 1e-4] {
        for _ in 0..20 {
            let game = random_game(&mut rng, 2, 3);
            let blocks = random_blocks(&mut rng, &game, PolicyMode::Simplex);
            let p = policy(PolicyMode::Simplex, &blocks);
            let naive = naive_delta(&game, &p, eta).unwrap().rates(eta).concat();
            let rules: Vec<Box<dyn UpdateRule>> = vec![
                Box::new(LookAhead::new(eta).unwrap()),
                Box::new(Lola::new(eta).unwrap()),
                Box::new(Hla::new(eta, None).unwrap()),
            ];
            for rule in &rules {
                let rates = rule.rates(&game, &p).unwrap().concat();
                for (r, n) in rates.iter().zip(&naive) {
                    // the anticipation terms are O(η) with payoffs bounded by 5
                    assert!((r - n).abs() <= 200.0 * eta, "{} {r} {n}", rule.name());
                }
            }
        }
    }
}

#[test]
fn symmetric_rules_commute_with_swapping_agents() {
    let game = PayoffTensor::two_action(1.3, -0.4).unwrap();
    let mut rng = seeded_rng(15);
    for _ in 0..50 {
        let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
        let eta = rng.random_range(0.1..2.0);
        let p = anticipation::JointPolicy::reduced(&[a, b]).unwrap();
        let q = anticipation::JointPolicy::reduced(&[b, a]).unwrap();
        for f in [naive_delta, la_delta, lola_delta] {
            let d = f(&game, &p, eta).unwrap().flat();
            let e = f(&game, &q, eta).unwrap().flat();
            assert!(close(d[0], e[1], 1e-14) && close(d[1], e[0], 1e-14));
        }
        // swapping agents also swaps leader and follower
        let d = hla_two_agent_delta(&game, &p, eta, 1).unwrap().flat();
        let e = hla_two_agent_delta(&game, &q, eta, 0).unwrap().flat();
        assert!(close(d[0], e[1], 1e-14) && close(d[1], e[0], 1e-14));
    }
}

/// Game with agents renamed: new agent `k` is old agent `perm[k]`.
fn permuted(game: &PayoffTensor, perm: &[usize]) -> PayoffTensor {
    let new_shape: Vec<usize> = perm.iter().map(|&o| game.shape()[o]).collect();
    let entries = common::joint_profiles(&new_shape)
        .iter()
        .map(|b| {
            let mut a = vec![0; b.len()];
            for (k, &o) in perm.iter().enumerate() {
                a[o] = b[k];
            }
            game.entry(&a)
        })
        .collect();
    PayoffTensor::new(new_shape, entries).unwrap()
}

#[test]
fn hla_is_invariant_under_renaming_agents() {
    let mut rng = seeded_rng(16);
    let perms = [[1, 2, 0], [2, 0, 1], [0, 2, 1], [1, 0, 2]];
    for _ in 0..10 {
        let game = random_game(&mut rng, 3, 2);
        let blocks = random_blocks(&mut rng, &game, PolicyMode::Reduced);
        let eta = rng.random_range(0.1..1.0);
        let hierarchy = [2, 0, 1];
        let base = hla_delta(
            &game,
            &policy(PolicyMode::Reduced, &blocks),
            eta,
            &hierarchy,
        )
        .unwrap();
        for perm in perms {
            let renamed = permuted(&game, &perm);
            let new_blocks: Vec<Vec<f64>> = perm.iter().map(|&o| blocks[o].clone()).collect();
            let new_hierarchy: Vec<usize> = hierarchy
                .iter()
                .map(|&old| perm.iter().position(|&o| o == old).unwrap())
                .collect();
            let d = hla_delta(
                &renamed,
                &policy(PolicyMode::Reduced, &new_blocks),
                eta,
                &new_hierarchy,
            )
            .unwrap();
            for (k, &o) in perm.iter().enumerate() {
                assert!(all_close(&d.deltas[k], &base.deltas[o], 1e-12));
            }
        }
    }
}

#[test]
fn general_hla_reduces_to_the_two_agent_form() {
    let mut rng = seeded_rng(17);
    for actions in [2, 3] {
        for _ in 0..30 {
            let game = random_game(&mut rng, 2, actions);
            let mode = common::natural_mode(&game);
            let blocks = random_blocks(&mut rng, &game, mode);
            let p = policy(mode, &blocks);
            let eta = rng.random_range(0.05..2.0);
            for leader in [0, 1] {
                let general = hla_delta(&game, &p, eta, &[1 - leader, leader])
                    .unwrap()
                    .flat();
                let two = hla_two_agent_delta(&game, &p, eta, leader).unwrap().flat();
                assert!(all_close(&general, &two, 1e-12));
            }
        }
    }
}
