mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use arat_core::best_response::slater_point;
use arat_core::model::generate_decoupled;
use arat_core::occupation::{constraint_value, payoff};
use arat_core::{
    constrained_best_response, generate_random, occupation_measure, slater_margin, GameInstance, GeneratorConfig,
    Player, StationaryPolicy,
};

use common::{decoupled_solo_optimum, grid_policies, random_policy};

fn player() -> impl Strategy<Value = Player> {
    prop::sample::select(Player::BOTH.to_vec())
}

fn opponent_of(game: &GameInstance, player: Player, rng: u64) -> StationaryPolicy {
    random_policy(&mut ChaCha8Rng::seed_from_u64(rng), game, player.opponent())
}

fn profile(player: Player, own: &StationaryPolicy, opp: &StationaryPolicy) -> (StationaryPolicy, StationaryPolicy) {
    match player {
        Player::One => (own.clone(), opp.clone()),
        Player::Two => (opp.clone(), own.clone()),
    }
}

/// Payoff and constraint values of `own` against `opp`, from the occupation measure.
fn evaluate(game: &GameInstance, player: Player, own: &StationaryPolicy, opp: &StationaryPolicy) -> (f64, Vec<f64>) {
    let (pi1, pi2) = profile(player, own, opp);
    let mu = occupation_measure(game, &pi1, &pi2).unwrap();
    (payoff(game, &mu, player).unwrap(), constraint_value(game, &mu, player).unwrap())
}

fn feasible(values: &[f64], level: &[f64]) -> bool {
    values.iter().zip(level).all(|(c, r)| *c >= r - 1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dominates_every_feasible_grid_policy(seed in any::<u64>(), p in 0usize..=2, pl in player(), rng in any::<u64>()) {
        let game = generate_random(seed, &GeneratorConfig::new(2, 2, 2, p, 0.9)).unwrap();
        let opp = opponent_of(&game, pl, rng);
        let br = constrained_best_response(&game, pl, &opp).unwrap();
        for own in grid_policies(&game, pl, 10) {
            let (v, c) = evaluate(&game, pl, &own, &opp);
            if feasible(&c, game.level(pl)) {
                // A feasible grid policy means the LP cannot be infeasible.
                let best = br.optimal();
                prop_assert!(best.is_some(), "grid policy {:?} is feasible", own.probs);
                let best = best.unwrap().value;
                prop_assert!(v <= best + 1e-7, "grid policy {:?} gives {} > {}", own.probs, v, best);
            }
        }
    }

    #[test]
    fn value_is_attained_by_the_extracted_policy(seed in any::<u64>(), nx in 1usize..=5, n in 1usize..=3,
                                                 p in 0usize..=2, pl in player(), rng in any::<u64>()) {
        let game = generate_random(seed, &GeneratorConfig::new(nx, n, n + 1, p, 0.9)).unwrap();
        let opp = opponent_of(&game, pl, rng);
        if let Some(best) = constrained_best_response(&game, pl, &opp).unwrap().optimal() {
            let (v, c) = evaluate(&game, pl, &best.policy, &opp);
            prop_assert!((v - best.value).abs() <= 1e-7);
            for ((a, b), r) in c.iter().zip(&best.constraint_values).zip(game.level(pl)) {
                prop_assert!((a - b).abs() <= 1e-7);
                prop_assert!(*a >= r - 1e-7);
            }
        }
    }

    #[test]
    fn value_is_monotone_in_the_level(seed in any::<u64>(), pl in player(), shift in 0.0f64..0.5) {
        let game = generate_random(seed, &GeneratorConfig::new(3, 3, 2, 1, 0.9)).unwrap();
        let opp = StationaryPolicy::uniform(&game, pl.opponent());
        let raised: Vec<f64> = game.level(pl).iter().map(|r| r + shift).collect();
        let tighter = match pl {
            Player::One => game.with_initial_and_levels(game.eta.clone(), raised, game.rho2.clone()),
            Player::Two => game.with_initial_and_levels(game.eta.clone(), game.rho1.clone(), raised),
        };
        let loose = constrained_best_response(&game, pl, &opp).unwrap();
        let tight = constrained_best_response(&tighter, pl, &opp).unwrap();
        let loose = loose.optimal().expect("the uniform policy is feasible").value;
        if let Some(t) = tight.optimal() {
            prop_assert!(t.value <= loose + 1e-9);
        }
    }

    #[test]
    fn slater_margin_bounds_every_grid_slack(seed in any::<u64>(), pl in player(), rng in any::<u64>()) {
        let game = generate_random(seed, &GeneratorConfig::new(2, 2, 2, 2, 0.8)).unwrap();
        let opp = opponent_of(&game, pl, rng);
        let margin = slater_margin(&game, pl, &opp).unwrap();
        for own in grid_policies(&game, pl, 10) {
            let (_, c) = evaluate(&game, pl, &own, &opp);
            let slack = c.iter().zip(game.level(pl)).map(|(c, r)| c - r).fold(f64::INFINITY, f64::min);
            prop_assert!(slack <= margin + 1e-9);
        }
        let point = slater_point(&game, pl, &opp).unwrap().unwrap();
        prop_assert!((point.gamma.total_mass() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn decoupled_best_response_matches_the_solo_optimum(seed in any::<u64>(), nx in 1usize..=4, p in 0usize..=1,
                                                        pl in player(), rng in any::<u64>()) {
        let game = generate_decoupled(seed, &GeneratorConfig::new(nx, 3, 2, p, 0.9)).unwrap();
        let opp = opponent_of(&game, pl, rng);
        let best = constrained_best_response(&game, pl, &opp).unwrap();
        let (value, _) = decoupled_solo_optimum(&game, pl);
        prop_assert!((best.optimal().unwrap().value - value).abs() <= 1e-7);
    }
}
