use std::path::Path;

use serde::{Deserialize, Serialize};

use arat_core::equilibrium::PlayerCheck;
use arat_core::model::{generate_decoupled, ViolationCode};
use arat_core::simulate::Estimate;
use arat_core::{
    constrained_best_response, generate_random, iterate, occupation_measure, perturbed_sequence, simulate, validate,
    verify_epsilon_nash, BestResponseResult, GameInstance, GeneratorConfig, NashVerification, Player,
    SimulationConfig, StationaryPolicy,
};

use crate::io::{core_error, read_json, read_profile, read_valid_instance, to_json, write_json, CliError};
use crate::{Cli, Command};

/// Prints either the summary or the JSON report, and writes `out` if given.
fn emit<T: Serialize>(cli: &Cli, report: &T, out: Option<&Path>, summary: impl FnOnce() -> String) -> Result<(), CliError> {
    if let Some(path) = out {
        write_json(path, report)?;
    }
    if cli.json {
        println!("{}", to_json(report));
    } else {
        print!("{}", summary());
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"))
}

fn player_line(c: &PlayerCheck) -> String {
    format!(
        "player {}: payoff {:.9}, slack {}, regret {}, feasible {}, no profitable deviation {}\n",
        c.player,
        c.payoff,
        opt(c.slack),
        opt(c.regret),
        c.feasible,
        c.no_profitable_deviation
    )
}

fn verification_summary(v: &NashVerification) -> String {
    let mut s: String = v.players.iter().map(player_line).collect();
    s += &format!(
        "epsilon-Nash check at {:e}: {} (defect {:.3e})\n",
        v.epsilon,
        if v.passed { "passed" } else { "FAILED" },
        v.defect()
    );
    s
}

fn policy_rows(policy: &StationaryPolicy) -> String {
    policy
        .probs
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
            format!("  state {x}: [{}]\n", cells.join(", "))
        })
        .collect()
}

pub fn run(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Command::Validate { instance } => run_validate(cli, instance),
        Command::Solve {
            instance,
            iteration,
            out,
            dump_occupation,
        } => {
            let game = read_valid_instance(instance)?;
            let report = iterate(&game, &iteration.config()).map_err(|e| core_error(instance, e))?;
            if let Some(path) = dump_occupation {
                let mu = occupation_measure(&game, &report.pi1, &report.pi2).map_err(|e| core_error(instance, e))?;
                write_json(path, &mu)?;
            }
            emit(cli, &report, out.as_deref(), || {
                let mut s = format!(
                    "converged: {} after {} iteration(s) (stopped on tolerance: {})\n",
                    report.converged, report.iterations, report.stopped_on_tolerance
                );
                for e in &report.events {
                    s += &format!("event: {}\n", serde_json::to_string(e).unwrap_or_default());
                }
                s + &verification_summary(&report.verification)
            })?;
            Ok(report.converged)
        }
        Command::BestResponse {
            instance,
            player,
            opponent,
            out,
        } => {
            let game = read_valid_instance(instance)?;
            let player = Player::try_from(*player).map_err(CliError::Usage)?;
            let opp = read_opponent(opponent, &game, player.opponent())?;
            let result = constrained_best_response(&game, player, &opp).map_err(|e| core_error(instance, e))?;
            emit(cli, &result, out.as_deref(), || match &result {
                BestResponseResult::Optimal(br) => format!(
                    "best response of player {player}: optimal\nvalue {:.9}\nconstraint values {:?}\npolicy:\n{}",
                    br.value,
                    br.constraint_values,
                    policy_rows(&br.policy)
                ),
                BestResponseResult::Infeasible => {
                    format!("best response of player {player}: infeasible (no policy meets the constraint levels)\n")
                }
            })?;
            Ok(result.is_optimal())
        }
        Command::Verify {
            instance,
            profile,
            epsilon,
            out,
        } => {
            let game = read_valid_instance(instance)?;
            let (pi1, pi2) = read_profile(profile, &game)?;
            if !(*epsilon >= 0.0 && epsilon.is_finite()) {
                return Err(CliError::Usage(format!("epsilon {epsilon} must be finite and nonnegative")));
            }
            let v = verify_epsilon_nash(&game, &pi1, &pi2, *epsilon).map_err(|e| core_error(instance, e))?;
            emit(cli, &v, out.as_deref(), || verification_summary(&v))?;
            Ok(v.passed)
        }
        Command::Simulate {
            instance,
            profile,
            episodes,
            horizon,
            seed,
            out,
        } => {
            let game = read_valid_instance(instance)?;
            let (pi1, pi2) = read_profile(profile, &game)?;
            let config = SimulationConfig {
                horizon: *horizon,
                episodes: *episodes,
                seed: *seed,
            };
            let est = simulate(&game, &pi1, &pi2, &config).map_err(|e| core_error(instance, e))?;
            emit(cli, &est, out.as_deref(), || {
                let fmt_est = |e: &Estimate| format!("{:.6} ± {:.2e}", e.mean, e.std_error);
                let mut s = format!(
                    "{} episodes, horizon {}, seed {} (truncation mass {:.9})\n",
                    episodes, horizon, seed, est.truncation_mass
                );
                for player in Player::BOTH {
                    let i = player.index();
                    let cons: Vec<String> = est.constraints[i].iter().map(fmt_est).collect();
                    s += &format!(
                        "player {player}: payoff {}, constraints [{}]\n",
                        fmt_est(&est.payoffs[i]),
                        cons.join(", ")
                    );
                }
                s
            })?;
            Ok(true)
        }
        Command::Generate {
            seed,
            states,
            actions1,
            actions2,
            p,
            beta,
            decoupled,
            out,
        } => {
            let config = GeneratorConfig::new(*states, *actions1, *actions2, *p, *beta);
            let generator = if *decoupled { generate_decoupled } else { generate_random };
            let game = generator(*seed, &config).map_err(|e| CliError::Usage(e.to_string()))?;
            match out {
                Some(path) => {
                    write_json(path, &game)?;
                    println!("wrote {} ({} states, {} constraint(s))", path.display(), states, p);
                }
                None => println!("{}", to_json(&game)),
            }
            Ok(true)
        }
        Command::Perturb {
            instance,
            n_max,
            iteration,
            out,
        } => {
            let game = read_valid_instance(instance)?;
            let report = perturbed_sequence(&game, *n_max, &iteration.config()).map_err(|e| core_error(instance, e))?;
            let passed = report.final_verification().is_some_and(|v| v.passed);
            emit(cli, &report, out.as_deref(), || {
                let mut s = format!("constraint bound {:.6}\n", report.bound);
                for step in &report.steps {
                    s += &format!(
                        "n = {:>3}: converged {}, iterations {}, defect on original {:.3e}\n",
                        step.n,
                        step.report.converged,
                        step.report.iterations,
                        step.original.defect()
                    );
                }
                if let Some(v) = report.final_verification() {
                    s += "last profile on the original game:\n";
                    s += &verification_summary(v);
                }
                s
            })?;
            Ok(passed)
        }
    }
}

fn run_validate(cli: &Cli, path: &Path) -> Result<bool, CliError> {
    let game: GameInstance = read_json(path)?;
    let report = validate(&game);
    if let Some(v) = report.violations.iter().find(|v| v.code == ViolationCode::ShapeMismatch) {
        return Err(CliError::Usage(format!("{}: {}", path.display(), v.detail)));
    }
    emit(cli, &report, None, || {
        if report.ok {
            return "ok\n".to_string();
        }
        let mut s = format!("{} violation(s)\n", report.violations.len());
        for v in &report.violations {
            s += &format!(
                "{} at {:?}: {} (residual {:e})\n",
                serde_json::to_string(&v.code).unwrap_or_default().trim_matches('"'),
                v.indices,
                v.detail,
                v.residual
            );
        }
        s
    })?;
    Ok(report.ok)
}

/// A single policy table, or a profile whose opponent entry is used.
#[derive(Debug, Deserialize)]
struct OpponentFile {
    pi: Option<Vec<Vec<f64>>>,
    pi1: Option<Vec<Vec<f64>>>,
    pi2: Option<Vec<Vec<f64>>>,
}

fn read_opponent(path: &Path, game: &GameInstance, opponent: Player) -> Result<StationaryPolicy, CliError> {
    let file: OpponentFile = read_json(path)?;
    let field = if opponent == Player::One { "pi1" } else { "pi2" };
    let table = file
        .pi
        .or(if opponent == Player::One { file.pi1 } else { file.pi2 })
        .ok_or_else(|| CliError::Usage(format!("{}: missing field `pi` or `{field}`", path.display())))?;
    StationaryPolicy::new(game, opponent, table).map_err(|e| core_error(path, e))
}
