use quantum_vault::attacks::{
    attack_keep_and_fabricate, attack_measure_random_basis, exact_success, optimize_cloner, run_counterfeit_experiment,
    AttackChannel, AttackError, ChoiMatrix,
};
use quantum_vault::qsim::{Basis, DensityMatrix, KrausChannel};

#[test]
fn optimizer_recovers_three_quarters() {
    let out = optimize_cloner(200, 1e-10).unwrap();
    println!(
        "achieved {:.12} after {} iterations (converged: {})",
        out.achieved, out.iterations, out.converged
    );
    assert!((out.achieved - 0.75).abs() < 5e-4);
    assert!(out.choi.psd_violation() <= 1e-7);
    assert!(out.choi.trace_violation() <= 1e-6);
    assert!(out.attack.channel().tp_deviation() <= 1e-7);
    let four = exact_success(&out.attack, 4).unwrap();
    assert!((four - 0.31640625).abs() < 2e-3);
}

#[test]
fn optimizer_ascent_is_monotone_and_bounded() {
    for budget in [1, 2, 5, 20] {
        let out = optimize_cloner(budget, 1e-12).unwrap();
        assert!(out.iterations <= budget);
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(out.trace.iter().all(|v| *v <= 0.75 + 1e-3));
        assert!(out.achieved <= 0.75 + 1e-3);
    }
    assert_eq!(optimize_cloner(0, 1e-9).unwrap_err(), AttackError::NoIterations);
}

#[test]
fn attack_ordering() {
    let f = exact_success(&attack_keep_and_fabricate(), 1).unwrap();
    let r = exact_success(&attack_measure_random_basis(), 1).unwrap();
    let o = optimize_cloner(200, 1e-10).unwrap().achieved;
    assert!(f < r && r < o);
    assert!((f - 0.5).abs() < 1e-9);
    assert!((r - 0.625).abs() < 1e-9);
    assert!((exact_success(&attack_measure_random_basis(), 2).unwrap() - 0.390625).abs() < 1e-12);
}

#[test]
fn choi_objective_matches_exact_evaluator() {
    let out = optimize_cloner(50, 1e-10).unwrap();
    let choi = ChoiMatrix::from_channel(&out.attack);
    assert!((choi.objective() - out.achieved).abs() < 1e-9);
}

#[test]
fn fabricate_monte_carlo() {
    let report = run_counterfeit_experiment(&attack_keep_and_fabricate(), 1, 100_000, 7).unwrap();
    assert!((report.estimated_rate - 0.5).abs() < 0.005);
    assert!(report.z_score() < 5.0);
    let four = run_counterfeit_experiment(&attack_keep_and_fabricate(), 4, 20_000, 8).unwrap();
    assert!((four.exact_rate - 0.0625).abs() < 1e-12);
    assert!(four.z_score() < 5.0, "{four:?}");
}

#[test]
fn random_basis_monte_carlo() {
    let report = run_counterfeit_experiment(&attack_measure_random_basis(), 2, 50_000, 9).unwrap();
    assert!((report.exact_rate - 0.390625).abs() < 1e-12);
    assert!(report.z_score() < 5.0, "{report:?}");
}

#[test]
fn optimal_monte_carlo() {
    let attack = optimize_cloner(200, 1e-10).unwrap().attack;
    let report = run_counterfeit_experiment(&attack, 1, 100_000, 10).unwrap();
    assert!((report.estimated_rate - 0.75).abs() < 0.005, "{report:?}");
}

#[test]
fn single_trial_and_zero_trials() {
    let a = attack_keep_and_fabricate();
    let one = run_counterfeit_experiment(&a, 3, 1, 1).unwrap();
    assert!(one.successes <= 1);
    assert_eq!(run_counterfeit_experiment(&a, 3, 0, 1).unwrap_err(), AttackError::NoTrials);
}

#[test]
fn experiments_are_seed_deterministic() {
    let a = attack_measure_random_basis();
    let x = run_counterfeit_experiment(&a, 2, 5000, 42).unwrap();
    let y = run_counterfeit_experiment(&a, 2, 5000, 42).unwrap();
    assert_eq!(x, y);
    let json = serde_json::to_string(&x).unwrap();
    assert!(json.starts_with(r#"{"attack":"measure-random-basis""#));
}

#[test]
fn attack_output_is_a_state() {
    let rho = DensityMatrix::from_basis_state(Basis::Diagonal, true);
    for a in [attack_keep_and_fabricate(), attack_measure_random_basis()] {
        let out = a.apply(&rho).unwrap();
        assert_eq!(out.qubits(), 2);
        assert!((out.matrix().trace().re - 1.0).abs() < 1e-9);
    }
    assert!(AttackChannel::new("dep", KrausChannel::fully_depolarizing_qubit()).is_err());
}
