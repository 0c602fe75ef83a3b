//! The ten acceptance criteria as runnable checks.
//!
//! Each criterion is seeded from one `u64`, runs in a few seconds at most,
//! and reports its measured numbers alongside the verdict.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::attacks::{
    attack_keep_and_fabricate, attack_measure_random_basis, exact_success, optimize_cloner, per_qubit_success,
    run_counterfeit_experiment, AttackChannel, DEFAULT_ITERATIONS, DEFAULT_TOLERANCE,
};
use crate::money::{
    bank_mint, cv, finalize_mint, gen, qv, rec_mint, wiesner_mint, wiesner_verify, BanknotePublicKey,
    QuantumBanknote, SchemeParams, SchemeSecretKey, WiesnerBank,
};
use crate::netsim::{demo_config, fuzz_script, named_scenario, run_scenario, FuzzMix, Record};
use crate::qsim::{shannon_entropy, Basis, BitString, Engine, EngineConfig};
use crate::vault::{
    process_on_demand_mint, process_online_payment, Envelope, LocalBus, MessageKind, Outcome, Payload, Topology,
};

pub const CRITERIA: [&str; 10] = [
    "optimal counterfeiting bound",
    "attack hierarchy",
    "wiesner correctness",
    "uncertainty relation",
    "public-key correctness",
    "sabotage resistance",
    "mutual exclusivity",
    "forgery rejection",
    "conservation and ledger safety",
    "determinism",
];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AcceptanceReport {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
}

impl AcceptanceReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    /// Plain-text table, one row per criterion.
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "seed {}", self.seed).unwrap();
        for c in &self.criteria {
            writeln!(
                out,
                "{:>2}  {:<4}  {:<32} {:>7.2}s  {}",
                c.id,
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.seconds,
                c.detail
            )
            .unwrap();
        }
        let passed = self.criteria.iter().filter(|c| c.passed).count();
        writeln!(out, "{passed}/{} criteria passed", self.criteria.len()).unwrap();
        out
    }
}

type Check = Result<String, String>;

fn check(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sub_seed(seed: u64, id: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng.random()
}

fn optimal_bound(seed: u64) -> Check {
    let opt = optimize_cloner(DEFAULT_ITERATIONS, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
    let mc = run_counterfeit_experiment(&opt.attack, 1, 100_000, seed).map_err(|e| e.to_string())?;
    let exact4 = exact_success(&opt.attack, 4).map_err(|e| e.to_string())?;
    let detail = format!(
        "objective {:.6}, n=1 estimate {:.4}, n=4 exact {:.5}",
        opt.achieved, mc.estimated_rate, exact4
    );
    check(
        (0.7495..=0.7510).contains(&opt.achieved)
            && (mc.estimated_rate - 0.75).abs() <= 0.005
            && (exact4 - 0.3164).abs() <= 2e-3,
        detail,
    )
}

fn attack_hierarchy(seed: u64) -> Check {
    let cases: [(AttackChannel, f64); 2] = [
        (attack_keep_and_fabricate(), 0.5),
        (attack_measure_random_basis(), 0.625),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, (attack, expected)) in cases.iter().enumerate() {
        let p = per_qubit_success(attack).map_err(|e| e.to_string())?;
        let mc = run_counterfeit_experiment(attack, 1, 100_000, seed.wrapping_add(i as u64)).map_err(|e| e.to_string())?;
        ok &= (p - expected).abs() <= 1e-9 && mc.z_score().abs() <= 5.0;
        detail.push(format!("{} p={p:.9} z={:+.2}", attack.name(), mc.z_score()));
    }
    check(ok, detail.join(", "))
}

fn wiesner_correctness(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut engine = Engine::new(EngineConfig::new(rng.random()));
    let mut bank = WiesnerBank::new();
    let rounds = 10_000;
    let mut passed = 0;
    for _ in 0..rounds {
        let note = wiesner_mint(&mut bank, 16, &mut engine, &mut rng).map_err(|e| e.to_string())?;
        let (ok, state) = wiesner_verify(&bank, note.serial, note.state, &mut engine).map_err(|e| e.to_string())?;
        engine.discard(state).map_err(|e| e.to_string())?;
        passed += ok as usize;
    }
    check(passed == rounds, format!("{passed}/{rounds} honest notes verified at n=16"))
}

fn entropic_sum(engine: &mut Engine, amps: Vec<Complex64>) -> Result<f64, String> {
    let h = engine.prepare_amplitudes(amps).map_err(|e| e.to_string())?;
    let px = engine.outcome_distribution(&h, &[Basis::Computational]).map_err(|e| e.to_string())?;
    let qx = engine.outcome_distribution(&h, &[Basis::Diagonal]).map_err(|e| e.to_string())?;
    engine.discard(h).map_err(|e| e.to_string())?;
    Ok(shannon_entropy(&px) + shannon_entropy(&qx))
}

fn uncertainty(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut engine = Engine::omniscient(rng.random());
    let mut min_sum = f64::INFINITY;
    for _ in 0..10_000 {
        let mut amps: Vec<Complex64> = (0..2)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        min_sum = min_sum.min(entropic_sum(&mut engine, amps)?);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let eigenstates = [[1.0, 0.0], [0.0, 1.0], [s, s], [s, -s]];
    let mut worst_equality: f64 = 0.0;
    for e in eigenstates {
        let sum = entropic_sum(&mut engine, e.iter().map(|x| Complex64::new(*x, 0.0)).collect())?;
        worst_equality = worst_equality.max((sum - 1.0).abs());
    }
    check(
        min_sum >= 1.0 - 1e-9 && worst_equality <= 1e-9,
        format!("min H(P)+H(Q) = {min_sum:.12} over 10^4 states, basis-state deviation {worst_equality:.1e}"),
    )
}

fn mint_note(
    pk: &crate::money::SchemePublicKey,
    sk: &mut SchemeSecretKey,
    engine: &mut Engine,
    rng: &mut ChaCha8Rng,
) -> Result<(QuantumBanknote, BanknotePublicKey), String> {
    let (_, instruction) = bank_mint(sk, 1, rng).map_err(|e| e.to_string())?;
    let (note, ack) = rec_mint(pk, instruction, "vault", engine).map_err(|e| e.to_string())?;
    let bpk = finalize_mint(sk, &ack).map_err(|e| e.to_string())?;
    Ok((note, bpk))
}

fn scheme(seed: u64) -> Result<(crate::money::SchemePublicKey, SchemeSecretKey, Engine, ChaCha8Rng), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SchemeParams::new(8).map_err(|e| e.to_string())?;
    let (pk, sk) = gen(params, &mut rng);
    let engine = Engine::new(EngineConfig::new(rng.random()));
    Ok((pk, sk, engine, rng))
}

fn public_key_correctness(seed: u64) -> Check {
    let (pk, mut sk, mut engine, mut rng) = scheme(seed)?;
    let mut accepted = 0;
    for _ in 0..1000 {
        let (note, bpk) = mint_note(&pk, &mut sk, &mut engine, &mut rng)?;
        let (ok, note) = qv(&bpk, note, &mut engine).map_err(|e| e.to_string())?;
        engine.discard(note.into_state()).map_err(|e| e.to_string())?;
        accepted += ok as usize;
    }
    check(accepted == 1000, format!("{accepted}/1000 honest pipelines accepted at n=8"))
}

fn sabotage_resistance(seed: u64) -> Check {
    let (pk, mut sk, mut engine, mut rng) = scheme(seed)?;
    let mut perfect = 0;
    for _ in 0..100 {
        let (mut note, bpk) = mint_note(&pk, &mut sk, &mut engine, &mut rng)?;
        let mut all = true;
        for _ in 0..100 {
            let (ok, next) = qv(&bpk, note, &mut engine).map_err(|e| e.to_string())?;
            all &= ok;
            note = next;
        }
        engine.discard(note.into_state()).map_err(|e| e.to_string())?;
        perfect += all as usize;
    }
    check(perfect == 100, format!("{perfect}/100 notes passed 100 re-verifications"))
}

fn mutual_exclusivity(seed: u64) -> Check {
    let mut bus = LocalBus::with_topology(&Topology::simple(2, 2, 8), seed).map_err(|e| e.to_string())?;
    let rounds = 1000;
    let mut old_handle_errors = 0;
    let mut replays_refused = 0;
    let mut certs_accepted = 0;
    for i in 0..rounds {
        let minted = process_on_demand_mint(&mut bus, "wallet-0", 1).map_err(|e| e.to_string())?;
        if minted.outcome != Outcome::Completed {
            return Err(format!("mint {i} ended {:?}", minted.outcome));
        }
        let serial = minted.serials[0];
        let handle = bus
            .system()
            .msb("msb-0")
            .map_err(|e| e.to_string())?
            .stored(serial)
            .ok_or("minted note not stored")?
            .note
            .state()
            .id();
        let paid = process_online_payment(&mut bus, "wallet-0", "wallet-1", serial).map_err(|e| e.to_string())?;
        certs_accepted += paid.outcome.is_completed() as usize;

        let engine = &mut bus.system_mut().ctx_mut().engine;
        let stale = engine.stale_handle(handle).map_err(|e| e.to_string())?;
        if engine.measure_all(stale, &[Basis::Computational; 8]).is_err() {
            old_handle_errors += 1;
        }

        let confirm = bus
            .history()
            .iter()
            .rev()
            .find(|m| m.correlation_id == paid.correlation_id && m.kind == MessageKind::DestroyConfirmRequest)
            .ok_or("no destroy confirmation sent")?
            .clone();
        let Payload::ConfirmDestroy { cert, .. } = &confirm.payload else {
            return Err("unexpected confirmation payload".into());
        };
        let direct = cv(bus.system().ia().registry(), cert);
        let mut replay = confirm.clone();
        replay.correlation_id = format!("replay-{i}");
        let corr = replay.correlation_id.clone();
        bus.inject(Envelope::classical(replay));
        bus.run().map_err(|e| e.to_string())?;
        let refused = bus.history().iter().any(|m| {
            m.correlation_id == corr && matches!(&m.payload, Payload::Failure { reason } if reason.starts_with("cert:"))
        });
        replays_refused += (!direct.valid && refused) as usize;
    }
    check(
        old_handle_errors == rounds && replays_refused == rounds,
        format!(
            "old handle errored {old_handle_errors}/{rounds}, replay refused {replays_refused}/{rounds} ({certs_accepted} first certs accepted)"
        ),
    )
}

fn forgery_rejection(seed: u64) -> Check {
    let (pk, mut sk, mut engine, mut rng) = scheme(seed)?;
    let (note, bpk) = mint_note(&pk, &mut sk, &mut engine, &mut rng)?;
    engine.discard(note.into_state()).map_err(|e| e.to_string())?;
    let secret = sk.note(bpk.serial).ok_or("missing registry entry")?.secret().clone();
    let everything: Vec<BitString> = BitString::all(8).collect();
    let trials = 10_000u32;
    let mut passed = 0u32;
    for _ in 0..trials {
        let forged = engine.prepare_uniform(8, &everything).map_err(|e| e.to_string())?;
        let (ok, state) = qv(&bpk, QuantumBanknote::new(bpk.serial, bpk.value, forged), &mut engine)
            .map_err(|e| e.to_string())?;
        engine.discard(state.into_state()).map_err(|e| e.to_string())?;
        passed += ok as u32;
    }
    let p = 1.0 / 16.0;
    let rate = passed as f64 / trials as f64;
    let stderr = (p * (1.0 - p) / trials as f64).sqrt();
    let z = (rate - p) / stderr;
    let mut basis_accepted = 0;
    let outside: Vec<&BitString> = everything.iter().filter(|x| !secret.contains(x)).collect();
    for _ in 0..trials {
        let x = outside[rng.random_range(0..outside.len())];
        let forged = engine.prepare_basis_state(x).map_err(|e| e.to_string())?;
        let (ok, state) = qv(&bpk, QuantumBanknote::new(bpk.serial, bpk.value, forged), &mut engine)
            .map_err(|e| e.to_string())?;
        engine.discard(state.into_state()).map_err(|e| e.to_string())?;
        basis_accepted += ok as u32;
    }
    check(
        z.abs() <= 5.0 && basis_accepted == 0,
        format!("uniform pass rate {rate:.4} (z={z:+.2}), basis-state forgeries accepted {basis_accepted}/{trials}"),
    )
}

fn conservation(seed: u64) -> Check {
    let mut strict = 0;
    let mut with_losses = 0;
    let mut problems = Vec::new();
    for i in 0..100u64 {
        let config = demo_config(seed.wrapping_add(i));
        let mix = if i % 4 == 3 { FuzzMix::TransfersOnly } else { FuzzMix::Mixed };
        let script = fuzz_script(&config, seed ^ i.wrapping_mul(0x9e37_79b9), 200, 2, mix);
        let t = run_scenario(config, &script).map_err(|e| e.to_string())?;
        let s = t.summary().ok_or("missing summary")?;
        let violations = t.violations();
        if !violations.is_empty() {
            problems.push(format!("scenario {i}: {}", violations.join("+")));
        }
        if s.audit.double_custody > 0 {
            problems.push(format!("scenario {i}: double custody"));
        }
        let rejections = s.audit.rejections > 0 || s.audit.losses() > 0;
        if rejections {
            with_losses += 1;
        } else if s.ledger.ia_active_value == s.ledger.custody_total {
            strict += 1;
        } else {
            problems.push(format!("scenario {i}: active != custody"));
        }
        if mix == FuzzMix::TransfersOnly {
            let mint_phase: std::collections::BTreeSet<&str> = t
                .events()
                .iter()
                .filter_map(|r| match r {
                    Record::Action { correlation_id, op, .. } if !op.is_transfer() => Some(correlation_id.as_str()),
                    _ => None,
                })
                .collect();
            let ia_in_transfers = t
                .events()
                .iter()
                .filter(|r| matches!(r, Record::Send { to, correlation_id, .. } if to == "ia" && !mint_phase.contains(correlation_id.as_str())))
                .count();
            if ia_in_transfers > 0 {
                problems.push(format!("scenario {i}: {ia_in_transfers} issuer messages in transfers"));
            }
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("100 scenarios clean ({strict} exact, {with_losses} with logged protocol losses)")
        } else {
            problems.join("; ")
        },
    )
}

fn determinism(seed: u64) -> Check {
    let mut detail = Vec::new();
    let mut ok = true;
    for name in ["happy-path", "double-spend", "online-payment"] {
        let (config, script) = named_scenario(name, seed).ok_or("unknown scenario")?;
        let reference = run_scenario(config.clone(), &script).map_err(|e| e.to_string())?.to_jsonl();
        let same = (0..9)
            .map(|_| run_scenario(config.clone(), &script).map(|t| t.to_jsonl() == reference))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?
            .into_iter()
            .filter(|b| *b)
            .count();
        ok &= same == 9;
        detail.push(format!("{name} {}/10", same + 1));
    }
    check(ok, detail.join(", "))
}

/// Runs criterion `id` (1-based).
pub fn run_criterion(id: usize, seed: u64) -> CriterionResult {
    let sub = sub_seed(seed, id);
    let started = Instant::now();
    let outcome = match id {
        1 => optimal_bound(sub),
        2 => attack_hierarchy(sub),
        3 => wiesner_correctness(sub),
        4 => uncertainty(sub),
        5 => public_key_correctness(sub),
        6 => sabotage_resistance(sub),
        7 => mutual_exclusivity(sub),
        8 => forgery_rejection(sub),
        9 => conservation(sub),
        10 => determinism(sub),
        _ => Err(format!("no criterion {id}")),
    };
    let (passed, detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CriterionResult {
        id,
        name: CRITERIA.get(id.wrapping_sub(1)).copied().unwrap_or("unknown"),
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    }
}

pub fn run_all(seed: u64) -> AcceptanceReport {
    AcceptanceReport {
        seed,
        criteria: (1..=CRITERIA.len()).map(|id| run_criterion(id, seed)).collect(),
    }
}

pub const DEFAULT_SEED: u64 = 20_240_601;
