use quantum_vault::money::{QuantumBanknote, Serial};
use quantum_vault::netsim::{
    audit, build_simulation, demo_config, fuzz_script, named_scenario, run_scenario, ClassicalAction, ClassicalRule,
    FuzzMix, LinkSpec, MessageMatch, NetsimError, NetworkConfig, NodeSpec, QuantumAction, QuantumRule, Record,
    ScenarioScript, ScriptAction, ScriptOp, Transcript, SCENARIO_NAMES,
};
use quantum_vault::qsim::BitString;
use quantum_vault::vault::{Envelope, LedgerEvent, MessageKind, Outcome, Payload, ProtocolMessage, Role};

fn mint(at: u64, wallet: &str, value: u64, label: &str) -> ScriptAction {
    ScriptAction::new(
        at,
        ScriptOp::Mint {
            wallet: wallet.into(),
            value,
            label: Some(label.into()),
        },
    )
}

fn pay(at: u64, payer: &str, receiver: &str, note: Option<&str>) -> ScriptAction {
    ScriptAction::new(
        at,
        ScriptOp::Pay {
            payer: payer.into(),
            receiver: receiver.into(),
            note: note.map(Into::into),
        },
    )
}

fn script(actions: Vec<ScriptAction>) -> ScenarioScript {
    ScenarioScript { actions }
}

fn outcomes(t: &Transcript) -> Vec<Outcome> {
    t.receipts().iter().map(|r| r.outcome.clone()).collect()
}

fn assert_clean(t: &Transcript) {
    assert_eq!(t.violations(), Vec::<String>::new());
}

#[test]
fn demo_config_is_valid_and_round_trips() {
    let c = demo_config(7);
    c.validate().unwrap();
    let json = c.to_json_pretty();
    let back = NetworkConfig::from_json(&json).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.digest(), c.digest());
    assert_eq!(c.digest().len(), 64);
    assert_ne!(demo_config(8).digest(), c.digest());
}

#[test]
fn config_defaults_apply() {
    let json = r#"{"seed": 3, "nodes": [
        {"id": "ia", "role": "ia"},
        {"id": "m", "role": "msb"},
        {"id": "w", "role": "wallet", "home_msb": "m"}]}"#;
    let c = NetworkConfig::from_json(json).unwrap();
    assert_eq!(c.qubits, 8);
    assert_eq!(c.latency, 1);
    assert!(c.classical_links.is_none());
    build_simulation(c).unwrap();
}

#[test]
fn config_rejects_bad_topologies() {
    let mut two_ia = demo_config(1);
    two_ia.nodes.push(NodeSpec::new("ia2", Role::Ia));
    assert!(matches!(build_simulation(two_ia), Err(NetsimError::Config(_))));

    let mut wallet_q = demo_config(1);
    wallet_q.quantum_links = Some(vec![LinkSpec::new("alice", "msb-a")]);
    assert!(matches!(build_simulation(wallet_q), Err(NetsimError::Config(_))));

    let mut orphan = demo_config(1);
    orphan.nodes.push(NodeSpec::wallet("eve", "msb-z"));
    assert!(matches!(build_simulation(orphan), Err(NetsimError::Config(_))));

    let mut qw = demo_config(1);
    qw.nodes.push(NodeSpec::new("qw", Role::QuantumWallet));
    assert!(matches!(build_simulation(qw.clone()), Err(NetsimError::Config(_))));
    qw.test_quantum_wallets = true;
    build_simulation(qw).unwrap();

    for qubits in [0, 3, 7, 22] {
        let mut c = demo_config(1);
        c.qubits = qubits;
        assert!(matches!(build_simulation(c), Err(NetsimError::Config(_))), "{qubits}");
    }

    let unknown_field = r#"{"seed": 1, "nodes": [], "colour": 3}"#;
    assert!(matches!(NetworkConfig::from_json(unknown_field), Err(NetsimError::Json(_))));
    let quantum_dup = r#"{"match": {}, "action": "duplicate"}"#;
    assert!(serde_json::from_str::<QuantumRule>(quantum_dup).is_err());
}

#[test]
fn empty_scenario_is_quiescent_at_zero() {
    let t = run_scenario(demo_config(1), &ScenarioScript::default()).unwrap();
    let s = t.summary().unwrap();
    assert!(s.quiescent);
    assert_eq!(s.final_time, 0);
    assert!(s.receipts.is_empty());
    assert_eq!(s.ledger.ia_active_value, 0);
    assert_clean(&t);
}

#[test]
fn single_mint_completes() {
    let t = run_scenario(demo_config(2), &script(vec![mint(0, "alice", 100, "a")])).unwrap();
    assert_eq!(outcomes(&t), vec![Outcome::Completed]);
    let s = t.summary().unwrap();
    assert!(s.quiescent);
    assert_eq!(s.ledger.ia_active_value, 100);
    assert_eq!(s.ledger.custody["msb-a"], 100);
    assert_eq!(s.ledger.wallets["alice"], 100);
    assert_clean(&t);
}

#[test]
fn mint_then_pay_five_ticks_later() {
    let t = run_scenario(
        demo_config(3),
        &script(vec![mint(0, "alice", 100, "a"), pay(5, "alice", "bob", Some("a"))]),
    )
    .unwrap();
    assert_eq!(outcomes(&t), vec![Outcome::Completed, Outcome::Completed]);
    let s = t.summary().unwrap();
    assert_eq!(s.ledger.custody["msb-b"], 100);
    assert_eq!(s.ledger.wallets["bob"], 100);
    assert_eq!(s.ledger.wallets["alice"], 0);
    assert_eq!(s.audit.ia_contact_in_transfers, 0);
    assert_clean(&t);
}

#[test]
fn paying_an_unowned_serial_is_an_error() {
    let t = run_scenario(
        demo_config(4),
        &script(vec![
            mint(0, "alice", 100, "a"),
            pay(10, "bob", "carol", Some("a")),
            pay(12, "carol", "dave", None),
        ]),
    )
    .unwrap();
    assert_eq!(
        outcomes(&t),
        vec![
            Outcome::Completed,
            Outcome::Error("not-in-custody".into()),
            Outcome::Error("unknown-note".into()),
        ]
    );
    let s = t.summary().unwrap();
    assert_eq!(s.ledger.custody["msb-a"], 100);
    assert_eq!(s.ledger.custody["msb-b"], 0);
    assert_clean(&t);
}

#[test]
fn named_scenarios_behave() {
    let (c, s) = named_scenario("happy-path", 5).unwrap();
    let t = run_scenario(c, &s).unwrap();
    assert!(outcomes(&t).iter().all(Outcome::is_completed));
    assert_eq!(t.summary().unwrap().ledger.wallets["dave"], 50);
    assert_clean(&t);

    let (c, s) = named_scenario("double-spend", 5).unwrap();
    let t = run_scenario(c, &s).unwrap();
    assert_eq!(outcomes(&t)[2], Outcome::Error("not-in-custody".into()));
    assert_clean(&t);

    let (c, s) = named_scenario("lossy-network", 5).unwrap();
    let t = run_scenario(c, &s).unwrap();
    let sum = t.summary().unwrap();
    assert_eq!(sum.audit.lost_value, 100);
    assert_eq!(sum.ledger.ia_active_value - sum.ledger.custody_total, 100);
    assert_eq!(outcomes(&t)[2], Outcome::Timeout);
    assert_eq!(outcomes(&t)[3], Outcome::Completed);
    assert_clean(&t);

    assert!(named_scenario("nope", 1).is_none());
    assert_eq!(SCENARIO_NAMES.len(), 4);
}

#[test]
fn online_payment_scenario_reissues() {
    let (c, s) = named_scenario("online-payment", 6).unwrap();
    let t = run_scenario(c, &s).unwrap();
    let out = outcomes(&t);
    assert_eq!(out[0], Outcome::Completed);
    assert_clean(&t);
    let s = t.summary().unwrap();
    if out.iter().all(Outcome::is_completed) {
        assert_eq!(s.ledger.wallets["dave"], 100);
        assert!(s.audit.strict_conservation());
    } else {
        assert!(out.contains(&Outcome::RejectedCert));
    }
    let ia_from_transfers = t.events().iter().any(|r| {
        matches!(r, Record::Send { to, kind, .. } if to == "ia" && *kind == MessageKind::QNoteTransfer)
    });
    assert!(!ia_from_transfers);
}

#[test]
fn same_seed_gives_identical_bytes() {
    for name in SCENARIO_NAMES {
        let (c, s) = named_scenario(name, 11).unwrap();
        let a = run_scenario(c.clone(), &s).unwrap().to_jsonl();
        let b = run_scenario(c, &s).unwrap().to_jsonl();
        assert_eq!(a, b, "{name}");
    }
    let (c, s) = named_scenario("happy-path", 12).unwrap();
    let other = run_scenario(c, &s).unwrap().to_jsonl();
    let (c, s) = named_scenario("happy-path", 11).unwrap();
    assert_ne!(run_scenario(c, &s).unwrap().to_jsonl(), other);
}

#[test]
fn transcript_round_trips_and_refolds() {
    let (c, s) = named_scenario("lossy-network", 13).unwrap();
    let t = run_scenario(c, &s).unwrap();
    let text = t.to_jsonl();
    let back = Transcript::from_jsonl(&text).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_jsonl(), text);
    assert_eq!(back.audit(), t.summary().unwrap().audit);
    assert!(text.lines().all(|l| !l.contains("amplitude")));
    assert!(text.contains("\"quantum\":true"));
}

#[test]
fn duplicate_rule_is_absorbed_by_dedup() {
    let mut c = demo_config(14);
    c.adversary.classical.push(ClassicalRule {
        matches: MessageMatch::default(),
        action: ClassicalAction::Duplicate,
        limit: None,
    });
    let t = run_scenario(
        c,
        &script(vec![mint(0, "alice", 40, "a"), pay(10, "alice", "bob", Some("a"))]),
    )
    .unwrap();
    assert_eq!(outcomes(&t), vec![Outcome::Completed, Outcome::Completed]);
    let dup_deliveries = t
        .events()
        .iter()
        .filter(|r| matches!(r, Record::Deliver { kind: MessageKind::FinalPk, .. }))
        .count();
    assert_eq!(dup_deliveries, 2);
    let s = t.summary().unwrap();
    assert_eq!(s.ledger.custody_total, 40);
    assert_eq!(s.ledger.wallets["bob"], 40);
    assert_clean(&t);
}

#[test]
fn delay_rule_shifts_delivery() {
    let plain = run_scenario(demo_config(15), &script(vec![mint(0, "alice", 1, "a")])).unwrap();
    let mut c = demo_config(15);
    c.adversary.classical.push(ClassicalRule {
        matches: MessageMatch {
            kind: Some(MessageKind::AckCipher),
            ..MessageMatch::default()
        },
        action: ClassicalAction::Delay(7),
        limit: None,
    });
    let delayed = run_scenario(c, &script(vec![mint(0, "alice", 1, "a")])).unwrap();
    assert_eq!(
        delayed.summary().unwrap().final_time,
        plain.summary().unwrap().final_time + 7
    );
    assert_eq!(outcomes(&delayed), vec![Outcome::Completed]);
}

#[test]
fn dropped_issuer_traffic_times_out_without_moving_funds() {
    let mut c = demo_config(16);
    c.adversary.classical.push(ClassicalRule {
        matches: MessageMatch {
            to: Some("ia".into()),
            ..MessageMatch::default()
        },
        action: ClassicalAction::Drop,
        limit: None,
    });
    let t = run_scenario(c, &script(vec![mint(0, "alice", 10, "a")])).unwrap();
    assert_eq!(outcomes(&t), vec![Outcome::Timeout]);
    let s = t.summary().unwrap();
    assert_eq!(s.final_time, 64);
    assert_eq!(s.ledger.ia_active_value, 0);
    assert_clean(&t);
}

#[test]
fn dropped_final_key_strands_an_active_note() {
    let mut c = demo_config(17);
    c.adversary.classical.push(ClassicalRule {
        matches: MessageMatch {
            kind: Some(MessageKind::FinalPk),
            ..MessageMatch::default()
        },
        action: ClassicalAction::Drop,
        limit: Some(1),
    });
    let t = run_scenario(c, &script(vec![mint(0, "alice", 10, "a"), mint(0, "bob", 5, "b")])).unwrap();
    let s = t.summary().unwrap();
    assert_eq!(s.audit.stranded_value, 10);
    assert_eq!(s.ledger.ia_active_value, 15);
    assert_eq!(s.ledger.custody_total, 5);
    assert!(s.audit.loss_accounting_holds());
    assert_clean(&t);
}

#[test]
fn quantum_drop_is_logged_as_loss() {
    let mut c = demo_config(18);
    c.adversary.quantum.push(QuantumRule {
        matches: MessageMatch::default(),
        action: QuantumAction::Drop,
        limit: None,
    });
    let t = run_scenario(
        c,
        &script(vec![mint(0, "alice", 100, "a"), pay(10, "alice", "bob", Some("a"))]),
    )
    .unwrap();
    let lost = t
        .events()
        .iter()
        .filter(|r| matches!(r, Record::Ledger { entry: LedgerEvent::Lost { value: 100, .. }, .. }))
        .count();
    assert_eq!(lost, 1);
    let s = t.summary().unwrap();
    assert_eq!(s.audit.lost_value, 100);
    assert_eq!(s.ledger.ia_active_value, 100);
    assert_eq!(s.ledger.custody_total, 0);
    assert_eq!(outcomes(&t)[1], Outcome::Timeout);
    assert_clean(&t);
}

#[test]
fn missing_quantum_link_loses_the_note() {
    let mut c = demo_config(19);
    c.quantum_links = Some(vec![]);
    let t = run_scenario(
        c,
        &script(vec![mint(0, "alice", 9, "a"), pay(10, "alice", "bob", Some("a"))]),
    )
    .unwrap();
    assert!(t
        .events()
        .iter()
        .any(|r| matches!(r, Record::Undeliverable { reason, .. } if reason == "no-link")));
    assert_eq!(t.summary().unwrap().audit.lost_value, 9);
    assert_clean(&t);
}

#[test]
fn direct_sends_check_links_and_ownership() {
    let mut c = demo_config(20);
    c.classical_links = Some(vec![LinkSpec::new("alice", "msb-a")]);
    let mut sim = build_simulation(c).unwrap();
    let msg = ProtocolMessage::new("alice", "ia", "x", Payload::Failure { reason: "hi".into() });
    assert!(matches!(
        sim.send_classical(msg),
        Err(NetsimError::NoLink { quantum: false, .. })
    ));
    let ok = ProtocolMessage::new("alice", "msb-a", "x", Payload::Failure { reason: "hi".into() });
    sim.send_classical(ok).unwrap();

    let engine = &mut sim.system_mut().ctx_mut().engine;
    let live = engine.prepare_basis_state(&BitString::zeros(8)).unwrap();
    let id = live.id();
    engine.discard(live).unwrap();
    let stale = engine.stale_handle(id).unwrap();
    let header = ProtocolMessage::new("msb-a", "msb-b", "y", Payload::Validation { serial: Serial(1), valid: true });
    let env = Envelope::quantum(header.clone(), QuantumBanknote::new(Serial(1), 1, stale));
    assert!(matches!(sim.send_quantum(env), Err(NetsimError::NotOwner(_))));
    assert!(matches!(
        sim.send_quantum(Envelope::classical(header)),
        Err(NetsimError::NotOwner(_))
    ));
    let t = sim.run_until_quiescent(10).unwrap();
    assert!(t.summary().unwrap().quiescent);
    assert!(matches!(sim.run_until_quiescent(0), Err(NetsimError::ZeroBudget)));
}

#[test]
fn budget_exhaustion_is_flagged() {
    let mut sim = build_simulation(demo_config(21)).unwrap();
    sim.load_script(&script(vec![mint(0, "alice", 1, "a"), mint(50, "bob", 1, "b")]))
        .unwrap();
    let t = sim.run_until_quiescent(3).unwrap();
    assert!(!t.summary().unwrap().quiescent);
    assert!(t.violations().contains(&"non-quiescent".to_owned()));
    let t = sim.run_until_quiescent(1000).unwrap();
    assert!(t.summary().unwrap().quiescent);
    assert_eq!(outcomes(&t), vec![Outcome::Completed, Outcome::Completed]);
}

#[test]
fn scripts_are_validated() {
    let c = demo_config(22);
    let bad_node = script(vec![mint(0, "mallory", 1, "m")]);
    assert!(matches!(run_scenario(c.clone(), &bad_node), Err(NetsimError::Script(_))));
    let vault_as_wallet = script(vec![mint(0, "msb-a", 1, "m")]);
    assert!(matches!(run_scenario(c.clone(), &vault_as_wallet), Err(NetsimError::Script(_))));
    let zero = script(vec![mint(0, "alice", 0, "m")]);
    assert!(matches!(run_scenario(c.clone(), &zero), Err(NetsimError::Script(_))));
    let cross = script(vec![ScriptAction::new(
        0,
        ScriptOp::IntraPay {
            payer: "alice".into(),
            receiver: "bob".into(),
            note: None,
        },
    )]);
    assert!(matches!(run_scenario(c, &cross), Err(NetsimError::Script(_))));
    assert!(matches!(
        ScenarioScript::from_json(r#"{"actions": [{"at": 0, "action": "teleport"}]}"#),
        Err(NetsimError::Json(_))
    ));
    let parsed = ScenarioScript::from_json(
        r#"{"actions": [{"at": 0, "action": "mint", "wallet": "alice", "value": 3, "label": "x"},
                        {"at": 9, "action": "online-pay", "payer": "alice", "receiver": "bob", "note": "x"}]}"#,
    )
    .unwrap();
    assert_eq!(parsed.actions.len(), 2);
}

#[test]
fn fuzzed_mixed_scenarios_hold_invariants() {
    let mut rejections = 0;
    for seed in 0..12u64 {
        let c = demo_config(seed);
        let s = fuzz_script(&c, seed ^ 0xabc, 60, 3, FuzzMix::Mixed);
        let t = run_scenario(c, &s).unwrap();
        assert_clean(&t);
        let sum = t.summary().unwrap();
        assert_eq!(sum.audit.double_custody, 0);
        if sum.audit.rejections == 0 && sum.audit.losses() == 0 {
            assert_eq!(sum.ledger.ia_active_value, sum.ledger.custody_total);
        }
        rejections += sum.audit.rejections;
        let back = Transcript::from_jsonl(&t.to_jsonl()).unwrap();
        assert_eq!(back.audit(), sum.audit);
    }
    assert!(rejections < 60);
}

#[test]
fn fuzzed_transfer_scenarios_never_reach_the_issuer() {
    for seed in 0..8u64 {
        let c = demo_config(100 + seed);
        let s = fuzz_script(&c, seed, 80, 2, FuzzMix::TransfersOnly);
        assert!(s.is_pure_transfer_after_mints());
        let t = run_scenario(c, &s).unwrap();
        assert_clean(&t);
        let sum = t.summary().unwrap();
        assert_eq!(sum.audit.ia_contact_in_transfers, 0);
        assert_eq!(sum.ledger.ia_active_value, sum.ledger.custody_total);
    }
}

#[test]
fn auditor_detects_tampered_logs() {
    let (c, s) = named_scenario("happy-path", 23).unwrap();
    let t = run_scenario(c, &s).unwrap();
    let events = t.events().to_vec();

    let mut doubled = events.clone();
    let credit = doubled
        .iter()
        .find(|r| matches!(r, Record::Ledger { entry: LedgerEvent::Credited { .. }, .. }))
        .unwrap()
        .clone();
    doubled.push(credit);
    assert_eq!(audit(&doubled).double_custody, 1);

    let mut reordered = events.clone();
    let first_deliver = reordered
        .iter()
        .position(|r| matches!(r, Record::Deliver { .. }))
        .unwrap();
    let d = reordered.remove(first_deliver);
    reordered.insert(1, d);
    assert!(audit(&reordered).causality_violations > 0);

    let mut redelivered = events.clone();
    let q = redelivered
        .iter()
        .find(|r| matches!(r, Record::Deliver { quantum: Some(_), .. }))
        .unwrap()
        .clone();
    redelivered.push(q);
    assert_eq!(audit(&redelivered).quantum_redeliveries, 1);

    let mut leaky = events.clone();
    leaky.push(Record::Send {
        t: 99,
        id: "m999999".into(),
        from: "msb-a".into(),
        to: "ia".into(),
        kind: MessageKind::MintRequest,
        correlation_id: "zz".into(),
        payload: serde_json::json!({"type": "issue-request", "msb": "alice", "value": 1}),
        quantum: None,
    });
    assert_eq!(audit(&leaky).confidentiality_violations, 1);

    let mut regress = events;
    regress.push(Record::Ledger {
        t: 99,
        entry: LedgerEvent::Status {
            serial: Serial(0),
            value: 1,
            from: None,
            to: quantum_vault::money::NoteStatus::Active,
        },
    });
    assert_eq!(audit(&regress).status_violations, 1);
}

#[test]
fn quantum_wallet_on_the_network() {
    let mut c = demo_config(24);
    c.test_quantum_wallets = true;
    c.nodes.push(NodeSpec::new("qw", Role::QuantumWallet));
    let t = run_scenario(
        c,
        &script(vec![
            mint(0, "alice", 30, "a"),
            pay(10, "alice", "qw", Some("a")),
            mint(20, "qw", 4, "q"),
            pay(30, "qw", "bob", Some("q")),
        ]),
    )
    .unwrap();
    assert!(outcomes(&t).iter().all(Outcome::is_completed), "{:?}", outcomes(&t));
    let s = t.summary().unwrap();
    assert_eq!(s.ledger.custody["qw"], 30);
    assert_eq!(s.ledger.wallets["bob"], 4);
    assert_clean(&t);
}
