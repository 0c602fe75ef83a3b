use quantum_vault::money::{NoteStatus, QuantumBanknote, Serial};
use quantum_vault::qsim::BitString;
use quantum_vault::vault::{
    ia_total_active_value, msb_total_custody_value, process_on_demand_mint, process_online_payment,
    process_transfer_inter_msb, process_transfer_intra_msb, wallet_balance, Envelope, LocalBus, MessageKind, Outcome,
    Payload, ProcessKind, ProtocolMessage, Topology, VaultError,
};

// wallet-0, wallet-2 live at msb-0; wallet-1, wallet-3 at msb-1.
fn bus(seed: u64) -> LocalBus {
    LocalBus::with_topology(&Topology::simple(2, 4, 8), seed).unwrap()
}

fn ia_value(bus: &LocalBus) -> u64 {
    ia_total_active_value(bus.system().ia())
}

fn custody(bus: &LocalBus, msb: &str) -> u64 {
    msb_total_custody_value(bus.system().msb(msb).unwrap())
}

fn balance(bus: &LocalBus, w: &str) -> u64 {
    wallet_balance(bus.system().wallet(w).unwrap())
}

fn mint(bus: &mut LocalBus, wallet: &str, value: u64) -> Serial {
    let r = process_on_demand_mint(bus, wallet, value).unwrap();
    assert_eq!(r.outcome, Outcome::Completed, "{r:?}");
    r.serials[0]
}

fn ia_messages<'a>(bus: &'a LocalBus, corr: &'a str) -> impl Iterator<Item = &'a ProtocolMessage> + 'a {
    bus.history()
        .iter()
        .filter(move |m| m.correlation_id == corr && m.to == "ia")
}

#[test]
fn fresh_system_is_empty() {
    let b = bus(1);
    assert_eq!(ia_value(&b), 0);
    assert_eq!(custody(&b, "msb-0"), 0);
    assert_eq!(custody(&b, "msb-1"), 0);
    assert_eq!(balance(&b, "wallet-0"), 0);
}

#[test]
fn on_demand_mint_happy_path() {
    let mut b = bus(2);
    let r = process_on_demand_mint(&mut b, "wallet-0", 100).unwrap();
    assert_eq!(r.outcome, Outcome::Completed);
    assert_eq!(r.process, ProcessKind::Mint);
    assert_eq!(r.amount, 100);
    let serial = r.serials[0];
    assert_eq!(ia_value(&b), 100);
    assert_eq!(custody(&b, "msb-0"), 100);
    assert_eq!(balance(&b, "wallet-0"), 100);
    let msb = b.system().msb("msb-0").unwrap();
    assert_eq!(msb.serials_of("wallet-0"), vec![serial]);
    assert_eq!(msb.stored_serials().into_iter().collect::<Vec<_>>(), vec![serial]);
    assert_eq!(b.system().ia().registry().status(serial), Some(NoteStatus::Active));
    let kinds: Vec<MessageKind> = b.history().iter().map(|m| m.kind).collect();
    assert_eq!(
        kinds,
        vec![
            MessageKind::MintRequest,
            MessageKind::MintRequest,
            MessageKind::ClassicalNote,
            MessageKind::AckCipher,
            MessageKind::FinalPk,
            MessageKind::ReceiptNotice,
        ]
    );
}

#[test]
fn tampered_ack_leaves_serial_pending() {
    let mut b = bus(3);
    b.set_tamper(|m| {
        if let Payload::Ack(ack) = &mut m.payload {
            ack.tag.0[0] ^= 1;
        }
    });
    let r = process_on_demand_mint(&mut b, "wallet-0", 100).unwrap();
    assert_eq!(r.outcome, Outcome::RejectedCert);
    let serial = b
        .system()
        .ia()
        .registry()
        .notes()
        .next()
        .expect("bank_mint ran")
        .serial;
    assert_eq!(b.system().ia().registry().status(serial), Some(NoteStatus::Pending));
    assert_eq!(custody(&b, "msb-0"), 0);
    assert_eq!(ia_value(&b), 0);
    assert_eq!(b.system().msb("msb-0").unwrap().minting_count(), 0);
}

#[test]
fn two_mints_give_distinct_active_serials() {
    let mut b = bus(4);
    let s1 = mint(&mut b, "wallet-0", 10);
    let s2 = mint(&mut b, "wallet-1", 20);
    assert_ne!(s1, s2);
    let reg = b.system().ia().registry();
    assert_eq!(reg.status(s1), Some(NoteStatus::Active));
    assert_eq!(reg.status(s2), Some(NoteStatus::Active));
    assert_ne!(reg.note(s1).unwrap().secret(), reg.note(s2).unwrap().secret());
}

#[test]
fn zero_value_mint_is_refused() {
    let mut b = bus(5);
    assert_eq!(
        process_on_demand_mint(&mut b, "wallet-0", 0).unwrap_err(),
        VaultError::ZeroValue
    );
}

#[test]
fn inter_msb_transfer_moves_custody_without_issuer() {
    let mut b = bus(6);
    let serial = mint(&mut b, "wallet-0", 100);
    let r = process_transfer_inter_msb(&mut b, "wallet-0", "wallet-1", serial).unwrap();
    assert_eq!(r.outcome, Outcome::Completed);
    assert_eq!(r.process, ProcessKind::InterTransfer);
    assert_eq!(b.system().msb("msb-1").unwrap().serials_of("wallet-1"), vec![serial]);
    assert!(b.system().msb("msb-0").unwrap().serials_of("wallet-0").is_empty());
    assert_eq!(ia_value(&b), 100);
    assert_eq!(custody(&b, "msb-0"), 0);
    assert_eq!(custody(&b, "msb-1"), 100);
    assert_eq!(balance(&b, "wallet-0"), 0);
    assert_eq!(balance(&b, "wallet-1"), 100);
    assert_eq!(ia_messages(&b, &r.correlation_id).count(), 0);
    let validation = b
        .history()
        .iter()
        .find(|m| m.correlation_id == r.correlation_id && m.kind == MessageKind::ValidationResult)
        .unwrap();
    assert!(matches!(validation.payload, Payload::Validation { valid: true, .. }));
}

#[test]
fn second_transfer_of_same_serial_is_not_in_custody() {
    let mut b = bus(7);
    let serial = mint(&mut b, "wallet-0", 100);
    process_transfer_inter_msb(&mut b, "wallet-0", "wallet-1", serial).unwrap();
    let before = (custody(&b, "msb-0"), custody(&b, "msb-1"), ia_value(&b));
    let r = process_transfer_inter_msb(&mut b, "wallet-0", "wallet-3", serial).unwrap();
    assert_eq!(r.outcome, Outcome::Error("not-in-custody".into()));
    assert_eq!(before, (custody(&b, "msb-0"), custody(&b, "msb-1"), ia_value(&b)));
    assert_eq!(ia_messages(&b, &r.correlation_id).count(), 0);
}

#[test]
fn substituted_zero_state_is_mostly_rejected() {
    let mut b = bus(8);
    let mut rejected = 0;
    let rounds = 40;
    b.set_substitute(|note, ctx| {
        let serial = note.serial();
        let value = note.value();
        ctx.engine.discard(note.into_state()).unwrap();
        let zero = ctx.engine.prepare_basis_state(&BitString::zeros(8)).unwrap();
        QuantumBanknote::new(serial, value, zero)
    });
    for _ in 0..rounds {
        let serial = mint(&mut b, "wallet-0", 5);
        let r = process_transfer_inter_msb(&mut b, "wallet-0", "wallet-1", serial).unwrap();
        match r.outcome {
            Outcome::RejectedInvalidNote => {
                rejected += 1;
                assert!(!b.system().msb("msb-1").unwrap().serials_of("wallet-1").contains(&serial));
                let v = b
                    .history()
                    .iter()
                    .find(|m| m.correlation_id == r.correlation_id && m.kind == MessageKind::ValidationResult)
                    .unwrap();
                assert_eq!(v.to, "msb-0");
                assert!(matches!(v.payload, Payload::Validation { valid: false, .. }));
            }
            Outcome::Completed => {}
            other => panic!("unexpected {other:?}"),
        }
    }
    // Acceptance probability of |0..0> is 2^-4 per attempt.
    assert!(rejected >= 30, "{rejected}");
    let lost = 5 * rejected as u64;
    assert_eq!(ia_value(&b) - b.system().total_custody_value(), lost);
}

#[test]
fn intra_msb_transfer_and_self_transfer() {
    let mut b = bus(9);
    let serial = mint(&mut b, "wallet-0", 50);
    let stored_before = b.system().msb("msb-0").unwrap().stored_serials();
    let r = process_transfer_intra_msb(&mut b, "wallet-0", "wallet-2", serial).unwrap();
    assert_eq!(r.outcome, Outcome::Completed);
    assert_eq!(r.process, ProcessKind::IntraTransfer);
    let msb = b.system().msb("msb-0").unwrap();
    assert_eq!(msb.stored_serials(), stored_before);
    assert_eq!(msb.serials_of("wallet-2"), vec![serial]);
    assert_eq!(balance(&b, "wallet-2"), 50);
    assert_eq!(balance(&b, "wallet-0"), 0);
    assert_eq!(ia_messages(&b, &r.correlation_id).count(), 0);

    let same = process_transfer_intra_msb(&mut b, "wallet-2", "wallet-2", serial).unwrap();
    assert_eq!(same.outcome, Outcome::Completed);
    assert_eq!(b.system().msb("msb-0").unwrap().serials_of("wallet-2"), vec![serial]);
    assert_eq!(balance(&b, "wallet-2"), 50);

    let unknown = process_transfer_intra_msb(&mut b, "wallet-2", "wallet-0", Serial(12345)).unwrap();
    assert_eq!(unknown.outcome, Outcome::Error("not-in-custody".into()));
}

#[test]
fn process_functions_check_vault_placement() {
    let mut b = bus(10);
    assert!(matches!(
        process_transfer_inter_msb(&mut b, "wallet-0", "wallet-2", Serial(1)),
        Err(VaultError::Topology(_))
    ));
    assert!(matches!(
        process_transfer_intra_msb(&mut b, "wallet-0", "wallet-1", Serial(1)),
        Err(VaultError::Topology(_))
    ));
    assert!(matches!(
        process_on_demand_mint(&mut b, "msb-0", 1),
        Err(VaultError::WrongRole { .. })
    ));
    assert!(matches!(
        process_on_demand_mint(&mut b, "nobody", 1),
        Err(VaultError::UnknownNode(_))
    ));
}

fn online_until_valid(b: &mut LocalBus, payer: &str, receiver: &str, value: u64) -> (Serial, quantum_vault::vault::Receipt) {
    // A valid certificate fails only when the witness is zero (2^-4 at n = 8).
    for _ in 0..10 {
        let serial = mint(b, payer, value);
        let r = process_online_payment(b, payer, receiver, serial).unwrap();
        if r.outcome == Outcome::Completed {
            return (serial, r);
        }
        assert_eq!(r.outcome, Outcome::RejectedCert);
    }
    panic!("ten zero witnesses in a row");
}

#[test]
fn online_payment_destroys_and_reissues() {
    let mut b = bus(11);
    let (old, r) = online_until_valid(&mut b, "wallet-0", "wallet-1", 100);
    assert_eq!(r.process, ProcessKind::OnlinePayment);
    assert_eq!(r.serials[0], old);
    let new = r.serials[1];
    let reg = b.system().ia().registry();
    assert_eq!(reg.status(old), Some(NoteStatus::Destroyed));
    assert_eq!(reg.status(new), Some(NoteStatus::Active));
    assert_eq!(reg.note(new).unwrap().value, 100);
    assert_eq!(b.system().msb("msb-1").unwrap().serials_of("wallet-1"), vec![new]);
    assert_eq!(ia_value(&b), b.system().total_custody_value());
    assert_eq!(balance(&b, "wallet-1"), 100);
}

#[test]
fn online_payment_inside_one_vault() {
    let mut b = bus(12);
    let (_, r) = online_until_valid(&mut b, "wallet-0", "wallet-2", 30);
    assert_eq!(b.system().msb("msb-0").unwrap().serials_of("wallet-2"), vec![r.serials[1]]);
    assert_eq!(ia_value(&b), b.system().total_custody_value());
}

#[test]
fn replayed_certificate_is_refused() {
    let mut b = bus(13);
    let (old, r) = online_until_valid(&mut b, "wallet-0", "wallet-1", 100);
    let confirm = b
        .history()
        .iter()
        .find(|m| m.correlation_id == r.correlation_id && m.kind == MessageKind::DestroyConfirmRequest)
        .unwrap()
        .clone();
    let minted_before = b.system().ia().registry().notes().count();
    let mut replay = confirm.clone();
    replay.correlation_id = "replay-1".into();
    b.inject(Envelope::classical(replay));
    b.run().unwrap();
    let answer = b
        .history()
        .iter()
        .find(|m| m.correlation_id == "replay-1" && m.from == "ia")
        .unwrap();
    match &answer.payload {
        Payload::Failure { reason } => assert_eq!(reason, "cert:spent"),
        other => panic!("expected failure, got {other:?}"),
    }
    assert_eq!(b.system().ia().registry().notes().count(), minted_before);
    assert_eq!(b.system().ia().registry().status(old), Some(NoteStatus::Destroyed));
    // Same correlation id again: dropped as a duplicate.
    b.inject(Envelope::classical(confirm));
    b.run().unwrap();
    assert_eq!(b.system().ia().registry().notes().count(), minted_before);
}

#[test]
fn zero_witness_certificate_is_rejected() {
    let mut b = bus(14);
    let serial = mint(&mut b, "wallet-0", 100);
    b.set_tamper(|m| {
        if let Payload::Cert { cert, .. } = &mut m.payload {
            cert.witness = BitString::zeros(8);
        }
    });
    let r = process_online_payment(&mut b, "wallet-0", "wallet-1", serial).unwrap();
    assert_eq!(r.outcome, Outcome::RejectedCert);
    assert_eq!(b.system().ia().registry().status(serial), Some(NoteStatus::Active));
    assert!(b.system().msb("msb-0").unwrap().stored(serial).is_none());
    assert_eq!(ia_value(&b) - b.system().total_custody_value(), 100);
}

#[test]
fn issuer_never_sees_wallet_identities() {
    let mut b = bus(15);
    let s = mint(&mut b, "wallet-0", 10);
    process_transfer_inter_msb(&mut b, "wallet-0", "wallet-1", s).unwrap();
    online_until_valid(&mut b, "wallet-1", "wallet-3", 10);
    let wallets = b.system().wallet_ids();
    let mut checked = 0;
    for m in b.history().iter().filter(|m| m.to == "ia") {
        let json = serde_json::to_string(&m.payload).unwrap();
        for w in &wallets {
            assert!(!json.contains(w.as_str()), "{json}");
        }
        let cred = b.system().wallet("wallet-0").unwrap().credential();
        assert!(!json.contains(cred));
        checked += 1;
    }
    assert!(checked >= 4);
    // Vaults, in contrast, see both parties and the amount.
    let q = b.history().iter().find(|m| m.kind == MessageKind::QNoteTransfer).unwrap();
    let json = serde_json::to_string(&q.payload).unwrap();
    assert!(json.contains("wallet-0") && json.contains("wallet-1") && json.contains("\"value\":10"));
}

#[test]
fn bad_credential_is_refused() {
    let mut b = bus(16);
    b.set_tamper(|m| {
        if let Payload::WalletMint { credential, .. } = &mut m.payload {
            credential.push('x');
        }
    });
    let r = process_on_demand_mint(&mut b, "wallet-0", 5).unwrap();
    assert_eq!(r.outcome, Outcome::Error("bad-credential".into()));
    assert_eq!(ia_value(&b), 0);
}

#[test]
fn duplicated_classical_messages_are_ignored() {
    let mut b = bus(17);
    let serial = mint(&mut b, "wallet-0", 10);
    let final_pk = b
        .history()
        .iter()
        .find(|m| m.kind == MessageKind::FinalPk)
        .unwrap()
        .clone();
    b.inject(Envelope::classical(final_pk));
    b.run().unwrap();
    assert_eq!(b.system().msb("msb-0").unwrap().serials_of("wallet-0"), vec![serial]);
    assert_eq!(custody(&b, "msb-0"), 10);
}

#[test]
fn quantum_envelopes_cannot_be_duplicated() {
    let mut b = bus(18);
    let serial = mint(&mut b, "wallet-0", 10);
    let r = process_transfer_inter_msb(&mut b, "wallet-0", "wallet-1", serial).unwrap();
    assert_eq!(r.outcome, Outcome::Completed);
    let header = ProtocolMessage::new("msb-0", "msb-1", "x", Payload::Validation { serial, valid: true });
    let classical = Envelope::classical(header);
    assert!(classical.duplicate().is_some());
    assert!(!classical.is_quantum());
}

#[test]
fn quantum_wallet_receives_over_quantum_link() {
    let mut topo = Topology::simple(1, 1, 8);
    topo.quantum_wallets.push("qw".into());
    let mut b = LocalBus::with_topology(&topo, 19).unwrap();
    let serial = mint(&mut b, "wallet-0", 40);
    let r = process_transfer_inter_msb(&mut b, "wallet-0", "qw", serial).unwrap();
    assert_eq!(r.outcome, Outcome::Completed);
    assert_eq!(b.system().msb("qw").unwrap().serials_of("qw"), vec![serial]);
    assert_eq!(balance(&b, "qw"), 40);
    let own = mint(&mut b, "qw", 7);
    assert_eq!(b.system().msb("qw").unwrap().serials_of("qw").len(), 2);
    let back = process_transfer_inter_msb(&mut b, "qw", "wallet-0", own).unwrap();
    assert_eq!(back.outcome, Outcome::Completed);
    assert_eq!(ia_value(&b), b.system().total_custody_value());
}
