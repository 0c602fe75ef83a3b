use super::{
    ClassicalAction, ClassicalRule, MessageMatch, NetworkConfig, QuantumAction, QuantumRule, ScenarioScript,
    ScriptAction, ScriptOp,
};
use crate::vault::MessageKind;

pub const SCENARIO_NAMES: [&str; 4] = ["happy-path", "double-spend", "online-payment", "lossy-network"];

/// One issuer, two vaults, four wallets, 8-qubit notes.
pub fn demo_config(seed: u64) -> NetworkConfig {
    NetworkConfig::new(
        seed,
        8,
        "ia",
        &["msb-a", "msb-b"],
        &[("alice", "msb-a"), ("bob", "msb-b"), ("carol", "msb-a"), ("dave", "msb-b")],
    )
}

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

fn online(at: u64, payer: &str, receiver: &str, note: &str, new_label: &str) -> ScriptAction {
    ScriptAction::new(
        at,
        ScriptOp::OnlinePay {
            payer: payer.into(),
            receiver: receiver.into(),
            note: Some(note.into()),
            new_label: Some(new_label.into()),
        },
    )
}

/// Config and script of a named demo scenario.
pub fn named_scenario(name: &str, seed: u64) -> Option<(NetworkConfig, ScenarioScript)> {
    let mut config = demo_config(seed);
    let actions = match name {
        "happy-path" => vec![
            mint(0, "alice", 100, "a1"),
            mint(0, "bob", 50, "b1"),
            pay(20, "alice", "bob", Some("a1")),
            ScriptAction::new(
                40,
                ScriptOp::IntraPay {
                    payer: "bob".into(),
                    receiver: "dave".into(),
                    note: Some("b1".into()),
                },
            ),
        ],
        "double-spend" => vec![
            mint(0, "alice", 100, "a1"),
            pay(20, "alice", "bob", Some("a1")),
            pay(40, "alice", "dave", Some("a1")),
        ],
        "online-payment" => vec![
            mint(0, "alice", 100, "a1"),
            online(20, "alice", "bob", "a1", "b1"),
            online(60, "bob", "carol", "b1", "c1"),
            pay(100, "carol", "dave", Some("c1")),
        ],
        "lossy-network" => {
            config.adversary.quantum.push(QuantumRule {
                matches: MessageMatch::default(),
                action: QuantumAction::Drop,
                limit: Some(1),
            });
            config.adversary.classical.push(ClassicalRule {
                matches: MessageMatch {
                    kind: Some(MessageKind::ReceiptNotice),
                    ..MessageMatch::default()
                },
                action: ClassicalAction::Duplicate,
                limit: None,
            });
            config.adversary.classical.push(ClassicalRule {
                matches: MessageMatch {
                    kind: Some(MessageKind::FinalPk),
                    ..MessageMatch::default()
                },
                action: ClassicalAction::Delay(3),
                limit: None,
            });
            vec![
                mint(0, "alice", 100, "a1"),
                mint(0, "carol", 70, "c1"),
                pay(20, "alice", "bob", Some("a1")),
                pay(40, "carol", "dave", Some("c1")),
            ]
        }
        _ => return None,
    };
    Some((config, ScenarioScript { actions }))
}
