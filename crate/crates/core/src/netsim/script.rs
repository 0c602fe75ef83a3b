use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NetsimError, NetworkConfig};
use crate::vault::{NodeId, Role};

/// Scripted process start.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScriptOp {
    Mint {
        wallet: NodeId,
        value: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// Transfer; inter- or intra-vault depending on the wallets' homes.
    Pay {
        payer: NodeId,
        receiver: NodeId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    IntraPay {
        payer: NodeId,
        receiver: NodeId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    OnlinePay {
        payer: NodeId,
        receiver: NodeId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new_label: Option<String>,
    },
}

impl ScriptOp {
    pub fn is_transfer(&self) -> bool {
        matches!(self, ScriptOp::Pay { .. } | ScriptOp::IntraPay { .. })
    }

    fn wallets(&self) -> Vec<&NodeId> {
        match self {
            ScriptOp::Mint { wallet, .. } => vec![wallet],
            ScriptOp::Pay { payer, receiver, .. }
            | ScriptOp::IntraPay { payer, receiver, .. }
            | ScriptOp::OnlinePay { payer, receiver, .. } => vec![payer, receiver],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptAction {
    pub at: u64,
    #[serde(flatten)]
    pub op: ScriptOp,
}

impl ScriptAction {
    pub fn new(at: u64, op: ScriptOp) -> Self {
        Self { at, op }
    }
}

/// Timed list of process starts. `note` fields name a label bound by an
/// earlier action, a hex serial, or (when absent) the payer's lowest
/// custodied serial at the time the action fires.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub actions: Vec<ScriptAction>,
}

fn home(config: &NetworkConfig, wallet: &str) -> Option<NodeId> {
    let node = config.nodes.iter().find(|n| n.id == wallet)?;
    match node.role {
        Role::Wallet => node.home_msb.clone(),
        Role::QuantumWallet => Some(node.id.clone()),
        _ => None,
    }
}

impl ScenarioScript {
    pub fn from_json(s: &str) -> Result<Self, NetsimError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    /// Every referenced node must be a wallet of `config`; values positive;
    /// intra-pay parties must share a vault.
    pub fn validate(&self, config: &NetworkConfig) -> Result<(), NetsimError> {
        for (i, a) in self.actions.iter().enumerate() {
            for w in a.op.wallets() {
                if home(config, w).is_none() {
                    return Err(NetsimError::Script(format!("action {i}: {w} is not a wallet")));
                }
            }
            match &a.op {
                ScriptOp::Mint { value: 0, .. } => {
                    return Err(NetsimError::Script(format!("action {i}: zero value")));
                }
                ScriptOp::IntraPay { payer, receiver, .. } if home(config, payer) != home(config, receiver) => {
                    return Err(NetsimError::Script(format!(
                        "action {i}: {payer} and {receiver} use different vaults"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn is_pure_transfer_after_mints(&self) -> bool {
        let first_transfer = self.actions.iter().position(|a| a.op.is_transfer());
        match first_transfer {
            None => true,
            Some(i) => self.actions[i..].iter().all(|a| a.op.is_transfer()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FuzzMix {
    /// Mints, transfers and online payments interleaved.
    Mixed,
    /// A block of mints, then transfers only.
    TransfersOnly,
}

/// Random script over the wallets of `config`, `len` actions spaced
/// `spacing` ticks apart.
pub fn fuzz_script(config: &NetworkConfig, seed: u64, len: usize, spacing: u64, mix: FuzzMix) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wallets: Vec<NodeId> = config
        .nodes
        .iter()
        .filter(|n| matches!(n.role, Role::Wallet | Role::QuantumWallet))
        .map(|n| n.id.clone())
        .collect();
    assert!(!wallets.is_empty(), "fuzzing needs at least one wallet");
    let mints = match mix {
        FuzzMix::Mixed => 0,
        FuzzMix::TransfersOnly => (len / 4).max(1).min(len),
    };
    let mut labels: Vec<String> = Vec::new();
    let mut actions = Vec::with_capacity(len);
    for i in 0..len {
        let at = i as u64 * spacing;
        let pick = |rng: &mut ChaCha8Rng| wallets[rng.random_range(0..wallets.len())].clone();
        let payer = pick(&mut rng);
        let receiver = pick(&mut rng);
        let note = |rng: &mut ChaCha8Rng, labels: &[String]| -> Option<String> {
            let r: f64 = rng.random();
            if r < 0.1 {
                Some(format!("{:016x}", rng.random::<u64>()))
            } else if r < 0.25 && !labels.is_empty() {
                Some(labels[rng.random_range(0..labels.len())].clone())
            } else {
                None
            }
        };
        let roll: f64 = rng.random();
        let op = if i < mints || (mix == FuzzMix::Mixed && roll < 0.35) {
            let label = format!("n{i}");
            labels.push(label.clone());
            ScriptOp::Mint {
                wallet: payer,
                value: rng.random_range(1..=100),
                label: Some(label),
            }
        } else if mix == FuzzMix::Mixed && roll < 0.55 {
            let label = format!("n{i}");
            let op = ScriptOp::OnlinePay {
                payer,
                receiver,
                note: note(&mut rng, &labels),
                new_label: Some(label.clone()),
            };
            labels.push(label);
            op
        } else if home(config, &payer) == home(config, &receiver) && rng.random_bool(0.5) {
            ScriptOp::IntraPay {
                payer,
                receiver,
                note: note(&mut rng, &labels),
            }
        } else {
            ScriptOp::Pay {
                payer,
                receiver,
                note: note(&mut rng, &labels),
            }
        };
        actions.push(ScriptAction::new(at, op));
    }
    ScenarioScript { actions }
}
