use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::message::Payload;
use super::{Ctx, Effects, Envelope, IssuingAuthorityState, MsbState, WalletState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Ia,
    Msb,
    Wallet,
    /// Wallet with its own quantum storage. Test topologies only.
    QuantumWallet,
}

/// A wallet that is also its own vault: wallet-level messages go to the
/// wallet half, everything else to the vault half, and traffic between the
/// two halves never leaves the node.
pub struct QuantumWalletState {
    pub wallet: WalletState,
    pub vault: MsbState,
}

impl QuantumWalletState {
    fn is_wallet_message(payload: &Payload) -> bool {
        matches!(
            payload,
            Payload::Offer { .. } | Payload::Accept { .. } | Payload::Notice { .. }
        )
    }

    pub fn handle(&mut self, env: Envelope, ctx: &mut Ctx) -> Effects {
        let id = self.wallet.id().to_owned();
        let mut queue = VecDeque::from([env]);
        let mut fx = Effects::default();
        while let Some(env) = queue.pop_front() {
            let step = if Self::is_wallet_message(&env.message.payload) {
                self.wallet.handle(env)
            } else {
                self.vault.handle(env, ctx)
            };
            fx.receipts.extend(step.receipts);
            fx.events.extend(step.events);
            for out in step.out {
                if out.message.to == id {
                    queue.push_back(out);
                } else {
                    fx.out.push(out);
                }
            }
        }
        fx
    }

    pub(crate) fn route_local(&mut self, start: Effects, ctx: &mut Ctx) -> Effects {
        let id = self.wallet.id().to_owned();
        let mut fx = Effects {
            out: Vec::new(),
            receipts: start.receipts,
            events: start.events,
        };
        for out in start.out {
            if out.message.to == id {
                fx.merge(self.handle(out, ctx));
            } else {
                fx.out.push(out);
            }
        }
        fx
    }
}

pub enum Node {
    Ia(IssuingAuthorityState),
    Msb(MsbState),
    Wallet(WalletState),
    QuantumWallet(QuantumWalletState),
}

impl Node {
    pub fn role(&self) -> Role {
        match self {
            Node::Ia(_) => Role::Ia,
            Node::Msb(_) => Role::Msb,
            Node::Wallet(_) => Role::Wallet,
            Node::QuantumWallet(_) => Role::QuantumWallet,
        }
    }

    pub fn handle(&mut self, env: Envelope, ctx: &mut Ctx) -> Effects {
        match self {
            Node::Ia(ia) => ia.handle(env, ctx),
            Node::Msb(msb) => msb.handle(env, ctx),
            Node::Wallet(w) => w.handle(env),
            Node::QuantumWallet(q) => q.handle(env, ctx),
        }
    }

    /// Vault state for MSBs and quantum wallets.
    pub fn vault(&self) -> Option<&MsbState> {
        match self {
            Node::Msb(m) => Some(m),
            Node::QuantumWallet(q) => Some(&q.vault),
            _ => None,
        }
    }

    /// Wallet state for wallets and quantum wallets.
    pub fn wallet(&self) -> Option<&WalletState> {
        match self {
            Node::Wallet(w) => Some(w),
            Node::QuantumWallet(q) => Some(&q.wallet),
            _ => None,
        }
    }
}
