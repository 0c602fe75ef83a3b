use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::RngCore;

use super::message::{NodeId, Outcome, ProcessKind, ProtocolMessage, Receipt};
use super::node::{Node, QuantumWalletState, Role};
use super::{Ctx, Effects, Envelope, IssuingAuthorityState, LedgerEvent, MsbState, VaultError, WalletState};
use crate::money::{QuantumBanknote, SchemeParams, Serial};

/// Entity layout of a vault system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub ia: NodeId,
    pub msbs: Vec<NodeId>,
    /// `(wallet, home vault)` pairs.
    pub wallets: Vec<(NodeId, NodeId)>,
    pub quantum_wallets: Vec<NodeId>,
    pub qubits: usize,
}

impl Topology {
    /// One issuer, `msbs` vaults and `wallets` wallets spread round-robin.
    pub fn simple(msbs: usize, wallets: usize, qubits: usize) -> Self {
        let msb_ids: Vec<NodeId> = (0..msbs).map(|i| format!("msb-{i}")).collect();
        Self {
            ia: "ia".into(),
            wallets: (0..wallets)
                .map(|i| (format!("wallet-{i}"), msb_ids[i % msbs].clone()))
                .collect(),
            msbs: msb_ids,
            quantum_wallets: Vec::new(),
            qubits,
        }
    }

    pub fn validate(&self) -> Result<(), VaultError> {
        let mut ids = BTreeSet::new();
        let all = std::iter::once(&self.ia)
            .chain(&self.msbs)
            .chain(self.wallets.iter().map(|(w, _)| w))
            .chain(&self.quantum_wallets);
        for id in all {
            if id.is_empty() {
                return Err(VaultError::Topology("empty node id".into()));
            }
            if !ids.insert(id.as_str()) {
                return Err(VaultError::Topology(format!("duplicate node id {id}")));
            }
        }
        for (w, home) in &self.wallets {
            if !self.msbs.contains(home) {
                return Err(VaultError::Topology(format!("wallet {w} has unknown home vault {home}")));
            }
        }
        Ok(())
    }
}

/// All entities plus the shared context.
pub struct System {
    nodes: BTreeMap<NodeId, Node>,
    ctx: Ctx,
    ia: NodeId,
    next_corr: u64,
}

fn token(ctx: &mut Ctx) -> String {
    let mut bytes = [0u8; 16];
    ctx.rng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

impl System {
    pub fn new(topology: &Topology, seed: u64) -> Result<Self, VaultError> {
        let max = topology.qubits.max(crate::qsim::DEFAULT_MAX_QUBITS);
        Self::with_ctx(topology, Ctx::new(seed, max))
    }

    pub fn with_ctx(topology: &Topology, mut ctx: Ctx) -> Result<Self, VaultError> {
        topology.validate()?;
        let params = SchemeParams::with_limit(topology.qubits, ctx.engine.config().max_qubits)?;
        let ia = IssuingAuthorityState::new(&topology.ia, params, &mut ctx);
        let pk = ia.public_key().clone();
        let mut nodes = BTreeMap::new();
        let mut vaults: BTreeMap<NodeId, MsbState> = topology
            .msbs
            .iter()
            .map(|m| (m.clone(), MsbState::new(m, &topology.ia, pk.clone())))
            .collect();
        for (w, home) in &topology.wallets {
            let cred = token(&mut ctx);
            vaults.get_mut(home).expect("validated").register(w, &cred);
            nodes.insert(w.clone(), Node::Wallet(WalletState::new(w, home, &cred)));
        }
        for q in &topology.quantum_wallets {
            let cred = token(&mut ctx);
            let mut vault = MsbState::new(q, &topology.ia, pk.clone());
            vault.register(q, &cred);
            nodes.insert(
                q.clone(),
                Node::QuantumWallet(QuantumWalletState {
                    wallet: WalletState::new(q, q, &cred),
                    vault,
                }),
            );
        }
        for (id, v) in vaults {
            nodes.insert(id, Node::Msb(v));
        }
        nodes.insert(topology.ia.clone(), Node::Ia(ia));
        Ok(Self {
            nodes,
            ctx,
            ia: topology.ia.clone(),
            next_corr: 0,
        })
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn ctx_mut(&mut self) -> &mut Ctx {
        &mut self.ctx
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, Node> {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Result<&Node, VaultError> {
        self.nodes.get(id).ok_or_else(|| VaultError::UnknownNode(id.to_owned()))
    }

    pub fn role(&self, id: &str) -> Result<Role, VaultError> {
        Ok(self.node(id)?.role())
    }

    pub fn ia(&self) -> &IssuingAuthorityState {
        match &self.nodes[&self.ia] {
            Node::Ia(ia) => ia,
            _ => unreachable!("issuer id maps to the issuer"),
        }
    }

    pub fn ia_id(&self) -> &str {
        &self.ia
    }

    /// Vault state of an MSB or quantum wallet.
    pub fn msb(&self, id: &str) -> Result<&MsbState, VaultError> {
        let node = self.node(id)?;
        node.vault().ok_or(VaultError::WrongRole {
            node: id.to_owned(),
            expected: Role::Msb,
            actual: node.role(),
        })
    }

    pub fn wallet(&self, id: &str) -> Result<&WalletState, VaultError> {
        let node = self.node(id)?;
        node.wallet().ok_or(VaultError::WrongRole {
            node: id.to_owned(),
            expected: Role::Wallet,
            actual: node.role(),
        })
    }

    /// Vault that holds `wallet`'s account.
    pub fn home_of(&self, wallet: &str) -> Result<&str, VaultError> {
        Ok(self.wallet(wallet)?.home_msb())
    }

    pub fn vault_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.vault().is_some())
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn wallet_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.wallet().is_some())
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Sum of custody values across all vaults.
    pub fn total_custody_value(&self) -> u64 {
        self.nodes.values().filter_map(Node::vault).map(MsbState::total_custody_value).sum()
    }

    pub fn next_correlation(&mut self) -> String {
        self.next_corr += 1;
        format!("c{:05}", self.next_corr)
    }

    /// Delivers one envelope to its addressee.
    pub fn deliver(&mut self, env: Envelope) -> Result<Effects, VaultError> {
        let to = env.message.to.clone();
        let node = self.nodes.get_mut(&to).ok_or(VaultError::UnknownNode(to))?;
        Ok(node.handle(env, &mut self.ctx))
    }

    pub fn start_mint(&mut self, wallet: &str, value: u64, corr: &str) -> Result<Effects, VaultError> {
        if value == 0 {
            return Err(VaultError::ZeroValue);
        }
        self.wallet(wallet)?;
        let ctx = &mut self.ctx;
        Ok(match self.nodes.get_mut(wallet) {
            Some(Node::Wallet(w)) => w.start_mint(corr, value),
            Some(Node::QuantumWallet(q)) => {
                let fx = q.wallet.start_mint(corr, value);
                q.route_local(fx, ctx)
            }
            _ => unreachable!("role checked above"),
        })
    }

    pub fn start_pay(
        &mut self,
        payer: &str,
        receiver: &str,
        serial: Serial,
        online: bool,
        corr: &str,
    ) -> Result<Effects, VaultError> {
        self.wallet(receiver)?;
        self.wallet(payer)?;
        let ctx = &mut self.ctx;
        Ok(match self.nodes.get_mut(payer) {
            Some(Node::Wallet(w)) => w.start_pay(corr, receiver, serial, online),
            Some(Node::QuantumWallet(q)) => {
                let fx = q.wallet.start_pay(corr, receiver, serial, online);
                q.route_local(fx, ctx)
            }
            _ => unreachable!("role checked above"),
        })
    }
}

type Tamper = Box<dyn FnMut(&mut ProtocolMessage)>;
type Substitute = Box<dyn FnMut(QuantumBanknote, &mut Ctx) -> QuantumBanknote>;

/// Synchronous FIFO driver: delivers every message immediately and in
/// order, with no latency and no loss unless a hook intervenes.
pub struct LocalBus {
    system: System,
    queue: VecDeque<Envelope>,
    history: Vec<ProtocolMessage>,
    receipts: Vec<Receipt>,
    events: Vec<LedgerEvent>,
    tamper: Option<Tamper>,
    substitute: Option<Substitute>,
}

impl LocalBus {
    pub fn new(system: System) -> Self {
        Self {
            system,
            queue: VecDeque::new(),
            history: Vec::new(),
            receipts: Vec::new(),
            events: Vec::new(),
            tamper: None,
            substitute: None,
        }
    }

    pub fn with_topology(topology: &Topology, seed: u64) -> Result<Self, VaultError> {
        Ok(Self::new(System::new(topology, seed)?))
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn system_mut(&mut self) -> &mut System {
        &mut self.system
    }

    /// Every classical message delivered so far, in delivery order.
    pub fn history(&self) -> &[ProtocolMessage] {
        &self.history
    }

    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    /// Hook that may rewrite each classical message header before delivery.
    pub fn set_tamper(&mut self, hook: impl FnMut(&mut ProtocolMessage) + 'static) {
        self.tamper = Some(Box::new(hook));
    }

    /// Hook that may replace each quantum note in flight.
    pub fn set_substitute(&mut self, hook: impl FnMut(QuantumBanknote, &mut Ctx) -> QuantumBanknote + 'static) {
        self.substitute = Some(Box::new(hook));
    }

    pub fn clear_hooks(&mut self) {
        self.tamper = None;
        self.substitute = None;
    }

    fn absorb(&mut self, fx: Effects) {
        self.queue.extend(fx.out);
        self.receipts.extend(fx.receipts);
        self.events.extend(fx.events);
    }

    /// Queues a hand-built envelope.
    pub fn inject(&mut self, env: Envelope) {
        self.queue.push_back(env);
    }

    /// Delivers queued messages until none remain.
    pub fn run(&mut self) -> Result<(), VaultError> {
        while let Some(mut env) = self.queue.pop_front() {
            if let Some(hook) = self.tamper.as_mut() {
                hook(&mut env.message);
            }
            if let Some(hook) = self.substitute.as_mut() {
                if let Some(note) = env.take_note() {
                    let replaced = hook(note, self.system.ctx_mut());
                    env = Envelope::quantum(env.message, replaced);
                }
            }
            self.history.push(env.message.clone());
            let fx = self.system.deliver(env)?;
            self.absorb(fx);
        }
        Ok(())
    }

    fn finish(&mut self, corr: &str, process: ProcessKind) -> Result<Receipt, VaultError> {
        self.run()?;
        Ok(self
            .receipts
            .iter()
            .find(|r| r.correlation_id == corr)
            .cloned()
            .unwrap_or(Receipt {
                correlation_id: corr.to_owned(),
                process,
                outcome: Outcome::Timeout,
                serials: Vec::new(),
                amount: 0,
            }))
    }

    fn pay(&mut self, payer: &str, receiver: &str, serial: Serial, online: bool, process: ProcessKind) -> Result<Receipt, VaultError> {
        let corr = self.system.next_correlation();
        let fx = self.system.start_pay(payer, receiver, serial, online, &corr)?;
        self.absorb(fx);
        self.finish(&corr, process)
    }
}

/// Mints `value` for `wallet` through its home vault and the issuer.
pub fn process_on_demand_mint(bus: &mut LocalBus, wallet: &str, value: u64) -> Result<Receipt, VaultError> {
    let corr = bus.system.next_correlation();
    let fx = bus.system.start_mint(wallet, value, &corr)?;
    bus.absorb(fx);
    bus.finish(&corr, ProcessKind::Mint)
}

/// Moves a note between two vaults over the quantum link.
pub fn process_transfer_inter_msb(
    bus: &mut LocalBus,
    payer: &str,
    receiver: &str,
    serial: Serial,
) -> Result<Receipt, VaultError> {
    if bus.system.home_of(payer)? == bus.system.home_of(receiver)? {
        return Err(VaultError::Topology(format!("{payer} and {receiver} share a vault")));
    }
    bus.pay(payer, receiver, serial, false, ProcessKind::InterTransfer)
}

/// Reassigns custody inside one vault.
pub fn process_transfer_intra_msb(
    bus: &mut LocalBus,
    payer: &str,
    receiver: &str,
    serial: Serial,
) -> Result<Receipt, VaultError> {
    if bus.system.home_of(payer)? != bus.system.home_of(receiver)? {
        return Err(VaultError::Topology(format!("{payer} and {receiver} use different vaults")));
    }
    bus.pay(payer, receiver, serial, false, ProcessKind::IntraTransfer)
}

/// Destroys the payer's note and has the issuer mint an equal one for the
/// receiver.
pub fn process_online_payment(
    bus: &mut LocalBus,
    payer: &str,
    receiver: &str,
    serial: Serial,
) -> Result<Receipt, VaultError> {
    bus.pay(payer, receiver, serial, true, ProcessKind::OnlinePayment)
}

pub fn ia_total_active_value(ia: &IssuingAuthorityState) -> u64 {
    ia.total_active_value()
}

pub fn msb_total_custody_value(msb: &MsbState) -> u64 {
    msb.total_custody_value()
}

pub fn wallet_balance(wallet: &WalletState) -> u64 {
    wallet.balance()
}
