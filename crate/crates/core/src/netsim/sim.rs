use std::collections::BTreeMap;

use super::config::LinkTable;
use super::transcript::{audit, LedgerSnapshot, Record, Summary, Transcript};
use super::{ClassicalAction, NetsimError, NetworkConfig, ScenarioScript, ScriptAction, ScriptOp};
use crate::money::Serial;
use crate::qsim::Mode;
use crate::vault::{
    Effects, Envelope, LedgerEvent, Node, Outcome, ProcessKind, ProtocolMessage, Receipt, System, VaultError,
};

/// Tick budget used by [`Simulation::run_scenario`].
pub const DEFAULT_MAX_TICKS: u64 = 1_000_000;

enum Scheduled {
    Deliver { id: String, env: Envelope },
    Timeout { corr: String },
}

struct Process {
    kind: ProcessKind,
    op: ScriptOp,
    timeout: Option<(u64, u64)>,
}

/// Discrete-event network around a [`System`].
pub struct Simulation {
    config: NetworkConfig,
    system: System,
    classical: LinkTable,
    quantum: LinkTable,
    queue: BTreeMap<(u64, u64), Scheduled>,
    next_seq: u64,
    next_msg: u64,
    now: u64,
    processed: u64,
    records: Vec<Record>,
    script: Vec<ScriptAction>,
    next_action: usize,
    processes: BTreeMap<String, Process>,
    terminal: BTreeMap<String, Receipt>,
    labels: BTreeMap<String, Serial>,
    classical_hits: Vec<usize>,
    quantum_hits: Vec<usize>,
}

/// Validates `config` and instantiates every entity at time 0.
pub fn build_simulation(config: NetworkConfig) -> Result<Simulation, NetsimError> {
    Simulation::new(config)
}

fn limit_ok(limit: Option<usize>, hits: usize) -> bool {
    limit.is_none_or(|l| hits < l)
}

impl Simulation {
    pub fn new(config: NetworkConfig) -> Result<Self, NetsimError> {
        config.validate()?;
        let system = System::new(&config.topology(), config.seed)?;
        let header = Record::Header {
            config_digest: config.digest(),
            seed: config.seed,
            qubits: config.qubits,
            nodes: config.nodes.clone(),
        };
        Ok(Self {
            classical: config.classical_table(),
            quantum: config.quantum_table(),
            classical_hits: vec![0; config.adversary.classical.len()],
            quantum_hits: vec![0; config.adversary.quantum.len()],
            config,
            system,
            queue: BTreeMap::new(),
            next_seq: 0,
            next_msg: 0,
            now: 0,
            processed: 0,
            records: vec![header],
            script: Vec::new(),
            next_action: 0,
            processes: BTreeMap::new(),
            terminal: BTreeMap::new(),
            labels: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn system_mut(&mut self) -> &mut System {
        &mut self.system
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Serial bound to a script label, once its process completed.
    pub fn label(&self, label: &str) -> Option<Serial> {
        self.labels.get(label).copied()
    }

    fn schedule(&mut self, time: u64, event: Scheduled) -> (u64, u64) {
        let key = (time, self.next_seq);
        self.next_seq += 1;
        self.queue.insert(key, event);
        key
    }

    fn message_id(&mut self) -> String {
        self.next_msg += 1;
        format!("m{:06}", self.next_msg)
    }

    /// Adds the script's actions. An action fires after every network
    /// event of its tick, so a note credited at tick `t` is visible to an
    /// action scheduled at `t`.
    pub fn load_script(&mut self, script: &ScenarioScript) -> Result<(), NetsimError> {
        script.validate(&self.config)?;
        self.script.extend(script.actions.iter().cloned());
        self.script[self.next_action..].sort_by_key(|a| a.at);
        Ok(())
    }

    /// Sends a classical message over its link, applying adversary rules.
    pub fn send_classical(&mut self, msg: ProtocolMessage) -> Result<(), NetsimError> {
        if self.classical.latency(&msg.from, &msg.to).is_none() {
            return Err(NetsimError::NoLink {
                quantum: false,
                from: msg.from,
                to: msg.to,
            });
        }
        self.route(Envelope::classical(msg));
        Ok(())
    }

    /// Moves a quantum envelope into the network. The sender must hold the
    /// live state it is sending.
    pub fn send_quantum(&mut self, env: Envelope) -> Result<(), NetsimError> {
        let from = env.message.from.clone();
        let Some(marker) = env.marker() else {
            return Err(NetsimError::NotOwner(from));
        };
        if self.system.ctx().engine.status(marker.handle) != Some(Mode::Live) {
            return Err(NetsimError::NotOwner(from));
        }
        if self.quantum.latency(&from, &env.message.to).is_none() {
            return Err(NetsimError::NoLink {
                quantum: true,
                from,
                to: env.message.to.clone(),
            });
        }
        self.route(env);
        Ok(())
    }

    fn record_event(&mut self, entry: LedgerEvent) {
        self.records.push(Record::Ledger { t: self.now, entry });
    }

    fn destroy(&mut self, mut env: Envelope, reason: &str, id: String) {
        self.records.push(Record::Undeliverable {
            t: self.now,
            id,
            reason: reason.to_owned(),
        });
        if let Some(note) = env.take_note() {
            let (serial, value) = (note.serial(), note.value());
            let _ = self.system.ctx_mut().engine.discard(note.into_state());
            self.record_event(LedgerEvent::Lost {
                serial,
                value,
                from: env.message.from.clone(),
                to: env.message.to.clone(),
            });
        }
    }

    fn route(&mut self, env: Envelope) {
        let id = self.message_id();
        let msg = &env.message;
        let quantum = env.marker();
        self.records.push(Record::Send {
            t: self.now,
            id: id.clone(),
            from: msg.from.clone(),
            to: msg.to.clone(),
            kind: msg.kind,
            correlation_id: msg.correlation_id.clone(),
            payload: serde_json::to_value(&msg.payload).expect("payloads serialize"),
            quantum,
        });
        let table = if quantum.is_some() { &self.quantum } else { &self.classical };
        let Some(latency) = table.latency(&msg.from, &msg.to) else {
            self.destroy(env, "no-link", id);
            return;
        };
        if quantum.is_some() {
            let rule = self
                .config
                .adversary
                .quantum
                .iter()
                .enumerate()
                .find(|(i, r)| r.matches.matches(msg) && limit_ok(r.limit, self.quantum_hits[*i]))
                .map(|(i, _)| i);
            if let Some(i) = rule {
                self.quantum_hits[i] += 1;
                self.records.push(Record::Adversary {
                    t: self.now,
                    id: id.clone(),
                    action: "drop".into(),
                });
                self.destroy(env, "dropped", id);
                return;
            }
            let at = self.now + latency;
            self.schedule(at, Scheduled::Deliver { id, env });
            return;
        }
        let rule = self
            .config
            .adversary
            .classical
            .iter()
            .enumerate()
            .find(|(i, r)| r.matches.matches(msg) && limit_ok(r.limit, self.classical_hits[*i]))
            .map(|(i, r)| (i, r.action));
        let mut at = self.now + latency;
        if let Some((i, action)) = rule {
            self.classical_hits[i] += 1;
            let label = match action {
                ClassicalAction::Drop => "drop".to_owned(),
                ClassicalAction::Delay(k) => format!("delay:{k}"),
                ClassicalAction::Duplicate => "duplicate".to_owned(),
            };
            self.records.push(Record::Adversary {
                t: self.now,
                id: id.clone(),
                action: label,
            });
            match action {
                ClassicalAction::Drop => {
                    self.destroy(env, "dropped", id);
                    return;
                }
                ClassicalAction::Delay(k) => at += k,
                ClassicalAction::Duplicate => {
                    let copy = env.duplicate().expect("classical envelopes duplicate");
                    self.schedule(at, Scheduled::Deliver { id: id.clone(), env: copy });
                }
            }
        }
        self.schedule(at, Scheduled::Deliver { id, env });
    }

    fn absorb(&mut self, fx: Effects) {
        for entry in fx.events {
            self.record_event(entry);
        }
        for receipt in fx.receipts {
            self.on_receipt(receipt);
        }
        for env in fx.out {
            self.route(env);
        }
    }

    fn on_receipt(&mut self, receipt: Receipt) {
        let corr = receipt.correlation_id.clone();
        let terminal = !self.terminal.contains_key(&corr);
        self.records.push(Record::Receipt {
            t: self.now,
            terminal,
            receipt: receipt.clone(),
        });
        if !terminal {
            return;
        }
        if let Some(p) = self.processes.get_mut(&corr) {
            if let Some(key) = p.timeout.take() {
                self.queue.remove(&key);
            }
            if receipt.outcome == Outcome::Completed {
                match &p.op {
                    ScriptOp::Mint { label: Some(l), .. } => {
                        self.labels.insert(l.clone(), receipt.serials[0]);
                    }
                    ScriptOp::OnlinePay {
                        new_label: Some(l), ..
                    } if receipt.serials.len() > 1 => {
                        self.labels.insert(l.clone(), receipt.serials[1]);
                    }
                    _ => {}
                }
            }
        }
        self.terminal.insert(corr, receipt);
    }

    fn resolve_note(&self, payer: &str, note: &Option<String>) -> Option<Serial> {
        match note {
            Some(n) => self.labels.get(n).copied().or_else(|| n.parse().ok()),
            None => {
                let home = self.system.home_of(payer).ok()?;
                self.system.msb(home).ok()?.serials_of(payer).first().copied()
            }
        }
    }

    fn process_kind(&self, op: &ScriptOp) -> ProcessKind {
        match op {
            ScriptOp::Mint { .. } => ProcessKind::Mint,
            ScriptOp::IntraPay { .. } => ProcessKind::IntraTransfer,
            ScriptOp::OnlinePay { .. } => ProcessKind::OnlinePayment,
            ScriptOp::Pay { payer, receiver, .. } => {
                if self.system.home_of(payer).ok() == self.system.home_of(receiver).ok() {
                    ProcessKind::IntraTransfer
                } else {
                    ProcessKind::InterTransfer
                }
            }
        }
    }

    fn start_action(&mut self, index: usize, seq: u64) -> Result<(), VaultError> {
        let op = self.script[index].op.clone();
        let corr = self.system.next_correlation();
        let kind = self.process_kind(&op);
        self.records.push(Record::Action {
            t: self.now,
            seq,
            index,
            correlation_id: corr.clone(),
            process: kind,
            op: op.clone(),
        });
        let fx = match &op {
            ScriptOp::Mint { wallet, value, .. } => Some(self.system.start_mint(wallet, *value, &corr)?),
            ScriptOp::Pay { payer, receiver, note }
            | ScriptOp::IntraPay { payer, receiver, note }
            | ScriptOp::OnlinePay {
                payer, receiver, note, ..
            } => match self.resolve_note(payer, note) {
                Some(serial) => {
                    let online = matches!(op, ScriptOp::OnlinePay { .. });
                    Some(self.system.start_pay(payer, receiver, serial, online, &corr)?)
                }
                None => None,
            },
        };
        self.processes.insert(
            corr.clone(),
            Process {
                kind,
                op,
                timeout: None,
            },
        );
        match fx {
            Some(fx) => {
                let key = self.schedule(self.now + self.config.deadline, Scheduled::Timeout { corr: corr.clone() });
                self.processes.get_mut(&corr).expect("just inserted").timeout = Some(key);
                self.absorb(fx);
            }
            None => self.on_receipt(Receipt {
                correlation_id: corr,
                process: kind,
                outcome: Outcome::Error("unknown-note".into()),
                serials: Vec::new(),
                amount: 0,
            }),
        }
        Ok(())
    }

    fn step(&mut self, key: (u64, u64), event: Scheduled) -> Result<(), VaultError> {
        self.now = key.0;
        self.processed += 1;
        match event {
            Scheduled::Timeout { corr } => {
                self.records.push(Record::Timeout {
                    t: self.now,
                    seq: key.1,
                    correlation_id: corr.clone(),
                });
                if let Some(p) = self.processes.get_mut(&corr) {
                    p.timeout = None;
                    let kind = p.kind;
                    self.on_receipt(Receipt {
                        correlation_id: corr,
                        process: kind,
                        outcome: Outcome::Timeout,
                        serials: Vec::new(),
                        amount: 0,
                    });
                }
            }
            Scheduled::Deliver { id, env } => {
                let msg = &env.message;
                self.records.push(Record::Deliver {
                    t: self.now,
                    seq: key.1,
                    id: id.clone(),
                    from: msg.from.clone(),
                    to: msg.to.clone(),
                    kind: msg.kind,
                    correlation_id: msg.correlation_id.clone(),
                    quantum: env.marker(),
                });
                if self.system.node(&msg.to).is_err() {
                    self.destroy(env, "unknown-node", id);
                    return Ok(());
                }
                let fx = self.system.deliver(env)?;
                self.absorb(fx);
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let custody: BTreeMap<_, _> = self
            .system
            .nodes()
            .iter()
            .filter_map(|(id, n)| n.vault().map(|v| (id.clone(), v.total_custody_value())))
            .collect();
        LedgerSnapshot {
            ia_active_value: self.system.ia().total_active_value(),
            custody_total: custody.values().sum(),
            custody,
            wallets: self
                .system
                .nodes()
                .iter()
                .filter_map(|(id, n)| n.wallet().map(|w| (id.clone(), w.balance())))
                .collect(),
        }
    }

    /// Processes events in `(time, sequence)` order until none remain or
    /// the next one lies beyond `max_ticks`, then appends the summary.
    pub fn run_until_quiescent(&mut self, max_ticks: u64) -> Result<Transcript, NetsimError> {
        if max_ticks == 0 {
            return Err(NetsimError::ZeroBudget);
        }
        loop {
            let network = self.queue.first_key_value().map(|(k, _)| k.0);
            let action = self.script.get(self.next_action).map(|a| a.at);
            let fire_action = match (network, action) {
                (None, None) => break,
                (Some(n), Some(a)) => a < n,
                (None, Some(_)) => true,
                (Some(_), None) => false,
            };
            if fire_action {
                let at = action.expect("checked");
                if at > max_ticks {
                    break;
                }
                let index = self.next_action;
                self.next_action += 1;
                self.now = self.now.max(at);
                self.processed += 1;
                let seq = self.next_seq;
                self.next_seq += 1;
                self.start_action(index, seq)?;
            } else {
                let (key, event) = self.queue.pop_first().expect("checked");
                if key.0 > max_ticks {
                    self.queue.insert(key, event);
                    break;
                }
                self.step(key, event)?;
            }
        }
        let quiescent = self.queue.is_empty() && self.next_action == self.script.len();
        let summary = Summary {
            quiescent,
            final_time: self.now,
            events_processed: self.processed,
            receipts: self.terminal.values().cloned().collect(),
            ledger: self.snapshot(),
            audit: audit(&self.records),
        };
        let mut records = self.records.clone();
        records.push(Record::Summary(summary));
        Ok(Transcript { records })
    }

    /// Loads `script` and runs it to quiescence.
    pub fn run_scenario(&mut self, script: &ScenarioScript) -> Result<Transcript, NetsimError> {
        self.load_script(script)?;
        self.run_until_quiescent(DEFAULT_MAX_TICKS)
    }

    /// Classical processes whose receipt has not arrived yet.
    pub fn open_processes(&self) -> usize {
        self.processes.keys().filter(|c| !self.terminal.contains_key(*c)).count()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.system.nodes().get(id)
    }
}

/// Builds, runs and returns the transcript of one scenario.
pub fn run_scenario(config: NetworkConfig, script: &ScenarioScript) -> Result<Transcript, NetsimError> {
    let mut sim = build_simulation(config)?;
    sim.run_scenario(script)
}
