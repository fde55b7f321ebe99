use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use crate::name::Name;
use crate::packet::Interest;

use super::{Decision, ForwarderConfig, InterestPolicy, PolicyContext};

/// Names whose forwarding is blocked until a timer expires, plus the
/// bookkeeping for forwarded Interests that have not yet returned Data.
#[derive(Debug, Default, Clone)]
pub struct SuppressionTable {
    timers: BTreeMap<Name, f64>,
    pending: BTreeMap<Name, f64>,
    failed: u64,
    succeeded: u64,
}

impl SuppressionTable {
    /// Records a forward whose Data must arrive before `deadline`.
    pub fn note_forward(&mut self, name: Name, deadline: f64) {
        self.pending.insert(name, deadline);
    }

    /// Matching Data arrived: the forward succeeded and no timer is installed.
    pub fn note_satisfied(&mut self, name: &Name) -> bool {
        if self.pending.remove(name).is_some() {
            self.succeeded += 1;
            true
        } else {
            false
        }
    }

    /// Converts every pending forward whose deadline has passed into a timer
    /// that runs for `suppress_duration` from that deadline.
    pub fn settle(&mut self, now: f64, suppress_duration: f64) {
        if self.pending.is_empty() {
            return;
        }
        let due: Vec<Name> = self
            .pending
            .iter()
            .filter(|(_, d)| **d <= now)
            .map(|(n, _)| n.clone())
            .collect();
        for name in due {
            let deadline = self.pending.remove(&name).unwrap();
            self.failed += 1;
            let expiry = deadline + suppress_duration;
            let slot = self.timers.entry(name).or_insert(expiry);
            *slot = slot.max(expiry);
        }
        if self.timers.len() > 256 {
            self.timers.retain(|_, e| *e > now);
        }
    }

    /// Withdraws a forward that never went on air.
    pub fn cancel(&mut self, name: &Name) -> bool {
        self.pending.remove(name).is_some()
    }

    pub fn install(&mut self, name: Name, expiry: f64) {
        self.timers.insert(name, expiry);
    }

    pub fn is_suppressed(&self, name: &Name, now: f64) -> bool {
        self.timers.get(name).is_some_and(|e| *e > now)
    }

    pub fn expiry(&self, name: &Name) -> Option<f64> {
        self.timers.get(name).copied()
    }

    pub fn forwards_failed(&self) -> u64 {
        self.failed
    }

    pub fn forwards_succeeded(&self) -> u64 {
        self.succeeded
    }
}

/// Probabilistic forward-or-suppress choice of a node without application
/// knowledge. Always draws the coin, then the delay on Forward.
pub fn pure_forward_decide(
    table: &SuppressionTable,
    name: &Name,
    now: f64,
    p_fwd: f64,
    jitter_max: f64,
    rng: &mut dyn RngCore,
) -> Decision {
    if table.is_suppressed(name, now) {
        return Decision::Suppress;
    }
    let coin: f64 = rng.gen();
    if coin < p_fwd {
        let delay = if jitter_max > 0.0 {
            rng.gen_range(0.0..=jitter_max)
        } else {
            0.0
        };
        Decision::Forward { delay }
    } else {
        Decision::Suppress
    }
}

/// Role policy of a node that understands only the network layer.
#[derive(Debug, Clone)]
pub struct PureForwarderPolicy {
    pub p_fwd: f64,
}

impl InterestPolicy for PureForwarderPolicy {
    fn decide(
        &mut self,
        ctx: &PolicyContext<'_>,
        interest: &Interest,
        now: f64,
        rng: &mut dyn RngCore,
    ) -> Decision {
        pure_forward_decide(
            ctx.suppression,
            &interest.name,
            now,
            self.p_fwd,
            ctx.config.fwd_jitter_max,
            rng,
        )
    }
}

impl Default for PureForwarderPolicy {
    fn default() -> Self {
        Self {
            p_fwd: ForwarderConfig::default_forward_prob(),
        }
    }
}
