//! Per-vehicle routing state: one entry per known gateway, maintained under
//! a fixed precedence chain and queried with a stability-first selection
//! order. All rules are deterministic, so replaying the same advertisement
//! multiset in any order converges to the same surviving entries.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::mobility::VehicleId;

/// Two lifetimes closer than this are treated as equal when the precedence
/// chain falls through to the hop-count and buffer tie-breaks.
pub const ERS_TIE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteEntry {
    pub gateway: VehicleId,
    /// Neighbor that transmitted the installing advertisement; data for this
    /// gateway is handed to it.
    pub next_hop: VehicleId,
    pub seq: u64,
    /// Expected route stability at install time, seconds. The entry is dead
    /// once `installed_at + ers` passes.
    pub ers: f64,
    pub hop_count: u32,
    pub abq_route: f64,
    pub installed_at: f64,
}

impl RouteEntry {
    pub fn expires_at(&self) -> f64 {
        self.installed_at + self.ers
    }

    /// Lifetime left at `now`, floored at zero.
    pub fn remaining(&self, now: f64) -> f64 {
        (self.expires_at() - now).max(0.0)
    }

    pub fn is_expired(&self, now: f64) -> bool {
        now >= self.expires_at()
    }
}

/// Why an update call accepted or rejected a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    /// No live entry existed for the gateway.
    Inserted,
    ReplacedNewerSeq,
    ReplacedLongerLifetime,
    ReplacedFewerHops,
    ReplacedHigherAbq,
    Rejected,
}

impl UpdateOutcome {
    pub fn accepted(self) -> bool {
        self != UpdateOutcome::Rejected
    }
}

#[derive(Debug, Clone, Default)]
pub struct RoutingTable {
    entries: BTreeMap<VehicleId, RouteEntry>,
}

impl RoutingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, gateway: VehicleId) -> Option<&RouteEntry> {
        self.entries.get(&gateway)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RouteEntry> {
        self.entries.values()
    }

    /// Drop every entry whose lifetime has run out.
    pub fn purge_expired(&mut self, now: f64) {
        self.entries.retain(|_, e| !e.is_expired(now));
    }

    pub fn remove(&mut self, gateway: VehicleId) -> Option<RouteEntry> {
        self.entries.remove(&gateway)
    }

    /// Apply the precedence chain to a candidate entry. Expired entries are
    /// purged first, so a candidate never loses to a dead incumbent. The
    /// chain, in order: absent gateway inserts; a higher sequence number
    /// replaces; at equal sequence a lifetime longer than what the incumbent
    /// has left replaces; at equal lifetime (within [`ERS_TIE_EPSILON`])
    /// fewer hops replace; at equal hops a larger buffer score replaces;
    /// anything else is rejected.
    pub fn update(&mut self, candidate: RouteEntry, now: f64) -> UpdateOutcome {
        self.purge_expired(now);
        let incumbent = match self.entries.get(&candidate.gateway) {
            None => {
                self.entries.insert(candidate.gateway, candidate);
                return UpdateOutcome::Inserted;
            }
            Some(e) => *e,
        };

        let outcome = match candidate.seq.cmp(&incumbent.seq) {
            Ordering::Greater => UpdateOutcome::ReplacedNewerSeq,
            Ordering::Less => UpdateOutcome::Rejected,
            Ordering::Equal => {
                let remaining = incumbent.remaining(now);
                if candidate.ers > remaining + ERS_TIE_EPSILON {
                    UpdateOutcome::ReplacedLongerLifetime
                } else if candidate.ers < remaining - ERS_TIE_EPSILON {
                    UpdateOutcome::Rejected
                } else if candidate.hop_count < incumbent.hop_count {
                    UpdateOutcome::ReplacedFewerHops
                } else if candidate.hop_count == incumbent.hop_count
                    && candidate.abq_route > incumbent.abq_route
                {
                    UpdateOutcome::ReplacedHigherAbq
                } else {
                    UpdateOutcome::Rejected
                }
            }
        };
        if outcome.accepted() {
            self.entries.insert(candidate.gateway, candidate);
        }
        outcome
    }

    /// Best live route: longest remaining lifetime, then fewest hops, then
    /// largest buffer score, then lowest gateway id so the order is total.
    pub fn select_route(&self, now: f64) -> Option<&RouteEntry> {
        self.best_where(now, |_| true)
    }

    /// Best live route through any gateway other than `exclude`; the
    /// handover path uses this to look for an alternative.
    pub fn select_route_excluding(&self, now: f64, exclude: VehicleId) -> Option<&RouteEntry> {
        self.best_where(now, |e| e.gateway != exclude)
    }

    /// Best live route whose next hop is none of `avoid` — split horizon for
    /// forwarding and for answering route solicitations: handing a packet (or
    /// offering a route) back to the node it came from can only form a loop.
    pub fn select_route_avoiding(&self, now: f64, avoid: &[VehicleId]) -> Option<&RouteEntry> {
        self.best_where(now, |e| !avoid.contains(&e.next_hop))
    }

    /// Split-horizon selection for relaying under a hop budget: only entries
    /// claiming strictly fewer hops than `hop_budget` qualify, so a relayed
    /// packet's claimed distance shrinks every hop no matter how often it is
    /// re-targeted, and inconsistent tables cannot walk it in rings.
    pub fn select_route_forward(
        &self,
        now: f64,
        avoid: &[VehicleId],
        hop_budget: u32,
    ) -> Option<&RouteEntry> {
        self.best_where(now, |e| !avoid.contains(&e.next_hop) && e.hop_count < hop_budget)
    }

    fn best_where(&self, now: f64, keep: impl Fn(&RouteEntry) -> bool) -> Option<&RouteEntry> {
        self.entries
            .values()
            .filter(|e| !e.is_expired(now) && keep(e))
            .max_by(|a, b| {
                a.remaining(now)
                    .total_cmp(&b.remaining(now))
                    .then(b.hop_count.cmp(&a.hop_count))
                    .then(a.abq_route.total_cmp(&b.abq_route))
                    .then(b.gateway.0.cmp(&a.gateway.0))
            })
    }
}
