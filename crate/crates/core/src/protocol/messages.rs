//! Wire-format-free message types. Addresses are vehicle ids; kinematics of
//! the most recent broadcaster ride along so receivers can score the link.

use crate::metrics::Kinematics;
use crate::mobility::VehicleId;

/// Gateway advertisement. Originates at a gateway with `hop_count` 0 and is
/// selectively rebroadcast through the proactive zone; each relay rewrites
/// the broadcaster kinematics and `relay` with its own before forwarding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvMessage {
    pub gateway: VehicleId,
    /// The node that transmitted this copy (next hop toward the gateway for
    /// anyone who installs a route from it).
    pub relay: VehicleId,
    /// Strictly increasing per gateway; duplicates and stale copies are
    /// recognized by (gateway, seq).
    pub seq: u64,
    pub broadcaster: Kinematics,
    /// Expected route stability accumulated so far: the minimum link
    /// expiration along the path from the gateway, seconds.
    pub ers: f64,
    /// Sum of per-node available-buffer scores along the path.
    pub abq_route: f64,
    pub hop_count: u32,
}

/// Route solicitation flooded by a source with no usable route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolMessage {
    pub source: VehicleId,
    /// Strictly increasing per source; duplicates are recognized by
    /// (source, sol_seq).
    pub sol_seq: u64,
    pub broadcaster: Kinematics,
    pub hop_count: u32,
    /// Flood radius k: a copy is only rebroadcast while the rebroadcast
    /// would still carry hop_count < k.
    pub max_hops: u32,
}

/// Application payload en route to the infrastructure server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPacket {
    pub id: u64,
    pub source: VehicleId,
    pub created_at: f64,
    pub payload_bytes: usize,
    /// Relay hops traversed so far; guards against forwarding loops.
    pub hops: u32,
    /// Gateway the packet is currently steered toward, plus the remaining
    /// hop budget: the hop count claimed by the entry that launched the last
    /// forward. Every later forward — pinned continuation or re-target —
    /// must claim strictly fewer hops, so the budget shrinks monotonically
    /// and inconsistent tables cannot walk the packet in rings.
    pub pinned: Option<(VehicleId, u32)>,
}
