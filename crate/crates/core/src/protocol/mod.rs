//! Protocol decision rules: who may act as a gateway, which receivers of a
//! flooded message enter relay contention, and how routing tables evolve.
//! Everything here is a pure function of its arguments; the event-driven
//! orchestration (timers, retransmissions, handover) lives in [`crate::sim`].

mod messages;
mod table;

pub use messages::{AdvMessage, DataPacket, SolMessage};
pub use table::{RouteEntry, RoutingTable, UpdateOutcome, ERS_TIE_EPSILON};

use std::f64::consts::FRAC_PI_2;

use crate::metrics::{heading_difference, Kinematics};

/// What a vehicle currently is to the routing layer. Ordinary vehicles carry
/// only the short-range radio (or sit outside the usable cellular region);
/// gateway candidates additionally have live cellular service; one candidate
/// per neighborhood wins election and serves as the gateway.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Ov,
    Vgc,
    Vgw,
}

impl NodeRole {
    /// Candidates and elected gateways both hold dual interfaces with
    /// adequate signal; only they participate in election.
    pub fn is_candidate_or_gateway(self) -> bool {
        self != NodeRole::Ov
    }
}

/// Role for the next tick. Losing the dual interface requirement or the
/// signal threshold demotes to ordinary; an elected gateway that stays
/// eligible keeps its election rather than re-contending.
pub fn classify_role(dual_interface: bool, rss_ok: bool, current: NodeRole) -> NodeRole {
    if !dual_interface || !rss_ok {
        NodeRole::Ov
    } else if current == NodeRole::Vgw {
        NodeRole::Vgw
    } else {
        NodeRole::Vgc
    }
}

/// True when two headings point the same way along the road (less than a
/// quarter turn apart).
pub fn same_direction(heading_a: f64, heading_b: f64) -> bool {
    heading_difference(heading_a, heading_b).abs() < FRAC_PI_2
}

/// True when the receiver sits behind the broadcaster relative to the
/// broadcaster's direction of travel (negative projection of the
/// displacement onto the heading).
pub fn is_behind(broadcaster: &Kinematics, receiver: &Kinematics) -> bool {
    let dx = receiver.x - broadcaster.x;
    let dy = receiver.y - broadcaster.y;
    dx * broadcaster.heading.cos() + dy * broadcaster.heading.sin() < 0.0
}

/// True when the receiver sits ahead of the broadcaster (strictly positive
/// projection).
pub fn is_ahead(broadcaster: &Kinematics, receiver: &Kinematics) -> bool {
    let dx = receiver.x - broadcaster.x;
    let dy = receiver.y - broadcaster.y;
    dx * broadcaster.heading.cos() + dy * broadcaster.heading.sin() > 0.0
}

/// May this receiver contend to rebroadcast a gateway advertisement?
/// Requires the first copy of (gateway, seq), a co-directional receiver
/// positioned behind the broadcaster (advertisements flood backward from
/// the gateway), and room left in the proactive zone. A relayed copy
/// carries hop_count + 1, so eligibility demands hop_count < h_max.
pub fn adv_relay_eligible(
    first_copy: bool,
    msg: &AdvMessage,
    receiver: &Kinematics,
    h_max: u32,
) -> bool {
    first_copy
        && same_direction(msg.broadcaster.heading, receiver.heading)
        && is_behind(&msg.broadcaster, receiver)
        && msg.hop_count < h_max
}

/// May this receiver contend to rebroadcast a solicitation? Same contention
/// machinery as advertisements, but solicitations flood forward (toward
/// where gateways and route holders are), and the rebroadcast must still be
/// strictly inside the flood radius: hop_count + 1 < max_hops.
pub fn sol_relay_eligible(first_copy: bool, msg: &SolMessage, receiver: &Kinematics) -> bool {
    first_copy
        && same_direction(msg.broadcaster.heading, receiver.heading)
        && is_ahead(&msg.broadcaster, receiver)
        && msg.hop_count + 1 < msg.max_hops
}
