//! Channel decisions: per-receiver delivery of short-range broadcasts and
//! unicasts under the fading model, cellular coverage and signal-strength
//! tests, and transmission delays. Stateless given a config; every random
//! draw is injected by the caller.

use crate::metrics::{reception_probability, Kinematics};

/// Control frames (advertisements, solicitations, notifications) serialize
/// to well under this; the value only feeds the transmission-delay formula.
pub const CONTROL_FRAME_BYTES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    /// Nominal short-range transmission range, meters.
    pub max_range: f64,
    /// Short-range interface capacity, bits/second.
    pub data_rate: f64,
    /// Cellular base-station position, meters.
    pub base_station: (f64, f64),
    /// Cellular coverage radius, meters.
    pub r4g: f64,
    /// Gateway-eligibility threshold expressed as a distance: received signal
    /// strength is monotone in distance, so "signal at least the threshold"
    /// is "distance at most this".
    pub rss_threshold_distance: f64,
    /// Fixed latency of the reliable gateway-to-server uplink, seconds.
    pub lte_uplink_latency: f64,
    /// Testing aid: deterministic delivery iff distance <= max_range,
    /// bypassing the fading draw entirely.
    pub lossless: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            max_range: 250.0,
            data_rate: 6_000_000.0,
            base_station: (4000.0, 50.0),
            r4g: 7000.0,
            rss_threshold_distance: 6300.0,
            lte_uplink_latency: 0.010,
            lossless: false,
        }
    }
}

/// One delivery decision: true iff the draw lands under the reception
/// probability at the sender-receiver distance. Deterministic given the draw.
pub fn try_deliver(sender: &Kinematics, receiver: &Kinematics, r: f64, draw: f64) -> bool {
    debug_assert!((0.0..1.0).contains(&draw));
    draw < reception_probability(sender.distance_to(receiver), r)
}

impl RadioConfig {
    /// Delivery decision under this config; the lossless testing mode turns
    /// the channel into a deterministic range disk.
    pub fn deliver(&self, sender: &Kinematics, receiver: &Kinematics, draw: f64) -> bool {
        if self.lossless {
            sender.distance_to(receiver) <= self.max_range
        } else {
            try_deliver(sender, receiver, self.max_range, draw)
        }
    }

    pub fn lte_distance(&self, x: f64, y: f64) -> f64 {
        ((x - self.base_station.0).powi(2) + (y - self.base_station.1).powi(2)).sqrt()
    }

    /// Signal strength at or above the gateway-eligibility threshold
    /// (inclusive at the boundary).
    pub fn lte_rss_ok(&self, x: f64, y: f64) -> bool {
        self.lte_distance(x, y) <= self.rss_threshold_distance
    }

    pub fn in_lte_coverage(&self, x: f64, y: f64) -> bool {
        self.lte_distance(x, y) <= self.r4g
    }

    /// Air time of one frame plus a caller-drawn jitter in [0, 1 ms).
    pub fn tx_delay(&self, frame_bytes: usize, jitter01: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&jitter01) || jitter01 == 0.0);
        (frame_bytes as f64 * 8.0) / self.data_rate + jitter01 * 0.001
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.max_range > 0.0) {
            return Err(format!("radio.range = {} must be > 0", self.max_range));
        }
        if !(self.data_rate > 0.0) {
            return Err(format!("radio.data_rate = {} must be > 0", self.data_rate));
        }
        if !(self.r4g > 0.0) {
            return Err(format!("radio.r4g = {} must be > 0", self.r4g));
        }
        if !(self.rss_threshold_distance > 0.0 && self.rss_threshold_distance <= self.r4g) {
            return Err(format!(
                "radio.rss_threshold_distance = {} must be in (0, r4g = {}]",
                self.rss_threshold_distance, self.r4g
            ));
        }
        if self.lte_uplink_latency < 0.0 {
            return Err(format!(
                "radio.lte_uplink_latency = {} must be >= 0",
                self.lte_uplink_latency
            ));
        }
        Ok(())
    }
}
