//! Run accounting: every generated data packet is tracked to exactly one
//! fate, control transmissions are tallied per message kind, and the three
//! evaluation metrics (delivery ratio, mean end-to-end delay, normalized
//! control overhead) are derived at the end.

use std::fmt;

/// Terminal fate of a data packet that did not reach the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropCause {
    /// Arrived at a node whose forwarding queue was full.
    BufferOverflow,
    /// A relay hop failed delivery on every transmission attempt.
    Channel,
    /// Still buffered awaiting a route when the run (or its patience) ended.
    Expiry,
    /// A forwarding loop guard or an unroutable situation gave up on it.
    Abandoned,
}

/// Control message kinds whose transmissions count toward overhead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlKind {
    Adv,
    Sol,
    UnicastAdv,
    Notify,
    Thanks,
}

/// Raw counters accumulated by one simulation run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub data_generated: u64,
    pub data_delivered: u64,
    pub drops_buffer: u64,
    pub drops_channel: u64,
    pub drops_expiry: u64,
    pub drops_abandoned: u64,
    /// Packets still somewhere in the network when accounting closed.
    pub in_flight_at_end: u64,
    pub adv_transmissions: u64,
    pub sol_transmissions: u64,
    pub unicast_adv_transmissions: u64,
    pub notify_transmissions: u64,
    pub thanks_transmissions: u64,
    /// End-to-end delay of each delivered packet, seconds.
    pub delay_samples: Vec<f64>,
    pub handovers: u64,
    pub vgw_elections: u64,
    /// Solicitation replies dropped because no reverse-path hop was
    /// reachable.
    pub replies_abandoned: u64,
}

impl RunStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_drop(&mut self, cause: DropCause) {
        match cause {
            DropCause::BufferOverflow => self.drops_buffer += 1,
            DropCause::Channel => self.drops_channel += 1,
            DropCause::Expiry => self.drops_expiry += 1,
            DropCause::Abandoned => self.drops_abandoned += 1,
        }
    }

    pub fn record_control(&mut self, kind: ControlKind) {
        match kind {
            ControlKind::Adv => self.adv_transmissions += 1,
            ControlKind::Sol => self.sol_transmissions += 1,
            ControlKind::UnicastAdv => self.unicast_adv_transmissions += 1,
            ControlKind::Notify => self.notify_transmissions += 1,
            ControlKind::Thanks => self.thanks_transmissions += 1,
        }
    }

    pub fn record_delivery(&mut self, delay: f64) {
        debug_assert!(delay >= 0.0, "delivered packet with negative delay {delay}");
        self.data_delivered += 1;
        self.delay_samples.push(delay);
    }

    pub fn total_drops(&self) -> u64 {
        self.drops_buffer + self.drops_channel + self.drops_expiry + self.drops_abandoned
    }

    pub fn total_control_transmissions(&self) -> u64 {
        self.adv_transmissions
            + self.sol_transmissions
            + self.unicast_adv_transmissions
            + self.notify_transmissions
            + self.thanks_transmissions
    }

    /// Every generated packet must be delivered, dropped for a recorded
    /// cause, or explicitly still in flight.
    pub fn check_conservation(&self) -> Result<(), ConservationError> {
        let accounted = self.data_delivered + self.total_drops() + self.in_flight_at_end;
        if accounted == self.data_generated {
            Ok(())
        } else {
            Err(ConservationError {
                generated: self.data_generated,
                accounted,
            })
        }
    }

    pub fn derive(&self) -> DerivedMetrics {
        let pdr = if self.data_generated == 0 {
            None
        } else {
            Some(self.data_delivered as f64 / self.data_generated as f64)
        };
        let (mean_delay, overhead) = if self.data_delivered == 0 {
            (None, None)
        } else {
            let sum: f64 = self.delay_samples.iter().sum();
            (
                Some(sum / self.delay_samples.len() as f64),
                Some(self.total_control_transmissions() as f64 / self.data_delivered as f64),
            )
        };
        DerivedMetrics {
            pdr,
            mean_delay,
            overhead,
        }
    }
}

/// The three evaluation metrics. Each is absent when its denominator is
/// zero (no traffic, or nothing delivered) rather than infinite or NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedMetrics {
    pub pdr: Option<f64>,
    pub mean_delay: Option<f64>,
    pub overhead: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConservationError {
    pub generated: u64,
    pub accounted: u64,
}

impl fmt::Display for ConservationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "packet accounting broken: {} generated but {} accounted for",
            self.generated, self.accounted
        )
    }
}

impl std::error::Error for ConservationError {}
