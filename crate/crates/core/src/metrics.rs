//! Per-run counters and the statistics derived from them.

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("throughput is undefined for a zero-length run")]
    ZeroDuration,
    #[error("delivery ratio is undefined when no segment was sent")]
    NothingSent,
}

/// Counters for one run. "Segments" are data segments; ACKs are counted
/// separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct RunMetrics {
    /// Every data transmission, retransmissions included.
    pub segments_sent: u64,
    /// Distinct segments put on the wire at least once.
    pub first_transmissions: u64,
    pub segments_retransmitted: u64,
    /// Retransmissions by the timer and the go-back-N resends after it.
    pub timeout_retransmits: u64,
    /// Fast retransmits plus partial-ACK retransmits.
    pub recovery_retransmits: u64,
    /// Link-level arrivals at the receiver, duplicates included.
    pub segments_arrived: u64,
    /// Distinct segments that reached the receiver.
    pub segments_received: u64,
    pub dropped_route_down: u64,
    pub dropped_random: u64,
    /// Data segments still on the link when the run ended.
    pub segments_in_flight_at_end: u64,
    pub acks_sent: u64,
    pub acks_lost: u64,
    /// In-order bytes handed to the receiving application.
    pub bytes_delivered: u64,
    pub duration_us: u64,
    pub timeouts: u64,
    pub fast_retransmits: u64,
    /// Fast-recovery episodes that saw at least one partial ACK.
    pub partial_ack_recoveries: u64,
}

impl RunMetrics {
    pub fn segments_dropped(&self) -> u64 {
        self.dropped_route_down + self.dropped_random
    }

    pub fn duration_secs(&self) -> f64 {
        self.duration_us as f64 / 1e6
    }

    /// Delivered bytes per second of run time.
    pub fn throughput(&self) -> Result<f64, MetricsError> {
        if self.duration_us == 0 {
            return Err(MetricsError::ZeroDuration);
        }
        Ok(self.bytes_delivered as f64 / self.duration_secs())
    }

    /// Distinct segments received over distinct segments sent.
    pub fn packet_delivery_ratio(&self) -> Result<f64, MetricsError> {
        if self.first_transmissions == 0 {
            return Err(MetricsError::NothingSent);
        }
        Ok(self.segments_received as f64 / self.first_transmissions as f64)
    }

    /// `sent = arrived + dropped + in flight`.
    pub fn is_conserved(&self) -> bool {
        self.segments_sent == self.segments_arrived + self.segments_dropped() + self.segments_in_flight_at_end
    }
}
