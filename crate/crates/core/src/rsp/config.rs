use alloc::vec::Vec;
use core::time::Duration;

use super::wire::{BeaconInfo, HEADER_LEN};
use super::RspError;

/// Protocol parameters shared by every member of a group.
#[derive(Debug, Clone, PartialEq)]
pub struct RspConfig {
    pub mtu: usize,
    pub num_buffers: usize,
    pub ack_freq: u32,
    /// bytes per second
    pub send_rate_min: f64,
    pub send_rate_max: f64,
    pub rate_increase: f64,
    pub rate_decrease: f64,
    pub bucket_capacity: f64,
    pub nack_delay: Duration,
    pub ack_timeout: Duration,
    /// Interval between repeated NACKs for the same gap.
    pub retransmit_interval: Duration,
    /// Consecutive silent ack timeouts after which a member counts as lost.
    pub max_silent_timeouts: u32,
    /// Sequence number of the first DATA datagram of every writer.
    pub first_sequence: u32,
    /// Static group membership.
    pub members: Vec<u16>,
}

impl Default for RspConfig {
    fn default() -> Self {
        Self {
            mtu: 1470,
            num_buffers: 1024,
            ack_freq: 17,
            send_rate_min: 1.0e6,
            send_rate_max: 1.25e8,
            rate_increase: 1.0e6,
            rate_decrease: 5.0e6,
            bucket_capacity: 64.0 * 1024.0,
            nack_delay: Duration::from_millis(1),
            ack_timeout: Duration::from_millis(10),
            retransmit_interval: Duration::from_millis(5),
            max_silent_timeouts: 50,
            first_sequence: 0,
            members: Vec::new(),
        }
    }
}

impl RspConfig {
    pub fn with_members(mut self, members: impl IntoIterator<Item = u16>) -> Self {
        self.members = members.into_iter().collect();
        self
    }

    pub fn max_payload(&self) -> usize {
        self.mtu - HEADER_LEN
    }

    pub fn validate(&self) -> Result<(), RspError> {
        let bad = |what| Err(RspError::InvalidConfig(what));
        if self.mtu < 64 || self.mtu > u16::MAX as usize {
            return bad("mtu must be within 64..=65535");
        }
        if self.ack_freq == 0 || self.ack_freq > u16::MAX as u32 {
            return bad("ack_freq must be within 1..=65535");
        }
        if self.num_buffers < 2 * self.ack_freq as usize || self.num_buffers >= 1 << 30 {
            return bad("num_buffers must be at least 2 * ack_freq");
        }
        let rates = [
            self.send_rate_min,
            self.send_rate_max,
            self.rate_increase,
            self.rate_decrease,
            self.bucket_capacity,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("rates and bucket capacity must be positive");
        }
        if self.send_rate_min > self.send_rate_max {
            return bad("send_rate_min exceeds send_rate_max");
        }
        if self.bucket_capacity < self.mtu as f64 {
            return bad("bucket capacity below one datagram");
        }
        if self.max_silent_timeouts == 0 {
            return bad("max_silent_timeouts must be positive");
        }
        for (i, m) in self.members.iter().enumerate() {
            if self.members[..i].contains(m) {
                return Err(RspError::DuplicateMember(*m));
            }
        }
        Ok(())
    }

    pub(crate) fn beacon_info(&self, nonce: u32) -> BeaconInfo {
        BeaconInfo {
            mtu: self.mtu as u16,
            num_buffers: self.num_buffers as u32,
            ack_freq: self.ack_freq as u16,
            nonce,
        }
    }

    pub(crate) fn matches(&self, info: &BeaconInfo) -> bool {
        info.mtu as usize == self.mtu
            && info.num_buffers as usize == self.num_buffers
            && info.ack_freq as u32 == self.ack_freq
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RspConfig::default().with_members([1, 2, 3]).validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let c = RspConfig { mtu: 32, ..Default::default() };
        assert!(c.validate().is_err());
        let c = RspConfig { num_buffers: 33, ..Default::default() };
        assert!(c.validate().is_err());
        let c = RspConfig { rate_increase: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = RspConfig::default().with_members([4, 5, 4]);
        assert_eq!(c.validate(), Err(RspError::DuplicateMember(4)));
    }
}
