use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collection::{DigestAlgo, MetadataFormat};
use crate::forwarder::ForwarderConfig;
use crate::peer::PeerConfig;

use super::mobility::MobilityParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("{0}")]
    Parse(String),
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumParams {
    /// Unit-disk radio range in meters.
    pub range: f64,
    pub loss_rate: f64,
    /// Bits per second.
    pub data_rate: f64,
}

impl Default for MediumParams {
    fn default() -> Self {
        Self {
            range: 100.0,
            loss_rate: 0.10,
            data_rate: 11e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeCounts {
    /// Stationary nodes that start with the whole collection.
    pub repos: usize,
    /// Mobile nodes that download the collection.
    pub downloaders: usize,
    pub pure_forwarders: usize,
    /// Mobile protocol-aware relays without a download of their own.
    pub intermediates: usize,
}

impl Default for NodeCounts {
    fn default() -> Self {
        Self {
            repos: 4,
            downloaders: 20,
            pure_forwarders: 10,
            intermediates: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectionSpec {
    pub name: String,
    pub files: usize,
    /// Bytes per file.
    pub file_size: usize,
    pub packet_size: usize,
    pub metadata_format: MetadataFormat,
    pub digest: DigestAlgo,
}

impl Default for CollectionSpec {
    fn default() -> Self {
        Self {
            name: "/campus/lecture-notes".into(),
            files: 10,
            file_size: 1 << 20,
            packet_size: 1024,
            metadata_format: MetadataFormat::DigestList,
            digest: DigestAlgo::Sha256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub seeds: Vec<u64>,
    pub max_sim_time: f64,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            seeds: (1..=10).collect(),
            max_sim_time: 1200.0,
        }
    }
}

/// Everything a run depends on besides the seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub nodes: NodeCounts,
    pub collection: CollectionSpec,
    pub medium: MediumParams,
    pub mobility: MobilityParams,
    pub peer: PeerConfig,
    pub forwarder: ForwarderConfig,
    pub run: RunParams,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.medium;
        if !(m.range > 0.0) {
            return Err(invalid("medium.range", "must be positive"));
        }
        if !(0.0..=1.0).contains(&m.loss_rate) {
            return Err(invalid("medium.loss_rate", "must be in [0, 1]"));
        }
        if !(m.data_rate > 0.0) {
            return Err(invalid("medium.data_rate", "must be positive"));
        }
        let mo = &self.mobility;
        if !(mo.arena_width > 0.0 && mo.arena_height > 0.0) {
            return Err(invalid("mobility.arena_width", "arena sides must be positive"));
        }
        if !(mo.speed_min >= 0.0 && mo.speed_min <= mo.speed_max) {
            return Err(invalid("mobility.speed_min", "need 0 <= speed_min <= speed_max"));
        }
        if !(mo.tick > 0.0) || !(mo.redraw_period > 0.0) {
            return Err(invalid("mobility.tick", "tick and redraw_period must be positive"));
        }
        let c = &self.collection;
        if crate::name::Name::parse(&c.name).map_or(true, |n| n.is_empty()) {
            return Err(invalid("collection.name", "not a valid non-empty name"));
        }
        if c.files == 0 || c.file_size == 0 || c.packet_size == 0 {
            return Err(invalid("collection", "files, file_size and packet_size must be positive"));
        }
        if self.nodes.repos == 0 {
            return Err(invalid("nodes.repos", "at least one repository is needed"));
        }
        if self.peer.slot_duration.is_some_and(|s| !(s > 0.0)) {
            return Err(invalid("peer.slot_duration", "must be positive"));
        }
        self.peer.validate().map_err(|r| invalid("peer", r))?;
        let f = &self.forwarder;
        if !(f.pit_lifetime > 0.0) || f.suppress_duration < 0.0 || f.fwd_jitter_max < 0.0 || f.cs_capacity == 0 {
            return Err(invalid("forwarder", "lifetimes and capacity must be positive"));
        }
        if self.run.seeds.is_empty() {
            return Err(invalid("run.seeds", "empty seed list"));
        }
        if !(self.run.max_sim_time > 0.0) {
            return Err(invalid("run.max_sim_time", "must be positive"));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        let n = &self.nodes;
        n.repos + n.downloaders + n.pure_forwarders + n.intermediates
    }
}
