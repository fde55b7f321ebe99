use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::advertisement::{RpfStrategy, DEFAULT_HISTORY_CAPACITY};

/// How many bitmaps a peer collects per encounter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitmapCount {
    /// Every peer in range.
    All,
    Count(u16),
}

impl BitmapCount {
    /// Value carried in a request's `wanted` field.
    pub fn wire(self) -> u16 {
        match self {
            BitmapCount::All => u16::MAX,
            BitmapCount::Count(n) => n,
        }
    }
}

impl fmt::Display for BitmapCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BitmapCount::All => f.write_str("all"),
            BitmapCount::Count(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for BitmapCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(BitmapCount::All);
        }
        s.parse::<u16>()
            .ok()
            .filter(|n| *n < u16::MAX)
            .map(BitmapCount::Count)
            .ok_or_else(|| format!("expected \"all\" or a count below 65535, got {s:?}"))
    }
}

impl Serialize for BitmapCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BitmapCount::All => s.serialize_str("all"),
            BitmapCount::Count(n) => s.serialize_u16(*n),
        }
    }
}

impl<'de> Deserialize<'de> for BitmapCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => u16::try_from(n)
                .ok()
                .filter(|n| *n < u16::MAX)
                .map(BitmapCount::Count)
                .ok_or_else(|| serde::de::Error::custom(format!("bitmap count {n} out of range"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExchangeMode {
    /// Collect `b` bitmaps, then fetch data.
    BitmapsFirst,
    /// Fetch data and bitmaps side by side until `b` bitmaps are heard.
    Interleaved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeerConfig {
    pub exchange_mode: ExchangeMode,
    pub b: BitmapCount,
    pub strategy: RpfStrategy,
    pub random_start: bool,
    pub discovery_period_min: f64,
    pub discovery_period_max: f64,
    pub pipeline_depth: usize,
    pub forward_prob_no_knowledge: f64,
    pub knowledge_ttl: f64,
    /// Transmission window: bitmap timers scale it, other transmissions
    /// wait a uniform random time inside it.
    pub window: f64,
    pub peba: bool,
    pub peba_groups: u32,
    /// Slot length for backoff; `None` uses the airtime of a full packet.
    pub slot_duration: Option<f64>,
    /// Uniform jitter added to every bitmap timer.
    pub bitmap_jitter: f64,
    pub max_bitmap_attempts: u32,
    pub history_capacity: usize,
    /// Attempts per packet within one encounter.
    pub max_attempts: u32,
    /// Minimum spacing between bitmap exchanges while neighbors persist.
    pub bitmap_refresh: f64,
    /// Silence after which a bitmap exchange is considered finished;
    /// `None` uses three windows.
    pub quiet_timeout: Option<f64>,
    /// Period of the download pump.
    pub poll_interval: f64,
}

impl Default for PeerConfig {
    fn default() -> Self {
        Self {
            exchange_mode: ExchangeMode::Interleaved,
            b: BitmapCount::All,
            strategy: RpfStrategy::Local,
            random_start: false,
            discovery_period_min: 1.0,
            discovery_period_max: 8.0,
            pipeline_depth: 4,
            forward_prob_no_knowledge: 0.2,
            knowledge_ttl: 10.0,
            window: 0.020,
            peba: true,
            peba_groups: 2,
            slot_duration: None,
            bitmap_jitter: 0.0001,
            max_bitmap_attempts: 6,
            history_capacity: DEFAULT_HISTORY_CAPACITY,
            max_attempts: 5,
            bitmap_refresh: 5.0,
            quiet_timeout: None,
            poll_interval: 0.25,
        }
    }
}

impl PeerConfig {
    /// Zero forwarding probability is the single-hop design: no node
    /// relays Interests, knowledge or not.
    pub fn multi_hop(&self) -> bool {
        self.forward_prob_no_knowledge > 0.0
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.discovery_period_min > 0.0) || self.discovery_period_min > self.discovery_period_max {
            return Err("need 0 < discovery_period_min <= discovery_period_max".into());
        }
        if !(0.0..=1.0).contains(&self.forward_prob_no_knowledge) {
            return Err("forward_prob_no_knowledge must be in [0, 1]".into());
        }
        if self.pipeline_depth == 0 {
            return Err("pipeline_depth must be at least 1".into());
        }
        if self.peba_groups == 0 {
            return Err("peba_groups must be at least 1".into());
        }
        if !(self.window > 0.0) || !(self.knowledge_ttl > 0.0) {
            return Err("window and knowledge_ttl must be positive".into());
        }
        if self.bitmap_jitter < 0.0 || !(self.poll_interval > 0.0) {
            return Err("bitmap_jitter must be >= 0 and poll_interval > 0".into());
        }
        Ok(())
    }

    pub fn quiet(&self) -> f64 {
        self.quiet_timeout.unwrap_or(3.0 * self.window)
    }
}
