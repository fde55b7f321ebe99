use serde::Serialize;

use crate::peer::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    Repo,
    Downloader,
    PureForwarder,
    Intermediate,
}

impl NodeRole {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::Repo => "repo",
            NodeRole::Downloader => "downloader",
            NodeRole::PureForwarder => "pure-forwarder",
            NodeRole::Intermediate => "intermediate",
        }
    }
}

/// Transmissions split by message category.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TxCounts {
    pub discovery: u64,
    pub metadata: u64,
    pub bitmap: u64,
    pub data: u64,
    /// Relayed Interests and Data, also counted in their category.
    pub forwards: u64,
}

impl TxCounts {
    pub fn add(&mut self, c: Category, relay: bool) {
        match c {
            Category::Discovery => self.discovery += 1,
            Category::Metadata => self.metadata += 1,
            Category::Bitmap => self.bitmap += 1,
            Category::Data => self.data += 1,
        }
        if relay {
            self.forwards += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.discovery + self.metadata + self.bitmap + self.data
    }

    pub fn merge(&mut self, o: &TxCounts) {
        self.discovery += o.discovery;
        self.metadata += o.metadata;
        self.bitmap += o.bitmap;
        self.data += o.data;
        self.forwards += o.forwards;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMetrics {
    pub node: usize,
    pub peer_id: u64,
    pub role: NodeRole,
    /// Completion time of downloaders that finished.
    pub download_time: Option<f64>,
    pub tx: TxCounts,
    /// Receptions lost to overlapping transmissions.
    pub collisions: u64,
    pub forwards_succeeded: u64,
    pub forwards_failed: u64,
    pub signature_failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub nodes: Vec<NodeMetrics>,
    pub tx: TxCounts,
    pub collisions: u64,
    pub losses: u64,
    pub deliveries: u64,
    pub broadcasts: u64,
    pub forwards_succeeded: u64,
    pub forwards_failed: u64,
    pub end_time: f64,
    pub max_sim_time: f64,
    /// Not every downloader finished before `max_sim_time`.
    pub timed_out: bool,
    pub events: u64,
    pub trace_digest: Option<String>,
}

impl MetricsReport {
    pub fn downloaders(&self) -> impl Iterator<Item = &NodeMetrics> {
        self.nodes.iter().filter(|n| n.role == NodeRole::Downloader)
    }

    /// Download times with unfinished downloaders counted at the time limit.
    pub fn download_times_censored(&self) -> Vec<f64> {
        self.downloaders()
            .map(|n| n.download_time.unwrap_or(self.max_sim_time))
            .collect()
    }

    pub fn completed(&self) -> usize {
        self.downloaders().filter(|n| n.download_time.is_some()).count()
    }

    pub fn median_download_time(&self) -> f64 {
        median(&self.download_times_censored())
    }

    /// Fraction of relayed Interests that brought Data back.
    pub fn forward_success_ratio(&self) -> Option<f64> {
        let n = self.forwards_succeeded + self.forwards_failed;
        (n > 0).then(|| self.forwards_succeeded as f64 / n as f64)
    }

    pub fn total_transmissions(&self) -> u64 {
        self.tx.total()
    }
}

pub fn median(xs: &[f64]) -> f64 {
    percentile(xs, 50.0)
}

/// Linear-interpolated percentile (`p` in [0, 100]); NaN for empty input.
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}
