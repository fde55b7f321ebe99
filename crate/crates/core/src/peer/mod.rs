//! The peer application: discovery beacons, metadata retrieval, bitmap
//! exchange, rarest-first data fetching, and the relay policy of
//! protocol-aware intermediate nodes.

mod app;
mod config;
mod knowledge;
mod messages;
mod session;

pub use app::{AppOut, AppPolicy, AppStats, AppTimer, PeerApp, Role};
pub use config::{BitmapCount, ExchangeMode, PeerConfig};
pub use knowledge::{CollectionView, Neighbor, NeighborKnowledge};
pub use messages::*;
pub use session::{Accept, DownloadSession, InFlight, MetadataOutcome};
