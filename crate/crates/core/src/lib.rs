//! Data-centric peer-to-peer file sharing over a named-data forwarding
//! plane, with a deterministic wireless simulator to run it in.
//!
//! Layers, bottom up: [`name`], [`tlv`] and [`packet`] define names and the
//! wire format; [`forwarder`] is the per-node CS/PIT/FIB engine;
//! [`collection`], [`advertisement`] and [`scheduling`] hold the protocol
//! building blocks; [`peer`] is the application state machine; [`sim`]
//! runs many nodes over a lossy broadcast medium. [`analysis`] evaluates the
//! closed-form estimates the simulator is checked against.

pub mod advertisement;
pub mod analysis;
pub mod collection;
pub mod forwarder;
pub mod name;
pub mod packet;
pub mod peer;
pub mod scalar;
pub mod scheduling;
pub mod sim;
pub mod tlv;

pub use name::{Name, NameError};
pub use packet::{Data, Interest, Packet, PacketKind};
pub use scalar::Scalar;
pub use tlv::{CodecError, TlvElement};

/// Simulation time in seconds.
pub type Seconds = f64;
pub type SlotContentionF64 = analysis::SlotContention<f64>;
pub type SlotContentionF32 = analysis::SlotContention<f32>;
pub type FetchBudgetF64 = analysis::FetchBudget<f64>;
pub type FetchBudgetF32 = analysis::FetchBudget<f32>;
