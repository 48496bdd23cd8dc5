//! Baseband simulation and decoding for physical-layer network coding over
//! a two-way relay channel with symbol and carrier-phase asynchrony.
//!
//! Two end nodes transmit simultaneously; the relay observes the
//! superposition through an oversampling front end ([`channel`]) and decodes
//! the symbolwise XOR of the two packets. Decoders:
//!
//! * [`upnc`] — exact sum-product on the chain graph of an uncoded frame,
//!   plus the per-symbol synchronous decision rule.
//! * [`ra`] — repeat-accumulate encoder and a standard point-to-point RA
//!   decoder over XOR-symbol tables.
//! * [`jtcnc`] — joint channel decoding and network coding: loopy
//!   sum-product over the cascaded chain + RA graph on symbol pairs.
//! * [`xorcd`] — the disjoint pipeline: per-symbol XOR posteriors first,
//!   conventional RA decoding second.
//!
//! The [`sweep`] module runs seeded Monte Carlo BER experiments over grids
//! of (scheme, modulation, offsets, SNR) and writes CSV; [`reference`] holds
//! independent brute-force and quadrature oracles used by the verification
//! suite in [`verify`] and by the test suites.

pub mod channel;
pub mod constellation;
pub mod error;
pub mod evidence;
pub mod jtcnc;
pub mod ra;
pub mod reference;
pub mod rng;
pub mod sweep;
pub mod upnc;
pub mod verify;
pub mod xorcd;

pub use channel::{transmit, ChannelParams, ReceivedFrame};
pub use constellation::{pnc_xor, Constellation, Modulation, SourcePacket};
pub use error::{PncError, Result};
pub use evidence::{evidence, xor_posterior, EdgeKind, JointTable, SymbolTable};
pub use jtcnc::{JointDecision, JointGraph};
pub use ra::{RaConfig, RaDecodeOutput};
pub use sweep::{BerRecord, Scheme, SweepConfig};
pub use upnc::{ChainMessages, XorDecision};
pub use xorcd::XorCdResult;
