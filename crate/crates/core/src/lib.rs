//! Ingestion and featurization of multi-party session logs.
//!
//! A session is turned into a [`BehaviorPanel`]: one record per member and
//! time slice carrying the 24 canonical behavior channels
//! (see [`channels::CHANNELS`]) and an optional curiosity rating.

pub mod affect;
pub mod channels;
pub mod curiosity;
pub mod error;
pub mod featurize;
pub mod io;
pub mod panel;
pub mod reliability;
pub mod turns;

pub use channels::{Channel, ChannelKind, CHANNELS, N_CHANNELS};
pub use error::{Error, Result};
pub use panel::{
    assemble_panel, build_slice_grid, validate_panel, BehaviorPanel, FaceFrame, FeatureEntry, MemberSeries,
    PanelRecord, RaterScore, SessionLog, Slice, TurnEvent, ValidationReport, VerbalLabel,
};
