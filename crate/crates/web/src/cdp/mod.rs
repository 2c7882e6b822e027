//! DevTools-protocol backend for real Chrome/Chromium.

mod client;
mod driver;

pub use client::{CdpClient, Direction, Event, LoggedMessage, ProtocolLog};
pub use driver::{CdpConfig, CdpDriver, CdpFactory, ChromeLauncher, INSTRUMENT_JS};
