//! Command-line front end for `qprob`: JSON instance files, single
//! computations, seeded instance generation and verification campaigns.

pub mod campaign;
pub mod commands;
pub mod error;
pub mod instance;

pub use campaign::{run_campaign, CampaignConfig, CampaignReport, Theorem};
pub use error::{CliError, CliResult};
pub use instance::{Instance, InstanceFile};
