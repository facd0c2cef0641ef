use std::process::ExitCode;

use softsense::cvae::CvaeError;
use softsense::genprobe::ProbeError;
use softsense::latentlens::LensError;
use softsense::numerics::NumericsError;
use thiserror::Error;

/// Bad flag values or configuration the parser could not catch.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const USAGE: u8 = 2;
pub const DATA: u8 = 3;
pub const NUMERIC: u8 = 4;

fn cvae_code(e: &CvaeError) -> u8 {
    match e {
        CvaeError::Config(_) => USAGE,
        CvaeError::NonFinite { .. } | CvaeError::Numerics(_) => NUMERIC,
        _ => DATA,
    }
}

/// Exit code for a failed command, from the first recognized error in the
/// chain.
pub fn exit_code(err: &anyhow::Error) -> ExitCode {
    for cause in err.chain() {
        let code = if cause.is::<UsageError>() || cause.is::<toml::de::Error>() {
            Some(USAGE)
        } else if let Some(e) = cause.downcast_ref::<CvaeError>() {
            Some(cvae_code(e))
        } else if let Some(e) = cause.downcast_ref::<ProbeError>() {
            Some(match e {
                ProbeError::Config(_) => USAGE,
                ProbeError::Model(m) => cvae_code(m),
                ProbeError::Output { .. } => DATA,
            })
        } else if let Some(e) = cause.downcast_ref::<LensError>() {
            Some(match e {
                LensError::Degenerate(_) => NUMERIC,
                LensError::Model(m) => cvae_code(m),
                _ => DATA,
            })
        } else if cause.is::<NumericsError>() {
            Some(NUMERIC)
        } else {
            None
        };
        if let Some(code) = code {
            return ExitCode::from(code);
        }
    }
    ExitCode::from(DATA)
}
