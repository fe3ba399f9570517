//! Choosing and initialising a proof backend.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use sslc_core::proof::{CircuitShape, SetupError};
use sslc_core::NativeBackend;
use sslc_plonky2::Plonky2Backend;

use crate::oracle::SharedBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Native,
    Plonky2,
}

impl FromStr for BackendChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "native" => Ok(BackendChoice::Native),
            "plonky2" | "succinct" => Ok(BackendChoice::Plonky2),
            _ => Err(format!("unknown backend `{s}` (expected native or plonky2)")),
        }
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendChoice::Native => "native",
            BackendChoice::Plonky2 => "plonky2",
        })
    }
}

/// Plonky2 setup builds both circuits and takes tens of seconds.
pub fn setup_backend(choice: BackendChoice, shape: CircuitShape) -> Result<SharedBackend, SetupError> {
    Ok(match choice {
        BackendChoice::Native => Arc::new(NativeBackend::setup(shape)?),
        BackendChoice::Plonky2 => Arc::new(Plonky2Backend::setup(shape)?),
    })
}
