//! Full parameterization of one run.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::griddef::{validate_nesting, DomainSpec, ValidationReport};
use crate::toymodel::{IcbcSource, PhysicsSelection};

/// Longest horizon the surrogate accepts, in hours.
pub const MAX_HORIZON_HOURS: u32 = 240;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    /// Free-text label of whoever launched the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    pub domains: Vec<DomainSpec>,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub icbc_source: IcbcSource,
    pub physics: PhysicsSelection,
}

/// Problems found in a [`RunConfig`] besides the nesting report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub nesting: ValidationReport,
    pub horizon: Vec<String>,
}

impl ConfigReport {
    pub fn is_ok(&self) -> bool {
        self.nesting.is_ok() && self.horizon.is_empty()
    }
}

impl RunConfig {
    /// Simulated hours, if the interval is a positive whole number of hours.
    pub fn horizon_hours(&self) -> Option<u32> {
        let secs = (self.end - self.start).num_seconds();
        (secs > 0 && secs % 3600 == 0).then_some((secs / 3600) as u32)
    }

    pub fn root(&self) -> &DomainSpec {
        &self.domains[0]
    }

    pub fn domain(&self, domain_id: u32) -> Option<&DomainSpec> {
        self.domains.iter().find(|d| d.domain_id == domain_id)
    }

    pub fn validate(&self) -> ConfigReport {
        let mut horizon = Vec::new();
        match self.horizon_hours() {
            None => horizon.push("end must be a whole number of hours after start".to_string()),
            Some(h) if h > MAX_HORIZON_HOURS => {
                horizon.push(format!("horizon {h} h exceeds {MAX_HORIZON_HOURS} h"))
            }
            Some(_) => {}
        }
        ConfigReport {
            nesting: validate_nesting(&self.domains),
            horizon,
        }
    }
}
