//! Transaction time and energy over backhaul media, per-pattern prediction
//! latency, and medium feasibility per application class.
//!
//! A transaction is connection set-up and teardown, a linear data transfer,
//! the first-hop round trip and the backbone round trip to the cloud:
//!
//! ```text
//! time_ms   = setup_ms + bytes * 8 / throughput_kbps + first_hop_rtt_ms + core_rtt_ms
//! energy_mj = energy_setup_mj + bytes * energy_per_byte_mj
//! ```

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Pattern;

pub const DEFAULT_PROFILES_TOML: &str = include_str!("../profiles/default.toml");
pub const DEFAULT_APP_CLASSES_TOML: &str = include_str!("../profiles/app_classes.toml");

#[derive(Debug, Error)]
pub enum NetError {
    #[error("profile {name}: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("app class {name}: max_latency_ms must be positive")]
    InvalidAppClass { name: String },
    #[error("unknown medium {0:?}")]
    UnknownMedium(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumProfile {
    #[serde(skip)]
    pub name: String,
    pub first_hop_rtt_ms: f64,
    pub setup_ms: f64,
    pub throughput_kbps: f64,
    pub energy_setup_mj: f64,
    pub energy_per_byte_mj: f64,
    pub core_rtt_ms: f64,
}

impl MediumProfile {
    /// Zero set-up, zero round trips, unbounded throughput, zero energy.
    pub fn instantaneous() -> Self {
        Self {
            name: "instantaneous".into(),
            first_hop_rtt_ms: 0.0,
            setup_ms: 0.0,
            throughput_kbps: f64::INFINITY,
            energy_setup_mj: 0.0,
            energy_per_byte_mj: 0.0,
            core_rtt_ms: 0.0,
        }
    }

    /// Time fields must be finite and non-negative; throughput must be
    /// positive (unbounded is allowed and means zero transfer time).
    pub fn validate(&self) -> Result<(), NetError> {
        let fail = |reason: &str| {
            Err(NetError::InvalidProfile {
                name: self.name.clone(),
                reason: reason.into(),
            })
        };
        for (field, v) in [
            ("first_hop_rtt_ms", self.first_hop_rtt_ms),
            ("setup_ms", self.setup_ms),
            ("energy_setup_mj", self.energy_setup_mj),
            ("energy_per_byte_mj", self.energy_per_byte_mj),
            ("core_rtt_ms", self.core_rtt_ms),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(&format!("{field} must be finite and non-negative"));
            }
        }
        if self.throughput_kbps.is_nan() || self.throughput_kbps <= 0.0 {
            return fail("throughput_kbps must be positive");
        }
        Ok(())
    }

    /// Pure transfer time of `bytes`, without set-up or round trips.
    pub fn transfer_ms(&self, bytes: u64) -> f64 {
        (bytes as f64 * 8.0) / self.throughput_kbps
    }

    /// Per-transaction overhead: set-up plus both round-trip terms.
    pub fn fixed_ms(&self) -> f64 {
        self.setup_ms + self.first_hop_rtt_ms + self.core_rtt_ms
    }
}

pub fn transaction_time(profile: &MediumProfile, bytes: u64) -> f64 {
    profile.setup_ms + profile.transfer_ms(bytes) + profile.first_hop_rtt_ms + profile.core_rtt_ms
}

pub fn transaction_energy(profile: &MediumProfile, bytes: u64) -> f64 {
    profile.energy_setup_mj + bytes as f64 * profile.energy_per_byte_mj
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransactionReport {
    pub profile: String,
    pub bytes: u64,
    pub time_ms: f64,
    pub energy_mj: f64,
}

pub fn transaction(profile: &MediumProfile, bytes: u64) -> TransactionReport {
    TransactionReport {
        profile: profile.name.clone(),
        bytes,
        time_ms: transaction_time(profile, bytes),
        energy_mj: transaction_energy(profile, bytes),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessageSizes {
    pub s_bytes: u64,
    pub d_bytes: u64,
    pub m_bytes: u64,
}

/// Prediction compute costs, excluded from any accuracy metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComputeCosts {
    pub edge_ms: f64,
    pub cloud_ms: f64,
}

impl Default for ComputeCosts {
    fn default() -> Self {
        Self {
            edge_ms: 1.0,
            cloud_ms: 1.0,
        }
    }
}

/// Latency of one prediction. P0 and P1 predict on the edge; the model push of
/// P0 happens in the background and is not on the prediction path. P2 pays an
/// uplink transaction, the cloud prediction and a downlink transaction.
pub fn pattern_latency(
    pattern: Pattern,
    profile: &MediumProfile,
    sizes: &MessageSizes,
    compute: &ComputeCosts,
) -> f64 {
    match pattern {
        Pattern::P0 | Pattern::P1 => compute.edge_ms,
        Pattern::P2 => {
            transaction_time(profile, sizes.s_bytes)
                + compute.cloud_ms
                + transaction_time(profile, sizes.d_bytes)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppClass {
    #[serde(skip)]
    pub name: String,
    pub max_latency_ms: f64,
}

impl AppClass {
    pub fn new(name: impl Into<String>, max_latency_ms: f64) -> Result<Self, NetError> {
        let class = Self {
            name: name.into(),
            max_latency_ms,
        };
        class.validate()?;
        Ok(class)
    }

    /// Tolerates any latency.
    pub fn unbounded(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            max_latency_ms: f64::INFINITY,
        }
    }

    pub fn motion_control() -> Self {
        Self {
            name: "motion_control".into(),
            max_latency_ms: 10.0,
        }
    }

    pub fn process_automation() -> Self {
        Self {
            name: "process_automation".into(),
            max_latency_ms: 100.0,
        }
    }

    fn validate(&self) -> Result<(), NetError> {
        if self.max_latency_ms > 0.0 {
            Ok(())
        } else {
            Err(NetError::InvalidAppClass {
                name: self.name.clone(),
            })
        }
    }
}

impl fmt::Display for AppClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (<= {} ms)", self.name, self.max_latency_ms)
    }
}

fn parse_sections<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<(String, T)>, NetError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| NetError::Parse(e.to_string()))?;
    table
        .into_iter()
        .map(|(name, value)| {
            let parsed = value
                .try_into::<T>()
                .map_err(|e| NetError::Parse(format!("section [{name}]: {e}")))?;
            Ok((name, parsed))
        })
        .collect()
}

/// Parses a profile document: one table per medium, in file order.
pub fn parse_profiles(text: &str) -> Result<Vec<MediumProfile>, NetError> {
    parse_sections::<MediumProfile>(text)?
        .into_iter()
        .map(|(name, mut p)| {
            p.name = name;
            p.validate()?;
            Ok(p)
        })
        .collect()
}

pub fn default_profiles() -> Vec<MediumProfile> {
    parse_profiles(DEFAULT_PROFILES_TOML).expect("shipped profile file is valid")
}

pub fn parse_app_classes(text: &str) -> Result<Vec<AppClass>, NetError> {
    parse_sections::<AppClass>(text)?
        .into_iter()
        .map(|(name, mut c)| {
            c.name = name;
            c.validate()?;
            Ok(c)
        })
        .collect()
}

pub fn default_app_classes() -> Vec<AppClass> {
    parse_app_classes(DEFAULT_APP_CLASSES_TOML).expect("shipped app class file is valid")
}

/// Looks a medium up by name; `instantaneous` is always available.
pub fn find_profile(profiles: &[MediumProfile], name: &str) -> Result<MediumProfile, NetError> {
    if name == "instantaneous" {
        return Ok(MediumProfile::instantaneous());
    }
    profiles
        .iter()
        .find(|p| p.name == name)
        .cloned()
        .ok_or_else(|| NetError::UnknownMedium(name.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityRow {
    pub app_class: String,
    pub pattern: Pattern,
    pub medium: String,
    pub latency_ms: f64,
    pub feasible: bool,
}

/// Cross product of app classes × patterns × media, in that nesting order.
pub fn recommend(
    patterns: &[Pattern],
    profiles: &[MediumProfile],
    app_classes: &[AppClass],
    sizes: &MessageSizes,
    compute: &ComputeCosts,
) -> Vec<FeasibilityRow> {
    let mut rows = Vec::with_capacity(app_classes.len() * patterns.len() * profiles.len());
    for app in app_classes {
        for &pattern in patterns {
            for profile in profiles {
                let latency_ms = pattern_latency(pattern, profile, sizes, compute);
                rows.push(FeasibilityRow {
                    app_class: app.name.clone(),
                    pattern,
                    medium: profile.name.clone(),
                    latency_ms,
                    feasible: latency_ms <= app.max_latency_ms,
                });
            }
        }
    }
    rows
}

/// Feasible media per (app class, pattern), in table order.
pub fn feasible_media(rows: &[FeasibilityRow]) -> Vec<(String, Pattern, Vec<String>)> {
    let mut out: Vec<(String, Pattern, Vec<String>)> = Vec::new();
    for r in rows {
        let idx = match out
            .iter()
            .position(|(a, p, _)| *a == r.app_class && *p == r.pattern)
        {
            Some(i) => i,
            None => {
                out.push((r.app_class.clone(), r.pattern, Vec::new()));
                out.len() - 1
            }
        };
        if r.feasible {
            out[idx].2.push(r.medium.clone());
        }
    }
    out
}

/// CSV with header `app_class,pattern,medium,latency_ms,feasible`.
pub fn write_feasibility_csv<W: Write>(rows: &[FeasibilityRow], out: W) -> Result<(), NetError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["app_class", "pattern", "medium", "latency_ms", "feasible"])?;
    for r in rows {
        w.write_record([
            r.app_class.clone(),
            r.pattern.to_string(),
            r.medium.clone(),
            format!("{:?}", r.latency_ms),
            r.feasible.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
