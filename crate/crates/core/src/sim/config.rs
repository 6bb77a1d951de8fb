use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{check_probability, ChannelConfig};
use crate::error::{Error, Result};
use crate::policies::{PolicyKind, SenderParams};
use crate::relay::{RelayParams, RelayPolicy};
use crate::symbol::FeedbackFormat;

/// Channels used when a relay is present. Unset links copy the uplink.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelayLinks {
    pub source_relay: Option<ChannelConfig>,
    pub relay_destination: Option<ChannelConfig>,
    pub feedback_overhear: Option<ChannelConfig>,
}

/// Everything that determines one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub policy: PolicyKind,
    pub relay: Option<RelayPolicy>,
    /// Number of generated symbols (one per timestep).
    pub n_symbols: u64,
    /// Delay tolerance: at time `i`, symbols older than `i - delta` are expired.
    pub delta: u64,
    /// Maximum symbols per source packet.
    pub b: usize,
    /// No-feedback degree.
    pub d_nf: usize,
    /// Feedback bits for the missing count or the delivery bitmap.
    pub l_m: u32,
    /// Feedback bits for the sequence number `u`.
    pub l_o: u32,
    /// Relay threshold.
    pub r_t: usize,
    /// Relay memory in symbols.
    pub r_m: usize,
    pub symbol_bits: usize,
    pub p_fb: f64,
    pub seed: u64,
    pub uplink: ChannelConfig,
    pub relay_links: RelayLinks,
    pub mf_exclude_delivered: bool,
    pub mf_aggressive_fill: bool,
    pub trace_output: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            policy: PolicyKind::Iwc,
            relay: None,
            n_symbols: 100_000,
            delta: 16,
            b: 3,
            d_nf: 2,
            l_m: 4,
            l_o: 17,
            r_t: 2,
            r_m: 16,
            symbol_bits: 32,
            p_fb: 0.25,
            seed: 1,
            uplink: ChannelConfig::Bernoulli { p_s: 0.7 },
            relay_links: RelayLinks::default(),
            mf_exclude_delivered: true,
            mf_aggressive_fill: false,
            trace_output: None,
        }
    }
}

/// Names accepted by [`SimConfig::set_param`].
pub const SWEEPABLE: &[&str] = &[
    "p_s", "p_gb", "p_bg", "p_fb", "b", "d_nf", "l_m", "l_o", "r_t", "r_m", "delta", "n_symbols",
    "seed",
];

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: u64| {
            if v == 0 {
                Err(Error::config(key, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("n_symbols", self.n_symbols)?;
        positive("delta", self.delta)?;
        positive("b", self.b as u64)?;
        positive("d_nf", self.d_nf as u64)?;
        positive("l_m", self.l_m as u64)?;
        positive("r_t", self.r_t as u64)?;
        positive("r_m", self.r_m as u64)?;
        if self.l_m > 63 {
            return Err(Error::config("l_m", "at most 63 bits"));
        }
        if self.l_o > 63 || (1u64 << self.l_o) <= self.delta + 1 {
            return Err(Error::config(
                "l_o",
                format!("2^l_o must exceed delta + 1 = {} and l_o <= 63", self.delta + 1),
            ));
        }
        if self.symbol_bits == 0 || !self.symbol_bits.is_multiple_of(8) {
            return Err(Error::config("symbol_bits", "must be a positive multiple of 8"));
        }
        check_probability("p_fb", self.p_fb)?;
        self.uplink.validate("uplink")?;
        for (key, link) in [
            ("relay_links.source_relay", &self.relay_links.source_relay),
            ("relay_links.relay_destination", &self.relay_links.relay_destination),
            ("relay_links.feedback_overhear", &self.relay_links.feedback_overhear),
        ] {
            if let Some(ch) = link {
                ch.validate(key)?;
            }
        }
        Ok(())
    }

    /// Sets a scalar parameter by name. Channel parameters edit the uplink
    /// (and therefore every relay link that follows it).
    pub fn set_param(&mut self, key: &str, value: f64) -> Result<()> {
        let as_int = |v: f64| -> Result<u64> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                Err(Error::config(key, format!("{v} is not a non-negative integer")))
            }
        };
        match key {
            "p_s" => self.uplink = ChannelConfig::Bernoulli { p_s: value },
            "p_gb" | "p_bg" => {
                let (mut p_gb, mut p_bg) = match self.uplink {
                    ChannelConfig::GilbertElliott { p_gb, p_bg } => (p_gb, p_bg),
                    ChannelConfig::Bernoulli { .. } => (0.25, 0.5),
                };
                if key == "p_gb" {
                    p_gb = value;
                } else {
                    p_bg = value;
                }
                self.uplink = ChannelConfig::GilbertElliott { p_gb, p_bg };
            }
            "p_fb" => self.p_fb = value,
            "b" => self.b = as_int(value)? as usize,
            "d_nf" => self.d_nf = as_int(value)? as usize,
            "l_m" => self.l_m = as_int(value)? as u32,
            "l_o" => self.l_o = as_int(value)? as u32,
            "r_t" => self.r_t = as_int(value)? as usize,
            "r_m" => self.r_m = as_int(value)? as usize,
            "delta" => self.delta = as_int(value)?,
            "n_symbols" => self.n_symbols = as_int(value)?,
            "seed" => self.seed = as_int(value)?,
            other => {
                return Err(Error::config(
                    other,
                    format!("unknown parameter; expected one of {}", SWEEPABLE.join(", ")),
                ))
            }
        }
        Ok(())
    }

    pub fn feedback_format(&self) -> FeedbackFormat {
        FeedbackFormat {
            l_o: self.l_o,
            l_m: self.l_m,
        }
    }

    pub fn sender_params(&self) -> SenderParams {
        SenderParams {
            delta: self.delta,
            b: self.b,
            d_nf: self.d_nf,
            feedback: self.feedback_format(),
            mf_exclude_delivered: self.mf_exclude_delivered,
            mf_aggressive_fill: self.mf_aggressive_fill,
        }
    }

    pub fn relay_params(&self) -> RelayParams {
        RelayParams {
            memory: self.r_m,
            threshold: self.r_t,
            d_nf: self.d_nf,
            delta: self.delta,
            feedback: self.feedback_format(),
        }
    }

    pub fn source_relay_channel(&self) -> ChannelConfig {
        self.relay_links.source_relay.unwrap_or(self.uplink)
    }

    pub fn relay_destination_channel(&self) -> ChannelConfig {
        self.relay_links.relay_destination.unwrap_or(self.uplink)
    }

    pub fn feedback_overhear_channel(&self) -> ChannelConfig {
        self.relay_links.feedback_overhear.unwrap_or(self.uplink)
    }

    pub fn payload_bytes(&self) -> usize {
        self.symbol_bits / 8
    }
}
