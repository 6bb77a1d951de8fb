//! Packet erasure channels and the feedback-reception process.
//!
//! Each call to [`Channel::transmit`] consumes exactly one `f64` from the
//! channel's stream. A Gilbert-Elliott channel additionally consumes one
//! `f64` at construction to draw its initial state from the stationary
//! distribution.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelConfig {
    /// Independent erasures; `p_s` is the probability of correct reception.
    Bernoulli { p_s: f64 },
    /// Two-state Markov chain. Packets sent in the good state arrive, those
    /// sent in the bad state are lost.
    GilbertElliott { p_gb: f64, p_bg: f64 },
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig::Bernoulli { p_s: 0.7 }
    }
}

pub(crate) fn check_probability(key: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(key, format!("{p} is not a probability")))
    }
}

impl ChannelConfig {
    pub fn validate(&self, key: &str) -> Result<()> {
        match *self {
            ChannelConfig::Bernoulli { p_s } => check_probability(&format!("{key}.p_s"), p_s),
            ChannelConfig::GilbertElliott { p_gb, p_bg } => {
                check_probability(&format!("{key}.p_gb"), p_gb)?;
                check_probability(&format!("{key}.p_bg"), p_bg)
            }
        }
    }

    /// Long-run fraction of delivered packets.
    pub fn stationary_success(&self) -> f64 {
        match *self {
            ChannelConfig::Bernoulli { p_s } => p_s,
            ChannelConfig::GilbertElliott { p_gb, p_bg } => {
                if p_gb + p_bg == 0.0 {
                    1.0
                } else {
                    p_bg / (p_gb + p_bg)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeState {
    Good,
    Bad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Delivered,
    Erased,
}

impl Outcome {
    pub fn delivered(self) -> bool {
        self == Outcome::Delivered
    }
}

#[derive(Clone, Debug)]
pub struct Channel {
    config: ChannelConfig,
    state: GeState,
    rng: ChaCha8Rng,
}

impl Channel {
    pub fn new(config: ChannelConfig, mut rng: ChaCha8Rng) -> Self {
        let state = match config {
            ChannelConfig::Bernoulli { .. } => GeState::Good,
            ChannelConfig::GilbertElliott { .. } => {
                if rng.gen::<f64>() < config.stationary_success() {
                    GeState::Good
                } else {
                    GeState::Bad
                }
            }
        };
        Channel { config, state, rng }
    }

    /// Starts a Gilbert-Elliott channel in a given state instead of a
    /// stationary draw.
    pub fn with_state(config: ChannelConfig, state: GeState, rng: ChaCha8Rng) -> Self {
        Channel { config, state, rng }
    }

    pub fn config(&self) -> ChannelConfig {
        self.config
    }

    pub fn state(&self) -> GeState {
        self.state
    }

    pub fn transmit(&mut self) -> Outcome {
        let draw = self.rng.gen::<f64>();
        match self.config {
            ChannelConfig::Bernoulli { p_s } => {
                if draw < p_s {
                    Outcome::Delivered
                } else {
                    Outcome::Erased
                }
            }
            ChannelConfig::GilbertElliott { p_gb, p_bg } => {
                let outcome = match self.state {
                    GeState::Good => Outcome::Delivered,
                    GeState::Bad => Outcome::Erased,
                };
                self.state = match self.state {
                    GeState::Good if draw < p_gb => GeState::Bad,
                    GeState::Bad if draw < p_bg => GeState::Good,
                    s => s,
                };
                outcome
            }
        }
    }
}

/// Whether the feedback following a transmission reaches the sender.
pub fn feedback_arrives<R: Rng + ?Sized>(p_fb: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() < p_fb
}
