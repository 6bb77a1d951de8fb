//! LoRa frame airtime and duty cycle for frames carrying `b` symbols.
//!
//! ```text
//! l_f(b) = [ (n_pr + 4.25) + 8
//!            + max( ceil((2bm - SF - 5h + 11) / (SF - 2q)) * (c + 4), 0 ) ] * 2^SF / w
//! DC     = l_f(b) / T_p
//! MCR    = 1 / b
//! ```
//!
//! This is the variant of the airtime expression used for the duty-cycle
//! table; it differs in constants from the radio vendor's datasheet formula
//! and is implemented as written. All arithmetic is exact.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Exact = Ratio<i128>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoRaParams {
    pub spreading_factor: u32,
    pub bandwidth_hz: u64,
    pub preamble_symbols: u32,
    /// `h`: 1 when the optional header is omitted.
    pub header: u8,
    /// `q`: 1 with low-data-rate optimisation.
    pub low_data_rate: u8,
    /// `c` in 1..=4.
    pub coding_rate: u8,
    /// Bytes per application symbol.
    pub bytes_per_symbol: u32,
    /// Interval between frames in milliseconds.
    pub period_ms: u64,
}

impl Default for LoRaParams {
    fn default() -> Self {
        LoRaParams {
            spreading_factor: 7,
            bandwidth_hz: 125_000,
            preamble_symbols: 8,
            header: 0,
            low_data_rate: 0,
            coding_rate: 1,
            bytes_per_symbol: 4,
            period_ms: 60_000,
        }
    }
}

impl LoRaParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::config(key, why));
        if !(7..=12).contains(&self.spreading_factor) {
            return bad("spreading_factor", "must lie in 7..=12");
        }
        if self.bandwidth_hz == 0 {
            return bad("bandwidth_hz", "must be positive");
        }
        if self.header > 1 || self.low_data_rate > 1 {
            return bad("header/low_data_rate", "flags are 0 or 1");
        }
        if !(1..=4).contains(&self.coding_rate) {
            return bad("coding_rate", "must lie in 1..=4");
        }
        if self.period_ms == 0 {
            return bad("period_ms", "must be positive");
        }
        if self.spreading_factor <= 2 * self.low_data_rate as u32 {
            return bad("spreading_factor", "SF - 2q must be positive");
        }
        Ok(())
    }

    /// Symbol duration `2^SF / w` in milliseconds.
    pub fn symbol_time_ms(&self) -> Exact {
        Exact::new(
            (1i128 << self.spreading_factor) * 1000,
            self.bandwidth_hz as i128,
        )
    }
}

/// Airtime of a frame carrying `b` symbols, in milliseconds.
pub fn frame_airtime(b: u32, p: &LoRaParams) -> Result<Exact> {
    if b == 0 {
        return Err(Error::invalid("a frame carries at least one symbol"));
    }
    p.validate()?;
    let sf = p.spreading_factor as i128;
    let denom = sf - 2 * p.low_data_rate as i128;
    let numer = 2 * b as i128 * p.bytes_per_symbol as i128 - sf - 5 * p.header as i128 + 11;
    let blocks = numer.div_euclid(denom) + i128::from(numer.rem_euclid(denom) != 0);
    let payload_symbols = (blocks * (p.coding_rate as i128 + 4)).max(0);
    // n_pr + 4.25 + 8 in quarter symbols
    let quarters = 4 * p.preamble_symbols as i128 + 17 + 32 + 4 * payload_symbols;
    Ok(Exact::new(quarters, 4) * p.symbol_time_ms())
}

/// Fraction of time on air with one `b`-symbol frame per period.
pub fn duty_cycle(b: u32, p: &LoRaParams) -> Result<Exact> {
    Ok(frame_airtime(b, p)? / Exact::from(p.period_ms as i128))
}

pub fn min_coding_rate(b: u32) -> Result<Exact> {
    if b == 0 {
        return Err(Error::invalid("b must be at least 1"));
    }
    Ok(Exact::new(1, b as i128))
}

/// Decimal rendering of an exact non-negative value, rounded half up.
pub fn format_fixed(x: Exact, decimals: u32) -> String {
    let scale = 10i128.pow(decimals);
    let scaled = x * Exact::from(scale);
    let rounded = (scaled + Exact::new(1, 2)).floor().to_integer();
    let int = rounded / scale;
    let frac = rounded % scale;
    if decimals == 0 {
        int.to_string()
    } else {
        format!("{int}.{frac:0width$}", width = decimals as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DutyCycleRow {
    pub b: u32,
    pub airtime_ms: Exact,
    pub mcr: Exact,
    pub duty_cycle: Exact,
}

impl DutyCycleRow {
    pub const CSV_HEADER: &'static str = "b,airtime_ms,mcr,duty_cycle_pct";

    /// `b,airtime_ms,mcr,duty_cycle_pct` at 3, 2 and 3 decimals.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.b,
            format_fixed(self.airtime_ms, 3),
            format_fixed(self.mcr, 2),
            format_fixed(self.duty_cycle * Exact::from(100), 3)
        )
    }
}

pub fn duty_cycle_table(bs: impl IntoIterator<Item = u32>, p: &LoRaParams) -> Result<Vec<DutyCycleRow>> {
    bs.into_iter()
        .map(|b| {
            Ok(DutyCycleRow {
                b,
                airtime_ms: frame_airtime(b, p)?,
                mcr: min_coding_rate(b)?,
                duty_cycle: duty_cycle(b, p)?,
            })
        })
        .collect()
}
