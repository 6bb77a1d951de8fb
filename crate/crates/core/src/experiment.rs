//! Named parameter sweeps that produce DFR tables as CSV.
//!
//! An experiment is a base [`SimConfig`], a list of schemes, zero or more
//! swept parameters and a seed list. The grid is the cartesian product of
//! the swept values (first axis outermost); every grid point is run for each
//! scheme and each seed.
//!
//! CSV columns: `scheme`, one column per swept parameter, `mean_dfr`,
//! `ci_low`, `ci_high`, `runs`, `seeds` (seeds joined with `;`). Rows follow
//! grid order, schemes in the order listed.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::policies::PolicyKind;
use crate::relay::RelayPolicy;
use crate::sim::sweep::{sweep, DfrStats};
use crate::sim::{SimConfig, SWEEPABLE};

/// A source policy, optionally combined with a relay policy. Relay schemes
/// run IWC at the source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Scheme {
    pub source: PolicyKind,
    pub relay: Option<RelayPolicy>,
}

impl Scheme {
    pub const fn source(p: PolicyKind) -> Self {
        Scheme { source: p, relay: None }
    }

    pub const fn relayed(r: RelayPolicy) -> Self {
        Scheme {
            source: PolicyKind::Iwc,
            relay: Some(r),
        }
    }

    pub const RR: Scheme = Scheme::source(PolicyKind::Rr);
    pub const WC: Scheme = Scheme::source(PolicyKind::Wc);
    pub const IWC: Scheme = Scheme::source(PolicyKind::Iwc);
    pub const IWC_MF: Scheme = Scheme::source(PolicyKind::IwcMf);
    pub const UC_R: Scheme = Scheme::relayed(RelayPolicy::UcR);
    pub const IWC_R: Scheme = Scheme::relayed(RelayPolicy::IwcR);

    pub fn name(&self) -> &'static str {
        match self.relay {
            Some(r) => r.name(),
            None => self.source.name(),
        }
    }

    pub fn apply(&self, cfg: &mut SimConfig) {
        cfg.policy = self.source;
        cfg.relay = self.relay;
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(r) = s.parse::<RelayPolicy>() {
            return Ok(Scheme::relayed(r));
        }
        s.parse::<PolicyKind>()
            .map(Scheme::source)
            .map_err(|_| Error::config("schemes", format!("unknown scheme `{s}`")))
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.name().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(param: &str, values: impl IntoIterator<Item = f64>) -> Self {
        SweepAxis {
            param: param.to_string(),
            values: values.into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub base: SimConfig,
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ExperimentRow {
    pub scheme: Scheme,
    pub point: Vec<(String, f64)>,
    pub stats: DfrStats,
    pub seeds: Vec<u64>,
    /// Mean transmissions per run made by the relay (0 without relay).
    pub relay_tx: f64,
}

/// Swept parameter values, in axis order.
type GridPoint = Vec<(String, f64)>;

pub const PRESETS: &[&str] = &[
    "fig-dfr-norelay-bernoulli",
    "fig-dfr-vs-b",
    "fig-dfr-vs-nfd",
    "fig-dfr-vs-lm",
    "fig-relay-bernoulli",
    "fig-relay-ge",
    "fig-dfr-vs-rt",
    "fig-dfr-vs-rm",
];

fn range(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(f64::from).collect()
}

/// Built-in sweeps over the standard DFR scenarios, with 10 seeds and
/// 100,000 symbols per run.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    use Scheme as S;
    let ge = |p_bg| ChannelConfig::GilbertElliott { p_gb: 0.25, p_bg };
    let mut base = SimConfig::default();
    let (schemes, sweep) = match name {
        "fig-dfr-norelay-bernoulli" => (
            vec![S::RR, S::WC, S::IWC, S::IWC_MF],
            vec![
                SweepAxis::new("p_fb", [0.25, 0.75]),
                SweepAxis::new("p_s", [0.5, 0.6, 0.7, 0.8, 0.9]),
            ],
        ),
        "fig-dfr-vs-b" => (
            vec![S::RR, S::WC, S::IWC, S::IWC_MF],
            vec![SweepAxis::new("b", range(2, 8))],
        ),
        "fig-dfr-vs-nfd" => (
            vec![S::IWC, S::IWC_MF],
            vec![
                SweepAxis::new("p_s", [0.5, 0.7, 0.9]),
                SweepAxis::new("d_nf", range(1, 8)),
            ],
        ),
        "fig-dfr-vs-lm" => (
            vec![S::IWC, S::IWC_MF],
            vec![SweepAxis::new("l_m", range(1, 16))],
        ),
        "fig-relay-bernoulli" => {
            base.r_t = 2;
            (
                vec![S::IWC, S::UC_R, S::IWC_R],
                vec![SweepAxis::new("p_s", [0.5, 0.6, 0.7, 0.8, 0.9])],
            )
        }
        "fig-relay-ge" => {
            base.r_t = 5;
            base.uplink = ge(0.5);
            (
                vec![S::RR, S::IWC, S::IWC_MF, S::UC_R, S::IWC_R],
                vec![SweepAxis::new("p_bg", [0.3, 0.45, 0.6, 0.75, 0.9])],
            )
        }
        "fig-dfr-vs-rt" => {
            base.uplink = ge(0.5);
            (
                vec![S::UC_R, S::IWC_R],
                vec![
                    SweepAxis::new("p_bg", [0.5, 0.75]),
                    SweepAxis::new("r_t", range(1, 16)),
                ],
            )
        }
        "fig-dfr-vs-rm" => {
            base.uplink = ge(0.5);
            (
                vec![S::UC_R, S::IWC_R],
                vec![
                    SweepAxis::new("r_t", [5.0, 10.0]),
                    SweepAxis::new("r_m", range(5, 16)),
                ],
            )
        }
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{other}`; available: {}", PRESETS.join(", ")),
            ))
        }
    };
    Ok(ExperimentSpec {
        name: name.to_string(),
        base,
        schemes,
        sweep,
        seeds: (1..=10).collect(),
        output: None,
    })
}

impl ExperimentSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "at least one scheme is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        self.base.validate()?;
        for axis in &self.sweep {
            if !SWEEPABLE.contains(&axis.param.as_str()) {
                return Err(Error::config(
                    axis.param.clone(),
                    format!("not a sweepable parameter; expected one of {}", SWEEPABLE.join(", ")),
                ));
            }
            if axis.values.is_empty() {
                return Err(Error::config(axis.param.clone(), "empty value list"));
            }
        }
        for (_, cfg) in self.grid()? {
            cfg.validate()?;
        }
        Ok(())
    }

    /// Grid points in output order, each with the configs for every scheme.
    fn grid(&self) -> Result<Vec<(GridPoint, SimConfig)>> {
        let mut points: Vec<GridPoint> = vec![Vec::new()];
        for axis in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((axis.param.clone(), v));
                        q
                    })
                })
                .collect();
        }
        let mut out = Vec::new();
        for point in points {
            for scheme in &self.schemes {
                let mut cfg = self.base.clone();
                cfg.trace_output = None;
                for (k, v) in &point {
                    cfg.set_param(k, *v)?;
                }
                scheme.apply(&mut cfg);
                out.push((point.clone(), cfg));
            }
        }
        Ok(out)
    }

    pub fn run(&self) -> Result<Vec<ExperimentRow>> {
        self.validate()?;
        let grid = self.grid()?;
        let configs: Vec<SimConfig> = grid.iter().map(|(_, c)| c.clone()).collect();
        let rows = sweep(&configs, &self.seeds)?;
        Ok(grid
            .into_iter()
            .zip(rows)
            .map(|((point, cfg), row)| ExperimentRow {
                scheme: Scheme {
                    source: cfg.policy,
                    relay: cfg.relay,
                },
                point,
                stats: row.stats,
                seeds: row.seeds,
                relay_tx: row.results.iter().map(|r| r.counters.relay_tx as f64).sum::<f64>()
                    / row.results.len() as f64,
            })
            .collect())
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["scheme".to_string()];
        cols.extend(self.sweep.iter().map(|a| a.param.clone()));
        cols.extend(["mean_dfr", "ci_low", "ci_high", "runs", "seeds"].map(String::from));
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, rows: &[ExperimentRow], mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        for r in rows {
            let mut cols = vec![r.scheme.name().to_string()];
            cols.extend(r.point.iter().map(|(_, v)| v.to_string()));
            cols.push(format!("{:.8}", r.stats.mean));
            cols.push(format!("{:.8}", r.stats.ci_low));
            cols.push(format!("{:.8}", r.stats.ci_high));
            cols.push(r.stats.runs.to_string());
            cols.push(r.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"));
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    }
}

/// Runs `spec` and writes its CSV to `out` (or `spec.output`). Returns the rows.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>) -> Result<Vec<ExperimentRow>> {
    let rows = spec.run()?;
    if let Some(path) = out.or(spec.output.as_deref()) {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        spec.write_csv(&rows, std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(rows)
}
