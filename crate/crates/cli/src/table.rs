//! CSV tables. Each file starts with a `#` schema line; numbers carry 12
//! significant digits.

use std::io::{Read, Write};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

pub const SWEEP_SCHEMA: &str = "# fa-isac sweep v1";
pub const PATTERN_SCHEMA: &str = "# fa-isac beampattern v1";

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// One solve of a sweep. Metrics are empty when the point failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub parameter: String,
    pub value: f64,
    pub rep: usize,
    pub seed: u64,
    pub sum_rate: Option<f64>,
    pub probing: Option<f64>,
    pub power: Option<f64>,
    pub wall_ms: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub error: String,
}

impl SweepRow {
    pub fn rounded(mut self) -> Self {
        self.value = round12(self.value);
        self.sum_rate = self.sum_rate.map(round12);
        self.probing = self.probing.map(round12);
        self.power = self.power.map(round12);
        self.wall_ms = round12(self.wall_ms);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub angle_deg: f64,
    pub power_w: f64,
}

fn write_table<T: Serialize>(out: impl Write, schema: &str, rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut out = out;
    writeln!(out, "{schema}")?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_table<T: for<'de> Deserialize<'de>>(input: impl Read, schema: &str) -> anyhow::Result<Vec<T>> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let Some((first, body)) = text.split_once('\n') else {
        bail!("empty table");
    };
    if first.trim_end() != schema {
        bail!("schema line `{}` does not match `{schema}`", first.trim_end());
    }
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("row {}", i + 1)))
        .collect()
}

pub fn write_sweep(out: impl Write, rows: &[SweepRow]) -> anyhow::Result<()> {
    write_table(out, SWEEP_SCHEMA, rows.iter().cloned().map(SweepRow::rounded))
}

pub fn read_sweep(input: impl Read) -> anyhow::Result<Vec<SweepRow>> {
    read_table(input, SWEEP_SCHEMA)
}

pub fn write_pattern(out: impl Write, rows: &[PatternRow]) -> anyhow::Result<()> {
    let rounded = rows.iter().map(|r| PatternRow {
        angle_deg: round12(r.angle_deg),
        power_w: round12(r.power_w),
    });
    write_table(out, PATTERN_SCHEMA, rounded)
}

pub fn read_pattern(input: impl Read) -> anyhow::Result<Vec<PatternRow>> {
    read_table(input, PATTERN_SCHEMA)
}
