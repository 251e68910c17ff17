use std::path::Path;

use super::{AuditRow, PtsSignal, SignalMap, SlotState, SLOTS_PER_DAY};
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::provenance::{csv_reader, csv_writer, fmt_f64, fmt_opt, Provenance};

const SIGNAL_HEADER: [&str; 5] = ["patient_id", "channel", "slot", "value", "state"];

/// Long-format dump of preprocessed signals, one row per slot.
pub fn write_signals(signals: &SignalMap, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    w.write_record(SIGNAL_HEADER)?;
    for (id, channels) in signals {
        for (channel, s) in channels {
            for slot in 0..s.len() {
                w.write_record([
                    id.as_str(),
                    channel.as_str(),
                    &slot.to_string(),
                    &fmt_opt(s.values()[slot]),
                    s.mask()[slot].as_str(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_signals(path: &Path) -> Result<SignalMap> {
    let file = path.display().to_string();
    let bad = |line: u64, message: String| Error::Schema {
        file: file.clone(),
        line,
        message,
    };
    let mut r = csv_reader(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SIGNAL_HEADER {
        return Err(bad(1, format!("expected columns {SIGNAL_HEADER:?}")));
    }
    type Slots = (Vec<Option<f64>>, Vec<SlotState>);
    let mut raw: std::collections::BTreeMap<(String, Channel), Slots> = Default::default();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 5 {
            return Err(bad(line, format!("expected 5 fields, found {}", rec.len())));
        }
        let channel: Channel = rec[1].parse().map_err(|_| Error::UnknownChannel {
            file: file.clone(),
            line,
            name: rec[1].to_string(),
        })?;
        let slot: usize = rec[2]
            .parse()
            .ok()
            .filter(|&s| s < SLOTS_PER_DAY)
            .ok_or_else(|| bad(line, format!("bad slot `{}`", &rec[2])))?;
        let value = match &rec[3] {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(line, format!("bad value `{s}`")))?),
        };
        let state = SlotState::parse(&rec[4]).ok_or_else(|| bad(line, format!("bad state `{}`", &rec[4])))?;
        let entry = raw
            .entry((rec[0].to_string(), channel))
            .or_insert_with(|| (vec![None; SLOTS_PER_DAY], vec![SlotState::Missing; SLOTS_PER_DAY]));
        entry.0[slot] = value;
        entry.1[slot] = state;
    }
    let mut out = SignalMap::new();
    for ((id, channel), (values, mask)) in raw {
        let s = PtsSignal::from_parts(channel, values, mask)?;
        out.entry(id).or_default().insert(channel, s);
    }
    Ok(out)
}

pub fn write_audit(rows: &[AuditRow], path: &Path, provenance: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    w.write_record([
        "patient_id",
        "channel",
        "n_rejected",
        "n_chart_imputed",
        "n_interpolated",
        "chart_correlation",
        "gate_passed",
    ])?;
    for row in rows {
        let a = &row.audit;
        w.write_record([
            row.patient_id.as_str(),
            row.channel.as_str(),
            &a.n_rejected.to_string(),
            &a.n_chart_imputed.to_string(),
            &a.n_interpolated.to_string(),
            &a.chart_correlation.map(fmt_f64).unwrap_or_default(),
            if a.gate_passed { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
