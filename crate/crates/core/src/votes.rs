//! Vote events and the CSV vote log format.
//!
//! The log is `seq,timestamp_iso8601,session_id,analyst_id,firm_a,firm_b,winner`
//! with a header row. Lines starting with `#` are treated as comments.

use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firm::FirmId;

/// One analyst choice between two firms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteEvent {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub session_id: String,
    pub analyst_id: String,
    pub firm_a: FirmId,
    pub firm_b: FirmId,
    pub winner: FirmId,
}

impl VoteEvent {
    /// Checks `winner ∈ {firm_a, firm_b}` and `firm_a ≠ firm_b`.
    pub fn validate(&self) -> Result<()> {
        if self.firm_a == self.firm_b {
            return Err(Error::Contract(format!(
                "vote {}: firm_a and firm_b are both {}",
                self.seq, self.firm_a
            )));
        }
        if self.winner != self.firm_a && self.winner != self.firm_b {
            return Err(Error::Contract(format!(
                "vote {}: winner {} is not in pair ({}, {})",
                self.seq, self.winner, self.firm_a, self.firm_b
            )));
        }
        Ok(())
    }

    pub fn loser(&self) -> &FirmId {
        if self.winner == self.firm_a {
            &self.firm_b
        } else {
            &self.firm_a
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct VoteRecord {
    seq: u64,
    timestamp_iso8601: String,
    session_id: String,
    analyst_id: String,
    firm_a: String,
    firm_b: String,
    winner: String,
}

impl From<&VoteEvent> for VoteRecord {
    fn from(e: &VoteEvent) -> Self {
        VoteRecord {
            seq: e.seq,
            timestamp_iso8601: format_timestamp(&e.timestamp),
            session_id: e.session_id.clone(),
            analyst_id: e.analyst_id.clone(),
            firm_a: e.firm_a.0.clone(),
            firm_b: e.firm_b.0.clone(),
            winner: e.winner.0.clone(),
        }
    }
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Parse(format!("bad timestamp {s:?}: {e}")))
}

/// Reads a vote log. Each event is validated; ordering is checked at replay.
pub fn read_votes<R: Read>(reader: R) -> Result<Vec<VoteEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<VoteRecord>() {
        let rec = rec?;
        let event = VoteEvent {
            seq: rec.seq,
            timestamp: parse_timestamp(&rec.timestamp_iso8601)?,
            session_id: rec.session_id,
            analyst_id: rec.analyst_id,
            firm_a: FirmId(rec.firm_a),
            firm_b: FirmId(rec.firm_b),
            winner: FirmId(rec.winner),
        };
        event.validate()?;
        out.push(event);
    }
    Ok(out)
}

pub fn write_votes<W: Write>(writer: W, events: &[VoteEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for e in events {
        wtr.serialize(VoteRecord::from(e))?;
    }
    if events.is_empty() {
        wtr.write_record([
            "seq",
            "timestamp_iso8601",
            "session_id",
            "analyst_id",
            "firm_a",
            "firm_b",
            "winner",
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Formats a single event as one CSV data line (no header), newline terminated.
pub fn vote_csv_line(event: &VoteEvent) -> Result<String> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    wtr.serialize(VoteRecord::from(event))?;
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub const VOTE_LOG_HEADER: &str = "seq,timestamp_iso8601,session_id,analyst_id,firm_a,firm_b,winner";
