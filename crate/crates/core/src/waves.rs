//! Named rating waves: dated cutoffs over the accumulating vote log.

use std::io::Read;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::votes::parse_timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveCut {
    pub name: String,
    pub cutoff: DateTime<Utc>,
}

/// Accepts RFC 3339 instants or bare `YYYY-MM-DD` dates, the latter meaning
/// the end of that day in UTC.
pub fn parse_cutoff(s: &str) -> Result<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        let end = date.and_hms_nano_opt(23, 59, 59, 999_999_999).expect("valid time");
        return Ok(end.and_utc());
    }
    parse_timestamp(s)
}

/// Cutoffs must be strictly increasing.
pub fn validate_waves(waves: &[WaveCut]) -> Result<()> {
    for w in waves.windows(2) {
        if w[1].cutoff <= w[0].cutoff {
            return Err(Error::Contract(format!(
                "wave {} cutoff is not after wave {}",
                w[1].name, w[0].name
            )));
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct WaveRecord {
    name: String,
    cutoff: String,
}

/// Reads `name,cutoff`.
pub fn read_waves<R: Read>(reader: R) -> Result<Vec<WaveCut>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut waves = Vec::new();
    for rec in rdr.deserialize::<WaveRecord>() {
        let rec = rec?;
        waves.push(WaveCut {
            cutoff: parse_cutoff(&rec.cutoff)?,
            name: rec.name,
        });
    }
    validate_waves(&waves)?;
    Ok(waves)
}
