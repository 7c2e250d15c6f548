//! Firm universe: the index constituents that can be paired in a survey.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque stable firm identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FirmId(pub String);

impl FirmId {
    pub fn new(id: impl Into<String>) -> Self {
        FirmId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for FirmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FirmId {
    fn from(s: &str) -> Self {
        FirmId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Firm {
    pub id: FirmId,
    pub ticker: String,
    pub name: String,
    /// Index membership window, inclusive on both ends.
    pub active_from: Option<NaiveDate>,
    pub active_to: Option<NaiveDate>,
}

impl Firm {
    pub fn new(id: impl Into<String>, ticker: impl Into<String>, name: impl Into<String>) -> Self {
        Firm {
            id: FirmId(id.into()),
            ticker: ticker.into(),
            name: name.into(),
            active_from: None,
            active_to: None,
        }
    }

    /// Whether the firm belongs to the index on `date`.
    pub fn is_active_on(&self, date: NaiveDate) -> bool {
        self.active_from.is_none_or(|from| from <= date) && self.active_to.is_none_or(|to| date <= to)
    }
}

#[derive(Debug, Deserialize)]
struct FirmRecord {
    firm_id: String,
    ticker: String,
    name: String,
    #[serde(default)]
    active_from: Option<String>,
    #[serde(default)]
    active_to: Option<String>,
}

fn parse_optional_date(raw: Option<String>, field: &str, firm: &str) -> Result<Option<NaiveDate>> {
    match raw.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(Some)
            .map_err(|e| Error::Parse(format!("firm {firm}: bad {field} {s:?}: {e}"))),
    }
}

/// The declared set of firms, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct FirmUniverse {
    firms: BTreeMap<FirmId, Firm>,
}

impl FirmUniverse {
    pub fn new(firms: impl IntoIterator<Item = Firm>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for firm in firms {
            if let (Some(from), Some(to)) = (firm.active_from, firm.active_to) {
                if from > to {
                    return Err(Error::Contract(format!(
                        "firm {}: active_from {from} after active_to {to}",
                        firm.id
                    )));
                }
            }
            let id = firm.id.clone();
            if map.insert(id.clone(), firm).is_some() {
                return Err(Error::Contract(format!("duplicate firm id {id}")));
            }
        }
        Ok(FirmUniverse { firms: map })
    }

    /// Reads `firm_id,ticker,name,active_from,active_to`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut firms = Vec::new();
        for rec in rdr.deserialize::<FirmRecord>() {
            let rec = rec?;
            let active_from = parse_optional_date(rec.active_from, "active_from", &rec.firm_id)?;
            let active_to = parse_optional_date(rec.active_to, "active_to", &rec.firm_id)?;
            firms.push(Firm {
                id: FirmId(rec.firm_id),
                ticker: rec.ticker,
                name: rec.name,
                active_from,
                active_to,
            });
        }
        Self::new(firms)
    }

    pub fn get(&self, id: &FirmId) -> Option<&Firm> {
        self.firms.get(id)
    }

    pub fn contains(&self, id: &FirmId) -> bool {
        self.firms.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.firms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.firms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Firm> {
        self.firms.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &FirmId> {
        self.firms.keys()
    }

    /// Firms eligible for pairing on `date`, in id order.
    pub fn active_on(&self, date: NaiveDate) -> Vec<&Firm> {
        self.firms.values().filter(|f| f.is_active_on(date)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_universe_with_optional_windows() {
        let csv = "firm_id,ticker,name,active_from,active_to\n\
                   F1,AAA3,Alpha SA,,\n\
                   F2,BBB4,Beta SA,2016-01-01,2017-06-30\n";
        let u = FirmUniverse::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(u.len(), 2);
        let beta = u.get(&"F2".into()).unwrap();
        assert!(beta.is_active_on(NaiveDate::from_ymd_opt(2016, 10, 6).unwrap()));
        assert!(!beta.is_active_on(NaiveDate::from_ymd_opt(2017, 7, 1).unwrap()));
        assert_eq!(u.active_on(NaiveDate::from_ymd_opt(2018, 1, 1).unwrap()).len(), 1);
    }

    #[test]
    fn rejects_duplicate_ids_and_inverted_windows() {
        let dup = "firm_id,ticker,name,active_from,active_to\nF1,A,A,,\nF1,B,B,,\n";
        assert!(matches!(
            FirmUniverse::from_csv(dup.as_bytes()),
            Err(Error::Contract(_))
        ));
        let inverted = "firm_id,ticker,name,active_from,active_to\nF1,A,A,2017-01-01,2016-01-01\n";
        assert!(matches!(
            FirmUniverse::from_csv(inverted.as_bytes()),
            Err(Error::Contract(_))
        ));
    }
}
