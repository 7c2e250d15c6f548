//! Durable service state: an append-only vote log plus two JSONL
//! document files for analysts and sessions.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, NaiveDate, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use iai_core::elo::{check_log_order, replay_with, snapshot_ranking, ReplayOptions};
use iai_core::votes::{read_votes, vote_csv_line, VOTE_LOG_HEADER};
use iai_core::{EloConfig, Firm, FirmId, FirmUniverse, RankedFirm, RatingState, VoteEvent};

use crate::error::{Result, ServiceError};
use crate::model::{Analyst, Pair, Session, SessionView, PAIRS_PER_SESSION};
use crate::pairing::{draw_pairs, PairingPolicy};

pub const VOTES_FILE: &str = "votes.csv";
pub const ANALYSTS_FILE: &str = "analysts.jsonl";
pub const SESSIONS_FILE: &str = "sessions.jsonl";

#[derive(Debug, Clone, Default)]
pub struct StoreOptions {
    pub pairing: PairingPolicy,
    /// Seeds pair scheduling; entropy when absent.
    pub seed: Option<u64>,
    /// Date used to decide which firms are active; today when absent.
    pub as_of: Option<NaiveDate>,
    /// Config for the live ratings used by proximity pairing.
    pub elo: EloConfig,
}

/// What the client should show next.
#[derive(Debug, Clone, PartialEq)]
pub enum NextPair {
    Pair {
        pair_index: usize,
        firm_a: Firm,
        firm_b: Firm,
    },
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteReceipt {
    pub event: VoteEvent,
    /// True when this was a repeat of an already recorded vote.
    pub replayed: bool,
}

struct SessionState {
    session: Session,
    /// Seq of the vote recorded at each answered pair index.
    seqs: Vec<u64>,
}

struct Inner {
    votes: AppendFile,
    analysts_file: AppendFile,
    sessions_file: AppendFile,
    log: Arc<Vec<VoteEvent>>,
    analysts: HashMap<String, Analyst>,
    sessions: HashMap<String, SessionState>,
    seen: HashMap<String, HashSet<(FirmId, FirmId)>>,
    live: RatingState,
    rng: ChaCha8Rng,
}

/// Single-writer store. Every mutation holds the lock from validation
/// through fsync, so seq assignment is serialized and gapless.
pub struct Store {
    dir: PathBuf,
    universe: Arc<FirmUniverse>,
    options: StoreOptions,
    inner: Mutex<Inner>,
}

impl Store {
    /// Opens or creates the data directory and rebuilds state from disk.
    pub fn open(dir: impl AsRef<Path>, universe: FirmUniverse, options: StoreOptions) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        options.elo.validate()?;

        let mut votes = AppendFile::open(&dir.join(VOTES_FILE), Some(VOTE_LOG_HEADER))?;
        let log = read_votes(votes.read_all()?.as_bytes())?;
        check_log_order(&log)?;

        let mut analysts_file = AppendFile::open(&dir.join(ANALYSTS_FILE), None)?;
        let analysts: HashMap<String, Analyst> = read_jsonl::<Analyst>(&analysts_file.read_all()?)?
            .into_iter()
            .map(|a| (a.analyst_id.clone(), a))
            .collect();

        let mut sessions_file = AppendFile::open(&dir.join(SESSIONS_FILE), None)?;
        let mut sessions = HashMap::new();
        let mut seen: HashMap<String, HashSet<(FirmId, FirmId)>> = HashMap::new();
        for session in read_jsonl::<Session>(&sessions_file.read_all()?)? {
            session.validate().map_err(ServiceError::Contract)?;
            if !analysts.contains_key(&session.analyst_id) {
                return Err(ServiceError::Contract(format!(
                    "session {} names unknown analyst {}",
                    session.session_id, session.analyst_id
                )));
            }
            seen.entry(session.analyst_id.clone())
                .or_default()
                .extend(session.pairs.iter().map(Pair::unordered));
            sessions.insert(
                session.session_id.clone(),
                SessionState {
                    session,
                    seqs: Vec::new(),
                },
            );
        }

        for event in &log {
            let state = sessions.get_mut(&event.session_id).ok_or_else(|| {
                ServiceError::Contract(format!("vote {} names unknown session {}", event.seq, event.session_id))
            })?;
            let i = state.seqs.len();
            let consistent = state.session.pairs.get(i).is_some_and(|p| {
                p.firm_a == event.firm_a && p.firm_b == event.firm_b && event.analyst_id == state.session.analyst_id
            });
            if !consistent {
                return Err(ServiceError::Contract(format!(
                    "vote {} does not match pair {i} of session {}",
                    event.seq, event.session_id
                )));
            }
            state.seqs.push(event.seq);
        }

        let live = replay_with(
            &log,
            &options.elo,
            ReplayOptions {
                seed: Some(RatingState::seeded(&universe, options.elo.initial_rating)),
                ..Default::default()
            },
        )?;
        let rng = match options.seed {
            // Offset by history so a restarted service does not redraw old sessions.
            Some(seed) => ChaCha8Rng::seed_from_u64(seed.wrapping_add(sessions.len() as u64)),
            None => ChaCha8Rng::from_os_rng(),
        };
        log::info!(
            "opened store {}: {} votes, {} analysts, {} sessions",
            dir.display(),
            log.len(),
            analysts.len(),
            sessions.len()
        );

        Ok(Store {
            dir,
            universe: Arc::new(universe),
            options,
            inner: Mutex::new(Inner {
                votes,
                analysts_file,
                sessions_file,
                log: Arc::new(log),
                analysts,
                sessions,
                seen,
                live,
                rng,
            }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn universe(&self) -> &FirmUniverse {
        &self.universe
    }

    pub fn options(&self) -> &StoreOptions {
        &self.options
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // A panic mid-write leaves nothing half applied in memory.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn register_analyst(&self, certified: bool, state: &str) -> Result<Analyst> {
        let mut inner = self.lock();
        let analyst = Analyst {
            analyst_id: uuid::Uuid::new_v4().to_string(),
            certified,
            state_of_residence: state.to_owned(),
            created_at: Utc::now(),
        };
        inner.analysts_file.append(&json_line(&analyst)?)?;
        inner.analysts.insert(analyst.analyst_id.clone(), analyst.clone());
        Ok(analyst)
    }

    pub fn analyst(&self, analyst_id: &str) -> Option<Analyst> {
        self.lock().analysts.get(analyst_id).cloned()
    }

    pub fn analysts(&self) -> Vec<Analyst> {
        let mut all: Vec<Analyst> = self.lock().analysts.values().cloned().collect();
        all.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.analyst_id.cmp(&b.analyst_id))
        });
        all
    }

    fn active_firms(&self) -> Vec<FirmId> {
        let today = self.options.as_of.unwrap_or_else(|| Utc::now().date_naive());
        self.universe
            .active_on(today)
            .into_iter()
            .map(|f| f.id.clone())
            .collect()
    }

    pub fn create_session(&self, analyst_id: &str) -> Result<Session> {
        let active = self.active_firms();
        let mut inner = self.lock();
        if !inner.analysts.contains_key(analyst_id) {
            return Err(ServiceError::NotFound(format!("analyst {analyst_id}")));
        }
        let Inner { seen, live, rng, .. } = &mut *inner;
        let empty = HashSet::new();
        let history = seen.get(analyst_id).unwrap_or(&empty);
        let pairs = draw_pairs(&active, history, self.options.pairing, live, rng)?;
        let session = Session {
            session_id: uuid::Uuid::new_v4().to_string(),
            analyst_id: analyst_id.to_owned(),
            pairs,
            created_at: Utc::now(),
        };
        session.validate().map_err(ServiceError::Contract)?;
        inner.sessions_file.append(&json_line(&session)?)?;
        inner
            .seen
            .entry(analyst_id.to_owned())
            .or_default()
            .extend(session.pairs.iter().map(Pair::unordered));
        inner.sessions.insert(
            session.session_id.clone(),
            SessionState {
                session: session.clone(),
                seqs: Vec::new(),
            },
        );
        Ok(session)
    }

    pub fn session(&self, session_id: &str) -> Result<SessionView> {
        let inner = self.lock();
        let state = inner
            .sessions
            .get(session_id)
            .ok_or_else(|| ServiceError::NotFound(format!("session {session_id}")))?;
        Ok(SessionView {
            session: state.session.clone(),
            next_index: state.seqs.len(),
        })
    }

    /// Sessions of one analyst, oldest first.
    pub fn sessions_of(&self, analyst_id: &str) -> Vec<SessionView> {
        let inner = self.lock();
        let mut out: Vec<SessionView> = inner
            .sessions
            .values()
            .filter(|s| s.session.analyst_id == analyst_id)
            .map(|s| SessionView {
                session: s.session.clone(),
                next_index: s.seqs.len(),
            })
            .collect();
        out.sort_by_key(|s| s.session.created_at);
        out
    }

    pub fn next_pair(&self, session_id: &str) -> Result<NextPair> {
        let view = self.session(session_id)?;
        if view.next_index >= PAIRS_PER_SESSION {
            return Ok(NextPair::Complete);
        }
        let pair = &view.session.pairs[view.next_index];
        let firm = |id: &FirmId| {
            self.universe
                .get(id)
                .cloned()
                .ok_or_else(|| ServiceError::Contract(format!("session {session_id} names unknown firm {id}")))
        };
        Ok(NextPair::Pair {
            pair_index: view.next_index,
            firm_a: firm(&pair.firm_a)?,
            firm_b: firm(&pair.firm_b)?,
        })
    }

    /// Appends a vote and fsyncs before returning.
    pub fn submit_vote(&self, session_id: &str, pair_index: usize, winner: &FirmId) -> Result<VoteReceipt> {
        if pair_index >= PAIRS_PER_SESSION {
            return Err(ServiceError::Contract(format!(
                "pair_index {pair_index} outside 0..{}",
                PAIRS_PER_SESSION - 1
            )));
        }
        let mut inner = self.lock();
        let state = inner
            .sessions
            .get(session_id)
            .ok_or_else(|| ServiceError::NotFound(format!("session {session_id}")))?;
        let next_index = state.seqs.len();

        if pair_index < next_index {
            let seq = state.seqs[pair_index];
            let original = &inner.log[(seq - 1) as usize];
            if &original.winner == winner {
                return Ok(VoteReceipt {
                    event: original.clone(),
                    replayed: true,
                });
            }
            return Err(ServiceError::Ordering {
                session_id: session_id.to_owned(),
                expected: next_index,
                got: pair_index,
            });
        }
        if pair_index > next_index {
            return Err(ServiceError::Ordering {
                session_id: session_id.to_owned(),
                expected: next_index,
                got: pair_index,
            });
        }
        let pair = &state.session.pairs[pair_index];
        if !pair.contains(winner) {
            return Err(ServiceError::Contract(format!(
                "winner {winner} is not in pair {}/{}",
                pair.firm_a, pair.firm_b
            )));
        }

        // Server clock, clamped so the log never runs backwards.
        let now = Utc::now();
        let timestamp = match inner.log.last() {
            Some(last) if last.timestamp > now => last.timestamp,
            _ => now,
        };
        let event = VoteEvent {
            seq: inner.log.len() as u64 + 1,
            timestamp,
            session_id: session_id.to_owned(),
            analyst_id: state.session.analyst_id.clone(),
            firm_a: pair.firm_a.clone(),
            firm_b: pair.firm_b.clone(),
            winner: winner.clone(),
        };
        event.validate()?;

        let line = vote_csv_line(&event)?;
        inner.votes.append(&line)?;

        let Inner {
            log, sessions, live, ..
        } = &mut *inner;
        Arc::make_mut(log).push(event.clone());
        sessions
            .get_mut(session_id)
            .expect("checked above")
            .seqs
            .push(event.seq);
        if let Err(e) = live.apply(&event, &self.options.elo) {
            log::warn!("live ratings out of step: {e}");
        }
        Ok(VoteReceipt { event, replayed: false })
    }

    /// Immutable snapshot of the log.
    pub fn votes(&self) -> Arc<Vec<VoteEvent>> {
        Arc::clone(&self.lock().log)
    }

    /// Replays the durable log; never mutates state.
    pub fn ratings(
        &self,
        config: &EloConfig,
        cutoff: Option<DateTime<Utc>>,
        certified_only: bool,
    ) -> Result<Vec<RankedFirm>> {
        let log = self.votes();
        let certified: HashSet<String> = if certified_only {
            self.lock()
                .analysts
                .values()
                .filter(|a| a.certified)
                .map(|a| a.analyst_id.clone())
                .collect()
        } else {
            HashSet::new()
        };
        let keep = |e: &VoteEvent| certified.contains(&e.analyst_id);
        let state = replay_with(
            &log,
            config,
            ReplayOptions {
                cutoff,
                seed: Some(RatingState::seeded(&self.universe, config.initial_rating)),
                filter: if certified_only { Some(&keep) } else { None },
            },
        )?;
        Ok(snapshot_ranking(&state))
    }
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value).map_err(iai_core::Error::from)?;
    s.push('\n');
    Ok(s)
}

fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ServiceError::Contract(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Append-only text file of newline-terminated records.
struct AppendFile {
    file: File,
    len: u64,
}

impl AppendFile {
    /// Opens for append, creating with `header` if new. A torn final
    /// record (no newline) was never acknowledged and is cut off.
    fn open(path: &Path, header: Option<&str>) -> std::io::Result<Self> {
        let existed = path.exists();
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        if keep < bytes.len() {
            log::warn!(
                "{}: dropping {} bytes of torn record",
                path.display(),
                bytes.len() - keep
            );
            file.set_len(keep as u64)?;
            file.sync_data()?;
        }
        let mut this = AppendFile { file, len: keep as u64 };
        if keep == 0 {
            if let Some(h) = header {
                this.append(&format!("{h}\n"))?;
            }
        }
        if !existed {
            if let Some(parent) = path.parent() {
                // Make the new directory entry durable as well.
                File::open(parent)?.sync_all()?;
            }
        }
        Ok(this)
    }

    fn read_all(&mut self) -> std::io::Result<String> {
        self.file.seek(SeekFrom::Start(0))?;
        let mut text = String::new();
        BufReader::new(&self.file).take(self.len).read_to_string(&mut text)?;
        Ok(text)
    }

    fn append(&mut self, record: &str) -> std::io::Result<()> {
        debug_assert!(record.ends_with('\n'));
        let result = (|| {
            self.file.seek(SeekFrom::Start(self.len))?;
            self.file.write_all(record.as_bytes())?;
            self.file.sync_data()
        })();
        match result {
            Ok(()) => {
                self.len += record.len() as u64;
                Ok(())
            }
            Err(e) => {
                // Roll back whatever part of the record reached the file.
                let _ = self.file.set_len(self.len);
                Err(e)
            }
        }
    }
}
