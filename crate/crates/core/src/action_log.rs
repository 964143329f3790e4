//! Action-log ingestion and indexing.
//!
//! The action log is a set of `(user, message, time)` records. Records are
//! grouped per message into cascades, deduplicated to each user's earliest
//! action, and indexed with the viral threshold `theta` and key-user
//! fraction `phi`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "user,message,time";

/// One post/retweet action: user acted on message at the given time
/// (integer seconds since epoch).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRecord {
    pub user: String,
    pub message: String,
    pub time: i64,
}

/// Result of loading an action-log CSV: valid records plus the count of
/// malformed rows that were skipped.
#[derive(Debug)]
pub struct LoadReport {
    pub records: Vec<ActionRecord>,
    pub skipped: usize,
}

/// Parse an action-log CSV stream (header `user,message,time`).
///
/// Malformed rows (wrong field count, empty user/message, non-integer or
/// negative time) are skipped and counted; a wrong header is an error.
pub fn load_action_log<R: Read>(source: R) -> Result<LoadReport> {
    let mut lines = BufReader::new(source).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Header {
                expected: CSV_HEADER.to_string(),
                found: String::new(),
            })
        }
    };
    if header.trim_end_matches('\r') != CSV_HEADER {
        return Err(Error::Header {
            expected: CSV_HEADER.to_string(),
            found: header,
        });
    }

    let mut records = Vec::new();
    let mut skipped = 0usize;
    for line in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        match parse_row(line) {
            Some(rec) => records.push(rec),
            None => skipped += 1,
        }
    }
    Ok(LoadReport { records, skipped })
}

fn parse_row(line: &str) -> Option<ActionRecord> {
    let mut parts = line.split(',');
    let user = parts.next()?;
    let message = parts.next()?;
    let time = parts.next()?;
    if parts.next().is_some() || user.is_empty() || message.is_empty() {
        return None;
    }
    let time: i64 = time.parse().ok()?;
    if time < 0 {
        return None;
    }
    Some(ActionRecord {
        user: user.to_string(),
        message: message.to_string(),
        time,
    })
}

/// All actions on one message, time-ordered, one entry per distinct user
/// (each user kept at their earliest action time). Ties in time are ordered
/// by ascending user id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cascade {
    pub message: String,
    pub actions: Vec<(String, i64)>,
}

impl Cascade {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action_time(&self, user: &str) -> Option<i64> {
        self.actions
            .iter()
            .find(|(u, _)| u == user)
            .map(|&(_, t)| t)
    }
}

/// Immutable index over the action log: cascades keyed by message, the
/// viral threshold, the key-user fraction, and the set of viral messages.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    cascades: BTreeMap<String, Cascade>,
    theta: usize,
    phi: f64,
    viral: BTreeSet<String>,
}

impl CorpusIndex {
    /// Group records into cascades, deduplicate each user to their earliest
    /// action, and mark messages with at least `theta` distinct participants
    /// as viral.
    pub fn build(records: &[ActionRecord], theta: usize, phi: f64) -> Result<Self> {
        if theta < 1 {
            return Err(Error::InvalidArgument("theta must be >= 1".into()));
        }
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::InvalidArgument("phi must lie in (0,1)".into()));
        }
        let mut earliest: BTreeMap<&str, BTreeMap<&str, i64>> = BTreeMap::new();
        for rec in records {
            let per_msg = earliest.entry(rec.message.as_str()).or_default();
            per_msg
                .entry(rec.user.as_str())
                .and_modify(|t| *t = (*t).min(rec.time))
                .or_insert(rec.time);
        }
        let mut cascades = BTreeMap::new();
        let mut viral = BTreeSet::new();
        for (message, users) in earliest {
            let mut actions: Vec<(String, i64)> = users
                .into_iter()
                .map(|(u, t)| (u.to_string(), t))
                .collect();
            actions.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            if actions.len() >= theta {
                viral.insert(message.to_string());
            }
            cascades.insert(
                message.to_string(),
                Cascade {
                    message: message.to_string(),
                    actions,
                },
            );
        }
        Ok(CorpusIndex {
            cascades,
            theta,
            phi,
            viral,
        })
    }

    pub fn cascades(&self) -> &BTreeMap<String, Cascade> {
        &self.cascades
    }

    pub fn cascade(&self, message: &str) -> Option<&Cascade> {
        self.cascades.get(message)
    }

    pub fn theta(&self) -> usize {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn viral_set(&self) -> &BTreeSet<String> {
        &self.viral
    }

    pub fn is_viral(&self, message: &str) -> bool {
        self.viral.contains(message)
    }

    /// All distinct users in the corpus, ascending by id.
    pub fn users(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for c in self.cascades.values() {
            for (u, _) in &c.actions {
                out.insert(u.clone());
            }
        }
        out
    }

    /// A user is a key user of `m` when the count of participants acting
    /// strictly after them is at least `phi * |A_m|`. Non-participants and
    /// unknown messages yield false.
    pub fn is_key_user(&self, user: &str, message: &str) -> bool {
        let Some(cascade) = self.cascades.get(message) else {
            return false;
        };
        let Some(t) = cascade.action_time(user) else {
            return false;
        };
        let n = cascade.len();
        let after = cascade.actions.iter().filter(|&&(_, tj)| tj > t).count();
        after as f64 >= self.phi * n as f64
    }
}
