//! Judgment persistence and HIT leasing.
//!
//! Judgments live in an append-only JSONL log; every other view (progress,
//! aggregation, reports) is a fold over it. A crash can at worst leave a torn
//! final line, which is skipped on reopen.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::Judgment;
use crate::error::{Error, Result};
use crate::io;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        ManualClock(Mutex::new(start))
    }

    pub fn advance(&self, by: Duration) {
        *self.0.lock().expect("clock lock") += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().expect("clock lock")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Appended {
    Accepted,
    Duplicate,
}

/// Append-only judgment log with at most one judgment per
/// `(triplet_id, annotator_id)`.
pub struct JudgmentLog {
    path: PathBuf,
    file: File,
    judgments: Vec<Judgment>,
    seen: HashSet<(String, String)>,
}

impl JudgmentLog {
    /// Opens (or creates) the log and replays it. A malformed final line
    /// without a trailing newline is a torn write and is dropped; malformed
    /// lines elsewhere are errors.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut judgments = Vec::new();
        let mut seen = HashSet::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(io::open(path)?);
            let mut line = String::new();
            let mut n = 0;
            loop {
                line.clear();
                let read = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
                if read == 0 {
                    break;
                }
                n += 1;
                let complete = line.ends_with('\n');
                if line.trim().is_empty() {
                    valid_len += read as u64;
                    continue;
                }
                match serde_json::from_str::<Judgment>(line.trim()) {
                    Ok(j) => {
                        if seen.insert((j.triplet_id.clone(), j.annotator_id.clone())) {
                            judgments.push(j);
                        }
                        valid_len += read as u64;
                    }
                    Err(_) if !complete => break,
                    Err(e) => return Err(Error::format(path, n, e.to_string())),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.set_len(valid_len).map_err(|e| Error::io(path, e))?;
        let mut log = JudgmentLog {
            path: path.to_path_buf(),
            file,
            judgments,
            seen,
        };
        // A valid final line may lack its newline.
        if valid_len > 0 && !ends_with_newline(path)? {
            log.file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(log)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and syncs one judgment, unless the pair was already judged.
    pub fn append(&mut self, j: Judgment) -> Result<Appended> {
        let key = (j.triplet_id.clone(), j.annotator_id.clone());
        if self.seen.contains(&key) {
            return Ok(Appended::Duplicate);
        }
        let mut line = serde_json::to_string(&j)?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))?;
        self.seen.insert(key);
        self.judgments.push(j);
        Ok(Appended::Accepted)
    }

    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    pub fn has(&self, triplet_id: &str, annotator_id: &str) -> bool {
        self.seen.contains(&(triplet_id.to_string(), annotator_id.to_string()))
    }
}

fn ends_with_newline(path: &Path) -> Result<bool> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes.last() == Some(&b'\n'))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub annotator_id: String,
    pub expires_at: DateTime<Utc>,
}

/// Outstanding leases per HIT. Each HIT has `slots` annotator slots; a slot
/// is taken by an annotator who has judged any of its items or holds a live
/// lease on it.
#[derive(Debug, Default)]
pub struct LeaseBook {
    leases: HashMap<String, Vec<Lease>>,
}

impl LeaseBook {
    pub fn live(&self, hit_id: &str, now: DateTime<Utc>) -> impl Iterator<Item = &Lease> {
        self.leases
            .get(hit_id)
            .into_iter()
            .flatten()
            .filter(move |l| l.expires_at > now)
    }

    pub fn holds(&self, hit_id: &str, annotator_id: &str, now: DateTime<Utc>) -> bool {
        self.live(hit_id, now).any(|l| l.annotator_id == annotator_id)
    }

    pub fn grant(&mut self, hit_id: &str, annotator_id: &str, expires_at: DateTime<Utc>) {
        let v = self.leases.entry(hit_id.to_string()).or_default();
        v.retain(|l| l.annotator_id != annotator_id);
        v.push(Lease {
            annotator_id: annotator_id.to_string(),
            expires_at,
        });
    }

    pub fn release(&mut self, hit_id: &str, annotator_id: &str) {
        if let Some(v) = self.leases.get_mut(hit_id) {
            v.retain(|l| l.annotator_id != annotator_id);
        }
    }

    /// Drops expired leases.
    pub fn prune(&mut self, now: DateTime<Utc>) {
        for v in self.leases.values_mut() {
            v.retain(|l| l.expires_at > now);
        }
        self.leases.retain(|_, v| !v.is_empty());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotator {
    pub annotator_id: String,
    pub qualified: bool,
}

/// Reads `annotator_id \t qualified` rows (`true`/`false`, `1`/`0`, `yes`/`no`).
pub fn read_annotators(path: &Path) -> Result<BTreeMap<String, Annotator>> {
    let mut out = BTreeMap::new();
    for (i, row) in io::read_tsv(path, 2)?.into_iter().enumerate() {
        let qualified = match row[1].trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => return Err(Error::format(path, i + 1, format!("bad qualified flag {other:?}"))),
        };
        let id = row[0].trim().to_string();
        out.insert(
            id.clone(),
            Annotator {
                annotator_id: id,
                qualified,
            },
        );
    }
    Ok(out)
}
