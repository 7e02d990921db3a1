use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::ServiceError;
use crate::session::GameEvent;

/// Append-only JSON-lines log, one file per session.
#[derive(Clone, Debug)]
pub struct EventLog {
    dir: PathBuf,
}

impl EventLog {
    pub fn open(dir: impl Into<PathBuf>) -> Result<EventLog, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(EventLog { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn append(&self, id: &str, events: &[GameEvent]) -> Result<(), ServiceError> {
        if events.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for e in events {
            buf.push_str(&serde_json::to_string(e)?);
            buf.push('\n');
        }
        let mut f = OpenOptions::new().create(true).append(true).open(self.path(id))?;
        f.write_all(buf.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Every session's events, sorted by id. A torn final line (crash
    /// mid-write) is ignored.
    pub fn load_all(&self) -> Result<Vec<(String, Vec<GameEvent>)>, ServiceError> {
        let mut out = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for p in paths {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let mut events = Vec::new();
            for line in BufReader::new(File::open(&p)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str(&line) {
                    Ok(e) => events.push(e),
                    Err(err) => {
                        log::warn!("{}: skipping unreadable event: {err}", p.display());
                        break;
                    }
                }
            }
            out.push((id, events));
        }
        Ok(out)
    }
}
