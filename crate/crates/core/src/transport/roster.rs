use std::collections::HashSet;
use std::path::Path;

use super::TransportError;

/// Rank-ordered `host:port` table.
///
/// The file form has one `rank host port` line per process; blank lines and
/// lines starting with `#` are ignored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Roster {
    addrs: Vec<String>,
}

impl Roster {
    pub fn new(addrs: Vec<String>) -> Result<Self, TransportError> {
        if addrs.is_empty() {
            return Err(TransportError::Roster("roster is empty".into()));
        }
        let mut seen = HashSet::new();
        for (rank, a) in addrs.iter().enumerate() {
            if !seen.insert(a.as_str()) {
                return Err(TransportError::Roster(format!(
                    "rank {rank} reuses address {a}"
                )));
            }
        }
        Ok(Self { addrs })
    }

    pub fn parse(text: &str) -> Result<Self, TransportError> {
        let mut entries: Vec<(usize, String)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |why: &str| {
                TransportError::Roster(format!("line {}: {why}: `{line}`", lineno + 1))
            };
            if fields.len() != 3 {
                return Err(bad("expected `rank host port`"));
            }
            let rank: usize = fields[0].parse().map_err(|_| bad("bad rank"))?;
            let port: u16 = fields[2].parse().map_err(|_| bad("bad port"))?;
            let host = fields[1];
            let addr = if host.contains(':') {
                format!("[{host}]:{port}")
            } else {
                format!("{host}:{port}")
            };
            entries.push((rank, addr));
        }
        entries.sort_by_key(|(r, _)| *r);
        for (i, (r, _)) in entries.iter().enumerate() {
            if *r != i {
                return Err(TransportError::Roster(format!(
                    "ranks must be exactly 0..{}; rank {i} missing or duplicated",
                    entries.len()
                )));
            }
        }
        Self::new(entries.into_iter().map(|(_, a)| a).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TransportError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TransportError::Roster(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.addrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addrs.is_empty()
    }

    pub fn addr(&self, rank: usize) -> &str {
        &self.addrs[rank]
    }

    pub(crate) fn check_rank(&self, rank: usize) -> Result<(), TransportError> {
        if rank < self.addrs.len() {
            Ok(())
        } else {
            Err(TransportError::Roster(format!(
                "rank {rank} not in roster of {} entries",
                self.addrs.len()
            )))
        }
    }

    /// Renders the file form.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (rank, a) in self.addrs.iter().enumerate() {
            let (host, port) = a.rsplit_once(':').unwrap_or((a.as_str(), "0"));
            let host = host.trim_start_matches('[').trim_end_matches(']');
            out.push_str(&format!("{rank} {host} {port}\n"));
        }
        out
    }
}
