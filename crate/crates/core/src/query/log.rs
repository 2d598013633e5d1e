//! `responses.jsonl`: one response object per line, append-only.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::QueryResponse;
use crate::error::{Error, Result};

/// Appends and syncs to disk before returning.
pub fn append_responses(path: impl AsRef<Path>, responses: &[QueryResponse]) -> Result<()> {
    let mut buf = Vec::new();
    for r in responses {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&buf)?;
    f.sync_data()?;
    Ok(())
}

/// Reads every complete line. A final line without a newline is a write that
/// was never acknowledged and is ignored; a missing file reads as empty.
pub fn read_responses(path: impl AsRef<Path>) -> Result<Vec<QueryResponse>> {
    let path = path.as_ref();
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(f);
    let mut out = Vec::new();
    let mut line = String::new();
    let mut lineno = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || !line.ends_with('\n') {
            break;
        }
        lineno += 1;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            reason: format!("line {lineno}: {e}"),
        })?;
        out.push(r);
    }
    Ok(out)
}

/// Truncates an unacknowledged partial last line so later appends start on
/// a fresh line. Returns the number of bytes dropped.
pub fn repair_log(path: impl AsRef<Path>) -> Result<u64> {
    let path = path.as_ref();
    let data = match std::fs::read(path) {
        Ok(d) => d,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(e.into()),
    };
    let keep = data.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let dropped = (data.len() - keep) as u64;
    if dropped > 0 {
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(keep as u64)?;
        f.sync_all()?;
    }
    Ok(dropped)
}
