use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Block, Chain, LedgerError};

/// One compact JSON object per block, each line terminated by `\n`.
pub fn to_jsonl(chain: &Chain) -> String {
    let mut out = String::new();
    for b in &chain.blocks {
        out.push_str(&serde_json::to_string(b).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

/// Writes to a temporary file in the target directory, then renames it over
/// `path`.
pub fn save_chain(chain: &Chain, path: &Path) -> Result<(), LedgerError> {
    let io = |source| LedgerError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(to_jsonl(chain).as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Parses a chain file. Lines must be in canonical form (exactly what
/// [`save_chain`] writes), so any edit that survives JSON parsing still
/// changes the decoded block.
pub fn parse_chain(text: &str) -> Result<Chain, LedgerError> {
    let mut blocks = Vec::new();
    if text.is_empty() {
        return Ok(Chain { blocks });
    }
    let lines: Vec<&str> = text.split('\n').collect();
    let (last, complete) = lines.split_last().expect("split yields at least one item");
    for (i, line) in complete.iter().enumerate() {
        let fail = |message: String| LedgerError::ParseFailure { line: i + 1, message };
        let block: Block = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
        if serde_json::to_string(&block).expect("plain data serializes") != *line {
            return Err(fail("block is not in canonical form".into()));
        }
        blocks.push(block);
    }
    if !last.is_empty() {
        return Err(LedgerError::ParseFailure {
            line: lines.len(),
            message: "truncated line (missing newline)".into(),
        });
    }
    Ok(Chain { blocks })
}

pub fn load_chain(path: &Path) -> Result<Chain, LedgerError> {
    let bytes = fs::read(path).map_err(|source| LedgerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        LedgerError::ParseFailure {
            line,
            message: "invalid utf-8".into(),
        }
    })?;
    parse_chain(&text)
}
