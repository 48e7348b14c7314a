use std::io::Write;
use std::path::Path;

use softpulse::PulseError;

/// Command failure mapped onto the exit-status contract.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable input, parse errors: exit 1.
    Usage(String),
    /// Certification or classification failed: exit 2.
    Check(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Check(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Check(m) => m,
        }
    }
}

impl From<PulseError> for Failure {
    fn from(e: PulseError) -> Self {
        match e {
            PulseError::Ambiguous { .. } | PulseError::NoConvergence { .. } | PulseError::Numerical(_) => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial artifact.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Usage(format!("cannot write {}: {e}", path.display()));
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(text.as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_atomic(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}
