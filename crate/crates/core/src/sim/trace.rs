use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

/// Destination of the event trace. Lines are
/// `time \t node \t event-kind \t name \t detail`.
pub enum TraceSink {
    Off,
    /// Keeps only a running SHA-256 of the lines.
    Hash(Sha256),
    Memory(Vec<String>),
    File(BufWriter<File>),
}

impl TraceSink {
    pub fn hash() -> Self {
        TraceSink::Hash(Sha256::new())
    }

    pub fn file(path: &Path) -> std::io::Result<Self> {
        Ok(TraceSink::File(BufWriter::new(File::create(path)?)))
    }

    pub fn enabled(&self) -> bool {
        !matches!(self, TraceSink::Off)
    }

    pub fn record(&mut self, time: f64, node: usize, kind: &str, name: &dyn std::fmt::Display, detail: &str) {
        if !self.enabled() {
            return;
        }
        let mut line = String::with_capacity(64);
        let _ = write!(line, "{time:.6}\t{node}\t{kind}\t{name}\t{detail}");
        match self {
            TraceSink::Off => {}
            TraceSink::Hash(h) => {
                h.update(line.as_bytes());
                h.update(b"\n");
            }
            TraceSink::Memory(v) => v.push(line),
            TraceSink::File(f) => {
                // a failing trace file must not abort the run; the digest
                // and metrics still come out
                let _ = writeln!(f, "{line}");
            }
        }
    }

    /// Hex digest for `Hash` sinks, flushing `File` sinks.
    pub fn finish(&mut self) -> Option<String> {
        match self {
            TraceSink::Hash(h) => Some(hex_string(&h.clone().finalize())),
            TraceSink::File(f) => {
                let _ = f.flush();
                None
            }
            _ => None,
        }
    }

    pub fn lines(&self) -> Option<&[String]> {
        match self {
            TraceSink::Memory(v) => Some(v),
            _ => None,
        }
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
