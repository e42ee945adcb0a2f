use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use vou::grid::fmt17;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Line-oriented `key = value` text with a provenance header.
#[derive(Debug, Clone)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn new(command: &str, config_hash: &str, seed: Option<u64>) -> Self {
        let mut r = Self { text: String::new() };
        r.str("tool", &format!("vou {VERSION}"));
        r.str("command", command);
        r.str("config_hash", config_hash);
        match seed {
            Some(s) => r.str("seed", &s.to_string()),
            None => r.str("seed", "none"),
        }
        r
    }

    pub fn str(&mut self, key: &str, value: &str) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.str(key, &fmt17(value));
    }

    pub fn int(&mut self, key: &str, value: usize) {
        self.str(key, &value.to_string());
    }

    /// Append pre-rendered `key = value` lines under `prefix.`.
    pub fn block(&mut self, prefix: &str, lines: &str) {
        for l in lines.lines().filter(|l| !l.trim().is_empty()) {
            let _ = writeln!(self.text, "{prefix}.{l}");
        }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Write to `out`, or stdout when absent.
    pub fn emit(&self, out: Option<&Path>) -> Result<(), CliError> {
        match out {
            Some(p) => fs::write(p, &self.text).map_err(|e| CliError::Io { path: p.to_path_buf(), source: e }),
            None => {
                print!("{}", self.text);
                Ok(())
            }
        }
    }
}

/// Sidecar written next to a binary artifact.
pub fn write_sidecar(artifact: &Path, report: &Report) -> Result<(), CliError> {
    let mut p = artifact.as_os_str().to_owned();
    p.push(".meta");
    let p = std::path::PathBuf::from(p);
    fs::write(&p, report.as_str()).map_err(|e| CliError::Io { path: p, source: e })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_floats() {
        let mut r = Report::new("x", "abcd", Some(7));
        r.num("v", 0.1);
        let t = r.as_str();
        assert!(t.starts_with(&format!("tool = vou {VERSION}\n")));
        assert!(t.contains("seed = 7\n"));
        assert!(t.contains(&format!("v = {}\n", fmt17(0.1))));
        assert_eq!(fmt17(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
