//! Output emission: RFC-4180-style CSV (header row, UTF-8, LF), JSON
//! summaries, gnuplot-ready column files, and the config-hash verifier.
//!
//! Every file starts with a `#config_hash=<hex>` line tying it to the
//! `<command>-config.json` it was produced with; `verify-outputs` re-derives
//! the hashes and reports mismatches. Outputs contain no timestamps, so two
//! runs with identical config and seed are byte-identical.

use anyhow::{bail, Context, Result};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::config_hash;

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Emitter for one command run, rooted at `out_dir` with a shared hash.
pub struct Emitter {
    out_dir: PathBuf,
    command: String,
    hash: String,
    pub files: Vec<PathBuf>,
}

impl Emitter {
    /// Writes `<command>-config.json` (the canonical config echo) and keys
    /// every further file to its hash.
    pub fn new(out_dir: &str, command: &str, config_json: &serde_json::Value) -> Result<Emitter> {
        let dir = PathBuf::from(out_dir);
        fs::create_dir_all(&dir).with_context(|| format!("creating {out_dir}"))?;
        let canonical = serde_json::to_string_pretty(config_json)? + "\n";
        let hash = config_hash(&canonical);
        let cfg_path = dir.join(format!("{command}-config.json"));
        fs::write(&cfg_path, canonical)?;
        Ok(Emitter { out_dir: dir, command: command.to_string(), hash, files: vec![cfg_path] })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn csv(&mut self, suffix: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let name = if suffix.is_empty() {
            format!("{}.csv", self.command)
        } else {
            format!("{}-{}.csv", self.command, suffix)
        };
        let path = self.out_dir.join(name);
        let mut f = fs::File::create(&path)?;
        writeln!(f, "#config_hash={}", self.hash)?;
        writeln!(f, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
            writeln!(f, "{}", cells.join(","))?;
        }
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn json(&mut self, value: &serde_json::Value) -> Result<PathBuf> {
        let path = self.out_dir.join(format!("{}.json", self.command));
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), serde_json::Value::String(self.hash.clone()));
        obj.insert("command".into(), serde_json::Value::String(self.command.clone()));
        if let serde_json::Value::Object(m) = value {
            for (k, v) in m {
                obj.insert(k.clone(), v.clone());
            }
        }
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(obj))? + "\n";
        fs::write(&path, text)?;
        self.files.push(path.clone());
        Ok(path)
    }

    /// Gnuplot-compatible whitespace-delimited columns, one file per series.
    pub fn plotdata(&mut self, series: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let path = self.out_dir.join(format!("{}-plot-{}.dat", self.command, series));
        let mut f = fs::File::create(&path)?;
        writeln!(f, "#config_hash={}", self.hash)?;
        writeln!(f, "# {}", columns.join(" "))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        self.files.push(path.clone());
        Ok(path)
    }
}

/// Re-checks the config hashes embedded in every output under `dir`.
pub fn verify_outputs(dir: &str) -> Result<(usize, usize)> {
    let mut checked = 0usize;
    let mut bad = 0usize;
    // compute the expected hash per command from its -config.json
    let mut expected: Vec<(String, String)> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {dir}"))? {
        let p = entry?.path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        if let Some(cmd) = name.strip_suffix("-config.json") {
            let text = fs::read_to_string(&p)?;
            expected.push((cmd.to_string(), config_hash(&text)));
        }
    }
    expected.sort();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        if name.ends_with("-config.json") || p.is_dir() {
            continue;
        }
        let Some((cmd, _)) = split_command(&name) else { continue };
        let Some((_, want)) = expected.iter().find(|(c, _)| *c == cmd) else {
            bad += 1;
            eprintln!("{name}: no config file for command {cmd}");
            continue;
        };
        let got = embedded_hash(&p)?;
        checked += 1;
        match got {
            Some(h) if h == *want => {}
            Some(h) => {
                bad += 1;
                eprintln!("{name}: hash {h} does not match config hash {want}");
            }
            None => {
                bad += 1;
                eprintln!("{name}: missing #config_hash line");
            }
        }
    }
    Ok((checked, bad))
}

fn split_command(name: &str) -> Option<(String, String)> {
    let stem = name.strip_suffix(".csv").or_else(|| name.strip_suffix(".json")).or_else(|| {
        name.strip_suffix(".dat")
    })?;
    // command is the stem up to the first "-plot-" or the last "-" suffix
    if let Some(i) = stem.find("-plot-") {
        return Some((stem[..i].to_string(), stem[i..].to_string()));
    }
    Some((stem.to_string(), String::new()))
}

fn embedded_hash(path: &Path) -> Result<Option<String>> {
    let text = fs::read_to_string(path)?;
    if let Some(first) = text.lines().next() {
        if let Some(h) = first.strip_prefix("#config_hash=") {
            return Ok(Some(h.trim().to_string()));
        }
    }
    // JSON outputs carry the hash as a field
    if path.extension().map(|e| e == "json").unwrap_or(false) {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(h) = v.get("config_hash").and_then(|x| x.as_str()) {
            return Ok(Some(h.to_string()));
        }
        bail!("{}: JSON output without config_hash", path.display());
    }
    Ok(None)
}

/// Splits a CSV command file name back out (used by tests).
pub fn command_of(name: &str) -> Option<String> {
    split_command(name).map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn emit_and_verify_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        let cfg = serde_json::json!({"x": 1, "sys": {"base": 3}});
        let mut em = Emitter::new(d, "demo", &cfg).unwrap();
        em.csv("", &["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        em.json(&serde_json::json!({"result": 42})).unwrap();
        em.plotdata("main", &["x", "y"], &[vec![1.0, 2.0]]).unwrap();
        let (checked, bad) = verify_outputs(d).unwrap();
        assert_eq!(bad, 0);
        assert_eq!(checked, 3);
        // tamper with the config: hashes no longer match
        std::fs::write(dir.path().join("demo-config.json"), "{}\n").unwrap();
        let (_, bad) = verify_outputs(d).unwrap();
        assert!(bad > 0);
    }
}
