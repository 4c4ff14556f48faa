//! Run configuration: digit systems, exact rational parameters, config files,
//! and the canonical config hash embedded in every output.
//!
//! Rationals are parsed from `"num/den"` strings only; decimal input is
//! rejected so that shifts stay exact by construction. A JSON config file may
//! supply any field; command-line flags override it.

use anyhow::{anyhow, bail, Context, Result};
use missdig::digits::DigitSystem;
use missdig::rat::Rat;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Digit-system description as serialized: `{"base": b, "dim": d,
/// "digits": [[...], ...]}` with ascending digit lists.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SysSpec {
    pub base: u32,
    pub dim: usize,
    pub digits: Vec<Vec<u8>>,
}

impl SysSpec {
    pub fn to_system(&self) -> Result<DigitSystem> {
        if self.digits.len() != self.dim {
            bail!("dim = {} but {} digit lists given", self.dim, self.digits.len());
        }
        DigitSystem::new(self.base, self.digits.clone()).map_err(|e| anyhow!("{e}"))
    }

    pub fn from_system(sys: &DigitSystem) -> SysSpec {
        SysSpec {
            base: sys.base(),
            dim: sys.dim(),
            digits: (0..sys.dim()).map(|j| sys.digits(j).to_vec()).collect(),
        }
    }

    /// Parses compact digit strings like `"023"` (one per coordinate).
    pub fn from_flags(base: u32, digit_strings: &[String]) -> Result<SysSpec> {
        let mut digits = Vec::new();
        for ds in digit_strings {
            let mut v = Vec::new();
            for ch in ds.chars() {
                let d = ch
                    .to_digit(36)
                    .with_context(|| format!("bad digit character {ch:?}"))?;
                if d >= base {
                    bail!("digit {d} out of range for base {base}");
                }
                v.push(d as u8);
            }
            v.sort_unstable();
            digits.push(v);
        }
        Ok(SysSpec { base, dim: digits.len(), digits })
    }
}

/// Parses an exact rational; decimals are rejected.
pub fn parse_rat(s: &str) -> Result<Rat> {
    if s.contains('.') {
        bail!("{s:?}: decimal input is rejected; pass an exact rational as num/den");
    }
    Rat::parse(s).map_err(|e| anyhow!("{s:?}: {e}"))
}

/// On-disk config file: any subset of fields; flags override.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sys: Option<SysSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &str) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {path}"))
    }
}

/// Canonical JSON of the full effective configuration of a run; its SHA-256
/// (first 16 hex digits) is embedded in every output file.
pub fn config_hash(canonical_json: &str) -> String {
    let mut h = Sha256::new();
    h.update(canonical_json.as_bytes());
    let out = h.finalize();
    let mut s = String::with_capacity(16);
    for b in out.iter().take(8) {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sys_roundtrip() {
        let spec = SysSpec::from_flags(5, &["0123".into()]).unwrap();
        let sys = spec.to_system().unwrap();
        assert_eq!(SysSpec::from_system(&sys), spec);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"base":5,"dim":1,"digits":[[0,1,2,3]]}"#);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rat("1/7").unwrap(), Rat::new(1, 7));
        assert!(parse_rat("0.5").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash("{\"x\":1}");
        let b = config_hash("{\"x\":1}");
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        assert_ne!(a, config_hash("{\"x\":2}"));
    }
}
