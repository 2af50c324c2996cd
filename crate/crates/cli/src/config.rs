//! Flat `key = value` config files with `[section]` headers.
//!
//! Keys before any header apply to every subcommand; keys under `[name]`
//! apply to subcommand `name`. Keys are flag names without the leading
//! dashes. Flags given on the command line win over the file.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, Vec<(String, String)>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{raw}`", i + 1);
            };
            let (k, v) = (k.trim(), v.trim().trim_matches('"'));
            if k.is_empty() {
                bail!("line {}: empty key", i + 1);
            }
            cfg.sections.entry(section.clone()).or_default().push((k.to_string(), v.to_string()));
        }
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
        Self::parse(&text)
    }

    /// Flags for `command` that the user did not already pass.
    pub fn args_for(&self, command: &str, user: &[String]) -> Vec<String> {
        let given = |k: &str| {
            let flag = format!("--{k}");
            user.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
        };
        let mut out = Vec::new();
        for sec in ["", command] {
            for (k, v) in self.sections.get(sec).into_iter().flatten() {
                if given(k) {
                    continue;
                }
                match v.as_str() {
                    "true" => out.push(format!("--{k}")),
                    "false" => {}
                    _ => out.push(format!("--{k}={v}")),
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_overrides() {
        let c = Config::parse("threads = 1\n# comment\n[discretize]\nseed = 7\nseeds = 20 # trailing\n[build]\nrelaxed = true\n").unwrap();
        assert_eq!(c.args_for("discretize", &["--seed".into(), "9".into()]), vec!["--threads=1", "--seeds=20"]);
        assert_eq!(c.args_for("build", &[]), vec!["--threads=1", "--relaxed"]);
        assert!(Config::parse("no equals sign").is_err());
    }
}
