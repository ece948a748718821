//! Plain-text `key=value` run configuration.
//!
//! Every subcommand accepts `--config <file>`. The file mirrors that
//! subcommand's long flag names (`noise-sigma=0.25`), one assignment per
//! line, with `#` starting a comment. Values given on the command line win
//! over the file; built-in defaults apply last. Keys the subcommand does not
//! recognise are rejected with the offending line number.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use pnprr::{Error, Result};

/// A parsed configuration file. Entries are consumed by `take_*`; whatever
/// remains afterwards is an unknown key.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    /// Parses config text. Later assignments to the same key win.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    detail: format!("expected `key=value`, got `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    detail: "empty key before `=`".into(),
                });
            }
            entries.insert(key.to_string(), (line_no, value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    /// Loads and parses the file at `path`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Loads the file if a path was given, otherwise yields an empty config.
    pub fn load_optional(path: Option<&String>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// Removes and returns the raw value for `key`.
    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    /// Removes and parses the value for `key`; a malformed value reports the
    /// config line it came from.
    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<T>().map(Some).map_err(|e| Error::Parse {
                line,
                detail: format!("config key `{key}`: bad value `{value}`: {e}"),
            }),
        }
    }

    /// Fails if any entry was never consumed, naming the first unknown key by
    /// line number.
    pub fn reject_unknown(&self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.iter().min_by_key(|(_, (line, _))| *line) {
            return Err(Error::Parse {
                line: *line,
                detail: format!("unknown config key `{key}`"),
            });
        }
        Ok(())
    }
}

/// Merges a CLI value, a config value, and a default, in that precedence.
pub fn resolve<T>(cli: Option<T>, cfg: Option<T>, default: T) -> T {
    cli.or(cfg).unwrap_or(default)
}

/// Like [`resolve`] but with no default: the value must come from the CLI or
/// the config file.
pub fn resolve_required<T>(cli: Option<T>, cfg: Option<T>, flag: &str) -> Result<T> {
    cli.or(cfg)
        .ok_or_else(|| Error::InvalidParameter(format!("missing required option --{flag}")))
}

/// Parses a comma-separated list with a per-item parser. An empty string (or
/// only whitespace) yields an empty list.
pub fn parse_list<T>(text: &str, what: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let mut out = Vec::new();
    if text.trim().is_empty() {
        return Ok(out);
    }
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{what}: empty entry in list `{text}`"
            )));
        }
        out.push(item.parse::<T>().map_err(|e| {
            Error::InvalidParameter(format!("{what}: bad entry `{item}`: {e}"))
        })?);
    }
    Ok(out)
}
