use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer};

use auso_core::Family;

/// Inclusive level range: `a..b`, `a..=b` or a single level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelRange {
    pub first: usize,
    pub last: usize,
}

impl LevelRange {
    pub fn levels(self) -> impl Iterator<Item = usize> {
        self.first..=self.last
    }
}

impl fmt::Display for LevelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad level `{t}` in range `{s}`"))
        };
        let (first, last) = match s.split_once("..") {
            Some((a, b)) => (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
            None => {
                let x = num(s)?;
                (x, x)
            }
        };
        if last < first {
            return Err(format!("empty level range `{s}`"));
        }
        Ok(LevelRange { first, last })
    }
}

impl<'de> Deserialize<'de> for LevelRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sampled verification run after each built level.
#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct VerifyPlan {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_face_dim")]
    pub max_face_dim: usize,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

fn default_samples() -> usize {
    10_000
}

fn default_face_dim() -> usize {
    8
}

/// A build described in a JSON file.
#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub family: Family,
    pub levels: LevelRange,
    pub frames_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub verify: Option<VerifyPlan>,
    /// Growth table written after the build (CSV).
    pub report: Option<PathBuf>,
}

impl ExperimentManifest {
    /// Reads a manifest; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut m: ExperimentManifest =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut m.frames_dir, &mut m.cache_dir, &mut m.report]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!("0..5".parse(), Ok(LevelRange { first: 0, last: 5 }));
        assert_eq!("2..=3".parse(), Ok(LevelRange { first: 2, last: 3 }));
        assert_eq!("4".parse(), Ok(LevelRange { first: 4, last: 4 }));
        assert!("3..1".parse::<LevelRange>().is_err());
        assert!("a..1".parse::<LevelRange>().is_err());
    }

    #[test]
    fn manifest_paths_are_relative_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"family": "zadeh", "levels": "0..1", "cache_dir": "out", "verify": {"seeds": [7]}}"#,
        )
        .unwrap();
        let m = ExperimentManifest::load(&path).unwrap();
        assert_eq!(m.family, Family::Zadeh);
        assert_eq!(m.cache_dir, Some(dir.path().join("out")));
        assert_eq!(m.verify.unwrap().samples, 10_000);
    }

    #[test]
    fn manifest_rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"family": "zadeh", "levels": "0", "colour": 1}"#).unwrap();
        assert!(ExperimentManifest::load(&path).is_err());
    }
}
