//! Versioned, human-readable model files.
//!
//! Every model is written as pretty-printed JSON inside an envelope:
//!
//! ```text
//! { "format": "srla-model", "version": 1, "kind": "hmm", "model": { ... } }
//! ```
//!
//! The header is checked before the body is decoded, so a file from a newer
//! release fails with [`Error::UnsupportedVersion`] rather than a schema error.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::Normalizer;
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "srla-model";
pub const FORMAT_VERSION: u32 = 1;

/// A model type with a stable on-disk kind tag.
pub trait Persist: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl Persist for Normalizer {
    const KIND: &'static str = "normalizer";
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format: &'static str,
    version: u32,
    kind: &'static str,
    model: &'a T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    model: T,
}

pub fn to_text<T: Persist>(model: &T) -> Result<String> {
    let env = EnvelopeOut {
        format: FORMAT_TAG,
        version: FORMAT_VERSION,
        kind: T::KIND,
        model,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

pub fn from_text<T: Persist>(text: &str) -> Result<T> {
    let header: Header = serde_json::from_str(text)?;
    if header.format != FORMAT_TAG {
        return Err(Error::InvalidArgument(format!(
            "not a model file (format tag `{}`)",
            header.format
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: header.version,
            supported: FORMAT_VERSION,
        });
    }
    if header.kind != T::KIND {
        return Err(Error::WrongModelKind {
            found: header.kind,
            expected: T::KIND,
        });
    }
    let env: EnvelopeIn<T> = serde_json::from_str(text)?;
    Ok(env.model)
}

pub fn save_model<T: Persist>(model: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_text(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Persist>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::super::NormalizeKind;
    use super::*;

    fn sample() -> Normalizer {
        Normalizer {
            kind: NormalizeKind::MinMax,
            n_settings: 1,
            offset: vec![0.1, -3.25],
            scale: vec![1.0 / 3.0, 7.5],
            passthrough: vec![false, true],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let n = sample();
        assert_eq!(from_text::<Normalizer>(&to_text(&n).unwrap()).unwrap(), n);
    }

    #[test]
    fn wrong_version_is_reported() {
        let text = to_text(&sample())
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            from_text::<Normalizer>(&text),
            Err(Error::UnsupportedVersion { found: 9, .. })
        ));
    }

    #[test]
    fn truncated_file_fails() {
        let text = to_text(&sample()).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_text::<Normalizer>(cut), Err(Error::Format(_))));
    }

    #[test]
    fn kind_is_checked() {
        let text = to_text(&sample()).unwrap().replace("normalizer", "hmm");
        assert!(matches!(
            from_text::<Normalizer>(&text),
            Err(Error::WrongModelKind { .. })
        ));
    }
}
