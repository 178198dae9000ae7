//! Plain and gzip-compressed JSON files, CSV tables and digests.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if !is_gzip(path) {
        return Ok(raw);
    }
    let mut out = Vec::new();
    GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(|e| CliError::io(path, e))?;
    Ok(out)
}

/// Writes `bytes`, gzip-compressing when the name ends in `.gz`; the gzip
/// header carries no timestamp so reruns are byte-identical.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let data = if is_gzip(path) {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).and_then(|_| enc.finish()).map_err(|e| CliError::io(path, e))?
    } else {
        bytes.to_vec()
    };
    fs::write(path, data).map_err(|e| CliError::io(path, e))
}

/// Converts a serde path into a JSON pointer.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

pub fn parse_value(path: &Path) -> CliResult<serde_json::Value> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::schema(path, "", format!("not valid JSON: {e}")))
}

/// Deserializes `value`, reporting failures with the JSON pointer of the offending node.
pub fn from_value<T: DeserializeOwned>(path: &Path, value: &serde_json::Value) -> CliResult<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let p = pointer(e.path());
        CliError::schema(path, p, e.into_inner().to_string())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    from_value(path, &parse_value(path)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("in-memory JSON serialization");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_bytes(path, &to_json_bytes(value))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes a CSV table with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    write_bytes(path, &bytes)
}

/// Shortest round-trip decimal form of a float.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gzip_round_trip_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json.gz");
        write_bytes(&p, b"{\"a\": 1}").unwrap();
        let first = fs::read(&p).unwrap();
        write_bytes(&p, b"{\"a\": 1}").unwrap();
        assert_eq!(first, fs::read(&p).unwrap());
        assert_eq!(read_bytes(&p).unwrap(), b"{\"a\": 1}");
    }

    #[test]
    fn error_pointer() {
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Inner {
            x: Vec<f64>,
        }
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Outer {
            inner: Inner,
        }
        let v: serde_json::Value = serde_json::json!({"inner": {"x": [1.0, "no"]}});
        match from_value::<Outer>(Path::new("f.json"), &v) {
            Err(CliError::Schema { pointer, .. }) => assert_eq!(pointer, "/inner/x/1"),
            other => panic!("{other:?}"),
        }
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(1.0), "1.0");
    }
}
