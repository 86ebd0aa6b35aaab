//! Portable tensor container.
//!
//! Layout (little-endian):
//!
//! ```text
//! [0..8)       header length N as u64
//! [8..8+N)     UTF-8 JSON: name -> {"dtype", "shape", "offset", "nbytes"},
//!              plus an optional "__meta__" object
//! [8+N..)      raw row-major tensor data; offsets are relative to the
//!              start of this section
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::spec::Preprocess;
use crate::error::{Error, Result};

pub const META_KEY: &str = "__meta__";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct HeaderEntry {
    dtype: String,
    shape: Vec<usize>,
    offset: usize,
    nbytes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" | "F32" => Some(Dtype::F32),
            "f64" | "F64" => Some(Dtype::F64),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// A tensor as stored: dtype tag, shape and raw little-endian bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub bytes: Vec<u8>,
}

impl RawTensor {
    pub fn from_f32(shape: Vec<usize>, values: &[f32]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self {
            dtype: Dtype::F32.name().into(),
            shape,
            bytes: values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    pub fn from_f64(shape: Vec<usize>, values: &[f64]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self {
            dtype: Dtype::F64.name().into(),
            shape,
            bytes: values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    /// Decodes as `f32`; `None` unless the stored dtype is `f32`.
    pub fn to_f32(&self) -> Option<Vec<f32>> {
        (Dtype::parse(&self.dtype)? == Dtype::F32).then(|| {
            self.bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect()
        })
    }

    /// Decodes as `f64`, widening `f32` data.
    pub fn to_f64(&self) -> Option<Vec<f64>> {
        match Dtype::parse(&self.dtype)? {
            Dtype::F32 => self.to_f32().map(|v| v.into_iter().map(f64::from).collect()),
            Dtype::F64 => Some(
                self.bytes
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                    .collect(),
            ),
        }
    }
}

/// Named tensors plus free-form metadata (preprocessing stats, architecture).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightContainer {
    tensors: BTreeMap<String, RawTensor>,
    meta: Map<String, Value>,
}

impl WeightContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: RawTensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn insert_f32(&mut self, name: impl Into<String>, shape: Vec<usize>, values: &[f32]) {
        self.insert(name, RawTensor::from_f32(shape, values));
    }

    pub fn remove(&mut self, name: &str) -> Option<RawTensor> {
        self.tensors.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&RawTensor> {
        self.tensors.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn meta(&self) -> &Map<String, Value> {
        &self.meta
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: Value) {
        self.meta.insert(key.into(), value);
    }

    pub fn architecture(&self) -> Option<&str> {
        self.meta.get("architecture").and_then(Value::as_str)
    }

    pub fn preprocess(&self) -> Result<Option<Preprocess>> {
        match self.meta.get("preprocess") {
            None => Ok(None),
            Some(v) => {
                let p: Preprocess = serde_json::from_value(v.clone())
                    .map_err(|e| Error::Container(format!("bad preprocess metadata: {e}")))?;
                p.validate()?;
                Ok(Some(p))
            }
        }
    }

    pub fn set_preprocess(&mut self, p: &Preprocess) {
        self.meta.insert(
            "preprocess".into(),
            serde_json::to_value(p).expect("preprocess serializes"),
        );
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Container("file shorter than the 8-byte header length".into()));
        }
        let header_len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|n| n.checked_add(8))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::Container(format!("header length {header_len} exceeds file size")))?;
        let header: Map<String, Value> = serde_json::from_slice(&bytes[8..header_end])
            .map_err(|e| Error::Container(format!("header is not a JSON object: {e}")))?;
        let data = &bytes[header_end..];

        let mut out = WeightContainer::new();
        for (name, value) in header {
            if name == META_KEY {
                match value {
                    Value::Object(m) => out.meta = m,
                    _ => return Err(Error::Container("__meta__ must be an object".into())),
                }
                continue;
            }
            let entry: HeaderEntry =
                serde_json::from_value(value).map_err(|e| Error::Container(format!("tensor `{name}`: {e}")))?;
            let end = entry
                .offset
                .checked_add(entry.nbytes)
                .filter(|&e| e <= data.len())
                .ok_or_else(|| Error::Container(format!("tensor `{name}` lies outside the data section")))?;
            if let Some(dt) = Dtype::parse(&entry.dtype) {
                let numel: usize = entry.shape.iter().product();
                if numel * dt.size() != entry.nbytes {
                    return Err(Error::Container(format!(
                        "tensor `{name}`: {} bytes do not match shape {:?} of {}",
                        entry.nbytes, entry.shape, entry.dtype
                    )));
                }
            }
            out.tensors.insert(
                name,
                RawTensor {
                    dtype: entry.dtype,
                    shape: entry.shape,
                    bytes: data[entry.offset..end].to_vec(),
                },
            );
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = Map::new();
        let mut offset = 0usize;
        for (name, t) in &self.tensors {
            let entry = HeaderEntry {
                dtype: t.dtype.clone(),
                shape: t.shape.clone(),
                offset,
                nbytes: t.bytes.len(),
            };
            header.insert(name.clone(), serde_json::to_value(entry).expect("entry serializes"));
            offset += t.bytes.len();
        }
        if !self.meta.is_empty() {
            header.insert(META_KEY.into(), Value::Object(self.meta.clone()));
        }
        let mut json = serde_json::to_vec(&Value::Object(header)).expect("header serializes");
        // Pad so the data section starts 8-byte aligned.
        while !json.len().is_multiple_of(8) {
            json.push(b' ');
        }
        let mut out = Vec::with_capacity(8 + json.len() + offset);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.tensors.values() {
            out.extend_from_slice(&t.bytes);
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightContainer {
        let mut c = WeightContainer::new();
        c.insert_f32("a.weight", vec![2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        c.insert_f32("a.bias", vec![2], &[-1.0, 0.5]);
        c.insert("judge", RawTensor::from_f64(vec![1], &[0.125]));
        c.set_preprocess(&Preprocess::imagenet());
        c.set_meta("architecture", Value::from("toy"));
        c
    }

    #[test]
    fn byte_layout_matches_format() {
        let c = sample();
        let bytes = c.to_bytes();
        let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let header: Value = serde_json::from_slice(&bytes[8..8 + n]).unwrap();
        assert_eq!(header["a.bias"]["dtype"], "f32");
        assert_eq!(header["a.bias"]["shape"], serde_json::json!([2]));
        assert_eq!(header["a.bias"]["nbytes"], 8);
        let off = header["a.weight"]["offset"].as_u64().unwrap() as usize;
        let first = f32::from_le_bytes(bytes[8 + n + off..8 + n + off + 4].try_into().unwrap());
        assert_eq!(first, 1.0);
        assert_eq!(header["__meta__"]["architecture"], "toy");
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let back = WeightContainer::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.preprocess().unwrap(), Some(Preprocess::imagenet()));
        assert_eq!(back.architecture(), Some("toy"));
        assert_eq!(back.get("judge").unwrap().to_f64().unwrap(), vec![0.125]);
        assert!(back.get("judge").unwrap().to_f32().is_none());
    }

    #[test]
    fn rejects_truncated_data() {
        let mut bytes = sample().to_bytes();
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(WeightContainer::from_bytes(&bytes), Err(Error::Container(_))));
        assert!(WeightContainer::from_bytes(&[1, 2, 3]).is_err());
        let mut huge = vec![0u8; 16];
        huge[..8].copy_from_slice(&1000u64.to_le_bytes());
        assert!(WeightContainer::from_bytes(&huge).is_err());
    }

    #[test]
    fn keeps_unknown_dtypes_for_later_reporting() {
        let mut c = WeightContainer::new();
        c.insert(
            "h",
            RawTensor {
                dtype: "f16".into(),
                shape: vec![2],
                bytes: vec![0; 4],
            },
        );
        let back = WeightContainer::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.get("h").unwrap().dtype, "f16");
        assert!(back.get("h").unwrap().to_f32().is_none());
    }
}
