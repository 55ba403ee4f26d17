//! Binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `SLIMTNSR` |
//! | 4     | version `u32` (currently 1) |
//! | 8     | header length `u64` |
//! | n     | UTF-8 JSON header `{name: {"dtype", "shape", "offset", "nbytes"}}` |
//! | ...   | tensor data, row-major little-endian |
//!
//! `offset` is measured from the first byte after the header. The writer
//! emits tensors in name order, packed without padding.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Result, SlimError};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 8] = b"SLIMTNSR";
pub const VERSION: u32 = 1;
const PREAMBLE: usize = 8 + 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I8(Vec<i8>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn dtype(&self) -> &'static str {
        match self {
            Self::F32(_) => "f32",
            Self::I8(_) => "i8",
            Self::U8(_) => "u8",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::F32(v) => v.len(),
            Self::I8(v) => v.len(),
            Self::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn nbytes(&self) -> usize {
        self.len() * dtype_size(self.dtype()).expect("known dtype")
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        match self {
            Self::F32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Self::I8(v) => out.extend(v.iter().map(|&x| x as u8)),
            Self::U8(v) => out.extend_from_slice(v),
        }
    }
}

fn dtype_size(dtype: &str) -> Option<usize> {
    match dtype {
        "f32" => Some(4),
        "i8" | "u8" => Some(1),
        _ => None,
    }
}

/// A named entry of the container: a shape plus typed data.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

pub type TensorMap = BTreeMap<String, Tensor>;

impl Tensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let expected = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| SlimError::ShapeMismatch("shape product overflows".into()))?;
        if expected != data.len() {
            return Err(SlimError::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// Panics if `shape` does not match the data length.
    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Self {
        Self::new(shape, TensorData::F32(data)).expect("shape matches data")
    }

    /// Panics if `shape` does not match the data length.
    pub fn i8(shape: Vec<usize>, data: Vec<i8>) -> Self {
        Self::new(shape, TensorData::I8(data)).expect("shape matches data")
    }

    /// Panics if `shape` does not match the data length.
    pub fn u8(shape: Vec<usize>, data: Vec<u8>) -> Self {
        Self::new(shape, TensorData::U8(data)).expect("shape matches data")
    }

    /// A `u8` vector holding compact JSON.
    pub fn json<T: Serialize>(value: &T) -> Self {
        let bytes = serde_json::to_vec(value).expect("serializable value");
        Self::u8(vec![bytes.len()], bytes)
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        Self::f32(vec![m.rows(), m.cols()], m.as_slice().to_vec())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> &'static str {
        self.data.dtype()
    }

    pub fn as_f32(&self) -> Result<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Ok(v),
            other => Err(SlimError::SchemaViolation(format!(
                "expected f32 tensor, found {}",
                other.dtype()
            ))),
        }
    }

    pub fn as_i8(&self) -> Result<&[i8]> {
        match &self.data {
            TensorData::I8(v) => Ok(v),
            other => Err(SlimError::SchemaViolation(format!(
                "expected i8 tensor, found {}",
                other.dtype()
            ))),
        }
    }

    pub fn as_u8(&self) -> Result<&[u8]> {
        match &self.data {
            TensorData::U8(v) => Ok(v),
            other => Err(SlimError::SchemaViolation(format!(
                "expected u8 tensor, found {}",
                other.dtype()
            ))),
        }
    }

    pub fn parse_json<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_json::from_slice(self.as_u8()?)
            .map_err(|e| SlimError::SchemaViolation(format!("bad JSON tensor: {e}")))
    }

    /// Interprets a 2-D `f32` tensor as a matrix.
    pub fn to_matrix(&self) -> Result<Matrix> {
        let data = self.as_f32()?;
        match self.shape[..] {
            [rows, cols] => Matrix::new(rows, cols, data.to_vec()),
            _ => Err(SlimError::SchemaViolation(format!(
                "expected a 2-D tensor, got shape {:?}",
                self.shape
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderEntry {
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
    nbytes: u64,
}

/// JSON object with duplicate keys rejected.
struct UniqueHeader(BTreeMap<String, HeaderEntry>);

impl<'de> Deserialize<'de> for UniqueHeader {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct HeaderVisitor;

        impl<'de> Visitor<'de> for HeaderVisitor {
            type Value = UniqueHeader;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of tensor descriptors")
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut map = BTreeMap::new();
                while let Some((key, value)) = access.next_entry::<String, HeaderEntry>()? {
                    if map.contains_key(&key) {
                        return Err(de::Error::custom(format!("duplicate tensor name '{key}'")));
                    }
                    map.insert(key, value);
                }
                Ok(UniqueHeader(map))
            }
        }

        deserializer.deserialize_map(HeaderVisitor)
    }
}

pub fn to_bytes(tensors: &TensorMap) -> Vec<u8> {
    let mut header = BTreeMap::new();
    let mut offset = 0u64;
    for (name, t) in tensors {
        let nbytes = t.data.nbytes() as u64;
        header.insert(
            name.as_str(),
            HeaderEntry {
                dtype: t.dtype().to_string(),
                shape: t.shape.clone(),
                offset,
                nbytes,
            },
        );
        offset += nbytes;
    }
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(PREAMBLE + header.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in tensors.values() {
        t.data.write_le(&mut out);
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<TensorMap> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(SlimError::BadMagic);
    }
    if bytes.len() < PREAMBLE {
        return Err(SlimError::TruncatedData);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(SlimError::UnsupportedVersion(version));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let body = &bytes[PREAMBLE..];
    if header_len > body.len() as u64 {
        return Err(SlimError::TruncatedData);
    }
    let (header, data) = body.split_at(header_len as usize);
    let UniqueHeader(entries) =
        serde_json::from_slice(header).map_err(|e| SlimError::CorruptHeader(e.to_string()))?;

    let mut spans = Vec::with_capacity(entries.len());
    for (name, e) in &entries {
        let size = dtype_size(&e.dtype).ok_or_else(|| {
            SlimError::CorruptHeader(format!("{name}: unknown dtype '{}'", e.dtype))
        })?;
        let expected = e
            .shape
            .iter()
            .try_fold(size as u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or_else(|| SlimError::CorruptHeader(format!("{name}: shape overflows")))?;
        if expected != e.nbytes {
            return Err(SlimError::CorruptHeader(format!(
                "{name}: nbytes {} does not match shape {:?}",
                e.nbytes, e.shape
            )));
        }
        let end = e
            .offset
            .checked_add(e.nbytes)
            .ok_or_else(|| SlimError::CorruptHeader(format!("{name}: offset overflows")))?;
        if end > data.len() as u64 {
            return Err(SlimError::TruncatedData);
        }
        spans.push((e.offset, end, name.as_str()));
    }
    spans.sort_unstable();
    for pair in spans.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(SlimError::CorruptHeader(format!(
                "tensors '{}' and '{}' overlap",
                pair[0].2, pair[1].2
            )));
        }
    }

    let mut out = TensorMap::new();
    for (name, e) in entries {
        let raw = &data[e.offset as usize..(e.offset + e.nbytes) as usize];
        let payload = match e.dtype.as_str() {
            "f32" => TensorData::F32(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            ),
            "i8" => TensorData::I8(raw.iter().map(|&b| b as i8).collect()),
            _ => TensorData::U8(raw.to_vec()),
        };
        out.insert(
            name,
            Tensor {
                shape: e.shape,
                data: payload,
            },
        );
    }
    Ok(out)
}

pub fn write_container(path: impl AsRef<Path>, tensors: &TensorMap) -> Result<()> {
    std::fs::write(path, to_bytes(tensors))?;
    Ok(())
}

pub fn read_container(path: impl AsRef<Path>) -> Result<TensorMap> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_len(bytes: &[u8]) -> usize {
        u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize
    }

    #[test]
    fn empty_map_layout() {
        let bytes = to_bytes(&TensorMap::new());
        assert_eq!(&bytes[..8], b"SLIMTNSR");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[20..], b"{}");
        assert!(from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn single_matrix_size() {
        let mut map = TensorMap::new();
        map.insert(
            "w".into(),
            Tensor::f32(vec![2, 2], vec![1.0, -2.0, 3.5, 0.0]),
        );
        let bytes = to_bytes(&map);
        assert_eq!(bytes.len(), 8 + 4 + 8 + header_len(&bytes) + 16);
        assert_eq!(
            &bytes[bytes.len() - 16..bytes.len() - 12],
            &1.0f32.to_le_bytes()
        );
        assert_eq!(from_bytes(&bytes).unwrap(), map);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let mut map = TensorMap::new();
        map.insert("a".into(), Tensor::i8(vec![3], vec![-128, 0, 127]));
        map.insert("b".into(), Tensor::u8(vec![1, 2], vec![7, 255]));
        map.insert("c".into(), Tensor::f32(vec![0], vec![]));
        write_container(&path, &map).unwrap();
        assert_eq!(read_container(&path).unwrap(), map);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut bytes = to_bytes(&TensorMap::new());
        bytes[0] = b'X';
        assert!(matches!(from_bytes(&bytes), Err(SlimError::BadMagic)));
        let mut bytes = to_bytes(&TensorMap::new());
        bytes[8] = 2;
        assert!(matches!(
            from_bytes(&bytes),
            Err(SlimError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn rejects_truncated_data() {
        let mut map = TensorMap::new();
        map.insert("w".into(), Tensor::f32(vec![4], vec![1.0; 4]));
        let bytes = to_bytes(&map);
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 1]),
            Err(SlimError::TruncatedData)
        ));
        assert!(matches!(
            from_bytes(&bytes[..15]),
            Err(SlimError::TruncatedData)
        ));
    }

    fn with_header(header: &str, data_len: usize) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend(std::iter::repeat_n(0u8, data_len));
        out
    }

    #[test]
    fn rejects_inconsistent_headers() {
        let cases = [
            r#"{"a":{"dtype":"f32","shape":[2],"offset":0,"nbytes":8},"b":{"dtype":"u8","shape":[4],"offset":4,"nbytes":4}}"#,
            r#"{"a":{"dtype":"f64","shape":[2],"offset":0,"nbytes":16}}"#,
            r#"{"a":{"dtype":"f32","shape":[3],"offset":0,"nbytes":8}}"#,
            r#"{"a":{"dtype":"u8","shape":[1],"offset":0,"nbytes":1},"a":{"dtype":"u8","shape":[1],"offset":1,"nbytes":1}}"#,
            r#"{"a":{"dtype":"u8","shape":[18446744073709551615,2],"offset":0,"nbytes":0}}"#,
            r#"{"a":{"dtype":"u8","shape":[1],"offset":0,"nbytes":1,"extra":1}}"#,
            r#"[1,2,3]"#,
            r#"{"a":"#,
        ];
        for header in cases {
            let err = from_bytes(&with_header(header, 16)).unwrap_err();
            assert!(
                matches!(err, SlimError::CorruptHeader(_)),
                "{header}: {err:?}"
            );
        }
    }
}
