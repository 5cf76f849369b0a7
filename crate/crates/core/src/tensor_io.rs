//! The `PXT1` dense tensor container and the typed per-pixel maps built on it.
//!
//! Layout (all integers little-endian):
//!
//! | bytes       | content                                        |
//! |-------------|------------------------------------------------|
//! | 0..4        | magic `PXT1`                                   |
//! | 4           | dtype code: 1 = real32, 2 = uint8, 3 = uint32  |
//! | 5           | ndim, 1..=4                                    |
//! | 6..8        | reserved, zero                                 |
//! | 8..8+8*ndim | dims as u64                                    |
//! | rest        | row-major payload                              |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PXT1";
const HEADER_LEN: usize = 8;
pub const MAX_DIMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Real32,
    Uint8,
    Uint32,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::Real32 => 1,
            DType::Uint8 => 2,
            DType::Uint32 => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(DType::Real32),
            2 => Ok(DType::Uint8),
            3 => Ok(DType::Uint32),
            other => Err(Error::Format(format!("unknown dtype code {other}"))),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::Real32 | DType::Uint32 => 4,
            DType::Uint8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Real32(Vec<f32>),
    Uint8(Vec<u8>),
    Uint32(Vec<u32>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::Real32(_) => DType::Real32,
            TensorData::Uint8(_) => DType::Uint8,
            TensorData::Uint32(_) => DType::Uint32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::Real32(v) => v.len(),
            TensorData::Uint8(v) => v.len(),
            TensorData::Uint32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dense row-major tensor with 1 to 4 positive dimensions.
///
/// Real-valued tensors never hold NaN or infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_DIMS {
            return Err(Error::Shape(format!(
                "tensor rank must be 1..={MAX_DIMS}, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero-sized dimension in {dims:?}")));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Shape(format!("dims {dims:?} overflow")))?;
        if count != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {count} elements, buffer has {}",
                data.len()
            )));
        }
        if let TensorData::Real32(v) = &data {
            if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::Validation(format!(
                    "non-finite value {} at flat index {pos}",
                    v[pos]
                )));
            }
        }
        Ok(Tensor { dims, data })
    }

    pub fn real32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Tensor::new(dims, TensorData::Real32(data))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn as_real32(&self) -> Result<&[f32]> {
        match &self.data {
            TensorData::Real32(v) => Ok(v),
            other => Err(Error::Format(format!(
                "expected a real32 tensor, got {:?}",
                other.dtype()
            ))),
        }
    }

    pub fn payload_len(&self) -> usize {
        self.data.len() * self.dtype().size()
    }
}

/// Serializes to the `PXT1` byte layout.
pub fn encode(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.dims.len() + t.payload_len());
    out.extend_from_slice(MAGIC);
    out.push(t.dtype().code());
    out.push(t.dims.len() as u8);
    out.extend_from_slice(&[0, 0]);
    for &d in &t.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match &t.data {
        TensorData::Real32(v) => v
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::Uint8(v) => out.extend_from_slice(v),
        TensorData::Uint32(v) => v
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "file too short for header ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[0..4])));
    }
    let dtype = DType::from_code(bytes[4])?;
    let ndim = bytes[5] as usize;
    if ndim == 0 || ndim > MAX_DIMS {
        return Err(Error::Format(format!("invalid ndim {ndim}")));
    }
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(Error::Format("reserved header bytes are not zero".into()));
    }
    let dims_end = HEADER_LEN + 8 * ndim;
    if bytes.len() < dims_end {
        return Err(Error::Format("truncated dimension table".into()));
    }
    let mut dims = Vec::with_capacity(ndim);
    for chunk in bytes[HEADER_LEN..dims_end].chunks_exact(8) {
        let d = u64::from_le_bytes(chunk.try_into().unwrap());
        let d = usize::try_from(d)
            .map_err(|_| Error::Format(format!("dimension {d} does not fit in memory")))?;
        dims.push(d);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|c| c.checked_mul(dtype.size()).map(|bytes| (c, bytes)));
    let Some((count, expected)) = count else {
        return Err(Error::Format(format!("dims {dims:?} overflow")));
    };
    let payload = &bytes[dims_end..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, dims {dims:?} of {dtype:?} need {expected}",
            payload.len()
        )));
    }
    let data = match dtype {
        DType::Real32 => TensorData::Real32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::Uint8 => TensorData::Uint8(payload.to_vec()),
        DType::Uint32 => TensorData::Uint32(
            payload
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    debug_assert_eq!(data.len(), count);
    Tensor::new(dims, data).map_err(|e| match e {
        Error::Shape(msg) => Error::Format(msg),
        other => other,
    })
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

/// Per-pixel sigmoid probabilities, `height × width × channels`.
///
/// Channels `0..k` are the predefined classes. When `has_object` is set,
/// channel `k` is the merged object class.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    k: usize,
    has_object: bool,
    values: Vec<f32>,
}

impl ProbMap {
    pub fn new(
        height: usize,
        width: usize,
        k: usize,
        has_object: bool,
        values: Vec<f32>,
    ) -> Result<Self> {
        check_map_shape(height, width, k, has_object, values.len())?;
        if let Some(pos) = values.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation(format!(
                "probability {} at flat index {pos} is outside [0, 1]",
                values[pos]
            )));
        }
        Ok(ProbMap {
            height,
            width,
            k,
            has_object,
            values,
        })
    }

    /// Builds a map from a `[H, W, C]` real32 tensor. `C` must be `k + 1`
    /// (object channel present) or `k` (no object channel).
    pub fn from_tensor(t: &Tensor, k: usize) -> Result<Self> {
        let (h, w, has_object) = split_channels(t, k)?;
        ProbMap::new(h, w, k, has_object, t.as_real32()?.to_vec())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::real32(
            vec![self.height, self.width, self.channels()],
            self.values.clone(),
        )
        .expect("validated map")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Number of predefined classes.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn has_object(&self) -> bool {
        self.has_object
    }

    pub fn channels(&self) -> usize {
        self.k + self.has_object as usize
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// All channels of one pixel.
    #[inline]
    pub fn pixel(&self, index: usize) -> &[f32] {
        let c = self.channels();
        &self.values[index * c..(index + 1) * c]
    }
}

/// Pre-activation scores laid out like [`ProbMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMap {
    height: usize,
    width: usize,
    k: usize,
    has_object: bool,
    values: Vec<f32>,
}

impl LogitMap {
    pub fn new(
        height: usize,
        width: usize,
        k: usize,
        has_object: bool,
        values: Vec<f32>,
    ) -> Result<Self> {
        check_map_shape(height, width, k, has_object, values.len())?;
        if let Some(pos) = values.iter().position(|z| !z.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite logit {} at flat index {pos}",
                values[pos]
            )));
        }
        Ok(LogitMap {
            height,
            width,
            k,
            has_object,
            values,
        })
    }

    pub fn from_tensor(t: &Tensor, k: usize) -> Result<Self> {
        let (h, w, has_object) = split_channels(t, k)?;
        LogitMap::new(h, w, k, has_object, t.as_real32()?.to_vec())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::real32(
            vec![self.height, self.width, self.channels()],
            self.values.clone(),
        )
        .expect("validated map")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn has_object(&self) -> bool {
        self.has_object
    }

    pub fn channels(&self) -> usize {
        self.k + self.has_object as usize
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> &[f32] {
        let c = self.channels();
        &self.values[index * c..(index + 1) * c]
    }

    /// Elementwise logistic sigmoid.
    pub fn sigmoid(&self) -> ProbMap {
        let values = self.values.iter().map(|&z| sigmoid(z)).collect();
        ProbMap {
            height: self.height,
            width: self.width,
            k: self.k,
            has_object: self.has_object,
            values,
        }
    }
}

#[inline]
pub fn sigmoid(z: f32) -> f32 {
    (1.0 / (1.0 + (-(z as f64)).exp())) as f32
}

fn check_map_shape(h: usize, w: usize, k: usize, has_object: bool, len: usize) -> Result<()> {
    if h == 0 || w == 0 {
        return Err(Error::Shape(format!("empty map {h}x{w}")));
    }
    if k == 0 {
        return Err(Error::Shape(
            "at least one predefined class is required".into(),
        ));
    }
    let c = k + has_object as usize;
    if len != h * w * c {
        return Err(Error::Shape(format!(
            "{h}x{w}x{c} map needs {} values, got {len}",
            h * w * c
        )));
    }
    Ok(())
}

fn split_channels(t: &Tensor, k: usize) -> Result<(usize, usize, bool)> {
    let [h, w, c] = t.dims() else {
        return Err(Error::Shape(format!(
            "expected a [H, W, C] tensor, got dims {:?}",
            t.dims()
        )));
    };
    let has_object = if *c == k + 1 {
        true
    } else if *c == k {
        false
    } else {
        return Err(Error::Shape(format!(
            "{c} channels do not match {k} predefined classes (+1 object channel)"
        )));
    };
    Ok((*h, *w, has_object))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode(&Tensor::new(vec![1], TensorData::Uint8(vec![7])).unwrap());
        bytes[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        // 2x2 real32 needs 16 payload bytes
        let mut bytes = encode(&Tensor::real32(vec![2, 2], vec![1.0; 4]).unwrap());
        bytes.truncate(bytes.len() - 4);
        assert_eq!(bytes.len() - (8 + 16), 12);
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn unknown_dtype_is_rejected() {
        let mut bytes = encode(&Tensor::new(vec![1], TensorData::Uint8(vec![7])).unwrap());
        bytes[4] = 9;
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn zero_scalar_payload_is_four_zero_bytes() {
        let bytes = encode(&Tensor::real32(vec![1, 1], vec![0.0]).unwrap());
        assert_eq!(bytes.len(), 8 + 16 + 4);
        assert_eq!(&bytes[24..], &[0, 0, 0, 0]);
    }

    #[test]
    fn uint8_payload_length() {
        let t = Tensor::new(vec![3, 2], TensorData::Uint8(vec![1, 2, 3, 4, 5, 6])).unwrap();
        assert_eq!(t.payload_len(), 6);
        assert_eq!(encode(&t).len(), 8 + 16 + 6);
    }

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![2, 3], TensorData::Uint32(vec![0; 6])).unwrap();
        let bytes = encode(&t);
        assert_eq!(&bytes[0..8], &[b'P', b'X', b'T', b'1', 3, 2, 0, 0]);
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
    }

    #[test]
    fn rank_limits() {
        assert!(Tensor::new(vec![], TensorData::Uint8(vec![])).is_err());
        assert!(Tensor::new(vec![1; 5], TensorData::Uint8(vec![0])).is_err());
        assert!(Tensor::new(vec![2, 0], TensorData::Uint8(vec![])).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            Tensor::real32(vec![2], vec![1.0, f32::NAN]),
            Err(Error::Validation(_))
        ));
        assert!(LogitMap::new(1, 1, 1, false, vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn prob_map_range_is_validated() {
        assert!(ProbMap::new(1, 1, 1, true, vec![0.5, 1.0]).is_ok());
        assert!(matches!(
            ProbMap::new(1, 1, 1, true, vec![0.5, 1.5]),
            Err(Error::Validation(_))
        ));
        assert!(ProbMap::new(1, 1, 1, true, vec![-0.1, 0.5]).is_err());
    }

    #[test]
    fn prob_map_channel_detection() {
        let t = Tensor::real32(vec![1, 2, 3], vec![0.1; 6]).unwrap();
        assert!(ProbMap::from_tensor(&t, 2).unwrap().has_object());
        assert!(!ProbMap::from_tensor(&t, 3).unwrap().has_object());
        assert!(matches!(ProbMap::from_tensor(&t, 5), Err(Error::Shape(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pxt");
        let t = Tensor::real32(vec![2, 1, 2], vec![0.25, -3.0, 1e-30, 7.5]).unwrap();
        write_tensor(&t, &path).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), t);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_tensor("/nonexistent/dir/x.pxt"),
            Err(Error::Io { .. })
        ));
    }
}
