//! Class schemas, multi-hot label maps, boundary masks and evaluation ground
//! truth.
//!
//! A [`LabelMap`] stores one `u32` per pixel. Bits `0..K` mark membership in
//! the predefined classes, [`OBJECT_BIT`] marks the merged object class and
//! [`IGNORE_BIT`] marks pixels that carry no supervision. A car pixel under
//! the grouped schema carries the `vehicle` bit and the object bit; a road
//! pixel carries the `road` bit only; an OoD obstacle carries the object bit
//! only.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::tensor_io::{Tensor, TensorData};

pub const OBJECT_BIT: u32 = 1 << 30;
pub const IGNORE_BIT: u32 = 1 << 31;
/// Largest number of predefined classes that fit below the flag bits.
pub const MAX_CLASSES: usize = 30;
/// Source id reserved for unlabelled ("void") pixels.
pub const VOID_ID: u32 = 255;
pub const DEFAULT_BOUNDARY_RADIUS: usize = 2;

/// The 19 Cityscapes evaluation classes, indexed by train id.
pub const FINE19_NAMES: [&str; 19] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic_light",
    "traffic_sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
];

pub const GROUPED7_NAMES: [&str; 7] = [
    "road",
    "flat_other",
    "human",
    "vehicle",
    "construction",
    "object",
    "background",
];

/// Fine train id to grouped7 index.
const GROUPED7_OF_FINE: [usize; 19] = [
    0, // road
    1, // sidewalk
    4, // building
    4, // wall
    4, // fence
    5, // pole
    5, // traffic light
    5, // traffic sign
    6, // vegetation
    6, // terrain
    6, // sky
    2, // person
    2, // rider
    3, // car
    3, // truck
    3, // bus
    3, // train
    3, // motorcycle
    3, // bicycle
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemaPreset {
    Fine19,
    Grouped7,
    Custom(CustomTable),
}

/// User-defined grouping of source ids onto `names`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CustomTable {
    pub names: Vec<String>,
    /// `(source id, schema index)` pairs.
    pub mapping: Vec<(u32, usize)>,
    pub object_members: Vec<usize>,
}

impl CustomTable {
    /// Parses the plain-text table format:
    ///
    /// ```text
    /// # source_id = class_name
    /// 0 = road
    /// 13 = vehicle
    /// object_members = vehicle
    /// ```
    ///
    /// Class indices follow first appearance.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut mapping = Vec::new();
        let mut object_names = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Schema(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "object_members" {
                object_names.extend(
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from),
                );
                continue;
            }
            let id: u32 = key.parse().map_err(|_| {
                Error::Schema(format!("line {}: bad source id `{key}`", lineno + 1))
            })?;
            let index = match names.iter().position(|n| n == value) {
                Some(i) => i,
                None => {
                    names.push(value.to_string());
                    names.len() - 1
                }
            };
            mapping.push((id, index));
        }
        let object_members = object_names
            .iter()
            .map(|n| {
                names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::Schema(format!("unknown object member `{n}`")))
            })
            .collect::<Result<_>>()?;
        Ok(CustomTable {
            names,
            mapping,
            object_members,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSchema {
    names: Vec<String>,
    /// Bitmask over schema indices.
    object_members: u32,
    grouping: BTreeMap<u32, usize>,
}

impl ClassSchema {
    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn is_object(&self, class: usize) -> bool {
        class < MAX_CLASSES && self.object_members & (1 << class) != 0
    }

    pub fn object_members(&self) -> Vec<usize> {
        (0..self.k()).filter(|&c| self.is_object(c)).collect()
    }

    pub fn class_of(&self, source_id: u32) -> Option<usize> {
        self.grouping.get(&source_id).copied()
    }

    pub fn grouping(&self) -> &BTreeMap<u32, usize> {
        &self.grouping
    }

    /// Human-readable multi-line description.
    pub fn summary(&self) -> String {
        let mut out = format!("classes K={}\n", self.k());
        for (i, name) in self.names.iter().enumerate() {
            let ids: Vec<String> = self
                .grouping
                .iter()
                .filter(|(_, &c)| c == i)
                .map(|(id, _)| id.to_string())
                .collect();
            out.push_str(&format!(
                "  [{i:2}] {name:<14} object={} source_ids={}\n",
                if self.is_object(i) { "yes" } else { "no " },
                ids.join(",")
            ));
        }
        out
    }
}

pub fn build_schema(preset: &SchemaPreset) -> Result<ClassSchema> {
    match preset {
        SchemaPreset::Fine19 => {
            let objects = [5, 6, 7, 11, 12, 13, 14, 15, 16, 17, 18];
            Ok(ClassSchema {
                names: FINE19_NAMES.iter().map(|s| s.to_string()).collect(),
                object_members: objects.iter().fold(0, |m, &c| m | 1 << c),
                grouping: (0..19u32).map(|id| (id, id as usize)).collect(),
            })
        }
        SchemaPreset::Grouped7 => {
            let objects = [2, 3, 5]; // human, vehicle, object
            Ok(ClassSchema {
                names: GROUPED7_NAMES.iter().map(|s| s.to_string()).collect(),
                object_members: objects.iter().fold(0, |m, &c| m | 1 << c),
                grouping: (0..19u32)
                    .map(|id| (id, GROUPED7_OF_FINE[id as usize]))
                    .collect(),
            })
        }
        SchemaPreset::Custom(table) => {
            let k = table.names.len();
            if k == 0 || k > MAX_CLASSES {
                return Err(Error::Schema(format!(
                    "custom schema needs 1..={MAX_CLASSES} classes, got {k}"
                )));
            }
            let mut grouping = BTreeMap::new();
            for &(id, target) in &table.mapping {
                if id == VOID_ID {
                    return Err(Error::Schema(format!(
                        "source id {VOID_ID} is reserved for void"
                    )));
                }
                if target >= k {
                    return Err(Error::Schema(format!(
                        "source id {id} maps to class {target}, beyond K-1 = {}",
                        k - 1
                    )));
                }
                if let Some(prev) = grouping.insert(id, target) {
                    if prev != target {
                        return Err(Error::Schema(format!(
                            "source id {id} mapped to both {prev} and {target}"
                        )));
                    }
                }
            }
            let mut object_members = 0u32;
            for &c in &table.object_members {
                if c >= k {
                    return Err(Error::Schema(format!("object member {c} beyond K-1")));
                }
                object_members |= 1 << c;
            }
            Ok(ClassSchema {
                names: table.names.clone(),
                object_members,
                grouping,
            })
        }
    }
}

/// Multi-hot per-pixel training labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    k: usize,
    bits: Grid<u32>,
}

impl LabelMap {
    pub fn new(k: usize, bits: Grid<u32>) -> Result<Self> {
        if k == 0 || k > MAX_CLASSES {
            return Err(Error::Schema(format!(
                "K must be 1..={MAX_CLASSES}, got {k}"
            )));
        }
        let allowed = class_bits(k) | OBJECT_BIT | IGNORE_BIT;
        for (i, &b) in bits.as_slice().iter().enumerate() {
            if b & !allowed != 0 {
                return Err(Error::Validation(format!(
                    "pixel {i}: bits {b:#x} outside the K={k} layout"
                )));
            }
            if b & IGNORE_BIT != 0 && b != IGNORE_BIT {
                return Err(Error::Validation(format!(
                    "pixel {i}: ignore pixel carries other bits ({b:#x})"
                )));
            }
        }
        Ok(LabelMap { k, bits })
    }

    pub fn from_tensor(t: &Tensor, k: usize) -> Result<Self> {
        match t.data() {
            TensorData::Uint32(_) => LabelMap::new(k, Grid::from_id_tensor(t)?),
            _ => Err(Error::Format("label map must be a uint32 tensor".into())),
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        self.bits.to_tensor()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bits(&self) -> &Grid<u32> {
        &self.bits
    }

    pub fn shape(&self) -> (usize, usize) {
        self.bits.shape()
    }

    #[inline]
    pub fn is_ignored(&self, index: usize) -> bool {
        self.bits.as_slice()[index] & IGNORE_BIT != 0
    }

    /// Target for `channel` of pixel `index`: predefined class bit for
    /// `channel < K`, the object bit for `channel == K`.
    #[inline]
    pub fn target(&self, index: usize, channel: usize) -> bool {
        let b = self.bits.as_slice()[index];
        if channel == self.k {
            b & OBJECT_BIT != 0
        } else {
            b & (1 << channel) != 0
        }
    }
}

fn class_bits(k: usize) -> u32 {
    if k >= 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

/// Maps source ids to schema bits. Void pixels get the ignore bit only.
pub fn remap_labels(semantic_ids: &Grid<u32>, schema: &ClassSchema) -> Result<LabelMap> {
    let mut out = Vec::with_capacity(semantic_ids.len());
    for (i, &id) in semantic_ids.as_slice().iter().enumerate() {
        if id == VOID_ID {
            out.push(IGNORE_BIT);
            continue;
        }
        let class = schema.class_of(id).ok_or_else(|| {
            Error::Schema(format!(
                "source id {id} at pixel {i} is not covered by the schema"
            ))
        })?;
        let mut bits = 1 << class;
        if schema.is_object(class) {
            bits |= OBJECT_BIT;
        }
        out.push(bits);
    }
    LabelMap::new(
        schema.k(),
        Grid::from_vec(semantic_ids.height(), semantic_ids.width(), out)?,
    )
}

/// Relabels flagged pixels as object-only.
pub fn assign_ood_labels(labels: &LabelMap, ood_mask: &Mask) -> Result<LabelMap> {
    labels
        .bits
        .ensure_same_shape(ood_mask, "ood mask vs labels")?;
    let mut bits = labels.bits.clone();
    for (b, &ood) in bits.as_mut_slice().iter_mut().zip(ood_mask.as_slice()) {
        if ood {
            *b = OBJECT_BIT;
        }
    }
    Ok(LabelMap { k: labels.k, bits })
}

/// Per-pixel boundary indicator.
pub type BoundaryMask = Mask;

/// Marks pixels within Chebyshev distance `radius` of a label transition.
///
/// A pixel is a transition pixel when any 4-neighbour carries a different
/// label bitmask.
pub fn boundary_mask(labels: &LabelMap, radius: usize) -> BoundaryMask {
    let (h, w) = labels.shape();
    let bits = labels.bits.as_slice();
    let mut transition = vec![false; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w && bits[i] != bits[i + 1] {
                transition[i] = true;
                transition[i + 1] = true;
            }
            if r + 1 < h && bits[i] != bits[i + w] {
                transition[i] = true;
                transition[i + w] = true;
            }
        }
    }
    let dilated = dilate_chebyshev(&transition, h, w, radius);
    Grid::from_vec(h, w, dilated).expect("shape preserved")
}

/// Square-window binary dilation, separable into a row pass and a column pass
/// using running counts.
fn dilate_chebyshev(src: &[bool], h: usize, w: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return src.to_vec();
    }
    let mut rows = vec![false; h * w];
    for r in 0..h {
        dilate_line(
            &src[r * w..(r + 1) * w],
            &mut rows[r * w..(r + 1) * w],
            radius,
        );
    }
    let mut out = vec![false; h * w];
    let mut col_in = vec![false; h];
    let mut col_out = vec![false; h];
    for c in 0..w {
        for r in 0..h {
            col_in[r] = rows[r * w + c];
        }
        dilate_line(&col_in, &mut col_out, radius);
        for r in 0..h {
            out[r * w + c] = col_out[r];
        }
    }
    out
}

fn dilate_line(src: &[bool], dst: &mut [bool], radius: usize) {
    let n = src.len();
    // prefix[i] = number of set entries in src[..i]
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &b in src {
        prefix.push(prefix.last().unwrap() + b as usize);
    }
    for (i, d) in dst.iter_mut().enumerate() {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(n);
        *d = prefix[hi] > prefix[lo];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GtState {
    Obstacle,
    NotObstacle,
    Excluded,
}

impl GtState {
    pub fn code(self) -> u8 {
        match self {
            GtState::NotObstacle => 0,
            GtState::Obstacle => 1,
            GtState::Excluded => 255,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(GtState::NotObstacle),
            1 => Ok(GtState::Obstacle),
            255 => Ok(GtState::Excluded),
            other => Err(Error::Format(format!("invalid ground-truth code {other}"))),
        }
    }
}

/// Evaluation ground truth after ROI masking. Stored as a uint8 tensor with
/// 0 = not obstacle, 1 = obstacle, 255 = excluded.
pub type EvalGt = Grid<GtState>;

pub fn make_eval_gt(obstacle_mask: &Mask, roi_mask: &Mask) -> Result<EvalGt> {
    obstacle_mask.ensure_same_shape(roi_mask, "obstacle mask vs roi mask")?;
    let states = obstacle_mask
        .as_slice()
        .iter()
        .zip(roi_mask.as_slice())
        .map(|(&obstacle, &roi)| match (roi, obstacle) {
            (false, _) => GtState::Excluded,
            (true, true) => GtState::Obstacle,
            (true, false) => GtState::NotObstacle,
        })
        .collect();
    Grid::from_vec(obstacle_mask.height(), obstacle_mask.width(), states)
}

pub fn eval_gt_to_tensor(gt: &EvalGt) -> Tensor {
    let data = gt.as_slice().iter().map(|s| s.code()).collect();
    Tensor::new(vec![gt.height(), gt.width()], TensorData::Uint8(data))
        .expect("grid dims are valid tensor dims")
}

pub fn eval_gt_from_tensor(t: &Tensor) -> Result<EvalGt> {
    let [h, w] = t.dims() else {
        return Err(Error::Shape(format!(
            "ground truth must be 2-D, got {:?}",
            t.dims()
        )));
    };
    let TensorData::Uint8(codes) = t.data() else {
        return Err(Error::Format("ground truth must be a uint8 tensor".into()));
    };
    let states = codes
        .iter()
        .map(|&c| GtState::from_code(c))
        .collect::<Result<_>>()?;
    Grid::from_vec(*h, *w, states)
}
