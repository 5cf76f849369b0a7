use uos_core::grid::{Grid, Mask};
use uos_core::labels::{assign_ood_labels, boundary_mask, remap_labels, VOID_ID};
use uos_core::Result;

use super::{read, schema, write, SCHEMA_KEY};
use crate::settings::{path, switch, value, Key, Settings};

pub const ABOUT: &str = "Build multi-hot label maps and boundary masks from semantic ids";

pub const KEYS: &[Key] = &[
    path("ids", "Semantic-id tensor (uint8 or uint32, H x W)"),
    path(
        "void-mask",
        "Optional uint8 mask; nonzero pixels become void",
    ),
    SCHEMA_KEY,
    switch(
        "ood-from-void",
        "Label void pixels as object-only instead of ignoring them",
    ),
    value(
        "boundary-radius",
        Some("2"),
        "Chebyshev dilation radius of the boundary region",
    ),
    path("out-labels", "Output label map (uint32)"),
    path("out-boundary", "Output boundary mask (uint8)"),
];

pub fn run(s: &Settings) -> Result<()> {
    let schema = schema(s)?;
    let mut ids = Grid::<u32>::from_id_tensor(&read(&s.path("ids")?)?)?;
    if let Some(p) = s.path_opt("void-mask") {
        let void = Mask::from_tensor(&read(&p)?)?;
        ids.ensure_same_shape(&void, "void mask vs ids")?;
        for (id, &v) in ids.as_mut_slice().iter_mut().zip(void.as_slice()) {
            if v {
                *id = VOID_ID;
            }
        }
    }
    let (out_labels, out_boundary) = (s.path("out-labels")?, s.path("out-boundary")?);
    let mut labels = remap_labels(&ids, &schema)?;
    let void = ids.map(|&id| id == VOID_ID);
    if s.flag("ood-from-void")? {
        labels = assign_ood_labels(&labels, &void)?;
    }
    let delta = boundary_mask(&labels, s.parse("boundary-radius")?);
    write(&labels.to_tensor(), &out_labels)?;
    write(&delta.to_tensor(), &out_boundary)?;
    print!("{}", schema.summary());
    println!(
        "pixels={} void={} boundary={} ood_from_void={}",
        ids.len(),
        void.count(),
        delta.count(),
        s.flag("ood-from-void")?
    );
    Ok(())
}
