//! Procedural driving scenes.
//!
//! A scene is sky and buildings above a horizon, a road trapezoid with
//! sidewalks below it, and in-distribution objects (cars, people, poles with
//! signs) drawn as rectangles and ellipses. Two kinds of out-of-distribution
//! content land on the road surface, both labelled void:
//!
//! * obstacles: textured triangles and crosses in unseen colours,
//! * stains: smooth flat patches in unseen colours. They belong to the road
//!   surface for evaluation, so they are hard negatives for any score that
//!   only measures "no known class".
//!
//! Every output is a pure function of `(config, index)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::labels::VOID_ID;

pub const ROAD: u32 = 0;
pub const SIDEWALK: u32 = 1;
pub const BUILDING: u32 = 2;
pub const WALL: u32 = 3;
pub const POLE: u32 = 5;
pub const TRAFFIC_SIGN: u32 = 7;
pub const VEGETATION: u32 = 8;
pub const TERRAIN: u32 = 9;
pub const SKY: u32 = 10;
pub const PERSON: u32 = 11;
pub const CAR: u32 = 13;
pub const TRUCK: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rectangle,
    Ellipse,
    Triangle,
    Cross,
}

/// Base colour and per-pixel texture amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStyle {
    pub color: [f32; 3],
    pub texture: f32,
}

const fn style(r: f32, g: f32, b: f32, texture: f32) -> ClassStyle {
    ClassStyle {
        color: [r, g, b],
        texture,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    /// Style per fine class id (index = id, 19 entries).
    pub styles: Vec<ClassStyle>,
    pub obstacle_colors: Vec<[f32; 3]>,
    pub obstacle_texture: f32,
    pub stain_colors: Vec<[f32; 3]>,
    pub stain_texture: f32,
    /// Shapes used for in-distribution objects.
    pub object_shapes: Vec<Shape>,
    /// Shapes used for obstacles; disjoint from `object_shapes`.
    pub obstacle_shapes: Vec<Shape>,
    /// Expected obstacles per image (Poisson mean).
    pub obstacle_density: f64,
    /// Expected stains per image (Poisson mean).
    pub stain_density: f64,
    /// Standard deviation of sensor noise added to every pixel.
    pub noise: f32,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let mut styles = vec![style(0.5, 0.5, 0.5, 0.03); 19];
        styles[ROAD as usize] = style(0.33, 0.33, 0.35, 0.02);
        styles[SIDEWALK as usize] = style(0.62, 0.58, 0.55, 0.03);
        styles[BUILDING as usize] = style(0.55, 0.42, 0.30, 0.04);
        styles[WALL as usize] = style(0.50, 0.47, 0.40, 0.04);
        styles[4] = style(0.45, 0.40, 0.35, 0.05);
        styles[POLE as usize] = style(0.85, 0.80, 0.20, 0.10);
        styles[6] = style(0.85, 0.75, 0.15, 0.10);
        styles[TRAFFIC_SIGN as usize] = style(0.90, 0.82, 0.10, 0.10);
        styles[VEGETATION as usize] = style(0.20, 0.50, 0.15, 0.06);
        styles[TERRAIN as usize] = style(0.45, 0.55, 0.25, 0.04);
        styles[SKY as usize] = style(0.45, 0.65, 0.90, 0.01);
        styles[PERSON as usize] = style(0.85, 0.25, 0.30, 0.12);
        styles[12] = style(0.80, 0.30, 0.35, 0.12);
        styles[CAR as usize..].fill(style(0.15, 0.25, 0.70, 0.12));
        styles[TRUCK as usize] = style(0.20, 0.20, 0.60, 0.12);
        SceneConfig {
            height: 128,
            width: 128,
            styles,
            obstacle_colors: vec![
                [0.95, 0.55, 0.10],
                [0.80, 0.15, 0.75],
                [0.10, 0.80, 0.80],
                [0.55, 0.95, 0.20],
            ],
            obstacle_texture: 0.12,
            stain_colors: vec![[0.08, 0.07, 0.07], [0.42, 0.22, 0.48], [0.08, 0.36, 0.30]],
            stain_texture: 0.01,
            object_shapes: vec![Shape::Rectangle, Shape::Ellipse],
            obstacle_shapes: vec![Shape::Triangle, Shape::Cross],
            obstacle_density: 2.0,
            stain_density: 1.5,
            noise: 0.01,
            seed: 7,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height < 16 || self.width < 16 {
            return Err(Error::Config(format!(
                "scenes must be at least 16x16, got {}x{}",
                self.height, self.width
            )));
        }
        if self.styles.len() != 19 {
            return Err(Error::Config(
                "one style per fine class id is required".into(),
            ));
        }
        if self
            .obstacle_shapes
            .iter()
            .any(|s| self.object_shapes.contains(s))
        {
            return Err(Error::Config(
                "obstacle shapes must not be used for in-distribution objects".into(),
            ));
        }
        if self.obstacle_shapes.is_empty() || self.obstacle_colors.is_empty() {
            return Err(Error::Config(
                "obstacles need at least one shape and colour".into(),
            ));
        }
        if self.stain_colors.is_empty() {
            return Err(Error::Config("stains need at least one colour".into()));
        }
        if !(self.obstacle_density >= 0.0 && self.stain_density >= 0.0) {
            return Err(Error::Config("densities must be >= 0".into()));
        }
        if self.noise.is_nan() || self.noise < 0.0 {
            return Err(Error::Config("noise must be >= 0".into()));
        }
        Ok(())
    }
}

/// `height × width × 3` RGB image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Image,
    /// Fine class ids; [`VOID_ID`] for obstacles and stains.
    pub semantic_ids: Grid<u32>,
    pub obstacle_mask: Mask,
    /// Road surface (including stains) plus obstacles.
    pub roi_mask: Mask,
}

struct Canvas {
    ids: Vec<u32>,
    /// Style per pixel: `None` = use the class style.
    paint: Vec<Option<([f32; 3], f32)>>,
    /// Instance id per pixel, used to give each instance its own tint.
    instance: Vec<u32>,
    next_instance: u32,
}

impl Canvas {
    fn new(h: usize, w: usize) -> Self {
        Canvas {
            ids: vec![SKY; h * w],
            paint: vec![None; h * w],
            instance: vec![0; h * w],
            next_instance: 1,
        }
    }

    fn new_instance(&mut self) -> u32 {
        self.next_instance += 1;
        self.next_instance - 1
    }
}

/// Whether `(r, c)` lies inside `shape` centred at `(cr, cc)` with half
/// extents `(hr, hc)`.
fn inside(shape: Shape, r: f64, c: f64, cr: f64, cc: f64, hr: f64, hc: f64) -> bool {
    let dy = (r - cr) / hr;
    let dx = (c - cc) / hc;
    match shape {
        Shape::Rectangle => dy.abs() <= 1.0 && dx.abs() <= 1.0,
        Shape::Ellipse => dx * dx + dy * dy <= 1.0,
        // apex on top, base at the bottom
        Shape::Triangle => (-1.0..=1.0).contains(&dy) && dx.abs() <= (dy + 1.0) / 2.0,
        Shape::Cross => {
            (dy.abs() <= 1.0 && dx.abs() <= 0.3) || (dx.abs() <= 1.0 && dy.abs() <= 0.3)
        }
    }
}

fn shape_pixels(
    shape: Shape,
    h: usize,
    w: usize,
    cr: f64,
    cc: f64,
    hr: f64,
    hc: f64,
) -> impl Iterator<Item = usize> {
    let r0 = (cr - hr).floor().max(0.0) as usize;
    let r1 = ((cr + hr).ceil().max(0.0) as usize).min(h - 1);
    let c0 = (cc - hc).floor().max(0.0) as usize;
    let c1 = ((cc + hc).ceil().max(0.0) as usize).min(w - 1);
    (r0..=r1).flat_map(move |r| {
        (c0..=c1).filter_map(move |c| {
            inside(shape, r as f64 + 0.5, c as f64 + 0.5, cr, cc, hr, hc).then_some(r * w + c)
        })
    })
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

/// Renders scene `index`.
pub fn generate_scene(cfg: &SceneConfig, index: u64) -> Result<Scene> {
    cfg.validate()?;
    let (h, w) = (cfg.height, cfg.width);
    let (hf, wf) = (h as f64, w as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let mut cv = Canvas::new(h, w);

    // layout
    let horizon = (hf * rng.random_range(0.36..0.46)) as usize;
    let top_center = wf * rng.random_range(0.40..0.60);
    let bottom_center = wf * rng.random_range(0.35..0.65);
    let top_half = wf * rng.random_range(0.03..0.06);
    let bottom_half = wf * rng.random_range(0.38..0.50);
    let road_geometry = |r: usize| {
        let t = (r as f64 + 0.5 - horizon as f64) / (hf - horizon as f64);
        (
            top_center + t * (bottom_center - top_center),
            top_half + t * (bottom_half - top_half),
            t,
        )
    };

    // buildings and vegetation above the horizon
    let mut c = 0.0;
    while c < wf {
        let bw = wf * rng.random_range(0.08..0.22);
        let top = horizon as f64 - hf * rng.random_range(0.05..0.30);
        let id = match rng.random_range(0..10) {
            0..=5 => BUILDING,
            6..=7 => WALL,
            _ => VEGETATION,
        };
        let inst = cv.new_instance();
        for r in top.max(0.0) as usize..horizon {
            for col in c as usize..((c + bw) as usize).min(w) {
                cv.ids[r * w + col] = id;
                cv.instance[r * w + col] = inst;
            }
        }
        c += bw + wf * rng.random_range(0.0..0.08);
    }

    // ground: terrain, sidewalks, road
    let mut surface = vec![false; h * w];
    for r in horizon..h {
        let (center, half, _) = road_geometry(r);
        let walk = half * 1.25 + 2.0;
        for col in 0..w {
            let d = (col as f64 + 0.5 - center).abs();
            let i = r * w + col;
            cv.ids[i] = if d <= half {
                surface[i] = true;
                ROAD
            } else if d <= walk {
                SIDEWALK
            } else {
                TERRAIN
            };
        }
    }

    // vegetation strips along the horizon
    for _ in 0..rng.random_range(1..4) {
        let cc = wf * rng.random_range(0.0..1.0);
        let hr = hf * rng.random_range(0.03..0.08);
        let hc = wf * rng.random_range(0.05..0.15);
        let inst = cv.new_instance();
        for i in shape_pixels(Shape::Ellipse, h, w, horizon as f64, cc, hr, hc) {
            if !surface[i] {
                cv.ids[i] = VEGETATION;
                cv.instance[i] = inst;
            }
        }
    }

    let object_shape = |rng: &mut ChaCha8Rng, preferred: Shape| {
        if cfg.object_shapes.contains(&preferred) {
            preferred
        } else {
            cfg.object_shapes[rng.random_range(0..cfg.object_shapes.len())]
        }
    };

    // cars on the road or its edge
    for _ in 0..poisson(&mut rng, 1.5) {
        let r = rng.random_range(horizon + 4..h) as f64;
        let (center, half, t) = road_geometry(r as usize);
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let cc = center + side * half * rng.random_range(0.45..1.05);
        let hr = 2.0 + 10.0 * t;
        let hc = hr * rng.random_range(1.2..1.8);
        let id = if rng.random_bool(0.75) { CAR } else { TRUCK };
        let shape = object_shape(&mut rng, Shape::Rectangle);
        let inst = cv.new_instance();
        for i in shape_pixels(shape, h, w, r - hr, cc, hr, hc) {
            cv.ids[i] = id;
            cv.instance[i] = inst;
            surface[i] = false;
        }
    }

    // people and poles on the sidewalks
    for _ in 0..poisson(&mut rng, 1.5) {
        let r = rng.random_range(horizon + 2..h) as f64;
        let (center, half, t) = road_geometry(r as usize);
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let cc = center + side * (half * 1.12 + 1.0);
        let inst = cv.new_instance();
        if rng.random_bool(0.6) {
            let hr = 2.0 + 8.0 * t;
            let hc = hr * 0.35;
            let shape = object_shape(&mut rng, Shape::Ellipse);
            for i in shape_pixels(shape, h, w, r - hr, cc, hr, hc) {
                cv.ids[i] = PERSON;
                cv.instance[i] = inst;
                surface[i] = false;
            }
        } else {
            let hr = 4.0 + 14.0 * t;
            let hc = 0.6 + 0.8 * t;
            for i in shape_pixels(Shape::Rectangle, h, w, r - hr, cc, hr, hc) {
                cv.ids[i] = POLE;
                cv.instance[i] = inst;
                surface[i] = false;
            }
            let sr = 1.5 + 3.0 * t;
            let shape = object_shape(&mut rng, Shape::Ellipse);
            let sign = cv.new_instance();
            for i in shape_pixels(shape, h, w, r - 2.0 * hr, cc, sr, sr) {
                cv.ids[i] = TRAFFIC_SIGN;
                cv.instance[i] = sign;
                surface[i] = false;
            }
        }
    }

    let surface_rows: Vec<usize> = (horizon + 3..h)
        .filter(|&r| (0..w).any(|c| surface[r * w + c]))
        .collect();
    let pick_surface_point = |rng: &mut ChaCha8Rng, surface: &[bool]| -> Option<(usize, usize)> {
        for _ in 0..32 {
            let r = surface_rows[rng.random_range(0..surface_rows.len())];
            let c = rng.random_range(0..w);
            if surface[r * w + c] {
                return Some((r, c));
            }
        }
        None
    };

    // stains: flat unseen-colour patches on the road surface
    if !surface_rows.is_empty() {
        for _ in 0..poisson(&mut rng, cfg.stain_density) {
            let Some((r, cc)) = pick_surface_point(&mut rng, &surface) else {
                continue;
            };
            let (_, _, t) = road_geometry(r);
            let hc = 3.0 + 12.0 * t * rng.random_range(0.6..1.2);
            let hr = hc * rng.random_range(0.3..0.5);
            let color = cfg.stain_colors[rng.random_range(0..cfg.stain_colors.len())];
            let inst = cv.new_instance();
            for i in shape_pixels(Shape::Ellipse, h, w, r as f64, cc as f64, hr, hc) {
                if surface[i] {
                    cv.ids[i] = VOID_ID;
                    cv.paint[i] = Some((color, cfg.stain_texture));
                    cv.instance[i] = inst;
                }
            }
        }
    }

    // obstacles: only on road-surface pixels
    let mut obstacle = vec![false; h * w];
    if !surface_rows.is_empty() {
        for _ in 0..poisson(&mut rng, cfg.obstacle_density) {
            let Some((r, cc)) = pick_surface_point(&mut rng, &surface) else {
                continue;
            };
            let (_, _, t) = road_geometry(r);
            let size = 3.0 + 7.0 * t * rng.random_range(0.7..1.3);
            let shape = cfg.obstacle_shapes[rng.random_range(0..cfg.obstacle_shapes.len())];
            let color = cfg.obstacle_colors[rng.random_range(0..cfg.obstacle_colors.len())];
            let inst = cv.new_instance();
            for i in shape_pixels(shape, h, w, r as f64 - size, cc as f64, size, size) {
                if surface[i] {
                    cv.ids[i] = VOID_ID;
                    cv.paint[i] = Some((color, cfg.obstacle_texture));
                    cv.instance[i] = inst;
                    obstacle[i] = true;
                }
            }
        }
    }

    // rendering
    let brightness: f32 = rng.random_range(0.92..1.08);
    let tints: Vec<[f32; 3]> = (0..cv.next_instance)
        .map(|_| {
            [
                rng.random_range(-0.04..0.04),
                rng.random_range(-0.04..0.04),
                rng.random_range(-0.04..0.04),
            ]
        })
        .collect();
    let unit = Normal::new(0.0f32, 1.0).expect("valid normal");
    let mut data = Vec::with_capacity(h * w * 3);
    for i in 0..h * w {
        let (color, texture) = match cv.paint[i] {
            Some(painted) => painted,
            None => {
                let s = cfg.styles[cv.ids[i] as usize];
                (s.color, s.texture)
            }
        };
        let tint = tints[cv.instance[i] as usize];
        let grain = texture * unit.sample(&mut rng);
        for ch in 0..3 {
            let sensor = cfg.noise * unit.sample(&mut rng);
            let v = (color[ch] + tint[ch]) * brightness + grain + sensor;
            data.push(v.clamp(0.0, 1.0));
        }
    }

    let roi: Vec<bool> = surface
        .iter()
        .zip(&obstacle)
        .map(|(&s, &o)| s || o)
        .collect();
    Ok(Scene {
        image: Image {
            height: h,
            width: w,
            data,
        },
        semantic_ids: Grid::from_vec(h, w, cv.ids)?,
        obstacle_mask: Grid::from_vec(h, w, obstacle)?,
        roi_mask: Grid::from_vec(h, w, roi)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let cfg = SceneConfig::default();
        assert_eq!(
            generate_scene(&cfg, 3).unwrap(),
            generate_scene(&cfg, 3).unwrap()
        );
        assert_ne!(
            generate_scene(&cfg, 3).unwrap().image,
            generate_scene(&cfg, 4).unwrap().image
        );
    }

    #[test]
    fn zero_density_has_no_obstacles() {
        let cfg = SceneConfig {
            obstacle_density: 0.0,
            ..SceneConfig::default()
        };
        for i in 0..20 {
            assert_eq!(generate_scene(&cfg, i).unwrap().obstacle_mask.count(), 0);
        }
    }

    #[test]
    fn obstacles_are_void_and_in_roi() {
        let cfg = SceneConfig::default();
        let mut seen = 0;
        for i in 0..50 {
            let s = generate_scene(&cfg, i).unwrap();
            for p in 0..s.obstacle_mask.len() {
                if s.obstacle_mask.as_slice()[p] {
                    seen += 1;
                    assert_eq!(s.semantic_ids.as_slice()[p], VOID_ID);
                    assert!(s.roi_mask.as_slice()[p]);
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn image_range() {
        let s = generate_scene(&SceneConfig::default(), 0).unwrap();
        assert_eq!(s.image.data.len(), 128 * 128 * 3);
        assert!(s.image.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn shared_shapes_rejected() {
        let cfg = SceneConfig {
            obstacle_shapes: vec![Shape::Ellipse],
            ..SceneConfig::default()
        };
        assert!(matches!(generate_scene(&cfg, 0), Err(Error::Config(_))));
    }
}
