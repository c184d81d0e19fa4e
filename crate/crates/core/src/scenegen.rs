//! Deterministic synthetic floorplans.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Catalog;
use crate::error::{Error, Result};
use crate::scene::{ObjectInstance, RoomType, Scene, SCENE_FORMAT_VERSION};
use crate::{Point, Rect};

/// Obstacle layouts tried before giving up on a connected free area.
pub const OBSTACLE_RETRY_BUDGET: usize = 100;
const PLACEMENT_TRIES: usize = 1000;
const CONNECTIVITY_CELL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span<T> {
    pub min: T,
    pub max: T,
}

impl<T: PartialOrd + Copy> Span<T> {
    pub fn new(min: T, max: T) -> Self {
        Self { min, max }
    }

    pub fn fixed(v: T) -> Self {
        Self { min: v, max: v }
    }

    fn is_valid(&self) -> bool {
        self.min <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGenSpec {
    pub room_type: RoomType,
    /// Room extent along x, meters.
    pub width: Span<f64>,
    /// Room extent along y, meters.
    pub depth: Span<f64>,
    pub obstacle_count: Span<usize>,
    /// Side length range of each obstacle, meters.
    pub obstacle_size: Span<f64>,
    pub object_count: Span<usize>,
    #[serde(skip, default = "Catalog::bundled")]
    pub catalog: Catalog,
}

impl SceneGenSpec {
    /// Default room proportions per type.
    pub fn for_room(room_type: RoomType, catalog: Catalog) -> Self {
        let (side, objects) = match room_type {
            RoomType::Kitchen => (Span::new(3.0, 6.0), Span::new(10, 18)),
            RoomType::LivingRoom => (Span::new(4.0, 8.0), Span::new(8, 16)),
            RoomType::Bedroom => (Span::new(3.5, 6.5), Span::new(8, 16)),
            RoomType::Bathroom => (Span::new(2.0, 4.0), Span::new(6, 12)),
        };
        SceneGenSpec {
            room_type,
            width: side,
            depth: side,
            obstacle_count: Span::new(1, 3),
            obstacle_size: Span::new(0.4, 1.2),
            object_count: objects,
            catalog,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(Error::validation(f, m));
        if !self.width.is_valid() || self.width.min <= 0.0 {
            return bad("width", "empty or non-positive range");
        }
        if !self.depth.is_valid() || self.depth.min <= 0.0 {
            return bad("depth", "empty or non-positive range");
        }
        if !self.obstacle_count.is_valid() {
            return bad("obstacle_count", "empty range");
        }
        if !self.obstacle_size.is_valid() || self.obstacle_size.min <= 0.0 {
            return bad("obstacle_size", "empty or non-positive range");
        }
        if !self.object_count.is_valid() {
            return bad("object_count", "empty range");
        }
        self.catalog.validate()
    }
}

fn sample_cm(rng: &mut ChaCha8Rng, span: Span<f64>) -> f64 {
    let lo = (span.min * 100.0).round() as i64;
    let hi = (span.max * 100.0).round() as i64;
    rng.random_range(lo..=hi) as f64 / 100.0
}

/// Generates a scene that satisfies every [`Scene`] invariant and whose
/// achievable area is 4-connected at 5 cm resolution.
pub fn generate_synthetic_scene(spec: &SceneGenSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = sample_cm(&mut rng, spec.width);
    let depth = sample_cm(&mut rng, spec.depth);
    let mut scene = Scene {
        id: format!("{}-{seed:016x}", spec.room_type),
        room_type: spec.room_type,
        bounds: Rect::new(0.0, 0.0, width, depth),
        obstacles: Vec::new(),
        objects: Vec::new(),
        format_version: SCENE_FORMAT_VERSION,
    };

    let mut connected = false;
    for _ in 0..OBSTACLE_RETRY_BUDGET {
        let n = rng.random_range(spec.obstacle_count.min..=spec.obstacle_count.max);
        scene.obstacles = (0..n)
            .map(|_| {
                let ow = sample_cm(&mut rng, spec.obstacle_size).min(width);
                let oh = sample_cm(&mut rng, spec.obstacle_size).min(depth);
                let x = sample_cm(&mut rng, Span::new(0.0, width - ow));
                let y = sample_cm(&mut rng, Span::new(0.0, depth - oh));
                Rect::new(x, y, x + ow, y + oh)
            })
            .collect();
        if free_area_connected(&scene) {
            connected = true;
            break;
        }
    }
    if !connected {
        return Err(Error::Generation {
            budget: OBSTACLE_RETRY_BUDGET,
            reason: "achievable area never connected".into(),
        });
    }

    let classes = spec.catalog.classes(spec.room_type);
    let n = rng.random_range(spec.object_count.min..=spec.object_count.max);
    for _ in 0..n {
        let class_name = classes[rng.random_range(0..classes.len())].clone();
        let position = (0..PLACEMENT_TRIES)
            .map(|_| {
                Point::new(
                    sample_cm(&mut rng, Span::new(0.0, width)),
                    sample_cm(&mut rng, Span::new(0.0, depth)),
                )
            })
            .find(|p| scene.is_achievable(p))
            .ok_or_else(|| Error::Generation {
                budget: PLACEMENT_TRIES,
                reason: "no free position for object".into(),
            })?;
        scene.objects.push(ObjectInstance {
            class_name,
            position,
        });
    }
    scene.validate()?;
    Ok(scene)
}

/// Rasterizes the achievable area and checks it forms one 4-connected
/// component.
pub fn free_area_connected(scene: &Scene) -> bool {
    let b = &scene.bounds;
    let nx = (b.width() / CONNECTIVITY_CELL).ceil().max(1.0) as usize;
    let ny = (b.height() / CONNECTIVITY_CELL).ceil().max(1.0) as usize;
    let cw = b.width() / nx as f64;
    let ch = b.height() / ny as f64;
    let free: Vec<bool> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| {
            let c = Point::new(b.x_min + (i as f64 + 0.5) * cw, b.y_min + (j as f64 + 0.5) * ch);
            scene.is_achievable(&c)
        })
        .collect();
    let total = free.iter().filter(|f| **f).count();
    let Some(start) = free.iter().position(|f| *f) else {
        return false;
    };
    let mut seen = vec![false; free.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut reached = 0;
    while let Some(idx) = queue.pop_front() {
        reached += 1;
        let (i, j) = (idx % nx, idx / nx);
        let mut visit = |ni: usize, nj: usize| {
            let n = nj * nx + ni;
            if free[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        };
        if i > 0 {
            visit(i - 1, j);
        }
        if i + 1 < nx {
            visit(i + 1, j);
        }
        if j > 0 {
            visit(i, j - 1);
        }
        if j + 1 < ny {
            visit(i, j + 1);
        }
    }
    reached == total
}
