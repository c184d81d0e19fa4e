//! Floorplan scenes, object lists and the on-disk scene format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Point, Rect};

pub const SCENE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomType {
    Kitchen,
    #[serde(alias = "living room", alias = "livingroom")]
    LivingRoom,
    Bedroom,
    Bathroom,
}

impl RoomType {
    pub const ALL: [RoomType; 4] = [
        RoomType::Kitchen,
        RoomType::LivingRoom,
        RoomType::Bedroom,
        RoomType::Bathroom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RoomType::Kitchen => "kitchen",
            RoomType::LivingRoom => "living_room",
            RoomType::Bedroom => "bedroom",
            RoomType::Bathroom => "bathroom",
        }
    }

    /// Column header used in success tables.
    pub fn short_label(&self) -> &'static str {
        match self {
            RoomType::Kitchen => "Kit.",
            RoomType::LivingRoom => "Living.",
            RoomType::Bedroom => "Bed.",
            RoomType::Bathroom => "Bath.",
        }
    }
}

impl fmt::Display for RoomType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoomType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize_name(s).as_str() {
            "kitchen" => Ok(RoomType::Kitchen),
            "living room" | "livingroom" => Ok(RoomType::LivingRoom),
            "bedroom" => Ok(RoomType::Bedroom),
            "bathroom" => Ok(RoomType::Bathroom),
            other => Err(Error::validation("room_type", format!("unknown room type {other:?}"))),
        }
    }
}

/// Lowercases, maps underscores to spaces, trims and collapses whitespace.
pub fn normalize_name(raw: &str) -> String {
    raw.replace('_', " ")
        .split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub class_name: String,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub room_type: RoomType,
    pub bounds: Rect,
    pub obstacles: Vec<Rect>,
    pub objects: Vec<ObjectInstance>,
    pub format_version: u32,
}

impl Scene {
    /// Checks every scene invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        if !(b.width() > 0.0 && b.height() > 0.0) || !b.width().is_finite() || !b.height().is_finite()
        {
            return Err(Error::validation("bounds", "bounds must have positive width and height"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.x_min <= o.x_max && o.y_min <= o.y_max) {
                return Err(Error::validation(format!("obstacles[{i}]"), "inverted rectangle"));
            }
            if !b.contains_rect(o) {
                return Err(Error::validation(format!("obstacles[{i}]"), "obstacle outside bounds"));
            }
        }
        for (i, obj) in self.objects.iter().enumerate() {
            if obj.class_name.is_empty() {
                return Err(Error::validation(format!("objects[{i}].class"), "empty class name"));
            }
            if obj.class_name != normalize_name(&obj.class_name) {
                return Err(Error::validation(format!("objects[{i}].class"), "class name not normalized"));
            }
            if !b.contains(&obj.position) {
                return Err(Error::validation(format!("objects[{i}]"), "object outside bounds"));
            }
            if let Some(j) = self.obstacles.iter().position(|o| o.strictly_contains(&obj.position)) {
                return Err(Error::validation(
                    format!("objects[{i}]"),
                    format!("object inside obstacle {j}"),
                ));
            }
        }
        Ok(())
    }

    /// True when `p` is inside bounds and not strictly inside any obstacle.
    ///
    /// Obstacle edges flush with the room boundary are treated as running
    /// through the wall, so the strip between such an edge and the wall is
    /// blocked as well.
    pub fn is_achievable(&self, p: &Point) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| self.wall_extended(o).strictly_contains(p))
    }

    fn wall_extended(&self, o: &Rect) -> Rect {
        let b = &self.bounds;
        let eps = 1e-9;
        let mut r = *o;
        if (o.x_min - b.x_min).abs() <= eps {
            r.x_min -= 1.0;
        }
        if (o.y_min - b.y_min).abs() <= eps {
            r.y_min -= 1.0;
        }
        if (b.x_max - o.x_max).abs() <= eps {
            r.x_max += 1.0;
        }
        if (b.y_max - o.y_max).abs() <= eps {
            r.y_max += 1.0;
        }
        r
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::parse("scene", e))?;
        let scene = Scene::from(file);
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&SceneFile::from(self)).expect("scene serializes");
        s.push('\n');
        s
    }
}

/// Wire layout of a scene document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub id: String,
    pub room_type: RoomType,
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub bounds: Rect,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    #[serde(default)]
    pub objects: Vec<ObjectRecord>,
}

fn default_version() -> u32 {
    SCENE_FORMAT_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectRecord {
    #[serde(rename = "class")]
    pub class_name: String,
    pub x: f64,
    pub y: f64,
}

impl From<SceneFile> for Scene {
    fn from(f: SceneFile) -> Self {
        Scene {
            id: f.id,
            room_type: f.room_type,
            bounds: f.bounds,
            obstacles: f.obstacles,
            objects: f
                .objects
                .into_iter()
                .map(|o| ObjectInstance {
                    class_name: normalize_name(&o.class_name),
                    position: Point::new(o.x, o.y),
                })
                .collect(),
            format_version: f.format_version,
        }
    }
}

impl From<&Scene> for SceneFile {
    fn from(s: &Scene) -> Self {
        SceneFile {
            id: s.id.clone(),
            room_type: s.room_type,
            format_version: s.format_version,
            bounds: s.bounds,
            obstacles: s.obstacles.clone(),
            objects: s
                .objects
                .iter()
                .map(|o| ObjectRecord {
                    class_name: o.class_name.clone(),
                    x: o.position.x,
                    y: o.position.y,
                })
                .collect(),
        }
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scene::from_json_str(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
        other => other,
    })
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scene.to_json_string()).map_err(|e| Error::io(path, e))
}

/// Loads every `*.json` scene in a directory, sorted by file name.
/// Writes each scene to `<dir>/<id>.json`, creating `dir`.
pub fn save_scene_dir(scenes: &[Scene], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    scenes
        .iter()
        .map(|s| {
            let path = dir.join(format!("{}.json", file_stem(&s.id)));
            save_scene(s, &path).map(|_| path)
        })
        .collect()
}

/// File-system safe form of a scene id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.~".contains(c) { c } else { '_' })
        .collect()
}

pub fn load_scene_dir(dir: impl AsRef<Path>) -> Result<Vec<Scene>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(load_scene).collect()
}

/// Sorted, duplicate-free list of normalized class names.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectList(Vec<String>);

impl ObjectList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v: Vec<String> = names
            .into_iter()
            .map(|n| normalize_name(n.as_ref()))
            .filter(|n| !n.is_empty())
            .collect();
        v.sort();
        v.dedup();
        ObjectList(v)
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.binary_search_by(|n| n.as_str().cmp(name)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn union(&self, other: &ObjectList) -> ObjectList {
        ObjectList::from_names(self.iter().chain(other.iter()))
    }

    /// Bracketed, comma-separated rendering used in prompts: `[cup, tv]`.
    pub fn render(&self) -> String {
        format!("[{}]", self.0.join(", "))
    }
}

impl<'a> IntoIterator for &'a ObjectList {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub fn ground_truth_object_list(scene: &Scene) -> ObjectList {
    ObjectList::from_names(scene.objects.iter().map(|o| o.class_name.as_str()))
}

/// All lattice points `(x_min + i·G, y_min + j·G)` that are achievable
/// (see [`Scene::is_achievable`]), in row-major order (y outer, x inner).
pub fn achievable_grid_points(scene: &Scene, grid_side: f64) -> Vec<Point> {
    if !(grid_side > 0.0) {
        return Vec::new();
    }
    let b = &scene.bounds;
    let nx = lattice_count(b.width(), grid_side);
    let ny = lattice_count(b.height(), grid_side);
    let mut out = Vec::new();
    for j in 0..ny {
        let y = b.y_min + j as f64 * grid_side;
        for i in 0..nx {
            let p = Point::new(b.x_min + i as f64 * grid_side, y);
            if scene.is_achievable(&p) {
                out.push(p);
            }
        }
    }
    out
}

fn lattice_count(extent: f64, step: f64) -> usize {
    ((extent / step) + 1e-9).floor() as usize + 1
}
