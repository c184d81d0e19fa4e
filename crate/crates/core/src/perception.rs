//! Simulated open-vocabulary detection over collected views and
//! aggregation of the predicted object list.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::CameraPose;
use crate::num::angle_diff;
use crate::rng::{derive_seed, seeded};
use crate::scene::{normalize_name, ObjectList, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    /// Maximum detection distance, meters.
    pub range: f64,
    /// Horizontal field of view, radians.
    pub fov: f64,
    pub occlusion_enabled: bool,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            range: 2.0,
            fov: FRAC_PI_2,
            occlusion_enabled: true,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0) {
            return Err(Error::validation("camera.range", "must be positive"));
        }
        if !(self.fov > 0.0 && self.fov <= TAU + 1e-12) {
            return Err(Error::validation("camera.fov", "must be in (0, 2π]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Probability that a visible object is reported.
    pub true_positive_rate: f64,
    /// Expected spurious names per image (Poisson mean).
    pub false_positive_rate: f64,
    pub distractor_vocabulary: Vec<String>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            true_positive_rate: 0.95,
            false_positive_rate: 0.0,
            distractor_vocabulary: crate::data::bundled_distractors(),
        }
    }
}

impl DetectorConfig {
    pub fn noiseless() -> Self {
        DetectorConfig {
            true_positive_rate: 1.0,
            false_positive_rate: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.true_positive_rate) {
            return Err(Error::Detector("true_positive_rate outside [0, 1]".into()));
        }
        if !(self.false_positive_rate >= 0.0) || !self.false_positive_rate.is_finite() {
            return Err(Error::Detector("false_positive_rate must be non-negative".into()));
        }
        if self.false_positive_rate > 0.0 && self.distractor_vocabulary.is_empty() {
            return Err(Error::Detector(
                "false positives requested with an empty distractor vocabulary".into(),
            ));
        }
        Ok(())
    }
}

/// Names reported for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDetections {
    pub pose: CameraPose,
    pub names: Vec<String>,
}

/// Indices of objects inside the view cone and, with occlusion on, not
/// hidden behind an obstacle interior.
pub fn visible_objects(scene: &Scene, pose: &CameraPose, camera: &CameraConfig) -> Vec<usize> {
    let eye = pose.position();
    let half_fov = camera.fov / 2.0;
    let full_circle = camera.fov >= TAU - 1e-12;
    scene
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| {
            let d = eye.dist(&o.position);
            if d > camera.range {
                return false;
            }
            if d > 1e-12 && !full_circle {
                let bearing = (o.position.y - eye.y).atan2(o.position.x - eye.x);
                if angle_diff(bearing, pose.theta).abs() > half_fov + 1e-12 {
                    return false;
                }
            }
            !(camera.occlusion_enabled
                && scene
                    .obstacles
                    .iter()
                    .any(|r| r.segment_hits_interior(&eye, &o.position)))
        })
        .map(|(i, _)| i)
        .collect()
}

/// One simulated detector pass. `seed` is the per-view seed; use
/// [`detect_views`] to derive it from a run seed and pose index.
pub fn detect(
    scene: &Scene,
    pose: &CameraPose,
    camera: &CameraConfig,
    det: &DetectorConfig,
    seed: u64,
) -> Result<ViewDetections> {
    det.validate()?;
    let mut rng = seeded(seed);
    let mut names = Vec::new();
    for i in visible_objects(scene, pose, camera) {
        if rng.random_bool(det.true_positive_rate) {
            names.push(scene.objects[i].class_name.clone());
        }
    }
    if det.false_positive_rate > 0.0 {
        let poisson = Poisson::new(det.false_positive_rate)
            .map_err(|e| Error::Detector(e.to_string()))?;
        let count = poisson.sample(&mut rng) as usize;
        let vocab = &det.distractor_vocabulary;
        for _ in 0..count {
            names.push(normalize_name(&vocab[rng.random_range(0..vocab.len())]));
        }
    }
    Ok(ViewDetections { pose: *pose, names })
}

/// Detects every pose; view `i` uses `derive_seed(run_seed, i)`.
pub fn detect_views(
    scene: &Scene,
    poses: &[CameraPose],
    camera: &CameraConfig,
    det: &DetectorConfig,
    run_seed: u64,
) -> Result<Vec<ViewDetections>> {
    camera.validate()?;
    det.validate()?;
    if det.false_positive_rate > 0.0 {
        let present = crate::scene::ground_truth_object_list(scene);
        if let Some(clash) = det.distractor_vocabulary.iter().find(|d| present.contains(&normalize_name(d))) {
            return Err(Error::Detector(format!(
                "distractor {clash:?} is a class of scene {}",
                scene.id
            )));
        }
    }
    poses
        .iter()
        .enumerate()
        .map(|(i, p)| detect(scene, p, camera, det, derive_seed(run_seed, i as u64)))
        .collect()
}

/// Union of all detected names, deduplicated and sorted.
pub fn aggregate_object_list(views: &[ViewDetections]) -> ObjectList {
    ObjectList::from_names(views.iter().flat_map(|v| v.names.iter()))
}

/// Writes detections as newline-delimited JSON records.
pub fn write_detections<W: Write>(mut out: W, views: &[ViewDetections]) -> std::io::Result<()> {
    for v in views {
        serde_json::to_writer(&mut out, v)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
