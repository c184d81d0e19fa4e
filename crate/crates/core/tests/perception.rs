use groundplan::exploration::CameraPose;
use groundplan::perception::{detect, detect_views, CameraConfig, DetectorConfig};
use groundplan::scene::{ObjectInstance, RoomType, Scene};
use groundplan::{Point, Rect};

fn scene(objects: &[(&str, f64, f64)]) -> Scene {
    Scene {
        id: "mc".into(),
        room_type: RoomType::Bedroom,
        bounds: Rect::new(0.0, 0.0, 4.0, 4.0),
        obstacles: vec![],
        objects: objects
            .iter()
            .map(|(n, x, y)| ObjectInstance {
                class_name: n.to_string(),
                position: Point::new(*x, *y),
            })
            .collect(),
        format_version: 1,
    }
}

fn poses(n: usize) -> Vec<CameraPose> {
    vec![CameraPose { x: 2.0, y: 2.0, theta: 0.0 }; n]
}

#[test]
fn distractor_count_has_poisson_mean() {
    let det = DetectorConfig {
        false_positive_rate: 2.0,
        ..DetectorConfig::default()
    };
    let views = detect_views(&scene(&[]), &poses(10_000), &CameraConfig::default(), &det, 42).unwrap();
    let total: usize = views.iter().map(|v| v.names.len()).sum();
    let mean = total as f64 / views.len() as f64;
    assert!((mean - 2.0).abs() <= 0.05, "mean {mean}");
}

#[test]
fn recall_matches_true_positive_rate() {
    let s = scene(&[("bed", 3.0, 2.0)]);
    let det = DetectorConfig {
        true_positive_rate: 0.7,
        ..DetectorConfig::default()
    };
    let views = detect_views(&s, &poses(10_000), &CameraConfig::default(), &det, 7).unwrap();
    let hits = views.iter().filter(|v| v.names.iter().any(|n| n == "bed")).count();
    let rate = hits as f64 / views.len() as f64;
    assert!((rate - 0.7).abs() <= 0.02, "rate {rate}");
}

#[test]
fn same_seed_same_detections() {
    let s = scene(&[("bed", 3.0, 2.0), ("lamp", 2.5, 2.5)]);
    let det = DetectorConfig {
        true_positive_rate: 0.5,
        false_positive_rate: 1.0,
        ..DetectorConfig::default()
    };
    let pose = CameraPose { x: 2.0, y: 2.0, theta: 0.3 };
    let a = detect(&s, &pose, &CameraConfig::default(), &det, 99).unwrap();
    let b = detect(&s, &pose, &CameraConfig::default(), &det, 99).unwrap();
    assert_eq!(a, b);
}
