//! Camera pose sets for scene exploration.
//!
//! A strategy picks observation locations on the achievable grid and
//! expands each into `2π / θ₀` headings `θ = k·θ₀`.

pub mod kmeans;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{achievable_grid_points, Scene};
use crate::Point;

pub use kmeans::{kmeans_wcss, select_k_elbow, Clustering};

pub const DEFAULT_GRID_SIDE: f64 = 0.75;
pub const DEFAULT_UNIT_ANGLE_DEG: f64 = 120.0;
pub const DEFAULT_MAX_CLUSTERS: usize = 8;
pub const DEFAULT_ELBOW_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// Every achievable grid point.
    Traversal,
    /// `ceil(ratio · n)` grid points drawn without replacement.
    Random { ratio: f64 },
    /// The grid point nearest the centroid of all grid points.
    OverallCenter,
    /// One grid point per k-means subregion, k picked by the WCSS elbow.
    BlockwiseCenter {
        max_clusters: usize,
        elbow_threshold: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrategyConfig", into = "StrategyConfig")]
pub struct CollectionStrategy {
    pub criterion: Criterion,
    /// Grid side length G, meters.
    pub grid_side: f64,
    /// Camera rotation step θ₀, radians.
    pub unit_angle: f64,
}

impl Default for CollectionStrategy {
    fn default() -> Self {
        CollectionStrategy {
            criterion: Criterion::BlockwiseCenter {
                max_clusters: DEFAULT_MAX_CLUSTERS,
                elbow_threshold: DEFAULT_ELBOW_THRESHOLD,
            },
            grid_side: DEFAULT_GRID_SIDE,
            unit_angle: DEFAULT_UNIT_ANGLE_DEG.to_radians(),
        }
    }
}

impl CollectionStrategy {
    pub fn new(criterion: Criterion, grid_side: f64, unit_angle_deg: f64) -> Self {
        CollectionStrategy {
            criterion,
            grid_side,
            unit_angle: unit_angle_deg.to_radians(),
        }
    }

    pub fn traversal(grid_side: f64, unit_angle_deg: f64) -> Self {
        Self::new(Criterion::Traversal, grid_side, unit_angle_deg)
    }

    pub fn random(grid_side: f64, ratio: f64, unit_angle_deg: f64) -> Self {
        Self::new(Criterion::Random { ratio }, grid_side, unit_angle_deg)
    }

    pub fn overall_center(grid_side: f64, unit_angle_deg: f64) -> Self {
        Self::new(Criterion::OverallCenter, grid_side, unit_angle_deg)
    }

    pub fn blockwise(grid_side: f64, unit_angle_deg: f64) -> Self {
        Self::new(
            Criterion::BlockwiseCenter {
                max_clusters: DEFAULT_MAX_CLUSTERS,
                elbow_threshold: DEFAULT_ELBOW_THRESHOLD,
            },
            grid_side,
            unit_angle_deg,
        )
    }

    /// Same locations, different rotation step.
    pub fn with_unit_angle_deg(mut self, deg: f64) -> Self {
        self.unit_angle = deg.to_radians();
        self
    }

    /// Headings per location, `2π / θ₀`.
    pub fn views_per_location(&self) -> Result<usize> {
        if !(self.unit_angle > 0.0) {
            return Err(Error::InvalidStrategy("unit angle must be positive".into()));
        }
        let views = TAU / self.unit_angle;
        let rounded = views.round();
        if rounded < 1.0 || (views - rounded).abs() > 1e-6 {
            return Err(Error::InvalidStrategy(format!(
                "unit angle {:.6} rad does not divide 2π evenly",
                self.unit_angle
            )));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_side > 0.0) || !self.grid_side.is_finite() {
            return Err(Error::InvalidStrategy("grid side must be positive".into()));
        }
        self.views_per_location()?;
        match self.criterion {
            Criterion::Random { ratio } if !(ratio > 0.0 && ratio <= 1.0) => {
                Err(Error::InvalidStrategy(format!("ratio {ratio} outside (0, 1]")))
            }
            Criterion::BlockwiseCenter { max_clusters, .. } if max_clusters < 1 => {
                Err(Error::InvalidStrategy("max_clusters must be at least 1".into()))
            }
            Criterion::BlockwiseCenter { elbow_threshold, .. }
                if !(elbow_threshold > 0.0 && elbow_threshold < 1.0) =>
            {
                Err(Error::InvalidStrategy(format!(
                    "elbow threshold {elbow_threshold} outside (0, 1)"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Config-file form of a strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub criterion: CriterionName,
    #[serde(default = "default_grid")]
    pub grid: f64,
    #[serde(default = "default_angle")]
    pub unit_angle_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elbow_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionName {
    Traversal,
    Random,
    Center,
    Blockwise,
}

fn default_grid() -> f64 {
    DEFAULT_GRID_SIDE
}

fn default_angle() -> f64 {
    DEFAULT_UNIT_ANGLE_DEG
}

impl TryFrom<StrategyConfig> for CollectionStrategy {
    type Error = Error;

    fn try_from(c: StrategyConfig) -> Result<Self> {
        let criterion = match c.criterion {
            CriterionName::Traversal => Criterion::Traversal,
            CriterionName::Random => Criterion::Random {
                ratio: c
                    .ratio
                    .ok_or_else(|| Error::InvalidStrategy("random criterion needs a ratio".into()))?,
            },
            CriterionName::Center => Criterion::OverallCenter,
            CriterionName::Blockwise => Criterion::BlockwiseCenter {
                max_clusters: c.max_clusters.unwrap_or(DEFAULT_MAX_CLUSTERS),
                elbow_threshold: c.elbow_threshold.unwrap_or(DEFAULT_ELBOW_THRESHOLD),
            },
        };
        let s = CollectionStrategy::new(criterion, c.grid, c.unit_angle_deg);
        s.validate()?;
        Ok(s)
    }
}

impl From<CollectionStrategy> for StrategyConfig {
    fn from(s: CollectionStrategy) -> Self {
        let mut c = StrategyConfig {
            criterion: CriterionName::Traversal,
            grid: s.grid_side,
            unit_angle_deg: s.unit_angle.to_degrees(),
            ratio: None,
            max_clusters: None,
            elbow_threshold: None,
        };
        match s.criterion {
            Criterion::Traversal => {}
            Criterion::Random { ratio } => {
                c.criterion = CriterionName::Random;
                c.ratio = Some(ratio);
            }
            Criterion::OverallCenter => c.criterion = CriterionName::Center,
            Criterion::BlockwiseCenter {
                max_clusters,
                elbow_threshold,
            } => {
                c.criterion = CriterionName::Blockwise;
                c.max_clusters = Some(max_clusters);
                c.elbow_threshold = Some(elbow_threshold);
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub x: f64,
    pub y: f64,
    /// Heading in `[0, 2π)`.
    pub theta: f64,
}

impl CameraPose {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Chosen observation locations, before heading expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSet {
    pub locations: Vec<Point>,
    /// Set for block-wise selection.
    pub clustering: Option<Clustering>,
}

pub fn select_locations(scene: &Scene, strategy: &CollectionStrategy, seed: u64) -> Result<LocationSet> {
    strategy.validate()?;
    let grid = achievable_grid_points(scene, strategy.grid_side);
    if grid.is_empty() {
        return Err(Error::NoAchievablePoints(scene.id.clone()));
    }
    let mut clustering = None;
    let locations = match strategy.criterion {
        Criterion::Traversal => grid,
        Criterion::Random { ratio } => {
            let n = grid.len();
            let take = ((ratio * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
            let mut rng = crate::rng::seeded(seed);
            let mut idx = rand::seq::index::sample(&mut rng, n, take).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| grid[i]).collect()
        }
        Criterion::OverallCenter => {
            let c = Point::centroid(&grid).expect("grid non-empty");
            vec![snap_to_grid(&grid, &c)]
        }
        Criterion::BlockwiseCenter {
            max_clusters,
            elbow_threshold,
        } => {
            let (chosen, _) = blockwise_clustering(&grid, max_clusters, elbow_threshold, seed)?;
            let mut locs: Vec<Point> = Vec::with_capacity(chosen.k);
            for c in &chosen.centroids {
                let p = snap_to_grid(&grid, c);
                if !locs.contains(&p) {
                    locs.push(p);
                }
            }
            clustering = Some(chosen);
            locs
        }
    };
    Ok(LocationSet {
        locations,
        clustering,
    })
}

/// Runs k-means for k = 1..=min(K_max, n) and picks k by the elbow rule.
/// Returns the chosen clustering and the full WCSS curve.
pub fn blockwise_clustering(
    grid: &[Point],
    max_clusters: usize,
    elbow_threshold: f64,
    seed: u64,
) -> Result<(Clustering, Vec<(usize, f64)>)> {
    let k_max = max_clusters.min(grid.len()).max(1);
    let runs = (1..=k_max)
        .map(|k| kmeans_wcss(grid, k, seed))
        .collect::<Result<Vec<_>>>()?;
    let curve: Vec<(usize, f64)> = runs.iter().map(|c| (c.k, c.wcss)).collect();
    let k = select_k_elbow(&curve, elbow_threshold)?;
    let chosen = runs.into_iter().nth(k - 1).expect("k within curve");
    Ok((chosen, curve))
}

/// Nearest grid point; ties go to smaller x, then smaller y.
pub fn snap_to_grid(grid: &[Point], target: &Point) -> Point {
    let mut best = grid[0];
    for p in &grid[1..] {
        if p.nearer_than(&best, target) {
            best = *p;
        }
    }
    best
}

pub fn expand_headings(locations: &[Point], strategy: &CollectionStrategy) -> Result<Vec<CameraPose>> {
    let views = strategy.views_per_location()?;
    Ok(locations
        .iter()
        .flat_map(|p| {
            (0..views).map(move |k| CameraPose {
                x: p.x,
                y: p.y,
                theta: crate::num::wrap_angle(k as f64 * strategy.unit_angle),
            })
        })
        .collect())
}

pub fn plan_poses(scene: &Scene, strategy: &CollectionStrategy, seed: u64) -> Result<Vec<CameraPose>> {
    let set = select_locations(scene, strategy, seed)?;
    expand_headings(&set.locations, strategy)
}

pub fn image_count(scene: &Scene, strategy: &CollectionStrategy, seed: u64) -> Result<usize> {
    let set = select_locations(scene, strategy, seed)?;
    Ok(set.locations.len() * strategy.views_per_location()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::RoomType;
    use crate::Rect;

    fn room(w: f64, h: f64) -> Scene {
        Scene {
            id: "room".into(),
            room_type: RoomType::Kitchen,
            bounds: Rect::new(0.0, 0.0, w, h),
            obstacles: vec![],
            objects: vec![],
            format_version: 1,
        }
    }

    #[test]
    fn overall_center_sixty_degrees_gives_six_poses() {
        let s = room(3.0, 2.25);
        let poses = plan_poses(&s, &CollectionStrategy::overall_center(0.75, 60.0), 0).unwrap();
        assert_eq!(poses.len(), 6);
        assert!(poses.iter().all(|p| p.x == poses[0].x && p.y == poses[0].y));
        // centroid (1.5, 1.125) sits between (1.5, 0.75) and (1.5, 1.5); tie → smaller y
        assert_eq!((poses[0].x, poses[0].y), (1.5, 0.75));
    }

    #[test]
    fn traversal_twenty_points_three_views() {
        let s = room(3.0, 2.25);
        let poses = plan_poses(&s, &CollectionStrategy::traversal(0.75, 120.0), 0).unwrap();
        assert_eq!(poses.len(), 60);
        let thetas: Vec<f64> = poses[..3].iter().map(|p| p.theta).collect();
        assert!((thetas[1] - TAU / 3.0).abs() < 1e-12);
        assert!((thetas[2] - 2.0 * TAU / 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_quarter_of_twenty() {
        let s = room(3.0, 2.25);
        let poses = plan_poses(&s, &CollectionStrategy::random(0.75, 0.25, 60.0), 3).unwrap();
        assert_eq!(poses.len(), 30);
    }

    #[test]
    fn random_tiny_ratio_takes_one() {
        let s = room(3.0, 2.25);
        assert_eq!(image_count(&s, &CollectionStrategy::random(0.75, 0.01, 120.0), 0).unwrap(), 3);
    }

    #[test]
    fn random_full_ratio_equals_traversal_set() {
        let s = room(4.0, 3.0);
        let a = select_locations(&s, &CollectionStrategy::random(0.75, 1.0, 60.0), 9).unwrap();
        let b = select_locations(&s, &CollectionStrategy::traversal(0.75, 60.0), 9).unwrap();
        assert_eq!(a.locations, b.locations);
    }

    #[test]
    fn blockwise_locations_are_grid_points() {
        let mut s = room(6.0, 4.5);
        s.obstacles.push(Rect::new(2.0, 1.0, 3.5, 2.5));
        let grid = achievable_grid_points(&s, 0.75);
        let set = select_locations(&s, &CollectionStrategy::blockwise(0.75, 120.0), 4).unwrap();
        assert!(!set.locations.is_empty());
        assert!(set.locations.iter().all(|p| grid.contains(p)));
        assert!(set.clustering.is_some());
    }

    #[test]
    fn halving_angle_doubles_count() {
        let s = room(5.0, 4.0);
        for base in [
            CollectionStrategy::traversal(0.75, 120.0),
            CollectionStrategy::random(0.75, 0.3, 120.0),
            CollectionStrategy::overall_center(0.75, 120.0),
            CollectionStrategy::blockwise(0.75, 120.0),
        ] {
            let coarse = image_count(&s, &base, 5).unwrap();
            let fine = image_count(&s, &base.with_unit_angle_deg(60.0), 5).unwrap();
            assert_eq!(fine, 2 * coarse);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = room(3.0, 3.0);
        assert!(plan_poses(&s, &CollectionStrategy::traversal(0.0, 60.0), 0).is_err());
        assert!(plan_poses(&s, &CollectionStrategy::traversal(0.75, 50.0), 0).is_err());
        assert!(plan_poses(&s, &CollectionStrategy::random(0.75, 0.0, 60.0), 0).is_err());
        assert!(plan_poses(&s, &CollectionStrategy::random(0.75, 1.5, 60.0), 0).is_err());
        let mut bad = CollectionStrategy::blockwise(0.75, 60.0);
        bad.criterion = Criterion::BlockwiseCenter {
            max_clusters: 0,
            elbow_threshold: 0.15,
        };
        assert!(plan_poses(&s, &bad, 0).is_err());
    }

    #[test]
    fn no_grid_points_is_an_error() {
        let mut s = room(3.0, 3.0);
        s.obstacles.push(Rect::new(0.0, 0.0, 3.0, 3.0));
        assert!(matches!(
            plan_poses(&s, &CollectionStrategy::traversal(0.75, 60.0), 0),
            Err(Error::NoAchievablePoints(_))
        ));
    }

    #[test]
    fn strategy_config_round_trip() {
        let text = r#"{"criterion":"random","grid":0.75,"unit_angle_deg":60,"ratio":0.75}"#;
        let s: CollectionStrategy = serde_json::from_str(text).unwrap();
        assert_eq!(s.criterion, Criterion::Random { ratio: 0.75 });
        assert_eq!(s.views_per_location().unwrap(), 6);
        let back: CollectionStrategy = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back.criterion, s.criterion);
        assert!(serde_json::from_str::<CollectionStrategy>(r#"{"criterion":"random"}"#).is_err());
    }

    #[test]
    fn default_strategy_is_blockwise_three_views() {
        let s = CollectionStrategy::default();
        assert!(matches!(s.criterion, Criterion::BlockwiseCenter { .. }));
        assert_eq!(s.grid_side, 0.75);
        assert_eq!(s.views_per_location().unwrap(), 3);
    }
}
