//! Procedural building world, kinematic drone, camera rig and the ground-truth
//! annotations that stand in for RGB imagery.

mod camera;
mod features;
mod generate;
mod motion;
mod render;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Vec2, Vec3};

pub use camera::{CameraRig, PinholeCamera, View};
pub use features::{building_pixel_box, floor_band, visible_features, FloorBand, PixelBox, VisibleFeature};
pub use generate::{generate_world, WorldParams};
pub use motion::{apply_action, check_success, Action, ActionKind, MotionLimits};
pub use render::{cast_ray, render_depth, sample_range, DepthImage};

pub const WORLD_SCHEMA: &str = "vld-world/1";

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world generation infeasible: {0}")]
    GenerationInfeasible(String),
    #[error("camera origin {0:?} lies inside building {1}")]
    PoseInsideGeometry(Vec3, usize),
    #[error("building {0} is not in view")]
    NotInView(usize),
    #[error("no building in view")]
    NoBuildingInView,
    #[error("collision with building {building} while moving from {from:?} to {to:?}")]
    Collision { building: usize, from: Vec3, to: Vec3 },
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error("unsupported world schema {0:?}")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Tool,
    Container,
    Household,
    Food,
    Furniture,
    Poster,
    Toy,
    Ornament,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Tool,
        Category::Container,
        Category::Household,
        Category::Food,
        Category::Furniture,
        Category::Poster,
        Category::Toy,
        Category::Ornament,
    ];

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Category::Tool => &["toolbox", "ladder", "watering can", "hammer"],
            Category::Container => &["flower pot", "bucket", "storage box", "vase"],
            Category::Household => &["lamp", "fan", "drying rack", "broom"],
            Category::Food => &["watermelon", "pumpkin", "bread basket", "fruit bowl"],
            Category::Furniture => &["chair", "stool", "side table", "bench"],
            Category::Poster => &["movie poster", "flag", "banner", "calendar"],
            Category::Toy => &["teddy bear", "kite", "toy car", "balloon"],
            Category::Ornament => &["wind chime", "lantern", "wreath", "bird feeder"],
        }
    }

    pub fn for_label(label: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.labels().contains(&label))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
    White,
    Black,
    Orange,
    Purple,
}

impl Color {
    pub const ALL: [Color; 8] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Yellow,
        Color::White,
        Color::Black,
        Color::Orange,
        Color::Purple,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Yellow => "yellow",
            Color::White => "white",
            Color::Black => "black",
            Color::Orange => "orange",
            Color::Purple => "purple",
        }
    }

    pub fn from_name(s: &str) -> Option<Color> {
        Color::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// A decoration hanging at a window. `(category, color, label)` is unique
/// within a generated world, so a tag identifies at most one window.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectTag {
    pub category: Category,
    pub color: Color,
    pub label: String,
}

impl ObjectTag {
    pub fn new(category: Category, color: Color, label: impl Into<String>) -> Self {
        Self { category, color, label: label.into() }
    }

    /// "green flower pot"
    pub fn description(&self) -> String {
        format!("{} {}", self.color.name(), self.label)
    }

    /// Inverse of [`ObjectTag::description`] for catalogue labels.
    pub fn parse_description(text: &str) -> Option<ObjectTag> {
        let text = text.trim().to_lowercase();
        let (color, label) = text.split_once(' ')?;
        let color = Color::from_name(color)?;
        let label = label.trim();
        let category = Category::for_label(label)?;
        Some(ObjectTag::new(category, color, label))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub id: String,
    pub facade_index: usize,
    pub floor: u32,
    pub center: Vec3,
    /// (width, height) in meters.
    pub extent: (f64, f64),
    pub decorations: Vec<ObjectTag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Building {
    /// Counterclockwise convex footprint.
    pub footprint: Vec<Vec2>,
    pub floor_height: f64,
    pub num_floors: u32,
    pub windows: Vec<Window>,
}

impl Building {
    pub fn height(&self) -> f64 {
        self.floor_height * f64::from(self.num_floors)
    }

    pub fn num_facades(&self) -> usize {
        self.footprint.len()
    }

    pub fn facade(&self, i: usize) -> (Vec2, Vec2) {
        let n = self.footprint.len();
        (self.footprint[i], self.footprint[(i + 1) % n])
    }

    pub fn facade_length(&self, i: usize) -> f64 {
        let (a, b) = self.facade(i);
        a.dist(b)
    }

    pub fn outward_normal(&self, i: usize) -> Vec2 {
        let (a, b) = self.facade(i);
        (b - a).perp_cw().normalized()
    }

    /// Mid-height of floor `floor` (1-based).
    pub fn floor_mid_height(&self, floor: u32) -> f64 {
        (f64::from(floor) - 0.5) * self.floor_height
    }

    pub fn contains_xy(&self, p: Vec2) -> bool {
        geometry::point_in_convex(p, &self.footprint)
    }

    pub fn centroid(&self) -> Vec2 {
        geometry::centroid(&self.footprint)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub seed: u64,
    pub bounds: Bounds,
    pub buildings: Vec<Building>,
}

/// Reference to a window inside a world.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowRef {
    pub building: usize,
    pub window: usize,
}

impl WorldModel {
    pub fn window(&self, r: WindowRef) -> &Window {
        &self.buildings[r.building].windows[r.window]
    }

    pub fn find_window(&self, id: &str) -> Option<WindowRef> {
        self.buildings.iter().enumerate().find_map(|(b, bld)| {
            bld.windows.iter().position(|w| w.id == id).map(|window| WindowRef { building: b, window })
        })
    }

    /// Point displaced `standoff` meters outward from the window center along
    /// its facade normal.
    pub fn standoff_point(&self, r: WindowRef, standoff: f64) -> Vec3 {
        let b = &self.buildings[r.building];
        let w = &b.windows[r.window];
        let n = b.outward_normal(w.facade_index);
        Vec3::new(w.center.x + n.x * standoff, w.center.y + n.y * standoff, w.center.z)
    }

    /// Index of a building whose solid contains `p`.
    pub fn building_containing(&self, p: Vec3) -> Option<usize> {
        self.buildings.iter().position(|b| p.z <= b.height() && p.z >= 0.0 && b.contains_xy(p.xy()))
    }

    pub fn to_json(&self) -> Result<String, WorldError> {
        #[derive(Serialize)]
        struct File<'a> {
            schema: &'static str,
            #[serde(flatten)]
            world: &'a WorldModel,
        }
        Ok(serde_json::to_string_pretty(&File { schema: WORLD_SCHEMA, world: self })?)
    }

    pub fn from_json(text: &str) -> Result<WorldModel, WorldError> {
        #[derive(Deserialize)]
        struct File {
            schema: String,
            #[serde(flatten)]
            world: WorldModel,
        }
        let file: File = serde_json::from_str(text)?;
        if file.schema != WORLD_SCHEMA {
            return Err(WorldError::Schema(file.schema));
        }
        file.world.validate()?;
        Ok(file.world)
    }

    /// Checks every structural invariant of a world.
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::Invalid(m));
        let mut tags = std::collections::BTreeSet::new();
        let mut ids = std::collections::BTreeSet::new();
        for (bi, b) in self.buildings.iter().enumerate() {
            if !geometry::is_convex_ccw(&b.footprint) {
                return bad(format!("building {bi} footprint is not convex counterclockwise"));
            }
            if b.num_floors == 0 || b.floor_height <= 0.0 {
                return bad(format!("building {bi} has no floors"));
            }
            for (bj, other) in self.buildings.iter().enumerate().skip(bi + 1) {
                if geometry::polygon_distance(&b.footprint, &other.footprint) <= 0.0 {
                    return bad(format!("buildings {bi} and {bj} overlap"));
                }
            }
            for w in &b.windows {
                if !ids.insert(w.id.clone()) {
                    return bad(format!("duplicate window id {}", w.id));
                }
                if w.facade_index >= b.num_facades() {
                    return bad(format!("window {} has facade {} out of range", w.id, w.facade_index));
                }
                if w.floor == 0 || w.floor > b.num_floors {
                    return bad(format!("window {} floor {} out of range", w.id, w.floor));
                }
                let residual = facade_plane_residual(b, w);
                if residual > 1e-9 {
                    return bad(format!("window {} is {residual} m off its facade", w.id));
                }
                for tag in &w.decorations {
                    if tag.label.is_empty() {
                        return bad(format!("window {} has an empty decoration label", w.id));
                    }
                    if !tags.insert(tag.clone()) {
                        return bad(format!("decoration {} appears twice", tag.description()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Distance of the window center from its facade plane.
pub fn facade_plane_residual(b: &Building, w: &Window) -> f64 {
    let (a, c) = b.facade(w.facade_index);
    let d = (c - a).normalized();
    d.cross(w.center.xy() - a).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DronePose {
    pub position: Vec3,
    /// Heading, radians, counterclockwise from +x, wrapped to (-pi, pi].
    pub yaw: f64,
}

impl DronePose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self { position, yaw: geometry::wrap_angle(yaw) }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// One axis-aligned box building with 3 m floors and no windows.
    pub fn box_world(min: Vec2, max: Vec2, height: f64) -> WorldModel {
        let floors = (height / 3.0).round().max(1.0) as u32;
        WorldModel {
            seed: 0,
            bounds: Bounds { min: Vec2::new(-200.0, -200.0), max: Vec2::new(200.0, 200.0) },
            buildings: vec![Building {
                footprint: vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)],
                floor_height: height / f64::from(floors),
                num_floors: floors,
                windows: Vec::new(),
            }],
        }
    }

    /// Building north of the origin with its south facade on y = 0 and one
    /// decorated window centered at (0, 0, 12).
    pub fn box_world_with_window(width: f64, height: f64) -> WorldModel {
        let mut w = box_world(Vec2::new(-20.0, 0.0), Vec2::new(20.0, 20.0), 30.0);
        w.buildings[0].windows.push(Window {
            id: "b00-e00-f04-w00".into(),
            facade_index: 0,
            floor: 4,
            center: Vec3::new(0.0, 0.0, 12.0),
            extent: (width, height),
            decorations: vec![ObjectTag::new(Category::Container, Color::Green, "flower pot")],
        });
        w
    }
}
