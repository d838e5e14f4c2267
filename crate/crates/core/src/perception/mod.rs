//! One interface for the four model roles (request parsing, floor counting,
//! object recognition, direction choice). The oracle answers from
//! ground-truth annotations with seeded noise; the remote client speaks a
//! chat-completion protocol with a strict answer grammar.

pub mod grammar;
mod noise;
mod oracle;
pub mod remote;
mod sensors;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{DepthImage, FloorBand, ObjectTag, PixelBox, View, VisibleFeature};

pub use noise::{NoiseProfile, NoiseStream, OffsetDist};
pub use oracle::{ChoicePolicy, OracleBackend};
pub use remote::{RemoteBackend, RemoteConfig};
pub use sensors::Sensors;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed reply: {0}")]
    Grammar(String),
    #[error("invalid noise profile: {0}")]
    InvalidProfile(String),
}

/// The model roles a backend serves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Request,
    Floor,
    Recognition,
    Choice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestInterpretation {
    pub target_floor: u32,
    pub target_object: ObjectTag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloorCountAnswer {
    /// `None` exactly when the backend refused to count.
    pub floors_visible: Option<u32>,
}

impl FloorCountAnswer {
    pub fn count(n: u32) -> Self {
        Self { floors_visible: Some(n) }
    }

    pub fn refusal() -> Self {
        Self { floors_visible: None }
    }

    pub fn refused(&self) -> bool {
        self.floors_visible.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognitionAnswer {
    pub found: bool,
    pub pixel_box: Option<PixelBox>,
    pub view: Option<View>,
    /// Window the claimed box belongs to, when the backend can tell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_id: Option<String>,
}

impl RecognitionAnswer {
    pub fn not_found() -> Self {
        Self { found: false, pixel_box: None, view: None, window_id: None }
    }

    pub fn found(view: View, pixel_box: PixelBox, window_id: Option<String>) -> Self {
        Self { found: true, pixel_box: Some(pixel_box), view: Some(view), window_id }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceAnswer {
    /// 1-based marked point, 1 = leftmost.
    pub point_index: u8,
}

/// Free-text request plus, for the oracle, the task's true reading.
#[derive(Clone, Copy, Debug)]
pub struct RequestQuery<'a> {
    pub text: &'a str,
    pub truth: Option<&'a RequestInterpretation>,
}

/// Front-camera frame for a floor count. `band` is the geometric
/// annotation the oracle answers from.
#[derive(Clone, Copy, Debug)]
pub struct FloorQuery<'a> {
    pub depth: &'a DepthImage,
    pub band: Option<&'a FloorBand>,
}

#[derive(Clone, Copy, Debug)]
pub struct BuildingBoxQuery<'a> {
    pub depth: &'a DepthImage,
    pub truth: Option<PixelBox>,
}

/// Everything one camera delivers at a step.
#[derive(Clone, Debug)]
pub struct ViewObservation {
    pub view: View,
    pub depth: DepthImage,
    pub features: Vec<VisibleFeature>,
}

#[derive(Clone, Copy, Debug)]
pub struct RecognitionQuery<'a> {
    pub views: &'a [ViewObservation],
    pub target: &'a ObjectTag,
}

#[derive(Clone, Copy, Debug)]
pub struct ChoiceQuery<'a> {
    pub view: View,
    pub depth: &'a DepthImage,
    /// Marked pixel columns (row is the image middle).
    pub marks: [usize; 5],
    pub distances: [f64; 5],
    pub deadlock_threshold: f64,
    pub task: &'a str,
    /// Newly visible facade length per point, for the oracle.
    pub gains: Option<[f64; 5]>,
}

/// A perception provider for one episode. Implementations own their noise
/// stream, so one instance must not be shared between episodes.
pub trait Backend {
    fn parse_request(&mut self, q: RequestQuery<'_>) -> Result<RequestInterpretation, PerceptionError>;
    fn count_floors(&mut self, q: FloorQuery<'_>) -> Result<FloorCountAnswer, PerceptionError>;
    fn building_box(&mut self, q: BuildingBoxQuery<'_>) -> Result<Option<PixelBox>, PerceptionError>;
    fn recognize(&mut self, q: RecognitionQuery<'_>) -> Result<RecognitionAnswer, PerceptionError>;
    fn choose(&mut self, q: ChoiceQuery<'_>) -> Result<ChoiceAnswer, PerceptionError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn parse_request(&mut self, q: RequestQuery<'_>) -> Result<RequestInterpretation, PerceptionError> {
        (**self).parse_request(q)
    }
    fn count_floors(&mut self, q: FloorQuery<'_>) -> Result<FloorCountAnswer, PerceptionError> {
        (**self).count_floors(q)
    }
    fn building_box(&mut self, q: BuildingBoxQuery<'_>) -> Result<Option<PixelBox>, PerceptionError> {
        (**self).building_box(q)
    }
    fn recognize(&mut self, q: RecognitionQuery<'_>) -> Result<RecognitionAnswer, PerceptionError> {
        (**self).recognize(q)
    }
    fn choose(&mut self, q: ChoiceQuery<'_>) -> Result<ChoiceAnswer, PerceptionError> {
        (**self).choose(q)
    }
}
