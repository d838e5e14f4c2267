use super::ViewObservation;
use crate::world::{
    building_pixel_box, floor_band, render_depth, visible_features, CameraRig, DepthImage, DronePose, FloorBand,
    PixelBox, View, WorldError, WorldModel,
};

/// Produces camera frames and their ground-truth annotations. The annotations
/// are the only world knowledge an oracle backend receives.
#[derive(Clone, Copy, Debug)]
pub struct Sensors<'w> {
    pub world: &'w WorldModel,
    pub rig: &'w CameraRig,
}

impl<'w> Sensors<'w> {
    pub fn new(world: &'w WorldModel, rig: &'w CameraRig) -> Self {
        Self { world, rig }
    }

    pub fn depth(&self, pose: &DronePose, view: View) -> Result<DepthImage, WorldError> {
        render_depth(self.world, pose, self.rig, view)
    }

    /// Front frame plus its floor band, when a building is straight ahead.
    pub fn floor_frame(&self, pose: &DronePose) -> Result<(DepthImage, Option<FloorBand>), WorldError> {
        let depth = self.depth(pose, View::FRONT)?;
        let band = match floor_band(self.world, pose, self.rig, View::FRONT) {
            Ok(b) => Some(b),
            Err(WorldError::NoBuildingInView) => None,
            Err(e) => return Err(e),
        };
        Ok((depth, band))
    }

    /// True silhouette box of `building` in the front camera.
    pub fn building_box(&self, pose: &DronePose, building: usize) -> Result<Option<PixelBox>, WorldError> {
        match building_pixel_box(self.world, pose, self.rig, View::FRONT, building) {
            Ok(b) => Ok(Some(b)),
            Err(WorldError::NotInView(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// All five views of one step, in rig order.
    pub fn observe(&self, pose: &DronePose) -> Result<Vec<ViewObservation>, WorldError> {
        View::ALL
            .iter()
            .map(|&view| {
                Ok(ViewObservation {
                    view,
                    depth: self.depth(pose, view)?,
                    features: visible_features(self.world, pose, self.rig, view)?,
                })
            })
            .collect()
    }
}
