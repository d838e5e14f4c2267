use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Bounds, Building, Category, Color, ObjectTag, Window, WorldError, WorldModel};
use crate::geometry::{is_convex_ccw, polygon_distance, Vec2, Vec3};

/// Knobs of the procedural world generator. Ranges are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub num_buildings: usize,
    /// Half-size of the square world, meters.
    pub extent: f64,
    /// Minimum clearance between footprints.
    pub min_gap: f64,
    pub floors: (u32, u32),
    pub floor_height: (f64, f64),
    /// Circumradius range of a footprint.
    pub radius: (f64, f64),
    /// Relative weights of footprints with 3..=8 vertices.
    pub vertex_weights: [u32; 6],
    pub min_edge: f64,
    pub window_spacing: f64,
    pub window_width: (f64, f64),
    pub window_height: f64,
    /// Probability that a window carries a decoration.
    pub decoration_density: f64,
    pub max_attempts: usize,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            num_buildings: 3,
            extent: 200.0,
            min_gap: 50.0,
            floors: (2, 10),
            floor_height: (2.8, 3.6),
            radius: (8.0, 16.0),
            vertex_weights: [1, 5, 1, 2, 1, 2],
            min_edge: 4.0,
            window_spacing: 3.5,
            window_width: (1.2, 1.8),
            window_height: 1.5,
            decoration_density: 0.1,
            max_attempts: 500,
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::GenerationInfeasible(m.to_string()));
        if self.num_buildings == 0 {
            return bad("at least one building is required");
        }
        if self.floors.0 == 0 || self.floors.0 > self.floors.1 {
            return bad("floor range must satisfy 1 <= min <= max");
        }
        let pos_range = |r: (f64, f64)| r.0 > 0.0 && r.0 <= r.1 && r.1.is_finite();
        if !pos_range(self.floor_height) || !pos_range(self.radius) || !pos_range(self.window_width) {
            return bad("ranges must be positive and ordered");
        }
        if self.vertex_weights.iter().all(|&w| w == 0) {
            return bad("all footprint vertex weights are zero");
        }
        if !(0.0..=1.0).contains(&self.decoration_density) {
            return bad("decoration density outside [0, 1]");
        }
        if self.window_height >= self.floor_height.0 {
            return bad("windows taller than a floor");
        }
        if self.window_spacing <= self.window_width.1 {
            return bad("window spacing must exceed window width");
        }
        if self.extent <= self.radius.1 || self.min_gap < 0.0 || self.min_edge < 0.0 {
            return bad("world extent too small for the footprint radius");
        }
        // rough area bound: every footprint needs a disc of radius r + gap/2
        let r = self.radius.1 + self.min_gap * 0.5;
        let side = 2.0 * self.extent;
        if self.num_buildings as f64 * std::f64::consts::PI * r * r > side * side * 0.9 {
            return bad("too many buildings for the world extent and minimum gap");
        }
        Ok(())
    }
}

const CORNER_MARGIN: f64 = 1.5;
const SHAPE_ATTEMPTS: usize = 64;

fn footprint(rng: &mut ChaCha8Rng, params: &WorldParams, center: Vec2) -> Option<Vec<Vec2>> {
    let total: u32 = params.vertex_weights.iter().sum();
    let mut pick = rng.gen_range(0..total);
    let mut n = 3;
    for (k, &w) in params.vertex_weights.iter().enumerate() {
        if pick < w {
            n = k + 3;
            break;
        }
        pick -= w;
    }
    for _ in 0..SHAPE_ATTEMPTS {
        let r = rng.gen_range(params.radius.0..=params.radius.1);
        let rot = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let pts: Vec<Vec2> = if n == 4 {
            let aspect = rng.gen_range(0.5..=1.0);
            let (hx, hy) = (r * std::f64::consts::FRAC_1_SQRT_2, r * std::f64::consts::FRAC_1_SQRT_2 * aspect);
            [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)].iter().map(|&(x, y)| rotate(Vec2::new(x, y), rot)).collect()
        } else {
            let squash = rng.gen_range(0.7..=1.0);
            let step = std::f64::consts::TAU / n as f64;
            (0..n)
                .map(|k| {
                    let a = step * k as f64 + rng.gen_range(-0.2..=0.2) * step;
                    rotate(Vec2::new(r * a.cos(), r * squash * a.sin()), rot)
                })
                .collect()
        };
        let pts: Vec<Vec2> = pts.into_iter().map(|p| p + center).collect();
        let edges_ok = (0..n).all(|i| pts[i].dist(pts[(i + 1) % n]) >= params.min_edge);
        if edges_ok && is_convex_ccw(&pts) {
            return Some(pts);
        }
    }
    None
}

fn rotate(p: Vec2, a: f64) -> Vec2 {
    let (s, c) = a.sin_cos();
    Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

fn windows(
    rng: &mut ChaCha8Rng,
    params: &WorldParams,
    bi: usize,
    footprint: &[Vec2],
    floors: u32,
    fh: f64,
) -> Vec<Window> {
    let width = rng.gen_range(params.window_width.0..=params.window_width.1);
    let n = footprint.len();
    let mut out = Vec::new();
    for e in 0..n {
        let (a, b) = (footprint[e], footprint[(e + 1) % n]);
        let len = a.dist(b);
        let usable = len - 2.0 * CORNER_MARGIN - width;
        if usable < 0.0 {
            continue;
        }
        let count = (usable / params.window_spacing).floor() as usize + 1;
        let dir = (b - a) * (1.0 / len);
        for f in 1..=floors {
            for k in 0..count {
                let t = len * 0.5 + (k as f64 - (count - 1) as f64 * 0.5) * params.window_spacing;
                let c = a + dir * t;
                out.push(Window {
                    id: format!("b{bi:02}-e{e:02}-f{f:02}-w{k:02}"),
                    facade_index: e,
                    floor: f,
                    center: Vec3::new(c.x, c.y, (f64::from(f) - 0.5) * fh),
                    extent: (width, params.window_height),
                    decorations: Vec::new(),
                });
            }
        }
    }
    out
}

fn tag_pool(rng: &mut ChaCha8Rng) -> Vec<ObjectTag> {
    let mut pool: Vec<ObjectTag> = Category::ALL
        .iter()
        .flat_map(|&c| {
            c.labels().iter().flat_map(move |&l| Color::ALL.iter().map(move |&col| ObjectTag::new(c, col, l)))
        })
        .collect();
    pool.shuffle(rng);
    pool
}

/// Deterministic procedural world for a seed. Footprints are convex, pairwise
/// separated by `min_gap`, and every window sits on its facade plane.
pub fn generate_world(seed: u64, params: &WorldParams) -> Result<WorldModel, WorldError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = params.extent - params.radius.1;
    let mut buildings: Vec<Building> = Vec::with_capacity(params.num_buildings);
    let mut attempts = 0;
    while buildings.len() < params.num_buildings {
        attempts += 1;
        if attempts > params.max_attempts {
            return Err(WorldError::GenerationInfeasible(format!(
                "placed {} of {} buildings after {} attempts",
                buildings.len(),
                params.num_buildings,
                params.max_attempts
            )));
        }
        let center = Vec2::new(rng.gen_range(-lim..=lim), rng.gen_range(-lim..=lim));
        let Some(fp) = footprint(&mut rng, params, center) else {
            continue;
        };
        if buildings.iter().any(|b| polygon_distance(&b.footprint, &fp) < params.min_gap) {
            continue;
        }
        let floors = rng.gen_range(params.floors.0..=params.floors.1);
        let fh = rng.gen_range(params.floor_height.0..=params.floor_height.1);
        let windows = windows(&mut rng, params, buildings.len(), &fp, floors, fh);
        buildings.push(Building { footprint: fp, floor_height: fh, num_floors: floors, windows });
    }

    let mut pool = tag_pool(&mut rng);
    for b in &mut buildings {
        for w in &mut b.windows {
            if rng.gen_bool(params.decoration_density) {
                if let Some(tag) = pool.pop() {
                    w.decorations.push(tag);
                }
            }
        }
    }

    let world = WorldModel {
        seed,
        bounds: Bounds { min: Vec2::new(-params.extent, -params.extent), max: Vec2::new(params.extent, params.extent) },
        buildings,
    };
    world.validate()?;
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::facade_plane_residual;

    #[test]
    fn deterministic() {
        let a = generate_world(7, &WorldParams::default()).unwrap();
        let b = generate_world(7, &WorldParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forced_single_building() {
        let p = WorldParams { num_buildings: 1, floors: (5, 5), ..WorldParams::default() };
        let w = generate_world(7, &p).unwrap();
        assert_eq!(w.buildings.len(), 1);
        let b = &w.buildings[0];
        assert_eq!(b.height(), 5.0 * b.floor_height);
    }

    #[test]
    fn window_plane_audit() {
        let w = generate_world(13, &WorldParams::default()).unwrap();
        for b in &w.buildings {
            for win in &b.windows {
                // independent audit: normal-projected distance from the edge line
                let (a, c) = b.facade(win.facade_index);
                let n = (c - a).perp_cw().normalized();
                let d = n.dot(win.center.xy() - a).abs();
                assert!(d < 1e-9, "{} off plane by {d}", win.id);
                assert!(facade_plane_residual(b, win) < 1e-9);
            }
        }
    }

    #[test]
    fn infeasible_packing() {
        let p = WorldParams { num_buildings: 40, extent: 60.0, ..WorldParams::default() };
        assert!(matches!(generate_world(1, &p), Err(WorldError::GenerationInfeasible(_))));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let w = generate_world(21, &WorldParams::default()).unwrap();
        let text = w.to_json().unwrap();
        let back = WorldModel::from_json(&text).unwrap();
        assert_eq!(w, back);
        assert_eq!(text, back.to_json().unwrap());
    }
}
