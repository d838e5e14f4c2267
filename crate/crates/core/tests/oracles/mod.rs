//! Reference implementations the algorithms are checked against. They favor
//! obviousness over speed and share no code with the library beyond plain
//! data types.
#![allow(dead_code, clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::manual_div_ceil)]

use vld_core::geometry::{Vec2, Vec3};
use vld_core::world::{generate_world, Building, DronePose, PinholeCamera, WorldModel, WorldParams};

/// Every split of `means` evaluated from scratch, then the minimum objective
/// with the smallest index. The overflow allowance is the rational
/// `num/den` of the right partition, rounded up in integer arithmetic.
pub fn brute_split(means: &[f64], delta: f64, d_max: f64, num: usize, den: usize) -> (Option<usize>, Option<f64>) {
    let x = means.len();
    let mut valid: Vec<(usize, f64)> = Vec::new();
    for j in 1..x {
        let mut left_sum = 0.0;
        for i in 0..j {
            left_sum += means[i];
        }
        let mut right_sum = 0.0;
        for i in j..x {
            right_sum += means[i];
        }
        let left_mean = left_sum / j as f64;
        let right_mean = right_sum / (x - j) as f64;
        if !(left_mean - right_mean >= delta) {
            continue;
        }
        let mut over = 0;
        for i in j..x {
            if means[i] > d_max {
                over += 1;
            }
        }
        let allowed = ((x - j) * num).div_ceil(den);
        if over > allowed {
            continue;
        }
        let mut left_var = 0.0;
        for i in 0..j {
            left_var += (means[i] - left_mean) * (means[i] - left_mean);
        }
        let mut right_var = 0.0;
        for i in j..x {
            right_var += (means[i] - right_mean) * (means[i] - right_mean);
        }
        valid.push((j, left_var / j as f64 + right_var / (x - j) as f64));
    }
    let mut best: Option<(usize, f64)> = None;
    for (j, obj) in valid {
        match best {
            Some((_, b)) if b <= obj => {}
            _ => best = Some((j, obj)),
        }
    }
    (best.map(|b| b.0), best.map(|b| b.1))
}

fn inside_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    // even-odd crossing count
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Nearest positive ray parameter over every wall quad and roof polygon.
pub fn naive_hit(buildings: &[Building], o: Vec3, d: Vec3) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut offer = |t: f64| {
        if t > 0.0 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    for b in buildings {
        let h = b.height();
        let n = b.footprint.len();
        for i in 0..n {
            let (a, c) = (b.footprint[i], b.footprint[(i + 1) % n]);
            let e = Vec2::new(c.x - a.x, c.y - a.y);
            // o.xy + t d.xy = a + s e
            let det = d.x * (-e.y) - d.y * (-e.x);
            if det.abs() < 1e-15 {
                continue;
            }
            let rx = a.x - o.x;
            let ry = a.y - o.y;
            let t = (rx * (-e.y) - ry * (-e.x)) / det;
            let s = (d.x * ry - d.y * rx) / det;
            let z = o.z + t * d.z;
            if (0.0..=1.0).contains(&s) && (0.0..=h).contains(&z) {
                offer(t);
            }
        }
        if d.z != 0.0 {
            let t = (h - o.z) / d.z;
            let p = Vec2::new(o.x + t * d.x, o.y + t * d.y);
            if inside_polygon(p, &b.footprint) {
                offer(t);
            }
        }
    }
    best
}

/// Range image by brute-force intersection, row-major, `max_range` for no
/// hit.
pub fn naive_render(world: &WorldModel, cam: &PinholeCamera, max_range: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(cam.width * cam.height);
    for j in 0..cam.height {
        for i in 0..cam.width {
            let d = cam.pixel_ray(i, j);
            let r = naive_hit(&world.buildings, cam.origin, d).map_or(max_range, |t| t * d.norm());
            out.push(if r < max_range { r } else { max_range });
        }
    }
    out
}

/// Single-building world with uniform floors.
pub fn lone_building(seed: u64, floors: (u32, u32), floor_height: (f64, f64)) -> WorldModel {
    let params =
        WorldParams { num_buildings: 1, floors, floor_height, decoration_density: 0.0, ..WorldParams::default() };
    generate_world(seed, &params).expect("one building always fits")
}

/// Pose `standoff` meters out from the middle of the longest facade, 1.5 m
/// up, facing it.
pub fn facing_longest_facade(b: &Building, standoff: f64) -> (usize, DronePose) {
    let e = (0..b.num_facades()).max_by(|&i, &k| b.facade_length(i).total_cmp(&b.facade_length(k))).unwrap();
    let (a, c) = b.facade(e);
    let n = b.outward_normal(e);
    let mid = Vec2::new(0.5 * (a.x + c.x), 0.5 * (a.y + c.y));
    let p = Vec2::new(mid.x + n.x * standoff, mid.y + n.y * standoff);
    (e, DronePose::new(Vec3::new(p.x, p.y, 1.5), (-n.y).atan2(-n.x)))
}
