mod oracles;

use oracles::naive_render;
use proptest::prelude::*;
use vld_core::geometry::{Vec2, Vec3};
use vld_core::world::{
    generate_world, render_depth, Bounds, Building, CameraRig, DronePose, View, WorldModel, WorldParams,
};

fn slab(min: Vec2, max: Vec2, floors: u32) -> WorldModel {
    WorldModel {
        seed: 0,
        bounds: Bounds { min: Vec2::new(-100.0, -100.0), max: Vec2::new(100.0, 100.0) },
        buildings: vec![Building {
            footprint: vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)],
            floor_height: 3.0,
            num_floors: floors,
            windows: Vec::new(),
        }],
    }
}

#[test]
fn perpendicular_wall_center_range() {
    // odd resolution puts a pixel center on the optical axis
    let rig = CameraRig::default().with_resolution(129, 129);
    for d in [2.5, 7.0, 13.25, 41.0, 99.0] {
        let world = slab(Vec2::new(-50.0, d), Vec2::new(50.0, d + 10.0), 10);
        let pose = DronePose::new(Vec3::new(0.0, 0.0, 12.0), std::f64::consts::FRAC_PI_2);
        let img = render_depth(&world, &pose, &rig, View::FRONT).unwrap();
        assert!((img.get(64, 64) - d).abs() <= 1e-6, "{d}: {}", img.get(64, 64));
    }
}

fn fuzz_world() -> WorldModel {
    let p = WorldParams { num_buildings: 3, extent: 60.0, min_gap: 8.0, radius: (5.0, 12.0), ..WorldParams::default() };
    generate_world(11, &p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_renders_match_brute_force(
        x in -60.0f64..60.0, y in -60.0f64..60.0, z in 0.5f64..45.0,
        yaw in -3.2f64..3.2, slot in 0usize..5,
    ) {
        let world = fuzz_world();
        let pose = DronePose::new(Vec3::new(x, y, z), yaw);
        prop_assume!(world.building_containing(pose.position).is_none());
        let rig = CameraRig::default().with_resolution(16, 16);
        let view = View::ALL[slot];
        let img = render_depth(&world, &pose, &rig, view).unwrap();
        let reference = naive_render(&world, &rig.camera(&pose, view), rig.max_range);
        for (k, (&a, &b)) in img.data.iter().zip(&reference).enumerate() {
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0), "pixel {k}: {a} vs {b}");
        }
    }
}
