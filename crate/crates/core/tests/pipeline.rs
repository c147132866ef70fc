mod common;

use common::{quad_down, quad_up, quadrature};
use rlcuts::estimators::{end_of_pass_update, render, ShadingPoint};
use rlcuts::hash_grid::{CellHandle, CellKey};
use rlcuts::light_tree::{EmitterRecord, NodeId};
use rlcuts::scene::{Camera, Material, SceneAccel};
use rlcuts::{Cut, CutConfig, HashGrid, HashGridParams, LightTree, RenderConfig, SamplerKind, Scene, Vec3};

fn line_tree(n: usize) -> LightTree {
    let records: Vec<EmitterRecord> = (0..n)
        .map(|i| EmitterRecord {
            triangle_id: i,
            centroid: Vec3::new(i as f64 / (n - 1) as f64, 0.0, 0.0),
            energy: 1.0,
        })
        .collect();
    LightTree::build(&records).unwrap()
}

fn node_for(tree: &LightTree, b: u32, e: u32) -> NodeId {
    tree.nodes().iter().position(|n| n.begin == b && n.end == e).unwrap() as NodeId
}

fn key(qx: i32) -> CellKey {
    CellKey {
        qx,
        qy: 0,
        qz: 0,
        qn: 0,
        level: 0,
    }
}

#[test]
fn end_of_pass_adapts_only_touched_cells() {
    let tree = line_tree(8);
    let ids = [(0, 2), (2, 4), (4, 6), (6, 8)].map(|(b, e)| node_for(&tree, b, e)).to_vec();
    let template = Cut::from_parts(&tree, ids, vec![8.0, 1.0, 1.0, 2.0]);
    let mut grid = HashGrid::new(HashGridParams::default(), template.clone()).unwrap();
    let (a, b) = (grid.lookup_or_insert(key(0)), grid.lookup_or_insert(key(1)));
    assert!(matches!((a, b), (CellHandle::Slot(_), CellHandle::Slot(_))));
    grid.cell(a).unwrap().mark_touched();

    let cfg = CutConfig {
        size: 4,
        threshold: 2.0,
        eps_q: Some(1e-6),
        ..CutConfig::default()
    };
    let update = end_of_pass_update(&mut grid, &tree, &cfg);
    assert_eq!((update.touched_cells, update.split_collapse_changes), (1, 1));

    let touched = grid.cell(a).unwrap().lock().clone();
    assert_eq!(touched.ends(), &[1, 2, 4, 8]);
    assert_eq!(touched.q(), &[4.0, 4.0, 1.0, 3.0]);
    assert_eq!(touched.cdf(), &[4.0, 8.0, 9.0, 12.0]);
    assert_eq!(*grid.cell(b).unwrap().lock(), template);

    // Marks are cleared, so a second update leaves everything alone.
    let again = end_of_pass_update(&mut grid, &tree, &cfg);
    assert_eq!((again.touched_cells, again.split_collapse_changes), (0, 0));
}

/// Floor lit by a bright panel that a blocker half hides from the origin, and a dim panel.
fn probe_scene() -> Scene {
    let materials = vec![
        Material::diffuse(Vec3::new(0.8, 0.7, 0.6)),
        Material::emitter(Vec3::new(6.0, 5.0, 4.0)),
        Material::emitter(Vec3::splat(0.5)),
    ];
    let mut tris = quad_up(-3.0, -3.0, 6.0, 0.0, 0).to_vec();
    tris.extend(quad_down(0.4, -0.3, 0.6, 1.5, 1));
    tris.extend(quad_down(-2.0, 0.5, 0.5, 1.6, 2));
    tris.extend(quad_up(0.2, -0.2, 0.2, 0.8, 0));
    // A narrow camera straight down at the origin.
    let camera = Camera {
        origin: Vec3::new(0.0, 1.2, 0.0),
        look_at: Vec3::ZERO,
        up: Vec3::new(0.0, 0.0, -1.0),
        vfov_degrees: 0.2,
        width: 1,
        height: 1,
    };
    Scene::new(tris, materials, camera).unwrap()
}

#[test]
fn single_pixel_matches_quadrature_for_every_sampler() {
    let scene = probe_scene();
    let accel = SceneAccel::build(&scene).unwrap();
    let sp = ShadingPoint {
        position: Vec3::ZERO,
        normal: Vec3::new(0.0, 1.0, 0.0),
        albedo: scene.materials[0].albedo,
    };
    let exact = quadrature(&scene, &accel, &sp, 200).luminance();
    let open = {
        let tris = scene.triangles[..scene.triangles.len() - 2].to_vec();
        let s = Scene::new(tris, scene.materials.clone(), scene.camera).unwrap();
        quadrature(&s, &SceneAccel::build(&s).unwrap(), &sp, 200).luminance()
    };
    assert!(exact < 0.9 * open, "blocker must cast a partial shadow: {exact} vs {open}");

    let ctx = rlcuts::SceneContext::new(&scene).unwrap();
    for sampler in SamplerKind::ALL {
        let config = RenderConfig {
            spp: 1 << 18,
            passes: 16,
            sampler,
            cut: CutConfig::with_size(2),
            ..RenderConfig::default()
        };
        let value = render(&ctx, &config).unwrap().image.pixels[0].luminance();
        let rel = (value - exact).abs() / exact;
        assert!(rel < 0.01, "{sampler}: {value} vs {exact}");
    }
}

#[test]
fn full_grid_sends_new_points_to_the_fallback() {
    let tree = line_tree(8);
    let cut = Cut::init(&tree, 4, 1e-6);
    let grid = HashGrid::new(
        HashGridParams {
            capacity: 4,
            ..HashGridParams::default()
        },
        cut,
    )
    .unwrap();
    let handles: Vec<_> = (0..64).map(|i| grid.lookup_or_insert(key(i))).collect();
    assert_eq!(grid.occupied(), 4);
    let fallbacks = handles.iter().filter(|h| **h == CellHandle::Fallback).count();
    assert_eq!(fallbacks, 60);
    assert_eq!(grid.fallback_hits(), 60);
}

#[test]
fn samplers_agree_on_a_crop() {
    let mut scene = probe_scene();
    scene.camera = Camera {
        origin: Vec3::new(0.0, 2.5, 1.0),
        look_at: Vec3::new(0.0, 0.0, -0.2),
        up: Vec3::new(0.0, 1.0, 0.0),
        vfov_degrees: 50.0,
        width: 32,
        height: 32,
    };
    let ctx = rlcuts::SceneContext::new(&scene).unwrap();
    let images: Vec<_> = SamplerKind::ALL
        .iter()
        .map(|&sampler| {
            let config = RenderConfig {
                spp: 4096,
                passes: 16,
                sampler,
                cut: CutConfig::with_size(2),
                ..RenderConfig::default()
            };
            render(&ctx, &config).unwrap().image
        })
        .collect();
    for a in 0..3 {
        for b in a + 1..3 {
            let rel: Vec<f64> = images[a]
                .pixels
                .iter()
                .zip(&images[b].pixels)
                .map(|(x, y)| {
                    let (x, y) = (x.luminance(), y.luminance());
                    (x - y).abs() / (0.5 * (x + y)).max(1e-3)
                })
                .collect();
            let mean = rel.iter().sum::<f64>() / rel.len() as f64;
            assert!(mean < 0.02, "samplers {a} and {b}: mean relative difference {mean}");
        }
    }
}
