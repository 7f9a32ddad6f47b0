use exa_core::codec::{build_sign_field, quantize_offsets};
use exa_core::features::*;
use exa_core::mesh::{build_mesh, edge_audit, Vec3, XQuadMesh};
use exa_core::volume::{generate_phantom, PhantomSpec, Volume3D};

fn mesh_of(vol: &Volume3D) -> XQuadMesh {
    let mut c = build_sign_field(vol, 0.5);
    quantize_offsets(&mut c, vol, 8).unwrap();
    build_mesh(&c).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

/// Default feature schedule: 32 normal iterations, 8 vertex iterations.
fn smooth(m: &mut XQuadMesh) -> Vec<CurvaturePair> {
    smooth_face_normals(m, 32);
    update_vertex_positions(m, 8);
    estimate_curvatures(m)
}

fn ramp(sd: f64) -> f32 {
    (0.5 - sd).clamp(0.0, 1.0) as f32
}

#[test]
fn sphere_curvature_matches_radius() {
    let vol = generate_phantom(&PhantomSpec::ball(48, 20.0)).unwrap();
    let mut m = mesh_of(&vol);
    let k = smooth(&mut m);
    let k1 = median(k.iter().map(|c| c.k1).collect());
    let k2 = median(k.iter().map(|c| c.k2).collect());
    assert!((k1 / 0.05 - 1.0).abs() < 0.15, "k1 {k1}");
    assert!((k2 / 0.05 - 1.0).abs() < 0.15, "k2 {k2}");
    assert!(k.iter().all(|c| c.k1 >= c.k2));
}

#[test]
fn cylinder_has_one_flat_direction() {
    let (n, c) = (48, 23.5);
    let vol = Volume3D::from_fn([n, n, n], |x, y, _| {
        ramp((x as f64 - c).hypot(y as f64 - c) - 15.0)
    })
    .unwrap();
    let mut m = mesh_of(&vol);
    let k = smooth(&mut m);
    let away: Vec<usize> = (0..m.vertex_count())
        .filter(|&v| (8.0..40.0).contains(&m.positions[v].z))
        .collect();
    let k1 = median(away.iter().map(|&v| k[v].k1).collect());
    let k2 = median(away.iter().map(|&v| k[v].k2).collect());
    assert!(k1 > 0.0);
    assert!(k2.abs() <= 0.2 * k1, "k1 {k1} k2 {k2}");
}

#[test]
fn tilted_plane_is_flat() {
    let (n, c) = (48, Vec3::repeat(23.5));
    let nrm = Vec3::new(0.3, 0.5, 1.0).normalize();
    let vol = Volume3D::from_fn([n, n, n], |x, y, z| {
        ramp((Vec3::new(x as f64, y as f64, z as f64) - c).dot(&nrm))
    })
    .unwrap();
    let mut m = mesh_of(&vol);
    let k = smooth(&mut m);
    let inner: Vec<usize> = (0..m.vertex_count())
        .filter(|&v| (m.positions[v] - c).norm() < 16.0)
        .collect();
    let flat = inner
        .iter()
        .filter(|&&v| classify_shape(k[v].k1, k[v].k2, DEFAULT_C_MIN).unwrap() == 0)
        .count();
    assert!(flat as f64 >= 0.99 * inner.len() as f64, "{flat} of {}", inner.len());
}

#[test]
fn identical_normals_are_a_fixed_point() {
    let vol = Volume3D::from_fn([16, 16, 16], |_, _, z| ramp(z as f64 - 7.3)).unwrap();
    let mut m = mesh_of(&vol);
    let before = m.quad_normals.clone();
    smooth_face_normals(&mut m, 32);
    for (a, b) in before.iter().zip(&m.quad_normals) {
        assert!((a - b).norm() < 1e-9);
    }
    let p0 = m.positions.clone();
    update_vertex_positions(&mut m, 8);
    for (a, b) in p0.iter().zip(&m.positions) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn smoothing_denoises_a_noisy_sphere() {
    let spec = PhantomSpec::ball(48, 20.0).with_noise(0.1, 7);
    let mut m = mesh_of(&generate_phantom(&spec).unwrap());
    assert!(edge_audit(&m.triangles).is_closed_manifold());
    let c = Vec3::repeat(23.5);
    let angle_error = |m: &XQuadMesh| {
        let (mut s, mut k) = (0.0, 0);
        for q in 0..m.quads.len() {
            let n = m.quad_normals[q];
            if n.norm() > 0.0 {
                s += n.angle(&(m.quad_centroid(q) - c));
                k += 1;
            }
        }
        s / k as f64
    };
    let rms = |m: &XQuadMesh| {
        let s: f64 = m.positions.iter().map(|p| ((p - c).norm() - 20.0).powi(2)).sum();
        (s / m.vertex_count() as f64).sqrt()
    };
    let e0 = angle_error(&m);
    smooth_face_normals(&mut m, 32);
    let e1 = angle_error(&m);
    assert!(e1 <= 0.5 * e0, "{e0} -> {e1}");
    for n in &m.quad_normals {
        assert!(n.norm() == 0.0 || (n.norm() - 1.0).abs() < 1e-6);
    }
    let mut last = rms(&m);
    for _ in 0..8 {
        let before = m.positions.clone();
        update_vertex_positions(&mut m, 1);
        for (a, b) in before.iter().zip(&m.positions) {
            assert!((a - b).norm() <= 0.5 + 1e-12);
        }
        let r = rms(&m);
        assert!(r <= last, "{last} -> {r}");
        last = r;
    }
    for n in &m.vertex_normals {
        assert!((n.norm() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn cube_edges_stay_sharp() {
    let (n, c, h) = (32, 15.5, 8.0);
    let vol = Volume3D::from_fn([n, n, n], |x, y, z| {
        let d = [x, y, z].map(|v| (v as f64 - c).abs() - h);
        ramp(d[0].max(d[1]).max(d[2]))
    })
    .unwrap();
    let mut m = mesh_of(&vol);
    smooth_face_normals(&mut m, 32);
    // faces more than one ring away from an edge keep their axis normal
    for q in 0..m.quads.len() {
        let p = m.quad_centroid(q) - Vec3::repeat(c);
        let a = p.abs();
        let mut sorted = [a.x, a.y, a.z];
        sorted.sort_by(|x, y| x.total_cmp(y));
        if sorted[2] - sorted[1] < 2.0 {
            continue;
        }
        let axis = a.iamax();
        let mut expect = Vec3::zeros();
        expect[axis] = p[axis].signum();
        assert!(m.quad_normals[q].dot(&expect) > 0.999, "{p:?} {:?}", m.quad_normals[q]);
    }
}

#[test]
fn nested_box_splits_envelope_from_tablet() {
    let dims = [64, 56, 40];
    let mut m = mesh_of(&generate_phantom(&PhantomSpec::nested_box(dims)).unwrap());
    let k = smooth(&mut m);
    let labels = segment_mesh(m.vertex_count(), &m.triangles, &k, -0.5).unwrap();
    let parts = labels.iter().copied().filter(|&l| l > 0).max().unwrap();
    assert!(parts >= 2);
    // outer envelope faces vs tablet faces
    let c = dims.map(|d| (d as f64 - 1.0) / 2.0);
    let h_outer = c.map(|x| x - 2.0);
    let h_inner = c.map(|x| x - 8.0);
    let mut outer = std::collections::BTreeSet::new();
    let mut tablet = std::collections::BTreeSet::new();
    for (v, p) in m.positions.iter().enumerate() {
        let d: Vec<f64> = (0..3).map(|a| (p[a] - c[a]).abs()).collect();
        if (0..3).any(|a| d[a] > h_outer[a] - 1.0) {
            outer.insert(labels[v]);
        } else if (0..3).all(|a| d[a] < h_inner[a] + 1.0) {
            tablet.insert(labels[v]);
        }
    }
    assert!(!outer.is_empty() && !tablet.is_empty());
    assert!(outer.is_disjoint(&tablet), "{outer:?} {tablet:?}");
}

#[test]
fn sphere_is_one_partition() {
    let mut m = mesh_of(&generate_phantom(&PhantomSpec::ball(40, 14.0)).unwrap());
    let k = smooth(&mut m);
    let labels = segment_mesh(m.vertex_count(), &m.triangles, &k, -0.5).unwrap();
    assert!(labels.iter().all(|&l| l == 1));
}

#[test]
fn enclosed_cavity_is_dark() {
    // solid block with a 3^3 voxel cavity
    let n = 24;
    let vol = Volume3D::from_fn([n, n, n], |x, y, z| {
        let solid = [x, y, z].iter().all(|&v| (2..n - 2).contains(&v));
        let cavity = [x, y, z].iter().all(|&v| (11..14).contains(&v));
        (solid && !cavity) as u8 as f32
    })
    .unwrap();
    let mut m = mesh_of(&vol);
    smooth_face_normals(&mut m, 32);
    update_vertex_positions(&mut m, 8);
    let ao = compute_ambient_occlusion(&m.positions, &m.vertex_normals, &m.triangles, &AoOptions::default())
        .unwrap();
    assert!(ao.iter().all(|a| (0.0..=1.0).contains(a)));
    let c = Vec3::repeat(12.0);
    let mut cavity = 0;
    for (v, &a) in ao.iter().enumerate() {
        if (m.positions[v] - c).norm() < 4.0 {
            cavity += 1;
            assert!(a <= 0.05, "{a}");
        } else {
            assert!(a >= 0.95, "{a}");
        }
    }
    assert!(cavity > 0);
}

#[test]
fn features_do_not_depend_on_thread_count() {
    let spec = PhantomSpec::nested_box([40, 36, 30]).with_noise(0.05, 3);
    let vol = generate_phantom(&spec).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let mut m = mesh_of(&vol);
                let k = smooth(&mut m);
                let ao = compute_ambient_occlusion(
                    &m.positions,
                    &m.vertex_normals,
                    &m.triangles,
                    &AoOptions { rays: 32, ..Default::default() },
                )
                .unwrap();
                (m.positions, m.vertex_normals, k, ao)
            })
    };
    let a = run(1);
    let b = run(8);
    assert!(a.0 == b.0 && a.1 == b.1 && a.2 == b.2 && a.3 == b.3);
}
