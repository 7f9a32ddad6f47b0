use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use smallvec::SmallVec;

use super::median::geometric_median;
use super::CurvaturePair;
use crate::mesh::{Vec3, XQuadMesh};

const EPS: f64 = 1e-12;

/// Normal curvature along the chord from `p1` to `p2`:
/// `(n2 - n1) . (p2 - p1) / |p2 - p1|^2`. `None` for coincident points.
pub fn normal_curvature(p1: Vec3, n1: Vec3, p2: Vec3, n2: Vec3) -> Option<f64> {
    let d = p2 - p1;
    let l2 = d.norm_squared();
    (l2 >= EPS).then(|| (n2 - n1).dot(&d) / l2)
}

fn tangent_frame(n: Vec3) -> (Vec3, Vec3) {
    let a = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (a - n * n.dot(&a)).normalize();
    (e1, n.cross(&e1))
}

/// Shape operator of one x-quad as a symmetric 3x3 tensor in the face's
/// tangent plane. Each group is reduced to the mean of its vertices'
/// positions and normals; every pair of groups gives a normal curvature
/// sample along its chord, and the 2x2 operator is least-squares fitted to
/// the samples.
fn face_tensor(mesh: &XQuadMesh, q: usize) -> Option<Matrix3<f64>> {
    let quad = &mesh.quads[q];
    let n_face = mesh.quad_normals[q];
    let (pos, nrm) = (&mesh.positions, &mesh.vertex_normals);
    let g: [(Vec3, Vec3); 4] = quad.groups.map(|[a, b]| {
        let (a, b) = (a as usize, b as usize);
        ((pos[a] + pos[b]) * 0.5, (nrm[a] + nrm[b]) * 0.5)
    });
    let mut samples: SmallVec<[(Vector2<f64>, f64); 6]> = SmallVec::new();
    let frame = (n_face.norm() > 0.0).then(|| tangent_frame(n_face));
    for i in 0..4 {
        for j in i + 1..4 {
            let Some(k) = normal_curvature(g[i].0, g[i].1, g[j].0, g[j].1) else {
                continue;
            };
            let dir = match frame {
                Some((e1, e2)) => {
                    let d = g[j].0 - g[i].0;
                    let t = Vector2::new(d.dot(&e1), d.dot(&e2));
                    let l = t.norm();
                    if l < 1e-9 {
                        continue;
                    }
                    t / l
                }
                None => continue,
            };
            samples.push((dir, k));
        }
    }
    let (e1, e2) = frame?;
    if samples.len() < 3 {
        return None;
    }
    // least squares for k(t) = a tx^2 + 2 b tx ty + c ty^2
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (t, k) in &samples {
        let row = Vector3::new(t.x * t.x, 2.0 * t.x * t.y, t.y * t.y);
        ata += row * row.transpose();
        atb += row * *k;
    }
    if ata.determinant().abs() <= 1e-9 {
        return None;
    }
    let abc = ata.try_inverse()? * atb;
    Some(
        e1 * e1.transpose() * abc.x
            + (e1 * e2.transpose() + e2 * e1.transpose()) * abc.y
            + e2 * e2.transpose() * abc.z,
    )
}

/// How the shape operators of a vertex's x-quads are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexReduce {
    /// Area-weighted mean.
    #[default]
    Mean,
    /// Area-weighted vector median of the three tensor components.
    Median,
}

/// Per-vertex principal curvatures with the default [`VertexReduce`].
pub fn estimate_curvatures(mesh: &XQuadMesh) -> Vec<CurvaturePair> {
    estimate_curvatures_with(mesh, VertexReduce::default())
}

/// Per-vertex principal curvatures. The incident x-quads' shape operators are
/// expressed in the vertex tangent frame, reduced per `reduce`, and
/// diagonalized. Vertices without any estimate get (0, 0).
pub fn estimate_curvatures_with(mesh: &XQuadMesh, reduce: VertexReduce) -> Vec<CurvaturePair> {
    let faces: Vec<Option<Matrix3<f64>>> = (0..mesh.quads.len())
        .into_par_iter()
        .map(|q| face_tensor(mesh, q))
        .collect();
    (0..mesh.vertex_count())
        .into_par_iter()
        .map(|v| {
            let n = mesh.vertex_normals[v];
            if !(n.norm() > 0.0) {
                return CurvaturePair::default();
            }
            let (e1, e2) = tangent_frame(n.normalize());
            let mut pts = Vec::new();
            let mut w = Vec::new();
            for &q in mesh.quads_of(v) {
                if let Some(t) = &faces[q as usize] {
                    pts.push(Vector3::new(
                        e1.dot(&(t * e1)),
                        e1.dot(&(t * e2)),
                        e2.dot(&(t * e2)),
                    ));
                    w.push(mesh.quad_areas[q as usize]);
                }
            }
            if pts.is_empty() {
                return CurvaturePair::default();
            }
            let m = match reduce {
                VertexReduce::Mean => {
                    let total: f64 = w.iter().sum();
                    if total > 0.0 {
                        pts.iter().zip(&w).map(|(p, w)| p * *w).sum::<Vector3<f64>>() / total
                    } else {
                        pts.iter().sum::<Vector3<f64>>() / pts.len() as f64
                    }
                }
                VertexReduce::Median => geometric_median(&pts, &w),
            };
            let ev = Matrix2::new(m.x, m.y, m.y, m.z).symmetric_eigenvalues();
            CurvaturePair::new(ev[0], ev[1])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sphere_chord() {
        let k = normal_curvature(Vec3::x(), Vec3::x(), Vec3::y(), Vec3::y()).unwrap();
        assert!((k - 1.0).abs() < 1e-15);
    }

    #[test]
    fn plane_is_flat() {
        let k = normal_curvature(Vec3::zeros(), Vec3::z(), Vec3::x(), Vec3::z()).unwrap();
        assert_eq!(k, 0.0);
        assert!(normal_curvature(Vec3::x(), Vec3::z(), Vec3::x(), Vec3::y()).is_none());
    }

    #[test]
    fn cylinder_chords() {
        let r = 5.0;
        let at = |t: f64, z: f64| (Vec3::new(r * t.cos(), r * t.sin(), z), Vec3::new(t.cos(), t.sin(), 0.0));
        let (p1, n1) = at(0.0, 0.0);
        let (p2, n2) = at(0.3, 0.0);
        assert!((normal_curvature(p1, n1, p2, n2).unwrap() - 1.0 / r).abs() < 1e-12);
        let (p3, n3) = at(0.0, 1.0);
        assert_eq!(normal_curvature(p1, n1, p3, n3).unwrap(), 0.0);
    }
}
