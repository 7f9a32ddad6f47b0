//! Ambient occlusion by ray casting against the mesh.
//!
//! Triangles are binned into unit grid cells; an occupancy pyramid over the
//! cells (cell sizes 1, 2, 4, ...) lets rays skip empty octree nodes.

use nalgebra::{Rotation3, Unit};
use rayon::prelude::*;

use super::FeatureError;
use crate::mesh::Vec3;

/// Distance-based falloff applied to a hit at distance `d`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AoFalloff {
    /// Openness `d / r` for hits within `r`.
    #[default]
    Linear,
    /// Any hit within `r` fully occludes the ray.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AoOptions {
    pub rays: usize,
    /// Maximum ray length in grid units.
    pub radius: f64,
    /// Ray origins are moved this far along the vertex normal.
    pub offset: f64,
    pub falloff: AoFalloff,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            rays: 160,
            radius: 64.0,
            offset: 0.5,
            falloff: AoFalloff::Linear,
        }
    }
}

/// Ray weight over the angle `phi` to the normal: `sin(phi) * sqrt(cos(phi))`.
pub fn w1(phi: f64) -> f64 {
    let c = phi.cos();
    if c <= 0.0 {
        return 0.0;
    }
    phi.sin() * c.sqrt()
}

/// `n` directions of a spherical Fibonacci lattice on the hemisphere around
/// `normal`. Heights are `z_i = 1 - (i + 1/2) / n` before rotation.
pub fn fibonacci_directions(n: usize, normal: Vec3) -> Result<Vec<Vec3>, FeatureError> {
    let len = normal.norm();
    if !(len > 0.0) || !len.is_finite() {
        return Err(FeatureError::ZeroNormal);
    }
    if n == 0 {
        return Err(FeatureError::Parameter("ray count must be >= 1".into()));
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let rot = rotation_to(normal / len);
    Ok((0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * i as f64;
            rot * Vec3::new(r * t.cos(), r * t.sin(), z)
        })
        .collect())
}

fn rotation_to(n: Vec3) -> Rotation3<f64> {
    Rotation3::rotation_between(&Vec3::z(), &n).unwrap_or_else(|| {
        // antiparallel: half turn about x
        Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::x()), std::f64::consts::PI)
    })
}

/// Quantizes openness in [0, 1] to 6 bits.
pub fn quantize_ao(ao: f64) -> u8 {
    (ao.clamp(0.0, 1.0) * 63.0).round() as u8
}

struct Bitset(Vec<u64>);

impl Bitset {
    fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
}

/// Triangles binned into unit cells plus an occupancy pyramid.
struct RayGrid<'a> {
    pos: &'a [Vec3],
    tris: &'a [[u32; 3]],
    origin: Vec3,
    dims: [usize; 3],
    /// `levels[l]` flags occupied nodes of size `2^l`.
    levels: Vec<(Bitset, [usize; 3])>,
    /// Sorted occupied cell ids and CSR ranges into `cell_tris`.
    cells: Vec<u64>,
    cell_offsets: Vec<u32>,
    cell_tris: Vec<u32>,
}

impl<'a> RayGrid<'a> {
    fn new(pos: &'a [Vec3], tris: &'a [[u32; 3]]) -> Self {
        let (lo, hi) = pos.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let origin = lo.map(|x| x.floor() - 1.0);
        let dims = [0, 1, 2].map(|a| ((hi[a] - origin[a]).floor() as usize + 2).max(1));
        let cell_of = |p: Vec3| -> [usize; 3] {
            [0, 1, 2].map(|a| ((p[a] - origin[a]).floor().max(0.0) as usize).min(dims[a] - 1))
        };
        let id = |c: [usize; 3]| (c[0] + dims[0] * (c[1] + dims[1] * c[2])) as u64;
        let mut pairs: Vec<(u64, u32)> = tris
            .par_iter()
            .enumerate()
            .flat_map_iter(|(ti, t)| {
                let a = t.map(|v| pos[v as usize]);
                let c0 = cell_of(a[0].inf(&a[1]).inf(&a[2]));
                let c1 = cell_of(a[0].sup(&a[1]).sup(&a[2]));
                let mut out = Vec::new();
                for z in c0[2]..=c1[2] {
                    for y in c0[1]..=c1[1] {
                        for x in c0[0]..=c1[0] {
                            out.push((id([x, y, z]), ti as u32));
                        }
                    }
                }
                out
            })
            .collect();
        pairs.par_sort_unstable();
        let mut cells = Vec::new();
        let mut cell_offsets = Vec::new();
        let cell_tris: Vec<u32> = pairs.iter().map(|p| p.1).collect();
        for (i, p) in pairs.iter().enumerate() {
            if cells.last() != Some(&p.0) {
                cells.push(p.0);
                cell_offsets.push(i as u32);
            }
        }
        cell_offsets.push(pairs.len() as u32);

        let mut levels = Vec::new();
        let mut ldims = dims;
        let mut bits = Bitset::new(dims.iter().product());
        for &c in &cells {
            bits.set(c as usize);
        }
        levels.push((bits, ldims));
        while ldims.iter().any(|&d| d > 1) {
            let nd = ldims.map(|d| d.div_ceil(2));
            let mut nb = Bitset::new(nd.iter().product());
            let (prev, pd) = levels.last().unwrap();
            for z in 0..pd[2] {
                for y in 0..pd[1] {
                    for x in 0..pd[0] {
                        if prev.get(x + pd[0] * (y + pd[1] * z)) {
                            nb.set(x / 2 + nd[0] * (y / 2 + nd[1] * (z / 2)));
                        }
                    }
                }
            }
            levels.push((nb, nd));
            ldims = nd;
        }
        Self {
            pos,
            tris,
            origin,
            dims,
            levels,
            cells,
            cell_offsets,
            cell_tris,
        }
    }

    /// Distance to the first triangle hit along `d` (unit) from `o`, up to
    /// `tmax`.
    fn first_hit(&self, o: Vec3, d: Vec3, tmax: f64) -> Option<f64> {
        let inv = d.map(|x| 1.0 / x);
        let local = o - self.origin;
        let ext = Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64);
        // clip the ray to the grid box
        let (mut t0, mut t1) = (0.0f64, tmax);
        for a in 0..3 {
            let (n, f) = ((0.0 - local[a]) * inv[a], (ext[a] - local[a]) * inv[a]);
            let (n, f) = if n <= f { (n, f) } else { (f, n) };
            if n.is_nan() || f.is_nan() {
                // parallel to the slab: inside iff between planes
                if local[a] < 0.0 || local[a] >= ext[a] {
                    return None;
                }
                continue;
            }
            t0 = t0.max(n);
            t1 = t1.min(f);
        }
        let mut t = t0;
        while t <= t1 {
            let p = local + d * t;
            // a point on a cell face belongs to the cell the ray enters
            let c = [0, 1, 2].map(|a| {
                let f = p[a].floor();
                if d[a] < 0.0 && f == p[a] {
                    f - 1.0
                } else {
                    f
                }
            });
            if (0..3).any(|a| c[a] < 0.0 || c[a] >= ext[a]) {
                break;
            }
            let c = c.map(|x| x as usize);
            // coarsest empty node containing the point
            let mut level = None;
            for (l, (bits, ld)) in self.levels.iter().enumerate().rev() {
                let s = [c[0] >> l, c[1] >> l, c[2] >> l];
                if !bits.get(s[0] + ld[0] * (s[1] + ld[1] * s[2])) {
                    level = Some(l);
                    break;
                }
            }
            let size = match level {
                Some(l) => (1usize << l) as f64,
                None => 1.0,
            };
            let l = level.unwrap_or(0);
            let lo = Vec3::new(
                ((c[0] >> l) << l) as f64,
                ((c[1] >> l) << l) as f64,
                ((c[2] >> l) << l) as f64,
            );
            let mut exit = f64::INFINITY;
            for a in 0..3 {
                if d[a] > 0.0 {
                    exit = exit.min((lo[a] + size - local[a]) * inv[a]);
                } else if d[a] < 0.0 {
                    exit = exit.min((lo[a] - local[a]) * inv[a]);
                }
            }
            if level.is_none() {
                let id = (c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])) as u64;
                if let Ok(k) = self.cells.binary_search(&id) {
                    let range = self.cell_offsets[k] as usize..self.cell_offsets[k + 1] as usize;
                    let best = self.cell_tris[range]
                        .iter()
                        .filter_map(|&ti| self.intersect(o, d, ti))
                        .filter(|&h| h <= exit + 1e-9 && h <= tmax)
                        .fold(f64::INFINITY, f64::min);
                    if best.is_finite() {
                        return Some(best);
                    }
                }
            }
            t = if exit > t { exit + 1e-9 } else { t + 1e-6 };
        }
        None
    }

    /// Moller-Trumbore, both faces, hits at positive distance.
    fn intersect(&self, o: Vec3, d: Vec3, ti: u32) -> Option<f64> {
        let t = self.tris[ti as usize];
        let (a, b, c) = (self.pos[t[0] as usize], self.pos[t[1] as usize], self.pos[t[2] as usize]);
        let e1 = b - a;
        let e2 = c - a;
        let p = d.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-14 {
            return None;
        }
        let inv = 1.0 / det;
        let s = o - a;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = d.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let h = e2.dot(&q) * inv;
        (h > 1e-9).then_some(h)
    }
}

/// Per-vertex openness in [0, 1]:
/// `sum_i w1(phi_i) * f(d_i) / sum_i w1(phi_i)` over Fibonacci rays, with
/// `f(d) = d / r` for hits within `r` (or 0 under [`AoFalloff::Binary`])
/// and 1 for misses. Vertices with a zero normal get 1.
pub fn compute_ambient_occlusion(
    positions: &[Vec3],
    normals: &[Vec3],
    triangles: &[[u32; 3]],
    opts: &AoOptions,
) -> Result<Vec<f64>, FeatureError> {
    if normals.len() != positions.len() {
        return Err(FeatureError::Parameter(format!(
            "{} normals for {} vertices",
            normals.len(),
            positions.len()
        )));
    }
    if opts.rays == 0 || !(opts.radius > 0.0) || !(opts.offset >= 0.0) {
        return Err(FeatureError::Parameter(format!("{opts:?}")));
    }
    if positions.is_empty() {
        return Ok(Vec::new());
    }
    let grid = RayGrid::new(positions, triangles);
    // the ray set in the +z frame, with weights
    let base = fibonacci_directions(opts.rays, Vec3::z())?;
    let weights: Vec<f64> = base.iter().map(|d| w1(d.z.clamp(-1.0, 1.0).acos())).collect();
    let wsum: f64 = weights.iter().sum();
    Ok((0..positions.len())
        .into_par_iter()
        .map(|v| {
            let n = normals[v];
            let len = n.norm();
            if !(len > 0.0) {
                return 1.0;
            }
            let n = n / len;
            let rot = rotation_to(n);
            let o = positions[v] + n * opts.offset;
            let mut acc = 0.0;
            for (d, &w) in base.iter().zip(&weights) {
                if w == 0.0 {
                    continue;
                }
                let f = match grid.first_hit(o, rot * d, opts.radius) {
                    None => 1.0,
                    Some(h) => match opts.falloff {
                        AoFalloff::Linear => (h / opts.radius).min(1.0),
                        AoFalloff::Binary => 0.0,
                    },
                };
                acc += w * f;
            }
            (acc / wsum).clamp(0.0, 1.0)
        })
        .collect())
}

/// [`compute_ambient_occlusion`] quantized to 6 bits.
pub fn ambient_occlusion(
    positions: &[Vec3],
    normals: &[Vec3],
    triangles: &[[u32; 3]],
    opts: &AoOptions,
) -> Result<Vec<u8>, FeatureError> {
    Ok(compute_ambient_occlusion(positions, normals, triangles, opts)?
        .into_iter()
        .map(quantize_ao)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w1_shape() {
        assert_eq!(w1(0.0), 0.0);
        assert!(w1(std::f64::consts::FRAC_PI_2).abs() < 1e-7);
        let (mut best, mut arg) = (0.0, 0.0);
        for i in 0..=1_000_000 {
            let phi = i as f64 * std::f64::consts::FRAC_PI_2 / 1e6;
            if w1(phi) > best {
                best = w1(phi);
                arg = phi;
            }
        }
        assert!((arg - 2f64.sqrt().atan()).abs() < 0.01);
        assert!((best - 0.6204).abs() < 1e-4);
    }

    #[test]
    fn hemisphere_and_spacing() {
        let n = Vec3::new(0.3, -0.5, 0.8).normalize();
        let d = fibonacci_directions(160, n).unwrap();
        assert_eq!(d.len(), 160);
        let ideal = (2.0 * std::f64::consts::PI / 160.0).sqrt();
        for (i, a) in d.iter().enumerate() {
            assert!((a.norm() - 1.0).abs() < 1e-12);
            assert!(a.dot(&n) >= 0.0);
            let nn = d
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.dot(b).clamp(-1.0, 1.0).acos())
                .fold(f64::INFINITY, f64::min);
            assert!(nn > ideal / 2.0 && nn < ideal * 2.0, "{nn} vs {ideal}");
        }
        let one = fibonacci_directions(1, n).unwrap();
        assert!(one[0].dot(&n) > 0.49);
        assert!(fibonacci_directions(4, Vec3::zeros()).is_err());
        let down = fibonacci_directions(8, -Vec3::z()).unwrap();
        assert!(down.iter().all(|d| d.z <= 0.0));
    }

    fn square(k: usize, z: f64, flip: bool) -> (Vec<Vec3>, Vec<[u32; 3]>) {
        let mut p = Vec::new();
        for y in 0..=k {
            for x in 0..=k {
                p.push(Vec3::new(x as f64, y as f64, z));
            }
        }
        let id = |x: usize, y: usize| (x + (k + 1) * y) as u32;
        let mut t = Vec::new();
        for y in 0..k {
            for x in 0..k {
                let (a, b, c, d) = (id(x, y), id(x + 1, y), id(x + 1, y + 1), id(x, y + 1));
                if flip {
                    t.push([a, c, b]);
                    t.push([a, d, c]);
                } else {
                    t.push([a, b, c]);
                    t.push([a, c, d]);
                }
            }
        }
        (p, t)
    }

    #[test]
    fn open_plane_is_unoccluded() {
        let (p, t) = square(40, 0.0, false);
        let n = vec![Vec3::z(); p.len()];
        let ao = compute_ambient_occlusion(&p, &n, &t, &AoOptions::default()).unwrap();
        assert!(ao.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn facing_plane_occludes_by_distance() {
        // two parallel planes 4 apart, normals facing each other
        let (mut p, mut t) = square(60, 0.0, false);
        let (p2, t2) = square(60, 4.0, true);
        let off = p.len() as u32;
        p.extend(p2);
        t.extend(t2.iter().map(|x| x.map(|v| v + off)));
        let mut n = vec![Vec3::z(); p.len()];
        for x in n.iter_mut().skip(off as usize) {
            *x = -Vec3::z();
        }
        let opts = AoOptions {
            offset: 0.0,
            radius: 16.0,
            ..Default::default()
        };
        let ao = compute_ambient_occlusion(&p, &n, &t, &opts).unwrap();
        let c = 30 + 61 * 30;
        // every ray hits at d = 4 / cos(phi); grazing rays beyond r stay open
        let dirs = fibonacci_directions(160, Vec3::z()).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for d in &dirs {
            let w = w1(d.z.acos());
            num += w * (4.0 / d.z / 16.0).min(1.0);
            den += w;
        }
        assert!((ao[c] - num / den).abs() < 1e-9, "{} vs {}", ao[c], num / den);
        let bin = AoOptions {
            falloff: AoFalloff::Binary,
            ..opts
        };
        let b = compute_ambient_occlusion(&p, &n, &t, &bin).unwrap();
        assert!(b[c] < ao[c]);
    }

    #[test]
    fn rigid_motion_invariance() {
        let (mut p, mut t) = square(30, 0.0, false);
        let (p2, t2) = square(30, 5.25, true);
        let off = p.len() as u32;
        p.extend(p2.iter().map(|q| q + Vec3::new(3.3, 2.7, 0.0)));
        t.extend(t2.iter().map(|x| x.map(|v| v + off)));
        let mut n = vec![Vec3::z(); p.len()];
        for x in n.iter_mut().skip(off as usize) {
            *x = -Vec3::z();
        }
        let opts = AoOptions {
            radius: 8.0,
            ..Default::default()
        };
        let a = compute_ambient_occlusion(&p, &n, &t, &opts).unwrap();
        assert!(a.iter().any(|&x| x < 0.99));

        let shift = Vec3::new(17.25, -3.5, 8.125);
        let moved: Vec<Vec3> = p.iter().map(|q| q + shift).collect();
        let b = compute_ambient_occlusion(&moved, &n, &t, &opts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{x} {y}");
        }

        // rotation also twists the ray set about the normal, so compare where
        // the scene is symmetric about it
        let r = Rotation3::from_euler_angles(0.4, -0.7, 1.1);
        let turned: Vec<Vec3> = p.iter().map(|q| r * q + shift).collect();
        let rn: Vec<Vec3> = n.iter().map(|q| r * q).collect();
        let c = compute_ambient_occlusion(&turned, &rn, &t, &opts).unwrap();
        for v in 0..off as usize {
            let q = p[v];
            if (10.0..=20.0).contains(&q.x) && (10.0..=20.0).contains(&q.y) {
                assert!((a[v] - c[v]).abs() < 1e-9, "{} {}", a[v], c[v]);
            }
        }
    }

    #[test]
    fn grid_matches_brute_force() {
        let (mut p, mut t) = square(30, 0.0, false);
        let (p2, t2) = square(30, 5.25, true);
        let off = p.len() as u32;
        p.extend(p2.iter().map(|q| q + Vec3::new(3.3, 2.7, 0.0)));
        t.extend(t2.iter().map(|x| x.map(|v| v + off)));
        let r = Rotation3::from_euler_angles(0.4, -0.7, 1.1);
        let p: Vec<Vec3> = p.iter().map(|q| r * q + Vec3::new(17.25, -3.5, 8.125)).collect();
        let grid = RayGrid::new(&p, &t);
        let mut bad = 0;
        for v in (0..p.len()).step_by(7) {
            let n = r * if v < off as usize { Vec3::z() } else { -Vec3::z() };
            let o = p[v] + n * 0.5;
            for d in fibonacci_directions(160, n).unwrap() {
                let brute = (0..t.len() as u32)
                    .filter_map(|ti| grid.intersect(o, d, ti))
                    .filter(|&h| h <= 64.0)
                    .fold(f64::INFINITY, f64::min);
                let fast = grid.first_hit(o, d, 64.0).unwrap_or(f64::INFINITY);
                if !(brute == fast || (brute - fast).abs() < 1e-9) {
                    bad += 1;
                    if bad < 5 {
                        eprintln!("v {v} d {d:?} brute {brute} fast {fast}");
                    }
                }
            }
        }
        assert_eq!(bad, 0);
    }

    #[test]
    fn quantization_round_trip() {
        for i in 0..=1000 {
            let a = i as f64 / 1000.0;
            assert!((quantize_ao(a) as f64 / 63.0 - a).abs() <= 1.0 / 126.0 + 1e-12);
        }
    }
}
