use super::{CurvaturePair, FeatureError};

/// Partition labels available besides 0 (boundary).
pub const MAX_PARTITIONS: usize = 7;

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Labels vertices with `k1 < k1_threshold` as boundary (0) and the
/// connected components of the remaining vertices, linked by triangle
/// edges, as 1..=7 by decreasing size (ties by lowest vertex id).
/// Components beyond the seventh are merged into label 7.
pub fn segment_mesh(
    vertex_count: usize,
    triangles: &[[u32; 3]],
    curvatures: &[CurvaturePair],
    k1_threshold: f64,
) -> Result<Vec<u8>, FeatureError> {
    if !(k1_threshold < 0.0) {
        return Err(FeatureError::Parameter(format!(
            "k1 threshold must be negative, got {k1_threshold}"
        )));
    }
    if curvatures.len() != vertex_count {
        return Err(FeatureError::Parameter(format!(
            "{} curvatures for {vertex_count} vertices",
            curvatures.len()
        )));
    }
    let boundary: Vec<bool> = curvatures.iter().map(|c| c.k1 < k1_threshold).collect();
    let mut parent: Vec<u32> = (0..vertex_count as u32).collect();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if boundary[a as usize] || boundary[b as usize] {
                continue;
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                // lower id becomes the root, so roots are component minima
                let (lo, hi) = (ra.min(rb), ra.max(rb));
                parent[hi as usize] = lo;
            }
        }
    }
    let mut size = vec![0usize; vertex_count];
    for v in 0..vertex_count as u32 {
        if !boundary[v as usize] {
            let r = find(&mut parent, v);
            size[r as usize] += 1;
        }
    }
    let mut roots: Vec<u32> = (0..vertex_count as u32)
        .filter(|&v| !boundary[v as usize] && parent[v as usize] == v)
        .collect();
    roots.sort_by_key(|&r| (std::cmp::Reverse(size[r as usize]), r));
    if roots.len() > MAX_PARTITIONS {
        log::warn!(
            "{} components; merging the smallest {} into partition {MAX_PARTITIONS}",
            roots.len(),
            roots.len() - MAX_PARTITIONS + 1
        );
    }
    let mut label_of_root = vec![0u8; vertex_count];
    for (i, &r) in roots.iter().enumerate() {
        label_of_root[r as usize] = (i + 1).min(MAX_PARTITIONS) as u8;
    }
    Ok((0..vertex_count as u32)
        .map(|v| {
            if boundary[v as usize] {
                0
            } else {
                label_of_root[find(&mut parent, v) as usize]
            }
        })
        .collect())
}
