//! Dual vertex placement and x-quad emission.

use rayon::prelude::*;

use super::config::{ambiguous_facets, local_edge, ring_facets, ConfigCase, ConfigTable, EDGES};
use super::triangulate::triangulate_xquads;
use super::{MeshError, Vec3, XQuad, XQuadMesh};
use crate::codec::{strides, unravel, ContourData};
use crate::par::exclusive_scan;

/// Decider bits of a cell over its ambiguous facets.
fn cell_bits(contour: &ContourData, cell: usize, pattern: u8) -> u8 {
    let s = strides(contour.dims);
    let mut bits = 0u8;
    for (j, f) in ambiguous_facets(pattern).into_iter().enumerate() {
        let a = (f / 2) as usize;
        let p = cell + (f % 2) as usize * s[a];
        let key = 3 * p as u64 + a as u64;
        // facets are always listed; a miss can only come from a hand-made contour
        if contour.facet_bit(key).unwrap_or(false) {
            bits |= 1 << j;
        }
    }
    bits
}

fn cell_case<'t>(table: &'t ConfigTable, contour: &ContourData, i: usize) -> &'t ConfigCase {
    let c = contour.cells[i];
    table.case(c.pattern, cell_bits(contour, c.cell as usize, c.pattern))
}

/// Number of dual vertices the mesher will create.
pub fn count_vertices(contour: &ContourData) -> usize {
    let table = ConfigTable::shipped();
    (0..contour.cells.len())
        .into_par_iter()
        .map(|i| cell_case(table, contour, i).vertex_count())
        .sum()
}

/// Builds the triangulated x-quad mesh with the shipped configuration table.
pub fn build_mesh(contour: &ContourData) -> Result<XQuadMesh, MeshError> {
    build_mesh_with(contour, ConfigTable::shipped())
}

pub fn build_mesh_with(contour: &ContourData, table: &ConfigTable) -> Result<XQuadMesh, MeshError> {
    if contour.is_empty() {
        return Ok(XQuadMesh {
            vertex_quad_offsets: vec![0],
            ..Default::default()
        });
    }
    if contour.precision == 0 || contour.offsets.len() != contour.edges.len() {
        return Err(MeshError::NotQuantized);
    }
    let dims = contour.dims;
    let s = strides(dims);
    let case_ids: Vec<usize> = (0..contour.cells.len())
        .into_par_iter()
        .map(|i| {
            let c = contour.cells[i];
            table.case_index(c.pattern, cell_bits(contour, c.cell as usize, c.pattern))
        })
        .collect();
    let counts: Vec<usize> = case_ids
        .iter()
        .map(|&k| table.cases[k].vertex_count())
        .collect();
    let (base, total) = exclusive_scan(&counts);

    // dual vertices: centroid of each arc's crossings
    let mut positions = vec![Vec3::zeros(); total];
    let mut vertex_cell = vec![0u64; total];
    let mut vertex_slot = vec![0u8; total];
    let mut chunks: Vec<(&mut [Vec3], &mut [u64], &mut [u8])> = Vec::with_capacity(counts.len());
    {
        let (mut p, mut c, mut sl) = (&mut positions[..], &mut vertex_cell[..], &mut vertex_slot[..]);
        for &n in &counts {
            let (a, b) = std::mem::take(&mut p).split_at_mut(n);
            let (ca, cb) = std::mem::take(&mut c).split_at_mut(n);
            let (sa, sb) = std::mem::take(&mut sl).split_at_mut(n);
            chunks.push((a, ca, sa));
            p = b;
            c = cb;
            sl = sb;
        }
    }
    chunks
        .into_par_iter()
        .enumerate()
        .try_for_each(|(i, (pos, cells, slots))| -> Result<(), MeshError> {
            let cell = contour.cells[i].cell;
            let case = &table.cases[case_ids[i]];
            for (k, &mask) in case.vertex_edges.iter().enumerate() {
                let mut acc = Vec3::zeros();
                let mut n = 0;
                for (e, &(corner, axis)) in EDGES.iter().enumerate() {
                    if mask & (1 << e) == 0 {
                        continue;
                    }
                    let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
                    let p = cell as usize + o[0] as usize * s[0] + o[1] as usize * s[1]
                        + o[2] as usize * s[2];
                    let key = 3 * p as u64 + axis as u64;
                    let idx = contour.edge_index(key).ok_or(MeshError::MissingCell(key))?;
                    acc += Vec3::from(contour.crossing(idx));
                    n += 1;
                }
                pos[k] = acc / n as f64;
                cells[k] = cell;
                slots[k] = k as u8;
            }
            Ok(())
        })?;

    // one x-quad per active edge whose 4 cells exist
    const RING: [(i64, i64); 4] = [(-1, -1), (0, -1), (0, 0), (-1, 0)];
    let quads: Vec<Option<XQuad>> = contour
        .edges
        .par_iter()
        .map(|&key| -> Result<Option<XQuad>, MeshError> {
            let p = (key / 3) as usize;
            let a = (key % 3) as usize;
            let (u, v) = ((a + 1) % 3, (a + 2) % 3);
            let xyz = unravel(dims, p);
            let mut groups = [[0u32; 2]; 4];
            for (k, &(du, dv)) in RING.iter().enumerate() {
                let cu = xyz[u] as i64 + du;
                let cv = xyz[v] as i64 + dv;
                if cu < 0 || cv < 0 || cu as usize + 1 >= dims[u] || cv as usize + 1 >= dims[v] {
                    return Ok(None);
                }
                let cell = p - (-du) as usize * s[u] - (-dv) as usize * s[v];
                let ci = contour
                    .cell_index(cell as u64)
                    .ok_or(MeshError::MissingCell(key))?;
                let corner = (((-du) as u8) << u) | (((-dv) as u8) << v);
                let e = local_edge(corner, a as u8);
                let (fp, fn_) = ring_facets(e);
                let case = &table.cases[case_ids[ci]];
                let vp = case.edge_vertex[e as usize][fp as usize];
                let vn = case.edge_vertex[e as usize][fn_ as usize];
                let b = base[ci] as u32;
                groups[k] = [b + vp as u32, b + vn as u32];
            }
            if !contour.signs.get(p) {
                groups.reverse();
                for g in groups.iter_mut() {
                    g.swap(0, 1);
                }
            }
            Ok(Some(XQuad { groups, edge: key }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let quads: Vec<XQuad> = quads.into_iter().flatten().collect();

    let mut internal_tris = Vec::new();
    for (i, &k) in case_ids.iter().enumerate() {
        let b = base[i] as u32;
        for t in &table.cases[k].internal_tris {
            internal_tris.push(t.map(|x| b + x as u32));
        }
    }

    let mut mesh = XQuadMesh {
        positions,
        vertex_cell,
        vertex_slot,
        quads,
        internal_tris,
        ..Default::default()
    };
    mesh.build_adjacency();
    triangulate_xquads(&mut mesh);
    Ok(mesh)
}
