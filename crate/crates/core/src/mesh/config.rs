//! Cell configuration table generated by facet walking.
//!
//! Corner `c` of a cell sits at offset `(c & 1, c >> 1 & 1, c >> 2 & 1)`.
//! Local edges are numbered by `(lower corner, axis)` in corner-major order;
//! facet `2 * axis + side` has normal `axis`. A case is a sign pattern together
//! with one decider bit per ambiguous facet of that pattern.

use std::sync::OnceLock;

static SHIPPED: &[u8] = include_bytes!("../../data/dmc_config.bin");

const MAGIC: &[u8; 4] = b"DMC1";
pub const NO_VERTEX: u8 = 0xFF;

/// `(lower corner, axis)` of each local edge.
pub const EDGES: [(u8, u8); 12] = {
    let mut out = [(0u8, 0u8); 12];
    let mut k = 0;
    let mut c = 0;
    while c < 8 {
        let mut d = 0;
        while d < 3 {
            if (c >> d) & 1 == 0 {
                out[k] = (c as u8, d as u8);
                k += 1;
            }
            d += 1;
        }
        c += 1;
    }
    out
};

/// Local edge id of `(corner, axis)`, `corner` being the lower endpoint.
pub fn local_edge(corner: u8, axis: u8) -> u8 {
    EDGES
        .iter()
        .position(|&e| e == (corner, axis))
        .expect("lower corner has a zero bit on the axis") as u8
}

/// The 4 corners of facet `f` in cyclic order.
pub fn facet_cycle(f: u8) -> [u8; 4] {
    let a = (f / 2) as usize;
    let side = (f % 2) as usize;
    let (u, v) = match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(pu, pv)| ((side << a) | (pu << u) | (pv << v)) as u8)
}

fn edge_between(c0: u8, c1: u8) -> u8 {
    let (lo, hi) = (c0.min(c1), c0.max(c1));
    local_edge(lo, (hi ^ lo).trailing_zeros() as u8)
}

/// Facets of the cell that contain local edge `e`.
pub fn edge_facets(e: u8) -> [u8; 2] {
    let (c, d) = EDGES[e as usize];
    let mut out = [0u8; 2];
    let mut k = 0;
    for a in 0..3u8 {
        if a != d {
            out[k] = 2 * a + ((c >> a) & 1);
            k += 1;
        }
    }
    out
}

/// Ambiguous (checkerboard) facets of a sign pattern, ascending.
pub fn ambiguous_facets(pattern: u8) -> Vec<u8> {
    (0..6u8)
        .filter(|&f| {
            let s = facet_cycle(f).map(|c| (pattern >> c) & 1);
            s[0] == s[2] && s[1] == s[3] && s[0] != s[1]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub facet: u8,
    pub edges: [u8; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseFace {
    /// Segments in cycle order; consecutive segments share an edge.
    pub segments: Vec<Segment>,
    /// Arc (dual vertex within the face) of each segment.
    pub arcs: Vec<u8>,
    pub arc_count: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigCase {
    pub pattern: u8,
    /// Decider bits over `ambiguous_facets(pattern)`, bit j for the j-th facet.
    pub bits: u8,
    /// Symmetry class (0..27) under cube rotations, mirrors and inversion.
    pub class: u8,
    pub faces: Vec<CaseFace>,
    /// Local edges whose crossings define each dual vertex (bit mask).
    pub vertex_edges: Vec<u16>,
    /// `edge_vertex[e][f]`: dual vertex owning the segment on facet `f` that
    /// contains edge `e`, or `NO_VERTEX`.
    pub edge_vertex: [[u8; 6]; 12],
    /// Triangles closing faces split into 3 vertices, consistently wound.
    pub internal_tris: Vec<[u8; 3]>,
}

impl ConfigCase {
    pub fn vertex_count(&self) -> usize {
        self.vertex_edges.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigTable {
    pub cases: Vec<ConfigCase>,
    /// Index of the first case of each pattern.
    pub pattern_offset: [u16; 257],
    pub class_count: usize,
}

impl ConfigTable {
    /// Index of the case for `pattern` with decider bits `bits`.
    #[inline]
    pub fn case_index(&self, pattern: u8, bits: u8) -> usize {
        self.pattern_offset[pattern as usize] as usize + bits as usize
    }

    #[inline]
    pub fn case(&self, pattern: u8, bits: u8) -> &ConfigCase {
        &self.cases[self.case_index(pattern, bits)]
    }

    /// Cases counted up to sign inversion.
    pub fn distinct_cases(&self) -> usize {
        self.cases.len() / 2
    }

    pub fn shipped() -> &'static ConfigTable {
        static TABLE: OnceLock<ConfigTable> = OnceLock::new();
        TABLE.get_or_init(|| ConfigTable::from_bytes(SHIPPED).expect("shipped config table"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.cases.len() as u16).to_le_bytes());
        out.push(self.class_count as u8);
        for c in &self.cases {
            out.extend_from_slice(&[c.pattern, c.bits, c.class, c.faces.len() as u8]);
            for f in &c.faces {
                out.extend_from_slice(&[f.segments.len() as u8, f.arc_count]);
                for (s, &a) in f.segments.iter().zip(&f.arcs) {
                    out.extend_from_slice(&[s.facet, s.edges[0], s.edges[1], a]);
                }
            }
            out.push(c.vertex_edges.len() as u8);
            for m in &c.vertex_edges {
                out.extend_from_slice(&m.to_le_bytes());
            }
            for row in &c.edge_vertex {
                out.extend_from_slice(row);
            }
            out.push(c.internal_tris.len() as u8);
            for t in &c.internal_tris {
                out.extend_from_slice(t);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let mut r = bytes.iter().copied();
        let mut next = || r.next();
        let mut take = |n: usize| -> Option<Vec<u8>> { (0..n).map(|_| next()).collect() };
        if take(4)? != MAGIC {
            return None;
        }
        let n = u16::from_le_bytes(take(2)?.try_into().ok()?) as usize;
        let class_count = take(1)?[0] as usize;
        let mut cases = Vec::with_capacity(n);
        for _ in 0..n {
            let h = take(4)?;
            let mut faces = Vec::new();
            for _ in 0..h[3] {
                let fh = take(2)?;
                let mut segments = Vec::new();
                let mut arcs = Vec::new();
                for _ in 0..fh[0] {
                    let s = take(4)?;
                    segments.push(Segment {
                        facet: s[0],
                        edges: [s[1], s[2]],
                    });
                    arcs.push(s[3]);
                }
                faces.push(CaseFace {
                    segments,
                    arcs,
                    arc_count: fh[1],
                });
            }
            let nv = take(1)?[0] as usize;
            let vertex_edges = (0..nv)
                .map(|_| take(2).map(|b| u16::from_le_bytes([b[0], b[1]])))
                .collect::<Option<Vec<_>>>()?;
            let mut edge_vertex = [[NO_VERTEX; 6]; 12];
            for row in edge_vertex.iter_mut() {
                row.copy_from_slice(&take(6)?);
            }
            let nt = take(1)?[0] as usize;
            let internal_tris = (0..nt)
                .map(|_| take(3).map(|t| [t[0], t[1], t[2]]))
                .collect::<Option<Vec<_>>>()?;
            cases.push(ConfigCase {
                pattern: h[0],
                bits: h[1],
                class: h[2],
                faces,
                vertex_edges,
                edge_vertex,
                internal_tris,
            });
        }
        if next().is_some() {
            return None;
        }
        let pattern_offset = offsets_of(&cases)?;
        Some(Self {
            cases,
            pattern_offset,
            class_count,
        })
    }
}

fn offsets_of(cases: &[ConfigCase]) -> Option<[u16; 257]> {
    let mut off = [0u16; 257];
    let mut k = 0usize;
    for p in 0..256usize {
        off[p] = k as u16;
        let na = ambiguous_facets(p as u8).len();
        for b in 0..(1usize << na) {
            let c = cases.get(k)?;
            if c.pattern as usize != p || c.bits as usize != b {
                return None;
            }
            k += 1;
        }
    }
    off[256] = k as u16;
    (k == cases.len()).then_some(off)
}

/// Facet walking: the segments of every facet, stitched into cycles.
fn walk(pattern: u8, facet_bit: impl Fn(u8) -> bool) -> Vec<Vec<Segment>> {
    let mut segs: Vec<Segment> = Vec::new();
    for f in 0..6u8 {
        let cyc = facet_cycle(f);
        let s = cyc.map(|c| (pattern >> c) & 1);
        // edge k joins cyc[k] and cyc[k + 1]
        let act: Vec<u8> = (0..4)
            .filter(|&k| s[k] != s[(k + 1) % 4])
            .map(|k| edge_between(cyc[k], cyc[(k + 1) % 4]))
            .collect();
        match act.len() {
            0 => {}
            2 => segs.push(Segment {
                facet: f,
                edges: [act[0], act[1]],
            }),
            4 => {
                let connected = facet_bit(f);
                for k in 0..4 {
                    // cut off corner k when it is on the separated side
                    let pos = s[k] == 1;
                    if pos != connected {
                        segs.push(Segment {
                            facet: f,
                            edges: [
                                edge_between(cyc[(k + 3) % 4], cyc[k]),
                                edge_between(cyc[k], cyc[(k + 1) % 4]),
                            ],
                        });
                    }
                }
            }
            _ => unreachable!("a facet has an even number of sign changes"),
        }
    }
    let mut used = vec![false; segs.len()];
    let mut cycles = Vec::new();
    for s0 in 0..segs.len() {
        if used[s0] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut cur = s0;
        let mut e = segs[s0].edges[0];
        while !used[cur] {
            used[cur] = true;
            let s = segs[cur];
            e = if s.edges[0] == e { s.edges[1] } else { s.edges[0] };
            // orient the stored segment along the walk
            let other = if s.edges[1] == e { s.edges[0] } else { s.edges[1] };
            cyc.push(Segment {
                facet: s.facet,
                edges: [other, e],
            });
            cur = (0..segs.len())
                .find(|&j| j != cur && segs[j].edges.contains(&e))
                .expect("every crossing joins two segments");
        }
        cycles.push(cyc);
    }
    cycles
}

/// Minimum number of contiguous arcs such that no arc visits a facet twice;
/// the lexicographically first set of cut positions wins. Returns the arc of
/// each segment.
fn split_arcs(facets: &[u8]) -> (Vec<u8>, u8) {
    let k = facets.len();
    let distinct = |arc: &[u8]| {
        let mut seen = 0u8;
        arc.iter().all(|&f| {
            let b = 1 << f;
            let fresh = seen & b == 0;
            seen |= b;
            fresh
        })
    };
    if distinct(facets) {
        return (vec![0; k], 1);
    }
    for m in 2..=k {
        let mut cuts: Vec<usize> = (0..m).collect();
        loop {
            let ok = (0..m).all(|j| {
                let (a, b) = (cuts[j], cuts[(j + 1) % m]);
                let len = if b > a { b - a } else { b + k - a };
                let arc: Vec<u8> = (0..len).map(|t| facets[(a + t) % k]).collect();
                distinct(&arc)
            });
            if ok {
                let mut arcs = vec![0u8; k];
                for j in 0..m {
                    let (a, b) = (cuts[j], cuts[(j + 1) % m]);
                    let len = if b > a { b - a } else { b + k - a };
                    for t in 0..len {
                        arcs[(a + t) % k] = j as u8;
                    }
                }
                return (arcs, m as u8);
            }
            // next combination of m positions out of k
            let mut i = m;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if cuts[i] < k - m + i {
                    cuts[i] += 1;
                    for j in i + 1..m {
                        cuts[j] = cuts[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    i = usize::MAX;
                    break;
                }
            }
            if i == usize::MAX {
                break;
            }
        }
    }
    unreachable!("single-segment arcs always satisfy the rule")
}

/// Facet of the cell crossed when moving to the neighbouring cell in the ring
/// around a local edge, before and after this cell, in x-quad order.
pub fn ring_facets(e: u8) -> (u8, u8) {
    let (c, a) = EDGES[e as usize];
    let u = (a + 1) % 3;
    let v = (a + 2) % 3;
    // cell offset relative to the edge's lowest point
    let du = -(((c >> u) & 1) as i32);
    let dv = -(((c >> v) & 1) as i32);
    const RING: [(i32, i32); 4] = [(-1, -1), (0, -1), (0, 0), (-1, 0)];
    let k = RING.iter().position(|&r| r == (du, dv)).unwrap();
    let toward = |other: (i32, i32)| -> u8 {
        if other.0 != du {
            2 * u + (other.0 > du) as u8
        } else {
            2 * v + (other.1 > dv) as u8
        }
    };
    (toward(RING[(k + 3) % 4]), toward(RING[(k + 1) % 4]))
}

/// Whether the x-quad around local edge `e` is traversed in reverse (lower
/// endpoint negative).
pub fn ring_reversed(pattern: u8, e: u8) -> bool {
    let (c, _) = EDGES[e as usize];
    (pattern >> c) & 1 == 0
}

fn build_case(pattern: u8, bits: u8) -> ConfigCase {
    let amb = ambiguous_facets(pattern);
    let bit_of = |f: u8| {
        let j = amb.iter().position(|&x| x == f).expect("ambiguous facet");
        (bits >> j) & 1 == 1
    };
    let cycles = walk(pattern, bit_of);
    let mut faces = Vec::new();
    let mut vertex_edges: Vec<u16> = Vec::new();
    let mut edge_vertex = [[NO_VERTEX; 6]; 12];
    let mut internal_tris = Vec::new();
    for cyc in cycles {
        let facets: Vec<u8> = cyc.iter().map(|s| s.facet).collect();
        let (arcs, arc_count) = split_arcs(&facets);
        let base = vertex_edges.len() as u8;
        vertex_edges.extend(std::iter::repeat(0u16).take(arc_count as usize));
        for (s, &a) in cyc.iter().zip(&arcs) {
            let v = base + a;
            vertex_edges[v as usize] |= (1 << s.edges[0]) | (1 << s.edges[1]);
            for &e in &s.edges {
                edge_vertex[e as usize][s.facet as usize] = v;
            }
        }
        // directed internal edges at transitions, as the x-quads traverse them
        let k = cyc.len();
        let mut directed: Vec<(u8, u8)> = Vec::new();
        for i in 0..k {
            let j = (i + 1) % k;
            if arcs[i] == arcs[j] {
                continue;
            }
            let e = cyc[i].edges[1];
            let (fp, fn_) = ring_facets(e);
            let vp = edge_vertex[e as usize][fp as usize];
            let vn = edge_vertex[e as usize][fn_ as usize];
            directed.push(if ring_reversed(pattern, e) { (vn, vp) } else { (vp, vn) });
        }
        match arc_count {
            1 => {}
            2 => {
                assert!(
                    directed.len() == 2 && directed[0] == (directed[1].1, directed[1].0),
                    "split face edges must be traversed in opposite directions"
                );
            }
            3 => {
                let t = [base, base + 1, base + 2];
                let fwd = [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])];
                // the triangle runs each x-quad edge backwards
                let tri = if directed.iter().all(|&(a, b)| fwd.contains(&(b, a))) {
                    t
                } else {
                    assert!(directed.iter().all(|&d| fwd.contains(&d)));
                    [t[0], t[2], t[1]]
                };
                internal_tris.push(tri);
            }
            _ => panic!("faces never need more than 3 dual vertices"),
        }
        faces.push(CaseFace {
            segments: cyc,
            arcs,
            arc_count,
        });
    }
    ConfigCase {
        pattern,
        bits,
        class: 0,
        faces,
        vertex_edges,
        edge_vertex,
        internal_tris,
    }
}

/// The 48 cube symmetries as corner permutations with their facet maps.
fn symmetries() -> Vec<([u8; 8], [u8; 6])> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::new();
    for perm in perms {
        for flips in 0..8u8 {
            let mut cm = [0u8; 8];
            for c in 0..8u8 {
                let mut n = 0u8;
                for d in 0..3 {
                    let bit = ((c >> d) & 1) ^ ((flips >> d) & 1);
                    n |= bit << perm[d];
                }
                cm[c as usize] = n;
            }
            let mut fm = [0u8; 6];
            for f in 0..6u8 {
                let (a, s) = ((f / 2) as usize, f % 2);
                fm[f as usize] = 2 * perm[a] as u8 + (s ^ ((flips >> a) & 1));
            }
            out.push((cm, fm));
        }
    }
    out
}

/// Case key: pattern in the low byte, decider bits by facet id above it.
fn case_key(pattern: u8, facet_bits: u8) -> u16 {
    pattern as u16 | (facet_bits as u16) << 8
}

fn facet_bits_of(pattern: u8, bits: u8) -> u8 {
    ambiguous_facets(pattern)
        .iter()
        .enumerate()
        .fold(0u8, |acc, (j, &f)| acc | (((bits >> j) & 1) << f))
}

/// Generates the full table (656 cases, both sign polarities).
pub fn build_config_table() -> ConfigTable {
    let mut cases = Vec::new();
    for p in 0..=255u8 {
        let na = ambiguous_facets(p).len();
        for b in 0..(1u8 << na) {
            cases.push(build_case(p, b));
        }
    }
    // symmetry classes, numbered by first appearance
    let syms = symmetries();
    let mut class_of: std::collections::HashMap<u16, u8> = Default::default();
    let mut next_class = 0u8;
    for c in cases.iter_mut() {
        let key = case_key(c.pattern, facet_bits_of(c.pattern, c.bits));
        if let Some(&k) = class_of.get(&key) {
            c.class = k;
            continue;
        }
        let fb = facet_bits_of(c.pattern, c.bits);
        for (cm, fm) in &syms {
            for inv in [false, true] {
                let mut q = 0u8;
                for k in 0..8 {
                    q |= ((c.pattern >> k) & 1) << cm[k];
                }
                let mut nb = 0u8;
                for f in 0..6 {
                    nb |= ((fb >> f) & 1) << fm[f];
                }
                if inv {
                    q = !q;
                    nb ^= facet_bits_of(q, 0xFF);
                }
                class_of.insert(case_key(q, nb), next_class);
            }
        }
        c.class = next_class;
        next_class += 1;
    }
    let pattern_offset = offsets_of(&cases).expect("cases enumerated in order");
    ConfigTable {
        cases,
        pattern_offset,
        class_count: next_class as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[ignore = "writes data/dmc_config.bin"]
    fn regenerate_shipped_table() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/dmc_config.bin");
        std::fs::write(path, build_config_table().to_bytes()).unwrap();
    }

    #[test]
    fn census() {
        let t = build_config_table();
        assert_eq!(t.cases.len(), 656);
        assert_eq!(t.distinct_cases(), 328);
        assert_eq!(t.class_count, 27);
    }

    #[test]
    fn shipped_table_matches_regeneration() {
        let regen = build_config_table().to_bytes();
        assert!(regen.as_slice() == SHIPPED, "data/dmc_config.bin is stale");
        assert_eq!(ConfigTable::from_bytes(&regen).unwrap(), build_config_table());
    }

    #[test]
    fn anchor_cases() {
        let t = build_config_table();
        assert!(t.case(0, 0).faces.is_empty());
        let single = t.case(1, 0);
        assert_eq!(single.faces.len(), 1);
        assert_eq!(single.faces[0].segments.len(), 3);
        assert_eq!(single.vertex_count(), 1);
    }

    #[test]
    fn every_active_edge_in_exactly_one_face() {
        let t = build_config_table();
        for c in &t.cases {
            let mut seen = 0u16;
            for f in &c.faces {
                let mut mask = 0u16;
                for s in &f.segments {
                    mask |= (1 << s.edges[0]) | (1 << s.edges[1]);
                }
                assert_eq!(seen & mask, 0);
                seen |= mask;
            }
            let active: u16 = EDGES
                .iter()
                .enumerate()
                .filter(|(_, &(c0, a))| {
                    ((c.pattern >> c0) & 1) != ((c.pattern >> (c0 | 1 << a)) & 1)
                })
                .fold(0, |m, (i, _)| m | 1 << i);
            assert_eq!(seen, active, "pattern {:#04x}", c.pattern);
            assert!(c.faces.iter().all(|f| f.arc_count <= 3));
        }
    }

    #[test]
    fn inversion_pairs_share_class() {
        let t = build_config_table();
        for c in &t.cases {
            let na = ambiguous_facets(c.pattern).len() as u32;
            let inv = t.case(!c.pattern, !c.bits & ((1u16 << na) - 1) as u8);
            assert_eq!(inv.class, c.class);
        }
    }

    #[test]
    fn split_classes() {
        let t = build_config_table();
        let mut split = std::collections::BTreeSet::new();
        let mut triple = 0;
        for c in &t.cases {
            if c.faces.iter().any(|f| f.arc_count > 1) {
                split.insert(c.class);
            }
            triple += c.internal_tris.len();
        }
        assert_eq!(split.len(), 11);
        assert!(triple > 0);
    }

    #[test]
    fn split_rule() {
        assert_eq!(split_arcs(&[0, 2, 4]), (vec![0, 0, 0], 1));
        let (arcs, m) = split_arcs(&[0, 2, 0, 3]);
        assert_eq!(m, 2);
        assert_ne!(arcs[0], arcs[2]);
    }
}
