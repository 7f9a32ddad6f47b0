//! PLY, OBJ, STL and viewer bundle writers, plus a PLY reader.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::emphasis::{emphasis_color, EmphasisMode};
use super::ExaIoError;
use crate::features::VertexAttributes;
use crate::mesh::{edge_audit, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Ply,
    Obj,
    Stl,
    Bundle,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 4] = [Self::Ply, Self::Obj, Self::Stl, Self::Bundle];

    /// File name (or directory name for bundles) used by the pipeline.
    pub fn file_name(self, stem: &str) -> String {
        match self {
            Self::Bundle => format!("{stem}.bundle"),
            f => format!("{stem}.{f}"),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ply => "ply",
            Self::Obj => "obj",
            Self::Stl => "stl",
            Self::Bundle => "bundle",
        })
    }
}

impl FromStr for ExportFormat {
    type Err = ExaIoError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ply" => Ok(Self::Ply),
            "obj" => Ok(Self::Obj),
            "stl" => Ok(Self::Stl),
            "bundle" => Ok(Self::Bundle),
            other => Err(ExaIoError::Parameter(format!("unknown export format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportOptions {
    /// Color source for PLY vertex colors.
    #[serde(default)]
    pub emphasis: EmphasisMode,
    /// Partitions written to STL; `None` writes every triangle.
    #[serde(default)]
    pub partitions: Option<Vec<u8>>,
}

/// Partition of a triangle: the largest label among its vertices.
pub fn triangle_partition(t: &[u32; 3], attrs: &[VertexAttributes]) -> u8 {
    t.iter().map(|&v| attrs[v as usize].partition).max().unwrap_or(0)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExaIoError + '_ {
    move |source| ExaIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ExaIoError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Writes `mesh` with per-vertex `attrs` (empty for none) in `format`. Bundles
/// are written into the directory `path`.
pub fn export_mesh(
    mesh: &TriMesh,
    attrs: &[VertexAttributes],
    format: ExportFormat,
    path: impl AsRef<Path>,
    opts: &ExportOptions,
) -> Result<(), ExaIoError> {
    let path = path.as_ref();
    let n = mesh.positions.len();
    if mesh.normals.len() != n {
        return Err(ExaIoError::CountMismatch {
            expected: n,
            found: mesh.normals.len(),
        });
    }
    if let Some(t) = mesh.triangles.iter().flatten().find(|&&v| v as usize >= n) {
        return Err(ExaIoError::Parameter(format!("triangle index {t} out of range")));
    }
    let default_attrs;
    let attrs = if attrs.is_empty() {
        default_attrs = vec![VertexAttributes { ao: 63, ..Default::default() }; n];
        &default_attrs[..]
    } else if attrs.len() == n {
        attrs
    } else {
        return Err(ExaIoError::CountMismatch {
            expected: n,
            found: attrs.len(),
        });
    };
    match format {
        ExportFormat::Ply => write_ply(mesh, attrs, path, opts.emphasis),
        ExportFormat::Obj => write_obj(mesh, path),
        ExportFormat::Stl => {
            let tris: Vec<[u32; 3]> = match &opts.partitions {
                None => mesh.triangles.clone(),
                Some(sel) => mesh
                    .triangles
                    .iter()
                    .filter(|t| sel.contains(&triangle_partition(t, attrs)))
                    .copied()
                    .collect(),
            };
            let audit = edge_audit(&tris);
            if !audit.is_closed_manifold() {
                return Err(ExaIoError::OpenMesh {
                    boundary_edges: audit.boundary,
                    nonmanifold_edges: audit.non_manifold,
                });
            }
            write_stl(mesh, &tris, path)
        }
        ExportFormat::Bundle => write_bundle(mesh, attrs, path),
    }
}

fn write_ply(
    mesh: &TriMesh,
    attrs: &[VertexAttributes],
    path: &Path,
    mode: EmphasisMode,
) -> Result<(), ExaIoError> {
    let mut w = create(path)?;
    let mut buf = Vec::with_capacity(27 * mesh.positions.len() + 13 * mesh.triangles.len() + 400);
    write!(
        buf,
        "ply\nformat binary_little_endian 1.0\ncomment emphasis {}\n\
         element vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property float nx\nproperty float ny\nproperty float nz\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n\
         property uchar partition\n\
         element face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        serde_json::to_value(mode).unwrap().as_str().unwrap(),
        mesh.positions.len(),
        mesh.triangles.len()
    )
    .unwrap();
    for ((p, n), a) in mesh.positions.iter().zip(&mesh.normals).zip(attrs) {
        for v in [p.x, p.y, p.z, n.x, n.y, n.z] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        buf.extend_from_slice(&emphasis_color(a, mode));
        buf.push(a.partition);
    }
    for t in &mesh.triangles {
        buf.push(3);
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn write_obj(mesh: &TriMesh, path: &Path) -> Result<(), ExaIoError> {
    let mut w = create(path)?;
    let mut s = String::with_capacity(64 * mesh.positions.len());
    use std::fmt::Write as _;
    for p in &mesh.positions {
        writeln!(s, "v {} {} {}", p.x as f32, p.y as f32, p.z as f32).unwrap();
    }
    for n in &mesh.normals {
        writeln!(s, "vn {} {} {}", n.x as f32, n.y as f32, n.z as f32).unwrap();
    }
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|v| v + 1);
        writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}").unwrap();
    }
    w.write_all(s.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub const STL_HEADER: &[u8] = b"exa binary STL";

fn write_stl(mesh: &TriMesh, tris: &[[u32; 3]], path: &Path) -> Result<(), ExaIoError> {
    let count = u32::try_from(tris.len()).map_err(|_| ExaIoError::Overflow("triangle count".into()))?;
    let mut w = create(path)?;
    let mut buf = Vec::with_capacity(84 + 50 * tris.len());
    let mut header = [0u8; 80];
    header[..STL_HEADER.len()].copy_from_slice(STL_HEADER);
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&count.to_le_bytes());
    for t in tris {
        let [a, b, c] = t.map(|v| mesh.positions[v as usize]);
        let n = (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_default();
        for p in [n, a, b, c] {
            for v in [p.x, p.y, p.z] {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        buf.extend_from_slice(&[0, 0]);
    }
    w.write_all(&buf).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferInfo {
    pub file: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub components: u32,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionInfo {
    pub id: u8,
    pub vertex_count: u64,
    /// Triangles `first_triangle .. first_triangle + triangle_count` of
    /// `indices.u32`.
    pub first_triangle: u64,
    pub triangle_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub version: u32,
    pub vertex_count: u64,
    pub triangle_count: u64,
    pub bbox_min: [f32; 3],
    pub bbox_max: [f32; 3],
    pub positions: BufferInfo,
    pub normals: BufferInfo,
    pub indices: BufferInfo,
    pub features: BufferInfo,
    pub partitions: Vec<PartitionInfo>,
    /// Bit fields of the feature word.
    pub legend: serde_json::Value,
}

pub const BUNDLE_FORMAT: &str = "exa-bundle";

fn write_bundle(mesh: &TriMesh, attrs: &[VertexAttributes], dir: &Path) -> Result<(), ExaIoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let n = mesh.positions.len();
    // triangles grouped by partition so each partition is one index range
    let mut order: Vec<(u8, usize)> = mesh
        .triangles
        .iter()
        .enumerate()
        .map(|(i, t)| (triangle_partition(t, attrs), i))
        .collect();
    order.sort_unstable();
    let mut partitions: Vec<PartitionInfo> = Vec::new();
    for (k, &(p, _)) in order.iter().enumerate() {
        match partitions.last_mut() {
            Some(last) if last.id == p => last.triangle_count += 1,
            _ => partitions.push(PartitionInfo {
                id: p,
                vertex_count: 0,
                first_triangle: k as u64,
                triangle_count: 1,
            }),
        }
    }
    for a in attrs {
        if let Some(info) = partitions.iter_mut().find(|i| i.id == a.partition) {
            info.vertex_count += 1;
        }
    }
    let mut lo = [f32::INFINITY; 3];
    let mut hi = [f32::NEG_INFINITY; 3];
    let mut pos = Vec::with_capacity(12 * n);
    for p in &mesh.positions {
        for c in 0..3 {
            let v = p[c] as f32;
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
            pos.extend_from_slice(&v.to_le_bytes());
        }
    }
    if n == 0 {
        lo = [0.0; 3];
        hi = [0.0; 3];
    }
    let mut nrm = Vec::with_capacity(12 * n);
    for v in mesh.normals.iter().flat_map(|p| [p.x, p.y, p.z]) {
        nrm.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut idx = Vec::with_capacity(12 * order.len());
    for &(_, t) in &order {
        for v in mesh.triangles[t] {
            idx.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut feat = Vec::with_capacity(2 * n);
    for a in attrs {
        let w = a.pack().map_err(|e| ExaIoError::Overflow(e.to_string()))?;
        feat.extend_from_slice(&w.to_le_bytes());
    }
    let buffer = |file: &str, kind: &str, components, count| BufferInfo {
        file: file.into(),
        kind: kind.into(),
        components,
        count,
    };
    let manifest = BundleManifest {
        format: BUNDLE_FORMAT.into(),
        version: 1,
        vertex_count: n as u64,
        triangle_count: order.len() as u64,
        bbox_min: lo,
        bbox_max: hi,
        positions: buffer("positions.f32", "f32", 3, n as u64),
        normals: buffer("normals.f32", "f32", 3, n as u64),
        indices: buffer("indices.u32", "u32", 3, order.len() as u64),
        features: buffer("features.u16", "u16", 1, n as u64),
        partitions,
        legend: serde_json::json!({
            "shape": {"bits": [9, 15], "flat": 0, "code": "1 + shape_bin * 14 + curvedness_bin"},
            "partition": {"bits": [6, 8], "boundary": 0},
            "ao": {"bits": [0, 5], "open": 63},
        }),
    };
    for (name, data) in [
        ("positions.f32", pos),
        ("normals.f32", nrm),
        ("indices.u32", idx),
        ("features.u16", feat),
    ] {
        let p = dir.join(name);
        fs::write(&p, data).map_err(io_err(&p))?;
    }
    let p = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).unwrap();
    json.push('\n');
    fs::write(&p, json).map_err(io_err(&p))
}

pub fn read_bundle_manifest(dir: impl AsRef<Path>) -> Result<BundleManifest, ExaIoError> {
    let p = dir.as_ref().join("manifest.json");
    let text = fs::read_to_string(&p).map_err(io_err(&p))?;
    serde_json::from_str(&text).map_err(|e| ExaIoError::Format(format!("{}: {e}", p.display())))
}

/// Vertex and face data read back from a binary little-endian PLY.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub positions: Vec<[f32; 3]>,
    pub normals: Vec<[f32; 3]>,
    pub colors: Vec<[u8; 3]>,
    pub partitions: Vec<u8>,
    pub faces: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Copy)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyData, ExaIoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_ply(&bytes)
}

pub fn parse_ply(bytes: &[u8]) -> Result<PlyData, ExaIoError> {
    let bad = |m: &str| ExaIoError::Format(format!("ply: {m}"));
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| bad("no end_header"))?
        + END.len();
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not text"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", other, ..] => return Err(bad(&format!("unsupported format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad("element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", c, t, name] => {
                let c = Scalar::parse(c).ok_or_else(|| bad("list count type"))?;
                let t = Scalar::parse(t).ok_or_else(|| bad("list item type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| bad("property before element"))?
                    .props
                    .push(Property::List(name.to_string(), c, t));
            }
            ["property", t, name] => {
                let t = Scalar::parse(t).ok_or_else(|| bad("property type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| bad("property before element"))?
                    .props
                    .push(Property::Scalar(name.to_string(), t));
            }
            ["comment", ..] | ["obj_info", ..] | ["end_header"] | [] => {}
            _ => return Err(bad(&format!("unexpected header line {line:?}"))),
        }
    }
    let mut out = PlyData::default();
    let mut pos = end;
    let mut take = |n: usize| -> Result<&[u8], ExaIoError> {
        let s = bytes.get(pos..pos + n).ok_or(ExaIoError::Truncated)?;
        pos += n;
        Ok(s)
    };
    for el in &elements {
        for _ in 0..el.count {
            let mut vals: Vec<(&str, f64)> = Vec::with_capacity(el.props.len());
            for p in &el.props {
                match p {
                    Property::Scalar(name, t) => vals.push((name, t.read(take(t.size())?))),
                    Property::List(name, c, t) => {
                        let k = c.read(take(c.size())?) as usize;
                        let mut items = Vec::with_capacity(k);
                        for _ in 0..k {
                            items.push(t.read(take(t.size())?) as u32);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            out.faces.push(items);
                        }
                    }
                }
            }
            if el.name == "vertex" {
                let get = |k: &str| vals.iter().find(|v| v.0 == k).map(|v| v.1);
                let xyz = |a, b, c| Some([get(a)? as f32, get(b)? as f32, get(c)? as f32]);
                out.positions.push(xyz("x", "y", "z").ok_or_else(|| bad("vertex without x y z"))?);
                if let Some(n) = xyz("nx", "ny", "nz") {
                    out.normals.push(n);
                }
                if let (Some(r), Some(g), Some(b)) = (get("red"), get("green"), get("blue")) {
                    out.colors.push([r as u8, g as u8, b as u8]);
                }
                if let Some(p) = get("partition") {
                    out.partitions.push(p as u8);
                }
            }
        }
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Vec3;

    fn tetrahedron() -> TriMesh {
        let positions = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let triangles = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        let mut m = TriMesh {
            positions,
            normals: vec![],
            synthetic: vec![false; 4],
            triangles,
        };
        m.recompute_normals();
        m
    }

    #[test]
    fn tetrahedron_stl_is_284_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.stl");
        export_mesh(&tetrahedron(), &[], ExportFormat::Stl, &p, &Default::default()).unwrap();
        let b = fs::read(&p).unwrap();
        assert_eq!(b.len(), 284);
        assert_eq!(u32::from_le_bytes(b[80..84].try_into().unwrap()), 4);
        // first facet normal of [0, 2, 1] is -z
        assert_eq!(f32::from_le_bytes(b[92..96].try_into().unwrap()), -1.0);
    }

    #[test]
    fn stl_rejects_open_meshes() {
        let mut m = tetrahedron();
        m.triangles.pop();
        let dir = tempfile::tempdir().unwrap();
        let r = export_mesh(&m, &[], ExportFormat::Stl, dir.path().join("t.stl"), &Default::default());
        assert!(matches!(r, Err(ExaIoError::OpenMesh { boundary_edges: 3, .. })));
    }

    #[test]
    fn ply_round_trip_is_bit_exact() {
        let mut m = tetrahedron();
        m.positions[3] = Vec3::new(0.1, 0.2, 1.0 / 3.0);
        let attrs: Vec<_> = (0..4)
            .map(|i| VertexAttributes { shape_code: 5 * i, partition: i, ao: 60 })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        export_mesh(&m, &attrs, ExportFormat::Ply, &p, &Default::default()).unwrap();
        let back = read_ply(&p).unwrap();
        for (a, b) in m.positions.iter().zip(&back.positions) {
            assert_eq!([a.x as f32, a.y as f32, a.z as f32], *b);
        }
        assert_eq!(back.partitions, [0, 1, 2, 3]);
        assert_eq!(back.normals.len(), 4);
        let faces: Vec<Vec<u32>> = m.triangles.iter().map(|t| t.to_vec()).collect();
        assert_eq!(back.faces, faces);
        assert!(parse_ply(&fs::read(&p).unwrap()[..200]).is_err());
    }

    #[test]
    fn obj_lists_vertices_normals_faces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.obj");
        export_mesh(&tetrahedron(), &[], ExportFormat::Obj, &p, &Default::default()).unwrap();
        let s = fs::read_to_string(&p).unwrap();
        assert_eq!(s.lines().filter(|l| l.starts_with("v ")).count(), 4);
        assert_eq!(s.lines().filter(|l| l.starts_with("vn ")).count(), 4);
        assert!(s.contains("f 1//1 3//3 2//2"));
    }

    #[test]
    fn bundle_groups_partitions() {
        let m = tetrahedron();
        let attrs: Vec<_> = [2u8, 1, 1, 1]
            .iter()
            .map(|&p| VertexAttributes { partition: p, ..Default::default() })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let b = dir.path().join("t.bundle");
        export_mesh(&m, &attrs, ExportFormat::Bundle, &b, &Default::default()).unwrap();
        let man = read_bundle_manifest(&b).unwrap();
        assert_eq!(man.vertex_count, 4);
        assert_eq!(man.triangle_count, 4);
        let ids: Vec<_> = man.partitions.iter().map(|p| (p.id, p.first_triangle, p.triangle_count)).collect();
        assert_eq!(ids, [(1, 0, 1), (2, 1, 3)]);
        assert_eq!(fs::read(b.join("indices.u32")).unwrap().len(), 48);
        assert_eq!(fs::read(b.join("features.u16")).unwrap().len(), 8);
        assert_eq!(man.bbox_max, [1.0; 3]);
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("missing").join("t.ply");
        let r = export_mesh(&tetrahedron(), &[], ExportFormat::Ply, &p, &Default::default());
        assert!(matches!(r, Err(ExaIoError::Io { .. })));
    }

    #[test]
    fn format_names() {
        for f in ExportFormat::ALL {
            assert_eq!(f.to_string().parse::<ExportFormat>().unwrap(), f);
        }
        assert!("tiff".parse::<ExportFormat>().is_err());
    }
}
