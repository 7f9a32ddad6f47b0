//! End-to-end orchestration: volume to EXA, mesh, features and exports, with
//! a JSON report of per-stage timings and sizes.
//!
//! Artifacts written to `out_dir`, named after `stem`:
//!
//! | stage      | files                                                    |
//! |------------|----------------------------------------------------------|
//! | preprocess | `<stem>.denoised.json` + `.f32` (only when listed)       |
//! | extract    | `<stem>.exa` (TOPO, AMBG, PREC)                          |
//! | features   | `<stem>.smoothed.exa` (+ DPOS, DNRM), `<stem>.features.exa` (+ FEAT, AOCC) |
//! | export     | `<stem>.ply`, `.obj`, `.stl`, `.bundle/` as configured   |
//!
//! Requested stages pull in their prerequisites without writing the
//! prerequisites' artifacts.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{
    build_sign_field, encode_contour, exa_decode, exa_read, exa_write, quantize_offsets, CodeTable,
    ExaContainer, TAG_AOCC, TAG_DNRM, TAG_DPOS, TAG_FEAT,
};
use crate::exa_io::{
    encode_vertex_deltas, export_mesh, pack_features, read_bundle_manifest, unpack_features, AoSection,
    EmphasisMode, ExportFormat, ExportOptions, VertexAttributes, VertexGeometry, Q_NRM, Q_POS,
};
use crate::features::{
    classify_shape, compute_ambient_occlusion, estimate_curvatures, quantize_ao, segment_mesh,
    smooth_face_normals, update_vertex_positions, AoFalloff, AoOptions, DEFAULT_C_MIN,
};
use crate::mesh::{
    build_mesh, cluster_vertices, count_vertices, edge_audit, fill_holes, HoleReport, XQuadMesh,
};
use crate::volume::{
    build_histogram, crop_volume, denoise_joint_bilateral, estimate_sigma, estimate_snr,
    estimate_threshold, gauss_resample, generate_phantom, import_volume, write_raw3d,
    PhantomSpec, RangeFn, Volume3D, VolumeFormat,
};

#[derive(Debug, Error)]
#[error("stage {stage} failed: {message}")]
pub struct PipelineError {
    pub stage: String,
    pub message: String,
}

fn fail<E: fmt::Display>(stage: &str) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError {
        stage: stage.into(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Preprocess,
    Extract,
    Mesh,
    Features,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Self::Preprocess,
        Self::Extract,
        Self::Mesh,
        Self::Features,
        Self::Export,
    ];
}

/// Parses `all` or a comma separated list of stage names.
pub fn parse_stages(s: &str) -> Result<Vec<Stage>, String> {
    let mut out = BTreeSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            out.extend(Stage::ALL.iter().copied().filter(|&s| s != Stage::Preprocess));
            continue;
        }
        let st = serde_json::from_value(serde_json::Value::String(part.into()))
            .map_err(|_| format!("unknown stage {part:?}"))?;
        out.insert(st);
    }
    if out.is_empty() {
        return Err("no stages given".into());
    }
    Ok(out.into_iter().collect())
}

/// Sub-box `offset:size` of the input volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub offset: [usize; 3],
    pub size: [usize; 3],
}

impl FromStr for CropBox {
    type Err = String;
    /// `x,y,z:nx,ny,nz`
    fn from_str(s: &str) -> Result<Self, String> {
        let triple = |t: &str| -> Result<[usize; 3], String> {
            let v: Vec<usize> = t
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| format!("bad crop value {x:?}")))
                .collect::<Result<_, _>>()?;
            v.try_into().map_err(|_| format!("crop needs 3 values in {t:?}"))
        };
        let (a, b) = s.split_once(':').ok_or("crop must be x,y,z:nx,ny,nz")?;
        Ok(Self {
            offset: triple(a)?,
            size: triple(b)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Raw3d,
    Hdf5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Input volume; ignored when `phantom` is set.
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    pub hdf5_dataset: String,
    pub phantom: Option<PhantomSpec>,
    pub crop: Option<CropBox>,
    /// Low-pass and 2:1 resampling before estimation.
    pub resample: bool,
    pub bins: usize,
    /// Threshold factor over the valley density.
    pub f: f64,
    /// `None` estimates the threshold from the histogram.
    pub tau: Option<f64>,
    pub denoise_iters: usize,
    pub precision: u8,
    pub smooth_iters: usize,
    pub vertex_iters: usize,
    pub k1_thresh: f64,
    pub ao_rays: usize,
    pub ao_radius: f64,
    pub ao_falloff: AoFalloff,
    /// Vertex clustering tolerances (degrees, grid units) applied to exports.
    pub cluster: Option<(f64, f64)>,
    pub fill_holes: bool,
    /// Longest boundary loop closed by hole filling.
    pub max_hole: usize,
    pub export: Vec<ExportFormat>,
    pub emphasis: EmphasisMode,
    /// Partitions written to STL; empty for all.
    pub stl_partitions: Vec<u8>,
    pub stages: Vec<Stage>,
    pub out_dir: PathBuf,
    pub stem: String,
    pub threads: Option<usize>,
    /// Overrides the phantom noise seed.
    pub seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: InputFormat::Raw3d,
            hdf5_dataset: "/data".into(),
            phantom: None,
            crop: None,
            resample: true,
            bins: 1024,
            f: 2.0,
            tau: None,
            denoise_iters: 2,
            precision: 8,
            smooth_iters: 32,
            vertex_iters: 8,
            k1_thresh: -0.5,
            ao_rays: 160,
            ao_radius: 64.0,
            ao_falloff: AoFalloff::Linear,
            cluster: None,
            fill_holes: false,
            max_hole: 64,
            export: vec![ExportFormat::Ply, ExportFormat::Bundle],
            emphasis: EmphasisMode::Bw,
            stl_partitions: Vec::new(),
            stages: parse_stages("all").unwrap(),
            out_dir: PathBuf::from("out"),
            stem: "mesh".into(),
            threads: None,
            seed: None,
        }
    }
}

impl PipelineConfig {
    /// Tablet preset: coarser precision for large scans.
    pub fn tablet() -> Self {
        Self {
            precision: 4,
            ..Self::default()
        }
    }

    fn wants(&self, s: Stage) -> bool {
        self.stages.contains(&s)
    }

    /// Stages that run: the requested ones plus their prerequisites.
    fn runs(&self, s: Stage) -> bool {
        self.stages.iter().any(|&r| r >= s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrEntry {
    pub stage: String,
    pub db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionStat {
    pub tag: String,
    pub bytes: usize,
    pub bits_per_vertex: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExaStat {
    pub file: String,
    pub bytes: usize,
    pub sections: Vec<SectionStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionStat {
    pub id: u8,
    pub vertices: usize,
}

/// Machine-readable run summary. Everything except `stages[].seconds` is a
/// deterministic function of the configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub input: String,
    pub input_dims: [usize; 3],
    pub dims: [usize; 3],
    pub stages: Vec<StageTime>,
    pub snr: Vec<SnrEntry>,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub tau_source: Option<String>,
    pub precision: u8,
    pub vertices: usize,
    pub xquads: usize,
    pub triangles: usize,
    pub closed_manifold: Option<bool>,
    pub exa: Vec<ExaStat>,
    pub partitions: Vec<PartitionStat>,
    pub holes: Option<HoleReport>,
    pub export_vertices: Option<usize>,
    pub export_triangles: Option<usize>,
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
}

/// Runs `f` and records its wall time under `name`.
fn timed<T>(report: &mut Report, name: &str, f: impl FnOnce(&mut Report) -> T) -> T {
    let t = Instant::now();
    let out = f(report);
    report.stages.push(StageTime {
        name: name.into(),
        seconds: t.elapsed().as_secs_f64(),
    });
    out
}

fn snr_of(vol: &Volume3D, bins: usize) -> Option<f64> {
    build_histogram(vol, bins).ok().and_then(|h| estimate_snr(&h).ok())
}

/// Section sizes of an EXA container in bits per vertex of `vertices`.
pub fn exa_stat(file: &str, c: &ExaContainer, vertices: usize) -> ExaStat {
    let bpv = |bytes: usize| {
        if vertices == 0 {
            0.0
        } else {
            (bytes * 8) as f64 / vertices as f64
        }
    };
    ExaStat {
        file: file.into(),
        bytes: c.to_bytes().len(),
        sections: c
            .sections
            .iter()
            .map(|s| SectionStat {
                tag: String::from_utf8_lossy(&s.tag).into(),
                bytes: s.data.len(),
                bits_per_vertex: bpv(s.data.len()),
            })
            .collect(),
    }
}

fn partition_stats(attrs: &[VertexAttributes]) -> Vec<PartitionStat> {
    let mut counts = [0usize; 8];
    for a in attrs {
        counts[a.partition as usize & 7] += 1;
    }
    (0..8u8)
        .filter(|&i| counts[i as usize] > 0)
        .map(|id| PartitionStat {
            id,
            vertices: counts[id as usize],
        })
        .collect()
}

/// Feature stage output.
struct Features {
    attrs: Vec<VertexAttributes>,
    ao: Vec<f64>,
}

fn compute_features(
    cfg: &PipelineConfig,
    mesh: &mut XQuadMesh,
    r: &mut Report,
) -> Result<Features, PipelineError> {
    timed(r, "smooth", |_| {
        smooth_face_normals(mesh, cfg.smooth_iters);
        update_vertex_positions(mesh, cfg.vertex_iters);
    });
    let k = timed(r, "curvature", |_| estimate_curvatures(mesh));
    let shapes: Vec<u8> = k
        .iter()
        .map(|c| classify_shape(c.k1, c.k2, DEFAULT_C_MIN))
        .collect::<Result<_, _>>()
        .map_err(fail("curvature"))?;
    let labels = timed(r, "segment", |_| {
        segment_mesh(mesh.vertex_count(), &mesh.triangles, &k, cfg.k1_thresh)
    })
    .map_err(fail("segment"))?;
    let opts = AoOptions {
        rays: cfg.ao_rays,
        radius: cfg.ao_radius,
        falloff: cfg.ao_falloff,
        ..Default::default()
    };
    let ao = timed(r, "ao", |_| {
        compute_ambient_occlusion(&mesh.positions, &mesh.vertex_normals, &mesh.triangles, &opts)
    })
    .map_err(fail("ao"))?;
    let attrs = (0..mesh.vertex_count())
        .map(|v| VertexAttributes {
            shape_code: shapes[v],
            partition: labels[v],
            ao: quantize_ao(ao[v]),
        })
        .collect();
    Ok(Features { attrs, ao })
}

fn write_exa(
    cfg: &PipelineConfig,
    name: &str,
    c: &ExaContainer,
    vertices: usize,
    report: &mut Report,
) -> Result<(), PipelineError> {
    exa_write(cfg.out_dir.join(name), c).map_err(fail("write"))?;
    report.exa.push(exa_stat(name, c, vertices));
    report.artifacts.push(name.into());
    Ok(())
}

fn load_volume(cfg: &PipelineConfig, report: &mut Report) -> Result<Volume3D, PipelineError> {
    if let Some(spec) = &cfg.phantom {
        let mut spec = spec.clone();
        if let Some(seed) = cfg.seed {
            spec.seed = seed;
        }
        report.input = format!("phantom {}", serde_json::to_string(&spec).unwrap());
        return generate_phantom(&spec).map_err(fail("import"));
    }
    let path = cfg.input.as_ref().ok_or_else(|| PipelineError {
        stage: "import".into(),
        message: "no input volume or phantom given".into(),
    })?;
    report.input = path.display().to_string();
    let format = match cfg.format {
        InputFormat::Raw3d => VolumeFormat::Raw3d,
        InputFormat::Hdf5 => VolumeFormat::Hdf5 {
            dataset: cfg.hdf5_dataset.clone(),
        },
    };
    import_volume(path, &format).map_err(fail("import"))
}

/// Import, crop, low-pass resampling, estimation and denoising. Returns the
/// volume to contour and the threshold.
fn preprocess(cfg: &PipelineConfig, r: &mut Report) -> Result<(Volume3D, f64), PipelineError> {
    let vol = timed(r, "import", |r| load_volume(cfg, r))?;
    r.input_dims = vol.dims();
    let mut vol = match cfg.crop {
        Some(c) => crop_volume(&vol, c.offset, c.size).map_err(fail("import"))?,
        None => vol,
    };
    let bins = cfg.bins;
    let snr = |stage: &str, v: &Volume3D| SnrEntry {
        stage: stage.into(),
        db: snr_of(v, bins),
    };
    r.snr.push(snr("import", &vol));
    if cfg.resample {
        vol = timed(r, "filter", |_| gauss_resample(&vol)).map_err(fail("filter"))?;
        r.snr.push(snr("filter", &vol));
    }
    let (sigma, tau_est) = timed(r, "estimate", |_| match build_histogram(&vol, bins) {
        Ok(h) => (estimate_sigma(&h).ok(), estimate_threshold(&h, cfg.f)),
        Err(e) => (None, Err(e)),
    });
    r.sigma = sigma;
    match sigma {
        Some(s) if cfg.denoise_iters > 0 => {
            vol = timed(r, "denoise", |_| {
                denoise_joint_bilateral(&vol, s, cfg.denoise_iters, RangeFn::Tukey)
            })
            .map_err(fail("denoise"))?;
            r.snr.push(snr("denoise", &vol));
        }
        Some(_) => {}
        None => r.notes.push("noise sigma not estimable; denoising skipped".into()),
    }
    let (tau, source) = match (cfg.tau, tau_est, &cfg.phantom) {
        (Some(tau), _, _) => (tau, "config"),
        (None, Ok(tau), _) => (tau, "estimated"),
        (None, Err(_), Some(spec)) => (spec.nominal_tau(), "phantom-nominal"),
        (None, Err(e), None) => return Err(fail("estimate")(e)),
    };
    r.tau = Some(tau);
    r.tau_source = Some(source.into());
    r.dims = vol.dims();
    Ok((vol, tau))
}

/// Carries attributes through a vertex map, keeping the first (lowest old id)
/// source of every new vertex.
fn remap_attrs(attrs: &[VertexAttributes], map: &[u32], n: usize) -> Vec<VertexAttributes> {
    let mut out = vec![None; n];
    for (old, &new) in map.iter().enumerate() {
        out[new as usize].get_or_insert(attrs[old]);
    }
    out.into_iter().map(Option::unwrap_or_default).collect()
}

fn export_all(
    cfg: &PipelineConfig,
    mesh: &XQuadMesh,
    attrs: &[VertexAttributes],
    r: &mut Report,
) -> Result<(), PipelineError> {
    let mut tri = mesh.to_trimesh();
    let mut attrs = attrs.to_vec();
    if let Some((ang, pos)) = cfg.cluster {
        let (m, map) =
            timed(r, "cluster", |_| cluster_vertices(&tri, ang, pos)).map_err(fail("cluster"))?;
        if !attrs.is_empty() {
            attrs = remap_attrs(&attrs, &map, m.vertex_count());
        }
        tri = m;
    }
    if cfg.fill_holes {
        r.holes = Some(timed(r, "holes", |_| fill_holes(&mut tri, cfg.max_hole)));
    }
    r.export_vertices = Some(tri.vertex_count());
    r.export_triangles = Some(tri.triangles.len());
    let opts = ExportOptions {
        emphasis: cfg.emphasis,
        partitions: (!cfg.stl_partitions.is_empty()).then(|| cfg.stl_partitions.clone()),
    };
    let mut formats = cfg.export.clone();
    formats.sort_by_key(|f| *f as u8);
    formats.dedup();
    timed(r, "export", |r| {
        for f in formats {
            let name = f.file_name(&cfg.stem);
            export_mesh(&tri, &attrs, f, cfg.out_dir.join(&name), &opts)
                .map_err(fail("export"))?;
            r.artifacts.push(name);
        }
        Ok(())
    })
}

/// Runs the configured stages on the configured worker count.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Report, PipelineError> {
    match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(fail("setup"))?
            .install(|| run_stages(cfg)),
        None => run_stages(cfg),
    }
}

fn run_stages(cfg: &PipelineConfig) -> Result<Report, PipelineError> {
    if !(1..=crate::codec::MAX_PRECISION).contains(&cfg.precision) {
        return Err(fail("setup")(format!("precision {} outside 1..=16", cfg.precision)));
    }
    fs::create_dir_all(&cfg.out_dir).map_err(fail("setup"))?;
    let mut r = Report {
        precision: cfg.precision,
        ..Default::default()
    };
    let (vol, tau) = preprocess(cfg, &mut r)?;
    if cfg.wants(Stage::Preprocess) {
        let name = format!("{}.denoised", cfg.stem);
        write_raw3d(&vol, cfg.out_dir.join(&name)).map_err(fail("preprocess"))?;
        r.artifacts.push(format!("{name}.json"));
        r.artifacts.push(format!("{name}.f32"));
    }
    if !cfg.runs(Stage::Extract) {
        return Ok(r);
    }
    let (contour, exa) = timed(&mut r, "extract", |_| {
        let mut c = build_sign_field(&vol, tau);
        quantize_offsets(&mut c, &vol, cfg.precision).map_err(fail("extract"))?;
        let exa = encode_contour(&c, CodeTable::shipped()).map_err(fail("extract"))?;
        Ok::<_, PipelineError>((c, exa))
    })?;
    drop(vol);
    let mesh = if cfg.runs(Stage::Mesh) {
        Some(timed(&mut r, "mesh", |_| build_mesh(&contour)).map_err(fail("mesh"))?)
    } else {
        None
    };
    let vertices = match &mesh {
        Some(m) => m.vertex_count(),
        None => count_vertices(&contour),
    };
    drop(contour);
    r.vertices = vertices;
    if cfg.wants(Stage::Extract) {
        let name = format!("{}.exa", cfg.stem);
        timed(&mut r, "export_exa", |r| write_exa(cfg, &name, &exa, vertices, r))?;
    }
    let Some(mut mesh) = mesh else {
        return Ok(r);
    };
    r.xquads = mesh.quads.len();
    r.triangles = mesh.triangles.len();
    r.closed_manifold = Some(edge_audit(&mesh.triangles).is_closed_manifold());
    let mut attrs = Vec::new();
    if cfg.wants(Stage::Features) {
        let initial = VertexGeometry::from(&mesh);
        let f = compute_features(cfg, &mut mesh, &mut r)?;
        let (dpos, dnrm) = timed(&mut r, "deltas", |_| {
            encode_vertex_deltas(&initial, &VertexGeometry::from(&mesh), Q_POS, Q_NRM)
        })
        .map_err(fail("deltas"))?;
        let mut c = exa;
        c.set_section(TAG_DPOS, dpos.to_bytes());
        c.set_section(TAG_DNRM, dnrm.to_bytes());
        write_exa(cfg, &format!("{}.smoothed.exa", cfg.stem), &c, vertices, &mut r)?;
        c.set_section(TAG_FEAT, pack_features(&f.attrs).map_err(fail("features"))?);
        let ao = AoSection::from_openness(&f.ao, cfg.ao_rays as u32, cfg.ao_radius as f32);
        c.set_section(TAG_AOCC, ao.to_bytes());
        write_exa(cfg, &format!("{}.features.exa", cfg.stem), &c, vertices, &mut r)?;
        r.partitions = partition_stats(&f.attrs);
        attrs = f.attrs;
    }
    if cfg.wants(Stage::Export) {
        export_all(cfg, &mesh, &attrs, &mut r)?;
    }
    Ok(r)
}

/// Summary of an EXA file or a bundle directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactStats {
    pub kind: String,
    pub bytes: usize,
    pub dims: Option<[usize; 3]>,
    pub tau: Option<f32>,
    pub precision: Option<u8>,
    pub vertices: usize,
    pub triangles: usize,
    pub sections: Vec<SectionStat>,
    pub partitions: Vec<PartitionStat>,
}

impl fmt::Display for ArtifactStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:.3} MB", self.kind, self.bytes as f64 / 1e6)?;
        let parts: Vec<String> = self
            .sections
            .iter()
            .map(|s| format!("{:.3} bit/v. {}", s.bits_per_vertex, s.tag))
            .collect();
        if !parts.is_empty() {
            write!(f, ", {}", parts.join(" + "))?;
        }
        writeln!(f)?;
        if let Some(d) = self.dims {
            writeln!(f, "dims {} x {} x {}", d[0], d[1], d[2])?;
        }
        writeln!(f, "{} vertices, {} triangles", self.vertices, self.triangles)?;
        for p in &self.partitions {
            writeln!(f, "partition {}: {} vertices", p.id, p.vertices)?;
        }
        Ok(())
    }
}

/// Reads an EXA file (decoding its contour to count the mesh) or a bundle
/// directory and summarizes it.
pub fn report_stats(path: impl AsRef<Path>) -> Result<ArtifactStats, PipelineError> {
    let path = path.as_ref();
    if path.is_dir() {
        let m = read_bundle_manifest(path).map_err(fail("stats"))?;
        let bytes = [&m.positions, &m.normals, &m.indices, &m.features]
            .iter()
            .map(|b| fs::metadata(path.join(&b.file)).map(|md| md.len() as usize))
            .sum::<Result<usize, _>>()
            .map_err(fail("stats"))?;
        let feat = fs::read(path.join(&m.features.file)).map_err(fail("stats"))?;
        let attrs: Vec<VertexAttributes> = feat
            .chunks_exact(2)
            .map(|w| VertexAttributes::unpack(u16::from_le_bytes([w[0], w[1]])))
            .collect();
        return Ok(ArtifactStats {
            kind: "bundle".into(),
            bytes,
            dims: None,
            tau: None,
            precision: None,
            vertices: m.vertex_count as usize,
            triangles: m.triangle_count as usize,
            sections: Vec::new(),
            partitions: partition_stats(&attrs),
        });
    }
    let c = exa_read(path).map_err(fail("stats"))?;
    let contour = exa_decode(&c).map_err(fail("stats"))?;
    let mesh = build_mesh(&contour).map_err(fail("stats"))?;
    let partitions = match c.section(TAG_FEAT) {
        Some(s) => partition_stats(&unpack_features(s).map_err(fail("stats"))?),
        None => Vec::new(),
    };
    let stat = exa_stat(&path.display().to_string(), &c, mesh.vertex_count());
    Ok(ArtifactStats {
        kind: "exa".into(),
        bytes: stat.bytes,
        dims: Some(c.dims()),
        tau: Some(c.tau),
        precision: Some(c.precision),
        vertices: mesh.vertex_count(),
        triangles: mesh.triangles.len(),
        sections: stat.sections,
        partitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_lists() {
        assert_eq!(
            parse_stages("all").unwrap(),
            [Stage::Extract, Stage::Mesh, Stage::Features, Stage::Export]
        );
        assert_eq!(parse_stages("export,extract").unwrap(), [Stage::Extract, Stage::Export]);
        assert!(parse_stages("mesh,paint").is_err());
        assert!(parse_stages("").is_err());
    }

    #[test]
    fn crop_syntax() {
        let c: CropBox = "1,2,3:40,50,60".parse().unwrap();
        assert_eq!(c, CropBox { offset: [1, 2, 3], size: [40, 50, 60] });
        assert!("1,2:3,4,5".parse::<CropBox>().is_err());
        assert!("1,2,3".parse::<CropBox>().is_err());
    }

    #[test]
    fn config_json_uses_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"precision": 4}"#).unwrap();
        assert_eq!(c.precision, 4);
        assert_eq!(c.ao_rays, 160);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"precison": 4}"#).is_err());
        let back: PipelineConfig =
            serde_json::from_str(&serde_json::to_string(&PipelineConfig::tablet()).unwrap()).unwrap();
        assert_eq!(back, PipelineConfig::tablet());
    }

    #[test]
    fn attributes_follow_cluster_representatives() {
        let a = |p| VertexAttributes { partition: p, ..Default::default() };
        let out = remap_attrs(&[a(1), a(2), a(3)], &[0, 0, 1], 2);
        assert_eq!(out, [a(1), a(3)]);
    }
}
