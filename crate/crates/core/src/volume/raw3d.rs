//! `raw3d` volume container: a JSON sidecar plus a little-endian f32 payload.
//!
//! ```text
//! <name>.json  {"dims": [nx, ny, nz], "spacing_um": 38.0, "dtype": "f32le"}
//! <name>.f32   nx*ny*nz little-endian f32, x fastest
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Result, Volume3D, VolumeError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VolumeFormat {
    Raw3d,
    /// HDF5 file with the named dataset (requires the `hdf5` feature).
    Hdf5 { dataset: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    dims: [usize; 3],
    #[serde(default)]
    spacing_um: Option<f64>,
    dtype: String,
}

fn io_err(path: &Path, source: std::io::Error) -> VolumeError {
    VolumeError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Resolves `<name>`, `<name>.json` or `<name>.f32` to the sidecar/payload pair.
fn raw3d_paths(path: &Path) -> (PathBuf, PathBuf) {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("f32") => (path.with_extension("json"), path.with_extension("f32")),
        _ => {
            let mut json = path.as_os_str().to_owned();
            json.push(".json");
            let mut payload = path.as_os_str().to_owned();
            payload.push(".f32");
            (PathBuf::from(json), PathBuf::from(payload))
        }
    }
}

pub fn import_volume(path: impl AsRef<Path>, format: &VolumeFormat) -> Result<Volume3D> {
    let path = path.as_ref();
    match format {
        VolumeFormat::Raw3d => import_raw3d(path),
        VolumeFormat::Hdf5 { dataset } => import_hdf5(path, dataset),
    }
}

fn import_raw3d(path: &Path) -> Result<Volume3D> {
    let (json_path, payload_path) = raw3d_paths(path);
    for p in [&json_path, &payload_path] {
        if !p.exists() {
            return Err(VolumeError::MissingFile(p.display().to_string()));
        }
    }
    let text = fs::read_to_string(&json_path).map_err(|e| io_err(&json_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| VolumeError::Sidecar {
        path: json_path.display().to_string(),
        message: e.to_string(),
    })?;
    if sidecar.dtype != "f32le" {
        return Err(VolumeError::Sidecar {
            path: json_path.display().to_string(),
            message: format!("unsupported dtype {:?}", sidecar.dtype),
        });
    }
    let dims = sidecar.dims;
    if dims.iter().any(|&d| d == 0) {
        return Err(VolumeError::InvalidDims(dims));
    }
    let bytes = fs::read(&payload_path).map_err(|e| io_err(&payload_path, e))?;
    let expected = dims[0] * dims[1] * dims[2] * 4;
    if bytes.len() != expected {
        return Err(VolumeError::PayloadMismatch {
            expected,
            found: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Volume3D::new(dims, values)?.with_spacing(sidecar.spacing_um))
}

/// Writes `<name>.json` and `<name>.f32` next to each other.
pub fn write_raw3d(vol: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let (json_path, payload_path) = raw3d_paths(path.as_ref());
    let sidecar = Sidecar {
        dims: vol.dims(),
        spacing_um: vol.spacing_um(),
        dtype: "f32le".into(),
    };
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&json_path, text).map_err(|e| io_err(&json_path, e))?;
    let mut bytes = Vec::with_capacity(vol.len() * 4);
    for v in vol.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&payload_path, bytes).map_err(|e| io_err(&payload_path, e))
}

#[cfg(feature = "hdf5")]
fn import_hdf5(path: &Path, dataset: &str) -> Result<Volume3D> {
    if !path.exists() {
        return Err(VolumeError::MissingFile(path.display().to_string()));
    }
    let file = hdf5::File::open(path).map_err(|e| VolumeError::Hdf5(e.to_string()))?;
    let ds = file
        .dataset(dataset)
        .map_err(|e| VolumeError::Hdf5(e.to_string()))?;
    let shape = ds.shape();
    if shape.len() != 3 {
        return Err(VolumeError::Hdf5(format!(
            "dataset {dataset} has rank {}, expected 3",
            shape.len()
        )));
    }
    // HDF5 is C-ordered (last index fastest): shape [nz, ny, nx].
    let dims = [shape[2], shape[1], shape[0]];
    let values: Vec<f32> = ds
        .read_raw::<f32>()
        .map_err(|e| VolumeError::Hdf5(e.to_string()))?;
    Volume3D::new(dims, values)
}

#[cfg(not(feature = "hdf5"))]
fn import_hdf5(path: &Path, _dataset: &str) -> Result<Volume3D> {
    if !path.exists() {
        return Err(VolumeError::MissingFile(path.display().to_string()));
    }
    Err(VolumeError::UnsupportedFormat(
        "hdf5 (rebuild with `--features hdf5`)".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("zeros");
        let vol = Volume3D::filled([2, 2, 2], 0.0).unwrap();
        write_raw3d(&vol, &base).unwrap();
        let back = import_volume(&base, &VolumeFormat::Raw3d).unwrap();
        assert_eq!(back.dims(), [2, 2, 2]);
        assert!(back.values().iter().all(|&v| v == 0.0));
        // either half of the pair resolves
        let via_json = import_volume(base.with_extension("json"), &VolumeFormat::Raw3d).unwrap();
        assert_eq!(via_json, back);
    }

    #[test]
    fn seven_floats_for_eight_voxels() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("short");
        fs::write(
            base.with_extension("json"),
            r#"{"dims":[2,2,2],"spacing_um":1.0,"dtype":"f32le"}"#,
        )
        .unwrap();
        fs::write(base.with_extension("f32"), vec![0u8; 7 * 4]).unwrap();
        match import_volume(base.with_extension("json"), &VolumeFormat::Raw3d) {
            Err(VolumeError::PayloadMismatch { expected, found }) => {
                assert_eq!((expected, found), (32, 28))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            import_volume(dir.path().join("nope"), &VolumeFormat::Raw3d),
            Err(VolumeError::MissingFile(_))
        ));
    }

    #[test]
    fn non_finite_payload_reports_voxel() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("nan");
        fs::write(
            base.with_extension("json"),
            r#"{"dims":[2,1,1],"dtype":"f32le"}"#,
        )
        .unwrap();
        let mut bytes = 0f32.to_le_bytes().to_vec();
        bytes.extend_from_slice(&f32::INFINITY.to_le_bytes());
        fs::write(base.with_extension("f32"), bytes).unwrap();
        assert!(matches!(
            import_volume(&base, &VolumeFormat::Raw3d),
            Err(VolumeError::NonFinite { x: 1, y: 0, z: 0, .. })
        ));
    }
}
