//! Manifest ingestion: CSV listings and the two-directory camera layout.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{Camera, DatasetManifest, ManifestEntry};

const HEADER: [&str; 3] = ["image_path", "person_id", "camera_id"];

/// Parses a CSV manifest with header `image_path,person_id,camera_id`.
/// Relative image paths are resolved against the manifest's directory.
pub fn parse_manifest(path: &Path) -> Result<DatasetManifest> {
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format(format!("cannot open manifest {}: {e}", path.display())))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Format(format!("manifest header: {e}")))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != HEADER {
            return Err(Error::Format(format!(
                "manifest header must be `{}`, got `{}`",
                HEADER.join(","),
                got.join(",")
            )));
        }
    }
    let mut entries = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let row = row.map_err(|e| Error::Format(format!("manifest line {line}: {e}")))?;
        if row.len() != 3 {
            return Err(Error::Format(format!(
                "manifest line {line}: expected 3 fields, got {}",
                row.len()
            )));
        }
        let image = row.get(0).unwrap();
        let person = row.get(1).unwrap();
        let camera = Camera::parse(row.get(2).unwrap())
            .map_err(|e| Error::Format(format!("manifest line {line}: {e}")))?;
        if image.is_empty() || person.is_empty() {
            return Err(Error::Format(format!("manifest line {line}: empty field")));
        }
        let raw = PathBuf::from(image);
        let resolved = if raw.is_absolute() { raw } else { base.join(image) };
        entries.push(ManifestEntry {
            path: resolved,
            image_id: image.to_string(),
            person_id: person.to_string(),
            camera,
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(DatasetManifest { name, entries })
}

/// Writes a manifest as CSV (paths as stored in `image_id`).
pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Format(format!("cannot write manifest: {e}")))?;
    writer
        .write_record(HEADER)
        .map_err(|e| Error::Format(format!("manifest write: {e}")))?;
    for e in &manifest.entries {
        writer
            .write_record([e.image_id.as_str(), e.person_id.as_str(), &e.camera.to_string()])
            .map_err(|er| Error::Format(format!("manifest write: {er}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Format(format!("manifest write: {e}")))?;
    Ok(())
}

/// Builds a manifest from the common two-directory layout: `cam_a/` and
/// `cam_b/` hold one image per identity, paired by the file-stem prefix
/// before the first `_` (or the whole stem when there is none).
pub fn manifest_from_camera_dirs(dir: &Path) -> Result<DatasetManifest> {
    let cam_a = dir.join("cam_a");
    let cam_b = dir.join("cam_b");
    if !cam_a.is_dir() || !cam_b.is_dir() {
        return Err(Error::Format(format!(
            "{} does not contain cam_a/ and cam_b/ subdirectories",
            dir.display()
        )));
    }
    let mut entries = Vec::new();
    for (cam, sub) in [(Camera::A, &cam_a), (Camera::B, &cam_b)] {
        let mut files: Vec<PathBuf> = std::fs::read_dir(sub)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.extension()
                    .map(|x| {
                        let x = x.to_string_lossy().to_ascii_lowercase();
                        ["png", "jpg", "jpeg", "bmp"].contains(&x.as_str())
                    })
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        for f in files {
            let stem = f
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let person = stem.split('_').next().unwrap_or(&stem).to_string();
            let sub_name = if cam == Camera::A { "cam_a" } else { "cam_b" };
            let file_name = f.file_name().unwrap().to_string_lossy().into_owned();
            entries.push(ManifestEntry {
                path: f.clone(),
                image_id: format!("{sub_name}/{file_name}"),
                person_id: person,
                camera: cam,
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::Format(format!("no images found under {}", dir.display())));
    }
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(DatasetManifest { name, entries })
}

/// Loads a manifest from a CSV file, or from a directory in the
/// `cam_a`/`cam_b` layout.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    if path.is_dir() {
        manifest_from_camera_dirs(path)
    } else {
        parse_manifest(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_well_formed_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "image_path,person_id,camera_id").unwrap();
        writeln!(f, "a/1.png,p1,A").unwrap();
        writeln!(f, "b/1.png,p1,B").unwrap();
        writeln!(f, "a/2.png,p2,A").unwrap();
        writeln!(f, "b/2.png,p2,B").unwrap();
        let m = parse_manifest(&path).unwrap();
        assert_eq!(m.entries.len(), 4);
        assert_eq!(m.paired_ids(), vec!["p1".to_string(), "p2".to_string()]);
        assert_eq!(m.entries[0].path, dir.path().join("a/1.png"));
        assert_eq!(m.entries[0].image_id, "a/1.png");
    }

    #[test]
    fn rejects_unknown_camera_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "image_path,person_id,camera_id").unwrap();
        writeln!(f, "a/1.png,p1,A").unwrap();
        writeln!(f, "a/2.png,p2,C").unwrap();
        let err = parse_manifest(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "message was: {msg}");
        assert!(msg.contains('C'));
    }

    #[test]
    fn rejects_missing_file_and_bad_header() {
        assert!(parse_manifest(Path::new("/nonexistent/m.csv")).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hdr.csv");
        std::fs::write(&path, "a,b,c\nx,y,A\n").unwrap();
        let err = parse_manifest(&path).unwrap_err();
        assert!(err.to_string().contains("header"));
    }

    #[test]
    fn camera_dir_layout_scan() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("cam_a")).unwrap();
        std::fs::create_dir_all(dir.path().join("cam_b")).unwrap();
        // 1×1 PNG placeholder bytes are enough for the scan (not decoded here).
        for cam in ["cam_a", "cam_b"] {
            for id in ["000_45", "001_90", "002_00"] {
                std::fs::write(dir.path().join(cam).join(format!("{id}.png")), b"x").unwrap();
            }
        }
        let m = manifest_from_camera_dirs(dir.path()).unwrap();
        assert_eq!(m.entries.len(), 6);
        assert_eq!(
            m.paired_ids(),
            vec!["000".to_string(), "001".to_string(), "002".to_string()]
        );
        assert!(m.distractor_ids().is_empty());
    }

    #[test]
    fn round_trips_through_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let manifest = DatasetManifest {
            name: "m".into(),
            entries: vec![ManifestEntry {
                path: dir.path().join("img/x.png"),
                image_id: "img/x.png".into(),
                person_id: "p9".into(),
                camera: Camera::B,
            }],
        };
        write_manifest(&manifest, &path).unwrap();
        let back = parse_manifest(&path).unwrap();
        assert_eq!(back.entries.len(), 1);
        assert_eq!(back.entries[0].person_id, "p9");
        assert_eq!(back.entries[0].camera, Camera::B);
    }
}
