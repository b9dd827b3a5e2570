//! Dataset manifests: which image belongs to which class.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "pbm", "pnm", "gif"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Sorted, unique class labels.
    pub classes: Vec<String>,
    /// Side length masks are normalized to.
    pub image_size: usize,
}

impl DatasetManifest {
    /// Builds a manifest from entries, validating uniqueness and sorting classes.
    pub fn from_entries(entries: Vec<ManifestEntry>, image_size: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDataset(PathBuf::new()));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(&e.path) {
                return Err(Error::Config(format!(
                    "duplicate manifest path {}",
                    e.path.display()
                )));
            }
        }
        let classes: BTreeSet<_> = entries.iter().map(|e| e.label.clone()).collect();
        Ok(Self {
            entries,
            classes: classes.into_iter().collect(),
            image_size,
        })
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).ok()
    }

    /// Class index of every entry, in entry order.
    pub fn labels(&self) -> Vec<usize> {
        self.entries
            .iter()
            .map(|e| self.class_index(&e.label).expect("label from entries"))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    paths.sort();
    Ok(paths)
}

/// Enumerates a directory-per-class layout: `root/<class>/<image>`.
///
/// Classes and the images inside each class are visited in lexicographic order.
pub fn load_manifest(root: impl AsRef<Path>, image_size: usize) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let mut entries = Vec::new();
    for class_dir in sorted_dir(root)?.into_iter().filter(|p| p.is_dir()) {
        let label = class_dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Config(format!("non UTF-8 class dir {}", class_dir.display())))?
            .to_owned();
        let images: Vec<_> = sorted_dir(&class_dir)?
            .into_iter()
            .filter(|p| is_image(p))
            .collect();
        if images.is_empty() {
            return Err(Error::ClassWithNoImages(label));
        }
        entries.extend(images.into_iter().map(|path| ManifestEntry {
            path,
            label: label.clone(),
        }));
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    DatasetManifest::from_entries(entries, image_size)
}

/// Enumerates a flat directory where the class is the file stem up to the
/// last `-`, as in the MPEG-7 CE-Shape-1 distribution (`apple-1.gif`).
pub fn load_flat_manifest(root: impl AsRef<Path>, image_size: usize) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let mut entries = Vec::new();
    for path in sorted_dir(root)?.into_iter().filter(|p| is_image(p)) {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let label = match stem.rsplit_once('-') {
            Some((class, _)) if !class.is_empty() => class.to_owned(),
            _ => continue,
        };
        entries.push(ManifestEntry { path, label });
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    DatasetManifest::from_entries(entries, image_size)
}

/// Reads a `path,label` CSV. Relative paths resolve against `base`.
pub fn load_csv_manifest(
    csv: impl AsRef<Path>,
    base: impl AsRef<Path>,
    image_size: usize,
) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(csv.as_ref())?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(str::trim) {
        Some("path,label") => {}
        other => {
            return Err(Error::Format {
                what: "manifest CSV",
                reason: format!("expected header `path,label`, found {other:?}"),
            })
        }
    }
    let mut entries = Vec::new();
    for (n, line) in lines.enumerate() {
        let (path, label) = line.rsplit_once(',').ok_or_else(|| Error::Format {
            what: "manifest CSV",
            reason: format!("row {} has no comma", n + 2),
        })?;
        let path = PathBuf::from(path.trim());
        let path = if path.is_absolute() {
            path
        } else {
            base.as_ref().join(path)
        };
        entries.push(ManifestEntry {
            path,
            label: label.trim().to_owned(),
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset(csv.as_ref().to_path_buf()));
    }
    DatasetManifest::from_entries(entries, image_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch_png(path: &Path) {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        // GIF encoding needs RGBA input
        image::RgbaImage::from_raw(1, 1, vec![255; 4]).unwrap().save(path).unwrap();
    }

    #[test]
    fn directory_per_class() {
        let dir = tempfile::tempdir().unwrap();
        touch_png(&dir.path().join("bat/x.png"));
        touch_png(&dir.path().join("apple/b.png"));
        touch_png(&dir.path().join("apple/a.png"));
        std::fs::write(dir.path().join("apple/notes.txt"), "ignored").unwrap();
        let m = load_manifest(dir.path(), 125).unwrap();
        assert_eq!(m.classes, vec!["apple", "bat"]);
        assert_eq!(m.len(), 3);
        let names: Vec<_> = m
            .entries
            .iter()
            .map(|e| e.path.file_name().unwrap().to_str().unwrap())
            .collect();
        assert_eq!(names, vec!["a.png", "b.png", "x.png"]);
        assert_eq!(m.labels(), vec![0, 0, 1]);
    }

    #[test]
    fn empty_root() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_manifest(dir.path(), 125), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn class_without_images() {
        let dir = tempfile::tempdir().unwrap();
        touch_png(&dir.path().join("apple/a.png"));
        std::fs::create_dir_all(dir.path().join("bat")).unwrap();
        assert!(matches!(
            load_manifest(dir.path(), 125),
            Err(Error::ClassWithNoImages(c)) if c == "bat"
        ));
    }

    #[test]
    fn flat_layout() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["apple-1.gif", "apple-2.png", "bat-1.png", "device0-3.png"] {
            touch_png(&dir.path().join(name));
        }
        let m = load_flat_manifest(dir.path(), 125).unwrap();
        assert_eq!(m.classes, vec!["apple", "bat", "device0"]);
        assert_eq!(m.len(), 4);
    }

    #[test]
    fn csv_override() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("m.csv");
        std::fs::write(&csv, "path,label\nimgs/a.png,cat\n/abs/b.png,dog\n").unwrap();
        let m = load_csv_manifest(&csv, dir.path(), 64).unwrap();
        assert_eq!(m.entries[0].path, dir.path().join("imgs/a.png"));
        assert_eq!(m.entries[1].path, PathBuf::from("/abs/b.png"));
        assert_eq!(m.classes, vec!["cat", "dog"]);

        std::fs::write(&csv, "file,class\na.png,cat\n").unwrap();
        assert!(load_csv_manifest(&csv, dir.path(), 64).is_err());
        std::fs::write(&csv, "path,label\na.png,cat\na.png,dog\n").unwrap();
        assert!(load_csv_manifest(&csv, dir.path(), 64).is_err());
    }
}
