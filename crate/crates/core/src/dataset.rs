//! Dataset loading: one directory per category, one labelled point file per
//! object.
//!
//! Expected layout:
//!
//! ```text
//! root/
//!   mug/
//!     parts.txt        # optional: line i names part label i
//!     0001.txt         # "x y z label" lines
//!     0002.txt
//!   table/
//!     ...
//! ```
//!
//! Part labels are local to their category. A `parts.txt` file maps label
//! ids to readable names; without it, labels resolve to `category:id`.
//! Directory entries are visited in sorted order so loading is deterministic.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pointcloud::{load_cloud, save_cloud, CloudFormat, PointCloud};

/// One annotated object view.
#[derive(Debug, Clone)]
pub struct ObjectInstance {
    /// `category/file-stem`, unique within a dataset.
    pub id: String,
    pub category: String,
    pub cloud: PointCloud,
}

/// A loaded dataset with per-category part naming.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub objects: Vec<ObjectInstance>,
    /// category -> part names indexed by label id.
    pub part_names: BTreeMap<String, Vec<String>>,
}

impl Dataset {
    /// Resolve a category-local label id to a globally unique part name.
    pub fn part_name(&self, category: &str, label: u32) -> String {
        self.part_names
            .get(category)
            .and_then(|names| names.get(label as usize))
            .cloned()
            .unwrap_or_else(|| format!("{category}:{label}"))
    }

    /// All distinct part names, sorted.
    pub fn all_parts(&self) -> Vec<String> {
        let mut parts = std::collections::BTreeSet::new();
        for obj in &self.objects {
            if let Some(labels) = &obj.cloud.part_labels {
                for &label in labels {
                    parts.insert(self.part_name(&obj.category, label));
                }
            }
        }
        parts.into_iter().collect()
    }
}

/// Load a dataset from the category-directory layout.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let mut categories: Vec<_> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().is_dir())
        .map(|entry| entry.path())
        .collect();
    categories.sort();

    let mut dataset = Dataset::default();
    for category_dir in categories {
        let category = category_dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();

        let mut files: Vec<_> = fs::read_dir(&category_dir)
            .map_err(|e| Error::io(&category_dir, e))?
            .filter_map(|entry| entry.ok())
            .map(|entry| entry.path())
            .filter(|path| path.is_file())
            .collect();
        files.sort();

        for path in files {
            let stem = path
                .file_stem()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            if path.file_name().and_then(|n| n.to_str()) == Some("parts.txt") {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let names: Vec<String> = text
                    .lines()
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty())
                    .collect();
                dataset.part_names.insert(category.clone(), names);
                continue;
            }
            let mut cloud = load_cloud(&path, CloudFormat::from_extension(&path))?;
            cloud.category = Some(category.clone());
            dataset.objects.push(ObjectInstance {
                id: format!("{category}/{stem}"),
                category: category.clone(),
                cloud,
            });
        }
    }
    if dataset.objects.is_empty() {
        return Err(Error::DatasetTooSmall("no objects found".into()));
    }
    Ok(dataset)
}

/// Write a dataset in the category-directory layout.
pub fn write_dataset(dataset: &Dataset, root: &Path) -> Result<()> {
    for obj in &dataset.objects {
        let dir = root.join(&obj.category);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let stem = obj.id.rsplit('/').next().unwrap_or(&obj.id);
        save_cloud(&obj.cloud, &dir.join(format!("{stem}.txt")), CloudFormat::XyzLabel)?;
    }
    for (category, names) in &dataset.part_names {
        let dir = root.join(category);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("parts.txt");
        fs::write(&path, names.join("\n") + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
