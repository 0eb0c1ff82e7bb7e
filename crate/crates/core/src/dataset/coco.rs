//! COCO-style JSON annotation files.
//!
//! The single ingestion path for every dataset, including VOC data after
//! conversion. Boxes are stored as `[x, y, w, h]`; an extra `is_ood` field
//! (absent in stock COCO files, defaulting to false) flags replaced boxes in
//! generated sets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Annotation, BoundingBox, Category, DatasetError, DetectionDataset, ImageRecord};

#[derive(Debug, Serialize, Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoAnnotation {
    #[serde(default)]
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: Vec<f64>,
    #[serde(default)]
    area: Option<f64>,
    #[serde(default)]
    iscrowd: Option<u8>,
    #[serde(default)]
    is_ood: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// Load and validate a COCO-style annotation file.
///
/// Referenced image files are not opened; pixels load lazily at use sites.
pub fn load_dataset(path: &Path) -> Result<DetectionDataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_dataset_str(&text, path)
}

/// Parse annotation JSON held in memory; `origin` only labels errors.
pub fn load_dataset_str(text: &str, origin: &Path) -> Result<DetectionDataset, DatasetError> {
    let raw: CocoFile = serde_json::from_str(text).map_err(|err| DatasetError::Parse {
        path: origin.to_path_buf(),
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    })?;

    let mut bad_boxes: Vec<String> = Vec::new();
    let annotations: Vec<Annotation> = raw
        .annotations
        .iter()
        .map(|ann| {
            if ann.bbox.len() != 4 {
                bad_boxes.push(format!(
                    "annotation {} has bbox with {} value(s), expected 4",
                    ann.id,
                    ann.bbox.len()
                ));
                Annotation {
                    image_id: ann.image_id,
                    bbox: BoundingBox::new(0.0, 0.0, 0.0, 0.0, ann.category_id),
                    is_ood: ann.is_ood,
                }
            } else {
                Annotation {
                    image_id: ann.image_id,
                    bbox: BoundingBox::new(
                        ann.bbox[0],
                        ann.bbox[1],
                        ann.bbox[2],
                        ann.bbox[3],
                        ann.category_id,
                    ),
                    is_ood: ann.is_ood,
                }
            }
        })
        .collect();
    if !bad_boxes.is_empty() {
        return Err(DatasetError::Validation(bad_boxes.join("; ")));
    }

    let dataset = DetectionDataset {
        categories: raw
            .categories
            .into_iter()
            .map(|c| Category { id: c.id, name: c.name })
            .collect(),
        images: raw
            .images
            .into_iter()
            .map(|img| ImageRecord {
                id: img.id,
                file_path: img.file_name,
                width: img.width,
                height: img.height,
            })
            .collect(),
        annotations,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Write a dataset back out as COCO-style JSON.
///
/// Annotation ids are assigned sequentially from 1; they carry no meaning in
/// the in-memory model.
pub fn save_dataset(dataset: &DetectionDataset, path: &Path) -> Result<(), DatasetError> {
    let file = CocoFile {
        images: dataset
            .images
            .iter()
            .map(|img| CocoImage {
                id: img.id,
                file_name: img.file_path.clone(),
                width: img.width,
                height: img.height,
            })
            .collect(),
        annotations: dataset
            .annotations
            .iter()
            .enumerate()
            .map(|(index, ann)| CocoAnnotation {
                id: index as u64 + 1,
                image_id: ann.image_id,
                category_id: ann.bbox.category_id,
                bbox: vec![ann.bbox.x, ann.bbox.y, ann.bbox.w, ann.bbox.h],
                area: Some(ann.bbox.w * ann.bbox.h),
                iscrowd: Some(0),
                is_ood: ann.is_ood,
            })
            .collect(),
        categories: dataset
            .categories
            .iter()
            .map(|c| CocoCategory { id: c.id, name: c.name.clone() })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).expect("dataset serialization cannot fail");
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| DatasetError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}
