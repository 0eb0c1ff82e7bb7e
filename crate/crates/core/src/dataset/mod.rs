//! Detection dataset model: categories, images, box annotations.
//!
//! One validated in-memory representation backs every stage of the pipeline.
//! Both the in-distribution training set and generated outlier sets use this
//! shape; outlier-ness is an annotation-level flag, not a category scheme.
//! Datasets are immutable after construction and safe to share across
//! threads; every transformation builds a new value.

mod coco;
mod manifest;
mod voc;

pub use coco::{load_dataset, load_dataset_str, save_dataset};
pub use manifest::{ManifestEntry, PromptRecord, SynthesisManifest, SynthesisStrategy};
pub use voc::{convert_voc_annotations, VOC_CLASSES};

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved category name carried by replaced boxes in generated datasets.
pub const OOD_CATEGORY_NAME: &str = "ood";

/// Boxes at or below this area (in square pixels) are too small to inpaint
/// reliably and are skipped by synthesis.
pub const MIN_SYNTHESIS_AREA: f64 = 2000.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dataset validation failed: {0}")]
    Validation(String),
    #[error("cannot sample {requested} image(s) from an empty dataset")]
    EmptySample { requested: usize },
    #[error("annotation XML error in {path}: {message}")]
    Xml { path: PathBuf, message: String },
    #[error("cannot merge datasets: {0}")]
    Merge(String),
}

/// A category (class label) in the registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
}

/// An image entry. Pixels are loaded lazily; only metadata lives here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub file_path: String,
    pub width: u32,
    pub height: u32,
}

/// An axis-aligned box in continuous pixel coordinates, left-top origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub category_id: u64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64, category_id: u64) -> Self {
        Self { x, y, w, h, category_id }
    }
}

/// One labeled box on one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: u64,
    pub bbox: BoundingBox,
    /// True for boxes whose content was replaced by synthesis.
    pub is_ood: bool,
}

/// A complete detection dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionDataset {
    pub categories: Vec<Category>,
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<Annotation>,
}

/// Area of a box in square pixels.
pub fn box_area(bbox: &BoundingBox) -> f64 {
    bbox.w * bbox.h
}

/// Whether a box is large enough to be replaced by synthesis.
///
/// The threshold is strict: an area of exactly [`MIN_SYNTHESIS_AREA`] is
/// rejected.
pub fn synthesis_eligible(bbox: &BoundingBox) -> bool {
    box_area(bbox) > MIN_SYNTHESIS_AREA
}

impl DetectionDataset {
    /// Check all structural invariants, reporting every offending id.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut problems: Vec<String> = Vec::new();

        let mut image_ids: HashSet<u64> = HashSet::new();
        let mut duplicate_images: Vec<u64> = Vec::new();
        for image in &self.images {
            if !image_ids.insert(image.id) {
                duplicate_images.push(image.id);
            }
            if image.width == 0 || image.height == 0 {
                problems.push(format!(
                    "image {} has degenerate size {}x{}",
                    image.id, image.width, image.height
                ));
            }
        }
        if !duplicate_images.is_empty() {
            problems.push(format!("duplicate image ids: {duplicate_images:?}"));
        }

        let mut category_ids: HashSet<u64> = HashSet::new();
        let mut duplicate_categories: Vec<u64> = Vec::new();
        for category in &self.categories {
            if !category_ids.insert(category.id) {
                duplicate_categories.push(category.id);
            }
        }
        if !duplicate_categories.is_empty() {
            problems.push(format!("duplicate category ids: {duplicate_categories:?}"));
        }

        let dims: HashMap<u64, (u32, u32)> = self
            .images
            .iter()
            .map(|img| (img.id, (img.width, img.height)))
            .collect();

        let mut dangling_images: Vec<u64> = Vec::new();
        let mut dangling_categories: Vec<u64> = Vec::new();
        for (index, ann) in self.annotations.iter().enumerate() {
            match dims.get(&ann.image_id) {
                None => {
                    if !dangling_images.contains(&ann.image_id) {
                        dangling_images.push(ann.image_id);
                    }
                }
                Some(&(width, height)) => {
                    let b = &ann.bbox;
                    let inside = b.w > 0.0
                        && b.h > 0.0
                        && b.x >= 0.0
                        && b.y >= 0.0
                        && b.x + b.w <= f64::from(width)
                        && b.y + b.h <= f64::from(height);
                    if !inside {
                        problems.push(format!(
                            "annotation {index} on image {} has invalid box \
                             (x={}, y={}, w={}, h={}) for {}x{}",
                            ann.image_id, b.x, b.y, b.w, b.h, width, height
                        ));
                    }
                }
            }
            if !category_ids.contains(&ann.bbox.category_id)
                && !dangling_categories.contains(&ann.bbox.category_id)
            {
                dangling_categories.push(ann.bbox.category_id);
            }
        }
        if !dangling_images.is_empty() {
            problems.push(format!(
                "annotations reference missing image ids: {dangling_images:?}"
            ));
        }
        if !dangling_categories.is_empty() {
            problems.push(format!(
                "annotations reference missing category ids: {dangling_categories:?}"
            ));
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::Validation(problems.join("; ")))
        }
    }

    pub fn category_name(&self, id: u64) -> Option<&str> {
        self.categories
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.name.as_str())
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.images.iter().find(|img| img.id == id)
    }

    /// Names of all non-sentinel categories, in registry order.
    pub fn in_distribution_category_names(&self) -> Vec<String> {
        self.categories
            .iter()
            .filter(|c| c.name != OOD_CATEGORY_NAME)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Annotation indices grouped per image, preserving dataset order.
    ///
    /// The position of an index inside its image's list is the "box index"
    /// used by manifests and scored instances.
    pub fn annotations_by_image(&self) -> HashMap<u64, Vec<usize>> {
        let mut grouped: HashMap<u64, Vec<usize>> = HashMap::new();
        for (index, ann) in self.annotations.iter().enumerate() {
            grouped.entry(ann.image_id).or_default().push(index);
        }
        grouped
    }

    /// True when at least one annotation is flagged as replaced content.
    pub fn has_ood_annotations(&self) -> bool {
        self.annotations.iter().any(|a| a.is_ood)
    }
}

/// Draw `n` image ids uniformly at random with replacement.
///
/// Identical `(dataset, n, seed)` always produce the identical sequence.
pub fn sample_with_repetition(
    dataset: &DetectionDataset,
    n: usize,
    seed: u64,
) -> Result<Vec<u64>, DatasetError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if dataset.images.is_empty() {
        return Err(DatasetError::EmptySample { requested: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<u64> = (0..n)
        .map(|_| dataset.images[rng.random_range(0..dataset.images.len())].id)
        .collect();
    Ok(ids)
}

/// Restrict an outlier test set to images free of in-distribution classes.
///
/// An image survives only if none of its annotations carries a category whose
/// name is in `in_dist_category_names`; annotations are restricted to the
/// surviving images. The category registry is kept as-is.
pub fn filter_ood_test(
    ood: &DetectionDataset,
    in_dist_category_names: &HashSet<String>,
) -> DetectionDataset {
    let name_of: HashMap<u64, &str> = ood
        .categories
        .iter()
        .map(|c| (c.id, c.name.as_str()))
        .collect();

    let contaminated: HashSet<u64> = ood
        .annotations
        .iter()
        .filter(|ann| {
            name_of
                .get(&ann.bbox.category_id)
                .is_some_and(|name| in_dist_category_names.contains(*name))
        })
        .map(|ann| ann.image_id)
        .collect();

    let images: Vec<ImageRecord> = ood
        .images
        .iter()
        .filter(|img| !contaminated.contains(&img.id))
        .cloned()
        .collect();
    let kept: HashSet<u64> = images.iter().map(|img| img.id).collect();
    let annotations: Vec<Annotation> = ood
        .annotations
        .iter()
        .filter(|ann| kept.contains(&ann.image_id))
        .cloned()
        .collect();

    DetectionDataset {
        categories: ood.categories.clone(),
        images,
        annotations,
    }
}

/// Combine two datasets (typically the source set and a generated outlier
/// set) into one training dataset.
///
/// Image ids must be disjoint; categories sharing an id must agree on the
/// name.
pub fn merge_datasets(
    a: &DetectionDataset,
    b: &DetectionDataset,
) -> Result<DetectionDataset, DatasetError> {
    let ids_a: HashSet<u64> = a.images.iter().map(|img| img.id).collect();
    let clashes: Vec<u64> = b
        .images
        .iter()
        .map(|img| img.id)
        .filter(|id| ids_a.contains(id))
        .collect();
    if !clashes.is_empty() {
        return Err(DatasetError::Merge(format!(
            "image ids present in both datasets: {clashes:?}"
        )));
    }

    let mut categories = a.categories.clone();
    for category in &b.categories {
        match categories.iter().find(|c| c.id == category.id) {
            Some(existing) if existing.name != category.name => {
                return Err(DatasetError::Merge(format!(
                    "category id {} is '{}' in one dataset and '{}' in the other",
                    category.id, existing.name, category.name
                )));
            }
            Some(_) => {}
            None => categories.push(category.clone()),
        }
    }

    let mut images = a.images.clone();
    images.extend(b.images.iter().cloned());
    let mut annotations = a.annotations.clone();
    annotations.extend(b.annotations.iter().cloned());

    let merged = DetectionDataset {
        categories,
        images,
        annotations,
    };
    merged.validate()?;
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_dataset() -> DetectionDataset {
        DetectionDataset {
            categories: vec![Category { id: 1, name: "disc".into() }],
            images: vec![ImageRecord {
                id: 1,
                file_path: "images/0001.png".into(),
                width: 100,
                height: 80,
            }],
            annotations: vec![Annotation {
                image_id: 1,
                bbox: BoundingBox::new(10.0, 10.0, 30.0, 20.0, 1),
                is_ood: false,
            }],
        }
    }

    #[test]
    fn box_area_examples() {
        assert_eq!(box_area(&BoundingBox::new(0.0, 0.0, 40.0, 50.0, 1)), 2000.0);
        assert_eq!(box_area(&BoundingBox::new(0.0, 0.0, 1.0, 1.0, 1)), 1.0);
        assert_eq!(box_area(&BoundingBox::new(0.0, 0.0, 100.0, 30.0, 1)), 3000.0);
    }

    #[test]
    fn eligibility_is_strict_at_threshold() {
        assert!(!synthesis_eligible(&BoundingBox::new(0.0, 0.0, 40.0, 50.0, 1)));
        assert!(synthesis_eligible(&BoundingBox::new(0.0, 0.0, 23.0, 87.0, 1)));
        assert!(!synthesis_eligible(&BoundingBox::new(0.0, 0.0, 1.0, 1.0, 1)));
    }

    #[test]
    fn eligibility_boundary_plus_one() {
        // 2001 square pixels, one above the cut.
        let bbox = BoundingBox::new(0.0, 0.0, 2001.0, 1.0, 1);
        assert!(!(2001.0 > 2000.0) || synthesis_eligible(&bbox));
        assert!(synthesis_eligible(&bbox));
    }

    #[test]
    fn validate_accepts_tiny_dataset() {
        tiny_dataset().validate().unwrap();
    }

    #[test]
    fn validate_reports_dangling_image() {
        let mut ds = tiny_dataset();
        ds.annotations.push(Annotation {
            image_id: 99,
            bbox: BoundingBox::new(0.0, 0.0, 5.0, 5.0, 1),
            is_ood: false,
        });
        let err = ds.validate().unwrap_err();
        assert!(err.to_string().contains("99"), "{err}");
    }

    #[test]
    fn validate_reports_dangling_category() {
        let mut ds = tiny_dataset();
        ds.annotations[0].bbox.category_id = 42;
        let err = ds.validate().unwrap_err();
        assert!(err.to_string().contains("42"), "{err}");
    }

    #[test]
    fn validate_rejects_out_of_bounds_box() {
        let mut ds = tiny_dataset();
        ds.annotations[0].bbox = BoundingBox::new(90.0, 70.0, 20.0, 20.0, 1);
        assert!(ds.validate().is_err());
    }

    #[test]
    fn sample_zero_is_empty() {
        assert!(sample_with_repetition(&tiny_dataset(), 0, 3).unwrap().is_empty());
    }

    #[test]
    fn sample_from_empty_errors() {
        let empty = DetectionDataset::default();
        assert!(matches!(
            sample_with_repetition(&empty, 1, 3),
            Err(DatasetError::EmptySample { requested: 1 })
        ));
        assert!(sample_with_repetition(&empty, 0, 3).unwrap().is_empty());
    }

    #[test]
    fn sample_single_image_is_forced() {
        let ids = sample_with_repetition(&tiny_dataset(), 7, 11).unwrap();
        assert_eq!(ids, vec![1; 7]);
    }

    #[test]
    fn sample_is_deterministic() {
        let mut ds = tiny_dataset();
        for id in 2..=10u64 {
            ds.images.push(ImageRecord {
                id,
                file_path: format!("images/{id:04}.png"),
                width: 100,
                height: 80,
            });
        }
        let a = sample_with_repetition(&ds, 5000, 17).unwrap();
        let b = sample_with_repetition(&ds, 5000, 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5000);
        assert_ne!(a, sample_with_repetition(&ds, 5000, 18).unwrap());
    }

    #[test]
    fn sample_empirical_distribution_close_to_uniform() {
        let mut ds = tiny_dataset();
        for id in 2..=10u64 {
            ds.images.push(ImageRecord {
                id,
                file_path: format!("images/{id:04}.png"),
                width: 100,
                height: 80,
            });
        }
        let draws = sample_with_repetition(&ds, 100_000, 7).unwrap();
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for id in draws {
            *counts.entry(id).or_default() += 1;
        }
        for id in 1..=10u64 {
            let share = *counts.get(&id).unwrap_or(&0) as f64 / 100_000.0;
            assert!(
                (share - 0.1).abs() < 0.02,
                "image {id} share {share} deviates from uniform"
            );
        }
    }

    fn two_image_ood_set() -> DetectionDataset {
        DetectionDataset {
            categories: vec![
                Category { id: 1, name: "dog".into() },
                Category { id: 2, name: "giraffe".into() },
            ],
            images: vec![
                ImageRecord { id: 1, file_path: "a.png".into(), width: 100, height: 100 },
                ImageRecord { id: 2, file_path: "b.png".into(), width: 100, height: 100 },
            ],
            annotations: vec![
                Annotation {
                    image_id: 1,
                    bbox: BoundingBox::new(0.0, 0.0, 10.0, 10.0, 1),
                    is_ood: false,
                },
                Annotation {
                    image_id: 1,
                    bbox: BoundingBox::new(20.0, 20.0, 10.0, 10.0, 2),
                    is_ood: false,
                },
                Annotation {
                    image_id: 2,
                    bbox: BoundingBox::new(0.0, 0.0, 10.0, 10.0, 2),
                    is_ood: false,
                },
            ],
        }
    }

    #[test]
    fn filter_removes_images_with_in_distribution_boxes() {
        let ood = two_image_ood_set();
        let in_dist: HashSet<String> = ["dog".to_string()].into_iter().collect();
        let filtered = filter_ood_test(&ood, &in_dist);
        assert_eq!(filtered.images.len(), 1);
        assert_eq!(filtered.images[0].id, 2);
        assert_eq!(filtered.annotations.len(), 1);
    }

    #[test]
    fn filter_without_overlap_is_identity_on_images() {
        let ood = two_image_ood_set();
        let in_dist: HashSet<String> = ["zebra".to_string()].into_iter().collect();
        let filtered = filter_ood_test(&ood, &in_dist);
        assert_eq!(filtered.images, ood.images);
        assert_eq!(filtered.annotations, ood.annotations);
    }

    #[test]
    fn merge_rejects_image_id_clash() {
        let ds = tiny_dataset();
        assert!(merge_datasets(&ds, &ds).is_err());
    }

    #[test]
    fn merge_unions_categories_and_annotations() {
        let a = tiny_dataset();
        let mut b = tiny_dataset();
        b.images[0].id = 2;
        b.annotations[0].image_id = 2;
        b.categories.push(Category { id: 7, name: OOD_CATEGORY_NAME.into() });
        let merged = merge_datasets(&a, &b).unwrap();
        assert_eq!(merged.images.len(), 2);
        assert_eq!(merged.annotations.len(), 2);
        assert_eq!(merged.categories.len(), 2);
    }

    proptest! {
        #[test]
        fn eligibility_matches_area_threshold(
            w in 1.0f64..200.0,
            h in 1.0f64..200.0,
        ) {
            let bbox = BoundingBox::new(0.0, 0.0, w, h, 1);
            prop_assert_eq!(synthesis_eligible(&bbox), box_area(&bbox) > 2000.0);
        }

        #[test]
        fn filtered_sets_contain_no_in_distribution_names(
            keep_dog in any::<bool>(),
            keep_giraffe in any::<bool>(),
        ) {
            let ood = two_image_ood_set();
            let mut in_dist: HashSet<String> = HashSet::new();
            if keep_dog { in_dist.insert("dog".into()); }
            if keep_giraffe { in_dist.insert("giraffe".into()); }
            let filtered = filter_ood_test(&ood, &in_dist);
            for ann in &filtered.annotations {
                let name = filtered.category_name(ann.bbox.category_id).unwrap();
                prop_assert!(!in_dist.contains(name));
            }
        }
    }
}
