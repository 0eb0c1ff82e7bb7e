//! One-shot converter from VOC-style XML annotations to the COCO-style model.
//!
//! Keeps ingestion single-path: VOC data is converted once, then loaded like
//! any other annotation file. The canonical 20-class registry is always
//! emitted so converted datasets agree on category ids regardless of which
//! classes happen to appear in a particular file set.

use std::fs;
use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{Annotation, BoundingBox, Category, DatasetError, DetectionDataset, ImageRecord};

/// The canonical VOC class names, ids 1..=20 in this order.
pub const VOC_CLASSES: [&str; 20] = [
    "aeroplane",
    "bicycle",
    "bird",
    "boat",
    "bottle",
    "bus",
    "car",
    "cat",
    "chair",
    "cow",
    "diningtable",
    "dog",
    "horse",
    "motorbike",
    "person",
    "pottedplant",
    "sheep",
    "sofa",
    "train",
    "tvmonitor",
];

#[derive(Debug, Default)]
struct VocObject {
    name: String,
    xmin: Option<f64>,
    ymin: Option<f64>,
    xmax: Option<f64>,
    ymax: Option<f64>,
}

#[derive(Debug, Default)]
struct VocAnnotation {
    filename: String,
    width: u32,
    height: u32,
    objects: Vec<VocObject>,
}

fn xml_error(path: &Path, message: impl std::fmt::Display) -> DatasetError {
    DatasetError::Xml {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn parse_voc_xml(text: &str, path: &Path) -> Result<VocAnnotation, DatasetError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut stack: Vec<String> = Vec::new();
    let mut out = VocAnnotation::default();
    let mut current: Option<VocObject> = None;

    loop {
        match reader.read_event().map_err(|e| xml_error(path, e))? {
            Event::Start(start) => {
                let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                if name == "object" {
                    current = Some(VocObject::default());
                }
                stack.push(name);
            }
            Event::End(_) => {
                if stack.pop().as_deref() == Some("object") {
                    if let Some(object) = current.take() {
                        out.objects.push(object);
                    }
                }
            }
            Event::Text(text) => {
                let value = text
                    .decode()
                    .map_err(|e| xml_error(path, e))?
                    .trim()
                    .to_string();
                if value.is_empty() {
                    continue;
                }
                let path_tail: Vec<&str> =
                    stack.iter().rev().take(3).map(String::as_str).collect();
                match path_tail.as_slice() {
                    ["filename", ..] => out.filename = value,
                    ["width", "size", ..] => {
                        out.width = value.parse().map_err(|e| xml_error(path, e))?;
                    }
                    ["height", "size", ..] => {
                        out.height = value.parse().map_err(|e| xml_error(path, e))?;
                    }
                    ["name", "object", ..] => {
                        if let Some(object) = current.as_mut() {
                            object.name = value;
                        }
                    }
                    [coord @ ("xmin" | "ymin" | "xmax" | "ymax"), "bndbox", "object"] => {
                        if let Some(object) = current.as_mut() {
                            let parsed: f64 = value.parse().map_err(|e| xml_error(path, e))?;
                            match *coord {
                                "xmin" => object.xmin = Some(parsed),
                                "ymin" => object.ymin = Some(parsed),
                                "xmax" => object.xmax = Some(parsed),
                                "ymax" => object.ymax = Some(parsed),
                                _ => unreachable!(),
                            }
                        }
                    }
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    if out.filename.is_empty() {
        return Err(xml_error(path, "missing <filename>"));
    }
    if out.width == 0 || out.height == 0 {
        return Err(xml_error(path, "missing or zero <size>"));
    }
    Ok(out)
}

/// Convert a directory of VOC XML annotation files into one dataset.
///
/// Files are processed in lexicographic order and image ids assigned from 1.
/// Image paths are recorded as `<images_prefix>/<filename>`. VOC coordinates
/// are 1-based inclusive; they become 0-based `[x, y, w, h]` with
/// `w = xmax - xmin + 1`, clamped to the image bounds.
pub fn convert_voc_annotations(
    annotations_dir: &Path,
    images_prefix: &str,
) -> Result<DetectionDataset, DatasetError> {
    let mut xml_paths: Vec<_> = fs::read_dir(annotations_dir)
        .map_err(|source| DatasetError::Io {
            path: annotations_dir.to_path_buf(),
            source,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "xml"))
        .collect();
    xml_paths.sort();

    let categories: Vec<Category> = VOC_CLASSES
        .iter()
        .enumerate()
        .map(|(index, name)| Category {
            id: index as u64 + 1,
            name: (*name).to_string(),
        })
        .collect();
    let category_id_of = |name: &str| -> Option<u64> {
        VOC_CLASSES
            .iter()
            .position(|c| *c == name)
            .map(|index| index as u64 + 1)
    };

    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for (index, xml_path) in xml_paths.iter().enumerate() {
        let text = fs::read_to_string(xml_path).map_err(|source| DatasetError::Io {
            path: xml_path.clone(),
            source,
        })?;
        let parsed = parse_voc_xml(&text, xml_path)?;
        let image_id = index as u64 + 1;

        for object in &parsed.objects {
            let category_id = category_id_of(&object.name).ok_or_else(|| {
                xml_error(xml_path, format!("unknown class name '{}'", object.name))
            })?;
            let (Some(xmin), Some(ymin), Some(xmax), Some(ymax)) =
                (object.xmin, object.ymin, object.xmax, object.ymax)
            else {
                return Err(xml_error(xml_path, "object with incomplete <bndbox>"));
            };
            let x0 = (xmin - 1.0).max(0.0);
            let y0 = (ymin - 1.0).max(0.0);
            let x1 = xmax.min(f64::from(parsed.width));
            let y1 = ymax.min(f64::from(parsed.height));
            if x1 <= x0 || y1 <= y0 {
                return Err(xml_error(
                    xml_path,
                    format!("degenerate box ({xmin}, {ymin}, {xmax}, {ymax})"),
                ));
            }
            annotations.push(Annotation {
                image_id,
                bbox: BoundingBox::new(x0, y0, x1 - x0, y1 - y0, category_id),
                is_ood: false,
            });
        }

        let prefix = images_prefix.trim_end_matches('/');
        let file_path = if prefix.is_empty() {
            parsed.filename.clone()
        } else {
            format!("{prefix}/{}", parsed.filename)
        };
        images.push(ImageRecord {
            id: image_id,
            file_path,
            width: parsed.width,
            height: parsed.height,
        });
    }

    let dataset = DetectionDataset { categories, images, annotations };
    dataset.validate()?;
    Ok(dataset)
}
