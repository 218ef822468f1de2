//! Synthetic object catalog and its CSV file format
//! (`id,mass,bounciness,drag,angular_drag,radius`, one object per line).

use std::path::Path;

use crate::error::{Error, Result};
use crate::physics::ObjectSpec;

fn spec(id: &str, mass: f64, bounciness: f64, drag: f64, angular_drag: f64, radius: f64) -> ObjectSpec {
    ObjectSpec { id: id.to_string(), mass, bounciness, drag, angular_drag, radius }
}

/// Ten synthetic objects spanning 0.05–2.5 kg, bounciness 0–0.9, drag 0–1.
pub fn default_catalog() -> Vec<ObjectSpec> {
    vec![
        spec("foam_ball", 0.05, 0.6, 1.0, 0.05, 0.06),
        spec("paper_roll", 0.15, 0.1, 0.8, 0.2, 0.06),
        spec("rubber_ball", 0.25, 0.9, 0.1, 0.05, 0.05),
        spec("apple", 0.35, 0.3, 0.2, 0.1, 0.04),
        spec("mug", 0.45, 0.2, 0.05, 0.05, 0.05),
        spec("book", 0.6, 0.05, 0.3, 0.3, 0.08),
        spec("bottle", 0.8, 0.4, 0.0, 0.05, 0.05),
        spec("candle", 1.1, 0.0, 0.1, 0.1, 0.04),
        spec("toaster", 1.6, 0.1, 0.05, 0.2, 0.1),
        spec("statue", 2.5, 0.0, 0.0, 0.05, 0.08),
    ]
}

pub fn read_catalog(path: &Path) -> Result<Vec<ObjectSpec>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let spec: ObjectSpec = row.map_err(|e| Error::parse(path, e))?;
        spec.validate()?;
        out.push(spec);
    }
    if out.is_empty() {
        return Err(Error::parse(path, "catalog has no entries"));
    }
    Ok(out)
}

pub fn write_catalog(path: &Path, catalog: &[ObjectSpec]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    for spec in catalog {
        writer.serialize(spec).map_err(|e| Error::parse(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_spans_ranges() {
        let cat = default_catalog();
        assert_eq!(cat.len(), 10);
        for s in &cat {
            s.validate().unwrap();
        }
        let masses: Vec<f64> = cat.iter().map(|s| s.mass).collect();
        assert_eq!(masses.iter().cloned().fold(f64::INFINITY, f64::min), 0.05);
        assert_eq!(masses.iter().cloned().fold(0.0, f64::max), 2.5);
        assert!(cat.iter().any(|s| s.bounciness == 0.0));
        assert!(cat.iter().any(|s| s.bounciness == 0.9));
        assert!(cat.iter().any(|s| s.drag == 0.0));
        assert!(cat.iter().any(|s| s.drag == 1.0));
    }

    #[test]
    fn catalog_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.csv");
        write_catalog(&path, &default_catalog()).unwrap();
        assert_eq!(read_catalog(&path).unwrap(), default_catalog());
    }

    #[test]
    fn invalid_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "id,mass,bounciness,drag,angular_drag,radius\nx,-1,0.5,0,0,0.1\n").unwrap();
        assert!(read_catalog(&path).is_err());
    }
}
