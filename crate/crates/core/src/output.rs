//! Field files, heatmaps, CSV tables and run manifests.
//!
//! A field `<stem>.f64` holds `nx * ny` little-endian doubles in row-major
//! order (row `iy` from the lower edge, `ix` fastest). The sidecar
//! `<stem>.toml` records the grid extents, time and config hash.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spatial::SpatialGrid;

/// Bumped on any change to field, CSV or manifest layout.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format_version: u32,
    pub nx: usize,
    pub ny: usize,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub time: f64,
    pub config_hash: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub name: String,
    pub model: String,
    pub t_end: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub name: String,
    pub config_hash: String,
    pub version: String,
    pub runs: Vec<ManifestRun>,
}

impl Manifest {
    pub fn new(name: &str, config_hash: &str) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            name: name.to_string(),
            config_hash: config_hash.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            runs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.toml");
        let text = toml::to_string(self).map_err(|e| invalid(e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Write `<stem>.f64`, `<stem>.toml` and `<stem>.png`; returns the file names.
pub fn write_field(
    dir: &Path,
    stem: &str,
    space: &SpatialGrid,
    rho: &[f64],
    time: f64,
    config_hash: &str,
) -> Result<Vec<String>> {
    if rho.len() != space.len() {
        return Err(invalid("field does not match the spatial grid"));
    }
    let (min, max) = min_max(rho);
    let bin = dir.join(format!("{stem}.f64"));
    let bytes: Vec<u8> = rho.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;

    let header = FieldHeader {
        format_version: FORMAT_VERSION,
        nx: space.nx,
        ny: space.ny,
        x: [space.x0, space.x1],
        y: [space.y0, space.y1],
        time,
        config_hash: config_hash.to_string(),
        min,
        max,
    };
    let side = dir.join(format!("{stem}.toml"));
    let text = toml::to_string(&header).map_err(|e| invalid(e.to_string()))?;
    fs::write(&side, text).map_err(|e| Error::io(&side, e))?;

    let png = dir.join(format!("{stem}.png"));
    write_heatmap(&png, space.nx, space.ny, rho)?;
    Ok(vec![format!("{stem}.f64"), format!("{stem}.toml"), format!("{stem}.png")])
}

/// Read a field written by [`write_field`], given the path of its `.f64` file.
pub fn read_field(bin: &Path) -> Result<(FieldHeader, Vec<f64>)> {
    let side = bin.with_extension("toml");
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let header: FieldHeader = toml::from_str(&text).map_err(|e| Error::Parse {
        path: side.display().to_string(),
        message: e.to_string(),
    })?;
    let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
    if bytes.len() != 8 * header.nx * header.ny {
        return Err(Error::Parse {
            path: bin.display().to_string(),
            message: format!("expected {} values", header.nx * header.ny),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, data))
}

/// Viridis heatmap with +y pointing up; min and max go into text chunks.
pub fn write_heatmap(path: &Path, nx: usize, ny: usize, data: &[f64]) -> Result<()> {
    let (min, max) = min_max(data);
    let span = if max > min { max - min } else { 1.0 };
    let mut pixels = Vec::with_capacity(3 * nx * ny);
    for iy in (0..ny).rev() {
        for &v in &data[iy * nx..(iy + 1) * nx] {
            let c = colorous::VIRIDIS.eval_continuous(((v - min) / span).clamp(0.0, 1.0));
            pixels.extend_from_slice(&[c.r, c.g, c.b]);
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), nx as u32, ny as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    enc.add_text_chunk("min".to_string(), format!("{min:e}")).map_err(png_err)?;
    enc.add_text_chunk("max".to_string(), format!("{max:e}")).map_err(png_err)?;
    let mut w = enc.write_header().map_err(png_err)?;
    w.write_image_data(&pixels).map_err(png_err)?;
    w.finish().map_err(png_err)
}

/// Serialize rows to CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write raw records, the first being the header.
pub fn write_csv_records(path: &Path, records: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
