//! PNG images, CSV tables and atomic file output.

use std::fs;
use std::io::{BufReader, Cursor, Write};
use std::path::{Path, PathBuf};

use sigmascale_core::ImageBuffer;

use crate::error::{Error, Result};

/// Reads an 8- or 16-bit grayscale, RGB or RGBA PNG into `[0,1]` samples.
pub fn load_png(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = png::Decoder::new(BufReader::new(file))
        .read_info()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(Error::format(path, format!("unsupported color type {other:?}"))),
    };
    let buf_len = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0; buf_len];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let samples = w * h * channels;
    let mut data = Vec::with_capacity(samples);
    for row in buf.chunks(info.line_size).take(h) {
        match depth {
            png::BitDepth::Eight => data.extend(row[..w * channels].iter().map(|&v| v as f64 / 255.0)),
            png::BitDepth::Sixteen => data.extend(
                row[..w * channels * 2]
                    .chunks_exact(2)
                    .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0),
            ),
            other => return Err(Error::format(path, format!("unsupported bit depth {other:?}"))),
        }
    }
    Ok(ImageBuffer::new(w, h, channels, data)?)
}

/// 8-bit PNG bytes with `v = round(255·s)`.
pub fn encode_png(image: &ImageBuffer) -> Result<Vec<u8>> {
    let color = match image.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        _ => png::ColorType::Rgba,
    };
    let bytes: Vec<u8> = image.data().iter().map(|&s| (s * 255.0).round() as u8).collect();
    let mut out = Cursor::new(Vec::new());
    {
        let mut enc = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::format("<png>", e.to_string()))?;
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::format("<png>", e.to_string()))?;
        writer.finish().map_err(|e| Error::format("<png>", e.to_string()))?;
    }
    Ok(out.into_inner())
}

pub fn save_png(image: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &encode_png(image)?)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "not a file path"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Full round-trip formatting for CSV cells.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Header plus rows of pre-formatted cells, `\n`-terminated.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// All `.png` files directly inside `dir`, in file-name order.
pub fn load_png_dir(dir: impl AsRef<Path>) -> Result<Vec<ImageBuffer>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    paths.iter().map(load_png).collect()
}
