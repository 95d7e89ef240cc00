//! 8-bit grey-scale PNG and ASCII PGM (P2) input/output.
//!
//! Values map linearly between `[0, 1]` and `[0, 255]`; writing clamps to the
//! range and rounds half up, reading divides by 255.

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

/// Quantises one value to a byte with round-half-up.
pub fn quantize_value(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn quantize(img: &Image) -> Vec<u8> {
    img.data().iter().map(|&v| quantize_value(v)).collect()
}

pub fn dequantize(n: usize, bytes: &[u8]) -> Result<Image> {
    Image::new_nominal(n, bytes.iter().map(|&b| b as f64 / 255.0).collect())
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let n = img.n() as u32;
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, n, n);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&quantize(img)).map_err(png_err)?;
    }
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.width != info.height {
        return Err(Error::Format {
            kind: "png",
            detail: format!("non-square image {}x{}", info.width, info.height),
        });
    }
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format {
            kind: "png",
            detail: "only 8-bit grey-scale images are supported".into(),
        });
    }
    let n = info.width as usize;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(n * n)];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(frame.buffer_size());
    dequantize(n, &buf)
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Format {
        kind: "png",
        detail: e.to_string(),
    }
}

pub fn encode_pgm(img: &Image) -> String {
    let n = img.n();
    let mut s = format!("P2\n{n} {n}\n255\n");
    for row in quantize(img).chunks(n) {
        let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn decode_pgm(text: &str) -> Result<Image> {
    let fail = |detail: &str| Error::Format {
        kind: "pgm",
        detail: detail.to_string(),
    };
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(fail("missing P2 magic"));
    }
    let mut next_num = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| fail(&format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|_| fail(&format!("bad {what}")))
    };
    let w = next_num("width")?;
    let h = next_num("height")?;
    let maxval = next_num("maxval")?;
    if w != h {
        return Err(fail("non-square image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(fail("maxval out of range"));
    }
    let mut data = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        let v = next_num("sample")?;
        if v > maxval {
            return Err(fail("sample exceeds maxval"));
        }
        data.push(v as f64 / maxval as f64);
    }
    Image::new_nominal(w, data)
}

pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let bytes = encode_png(img)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

/// Reads a PNG or PGM, chosen by extension.
pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => decode_pgm(&String::from_utf8_lossy(&bytes)),
        _ => decode_png(&bytes),
    }
}
