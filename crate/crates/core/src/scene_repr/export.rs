//! Snapshot export of probability maps as PPM images and CSV tables.

use std::io::Write;
use std::path::Path;

use super::ProbMap;
use crate::error::{Error, Result};

/// Blue (0) through white (0.5) to red (1).
pub fn heat_color(p: f64) -> [u8; 3] {
    let p = p.clamp(0.0, 1.0);
    if p < 0.5 {
        let t = p / 0.5;
        [(255.0 * t) as u8, (255.0 * t) as u8, 255]
    } else {
        let t = (1.0 - p) / 0.5;
        [255, (255.0 * t) as u8, (255.0 * t) as u8]
    }
}

/// Encode an RGB buffer as a binary P6 image.
pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(
        rgb.len(),
        width * height * 3,
        "pixel buffer does not match image size"
    );
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Parse a P6 image with maxval 255 into `(width, height, pixels)`.
pub fn decode_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |m: &str| Error::Parse(format!("ppm: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| bad("header is not ascii"))?
                .to_string(),
        );
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(bad("expected P6 with maxval 255"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let data = bytes.get(pos + 1..).unwrap_or(&[]);
    if data.len() != w * h * 3 {
        return Err(bad("pixel data length"));
    }
    Ok((w, h, data.to_vec()))
}

/// Binary P6 image, `scale` pixels per grid, with optional colored grids
/// drawn on top (e.g. the agent trajectory). Row 0 is the largest z so
/// that +z points up.
pub fn ppm_bytes(map: &ProbMap, scale: usize, overlay: &[(usize, [u8; 3])]) -> Vec<u8> {
    let m = map.m;
    let mut colors: Vec<[u8; 3]> = map.p.iter().map(|&p| heat_color(p)).collect();
    for &(i, c) in overlay {
        if i < colors.len() {
            colors[i] = c;
        }
    }
    let side = m * scale;
    let mut rgb = Vec::with_capacity(side * side * 3);
    for row in 0..side {
        let gz = m - 1 - row / scale;
        for col in 0..side {
            let gx = col / scale;
            rgb.extend_from_slice(&colors[gz * m + gx]);
        }
    }
    encode_ppm(side, side, &rgb)
}

pub fn write_ppm(
    path: &Path,
    map: &ProbMap,
    scale: usize,
    overlay: &[(usize, [u8; 3])],
) -> Result<()> {
    std::fs::write(path, ppm_bytes(map, scale, overlay))?;
    Ok(())
}

/// CSV with one row per grid: `gx,gz,p`.
pub fn write_csv<W: Write>(out: W, map: &ProbMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gx", "gz", "p"])?;
    for (i, p) in map.p.iter().enumerate() {
        w.write_record(&[
            (i % map.m).to_string(),
            (i / map.m).to_string(),
            format!("{p:.6}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_has_header_and_pixels() {
        let map = ProbMap::uniform(4, 0.5);
        let bytes = ppm_bytes(&map, 2, &[(0, [0, 0, 0])]);
        let header = b"P6\n8 8\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 8 * 8 * 3);
        // grid 0 is bottom-left
        let last_row = header.len() + 7 * 8 * 3;
        assert_eq!(&bytes[last_row..last_row + 3], &[0, 0, 0]);
    }

    #[test]
    fn ppm_round_trip() {
        let rgb: Vec<u8> = (0..2 * 3 * 3).map(|i| i as u8 * 7).collect();
        let bytes = encode_ppm(2, 3, &rgb);
        assert!(bytes.starts_with(b"P6\n2 3\n255\n"));
        assert_eq!(decode_ppm(&bytes).unwrap(), (2, 3, rgb));
        assert!(decode_ppm(b"P6\n2 3\n255\n").is_err());
    }

    #[test]
    fn csv_lists_every_grid() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &ProbMap::uniform(2, 0.25)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("1,1,0.250000"));
    }
}
