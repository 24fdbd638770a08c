//! Serialization of planes, grain images, and key-value config text.
//!
//! Binary layout is shared by every plane type: a little-endian header of
//! two `u32` dimensions followed by the row-major payload (`i8` for bit
//! planes, `f64` for real planes, sixteen `f64` per block for 16-ary LLR
//! planes, and a role byte grid plus a `u32` grain-id grid for grain
//! images). The text forms are line-per-row and round-trip exactly; they
//! exist for golden files and human inspection.

use std::io::{Read, Write};

use tdmr_core::dgm::{CellRole, GrainImage};
use tdmr_core::plane::{BitPlane, Llr16Plane, RealPlane, NUM_CONFIGS};

use crate::Error;

fn write_header(w: &mut impl Write, d0: usize, d1: usize) -> Result<(), Error> {
    let a = u32::try_from(d0).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
    let b = u32::try_from(d1).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
    w.write_all(&a.to_le_bytes())?;
    w.write_all(&b.to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<(usize, usize), Error> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let d0 = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as usize;
    let d1 = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    Ok((d0, d1))
}

pub fn write_bit_plane(w: &mut impl Write, p: &BitPlane) -> Result<(), Error> {
    write_header(w, p.rows(), p.cols())?;
    let bytes: Vec<u8> = p.values().iter().map(|&v| v as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_bit_plane(r: &mut impl Read) -> Result<BitPlane, Error> {
    let (rows, cols) = read_header(r)?;
    let mut buf = vec![0u8; rows * cols];
    r.read_exact(&mut buf)?;
    let values: Vec<i8> = buf.iter().map(|&b| b as i8).collect();
    if values.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::Format("bit plane payload must be +/-1".into()));
    }
    Ok(BitPlane::from_values(rows, cols, values)?)
}

pub fn write_real_plane(w: &mut impl Write, p: &RealPlane) -> Result<(), Error> {
    write_header(w, p.rows(), p.cols())?;
    for &v in p.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_real_plane(r: &mut impl Read) -> Result<RealPlane, Error> {
    let (rows, cols) = read_header(r)?;
    let mut buf = vec![0u8; 8 * rows * cols];
    r.read_exact(&mut buf)?;
    let values: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RealPlane::from_values(rows, cols, values)?)
}

pub fn write_llr16_plane(w: &mut impl Write, p: &Llr16Plane) -> Result<(), Error> {
    write_header(w, p.block_rows(), p.block_cols())?;
    for block in p.blocks() {
        for &v in block {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_llr16_plane(r: &mut impl Read) -> Result<Llr16Plane, Error> {
    let (brows, bcols) = read_header(r)?;
    let mut p = Llr16Plane::uniform(brows, bcols);
    let mut buf = [0u8; 8 * NUM_CONFIGS];
    for bm in 0..brows {
        for bn in 0..bcols {
            r.read_exact(&mut buf)?;
            let block = p.block_mut(bm, bn);
            for (c, chunk) in buf.chunks_exact(8).enumerate() {
                block[c] = f64::from_le_bytes(chunk.try_into().unwrap());
            }
        }
    }
    Ok(p)
}

pub fn write_grain_image(w: &mut impl Write, img: &GrainImage) -> Result<(), Error> {
    write_header(w, img.rows(), img.cols())?;
    for m in 0..img.rows() {
        for n in 0..img.cols() {
            w.write_all(&[img.role(m, n).as_char() as u8])?;
        }
    }
    for m in 0..img.rows() {
        for n in 0..img.cols() {
            w.write_all(&img.grain_id(m, n).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_grain_image(r: &mut impl Read) -> Result<GrainImage, Error> {
    let (rows, cols) = read_header(r)?;
    let mut roles = vec![0u8; rows * cols];
    r.read_exact(&mut roles)?;
    let cell_role: Vec<CellRole> = roles
        .iter()
        .map(|&b| {
            CellRole::from_char(b as char)
                .ok_or_else(|| Error::Format(format!("unknown cell role byte {b:#04x}")))
        })
        .collect::<Result<_, _>>()?;
    let mut buf = vec![0u8; 4 * rows * cols];
    r.read_exact(&mut buf)?;
    let grain_id: Vec<u32> = buf
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GrainImage::from_parts(rows, cols, cell_role, grain_id)?)
}

/// One text row per image row; `+` and `-` pixels.
pub fn bit_plane_to_text(p: &BitPlane) -> String {
    let mut s = String::with_capacity((p.cols() + 1) * p.rows());
    for m in 0..p.rows() {
        for n in 0..p.cols() {
            s.push(if p.get(m, n) > 0 { '+' } else { '-' });
        }
        s.push('\n');
    }
    s
}

pub fn bit_plane_from_text(text: &str) -> Result<BitPlane, Error> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    let rows = lines.len();
    let cols = lines.first().map_or(0, |l| l.chars().count());
    let mut values = Vec::with_capacity(rows * cols);
    for line in &lines {
        if line.chars().count() != cols {
            return Err(Error::Format("ragged bit plane text".into()));
        }
        for c in line.chars() {
            values.push(match c {
                '+' => 1i8,
                '-' => -1i8,
                _ => return Err(Error::Format(format!("unknown bit pixel {c:?}"))),
            });
        }
    }
    Ok(BitPlane::from_values(rows, cols, values)?)
}

/// One text row per image row; space-separated values, shortest exact form.
pub fn real_plane_to_text(p: &RealPlane) -> String {
    let mut s = String::new();
    for m in 0..p.rows() {
        for n in 0..p.cols() {
            if n > 0 {
                s.push(' ');
            }
            s.push_str(&format!("{}", p.get(m, n)));
        }
        s.push('\n');
    }
    s
}

pub fn real_plane_from_text(text: &str) -> Result<RealPlane, Error> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let rows = lines.len();
    let mut values = Vec::new();
    let mut cols = 0usize;
    for (i, line) in lines.iter().enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Format(format!("bad real value {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        if i == 0 {
            cols = row.len();
        } else if row.len() != cols {
            return Err(Error::Format("ragged real plane text".into()));
        }
        values.extend(row);
    }
    Ok(RealPlane::from_values(rows, cols, values)?)
}

/// One text row per block row; sixteen space-separated values per block.
pub fn llr16_plane_to_text(p: &Llr16Plane) -> String {
    let mut s = String::new();
    for bm in 0..p.block_rows() {
        for bn in 0..p.block_cols() {
            for (c, &v) in p.block(bm, bn).iter().enumerate() {
                if bn > 0 || c > 0 {
                    s.push(' ');
                }
                s.push_str(&format!("{v}"));
            }
        }
        s.push('\n');
    }
    s
}

pub fn llr16_plane_from_text(text: &str) -> Result<Llr16Plane, Error> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let brows = lines.len();
    let mut rows_vals: Vec<Vec<f64>> = Vec::with_capacity(brows);
    for line in &lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Format(format!("bad llr value {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        if row.len() % NUM_CONFIGS != 0 || row.is_empty() {
            return Err(Error::Format("llr plane row is not whole blocks".into()));
        }
        rows_vals.push(row);
    }
    let bcols = rows_vals.first().map_or(0, |r| r.len() / NUM_CONFIGS);
    if rows_vals.iter().any(|r| r.len() != bcols * NUM_CONFIGS) {
        return Err(Error::Format("ragged llr plane text".into()));
    }
    let mut p = Llr16Plane::uniform(brows, bcols);
    for (bm, row) in rows_vals.iter().enumerate() {
        for bn in 0..bcols {
            p.block_mut(bm, bn)
                .copy_from_slice(&row[bn * NUM_CONFIGS..(bn + 1) * NUM_CONFIGS]);
        }
    }
    Ok(p)
}

/// Role-character grid, a blank line, then the grain-id grid.
pub fn grain_image_to_text(img: &GrainImage) -> String {
    let mut s = String::new();
    for m in 0..img.rows() {
        for n in 0..img.cols() {
            s.push(img.role(m, n).as_char());
        }
        s.push('\n');
    }
    s.push('\n');
    for m in 0..img.rows() {
        for n in 0..img.cols() {
            if n > 0 {
                s.push(' ');
            }
            s.push_str(&img.grain_id(m, n).to_string());
        }
        s.push('\n');
    }
    s
}

pub fn grain_image_from_text(text: &str) -> Result<GrainImage, Error> {
    let mut parts = text.splitn(2, "\n\n");
    let role_part = parts.next().unwrap_or("");
    let id_part = parts
        .next()
        .ok_or_else(|| Error::Format("grain image text needs two sections".into()))?;
    let role_lines: Vec<&str> = role_part.lines().filter(|l| !l.is_empty()).collect();
    let rows = role_lines.len();
    let cols = role_lines.first().map_or(0, |l| l.chars().count());
    let mut cell_role = Vec::with_capacity(rows * cols);
    for line in &role_lines {
        if line.chars().count() != cols {
            return Err(Error::Format("ragged role grid".into()));
        }
        for c in line.chars() {
            cell_role.push(
                CellRole::from_char(c)
                    .ok_or_else(|| Error::Format(format!("unknown cell role {c:?}")))?,
            );
        }
    }
    let mut grain_id = Vec::with_capacity(rows * cols);
    for line in id_part.lines().filter(|l| !l.trim().is_empty()) {
        for t in line.split_whitespace() {
            grain_id.push(
                t.parse()
                    .map_err(|_| Error::Format(format!("bad grain id {t:?}")))?,
            );
        }
    }
    Ok(GrainImage::from_parts(rows, cols, cell_role, grain_id)?)
}

/// Parses flat `key = value` text: one pair per line, `#` comments and blank
/// lines skipped. Later keys override earlier ones.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tdmr_core::dgm::{derive_grain_probs, generate_tiling};
    use tdmr_core::rng::rng_from_seed;
    use rand::Rng;

    fn random_bits(rows: usize, cols: usize, seed: u64) -> BitPlane {
        let mut rng = rng_from_seed(seed);
        let mut p = BitPlane::filled(rows, cols, 1);
        for m in 0..rows {
            for n in 0..cols {
                p.set(m, n, if rng.random::<bool>() { 1 } else { -1 });
            }
        }
        p
    }

    #[test]
    fn bit_plane_roundtrips_binary_and_text() {
        let p = random_bits(6, 10, 1);
        let mut buf = Vec::new();
        write_bit_plane(&mut buf, &p).unwrap();
        assert_eq!(buf.len(), 8 + 60);
        assert_eq!(read_bit_plane(&mut &buf[..]).unwrap(), p);
        assert_eq!(bit_plane_from_text(&bit_plane_to_text(&p)).unwrap(), p);
    }

    #[test]
    fn real_plane_roundtrips_binary_and_text() {
        let mut rng = rng_from_seed(2);
        let vals: Vec<f64> = (0..24).map(|_| rng.random_range(-5.0..5.0)).collect();
        let p = RealPlane::from_values(4, 6, vals).unwrap();
        let mut buf = Vec::new();
        write_real_plane(&mut buf, &p).unwrap();
        assert_eq!(read_real_plane(&mut &buf[..]).unwrap(), p);
        assert_eq!(real_plane_from_text(&real_plane_to_text(&p)).unwrap(), p);
    }

    #[test]
    fn llr16_plane_roundtrips_binary_and_text() {
        let mut rng = rng_from_seed(3);
        let mut p = Llr16Plane::uniform(2, 3);
        for block in p.blocks_mut() {
            for v in block.iter_mut().skip(1) {
                *v = rng.random_range(-8.0..8.0);
            }
        }
        let mut buf = Vec::new();
        write_llr16_plane(&mut buf, &p).unwrap();
        assert_eq!(read_llr16_plane(&mut &buf[..]).unwrap(), p);
        assert_eq!(llr16_plane_from_text(&llr16_plane_to_text(&p)).unwrap(), p);
    }

    #[test]
    fn grain_image_roundtrips_binary_and_text() {
        let probs = derive_grain_probs(0.2).unwrap();
        let img = generate_tiling(12, 16, &probs, 7).unwrap();
        let mut buf = Vec::new();
        write_grain_image(&mut buf, &img).unwrap();
        assert_eq!(read_grain_image(&mut &buf[..]).unwrap(), img);
        assert_eq!(grain_image_from_text(&grain_image_to_text(&img)).unwrap(), img);
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let p = random_bits(4, 4, 9);
        let mut buf = Vec::new();
        write_bit_plane(&mut buf, &p).unwrap();
        buf.truncate(buf.len() - 1);
        assert!(read_bit_plane(&mut &buf[..]).is_err());
    }

    #[test]
    fn kv_parsing_handles_comments_and_errors() {
        let pairs = parse_kv("a = 1\n# note\n\n b=two words \n").unwrap();
        assert_eq!(
            pairs,
            vec![("a".into(), "1".into()), ("b".into(), "two words".into())]
        );
        assert!(parse_kv("novalue\n").is_err());
    }
}
