//! Binary PGM ("P5") with 16-bit big-endian samples.

use std::io::{self, Read, Write};

/// Writes a `width × height` row-major frame.
pub fn write_pgm<W: Write>(mut out: W, width: usize, height: usize, maxval: u16, pixels: &[u16]) -> io::Result<()> {
    assert_eq!(pixels.len(), width * height, "pixel buffer does not match dimensions");
    write!(out, "P5\n{width} {height}\n{maxval}\n")?;
    let mut buf = Vec::with_capacity(pixels.len() * 2);
    for &p in pixels {
        buf.extend_from_slice(&p.min(maxval).to_be_bytes());
    }
    out.write_all(&buf)?;
    out.flush()
}

/// Reads a P5 image written by [`write_pgm`]; returns `(width, height, maxval, pixels)`.
pub fn read_pgm<R: Read>(mut input: R) -> io::Result<(usize, usize, u16, Vec<u16>)> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PGM header field"));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if !(256..=65535).contains(&maxval) {
        return Err(bad("only 16-bit PGM is supported"));
    }
    let body = data.get(pos..).unwrap_or_default();
    if body.len() != w * h * 2 {
        return Err(bad("PGM pixel data has the wrong length"));
    }
    let pixels = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((w, h, maxval as u16, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let px: Vec<u16> = (0..12).map(|i| i * 300).collect();
        let mut buf = Vec::new();
        write_pgm(&mut buf, 4, 3, 4095, &px).unwrap();
        assert!(buf.starts_with(b"P5\n4 3\n4095\n"));
        assert_eq!(buf.len(), b"P5\n4 3\n4095\n".len() + 24);
        let (w, h, m, back) = read_pgm(&buf[..]).unwrap();
        assert_eq!((w, h, m), (4, 3, 4095));
        assert_eq!(back, px);
    }

    #[test]
    fn samples_are_big_endian() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 1, 1, 4095, &[0x0102]).unwrap();
        assert_eq!(&buf[buf.len() - 2..], &[0x01, 0x02]);
    }

    #[test]
    fn truncated_body_rejected() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 2, 4095, &[1, 2, 3, 4]).unwrap();
        buf.pop();
        assert!(read_pgm(&buf[..]).is_err());
    }
}
