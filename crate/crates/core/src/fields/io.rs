use super::grid::{GridField, GridSpec};
use crate::error::{usage, Error, Result};
use std::io::{Read, Write};

/// Largest grid written by [`write_csv`].
pub const CSV_MAX_NODES: usize = 1 << 16;

/// Flat binary layout: `d` and `n` as little-endian `u64`, `L` as
/// little-endian `f64`, then all components in row-major order.
pub fn write_binary<W: Write>(field: &GridField, mut w: W) -> std::io::Result<()> {
    w.write_all(&(field.spec.d as u64).to_le_bytes())?;
    w.write_all(&(field.spec.n as u64).to_le_bytes())?;
    w.write_all(&field.spec.l.to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads the layout of [`write_binary`]; the component count is inferred
/// from the payload length.
pub fn read_binary<R: Read>(mut r: R) -> Result<GridField> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::Data(format!("read failed: {e}")))?;
    if buf.len() < 24 || buf.len() % 8 != 0 {
        return Err(Error::Data(format!("binary field has invalid length {}", buf.len())));
    }
    let word = |k: usize| -> [u8; 8] { buf[8 * k..8 * k + 8].try_into().expect("8 bytes") };
    let d = u64::from_le_bytes(word(0)) as usize;
    let n = u64::from_le_bytes(word(1)) as usize;
    let l = f64::from_le_bytes(word(2));
    let spec = GridSpec::new(d, n, l)?;
    let payload = buf.len() / 8 - 3;
    if payload == 0 || payload % spec.len() != 0 {
        return Err(Error::Data(format!(
            "payload of {payload} values is not a multiple of {}",
            spec.len()
        )));
    }
    let values = (0..payload).map(|k| f64::from_le_bytes(word(3 + k))).collect();
    GridField::from_values(spec, payload / spec.len(), values)
}

/// CSV with columns `x0.., v0..`, one row per node, 17 significant digits.
pub fn write_csv<W: Write>(field: &GridField, mut w: W) -> Result<()> {
    let spec = field.spec;
    if spec.len() > CSV_MAX_NODES {
        return usage(format!("grid of {} nodes is too large for CSV output", spec.len()));
    }
    let io = |e: std::io::Error| Error::Data(format!("write failed: {e}"));
    let mut header: Vec<String> = (0..spec.d).map(|k| format!("x{k}")).collect();
    header.extend((0..field.ncomp).map(|c| format!("v{c}")));
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for i in 0..spec.len() {
        let x = spec.point(i);
        let mut row: Vec<String> = x[..spec.d].iter().map(|v| format!("{v:.16e}")).collect();
        row.extend((0..field.ncomp).map(|c| format!("{:.16e}", field.component(c)[i])));
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let spec = GridSpec::new(2, 8, 3.0).unwrap();
        let f = GridField::vector_from_fn(spec, 2, |x, o| {
            o[0] = x[0].sin();
            o[1] = x[1] * 0.1;
        })
        .unwrap();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 2 * 64);
        let g = read_binary(buf.as_slice()).unwrap();
        assert_eq!(g.ncomp, 2);
        assert_eq!(g.values(), f.values());
    }

    #[test]
    fn csv_is_parseable() {
        let spec = GridSpec::new(1, 4, 1.0).unwrap();
        let f = GridField::from_fn(spec, |x| 1.0 / 3.0 + x[0]).unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "x0,v0");
        let v: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, f.values()[0]);
    }
}
