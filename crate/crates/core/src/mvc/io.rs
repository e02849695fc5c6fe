use std::fmt::Write as _;
use std::io::{Read, Write};

use super::{MvcError, MvcMatrix, RowStatus};

/// File signature of the binary matrix format.
pub const MAGIC: &[u8; 8] = b"CWMVC\0\0\x01";

/// Binary layout: 8-byte magic, row count and column count as little-endian
/// `u64`, then row-major little-endian `f64` weights.
pub fn write_binary(mvc: &MvcMatrix, out: &mut impl Write) -> Result<(), MvcError> {
    let mut buf = Vec::with_capacity(24 + 8 * mvc.weights.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(mvc.rows as u64).to_le_bytes());
    buf.extend_from_slice(&(mvc.cols as u64).to_le_bytes());
    for w in &mvc.weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads the binary format. Row status is not stored; rows come back as interior.
pub fn read_binary(input: &mut impl Read) -> Result<MvcMatrix, MvcError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(MvcError::Format("bad header".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(8) as usize, word(16) as usize);
    let payload = &bytes[24..];
    if Some(payload.len()) != rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) {
        return Err(MvcError::Format(format!(
            "{} payload bytes for a {rows}x{cols} matrix",
            payload.len()
        )));
    }
    let weights = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    MvcMatrix::from_rows(rows, cols, weights)
}

/// CSV with a header `phi_0,…,phi_{n-1},row_sum,status`.
pub fn write_csv(mvc: &MvcMatrix, out: &mut impl Write) -> Result<(), MvcError> {
    let mut s = String::new();
    for j in 0..mvc.cols {
        let _ = write!(s, "phi_{j},");
    }
    s.push_str("row_sum,status\n");
    for i in 0..mvc.rows {
        let row = mvc.row(i);
        for w in row {
            let _ = write!(s, "{w:?},");
        }
        let status: RowStatus = mvc.status[i];
        let _ = writeln!(s, "{:?},{}", row.iter().sum::<f64>(), status.as_str());
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}
