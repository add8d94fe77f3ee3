//! Text and binary encodings of diagnostics and fields.

use fracphase::format::fmt_g17;
use fracphase::{DiagnosticsRecord, Field};

pub const ENERGY_HEADER: &str = "t,E,E_mod,mass,r_drift,identity_residual,iters";

/// Header of the raw field format: `FPH1 <nx> <ny>` space-padded so the
/// whole line, newline included, is 16 bytes.
pub const BINARY_HEADER_LEN: usize = 16;

pub fn energy_row(r: &DiagnosticsRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        fmt_g17(r.t),
        fmt_g17(r.energy),
        fmt_g17(r.modified_energy),
        fmt_g17(r.mass),
        fmt_g17(r.r_drift),
        fmt_g17(r.identity_residual),
        r.solver_iterations
    )
}

/// One line per grid row `j`, `nx` comma-separated values each.
pub fn field_csv(f: &Field) -> String {
    let mut s = String::with_capacity(f.len() * 24);
    for row in f.values().chunks(f.nx()) {
        let cells: Vec<String> = row.iter().map(|&v| fmt_g17(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Header followed by `nx * ny` little-endian f64 in row-major order.
/// Dimensions too long for the padded header get an unpadded one.
pub fn field_binary(f: &Field) -> Vec<u8> {
    let mut head = format!("FPH1 {} {}", f.nx(), f.ny());
    while head.len() + 1 < BINARY_HEADER_LEN {
        head.push(' ');
    }
    head.push('\n');
    let mut bytes = head.into_bytes();
    bytes.reserve(8 * f.len());
    for v in f.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Inverse of [`field_binary`].
pub fn read_field_binary(bytes: &[u8]) -> Option<Field> {
    let end = bytes.iter().position(|&b| b == b'\n')?;
    let head = std::str::from_utf8(&bytes[..end]).ok()?;
    let mut parts = head.split_whitespace();
    if parts.next()? != "FPH1" {
        return None;
    }
    let nx: usize = parts.next()?.parse().ok()?;
    let ny: usize = parts.next()?.parse().ok()?;
    let body = &bytes[end + 1..];
    if body.len() != 8 * nx * ny {
        return None;
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Field::from_values(nx, ny, values).ok()
}
