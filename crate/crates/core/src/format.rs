//! Fixed decimal encoding shared by every text artifact.
//!
//! Reals are written with 17 significant digits in scientific notation
//! (`{:.16e}`), which round-trips every finite `f64` exactly. Infinities are
//! spelled `inf` / `-inf` and NaN as `nan`; these only appear in CSV output.

use std::fmt::Write;

pub fn real(x: f64) -> String {
    let mut s = String::with_capacity(24);
    push_real(&mut s, x);
    s
}

pub fn push_real(out: &mut String, x: f64) {
    if x.is_nan() {
        out.push_str("nan");
    } else if x.is_infinite() {
        out.push_str(if x > 0.0 { "inf" } else { "-inf" });
    } else {
        write!(out, "{x:.16e}").expect("writing to a String cannot fail");
    }
}

/// JSON array text for a slice of finite reals.
pub fn real_array(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24 + 2);
    s.push('[');
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        debug_assert!(v.is_finite());
        push_real(&mut s, v);
    }
    s.push(']');
    s
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let hash = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in hash.iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}
