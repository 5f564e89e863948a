use std::io::{self, Write};
use std::path::Path;

use tempfile::NamedTempFile;

/// Twelve significant digits, trailing zeros trimmed.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let s = format!("{:.*}", (11 - exp).max(0) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{e}")
    }
}

/// Comment block carrying the version, seed and full configuration.
pub fn header(config_json: &str, seed: Option<u64>) -> String {
    let mut h = format!("# ladderwalk {}\n", env!("CARGO_PKG_VERSION"));
    if let Some(s) = seed {
        h.push_str(&format!("# seed: {s}\n"));
    }
    h.push_str(&format!("# config: {config_json}\n"));
    h
}

/// Writes `body` to `path` through a sibling temp file and a rename, or to
/// stdout when no path is given.
pub fn emit(path: Option<&Path>, body: &str) -> io::Result<()> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()
        }
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = NamedTempFile::new_in(dir)?;
            tmp.write_all(body.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(p).map_err(|e| e.error)?;
            Ok(())
        }
    }
}
