//! Number formatting and atomic file output.

use std::io::Write;
use std::path::Path;

use klkit::{Error, Result};

pub const SCHEMA: &str = "v1";

/// `%.12g`: 12 significant digits, trailing zeros trimmed.
pub fn g12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(g12).unwrap_or_default()
}

/// CSV with a header row, written to a temp file next to `path` and renamed.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("writing {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut w = csv::Writer::from_writer(tmp.as_file_mut());
        let csv_err = |e: csv::Error| Error::Config(format!("writing {}: {e}", path.display()));
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
    }
    tmp.as_file_mut().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Same as [`write_csv`] but to stdout when no path is given.
pub fn emit_csv(path: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    match path {
        Some(p) => write_csv(p, header, rows),
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            let e = |e: csv::Error| Error::Config(format!("writing stdout: {e}"));
            w.write_record(header).map_err(e)?;
            for r in rows {
                w.write_record(r).map_err(e)?;
            }
            w.flush().map_err(|e| Error::Config(e.to_string()))?;
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(g12(0.5), "0.5");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(2.0 / 3.0 * 1e-7), "6.66666666667e-08");
        assert_eq!(g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(g12(-42.0), "-42");
        assert_eq!(g12(f64::INFINITY), "inf");
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(99999999999.95), "99999999999.9");
    }

    #[test]
    fn parses_back() {
        for x in [0.1, 1e-300, 6.02214076e23, -3.5, f64::INFINITY] {
            let y: f64 = g12(x).parse().unwrap();
            assert!((y - x).abs() <= 1e-11 * x.abs() || y == x);
        }
    }

    #[test]
    fn atomic_write_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_csv(&p, &["a", "b"], &[vec!["1".into(), "x, \"y\"".into()]]).unwrap();
        let mut r = csv::Reader::from_path(&p).unwrap();
        let rec = r.records().next().unwrap().unwrap();
        assert_eq!(&rec[1], "x, \"y\"");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
