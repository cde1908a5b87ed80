//! Deterministic serialization: CSV and JSON writers, feature-map storage,
//! and flat key=value config files.
//!
//! Every floating-point value leaving the library is formatted to at most 12
//! significant digits, C `%g` style, so repeated runs produce byte-identical
//! files. JSON numbers are rounded through the same decimal representation
//! before serialization.

use crate::error::{Error, Result};
use crate::hopfield::RetrievalResult;
use crate::kernel::FeatureMap;
use crate::uhop::TrainLogRow;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

/// Format with at most 12 significant digits, trimming trailing zeros;
/// switches to scientific notation outside the `1e-4..1e12` magnitude range.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("{:e} always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if !(-4..12).contains(&exp) {
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        return format!("{mant}e{exp}");
    }
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat(-point as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        format!(
            "{}.{}",
            &digits[..point as usize],
            &digits[point as usize..]
        )
    };
    let body = if body.contains('.') {
        body.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        body
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// Round to the value [`fmt_sig`] would print.
pub fn round_sig(x: f64) -> f64 {
    fmt_sig(x).parse().unwrap_or(x)
}

fn round_json_value(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap();
                if let Some(rounded) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = rounded;
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json_value),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json_value),
        _ => {}
    }
}

/// Serialize to pretty JSON with all floats rounded to 12 significant
/// digits. Object keys come out sorted, so output is byte-stable.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Config(e.to_string()))?;
    round_json_value(&mut v);
    let s = serde_json::to_string_pretty(&v).map_err(|e| Error::Config(e.to_string()))?;
    Ok(s + "\n")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// Render a CSV document (header plus rows, `\n` line endings, no quoting:
/// all values written by this crate are plain numbers or bare labels).
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    std::fs::write(path, csv_string(header, rows))?;
    Ok(())
}

/// Training log as CSV: one row per iteration.
pub fn train_log_csv(log: &[TrainLogRow]) -> String {
    let rows: Vec<Vec<String>> = log
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                fmt_sig(r.loss),
                fmt_sig(r.hardmax),
                fmt_sig(r.delta_min),
            ]
        })
        .collect();
    csv_string(&["iter", "loss", "hardmax", "delta_min"], &rows)
}

/// Grid values as CSV rows `(x, y, value)` in storage order.
pub fn grid_csv(grid: &crate::analysis::GridResult) -> String {
    let rows: Vec<Vec<String>> = grid
        .cells()
        .map(|(x, y, v)| vec![fmt_sig(x), fmt_sig(y), fmt_sig(v)])
        .collect();
    csv_string(&["x", "y", "value"], &rows)
}

/// Support histogram as CSV rows `(k, percent)` with buckets 1..9 and 10+.
pub fn histogram_csv(hist: &crate::analysis::SupportHistogram) -> String {
    let rows: Vec<Vec<String>> = hist
        .rows()
        .into_iter()
        .map(|(label, pct)| vec![label, fmt_sig(pct)])
        .collect();
    csv_string(&["k", "percent"], &rows)
}

/// Cap on the total number of scalars the trace JSON will inline for the
/// iterates; longer trajectories only report energies and final weights.
pub const TRACE_ELIDE_CAP: usize = 10_000;

/// JSON-friendly view of a retrieval trajectory.
#[derive(Debug, Serialize, Deserialize)]
pub struct TraceJson {
    pub steps: usize,
    pub converged: bool,
    pub energies: Vec<f64>,
    pub weights_final: Vec<f64>,
    /// True when the iterates were dropped because the trajectory exceeded
    /// [`TRACE_ELIDE_CAP`] scalars.
    pub iterates_elided: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterates: Option<Vec<Vec<f64>>>,
}

impl TraceJson {
    pub fn from_result(r: &RetrievalResult) -> Self {
        let scalars: usize = r.iterates.iter().map(|x| x.len()).sum();
        let elide = scalars > TRACE_ELIDE_CAP;
        Self {
            steps: r.steps,
            converged: r.converged,
            energies: r.energies.clone(),
            weights_final: r.weights_final.clone(),
            iterates_elided: elide,
            iterates: if elide {
                None
            } else {
                Some(r.iterates.iter().map(|x| x.to_vec()).collect())
            },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureMapJson {
    d: usize,
    d_phi: usize,
    normalize: bool,
    /// Row-major weights, `d * d_phi` entries.
    w: Vec<f64>,
}

/// Save a feature map as JSON (weights rounded to 12 significant digits,
/// like every other float this crate writes).
pub fn save_feature_map_json(path: &Path, phi: &FeatureMap) -> Result<()> {
    let (d, d_phi) = phi.weights().dim();
    let json = FeatureMapJson {
        d,
        d_phi,
        normalize: phi.normalizes(),
        w: phi.weights().iter().cloned().collect(),
    };
    write_json(path, &json)
}

pub fn load_feature_map_json(path: &Path) -> Result<FeatureMap> {
    let text = std::fs::read_to_string(path)?;
    let json: FeatureMapJson =
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    if json.w.len() != json.d * json.d_phi {
        return Err(Error::DimensionMismatch {
            expected: json.d * json.d_phi,
            got: json.w.len(),
        });
    }
    let w = Array2::from_shape_vec((json.d, json.d_phi), json.w)
        .map_err(|e| Error::Config(e.to_string()))?;
    FeatureMap::new(w, json.normalize)
}

/// Save a feature map as flat binary: little-endian `u32 d`, `u32 d_phi`,
/// then `d * d_phi` little-endian `f64` weights in row-major order. Exact
/// (no decimal rounding), unlike the JSON form.
pub fn save_feature_map_binary(path: &Path, phi: &FeatureMap) -> Result<()> {
    let (d, d_phi) = phi.weights().dim();
    let mut bytes = Vec::with_capacity(8 + d * d_phi * 8);
    bytes.extend_from_slice(&(d as u32).to_le_bytes());
    bytes.extend_from_slice(&(d_phi as u32).to_le_bytes());
    for v in phi.weights().iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Load the binary form; the normalization flag is not stored there and must
/// be supplied by the caller.
pub fn load_feature_map_binary(path: &Path, normalize: bool) -> Result<FeatureMap> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 8 {
        return Err(Error::TruncatedFile {
            needed: 8,
            got: bytes.len(),
        });
    }
    let d = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let d_phi = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let needed = 8 + d * d_phi * 8;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            needed,
            got: bytes.len(),
        });
    }
    let mut w = Vec::with_capacity(d * d_phi);
    for k in 0..d * d_phi {
        let at = 8 + k * 8;
        w.push(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
    }
    let w = Array2::from_shape_vec((d, d_phi), w).map_err(|e| Error::Config(e.to_string()))?;
    FeatureMap::new(w, normalize)
}

/// Parse a flat `key=value` config file. `#` starts a comment; blank lines
/// are skipped; whitespace around keys and values is trimmed.
pub fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key=value, got: {raw}",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Write bytes to a file, creating parent directories as needed.
pub fn write_all(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormKind;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(-2.25), "-2.25");
        assert_eq!(fmt_sig(1000.0), "1000");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        assert_eq!(fmt_sig(0.00001), "1e-5");
        assert_eq!(fmt_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_sig(-1.5e-19), "-1.5e-19");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(f64::NAN), "nan");
        // Rounding carries across the scientific threshold cleanly.
        assert_eq!(fmt_sig(999999999999.99), "1e12");
    }

    #[test]
    fn rounding_is_idempotent() {
        for &x in &[std::f64::consts::PI, 1.0 / 7.0, 6.02214076e23, -3.5e-7] {
            let once = round_sig(x);
            assert_eq!(once, round_sig(once));
            assert_eq!(fmt_sig(x), fmt_sig(once));
        }
    }

    #[test]
    fn csv_layout() {
        let s = csv_string(
            &["a", "b"],
            &[vec!["1".into(), "2".into()], vec!["3".into(), "4".into()]],
        );
        assert_eq!(s, "a,b\n1,2\n3,4\n");
    }

    #[test]
    fn json_floats_are_rounded() {
        #[derive(Serialize)]
        struct S {
            x: f64,
            n: u64,
        }
        let s = to_json_string(&S { x: 1.0 / 3.0, n: 7 }).unwrap();
        assert!(s.contains("0.333333333333"), "{s}");
        assert!(s.contains("\"n\": 7"), "{s}");
    }

    #[test]
    fn feature_map_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.json");
        let phi = FeatureMap::random(3, 4, 8).unwrap();
        save_feature_map_json(&path, &phi).unwrap();
        let back = load_feature_map_json(&path).unwrap();
        assert_eq!(back.dim_in(), 3);
        assert_eq!(back.dim_out(), 4);
        assert!(back.normalizes());
        for (a, b) in phi.weights().iter().zip(back.weights().iter()) {
            assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
        }
    }

    #[test]
    fn feature_map_binary_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.bin");
        let phi = FeatureMap::random(5, 2, 3).unwrap();
        save_feature_map_binary(&path, &phi).unwrap();
        let back = load_feature_map_binary(&path, true).unwrap();
        assert_eq!(phi.weights(), back.weights());

        std::fs::write(&path, [1u8, 2, 3]).unwrap();
        assert!(matches!(
            load_feature_map_binary(&path, true),
            Err(Error::TruncatedFile { .. })
        ));
    }

    #[test]
    fn trace_json_elides_long_trajectories() {
        use ndarray::Array1;
        let small = RetrievalResult {
            iterates: vec![Array1::zeros(4); 3],
            energies: vec![0.0; 3],
            weights_final: vec![1.0],
            converged: true,
            steps: 2,
        };
        assert!(!TraceJson::from_result(&small).iterates_elided);
        let big = RetrievalResult {
            iterates: vec![Array1::zeros(600); 20],
            energies: vec![0.0; 20],
            weights_final: vec![1.0],
            converged: false,
            steps: 19,
        };
        let t = TraceJson::from_result(&big);
        assert!(t.iterates_elided);
        assert!(t.iterates.is_none());
    }

    #[test]
    fn config_parsing() {
        let map = parse_config_str("# comment\n beta = 4.0 \n\nnorm=sparsemax\n").unwrap();
        assert_eq!(map.get("beta").unwrap(), "4.0");
        assert_eq!(map.get("norm").unwrap(), "sparsemax");
        assert!(parse_config_str("oops").is_err());
        let _ = map.get("norm").unwrap().parse::<NormKind>().unwrap();
    }

    #[test]
    fn histogram_csv_shape() {
        let h = crate::analysis::SupportHistogram::from_sizes(&[1, 2, 12]).unwrap();
        let csv = histogram_csv(&h);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,percent");
        assert_eq!(lines.len(), 11);
        assert!(lines[10].starts_with("10+,"));
    }
}
