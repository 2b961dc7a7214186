//! Plain-text file formats: profile ensembles, cross-section tables, chain
//! CSVs, bases, and key-value manifests.
//!
//! All parsers take complete text and return structured errors with line
//! numbers; they must never panic on malformed input (the fuzz targets hold
//! them to that). Writers format floats with Rust's shortest round-trip
//! representation, so output is byte-reproducible for identical values.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, got {token:?}"),
    })
}

/// Reads a profile ensemble: one whitespace-separated profile per row.
/// Lines starting with `#` are comments; an optional first row of altitude
/// labels is skipped if it does not parse as numbers.
pub fn read_ensemble(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut saw_data_or_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            tokens.iter().map(|t| t.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "non-finite profile value".to_string(),
                    });
                }
                match width {
                    None => width = Some(values.len()),
                    Some(w) if w != values.len() => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("expected {w} columns, got {}", values.len()),
                        });
                    }
                    _ => {}
                }
                rows.push(values);
            }
            Err(_) if !saw_data_or_header => {
                // The first non-comment row may be a header of labels.
            }
            Err(_) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "malformed profile row".to_string(),
                });
            }
        }
        saw_data_or_header = true;
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            message: "ensemble file contains no profiles".to_string(),
        });
    }
    let n = width.unwrap_or(0);
    if n == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "ensemble rows are empty".to_string(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

/// Writes an ensemble with an altitude header row.
pub fn write_ensemble(ensemble: &DMatrix<f64>, altitudes: &[f64]) -> String {
    let mut out = String::new();
    out.push('#');
    for z in altitudes {
        let _ = write!(out, " {z}");
    }
    out.push('\n');
    for i in 0..ensemble.nrows() {
        for j in 0..ensemble.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", ensemble[(i, j)]);
        }
        out.push('\n');
    }
    out
}

/// Reads a cross-section table in `wavelength,layer,value` CSV form (header
/// row required). Wavelengths are ordered by first appearance; every
/// (wavelength, layer) cell must be present exactly once and layer indices
/// must fill 0..n.
pub fn read_cross_sections(text: &str) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, raw)) if raw.trim().is_empty() => continue,
            Some((idx, raw)) => break (idx, raw),
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty cross-section file".to_string(),
                })
            }
        }
    };
    let header_fields: Vec<&str> = header.1.split(',').map(str::trim).collect();
    if header_fields != ["wavelength", "layer", "value"] {
        return Err(Error::Parse {
            line: header.0 + 1,
            message: format!(
                "expected header 'wavelength,layer,value', got {:?}",
                header.1
            ),
        });
    }

    let mut wavelengths: Vec<f64> = Vec::new();
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_layer = 0usize;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let wavelength = parse_f64(fields[0], line_no)?;
        if !wavelength.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: "non-finite wavelength".to_string(),
            });
        }
        let layer: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("expected a layer index, got {:?}", fields[1]),
        })?;
        if layer > 100_000 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("implausible layer index {layer}"),
            });
        }
        let value = parse_f64(fields[2], line_no)?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Parse {
                line: line_no,
                message: "cross-section values must be finite and nonnegative".to_string(),
            });
        }
        let row = match wavelengths
            .iter()
            .position(|&w| w.to_bits() == wavelength.to_bits())
        {
            Some(r) => r,
            None => {
                wavelengths.push(wavelength);
                wavelengths.len() - 1
            }
        };
        max_layer = max_layer.max(layer);
        cells.push((row, layer, value));
    }
    if cells.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "cross-section table has no rows".to_string(),
        });
    }
    let m = wavelengths.len();
    let n = max_layer + 1;
    if cells.len() != m * n {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "incomplete table: {} cells for {m} wavelengths x {n} layers",
                cells.len()
            ),
        });
    }
    let mut table = DMatrix::from_element(m, n, f64::NAN);
    for (row, layer, value) in cells {
        if !table[(row, layer)].is_nan() {
            return Err(Error::Parse {
                line: 1,
                message: format!("duplicate cell for wavelength row {row}, layer {layer}"),
            });
        }
        table[(row, layer)] = value;
    }
    Ok((wavelengths, table))
}

/// Writes a cross-section table as `wavelength,layer,value` CSV.
pub fn write_cross_sections(wavelengths: &DVector<f64>, table: &DMatrix<f64>) -> String {
    let mut out = String::from("wavelength,layer,value\n");
    for j in 0..table.nrows() {
        for layer in 0..table.ncols() {
            let _ = writeln!(out, "{},{layer},{}", wavelengths[j], table[(j, layer)]);
        }
    }
    out
}

/// Reads a chain CSV: a header row of column labels followed by numeric
/// rows, one sample per row.
pub fn read_chain_csv(text: &str) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut lines = text.lines().enumerate();
    let (header_idx, header) = loop {
        match lines.next() {
            Some((_, raw)) if raw.trim().is_empty() => continue,
            Some(pair) => break pair,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty chain file".to_string(),
                })
            }
        }
    };
    let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if labels.is_empty() || labels.iter().any(|l| l.is_empty()) {
        return Err(Error::Parse {
            line: header_idx + 1,
            message: "chain header must contain nonempty labels".to_string(),
        });
    }
    let dim = labels.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {dim} fields, got {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(dim);
        for f in fields {
            let v = parse_f64(f, line_no)?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "non-finite chain value".to_string(),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: header_idx + 1,
            message: "chain file has a header but no samples".to_string(),
        });
    }
    Ok((
        labels,
        DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]),
    ))
}

/// Writes a sample matrix (rows = samples) as CSV with the given labels.
pub fn write_chain_csv(labels: &[String], samples: &DMatrix<f64>) -> Result<String> {
    if labels.len() != samples.ncols() {
        return Err(Error::DimensionMismatch {
            axis: "chain labels",
            expected: samples.ncols(),
            actual: labels.len(),
        });
    }
    let mut out = String::new();
    out.push_str(&labels.join(","));
    out.push('\n');
    for i in 0..samples.nrows() {
        for j in 0..samples.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", samples[(i, j)]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Reads a two-column `wavelength,intensity` spectrum CSV with header.
pub fn read_spectrum_csv(text: &str) -> Result<(DVector<f64>, DVector<f64>)> {
    let (labels, data) = read_chain_csv(text)?;
    if labels.len() != 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected 2 spectrum columns, got {}", labels.len()),
        });
    }
    Ok((
        DVector::from_fn(data.nrows(), |i, _| data[(i, 0)]),
        DVector::from_fn(data.nrows(), |i, _| data[(i, 1)]),
    ))
}

pub fn write_spectrum_csv(wavelengths: &DVector<f64>, intensities: &DVector<f64>) -> String {
    let mut out = String::from("wavelength,intensity\n");
    for j in 0..wavelengths.len() {
        let _ = writeln!(out, "{},{}", wavelengths[j], intensities[j]);
    }
    out
}

/// Writes a basis table: layer index, layer midpoint altitude, then one
/// column per basis vector.
pub fn write_basis(altitudes: &[f64], basis: &DMatrix<f64>, prefix: &str) -> String {
    let mut out = String::from("layer,altitude_km");
    for c in 0..basis.ncols() {
        let _ = write!(out, ",{prefix}{}", c + 1);
    }
    out.push('\n');
    for l in 0..basis.nrows() {
        let _ = write!(out, "{l},{}", altitudes[l]);
        for c in 0..basis.ncols() {
            let _ = write!(out, ",{}", basis[(l, c)]);
        }
        out.push('\n');
    }
    out
}

/// Writes a singular-value spectrum as `index,value` CSV.
pub fn write_singular_values(values: &DVector<f64>) -> String {
    let mut out = String::from("index,singular_value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{v}", i + 1);
    }
    out
}

/// Writes prior mean and covariance as columnar text: a mean row per layer,
/// then the covariance matrix row by row.
pub fn write_prior(mean: &DVector<f64>, covariance: &DMatrix<f64>) -> String {
    let mut out = String::from("# prior mean (one layer per line)\n");
    for v in mean.iter() {
        let _ = writeln!(out, "{v}");
    }
    out.push_str("# prior covariance (one row per line)\n");
    for i in 0..covariance.nrows() {
        for j in 0..covariance.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", covariance[(i, j)]);
        }
        out.push('\n');
    }
    out
}

/// Key-value manifest lines `key = value`, keys in the order given.
pub fn write_key_values(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Parses a key-value manifest, ignoring blank lines and `#` comments.
pub fn read_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => pairs.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected 'key = value'".to_string(),
                })
            }
        }
    }
    Ok(pairs)
}
