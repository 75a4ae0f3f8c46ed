//! Plain-text model files.
//!
//! ```text
//! ofdmim-mlp v1
//! layer_dims 8 64 64 4
//! use_bias true
//! range_hi 5e0
//! pt_max 5e3
//! pr_max 5e3
//! weights 0 64 8
//! <64 lines of 8 values>
//! biases 0 64
//! <one line of 64 values>
//! ...
//! end
//! ```
//!
//! Values use Rust's shortest round-trip exponent notation, so a reload is
//! bit-exact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::codec::Normalization;
use super::mlp::MlpParams;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "ofdmim-mlp";
pub const MODEL_VERSION: &str = "v1";

/// Trained network plus the scaling it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: MlpParams,
    pub normalization: Normalization,
}

impl Model {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let n = &self.normalization;
        let mut out = String::new();
        let dims: Vec<String> = p.layer_dims().iter().map(usize::to_string).collect();
        writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}").unwrap();
        writeln!(out, "layer_dims {}", dims.join(" ")).unwrap();
        writeln!(out, "use_bias {}", p.use_bias()).unwrap();
        writeln!(out, "range_hi {:e}", n.range_hi).unwrap();
        writeln!(out, "pt_max {:e}", n.pt_max).unwrap();
        writeln!(out, "pr_max {:e}", n.pr_max).unwrap();
        for layer in 0..p.num_layers() {
            let (rows, cols) = (p.layer_dims()[layer + 1], p.layer_dims()[layer]);
            writeln!(out, "weights {layer} {rows} {cols}").unwrap();
            for row in p.weights(layer).chunks(cols) {
                write_values(&mut out, row);
            }
            if p.use_bias() {
                writeln!(out, "biases {layer} {rows}").unwrap();
                write_values(&mut out, p.biases(layer));
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut lines = Lines::new(text, path);

        let header = lines.next_line()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MODEL_MAGIC) {
            return Err(lines.error(format!("not a model file (expected {MODEL_MAGIC:?} header)")));
        }
        let version = parts.next().unwrap_or("");
        if version != MODEL_VERSION {
            return Err(Error::SchemaVersion {
                path: path.to_path_buf(),
                found: version.to_string(),
                expected: MODEL_VERSION.to_string(),
            });
        }

        let dims: Vec<usize> = lines.keyed("layer_dims")?;
        let use_bias = match lines.keyed_raw("use_bias")?.as_str() {
            "true" => true,
            "false" => false,
            other => return Err(lines.error(format!("use_bias must be true or false, got {other:?}"))),
        };
        let normalization = Normalization {
            range_hi: lines.keyed_scalar("range_hi")?,
            pt_max: lines.keyed_scalar("pt_max")?,
            pr_max: lines.keyed_scalar("pr_max")?,
        };
        normalization.validate().map_err(|e| lines.error(e.to_string()))?;
        let mut params = MlpParams::zeros(&dims, use_bias).map_err(|e| lines.error(e.to_string()))?;

        for layer in 0..params.num_layers() {
            let (rows, cols) = (dims[layer + 1], dims[layer]);
            let head: Vec<usize> = lines.keyed("weights")?;
            if head != [layer, rows, cols] {
                return Err(lines.error(format!("expected weights {layer} {rows} {cols}, got {head:?}")));
            }
            for r in 0..rows {
                let row = lines.values(cols)?;
                params.weights_mut(layer)[r * cols..(r + 1) * cols].copy_from_slice(&row);
            }
            if use_bias {
                let head: Vec<usize> = lines.keyed("biases")?;
                if head != [layer, rows] {
                    return Err(lines.error(format!("expected biases {layer} {rows}, got {head:?}")));
                }
                let b = lines.values(rows)?;
                params.biases_mut(layer).copy_from_slice(&b);
            }
        }
        if lines.next_line()?.trim() != "end" {
            return Err(lines.error("expected end marker"));
        }
        Ok(Self { params, normalization })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

fn write_values(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:e}").unwrap();
    }
    out.push('\n');
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    line: usize,
    path: PathBuf,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &Path) -> Self {
        Self { iter: text.lines(), line: 0, path: path.to_path_buf() }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Schema { path: self.path.clone(), line: self.line, message: message.into() }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        self.line += 1;
        self.iter.next().ok_or_else(|| self.error("unexpected end of file"))
    }

    fn keyed_raw(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.trim().to_string()),
            _ => Err(self.error(format!("expected {key:?} line"))),
        }
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let raw = self.keyed_raw(key)?;
        raw.split_whitespace()
            .map(|s| s.parse::<T>().map_err(|_| self.error(format!("bad {key} entry {s:?}"))))
            .collect()
    }

    fn keyed_scalar(&mut self, key: &str) -> Result<f64> {
        let v: Vec<f64> = self.keyed(key)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(self.error(format!("{key} takes one value"))),
        }
    }

    fn values(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| self.error(format!("bad number {s:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != expected {
            return Err(self.error(format!("expected {expected} values, found {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.error("parameters must be finite"));
        }
        Ok(v)
    }
}
