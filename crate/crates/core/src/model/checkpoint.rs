//! Plain-text checkpoints.
//!
//! ```text
//! format_version = 1
//! dims.gat1_heads = 3
//! ...
//! meta.step = 120
//! end_header
//! tensor gat1.head0.w_left 15 64
//! <one line of space-separated values per row>
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::mat::Mat;
use super::params::{ModelDims, ModelParams};
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Free-form key/value metadata (training step, validation score, ...).
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            meta: BTreeMap::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let d = &self.params.dims;
        let mut out = String::new();
        let _ = writeln!(out, "format_version = {FORMAT_VERSION}");
        for (k, v) in dims_fields(d) {
            let _ = writeln!(out, "dims.{k} = {v}");
        }
        let _ = writeln!(out, "dims.leaky_slope = {:?}", d.leaky_slope);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta.{k} = {v}");
        }
        out.push_str("end_header\n");
        for (name, t) in self.params.named() {
            let _ = writeln!(out, "tensor {name} {} {}", t.rows(), t.cols());
            for r in 0..t.rows() {
                let line: Vec<String> = t.row(r).iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut header: HashMap<String, String> = HashMap::new();
        let mut meta = BTreeMap::new();
        let mut saw_end = false;
        for (_, line) in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == "end_header" {
                saw_end = true;
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed header line '{line}'")))?;
            let (k, v) = (k.trim(), v.trim().to_string());
            if let Some(mk) = k.strip_prefix("meta.") {
                meta.insert(mk.to_string(), v);
            } else {
                header.insert(k.to_string(), v);
            }
        }
        if !saw_end {
            return Err(bad("missing end_header".into()));
        }
        let version: u32 = field(&header, "format_version")?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let dims = ModelDims {
            in_node: field(&header, "dims.in_node")?,
            gat1_heads: field(&header, "dims.gat1_heads")?,
            gat1_head_dim: field(&header, "dims.gat1_head_dim")?,
            gat2_heads: field(&header, "dims.gat2_heads")?,
            gat2_head_dim: field(&header, "dims.gat2_head_dim")?,
            ctx_in: field(&header, "dims.ctx_in")?,
            mha_heads: field(&header, "dims.mha_heads")?,
            mha_head_dim: field(&header, "dims.mha_head_dim")?,
            w2_out: field(&header, "dims.w2_out")?,
            clf_hidden: field(&header, "dims.clf_hidden")?,
            leaky_slope: field(&header, "dims.leaky_slope")?,
        };
        let defaults = ModelDims::default();
        if dims.in_node != defaults.in_node || dims.ctx_in != defaults.ctx_in {
            return Err(bad(format!(
                "feature widths {}/{} do not match {}/{}",
                dims.in_node, dims.ctx_in, defaults.in_node, defaults.ctx_in
            )));
        }

        let mut params = ModelParams::zeros(dims);
        let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
        let index: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut loaded = vec![false; names.len()];
        let mut tensors = params.tensors_mut();

        while let Some((lineno, line)) = lines.next() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [tag, name, rows, cols] = parts[..] else {
                return Err(bad(format!("line {}: expected tensor header", lineno + 1)));
            };
            if tag != "tensor" {
                return Err(bad(format!("line {}: expected tensor header", lineno + 1)));
            }
            let &i = index
                .get(name)
                .ok_or_else(|| bad(format!("unknown tensor '{name}'")))?;
            if loaded[i] {
                return Err(bad(format!("duplicate tensor '{name}'")));
            }
            let rows: usize = parse_num(rows, lineno)?;
            let cols: usize = parse_num(cols, lineno)?;
            let target: &mut Mat = tensors[i];
            if (rows, cols) != target.shape() {
                return Err(bad(format!(
                    "tensor '{name}' is {rows}x{cols}, expected {}x{}",
                    target.rows(),
                    target.cols()
                )));
            }
            for r in 0..rows {
                let (ln, row_line) = lines
                    .next()
                    .ok_or_else(|| bad(format!("tensor '{name}' truncated")))?;
                let values = row_line
                    .split_whitespace()
                    .map(|v| parse_num::<f64>(v, ln))
                    .collect::<Result<Vec<_>>>()?;
                if values.len() != cols {
                    return Err(bad(format!(
                        "line {}: {} values, expected {cols}",
                        ln + 1,
                        values.len()
                    )));
                }
                target.row_mut(r).copy_from_slice(&values);
            }
            loaded[i] = true;
        }
        drop(tensors);
        if let Some(i) = loaded.iter().position(|&l| !l) {
            return Err(bad(format!("missing tensor '{}'", names[i])));
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(Self { params, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        // Write then rename, so an interrupted save never leaves a torn file.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn dims_fields(d: &ModelDims) -> [(&'static str, usize); 10] {
    [
        ("in_node", d.in_node),
        ("gat1_heads", d.gat1_heads),
        ("gat1_head_dim", d.gat1_head_dim),
        ("gat2_heads", d.gat2_heads),
        ("gat2_head_dim", d.gat2_head_dim),
        ("ctx_in", d.ctx_in),
        ("mha_heads", d.mha_heads),
        ("mha_head_dim", d.mha_head_dim),
        ("w2_out", d.w2_out),
        ("clf_hidden", d.clf_hidden),
    ]
}

fn bad(msg: String) -> Error {
    Error::Checkpoint(msg)
}

fn field<T: std::str::FromStr>(header: &HashMap<String, String>, key: &str) -> Result<T> {
    let v = header
        .get(key)
        .ok_or_else(|| bad(format!("missing header field '{key}'")))?;
    v.parse()
        .map_err(|_| bad(format!("bad value '{v}' for '{key}'")))
}

fn parse_num<T: std::str::FromStr>(s: &str, lineno: usize) -> Result<T> {
    s.parse()
        .map_err(|_| bad(format!("line {}: bad number '{s}'", lineno + 1)))
}
