//! Plain-text checkpoints and embedding tables.
//!
//! Checkpoint layout:
//!
//! ```text
//! GEOHG-CHECKPOINT 1
//! config {json}
//! transform {json}|none
//! dims <input_dim> <n_env> <n_soc>
//! param <group> <index> <rows> <cols>
//! v <row-major values, space separated>
//! adam <group> <index> <step> <lr>
//! v <first moment>
//! v <second moment>
//! ```
//!
//! Floats are written in shortest round-trip form so a reload is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::{HgnnConfig, LabelTransform, ModelState};
use crate::error::{Error, Result};
use crate::geodata::{self, GridSpec, RegionId};
use crate::tensor::{Matrix, Parameters};

const MAGIC: &str = "GEOHG-CHECKPOINT 1";

fn push_values(out: &mut String, m: &Matrix) {
    let vals = m.data().iter().map(|&v| geodata::fmt_f64(v));
    out.push('v');
    for v in vals {
        out.push(' ');
        out.push_str(&v);
    }
    out.push('\n');
}

pub fn checkpoint_to_string(state: &ModelState, provenance: &[String]) -> Result<String> {
    let mut out = geodata::comment_block(provenance);
    out.push_str(MAGIC);
    out.push('\n');
    let cfg = serde_json::to_string(&state.config).map_err(|e| Error::Config(e.to_string()))?;
    let _ = writeln!(out, "config {cfg}");
    match &state.transform {
        Some(t) => {
            let t = serde_json::to_string(t).map_err(|e| Error::Config(e.to_string()))?;
            let _ = writeln!(out, "transform {t}");
        }
        None => out.push_str("transform none\n"),
    }
    let _ = writeln!(
        out,
        "dims {} {} {}",
        state.backbone.input_w.rows(),
        state.backbone.env_embed.rows(),
        state.backbone.soc_embed.rows()
    );
    let groups: [(&str, Vec<&Matrix>, &crate::tensor::Adam); 2] = [
        ("backbone", state.backbone.params(), &state.backbone_adam),
        ("head", state.head.params(), &state.head_adam),
    ];
    for (name, params, adam) in &groups {
        for (i, p) in params.iter().enumerate() {
            let _ = writeln!(out, "param {name} {i} {} {}", p.rows(), p.cols());
            push_values(&mut out, p);
        }
        for (i, s) in adam.states.iter().enumerate() {
            let _ = writeln!(out, "adam {name} {i} {} {}", s.step, geodata::fmt_f64(s.lr));
            push_values(&mut out, &s.m);
            push_values(&mut out, &s.v);
        }
    }
    Ok(out)
}

pub fn save_checkpoint(path: impl AsRef<Path>, state: &ModelState, provenance: &[String]) -> Result<()> {
    geodata::write(path.as_ref(), &checkpoint_to_string(state, provenance)?)
}

struct Reader<'a> {
    name: String,
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let l = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::parse(&self.name, self.lines.len(), format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(l)
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(&self.name, line, msg)
    }

    fn header(&mut self, keyword: &str, n_fields: usize) -> Result<(usize, Vec<&'a str>)> {
        let (ln, line) = self.next(keyword)?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.first() != Some(&keyword) || parts.len() != n_fields + 1 {
            return Err(self.err(ln, format!("expected `{keyword}` with {n_fields} fields, got {line:?}")));
        }
        Ok((ln, parts[1..].to_vec()))
    }

    fn values(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let (ln, line) = self.next("values")?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("v") {
            return Err(self.err(ln, "expected a `v` value line"));
        }
        let data: Vec<f64> = tokens
            .map(|t| t.parse::<f64>().map_err(|e| self.err(ln, format!("bad value {t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if data.len() != rows * cols {
            return Err(self.err(ln, format!("expected {} values, got {}", rows * cols, data.len())));
        }
        Matrix::from_vec(rows, cols, data)
    }

    fn usize_field(&self, ln: usize, s: &str) -> Result<usize> {
        s.parse().map_err(|e| self.err(ln, format!("bad integer {s:?}: {e}")))
    }
}

fn read_group<P: Parameters>(r: &mut Reader<'_>, name: &str, target: &mut P, adam: &mut crate::tensor::Adam) -> Result<()> {
    for (i, p) in target.params_mut().into_iter().enumerate() {
        let (ln, f) = r.header("param", 4)?;
        if f[0] != name || r.usize_field(ln, f[1])? != i {
            return Err(r.err(ln, format!("expected param {name} {i}")));
        }
        let (rows, cols) = (r.usize_field(ln, f[2])?, r.usize_field(ln, f[3])?);
        if (rows, cols) != p.shape() {
            return Err(r.err(ln, format!("shape {rows}x{cols} does not match expected {:?}", p.shape())));
        }
        *p = r.values(rows, cols)?;
    }
    for (i, s) in adam.states.iter_mut().enumerate() {
        let (ln, f) = r.header("adam", 4)?;
        if f[0] != name || r.usize_field(ln, f[1])? != i {
            return Err(r.err(ln, format!("expected adam {name} {i}")));
        }
        s.step = f[2].parse().map_err(|e| r.err(ln, format!("bad step: {e}")))?;
        s.lr = f[3].parse().map_err(|e| r.err(ln, format!("bad lr: {e}")))?;
        let (rows, cols) = s.m.shape();
        s.m = r.values(rows, cols)?;
        s.v = r.values(rows, cols)?;
    }
    Ok(())
}

pub fn parse_checkpoint(text: &str, name: &str) -> Result<ModelState> {
    let mut r = Reader {
        name: name.to_string(),
        lines: geodata::content_lines(text).collect(),
        pos: 0,
    };
    let (ln, magic) = r.next("header")?;
    if magic.trim() != MAGIC {
        return Err(r.err(ln, format!("not a checkpoint (header {magic:?})")));
    }
    let (ln, line) = r.next("config")?;
    let cfg_json = line
        .strip_prefix("config ")
        .ok_or_else(|| r.err(ln, "expected `config`"))?;
    let config: HgnnConfig = serde_json::from_str(cfg_json).map_err(|e| r.err(ln, e.to_string()))?;
    config.validate()?;
    let (ln, line) = r.next("transform")?;
    let t = line
        .strip_prefix("transform ")
        .ok_or_else(|| r.err(ln, "expected `transform`"))?;
    let transform: Option<LabelTransform> = if t.trim() == "none" {
        None
    } else {
        Some(serde_json::from_str(t).map_err(|e| r.err(ln, e.to_string()))?)
    };
    let (ln, f) = r.header("dims", 3)?;
    let (input_dim, n_env, n_soc) = (r.usize_field(ln, f[0])?, r.usize_field(ln, f[1])?, r.usize_field(ln, f[2])?);

    // the template only supplies shapes, every value is overwritten
    let mut state = ModelState::init(&config, input_dim, n_env, n_soc)?;
    state.transform = transform;
    read_group(&mut r, "backbone", &mut state.backbone, &mut state.backbone_adam)?;
    read_group(&mut r, "head", &mut state.head, &mut state.head_adam)?;
    Ok(state)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelState> {
    let path = path.as_ref();
    parse_checkpoint(&geodata::read(path)?, &path.display().to_string())
}

/// Write `embeddings` (row i = region i) as `x_r,y_r,e_0,...`.
pub fn save_embeddings(path: impl AsRef<Path>, grid: &GridSpec, embeddings: &Matrix, provenance: &[String]) -> Result<()> {
    if embeddings.rows() != grid.n_regions() {
        return Err(Error::Shape(format!(
            "{} embedding rows for {} regions",
            embeddings.rows(),
            grid.n_regions()
        )));
    }
    let mut out = geodata::comment_block(provenance);
    out.push_str("x_r,y_r");
    for j in 0..embeddings.cols() {
        let _ = write!(out, ",e_{j}");
    }
    out.push('\n');
    for (i, r) in grid.regions().enumerate() {
        let _ = write!(out, "{},{}", r.x, r.y);
        for &v in embeddings.row(i) {
            let _ = write!(out, ",{}", geodata::fmt_f64(v));
        }
        out.push('\n');
    }
    geodata::write(path.as_ref(), &out)
}

pub fn load_embeddings(path: impl AsRef<Path>, grid: &GridSpec) -> Result<Matrix> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = geodata::read(path)?;
    let mut lines = geodata::content_lines(&text);
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(&name, 1, "empty embeddings file"))?;
    let cols = header.split(',').count().saturating_sub(2);
    if !header.starts_with("x_r,y_r") || cols == 0 {
        return Err(Error::parse(&name, hl, "expected header x_r,y_r,e_0,..."));
    }
    let mut m = Matrix::zeros(grid.n_regions(), cols);
    let mut seen = vec![false; grid.n_regions()];
    for (ln, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != cols + 2 {
            return Err(Error::parse(&name, ln, format!("expected {} fields, got {}", cols + 2, f.len())));
        }
        let coord = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(&name, ln, format!("bad coordinate {s:?}: {e}")));
        let r = RegionId::new(coord(f[0])?, coord(f[1])?);
        grid.check(r)?;
        let i = grid.index(r);
        if seen[i] {
            return Err(Error::DuplicateRegion { x: r.x, y: r.y });
        }
        seen[i] = true;
        for (j, s) in f[2..].iter().enumerate() {
            let v: f64 = s.parse().map_err(|e| Error::parse(&name, ln, format!("bad value {s:?}: {e}")))?;
            m.set(i, j, v);
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        let r = grid.region(i);
        return Err(Error::parse(&name, 0, format!("missing embedding for region ({}, {})", r.x, r.y)));
    }
    Ok(m)
}
