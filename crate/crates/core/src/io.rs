//! Readers and writers for the raw domain formats.
//!
//! * graph edges: TSV, `u<TAB>v` per line
//! * node features: CSV, one row of floats per node, no header
//! * node labels: one integer per line
//! * hypergraph: one hyperedge per line, space-separated vertex ids
//! * grid images: binary (`u32` LE header `[count, height, width, channels]`
//!   followed by `f32` LE values, image-major, pixel row-major, channel
//!   fastest) or CSV (one image per row, optional leading label column)
//! * point clouds: CSV `x,y,z`
//!
//! Blank lines and lines starting with `#` are skipped in line formats.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::ParseError;
use crate::lift::{GraphInput, GridInput, HypergraphInput};

fn line_err(source: &str, line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Line {
        source_name: source.to_string(),
        line,
        message: message.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_edge_list(text: &str, source: &str) -> Result<Vec<(usize, usize)>, ParseError> {
    content_lines(text)
        .map(|(n, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(line_err(source, n, format!("expected `u<TAB>v`, got {line:?}")));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| line_err(source, n, format!("invalid node id {s:?}")))
            };
            Ok((parse(fields[0])?, parse(fields[1])?))
        })
        .collect()
}

pub fn parse_labels(text: &str, source: &str) -> Result<Vec<usize>, ParseError> {
    content_lines(text)
        .map(|(n, line)| {
            line.parse::<usize>()
                .map_err(|_| line_err(source, n, format!("invalid label {line:?}")))
        })
        .collect()
}

pub fn parse_hypergraph(text: &str, source: &str) -> Result<Vec<Vec<usize>>, ParseError> {
    content_lines(text)
        .map(|(n, line)| {
            line.split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| line_err(source, n, format!("invalid vertex id {t:?}")))
                })
                .collect()
        })
        .collect()
}

/// Rows of floats with a fixed column count.
pub fn parse_float_csv(text: &str, source: &str) -> Result<Array2<f64>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            line_err(source, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(line_err(
                    source,
                    line,
                    format!("expected {c} columns, got {}", record.len()),
                ))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| line_err(source, line, format!("invalid number {field:?}")))?;
            if !v.is_finite() {
                return Err(line_err(source, line, "non-finite value"));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(Array2::from_shape_vec((rows, cols), values).expect("row lengths checked"))
}

/// Point coordinates; exactly three columns.
pub fn parse_xyz(text: &str, source: &str) -> Result<Array2<f64>, ParseError> {
    let pts = parse_float_csv(text, source)?;
    if pts.nrows() > 0 && pts.ncols() != 3 {
        return Err(ParseError::Format {
            source_name: source.to_string(),
            message: format!("expected x,y,z columns, got {}", pts.ncols()),
        });
    }
    Ok(pts)
}

/// Grid images from CSV, one flattened `height × width` image per row. With
/// `label_first`, the first column holds an integer label.
pub fn parse_grid_csv(
    text: &str,
    source: &str,
    height: usize,
    width: usize,
    label_first: bool,
) -> Result<(Vec<GridInput>, Option<Vec<usize>>), ParseError> {
    let table = parse_float_csv(text, source)?;
    let expect = height * width + usize::from(label_first);
    if table.nrows() > 0 && table.ncols() != expect {
        return Err(ParseError::Format {
            source_name: source.to_string(),
            message: format!("expected {expect} columns per image, got {}", table.ncols()),
        });
    }
    let mut labels = label_first.then(Vec::new);
    let mut images = Vec::with_capacity(table.nrows());
    for row in table.rows() {
        let mut vals = row.to_vec();
        if let Some(l) = labels.as_mut() {
            l.push(vals.remove(0) as usize);
        }
        let pixels = Array2::from_shape_vec((height * width, 1), vals).expect("column count checked");
        images.push(GridInput { height, width, pixels });
    }
    Ok((images, labels))
}

pub fn read_grid_binary(bytes: &[u8], source: &str) -> Result<Vec<GridInput>, ParseError> {
    let fmt_err = |message: String| ParseError::Format {
        source_name: source.to_string(),
        message,
    };
    if bytes.len() < 16 {
        return Err(fmt_err("truncated header".into()));
    }
    let header: Vec<usize> = bytes[..16]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
        .collect();
    let (count, h, w, ch) = (header[0], header[1], header[2], header[3]);
    if h == 0 || w == 0 || ch == 0 {
        return Err(fmt_err(format!("invalid dimensions {h}x{w}x{ch}")));
    }
    let per_image = h * w * ch;
    let body = &bytes[16..];
    if body.len() != count * per_image * 4 {
        return Err(fmt_err(format!(
            "body has {} bytes, header implies {}",
            body.len(),
            count * per_image * 4
        )));
    }
    let floats: Vec<f64> = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(floats
        .chunks_exact(per_image)
        .map(|img| GridInput {
            height: h,
            width: w,
            pixels: Array2::from_shape_vec((h * w, ch), img.to_vec()).expect("sized chunk"),
        })
        .collect())
}

/// Inverse of [`read_grid_binary`]; all images must share dimensions.
pub fn write_grid_binary(images: &[GridInput]) -> Vec<u8> {
    let (h, w, ch) = images
        .first()
        .map_or((0, 0, 0), |g| (g.height, g.width, g.pixels.ncols()));
    let mut out = Vec::with_capacity(16 + images.len() * h * w * ch * 4);
    for v in [images.len(), h, w, ch] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for img in images {
        for v in img.pixels.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

fn read_text(path: &Path) -> Result<String, ParseError> {
    fs::read_to_string(path).map_err(|e| ParseError::Format {
        source_name: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Loads an edge list with optional feature and label files. The node count
/// is the largest of: max edge endpoint + 1, feature rows, label count.
pub fn load_graph(edges: &Path, features: Option<&Path>, labels: Option<&Path>) -> Result<GraphInput, ParseError> {
    let name = edges.display().to_string();
    let edge_list = parse_edge_list(&read_text(edges)?, &name)?;
    let feats = features
        .map(|p| parse_float_csv(&read_text(p)?, &p.display().to_string()))
        .transpose()?;
    let labs = labels
        .map(|p| parse_labels(&read_text(p)?, &p.display().to_string()))
        .transpose()?;
    let n = edge_list
        .iter()
        .map(|&(u, v)| u.max(v) + 1)
        .chain(feats.as_ref().map(|f| f.nrows()))
        .chain(labs.as_ref().map(Vec::len))
        .max()
        .unwrap_or(0);
    let mut g = GraphInput::new(n, edge_list).map_err(|e| ParseError::Format {
        source_name: name.clone(),
        message: e.to_string(),
    })?;
    g.node_features = feats;
    g.node_labels = labs;
    Ok(g)
}

pub fn load_hypergraph(path: &Path, num_nodes: Option<usize>) -> Result<HypergraphInput, ParseError> {
    let name = path.display().to_string();
    let edges = parse_hypergraph(&read_text(path)?, &name)?;
    let n = num_nodes.unwrap_or_else(|| edges.iter().flatten().map(|v| v + 1).max().unwrap_or(0));
    HypergraphInput::new(n, edges).map_err(|e| ParseError::Format {
        source_name: name,
        message: e.to_string(),
    })
}

pub fn load_xyz(path: &Path) -> Result<Array2<f64>, ParseError> {
    parse_xyz(&read_text(path)?, &path.display().to_string())
}

pub fn load_grid_binary(path: &Path) -> Result<Vec<GridInput>, ParseError> {
    read_grid_binary(&fs::read(path)?, &path.display().to_string())
}

pub fn load_grid_csv(
    path: &Path,
    height: usize,
    width: usize,
    label_first: bool,
) -> Result<(Vec<GridInput>, Option<Vec<usize>>), ParseError> {
    parse_grid_csv(
        &read_text(path)?,
        &path.display().to_string(),
        height,
        width,
        label_first,
    )
}
