//! Problem files: JSON documents or Matrix Market bundles.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    Pencil,
    Descriptor,
    Dh,
    Ph,
    Geometry,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Kind::Pencil, Kind::Descriptor, Kind::Dh, Kind::Ph, Kind::Geometry];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Pencil => "pencil",
            Kind::Descriptor => "descriptor",
            Kind::Dh => "dh",
            Kind::Ph => "ph",
            Kind::Geometry => "geometry",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn required(self) -> &'static [&'static str] {
        match self {
            Kind::Pencil => &["E", "A"],
            Kind::Descriptor => &["E", "A", "B"],
            Kind::Dh => &["E", "J", "R", "Q"],
            Kind::Ph => &["E", "J", "R", "Q", "B", "P", "S", "N"],
            Kind::Geometry => &["L1", "L2", "D1", "D2"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    MatrixMarket,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{location}: {message}")]
pub struct ParseError {
    /// File, field or `file:line` the problem was found at.
    pub location: String,
    pub message: String,
}

fn perr(location: impl Into<String>, message: impl Into<String>) -> ParseError {
    ParseError { location: location.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub atol: Option<f64>,
    pub rtol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub kind: Kind,
    pub matrices: BTreeMap<String, DMatrix<f64>>,
    pub tolerances: Option<Tolerances>,
    pub metadata: BTreeMap<String, String>,
    /// Initial state for `simulate`.
    pub x0: Option<Vec<f64>>,
}

impl ProblemFile {
    pub fn matrix(&self, name: &str) -> &DMatrix<f64> {
        &self.matrices[name]
    }

    fn validate(self, location: &str) -> Result<Self, ParseError> {
        for name in self.kind.required() {
            if !self.matrices.contains_key(*name) {
                return Err(perr(location, format!("{name} missing")));
            }
        }
        let shape = |n: &str| self.matrices[n].shape();
        let square = |n: &str, size: usize| -> Result<(), ParseError> {
            if shape(n) != (size, size) {
                let (r, c) = shape(n);
                return Err(perr(format!("{location}: {n}"), format!("expected {size}x{size}, got {r}x{c}")));
            }
            Ok(())
        };
        let rows = |n: &str, size: usize| -> Result<usize, ParseError> {
            if shape(n).0 != size {
                return Err(perr(format!("{location}: {n}"), format!("expected {size} rows, got {}", shape(n).0)));
            }
            Ok(shape(n).1)
        };
        match self.kind {
            Kind::Pencil => {
                let n = shape("E").0;
                square("E", n)?;
                square("A", n)?;
            }
            Kind::Descriptor => {
                let n = shape("E").0;
                square("E", n)?;
                square("A", n)?;
                rows("B", n)?;
            }
            Kind::Dh | Kind::Ph => {
                let n = shape("E").0;
                for m in ["E", "J", "R", "Q"] {
                    square(m, n)?;
                }
                if self.kind == Kind::Ph {
                    let k = rows("B", n)?;
                    if shape("P") != (n, k) {
                        return Err(perr(format!("{location}: P"), format!("expected {n}x{k}")));
                    }
                    square("S", k)?;
                    square("N", k)?;
                }
            }
            Kind::Geometry => {
                let n = shape("L1").1;
                for m in ["L1", "L2", "D1", "D2"] {
                    if shape(m).1 != n {
                        return Err(perr(format!("{location}: {m}"), format!("expected {n} columns")));
                    }
                }
                square("L1", n)?;
                square("L2", n)?;
                square("D1", n)?;
                square("D2", n)?;
            }
        }
        if let Some(x0) = &self.x0 {
            let n = match self.kind {
                Kind::Geometry => shape("L1").0,
                _ => shape("E").0,
            };
            if x0.len() != n {
                return Err(perr(format!("{location}: x0"), format!("expected length {n}, got {}", x0.len())));
            }
        }
        Ok(self)
    }
}

fn json_number(v: &Value, field: &str) -> Result<f64, ParseError> {
    v.as_f64().ok_or_else(|| perr(field, "expected a number"))
}

fn json_matrix(v: &Value, field: &str) -> Result<DMatrix<f64>, ParseError> {
    let rows = v.as_array().ok_or_else(|| perr(field, "expected an array of rows"))?;
    let mut data = Vec::new();
    let mut ncols = None;
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| perr(format!("{field}[{i}]"), "expected an array"))?;
        if *ncols.get_or_insert(row.len()) != row.len() {
            return Err(perr(format!("{field}[{i}]"), "rows have different lengths"));
        }
        for (j, x) in row.iter().enumerate() {
            data.push(json_number(x, &format!("{field}[{i}][{j}]"))?);
        }
    }
    Ok(DMatrix::from_row_slice(rows.len(), ncols.unwrap_or(0), &data))
}

fn string_map(v: &Value, field: &str) -> Result<BTreeMap<String, String>, ParseError> {
    let obj = v.as_object().ok_or_else(|| perr(field, "expected an object"))?;
    obj.iter()
        .map(|(k, v)| match v {
            Value::String(s) => Ok((k.clone(), s.clone())),
            other => Ok((k.clone(), other.to_string())),
        })
        .collect()
}

fn tolerances(v: &Value, field: &str) -> Result<Tolerances, ParseError> {
    let obj = v.as_object().ok_or_else(|| perr(field, "expected an object"))?;
    let get = |k: &str| obj.get(k).map(|x| json_number(x, &format!("{field}.{k}"))).transpose();
    Ok(Tolerances { atol: get("atol")?, rtol: get("rtol")? })
}

fn kind_of(v: Option<&Value>, location: &str) -> Result<Kind, ParseError> {
    let s = v.and_then(Value::as_str).ok_or_else(|| perr(location, "kind missing"))?;
    Kind::parse(s).ok_or_else(|| perr(format!("{location}: kind"), format!("unknown kind {s:?}")))
}

/// Parses a JSON problem document.
pub fn parse_json_str(text: &str, location: &str) -> Result<ProblemFile, ParseError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| perr(format!("{location}:{}:{}", e.line(), e.column()), e.to_string()))?;
    let obj = doc.as_object().ok_or_else(|| perr(location, "expected a JSON object"))?;
    let kind = kind_of(obj.get("kind"), location)?;
    let mut matrices = BTreeMap::new();
    let mut tol = None;
    let mut metadata = BTreeMap::new();
    let mut x0 = None;
    for (key, v) in obj {
        let field = format!("{location}: {key}");
        match key.as_str() {
            "kind" => {}
            "tolerances" => tol = Some(tolerances(v, &field)?),
            "metadata" => metadata = string_map(v, &field)?,
            "x0" => {
                let xs = v.as_array().ok_or_else(|| perr(&field, "expected an array"))?;
                x0 = Some(xs.iter().enumerate().map(|(i, x)| json_number(x, &format!("{field}[{i}]"))).collect::<Result<_, _>>()?);
            }
            "matrices" => {
                let inner = v.as_object().ok_or_else(|| perr(&field, "expected an object"))?;
                for (name, m) in inner {
                    matrices.insert(name.clone(), json_matrix(m, &format!("{location}: {name}"))?);
                }
            }
            name if kind.required().contains(&name) => {
                matrices.insert(name.to_string(), json_matrix(v, &field)?);
            }
            _ => return Err(perr(field, "unexpected field")),
        }
    }
    ProblemFile { kind, matrices, tolerances: tol, metadata, x0 }.validate(location)
}

/// Reads a Matrix Market file in `array` or `coordinate` real format.
pub fn parse_mtx_str(text: &str, location: &str) -> Result<DMatrix<f64>, ParseError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| perr(location, "empty file"))?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() < 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(perr(format!("{location}:1"), "missing %%MatrixMarket matrix header"));
    }
    let coordinate = match words[2].as_str() {
        "array" => false,
        "coordinate" => true,
        f => return Err(perr(format!("{location}:1"), format!("unsupported format {f}"))),
    };
    if words[3] != "real" && words[3] != "integer" {
        return Err(perr(format!("{location}:1"), format!("unsupported field {}", words[3])));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        s => return Err(perr(format!("{location}:1"), format!("unsupported symmetry {s}"))),
    };
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (ln, size) = body.next().ok_or_else(|| perr(location, "missing size line"))?;
    let at = |ln: usize| format!("{location}:{}", ln + 1);
    let nums = |ln: usize, l: &str| -> Result<Vec<f64>, ParseError> {
        l.split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|_| perr(at(ln), format!("cannot parse {w:?}"))))
            .collect()
    };
    let dims = nums(ln, size)?;
    let dim = |i: usize| -> Result<usize, ParseError> {
        let d = dims.get(i).copied().ok_or_else(|| perr(at(ln), "incomplete size line"))?;
        if d < 0.0 || d.fract() != 0.0 {
            return Err(perr(at(ln), "sizes must be nonnegative integers"));
        }
        Ok(d as usize)
    };
    let (r, c) = (dim(0)?, dim(1)?);
    let mut m = DMatrix::zeros(r, c);
    if coordinate {
        let nnz = dim(2)?;
        let mut seen = 0;
        for (ln, l) in body {
            let v = nums(ln, l)?;
            if v.len() != 3 || v[0] < 1.0 || v[1] < 1.0 || v[0] as usize > r || v[1] as usize > c {
                return Err(perr(at(ln), "expected `row col value` within bounds"));
            }
            let (i, j) = (v[0] as usize - 1, v[1] as usize - 1);
            m[(i, j)] = v[2];
            if symmetric {
                m[(j, i)] = v[2];
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(perr(location, format!("expected {nnz} entries, found {seen}")));
        }
    } else {
        let mut values = Vec::new();
        for (ln, l) in body {
            values.extend(nums(ln, l)?);
        }
        // column-major; symmetric storage lists the lower triangle only
        let positions: Vec<(usize, usize)> = if symmetric {
            (0..c).flat_map(|j| (j..r).map(move |i| (i, j))).collect()
        } else {
            (0..c).flat_map(|j| (0..r).map(move |i| (i, j))).collect()
        };
        if values.len() != positions.len() {
            return Err(perr(location, format!("expected {} values, found {}", positions.len(), values.len())));
        }
        for ((i, j), v) in positions.into_iter().zip(values) {
            m[(i, j)] = v;
            if symmetric {
                m[(j, i)] = v;
            }
        }
    }
    Ok(m)
}

/// Directory with `manifest.json` (kind, tolerances, metadata, x0) and `NAME.mtx` files.
pub fn parse_bundle(dir: &Path) -> Result<ProblemFile, ParseError> {
    let loc = dir.display().to_string();
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| perr(manifest_path.display().to_string(), e.to_string()))?;
    let mut doc: Map<String, Value> = match serde_json::from_str(&text) {
        Ok(Value::Object(o)) => o,
        Ok(_) => return Err(perr(manifest_path.display().to_string(), "expected a JSON object")),
        Err(e) => return Err(perr(format!("{}:{}:{}", manifest_path.display(), e.line(), e.column()), e.to_string())),
    };
    let kind = kind_of(doc.get("kind"), &loc)?;
    let mut matrices = Map::new();
    for name in kind.required() {
        let p = dir.join(format!("{name}.mtx"));
        if !p.exists() {
            return Err(perr(&loc, format!("{name} missing")));
        }
        let text = fs::read_to_string(&p).map_err(|e| perr(p.display().to_string(), e.to_string()))?;
        let m = parse_mtx_str(&text, &p.display().to_string())?;
        matrices.insert(name.to_string(), matrix_to_json(&m));
    }
    doc.insert("matrices".into(), Value::Object(matrices));
    parse_json_str(&Value::Object(doc).to_string(), &loc)
}

pub fn detect_format(path: &Path) -> Format {
    if path.is_dir() {
        Format::MatrixMarket
    } else {
        Format::Json
    }
}

pub fn parse_problem(path: &Path, format: Format) -> Result<ProblemFile, ParseError> {
    match format {
        Format::MatrixMarket => parse_bundle(path),
        Format::Json => {
            let text = fs::read_to_string(path).map_err(|e| perr(path.display().to_string(), e.to_string()))?;
            parse_json_str(&text, &path.display().to_string())
        }
    }
}

/// Integral values become JSON integers, non-finite values become `null`.
pub fn number_to_json(x: f64) -> Value {
    if !x.is_finite() {
        Value::Null
    } else if x.fract() == 0.0 && x.abs() < 9.0e15 {
        Value::from(x as i64)
    } else {
        Value::from(x)
    }
}

pub fn matrix_to_json(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| number_to_json(m[(i, j)])).collect())).collect())
}

/// Canonical JSON form of a problem; keys sorted.
pub fn emit_problem(p: &ProblemFile) -> String {
    let mut obj = Map::new();
    obj.insert("kind".into(), Value::from(p.kind.as_str()));
    for (name, m) in &p.matrices {
        obj.insert(name.clone(), matrix_to_json(m));
    }
    if let Some(t) = &p.tolerances {
        let mut tj = Map::new();
        if let Some(a) = t.atol {
            tj.insert("atol".into(), number_to_json(a));
        }
        if let Some(r) = t.rtol {
            tj.insert("rtol".into(), number_to_json(r));
        }
        obj.insert("tolerances".into(), Value::Object(tj));
    }
    if !p.metadata.is_empty() {
        obj.insert(
            "metadata".into(),
            Value::Object(p.metadata.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect()),
        );
    }
    if let Some(x0) = &p.x0 {
        obj.insert("x0".into(), Value::Array(x0.iter().map(|&x| number_to_json(x)).collect()));
    }
    serde_json::to_string_pretty(&Value::Object(obj)).expect("serializable") + "\n"
}
