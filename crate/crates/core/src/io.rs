//! File formats: daily temperature and cooling-demand CSV, GeoJSON layers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde_json::{json, Map, Value};

use crate::climate::DegreeDayProfile;
use crate::error::PipelineError;
use crate::geometry::{MultiPolygon, Point, Polygon};

fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, PipelineError> {
    let file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize, PipelineError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| PipelineError::schema(path, format!("missing column '{name}'")))
}

fn at(path: &Path, line: usize, message: impl Into<String>) -> PipelineError {
    PipelineError::SchemaAt {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn records(path: &Path) -> Result<(csv::StringRecord, Vec<(usize, csv::StringRecord)>), PipelineError> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| PipelineError::schema(path, e.to_string()))?
        .clone();
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        // header is line 1
        let line = k + 2;
        let rec = rec.map_err(|e| at(path, line, e.to_string()))?;
        rows.push((line, rec));
    }
    Ok((headers, rows))
}

fn number(rec: &csv::StringRecord, col: usize, name: &str, path: &Path, line: usize) -> Result<f64, PipelineError> {
    let raw = rec.get(col).unwrap_or("");
    let v: f64 = raw
        .parse()
        .map_err(|_| at(path, line, format!("{name} '{raw}' is not a number")))?;
    if !v.is_finite() {
        return Err(at(path, line, format!("{name} is not finite")));
    }
    Ok(v)
}

/// Daily mean temperatures, `date,temperature` with an optional `cell_id`
/// column. Rows without a cell column are grouped under the empty id.
pub fn read_daily_temperatures(path: &Path) -> Result<BTreeMap<String, Vec<(NaiveDate, f64)>>, PipelineError> {
    let (headers, rows) = records(path)?;
    let date_col = column(&headers, "date", path)?;
    let temp_col = column(&headers, "temperature", path)?;
    let cell_col = headers.iter().position(|h| h == "cell_id");
    let mut out: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (line, rec) in rows {
        let raw = rec.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .map_err(|_| at(path, line, format!("date '{raw}' is not YYYY-MM-DD")))?;
        let t = number(&rec, temp_col, "temperature", path, line)?;
        let cell = cell_col.and_then(|c| rec.get(c)).unwrap_or("").to_string();
        out.entry(cell).or_default().push((date, t));
    }
    if out.is_empty() {
        return Err(PipelineError::schema(path, "no temperature rows"));
    }
    Ok(out)
}

/// Degree-day profile of a single-cell temperature file.
pub fn read_profile(path: &Path) -> Result<DegreeDayProfile, PipelineError> {
    let cells = read_daily_temperatures(path)?;
    if cells.len() != 1 {
        return Err(PipelineError::schema(
            path,
            format!("expected one climate cell, found {}", cells.len()),
        ));
    }
    let days = cells.into_values().next().expect("one cell");
    DegreeDayProfile::from_daily(&days).map_err(|e| PipelineError::schema(path, e.to_string()))
}

/// Annual cooling demand per building, `building_id,cool_demand` in Wh/y.
pub fn read_cooling_run(path: &Path) -> Result<BTreeMap<String, f64>, PipelineError> {
    let (headers, rows) = records(path)?;
    let id_col = column(&headers, "building_id", path)?;
    let val_col = column(&headers, "cool_demand", path)?;
    let mut out = BTreeMap::new();
    for (line, rec) in rows {
        let id = rec.get(id_col).unwrap_or("").to_string();
        let v = number(&rec, val_col, "cool_demand", path, line)?;
        if v < 0.0 {
            return Err(at(path, line, "cool_demand is negative"));
        }
        if out.insert(id.clone(), v).is_some() {
            return Err(at(path, line, format!("duplicate building '{id}'")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Point),
    Area(MultiPolygon),
}

impl Geometry {
    pub fn representative_point(&self) -> Option<Point> {
        match self {
            Geometry::Point(p) => Some(*p),
            Geometry::Area(m) => m.representative_point(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub id: String,
    pub geometry: Geometry,
    pub properties: Map<String, Value>,
}

impl Feature {
    pub fn number(&self, key: &str) -> Option<f64> {
        self.properties.get(key).and_then(Value::as_f64)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.properties.get(key).and_then(Value::as_str)
    }
}

fn coords_point(v: &Value) -> Option<Point> {
    let a = v.as_array()?;
    if a.len() < 2 {
        return None;
    }
    Some([a[0].as_f64()?, a[1].as_f64()?])
}

fn coords_ring(v: &Value) -> Option<Vec<Point>> {
    v.as_array()?.iter().map(coords_point).collect()
}

fn coords_polygon(v: &Value) -> Result<Polygon, String> {
    let rings: Vec<Vec<Point>> = v
        .as_array()
        .ok_or("polygon coordinates must be an array")?
        .iter()
        .map(|r| coords_ring(r).ok_or_else(|| "malformed ring".to_string()))
        .collect::<Result<_, _>>()?;
    let mut it = rings.into_iter();
    let exterior = it.next().ok_or("polygon without rings")?;
    Polygon::new(exterior, it.collect()).map_err(|e| e.to_string())
}

pub fn parse_geometry(v: &Value) -> Result<Geometry, String> {
    let kind = v.get("type").and_then(Value::as_str).ok_or("geometry without type")?;
    let coords = v.get("coordinates").ok_or("geometry without coordinates")?;
    match kind {
        "Point" => coords_point(coords).map(Geometry::Point).ok_or_else(|| "malformed point".into()),
        "Polygon" => Ok(Geometry::Area(MultiPolygon(vec![coords_polygon(coords)?]))),
        "MultiPolygon" => {
            let parts = coords
                .as_array()
                .ok_or("multipolygon coordinates must be an array")?
                .iter()
                .map(coords_polygon)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Geometry::Area(MultiPolygon(parts)))
        }
        other => Err(format!("unsupported geometry type '{other}'")),
    }
}

fn feature_id(f: &Value) -> Option<String> {
    let id = f
        .get("properties")
        .and_then(|p| p.get("id"))
        .or_else(|| f.get("id"))?;
    match id {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Reads a FeatureCollection. Every feature needs a geometry and an `id`
/// (top-level or in the properties); ids must be unique.
pub fn read_features(path: &Path) -> Result<Vec<Feature>, PipelineError> {
    let text = read_text(path)?;
    let root: Value = serde_json::from_str(&text).map_err(|e| at(path, e.line(), e.to_string()))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(PipelineError::schema(path, "expected a FeatureCollection"));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| PipelineError::schema(path, "missing features array"))?;
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(features.len());
    for (k, f) in features.iter().enumerate() {
        let fail = |m: String| PipelineError::schema(path, format!("feature {k}: {m}"));
        let id = feature_id(f).ok_or_else(|| fail("missing id".into()))?;
        if !seen.insert(id.clone()) {
            return Err(fail(format!("duplicate id '{id}'")));
        }
        let geometry = parse_geometry(f.get("geometry").ok_or_else(|| fail("missing geometry".into()))?).map_err(fail)?;
        let properties = f
            .get("properties")
            .and_then(Value::as_object)
            .cloned()
            .unwrap_or_default();
        out.push(Feature { id, geometry, properties });
    }
    Ok(out)
}

fn ring_json(ring: &[Point]) -> Value {
    let mut pts: Vec<Value> = ring.iter().map(|p| json!([p[0], p[1]])).collect();
    if let Some(first) = pts.first().cloned() {
        pts.push(first);
    }
    Value::Array(pts)
}

pub fn geometry_json(m: &MultiPolygon) -> Value {
    let polys: Vec<Value> = m
        .0
        .iter()
        .map(|p| Value::Array(p.rings().map(ring_json).collect()))
        .collect();
    if polys.len() == 1 {
        json!({"type": "Polygon", "coordinates": polys[0]})
    } else {
        json!({"type": "MultiPolygon", "coordinates": polys})
    }
}

pub fn point_json(p: Point) -> Value {
    json!({"type": "Point", "coordinates": [p[0], p[1]]})
}

pub fn feature_collection(features: Vec<(Value, Map<String, Value>)>) -> Value {
    let features: Vec<Value> = features
        .into_iter()
        .map(|(g, p)| json!({"type": "Feature", "geometry": g, "properties": p}))
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Other(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Writes a CSV table with a header row.
pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<(), PipelineError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| PipelineError::Other(e.to_string());
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::Other(e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a CSV written by [`write_csv`] as rows of named fields.
pub fn read_table(path: &Path) -> Result<Vec<BTreeMap<String, String>>, PipelineError> {
    let (headers, rows) = records(path)?;
    Ok(rows
        .into_iter()
        .map(|(_, rec)| headers.iter().map(str::to_string).zip(rec.iter().map(str::to_string)).collect())
        .collect())
}

pub fn write_profiles(path: &Path, profiles: &BTreeMap<String, DegreeDayProfile>) -> Result<(), PipelineError> {
    let mut header = vec!["cell_id".to_string()];
    header.extend((1..=12).map(|m| format!("hdd_{m:02}")));
    header.extend((1..=12).map(|m| format!("cdd_{m:02}")));
    header.extend(["w_hdd_max", "w_cdd_max", "t_m_heat", "t_m_cool"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = profiles.iter().map(|(cell, p)| {
        let mut row = vec![cell.clone()];
        row.extend(p.hdd.iter().chain(p.cdd.iter()).map(|v| v.to_string()));
        row.extend([p.w_hdd_max, p.w_cdd_max, p.t_m_heat, p.t_m_cool].map(|v| v.to_string()));
        row
    });
    write_csv(path, &header_refs, rows)
}
