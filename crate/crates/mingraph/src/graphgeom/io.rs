//! Grid map serialization: a CSV file with one row per node in row-major
//! order plus a JSON sidecar carrying the domain metadata. Floats are
//! written in shortest round-trip form, so write -> read is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::graphgeom::{Domain, DomainMeta, GridMap};

const AXIS_NAMES: [&str; 3] = ["i", "j", "k"];

/// Sidecar path convention: `map.csv` -> `map.meta.json`; any other name
/// gets `.meta.json` appended.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let name = csv_path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let base = name.strip_suffix(".csv").unwrap_or(name);
    csv_path.with_file_name(format!("{base}.meta.json"))
}

pub fn gridmap_to_csv_string(map: &GridMap) -> String {
    let d = map.domain();
    let m = d.dim();
    let n = map.target_dim();
    let mut header: Vec<String> = AXIS_NAMES[..m].iter().map(|s| s.to_string()).collect();
    header.extend((1..=n).map(|c| format!("f{c}")));

    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for node in 0..d.node_count() {
        let multi = d.node_multi(node);
        let mut fields: Vec<String> = multi.iter().map(|i| i.to_string()).collect();
        fields.extend(map.node_value(node).iter().map(|v| v.to_string()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn sidecar_to_json_string(map: &GridMap) -> String {
    let meta = map.domain().meta(map.target_dim());
    let mut s = serde_json::to_string_pretty(&meta).expect("domain metadata serializes");
    s.push('\n');
    s
}

/// Writes `<path>` (CSV) and its sidecar.
pub fn write_gridmap(map: &GridMap, csv_path: &Path) -> Result<()> {
    fs::write(csv_path, gridmap_to_csv_string(map))?;
    fs::write(sidecar_path(csv_path), sidecar_to_json_string(map))?;
    Ok(())
}

/// Reads a CSV + sidecar pair written by [`write_gridmap`]. Row order and
/// node indices are validated, not inferred.
pub fn read_gridmap(csv_path: &Path) -> Result<GridMap> {
    let meta_path = sidecar_path(csv_path);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| {
        invalid(format!("cannot read sidecar {}: {e}", meta_path.display()))
    })?;
    let meta: DomainMeta = serde_json::from_str(&meta_text)
        .map_err(|e| invalid(format!("malformed sidecar {}: {e}", meta_path.display())))?;
    let csv_text = fs::read_to_string(csv_path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", csv_path.display())))?;
    parse_gridmap(&csv_text, &meta)
}

pub fn parse_gridmap(csv_text: &str, meta: &DomainMeta) -> Result<GridMap> {
    let domain = Domain::new(meta.extents.clone(), meta.resolution.clone())?;
    let m = domain.dim();
    let n = meta.target_dim;
    if n == 0 {
        return Err(invalid("sidecar target_dim must be positive"));
    }

    let mut lines = csv_text.lines();
    let header = lines.next().ok_or_else(|| invalid("csv is empty"))?;
    let mut expected: Vec<String> = AXIS_NAMES[..m].iter().map(|s| s.to_string()).collect();
    expected.extend((1..=n).map(|c| format!("f{c}")));
    let got: Vec<&str> = header.split(',').collect();
    if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(invalid(format!(
            "csv header {header:?} does not match domain metadata (expected {})",
            expected.join(",")
        )));
    }

    let mut values = Vec::with_capacity(domain.node_count() * n);
    let mut node = 0usize;
    for (row_no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        if node >= domain.node_count() {
            return Err(invalid("csv has more rows than grid nodes"));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != m + n {
            return Err(invalid(format!(
                "csv row {} has {} fields, expected {}",
                row_no + 2,
                fields.len(),
                m + n
            )));
        }
        let expected_multi = domain.node_multi(node);
        for (d, &f) in fields[..m].iter().enumerate() {
            let idx: usize = f
                .parse()
                .map_err(|_| invalid(format!("csv row {}: bad index {f:?}", row_no + 2)))?;
            if idx != expected_multi[d] {
                return Err(invalid(format!(
                    "csv row {} is out of row-major order (index {idx} where {} was expected)",
                    row_no + 2,
                    expected_multi[d]
                )));
            }
        }
        for &f in &fields[m..] {
            let v: f64 = f
                .parse()
                .map_err(|_| invalid(format!("csv row {}: bad value {f:?}", row_no + 2)))?;
            values.push(v);
        }
        node += 1;
    }
    if node != domain.node_count() {
        return Err(invalid(format!(
            "csv has {node} data rows, expected {}",
            domain.node_count()
        )));
    }
    GridMap::new(domain, n, values)
}

/// Serializes any report type to pretty JSON with a trailing newline
/// (field order is the struct declaration order, so bytes are stable).
pub fn report_to_json_string<T: serde::Serialize>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}
