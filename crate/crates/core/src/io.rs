//! Field and monitor files.
//!
//! Field CSV: a first line `# key=value key=value ...` with grid metadata,
//! then a header and one row per (x, v) node:
//! `ix[,iy,iz],vx,vy,vz,fA,fB`.

use crate::error::{Error, Result};
use crate::solver::MonitorRecord;
use crate::vgrid::{DistributionPair, SpatialGrid, VelocityGrid};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Grid metadata and values read from a field file.
#[derive(Clone, Debug)]
pub struct FieldFile {
    pub metadata: BTreeMap<String, String>,
    pub vgrid: VelocityGrid,
    pub xgrid: SpatialGrid,
    pub field: DistributionPair,
}

fn meta_f64(meta: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v = meta.get(key).ok_or_else(|| Error::Parse { line: 1, message: format!("metadata lacks `{key}`") })?;
    v.parse().map_err(|_| Error::Parse { line: 1, message: format!("metadata `{key}` = `{v}` is not a number") })
}

pub fn write_field(
    path: &Path,
    vgrid: &VelocityGrid,
    xgrid: &SpatialGrid,
    f: &DistributionPair,
    extra: &[(&str, String)],
) -> Result<()> {
    f.check_shape(xgrid, vgrid)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut meta = format!(
        "# radius={} points_per_axis={} spatial_dims={} spatial_points={}",
        vgrid.radius(),
        vgrid.points_per_axis(),
        xgrid.dims(),
        xgrid.points_per_axis()
    );
    for (k, v) in extra {
        meta.push_str(&format!(" {k}={v}"));
    }
    writeln!(w, "{meta}").map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = ["ix", "iy", "iz"][..xgrid.dims()].to_vec();
    header.extend(["vx", "vy", "vz", "fA", "fB"]);
    csv.write_record(&header).map_err(|e| Error::io(path, e.into()))?;
    let nv = vgrid.len();
    for x in 0..xgrid.len() {
        let c = xgrid.coords(x);
        for (i, v) in vgrid.nodes().iter().enumerate() {
            let mut row: Vec<String> = c[..xgrid.dims()].iter().map(|k| k.to_string()).collect();
            row.extend(v.iter().map(|a| a.to_string()));
            row.push(f.species(0)[x * nv + i].to_string());
            row.push(f.species(1)[x * nv + i].to_string());
            csv.write_record(&row).map_err(|e| Error::io(path, e.into()))?;
        }
    }
    csv.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let meta_line = first
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse { line: 1, message: "expected a `# key=value ...` metadata line".into() })?;
    let mut metadata = BTreeMap::new();
    for tok in meta_line.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: 1, message: format!("bad metadata token `{tok}`") })?;
        metadata.insert(k.to_string(), v.to_string());
    }
    let vgrid = VelocityGrid::new(meta_f64(&metadata, "radius")?, meta_f64(&metadata, "points_per_axis")? as usize)?;
    let xgrid = SpatialGrid::new(meta_f64(&metadata, "spatial_dims")? as usize, meta_f64(&metadata, "spatial_points")? as usize)?;
    let nv = vgrid.len();
    let total = nv * xgrid.len();
    let dims = xgrid.dims();
    let mut a = vec![0.0; total];
    let mut b = vec![0.0; total];
    let mut filled = vec![false; total];
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    for (k, rec) in csv.records().enumerate() {
        let line = k + 3;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if rec.len() != dims + 5 {
            return Err(Error::Parse { line, message: format!("expected {} columns, got {}", dims + 5, rec.len()) });
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse { line, message: "non-numeric entry".into() })?;
        let mut c = [0usize; 3];
        for d in 0..dims {
            if vals[d] < 0.0 || vals[d] as usize >= xgrid.points_per_axis() || vals[d].fract() != 0.0 {
                return Err(Error::Parse { line, message: format!("spatial index {} out of range", vals[d]) });
            }
            c[d] = vals[d] as usize;
        }
        let x = xgrid.index(c);
        let v = [vals[dims], vals[dims + 1], vals[dims + 2]];
        let h = vgrid.spacing();
        let r = vgrid.radius();
        let mut idx = [0usize; 3];
        for ax in 0..3 {
            let s = (v[ax] + r) / h;
            let k = s.round();
            if (s - k).abs() > 1e-6 || k < 0.0 || k as usize >= vgrid.points_per_axis() {
                return Err(Error::Parse { line, message: format!("velocity {:?} is not a grid node", v) });
            }
            idx[ax] = k as usize;
        }
        let p = x * nv + vgrid.index(idx[0], idx[1], idx[2]);
        if filled[p] {
            return Err(Error::Parse { line, message: "duplicate node".into() });
        }
        filled[p] = true;
        a[p] = vals[dims + 3];
        b[p] = vals[dims + 4];
    }
    if let Some(p) = filled.iter().position(|f| !f) {
        return Err(Error::Parse { line: 0, message: format!("node {p} missing from the field file") });
    }
    let field = DistributionPair::from_parts(a, b, xgrid.len(), nv)?;
    Ok(FieldFile { metadata, vgrid, xgrid, field })
}

pub fn write_monitors(path: &Path, labels: &[String], records: &[MonitorRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Writer::from_writer(BufWriter::new(file));
    csv.write_record(MonitorRecord::header(labels)).map_err(|e| Error::io(path, e.into()))?;
    for r in records {
        csv.write_record(r.row().iter().map(|x| x.to_string())).map_err(|e| Error::io(path, e.into()))?;
    }
    csv.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes rows of numbers under a header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Writer::from_writer(BufWriter::new(file));
    csv.write_record(header).map_err(|e| Error::io(path, e.into()))?;
    for r in rows {
        csv.write_record(r.iter().map(|x| x.to_string())).map_err(|e| Error::io(path, e.into()))?;
    }
    csv.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Same table as CSV text.
pub fn table_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}
