//! CSV formats.
//!
//! * datasets: header `x0,..,x{d-1}` plus an optional `label` column; files
//!   without a header row (including whitespace-separated S-sets text files)
//!   are read as pure feature matrices
//! * partition plans: `point_index,client`
//! * centroid sets: `centroid_index,x0,..,x{d-1}`

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{Dataset, PartitionPlan};
use crate::error::{Error, Result};

struct Row {
    line: usize,
    fields: Vec<String>,
}

fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if !first.contains(',') {
        return Ok(text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| Row {
                line: i + 1,
                fields: l.split_whitespace().map(str::to_owned).collect(),
            })
            .collect());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(Row { line, fields: record.iter().map(str::to_owned).collect() });
    }
    Ok(rows)
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(path, line, format!("non-numeric value {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value {field:?}")));
    }
    Ok(v)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut rows = read_rows(path)?.into_iter().peekable();
    let header_row = match rows.peek() {
        None => return Err(parse_err(path, 1, "file contains no rows")),
        Some(r) if r.fields.iter().any(|f| f.parse::<f64>().is_err()) => rows.next(),
        Some(_) => None,
    };
    let (width, label_col) = match &header_row {
        Some(h) => (h.fields.len(), h.fields.iter().position(|f| f.eq_ignore_ascii_case("label"))),
        None => (rows.peek().map_or(0, |r| r.fields.len()), None),
    };
    let d = width - usize::from(label_col.is_some());
    if d == 0 {
        return Err(parse_err(path, 1, "no feature columns"));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for row in rows {
        if row.fields.len() != width {
            return Err(parse_err(
                path,
                row.line,
                format!("expected {width} fields, found {}", row.fields.len()),
            ));
        }
        for (c, field) in row.fields.iter().enumerate() {
            if Some(c) == label_col {
                let l: usize = field
                    .parse()
                    .map_err(|_| parse_err(path, row.line, format!("invalid label {field:?}")))?;
                labels.push(l);
            } else {
                values.push(parse_f64(path, row.line, field)?);
            }
        }
    }
    let n = values.len() / d;
    if n == 0 {
        return Err(parse_err(path, 1, "file contains no data rows"));
    }
    let points = Array2::from_shape_vec((n, d), values)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    Dataset::new(points, label_col.map(|_| labels), None)
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = dataset.dim();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    if dataset.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut rec: Vec<String> = dataset.point(i).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = dataset.labels() {
            rec.push(labels[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_plan_csv(plan: &PartitionPlan, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point_index", "client"])?;
    for (i, c) in plan.client_of().iter().enumerate() {
        w.write_record([i.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_plan_csv(path: impl AsRef<Path>) -> Result<PartitionPlan> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let mut pairs = Vec::new();
    for row in rows.iter().skip(1) {
        if row.fields.len() != 2 {
            return Err(parse_err(path, row.line, "expected point_index,client"));
        }
        let parse = |f: &str| {
            f.parse::<usize>()
                .map_err(|_| parse_err(path, row.line, format!("invalid index {f:?}")))
        };
        pairs.push((parse(&row.fields[0])?, parse(&row.fields[1])?));
    }
    let n = pairs.len();
    let mut client_of = vec![usize::MAX; n];
    for (i, c) in pairs {
        if i >= n || client_of[i] != usize::MAX {
            return Err(Error::InvalidPartition(format!("point index {i} missing or repeated")));
        }
        client_of[i] = c;
    }
    let m = client_of.iter().max().map_or(0, |c| c + 1);
    PartitionPlan::new(client_of, m)
}

pub fn save_centroids_csv(centroids: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["centroid_index".to_string()];
    header.extend((0..centroids.ncols()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (i, row) in centroids.rows().into_iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_centroids_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let header = rows.first().ok_or_else(|| parse_err(path, 1, "file contains no rows"))?;
    let width = header.fields.len();
    if width < 2 {
        return Err(parse_err(path, header.line, "expected centroid_index,x0,.."));
    }
    let mut values = Vec::new();
    for row in rows.iter().skip(1) {
        if row.fields.len() != width {
            return Err(parse_err(
                path,
                row.line,
                format!("expected {width} fields, found {}", row.fields.len()),
            ));
        }
        for f in &row.fields[1..] {
            values.push(parse_f64(path, row.line, f)?);
        }
    }
    let k = values.len() / (width - 1);
    Array2::from_shape_vec((k, width - 1), values).map_err(|e| Error::InvalidDataset(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn round_trip_preserves_values() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(
            array![[0.1, -2.5], [1e-17, 3.0e6], [std::f64::consts::PI, 7.0]],
            Some(vec![0, 1, 0]),
            None,
        )
        .unwrap();
        let p = dir.path().join("ds.csv");
        save_csv(&ds, &p).unwrap();
        assert_eq!(load_csv(&p).unwrap(), ds);
    }

    #[test]
    fn reads_label_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "x0,x1,label\n0,0,0\n1,1,1\n");
        let ds = load_csv(&p).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 2));
        assert_eq!(ds.labels(), Some(&[0, 1][..]));
    }

    #[test]
    fn ragged_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bad.csv", "x0,x1\n0,0\n1\n2,2\n");
        match load_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_feature_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bad.csv", "x0,x1\n0,zero\n");
        assert!(matches!(load_csv(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn whitespace_sset_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "s1.txt", "    664159    550946\n    665845    557965\n");
        let ds = load_csv(&p).unwrap();
        assert_eq!(ds.points(), &array![[664159.0, 550946.0], [665845.0, 557965.0]]);
        assert!(ds.labels().is_none());
    }

    #[test]
    fn plan_and_centroid_files() {
        let dir = tempfile::tempdir().unwrap();
        let plan = PartitionPlan::new(vec![1, 0, 2, 1], 3).unwrap();
        let p = dir.path().join("plan.csv");
        save_plan_csv(&plan, &p).unwrap();
        assert_eq!(load_plan_csv(&p).unwrap(), plan);

        let c = array![[0.5, 1.25], [-3.0, 4.0]];
        let p = dir.path().join("c.csv");
        save_centroids_csv(&c, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "centroid_index,x0,x1\n0,0.5,1.25\n1,-3,4\n");
        assert_eq!(load_centroids_csv(&p).unwrap(), c);
    }
}
