//! CSV formats: the soils table, the long retention table and the table of
//! fitted retention parameters. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use cpxr_ptf_core::dataset::{DatasetError, Sample};
use cpxr_ptf_core::hydrology::{names, HydrologyError, RetentionPoint};
use cpxr_ptf_core::{Dataset, VgParameters};
use thiserror::Error;

use crate::artifact::Provenance;

/// Columns read as features; every other column except `id` is a target.
pub const FEATURE_COLUMNS: [&str; 8] = [
    names::SAND,
    names::SILT,
    names::CLAY,
    names::BULK_DENSITY,
    names::DG,
    names::SIGMA_G,
    names::INTERNAL_DIAMETER,
    names::LENGTH,
];

/// Cell values read as missing.
pub const MISSING: [&str; 2] = ["", "NA"];

pub const TENSION: &str = "tension_cm";
pub const THETA: &str = "theta";
pub const FIT_RMSE: &str = "fit_rmse";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}: column `{column}` appears twice")]
    DuplicateColumn { path: String, column: String },
    #[error("{path}, line {line}: empty sample id")]
    EmptyId { path: String, line: u64 },
    #[error("{path}, line {line}: column `{column}`: cannot parse `{value}` as a number")]
    Parse { path: String, line: u64, column: String, value: String },
    #[error("{path}, line {line}: {source}")]
    Parameters { path: String, line: u64, source: HydrologyError },
    #[error("{path}: {source}")]
    Dataset { path: String, source: DatasetError },
}

/// Lower-cases a header and maps accepted aliases to canonical names.
pub fn canonical(header: &str) -> String {
    let h = header.trim().to_ascii_lowercase();
    match h.as_str() {
        "log_ksat" => names::LN_KSAT.to_string(),
        _ => h,
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Table {
    path: String,
    headers: Vec<String>,
    reader: csv::Reader<File>,
}

impl Table {
    fn open(path: &Path) -> Result<Self, IoError> {
        let shown = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|source| IoError::Csv { path: shown.clone(), source })?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|source| IoError::Csv { path: shown.clone(), source })?
            .iter()
            .map(canonical)
            .collect();
        for (i, h) in headers.iter().enumerate() {
            if headers[..i].contains(h) {
                return Err(IoError::DuplicateColumn { path: shown, column: h.clone() });
            }
        }
        Ok(Self { path: shown, headers, reader })
    }

    fn column(&self, name: &str) -> Result<usize, IoError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::MissingColumn { path: self.path.clone(), column: name.into() })
    }

    /// Yields `(line, record)` pairs.
    fn rows(&mut self) -> impl Iterator<Item = Result<(u64, csv::StringRecord), IoError>> + '_ {
        let path = self.path.clone();
        self.reader.records().map(move |r| {
            let rec = r.map_err(|source| IoError::Csv { path: path.clone(), source })?;
            let line = rec.position().map_or(0, |p| p.line());
            Ok((line, rec))
        })
    }

    fn number(&self, line: u64, column: usize, raw: &str) -> Result<Option<f64>, IoError> {
        if MISSING.contains(&raw) {
            return Ok(None);
        }
        raw.parse::<f64>().map(Some).map_err(|_| IoError::Parse {
            path: self.path.clone(),
            line,
            column: self.headers[column].clone(),
            value: raw.into(),
        })
    }

    fn required(&self, line: u64, column: usize, raw: &str) -> Result<f64, IoError> {
        self.number(line, column, raw)?.ok_or_else(|| IoError::Parse {
            path: self.path.clone(),
            line,
            column: self.headers[column].clone(),
            value: raw.into(),
        })
    }

    fn id(&self, line: u64, raw: &str) -> Result<String, IoError> {
        if raw.is_empty() {
            return Err(IoError::EmptyId { path: self.path.clone(), line });
        }
        Ok(raw.to_string())
    }
}

/// Reads a soils table. Structural invariants are enforced here; the
/// texture-sum rule is left to [`Dataset::check_texture`].
pub fn read_soils(path: &Path) -> Result<Dataset, IoError> {
    let mut table = Table::open(path)?;
    let id_col = table.column(names::ID)?;
    let headers = table.headers.clone();
    let is_feature = |h: &str| FEATURE_COLUMNS.contains(&h);
    let mut samples = Vec::new();
    let rows: Vec<_> = table.rows().collect::<Result<_, _>>()?;
    for (line, rec) in rows {
        let mut sample = Sample::new(table.id(line, &rec[id_col])?);
        for (j, h) in headers.iter().enumerate() {
            if j == id_col {
                continue;
            }
            if let Some(v) = table.number(line, j, rec.get(j).unwrap_or(""))? {
                if is_feature(h) {
                    sample.features.insert(h.clone(), v);
                } else {
                    sample.targets.insert(h.clone(), v);
                }
            }
        }
        samples.push(sample);
    }
    let features = headers.iter().filter(|h| is_feature(h)).cloned().collect();
    let targets =
        headers.iter().enumerate().filter(|&(j, h)| j != id_col && !is_feature(h)).map(|(_, h)| h.clone()).collect();
    Dataset::new(samples, features, targets).map_err(|source| IoError::Dataset { path: table.path, source })
}

/// Reads a soils table and applies the texture-sum rule.
pub fn read_soils_checked(path: &Path) -> anyhow::Result<Dataset> {
    let data = read_soils(path)?;
    data.check_texture().with_context(|| path.display().to_string())?;
    Ok(data)
}

/// Long-format retention measurements grouped by sample, in order of first
/// appearance.
pub fn read_retention(path: &Path) -> Result<Vec<(String, Vec<RetentionPoint>)>, IoError> {
    let mut table = Table::open(path)?;
    let (id_col, h_col, t_col) = (table.column(names::ID)?, table.column(TENSION)?, table.column(THETA)?);
    let mut groups: Vec<(String, Vec<RetentionPoint>)> = Vec::new();
    let mut index = BTreeMap::new();
    let rows: Vec<_> = table.rows().collect::<Result<_, _>>()?;
    for (line, rec) in rows {
        let id = table.id(line, &rec[id_col])?;
        let h = table.required(line, h_col, &rec[h_col])?;
        let theta = table.required(line, t_col, &rec[t_col])?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            groups.push((id, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(RetentionPoint::new(h, theta));
    }
    Ok(groups)
}

/// Fitted retention parameters, one row per sample.
pub fn read_params(path: &Path) -> Result<Vec<(String, VgParameters)>, IoError> {
    let mut table = Table::open(path)?;
    let id_col = table.column(names::ID)?;
    let tr = table.column(names::THETA_R)?;
    let ts = table.column(names::THETA_S)?;
    let a = table.column(names::ALPHA)?;
    let n = table.column(names::N)?;
    let rmse_col = table.column(FIT_RMSE).ok();
    let mut out = Vec::new();
    let rows: Vec<_> = table.rows().collect::<Result<_, _>>()?;
    for (line, rec) in rows {
        let id = table.id(line, &rec[id_col])?;
        let value = |c: usize| table.required(line, c, &rec[c]);
        let mut p = VgParameters::new(value(tr)?, value(ts)?, value(a)?, value(n)?)
            .map_err(|source| IoError::Parameters { path: table.path.clone(), line, source })?;
        if let Some(c) = rmse_col {
            p.fit_rmse = table.number(line, c, &rec[c])?.unwrap_or(0.0);
        }
        out.push((id, p));
    }
    Ok(out)
}

/// Writes a CSV table preceded by the provenance comment.
pub fn write_table<I>(path: &Path, provenance: &Provenance, header: &[String], rows: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    provenance.write_comment(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_soils(path: &Path, provenance: &Provenance, data: &Dataset) -> anyhow::Result<()> {
    let mut header = vec![names::ID.to_string()];
    header.extend(data.feature_names().iter().cloned());
    header.extend(data.target_names().iter().cloned());
    let rows = data.samples().iter().map(|s| {
        let mut row = vec![s.id.clone()];
        row.extend(data.feature_names().iter().map(|f| opt(s.feature(f))));
        row.extend(data.target_names().iter().map(|t| opt(s.targets.get(t).copied())));
        row
    });
    write_table(path, provenance, &header, rows)
}

pub fn write_retention(
    path: &Path,
    provenance: &Provenance,
    groups: &[(String, Vec<RetentionPoint>)],
) -> anyhow::Result<()> {
    let header = [names::ID, TENSION, THETA].map(String::from);
    let rows =
        groups.iter().flat_map(|(id, pts)| pts.iter().map(move |p| vec![id.clone(), num(p.tension), num(p.theta)]));
    write_table(path, provenance, &header, rows)
}

pub fn write_params(path: &Path, provenance: &Provenance, rows: &[(String, VgParameters)]) -> anyhow::Result<()> {
    let header = [names::ID, names::THETA_R, names::THETA_S, names::ALPHA, names::N, FIT_RMSE].map(String::from);
    let rows = rows
        .iter()
        .map(|(id, p)| vec![id.clone(), num(p.theta_r), num(p.theta_s), num(p.alpha), num(p.n), num(p.fit_rmse)]);
    write_table(path, provenance, &header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn prov() -> Provenance {
        Provenance::new("test", 0, &0).unwrap()
    }

    #[test]
    fn four_sample_texture_table() {
        let f = file("id,Sand,Silt,Clay\n1,83,14,3\n2,84.6,14.4,3\n3,81.5,15,2\n4,85,13,1\n");
        let d = read_soils(f.path()).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.feature_names(), ["sand", "silt", "clay"]);
        assert_eq!(d.get("2").unwrap().feature("sand"), Some(84.6));
        // Sample 2 sums to 102 and fails the separate texture rule.
        let err = read_soils_checked(f.path()).unwrap_err();
        assert!(format!("{err:#}").contains("`2`"), "{err:#}");
    }

    #[test]
    fn header_only_is_empty() {
        let f = file("id,sand,silt,clay\n");
        assert!(read_soils(f.path()).unwrap().is_empty());
    }

    #[test]
    fn parse_failure_names_the_line() {
        let f = file("# comment\nid,sand,silt,clay\n1,83,14,3\n2,abc,14,3\n");
        match read_soils(f.path()) {
            Err(IoError::Parse { line, column, value, .. }) => {
                assert_eq!((line, column.as_str(), value.as_str()), (4, "sand", "abc"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        let f = file("id,sand\n1,3\n1,4\n");
        assert!(matches!(read_soils(f.path()), Err(IoError::Dataset { source: DatasetError::DuplicateId(_), .. })));
        let f = file("sand,silt\n1,2\n");
        assert!(matches!(read_soils(f.path()), Err(IoError::MissingColumn { .. })));
        let f = file("id,sand,Sand\n1,2,3\n");
        assert!(matches!(read_soils(f.path()), Err(IoError::DuplicateColumn { .. })));
        let f = file("id,theta_10\n1,1.5\n");
        assert!(matches!(read_soils(f.path()), Err(IoError::Dataset { .. })));
    }

    #[test]
    fn missing_cells_and_aliases() {
        let f = file("id,sand,length_cm,log_ksat\na,50,,1.5\nb,40,NA,\n");
        let d = read_soils(f.path()).unwrap();
        assert_eq!(d.target_names(), ["ln_ksat"]);
        assert_eq!(d.get("a").unwrap().feature(names::LENGTH), None);
        assert_eq!(d.get("a").unwrap().value(names::LN_KSAT), Some(1.5));
        assert_eq!(d.get("b").unwrap().value(names::LN_KSAT), None);
    }

    #[test]
    fn soils_round_trip_exactly() {
        let f =
            file("id,sand,silt,clay,bulk_density,theta_10\na,33.3,33.3,33.4,1.4123456789012345,0.1\nb,10,60,30,,0.3\n");
        let d = read_soils(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_soils(out.path(), &prov(), &d).unwrap();
        assert_eq!(read_soils(out.path()).unwrap(), d);
    }

    #[test]
    fn retention_groups_by_first_appearance() {
        let f = file("id,tension_cm,theta\nb,0,0.4\na,0,0.5\nb,100,0.2\n");
        let g = read_retention(f.path()).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].0, "b");
        assert_eq!(g[0].1, vec![RetentionPoint::new(0.0, 0.4), RetentionPoint::new(100.0, 0.2)]);
        let out = tempfile::NamedTempFile::new().unwrap();
        write_retention(out.path(), &prov(), &g).unwrap();
        assert_eq!(read_retention(out.path()).unwrap(), g);
        let f = file("id,tension_cm,theta\nb,0,\n");
        assert!(matches!(read_retention(f.path()), Err(IoError::Parse { line: 2, .. })));
    }

    #[test]
    fn params_round_trip_and_validate() {
        let mut p = VgParameters::new(0.05, 0.45, 0.02, 1.6).unwrap();
        p.fit_rmse = 0.001;
        let rows = vec![("s1".to_string(), p)];
        let out = tempfile::NamedTempFile::new().unwrap();
        write_params(out.path(), &prov(), &rows).unwrap();
        assert_eq!(read_params(out.path()).unwrap(), rows);
        let f = file("id,theta_r,theta_s,alpha_per_cm,n\nx,0.5,0.4,0.02,1.5\n");
        assert!(matches!(read_params(f.path()), Err(IoError::Parameters { line: 2, .. })));
    }
}
